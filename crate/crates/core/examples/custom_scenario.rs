//! Derives a scenario from a bundled one by editing its TOML, then compares
//! the true clearing prices.

use std::path::Path;

use flexmarket::scenario::Scenario;

const CT: &str = include_str!("../scenarios/ct.toml");

fn main() -> flexmarket::Result<()> {
    let base = Scenario::parse(CT, Path::new("ct.toml"))?;
    let text = CT.replace("name = \"CT\"", "name = \"CT-double-storage\"").replace("power_kw = 236.0", "power_kw = 472.0");
    let variant = Scenario::parse(&text, Path::new("ct-double-storage.toml"))?;
    for s in [base, variant] {
        let setup = s.market_setup(&s.supply_curves()?)?;
        println!("{}: storage {} kW, true price {} £/MW/h", s.name, s.ees.power_kw, setup.true_price()?);
    }

    // invalid values are rejected before any model is built
    let broken = CT.replace("demand_mw = 2.5", "demand_mw = -1.0");
    if let Err(e) = Scenario::parse(&broken, Path::new("broken.toml")) {
        println!("rejected: {e}");
    }
    Ok(())
}
