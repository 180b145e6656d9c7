//! Sweeps every mechanism and strategy on one scenario, then summarises
//! prices and the DSO cost-benefit split.

use flexmarket::agents::Strategy;
use flexmarket::game::{sweep, GameConfig};
use flexmarket::market::Mechanism;
use flexmarket::reporting::{mechanism_cost_benefit, price_stats, ReportContext};
use flexmarket::scenario::Scenario;

fn main() -> flexmarket::Result<()> {
    let scenario = Scenario::bundled("nze")?;
    let setup = scenario.market_setup(&scenario.supply_curves()?)?;
    let req = scenario.requirement;
    let ctx = ReportContext {
        demand: req.demand,
        ceiling: req.ceiling,
        window_hours: req.window_hours,
    };
    let template = GameConfig::new(Mechanism::Pab, Strategy::Op, 3);
    let table = sweep(&[("nze".into(), setup)], &Mechanism::ALL, &Strategy::STRATEGIC, &[3, 6], &template);
    let rows = table.rows();

    println!("mechanism strategy  min median  max");
    for s in price_stats(&rows, &ctx) {
        println!("{:>9} {:>8} {:>4.1} {:>6.1} {:>4.1}", s.mechanism, s.strategy, s.min, s.median, s.max);
    }
    for cb in mechanism_cost_benefit(&rows, &ctx) {
        println!("{}: DSO cost {:.1} £, benefit {:.1} £, provider profit share {:.3}", cb.label, cb.dso_cost, cb.dso_benefit, cb.profit_share);
    }
    Ok(())
}
