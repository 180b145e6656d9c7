//! Clears a hand-written offer book and settles it under each mechanism.

use flexmarket::market::{clear, settle, Mechanism, Offer, OfferBook, ServiceRequirement};
use flexmarket::model::TimeGrid;

fn main() -> flexmarket::Result<()> {
    let grid = TimeGrid::half_hourly_day();
    let req = ServiceRequirement::new(2.5, 50.0, &grid, grid.window(16.5, 18.5)?)?;
    let book = OfferBook::new(vec![
        Offer { capacities: vec![0.8, 0.4], prices: vec![6.0, 12.0] },
        Offer { capacities: vec![1.0, 0.5], prices: vec![9.0, 15.0] },
        Offer { capacities: vec![0.6, 0.0], prices: vec![20.0, 20.0] },
    ])?;
    let result = clear(&book, &req)?;
    println!("clearing price {} £/MW/h, unmet {:.3} MW", result.mcp, result.unmet);
    for (a, acc) in result.accepted.iter().enumerate() {
        let blocks: Vec<String> = acc.iter().map(|q| format!("{q:.3}")).collect();
        println!("  agent {a}: accepted [{}] MW", blocks.join(", "));
    }
    for m in Mechanism::ALL {
        let s = settle(&result, &book, &req, m)?;
        let revenues: Vec<String> = s.agents.iter().map(|a| format!("{:.2}", a.revenue)).collect();
        println!("{m}: DSO pays {:.2} £ ({})", s.dso_payment, revenues.join(", "));
    }
    Ok(())
}
