//! Shows how each accepted agent's Clarke-pivot payment follows from clearing
//! the book without that agent.

use flexmarket::market::{clear, vcg_payments, Offer, OfferBook, ServiceRequirement};
use flexmarket::model::TimeGrid;

fn main() -> flexmarket::Result<()> {
    let grid = TimeGrid::half_hourly_day();
    let req = ServiceRequirement::new(1.5, 50.0, &grid, grid.window(16.5, 18.5)?)?;
    let book = OfferBook::new(vec![
        Offer { capacities: vec![1.0], prices: vec![5.0] },
        Offer { capacities: vec![0.7], prices: vec![8.0] },
        Offer { capacities: vec![1.0], prices: vec![14.0] },
    ])?;
    let with_all = clear(&book, &req)?;
    let settlement = vcg_payments(&book, &req)?;
    for (a, s) in settlement.agents.iter().enumerate() {
        let without = clear(&book.without(a), &req)?;
        println!(
            "agent {a}: accepted {:.2} MW, price without it {} £/MW/h, paid {:.2} £ (rate {:?})",
            with_all.agent_total(a),
            without.mcp,
            s.revenue,
            s.rates,
        );
    }
    println!("uniform price with everyone {} £/MW/h", with_all.mcp);
    Ok(())
}
