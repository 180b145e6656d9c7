//! Builds the per-class and aggregate offer curves for every bundled
//! scenario and reports where each crosses the flexibility demand.

use flexmarket::model::true_equilibrium;
use flexmarket::scenario::Scenario;

fn main() -> flexmarket::Result<()> {
    for name in Scenario::bundled_names() {
        let scenario = Scenario::bundled(name)?;
        let curves = scenario.supply_curves()?;
        let aggregate = curves.aggregate()?;
        let req = &scenario.requirement;
        let price = true_equilibrium(&aggregate, req.demand, req.ceiling);
        println!("{}: {:.3} MW at the ceiling, clears {} MW at {price} £/MW/h", scenario.name, aggregate.max_capacity(), req.demand);
        for (class, curve) in &curves.curves {
            let at = |p: f64| curve.points().find(|&(q, _)| q >= p).map_or(0.0, |(_, c)| c);
            println!("  {class:>4}: {:.3} MW at 10, {:.3} MW at 30, {:.3} MW at 50", at(10.0), at(30.0), at(50.0));
        }
    }
    Ok(())
}
