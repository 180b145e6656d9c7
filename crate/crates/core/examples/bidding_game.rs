//! Plays one best-response game on the CT scenario and prints its trajectory.
//!
//! Usage: `cargo run --example bidding_game -- [pab|pac|dra|vcg] [op|us|ub|truthful] [agents]`

use flexmarket::agents::Strategy;
use flexmarket::game::{run_game, GameConfig};
use flexmarket::market::Mechanism;
use flexmarket::scenario::Scenario;

fn main() -> flexmarket::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mechanism: Mechanism = args.first().map_or("pac", String::as_str).parse()?;
    let strategy: Strategy = args.get(1).map_or("us", String::as_str).parse()?;
    let agents: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(6);

    let scenario = Scenario::bundled("ct")?;
    let setup = scenario.market_setup(&scenario.supply_curves()?)?;
    let mut config = GameConfig::new(mechanism, strategy, agents);
    config.record_trace = true;
    let eq = run_game(&setup, &config)?;

    for round in eq.trace.iter().flatten() {
        let total: f64 = round.profits.iter().sum();
        println!("round {:>3}: price {:>4} £/MW/h, total profit {total:.2} £/h", round.iteration, round.mcp);
    }
    println!(
        "{mechanism} {strategy} with {agents} agents: {} £/MW/h after {} rounds (true {}), converged {}",
        eq.equilibrium_price, eq.iterations, eq.true_price, eq.converged
    );
    for a in &eq.agents {
        println!("  {} #{}: {:.3} MW, revenue {:.2} £, profit {:.2} £", a.provider, a.rank, a.accepted, a.revenue, a.profit);
    }
    Ok(())
}
