//! Repeated clearing game between strategic providers and the sweep over
//! scenarios, mechanisms, strategies and agent counts.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{distribute, AgentState, Composition, Move, Portfolio, ProviderType, RoundView, Strategy};
use crate::error::{Error, Result};
use crate::market::{clear, demand_met_schedule, settle, ClearingResult, Mechanism, Offer, OfferBook, ServiceRequirement, Settlement};
use crate::model::{aggregate_curves, true_equilibrium, OfferCurve, PriceGrid};

pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;

/// Truthful supply of one scenario, split by provider type.
#[derive(Debug, Clone)]
pub struct MarketSetup {
    pub prices: PriceGrid,
    pub requirement: ServiceRequirement,
    pub type_curves: Vec<(ProviderType, OfferCurve)>,
}

impl MarketSetup {
    pub fn aggregate(&self) -> Result<OfferCurve> {
        let curves: Vec<OfferCurve> = self.type_curves.iter().map(|(_, c)| c.clone()).collect();
        aggregate_curves(&self.prices, &curves)
    }

    /// Step-I equilibrium price of the aggregate truthful curve.
    pub fn true_price(&self) -> Result<f64> {
        Ok(true_equilibrium(&self.aggregate()?, self.requirement.demand, self.requirement.ceiling))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GameConfig {
    pub mechanism: Mechanism,
    pub strategy: Strategy,
    pub composition: Composition,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub record_trace: bool,
}

impl GameConfig {
    pub fn new(mechanism: Mechanism, strategy: Strategy, agents: usize) -> Self {
        Self {
            mechanism,
            strategy,
            composition: Composition::even(agents),
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::config("game tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("game needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub iteration: usize,
    pub offers: Vec<Offer>,
    /// £/h per agent
    pub profits: Vec<f64>,
    pub mcp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentOutcome {
    pub provider: ProviderType,
    pub rank: usize,
    pub share: f64,
    /// MW
    pub accepted: f64,
    /// £/day
    pub revenue: f64,
    /// Revenue less truthful marginal cost (£/day).
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub config: GameConfig,
    pub converged: bool,
    pub cycled: bool,
    pub iterations: usize,
    pub equilibrium_price: f64,
    pub true_price: f64,
    pub book: OfferBook,
    pub result: ClearingResult,
    pub settlement: Settlement,
    pub agents: Vec<AgentOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<RoundRecord>>,
}

impl Equilibrium {
    pub fn total_revenue(&self) -> f64 {
        self.agents.iter().map(|a| a.revenue).sum()
    }

    pub fn total_profit(&self) -> f64 {
        self.agents.iter().map(|a| a.profit).sum()
    }
}

/// λ for uniform payments, the highest accepted offer price for discriminatory ones.
pub fn equilibrium_price(mechanism: Mechanism, result: &ClearingResult, book: &OfferBook, ceiling: f64) -> f64 {
    match mechanism {
        Mechanism::Pac | Mechanism::Vcg => result.mcp,
        Mechanism::Pab | Mechanism::Dra => result.max_accepted_price(book, ceiling),
    }
}

fn book_of(states: &[AgentState]) -> Result<OfferBook> {
    OfferBook::new(states.iter().map(|s| s.offer.clone()).collect())
}

fn fingerprint(states: &[AgentState]) -> u64 {
    let mut h = DefaultHasher::new();
    for s in states {
        for x in s.offer.prices.iter().chain(&s.offer.capacities) {
            x.to_bits().hash(&mut h);
        }
        s.price_step.to_bits().hash(&mut h);
        s.capacity_step.to_bits().hash(&mut h);
        s.last_profit.to_bits().hash(&mut h);
    }
    h.finish()
}

fn step_norm(moves: &[Move]) -> f64 {
    let dp: f64 = moves.iter().map(|m| m.price * m.price).sum();
    let dq: f64 = moves.iter().map(|m| m.capacity * m.capacity).sum();
    dp.sqrt() + dq.sqrt()
}

/// Plays the game for one configuration until the offers stop moving.
pub fn run_game(setup: &MarketSetup, config: &GameConfig) -> Result<Equilibrium> {
    config.validate()?;
    let portfolios = distribute(&config.composition, &setup.type_curves)?;
    run_with_portfolios(setup, config, &portfolios)
}

pub fn run_with_portfolios(setup: &MarketSetup, config: &GameConfig, portfolios: &[Portfolio]) -> Result<Equilibrium> {
    config.validate()?;
    if portfolios.is_empty() {
        return Err(Error::config("game needs at least one agent"));
    }
    let req = &setup.requirement;
    let levels = setup.prices.levels();
    let mut states: Vec<AgentState> = portfolios
        .iter()
        .enumerate()
        .map(|(id, p)| AgentState::new(id, p, config.strategy, &setup.prices))
        .collect();

    let first = clear(&book_of(&states)?, req)?;
    for s in &mut states {
        s.initialise(first.mcp, req.ceiling);
    }

    let mut seen = HashSet::new();
    seen.insert(fingerprint(&states));
    let mut trace = config.record_trace.then(Vec::new);
    let mut converged = false;
    let mut cycled = false;
    let mut iterations = 0;
    let mut last = None;

    while iterations < config.max_iterations {
        iterations += 1;
        let book = book_of(&states)?;
        let result = clear(&book, req)?;
        let settlement = settle(&result, &book, req, config.mechanism)?;
        let dm = demand_met_schedule(&result, &book, levels);
        let view = RoundView {
            result: &result,
            settlement: &settlement,
            demand_met: &dm,
            requirement: req,
        };
        let mut profits = Vec::with_capacity(states.len());
        let moves: Vec<Move> = states.par_iter_mut().map(|s| s.step(&view)).collect();
        profits.extend(states.iter().map(|s| s.last_profit));
        if let Some(t) = trace.as_mut() {
            t.push(RoundRecord {
                iteration: iterations,
                offers: book.offers.clone(),
                profits,
                mcp: result.mcp,
            });
        }
        last = Some((book, result, settlement));
        if step_norm(&moves) <= config.tolerance {
            converged = true;
            break;
        }
        if !seen.insert(fingerprint(&states)) {
            cycled = true;
            break;
        }
    }

    let (book, result, settlement) = last.expect("at least one round");
    let agents = portfolios
        .iter()
        .zip(&states)
        .enumerate()
        .map(|(a, (p, s))| {
            let accepted = &result.accepted[a];
            let cost: f64 = accepted.iter().zip(&s.true_prices).map(|(q, c)| q * c).sum::<f64>() * req.window_hours;
            let revenue = settlement.agents[a].revenue;
            AgentOutcome {
                provider: p.provider,
                rank: p.rank,
                share: p.share,
                accepted: accepted.iter().sum(),
                revenue,
                profit: revenue - cost,
            }
        })
        .collect();
    Ok(Equilibrium {
        config: *config,
        converged,
        cycled,
        iterations,
        equilibrium_price: equilibrium_price(config.mechanism, &result, &book, req.ceiling),
        true_price: setup.true_price()?,
        book,
        result,
        settlement,
        agents,
        trace,
    })
}

/// Re-clears every logged round and returns the per-agent profits (£/h).
pub fn replay(setup: &MarketSetup, mechanism: Mechanism, trace: &[RoundRecord]) -> Result<Vec<Vec<f64>>> {
    let truth = setup.prices.levels();
    trace
        .iter()
        .map(|r| {
            let book = OfferBook::new(r.offers.clone())?;
            let result = clear(&book, &setup.requirement)?;
            let settlement = settle(&result, &book, &setup.requirement, mechanism)?;
            Ok((0..book.agents())
                .map(|a| settlement.profit(a, &result.accepted[a], truth))
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub scenario: String,
    pub mechanism: Mechanism,
    pub strategy: Strategy,
    pub agents: usize,
    pub outcome: std::result::Result<Equilibrium, String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct EquilibriumTable {
    pub cells: Vec<Cell>,
}

/// One row of the equilibrium table.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct TableRow {
    pub scenario: String,
    pub mechanism: String,
    pub strategy: String,
    pub agents: usize,
    pub converged: bool,
    pub iterations: usize,
    pub equilibrium_price: f64,
    pub true_price: f64,
    pub mcp: f64,
    pub unmet_mw: f64,
    pub revenue: f64,
    pub profit: f64,
    pub error: String,
}

impl EquilibriumTable {
    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(|c| matches!(&c.outcome, Ok(e) if e.converged))
    }

    pub fn get(&self, scenario: &str, mechanism: Mechanism, strategy: Strategy, agents: usize) -> Option<&Equilibrium> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.mechanism == mechanism && c.strategy == strategy && c.agents == agents)
            .and_then(|c| c.outcome.as_ref().ok())
    }

    pub fn rows(&self) -> Vec<TableRow> {
        self.cells
            .iter()
            .map(|c| {
                let base = TableRow {
                    scenario: c.scenario.clone(),
                    mechanism: c.mechanism.tag().to_string(),
                    strategy: c.strategy.tag().to_string(),
                    agents: c.agents,
                    converged: false,
                    iterations: 0,
                    equilibrium_price: 0.0,
                    true_price: 0.0,
                    mcp: 0.0,
                    unmet_mw: 0.0,
                    revenue: 0.0,
                    profit: 0.0,
                    error: String::new(),
                };
                match &c.outcome {
                    Ok(e) => TableRow {
                        converged: e.converged,
                        iterations: e.iterations,
                        equilibrium_price: e.equilibrium_price,
                        true_price: e.true_price,
                        mcp: e.result.mcp,
                        unmet_mw: e.result.unmet,
                        revenue: e.total_revenue(),
                        profit: e.total_profit(),
                        ..base
                    },
                    Err(msg) => TableRow { error: msg.clone(), ..base },
                }
            })
            .collect()
    }
}

/// Runs the full cross product; a failing cell records its error and the rest continue.
pub fn sweep(
    scenarios: &[(String, MarketSetup)],
    mechanisms: &[Mechanism],
    strategies: &[Strategy],
    agent_counts: &[usize],
    template: &GameConfig,
) -> EquilibriumTable {
    let mut jobs = Vec::new();
    for (si, _) in scenarios.iter().enumerate() {
        for &m in mechanisms {
            for &s in strategies {
                for &n in agent_counts {
                    jobs.push((si, m, s, n));
                }
            }
        }
    }
    let cells = jobs
        .into_par_iter()
        .map(|(si, mechanism, strategy, agents)| {
            let (name, setup) = &scenarios[si];
            let config = GameConfig {
                mechanism,
                strategy,
                composition: Composition::even(agents),
                ..*template
            };
            let outcome = run_game(setup, &config).map_err(|e| e.to_string());
            if let Err(msg) = &outcome {
                log::warn!("{name} {mechanism} {strategy} {agents}: {msg}");
            }
            Cell {
                scenario: name.clone(),
                mechanism,
                strategy,
                agents,
                outcome,
            }
        })
        .collect();
    EquilibriumTable { cells }
}
