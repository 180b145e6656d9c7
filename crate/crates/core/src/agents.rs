//! Flexibility providers: portfolio shares and the bidding-strategy updates.
//!
//! Each agent owns a share of one provider type's truthful supply curve and
//! offers it block by block, one block per price level. Strategies move either
//! a single uniform offer price (overpricing, underbidding) or the capacity
//! offered at the clearing price (understatement).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{ClearingResult, Offer, ServiceRequirement, Settlement};
use crate::model::{OfferCurve, PriceGrid};

/// Initial overpricing step (£/MW/h).
pub const INITIAL_PRICE_STEP: f64 = 1.0;
/// Initial understatement step as a share of the marginal block.
pub const INITIAL_CAPACITY_SHARE: f64 = 0.1;
/// Smallest profit improvement that justifies an underbid (£/h).
const UNDERBID_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderType {
    /// Heat pumps and EVs.
    Domestic,
    Storage,
    Industrial,
}

impl ProviderType {
    pub const ALL: [ProviderType; 3] = [ProviderType::Domestic, ProviderType::Storage, ProviderType::Industrial];

    pub fn tag(self) -> &'static str {
        match self {
            ProviderType::Domestic => "domestic",
            ProviderType::Storage => "ees",
            ProviderType::Industrial => "ic",
        }
    }
}

impl fmt::Display for ProviderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Truthful,
    Op,
    Us,
    Ub,
}

impl Strategy {
    pub const STRATEGIC: [Strategy; 3] = [Strategy::Op, Strategy::Us, Strategy::Ub];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Truthful => "truthful",
            Strategy::Op => "op",
            Strategy::Us => "us",
            Strategy::Ub => "ub",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Strategy::Truthful, Strategy::Op, Strategy::Us, Strategy::Ub]
            .into_iter()
            .find(|x| x.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown strategy '{s}' (expected op, us, ub or truthful)")))
    }
}

/// Number of agents of each provider type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub domestic: usize,
    pub storage: usize,
    pub industrial: usize,
}

impl Composition {
    /// Splits `total` agents evenly over the three types, remainder to the
    /// domestic type first.
    pub fn even(total: usize) -> Self {
        let base = total / 3;
        let extra = total % 3;
        Self {
            domestic: base + usize::from(extra > 0),
            storage: base + usize::from(extra > 1),
            industrial: base,
        }
    }

    pub fn count(&self, kind: ProviderType) -> usize {
        match kind {
            ProviderType::Domestic => self.domestic,
            ProviderType::Storage => self.storage,
            ProviderType::Industrial => self.industrial,
        }
    }

    pub fn total(&self) -> usize {
        self.domestic + self.storage + self.industrial
    }
}

/// σ for agents 1..=n of one type: `1 / (a · Σ_{j≤n} 1/j)`.
pub fn harmonic_shares(n: usize) -> Vec<f64> {
    let h: f64 = (1..=n).map(|j| 1.0 / j as f64).sum();
    (1..=n).map(|a| 1.0 / (a as f64 * h)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Portfolio {
    pub provider: ProviderType,
    /// 1-based rank within the provider type.
    pub rank: usize,
    pub share: f64,
    pub curve: OfferCurve,
}

/// Splits each provider type's supply curve over its agents by harmonic shares.
pub fn distribute(
    composition: &Composition,
    type_curves: &[(ProviderType, OfferCurve)],
) -> Result<Vec<Portfolio>> {
    let mut out = Vec::new();
    for kind in ProviderType::ALL {
        let Some((_, curve)) = type_curves.iter().find(|(k, _)| *k == kind) else {
            continue;
        };
        let n = composition.count(kind);
        if n == 0 {
            if curve.max_capacity() > 0.0 {
                return Err(Error::config(format!("no agents assigned to {kind} flexibility")));
            }
            continue;
        }
        for (i, share) in harmonic_shares(n).into_iter().enumerate() {
            out.push(Portfolio {
                provider: kind,
                rank: i + 1,
                share,
                curve: curve.scaled(share),
            });
        }
    }
    if out.is_empty() {
        return Err(Error::config("composition has no agents"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentState {
    pub id: usize,
    pub provider: ProviderType,
    pub strategy: Strategy,
    /// P^True per level (MW): the increments of the agent's supply curve.
    pub true_capacities: Vec<f64>,
    /// π^True per level (£/MW/h).
    pub true_prices: Vec<f64>,
    pub offer: Offer,
    /// Δπ (£/MW/h)
    pub price_step: f64,
    /// ΔP (MW)
    pub capacity_step: f64,
    /// Π^(i−1) (£/h)
    pub last_profit: f64,
}

/// Realised change of one agent's offer in a round.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Move {
    pub price: f64,
    pub capacity: f64,
}

impl AgentState {
    /// Truthful agent for `portfolio` on `grid`.
    pub fn new(id: usize, portfolio: &Portfolio, strategy: Strategy, grid: &PriceGrid) -> Self {
        let true_capacities = portfolio.curve.increments();
        let true_prices = grid.levels().to_vec();
        Self {
            id,
            provider: portfolio.provider,
            strategy,
            offer: Offer {
                capacities: true_capacities.clone(),
                prices: true_prices.clone(),
            },
            true_capacities,
            true_prices,
            price_step: INITIAL_PRICE_STEP,
            capacity_step: 0.0,
            last_profit: 0.0,
        }
    }

    /// Strategy-specific first offer given the truthful clearing price λ^(1).
    pub fn initialise(&mut self, first_mcp: f64, ceiling: f64) {
        match self.strategy {
            Strategy::Truthful => {}
            Strategy::Op => self.reprice(first_mcp),
            Strategy::Ub => self.reprice(ceiling),
            Strategy::Us => {
                let marginal = self
                    .true_prices
                    .iter()
                    .position(|&p| p == first_mcp)
                    .map_or(0.0, |g| self.true_capacities[g]);
                let basis = if marginal > 0.0 {
                    marginal
                } else {
                    self.true_capacities.iter().copied().fold(0.0, f64::max)
                };
                self.capacity_step = INITIAL_CAPACITY_SHARE * basis;
            }
        }
    }

    /// Uniform offer price π^O_{a,1}.
    pub fn uniform_price(&self) -> f64 {
        self.offer.prices.first().copied().unwrap_or(0.0)
    }

    /// Sets every block whose true cost is at most `price` to `price`; others keep their price.
    fn reprice(&mut self, price: f64) {
        for (p, &c) in self.offer.prices.iter_mut().zip(&self.true_prices) {
            if c <= price {
                *p = price;
            }
        }
    }

    pub fn profit(&self, accepted: &[f64], rates: &[f64]) -> f64 {
        accepted
            .iter()
            .zip(rates)
            .zip(&self.true_prices)
            .map(|((q, r), c)| q * (r - c))
            .sum()
    }

    /// One strategy update from the round's outcome; returns the realised move.
    pub fn step(&mut self, round: &RoundView<'_>) -> Move {
        let accepted = &round.result.accepted[self.id];
        let profit = self.profit(accepted, &round.settlement.agents[self.id].rates);
        let mv = match self.strategy {
            Strategy::Truthful => Move::default(),
            Strategy::Op => op_step(self, profit, round.requirement.ceiling),
            Strategy::Us => us_step(self, profit, round.result.mcp),
            Strategy::Ub => ub_step(self, profit, round),
        };
        self.last_profit = profit;
        mv
    }
}

/// Outcome of one clearing round as seen by the agents.
pub struct RoundView<'a> {
    pub result: &'a ClearingResult,
    pub settlement: &'a Settlement,
    /// `(P^DM_g, π^DM_g)` per level.
    pub demand_met: &'a [(f64, f64)],
    pub requirement: &'a ServiceRequirement,
}

/// Overpricing: move the uniform price, repeating profitable moves, halving
/// and raising after a profitable cut, reversing an unprofitable rise and
/// continuing an unprofitable cut.
pub fn op_step(agent: &mut AgentState, profit: f64, ceiling: f64) -> Move {
    let last = agent.price_step;
    let step = if profit >= agent.last_profit {
        if last >= 0.0 {
            last
        } else {
            -last / 2.0
        }
    } else if last >= 0.0 {
        -last
    } else {
        last
    };
    agent.price_step = step;
    let floor = agent.true_prices.first().copied().unwrap_or(0.0);
    let old = agent.uniform_price();
    let new = (old + step).clamp(floor, ceiling);
    agent.reprice(new);
    Move {
        price: new - old,
        capacity: 0.0,
    }
}

/// Understatement: withdraw ΔP from blocks priced at λ while profit holds,
/// otherwise halve ΔP and restore it.
pub fn us_step(agent: &mut AgentState, profit: f64, mcp: f64) -> Move {
    let delta = if profit >= agent.last_profit {
        -agent.capacity_step
    } else {
        agent.capacity_step /= 2.0;
        agent.capacity_step
    };
    let mut moved = 0.0;
    for g in 0..agent.offer.capacities.len() {
        if agent.offer.prices[g] == mcp && agent.true_capacities[g] > 0.0 {
            let old = agent.offer.capacities[g];
            let new = (old + delta).clamp(0.0, agent.true_capacities[g]);
            agent.offer.capacities[g] = new;
            moved += (new - old).abs();
        }
    }
    Move {
        price: 0.0,
        capacity: moved,
    }
}

/// Underbidding: for every level where demand was met, estimate the profit of
/// pricing one level lower (ahead of all capacity at that level) and adopt the
/// best such price when it beats the current profit.
pub fn ub_step(agent: &mut AgentState, profit: f64, round: &RoundView<'_>) -> Move {
    let dm = round.demand_met;
    let demand = round.requirement.demand;
    let own = &round.result.accepted[agent.id];
    let mut best: Option<(f64, f64)> = None;
    for g in 1..dm.len() {
        if dm[g].0 <= dm[g - 1].0 {
            continue;
        }
        let candidate = dm[g - 1].1;
        // own capacity already served below the candidate does not compete with it
        let own_below: f64 = own
            .iter()
            .zip(&agent.offer.prices)
            .filter(|(_, &p)| p <= candidate)
            .map(|(q, _)| q)
            .sum();
        let mut room = (demand - (dm[g - 1].0 - own_below)).max(0.0);
        let mut estimate = 0.0;
        for (cap, &cost) in agent.offer.capacities.iter().zip(&agent.true_prices) {
            if cost > candidate || room <= 0.0 {
                break;
            }
            let take = cap.min(room);
            estimate += take * (candidate - cost);
            room -= take;
        }
        if best.map_or(true, |(_, e)| estimate > e) {
            best = Some((candidate, estimate));
        }
    }
    let old = agent.uniform_price();
    match best {
        Some((price, estimate)) if estimate > profit + UNDERBID_MARGIN && price < old => {
            agent.reprice(price);
            Move {
                price: price - old,
                capacity: 0.0,
            }
        }
        _ => Move::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{clear, demand_met_schedule, settle, Mechanism, OfferBook};
    use crate::market::tests::requirement;

    fn agent(strategy: Strategy, increments: &[f64]) -> AgentState {
        let grid = PriceGrid::integer(increments.len() as u32);
        let mut cum = 0.0;
        let caps: Vec<f64> = increments
            .iter()
            .map(|x| {
                cum += x;
                cum
            })
            .collect();
        let curve = OfferCurve::new(&grid, caps).unwrap();
        let p = Portfolio {
            provider: ProviderType::Domestic,
            rank: 1,
            share: 1.0,
            curve,
        };
        AgentState::new(0, &p, strategy, &grid)
    }

    #[test]
    fn harmonic_share_examples() {
        let s = harmonic_shares(3);
        for (x, y) in s.iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(harmonic_shares(1), vec![1.0]);
        let s = harmonic_shares(2);
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-15 && (s[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_type_with_supply_is_rejected() {
        let grid = PriceGrid::integer(3);
        let curve = OfferCurve::new(&grid, vec![0.0, 1.0, 1.0]).unwrap();
        let comp = Composition {
            domestic: 0,
            storage: 1,
            industrial: 1,
        };
        assert!(distribute(&comp, &[(ProviderType::Domestic, curve)]).is_err());
    }

    #[test]
    fn even_composition() {
        assert_eq!(Composition::even(3).total(), 3);
        assert_eq!(Composition::even(12).count(ProviderType::Storage), 4);
        assert_eq!(Composition::even(4).domestic, 2);
    }

    #[test]
    fn profit_examples() {
        let a = agent(Strategy::Truthful, &[0.0, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0]);
        let mut accepted = vec![0.0; 8];
        assert_eq!(a.profit(&accepted, &[0.0; 8]), 0.0);
        accepted[4] = 1.5;
        let mut rates = vec![0.0; 8];
        rates[4] = 8.0;
        assert!((a.profit(&accepted, &rates) - 4.5).abs() < 1e-12);
        rates[4] = 5.0;
        assert_eq!(a.profit(&accepted, &rates), 0.0);
    }

    #[test]
    fn op_branches() {
        let mut a = agent(Strategy::Op, &[1.0; 10]);
        a.initialise(4.0, 10.0);
        assert_eq!(a.uniform_price(), 4.0);
        // profitable rise repeats
        a.last_profit = 1.0;
        let m = op_step(&mut a, 2.0, 10.0);
        assert_eq!((a.price_step, m.price), (1.0, 1.0));
        // unprofitable rise reverses
        a.last_profit = 2.0;
        op_step(&mut a, 1.0, 10.0);
        assert_eq!(a.price_step, -1.0);
        assert_eq!(a.uniform_price(), 4.0);
        // unprofitable cut continues
        a.last_profit = 1.0;
        op_step(&mut a, 0.5, 10.0);
        assert_eq!(a.price_step, -1.0);
        // profitable cut halves and raises
        a.last_profit = 0.5;
        op_step(&mut a, 0.6, 10.0);
        assert_eq!(a.price_step, 0.5);
        assert_eq!(a.uniform_price(), 3.5);
        // blocks dearer than the new price keep their last price
        assert_eq!(a.offer.prices[4], 5.0);
    }

    #[test]
    fn us_branches() {
        let mut a = agent(Strategy::Us, &[0.0, 0.0, 2.0, 1.0]);
        a.initialise(3.0, 4.0);
        assert!((a.capacity_step - 0.2).abs() < 1e-15);
        a.last_profit = 0.0;
        us_step(&mut a, 1.0, 3.0);
        assert!((a.offer.capacities[2] - 1.8).abs() < 1e-12);
        assert_eq!(a.offer.capacities[3], 1.0);
        a.last_profit = 1.0;
        us_step(&mut a, 0.5, 3.0);
        assert!((a.capacity_step - 0.1).abs() < 1e-15);
        assert!((a.offer.capacities[2] - 1.9).abs() < 1e-12);
        // restoring never exceeds the truthful capacity
        for _ in 0..5 {
            a.last_profit = 1.0;
            us_step(&mut a, 0.0, 3.0);
        }
        assert!(a.offer.capacities[2] <= 2.0);
    }

    #[test]
    fn underbid_undercuts_rival() {
        // rival serves all demand at 12; own truthful cost 8
        let levels = 20;
        let req = requirement(2.5, 20.0);
        let mut rival_caps = vec![0.0; levels];
        rival_caps[11] = 3.0;
        let rival = Offer {
            capacities: rival_caps,
            prices: (1..=levels).map(|p| p as f64).collect(),
        };
        let mut inc = vec![0.0; levels];
        inc[7] = 1.0;
        let mut a = agent(Strategy::Ub, &inc);
        a.initialise(12.0, 20.0);
        let book = OfferBook::new(vec![a.offer.clone(), rival]).unwrap();
        let result = clear(&book, &req).unwrap();
        let settlement = settle(&result, &book, &req, Mechanism::Pab).unwrap();
        let prices: Vec<f64> = (1..=levels).map(|p| p as f64).collect();
        let dm = demand_met_schedule(&result, &book, &prices);
        let view = RoundView {
            result: &result,
            settlement: &settlement,
            demand_met: &dm,
            requirement: &req,
        };
        let m = a.step(&view);
        assert_eq!(a.uniform_price(), 11.0);
        assert_eq!(m.price, -9.0);
    }

    #[test]
    fn underbid_holds_without_room() {
        let levels = 10;
        let req = requirement(1.0, 10.0);
        let mut inc = vec![0.0; levels];
        inc[7] = 1.0;
        let mut a = agent(Strategy::Ub, &inc);
        a.initialise(5.0, 10.0);
        let mut rival_caps = vec![0.0; levels];
        rival_caps[2] = 1.0;
        let rival = Offer {
            capacities: rival_caps,
            prices: (1..=levels).map(|p| p as f64).collect(),
        };
        let book = OfferBook::new(vec![a.offer.clone(), rival]).unwrap();
        let result = clear(&book, &req).unwrap();
        let settlement = settle(&result, &book, &req, Mechanism::Dra).unwrap();
        let prices: Vec<f64> = (1..=levels).map(|p| p as f64).collect();
        let dm = demand_met_schedule(&result, &book, &prices);
        let view = RoundView {
            result: &result,
            settlement: &settlement,
            demand_met: &dm,
            requirement: &req,
        };
        assert_eq!(a.step(&view), Move::default());
    }
}
