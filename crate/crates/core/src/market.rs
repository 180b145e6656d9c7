//! Least-cost clearing of capacity offers against a single DSO requirement and
//! settlement under pay-as-bid, pay-as-cleared, Dutch reverse auction and
//! Vickrey-Clarke-Groves pricing.
//!
//! An offer book holds one block per agent and price level: a capacity and the
//! price asked for it. The clearing price λ is the dual of the demand balance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{TimeGrid, Window};
use crate::solver::{solve_lp, LinearProgram, Relation, Sense};

/// Relative distance within which a reported dual is snapped onto an offer price.
const PRICE_SNAP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Pab,
    Pac,
    Dra,
    Vcg,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [Mechanism::Pab, Mechanism::Pac, Mechanism::Dra, Mechanism::Vcg];

    pub fn tag(self) -> &'static str {
        match self {
            Mechanism::Pab => "pab",
            Mechanism::Pac => "pac",
            Mechanism::Dra => "dra",
            Mechanism::Vcg => "vcg",
        }
    }

    /// Whether accepted capacity is paid its own offer price.
    pub fn is_discriminatory(self) -> bool {
        matches!(self, Mechanism::Pab | Mechanism::Dra)
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown mechanism '{s}' (expected pab, pac, dra or vcg)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequirement {
    /// P^D (MW)
    pub demand: f64,
    /// π̄ (£/MW/h)
    pub ceiling: f64,
    pub window: Window,
    /// ΔT^FW (h)
    pub window_hours: f64,
}

impl ServiceRequirement {
    pub fn new(demand: f64, ceiling: f64, grid: &TimeGrid, window: Window) -> Result<Self> {
        if !(demand > 0.0 && demand.is_finite()) {
            return Err(Error::config("flexibility demand must be positive"));
        }
        if !(ceiling > 0.0 && ceiling.is_finite()) {
            return Err(Error::config("ceiling price must be positive"));
        }
        Ok(Self {
            demand,
            ceiling,
            window,
            window_hours: window.duration_hours(grid),
        })
    }

    /// Same requirement with a different demand; zero allowed.
    pub fn with_demand(mut self, demand: f64) -> Self {
        self.demand = demand.max(0.0);
        self
    }
}

/// One agent's offer: a capacity block and its asking price per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offer {
    pub capacities: Vec<f64>,
    pub prices: Vec<f64>,
}

impl Offer {
    pub fn levels(&self) -> usize {
        self.capacities.len()
    }

    /// Whether block `g` can be accepted under ceiling `ceiling`.
    pub fn is_valid(&self, g: usize, ceiling: f64) -> bool {
        let p = self.prices[g];
        self.capacities[g] > 0.0 && p > 0.0 && p <= ceiling
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferBook {
    pub offers: Vec<Offer>,
}

impl OfferBook {
    pub fn new(offers: Vec<Offer>) -> Result<Self> {
        let book = Self { offers };
        book.validate()?;
        Ok(book)
    }

    pub fn levels(&self) -> usize {
        self.offers.first().map_or(0, Offer::levels)
    }

    pub fn agents(&self) -> usize {
        self.offers.len()
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.levels();
        for (a, o) in self.offers.iter().enumerate() {
            if o.capacities.len() != levels || o.prices.len() != levels {
                return Err(Error::config(format!("offer of agent {a} does not span {levels} price levels")));
            }
            if o.capacities.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(Error::config(format!("offer of agent {a} has a negative or non-finite capacity")));
            }
            if o.prices.iter().any(|p| !p.is_finite()) {
                return Err(Error::config(format!("offer of agent {a} has a non-finite price")));
            }
        }
        Ok(())
    }

    /// Copy of the book with agent `a` offering nothing.
    pub fn without(&self, a: usize) -> Self {
        let mut book = self.clone();
        book.offers[a].capacities.iter_mut().for_each(|c| *c = 0.0);
        book
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearingResult {
    /// P^A per agent and level (MW).
    pub accepted: Vec<Vec<f64>>,
    /// λ (£/MW/h)
    pub mcp: f64,
    /// x (MW)
    pub unmet: f64,
}

impl ClearingResult {
    pub fn accepted_total(&self) -> f64 {
        self.accepted.iter().flatten().sum()
    }

    pub fn agent_total(&self, a: usize) -> f64 {
        self.accepted[a].iter().sum()
    }

    /// Clearing cost at offer prices plus the ceiling-priced shortfall (£/h).
    pub fn cost(&self, book: &OfferBook, ceiling: f64) -> f64 {
        let bought: f64 = self
            .accepted
            .iter()
            .zip(&book.offers)
            .map(|(acc, o)| acc.iter().zip(&o.prices).map(|(q, p)| q * p).sum::<f64>())
            .sum();
        bought + self.unmet * ceiling
    }

    /// Highest offer price with accepted capacity, or π̄ when demand is unmet.
    pub fn max_accepted_price(&self, book: &OfferBook, ceiling: f64) -> f64 {
        if self.unmet > crate::model::CAPACITY_TOL {
            return ceiling;
        }
        self.accepted
            .iter()
            .zip(&book.offers)
            .flat_map(|(acc, o)| acc.iter().zip(&o.prices).filter(|(q, _)| **q > 0.0).map(|(_, p)| *p))
            .fold(0.0, f64::max)
    }
}

/// Cost-minimal acceptance of `book` against `req`.
///
/// Offers priced above the ceiling (or at a non-positive price) are void.
/// Equal-price blocks share their accepted total pro rata to offered capacity.
pub fn clear(book: &OfferBook, req: &ServiceRequirement) -> Result<ClearingResult> {
    book.validate()?;
    let levels = book.levels();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut blocks = Vec::new();
    for (a, o) in book.offers.iter().enumerate() {
        for g in 0..levels {
            if o.is_valid(g, req.ceiling) {
                let v = lp.add_var(format!("a{a}_{g}"), 0.0, o.capacities[g], o.prices[g]);
                blocks.push((a, g, v));
            }
        }
    }
    let slack = lp.add_var("unmet", 0.0, req.demand, req.ceiling);
    let mut terms: Vec<_> = blocks.iter().map(|&(_, _, v)| (v, 1.0)).collect();
    terms.push((slack, 1.0));
    let balance = lp.add_constraint("balance", terms, Relation::Eq, req.demand);

    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::config(format!("market clearing returned {:?}", sol.status)));
    }
    let dual = sol.dual(balance).unwrap_or(req.ceiling);

    // pro-rata split of each price's accepted total
    let mut by_price: Vec<(f64, f64, f64)> = Vec::new(); // (price, offered, accepted)
    for &(a, g, v) in &blocks {
        let p = book.offers[a].prices[g];
        let (cap, acc) = (book.offers[a].capacities[g], sol.value(v).max(0.0));
        match by_price.iter_mut().find(|e| e.0 == p) {
            Some(e) => {
                e.1 += cap;
                e.2 += acc;
            }
            None => by_price.push((p, cap, acc)),
        }
    }
    let mut accepted = vec![vec![0.0; levels]; book.agents()];
    for &(a, g, _) in &blocks {
        let p = book.offers[a].prices[g];
        let e = by_price.iter().find(|e| e.0 == p).expect("price recorded");
        let share = if e.1 > 0.0 { (e.2 / e.1).min(1.0) } else { 0.0 };
        accepted[a][g] = book.offers[a].capacities[g] * share;
    }
    let unmet = sol.value(slack).clamp(0.0, req.demand);

    let mut mcp = dual;
    for c in by_price.iter().map(|e| e.0).chain(std::iter::once(req.ceiling)) {
        if (mcp - c).abs() <= PRICE_SNAP * c.abs().max(1.0) {
            mcp = c;
            break;
        }
    }
    Ok(ClearingResult { accepted, mcp, unmet })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSettlement {
    /// Accepted capacity (MW).
    pub paid_capacity: f64,
    /// Payment rate per level (£/MW/h); zero where nothing was accepted.
    pub rates: Vec<f64>,
    /// £ per day
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settlement {
    pub mechanism: Mechanism,
    pub agents: Vec<AgentSettlement>,
    /// Total paid to providers (£ per day).
    pub dso_payment: f64,
}

impl Settlement {
    /// Agent profit over its true marginal costs (£/h).
    pub fn profit(&self, a: usize, accepted: &[f64], true_prices: &[f64]) -> f64 {
        self.agents[a]
            .rates
            .iter()
            .zip(accepted)
            .zip(true_prices)
            .map(|((r, q), c)| q * (r - c))
            .sum()
    }
}

/// Pays each accepted block under `mechanism`. VCG re-clears the book once per
/// agent with accepted capacity.
pub fn settle(
    result: &ClearingResult,
    book: &OfferBook,
    req: &ServiceRequirement,
    mechanism: Mechanism,
) -> Result<Settlement> {
    if result.accepted.len() != book.agents() {
        return Err(Error::config("clearing result and offer book disagree on agent count"));
    }
    let agents = match mechanism {
        Mechanism::Pab | Mechanism::Dra => book
            .offers
            .iter()
            .zip(&result.accepted)
            .map(|(o, acc)| {
                let rates: Vec<f64> = acc.iter().zip(&o.prices).map(|(q, p)| if *q > 0.0 { *p } else { 0.0 }).collect();
                settled(acc, rates, req)
            })
            .collect(),
        Mechanism::Pac => result
            .accepted
            .iter()
            .map(|acc| {
                let rates = acc.iter().map(|q| if *q > 0.0 { result.mcp } else { 0.0 }).collect();
                settled(acc, rates, req)
            })
            .collect(),
        Mechanism::Vcg => return vcg_settlement(result, book, req),
    };
    Ok(finish(mechanism, agents))
}

/// Clarke-pivot payments: what the others would cost without the agent, less
/// what they cost with it.
pub fn vcg_payments(book: &OfferBook, req: &ServiceRequirement) -> Result<Settlement> {
    let result = clear(book, req)?;
    vcg_settlement(&result, book, req)
}

fn vcg_settlement(result: &ClearingResult, book: &OfferBook, req: &ServiceRequirement) -> Result<Settlement> {
    let total = result.cost(book, req.ceiling);
    let mut agents = Vec::with_capacity(book.agents());
    for (a, acc) in result.accepted.iter().enumerate() {
        let q: f64 = acc.iter().sum();
        if q <= 0.0 {
            agents.push(settled(acc, vec![0.0; acc.len()], req));
            continue;
        }
        let own: f64 = acc.iter().zip(&book.offers[a].prices).map(|(q, p)| q * p).sum();
        let rest = book.without(a);
        let without = clear(&rest, req)?.cost(&rest, req.ceiling);
        let payment = without - (total - own);
        let rate = payment / q;
        let rates = acc.iter().map(|x| if *x > 0.0 { rate } else { 0.0 }).collect();
        agents.push(settled(acc, rates, req));
    }
    Ok(finish(Mechanism::Vcg, agents))
}

fn settled(accepted: &[f64], rates: Vec<f64>, req: &ServiceRequirement) -> AgentSettlement {
    let per_hour: f64 = accepted.iter().zip(&rates).map(|(q, r)| q * r).sum();
    AgentSettlement {
        paid_capacity: accepted.iter().sum(),
        rates,
        revenue: per_hour * req.window_hours,
    }
}

fn finish(mechanism: Mechanism, agents: Vec<AgentSettlement>) -> Settlement {
    let dso_payment = agents.iter().map(|a| a.revenue).sum();
    Settlement {
        mechanism,
        agents,
        dso_payment,
    }
}

/// Demand met at or below each grid price: `(P^DM_g, π^DM_g)` per level.
///
/// Accepted blocks are bucketed by offer price onto the first grid level at or
/// above it.
pub fn demand_met_schedule(result: &ClearingResult, book: &OfferBook, grid_prices: &[f64]) -> Vec<(f64, f64)> {
    let mut met = vec![0.0; grid_prices.len()];
    for (acc, o) in result.accepted.iter().zip(&book.offers) {
        for (q, p) in acc.iter().zip(&o.prices) {
            if *q > 0.0 {
                let g = grid_prices
                    .iter()
                    .position(|&level| level >= *p - 1e-12)
                    .unwrap_or(grid_prices.len() - 1);
                met[g] += q;
            }
        }
    }
    let mut running = 0.0;
    met.iter()
        .zip(grid_prices)
        .map(|(m, &p)| {
            running += m;
            (running, p)
        })
        .collect()
}
