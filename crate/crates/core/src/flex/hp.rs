//! Aggregated domestic heat pumps over dwelling types with a first-order
//! thermal model.
//!
//! Decision variables are per-type aggregate electrical power `Q = N·μ·P` (MW).
//! Indoor temperature is written as `τ = b + p − n` with `b` inside the comfort
//! band and `p`, `n` the upper and lower violations, so the quadratic comfort
//! penalty becomes a sum of chord segments on `p` and `n`. The recursion wraps
//! from the last interval to the first, which makes the daily cycle periodic.

use serde::{Deserialize, Serialize};

use super::{require_optimal, AssetClass, Detail, Dispatch, FlexModel};
use crate::error::{Error, Result};
use crate::model::{Profile, TimeGrid, Window};
use crate::solver::{chord_segments, solve_lp, LinearProgram, PiecewiseSpec, Relation, Sense, VarId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dwelling {
    pub name: String,
    /// μ_d (pu)
    pub share: f64,
    /// K^Th_d (MW/°C)
    pub conductance: f64,
    /// C^Th_d (MWh/°C)
    pub capacitance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpParams {
    pub count: f64,
    #[serde(default = "default_dwellings")]
    pub dwellings: Vec<Dwelling>,
    /// Per-dwelling rating (MW); sized from `design_ambient` when absent.
    #[serde(default)]
    pub rating: Option<Vec<f64>>,
    #[serde(default = "default_design_ambient")]
    pub design_ambient: f64,
    #[serde(default = "default_conversion")]
    pub conversion: f64,
    #[serde(default = "default_peak_factor")]
    pub peak_factor: f64,
    #[serde(default = "default_tau_min")]
    pub tau_min: f64,
    #[serde(default = "default_tau_max")]
    pub tau_max: f64,
    /// c^Pen (£/°C²/h)
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
    /// Width of the linearised deviation domain (°C); larger deviations are
    /// charged at the marginal rate of the last segment.
    #[serde(default = "default_max_deviation")]
    pub max_deviation: f64,
}

fn default_design_ambient() -> f64 {
    -5.0
}
fn default_conversion() -> f64 {
    3.0
}
fn default_peak_factor() -> f64 {
    2.0
}
fn default_tau_min() -> f64 {
    18.0
}
fn default_tau_max() -> f64 {
    22.0
}
fn default_penalty() -> f64 {
    1000.0
}
fn default_segments() -> usize {
    crate::solver::DEFAULT_SEGMENTS
}
fn default_max_deviation() -> f64 {
    10.0
}

/// Table of English dwelling types with conductance in W/°C and capacitance in
/// kWh/°C converted to MW/°C and MWh/°C.
pub fn default_dwellings() -> Vec<Dwelling> {
    [
        ("detached", 0.068, 160.3, 10.0),
        ("semi_detached", 0.348, 111.4, 6.5),
        ("terraced", 0.309, 76.4, 5.0),
        ("flat", 0.275, 38.1, 4.0),
    ]
    .into_iter()
    .map(|(name, share, k_w, c_kwh)| Dwelling {
        name: name.to_string(),
        share,
        conductance: k_w * 1e-6,
        capacitance: c_kwh * 1e-3,
    })
    .collect()
}

impl HpParams {
    pub fn with_count(count: f64) -> Self {
        Self {
            count,
            dwellings: default_dwellings(),
            rating: None,
            design_ambient: default_design_ambient(),
            conversion: default_conversion(),
            peak_factor: default_peak_factor(),
            tau_min: default_tau_min(),
            tau_max: default_tau_max(),
            penalty: default_penalty(),
            segments: default_segments(),
            max_deviation: default_max_deviation(),
        }
    }

    /// Per-dwelling rating: configured, or enough to hold `tau_max` at the design ambient.
    pub fn ratings(&self) -> Vec<f64> {
        match &self.rating {
            Some(r) => r.clone(),
            None => self
                .dwellings
                .iter()
                .map(|d| d.conductance * (self.tau_max - self.design_ambient) / self.conversion)
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.dwellings.iter().map(|d| d.share).sum();
        if self.dwellings.is_empty() || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("dwelling shares must sum to 1, got {sum}")));
        }
        if self
            .dwellings
            .iter()
            .any(|d| !(d.share > 0.0 && d.conductance > 0.0 && d.capacitance > 0.0))
        {
            return Err(Error::config("dwelling share, conductance and capacitance must be positive"));
        }
        if !(self.tau_min < self.tau_max) {
            return Err(Error::config("hp tau_min must be below tau_max"));
        }
        if !(1.0..=4.0).contains(&self.conversion) {
            return Err(Error::config("hp conversion factor must lie in [1, 4]"));
        }
        if self.peak_factor < 1.0 {
            return Err(Error::config("hp peak factor must be at least 1"));
        }
        if self.count < 0.0 || self.penalty < 0.0 || !(self.max_deviation > 0.0) {
            return Err(Error::config("hp count, penalty and deviation domain must be non-negative"));
        }
        if let Some(r) = &self.rating {
            if r.len() != self.dwellings.len() || r.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::config("hp rating needs one positive value per dwelling type"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HpModel {
    grid: TimeGrid,
    params: HpParams,
    ratings: Vec<f64>,
    tariff: Profile,
    ambient: Profile,
}

impl HpModel {
    pub fn new(grid: TimeGrid, params: HpParams, tariff: Profile, ambient: Profile) -> Result<Self> {
        params.validate()?;
        if tariff.len() != grid.count() || ambient.len() != grid.count() {
            return Err(Error::config("hp profiles must have one value per interval"));
        }
        let ratings = params.ratings();
        let mean_amb = ambient.values().iter().sum::<f64>() / grid.count() as f64;
        for (d, &r) in params.dwellings.iter().zip(&ratings) {
            let reachable = mean_amb + params.conversion * r / d.conductance;
            if reachable < params.tau_min {
                return Err(Error::infeasible(
                    "hp",
                    format!(
                        "{} rating {:.4} MW holds at most {:.2} °C, below the {:.1} °C comfort floor",
                        d.name, r, reachable, params.tau_min
                    ),
                ));
            }
        }
        Ok(Self {
            grid,
            params,
            ratings,
            tariff,
            ambient,
        })
    }

    pub fn params(&self) -> &HpParams {
        &self.params
    }

    pub fn ratings(&self) -> &[f64] {
        &self.ratings
    }

    /// Expected demand of the printed flexibility constraint: each type held at
    /// the comfort midpoint, summed over types (MW).
    pub fn expected_demand(&self, t: usize) -> f64 {
        let p = &self.params;
        let mid = 0.5 * (p.tau_max + p.tau_min);
        p.dwellings
            .iter()
            .map(|d| p.count * d.share * d.conductance / p.conversion * (mid - self.ambient.at(t)))
            .sum()
    }

    /// Weight on `p² + n²` for dwelling type `d` in one interval (£/°C²).
    fn penalty_weight(&self, d: usize) -> f64 {
        let p = &self.params;
        p.count * p.dwellings[d].share * p.penalty / 2.0 * self.grid.step_hours()
    }
}

struct Deviation {
    segments: Vec<VarId>,
    tail: VarId,
}

impl Deviation {
    fn terms(&self, coef: f64) -> impl Iterator<Item = (VarId, f64)> + '_ {
        self.segments.iter().chain(std::iter::once(&self.tail)).map(move |&v| (v, coef))
    }
}

impl FlexModel for HpModel {
    fn class(&self) -> AssetClass {
        AssetClass::HeatPump
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn capability(&self) -> f64 {
        (0..self.grid.count())
            .map(|t| self.expected_demand(t))
            .fold(0.0, f64::max)
    }

    fn dispatch(&self, fee: f64, window: &Window) -> Result<Dispatch> {
        let p = &self.params;
        let n = self.grid.count();
        let dt = self.grid.step_hours();
        let horizon = self.grid.horizon_hours();
        let spec = PiecewiseSpec::new(p.segments, 0.0, p.max_deviation)?;

        let mut lp = LinearProgram::new(Sense::Maximize);
        let flex = lp.add_var("flex", 0.0, super::flex_upper(fee), fee * window.duration_hours(&self.grid));

        let mut q = vec![Vec::with_capacity(n); p.dwellings.len()];
        let mut band = vec![Vec::with_capacity(n); p.dwellings.len()];
        let mut over: Vec<Vec<Deviation>> = (0..p.dwellings.len()).map(|_| Vec::with_capacity(n)).collect();
        let mut under: Vec<Vec<Deviation>> = (0..p.dwellings.len()).map(|_| Vec::with_capacity(n)).collect();

        for (d, dw) in p.dwellings.iter().enumerate() {
            let cap = p.count * dw.share * self.ratings[d];
            let w = self.penalty_weight(d);
            let segs = chord_segments(w, spec)?;
            let tail_slope = 2.0 * w * p.max_deviation;
            for t in 0..n {
                q[d].push(lp.add_var(format!("q_{}_{t}", dw.name), 0.0, cap, -self.tariff.at(t) * dt));
                band[d].push(lp.add_var(format!("b_{}_{t}", dw.name), p.tau_min, p.tau_max, 0.0));
                let mut mk = |tag: &str| Deviation {
                    segments: segs
                        .iter()
                        .enumerate()
                        .map(|(k, s)| lp.add_var(format!("{tag}{k}_{}_{t}", dw.name), 0.0, s.width, -s.slope))
                        .collect(),
                    tail: lp.add_var(format!("{tag}x_{}_{t}", dw.name), 0.0, f64::INFINITY, -tail_slope),
                };
                over[d].push(mk("p"));
                under[d].push(mk("n"));
            }
        }

        for (d, dw) in p.dwellings.iter().enumerate() {
            let loss = dw.conductance / dw.capacitance * dt;
            let units = p.count * dw.share;
            let gain = if units > 0.0 { p.conversion * dt / (dw.capacitance * units) } else { 0.0 };
            for t in 0..n {
                let next = (t + 1) % n;
                // τ_{t+1} − (1 − loss)·τ_t − gain·Q_t = loss·τ^Amb_t
                let mut terms = vec![(band[d][next], 1.0), (band[d][t], -(1.0 - loss)), (q[d][t], -gain)];
                terms.extend(over[d][next].terms(1.0));
                terms.extend(under[d][next].terms(-1.0));
                terms.extend(over[d][t].terms(-(1.0 - loss)));
                terms.extend(under[d][t].terms(1.0 - loss));
                lp.add_constraint(format!("thermal_{}_{t}", dw.name), terms, Relation::Eq, loss * self.ambient.at(t));
            }
            let avg = lp.add_var(format!("avg_{}", dw.name), 0.0, f64::INFINITY, 0.0);
            let mut terms: Vec<_> = q[d].iter().map(|&v| (v, dt / horizon)).collect();
            terms.push((avg, -1.0));
            lp.add_constraint(format!("average_{}", dw.name), terms, Relation::Eq, 0.0);
            for t in 0..n {
                lp.add_constraint(
                    format!("peak_{}_{t}", dw.name),
                    vec![(q[d][t], 1.0), (avg, -p.peak_factor)],
                    Relation::Le,
                    0.0,
                );
            }
        }

        for t in window.indices() {
            let mut terms = vec![(flex, 1.0)];
            terms.extend(q.iter().map(|qd| (qd[t], 1.0)));
            lp.add_constraint(format!("flex_{t}"), terms, Relation::Le, self.expected_demand(t));
        }

        let sol = solve_lp(&lp)?;
        require_optimal(self.class(), &sol, "thermal model has no feasible schedule")?;

        let temp = |d: usize, t: usize| {
            let sum = |dev: &Deviation| dev.terms(1.0).map(|(v, _)| sol.value(v)).sum::<f64>();
            sol.value(band[d][t]) + sum(&over[d][t]) - sum(&under[d][t])
        };
        let temperatures: Vec<Vec<f64>> = (0..p.dwellings.len())
            .map(|d| (0..n).map(|t| temp(d, t)).collect())
            .collect();
        let max_deviation = temperatures
            .iter()
            .flatten()
            .map(|&x| (x - p.tau_max).max(p.tau_min - x).max(0.0))
            .fold(0.0, f64::max);
        let heat: Vec<Vec<f64>> = q.iter().map(|qd| qd.iter().map(|&v| sol.value(v)).collect()).collect();
        let schedule = (0..n).map(|t| heat.iter().map(|h| h[t]).sum()).collect();

        Ok(Dispatch {
            fee,
            flexibility: sol.value(flex).max(0.0),
            objective: sol.objective,
            schedule,
            detail: Detail::Hp {
                heat,
                temperatures,
                max_deviation,
            },
        })
    }
}
