//! Electrical energy storage with a DoD-indexed cycle-life degradation cost.
//!
//! One binary per DoD segment selects the cycle life that prices the day's
//! cycling. With exactly one segment active the reciprocal of the selected
//! cycle life equals the sum of the per-segment reciprocals weighted by the
//! binaries, so the degradation term is linear in the binaries.

use serde::{Deserialize, Serialize};

use super::{flex_upper, require_optimal, AssetClass, Detail, Dispatch, FlexModel};
use crate::error::{Error, Result};
use crate::model::{Profile, TimeGrid, Window};
use crate::solver::{solve_lp, solve_milp, LinearProgram, Relation, Sense, Solution, Status, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CycleSegment {
    pub dod_lo: f64,
    pub dod_hi: f64,
    pub cycles: f64,
}

/// Cycle life at 10 %, 20 %, … 100 % DoD, each value covering the DoD range
/// ending at that depth.
pub fn default_cycle_table() -> Vec<CycleSegment> {
    [13660.0, 12200.0, 10800.0, 9480.0, 8230.0, 7090.0, 6030.0, 5080.0, 4230.0, 3490.0]
        .iter()
        .enumerate()
        .map(|(i, &cycles)| CycleSegment {
            dod_lo: i as f64 / 10.0,
            dod_hi: (i + 1) as f64 / 10.0,
            cycles,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EesParams {
    /// P̄^ES (kW)
    pub power_kw: f64,
    /// Ē (kWh); two hours at rated power when absent.
    #[serde(default)]
    pub energy_kwh: Option<f64>,
    #[serde(default = "default_efficiency")]
    pub eta_charge: f64,
    #[serde(default = "default_efficiency")]
    pub eta_discharge: f64,
    /// C^E (£/kWh)
    #[serde(default = "default_capex")]
    pub capex_per_kwh: f64,
    #[serde(default = "default_cycle_table")]
    pub cycle_table: Vec<CycleSegment>,
}

fn default_efficiency() -> f64 {
    0.975
}
fn default_capex() -> f64 {
    100.0
}

impl EesParams {
    pub fn with_power_kw(power_kw: f64) -> Self {
        Self {
            power_kw,
            energy_kwh: None,
            eta_charge: default_efficiency(),
            eta_discharge: default_efficiency(),
            capex_per_kwh: default_capex(),
            cycle_table: default_cycle_table(),
        }
    }

    pub fn power(&self) -> f64 {
        self.power_kw * 1e-3
    }

    pub fn energy(&self) -> f64 {
        self.energy_kwh.unwrap_or(2.0 * self.power_kw) * 1e-3
    }

    /// Investment cost of the installed energy capacity (£).
    pub fn investment(&self) -> f64 {
        self.energy() * self.capex_per_kwh * 1e3
    }

    pub fn validate(&self) -> Result<()> {
        if self.power_kw < 0.0 || self.energy() < 0.0 || self.capex_per_kwh < 0.0 {
            return Err(Error::config("ees power, energy and capex must be non-negative"));
        }
        for eta in [self.eta_charge, self.eta_discharge] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::config("ees efficiencies must lie in (0, 1]"));
            }
        }
        let table = &self.cycle_table;
        if table.is_empty() {
            return Err(Error::config("ees cycle table is empty"));
        }
        for (i, s) in table.iter().enumerate() {
            if !(s.dod_lo < s.dod_hi) || s.cycles <= 0.0 {
                return Err(Error::config(format!("ees cycle segment {} is malformed", i + 1)));
            }
            if i > 0 {
                let prev = &table[i - 1];
                if (s.dod_lo - prev.dod_hi).abs() > 1e-9 {
                    return Err(Error::config("ees DoD segments must be contiguous"));
                }
                if s.cycles >= prev.cycles {
                    return Err(Error::config("ees cycle life must decrease strictly with DoD"));
                }
            }
        }
        if table[0].dod_lo.abs() > 1e-9 || (table[table.len() - 1].dod_hi - 1.0).abs() > 1e-9 {
            return Err(Error::config("ees DoD segments must partition (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EesModel {
    grid: TimeGrid,
    params: EesParams,
    tariff: Profile,
}

struct Built {
    lp: LinearProgram,
    flex: VarId,
    charge: Vec<VarId>,
    discharge: Vec<VarId>,
    state: Vec<VarId>,
    dod: VarId,
    alpha: Vec<VarId>,
}

impl EesModel {
    pub fn new(grid: TimeGrid, params: EesParams, tariff: Profile) -> Result<Self> {
        params.validate()?;
        if tariff.len() != grid.count() {
            return Err(Error::config("ees tariff must have one value per interval"));
        }
        Ok(Self { grid, params, tariff })
    }

    pub fn params(&self) -> &EesParams {
        &self.params
    }

    fn build(&self, fee: f64, window: &Window) -> Built {
        let p = &self.params;
        let n = self.grid.count();
        let dt = self.grid.step_hours();
        let (pmax, emax) = (p.power(), p.energy());
        let mut lp = LinearProgram::new(Sense::Maximize);
        let flex = lp.add_var("flex", 0.0, flex_upper(fee), fee * window.duration_hours(&self.grid));
        let charge: Vec<_> = (0..n)
            .map(|t| lp.add_var(format!("ch_{t}"), 0.0, pmax, -self.tariff.at(t) * dt))
            .collect();
        let discharge: Vec<_> = (0..n)
            .map(|t| lp.add_var(format!("dis_{t}"), -pmax, 0.0, -self.tariff.at(t) * dt))
            .collect();
        let state: Vec<_> = (0..n).map(|t| lp.add_var(format!("soe_{t}"), 0.0, emax, 0.0)).collect();
        for t in 0..n {
            lp.add_constraint(
                format!("continuity_{t}"),
                vec![
                    (state[(t + 1) % n], 1.0),
                    (state[t], -1.0),
                    (charge[t], -p.eta_charge * dt),
                    (discharge[t], -dt / p.eta_discharge),
                ],
                Relation::Eq,
                0.0,
            );
        }
        let dod = lp.add_var("dod", 0.0, 1.0, 0.0);
        let mut terms = vec![(dod, 1.0)];
        if emax > 0.0 {
            for t in 0..n {
                terms.push((charge[t], -p.eta_charge * dt / (2.0 * emax)));
                terms.push((discharge[t], dt / (p.eta_discharge * 2.0 * emax)));
            }
        }
        lp.add_constraint("dod", terms, Relation::Eq, 0.0);
        let alpha: Vec<_> = p
            .cycle_table
            .iter()
            .enumerate()
            .map(|(i, s)| lp.add_binary(format!("alpha_{i}"), -p.investment() / s.cycles))
            .collect();
        let mut lo = vec![(dod, 1.0)];
        let mut hi = vec![(dod, 1.0)];
        for (s, &a) in p.cycle_table.iter().zip(&alpha) {
            lo.push((a, -s.dod_lo));
            hi.push((a, -s.dod_hi));
        }
        lp.add_constraint("dod_lo", lo, Relation::Ge, 0.0);
        lp.add_constraint("dod_hi", hi, Relation::Le, 0.0);
        lp.add_constraint("one_segment", alpha.iter().map(|&a| (a, 1.0)).collect(), Relation::Eq, 1.0);
        for t in window.indices() {
            lp.add_constraint(
                format!("flex_{t}"),
                vec![(flex, 1.0), (charge[t], 1.0), (discharge[t], 1.0)],
                Relation::Le,
                0.0,
            );
        }
        Built {
            lp,
            flex,
            charge,
            discharge,
            state,
            dod,
            alpha,
        }
    }

    fn extract(&self, fee: f64, b: &Built, sol: &Solution) -> Dispatch {
        let schedule = b
            .charge
            .iter()
            .zip(&b.discharge)
            .map(|(&c, &d)| sol.value(c) + sol.value(d))
            .collect();
        let segment = b
            .alpha
            .iter()
            .position(|&a| sol.value(a) > 0.5)
            .unwrap_or(0);
        Dispatch {
            fee,
            flexibility: sol.value(b.flex).max(0.0),
            objective: sol.objective,
            schedule,
            detail: Detail::Ees {
                state_of_energy: b.state.iter().map(|&v| sol.value(v)).collect(),
                dod: sol.value(b.dod),
                segment,
            },
        }
    }

    /// Solves the dispatch with the DoD segment fixed, or `None` when that
    /// segment admits no feasible schedule.
    pub fn dispatch_in_segment(&self, fee: f64, window: &Window, segment: usize) -> Result<Option<Dispatch>> {
        let mut b = self.build(fee, window);
        if segment >= b.alpha.len() {
            return Err(Error::config(format!("ees has no DoD segment {segment}")));
        }
        for (i, &a) in b.alpha.iter().enumerate() {
            let v = if i == segment { 1.0 } else { 0.0 };
            b.lp.variables[a.index()].integer = false;
            b.lp.set_bounds(a, v, v);
        }
        let sol = solve_lp(&b.lp)?;
        Ok(match sol.status {
            Status::Optimal => Some(self.extract(fee, &b, &sol)),
            _ => None,
        })
    }
}

impl FlexModel for EesModel {
    fn class(&self) -> AssetClass {
        AssetClass::Storage
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn capability(&self) -> f64 {
        self.params.power()
    }

    fn dispatch(&self, fee: f64, window: &Window) -> Result<Dispatch> {
        let b = self.build(fee, window);
        let sol = solve_milp(&b.lp)?;
        require_optimal(self.class(), &sol, "no schedule keeps DoD inside the cycle table")?;
        Ok(self.extract(fee, &b, &sol))
    }
}
