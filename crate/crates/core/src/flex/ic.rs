//! Industrial and commercial demand response with a quadratic opportunity
//! cost and a load-recovery obligation after the event.
//!
//! Consumption inside the flexibility window is the contracted load less the
//! curtailment, so the energy bill nets the energy not consumed during the
//! event against the energy recovered afterwards.

use serde::{Deserialize, Serialize};

use super::{flex_upper, require_optimal, AssetClass, Detail, Dispatch, FlexModel};
use crate::error::{Error, Result};
use crate::model::{Profile, TimeGrid, Window};
use crate::solver::{chord_segments, solve_lp, LinearProgram, PiecewiseSpec, Relation, Sense};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcParams {
    /// P̄^I&C (kW)
    pub capacity_kw: f64,
    /// Numerator of a = quad_numerator / P̄ (£/MW per ... with P̄ in MW).
    #[serde(default = "default_quad_numerator")]
    pub quad_numerator: f64,
    /// b (£/MW)
    #[serde(default = "default_linear")]
    pub linear: f64,
    #[serde(default = "default_energy_recovery")]
    pub energy_recovery: f64,
    #[serde(default = "default_power_recovery")]
    pub power_recovery: f64,
    #[serde(default = "default_recovery_start")]
    pub recovery_start: f64,
    #[serde(default = "default_recovery_end")]
    pub recovery_end: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
}

fn default_quad_numerator() -> f64 {
    17.65
}
fn default_linear() -> f64 {
    23.52
}
fn default_energy_recovery() -> f64 {
    1.0
}
fn default_power_recovery() -> f64 {
    0.5
}
fn default_recovery_start() -> f64 {
    18.5
}
fn default_recovery_end() -> f64 {
    22.5
}
fn default_segments() -> usize {
    crate::solver::DEFAULT_SEGMENTS
}

impl IcParams {
    pub fn with_capacity_kw(capacity_kw: f64) -> Self {
        Self {
            capacity_kw,
            quad_numerator: default_quad_numerator(),
            linear: default_linear(),
            energy_recovery: default_energy_recovery(),
            power_recovery: default_power_recovery(),
            recovery_start: default_recovery_start(),
            recovery_end: default_recovery_end(),
            segments: default_segments(),
        }
    }

    pub fn capacity(&self) -> f64 {
        self.capacity_kw * 1e-3
    }

    /// a^I&C (£/MW²)
    pub fn quadratic(&self) -> f64 {
        if self.capacity() > 0.0 {
            self.quad_numerator / self.capacity()
        } else {
            0.0
        }
    }

    pub fn cost(&self, flex: f64) -> f64 {
        self.quadratic() * flex * flex + self.linear * flex
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity_kw < 0.0 || self.quad_numerator < 0.0 || self.linear < 0.0 {
            return Err(Error::config("i&c capacity and cost coefficients must be non-negative"));
        }
        if !(0.0..=1.5).contains(&self.energy_recovery) {
            return Err(Error::config("i&c energy recovery factor must lie in [0, 1.5]"));
        }
        if self.power_recovery < 0.0 {
            return Err(Error::config("i&c power recovery factor must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IcModel {
    grid: TimeGrid,
    params: IcParams,
    tariff: Profile,
    recovery: Window,
}

impl IcModel {
    pub fn new(grid: TimeGrid, params: IcParams, tariff: Profile) -> Result<Self> {
        params.validate()?;
        if tariff.len() != grid.count() {
            return Err(Error::config("i&c tariff must have one value per interval"));
        }
        let recovery = grid.window(params.recovery_start, params.recovery_end)?;
        Ok(Self {
            grid,
            params,
            tariff,
            recovery,
        })
    }

    pub fn params(&self) -> &IcParams {
        &self.params
    }

    pub fn recovery(&self) -> &Window {
        &self.recovery
    }

    fn check_window(&self, window: &Window) -> Result<()> {
        if window.overlaps(&self.recovery) || self.recovery.start_index <= window.end_index {
            return Err(Error::config("i&c recovery period must follow the flexibility window"));
        }
        let p = &self.params;
        let room = p.power_recovery * self.recovery.duration_hours(&self.grid);
        let need = p.energy_recovery * window.duration_hours(&self.grid);
        if room < need - 1e-12 {
            return Err(Error::infeasible(
                "ic",
                format!("recovery allows {room:.3} MWh per MW curtailed but {need:.3} MWh must be recovered"),
            ));
        }
        Ok(())
    }
}

impl FlexModel for IcModel {
    fn class(&self) -> AssetClass {
        AssetClass::Industrial
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn capability(&self) -> f64 {
        self.params.capacity()
    }

    fn dispatch(&self, fee: f64, window: &Window) -> Result<Dispatch> {
        self.check_window(window)?;
        let p = &self.params;
        let n = self.grid.count();
        let dt = self.grid.step_hours();
        let cap = p.capacity();
        let fw_hours = window.duration_hours(&self.grid);

        let mut lp = LinearProgram::new(Sense::Maximize);
        let flex = lp.add_var("flex", 0.0, flex_upper(fee).min(cap), fee * fw_hours);
        if cap > 0.0 {
            let spec = PiecewiseSpec::new(p.segments, 0.0, cap)?;
            let mut terms = vec![(flex, 1.0)];
            for (k, c) in chord_segments(p.quadratic(), spec)?.iter().enumerate() {
                let v = lp.add_var(format!("cost{k}"), 0.0, c.width, -(c.slope + p.linear));
                terms.push((v, -1.0));
            }
            lp.add_constraint("cost_split", terms, Relation::Eq, 0.0);
        }

        let mut load = vec![None; n];
        for t in window.indices() {
            let v = lp.add_var(format!("load_{t}"), 0.0, cap, -self.tariff.at(t) * dt);
            lp.add_constraint(format!("flex_{t}"), vec![(flex, 1.0), (v, 1.0)], Relation::Eq, cap);
            load[t] = Some(v);
        }
        let mut balance = vec![(flex, p.energy_recovery * fw_hours)];
        for t in self.recovery.indices() {
            let v = lp.add_var(format!("rec_{t}"), 0.0, f64::INFINITY, -self.tariff.at(t) * dt);
            lp.add_constraint(format!("rec_cap_{t}"), vec![(v, 1.0), (flex, -p.power_recovery)], Relation::Le, 0.0);
            balance.push((v, -dt));
            load[t] = Some(v);
        }
        lp.add_constraint("recovery", balance, Relation::Eq, 0.0);

        let sol = solve_lp(&lp)?;
        require_optimal(self.class(), &sol, "load recovery cannot be scheduled")?;

        let schedule: Vec<f64> = load.iter().map(|v| v.map_or(0.0, |v| sol.value(v))).collect();
        let recovery = (0..n)
            .map(|t| if self.recovery.contains(t) { schedule[t] } else { 0.0 })
            .collect();
        Ok(Dispatch {
            fee,
            flexibility: sol.value(flex).max(0.0),
            objective: sol.objective,
            schedule,
            detail: Detail::Ic { recovery },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Unit;

    fn model(params: IcParams) -> (IcModel, Window) {
        let grid = TimeGrid::half_hourly_day();
        let tariff = Profile::constant(&grid, 100.0, Unit::PoundsPerMwh);
        (IcModel::new(grid, params, tariff).unwrap(), grid.window(16.5, 18.5).unwrap())
    }

    #[test]
    fn closed_form_optimum() {
        let (m, fw) = model(IcParams::with_capacity_kw(901.0));
        let p = m.params();
        let width = p.capacity() / p.segments as f64;
        for fee in [5.0, 12.0, 15.0, 20.0, 25.0, 29.0, 30.0, 45.0] {
            let out = m.dispatch(fee, &fw).unwrap();
            let closed = ((2.0 * fee - p.linear) / (2.0 * p.quadratic())).clamp(0.0, p.capacity());
            assert!((out.flexibility - closed).abs() <= width + 1e-9, "fee {fee}: {} vs {closed}", out.flexibility);
        }
        assert!(m.dispatch(30.0, &fw).unwrap().flexibility >= p.capacity() - 1e-9);
    }

    #[test]
    fn recovered_energy_matches_curtailment() {
        let (m, fw) = model(IcParams::with_capacity_kw(616.0));
        let out = m.dispatch(22.0, &fw).unwrap();
        let Detail::Ic { recovery } = &out.detail else { panic!() };
        let recovered: f64 = recovery.iter().sum::<f64>() * 0.5;
        assert!((recovered - out.flexibility * 2.0).abs() <= 1e-7);
    }

    #[test]
    fn partial_and_zero_recovery_factors() {
        for e in [0.0, 0.6, 0.9] {
            let mut params = IcParams::with_capacity_kw(616.0);
            params.energy_recovery = e;
            let (m, fw) = model(params);
            let out = m.dispatch(22.0, &fw).unwrap();
            let Detail::Ic { recovery } = &out.detail else { panic!() };
            let recovered: f64 = recovery.iter().sum::<f64>() * 0.5;
            assert!(out.flexibility > 0.0);
            assert!((recovered - e * out.flexibility * 2.0).abs() <= 1e-7, "e {e}");
        }
    }

    #[test]
    fn short_recovery_is_infeasible() {
        let mut params = IcParams::with_capacity_kw(500.0);
        params.recovery_end = 20.5;
        let (m, fw) = model(params);
        assert!(matches!(m.dispatch(20.0, &fw), Err(Error::ModelInfeasible { .. })));
    }
}
