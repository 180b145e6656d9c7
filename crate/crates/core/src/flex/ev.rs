//! Aggregated EV smart charging.
//!
//! `E_t` counts the energy delivered to the batteries since the start of the
//! charging cycle (by default 14:00, the end of the departure window), so the
//! cycle runs from zero to the daily energy need. Battery power is split into
//! chord segments of the internal-resistance loss curve, which keeps terminal
//! power `≥ battery power + loss` linear.

use serde::{Deserialize, Serialize};

use super::{flex_upper, require_optimal, AssetClass, Detail, Dispatch, FlexModel};
use crate::error::{Error, Result};
use crate::model::{Profile, TimeGrid, Window};
use crate::solver::{chord_segments, solve_lp, LinearProgram, PiecewiseSpec, Relation, Sense, VarId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvParams {
    pub count: f64,
    /// Per-station charger rating (kW).
    #[serde(default = "default_charger_kw")]
    pub charger_kw: f64,
    /// Aggregate charger capacity (MW); `count × charger_kw` when absent.
    #[serde(default)]
    pub aggregate_charger_mw: Option<f64>,
    /// Daily charging need per EV (kWh).
    #[serde(default = "default_daily_kwh")]
    pub daily_kwh: f64,
    /// Battery internal resistance (Ω).
    #[serde(default = "default_resistance")]
    pub resistance: f64,
    /// Battery open-circuit voltage (V).
    #[serde(default = "default_voltage")]
    pub voltage: f64,
    /// c^Pen (£/MWh²/h)
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "default_departure_start")]
    pub departure_start: f64,
    #[serde(default = "default_departure_end")]
    pub departure_end: f64,
    #[serde(default = "default_segments")]
    pub segments: usize,
}

fn default_charger_kw() -> f64 {
    6.0
}
fn default_daily_kwh() -> f64 {
    4.8
}
fn default_resistance() -> f64 {
    0.1
}
fn default_voltage() -> f64 {
    400.0
}
fn default_penalty() -> f64 {
    1000.0
}
fn default_departure_start() -> f64 {
    2.0
}
fn default_departure_end() -> f64 {
    14.0
}
fn default_segments() -> usize {
    crate::solver::DEFAULT_SEGMENTS
}

impl EvParams {
    pub fn with_count(count: f64) -> Self {
        Self {
            count,
            charger_kw: default_charger_kw(),
            aggregate_charger_mw: None,
            daily_kwh: default_daily_kwh(),
            resistance: default_resistance(),
            voltage: default_voltage(),
            penalty: default_penalty(),
            departure_start: default_departure_start(),
            departure_end: default_departure_end(),
            segments: default_segments(),
        }
    }

    pub fn charger_capacity(&self) -> f64 {
        self.aggregate_charger_mw
            .unwrap_or(self.count * self.charger_kw * 1e-3)
    }

    /// e^EV (MWh)
    pub fn daily_energy(&self) -> f64 {
        self.count * self.daily_kwh * 1e-3
    }

    /// Coefficient of the aggregate loss `r·P²` (1/MW) for `count` identical
    /// batteries sharing the power equally.
    pub fn loss_coefficient(&self) -> f64 {
        if self.count <= 0.0 {
            return 0.0;
        }
        self.resistance * 1e6 / (self.voltage * self.voltage * self.count)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 0.0 || self.charger_kw <= 0.0 || self.daily_kwh < 0.0 {
            return Err(Error::config("ev count, charger rating and daily energy must be non-negative"));
        }
        if self.resistance < 0.0 || self.voltage <= 0.0 || self.penalty < 0.0 {
            return Err(Error::config("ev resistance, voltage and penalty must be non-negative"));
        }
        if !(self.departure_start < self.departure_end) {
            return Err(Error::config("ev departure window must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvModel {
    grid: TimeGrid,
    params: EvParams,
    tariff: Profile,
    plug: Profile,
    uncontrolled: Profile,
    departure: Window,
}

impl EvModel {
    pub fn new(grid: TimeGrid, params: EvParams, tariff: Profile, plug: Profile, uncontrolled: Profile) -> Result<Self> {
        params.validate()?;
        for (name, p) in [("tariff", &tariff), ("plug share", &plug), ("uncontrolled demand", &uncontrolled)] {
            if p.len() != grid.count() {
                return Err(Error::config(format!("ev {name} must have one value per interval")));
            }
        }
        if plug.values().iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::config("ev plug share must lie in [0, 1]"));
        }
        let cap = params.charger_capacity();
        if plug.values().iter().zip(uncontrolled.values()).any(|(&s, &d)| d < -1e-12 || d > s * cap + 1e-9) {
            return Err(Error::config("ev uncontrolled demand must lie within the plugged-in charger capacity"));
        }
        let departure = grid.window(params.departure_start, params.departure_end)?;
        let deliverable: f64 = plug.values().iter().map(|s| s * cap * grid.step_hours()).sum();
        if deliverable < params.daily_energy() - 1e-9 {
            return Err(Error::infeasible(
                "ev",
                format!(
                    "daily energy {:.3} MWh exceeds deliverable charge {:.3} MWh",
                    params.daily_energy(),
                    deliverable
                ),
            ));
        }
        Ok(Self {
            grid,
            params,
            tariff,
            plug,
            uncontrolled,
            departure,
        })
    }

    pub fn params(&self) -> &EvParams {
        &self.params
    }

    pub fn uncontrolled(&self) -> &Profile {
        &self.uncontrolled
    }

    /// Interval order of the charging cycle, starting at the end of the departure window.
    fn cycle_order(&self) -> Vec<usize> {
        let n = self.grid.count();
        let start = (self.departure.end_index + 1) % n;
        (0..n).map(|k| (start + k) % n).collect()
    }
}

impl FlexModel for EvModel {
    fn class(&self) -> AssetClass {
        AssetClass::ElectricVehicle
    }

    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn capability(&self) -> f64 {
        self.uncontrolled.values().iter().copied().fold(0.0, f64::max)
    }

    fn dispatch(&self, fee: f64, window: &Window) -> Result<Dispatch> {
        let p = &self.params;
        let n = self.grid.count();
        let dt = self.grid.step_hours();
        let cap = p.charger_capacity();
        let energy = p.daily_energy();
        let r = p.loss_coefficient();

        let mut lp = LinearProgram::new(Sense::Maximize);
        let flex = lp.add_var("flex", 0.0, flex_upper(fee), fee * window.duration_hours(&self.grid));

        let mut terminal = Vec::with_capacity(n);
        let mut battery: Vec<Vec<VarId>> = Vec::with_capacity(n);
        for t in 0..n {
            let avail = self.plug.at(t) * cap;
            terminal.push(lp.add_var(format!("pt_{t}"), 0.0, avail, -self.tariff.at(t) * dt));
            let mut segs = Vec::new();
            if avail > 0.0 {
                let spec = PiecewiseSpec::new(p.segments, 0.0, avail)?;
                let chords = chord_segments(r, spec)?;
                for (k, c) in chords.iter().enumerate() {
                    let v = lp.add_var(format!("pb{k}_{t}"), 0.0, c.width, 0.0);
                    segs.push((v, 1.0 + c.slope));
                }
                let mut terms = vec![(terminal[t], 1.0)];
                terms.extend(segs.iter().map(|&(v, a)| (v, -a)));
                lp.add_constraint(format!("rint_{t}"), terms, Relation::Ge, 0.0);
            }
            battery.push(segs.into_iter().map(|(v, _)| v).collect());
        }

        // cumulative delivered energy at the start of each interval
        let order = self.cycle_order();
        let mut state = vec![VarId(0); n];
        for (k, &t) in order.iter().enumerate() {
            state[t] = if k == 0 {
                lp.add_var(format!("e_{t}"), 0.0, 0.0, 0.0)
            } else {
                lp.add_var(format!("e_{t}"), 0.0, f64::INFINITY, 0.0)
            };
        }
        for (k, &t) in order.iter().enumerate() {
            let mut terms: Vec<_> = battery[t].iter().map(|&v| (v, dt)).collect();
            terms.push((state[t], 1.0));
            if k + 1 < n {
                terms.push((state[order[k + 1]], -1.0));
                lp.add_constraint(format!("continuity_{t}"), terms, Relation::Eq, 0.0);
            } else {
                lp.add_constraint("daily_energy", terms, Relation::Eq, energy);
            }
        }

        let spec = PiecewiseSpec::new(p.segments, 0.0, energy.max(1e-9))?;
        let chords = chord_segments(p.penalty / 2.0 * dt, spec)?;
        let tail_slope = p.penalty * dt * energy.max(1e-9);
        let mut unmet = vec![Vec::new(); n];
        for t in self.departure.indices() {
            let mut vars: Vec<VarId> = chords
                .iter()
                .enumerate()
                .map(|(k, c)| lp.add_var(format!("el{k}_{t}"), 0.0, c.width, -c.slope))
                .collect();
            vars.push(lp.add_var(format!("elx_{t}"), 0.0, f64::INFINITY, -tail_slope));
            let mut terms: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
            terms.push((state[t], 1.0));
            lp.add_constraint(format!("departure_{t}"), terms, Relation::Ge, energy * (1.0 - self.plug.at(t)));
            unmet[t] = vars;
        }

        for t in window.indices() {
            lp.add_constraint(
                format!("flex_{t}"),
                vec![(flex, 1.0), (terminal[t], 1.0)],
                Relation::Le,
                self.uncontrolled.at(t),
            );
        }

        let sol = solve_lp(&lp)?;
        require_optimal(self.class(), &sol, "charging constraints cannot be met")?;

        let schedule: Vec<f64> = terminal.iter().map(|&v| sol.value(v)).collect();
        let battery_power = battery
            .iter()
            .map(|segs| segs.iter().map(|&v| sol.value(v)).sum())
            .collect();
        let unmet_energy = unmet
            .iter()
            .map(|vars| vars.iter().map(|&v| sol.value(v)).sum())
            .collect();
        Ok(Dispatch {
            fee,
            flexibility: sol.value(flex).max(0.0),
            objective: sol.objective,
            schedule,
            detail: Detail::Ev {
                battery_power,
                unmet_energy,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flex::profiles::{ev_uncontrolled, plug_share, EvDemandShape, PlugShape};
    use crate::model::Unit;

    fn day_model(params: EvParams) -> (EvModel, Window) {
        let grid = TimeGrid::half_hourly_day();
        let plug = plug_share(&grid, &PlugShape::default()).unwrap();
        let dem = ev_uncontrolled(&grid, &plug, params.charger_capacity(), params.daily_energy(), &EvDemandShape::default())
            .unwrap();
        let tariff = Profile::constant(&grid, 100.0, Unit::PoundsPerMwh);
        let model = EvModel::new(grid, params, tariff, plug, dem).unwrap();
        (model, grid.window(16.5, 18.5).unwrap())
    }

    #[test]
    fn loss_cut_is_tight_where_charging() {
        let (model, fw) = day_model(EvParams::with_count(500.0));
        let out = model.dispatch(10.0, &fw).unwrap();
        let Detail::Ev { battery_power, .. } = &out.detail else { panic!() };
        let r = model.params().loss_coefficient();
        let cap = model.params().charger_capacity();
        for (t, (&pt, &pb)) in out.schedule.iter().zip(battery_power).enumerate() {
            let exact = pb + r * pb * pb;
            let width = model.plug.at(t) * cap / 16.0;
            assert!(pt >= exact - 1e-9);
            assert!(pt - exact <= r * width * width / 4.0 + 1e-9, "t={t}");
        }
        let delivered: f64 = battery_power.iter().sum::<f64>() * 0.5;
        assert!((delivered - model.params().daily_energy()).abs() < 1e-7);
    }

    #[test]
    fn lossless_battery_matches_terminal_power() {
        let mut params = EvParams::with_count(200.0);
        params.resistance = 0.0;
        let (model, fw) = day_model(params);
        let out = model.dispatch(5.0, &fw).unwrap();
        let Detail::Ev { battery_power, .. } = &out.detail else { panic!() };
        for (pt, pb) in out.schedule.iter().zip(battery_power) {
            assert!((pt - pb).abs() < 1e-9);
        }
    }

    #[test]
    fn undeliverable_energy_is_infeasible() {
        let mut params = EvParams::with_count(100.0);
        params.daily_kwh = 500.0;
        let grid = TimeGrid::half_hourly_day();
        let plug = plug_share(&grid, &PlugShape::default()).unwrap();
        let dem = Profile::constant(&grid, 0.0, Unit::Megawatt);
        let tariff = Profile::constant(&grid, 100.0, Unit::PoundsPerMwh);
        let err = EvModel::new(grid, params, tariff, plug, dem).unwrap_err();
        assert!(matches!(err, Error::ModelInfeasible { ref asset, .. } if asset == "ev"));
    }
}
