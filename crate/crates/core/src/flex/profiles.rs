//! Default input profiles: energy tariff, winter ambient temperature, EV plug-in
//! share and uncontrolled EV charging. Every shape is parameterised so scenario
//! files can override it; explicit 48-value arrays override the shapes entirely.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Profile, TimeGrid, Unit};

/// Flat tariff with a multiplier applied over `[peak_start, peak_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TariffShape {
    /// £/MWh
    pub base: f64,
    pub peak_multiplier: f64,
    pub peak_start: f64,
    pub peak_end: f64,
}

impl Default for TariffShape {
    fn default() -> Self {
        Self {
            base: 100.0,
            peak_multiplier: 1.12,
            peak_start: 16.5,
            peak_end: 18.5,
        }
    }
}

/// Daily temperature cycle with a cosine rise from the minimum to the maximum
/// and a cosine fall back, evaluated at interval midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmbientShape {
    pub min: f64,
    pub min_hour: f64,
    pub max: f64,
    pub max_hour: f64,
}

impl Default for AmbientShape {
    fn default() -> Self {
        Self {
            min: 2.0,
            min_hour: 6.0,
            max: 8.0,
            max_hour: 15.0,
        }
    }
}

/// Trapezoidal share of plugged-in EVs: high overnight, low in the daytime,
/// with linear departure and arrival ramps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlugShape {
    pub overnight: f64,
    pub daytime: f64,
    pub depart_start: f64,
    pub depart_end: f64,
    pub arrive_start: f64,
    pub arrive_end: f64,
}

impl Default for PlugShape {
    fn default() -> Self {
        Self {
            overnight: 0.9,
            daytime: 0.2,
            depart_start: 6.0,
            depart_end: 10.0,
            arrive_start: 14.0,
            arrive_end: 22.0,
        }
    }
}

/// Uncontrolled charging per EV. A share `on_arrival` of the daily energy is
/// drawn at the charger rating as cars plug in; the rest trickles in evenly
/// over the plugged-in EV-hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvDemandShape {
    pub on_arrival: f64,
}

impl Default for EvDemandShape {
    fn default() -> Self {
        Self { on_arrival: 0.0 }
    }
}

fn hours_since(hour: f64, origin: f64, horizon: f64) -> f64 {
    (hour - origin).rem_euclid(horizon)
}

pub fn tariff(grid: &TimeGrid, shape: &TariffShape) -> Result<Profile> {
    if shape.base < 0.0 || shape.peak_multiplier < 0.0 {
        return Err(Error::config("tariff base and peak multiplier must be non-negative"));
    }
    let h = grid.step_hours();
    let span = hours_since(shape.peak_end, shape.peak_start, grid.horizon_hours());
    let values = (0..grid.count())
        .map(|t| {
            let mid = (t as f64 + 0.5) * h;
            let in_peak = hours_since(mid, shape.peak_start, grid.horizon_hours()) < span;
            shape.base * if in_peak { shape.peak_multiplier } else { 1.0 }
        })
        .collect();
    Profile::new(grid, values, Unit::PoundsPerMwh)
}

pub fn ambient(grid: &TimeGrid, shape: &AmbientShape) -> Result<Profile> {
    let day = grid.horizon_hours();
    let rise = hours_since(shape.max_hour, shape.min_hour, day);
    if !(rise > 0.0 && rise < day) || shape.max < shape.min {
        return Err(Error::config("ambient shape needs min_hour != max_hour and max >= min"));
    }
    let fall = day - rise;
    let mean = 0.5 * (shape.max + shape.min);
    let amp = 0.5 * (shape.max - shape.min);
    let values = (0..grid.count())
        .map(|t| {
            let mid = (t as f64 + 0.5) * grid.step_hours();
            let s = hours_since(mid, shape.min_hour, day);
            if s < rise {
                mean - amp * (PI * s / rise).cos()
            } else {
                mean + amp * (PI * (s - rise) / fall).cos()
            }
        })
        .collect();
    Profile::new(grid, values, Unit::Celsius)
}

fn plug_at(shape: &PlugShape, hour: f64) -> f64 {
    let ramp = |h: f64, a: f64, b: f64, from: f64, to: f64| from + (to - from) * ((h - a) / (b - a));
    if hour < shape.depart_start || hour >= shape.arrive_end {
        shape.overnight
    } else if hour < shape.depart_end {
        ramp(hour, shape.depart_start, shape.depart_end, shape.overnight, shape.daytime)
    } else if hour < shape.arrive_start {
        shape.daytime
    } else {
        ramp(hour, shape.arrive_start, shape.arrive_end, shape.daytime, shape.overnight)
    }
}

pub fn plug_share(grid: &TimeGrid, shape: &PlugShape) -> Result<Profile> {
    let ordered = shape.depart_start <= shape.depart_end
        && shape.depart_end <= shape.arrive_start
        && shape.arrive_start <= shape.arrive_end
        && shape.arrive_end <= grid.horizon_hours();
    if !ordered {
        return Err(Error::config("plug shape hours must satisfy depart_start <= depart_end <= arrive_start <= arrive_end"));
    }
    if !(0.0..=1.0).contains(&shape.overnight) || !(0.0..=1.0).contains(&shape.daytime) {
        return Err(Error::config("plug shares must lie in [0, 1]"));
    }
    let values = (0..grid.count())
        .map(|t| plug_at(shape, (t as f64 + 0.5) * grid.step_hours()))
        .collect();
    Profile::new(grid, values, Unit::PerUnit)
}

/// Uncontrolled charging per EV in MW for `daily_energy` MWh per EV per day.
pub fn ev_uncontrolled(
    grid: &TimeGrid,
    plug: &Profile,
    charger_mw: f64,
    daily_energy: f64,
    shape: &EvDemandShape,
) -> Result<Profile> {
    if !(0.0..=1.0).contains(&shape.on_arrival) {
        return Err(Error::config("ev demand on_arrival share must lie in [0, 1]"));
    }
    let n = grid.count();
    let h = grid.step_hours();
    let p = plug.values();
    let arrivals: Vec<f64> = (0..n).map(|t| (p[t] - p[(t + n - 1) % n]).max(0.0)).collect();
    let total_arrivals: f64 = arrivals.iter().sum();
    let plugged_hours: f64 = p.iter().sum::<f64>() * h;
    let mut values = vec![0.0; n];

    let trickle = (1.0 - shape.on_arrival) * daily_energy;
    if plugged_hours > 0.0 {
        for (v, &share) in values.iter_mut().zip(p) {
            *v += trickle * share / plugged_hours;
        }
    }
    let burst = shape.on_arrival * daily_energy;
    if total_arrivals > 0.0 && burst > 0.0 {
        // each arriving car draws the charger rating until its share of the burst energy is delivered
        let per_car = burst / total_arrivals;
        for (t, &a) in arrivals.iter().enumerate() {
            let mut left = per_car * a;
            let rate = charger_mw * a;
            let mut k = t;
            while left > 1e-15 && rate > 0.0 {
                let e = (rate * h).min(left);
                values[k % n] += e / h;
                left -= e;
                k += 1;
            }
        }
    }
    for (v, &share) in values.iter_mut().zip(p) {
        *v = v.min(share * charger_mw);
    }
    Profile::new(grid, values, Unit::Megawatt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ambient_hits_extremes_near_configured_hours() {
        let grid = TimeGrid::half_hourly_day();
        let amb = ambient(&grid, &AmbientShape::default()).unwrap();
        let v = amb.values();
        let (imin, _) = v.iter().enumerate().fold((0, f64::MAX), |a, (i, &x)| if x < a.1 { (i, x) } else { a });
        let (imax, _) = v.iter().enumerate().fold((0, f64::MIN), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
        assert!(imin == 11 || imin == 12, "{imin}");
        assert!(imax == 29 || imax == 30, "{imax}");
        assert!(v.iter().all(|&x| (2.0..=8.0).contains(&x)));
    }

    #[test]
    fn tariff_peak_applies_inside_window_only() {
        let grid = TimeGrid::half_hourly_day();
        let shape = TariffShape { peak_multiplier: 1.5, ..TariffShape::default() };
        let c = tariff(&grid, &shape).unwrap();
        assert_eq!(c.at(32), 100.0);
        assert_eq!(c.at(33), 150.0);
        assert_eq!(c.at(36), 150.0);
        assert_eq!(c.at(37), 100.0);
    }

    #[test]
    fn uncontrolled_demand_delivers_daily_energy() {
        let grid = TimeGrid::half_hourly_day();
        let plug = plug_share(&grid, &PlugShape::default()).unwrap();
        for on_arrival in [0.0, 0.3, 1.0] {
            let d = ev_uncontrolled(&grid, &plug, 0.006, 0.0048, &EvDemandShape { on_arrival }).unwrap();
            let energy: f64 = d.values().iter().sum::<f64>() * 0.5;
            assert!((energy - 0.0048).abs() < 1e-12, "{on_arrival}: {energy}");
            for (x, s) in d.values().iter().zip(plug.values()) {
                assert!(*x <= s * 0.006 + 1e-15);
            }
        }
    }
}
