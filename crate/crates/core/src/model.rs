//! Shared domain types: the time grid, windows, profiles, the availability-fee
//! grid and offer curves.
//!
//! Units are fixed throughout the crate: money in £, power in MW, energy in
//! MWh, temperature in °C and durations in hours. Inputs given in kW or kWh are
//! converted when scenarios are loaded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when comparing capacities (MW).
pub const CAPACITY_TOL: f64 = 1e-9;

/// Uniform discretisation of the modelling horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    step_hours: f64,
    count: usize,
}

impl TimeGrid {
    pub fn new(step_hours: f64, horizon_hours: f64) -> Result<Self> {
        if !(step_hours > 0.0) || !(horizon_hours > 0.0) {
            return Err(Error::config("time grid step and horizon must be positive"));
        }
        let ratio = horizon_hours / step_hours;
        let count = ratio.round() as usize;
        if count == 0 || (ratio - count as f64).abs() > 1e-9 {
            return Err(Error::config(format!(
                "horizon {horizon_hours} h is not a whole number of {step_hours} h steps"
            )));
        }
        Ok(Self { step_hours, count })
    }

    /// Half-hourly steps over one day.
    pub fn half_hourly_day() -> Self {
        Self {
            step_hours: 0.5,
            count: 48,
        }
    }

    pub fn step_hours(&self) -> f64 {
        self.step_hours
    }

    pub fn horizon_hours(&self) -> f64 {
        self.step_hours * self.count as f64
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Index of the interval starting at `hour` (clock time since the start of the horizon).
    pub fn index_at(&self, hour: f64) -> Result<usize> {
        let idx = hour / self.step_hours;
        let rounded = idx.round();
        if (idx - rounded).abs() > 1e-9 || rounded < 0.0 || rounded as usize > self.count {
            return Err(Error::config(format!(
                "time {hour} h is not on the {} h grid",
                self.step_hours
            )));
        }
        Ok(rounded as usize)
    }

    /// Window covering `[start_hour, end_hour)` on this grid.
    pub fn window(&self, start_hour: f64, end_hour: f64) -> Result<Window> {
        let start = self.index_at(start_hour)?;
        let end = self.index_at(end_hour)?;
        if end <= start {
            return Err(Error::config(format!(
                "window {start_hour}-{end_hour} h is empty or reversed"
            )));
        }
        Window::new(self, start, end - 1)
    }
}

/// Contiguous, inclusive range of interval indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start_index: usize,
    pub end_index: usize,
}

impl Window {
    pub fn new(grid: &TimeGrid, start_index: usize, end_index: usize) -> Result<Self> {
        if start_index > end_index || end_index >= grid.count() {
            return Err(Error::config(format!(
                "window [{start_index}, {end_index}] outside grid of {} intervals",
                grid.count()
            )));
        }
        Ok(Self {
            start_index,
            end_index,
        })
    }

    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn duration_hours(&self, grid: &TimeGrid) -> f64 {
        self.len() as f64 * grid.step_hours()
    }

    pub fn contains(&self, t: usize) -> bool {
        t >= self.start_index && t <= self.end_index
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<usize> {
        self.start_index..=self.end_index
    }

    pub fn overlaps(&self, other: &Window) -> bool {
        self.start_index <= other.end_index && other.start_index <= self.end_index
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "GBP/MWh")]
    PoundsPerMwh,
    #[serde(rename = "degC")]
    Celsius,
    #[serde(rename = "MW")]
    Megawatt,
    #[serde(rename = "pu")]
    PerUnit,
}

/// One value per interval of a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    values: Vec<f64>,
    unit: Unit,
}

impl Profile {
    pub fn new(grid: &TimeGrid, values: Vec<f64>, unit: Unit) -> Result<Self> {
        if values.len() != grid.count() {
            return Err(Error::config(format!(
                "profile has {} values, grid has {} intervals",
                values.len(),
                grid.count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("profile contains non-finite values"));
        }
        Ok(Self { values, unit })
    }

    pub fn constant(grid: &TimeGrid, value: f64, unit: Unit) -> Self {
        Self {
            values: vec![value; grid.count()],
            unit,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, t: usize) -> f64 {
        self.values[t]
    }

    pub fn mean_over(&self, window: &Window) -> f64 {
        window.indices().map(|t| self.values[t]).sum::<f64>() / window.len() as f64
    }
}

/// Availability-fee levels (£/MW/h) at which offer curves are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    levels: Vec<f64>,
    ceiling: f64,
}

impl PriceGrid {
    pub fn new(levels: Vec<f64>, ceiling: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::config("price grid needs at least one level"));
        }
        if levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("price levels must be strictly increasing"));
        }
        if levels[0] < 1.0 - 1e-12 || *levels.last().unwrap() > ceiling + 1e-12 {
            return Err(Error::config(format!(
                "price levels must lie within [1, {ceiling}]"
            )));
        }
        Ok(Self { levels, ceiling })
    }

    /// Integer levels `1, 2, ..., ceiling`.
    pub fn integer(ceiling: u32) -> Self {
        Self {
            levels: (1..=ceiling).map(f64::from).collect(),
            ceiling: f64::from(ceiling),
        }
    }

    /// Parses `"a..b"` (integer steps) or a comma separated list.
    pub fn parse(spec: &str, ceiling: f64) -> Result<Self> {
        let spec = spec.trim();
        if let Some((a, b)) = spec.split_once("..") {
            let lo: u32 = a
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad price range start `{a}`")))?;
            let hi: u32 = b
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad price range end `{b}`")))?;
            if lo > hi {
                return Err(Error::config(format!("empty price range `{spec}`")));
            }
            return Self::new((lo..=hi).map(f64::from).collect(), ceiling);
        }
        let levels = spec
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("bad price level `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels, ceiling)
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    pub fn price(&self, g: usize) -> f64 {
        self.levels[g]
    }

    /// Index of the lowest level that is `>= price` (within a small tolerance).
    pub fn level_at_or_above(&self, price: f64) -> Option<usize> {
        self.levels.iter().position(|&p| p >= price - 1e-9)
    }
}

/// Flexible capacity available at each availability fee of a [`PriceGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferCurve {
    pub prices: Vec<f64>,
    pub capacities: Vec<f64>,
}

impl OfferCurve {
    pub fn new(grid: &PriceGrid, capacities: Vec<f64>) -> Result<Self> {
        if capacities.len() != grid.len() {
            return Err(Error::config(format!(
                "curve has {} points, price grid has {}",
                capacities.len(),
                grid.len()
            )));
        }
        if capacities.iter().any(|c| !c.is_finite() || *c < -CAPACITY_TOL) {
            return Err(Error::config("curve capacities must be finite and non-negative"));
        }
        if capacities.windows(2).any(|w| w[1] < w[0] - CAPACITY_TOL) {
            return Err(Error::config("curve capacities must be nondecreasing in price"));
        }
        Ok(Self {
            prices: grid.levels().to_vec(),
            capacities: capacities.into_iter().map(|c| c.max(0.0)).collect(),
        })
    }

    pub fn zero(grid: &PriceGrid) -> Self {
        Self {
            prices: grid.levels().to_vec(),
            capacities: vec![0.0; grid.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.prices.iter().copied().zip(self.capacities.iter().copied())
    }

    pub fn max_capacity(&self) -> f64 {
        self.capacities.last().copied().unwrap_or(0.0)
    }

    /// Capacity first offered at each level: the curve's first differences.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.capacities
            .iter()
            .map(|&c| {
                let inc = (c - prev).max(0.0);
                prev = c;
                inc
            })
            .collect()
    }

    /// The curve with every capacity multiplied by `share`.
    pub fn scaled(&self, share: f64) -> Self {
        Self {
            prices: self.prices.clone(),
            capacities: self.capacities.iter().map(|c| c * share).collect(),
        }
    }

    /// Lowest price at which the curve reaches its maximum capacity.
    pub fn saturation_price(&self) -> Option<f64> {
        let max = self.max_capacity();
        self.points()
            .find(|&(_, c)| c >= max - 1e-6)
            .map(|(p, _)| p)
    }

    fn same_grid(&self, other: &OfferCurve) -> bool {
        self.prices.len() == other.prices.len()
            && self
                .prices
                .iter()
                .zip(&other.prices)
                .all(|(a, b)| (a - b).abs() < 1e-12)
    }
}

/// Pointwise sum of curves sharing one price grid.
///
/// An empty list sums to the all-zero curve on `grid`.
pub fn aggregate_curves(grid: &PriceGrid, curves: &[OfferCurve]) -> Result<OfferCurve> {
    let mut total = OfferCurve::zero(grid);
    for curve in curves {
        if !curve.same_grid(&total) {
            return Err(Error::config("cannot aggregate curves on different price grids"));
        }
        for (acc, c) in total.capacities.iter_mut().zip(&curve.capacities) {
            *acc += c;
        }
    }
    Ok(total)
}

/// Smallest grid price whose aggregate capacity covers `demand`, or `ceiling`
/// when supply never reaches it.
pub fn true_equilibrium(aggregate: &OfferCurve, demand: f64, ceiling: f64) -> f64 {
    aggregate
        .points()
        .find(|&(p, c)| p <= ceiling + 1e-12 && c >= demand - CAPACITY_TOL)
        .map(|(p, _)| p)
        .unwrap_or(ceiling)
}
