//! Step-I asset models. Each model maximises the availability reward minus
//! operating cost and penalties at a fixed fee, and [`offer_curve`] sweeps the
//! fee over a [`PriceGrid`] to build the asset's supply curve.

pub mod ees;
pub mod ev;
pub mod hp;
pub mod ic;
pub mod profiles;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{OfferCurve, PriceGrid, TimeGrid, Window};
use crate::solver::{Solution, Status};

pub use ees::EesModel;
pub use ev::EvModel;
pub use hp::HpModel;
pub use ic::IcModel;

/// Largest downward step between consecutive curve points that is treated as
/// solver noise and flattened.
pub const MONOTONE_REPAIR_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetClass {
    HeatPump,
    ElectricVehicle,
    Storage,
    Industrial,
}

impl AssetClass {
    pub const ALL: [AssetClass; 4] = [
        AssetClass::HeatPump,
        AssetClass::ElectricVehicle,
        AssetClass::Storage,
        AssetClass::Industrial,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            AssetClass::HeatPump => "hp",
            AssetClass::ElectricVehicle => "ev",
            AssetClass::Storage => "ees",
            AssetClass::Industrial => "ic",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }
}

impl std::fmt::Display for AssetClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Asset-specific part of a solved dispatch.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detail {
    Hp {
        /// Aggregate electrical power per dwelling type and interval (MW).
        heat: Vec<Vec<f64>>,
        /// Indoor temperature per dwelling type and interval.
        temperatures: Vec<Vec<f64>>,
        /// Largest comfort-band violation (°C).
        max_deviation: f64,
    },
    Ev {
        battery_power: Vec<f64>,
        unmet_energy: Vec<f64>,
    },
    Ees {
        state_of_energy: Vec<f64>,
        dod: f64,
        segment: usize,
    },
    Ic {
        recovery: Vec<f64>,
    },
}

/// Solved dispatch at one availability fee.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dispatch {
    pub fee: f64,
    /// Flexible capacity P^F (MW).
    pub flexibility: f64,
    /// Objective of the linearised model (£ per day).
    pub objective: f64,
    /// Scheduled consumption per interval (MW); net power for storage.
    pub schedule: Vec<f64>,
    pub detail: Detail,
}

pub trait FlexModel: Sync {
    fn class(&self) -> AssetClass;

    fn grid(&self) -> &TimeGrid;

    /// Upper bound on the flexible capacity this asset could ever offer (MW).
    fn capability(&self) -> f64;

    fn dispatch(&self, fee: f64, window: &Window) -> Result<Dispatch>;
}

/// Flexible capacity at every level of `prices`, solved in parallel and
/// returned in grid order.
///
/// Downward steps of at most [`MONOTONE_REPAIR_TOL`] are flattened; larger ones
/// are reported as errors rather than hidden.
pub fn offer_curve(model: &dyn FlexModel, prices: &PriceGrid, window: &Window) -> Result<OfferCurve> {
    let raw: Vec<f64> = prices
        .levels()
        .par_iter()
        .map(|&fee| model.dispatch(fee, window).map(|d| d.flexibility))
        .collect::<Result<_>>()?;
    let repaired = monotone_repair(model.class(), prices, &raw)?;
    OfferCurve::new(prices, repaired)
}

fn monotone_repair(class: AssetClass, prices: &PriceGrid, raw: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(raw.len());
    let mut running: f64 = 0.0;
    for (g, &c) in raw.iter().enumerate() {
        let c = c.max(0.0);
        if c < running {
            if running - c > MONOTONE_REPAIR_TOL {
                return Err(Error::config(format!(
                    "{class} curve drops by {:.3e} MW at fee {}",
                    running - c,
                    prices.price(g)
                )));
            }
            log::debug!("{class}: flattened {:.3e} MW dip at fee {}", running - c, prices.price(g));
        }
        running = running.max(c);
        out.push(running);
    }
    Ok(out)
}

/// Without a reward the flexible capacity is indeterminate; it is pinned to zero.
pub(crate) fn flex_upper(fee: f64) -> f64 {
    if fee > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Maps a non-optimal solver status to a model error naming the asset.
pub(crate) fn require_optimal(class: AssetClass, sol: &Solution, context: &str) -> Result<()> {
    match sol.status {
        Status::Optimal => Ok(()),
        Status::Infeasible => Err(Error::infeasible(class.tag(), context.to_string())),
        Status::Unbounded => Err(Error::infeasible(
            class.tag(),
            format!("{context} (objective unbounded)"),
        )),
    }
}
