//! Scenario configuration files and the Step-I pipeline that turns one into
//! per-asset supply curves.

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::Spanned;

use crate::agents::ProviderType;
use crate::error::{Error, Result};
use crate::flex::ees::EesParams;
use crate::flex::ev::EvParams;
use crate::flex::hp::HpParams;
use crate::flex::ic::IcParams;
use crate::flex::profiles::{self, AmbientShape, EvDemandShape, PlugShape, TariffShape};
use crate::flex::{offer_curve, AssetClass, EesModel, EvModel, FlexModel, HpModel, IcModel};
use crate::game::MarketSetup;
use crate::market::ServiceRequirement;
use crate::model::{aggregate_curves, OfferCurve, PriceGrid, Profile, TimeGrid, Unit};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default scenario directory.
pub const CONFIG_DIR_ENV: &str = "FLEXMARKET_CONFIG_DIR";

const BUNDLED: [(&str, &str); 4] = [
    ("st", include_str!("../scenarios/st.toml")),
    ("ct", include_str!("../scenarios/ct.toml")),
    ("lw", include_str!("../scenarios/lw.toml")),
    ("nze", include_str!("../scenarios/nze.toml")),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema_version: Spanned<u32>,
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    market: RawMarket,
    #[serde(default)]
    tariff: TariffShape,
    #[serde(default)]
    ambient: AmbientShape,
    #[serde(default)]
    plug: PlugShape,
    #[serde(default)]
    ev_demand: EvDemandShape,
    #[serde(default)]
    profiles: RawProfiles,
    hp: HpParams,
    ev: EvParams,
    ees: EesParams,
    ic: IcParams,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawMarket {
    demand_mw: f64,
    ceiling: f64,
    window_start: f64,
    window_end: f64,
    prices: Option<Spanned<String>>,
}

impl Default for RawMarket {
    fn default() -> Self {
        Self {
            demand_mw: 2.5,
            ceiling: 50.0,
            window_start: 16.5,
            window_end: 18.5,
            prices: None,
        }
    }
}

/// Explicit per-interval profiles that replace the generated shapes.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawProfiles {
    tariff: Option<Spanned<Vec<f64>>>,
    ambient: Option<Spanned<Vec<f64>>>,
    plug: Option<Spanned<Vec<f64>>>,
    /// Aggregate uncontrolled EV demand (MW).
    ev_uncontrolled: Option<Spanned<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub source: PathBuf,
    pub grid: TimeGrid,
    pub prices: PriceGrid,
    pub requirement: ServiceRequirement,
    pub tariff: Profile,
    pub ambient: Profile,
    pub plug: Profile,
    /// Aggregate uncontrolled EV demand (MW).
    pub ev_uncontrolled: Profile,
    pub hp: HpParams,
    pub ev: EvParams,
    pub ees: EesParams,
    pub ic: IcParams,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn invalid(path: &Path, text: &str, span: Option<Range<usize>>, message: impl Into<String>) -> Error {
    let (line, column) = span.map_or((0, 0), |s| line_col(text, s.start));
    Error::Validation {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

impl Scenario {
    pub fn bundled_names() -> Vec<&'static str> {
        BUNDLED.iter().map(|(n, _)| *n).collect()
    }

    /// One of the scenarios shipped with the crate, by case-insensitive name.
    pub fn bundled(name: &str) -> Result<Self> {
        let (tag, text) = BUNDLED
            .iter()
            .find(|(n, _)| n.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::config(format!("no bundled scenario '{name}'")))?;
        Self::parse(text, Path::new(&format!("<bundled>/{tag}.toml")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Resolves `spec` as a file path, a file in `dir`, or a bundled name.
    pub fn resolve(spec: &str, dir: Option<&Path>) -> Result<Self> {
        let direct = Path::new(spec);
        if direct.is_file() {
            return Self::load(direct);
        }
        if let Some(dir) = dir {
            for candidate in [dir.join(spec), dir.join(format!("{spec}.toml"))] {
                if candidate.is_file() {
                    return Self::load(&candidate);
                }
            }
        }
        Self::bundled(spec)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| invalid(path, text, e.span(), e.message()))?;
        if *raw.schema_version.get_ref() != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                path: path.to_path_buf(),
                expected: SCHEMA_VERSION,
                found: *raw.schema_version.get_ref(),
            });
        }
        let grid = TimeGrid::half_hourly_day();
        let at = |span: Range<usize>, e: Error| invalid(path, text, Some(span), e.to_string());

        let m = &raw.market;
        let prices = match &m.prices {
            Some(p) => PriceGrid::parse(p.get_ref(), m.ceiling).map_err(|e| at(p.span(), e))?,
            None => {
                if m.ceiling.fract() != 0.0 || m.ceiling < 1.0 {
                    return Err(Error::config("market.prices is required when the ceiling is not a whole number"));
                }
                PriceGrid::integer(m.ceiling as u32)
            }
        };
        let window = grid.window(m.window_start, m.window_end)?;
        let requirement = ServiceRequirement::new(m.demand_mw, m.ceiling, &grid, window)?;

        let profile = |field: &str, given: &Option<Spanned<Vec<f64>>>, unit: Unit, fallback: Result<Profile>| match given {
            Some(v) => Profile::new(&grid, v.get_ref().clone(), unit).map_err(|_| {
                invalid(
                    path,
                    text,
                    Some(v.span()),
                    format!("profiles.{field} needs {} values, found {}", grid.count(), v.get_ref().len()),
                )
            }),
            None => fallback,
        };
        let p = &raw.profiles;
        let tariff = profile("tariff", &p.tariff, Unit::PoundsPerMwh, profiles::tariff(&grid, &raw.tariff))?;
        let ambient = profile("ambient", &p.ambient, Unit::Celsius, profiles::ambient(&grid, &raw.ambient))?;
        let plug = profile("plug", &p.plug, Unit::PerUnit, profiles::plug_share(&grid, &raw.plug))?;
        let per_ev = profiles::ev_uncontrolled(&grid, &plug, raw.ev.charger_kw * 1e-3, raw.ev.daily_kwh * 1e-3, &raw.ev_demand)?;
        let scaled = Profile::new(&grid, per_ev.values().iter().map(|v| v * raw.ev.count).collect(), Unit::Megawatt);
        let ev_uncontrolled = profile("ev_uncontrolled", &p.ev_uncontrolled, Unit::Megawatt, scaled)?;

        let scenario = Self {
            name: raw.name,
            description: raw.description,
            source: path.to_path_buf(),
            grid,
            prices,
            requirement,
            tariff,
            ambient,
            plug,
            ev_uncontrolled,
            hp: raw.hp,
            ev: raw.ev,
            ees: raw.ees,
            ic: raw.ic,
        };
        // surface model parameter errors before any solve
        scenario.models()?;
        Ok(scenario)
    }

    pub fn with_prices(mut self, prices: PriceGrid) -> Result<Self> {
        if prices.ceiling() != self.requirement.ceiling {
            return Err(Error::config("price grid ceiling differs from the scenario ceiling"));
        }
        self.prices = prices;
        Ok(self)
    }

    pub fn models(&self) -> Result<Models> {
        Ok(Models {
            hp: HpModel::new(self.grid, self.hp.clone(), self.tariff.clone(), self.ambient.clone())?,
            ev: EvModel::new(
                self.grid,
                self.ev.clone(),
                self.tariff.clone(),
                self.plug.clone(),
                self.ev_uncontrolled.clone(),
            )?,
            ees: EesModel::new(self.grid, self.ees.clone(), self.tariff.clone())?,
            ic: IcModel::new(self.grid, self.ic.clone(), self.tariff.clone())?,
        })
    }

    /// Step I: one supply curve per asset class.
    pub fn supply_curves(&self) -> Result<SupplyCurves> {
        let models = self.models()?;
        let window = self.requirement.window;
        let curves = models
            .all()
            .into_iter()
            .map(|m| Ok((m.class(), offer_curve(m, &self.prices, &window)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SupplyCurves {
            prices: self.prices.clone(),
            curves,
        })
    }

    pub fn market_setup(&self, curves: &SupplyCurves) -> Result<MarketSetup> {
        Ok(MarketSetup {
            prices: self.prices.clone(),
            requirement: self.requirement.clone(),
            type_curves: curves.by_provider()?,
        })
    }
}

pub struct Models {
    pub hp: HpModel,
    pub ev: EvModel,
    pub ees: EesModel,
    pub ic: IcModel,
}

impl Models {
    pub fn all(&self) -> Vec<&dyn FlexModel> {
        vec![&self.hp, &self.ev, &self.ees, &self.ic]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupplyCurves {
    pub prices: PriceGrid,
    pub curves: Vec<(AssetClass, OfferCurve)>,
}

impl SupplyCurves {
    pub fn get(&self, class: AssetClass) -> Option<&OfferCurve> {
        self.curves.iter().find(|(c, _)| *c == class).map(|(_, c)| c)
    }

    pub fn aggregate(&self) -> Result<OfferCurve> {
        let all: Vec<OfferCurve> = self.curves.iter().map(|(_, c)| c.clone()).collect();
        aggregate_curves(&self.prices, &all)
    }

    /// Domestic supply is heat pumps plus EVs; the other types map one to one.
    pub fn by_provider(&self) -> Result<Vec<(ProviderType, OfferCurve)>> {
        let pick = |classes: &[AssetClass]| {
            let cs: Vec<OfferCurve> = classes.iter().filter_map(|c| self.get(*c).cloned()).collect();
            aggregate_curves(&self.prices, &cs)
        };
        Ok(vec![
            (ProviderType::Domestic, pick(&[AssetClass::HeatPump, AssetClass::ElectricVehicle])?),
            (ProviderType::Storage, pick(&[AssetClass::Storage])?),
            (ProviderType::Industrial, pick(&[AssetClass::Industrial])?),
        ])
    }
}
