//! Price statistics, DSO cost-benefit figures and the output tree.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::Strategy;
use crate::error::{Error, Result};
use crate::flex::AssetClass;
use crate::game::{EquilibriumTable, TableRow};
use crate::market::Mechanism;
use crate::model::{OfferCurve, PriceGrid};
use crate::scenario::SupplyCurves;

pub const SCHEMA_VERSION: u32 = 1;

/// Market constants the report needs alongside the table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportContext {
    /// P^D (MW)
    pub demand: f64,
    /// π̄ (£/MW/h)
    pub ceiling: f64,
    /// ΔT^FW (h)
    pub window_hours: f64,
}

impl ReportContext {
    /// Cost of buying the whole requirement at the ceiling (£/day).
    pub fn ceiling_cost(&self) -> f64 {
        self.ceiling * self.demand * self.window_hours
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceStats {
    pub mechanism: String,
    pub strategy: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Five-number summary; quartiles are medians of the halves, each including
/// the overall median when the count is odd.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let half = n.div_ceil(2);
    Some([v[0], median(&v[..half]), median(&v), median(&v[n - half..]), v[n - 1]])
}

/// Scenarios whose truthful supply clears below the ceiling.
fn competitive(row: &TableRow, ctx: &ReportContext) -> bool {
    row.error.is_empty() && row.true_price < ctx.ceiling
}

/// Statistics per mechanism and strategy, plus one pooled row per mechanism
/// (strategy `all`), across scenarios with a competitive truthful equilibrium.
pub fn price_stats(rows: &[TableRow], ctx: &ReportContext) -> Vec<PriceStats> {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| competitive(r, ctx)) {
        groups.entry((r.mechanism.clone(), r.strategy.clone())).or_default().push(r.equilibrium_price);
        groups.entry((r.mechanism.clone(), "all".into())).or_default().push(r.equilibrium_price);
    }
    let mut out = Vec::new();
    for m in Mechanism::ALL {
        let mut keys: Vec<&(String, String)> = groups.keys().filter(|k| k.0 == m.tag()).collect();
        if keys.is_empty() {
            log::warn!("no cells for mechanism {m}; statistics omitted");
            continue;
        }
        keys.sort_by_key(|k| (k.1 == "all", k.1.clone()));
        for key in keys {
            let values = &groups[key];
            let [min, q1, median, q3, max] = five_numbers(values).expect("non-empty group");
            out.push(PriceStats {
                mechanism: key.0.clone(),
                strategy: key.1.clone(),
                count: values.len(),
                min,
                q1,
                median,
                q3,
                max,
                mean: values.iter().sum::<f64>() / values.len() as f64,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBenefit {
    pub label: String,
    /// £/MW/h
    pub price: f64,
    /// £/day
    pub dso_cost: f64,
    pub dso_benefit: f64,
    /// Paid for unmet demand at the ceiling (£/day).
    pub shortfall_cost: f64,
    pub provider_revenue: f64,
    pub provider_cost: f64,
    pub provider_profit: f64,
    pub profit_share: f64,
}

/// Cost-benefit at one price with the given provider totals (£/day).
pub fn cost_benefit(label: &str, price: f64, revenue: f64, profit: f64, shortfall_cost: f64, ctx: &ReportContext) -> CostBenefit {
    let dso_cost = price * ctx.demand * ctx.window_hours;
    CostBenefit {
        label: label.to_string(),
        price,
        dso_cost,
        dso_benefit: ctx.ceiling_cost() - dso_cost,
        shortfall_cost,
        provider_revenue: revenue,
        provider_cost: revenue - profit,
        provider_profit: profit,
        profit_share: if revenue > 0.0 { profit / revenue } else { 0.0 },
    }
}

/// Per-cell figures at the effective price paid per MW of requirement.
pub fn cell_cost_benefit(row: &TableRow, ctx: &ReportContext) -> CostBenefit {
    let shortfall = ctx.ceiling * row.unmet_mw * ctx.window_hours;
    let price = (row.revenue + shortfall) / (ctx.demand * ctx.window_hours);
    let label = format!("{}/{}/{}/{}", row.scenario, row.mechanism, row.strategy, row.agents);
    cost_benefit(&label, price, row.revenue, row.profit, shortfall, ctx)
}

/// Strategy pairings evaluated for each mechanism; VCG pools every strategy.
pub const DOMINANT: [(Mechanism, Option<Strategy>); 4] = [
    (Mechanism::Pab, Some(Strategy::Op)),
    (Mechanism::Pac, Some(Strategy::Us)),
    (Mechanism::Dra, Some(Strategy::Ub)),
    (Mechanism::Vcg, None),
];

/// Mechanism-level figures at the mean equilibrium price of each pairing.
pub fn mechanism_cost_benefit(rows: &[TableRow], ctx: &ReportContext) -> Vec<CostBenefit> {
    DOMINANT
        .iter()
        .filter_map(|&(m, s)| {
            let cells: Vec<&TableRow> = rows
                .iter()
                .filter(|r| competitive(r, ctx) && r.mechanism == m.tag() && s.map_or(true, |s| r.strategy == s.tag()))
                .collect();
            if cells.is_empty() {
                return None;
            }
            let n = cells.len() as f64;
            let price = cells.iter().map(|r| r.equilibrium_price).sum::<f64>() / n;
            let revenue = cells.iter().map(|r| r.revenue).sum::<f64>() / n;
            let profit = cells.iter().map(|r| r.profit).sum::<f64>() / n;
            let shortfall = cells.iter().map(|r| ctx.ceiling * r.unmet_mw * ctx.window_hours).sum::<f64>() / n;
            let label = format!("{}({})", m.tag(), s.map_or("all", Strategy::tag));
            Some(cost_benefit(&label, price, revenue, profit, shortfall, ctx))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftTarget {
    pub metric: String,
    pub target: f64,
    pub value: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub within: bool,
}

impl SoftTarget {
    pub fn new(metric: impl Into<String>, target: f64, value: f64, tolerance: f64) -> Self {
        let deviation = value - target;
        Self {
            metric: metric.into(),
            target,
            value,
            deviation,
            tolerance,
            within: deviation.abs() <= tolerance,
        }
    }
}

/// Published reference values compared against this run.
pub fn soft_targets(
    true_prices: &[(String, f64)],
    stats: &[PriceStats],
    summary: &[CostBenefit],
) -> Vec<SoftTarget> {
    let mut out = Vec::new();
    for (name, target) in [("lw", 8.0), ("ct", 9.0), ("nze", 10.0)] {
        if let Some((_, p)) = true_prices.iter().find(|(n, _)| n.eq_ignore_ascii_case(name)) {
            out.push(SoftTarget::new(format!("true_price_{name}"), target, *p, 2.0));
        }
    }
    for (m, s, target) in [("pab", "op", 12.4), ("dra", "ub", 9.3), ("pac", "us", 9.6), ("vcg", "all", 9.0)] {
        if let Some(st) = stats.iter().find(|x| x.mechanism == m && x.strategy == s) {
            out.push(SoftTarget::new(format!("mean_price_{m}_{s}"), target, st.mean, 2.0));
        }
    }
    if !summary.is_empty() {
        let lo = summary.iter().map(|c| c.dso_benefit).fold(f64::INFINITY, f64::min);
        let hi = summary.iter().map(|c| c.dso_benefit).fold(f64::NEG_INFINITY, f64::max);
        out.push(SoftTarget::new("dso_benefit_min", 188.0, lo, 10.0));
        out.push(SoftTarget::new("dso_benefit_max", 205.0, hi, 10.0));
    }
    for (label, target) in [("pab(op)", 0.533), ("pac(us)", 0.433), ("dra(ub)", 0.414), ("vcg(all)", 0.395)] {
        if let Some(c) = summary.iter().find(|c| c.label == label) {
            out.push(SoftTarget::new(format!("profit_share_{label}"), target, c.profit_share, 0.05));
        }
    }
    out
}

/// Whether profit shares fall in the order PAB(OP) ≥ PAC(US) ≥ DRA(UB) ≥ VCG.
pub fn profit_share_ordered(summary: &[CostBenefit]) -> bool {
    let shares: Vec<f64> = ["pab(op)", "pac(us)", "dra(ub)", "vcg(all)"]
        .iter()
        .filter_map(|l| summary.iter().find(|c| c.label == *l).map(|c| c.profit_share))
        .collect();
    shares.len() == 4 && shares.windows(2).all(|w| w[0] >= w[1])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableFile {
    pub schema_version: u32,
    pub context: ReportContext,
    pub rows: Vec<TableRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub name: String,
    pub true_price: f64,
    pub max_supply: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub context: ReportContext,
    pub scenarios: Vec<ScenarioSummary>,
    pub price_stats: Vec<PriceStats>,
    pub cost_benefit: Vec<CostBenefit>,
    pub profit_share_ordered: bool,
    pub soft_targets: Vec<SoftTarget>,
    pub all_converged: bool,
}

/// Everything `emit` writes.
pub struct Artifacts<'a> {
    pub context: ReportContext,
    pub curves: &'a [(String, SupplyCurves)],
    pub true_prices: &'a [(String, f64)],
    pub table: Option<&'a EquilibriumTable>,
    pub replay: bool,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_bytes<T: Serialize>(path: &Path, rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    w.into_inner().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write(path, &csv_bytes(path, rows)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write(path, text.as_bytes())
}

/// Supply curves as CSV: one row per price, one column per asset class and the aggregate.
pub fn supply_curve_csv(curves: &SupplyCurves) -> Result<String> {
    let aggregate = curves.aggregate()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["price".to_string()];
    header.extend(curves.curves.iter().map(|(c, _)| c.tag().to_string()));
    header.push("aggregate".into());
    let err = |e: csv::Error| Error::config(e.to_string());
    w.write_record(&header).map_err(err)?;
    for (g, price) in curves.prices.levels().iter().enumerate() {
        let mut rec = vec![price.to_string()];
        rec.extend(curves.curves.iter().map(|(_, c)| c.capacities[g].to_string()));
        rec.push(aggregate.capacities[g].to_string());
        w.write_record(&rec).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::config(e.to_string()))
}

/// Reads a supply-curve CSV back; the aggregate column is dropped.
pub fn parse_supply_curve_csv(text: &str, ceiling: f64, path: &Path) -> Result<SupplyCurves> {
    let bad = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.get(0) != Some("price") {
        return Err(bad("first column must be `price`".into()));
    }
    let classes: Vec<Option<AssetClass>> = header.iter().skip(1).map(AssetClass::from_tag).collect();
    let mut prices = Vec::new();
    let mut columns = vec![Vec::new(); classes.len()];
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("bad number in column {} of line {}", i + 1, rec.position().map_or(0, |p| p.line()))))
        };
        prices.push(num(0)?);
        for (k, col) in columns.iter_mut().enumerate() {
            col.push(num(k + 1)?);
        }
    }
    let grid = PriceGrid::new(prices, ceiling)?;
    let curves = classes
        .into_iter()
        .zip(columns)
        .filter_map(|(c, caps)| c.map(|c| (c, caps)))
        .map(|(c, caps)| Ok((c, OfferCurve::new(&grid, caps)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SupplyCurves { prices: grid, curves })
}

/// Reads an equilibrium table written by [`emit`].
pub fn load_table(path: &Path) -> Result<TableFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let found = value.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            expected: SCHEMA_VERSION,
            found,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Builds the mechanism-level summary from table rows.
pub fn summarise(rows: &[TableRow], ctx: &ReportContext, scenarios: Vec<ScenarioSummary>) -> Summary {
    let stats = price_stats(rows, ctx);
    let cb = mechanism_cost_benefit(rows, ctx);
    let true_prices: Vec<(String, f64)> = scenarios.iter().map(|s| (s.name.clone(), s.true_price)).collect();
    Summary {
        schema_version: SCHEMA_VERSION,
        context: *ctx,
        soft_targets: soft_targets(&true_prices, &stats, &cb),
        profit_share_ordered: profit_share_ordered(&cb),
        price_stats: stats,
        cost_benefit: cb,
        scenarios,
        all_converged: rows.iter().all(|r| r.converged),
    }
}

/// Dominant-strategy view: one row per scenario, mechanism and strategy with
/// one price column per agent count.
#[derive(Debug, Serialize)]
struct PivotRow {
    scenario: String,
    mechanism: String,
    strategy: String,
    agents_3: Option<f64>,
    agents_6: Option<f64>,
    agents_9: Option<f64>,
    agents_12: Option<f64>,
}

fn pivot(rows: &[TableRow]) -> Vec<PivotRow> {
    let mut map: BTreeMap<(String, usize, String), PivotRow> = BTreeMap::new();
    for r in rows {
        let m = Mechanism::ALL.iter().position(|m| m.tag() == r.mechanism).unwrap_or(usize::MAX);
        let e = map.entry((r.scenario.clone(), m, r.strategy.clone())).or_insert_with(|| PivotRow {
            scenario: r.scenario.clone(),
            mechanism: r.mechanism.clone(),
            strategy: r.strategy.clone(),
            agents_3: None,
            agents_6: None,
            agents_9: None,
            agents_12: None,
        });
        let slot = match r.agents {
            3 => &mut e.agents_3,
            6 => &mut e.agents_6,
            9 => &mut e.agents_9,
            12 => &mut e.agents_12,
            _ => continue,
        };
        *slot = Some(r.equilibrium_price);
    }
    map.into_values().collect()
}

/// Writes the output tree under `dir` and returns the written paths.
pub fn emit(artifacts: &Artifacts<'_>, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let ctx = &artifacts.context;
    for (name, curves) in artifacts.curves {
        let path = dir.join("supply_curves").join(format!("{name}.csv"));
        write(&path, supply_curve_csv(curves)?.as_bytes())?;
        written.push(path);
    }
    let scenarios: Vec<ScenarioSummary> = artifacts
        .true_prices
        .iter()
        .map(|(name, p)| ScenarioSummary {
            name: name.clone(),
            true_price: *p,
            max_supply: artifacts
                .curves
                .iter()
                .find(|(n, _)| n == name)
                .and_then(|(_, c)| c.aggregate().ok())
                .map_or(0.0, |a| a.max_capacity()),
        })
        .collect();
    let path = dir.join("true_prices.csv");
    write_csv(&path, &scenarios)?;
    written.push(path);

    if let Some(table) = artifacts.table {
        let rows = table.rows();
        let path = dir.join("equilibria.csv");
        write_csv(&path, &rows)?;
        written.push(path);
        let path = dir.join("equilibria.json");
        write_json(
            &path,
            &TableFile {
                schema_version: SCHEMA_VERSION,
                context: *ctx,
                rows: rows.clone(),
            },
        )?;
        written.push(path);
        written.extend(emit_report(&rows, ctx, scenarios, dir)?);
        if artifacts.replay {
            for c in &table.cells {
                if let Ok(eq) = &c.outcome {
                    if let Some(trace) = &eq.trace {
                        let path = dir
                            .join("replay")
                            .join(format!("{}_{}_{}_{}.json", c.scenario, c.mechanism, c.strategy, c.agents));
                        write_json(&path, trace)?;
                        written.push(path);
                    }
                }
            }
        }
    }
    Ok(written)
}

/// Writes statistics, cost-benefit and comparison tables for `rows`.
pub fn emit_report(rows: &[TableRow], ctx: &ReportContext, scenarios: Vec<ScenarioSummary>, dir: &Path) -> Result<Vec<PathBuf>> {
    let summary = summarise(rows, ctx, scenarios);
    let cells: Vec<CostBenefit> = rows.iter().filter(|r| r.error.is_empty()).map(|r| cell_cost_benefit(r, ctx)).collect();
    let mut written = Vec::new();
    let mut put_csv = |name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        let path = dir.join(name);
        f(&path)?;
        written.push(path);
        Ok(())
    };
    put_csv("price_stats.csv", &|p| write_csv(p, &summary.price_stats))?;
    put_csv("cost_benefit.csv", &|p| write_csv(p, &summary.cost_benefit))?;
    put_csv("cost_benefit_cells.csv", &|p| write_csv(p, &cells))?;
    put_csv("soft_targets.csv", &|p| write_csv(p, &summary.soft_targets))?;
    put_csv("plots/equilibrium_by_agents.csv", &|p| write_csv(p, &pivot(rows)))?;
    put_csv("summary.json", &|p| write_json(p, &summary))?;
    Ok(written)
}
