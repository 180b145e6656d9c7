//! Acceptance criteria 1–9. Each test prints one `criterion N: PASS|FAIL` line.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use clap::Parser;
use common::*;
use flexmarket::agents::Strategy;
use flexmarket::cli::{run, Cli};
use flexmarket::flex::FlexModel;
use flexmarket::game::{sweep, EquilibriumTable, GameConfig, MarketSetup};
use flexmarket::market::{self, Mechanism, Offer, OfferBook, ServiceRequirement};
use flexmarket::reporting::{self, ReportContext};
use flexmarket::scenario::{Scenario, SupplyCurves};
use rand::Rng;

fn report(n: u32, ok: bool, detail: impl AsRef<str>) {
    println!("criterion {n}: {} {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
}

fn check(n: u32, failures: &[String], detail: impl AsRef<str>) {
    let ok = failures.is_empty();
    report(n, ok, detail);
    for f in failures.iter().take(20) {
        println!("  {f}");
    }
    assert!(ok, "criterion {n}: {} failure(s), first: {}", failures.len(), failures[0]);
}

struct Bundle {
    name: String,
    curves: SupplyCurves,
    setup: MarketSetup,
}

fn bundles() -> &'static [Bundle] {
    static CELL: OnceLock<Vec<Bundle>> = OnceLock::new();
    CELL.get_or_init(|| {
        Scenario::bundled_names()
            .into_iter()
            .map(|name| {
                let scenario = Scenario::bundled(name).unwrap();
                let curves = scenario.supply_curves().unwrap();
                let setup = scenario.market_setup(&curves).unwrap();
                Bundle {
                    name: name.to_string(),
                    curves,
                    setup,
                }
            })
            .collect()
    })
}

fn bundle(name: &str) -> &'static Bundle {
    bundles().iter().find(|b| b.name == name).unwrap()
}

const AGENTS: [usize; 4] = [3, 6, 9, 12];

fn full_sweep() -> &'static EquilibriumTable {
    static CELL: OnceLock<EquilibriumTable> = OnceLock::new();
    CELL.get_or_init(|| {
        let setups: Vec<(String, MarketSetup)> = bundles().iter().map(|b| (b.name.clone(), b.setup.clone())).collect();
        let template = GameConfig::new(Mechanism::Pab, Strategy::Op, 3);
        sweep(&setups, &Mechanism::ALL, &Strategy::STRATEGIC, &AGENTS, &template)
    })
}

// ------------------------------------------------------------------ 1

#[test]
fn criterion_1_merit_order_oracle() {
    let start = Instant::now();
    let ceiling = 50.0;
    let mut r = rng(1);
    let mut failures = Vec::new();
    let (mut degenerate, mut exact) = (0, 0);
    for case in 0..1000 {
        let book = random_book(&mut r, 10, 50, ceiling);
        let supply: f64 = merit_order(&book, f64::INFINITY, ceiling).accepted.iter().flatten().sum();
        // a quarter of the cases land exactly on a cumulative group total
        let demand = if case % 4 == 0 {
            let valid: Vec<(f64, f64)> = book
                .offers
                .iter()
                .flat_map(|o| o.prices.iter().copied().zip(o.capacities.iter().copied()))
                .filter(|&(p, c)| c > 0.0 && p <= ceiling)
                .collect();
            match valid.get(r.gen_range(0..valid.len().max(1))) {
                Some(&(top, _)) => valid.iter().filter(|v| v.0 <= top).map(|v| v.1).sum(),
                None => 0.0,
            }
        } else {
            r.gen_range(0.0..(supply * 1.2).max(0.1))
        };
        let req = requirement(demand, ceiling);
        let got = market::clear(&book, &req).unwrap();
        let want = merit_order(&book, demand, ceiling);
        for (a, (g_acc, w_acc)) in got.accepted.iter().zip(&want.accepted).enumerate() {
            for (g, (x, y)) in g_acc.iter().zip(w_acc).enumerate() {
                if (x - y).abs() > 1e-9 {
                    failures.push(format!("case {case}: agent {a} level {g}: {x} vs oracle {y}"));
                }
            }
        }
        if (got.unmet - want.unmet).abs() > 1e-9 {
            failures.push(format!("case {case}: unmet {} vs oracle {}", got.unmet, want.unmet));
        }
        if want.degenerate() {
            degenerate += 1;
            if got.mcp < want.price_lo - 1e-9 || got.mcp > want.price_hi + 1e-9 {
                failures.push(format!("case {case}: λ {} outside [{}, {}]", got.mcp, want.price_lo, want.price_hi));
            }
        } else {
            exact += 1;
            if got.mcp != want.price_lo {
                failures.push(format!("case {case}: λ {} vs oracle {}", got.mcp, want.price_lo));
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(10) {
        failures.push(format!("runtime {elapsed:?} exceeds 10 s"));
    }
    check(
        1,
        &failures,
        format!("1000 books ({exact} non-degenerate, {degenerate} degenerate) in {elapsed:.2?}"),
    );
}

// ------------------------------------------------------------------ 2

#[test]
fn criterion_2_ees_segment_enumeration() {
    let start = Instant::now();
    let mut r = rng(2);
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let toy = ees_toy(&mut r);
        let fee = r.gen_range(1..=50) as f64;
        let milp = toy.model.dispatch(fee, &toy.window).unwrap();
        let segments = toy.model.params().cycle_table.len();
        let best = (0..segments)
            .filter_map(|s| toy.model.dispatch_in_segment(fee, &toy.window, s).unwrap())
            .map(|d| d.objective)
            .fold(f64::NEG_INFINITY, f64::max);
        let gap = (milp.objective - best).abs();
        worst = worst.max(gap);
        if gap > 1e-6 {
            failures.push(format!("case {case} fee {fee}: milp {} vs enumeration {best}", milp.objective));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        failures.push(format!("runtime {elapsed:?} exceeds 60 s"));
    }
    check(2, &failures, format!("200 storage cases, worst gap {worst:.2e} in {elapsed:.2?}"));
}

// ------------------------------------------------------------------ 3

#[test]
fn criterion_3_asset_brute_force() {
    let start = Instant::now();
    let mut r = rng(3);
    let mut failures = Vec::new();
    let mut cases = 0;
    let mut worst: f64 = 0.0;
    let mut compare = |asset: &str, case: usize, fee: f64, lp: f64, brute: f64, bound: f64, failures: &mut Vec<String>| {
        let gap = (lp - brute).abs();
        worst = worst.max(gap / (bound + 1e-6));
        if gap > bound + 1e-6 {
            failures.push(format!("{asset} {case} fee {fee}: lp {lp} brute {brute} bound {bound}"));
        }
    };
    for case in 0..12 {
        let n = 4 + case % 3;
        let toy = hp_toy(&mut r, n);
        for fee in [0.0, r.gen_range(1..=50) as f64] {
            let lp = toy.model.dispatch(fee, &toy.window).unwrap();
            let brute = toy.brute(fee, if n == 6 { 7 } else { 11 });
            compare("hp", case, fee, lp.objective, brute, toy.bound(), &mut failures);
            let replay = toy.exact(fee, &lp.schedule).unwrap_or(f64::NEG_INFINITY);
            if replay < lp.objective - 1e-6 {
                failures.push(format!("hp {case} fee {fee}: schedule evaluates to {replay} below lp {}", lp.objective));
            }
            cases += 1;
        }
    }
    for case in 0..12 {
        let toy = ev_toy(&mut r);
        for fee in [0.0, r.gen_range(1..=50) as f64] {
            let lp = toy.model.dispatch(fee, &toy.window).unwrap();
            let brute = toy.brute(fee, 30);
            compare("ev", case, fee, lp.objective, brute, toy.bound(fee), &mut failures);
            cases += 1;
        }
    }
    for case in 0..20 {
        let toy = ic_toy(&mut r);
        for fee in [0.0, r.gen_range(1..=50) as f64, r.gen_range(1..=50) as f64] {
            let lp = toy.model.dispatch(fee, &toy.window).unwrap();
            let brute = toy.brute(fee, 2001);
            compare("ic", case, fee, lp.objective, brute, toy.bound(), &mut failures);
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(120) {
        failures.push(format!("runtime {elapsed:?} exceeds 120 s"));
    }
    check(
        3,
        &failures,
        format!("{cases} heat pump, EV and I&C cases, worst gap {:.0}% of bound, in {elapsed:.2?}", worst * 100.0),
    );
}

// ------------------------------------------------------------------ 4

#[test]
fn criterion_4_curves_monotone() {
    let mut failures = Vec::new();
    let mut count = 0;
    for b in bundles() {
        let mut curves: Vec<(String, Vec<f64>)> = b
            .curves
            .curves
            .iter()
            .map(|(class, c)| (class.to_string(), c.capacities.clone()))
            .collect();
        curves.push(("aggregate".into(), b.curves.aggregate().unwrap().capacities.clone()));
        for (label, caps) in curves {
            count += 1;
            if let Some(g) = caps.windows(2).position(|w| w[1] < w[0]) {
                failures.push(format!("{}/{label}: drop at level {}", b.name, g + 1));
            }
        }
    }
    check(4, &failures, format!("{count} curves across {} scenarios nondecreasing", bundles().len()));
}

// ------------------------------------------------------------------ 5

#[test]
fn criterion_5_structural_reproduction() {
    let mut failures = Vec::new();
    let mut prices = BTreeMap::new();
    for b in bundles() {
        let agg = b.setup.aggregate().unwrap();
        let demand = b.setup.requirement.demand;
        let ceiling = b.setup.requirement.ceiling;
        let price = b.setup.true_price().unwrap();
        prices.insert(b.name.clone(), price);
        if b.name == "st" {
            if agg.capacities.iter().any(|&c| c >= demand) {
                failures.push(format!("st supply reaches {} MW", agg.max_capacity()));
            }
            if price != ceiling {
                failures.push(format!("st equilibrium {price}, expected {ceiling}"));
            }
        } else {
            let below = agg.points().any(|(p, c)| p < ceiling && c > demand);
            if !below {
                failures.push(format!("{} supply never exceeds {demand} MW below the ceiling", b.name));
            }
        }
    }
    let (lw, ct, nze) = (prices["lw"], prices["ct"], prices["nze"]);
    if !(lw <= ct && ct <= nze) {
        failures.push(format!("ordering lw {lw} <= ct {ct} <= nze {nze} violated"));
    }
    let named: Vec<(String, f64)> = prices.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let soft = reporting::soft_targets(&named, &[], &[]);
    let soft_text: Vec<String> = soft
        .iter()
        .map(|s| format!("{} {} (target {}, dev {:+})", s.metric, s.value, s.target, s.deviation))
        .collect();
    check(
        5,
        &failures,
        format!("st {} lw {lw} ct {ct} nze {nze}; soft: {}", prices["st"], soft_text.join(", ")),
    );
}

// ------------------------------------------------------------------ 6

#[test]
fn criterion_6_dominant_strategies() {
    let table = full_sweep();
    let truth = bundle("ct").setup.true_price().unwrap();
    let price = |m: Mechanism, s: Strategy, n: usize| {
        table
            .get("ct", m, s, n)
            .map(|e| e.equilibrium_price)
            .unwrap_or(f64::NAN)
    };
    let mut failures = Vec::new();
    let mut lines = Vec::new();
    for n in AGENTS {
        let (op, us, ub) = (price(Mechanism::Pab, Strategy::Op, n), price(Mechanism::Pab, Strategy::Us, n), price(Mechanism::Pab, Strategy::Ub, n));
        if !(op >= us && op >= ub) {
            failures.push(format!("pab {n} agents: op {op} us {us} ub {ub}"));
        }
        let pac = price(Mechanism::Pac, Strategy::Us, n);
        let want = if n <= 6 { truth + 1.0 } else { truth };
        if pac != want {
            failures.push(format!("pac us {n} agents: {pac}, expected {want}"));
        }
        for s in Strategy::STRATEGIC {
            let (a, b) = (table.get("ct", Mechanism::Pab, s, n), table.get("ct", Mechanism::Dra, s, n));
            let same = match (a, b) {
                (Some(a), Some(b)) => a.equilibrium_price == b.equilibrium_price && a.book == b.book && a.result == b.result,
                _ => false,
            };
            if !same {
                failures.push(format!("pab and dra differ for {s} {n} agents"));
            }
            let vcg = price(Mechanism::Vcg, s, n);
            if !((vcg - truth).abs() <= 1.0) {
                failures.push(format!("vcg {s} {n} agents: {vcg} vs true {truth}"));
            }
        }
        lines.push(format!("n={n}: pab op/us/ub {op}/{us}/{ub}, pac us {pac}"));
    }
    check(6, &failures, format!("ct true {truth}; {}", lines.join("; ")));
}

// ------------------------------------------------------------------ 7

#[test]
fn criterion_7_vcg_truthfulness() {
    let start = Instant::now();
    let ceiling = 12u32;
    let mut r = rng(7);
    let mut failures = Vec::new();
    let mut deviations = 0usize;
    for case in 0..60 {
        let agents = r.gen_range(1..=4);
        let levels = r.gen_range(1..=2);
        let truth: Vec<Offer> = (0..agents)
            .map(|_| {
                let mut prices: Vec<f64> = (0..levels).map(|_| r.gen_range(1..=ceiling) as f64).collect();
                prices.sort_by(f64::total_cmp);
                Offer {
                    capacities: (0..levels).map(|_| r.gen_range(0.1..1.5)).collect(),
                    prices,
                }
            })
            .collect();
        let supply: f64 = truth.iter().flat_map(|o| &o.capacities).sum();
        let req: ServiceRequirement = requirement(r.gen_range(0.1..supply * 1.1), ceiling as f64);
        let honest = OfferBook::new(truth.clone()).unwrap();
        for a in 0..agents {
            let base = vcg_profit(&honest, &req, a, &truth[a].prices);
            for prices in price_grid_vectors(levels, ceiling) {
                for keep in [1.0, 0.5, 0.0] {
                    let mut book = honest.clone();
                    book.offers[a].prices = prices.clone();
                    book.offers[a].capacities.iter_mut().for_each(|c| *c *= keep);
                    let dev = vcg_profit(&book, &req, a, &truth[a].prices);
                    deviations += 1;
                    if dev > base + 1e-9 {
                        failures.push(format!("case {case} agent {a}: prices {prices:?} keep {keep} earns {dev} > {base}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        failures.push(format!("runtime {elapsed:?} exceeds 60 s"));
    }
    check(7, &failures, format!("{deviations} unilateral deviations in {elapsed:.2?}"));
}

// ------------------------------------------------------------------ 8

#[test]
fn criterion_8_cost_benefit_identities() {
    let table = full_sweep();
    let s0 = &bundles()[0].setup.requirement;
    let ctx = ReportContext {
        demand: s0.demand,
        ceiling: s0.ceiling,
        window_hours: s0.window_hours,
    };
    let mut failures = Vec::new();
    let rows = table.rows();
    for (cell, row) in table.cells.iter().zip(&rows) {
        let Ok(eq) = &cell.outcome else {
            failures.push(format!("{} {} {} {}: {}", row.scenario, row.mechanism, row.strategy, row.agents, row.error));
            continue;
        };
        let cb = reporting::cell_cost_benefit(row, &ctx);
        let label = &cb.label;
        if (cb.dso_cost + cb.dso_benefit - ctx.ceiling_cost()).abs() > 1e-6 {
            failures.push(format!("{label}: cost + benefit = {}", cb.dso_cost + cb.dso_benefit));
        }
        let paid: f64 = eq.settlement.agents.iter().map(|a| a.revenue).sum();
        if (paid - eq.settlement.dso_payment).abs() > 1e-6 || (paid - cb.provider_revenue).abs() > 1e-6 {
            failures.push(format!("{label}: provider revenue {paid} vs reported {}", cb.provider_revenue));
        }
        // ceiling-priced shortfall is a DSO cost that no provider receives
        if (cb.provider_revenue + cb.shortfall_cost - cb.dso_cost).abs() > 1e-6 {
            failures.push(format!("{label}: revenue {} + shortfall {} vs dso cost {}", cb.provider_revenue, cb.shortfall_cost, cb.dso_cost));
        }
        if (cb.provider_cost + cb.provider_profit - cb.provider_revenue).abs() > 1e-6 {
            failures.push(format!("{label}: provider cost + profit != revenue"));
        }
    }
    let stats = reporting::price_stats(&rows, &ctx);
    let summary = reporting::mechanism_cost_benefit(&rows, &ctx);
    let named: Vec<(String, f64)> = bundles().iter().map(|b| (b.name.clone(), b.setup.true_price().unwrap())).collect();
    let soft: Vec<String> = reporting::soft_targets(&named, &stats, &summary)
        .iter()
        .filter(|s| s.metric.starts_with("profit_share") || s.metric.starts_with("dso_benefit"))
        .map(|s| format!("{} {:.3} (target {}, dev {:+.3})", s.metric, s.value, s.target, s.deviation))
        .collect();
    if !reporting::profit_share_ordered(&summary) {
        let shares: Vec<String> = summary.iter().map(|c| format!("{} {:.3}", c.label, c.profit_share)).collect();
        failures.push(format!("profit-share ordering violated: {}", shares.join(", ")));
    }
    check(8, &failures, format!("{} cells; soft: {}", rows.len(), soft.join(", ")));
}

// ------------------------------------------------------------------ 9

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn pipeline(jobs: usize, out: &Path) -> Duration {
    let start = Instant::now();
    let o = out.to_str().unwrap();
    let j = jobs.to_string();
    for args in [
        vec!["flexmarket", "--jobs", &j, "curves", "--out", o],
        vec!["flexmarket", "--jobs", &j, "game", "--sweep", "--replay", "--out", o],
    ] {
        let cli = Cli::try_parse_from(args).unwrap();
        run(&cli).unwrap();
    }
    start.elapsed()
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("jobs1"), dir.path().join("jobs4"));
    let ta = pipeline(1, &a);
    let tb = pipeline(4, &b);
    let (fa, fb) = (tree(&a), tree(&b));
    let mut failures = Vec::new();
    if fa.keys().ne(fb.keys()) {
        failures.push("output trees list different files".to_string());
    }
    for (k, v) in &fa {
        if fb.get(k) != Some(v) {
            failures.push(format!("{k} differs"));
        }
    }
    let limit = Duration::from_secs(15 * 60);
    if ta > limit || tb > limit {
        failures.push(format!("pipeline took {ta:?} / {tb:?}"));
    }
    check(9, &failures, format!("{} files identical; jobs 1 took {ta:.1?}, jobs 4 took {tb:.1?}", fa.len()));
}
