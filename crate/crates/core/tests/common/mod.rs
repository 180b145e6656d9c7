//! Independent oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls the solver: each oracle recomputes the answer by sorting,
//! enumeration or direct evaluation of the exact (unlinearised) model.

#![allow(dead_code)]

use flexmarket::flex::ees::EesParams;
use flexmarket::flex::ev::EvParams;
use flexmarket::flex::hp::{Dwelling, HpParams};
use flexmarket::flex::ic::IcParams;
use flexmarket::flex::{EesModel, EvModel, HpModel, IcModel};
use flexmarket::market::{Offer, OfferBook, ServiceRequirement};
use flexmarket::model::{Profile, TimeGrid, Unit, Window};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn requirement(demand: f64, ceiling: f64) -> ServiceRequirement {
    let grid = TimeGrid::half_hourly_day();
    ServiceRequirement::new(demand, ceiling, &grid, grid.window(16.5, 18.5).unwrap())
        .unwrap()
        .with_demand(demand)
}

// ---------------------------------------------------------------- market

/// Random book with integer prices; some blocks are empty and some priced
/// above `ceiling` so that void offers are exercised.
pub fn random_book(r: &mut ChaCha8Rng, max_agents: usize, max_levels: usize, ceiling: f64) -> OfferBook {
    let agents = r.gen_range(1..=max_agents);
    let levels = r.gen_range(1..=max_levels);
    let top = ceiling as u32 + 3;
    let offers = (0..agents)
        .map(|_| {
            let capacities = (0..levels)
                .map(|_| if r.gen_bool(0.3) { 0.0 } else { r.gen_range(0.0..1.0) })
                .collect();
            let prices = (0..levels).map(|_| r.gen_range(1..=top) as f64).collect();
            Offer { capacities, prices }
        })
        .collect();
    OfferBook::new(offers).unwrap()
}

#[derive(Debug, Clone)]
pub struct MeritOrder {
    pub accepted: Vec<Vec<f64>>,
    pub unmet: f64,
    /// Closed interval of prices supporting the clearing.
    pub price_lo: f64,
    pub price_hi: f64,
}

impl MeritOrder {
    pub fn degenerate(&self) -> bool {
        self.price_lo != self.price_hi
    }
}

/// Sort-and-fill: group valid blocks by price, take groups in ascending order
/// and split the marginal group pro rata.
pub fn merit_order(book: &OfferBook, demand: f64, ceiling: f64) -> MeritOrder {
    let levels = book.levels();
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for o in &book.offers {
        for g in 0..levels {
            let (c, p) = (o.capacities[g], o.prices[g]);
            if c > 0.0 && p > 0.0 && p <= ceiling {
                match groups.iter_mut().find(|e| e.0 == p) {
                    Some(e) => e.1 += c,
                    None => groups.push((p, c)),
                }
            }
        }
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut left = demand;
    let mut share = Vec::with_capacity(groups.len());
    let mut marginal: Option<usize> = None;
    for (i, &(_, cap)) in groups.iter().enumerate() {
        let take = left.min(cap);
        share.push(if cap > 0.0 { take / cap } else { 0.0 });
        left -= take;
        // rounding residue from summing capacities does not make a group marginal
        if take > 1e-12 {
            marginal = Some(i);
        }
    }
    let unmet = left.max(0.0);
    let accepted = book
        .offers
        .iter()
        .map(|o| {
            (0..levels)
                .map(|g| {
                    let (c, p) = (o.capacities[g], o.prices[g]);
                    if c > 0.0 && p > 0.0 && p <= ceiling {
                        let i = groups.iter().position(|e| e.0 == p).unwrap();
                        c * share[i]
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let next_price = |i: usize| groups.get(i).map_or(ceiling, |e| e.0);
    let (price_lo, price_hi) = if unmet > 1e-12 {
        (ceiling, ceiling)
    } else {
        match marginal {
            None => (0.0, next_price(0)),
            Some(i) => {
                let full = share[i] >= 1.0 - 1e-12;
                if full {
                    (groups[i].0, next_price(i + 1))
                } else {
                    (groups[i].0, groups[i].0)
                }
            }
        }
    };
    MeritOrder {
        accepted,
        unmet,
        price_lo,
        price_hi,
    }
}

/// Per-agent VCG profit against integer true costs for one submitted book.
pub fn vcg_profit(book: &OfferBook, req: &ServiceRequirement, agent: usize, true_prices: &[f64]) -> f64 {
    let result = flexmarket::market::clear(book, req).unwrap();
    let s = flexmarket::market::vcg_payments(book, req).unwrap();
    s.profit(agent, &result.accepted[agent], true_prices)
}

/// All price vectors on `1..=ceiling` for `levels` blocks.
pub fn price_grid_vectors(levels: usize, ceiling: u32) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..levels {
        out = out
            .into_iter()
            .flat_map(|v| {
                (1..=ceiling).map(move |p| {
                    let mut w = v.clone();
                    w.push(p as f64);
                    w
                })
            })
            .collect();
    }
    out
}

// ---------------------------------------------------------------- search

/// Exhaustive grid search followed by a shrinking full-neighbourhood pattern
/// search. `f` returns `None` outside the feasible set.
pub fn maximise(dims: usize, lo: &[f64], hi: &[f64], points: usize, f: &dyn Fn(&[f64]) -> Option<f64>) -> (f64, Vec<f64>) {
    let mut best = (f64::NEG_INFINITY, vec![0.0; dims]);
    let mut idx = vec![0usize; dims];
    let at = |d: usize, i: usize| {
        if points == 1 {
            lo[d]
        } else {
            lo[d] + (hi[d] - lo[d]) * i as f64 / (points - 1) as f64
        }
    };
    loop {
        let x: Vec<f64> = (0..dims).map(|d| at(d, idx[d])).collect();
        if let Some(v) = f(&x) {
            if v > best.0 {
                best = (v, x);
            }
        }
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    if !best.0.is_finite() {
        return best;
    }
    let mut step: Vec<f64> = (0..dims).map(|d| (hi[d] - lo[d]) / (points.max(2) - 1) as f64).collect();
    let moves = 3usize.pow(dims as u32);
    while step.iter().any(|&s| s > 1e-10) {
        let mut improved = false;
        for m in 0..moves {
            let mut code = m;
            let mut x = best.1.clone();
            for d in 0..dims {
                let dir = (code % 3) as f64 - 1.0;
                code /= 3;
                x[d] = (x[d] + dir * step[d]).clamp(lo[d], hi[d]);
            }
            if let Some(v) = f(&x) {
                if v > best.0 + 1e-13 {
                    best = (v, x);
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    best
}

// ---------------------------------------------------------------- toy assets

pub fn profile(grid: &TimeGrid, values: Vec<f64>, unit: Unit) -> Profile {
    Profile::new(grid, values, unit).unwrap()
}

pub struct HpToy {
    pub model: HpModel,
    pub grid: TimeGrid,
    pub window: Window,
    pub tariff: Vec<f64>,
    pub ambient: Vec<f64>,
}

/// One dwelling type on an hourly grid of `n` intervals.
pub fn hp_toy(r: &mut ChaCha8Rng, n: usize) -> HpToy {
    let grid = TimeGrid::new(1.0, n as f64).unwrap();
    let tariff: Vec<f64> = (0..n).map(|_| r.gen_range(60.0..160.0)).collect();
    let ambient: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..10.0)).collect();
    let mut p = HpParams::with_count(1000.0);
    p.dwellings = vec![Dwelling {
        name: "toy".into(),
        share: 1.0,
        conductance: r.gen_range(60.0..160.0) * 1e-6,
        capacitance: r.gen_range(4.0..10.0) * 1e-3,
    }];
    p.penalty = r.gen_range(0.005..0.05);
    p.segments = 64;
    p.max_deviation = 12.0;
    p.peak_factor = r.gen_range(1.5..3.0);
    let start = r.gen_range(0..n);
    let end = r.gen_range(start..n.min(start + 2));
    let window = Window::new(&grid, start, end).unwrap();
    let model = HpModel::new(
        grid,
        p,
        profile(&grid, tariff.clone(), Unit::PoundsPerMwh),
        profile(&grid, ambient.clone(), Unit::Celsius),
    )
    .unwrap();
    HpToy {
        model,
        grid,
        window,
        tariff,
        ambient,
    }
}

impl HpToy {
    fn loss_gain(&self) -> (f64, f64) {
        let p = self.model.params();
        let d = &p.dwellings[0];
        let dt = self.grid.step_hours();
        let units = p.count * d.share;
        (d.conductance / d.capacitance * dt, p.conversion * dt / (d.capacitance * units))
    }

    fn weight(&self) -> f64 {
        let p = self.model.params();
        p.count * p.dwellings[0].share * p.penalty / 2.0 * self.grid.step_hours()
    }

    pub fn temperatures(&self, q: &[f64]) -> Vec<f64> {
        let n = q.len();
        let (loss, gain) = self.loss_gain();
        let a = 1.0 - loss;
        let drive: Vec<f64> = (0..n).map(|t| gain * q[t] + loss * self.ambient[t]).collect();
        let mut num = 0.0;
        for (t, u) in drive.iter().enumerate() {
            num += a.powi((n - 1 - t) as i32) * u;
        }
        let mut tau = vec![num / (1.0 - a.powi(n as i32)); n];
        for t in 0..n - 1 {
            tau[t + 1] = a * tau[t] + drive[t];
        }
        tau
    }

    /// Exact objective of schedule `q` with the best flexibility it allows.
    pub fn exact(&self, fee: f64, q: &[f64]) -> Option<f64> {
        let p = self.model.params();
        let n = q.len();
        let dt = self.grid.step_hours();
        let cap = p.count * self.model.ratings()[0];
        if q.iter().any(|&x| x < -1e-12 || x > cap + 1e-12) {
            return None;
        }
        let avg = q.iter().sum::<f64>() * dt / self.grid.horizon_hours();
        if q.iter().any(|&x| x > p.peak_factor * avg + 1e-12) {
            return None;
        }
        let room = self
            .window
            .indices()
            .map(|t| self.model.expected_demand(t) - q[t])
            .fold(f64::INFINITY, f64::min);
        if room < -1e-12 {
            return None;
        }
        let flex = if fee > 0.0 { room.max(0.0) } else { 0.0 };
        let w = self.weight();
        let penalty: f64 = self
            .temperatures(q)
            .iter()
            .map(|&x| {
                let dev = (x - p.tau_max).max(p.tau_min - x).max(0.0);
                w * dev * dev
            })
            .sum();
        let energy: f64 = (0..n).map(|t| self.tariff[t] * q[t] * dt).sum();
        Some(fee * flex * self.window.duration_hours(&self.grid) - energy - penalty)
    }

    /// Total chord overestimate of the comfort penalty.
    pub fn bound(&self) -> f64 {
        let p = self.model.params();
        let h = p.max_deviation / p.segments as f64;
        self.grid.count() as f64 * self.weight() * h * h / 4.0
    }

    pub fn brute(&self, fee: f64, points: usize) -> f64 {
        let n = self.grid.count();
        let cap = self.model.params().count * self.model.ratings()[0];
        maximise(n, &vec![0.0; n], &vec![cap; n], points, &|q| self.exact(fee, q)).0
    }
}

pub struct EvToy {
    pub model: EvModel,
    pub grid: TimeGrid,
    pub window: Window,
    pub departure: Window,
    pub tariff: Vec<f64>,
    pub plug: Vec<f64>,
    pub uncontrolled: Vec<f64>,
}

/// Hourly grid of six intervals: departures in hours 1–2, event in hours 4–5.
pub fn ev_toy(r: &mut ChaCha8Rng) -> EvToy {
    loop {
        let n = 6;
        let grid = TimeGrid::new(1.0, n as f64).unwrap();
        let mut p = EvParams::with_count(10.0);
        p.resistance = r.gen_range(0.5..3.0);
        p.daily_kwh = r.gen_range(4.0..14.0);
        p.departure_start = 1.0;
        p.departure_end = 3.0;
        p.penalty = r.gen_range(200.0..2000.0);
        let cap = p.charger_capacity();
        let tariff: Vec<f64> = (0..n).map(|_| r.gen_range(60.0..160.0)).collect();
        let plug: Vec<f64> = (0..n).map(|_| r.gen_range(0.3..1.0)).collect();
        let uncontrolled: Vec<f64> = plug.iter().map(|s| s * cap * r.gen_range(0.0..1.0)).collect();
        let window = Window::new(&grid, 4, 5).unwrap();
        let departure = grid.window(1.0, 3.0).unwrap();
        let model = EvModel::new(
            grid,
            p,
            profile(&grid, tariff.clone(), Unit::PoundsPerMwh),
            profile(&grid, plug.clone(), Unit::PerUnit),
            profile(&grid, uncontrolled.clone(), Unit::Megawatt),
        );
        if let Ok(model) = model {
            return EvToy {
                model,
                grid,
                window,
                departure,
                tariff,
                plug,
                uncontrolled,
            };
        }
    }
}

impl EvToy {
    /// Charging cycle order, starting after the departure window.
    pub fn order(&self) -> Vec<usize> {
        let n = self.grid.count();
        let start = (self.departure.end_index + 1) % n;
        (0..n).map(|k| (start + k) % n).collect()
    }

    /// Exact objective for per-interval battery powers `pb` delivering the
    /// daily energy.
    pub fn exact(&self, fee: f64, pb: &[f64]) -> Option<f64> {
        let p = self.model.params();
        let n = self.grid.count();
        let dt = self.grid.step_hours();
        let energy = p.daily_energy();
        let r = p.loss_coefficient();
        let cap = p.charger_capacity();
        if pb.iter().any(|&x| x < -1e-12) || (pb.iter().sum::<f64>() * dt - energy).abs() > 1e-9 {
            return None;
        }
        let mut delivered = 0.0;
        let mut state = vec![0.0; n];
        for &t in &self.order() {
            state[t] = delivered;
            delivered += pb[t] * dt;
        }
        let mut pt = vec![0.0; n];
        for t in 0..n {
            pt[t] = pb[t] + r * pb[t] * pb[t];
            if pt[t] > self.plug[t] * cap + 1e-12 {
                return None;
            }
        }
        let room = self
            .window
            .indices()
            .map(|t| self.uncontrolled[t] - pt[t])
            .fold(f64::INFINITY, f64::min);
        if room < -1e-12 {
            return None;
        }
        let flex = if fee > 0.0 { room.max(0.0) } else { 0.0 };
        let penalty: f64 = self
            .departure
            .indices()
            .map(|t| {
                let u = (energy * (1.0 - self.plug[t]) - state[t]).max(0.0);
                p.penalty / 2.0 * dt * u * u
            })
            .sum();
        let bill: f64 = (0..n).map(|t| self.tariff[t] * pt[t] * dt).sum();
        Some(fee * flex * self.window.duration_hours(&self.grid) - bill - penalty)
    }

    /// Chord overestimates of the loss curve (bill and flexibility) and of the
    /// shortfall penalty.
    pub fn bound(&self, fee: f64) -> f64 {
        let p = self.model.params();
        let dt = self.grid.step_hours();
        let r = p.loss_coefficient();
        let cap = p.charger_capacity();
        let seg = p.segments as f64;
        let loss_err = |t: usize| {
            let h = self.plug[t] * cap / seg;
            r * h * h / 4.0
        };
        let bill: f64 = (0..self.grid.count()).map(|t| self.tariff[t] * dt * loss_err(t)).sum();
        let flex = self.window.indices().map(loss_err).fold(0.0, f64::max) * fee * self.window.duration_hours(&self.grid);
        let he = p.daily_energy() / seg;
        let short = self.departure.len() as f64 * p.penalty / 2.0 * dt * he * he / 4.0;
        bill + flex + short
    }

    /// Every split of the daily energy into `quanta` equal parcels, then
    /// pairwise transfers of shrinking parcels between intervals.
    pub fn brute(&self, fee: f64, quanta: usize) -> f64 {
        let n = self.grid.count();
        let unit = self.model.params().daily_energy() / self.grid.step_hours() / quanta as f64;
        let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
        let mut counts = vec![0usize; n];
        fn splits(k: usize, left: usize, counts: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
            if k + 1 == counts.len() {
                counts[k] = left;
                visit(counts);
                return;
            }
            for c in 0..=left {
                counts[k] = c;
                splits(k + 1, left - c, counts, visit);
            }
        }
        splits(0, quanta, &mut counts, &mut |c| {
            let pb: Vec<f64> = c.iter().map(|&k| k as f64 * unit).collect();
            if let Some(v) = self.exact(fee, &pb) {
                if v > best.0 {
                    best = (v, pb);
                }
            }
        });
        let mut step = unit;
        while step > 1e-12 {
            let mut improved = false;
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let mut pb = best.1.clone();
                    let moved = step.min(pb[i]);
                    pb[i] -= moved;
                    pb[j] += moved;
                    if let Some(v) = self.exact(fee, &pb) {
                        if v > best.0 + 1e-13 {
                            best = (v, pb);
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best.0
    }
}

pub struct IcToy {
    pub model: IcModel,
    pub grid: TimeGrid,
    pub window: Window,
    pub tariff: Vec<f64>,
}

/// Hourly grid of six intervals: event in hour 1, recovery over hours 2–4.
pub fn ic_toy(r: &mut ChaCha8Rng) -> IcToy {
    let n = 6;
    let grid = TimeGrid::new(1.0, n as f64).unwrap();
    let mut p = IcParams::with_capacity_kw(r.gen_range(200.0..1200.0));
    p.quad_numerator = r.gen_range(5.0..30.0);
    p.linear = r.gen_range(5.0..30.0);
    p.energy_recovery = r.gen_range(0.5..1.5);
    p.power_recovery = r.gen_range(0.5..1.0);
    p.recovery_start = 2.0;
    p.recovery_end = 5.0;
    let tariff: Vec<f64> = (0..n).map(|_| r.gen_range(60.0..160.0)).collect();
    let window = Window::new(&grid, 1, 1).unwrap();
    let model = IcModel::new(grid, p, profile(&grid, tariff.clone(), Unit::PoundsPerMwh)).unwrap();
    IcToy {
        model,
        grid,
        window,
        tariff,
    }
}

impl IcToy {
    /// Exact objective at curtailment `flex` with the cheapest recovery.
    pub fn exact(&self, fee: f64, flex: f64) -> f64 {
        let p = self.model.params();
        let dt = self.grid.step_hours();
        let cap = p.capacity();
        let fw = self.window.duration_hours(&self.grid);
        let mut rec: Vec<(f64, usize)> = self.model.recovery().indices().map(|t| (self.tariff[t], t)).collect();
        rec.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut need = flex * fw * p.energy_recovery;
        let mut rec_cost = 0.0;
        for (price, _) in rec {
            let take = (p.power_recovery * flex * dt).min(need);
            rec_cost += price * take;
            need -= take;
        }
        let event_bill: f64 = self.window.indices().map(|t| self.tariff[t] * (cap - flex) * dt).sum();
        fee * flex * fw - p.cost(flex) - event_bill - rec_cost
    }

    pub fn bound(&self) -> f64 {
        let p = self.model.params();
        let h = p.capacity() / p.segments as f64;
        p.quadratic() * h * h / 4.0
    }

    pub fn brute(&self, fee: f64, points: usize) -> f64 {
        if fee <= 0.0 {
            return self.exact(fee, 0.0);
        }
        let cap = self.model.params().capacity();
        maximise(1, &[0.0], &[cap], points, &|x| Some(self.exact(fee, x[0]))).0
    }
}

// ---------------------------------------------------------------- storage

pub struct EesToy {
    pub model: EesModel,
    pub window: Window,
}

pub fn ees_toy(r: &mut ChaCha8Rng) -> EesToy {
    let n = r.gen_range(2..=8);
    let step = if r.gen_bool(0.5) { 0.5 } else { 1.0 };
    let grid = TimeGrid::new(step, step * n as f64).unwrap();
    let tariff: Vec<f64> = (0..n).map(|_| r.gen_range(40.0..220.0)).collect();
    let mut p = EesParams::with_power_kw(r.gen_range(50.0..800.0));
    p.energy_kwh = Some(p.power_kw * r.gen_range(0.5..3.0));
    p.eta_charge = r.gen_range(0.85..1.0);
    p.eta_discharge = r.gen_range(0.85..1.0);
    p.capex_per_kwh = r.gen_range(20.0..200.0);
    let start = r.gen_range(0..n);
    let end = r.gen_range(start..n);
    let window = Window::new(&grid, start, end).unwrap();
    let model = EesModel::new(grid, p, profile(&grid, tariff, Unit::PoundsPerMwh)).unwrap();
    EesToy { model, window }
}
