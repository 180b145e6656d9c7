//! Bounded-variable revised primal simplex with an explicit dense basis inverse.
//!
//! Every row `a·x {<=,=,>=} b` becomes `a·x - w = 0` with the logical variable
//! `w` bounded by the row's right-hand side. Phase 1 drives artificial
//! variables out of the basis; phase 2 optimises the real objective. Dantzig
//! pricing is used until a run of degenerate pivots is seen, after which Bland's
//! rule takes over until progress resumes.
//!
//! Dual values are the row prices `y = c_B B^-1` of the final basis, reported as
//! the sensitivity of the optimal objective to the row's right-hand side. For a
//! minimisation this makes duals of binding `>=` rows non-negative and duals of
//! binding `<=` rows non-positive.

use super::program::{LinearProgram, Relation, Sense, Solution, Status};
use super::SolverError;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 80;
const DEGENERATE_RUN: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

struct Tableau {
    m: usize,
    columns: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    artificial_start: usize,
    iterations: usize,
    pivots_since_refactor: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.num_constraints();
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c) in lp.constraints.iter().enumerate() {
            for &(v, a) in &c.terms {
                if a != 0.0 {
                    columns[v.0].push((r, a));
                }
            }
        }
        // merge duplicate entries of one variable in one row
        for col in &mut columns {
            col.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for &(r, a) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == r => last.1 += a,
                    _ => merged.push((r, a)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            *col = merged;
        }

        let mut lower: Vec<f64> = lp.variables.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = lp.variables.iter().map(|v| v.upper).collect();
        let mut x = Vec::with_capacity(n + 2 * m);
        let mut state = Vec::with_capacity(n + 2 * m);
        for v in &lp.variables {
            if v.lower.is_finite() {
                x.push(v.lower);
                state.push(VarState::AtLower);
            } else if v.upper.is_finite() {
                x.push(v.upper);
                state.push(VarState::AtUpper);
            } else {
                x.push(0.0);
                state.push(VarState::Free);
            }
        }

        let mut activity = vec![0.0; m];
        for (j, col) in columns.iter().enumerate() {
            for &(r, a) in col {
                activity[r] += a * x[j];
            }
        }

        let mut basis = vec![usize::MAX; m];
        let mut binv = vec![0.0; m * m];
        let mut artificials = Vec::new();
        for (r, c) in lp.constraints.iter().enumerate() {
            let (lo, hi) = match c.relation {
                Relation::Le => (f64::NEG_INFINITY, c.rhs),
                Relation::Ge => (c.rhs, f64::INFINITY),
                Relation::Eq => (c.rhs, c.rhs),
            };
            columns.push(vec![(r, -1.0)]);
            lower.push(lo);
            upper.push(hi);
            let act = activity[r];
            if act >= lo - PRIMAL_TOL && act <= hi + PRIMAL_TOL {
                x.push(act);
                state.push(VarState::Basic);
                basis[r] = n + r;
                binv[r * m + r] = -1.0;
            } else {
                let target = if act < lo { lo } else { hi };
                x.push(target);
                state.push(if act < lo {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                });
                artificials.push((r, target - act));
            }
        }
        let artificial_start = n + m;
        for (r, gap) in artificials {
            let sign = if gap >= 0.0 { 1.0 } else { -1.0 };
            columns.push(vec![(r, sign)]);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(gap.abs());
            state.push(VarState::Basic);
            basis[r] = columns.len() - 1;
            binv[r * m + r] = sign;
        }

        Self {
            m,
            columns,
            lower,
            upper,
            x,
            state,
            basis,
            binv,
            artificial_start,
            iterations: 0,
            pivots_since_refactor: 0,
        }
    }

    fn num_cols(&self) -> usize {
        self.columns.len()
    }

    fn has_artificials(&self) -> bool {
        self.artificial_start < self.num_cols()
    }

    fn row_prices(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, b) in y.iter_mut().zip(row) {
                    *yi += cb * b;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, cost: &[f64], y: &[f64]) -> f64 {
        cost[j] - self.columns[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(r, a) in &self.columns[j] {
            for (k, al) in alpha.iter_mut().enumerate() {
                *al += self.binv[k * m + r] * a;
            }
        }
        alpha
    }

    fn refactor(&mut self) -> Result<(), SolverError> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        // dense B, then Gauss-Jordan with partial pivoting
        let mut b = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, a) in &self.columns[j] {
                b[r * m + k] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = b[col * m + col].abs();
            for r in col + 1..m {
                let v = b[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                return Err(SolverError::NumericalFailure {
                    iterations: self.iterations,
                    detail: "singular basis during refactorisation".into(),
                });
            }
            if piv != col {
                for c in 0..m {
                    b.swap(piv * m + c, col * m + c);
                    inv.swap(piv * m + c, col * m + c);
                }
            }
            let d = b[col * m + col];
            for c in 0..m {
                b[col * m + c] /= d;
                inv[col * m + c] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = b[r * m + col];
                    if f != 0.0 {
                        for c in 0..m {
                            b[r * m + c] -= f * b[col * m + c];
                            inv[r * m + c] -= f * inv[col * m + c];
                        }
                    }
                }
            }
        }
        // inv solves B z = e; basis position k corresponds to row k of inv
        self.binv = inv;
        self.recompute_basic_values();
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.num_cols() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                for &(r, a) in &self.columns[j] {
                    rhs[r] -= a * self.x[j];
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(b, r)| b * r).sum();
            self.x[self.basis[k]] = v;
        }
    }

    fn pivot(&mut self, k: usize, alpha: &[f64]) {
        let m = self.m;
        let pk = alpha[k];
        let (head, rest) = self.binv.split_at_mut(k * m);
        let (row_k, tail) = rest.split_at_mut(m);
        for v in row_k.iter_mut() {
            *v /= pk;
        }
        for (i, &ai) in alpha.iter().enumerate() {
            if i == k || ai == 0.0 {
                continue;
            }
            let row = if i < k {
                &mut head[i * m..(i + 1) * m]
            } else {
                let off = (i - k - 1) * m;
                &mut tail[off..off + m]
            };
            for (v, rk) in row.iter_mut().zip(row_k.iter()) {
                *v -= ai * rk;
            }
        }
    }

    fn run_phase(&mut self, cost: &[f64], max_iter: usize) -> Result<PhaseOutcome, SolverError> {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= max_iter {
                return Err(SolverError::IterationLimit {
                    iterations: self.iterations,
                    objective: self.objective(cost),
                });
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.row_prices(cost);

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.num_cols() {
                let st = self.state[j];
                if st == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.reduced_cost(j, cost, &y);
                let eligible = match st {
                    VarState::AtLower => d < -DUAL_TOL,
                    VarState::AtUpper => d > DUAL_TOL,
                    VarState::Free => d.abs() > DUAL_TOL,
                    VarState::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                    entering = Some((j, d));
                }
            }
            let Some((q, dq)) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };
            self.iterations += 1;
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(q);

            // Harris ratio test: relaxed bound pass, then the largest pivot among candidates.
            let mut t_relaxed = f64::INFINITY;
            for (k, &a) in alpha.iter().enumerate() {
                let delta = dir * a;
                let j = self.basis[k];
                if delta > PIVOT_TOL && self.lower[j].is_finite() {
                    t_relaxed = t_relaxed.min((self.x[j] - self.lower[j] + PRIMAL_TOL) / delta);
                } else if delta < -PIVOT_TOL && self.upper[j].is_finite() {
                    t_relaxed = t_relaxed.min((self.upper[j] - self.x[j] + PRIMAL_TOL) / -delta);
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            if t_relaxed.is_finite() {
                let mut best_piv = 0.0;
                for (k, &a) in alpha.iter().enumerate() {
                    let delta = dir * a;
                    let j = self.basis[k];
                    let t = if delta > PIVOT_TOL && self.lower[j].is_finite() {
                        (self.x[j] - self.lower[j]) / delta
                    } else if delta < -PIVOT_TOL && self.upper[j].is_finite() {
                        (self.upper[j] - self.x[j]) / -delta
                    } else {
                        continue;
                    };
                    if t <= t_relaxed {
                        let better = if bland {
                            leave.map_or(true, |(bk, bt)| {
                                t < bt - 1e-12 || (t <= bt + 1e-12 && self.basis[k] < self.basis[bk])
                            })
                        } else {
                            delta.abs() > best_piv
                        };
                        if better {
                            best_piv = delta.abs();
                            leave = Some((k, t.max(0.0)));
                        }
                    }
                }
            }

            let flip = self.upper[q] - self.lower[q];
            let flip_first = flip.is_finite() && leave.map_or(true, |(_, t)| flip <= t);
            if flip_first {
                for (k, &a) in alpha.iter().enumerate() {
                    let j = self.basis[k];
                    self.x[j] -= flip * dir * a;
                }
                if dir > 0.0 {
                    self.x[q] = self.upper[q];
                    self.state[q] = VarState::AtUpper;
                } else {
                    self.x[q] = self.lower[q];
                    self.state[q] = VarState::AtLower;
                }
                degenerate_run = 0;
                bland = false;
                continue;
            }
            let Some((k, t)) = leave else {
                return Ok(PhaseOutcome::Unbounded);
            };

            for (i, &a) in alpha.iter().enumerate() {
                let j = self.basis[i];
                self.x[j] -= t * dir * a;
            }
            let leaving = self.basis[k];
            if dir * alpha[k] > 0.0 {
                self.x[leaving] = self.lower[leaving];
                self.state[leaving] = VarState::AtLower;
            } else {
                self.x[leaving] = self.upper[leaving];
                self.state[leaving] = VarState::AtUpper;
            }
            self.x[q] += dir * t;
            self.state[q] = VarState::Basic;
            self.basis[k] = q;
            self.pivot(k, &alpha);
            self.pivots_since_refactor += 1;

            if t < 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }
}

pub(crate) fn solve(lp: &LinearProgram) -> Result<Solution, SolverError> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.num_constraints();
    let mut tab = Tableau::build(lp);
    let max_iter = 50 * (n + m) + 1000;

    if tab.has_artificials() {
        let mut phase1 = vec![0.0; tab.num_cols()];
        for c in phase1.iter_mut().skip(tab.artificial_start) {
            *c = 1.0;
        }
        tab.run_phase(&phase1, max_iter)?;
        tab.refactor()?;
        let infeasibility = tab.objective(&phase1);
        let scale = 1.0
            + lp
                .constraints
                .iter()
                .map(|c| c.rhs.abs())
                .fold(0.0, f64::max);
        if infeasibility > 1e-7 * scale {
            return Ok(Solution {
                status: Status::Infeasible,
                values: tab.x[..n].to_vec(),
                objective: f64::NAN,
                duals: None,
                iterations: tab.iterations,
            });
        }
        for j in tab.artificial_start..tab.num_cols() {
            tab.upper[j] = 0.0;
            if tab.state[j] != VarState::Basic {
                tab.x[j] = 0.0;
                tab.state[j] = VarState::AtLower;
            }
        }
    }

    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut cost = vec![0.0; tab.num_cols()];
    for (c, v) in cost.iter_mut().zip(&lp.variables) {
        *c = sign * v.cost;
    }
    let outcome = tab.run_phase(&cost, max_iter)?;
    if let PhaseOutcome::Unbounded = outcome {
        return Ok(Solution {
            status: Status::Unbounded,
            values: tab.x[..n].to_vec(),
            objective: sign * f64::NEG_INFINITY,
            duals: None,
            iterations: tab.iterations,
        });
    }
    tab.refactor()?;
    // a refactorisation can expose tiny drift; polish if pricing moved
    let outcome = tab.run_phase(&cost, max_iter)?;
    if let PhaseOutcome::Unbounded = outcome {
        return Err(SolverError::NumericalFailure {
            iterations: tab.iterations,
            detail: "unbounded ray found after polishing".into(),
        });
    }

    let y = tab.row_prices(&cost);
    let mut values = tab.x[..n].to_vec();
    for (x, v) in values.iter_mut().zip(&lp.variables) {
        if (*x - v.lower).abs() < 1e-11 {
            *x = v.lower;
        } else if (*x - v.upper).abs() < 1e-11 {
            *x = v.upper;
        }
    }
    let objective = lp.objective_value(&values);
    let duals = y.iter().map(|&v| sign * v).collect();
    Ok(Solution {
        status: Status::Optimal,
        values,
        objective,
        duals: Some(duals),
        iterations: tab.iterations,
    })
}
