//! Depth-first branch-and-bound over integer-flagged variables.

use super::program::{LinearProgram, Sense, Solution, Status};
use super::{simplex, SolverError};

const INTEGRALITY_TOL: f64 = 1e-7;
/// Absolute objective gap used for pruning.
pub const ABSOLUTE_GAP: f64 = 1e-7;

pub(crate) fn solve(lp: &LinearProgram) -> Result<Solution, SolverError> {
    lp.validate()?;
    for v in lp.variables.iter().filter(|v| v.integer) {
        if !(v.lower.is_finite() && v.upper.is_finite()) {
            return Err(SolverError::InvalidProgram(format!(
                "integer variable `{}` must have finite bounds",
                v.name
            )));
        }
    }
    // work in minimisation form
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0usize;
    let mut saw_unbounded = false;
    let mut stack = vec![lp.clone()];
    let mut nodes = 0usize;

    while let Some(node) = stack.pop() {
        nodes += 1;
        if nodes > 200_000 {
            return Err(SolverError::IterationLimit {
                iterations,
                objective: incumbent.as_ref().map_or(f64::NAN, |(o, _)| sign * o),
            });
        }
        let relax = simplex::solve(&node)?;
        iterations += relax.iterations;
        match relax.status {
            Status::Infeasible => continue,
            Status::Unbounded => {
                saw_unbounded = true;
                continue;
            }
            Status::Optimal => {}
        }
        let bound = sign * relax.objective;
        if let Some((best, _)) = &incumbent {
            if bound >= best - ABSOLUTE_GAP {
                continue;
            }
        }
        // most fractional integer variable, lowest index on ties
        let mut branch: Option<(usize, f64)> = None;
        for (j, v) in node.variables.iter().enumerate() {
            if !v.integer {
                continue;
            }
            let x = relax.values[j];
            let frac = (x - x.floor()).min(x.ceil() - x);
            if frac > INTEGRALITY_TOL && branch.map_or(true, |(_, f)| frac > f + 1e-12) {
                branch = Some((j, frac));
            }
        }
        match branch {
            None => {
                let mut values = relax.values;
                for (x, v) in values.iter_mut().zip(&node.variables) {
                    if v.integer {
                        *x = x.round();
                    }
                }
                incumbent = Some((bound, values));
            }
            Some((j, _)) => {
                let x = relax.values[j];
                let mut down = node.clone();
                let mut up = node;
                let lo = up.variables[j].lower;
                let hi = down.variables[j].upper;
                down.variables[j].upper = x.floor().max(lo);
                up.variables[j].lower = x.ceil().min(hi);
                // explore the branch nearest the relaxation first
                if x - x.floor() < 0.5 {
                    stack.push(up);
                    stack.push(down);
                } else {
                    stack.push(down);
                    stack.push(up);
                }
            }
        }
    }

    match incumbent {
        Some((_, values)) => {
            let objective = lp.objective_value(&values);
            Ok(Solution {
                status: Status::Optimal,
                values,
                objective,
                duals: None,
                iterations,
            })
        }
        None => Ok(Solution {
            status: if saw_unbounded {
                Status::Unbounded
            } else {
                Status::Infeasible
            },
            values: vec![0.0; lp.num_vars()],
            objective: f64::NAN,
            duals: None,
            iterations,
        }),
    }
}
