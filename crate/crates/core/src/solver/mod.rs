//! Self-contained LP/MILP solving.
//!
//! [`solve_lp`] runs a bounded-variable primal simplex and reports row duals as
//! the sensitivity of the optimal objective to each right-hand side: in a
//! minimisation, binding `>=` rows have duals `>= 0` and binding `<=` rows have
//! duals `<= 0`. [`solve_milp`] adds branch-and-bound over integer-flagged
//! variables and reports no duals.

mod lpformat;
mod milp;
mod piecewise;
mod program;
mod simplex;

use thiserror::Error;

pub use lpformat::write_lp_format;
pub use milp::ABSOLUTE_GAP;
pub use piecewise::{
    chord_segments, chord_value, cut_envelope, linearize_quadratic, ChordSegment, PiecewiseSpec,
    TangentCut, DEFAULT_SEGMENTS,
};
pub use program::{
    Constraint, ConstraintId, LinearProgram, Relation, Sense, Solution, Status, VarId, Variable,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("simplex iteration limit reached after {iterations} iterations (objective {objective})")]
    IterationLimit { iterations: usize, objective: f64 },
    #[error("numerical failure after {iterations} iterations: {detail}")]
    NumericalFailure { iterations: usize, detail: String },
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("quadratic coefficient {coefficient} is not convex")]
    NotConvex { coefficient: f64 },
}

/// Solves a continuous LP. Integer flags are rejected; use [`solve_milp`].
pub fn solve_lp(lp: &LinearProgram) -> Result<Solution, SolverError> {
    if lp.has_integers() {
        return Err(SolverError::InvalidProgram(
            "solve_lp called on a program with integer variables".into(),
        ));
    }
    simplex::solve(lp)
}

/// Solves an LP with integer-flagged variables to an absolute gap of [`ABSOLUTE_GAP`].
pub fn solve_milp(lp: &LinearProgram) -> Result<Solution, SolverError> {
    milp::solve(lp)
}

/// Largest violation of dual feasibility or complementary slackness of an
/// optimal LP solution, measured on variable bounds and rows.
pub fn optimality_residual(lp: &LinearProgram, sol: &Solution) -> f64 {
    let Some(duals) = &sol.duals else {
        return f64::INFINITY;
    };
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut reduced: Vec<f64> = lp.variables.iter().map(|v| sign * v.cost).collect();
    for (c, &y) in lp.constraints.iter().zip(duals) {
        for &(v, a) in &c.terms {
            reduced[v.0] -= sign * y * a;
        }
    }
    let mut worst: f64 = 0.0;
    for ((v, &d), &x) in lp.variables.iter().zip(&reduced).zip(&sol.values) {
        let at_lo = (x - v.lower).abs() <= 1e-7;
        let at_hi = (x - v.upper).abs() <= 1e-7;
        let viol = match (at_lo, at_hi) {
            (true, true) => 0.0,
            (true, false) => (-d).max(0.0),
            (false, true) => d.max(0.0),
            (false, false) => d.abs(),
        };
        worst = worst.max(viol);
    }
    let activities = lp.activities(&sol.values);
    for ((c, &y), act) in lp.constraints.iter().zip(duals).zip(activities) {
        let y = sign * y;
        let slack = (act - c.rhs).abs();
        let viol = match c.relation {
            Relation::Ge => (-y).max(0.0) + if slack > 1e-7 { y.abs() } else { 0.0 },
            Relation::Le => y.max(0.0) + if slack > 1e-7 { y.abs() } else { 0.0 },
            Relation::Eq => 0.0,
        };
        worst = worst.max(viol);
    }
    worst
}

/// Objective of the dual problem implied by `sol.duals` (equals the primal
/// objective at optimality).
pub fn dual_objective(lp: &LinearProgram, sol: &Solution) -> f64 {
    let Some(duals) = &sol.duals else {
        return f64::NAN;
    };
    let mut reduced: Vec<f64> = lp.variables.iter().map(|v| v.cost).collect();
    let mut total = lp.objective_offset;
    for (c, &y) in lp.constraints.iter().zip(duals) {
        total += y * c.rhs;
        for &(v, a) in &c.terms {
            reduced[v.0] -= y * a;
        }
    }
    for (d, &x) in reduced.iter().zip(&sol.values) {
        total += d * x;
    }
    total
}
