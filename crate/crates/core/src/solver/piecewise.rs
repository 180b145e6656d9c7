//! Piecewise-linear handling of convex quadratic terms `c·x²`.
//!
//! Two equivalent-accuracy forms are offered. [`linearize_quadratic`] returns
//! tangent cuts at the segment knots, whose maximum underestimate on a segment of
//! width `h` is `c·h²/4`. [`chord_segments`] splits the domain into bounded
//! increments with increasing slopes; the resulting chord interpolation
//! overestimates by at most the same `c·h²/4` and needs no extra rows, which is
//! what the asset models use for objective and loss terms.

use serde::{Deserialize, Serialize};

use super::SolverError;

pub const DEFAULT_SEGMENTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSpec {
    pub segment_count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl PiecewiseSpec {
    pub fn new(segment_count: usize, lo: f64, hi: f64) -> Result<Self, SolverError> {
        if segment_count < 4 {
            return Err(SolverError::InvalidProgram(format!(
                "piecewise linearisation needs at least 4 segments, got {segment_count}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(SolverError::InvalidProgram(format!(
                "piecewise domain [{lo}, {hi}] is empty"
            )));
        }
        Ok(Self {
            segment_count,
            lo,
            hi,
        })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.segment_count as f64
    }

    pub fn knots(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.width();
        (0..=self.segment_count).map(move |k| self.lo + h * k as f64)
    }

    /// Worst-case gap between `c·x²` and either piecewise form.
    pub fn error_bound(&self, coefficient: f64) -> f64 {
        coefficient * self.width().powi(2) / 4.0
    }
}

/// `t >= slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentCut {
    pub slope: f64,
    pub intercept: f64,
}

impl TangentCut {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Tangent cuts to `coefficient·x²` at each knot of `spec`.
pub fn linearize_quadratic(
    coefficient: f64,
    spec: PiecewiseSpec,
) -> Result<Vec<TangentCut>, SolverError> {
    check_convex(coefficient)?;
    if coefficient == 0.0 {
        return Ok(Vec::new());
    }
    Ok(spec
        .knots()
        .map(|k| TangentCut {
            slope: 2.0 * coefficient * k,
            intercept: -coefficient * k * k,
        })
        .collect())
}

/// Maximum of the cuts at `x` (the epigraph's lower envelope).
pub fn cut_envelope(cuts: &[TangentCut], x: f64) -> f64 {
    cuts.iter().map(|c| c.eval(x)).fold(f64::NEG_INFINITY, f64::max)
}

/// One increment of a chord interpolation: the variable may take `[0, width]`
/// and contributes `slope` per unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChordSegment {
    pub width: f64,
    pub slope: f64,
}

/// Chord interpolation of `coefficient·x²` on `spec`, expressed as increments
/// above `spec.lo`. Slopes are nondecreasing, so a cost-minimising LP fills the
/// segments in order.
pub fn chord_segments(
    coefficient: f64,
    spec: PiecewiseSpec,
) -> Result<Vec<ChordSegment>, SolverError> {
    check_convex(coefficient)?;
    let h = spec.width();
    Ok((0..spec.segment_count)
        .map(|k| {
            let a = spec.lo + h * k as f64;
            let b = a + h;
            ChordSegment {
                width: h,
                slope: coefficient * (a + b),
            }
        })
        .collect())
}

pub fn chord_value(segments: &[ChordSegment], lo_value: f64, increment: f64) -> f64 {
    let mut rest = increment;
    let mut total = lo_value;
    for s in segments {
        let take = rest.min(s.width).max(0.0);
        total += take * s.slope;
        rest -= take;
    }
    total
}

fn check_convex(coefficient: f64) -> Result<(), SolverError> {
    if coefficient < 0.0 || !coefficient.is_finite() {
        return Err(SolverError::NotConvex { coefficient });
    }
    Ok(())
}
