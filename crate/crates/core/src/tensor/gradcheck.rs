//! Finite-difference verification of tape gradients.

use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is essentially zero are judged by absolute error instead.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateError {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub tolerance: f64,
    /// Coordinates whose relative error exceeded the tolerance.
    pub failures: Vec<CoordinateError>,
}

impl GradCheckReport {
    pub fn new(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Records one coordinate comparison.
    pub fn record(&mut self, index: usize, analytic: f64, numeric: f64) {
        let rel_err = relative_error(analytic, numeric);
        self.checked += 1;
        if rel_err > self.max_rel_err || rel_err.is_nan() {
            self.max_rel_err = rel_err;
        }
        if rel_err.is_nan() || rel_err > self.tolerance {
            self.failures.push(CoordinateError {
                index,
                analytic,
                numeric,
                rel_err,
            });
        }
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.checked += other.checked;
        if other.max_rel_err > self.max_rel_err || other.max_rel_err.is_nan() {
            self.max_rel_err = other.max_rel_err;
        }
        self.failures.extend(other.failures);
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares the tape gradient of scalar `f` at `point` with central
/// differences `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate.
pub fn grad_check<F>(f: F, point: &Tensor, step: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut report = GradCheckReport::new(tolerance);
    if point.numel() == 0 {
        return Ok(report);
    }

    let mut tape = Tape::new();
    let x = tape.param(point.clone());
    let y = f(&mut tape, x)?;
    let grads = tape.backward(y)?;
    let analytic = grads.get(x).expect("param leaf has a gradient").data().to_vec();

    let eval = |p: Tensor| -> Result<f64> {
        let mut t = Tape::new();
        let x = t.param(p);
        let y = f(&mut t, x)?;
        t.value(y).item()
    };

    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = point.clone();
        plus.data_mut()[i] += step;
        let mut minus = point.clone();
        minus.data_mut()[i] -= step;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * step);
        report.record(i, a, numeric);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngStreams};

    #[test]
    fn quadratic_is_exact() {
        let mut rng = RngStreams::new(11).stream(Purpose::Init, &[]);
        let p = Tensor::randn(&[3, 4], 1.0, &mut rng);
        let report = grad_check(
            |t, x| {
                let sq = t.mul(x, x)?;
                let s = t.sum(sq);
                Ok(t.scale(s, 0.5))
            },
            &p,
            1e-4,
            1e-9,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.checked, 12);
    }

    #[test]
    fn empty_point_gives_empty_report() {
        let report = grad_check(|t, x| Ok(t.sum(x)), &Tensor::zeros(&[0]), 1e-4, 1e-4).unwrap();
        assert_eq!(report.checked, 0);
        assert!(report.passed());
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // A detached copy hides the dependence from the tape.
        let p = Tensor::vector(&[1.0, 2.0]);
        let report = grad_check(
            |t, x| {
                let c = t.constant(t.value(x).clone());
                let sq = t.mul(x, c)?;
                Ok(t.sum(sq))
            },
            &p,
            1e-4,
            1e-4,
        )
        .unwrap();
        assert_eq!(report.failures.len(), 2);
        assert!(report.max_rel_err > 0.4);
    }
}
