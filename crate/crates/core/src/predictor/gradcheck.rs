//! Central-difference verification of analytic gradients.

use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;

/// Max over coordinates of `|analytic - numeric| / max(1, |analytic|)`.
///
/// `f` returns the value and its analytic gradient at a point.
pub fn gradient_check<F>(mut f: F, point: &[f64]) -> Result<f64>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (v0, analytic) = f(point);
    if !v0.is_finite() {
        return Err(Error::NonFinite("function value".into()));
    }
    if analytic.len() != point.len() {
        return Err(Error::LengthMismatch {
            expected: point.len(),
            found: analytic.len(),
        });
    }
    if analytic.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("analytic gradient".into()));
    }
    let mut p = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + FD_STEP;
        let (fp, _) = f(&p);
        p[i] = orig - FD_STEP;
        let (fm, _) = f(&p);
        p[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!("value near coordinate {i}")));
        }
        let numeric = (fp - fm) / (2.0 * FD_STEP);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(rel);
    }
    Ok(worst)
}
