//! Evaluation quantities: ADE, directional errors and intention error rate.
//!
//! Lateral errors are right-positive: the lateral unit vector is the
//! longitudinal one rotated by -90 degrees.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scenario::{Intent, Trajectory, Waypoint};

/// Orthonormal driving frame at one waypoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionFrame<T> {
    pub u_lon: Waypoint<T>,
    pub u_lat: Waypoint<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Lateral,
    Longitudinal,
}

impl<T: Real> DirectionFrame<T> {
    pub fn axis(&self, axis: Axis) -> Waypoint<T> {
        match axis {
            Axis::Lateral => self.u_lat,
            Axis::Longitudinal => self.u_lon,
        }
    }
}

/// Scalar summary of one prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport<T> {
    pub ade: T,
    pub lat_err: T,
    pub lon_err: T,
    pub intent_correct: Option<bool>,
}

fn check_lengths<T>(pred: &Trajectory<T>, truth: &Trajectory<T>) -> Result<()> {
    if pred.points.len() != truth.points.len() {
        return Err(Error::LengthMismatch {
            expected: truth.points.len(),
            found: pred.points.len(),
        });
    }
    if truth.points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Mean Euclidean distance between corresponding waypoints.
pub fn ade<T: Real>(pred: &Trajectory<T>, truth: &Trajectory<T>) -> Result<T> {
    check_lengths(pred, truth)?;
    let n = T::from_usize(truth.len()).expect("length fits scalar");
    let total: T = pred
        .points
        .iter()
        .zip(&truth.points)
        .map(|(p, s)| p.dist(*s))
        .sum();
    Ok(total / n)
}

pub fn direction_frame<T: Real>(
    s_curr: Waypoint<T>,
    s_next: Waypoint<T>,
) -> Result<DirectionFrame<T>> {
    let d = s_next.sub(s_curr);
    let len = d.norm();
    if !(len > T::zero()) {
        return Err(Error::DegenerateTrajectory);
    }
    let u_lon = d.scale(T::one() / len);
    Ok(DirectionFrame {
        u_lon,
        u_lat: Waypoint::new(u_lon.y, -u_lon.x),
    })
}

/// One frame per ground-truth waypoint. Frame `a` uses the pair
/// `(s_a, s_a+1)`; the last frame reuses the final pair. Stationary pairs
/// fall back to the first moving pair of the trajectory.
pub fn trajectory_frames<T: Real>(truth: &Trajectory<T>) -> Result<Vec<DirectionFrame<T>>> {
    let pts = &truth.points;
    if pts.len() < 2 {
        return Err(Error::DegenerateTrajectory);
    }
    let fallback = pts
        .windows(2)
        .find_map(|w| direction_frame(w[0], w[1]).ok())
        .ok_or(Error::DegenerateTrajectory)?;
    Ok((0..pts.len())
        .map(|a| {
            let i = a.min(pts.len() - 2);
            direction_frame(pts[i], pts[i + 1]).unwrap_or(fallback)
        })
        .collect())
}

/// Per-frame signed projection of the prediction error.
pub fn directional_errors_per_frame<T: Real>(
    pred: &Trajectory<T>,
    truth: &Trajectory<T>,
    axis: Axis,
) -> Result<Vec<T>> {
    check_lengths(pred, truth)?;
    let frames = trajectory_frames(truth)?;
    Ok(pred
        .points
        .iter()
        .zip(&truth.points)
        .zip(&frames)
        .map(|((p, s), f)| p.sub(*s).dot(f.axis(axis)))
        .collect())
}

/// Mean over frames of the signed directional error.
pub fn directional_error<T: Real>(
    pred: &Trajectory<T>,
    truth: &Trajectory<T>,
    axis: Axis,
) -> Result<T> {
    let per = directional_errors_per_frame(pred, truth, axis)?;
    let n = T::from_usize(per.len()).expect("length fits scalar");
    Ok(per.into_iter().sum::<T>() / n)
}

pub fn error_report<T: Real>(pred: &Trajectory<T>, truth: &Trajectory<T>) -> Result<ErrorReport<T>> {
    Ok(ErrorReport {
        ade: ade(pred, truth)?,
        lat_err: directional_error(pred, truth, Axis::Lateral)?,
        lon_err: directional_error(pred, truth, Axis::Longitudinal)?,
        intent_correct: None,
    })
}

/// Fraction of positions where the categories disagree.
pub fn intention_error_rate(pred: &[Intent], truth: &[Intent]) -> Result<f64> {
    if pred.is_empty() || truth.is_empty() {
        return Err(Error::EmptyInput);
    }
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let wrong = pred.iter().zip(truth).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / pred.len() as f64)
}
