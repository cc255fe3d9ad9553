//! Trajectory, semi-supervised, generator-regularization and discriminator
//! losses, as tape builders and as plain values.

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::predictor::model::{BoundParams, LatentVars, DISC_EPS};
use crate::predictor::{LatentGroup, LatentState, PredictorModel};
use crate::scalar::Real;
use crate::scenario::{SemanticLabels, Trajectory};

/// Floor on the argument of the log in the cross-entropy term.
pub const LOG_FLOOR: f64 = 1e-7;

/// Mean smooth-L1 over all coordinates.
pub fn traj_on_tape<T: Real>(tape: &mut Tape<T>, pred: Var, truth: &[T]) -> Var {
    let t = tape.leaf(truth.to_vec());
    let e = tape.sub(pred, t);
    let l = tape.smooth_l1(e);
    tape.mean(l)
}

/// `None` when the scene carries no labels.
pub fn semi_on_tape<T: Real>(
    tape: &mut Tape<T>,
    z: &LatentVars,
    labels: &SemanticLabels<T>,
) -> Option<Var> {
    let mut parts = Vec::new();
    if let Some(intent) = labels.lateral_intent {
        let logp = tape.ln_floor(z.lat, T::lit(LOG_FLOOR));
        let picked = tape.slice(logp, intent.index(), 1);
        parts.push(tape.scale(picked, -T::one()));
    }
    if let Some(g) = labels.headway_s {
        let d = tape.shift(z.lon, -g);
        parts.push(tape.square(d));
    }
    match parts.len() {
        0 => None,
        1 => Some(parts[0]),
        _ => {
            let c = tape.concat(&parts);
            Some(tape.sum(c))
        }
    }
}

fn log_one_minus<T: Real>(tape: &mut Tape<T>, d: Var) -> Var {
    let neg = tape.scale(d, -T::one());
    let one_minus = tape.shift(neg, T::one());
    tape.ln_floor(one_minus, T::lit(DISC_EPS * 0.5))
}

/// Mean over groups of `ln(1 - D_i(G_i(x)))`; the generator minimises it.
pub fn reg_on_tape<T: Real>(
    tape: &mut Tape<T>,
    model: &PredictorModel<T>,
    p: &BoundParams,
    z: &LatentVars,
) -> Var {
    let terms: Vec<Var> = LatentGroup::ALL
        .iter()
        .map(|&g| {
            let d = model.discriminate_on_tape(tape, p, g, z.group(g));
            log_one_minus(tape, d)
        })
        .collect();
    tape.mean_of(&terms)
}

/// Sum over groups of `ln D_i(s_i) + ln(1 - D_i(G_i(x)))`; the
/// discriminators ascend it. The latent is detached so no gradient reaches
/// the encoder.
pub fn disc_on_tape<T: Real>(
    tape: &mut Tape<T>,
    model: &PredictorModel<T>,
    p: &BoundParams,
    z: &LatentVars,
    samples: &[Vec<T>; 3],
) -> Var {
    let mut terms = Vec::with_capacity(6);
    for g in LatentGroup::ALL {
        let real = tape.leaf(samples[g.index()].clone());
        let d_real = model.discriminate_on_tape(tape, p, g, real);
        terms.push(tape.ln_floor(d_real, T::lit(DISC_EPS * 0.5)));
        let fake = tape.detach(z.group(g));
        let d_fake = model.discriminate_on_tape(tape, p, g, fake);
        terms.push(log_one_minus(tape, d_fake));
    }
    let all = tape.concat(&terms);
    tape.sum(all)
}

pub fn loss_traj<T: Real>(pred: &Trajectory<T>, truth: &Trajectory<T>) -> Result<T> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: pred.len(),
        });
    }
    let mut tape = Tape::new();
    let p = tape.leaf(pred.to_flat());
    let l = traj_on_tape(&mut tape, p, &truth.to_flat());
    Ok(tape.scalar(l))
}

pub fn loss_semi<T: Real>(z: &LatentState<T>, labels: &SemanticLabels<T>) -> T {
    let mut tape = Tape::new();
    let zv = latent_leaves(&mut tape, z);
    semi_on_tape(&mut tape, &zv, labels).map_or(T::zero(), |v| tape.scalar(v))
}

fn latent_leaves<T: Real>(tape: &mut Tape<T>, z: &LatentState<T>) -> LatentVars {
    LatentVars {
        lon: tape.leaf(vec![z.z_lon]),
        lat: tape.leaf(z.z_lat.to_vec()),
        other: tape.leaf(z.z_other.clone()),
    }
}

fn check_feature_width<T: Real>(model: &PredictorModel<T>, x: &[T]) -> Result<()> {
    if x.len() != model.config.embed_width {
        return Err(Error::WidthMismatch {
            group: "feature",
            expected: model.config.embed_width,
            found: x.len(),
        });
    }
    Ok(())
}

pub fn loss_reg<T: Real>(model: &PredictorModel<T>, x: &[T]) -> Result<T> {
    check_feature_width(model, x)?;
    let mut tape = Tape::new();
    let p = model.bind(&mut tape);
    let xv = tape.leaf(x.to_vec());
    let z = model.encode_on_tape(&mut tape, &p, xv);
    let l = reg_on_tape(&mut tape, model, &p, &z);
    Ok(tape.scalar(l))
}

pub fn loss_disc<T: Real>(model: &PredictorModel<T>, x: &[T], samples: &[Vec<T>; 3]) -> Result<T> {
    check_feature_width(model, x)?;
    for g in LatentGroup::ALL {
        let w = model.config.group_width(g);
        if samples[g.index()].len() != w {
            return Err(Error::WidthMismatch {
                group: g.name(),
                expected: w,
                found: samples[g.index()].len(),
            });
        }
    }
    let mut tape = Tape::new();
    let p = model.bind(&mut tape);
    let xv = tape.leaf(x.to_vec());
    let z = model.encode_on_tape(&mut tape, &p, xv);
    let l = disc_on_tape(&mut tape, model, &p, &z, samples);
    Ok(tape.scalar(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::ModelConfig;
    use crate::scenario::{Intent, TrajectoryRole, Waypoint};
    use approx::assert_abs_diff_eq;

    fn traj(v: &[(f64, f64)]) -> Trajectory<f64> {
        Trajectory::new(
            TrajectoryRole::Future,
            v.iter().map(|&(x, y)| Waypoint::new(x, y)).collect(),
        )
    }

    #[test]
    fn traj_examples() {
        let t = traj(&[(0.0, 0.0)]);
        assert_eq!(loss_traj(&t, &t).unwrap(), 0.0);
        // one of two coordinates off; the mean halves the per-coordinate value
        assert_abs_diff_eq!(loss_traj(&traj(&[(0.5, 0.0)]), &t).unwrap(), 0.125 / 2.0);
        assert_abs_diff_eq!(loss_traj(&traj(&[(2.0, 0.0)]), &t).unwrap(), 1.5 / 2.0);
        assert!(loss_traj(&traj(&[(0.0, 0.0), (1.0, 1.0)]), &t).is_err());
    }

    fn state(lon: f64, lat: [f64; 3]) -> LatentState<f64> {
        LatentState {
            z_lon: lon,
            z_lat: lat,
            z_other: vec![0.0; 2],
        }
    }

    #[test]
    fn semi_examples() {
        let labels = SemanticLabels {
            headway_s: Some(1.5),
            lateral_intent: Some(Intent::Left),
        };
        assert_eq!(loss_semi(&state(1.5, [0.0, 1.0, 0.0]), &labels), 0.0);
        let third = 1.0 / 3.0;
        assert_abs_diff_eq!(
            loss_semi(&state(1.5, [third; 3]), &labels),
            3f64.ln(),
            epsilon = 1e-12
        );
        let fwd = SemanticLabels {
            headway_s: Some(2.0),
            lateral_intent: Some(Intent::Forward),
        };
        assert_abs_diff_eq!(
            loss_semi(&state(1.0, [0.5, 0.25, 0.25]), &fwd),
            1.0 + 2f64.ln(),
            epsilon = 1e-12
        );
        assert_eq!(loss_semi(&state(1.0, [0.5, 0.25, 0.25]), &SemanticLabels::default()), 0.0);
        // log argument is floored
        let l = loss_semi(&state(1.5, [1.0, 0.0, 0.0]), &labels);
        assert_abs_diff_eq!(l, -(1e-7f64).ln(), epsilon = 1e-9);
    }

    fn zero_disc_model() -> PredictorModel<f64> {
        let mut m = PredictorModel::new(ModelConfig::tiny()).unwrap();
        for d in &mut m.discriminators {
            d.fill(0.0);
        }
        m
    }

    #[test]
    fn reg_and_disc_at_half() {
        let m = zero_disc_model();
        let x = vec![0.2; m.config.embed_width];
        assert_abs_diff_eq!(loss_reg(&m, &x).unwrap(), 0.5f64.ln(), epsilon = 1e-12);
        let s = [vec![1.0], vec![0.0, 1.0, 0.0], vec![0.3; m.config.latent_other_width]];
        assert_abs_diff_eq!(
            loss_disc(&m, &x, &s).unwrap(),
            6.0 * 0.5f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn saturated_discriminators_stay_finite() {
        let mut m = zero_disc_model();
        // output bias large: D = 1 - 1e-7 after the clamp
        for d in &mut m.discriminators {
            d.tensors[3].data[0] = 50.0;
        }
        let x = vec![0.1; m.config.embed_width];
        let r = loss_reg(&m, &x).unwrap();
        assert!(r.is_finite());
        assert_abs_diff_eq!(r, (1e-7f64).ln(), epsilon = 1e-6);

        // perfect discriminator: real at ceiling, fake at floor
        for d in &mut m.discriminators {
            d.tensors[3].data[0] = 0.0;
        }
        let mut tape = Tape::new();
        let d = tape.leaf(vec![1.0 - 1e-7, 1e-7]);
        let real = tape.slice(d, 0, 1);
        let fake = tape.slice(d, 1, 1);
        let a = tape.ln_floor(real, 0.5e-7);
        let b = log_one_minus(&mut tape, fake);
        let v = 3.0 * (tape.scalar(a) + tape.scalar(b));
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn width_checks() {
        let m = zero_disc_model();
        assert!(matches!(loss_reg(&m, &[0.0; 3]), Err(Error::WidthMismatch { .. })));
        let x = vec![0.0; m.config.embed_width];
        let s = [vec![1.0], vec![0.0; 2], vec![0.0; m.config.latent_other_width]];
        assert!(matches!(loss_disc(&m, &x, &s), Err(Error::WidthMismatch { group: "lat", .. })));
    }
}
