//! White-box PGD attacks on the target history.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::metrics::{ade, directional_error, trajectory_frames, Axis};
use crate::predictor::TrajectoryPredictor;
use crate::scalar::Real;
use crate::scenario::{Scene, Trajectory, TrajectoryRole, DEFAULT_MAX_SPEED, DT, FUTURE_LEN, HISTORY_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LateralSide {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LongitudinalSide {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackType {
    Ade,
    Lateral(LateralSide),
    Longitudinal(LongitudinalSide),
}

impl AttackType {
    /// The three attacks used for evaluation tables.
    pub const EVAL: [AttackType; 3] = [
        AttackType::Ade,
        AttackType::Lateral(LateralSide::Right),
        AttackType::Longitudinal(LongitudinalSide::Forward),
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackType::Ade => "ade",
            AttackType::Lateral(LateralSide::Right) => "lat-right",
            AttackType::Lateral(LateralSide::Left) => "lat-left",
            AttackType::Longitudinal(LongitudinalSide::Forward) => "lon-forward",
            AttackType::Longitudinal(LongitudinalSide::Backward) => "lon-backward",
        }
    }

    /// Axis and sign of a directional attack.
    fn direction(self) -> Option<(Axis, f64)> {
        match self {
            AttackType::Ade => None,
            AttackType::Lateral(LateralSide::Right) => Some((Axis::Lateral, 1.0)),
            AttackType::Lateral(LateralSide::Left) => Some((Axis::Lateral, -1.0)),
            AttackType::Longitudinal(LongitudinalSide::Forward) => Some((Axis::Longitudinal, 1.0)),
            AttackType::Longitudinal(LongitudinalSide::Backward) => {
                Some((Axis::Longitudinal, -1.0))
            }
        }
    }
}

impl fmt::Display for AttackType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "ade" => AttackType::Ade,
            "lat-right" | "lateral" | "lateral-right" => AttackType::Lateral(LateralSide::Right),
            "lat-left" | "lateral-left" => AttackType::Lateral(LateralSide::Left),
            "lon-forward" | "longitudinal" | "longitudinal-forward" => {
                AttackType::Longitudinal(LongitudinalSide::Forward)
            }
            "lon-backward" | "longitudinal-backward" => {
                AttackType::Longitudinal(LongitudinalSide::Backward)
            }
            other => return Err(Error::Config(format!("unknown attack type `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// Per-waypoint deviation budget, m.
    pub epsilon: f64,
    pub iterations: usize,
    /// Step length per waypoint, m.
    pub step_size: f64,
    pub keep_best: bool,
    /// Start from a uniform random point in the ball instead of the benign
    /// history.
    pub random_start: bool,
    pub seed: u64,
    /// Limits for the dynamics feasibility flag.
    pub max_speed: f64,
    pub max_accel: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            iterations: 20,
            step_size: 0.1,
            keep_best: true,
            random_start: false,
            seed: 0,
            max_speed: DEFAULT_MAX_SPEED,
            max_accel: 10.0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config("attack.epsilon must be positive".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config("attack.step_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackStatus {
    Completed,
    /// A gradient contained NaN or infinity; the benign history is returned.
    NonFiniteGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult<T> {
    pub adv_history: Trajectory<T>,
    pub objective_value: T,
    pub benign_objective: T,
    pub iterations_run: usize,
    /// The returned history beats the benign objective.
    pub success: bool,
    /// Speed and acceleration of the adversarial history stay within limits.
    pub feasible: bool,
    pub status: AttackStatus,
}

impl<T: Real> AttackResult<T> {
    pub fn adversarial_scene(&self, scene: &Scene<T>) -> Scene<T> {
        scene.with_target_history(self.adv_history.clone())
    }
}

/// Value of the attack objective; larger means a stronger attack.
pub fn attack_objective<T: Real>(
    pred: &Trajectory<T>,
    truth: &Trajectory<T>,
    kind: AttackType,
) -> Result<T> {
    match kind.direction() {
        None => ade(pred, truth),
        Some((axis, sign)) => Ok(directional_error(pred, truth, axis)? * T::lit(sign)),
    }
}

/// Builds the objective on a tape from the flat prediction node `pred`.
pub fn attack_objective_on_tape<T: Real>(
    tape: &mut Tape<T>,
    pred: Var,
    truth: &Trajectory<T>,
    kind: AttackType,
) -> Result<Var> {
    let n = truth.len();
    if tape.len_of(pred) != 2 * n {
        return Err(Error::LengthMismatch {
            expected: 2 * n,
            found: tape.len_of(pred) / 2,
        });
    }
    let target = tape.leaf(truth.to_flat());
    let diff = tape.sub(pred, target);
    match kind.direction() {
        None => {
            let d = tape.pair_norm(diff);
            Ok(tape.mean(d))
        }
        Some((axis, sign)) => {
            let frames = trajectory_frames(truth)?;
            let scale = T::lit(sign) / T::from_usize(n).expect("length fits scalar");
            let w: Vec<T> = frames
                .iter()
                .flat_map(|f| {
                    let u = f.axis(axis);
                    [u.x * scale, u.y * scale]
                })
                .collect();
            let w = tape.leaf(w);
            let prod = tape.mul(diff, w);
            Ok(tape.sum(prod))
        }
    }
}

/// Radially scales each 2-vector of the interleaved `delta` into the disc of
/// radius `epsilon`.
pub fn project_perturbation<T: Real>(delta: &mut [T], epsilon: T) {
    for p in delta.chunks_exact_mut(2) {
        let n = p[0].hypot(p[1]);
        if n > epsilon {
            let s = epsilon / n;
            p[0] *= s;
            p[1] *= s;
        }
    }
}

/// Attack success test of the adversarial training gate.
pub fn is_successful<T: Real>(_benign_err: T, attacked_err: T, threshold: T) -> bool {
    attacked_err > threshold
}

/// Speed and acceleration check on a history sampled at 10 Hz.
pub fn is_dynamically_feasible<T: Real>(history: &Trajectory<T>, max_speed: f64, max_accel: f64) -> bool {
    let pts = &history.points;
    let vel: Vec<_> = pts
        .windows(2)
        .map(|w| w[1].sub(w[0]).scale(T::one() / T::lit(DT)))
        .collect();
    let speed_ok = vel.iter().all(|v| v.norm().as_f64() <= max_speed);
    let accel_ok = vel
        .windows(2)
        .all(|w| (w[1].sub(w[0]).norm() / T::lit(DT)).as_f64() <= max_accel);
    speed_ok && accel_ok
}

struct Probe<T> {
    objective: T,
    grad: Vec<T>,
}

fn probe<T: Real, P: TrajectoryPredictor<T> + ?Sized>(
    model: &P,
    scene: &Scene<T>,
    history: Vec<T>,
    truth: &Trajectory<T>,
    kind: AttackType,
) -> Result<Probe<T>> {
    let mut tape = Tape::new();
    let h = tape.leaf(history);
    let pred = model.predict_on_tape(&mut tape, scene, h);
    let obj = attack_objective_on_tape(&mut tape, pred, truth, kind)?;
    let grads = tape.backward(obj);
    Ok(Probe {
        objective: tape.scalar(obj),
        grad: grads.wrt(h),
    })
}

/// Projected gradient ascent on the attack objective over the target
/// history. Other agents and the map are never touched.
pub fn pgd_attack<T: Real, P: TrajectoryPredictor<T> + ?Sized>(
    model: &P,
    scene: &Scene<T>,
    kind: AttackType,
    config: &AttackConfig,
) -> Result<AttackResult<T>> {
    config.validate()?;
    let target = scene.target();
    let truth = &target.future;
    if truth.len() != FUTURE_LEN {
        return Err(Error::LengthMismatch {
            expected: FUTURE_LEN,
            found: truth.len(),
        });
    }
    let benign = target.history.to_flat();
    if benign.len() != 2 * HISTORY_LEN {
        return Err(Error::LengthMismatch {
            expected: HISTORY_LEN,
            found: benign.len() / 2,
        });
    }
    let eps = T::lit(config.epsilon);
    let step = T::lit(config.step_size);
    let add = |delta: &[T]| -> Vec<T> { benign.iter().zip(delta).map(|(&b, &d)| b + d).collect() };

    let benign_probe = probe(model, scene, benign.clone(), truth, kind)?;
    let benign_objective = benign_probe.objective;
    let abort = |iterations_run| AttackResult {
        adv_history: target.history.clone(),
        objective_value: benign_objective,
        benign_objective,
        iterations_run,
        success: false,
        feasible: true,
        status: AttackStatus::NonFiniteGradient,
    };
    if !benign_objective.is_finite() {
        return Err(Error::NonFinite("benign attack objective".into()));
    }

    let mut delta = vec![T::zero(); benign.len()];
    let mut current = benign_probe;
    if config.random_start && config.iterations > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for p in delta.chunks_exact_mut(2) {
            let r = config.epsilon * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            p[0] = T::lit(r * a.cos());
            p[1] = T::lit(r * a.sin());
        }
        current = probe(model, scene, add(&delta), truth, kind)?;
    }
    let mut best = (delta.clone(), current.objective);
    let mut iterations_run = 0;
    for _ in 0..config.iterations {
        if current.grad.iter().any(|g| !g.is_finite()) {
            return Ok(abort(iterations_run));
        }
        for (d, g) in delta.chunks_exact_mut(2).zip(current.grad.chunks_exact(2)) {
            let n = g[0].hypot(g[1]);
            if n > T::zero() {
                d[0] += step * g[0] / n;
                d[1] += step * g[1] / n;
            }
        }
        project_perturbation(&mut delta, eps);
        iterations_run += 1;
        current = probe(model, scene, add(&delta), truth, kind)?;
        if !current.objective.is_finite() {
            return Ok(abort(iterations_run));
        }
        if current.objective > best.1 {
            best = (delta.clone(), current.objective);
        }
    }

    let (delta, objective_value) = if config.keep_best {
        best
    } else {
        (delta, current.objective)
    };
    let adv_history = Trajectory::from_flat(TrajectoryRole::History, &add(&delta));
    let feasible = is_dynamically_feasible(&adv_history, config.max_speed, config.max_accel);
    Ok(AttackResult {
        adv_history,
        objective_value,
        benign_objective,
        iterations_run,
        success: objective_value > benign_objective,
        feasible,
        status: AttackStatus::Completed,
    })
}
