//! Benign and attacked evaluation of a model over a scene set.

use rayon::prelude::*;

use crate::attack::{attack_objective, pgd_attack, AttackConfig, AttackStatus, AttackType};
use crate::error::Result;
use crate::metrics::{error_report, intention_error_rate, ErrorReport};
use crate::predictor::PredictorModel;
use crate::scalar::Real;
use crate::scenario::{label_lateral_intention, Intent, Scene, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct AttackedEval<T> {
    pub kind: AttackType,
    pub report: ErrorReport<T>,
    pub objective: T,
    pub benign_objective: T,
    pub intent: Intent,
    pub feasible: bool,
    pub status: AttackStatus,
    pub adv_history: Trajectory<T>,
    pub prediction: Trajectory<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneEval<T> {
    pub scene_id: u64,
    pub label: Option<Intent>,
    pub benign: ErrorReport<T>,
    pub benign_intent: Intent,
    pub prediction: Trajectory<T>,
    pub attacked: Option<AttackedEval<T>>,
}

pub fn evaluate_scene<T: Real>(
    model: &PredictorModel<T>,
    scene: &Scene<T>,
    attack: Option<(AttackType, &AttackConfig)>,
) -> Result<SceneEval<T>> {
    let truth = &scene.target().future;
    let label = label_lateral_intention(scene);
    let (pred, z) = model.predict(scene);
    let mut benign = error_report(&pred, truth)?;
    benign.intent_correct = label.map(|l| l == z.intent());
    let attacked = match attack {
        None => None,
        Some((kind, cfg)) => {
            let res = pgd_attack(model, scene, kind, cfg)?;
            let adv_scene = res.adversarial_scene(scene);
            let (apred, az) = model.predict(&adv_scene);
            let mut report = error_report(&apred, truth)?;
            report.intent_correct = label.map(|l| l == az.intent());
            Some(AttackedEval {
                kind,
                report,
                objective: attack_objective(&apred, truth, kind)?,
                benign_objective: res.benign_objective,
                intent: az.intent(),
                feasible: res.feasible,
                status: res.status,
                adv_history: res.adv_history,
                prediction: apred,
            })
        }
    };
    Ok(SceneEval {
        scene_id: scene.scene_id,
        label,
        benign,
        benign_intent: z.intent(),
        prediction: pred,
        attacked,
    })
}

/// Evaluates scenes in parallel; the output order matches the input.
pub fn evaluate_set<T: Real>(
    model: &PredictorModel<T>,
    scenes: &[Scene<T>],
    attack: Option<(AttackType, &AttackConfig)>,
) -> Result<Vec<SceneEval<T>>> {
    scenes
        .par_iter()
        .map(|s| evaluate_scene(model, s, attack))
        .collect()
}

/// Means over an evaluated set. Intention errors are over scenes with a
/// lateral label and are `None` when there are none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub scenes: usize,
    pub benign_ade: f64,
    pub benign_lat: f64,
    pub benign_lon: f64,
    pub benign_intent_error: Option<f64>,
    pub attacked_ade: Option<f64>,
    pub attacked_lat: Option<f64>,
    pub attacked_lon: Option<f64>,
    pub attacked_objective: Option<f64>,
    pub attacked_intent_error: Option<f64>,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for x in v {
        s += x;
        n += 1;
    }
    (n > 0).then(|| s / n as f64)
}

pub fn summarize<T: Real>(evals: &[SceneEval<T>]) -> EvalSummary {
    let labeled: Vec<&SceneEval<T>> = evals.iter().filter(|e| e.label.is_some()).collect();
    let truth: Vec<Intent> = labeled.iter().filter_map(|e| e.label).collect();
    let benign_pred: Vec<Intent> = labeled.iter().map(|e| e.benign_intent).collect();
    let attacked: Vec<&AttackedEval<T>> = evals.iter().filter_map(|e| e.attacked.as_ref()).collect();
    let complete = !attacked.is_empty() && attacked.len() == evals.len();
    let attacked_pred: Vec<Intent> = labeled
        .iter()
        .filter_map(|e| e.attacked.as_ref().map(|a| a.intent))
        .collect();
    EvalSummary {
        scenes: evals.len(),
        benign_ade: mean(evals.iter().map(|e| e.benign.ade.as_f64())).unwrap_or(f64::NAN),
        benign_lat: mean(evals.iter().map(|e| e.benign.lat_err.as_f64())).unwrap_or(f64::NAN),
        benign_lon: mean(evals.iter().map(|e| e.benign.lon_err.as_f64())).unwrap_or(f64::NAN),
        benign_intent_error: intention_error_rate(&benign_pred, &truth).ok(),
        attacked_ade: complete.then(|| mean(attacked.iter().map(|a| a.report.ade.as_f64()))).flatten(),
        attacked_lat: complete
            .then(|| mean(attacked.iter().map(|a| a.report.lat_err.as_f64())))
            .flatten(),
        attacked_lon: complete
            .then(|| mean(attacked.iter().map(|a| a.report.lon_err.as_f64())))
            .flatten(),
        attacked_objective: complete
            .then(|| mean(attacked.iter().map(|a| a.objective.as_f64())))
            .flatten(),
        attacked_intent_error: if complete {
            intention_error_rate(&attacked_pred, &truth).ok()
        } else {
            None
        },
    }
}
