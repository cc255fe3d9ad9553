//! Per-scene attack metrics as comma-separated text.

use std::fmt::Write as _;

use crate::evaluation::{summarize, SceneEval};
use crate::scalar::Real;
use crate::scenario::Intent;

pub const ATTACK_HEADER: &str = "scene_id,label,benign_ade,benign_lat,benign_lon,attacked_ade,attacked_lat,attacked_lon,benign_objective,attacked_objective,benign_intent,attacked_intent,feasible,status";

fn intent(i: Option<Intent>) -> String {
    i.map_or_else(|| "none".to_string(), |i| format!("{i:?}").to_ascii_lowercase())
}

/// One row per scene followed by a `mean` row. Columns that do not average
/// (labels, flags) hold the intention error rates or counts in the summary.
pub fn attack_metrics_csv<T: Real>(evals: &[SceneEval<T>]) -> String {
    let mut s = String::from(ATTACK_HEADER);
    s.push('\n');
    for e in evals {
        let a = e.attacked.as_ref();
        let f = |v: Option<T>| v.map_or_else(|| "none".to_string(), |x| x.as_f64().to_string());
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.scene_id,
            intent(e.label),
            e.benign.ade.as_f64(),
            e.benign.lat_err.as_f64(),
            e.benign.lon_err.as_f64(),
            f(a.map(|a| a.report.ade)),
            f(a.map(|a| a.report.lat_err)),
            f(a.map(|a| a.report.lon_err)),
            f(a.map(|a| a.benign_objective)),
            f(a.map(|a| a.objective)),
            intent(Some(e.benign_intent)),
            intent(a.map(|a| a.intent)),
            a.map_or(true, |a| a.feasible),
            a.map_or("benign".to_string(), |a| format!("{:?}", a.status).to_ascii_lowercase()),
        );
    }
    let sum = summarize(evals);
    let f = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
    let benign_obj = {
        let v: Vec<f64> = evals
            .iter()
            .filter_map(|e| e.attacked.as_ref().map(|a| a.benign_objective.as_f64()))
            .collect();
        (!v.is_empty() && v.len() == evals.len()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let feasible = evals
        .iter()
        .filter(|e| e.attacked.as_ref().map_or(true, |a| a.feasible))
        .count();
    let _ = writeln!(
        s,
        "mean,{},{},{},{},{},{},{},{},{},{},{},{},{}",
        evals.iter().filter(|e| e.label.is_some()).count(),
        sum.benign_ade,
        sum.benign_lat,
        sum.benign_lon,
        f(sum.attacked_ade),
        f(sum.attacked_lat),
        f(sum.attacked_lon),
        f(benign_obj),
        f(sum.attacked_objective),
        f(sum.benign_intent_error),
        f(sum.attacked_intent_error),
        feasible,
        sum.scenes,
    );
    s
}
