//! Training runs and their on-disk directory.
//!
//! A run directory holds `config.txt` (effective key = value snapshot),
//! `metrics.csv` (one row per epoch, pre-training first), `steps.csv` (one
//! row per adversarial step) and three checkpoints: `initial.ckpt` (the
//! model entering the adversarial phase), `final.ckpt` and `best.ckpt`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::harness::config::ExperimentSpec;
use crate::predictor::{load_checkpoint, save_checkpoint, PredictorModel};
use crate::scalar::Real;
use crate::scenario::io::write_text;
use crate::scenario::Scene;
use crate::training::{pretrain, train, StepRecord, TrainConfig, TrainReport};

pub const CONFIG_FILE: &str = "config.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const STEPS_FILE: &str = "steps.csv";
pub const INITIAL_CKPT: &str = "initial.ckpt";
pub const FINAL_CKPT: &str = "final.ckpt";
pub const BEST_CKPT: &str = "best.ckpt";

pub struct TrainRun<T> {
    pub spec: ExperimentSpec,
    /// Model entering the adversarial phase.
    pub initial: PredictorModel<T>,
    pub model: PredictorModel<T>,
    pub best: PredictorModel<T>,
    pub report: TrainReport,
}

/// Pre-training (if configured) then the method's adversarial phase.
/// Starts from `init` when given, otherwise from a fresh model.
pub fn run_training<T: Real>(
    spec: &ExperimentSpec,
    scenes: &[Scene<T>],
    init: Option<PredictorModel<T>>,
) -> Result<TrainRun<T>> {
    spec.validate()?;
    let cfg = spec.effective_train();
    let model = match init {
        Some(m) => m,
        None => PredictorModel::new(spec.model.clone())?,
    };
    let mut report = TrainReport::default();
    let initial = if cfg.pretrain_epochs > 0 {
        let pre = pretrain(model, scenes, &cfg, &spec.attack)?;
        report = pre.report;
        pre.model
    } else {
        model
    };
    let adv_cfg = TrainConfig {
        pretrain_epochs: 0,
        ..cfg
    };
    let out = train(initial.clone(), scenes, spec.train_attack, &adv_cfg, &spec.attack)?;
    report.epochs.extend(out.report.epochs);
    report.steps.extend(out.report.steps);
    report.flagged.extend(out.report.flagged);
    report.best_epoch = out.report.best_epoch;
    Ok(TrainRun {
        spec: spec.clone(),
        initial,
        model: out.model,
        best: out.best,
        report,
    })
}

pub const STEPS_HEADER: &str =
    "scene_id,benign_objective,attacked_objective,gate_error,success,flipped,semi_weight,updated,aborted,mixup";

pub fn steps_csv(steps: &[StepRecord]) -> String {
    let mut s = String::from(STEPS_HEADER);
    s.push('\n');
    for r in steps {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scene_id,
            r.benign_objective,
            r.attacked_objective,
            r.gate_error,
            r.success,
            r.flipped,
            r.semi_weight,
            r.updated,
            r.aborted,
            r.mixup
        );
    }
    s
}

impl<T: Real> TrainRun<T> {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_text(&dir.join(CONFIG_FILE), &self.spec.to_text())?;
        write_text(&dir.join(METRICS_FILE), &self.report.metrics_csv())?;
        write_text(&dir.join(STEPS_FILE), &steps_csv(&self.report.steps))?;
        save_checkpoint(&dir.join(INITIAL_CKPT), &self.initial)?;
        save_checkpoint(&dir.join(FINAL_CKPT), &self.model)?;
        save_checkpoint(&dir.join(BEST_CKPT), &self.best)?;
        Ok(())
    }
}

/// A run directory read back for evaluation.
pub struct RunDir<T> {
    pub path: PathBuf,
    pub spec: ExperimentSpec,
    pub initial: PredictorModel<T>,
    pub model: PredictorModel<T>,
}

impl<T: Real> RunDir<T> {
    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Self {
            path: dir.to_path_buf(),
            spec: ExperimentSpec::load(&dir.join(CONFIG_FILE))?,
            initial: load_checkpoint(&dir.join(INITIAL_CKPT))?,
            model: load_checkpoint(&dir.join(FINAL_CKPT))?,
        })
    }
}
