//! Loss stack, benign pre-training and the adversarial training loop.

pub mod losses;
pub mod optim;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::attack::{attack_objective, pgd_attack, AttackConfig, AttackType};
use crate::autodiff::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_set, summarize};
use crate::metrics::ade;
use crate::predictor::model::read_latent;
use crate::predictor::{LatentGroup, LatentState, PredictorModel, PriorSpec};
use crate::scalar::Real;
use crate::scenario::{semantic_labels, Intent, Scene, SemanticLabels, Trajectory, TrajectoryRole};

pub use losses::{loss_disc, loss_reg, loss_semi, loss_traj};
pub use optim::{Optimizer, OptimizerKind};

/// Error measure compared against the success threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateMetric {
    /// ADE of the attacked prediction, whatever the attack type.
    Ade,
    /// The attack's own objective.
    Objective,
}

impl fmt::Display for GateMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateMetric::Ade => "ade",
            GateMetric::Objective => "objective",
        })
    }
}

impl FromStr for GateMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ade" => Ok(GateMetric::Ade),
            "objective" => Ok(GateMetric::Objective),
            other => Err(Error::Config(format!("unknown gate metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Attacked error above which a sample is trained on, m.
    pub success_threshold: f64,
    pub gate: GateMetric,
    pub lambda_traj: f64,
    pub lambda_semi: f64,
    pub lambda_reg: f64,
    /// Multiplier on `lambda_semi` when the attack flips the intention.
    pub lambda_semi_boost: f64,
    pub semi_enabled: bool,
    /// Also gates discriminator training.
    pub reg_enabled: bool,
    pub mixup_enabled: bool,
    /// Weight on the adversarial history.
    pub mixup_lambda: f64,
    /// Draw the mixing weight from `Beta(a, a)` instead.
    pub mixup_beta: Option<f64>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub disc_learning_rate: f64,
    /// Learning rate is multiplied by `lr_decay_gamma` every this many
    /// epochs of a phase; 0 disables decay.
    pub lr_decay_every: usize,
    pub lr_decay_gamma: f64,
    pub grad_clip: Option<f64>,
    pub pretrain_epochs: usize,
    /// Adversarial epochs.
    pub epochs: usize,
    /// Minibatch size of benign pre-training. Adversarial steps are per
    /// sample.
    pub batch_size: usize,
    /// Training scenes re-evaluated after every epoch for the report.
    pub monitor_scenes: usize,
    pub lat_prior_from_labels: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            success_threshold: 2.0,
            gate: GateMetric::Ade,
            lambda_traj: 1.0,
            lambda_semi: 1.0,
            lambda_reg: 0.1,
            lambda_semi_boost: 5.0,
            semi_enabled: true,
            reg_enabled: true,
            mixup_enabled: false,
            mixup_lambda: 2.0 / 3.0,
            mixup_beta: None,
            optimizer: OptimizerKind::Sgd,
            learning_rate: 1e-3,
            disc_learning_rate: 1e-3,
            lr_decay_every: 0,
            lr_decay_gamma: 0.5,
            grad_clip: None,
            pretrain_epochs: 5,
            epochs: 5,
            batch_size: 32,
            monitor_scenes: 32,
            lat_prior_from_labels: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda_traj", self.lambda_traj),
            ("lambda_semi", self.lambda_semi),
            ("lambda_reg", self.lambda_reg),
            ("lambda_semi_boost", self.lambda_semi_boost),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("train.{name} must be >= 0")));
            }
        }
        if !(0.0..=1.0).contains(&self.mixup_lambda) {
            return Err(Error::Config("train.mixup_lambda must lie in [0, 1]".into()));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::Config("train.success_threshold must be > 0".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.disc_learning_rate > 0.0) {
            return Err(Error::Config("learning rates must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be > 0".into()));
        }
        if let Some(a) = self.mixup_beta {
            if !(a > 0.0) {
                return Err(Error::Config("train.mixup_beta must be > 0".into()));
            }
        }
        Ok(())
    }

    fn lr_at(&self, base: f64, epoch: usize) -> f64 {
        if self.lr_decay_every == 0 {
            base
        } else {
            base * self.lr_decay_gamma.powi((epoch / self.lr_decay_every) as i32)
        }
    }

    fn semi_weight(&self) -> f64 {
        if self.semi_enabled {
            self.lambda_semi
        } else {
            0.0
        }
    }

    fn reg_weight(&self) -> f64 {
        if self.reg_enabled {
            self.lambda_reg
        } else {
            0.0
        }
    }
}

/// Replaces the target history by `lambda * adversarial + (1 - lambda) * benign`.
pub fn mixup_scene<T: Real>(benign: &Scene<T>, adversarial: &Scene<T>, lambda: T) -> Result<Scene<T>> {
    let mismatch = |why: &str| Err(Error::StructuralMismatch(why.to_string()));
    if benign.scene_id != adversarial.scene_id {
        return mismatch("scene ids differ");
    }
    if benign.target_id != adversarial.target_id || benign.agents.len() != adversarial.agents.len() {
        return mismatch("agent sets differ");
    }
    if benign.map != adversarial.map {
        return mismatch("maps differ");
    }
    for (a, b) in benign.agents.iter().zip(&adversarial.agents) {
        if a.id != b.id || a.future != b.future || a.lane_id != b.lane_id {
            return mismatch("agents differ");
        }
        if a.id != benign.target_id && a.history != b.history {
            return mismatch("a non-target history differs");
        }
    }
    let (hb, ha) = (&benign.target().history, &adversarial.target().history);
    if hb.len() != ha.len() {
        return mismatch("target history lengths differ");
    }
    let one = T::one();
    let mixed: Vec<T> = hb
        .to_flat()
        .iter()
        .zip(ha.to_flat())
        .map(|(&b, a)| lambda * a + (one - lambda) * b)
        .collect();
    Ok(benign.with_target_history(Trajectory::from_flat(TrajectoryRole::History, &mixed)))
}

/// Effective loss weights of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub traj: f64,
    pub semi: f64,
    pub reg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossValues {
    pub traj: f64,
    pub semi: f64,
    pub reg: f64,
    pub disc: f64,
    /// Weighted generator-side objective.
    pub total: f64,
}

impl LossValues {
    fn is_finite(&self) -> bool {
        [self.traj, self.semi, self.reg, self.disc, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Gradients of one sample for the generator-side groups (extractor,
/// encoder, decoder) and, when requested, the discriminators.
#[derive(Debug, Clone)]
pub struct SampleGrads<T> {
    pub losses: LossValues,
    pub generator: [Vec<T>; 3],
    pub discriminators: Option<[Vec<T>; 3]>,
    pub prediction: Trajectory<T>,
    pub latent: LatentState<T>,
}

impl<T: Real> SampleGrads<T> {
    fn is_finite(&self) -> bool {
        self.losses.is_finite()
            && self.generator.iter().flatten().all(|g| g.is_finite())
            && self
                .discriminators
                .iter()
                .flatten()
                .flatten()
                .all(|g| g.is_finite())
    }
}

fn collect_grads<T: Real>(g: &Gradients<T>, vars: &[Var]) -> Vec<T> {
    vars.iter().flat_map(|v| g.wrt(*v)).collect()
}

/// Tape nodes of the generator-side objective.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorLoss {
    pub total: Var,
    pub traj: Var,
    pub semi: Option<Var>,
    pub reg: Option<Var>,
}

/// `w.traj * traj + w.semi * semi + w.reg * reg` for the scene's current
/// target history. Terms with zero weight are left out.
pub fn generator_loss_on_tape<T: Real>(
    tape: &mut Tape<T>,
    model: &PredictorModel<T>,
    p: &crate::predictor::BoundParams,
    scene: &Scene<T>,
    labels: &SemanticLabels<T>,
    w: &LossWeights,
) -> (GeneratorLoss, crate::predictor::ForwardVars) {
    let history = tape.leaf(scene.target().history.to_flat());
    let f = model.forward_on_tape(tape, p, scene, history);
    let traj = losses::traj_on_tape(tape, f.future, &scene.target().future.to_flat());
    let mut total = tape.scale(traj, T::lit(w.traj));
    let semi = if w.semi > 0.0 {
        losses::semi_on_tape(tape, &f.latent, labels)
    } else {
        None
    };
    if let Some(s) = semi {
        let t = tape.scale(s, T::lit(w.semi));
        total = tape.add(total, t);
    }
    let reg = (w.reg > 0.0).then(|| losses::reg_on_tape(tape, model, p, &f.latent));
    if let Some(r) = reg {
        let t = tape.scale(r, T::lit(w.reg));
        total = tape.add(total, t);
    }
    (GeneratorLoss { total, traj, semi, reg }, f)
}

/// Forward and backward pass of one sample.
pub fn sample_gradients<T: Real>(
    model: &PredictorModel<T>,
    scene: &Scene<T>,
    labels: &SemanticLabels<T>,
    w: &LossWeights,
    prior_samples: Option<&[Vec<T>; 3]>,
) -> SampleGrads<T> {
    let mut tape = Tape::new();
    let p = model.bind(&mut tape);
    let (loss, f) = generator_loss_on_tape(&mut tape, model, &p, scene, labels, w);
    let g = tape.backward(loss.total);
    let generator = [
        collect_grads(&g, &p.extractor),
        collect_grads(&g, &p.encoder),
        collect_grads(&g, &p.decoder),
    ];
    let mut losses = LossValues {
        traj: tape.scalar(loss.traj).as_f64(),
        semi: loss.semi.map_or(0.0, |v| tape.scalar(v).as_f64()),
        reg: loss.reg.map_or(0.0, |v| tape.scalar(v).as_f64()),
        disc: 0.0,
        total: tape.scalar(loss.total).as_f64(),
    };
    let discriminators = prior_samples.map(|s| {
        let d = losses::disc_on_tape(&mut tape, model, &p, &f.latent, s);
        losses.disc = tape.scalar(d).as_f64();
        let gd = tape.backward(d);
        [
            collect_grads(&gd, &p.discriminators[0]),
            collect_grads(&gd, &p.discriminators[1]),
            collect_grads(&gd, &p.discriminators[2]),
        ]
    });
    SampleGrads {
        losses,
        generator,
        discriminators,
        prediction: Trajectory::from_flat(TrajectoryRole::Future, tape.value(f.future)),
        latent: read_latent(&tape, &f.latent),
    }
}

/// Mutable training state shared by all steps of a run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub optimizer: Optimizer,
    pub prior: PriorSpec,
    rng: ChaCha8Rng,
    pub global_step: u64,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig, prior: PriorSpec) -> Self {
        Self {
            optimizer: Optimizer::new(cfg.optimizer, 6),
            prior,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            global_step: 0,
        }
    }

    fn prior_samples<T: Real>(&mut self) -> [Vec<T>; 3] {
        LatentGroup::ALL.map(|g| self.prior.sample_with(g, &mut self.rng))
    }
}

/// Applies averaged gradients. Returns false, leaving the model untouched,
/// when the update would produce non-finite parameters.
fn apply_update<T: Real>(
    model: &mut PredictorModel<T>,
    state: &mut TrainState,
    cfg: &TrainConfig,
    generator: &[Vec<T>; 3],
    discriminators: Option<&[Vec<T>; 3]>,
    lr: f64,
    disc_lr: f64,
) -> bool {
    let backup = model.clone();
    let opt_backup = state.optimizer.clone();
    {
        let groups = [&mut model.extractor, &mut model.encoder, &mut model.decoder];
        for (i, (g, grad)) in groups.into_iter().zip(generator).enumerate() {
            state.optimizer.step(i, g, grad, lr, cfg.grad_clip);
        }
    }
    if let Some(d) = discriminators {
        for (i, grad) in d.iter().enumerate() {
            // ascent on the discriminator objective
            let neg: Vec<T> = grad.iter().map(|v| -*v).collect();
            state
                .optimizer
                .step(3 + i, &mut model.discriminators[i], &neg, disc_lr, cfg.grad_clip);
        }
    }
    if model.is_finite() {
        true
    } else {
        *model = backup;
        state.optimizer = opt_backup;
        false
    }
}

/// What happened to one sample of the adversarial phase.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub scene_id: u64,
    pub benign_objective: f64,
    pub attacked_objective: f64,
    /// Error compared against the threshold.
    pub gate_error: f64,
    pub success: bool,
    pub reference_intent: Intent,
    pub attacked_intent: Intent,
    pub flipped: bool,
    /// Weight applied to the semi-supervised loss (0 when disabled).
    pub semi_weight: f64,
    pub updated: bool,
    pub aborted: bool,
    pub mixup: bool,
    pub losses: LossValues,
    pub fingerprint_before: u64,
    pub fingerprint_after: u64,
}

/// One pass of the adversarial training loop for a single scene.
#[allow(clippy::too_many_arguments)]
pub fn adversarial_training_step<T: Real>(
    model: &mut PredictorModel<T>,
    scene: &Scene<T>,
    labels: &SemanticLabels<T>,
    kind: AttackType,
    cfg: &TrainConfig,
    atk_cfg: &AttackConfig,
    state: &mut TrainState,
    lr: f64,
) -> Result<StepRecord> {
    let fingerprint_before = model.fingerprint();
    let mut atk = atk_cfg.clone();
    atk.seed = atk_cfg.seed.wrapping_add(state.global_step);
    state.global_step += 1;

    let res = pgd_attack(&*model, scene, kind, &atk)?;
    let adv_scene = res.adversarial_scene(scene);

    let reference_intent = match labels.lateral_intent {
        Some(i) => i,
        None => model.predict(scene).1.intent(),
    };
    let samples = state.prior_samples::<T>();

    // losses at the adversarial input; the prediction doubles as the gate
    // input
    let base = LossWeights {
        traj: cfg.lambda_traj,
        semi: cfg.semi_weight(),
        reg: cfg.reg_weight(),
    };
    let probe = sample_gradients(&*model, &adv_scene, labels, &base, None);
    let truth = &scene.target().future;
    let gate_error = match cfg.gate {
        GateMetric::Ade => ade(&probe.prediction, truth)?,
        GateMetric::Objective => attack_objective(&probe.prediction, truth, kind)?,
    }
    .as_f64();
    let attacked_intent = probe.latent.intent();
    let success = crate::attack::is_successful(res.benign_objective.as_f64(), gate_error, cfg.success_threshold);
    let flipped = attacked_intent != reference_intent;
    let semi_weight = if flipped {
        cfg.semi_weight() * cfg.lambda_semi_boost
    } else {
        cfg.semi_weight()
    };

    let mut record = StepRecord {
        scene_id: scene.scene_id,
        benign_objective: res.benign_objective.as_f64(),
        attacked_objective: res.objective_value.as_f64(),
        gate_error,
        success,
        reference_intent,
        attacked_intent,
        flipped,
        semi_weight,
        updated: false,
        aborted: false,
        mixup: false,
        losses: probe.losses,
        fingerprint_before,
        fingerprint_after: fingerprint_before,
    };
    if !success {
        return Ok(record);
    }

    let weights = LossWeights {
        semi: semi_weight,
        ..base
    };
    let grads = sample_gradients(
        &*model,
        &adv_scene,
        labels,
        &weights,
        cfg.reg_enabled.then_some(&samples),
    );
    record.losses = grads.losses;
    if !grads.is_finite() {
        record.aborted = true;
        return Ok(record);
    }
    if !apply_update(
        model,
        state,
        cfg,
        &grads.generator,
        grads.discriminators.as_ref(),
        lr,
        cfg.lr_at(cfg.disc_learning_rate, 0) * lr / cfg.learning_rate,
    ) {
        record.aborted = true;
        return Ok(record);
    }
    record.updated = true;

    if cfg.mixup_enabled {
        let lambda = match cfg.mixup_beta {
            Some(a) => Beta::new(a, a)
                .map_err(|e| Error::Config(e.to_string()))?
                .sample(&mut state.rng),
            None => cfg.mixup_lambda,
        };
        let mixed = mixup_scene(scene, &adv_scene, T::lit(lambda))?;
        let w = LossWeights {
            traj: cfg.lambda_traj,
            semi: 0.0,
            reg: 0.0,
        };
        let g = sample_gradients(&*model, &mixed, labels, &w, None);
        if g.is_finite() && apply_update(model, state, cfg, &g.generator, None, lr, lr) {
            record.mixup = true;
        }
    }
    record.fingerprint_after = model.fingerprint();
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Adversarial,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pretrain => "pretrain",
            Phase::Adversarial => "adversarial",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub phase: Phase,
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss_traj: f64,
    pub loss_semi: f64,
    pub loss_reg: f64,
    pub loss_disc: f64,
    pub samples: usize,
    pub updates: usize,
    pub skipped: usize,
    pub flipped: usize,
    pub aborted: usize,
    pub mixup_steps: usize,
    pub benign_ade: f64,
    /// Attacked ADE on the monitor scenes, in [`AttackType::EVAL`] order.
    pub attacked_ade: [f64; 3],
    /// Benign intention error on labelled monitor scenes (0 when none).
    pub intention_error: f64,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str = "phase,epoch,learning_rate,loss_traj,loss_semi,loss_reg,loss_disc,samples,updates,skipped,flipped,aborted,mixup_steps,benign_ade,attacked_ade_ade,attacked_ade_lat_right,attacked_ade_lon_forward,intention_error";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.phase,
            self.epoch,
            self.learning_rate,
            self.loss_traj,
            self.loss_semi,
            self.loss_reg,
            self.loss_disc,
            self.samples,
            self.updates,
            self.skipped,
            self.flipped,
            self.aborted,
            self.mixup_steps,
            self.benign_ade,
            self.attacked_ade[0],
            self.attacked_ade[1],
            self.attacked_ade[2],
            self.intention_error
        )
    }

    pub fn is_finite(&self) -> bool {
        [
            self.loss_traj,
            self.loss_semi,
            self.loss_reg,
            self.loss_disc,
            self.benign_ade,
            self.intention_error,
        ]
        .iter()
        .chain(&self.attacked_ade)
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub steps: Vec<StepRecord>,
    /// Scenes whose step was aborted on a non-finite loss.
    pub flagged: Vec<u64>,
    /// Adversarial epoch with the lowest monitored attacked ADE.
    pub best_epoch: Option<usize>,
}

impl TrainReport {
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from(EpochMetrics::CSV_HEADER);
        s.push('\n');
        for e in &self.epochs {
            s.push_str(&e.csv_row());
            s.push('\n');
        }
        s
    }
}

pub struct TrainOutcome<T> {
    pub model: PredictorModel<T>,
    /// Lowest monitored attacked ADE under the training attack; equals the
    /// final model when there were no adversarial epochs.
    pub best: PredictorModel<T>,
    pub report: TrainReport,
}

/// Labels and lateral-prior counts for a scene set.
pub fn label_scenes<T: Real>(scenes: &[Scene<T>]) -> Vec<SemanticLabels<T>> {
    scenes.iter().map(semantic_labels).collect()
}

fn prior_for<T: Real>(model: &PredictorModel<T>, labels: &[SemanticLabels<T>], cfg: &TrainConfig) -> PriorSpec {
    let spec = PriorSpec::new(model.config.latent_other_width);
    if cfg.lat_prior_from_labels {
        let mut counts = [0usize; 3];
        for l in labels {
            if let Some(i) = l.lateral_intent {
                counts[i.index()] += 1;
            }
        }
        spec.with_lat_counts(counts)
    } else {
        spec
    }
}

struct EpochAcc {
    m: EpochMetrics,
}

impl EpochAcc {
    fn new(phase: Phase, epoch: usize, lr: f64) -> Self {
        Self {
            m: EpochMetrics {
                phase,
                epoch,
                learning_rate: lr,
                loss_traj: 0.0,
                loss_semi: 0.0,
                loss_reg: 0.0,
                loss_disc: 0.0,
                samples: 0,
                updates: 0,
                skipped: 0,
                flipped: 0,
                aborted: 0,
                mixup_steps: 0,
                benign_ade: 0.0,
                attacked_ade: [0.0; 3],
                intention_error: 0.0,
            },
        }
    }

    fn add_losses(&mut self, l: &LossValues) {
        self.m.loss_traj += l.traj;
        self.m.loss_semi += l.semi;
        self.m.loss_reg += l.reg;
        self.m.loss_disc += l.disc;
        self.m.samples += 1;
    }

    fn finish<T: Real>(
        mut self,
        model: &PredictorModel<T>,
        monitor: &[Scene<T>],
        atk_cfg: &AttackConfig,
    ) -> Result<EpochMetrics> {
        let n = self.m.samples.max(1) as f64;
        self.m.loss_traj /= n;
        self.m.loss_semi /= n;
        self.m.loss_reg /= n;
        self.m.loss_disc /= n;
        if !monitor.is_empty() {
            let benign = summarize(&evaluate_set(model, monitor, None)?);
            self.m.benign_ade = benign.benign_ade;
            self.m.intention_error = benign.benign_intent_error.unwrap_or(0.0);
            for (i, kind) in AttackType::EVAL.into_iter().enumerate() {
                let s = summarize(&evaluate_set(model, monitor, Some((kind, atk_cfg)))?);
                self.m.attacked_ade[i] = s.attacked_ade.unwrap_or(f64::NAN);
            }
        }
        Ok(self.m)
    }
}

fn ensure_finite<T: Real>(model: &PredictorModel<T>) -> Result<()> {
    if model.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("model parameters".into()))
    }
}

/// Benign minibatch training on trajectory, semi-supervised and
/// regularization losses, with discriminator updates when regularization is
/// on.
pub fn pretrain_epochs<T: Real>(
    model: &mut PredictorModel<T>,
    scenes: &[Scene<T>],
    labels: &[SemanticLabels<T>],
    cfg: &TrainConfig,
    atk_cfg: &AttackConfig,
    state: &mut TrainState,
    report: &mut TrainReport,
) -> Result<()> {
    let monitor = &scenes[..cfg.monitor_scenes.min(scenes.len())];
    let w = LossWeights {
        traj: cfg.lambda_traj,
        semi: cfg.semi_weight(),
        reg: cfg.reg_weight(),
    };
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    for epoch in 0..cfg.pretrain_epochs {
        let lr = cfg.lr_at(cfg.learning_rate, epoch);
        let disc_lr = cfg.lr_at(cfg.disc_learning_rate, epoch);
        order.shuffle(&mut state.rng);
        let mut acc = EpochAcc::new(Phase::Pretrain, epoch, lr);
        for batch in order.chunks(cfg.batch_size) {
            let samples: Vec<[Vec<T>; 3]> = batch.iter().map(|_| state.prior_samples()).collect();
            let grads: Vec<SampleGrads<T>> = {
                use rayon::prelude::*;
                let m = &*model;
                batch
                    .par_iter()
                    .zip(samples.par_iter())
                    .map(|(&i, s)| sample_gradients(m, &scenes[i], &labels[i], &w, cfg.reg_enabled.then_some(s)))
                    .collect()
            };
            let finite: Vec<&SampleGrads<T>> = grads.iter().filter(|g| g.is_finite()).collect();
            for (g, &i) in grads.iter().zip(batch) {
                if g.is_finite() {
                    acc.add_losses(&g.losses);
                } else {
                    acc.m.aborted += 1;
                    report.flagged.push(scenes[i].scene_id);
                }
            }
            if finite.is_empty() {
                continue;
            }
            let k = T::from_usize(finite.len()).expect("count fits scalar");
            let avg = |pick: &dyn Fn(&SampleGrads<T>) -> &Vec<T>| -> Vec<T> {
                let mut out = vec![T::zero(); pick(finite[0]).len()];
                for g in &finite {
                    for (o, v) in out.iter_mut().zip(pick(g)) {
                        *o += *v;
                    }
                }
                out.iter_mut().for_each(|o| *o /= k);
                out
            };
            let generator = [
                avg(&|g| &g.generator[0]),
                avg(&|g| &g.generator[1]),
                avg(&|g| &g.generator[2]),
            ];
            let disc = cfg.reg_enabled.then(|| {
                [0, 1, 2].map(|j| avg(&|g| &g.discriminators.as_ref().expect("requested")[j]))
            });
            if apply_update(model, state, cfg, &generator, disc.as_ref(), lr, disc_lr) {
                acc.m.updates += 1;
            } else {
                acc.m.aborted += 1;
            }
        }
        ensure_finite(model)?;
        report.epochs.push(acc.finish(model, monitor, atk_cfg)?);
    }
    Ok(())
}

/// Benign pre-training only.
pub fn pretrain<T: Real>(
    model: PredictorModel<T>,
    scenes: &[Scene<T>],
    cfg: &TrainConfig,
    atk_cfg: &AttackConfig,
) -> Result<TrainOutcome<T>> {
    let cfg = TrainConfig {
        epochs: 0,
        ..cfg.clone()
    };
    train(model, scenes, AttackType::Ade, &cfg, atk_cfg)
}

/// Benign pre-training followed by adversarial epochs.
pub fn train<T: Real>(
    mut model: PredictorModel<T>,
    scenes: &[Scene<T>],
    kind: AttackType,
    cfg: &TrainConfig,
    atk_cfg: &AttackConfig,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    atk_cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::EmptyInput);
    }
    ensure_finite(&model)?;
    let labels = label_scenes(scenes);
    let mut state = TrainState::new(cfg, prior_for(&model, &labels, cfg));
    let mut report = TrainReport::default();
    pretrain_epochs(&mut model, scenes, &labels, cfg, atk_cfg, &mut state, &mut report)?;

    let monitor = &scenes[..cfg.monitor_scenes.min(scenes.len())];
    let kind_slot = AttackType::EVAL.iter().position(|k| *k == kind);
    let mut best = model.clone();
    let mut best_score = f64::INFINITY;
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(cfg.learning_rate, epoch);
        order.shuffle(&mut state.rng);
        let mut acc = EpochAcc::new(Phase::Adversarial, epoch, lr);
        for &i in &order {
            let rec = adversarial_training_step(
                &mut model, &scenes[i], &labels[i], kind, cfg, atk_cfg, &mut state, lr,
            )?;
            acc.add_losses(&rec.losses);
            acc.m.updates += usize::from(rec.updated);
            acc.m.skipped += usize::from(!rec.success);
            acc.m.flipped += usize::from(rec.success && rec.flipped);
            acc.m.aborted += usize::from(rec.aborted);
            acc.m.mixup_steps += usize::from(rec.mixup);
            if rec.aborted {
                report.flagged.push(rec.scene_id);
            }
            report.steps.push(rec);
        }
        ensure_finite(&model)?;
        let m = acc.finish(&model, monitor, atk_cfg)?;
        let score = match kind_slot {
            Some(s) => m.attacked_ade[s],
            None => m.attacked_ade[0],
        };
        if score < best_score || report.best_epoch.is_none() {
            best_score = score;
            best = model.clone();
            report.best_epoch = Some(epoch);
        }
        report.epochs.push(m);
    }
    if cfg.epochs == 0 {
        best = model.clone();
    }
    Ok(TrainOutcome {
        model,
        best,
        report,
    })
}
