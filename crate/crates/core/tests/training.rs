use ssat::attack::{AttackConfig, AttackType};
use ssat::autodiff::Tape;
use ssat::predictor::model::LatentVars;
use ssat::predictor::{LatentGroup, ModelConfig, PredictorModel, PriorSpec};
use ssat::scenario::{generate_dataset, semantic_labels, Scene, TemplateMix};
use ssat::training::losses::disc_on_tape;
use ssat::training::{
    adversarial_training_step, pretrain, train, OptimizerKind, TrainConfig, TrainState,
};

fn scenes(n: usize, seed: u64) -> Vec<Scene<f64>> {
    generate_dataset(n, &TemplateMix::default(), seed)
        .into_iter()
        .map(|(_, s)| s)
        .collect()
}

fn toy() -> PredictorModel<f64> {
    PredictorModel::new(ModelConfig::tiny()).unwrap()
}

fn quick_cfg() -> TrainConfig {
    TrainConfig {
        optimizer: OptimizerKind::Adam,
        learning_rate: 3e-3,
        disc_learning_rate: 3e-3,
        pretrain_epochs: 1,
        epochs: 1,
        batch_size: 4,
        monitor_scenes: 4,
        ..TrainConfig::default()
    }
}

fn short_attack() -> AttackConfig {
    AttackConfig {
        iterations: 4,
        step_size: 0.3,
        ..AttackConfig::default()
    }
}

/// Runs steps over `data`, checking every record against the model it saw.
fn run_steps(cfg: &TrainConfig, data: &[Scene<f64>]) -> Vec<ssat::training::StepRecord> {
    let mut model = toy();
    let mut state = TrainState::new(cfg, PriorSpec::new(3));
    let atk = short_attack();
    data.iter()
        .map(|scene| {
            let before = model.clone();
            let rec = adversarial_training_step(
                &mut model,
                scene,
                &semantic_labels(scene),
                AttackType::Ade,
                cfg,
                &atk,
                &mut state,
                cfg.learning_rate,
            )
            .unwrap();
            if !rec.success {
                assert_eq!(model, before, "scene {} failed the gate but changed the model", rec.scene_id);
                assert!(!rec.updated);
            } else if rec.updated {
                assert_ne!(model, before);
            }
            assert_eq!(rec.fingerprint_before, before.fingerprint());
            assert_eq!(rec.fingerprint_after, model.fingerprint());
            rec
        })
        .collect()
}

#[test]
fn failed_attacks_leave_parameters_untouched() {
    let data = scenes(30, 1);
    let cfg = TrainConfig {
        success_threshold: 1e9,
        ..quick_cfg()
    };
    let recs = run_steps(&cfg, &data);
    assert!(recs.iter().all(|r| !r.success && !r.updated));
}

#[test]
fn semi_weight_follows_the_flip() {
    let data = scenes(40, 2);
    let cfg = TrainConfig {
        success_threshold: 0.01,
        lambda_semi: 0.7,
        lambda_semi_boost: 5.0,
        ..quick_cfg()
    };
    let recs = run_steps(&cfg, &data);
    assert!(recs.iter().any(|r| r.updated));
    assert!(recs.iter().any(|r| r.flipped) && recs.iter().any(|r| !r.flipped));
    for r in &recs {
        let expected = if r.flipped { 0.7 * 5.0 } else { 0.7 };
        assert_eq!(r.semi_weight, expected);
        assert_eq!(r.flipped, r.attacked_intent != r.reference_intent);
    }

    let unsup = TrainConfig {
        semi_enabled: false,
        ..cfg
    };
    assert!(run_steps(&unsup, &data[..10]).iter().all(|r| r.semi_weight == 0.0));
}

#[test]
fn zero_adversarial_epochs_return_the_pretrained_model() {
    let data = scenes(12, 3);
    let cfg = TrainConfig {
        epochs: 0,
        ..quick_cfg()
    };
    let pre = pretrain(toy(), &data, &cfg, &short_attack()).unwrap();
    let out = train(toy(), &data, AttackType::Ade, &cfg, &short_attack()).unwrap();
    assert_eq!(out.model, pre.model);
    assert_eq!(out.best, out.model);
    assert!(out.report.steps.is_empty());
}

#[test]
fn seeded_runs_are_bit_identical() {
    let data = scenes(12, 4);
    let cfg = TrainConfig {
        success_threshold: 0.5,
        mixup_enabled: true,
        mixup_beta: Some(0.4),
        ..quick_cfg()
    };
    let a = train(toy(), &data, AttackType::Ade, &cfg, &short_attack()).unwrap();
    let b = train(toy(), &data, AttackType::Ade, &cfg, &short_attack()).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.model, b.model);
    assert_eq!(a.report.metrics_csv(), b.report.metrics_csv());
    assert!(a.report.epochs.iter().all(|e| e.is_finite()));
    assert_eq!(a.report.epochs.len(), 2);

    let other = TrainConfig { seed: 1, ..cfg };
    let c = train(toy(), &data, AttackType::Ade, &other, &short_attack()).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn adversarial_training_lowers_training_loss_signal() {
    let data = scenes(24, 5);
    let cfg = TrainConfig {
        pretrain_epochs: 3,
        epochs: 0,
        ..quick_cfg()
    };
    let out = pretrain(toy(), &data, &cfg, &short_attack()).unwrap();
    let e = &out.report.epochs;
    assert!(e.last().unwrap().loss_traj < e[0].loss_traj);
}

#[test]
fn discriminator_loss_does_not_reach_the_encoder() {
    let model = toy();
    let scene = &scenes(1, 6)[0];
    let mut tape = Tape::new();
    let p = model.bind(&mut tape);
    let h = tape.leaf(scene.target().history.to_flat());
    let f = model.forward_on_tape(&mut tape, &p, scene, h);
    let spec = PriorSpec::new(3);
    let samples = LatentGroup::ALL.map(|g| ssat::predictor::sample_prior::<f64>(&spec, g, 0));
    let lv = LatentVars { ..f.latent };
    let d = disc_on_tape(&mut tape, &model, &p, &lv, &samples);
    let g = tape.backward(d);
    for v in p.extractor.iter().chain(&p.encoder).chain(&p.decoder) {
        assert!(g.wrt(*v).iter().all(|x| *x == 0.0));
    }
    assert!(p.discriminators.iter().flatten().any(|v| g.wrt(*v).iter().any(|x| *x != 0.0)));
}

#[test]
fn mixup_adds_one_extra_update_per_successful_sample() {
    let data = scenes(16, 7);
    let cfg = TrainConfig {
        success_threshold: 0.01,
        mixup_enabled: true,
        ..quick_cfg()
    };
    let recs = run_steps(&cfg, &data);
    assert!(recs.iter().any(|r| r.mixup));
    assert!(recs.iter().all(|r| r.mixup == r.updated));
}
