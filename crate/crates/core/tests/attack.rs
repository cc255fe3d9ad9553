use proptest::prelude::*;
use ssat::attack::{attack_objective, pgd_attack, project_perturbation, AttackConfig, AttackStatus, AttackType};
use ssat::autodiff::{Tape, Var};
use ssat::predictor::{ModelConfig, PredictorModel, TrajectoryPredictor};
use ssat::scenario::{generate_scene, Scene, Template, FUTURE_LEN, HISTORY_LEN};

/// Copies the history into the first 20 predicted waypoints; the last 10
/// are fixed at the ground truth and ignore the history.
struct PassThrough;

impl TrajectoryPredictor<f64> for PassThrough {
    fn predict_on_tape(&self, tape: &mut Tape<f64>, scene: &Scene<f64>, history: Var) -> Var {
        let tail = scene.target().future.to_flat()[2 * HISTORY_LEN..].to_vec();
        let tail = tape.leaf(tail);
        tape.concat(&[history, tail])
    }
}

/// Ignores the history entirely.
struct Constant;

impl TrajectoryPredictor<f64> for Constant {
    fn predict_on_tape(&self, tape: &mut Tape<f64>, scene: &Scene<f64>, _history: Var) -> Var {
        let mut flat = scene.target().future.to_flat();
        flat.iter_mut().for_each(|v| *v += 0.5);
        tape.leaf(flat)
    }
}

fn deviations(scene: &Scene<f64>, adv: &[ssat::Waypoint]) -> Vec<f64> {
    scene.target().history.points.iter().zip(adv).map(|(b, a)| b.dist(*a)).collect()
}

#[test]
fn pass_through_saturates_every_waypoint() {
    let scene = generate_scene::<f64>(8, Template::StraightFollow);
    let res = pgd_attack(&PassThrough, &scene, AttackType::Ade, &AttackConfig::default()).unwrap();
    for d in deviations(&scene, &res.adv_history.points) {
        assert!((d - 1.0).abs() < 1e-9, "deviation {d}");
    }
    // each of the 20 history-driven output waypoints moves 1 m straight away
    // from its target; the other 10 cannot move
    let sensitivity = HISTORY_LEN as f64 / FUTURE_LEN as f64;
    let gain = res.objective_value - res.benign_objective;
    assert!((gain - 1.0 * sensitivity).abs() < 1e-9, "gain {gain}");
}

#[test]
fn constant_predictor_leaves_history_alone() {
    let scene = generate_scene::<f64>(9, Template::Turn);
    for kind in AttackType::EVAL {
        let res = pgd_attack(&Constant, &scene, kind, &AttackConfig::default()).unwrap();
        assert_eq!(res.adv_history, scene.target().history);
        assert_eq!(res.objective_value, res.benign_objective);
        assert!(!res.success);
        assert_eq!(res.status, AttackStatus::Completed);
    }
}

#[test]
fn zero_iterations_is_identity() {
    let model = PredictorModel::<f64>::new(ModelConfig::tiny()).unwrap();
    let scene = generate_scene::<f64>(3, Template::LaneChangeLeft);
    let cfg = AttackConfig {
        iterations: 0,
        ..AttackConfig::default()
    };
    let res = pgd_attack(&model, &scene, AttackType::Ade, &cfg).unwrap();
    assert_eq!(res.adv_history, scene.target().history);
    let (pred, _) = model.predict(&scene);
    let benign = attack_objective(&pred, &scene.target().future, AttackType::Ade).unwrap();
    assert_eq!(res.objective_value, benign);
    assert_eq!(res.iterations_run, 0);
}

#[test]
fn attack_is_pure_and_touches_only_the_target() {
    let model = PredictorModel::<f64>::new(ModelConfig::tiny()).unwrap();
    let scene = generate_scene::<f64>(5, Template::LaneChangeRight);
    let (m0, s0) = (model.clone(), scene.clone());
    let res = pgd_attack(&model, &scene, "lat-left".parse().unwrap(), &AttackConfig::default()).unwrap();
    assert_eq!(model, m0);
    assert_eq!(scene, s0);
    let adv = res.adversarial_scene(&scene);
    for (a, b) in adv.agents.iter().zip(&scene.agents) {
        if a.id == scene.target_id {
            assert_eq!(a.future, b.future);
        } else {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn random_start_is_seeded() {
    let model = PredictorModel::<f64>::new(ModelConfig::tiny()).unwrap();
    let scene = generate_scene::<f64>(6, Template::FreeFlow);
    let cfg = AttackConfig {
        random_start: true,
        seed: 4,
        ..AttackConfig::default()
    };
    let a = pgd_attack(&model, &scene, AttackType::Ade, &cfg).unwrap();
    let b = pgd_attack(&model, &scene, AttackType::Ade, &cfg).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_lands_in_the_ball(delta in prop::collection::vec(-20.0..20.0f64, 0..40), eps in 0.01..3.0f64) {
        let mut d = delta.clone();
        d.truncate(d.len() / 2 * 2);
        let before = d.clone();
        project_perturbation(&mut d, eps);
        for (p, q) in d.chunks(2).zip(before.chunks(2)) {
            let n = p[0].hypot(p[1]);
            let m = q[0].hypot(q[1]);
            prop_assert!(n <= eps + 1e-12);
            if m <= eps {
                prop_assert_eq!(p, q);
            } else {
                // radial: same direction, shrunk onto the circle
                prop_assert!((p[0] * q[1] - p[1] * q[0]).abs() < 1e-9 * m);
                prop_assert!((n - eps).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pgd_respects_budget_and_keeps_best(
        seed in 0u64..500,
        template in 0usize..5,
        kind in 0usize..5,
        eps in 0.1..2.0f64,
        step in 0.05..1.5f64,
        iterations in 0usize..8,
    ) {
        let model = PredictorModel::<f64>::new(ModelConfig { init_seed: seed, ..ModelConfig::tiny() }).unwrap();
        let scene = generate_scene::<f64>(seed, Template::ALL[template]);
        let kind: AttackType = ["ade", "lat-right", "lat-left", "lon-forward", "lon-backward"][kind].parse().unwrap();
        let cfg = AttackConfig { epsilon: eps, step_size: step, iterations, ..AttackConfig::default() };
        let res = pgd_attack(&model, &scene, kind, &cfg).unwrap();
        for d in deviations(&scene, &res.adv_history.points) {
            prop_assert!(d <= eps + 1e-9);
        }
        prop_assert!(res.objective_value >= res.benign_objective);
        let (pred, _) = model.predict(&res.adversarial_scene(&scene));
        let reported = attack_objective(&pred, &scene.target().future, kind).unwrap();
        prop_assert!((reported - res.objective_value).abs() <= 1e-12 * (1.0 + reported.abs()));
    }
}
