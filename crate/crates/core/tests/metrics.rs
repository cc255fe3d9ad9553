use proptest::prelude::*;
use ssat::metrics::{ade, direction_frame, directional_error, directional_errors_per_frame, Axis};
use ssat::scenario::{Trajectory, TrajectoryRole, Waypoint};

fn traj(points: &[(f64, f64)]) -> Trajectory<f64> {
    Trajectory::new(
        TrajectoryRole::Future,
        points.iter().map(|&(x, y)| Waypoint::new(x, y)).collect(),
    )
}

// Truth built from bounded steps of at least 0.1 m so every frame has a heading.
fn truth_and_pred() -> impl Strategy<Value = (Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            (-50.0..50.0f64, -50.0..50.0f64),
            prop::collection::vec((0.1..3.0f64, -std::f64::consts::PI..std::f64::consts::PI), n - 1),
            prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), n),
        )
            .prop_map(|(start, steps, offsets)| {
                let mut truth = vec![start];
                for (len, ang) in steps {
                    let &(x, y) = truth.last().unwrap();
                    truth.push((x + len * ang.cos(), y + len * ang.sin()));
                }
                let pred = truth.iter().zip(&offsets).map(|(s, o)| (s.0 + o.0, s.1 + o.1)).collect();
                (truth, pred)
            })
    })
}

/// Rotates the error into the heading frame with an explicit matrix R(-theta);
/// row 0 is forward, row 1 is left, so right-positive lateral is -row 1.
fn oracle(truth: &[(f64, f64)], pred: &[(f64, f64)]) -> (f64, f64) {
    let n = truth.len();
    let (mut lon, mut lat) = (0.0, 0.0);
    for a in 0..n {
        let i = a.min(n - 2);
        let theta = (truth[i + 1].1 - truth[i].1).atan2(truth[i + 1].0 - truth[i].0);
        let r = [[theta.cos(), theta.sin()], [-theta.sin(), theta.cos()]];
        let e = [pred[a].0 - truth[a].0, pred[a].1 - truth[a].1];
        lon += r[0][0] * e[0] + r[0][1] * e[1];
        lat -= r[1][0] * e[0] + r[1][1] * e[1];
    }
    (lon / n as f64, lat / n as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn directional_error_matches_rotation_oracle((truth, pred) in truth_and_pred()) {
        let (t, p) = (traj(&truth), traj(&pred));
        let (lon, lat) = oracle(&truth, &pred);
        prop_assert!((directional_error(&p, &t, Axis::Longitudinal).unwrap() - lon).abs() < 1e-9);
        prop_assert!((directional_error(&p, &t, Axis::Lateral).unwrap() - lat).abs() < 1e-9);
    }

    #[test]
    fn per_frame_components_recover_distance((truth, pred) in truth_and_pred()) {
        let (t, p) = (traj(&truth), traj(&pred));
        let lat = directional_errors_per_frame(&p, &t, Axis::Lateral).unwrap();
        let lon = directional_errors_per_frame(&p, &t, Axis::Longitudinal).unwrap();
        for i in 0..truth.len() {
            let d2 = (pred[i].0 - truth[i].0).powi(2) + (pred[i].1 - truth[i].1).powi(2);
            prop_assert!((lat[i] * lat[i] + lon[i] * lon[i] - d2).abs() < 1e-9);
        }
    }

    #[test]
    fn ade_is_symmetric_and_translation_invariant(
        (truth, pred) in truth_and_pred(),
        shift in (-1e3..1e3f64, -1e3..1e3f64),
    ) {
        let (t, p) = (traj(&truth), traj(&pred));
        let base = ade(&p, &t).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert_eq!(base, ade(&t, &p).unwrap());
        let mv = |v: &[(f64, f64)]| traj(&v.iter().map(|&(x, y)| (x + shift.0, y + shift.1)).collect::<Vec<_>>());
        prop_assert!((ade(&mv(&pred), &mv(&truth)).unwrap() - base).abs() < 1e-12 * (1.0 + shift.0.abs() + shift.1.abs()));
    }

    #[test]
    fn frames_are_orthonormal(a in (-10.0..10.0f64, -10.0..10.0f64), d in (0.01..5.0f64, -3.2..3.2f64)) {
        let s0 = Waypoint::new(a.0, a.1);
        let s1 = Waypoint::new(a.0 + d.0 * d.1.cos(), a.1 + d.0 * d.1.sin());
        let f = direction_frame(s0, s1).unwrap();
        prop_assert!((f.u_lon.norm() - 1.0).abs() < 1e-12);
        prop_assert!((f.u_lat.norm() - 1.0).abs() < 1e-12);
        prop_assert!(f.u_lon.dot(f.u_lat).abs() < 1e-12);
        // right-handed driver frame: lateral is lon rotated clockwise
        prop_assert!((f.u_lon.x * f.u_lat.y - f.u_lon.y * f.u_lat.x + 1.0).abs() < 1e-12);
    }
}
