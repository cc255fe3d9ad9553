//! Ground-truth semantic labels: time headway and lateral intention.

use crate::scalar::Real;

use super::types::{Intent, Scene, SemanticLabels, Waypoint, DT, HISTORY_LEN};

/// Thresholds used by the labelers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    /// Front-vehicle search range along the target heading, m.
    pub sensing_range: f64,
    /// Below this target speed the headway is undefined, m/s.
    pub min_speed: f64,
    /// Lateral offset accepted as "same lane" when lane ids are unavailable, m.
    pub lane_half_width: f64,
    /// Net lateral displacement marking a left/right maneuver, m.
    pub intent_min_offset: f64,
    /// Largest net lateral displacement still labeled forward, m.
    pub forward_max_offset: f64,
    /// Time the maneuver offset must be held at the end of the future, s.
    pub hold_time: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            sensing_range: 50.0,
            min_speed: 0.5,
            lane_half_width: 1.75,
            intent_min_offset: 1.0,
            forward_max_offset: 0.3,
            hold_time: 1.0,
        }
    }
}

/// Both labels with the default thresholds.
pub fn semantic_labels<T: Real>(scene: &Scene<T>) -> SemanticLabels<T> {
    let cfg = LabelConfig::default();
    SemanticLabels {
        headway_s: time_headway_with(scene, &cfg),
        lateral_intent: lateral_intention_with(scene, &cfg),
    }
}

pub fn compute_time_headway<T: Real>(scene: &Scene<T>) -> Option<T> {
    time_headway_with(scene, &LabelConfig::default())
}

/// Longitudinal gap to the nearest front agent in the target's lane divided by
/// the target's speed at the last observed frame.
pub fn time_headway_with<T: Real>(scene: &Scene<T>, cfg: &LabelConfig) -> Option<T> {
    let target = scene.target();
    let h = &target.history.points;
    let (last, prev) = (h[HISTORY_LEN - 1], h[HISTORY_LEN - 2]);
    let step = last.sub(prev);
    let speed = step.norm() / T::lit(DT);
    if !(speed >= T::lit(cfg.min_speed)) {
        return None;
    }
    let u_lon = step.scale(T::one() / step.norm());
    let u_lat = Waypoint::new(u_lon.y, -u_lon.x);

    let gap = scene
        .neighbors()
        .filter(|a| match (target.lane_id, a.lane_id) {
            (Some(t), Some(o)) => t == o,
            (Some(_), None) => false,
            (None, _) => {
                let rel = a.history.last().sub(last);
                rel.dot(u_lat).abs() < T::lit(cfg.lane_half_width)
            }
        })
        .map(|a| a.history.last().sub(last).dot(u_lon))
        .filter(|&g| g > T::zero() && g <= T::lit(cfg.sensing_range))
        .fold(None, |best: Option<T>, g| Some(best.map_or(g, |b| b.min(g))))?;

    let headway = gap / speed;
    (headway > T::zero() && headway.is_finite()).then_some(headway)
}

pub fn label_lateral_intention<T: Real>(scene: &Scene<T>) -> Option<Intent> {
    lateral_intention_with(scene, &LabelConfig::default())
}

/// Heading of the early part of the history, falling back to the first
/// moving consecutive pair of the whole trajectory.
fn initial_heading<T: Real>(scene: &Scene<T>) -> Option<Waypoint<T>> {
    let target = scene.target();
    let h = &target.history.points;
    let chord = h[HISTORY_LEN / 2 - 1].sub(h[0]);
    let eps = T::lit(1e-9);
    if chord.norm() > eps {
        return Some(chord.scale(T::one() / chord.norm()));
    }
    h.iter()
        .chain(&target.future.points)
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[1].sub(*w[0]))
        .find(|d| d.norm() > eps)
        .map(|d| d.scale(T::one() / d.norm()))
}

/// Lateral class of the target's future: signed displacement (right-positive)
/// relative to the last observed position, measured across the initial
/// heading.
pub fn lateral_intention_with<T: Real>(scene: &Scene<T>, cfg: &LabelConfig) -> Option<Intent> {
    let target = scene.target();
    let u_lon = initial_heading(scene)?;
    let u_lat = Waypoint::new(u_lon.y, -u_lon.x);
    let anchor = target.history.last();
    let offsets: Vec<T> = target
        .future
        .points
        .iter()
        .map(|p| p.sub(anchor).dot(u_lat))
        .collect();
    let net = *offsets.last()?;

    let hold = ((cfg.hold_time / DT).round() as usize).clamp(1, offsets.len());
    let d_min = T::lit(cfg.intent_min_offset);
    let held = offsets[offsets.len() - hold..]
        .iter()
        .all(|&d| d.abs() >= d_min && d.signum() == net.signum());
    if net.abs() >= d_min && held {
        return Some(if net > T::zero() {
            Intent::Right
        } else {
            Intent::Left
        });
    }
    (net.abs() <= T::lit(cfg.forward_max_offset)).then_some(Intent::Forward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::types::{Agent, MapContext, Trajectory, TrajectoryRole, FUTURE_LEN};

    fn straight_agent(id: u64, x0: f64, speed: f64, lane: Option<u64>) -> Agent<f64> {
        let pt = |i: usize| Waypoint::new(x0 + speed * DT * (i as f64 - 19.0), 0.0);
        Agent {
            id,
            history: Trajectory::new(TrajectoryRole::History, (0..HISTORY_LEN).map(pt).collect()),
            future: Trajectory::new(
                TrajectoryRole::Future,
                (HISTORY_LEN..HISTORY_LEN + FUTURE_LEN).map(pt).collect(),
            ),
            lane_id: lane,
        }
    }

    fn scene(agents: Vec<Agent<f64>>) -> Scene<f64> {
        Scene {
            scene_id: 0,
            agents,
            target_id: 1,
            map: MapContext::default(),
        }
    }

    /// Target moving along +x whose future drifts laterally to `net` (left is +y).
    fn lateral_scene(net_right: f64) -> Scene<f64> {
        let mut target = straight_agent(1, 0.0, 10.0, Some(1));
        for (k, p) in target.future.points.iter_mut().enumerate() {
            let frac = ((k + 1) as f64 / 10.0).min(1.0);
            p.y = -net_right * frac;
        }
        scene(vec![target])
    }

    #[test]
    fn headway_is_gap_over_speed() {
        let s = scene(vec![
            straight_agent(1, 0.0, 8.0, Some(1)),
            straight_agent(2, 12.0, 8.0, Some(1)),
        ]);
        let h = compute_time_headway(&s).unwrap();
        assert!((h - 1.5).abs() < 1e-9, "{h}");
    }

    #[test]
    fn headway_absent_without_front_agent() {
        let s = scene(vec![
            straight_agent(1, 0.0, 8.0, Some(1)),
            straight_agent(2, -10.0, 8.0, Some(1)),
            straight_agent(3, 10.0, 8.0, Some(2)),
        ]);
        assert_eq!(compute_time_headway(&s), None);
    }

    #[test]
    fn headway_absent_at_low_speed() {
        let s = scene(vec![
            straight_agent(1, 0.0, 0.2, Some(1)),
            straight_agent(2, 30.0, 0.2, Some(1)),
        ]);
        assert_eq!(compute_time_headway(&s), None);
    }

    #[test]
    fn headway_geometric_lane_test_without_lane_ids() {
        let s = scene(vec![
            straight_agent(1, 0.0, 10.0, None),
            straight_agent(2, 25.0, 10.0, None),
        ]);
        assert!((compute_time_headway(&s).unwrap() - 2.5).abs() < 1e-9);
    }

    #[test]
    fn headway_ignores_agents_beyond_sensing_range() {
        let s = scene(vec![
            straight_agent(1, 0.0, 10.0, Some(1)),
            straight_agent(2, 60.0, 10.0, Some(1)),
        ]);
        assert_eq!(compute_time_headway(&s), None);
    }

    #[test]
    fn intention_thresholds() {
        assert_eq!(label_lateral_intention(&lateral_scene(2.5)), Some(Intent::Right));
        assert_eq!(label_lateral_intention(&lateral_scene(-2.5)), Some(Intent::Left));
        assert_eq!(label_lateral_intention(&lateral_scene(0.1)), Some(Intent::Forward));
        assert_eq!(label_lateral_intention(&lateral_scene(0.6)), None);
    }

    #[test]
    fn intention_requires_sustained_offset() {
        let mut s = lateral_scene(2.5);
        // offset reached only in the final two frames
        let t = &mut s.agents[0].future.points;
        for (k, p) in t.iter_mut().enumerate() {
            p.y = if k >= FUTURE_LEN - 2 { -2.5 } else { 0.0 };
        }
        assert_eq!(label_lateral_intention(&s), None);
    }

    #[test]
    fn stationary_target_has_no_intention() {
        let s = scene(vec![straight_agent(1, 0.0, 0.0, None)]);
        assert_eq!(label_lateral_intention(&s), None);
    }
}
