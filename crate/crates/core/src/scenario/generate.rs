//! Seeded synthetic driving scenes.
//!
//! Each template is built in a local frame where the target sits at the
//! origin at the last observed frame and drives along +x (left is +y), then
//! the whole scene is rotated by a random heading.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::error::{Error, Result};
use crate::predictor::prior::{HEADWAY_MU, HEADWAY_SIGMA};
use crate::scalar::Real;

use super::types::{
    Agent, Lane, MapContext, Scene, Trajectory, TrajectoryRole, Waypoint, DT, FUTURE_LEN,
    HISTORY_LEN,
};

const LANE_WIDTH: f64 = 3.5;
const LANE_SPACING: f64 = 2.0;
const LANE_BEHIND: f64 = 70.0;
const LANE_AHEAD: f64 = 90.0;
/// Distance between scene origins when a dataset is laid out on one map.
const SCENE_GRID: f64 = 1000.0;
const GRID_COLUMNS: u64 = 64;

const EGO_LANE: u64 = 1;
const LEFT_LANE: u64 = 2;
const RIGHT_LANE: u64 = 3;
const TURN_LANE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Template {
    StraightFollow,
    LaneChangeLeft,
    LaneChangeRight,
    Turn,
    FreeFlow,
}

impl Template {
    pub const ALL: [Template; 5] = [
        Template::StraightFollow,
        Template::LaneChangeLeft,
        Template::LaneChangeRight,
        Template::Turn,
        Template::FreeFlow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::StraightFollow => "straight-follow",
            Template::LaneChangeLeft => "lane-change-left",
            Template::LaneChangeRight => "lane-change-right",
            Template::Turn => "turn",
            Template::FreeFlow => "free-flow",
        }
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Template {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Template::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownTemplate(s.to_string()))
    }
}

/// Relative template frequencies for dataset generation.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateMix {
    weights: Vec<(Template, f64)>,
}

impl Default for TemplateMix {
    fn default() -> Self {
        Self {
            weights: vec![
                (Template::StraightFollow, 2.0),
                (Template::LaneChangeLeft, 1.0),
                (Template::LaneChangeRight, 1.0),
                (Template::Turn, 1.0),
                (Template::FreeFlow, 1.0),
            ],
        }
    }
}

impl TemplateMix {
    pub fn new(weights: Vec<(Template, f64)>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(Error::Config("template weights must be non-negative".into()));
        }
        if weights.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return Err(Error::Config("template weights sum to zero".into()));
        }
        Ok(Self { weights })
    }

    pub fn single(t: Template) -> Self {
        Self {
            weights: vec![(t, 1.0)],
        }
    }

    pub fn weights(&self) -> &[(Template, f64)] {
        &self.weights
    }

    fn pick(&self, rng: &mut impl Rng) -> Template {
        let total: f64 = self.weights.iter().map(|(_, w)| w).sum();
        let mut u = rng.random::<f64>() * total;
        for (t, w) in &self.weights {
            if u < *w {
                return *t;
            }
            u -= w;
        }
        self.weights.last().expect("non-empty mix").0
    }
}

impl fmt::Display for TemplateMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (t, w)) in self.weights.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{t}={w}")?;
        }
        Ok(())
    }
}

impl FromStr for TemplateMix {
    type Err = Error;

    /// `straight-follow=2,turn=1` or a bare comma list (unit weights).
    fn from_str(s: &str) -> Result<Self> {
        let weights = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|part| {
                let (name, w) = match part.split_once('=') {
                    Some((n, w)) => (
                        n.trim(),
                        w.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::Config(format!("bad weight in `{part}`")))?,
                    ),
                    None => (part.trim(), 1.0),
                };
                Ok((name.parse::<Template>()?, w))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights)
    }
}

pub fn generate_synthetic_scene<T: Real>(seed: u64, template: &str) -> Result<Scene<T>> {
    Ok(generate_scene(seed, template.parse()?))
}

/// Kinematics of one agent: arc length along a path plus a lateral offset.
struct Motion<'a> {
    path: &'a dyn Fn(f64) -> (f64, f64, f64),
    s0: f64,
    speed: f64,
    accel: f64,
    /// Extra acceleration applied only after the last observed frame.
    future_accel: f64,
    lateral: Box<dyn Fn(f64) -> f64 + 'a>,
}

impl Motion<'_> {
    fn position(&self, t: f64) -> (f64, f64) {
        let a = self.accel + if t > 0.0 { self.future_accel } else { 0.0 };
        let s = self.s0 + self.speed * t + 0.5 * a * t * t;
        let (x, y, heading) = (self.path)(s);
        let d = (self.lateral)(t);
        // lateral offset is left-positive in the template frame
        (x - d * heading.sin(), y + d * heading.cos())
    }

    fn sample(&self) -> Vec<(f64, f64)> {
        (0..HISTORY_LEN + FUTURE_LEN)
            .map(|i| self.position((i as f64 - (HISTORY_LEN - 1) as f64) * DT))
            .collect()
    }
}

fn straight_path(y: f64) -> impl Fn(f64) -> (f64, f64, f64) {
    move |s| (s, y, 0.0)
}

/// Straight approach up to `turn_at`, then a quarter circle of radius `radius`
/// (left for `dir = 1`, right for `dir = -1`), then straight again.
fn turn_path(turn_at: f64, radius: f64, dir: f64) -> impl Fn(f64) -> (f64, f64, f64) {
    move |s| {
        if s <= turn_at {
            return (s, 0.0, 0.0);
        }
        let arc = radius * FRAC_PI_2;
        let phi = ((s - turn_at) / radius).min(FRAC_PI_2);
        let x = turn_at + radius * phi.sin();
        let y = dir * radius * (1.0 - phi.cos());
        let rest = (s - turn_at - arc).max(0.0);
        let heading = dir * phi;
        (x + rest * heading.cos(), y + rest * heading.sin(), heading)
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

fn straight_lane(id: u64, y: f64) -> Lane<f64> {
    let n = ((LANE_BEHIND + LANE_AHEAD) / LANE_SPACING) as usize;
    Lane {
        id,
        points: (0..=n)
            .map(|i| Waypoint::new(-LANE_BEHIND + i as f64 * LANE_SPACING, y))
            .collect(),
        successor: None,
    }
}

fn sample_path(
    path: &dyn Fn(f64) -> (f64, f64, f64),
    from: f64,
    to: f64,
) -> Vec<Waypoint<f64>> {
    let n = ((to - from) / LANE_SPACING).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            let (x, y, _) = path(from + (to - from) * i as f64 / n as f64);
            Waypoint::new(x, y)
        })
        .collect()
}

struct Builder {
    rng: ChaCha8Rng,
    agents: Vec<Agent<f64>>,
    lanes: Vec<Lane<f64>>,
    next_id: u64,
}

impl Builder {
    fn push(&mut self, motion: &Motion<'_>, lane: Option<u64>) -> u64 {
        let pts: Vec<Waypoint<f64>> = motion
            .sample()
            .into_iter()
            .map(|(x, y)| Waypoint::new(x, y))
            .collect();
        let id = self.next_id;
        self.next_id += 1;
        self.agents.push(Agent {
            id,
            history: Trajectory::new(TrajectoryRole::History, pts[..HISTORY_LEN].to_vec()),
            future: Trajectory::new(TrajectoryRole::Future, pts[HISTORY_LEN..].to_vec()),
            lane_id: lane,
        });
        id
    }

    fn wobble(&mut self) -> Box<dyn Fn(f64) -> f64> {
        let amp = self.rng.random_range(0.0..0.03);
        let omega = self.rng.random_range(0.5..1.5);
        let phase = self.rng.random_range(0.0..2.0 * PI);
        Box::new(move |t| amp * (omega * t + phase).sin() - amp * phase.sin())
    }

    fn future_accel(&mut self) -> f64 {
        self.rng.random_range(-0.3..0.3)
    }

    /// Vehicles travelling straight in the given lanes.
    fn add_traffic(&mut self, lanes: &[(u64, f64)], count: usize) {
        for _ in 0..count {
            let (lane, y) = lanes[self.rng.random_range(0..lanes.len())];
            let path = straight_path(y);
            let motion = Motion {
                path: &path,
                s0: self.rng.random_range(-30.0..40.0),
                speed: self.rng.random_range(5.0..15.0),
                accel: self.rng.random_range(-0.3..0.3),
                future_accel: 0.0,
                lateral: Box::new(|_| 0.0),
            };
            self.push(&motion, Some(lane));
        }
    }
}

/// Builds one scene; identical `(seed, template)` yields an identical scene.
pub fn generate_scene<T: Real>(seed: u64, template: Template) -> Scene<T> {
    let rng = ChaCha8Rng::seed_from_u64(seed ^ ((template as u64) << 56));
    let mut b = Builder {
        rng,
        agents: Vec::new(),
        lanes: Vec::new(),
        next_id: 1,
    };
    let target_id = b.next_id;

    match template {
        Template::StraightFollow | Template::FreeFlow => {
            b.lanes.extend([
                straight_lane(EGO_LANE, 0.0),
                straight_lane(LEFT_LANE, LANE_WIDTH),
                straight_lane(RIGHT_LANE, -LANE_WIDTH),
            ]);
            let follow = template == Template::StraightFollow;
            let speed = if follow {
                b.rng.random_range(6.0..14.0)
            } else {
                b.rng.random_range(5.0..16.0)
            };
            let accel = if follow {
                b.rng.random_range(-0.5..0.5)
            } else {
                b.rng.random_range(-1.0..1.0)
            };
            let path = straight_path(0.0);
            let lateral = b.wobble();
            let future_accel = b.future_accel();
            b.push(
                &Motion {
                    path: &path,
                    s0: 0.0,
                    speed,
                    accel,
                    future_accel,
                    lateral,
                },
                Some(EGO_LANE),
            );
            if follow {
                let prior = LogNormal::new(HEADWAY_MU, HEADWAY_SIGMA).expect("valid prior");
                let lo = (6.0 / speed).max(0.5);
                let hi = (45.0 / speed).min(4.0);
                let headway: f64 = prior.sample(&mut b.rng);
                let gap = headway.clamp(lo, hi) * speed;
                let lead_speed = speed + b.rng.random_range(-1.0..1.0);
                let lead_accel = b.rng.random_range(-0.5..0.5);
                b.push(
                    &Motion {
                        path: &path,
                        s0: gap,
                        speed: lead_speed,
                        accel: lead_accel,
                        future_accel: 0.0,
                        lateral: Box::new(|_| 0.0),
                    },
                    Some(EGO_LANE),
                );
            }
            let n = b.rng.random_range(0..=3);
            b.add_traffic(&[(LEFT_LANE, LANE_WIDTH), (RIGHT_LANE, -LANE_WIDTH)], n);
        }
        Template::LaneChangeLeft | Template::LaneChangeRight => {
            b.lanes.extend([
                straight_lane(EGO_LANE, 0.0),
                straight_lane(LEFT_LANE, LANE_WIDTH),
                straight_lane(RIGHT_LANE, -LANE_WIDTH),
            ]);
            let dir = if template == Template::LaneChangeLeft {
                1.0
            } else {
                -1.0
            };
            let speed = b.rng.random_range(7.0..14.0);
            let accel = b.rng.random_range(-0.3..0.3);
            let start = b.rng.random_range(-0.8..-0.3);
            let duration = b.rng.random_range(2.5..3.5);
            let path = straight_path(0.0);
            let future_accel = b.future_accel();
            b.push(
                &Motion {
                    path: &path,
                    s0: 0.0,
                    speed,
                    accel,
                    future_accel,
                    lateral: Box::new(move |t| {
                        dir * LANE_WIDTH * (smoothstep((t - start) / duration)
                            - smoothstep((-1.9 - start) / duration))
                    }),
                },
                Some(EGO_LANE),
            );
            // slower lead vehicle ahead, the other adjacent lane occupied
            // alongside, the destination lane clear
            let lead_speed = speed - b.rng.random_range(2.0..4.0);
            let lead_gap = b.rng.random_range(12.0..25.0);
            b.push(
                &Motion {
                    path: &path,
                    s0: lead_gap,
                    speed: lead_speed,
                    accel: 0.0,
                    future_accel: 0.0,
                    lateral: Box::new(|_| 0.0),
                },
                Some(EGO_LANE),
            );
            let (blocked_id, blocked_y) = if dir > 0.0 {
                (RIGHT_LANE, -LANE_WIDTH)
            } else {
                (LEFT_LANE, LANE_WIDTH)
            };
            let side = straight_path(blocked_y);
            let side_s0 = b.rng.random_range(-8.0..8.0);
            let side_speed = speed + b.rng.random_range(-1.0..1.0);
            b.push(
                &Motion {
                    path: &side,
                    s0: side_s0,
                    speed: side_speed,
                    accel: 0.0,
                    future_accel: 0.0,
                    lateral: Box::new(|_| 0.0),
                },
                Some(blocked_id),
            );
            let n = b.rng.random_range(0..=2);
            b.add_traffic(&[(blocked_id, blocked_y)], n);
        }
        Template::Turn => {
            let dir = if b.rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let speed = b.rng.random_range(5.0..8.0);
            let accel = b.rng.random_range(-0.3..0.3);
            let turn_at = b.rng.random_range(0.0..0.5 * speed);
            let radius = b.rng.random_range(10.0..20.0);
            let path = turn_path(turn_at, radius, dir);
            let mut approach = sample_path(&path, -LANE_BEHIND, turn_at);
            if approach.len() < 2 {
                approach = vec![Waypoint::new(-LANE_BEHIND, 0.0), Waypoint::new(turn_at, 0.0)];
            }
            b.lanes.push(Lane {
                id: EGO_LANE,
                points: approach,
                successor: Some(TURN_LANE),
            });
            b.lanes.push(Lane {
                id: TURN_LANE,
                points: sample_path(&path, turn_at, turn_at + radius * FRAC_PI_2 + 40.0),
                successor: None,
            });
            // straight lane on the far side of the turn
            let (side_id, side_y) = if dir > 0.0 {
                (RIGHT_LANE, -LANE_WIDTH)
            } else {
                (LEFT_LANE, LANE_WIDTH)
            };
            b.lanes.push(straight_lane(side_id, side_y));
            let future_accel = b.future_accel();
            b.push(
                &Motion {
                    path: &path,
                    s0: 0.0,
                    speed,
                    accel,
                    future_accel,
                    lateral: Box::new(|_| 0.0),
                },
                Some(EGO_LANE),
            );
            let n = b.rng.random_range(0..=2);
            b.add_traffic(&[(side_id, side_y)], n);
        }
    }
    b.lanes.sort_by_key(|l| l.id);

    let heading = b.rng.random_range(0.0..2.0 * PI);
    let scene = Scene {
        scene_id: seed,
        agents: b.agents,
        target_id,
        map: MapContext { lanes: b.lanes },
    };
    transform_scene(&scene, heading, Waypoint::new(0.0, 0.0), 0)
}

/// Rotates by `heading`, translates by `offset` and shifts lane ids by
/// `lane_id_base`, converting to the requested scalar.
fn transform_scene<T: Real>(
    scene: &Scene<f64>,
    heading: f64,
    offset: Waypoint<f64>,
    lane_id_base: u64,
) -> Scene<T> {
    let (s, c) = heading.sin_cos();
    let tf = |p: &Waypoint<f64>| {
        Waypoint::new(
            T::lit(c * p.x - s * p.y + offset.x),
            T::lit(s * p.x + c * p.y + offset.y),
        )
    };
    let traj = |t: &Trajectory<f64>| Trajectory::new(t.role, t.points.iter().map(tf).collect());
    Scene {
        scene_id: scene.scene_id,
        target_id: scene.target_id,
        agents: scene
            .agents
            .iter()
            .map(|a| Agent {
                id: a.id,
                history: traj(&a.history),
                future: traj(&a.future),
                lane_id: a.lane_id.map(|l| l + lane_id_base),
            })
            .collect(),
        map: MapContext {
            lanes: scene
                .map
                .lanes
                .iter()
                .map(|l| Lane {
                    id: l.id + lane_id_base,
                    points: l.points.iter().map(tf).collect(),
                    successor: l.successor.map(|s| s + lane_id_base),
                })
                .collect(),
        },
    }
}

/// A generated dataset laid out on one shared map: scene `i` gets id `i`,
/// a distinct grid location and lane ids `10 * (i + 1) + k`.
pub fn generate_dataset<T: Real>(
    count: usize,
    mix: &TemplateMix,
    seed: u64,
) -> Vec<(Template, Scene<T>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count as u64)
        .map(|i| {
            let template = mix.pick(&mut rng);
            let scene_seed = rng.next_u64();
            let local: Scene<f64> = generate_scene(scene_seed, template);
            let offset = Waypoint::new(
                (i % GRID_COLUMNS) as f64 * SCENE_GRID,
                (i / GRID_COLUMNS) as f64 * SCENE_GRID,
            );
            let mut scene: Scene<T> = transform_scene(&local, 0.0, offset, 10 * (i + 1));
            scene.scene_id = i;
            (template, scene)
        })
        .collect()
}

/// Number of scenes per template.
pub fn template_counts<T>(data: &[(Template, Scene<T>)]) -> BTreeMap<Template, usize> {
    let mut counts = BTreeMap::new();
    for (t, _) in data {
        *counts.entry(*t).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::labels::{compute_time_headway, label_lateral_intention};
    use crate::scenario::types::Intent;

    fn lateral_future_span(scene: &Scene<f64>) -> f64 {
        let t = scene.target();
        let h = &t.history.points;
        let d = h[HISTORY_LEN - 1].sub(h[HISTORY_LEN - 2]);
        let u = d.scale(1.0 / d.norm());
        let lat = Waypoint::new(u.y, -u.x);
        let anchor = t.history.last();
        t.future
            .points
            .iter()
            .map(|p| p.sub(anchor).dot(lat).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn straight_follow_stays_in_lane() {
        let s: Scene<f64> = generate_synthetic_scene(7, "straight-follow").unwrap();
        s.validate().unwrap();
        assert!(lateral_future_span(&s) < 0.2);
    }

    #[test]
    fn generation_is_deterministic() {
        let a: Scene<f64> = generate_synthetic_scene(7, "straight-follow").unwrap();
        let b: Scene<f64> = generate_synthetic_scene(7, "straight-follow").unwrap();
        assert_eq!(a, b);
        let c: Scene<f64> = generate_synthetic_scene(8, "straight-follow").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unknown_template_is_rejected() {
        let err = generate_synthetic_scene::<f64>(1, "roundabout").unwrap_err();
        assert!(matches!(err, Error::UnknownTemplate(ref t) if t == "roundabout"));
    }

    #[test]
    fn lane_change_right_seed_three_is_labeled_right() {
        let s: Scene<f64> = generate_synthetic_scene(3, "lane-change-right").unwrap();
        assert_eq!(label_lateral_intention(&s), Some(Intent::Right));
    }

    #[test]
    fn labels_match_templates_over_many_seeds() {
        for seed in 0..100 {
            let r: Scene<f64> = generate_scene(seed, Template::LaneChangeRight);
            assert_eq!(label_lateral_intention(&r), Some(Intent::Right), "seed {seed}");
            let l: Scene<f64> = generate_scene(seed, Template::LaneChangeLeft);
            assert_eq!(label_lateral_intention(&l), Some(Intent::Left), "seed {seed}");
            let f: Scene<f64> = generate_scene(seed, Template::StraightFollow);
            assert_eq!(label_lateral_intention(&f), Some(Intent::Forward), "seed {seed}");
            assert!(compute_time_headway(&f).is_some(), "seed {seed}");
            let t: Scene<f64> = generate_scene(seed, Template::Turn);
            assert!(
                matches!(label_lateral_intention(&t), Some(Intent::Left | Intent::Right)),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn every_template_produces_valid_scenes() {
        for t in Template::ALL {
            for seed in 0..50 {
                let s: Scene<f64> = generate_scene(seed, t);
                s.validate().unwrap_or_else(|e| panic!("{t} seed {seed}: {e}"));
                let f: Scene<f32> = generate_scene(seed, t);
                f.validate().unwrap();
            }
        }
    }

    #[test]
    fn dataset_scenes_are_separated() {
        let data: Vec<(Template, Scene<f64>)> = generate_dataset(70, &TemplateMix::default(), 1);
        assert_eq!(data.len(), 70);
        let counts = template_counts(&data);
        assert_eq!(counts.values().sum::<usize>(), 70);
        assert_eq!(data[65].1.scene_id, 65);
        let a = data[0].1.target().history.last();
        let b = data[1].1.target().history.last();
        assert!(a.dist(b) > 500.0);
    }

    #[test]
    fn template_mix_parsing() {
        let m: TemplateMix = "turn=2, free-flow".parse().unwrap();
        assert_eq!(m.weights, vec![(Template::Turn, 2.0), (Template::FreeFlow, 1.0)]);
        assert!("turn=-1".parse::<TemplateMix>().is_err());
        assert!("bogus".parse::<TemplateMix>().is_err());
    }
}
