use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Observed waypoints per agent (2 s at 10 Hz).
pub const HISTORY_LEN: usize = 20;
/// Predicted waypoints per agent (3 s at 10 Hz).
pub const FUTURE_LEN: usize = 30;
/// Sampling period in seconds.
pub const DT: f64 = 0.1;
/// Default bound on agent speed used by trajectory validation, m/s.
pub const DEFAULT_MAX_SPEED: f64 = 40.0;

/// Position in the map frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Waypoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Waypoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, c: T) -> Self {
        Self::new(self.x * c, self.y * c)
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Self) -> T {
        self.sub(o).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryRole {
    History,
    Future,
}

impl TrajectoryRole {
    pub fn expected_len(self) -> usize {
        match self {
            TrajectoryRole::History => HISTORY_LEN,
            TrajectoryRole::Future => FUTURE_LEN,
        }
    }
}

/// Waypoints sampled at 10 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub points: Vec<Waypoint<T>>,
    pub role: TrajectoryRole,
}

impl<T: Real> Trajectory<T> {
    pub fn new(role: TrajectoryRole, points: Vec<Waypoint<T>>) -> Self {
        Self { points, role }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Waypoint<T> {
        *self.points.last().expect("non-empty trajectory")
    }

    /// Interleaved `[x0, y0, x1, y1, ...]`.
    pub fn to_flat(&self) -> Vec<T> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn from_flat(role: TrajectoryRole, flat: &[T]) -> Self {
        assert!(flat.len() % 2 == 0, "odd flat waypoint buffer");
        let points = flat
            .chunks_exact(2)
            .map(|c| Waypoint::new(c[0], c[1]))
            .collect();
        Self { points, role }
    }

    /// Checks point count, finiteness and the per-step displacement bound.
    pub fn validate(&self, max_speed: T) -> std::result::Result<(), String> {
        let expected = self.role.expected_len();
        if self.points.len() != expected {
            return Err(format!(
                "{:?} has {} points, expected {expected}",
                self.role,
                self.points.len()
            ));
        }
        if let Some(i) = self.points.iter().position(|p| !p.is_finite()) {
            return Err(format!("{:?} point {i} is not finite", self.role));
        }
        let max_step = max_speed * T::lit(DT);
        for (i, w) in self.points.windows(2).enumerate() {
            let step = w[1].dist(w[0]);
            if step > max_step {
                return Err(format!(
                    "{:?} step {i} moves {step} m, above the {max_step} m limit",
                    self.role
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent<T> {
    pub id: u64,
    pub history: Trajectory<T>,
    pub future: Trajectory<T>,
    pub lane_id: Option<u64>,
}

/// Lane centerline with an optional successor link.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane<T> {
    pub id: u64,
    pub points: Vec<Waypoint<T>>,
    pub successor: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapContext<T> {
    pub lanes: Vec<Lane<T>>,
}

impl<T: Real> MapContext<T> {
    pub fn lane(&self, id: u64) -> Option<&Lane<T>> {
        self.lanes.iter().find(|l| l.id == id)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        for lane in &self.lanes {
            if lane.points.len() < 2 {
                return Err(format!("lane {} has fewer than 2 points", lane.id));
            }
            if lane.points.iter().any(|p| !p.is_finite()) {
                return Err(format!("lane {} has a non-finite point", lane.id));
            }
            if lane.points.windows(2).any(|w| w[1].dist(w[0]) <= T::zero()) {
                return Err(format!("lane {} has a zero-length segment", lane.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene<T> {
    pub scene_id: u64,
    pub agents: Vec<Agent<T>>,
    pub target_id: u64,
    pub map: MapContext<T>,
}

impl<T: Real> Scene<T> {
    pub fn target(&self) -> &Agent<T> {
        self.agents
            .iter()
            .find(|a| a.id == self.target_id)
            .expect("validated scene has its target")
    }

    pub fn target_index(&self) -> usize {
        self.agents
            .iter()
            .position(|a| a.id == self.target_id)
            .expect("validated scene has its target")
    }

    pub fn neighbors(&self) -> impl Iterator<Item = &Agent<T>> {
        self.agents.iter().filter(move |a| a.id != self.target_id)
    }

    /// Copy of the scene with the target's history replaced.
    pub fn with_target_history(&self, history: Trajectory<T>) -> Self {
        let mut out = self.clone();
        let idx = out.target_index();
        out.agents[idx].history = history;
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(T::lit(DEFAULT_MAX_SPEED))
    }

    pub fn validate_with(&self, max_speed: T) -> Result<()> {
        let fail = |reason: String| Error::InvalidScene {
            scene: self.scene_id,
            reason,
        };
        if self.agents.is_empty() {
            return Err(fail("no agents".into()));
        }
        let mut seen = HashSet::new();
        for a in &self.agents {
            if !seen.insert(a.id) {
                return Err(fail(format!("duplicate agent id {}", a.id)));
            }
            a.history
                .validate(max_speed)
                .and_then(|_| a.future.validate(max_speed))
                .map_err(|e| fail(format!("agent {}: {e}", a.id)))?;
        }
        if !seen.contains(&self.target_id) {
            return Err(fail(format!("target {} not present", self.target_id)));
        }
        self.map.validate().map_err(fail)
    }
}

/// Lateral maneuver class of the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Intent {
    Forward,
    Left,
    Right,
}

impl Intent {
    pub const ALL: [Intent; 3] = [Intent::Forward, Intent::Left, Intent::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Intent::Forward => "forward",
            Intent::Left => "left",
            Intent::Right => "right",
        })
    }
}

impl FromStr for Intent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Intent::Forward),
            "left" => Ok(Intent::Left),
            "right" => Ok(Intent::Right),
            other => Err(Error::Config(format!("unknown intent `{other}`"))),
        }
    }
}

/// Ground-truth semantic labels; either may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SemanticLabels<T> {
    pub headway_s: Option<T>,
    pub lateral_intent: Option<Intent>,
}

impl<T: Real> SemanticLabels<T> {
    pub fn is_empty(&self) -> bool {
        self.headway_s.is_none() && self.lateral_intent.is_none()
    }
}
