//! Flat-file scene format.
//!
//! Scenes: `scene_id,agent_id,is_target,frame,x,y,lane_id` with frames
//! `0..HISTORY_LEN` for the history and `HISTORY_LEN..HISTORY_LEN+FUTURE_LEN`
//! for the future. Lanes live in a sibling file (see [`map_path_for`]):
//! `lane_id,point_index,x,y,successor_lane_id`. The lane file describes one
//! shared map; each scene receives the lanes that pass within
//! [`MAP_RADIUS`] of its target.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::types::{
    Agent, Lane, MapContext, Scene, Trajectory, TrajectoryRole, Waypoint, FUTURE_LEN, HISTORY_LEN,
};

pub const SCENE_HEADER: [&str; 7] = ["scene_id", "agent_id", "is_target", "frame", "x", "y", "lane_id"];
pub const MAP_HEADER: [&str; 5] = ["lane_id", "point_index", "x", "y", "successor_lane_id"];

/// Lanes with a point this close to the target's last observed position
/// belong to the scene, m.
pub const MAP_RADIUS: f64 = 150.0;

/// `dir/name.csv` -> `dir/name.map.csv`.
pub fn map_path_for(scenes: &Path) -> PathBuf {
    let stem = scenes
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    scenes.with_file_name(format!("{stem}.map.csv"))
}

fn fmt_opt(v: Option<u64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the scene file and its sibling lane file, creating the parent
/// directory.
pub fn export_scenes<T: Real>(path: &Path, scenes: &[Scene<T>]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(SCENE_HEADER)?;
    for scene in scenes {
        for a in &scene.agents {
            let target = if a.id == scene.target_id { "1" } else { "0" };
            for (frame, p) in a.history.points.iter().chain(&a.future.points).enumerate() {
                w.write_record([
                    scene.scene_id.to_string(),
                    a.id.to_string(),
                    target.to_string(),
                    frame.to_string(),
                    p.x.as_f64().to_string(),
                    p.y.as_f64().to_string(),
                    fmt_opt(a.lane_id),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut lanes: BTreeMap<u64, &Lane<T>> = BTreeMap::new();
    for scene in scenes {
        for lane in &scene.map.lanes {
            lanes.entry(lane.id).or_insert(lane);
        }
    }
    let mut m = csv::Writer::from_writer(File::create(map_path_for(path))?);
    m.write_record(MAP_HEADER)?;
    for lane in lanes.values() {
        for (i, p) in lane.points.iter().enumerate() {
            m.write_record([
                lane.id.to_string(),
                i.to_string(),
                p.x.as_f64().to_string(),
                p.y.as_f64().to_string(),
                if i == 0 { fmt_opt(lane.successor) } else { String::new() },
            ])?;
        }
    }
    m.flush()?;
    Ok(())
}

fn check_header(rec: &csv::StringRecord, expected: &[&str], what: &str) -> Result<()> {
    let found: Vec<&str> = rec.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::Ingest {
            line: 1,
            reason: format!("{what} header {found:?}, expected {expected:?}"),
        });
    }
    Ok(())
}

fn field<V: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<V> {
    let raw = rec.get(idx).map(str::trim).unwrap_or("");
    raw.parse().map_err(|_| Error::Ingest {
        line,
        reason: format!("bad {name} `{raw}`"),
    })
}

fn opt_field(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<Option<u64>> {
    match rec.get(idx).map(str::trim) {
        None | Some("") => Ok(None),
        Some(_) => field(rec, idx, name, line).map(Some),
    }
}

fn coord<T: Real>(rec: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<T> {
    let v: f64 = field(rec, idx, name, line)?;
    if !v.is_finite() {
        return Err(Error::Ingest {
            line,
            reason: format!("{name} is not finite"),
        });
    }
    Ok(T::lit(v))
}

struct RawAgent<T> {
    id: u64,
    is_target: bool,
    lane_id: Option<u64>,
    frames: BTreeMap<usize, Waypoint<T>>,
}

struct RawScene<T> {
    id: u64,
    first_line: u64,
    agents: Vec<RawAgent<T>>,
}

fn read_lanes<T: Real>(path: &Path) -> Result<Vec<Lane<T>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut lanes: BTreeMap<u64, (BTreeMap<usize, Waypoint<T>>, Option<u64>)> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 1;
        if line == 1 {
            check_header(&rec, &MAP_HEADER, "map")?;
            continue;
        }
        if rec.len() < 4 {
            return Err(Error::Ingest {
                line,
                reason: format!("map row has {} columns", rec.len()),
            });
        }
        let id: u64 = field(&rec, 0, "lane_id", line)?;
        let idx: usize = field(&rec, 1, "point_index", line)?;
        let p = Waypoint::new(coord(&rec, 2, "x", line)?, coord(&rec, 3, "y", line)?);
        let succ = opt_field(&rec, 4, "successor_lane_id", line)?;
        let entry = lanes.entry(id).or_default();
        if entry.0.insert(idx, p).is_some() {
            return Err(Error::Ingest {
                line,
                reason: format!("lane {id} repeats point {idx}"),
            });
        }
        if let Some(s) = succ {
            if entry.1.is_some_and(|prev| prev != s) {
                return Err(Error::Ingest {
                    line,
                    reason: format!("lane {id} has conflicting successors"),
                });
            }
            entry.1 = Some(s);
        }
    }
    lanes
        .into_iter()
        .map(|(id, (pts, successor))| {
            if pts.keys().copied().ne(0..pts.len()) {
                return Err(Error::Ingest {
                    line: 0,
                    reason: format!("lane {id} point indices are not contiguous from 0"),
                });
            }
            Ok(Lane {
                id,
                points: pts.into_values().collect(),
                successor,
            })
        })
        .collect()
}

/// Reads a scene file (and its lane file when present).
pub fn ingest_scenes<T: Real>(path: &Path) -> Result<Vec<Scene<T>>> {
    let map_path = map_path_for(path);
    let lanes: Vec<Lane<T>> = if map_path.exists() {
        read_lanes(&map_path)?
    } else {
        Vec::new()
    };

    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut raw: Vec<RawScene<T>> = Vec::new();
    let mut scene_index: HashMap<u64, usize> = HashMap::new();
    let total_frames = HISTORY_LEN + FUTURE_LEN;

    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 1;
        if line == 1 {
            check_header(&rec, &SCENE_HEADER, "scene")?;
            continue;
        }
        if rec.len() < 6 {
            return Err(Error::Ingest {
                line,
                reason: format!("scene row has {} columns, expected 7", rec.len()),
            });
        }
        let scene_id: u64 = field(&rec, 0, "scene_id", line)?;
        let agent_id: u64 = field(&rec, 1, "agent_id", line)?;
        let is_target = match rec.get(2).map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            other => {
                return Err(Error::Ingest {
                    line,
                    reason: format!("bad is_target `{}`", other.unwrap_or("")),
                })
            }
        };
        let frame: usize = field(&rec, 3, "frame", line)?;
        if frame >= total_frames {
            return Err(Error::Ingest {
                line,
                reason: format!("frame {frame} outside 0..{total_frames}"),
            });
        }
        let p = Waypoint::new(coord(&rec, 4, "x", line)?, coord(&rec, 5, "y", line)?);
        let lane_id = opt_field(&rec, 6, "lane_id", line)?;

        let si = *scene_index.entry(scene_id).or_insert_with(|| {
            raw.push(RawScene {
                id: scene_id,
                first_line: line,
                agents: Vec::new(),
            });
            raw.len() - 1
        });
        let scene = &mut raw[si];
        let agent = match scene.agents.iter_mut().position(|a| a.id == agent_id) {
            Some(k) => &mut scene.agents[k],
            None => {
                scene.agents.push(RawAgent {
                    id: agent_id,
                    is_target,
                    lane_id,
                    frames: BTreeMap::new(),
                });
                scene.agents.last_mut().expect("just pushed")
            }
        };
        let scene_err = |reason: String| Error::IngestScene {
            scene: scene_id,
            line,
            reason,
        };
        if agent.is_target != is_target {
            return Err(scene_err(format!("agent {agent_id} has inconsistent is_target")));
        }
        if agent.lane_id != lane_id {
            return Err(scene_err(format!("agent {agent_id} has inconsistent lane_id")));
        }
        if agent.frames.insert(frame, p).is_some() {
            return Err(scene_err(format!("agent {agent_id} repeats frame {frame}")));
        }
    }

    raw.into_iter().map(|rs| assemble(rs, &lanes)).collect()
}

fn assemble<T: Real>(rs: RawScene<T>, lanes: &[Lane<T>]) -> Result<Scene<T>> {
    let err = |reason: String| Error::IngestScene {
        scene: rs.id,
        line: rs.first_line,
        reason,
    };
    let targets: Vec<u64> = rs.agents.iter().filter(|a| a.is_target).map(|a| a.id).collect();
    let target_id = match targets.as_slice() {
        [t] => *t,
        [] => return Err(err("missing target agent".into())),
        _ => return Err(err(format!("multiple target agents {targets:?}"))),
    };
    let mut agents = Vec::with_capacity(rs.agents.len());
    for a in rs.agents {
        let hist: Vec<Waypoint<T>> = a.frames.range(..HISTORY_LEN).map(|(_, p)| *p).collect();
        let fut: Vec<Waypoint<T>> = a.frames.range(HISTORY_LEN..).map(|(_, p)| *p).collect();
        if hist.len() != HISTORY_LEN {
            return Err(err(format!(
                "agent {} has {} history points, expected {HISTORY_LEN}",
                a.id,
                hist.len()
            )));
        }
        if fut.len() != FUTURE_LEN {
            return Err(err(format!(
                "agent {} has {} future points, expected {FUTURE_LEN}",
                a.id,
                fut.len()
            )));
        }
        agents.push(Agent {
            id: a.id,
            history: Trajectory::new(TrajectoryRole::History, hist),
            future: Trajectory::new(TrajectoryRole::Future, fut),
            lane_id: a.lane_id,
        });
    }
    let anchor = agents
        .iter()
        .find(|a| a.id == target_id)
        .expect("target present")
        .history
        .last();
    let radius = T::lit(MAP_RADIUS);
    let map = MapContext {
        lanes: lanes
            .iter()
            .filter(|l| l.points.iter().any(|p| p.dist(anchor) <= radius))
            .cloned()
            .collect(),
    };
    let scene = Scene {
        scene_id: rs.id,
        agents,
        target_id,
        map,
    };
    scene.validate().map_err(|e| err(e.to_string()))?;
    Ok(scene)
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
