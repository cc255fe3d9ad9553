//! Standalone SVG overlay of one attacked scene: lanes, neighbors, benign
//! and adversarial histories, ground-truth future and both predictions.

use std::fmt::Write as _;

use crate::scalar::Real;
use crate::scenario::{Scene, Trajectory, Waypoint};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 20.0;

struct View {
    min: (f64, f64),
    scale: f64,
}

impl View {
    fn fit(points: &[(f64, f64)]) -> Self {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for &(x, y) in points {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1.0);
        let pad = 0.5 * (span - (hi.0 - lo.0));
        let pad_y = 0.5 * (span - (hi.1 - lo.1));
        Self {
            min: (lo.0 - pad, lo.1 - pad_y),
            scale: (SIZE - 2.0 * MARGIN) / span,
        }
    }

    // y grows upward in the scene and downward in SVG
    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            MARGIN + (x - self.min.0) * self.scale,
            SIZE - MARGIN - (y - self.min.1) * self.scale,
        )
    }
}

fn xy<T: Real>(p: &Waypoint<T>) -> (f64, f64) {
    (p.x.as_f64(), p.y.as_f64())
}

fn polyline(out: &mut String, view: &View, pts: &[(f64, f64)], style: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&p| {
            let (x, y) = view.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(out, r#"<polyline fill="none" {style} points="{}"/>"#, coords.join(" "));
}

/// Renders the overlay. Lanes are clipped to 60 m around the target.
pub fn overlay_svg<T: Real>(
    scene: &Scene<T>,
    adv_history: &Trajectory<T>,
    benign_pred: &Trajectory<T>,
    adv_pred: &Trajectory<T>,
) -> String {
    let target = scene.target();
    let centre = xy(&target.history.last());
    let near = |p: &(f64, f64)| (p.0 - centre.0).hypot(p.1 - centre.1) < 60.0;
    let lanes: Vec<Vec<(f64, f64)>> = scene
        .map
        .lanes
        .iter()
        .map(|l| l.points.iter().map(xy).filter(near).collect::<Vec<_>>())
        .filter(|l| l.len() > 1)
        .collect();
    let neighbors: Vec<Vec<(f64, f64)>> = scene
        .neighbors()
        .map(|a| a.history.points.iter().map(xy).collect())
        .collect();
    let tracks: [(Vec<(f64, f64)>, &str); 5] = [
        (target.history.points.iter().map(xy).collect(), r##"stroke="#1f5fbf" stroke-width="2""##),
        (adv_history.points.iter().map(xy).collect(), r##"stroke="#c0392b" stroke-width="2" stroke-dasharray="4 2""##),
        (target.future.points.iter().map(xy).collect(), r##"stroke="#2e8b57" stroke-width="2""##),
        (benign_pred.points.iter().map(xy).collect(), r##"stroke="#1f5fbf" stroke-width="1.5" stroke-dasharray="1 3""##),
        (adv_pred.points.iter().map(xy).collect(), r##"stroke="#c0392b" stroke-width="1.5""##),
    ];
    let all: Vec<(f64, f64)> = tracks
        .iter()
        .flat_map(|(t, _)| t.iter().copied())
        .chain(neighbors.iter().flatten().copied().filter(near))
        .collect();
    let view = View::fit(&all);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for lane in &lanes {
        polyline(&mut s, &view, lane, r##"stroke="#bbbbbb" stroke-width="1""##);
    }
    for n in &neighbors {
        polyline(&mut s, &view, n, r##"stroke="#888888" stroke-width="1.5""##);
    }
    for (t, style) in &tracks {
        polyline(&mut s, &view, t, style);
    }
    let legend = [
        ("#1f5fbf", "history / benign prediction (dotted)"),
        ("#c0392b", "adversarial history (dashed) / prediction"),
        ("#2e8b57", "ground truth future"),
    ];
    for (i, (color, label)) in legend.iter().enumerate() {
        let y = 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="6" y="{y}" font-family="sans-serif" font-size="11" fill="{color}">{label}</text>"#
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="6" y="{}" font-family="sans-serif" font-size="11">scene {}</text>"#,
        SIZE - 6.0,
        scene.scene_id
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scene, Template};

    #[test]
    fn svg_contains_every_track() {
        let scene = generate_scene::<f64>(1, Template::Turn);
        let t = scene.target();
        let svg = overlay_svg(&scene, &t.history, &t.future, &t.future);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.matches("<polyline").count() >= 5);
        assert!(!svg.contains("NaN"));
    }
}
