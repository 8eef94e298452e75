//! Static SVG rendering of a trial: grid, obstacles, objects, the robot's
//! viewpoints (circle plus heading tick) and belief shading. One panel per
//! belief snapshot, or a single panel without shading when there are none.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::grid::Pose;
use crate::harness::{BeliefSnapshot, TrialTrace};

const CELL_PX: f64 = 20.0;
const MARGIN: f64 = 10.0;
const TITLE_PX: f64 = 18.0;

// `pose.cell` is in screen rows; the heading's row component points up.
fn glyph(out: &mut String, pose: Pose, color: &str, ox: f64, oy: f64) {
    let (cx, cy) = center(pose.cell.col, pose.cell.row, ox, oy);
    let (dc, dr) = pose.heading.step();
    let len = CELL_PX * 0.45;
    let norm = ((dc * dc + dr * dr) as f64).sqrt();
    let (ex, ey) = (cx + len * dc as f64 / norm, cy - len * dr as f64 / norm);
    let _ = writeln!(
        out,
        r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="{:.1}" fill="none" stroke="{color}" stroke-width="1.5"/><line x1="{cx:.1}" y1="{cy:.1}" x2="{ex:.1}" y2="{ey:.1}" stroke="{color}" stroke-width="1.5"/>"#,
        CELL_PX * 0.3
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

// Row 0 is drawn at the bottom so headings keep their counter-clockwise sense.
fn center(col: i32, row: i32, ox: f64, oy: f64) -> (f64, f64) {
    (ox + (col as f64 + 0.5) * CELL_PX, oy + (row as f64 + 0.5) * CELL_PX)
}

fn panel(out: &mut String, trace: &TrialTrace, snapshot: Option<&BeliefSnapshot>, ox: f64, oy: f64) {
    let spec = &trace.scenario;
    let map = &spec.map;
    let (w, h) = (map.width() as i32, map.height() as i32);
    let flip = |row: i32| h - 1 - row;
    let title = match snapshot {
        Some(s) => format!("t = {}", s.t),
        None => format!("{} / {}", spec.name, trace.result.agent),
    };
    let title = escape(&title);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="12">{title}</text>"#, ox, oy + 12.0);
    let oy = oy + TITLE_PX;
    let _ = writeln!(
        out,
        r##"<rect x="{ox:.1}" y="{oy:.1}" width="{:.1}" height="{:.1}" fill="#ffffff" stroke="#000000"/>"##,
        w as f64 * CELL_PX,
        h as f64 * CELL_PX
    );
    if let Some(s) = snapshot {
        let peak = s.cells.iter().map(|&(_, p)| p).fold(0.0, f64::max);
        for &(c, p) in &s.cells {
            if peak <= 0.0 {
                break;
            }
            let a = (p / peak).clamp(0.0, 1.0);
            let _ = writeln!(
                out,
                r##"<rect x="{:.1}" y="{:.1}" width="{CELL_PX:.1}" height="{CELL_PX:.1}" fill="#d62728" fill-opacity="{a:.3}"/>"##,
                ox + c.col as f64 * CELL_PX,
                oy + flip(c.row) as f64 * CELL_PX
            );
        }
    }
    for o in map.obstacles() {
        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{CELL_PX:.1}" height="{CELL_PX:.1}" fill="#404040"/>"##,
            ox + o.col as f64 * CELL_PX,
            oy + flip(o.row) as f64 * CELL_PX
        );
    }
    for i in 1..w {
        let x = ox + i as f64 * CELL_PX;
        let _ = writeln!(out, r##"<line x1="{x:.1}" y1="{oy:.1}" x2="{x:.1}" y2="{:.1}" stroke="#e0e0e0" stroke-width="0.5"/>"##, oy + h as f64 * CELL_PX);
    }
    for j in 1..h {
        let y = oy + j as f64 * CELL_PX;
        let _ = writeln!(out, r##"<line x1="{ox:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#e0e0e0" stroke-width="0.5"/>"##, ox + w as f64 * CELL_PX);
    }

    let objects = std::iter::once((&spec.target.class, spec.target.cell, "#d62728"))
        .chain(spec.objects.iter().map(|o| (&o.class, o.cell, "#1f77b4")));
    for (class, cell, color) in objects {
        let (cx, cy) = center(cell.col, flip(cell.row), ox, oy);
        let s = CELL_PX * 0.35;
        let _ = writeln!(
            out,
            r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}"><title>{}</title></rect>"#,
            cx - s,
            cy - s,
            2.0 * s,
            2.0 * s,
            escape(class)
        );
    }

    let until = snapshot.map_or(u32::MAX, |s| s.t);
    let poses: Vec<Pose> = trace
        .steps
        .iter()
        .filter(|s| s.t <= until)
        .map(|s| s.pose)
        .collect();
    if poses.len() > 1 {
        let pts: Vec<String> = poses
            .iter()
            .map(|p| {
                let (x, y) = center(p.cell.col, flip(p.cell.row), ox, oy);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#2ca02c" stroke-width="1"/>"##, pts.join(" "));
    }
    for p in &poses {
        let shown = Pose::new(crate::grid::Cell::new(p.cell.col, flip(p.cell.row)), p.heading);
        glyph(out, shown, "#2ca02c", ox, oy);
    }
}

/// SVG document for `trace`.
pub fn render_svg(trace: &TrialTrace) -> String {
    let map = &trace.scenario.map;
    let pw = map.width() as f64 * CELL_PX;
    let ph = map.height() as f64 * CELL_PX + TITLE_PX;
    let panels: Vec<Option<&BeliefSnapshot>> = if trace.beliefs.is_empty() {
        vec![None]
    } else {
        trace.beliefs.iter().map(Some).collect()
    };
    let width = MARGIN + panels.len() as f64 * (pw + MARGIN);
    let height = ph + 2.0 * MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    for (i, snap) in panels.into_iter().enumerate() {
        panel(&mut out, trace, snap, MARGIN + i as f64 * (pw + MARGIN), MARGIN);
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_trajectory(trace: &TrialTrace, out: impl AsRef<Path>) -> Result<()> {
    std::fs::write(out, render_svg(trace))?;
    Ok(())
}
