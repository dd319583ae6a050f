//! Static SVG plots of zero sets and chosen samples.

use std::fmt::Write;

use fdecouple_core::sampling_geometry::{zero_set, LineFamily, SampleSet, SampleSource, Window, ZeroSetDesc};
use fdecouple_core::signal_model::SignalAtom;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 40.0;
const LEGEND: f64 = 160.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, PartialEq, thiserror::Error)]
pub enum SvgError {
    #[error("plots support dimensions 1 and 2, not {0}")]
    UnsupportedDimension(usize),
}

fn color(j: usize) -> &'static str {
    PALETTE[j % PALETTE.len()]
}

struct Frame {
    lo: [f64; 2],
    span: f64,
}

impl Frame {
    fn new(window: &Window) -> Self {
        let half = 0.5 * window.edge;
        let c1 = window.center.get(1).copied().unwrap_or(0.0);
        Self {
            lo: [window.center[0] - half, c1 - half],
            span: window.edge,
        }
    }

    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.lo[0]) / self.span * (SIZE - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        SIZE - MARGIN - (v - self.lo[1]) / self.span * (SIZE - 2.0 * MARGIN)
    }
}

/// Segment of the line `normal·s = value` inside the window (Liang–Barsky).
fn clip(normal: [f64; 2], value: f64, window: &Window) -> Option<([f64; 2], [f64; 2])> {
    let nn = normal[0] * normal[0] + normal[1] * normal[1];
    let p = [normal[0] * value / nn, normal[1] * value / nn];
    let d = [-normal[1], normal[0]];
    let half = 0.5 * window.edge;
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        let (lo, hi) = (window.center[k] - half, window.center[k] + half);
        if d[k].abs() < 1e-15 {
            if p[k] < lo || p[k] > hi {
                return None;
            }
            continue;
        }
        let (a, b) = ((lo - p[k]) / d[k], (hi - p[k]) / d[k]);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0 < t1).then(|| ([p[0] + t0 * d[0], p[1] + t0 * d[1]], [p[0] + t1 * d[0], p[1] + t1 * d[1]]))
}

fn family_lines(f: &LineFamily, window: &Window) -> Vec<([f64; 2], [f64; 2])> {
    let c = f.normal[0] * window.center[0] + f.normal[1] * window.center[1];
    let reach = 0.5 * window.edge * (f.normal[0].abs() + f.normal[1].abs());
    let lo = ((c - reach - f.offset) / f.step).ceil() as i64;
    let hi = ((c + reach - f.offset) / f.step).floor() as i64;
    (lo..=hi)
        .filter(|m| !f.excluded.contains(m))
        .filter_map(|m| clip(f.normal, f.offset + m as f64 * f.step, window))
        .collect()
}

fn lattice_points(offset: f64, step: f64, excluded: &[i64], window: &Window) -> Vec<f64> {
    let half = 0.5 * window.edge;
    let lo = ((window.center[0] - half - offset) / step).ceil() as i64;
    let hi = ((window.center[0] + half - offset) / step).floor() as i64;
    (lo..=hi)
        .filter(|m| !excluded.contains(m))
        .map(|m| offset + m as f64 * step)
        .collect()
}

/// Zero sets of every atom (one `<g class="zeros">` per atom), chosen
/// samples (one `<g class="samples">` per set, colored by target) and a
/// legend.
pub fn render_zero_plot(atoms: &[SignalAtom], window: &Window, sample_sets: &[SampleSet]) -> Result<String, SvgError> {
    let n = window.dimension();
    if n != 1 && n != 2 {
        return Err(SvgError::UnsupportedDimension(n));
    }
    if let Some(a) = atoms.iter().find(|a| a.dimension() != n) {
        return Err(SvgError::UnsupportedDimension(a.dimension()));
    }
    let frame = Frame::new(window);
    let mut out = String::new();
    let w = SIZE + LEGEND;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{SIZE}" viewBox="0 0 {w} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{SIZE}" fill="white"/>"#);
    let (x0, x1) = (frame.x(frame.lo[0]), frame.x(frame.lo[0] + frame.span));
    let axis_y = SIZE / 2.0;
    if n == 1 {
        let _ = writeln!(out, r#"<line class="axis" x1="{x0:.2}" y1="{axis_y}" x2="{x1:.2}" y2="{axis_y}" stroke="black"/>"#);
    } else {
        let (y0, y1) = (frame.y(frame.lo[1]), frame.y(frame.lo[1] + frame.span));
        let _ = writeln!(
            out,
            r#"<rect class="window" x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
    }

    for (j, atom) in atoms.iter().enumerate() {
        let c = color(j);
        let _ = writeln!(out, r#"<g class="zeros" id="zeros-{j}" stroke="{c}" fill="{c}">"#);
        match zero_set(atom) {
            ZeroSetDesc::Lattice1d { offset, step, excluded } => {
                // stagger the tick rows so coincident zeros stay visible
                let dy = 8.0 * (j as f64 + 1.0);
                for v in lattice_points(offset, step, &excluded, window) {
                    let x = frame.x(v);
                    let _ = writeln!(
                        out,
                        r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
                        axis_y - dy,
                        axis_y - dy + 6.0
                    );
                }
            }
            ZeroSetDesc::Lines2d { families } => {
                for f in &families {
                    for (a, b) in family_lines(f, window) {
                        let _ = writeln!(
                            out,
                            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke-width="0.8"/>"#,
                            frame.x(a[0]),
                            frame.y(a[1]),
                            frame.x(b[0]),
                            frame.y(b[1])
                        );
                    }
                }
            }
            ZeroSetDesc::Empty => {}
        }
        let _ = writeln!(out, "</g>");
    }

    for (k, set) in sample_sets.iter().enumerate() {
        let (id, c) = match set.source {
            SampleSource::Decoupling { target } => (format!("samples-{target}"), color(target)),
            SampleSource::Manual => (format!("samples-manual-{k}"), "black"),
        };
        let _ = writeln!(out, r#"<g class="samples" id="{id}" stroke="black" fill="{c}">"#);
        for s in &set.frequencies {
            let (x, y) = if n == 1 { (frame.x(s[0]), axis_y + 10.0) } else { (frame.x(s[0]), frame.y(s[1])) };
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5"/>"#);
        }
        let _ = writeln!(out, "</g>");
    }

    let _ = writeln!(out, r#"<g class="legend" font-family="sans-serif" font-size="12">"#);
    for (j, atom) in atoms.iter().enumerate() {
        let y = MARGIN + 20.0 * j as f64;
        let lx = SIZE + 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{}" y="{:.1}">{j}: {}</text>"#,
            y - 10.0,
            color(j),
            lx + 18.0,
            y,
            atom.name()
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    Ok(out)
}
