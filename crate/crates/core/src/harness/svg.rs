//! Dependency-free SVG figures. Output is a pure function of the input:
//! all numbers are printed with fixed precision and nothing depends on
//! time or hashing order.

use super::analysis::{ReportEnvelope, SplitAnalysis};
use std::fmt::Write;

const WIDTH: f64 = 520.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 48.0;

/// Categorical colours for basins, cycled past ten.
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#d62728",
];

/// Three-stop sequential ramp (dark blue, teal, yellow) for accuracy.
const RAMP: [(f64, f64, f64); 3] = [(68.0, 1.0, 84.0), (33.0, 145.0, 140.0), (253.0, 231.0, 37.0)];

pub fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let (a, b, u) = if t < 0.5 { (RAMP[0], RAMP[1], t * 2.0) } else { (RAMP[1], RAMP[2], t * 2.0 - 1.0) };
    let mix = |x: f64, y: f64| (x + (y - x) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Affine map from data space into the plot area.
struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = [f64; 2]>, right_pad: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points.filter(|p| p[0].is_finite() && p[1].is_finite()) {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if !lo[0].is_finite() {
            lo = [-1.0, -1.0];
            hi = [1.0, 1.0];
        }
        let span = |a: usize| {
            let s = hi[a] - lo[a];
            if s > 0.0 {
                s * 1.05
            } else {
                1.0
            }
        };
        let (wx, wy) = (span(0), span(1));
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        let sx = (WIDTH - 2.0 * MARGIN - right_pad) / wx;
        let sy = (HEIGHT - 2.0 * MARGIN) / wy;
        Frame { x0: cx - 0.5 * wx, y0: cy - 0.5 * wy, sx, sy }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (MARGIN + (p[0] - self.x0) * self.sx, HEIGHT - MARGIN - (p[1] - self.y0) * self.sy)
    }
}

fn header(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(out, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, esc(title));
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        esc(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        esc(ylabel)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN:.0}" y="{MARGIN:.0}" width="{:.0}" height="{:.0}" fill="none" stroke="#444444"/>"##,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
}

fn star(out: &mut String, cx: f64, cy: f64, r: f64) {
    let pts: Vec<String> = (0..10)
        .map(|i| {
            let rad = if i % 2 == 0 { r } else { r * 0.45 };
            let a = std::f64::consts::PI * (i as f64 / 5.0 - 0.5);
            format!("{:.2},{:.2}", cx + rad * a.cos(), cy + rad * a.sin())
        })
        .collect();
    let _ = writeln!(
        out,
        r##"<polygon class="star" points="{}" fill="#e41a1c" stroke="#000000" stroke-width="0.8"/>"##,
        pts.join(" ")
    );
}

fn cross(out: &mut String, cx: f64, cy: f64, r: f64) {
    let _ = writeln!(
        out,
        r##"<path class="cross" d="M{:.2},{:.2}L{:.2},{:.2}M{:.2},{:.2}L{:.2},{:.2}" stroke="#000000" stroke-width="3"/>"##,
        cx - r,
        cy - r,
        cx + r,
        cy + r,
        cx - r,
        cy + r,
        cx + r,
        cy - r
    );
}

fn colour_bar(out: &mut String, lo: f64, hi: f64, label: &str) {
    let x = WIDTH - MARGIN - 22.0;
    let h = HEIGHT - 2.0 * MARGIN;
    let steps = 32;
    for i in 0..steps {
        let t = 1.0 - (i as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect class="colourbar" x="{x:.1}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            MARGIN + h * i as f64 / steps as f64,
            h / steps as f64 + 0.1,
            ramp(t)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{hi:.3}</text>"#, x - 4.0, MARGIN + 10.0);
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{lo:.3}</text>"#, x - 4.0, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        x + 7.0,
        MARGIN - 6.0,
        esc(label)
    );
}

/// How run points are coloured.
pub enum Colouring<'a> {
    Cluster(&'a [usize]),
    Value(&'a [f64]),
}

/// A 2-D run scatter. `stars` are drawn only when there is more than one of
/// them; `cross` marks the mean attribution vector.
pub fn scatter(
    title: &str,
    coords: &[[f64; 2]],
    colouring: Colouring,
    stars: &[[f64; 2]],
    cross_at: Option<[f64; 2]>,
    axis_labels: (&str, &str),
) -> String {
    let value_range = match &colouring {
        Colouring::Value(v) => {
            let lo = v.iter().copied().filter(|x| x.is_finite()).fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().filter(|x| x.is_finite()).fold(f64::NEG_INFINITY, f64::max);
            Some(if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) })
        }
        Colouring::Cluster(_) => None,
    };
    let pad = if value_range.is_some() { 64.0 } else { 0.0 };
    let frame = Frame::fit(coords.iter().chain(stars).chain(cross_at.iter()).copied(), pad);
    let mut out = String::new();
    header(&mut out, title, axis_labels.0, axis_labels.1);
    for (i, &p) in coords.iter().enumerate() {
        let fill = match (&colouring, value_range) {
            (Colouring::Cluster(labels), _) => PALETTE[labels[i] % PALETTE.len()].to_string(),
            (Colouring::Value(v), Some((lo, hi))) => ramp(if hi > lo { (v[i] - lo) / (hi - lo) } else { 0.5 }),
            (Colouring::Value(_), None) => unreachable!(),
        };
        let (x, y) = frame.map(p);
        let _ = writeln!(out, r#"<circle class="run" cx="{x:.2}" cy="{y:.2}" r="2.2" fill="{fill}" fill-opacity="0.7"/>"#);
    }
    if stars.len() > 1 {
        for &s in stars {
            let (x, y) = frame.map(s);
            star(&mut out, x, y, 9.0);
        }
    }
    if let Some(c) = cross_at {
        let (x, y) = frame.map(c);
        cross(&mut out, x, y, 7.0);
    }
    if let Some((lo, hi)) = value_range {
        colour_bar(&mut out, lo, hi, "accuracy");
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal bar chart of `(label, value)` pairs in the given order.
pub fn bar_chart(title: &str, bars: &[(String, f64)], value_label: &str) -> String {
    let mut out = String::new();
    header(&mut out, title, value_label, "");
    let label_w = 170.0;
    let x0 = MARGIN + label_w;
    let w = WIDTH - MARGIN - x0 - 10.0;
    let hi = bars.iter().map(|b| b.1).filter(|v| v.is_finite()).fold(0.0, f64::max);
    let slot = (HEIGHT - 2.0 * MARGIN) / bars.len().max(1) as f64;
    for (i, (name, v)) in bars.iter().enumerate() {
        let y = MARGIN + slot * i as f64 + slot * 0.15;
        let len = if hi > 0.0 && v.is_finite() { w * v / hi } else { 0.0 };
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + slot * 0.4,
            esc(name)
        );
        let _ = writeln!(
            out,
            r##"<rect class="bar" x="{x0:.1}" y="{y:.2}" width="{len:.2}" height="{:.2}" fill="#4c72b0"/>"##,
            slot * 0.7
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{v:.4}</text>"#, x0 + len + 4.0, y + slot * 0.4);
    }
    out.push_str("</svg>\n");
    out
}

/// Figures of one split as `(file name, svg)` pairs.
pub fn split_figures(s: &SplitAnalysis) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let seed = s.split_seed;
    if let Some(emb) = &s.embedding {
        let e = &emb.embedding;
        let axes = (
            format!("PC1 ({:.1}%)", 100.0 * e.explained_variance_ratio[0]),
            format!("PC2 ({:.1}%)", 100.0 * e.explained_variance_ratio[1]),
        );
        let stars: &[[f64; 2]] = if s.basins.k_star > 1 { &emb.centroid_points } else { &[] };
        out.push((
            format!("split{seed}_clusters.svg"),
            scatter(
                &format!("Split {seed}: k* = {}", s.basins.k_star),
                &e.coords,
                Colouring::Cluster(&emb.labels),
                stars,
                Some(e.mean_point),
                (&axes.0, &axes.1),
            ),
        ));
        out.push((
            format!("split{seed}_accuracy.svg"),
            scatter(
                &format!("Split {seed}: test accuracy"),
                &e.coords,
                Colouring::Value(&emb.accuracy),
                &[],
                Some(e.mean_point),
                (&axes.0, &axes.1),
            ),
        ));
    }
    for p in &s.profiles {
        out.push((
            format!("split{seed}_basin{}_top.svg", p.cluster),
            bar_chart(
                &format!("Split {seed}, basin {} ({} runs)", p.cluster, p.size),
                &p.top_features,
                "mean |SHAP|",
            ),
        ));
    }
    out
}

/// Every figure of an envelope as `(file name, svg)` pairs, in a fixed order.
pub fn render_figures(env: &ReportEnvelope) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = env.splits.iter().flat_map(split_figures).collect();
    if let Some(u) = &env.universal {
        let e = &u.embedding;
        out.push((
            "universal.svg".to_string(),
            scatter(
                &format!("All splits ({} runs)", e.coords.len()),
                &e.coords,
                Colouring::Value(&u.accuracy),
                &[],
                Some(e.mean_point),
                (
                    &format!("PC1 ({:.1}%)", 100.0 * e.explained_variance_ratio[0]),
                    &format!("PC2 ({:.1}%)", 100.0 * e.explained_variance_ratio[1]),
                ),
            ),
        ));
    }
    out
}
