//! Native SVG plots: line plots, heatmaps and scatter plots.
//!
//! Heatmaps use a fixed colormap, piecewise linear through nine stops
//! sampled from viridis (dark purple for 0, yellow for the maximum):
//!
//! | t    | colour    |
//! |------|-----------|
//! | 0    | `#440154` |
//! | 1/8  | `#472d7b` |
//! | 2/8  | `#3b528b` |
//! | 3/8  | `#2c728e` |
//! | 4/8  | `#21918c` |
//! | 5/8  | `#28ae80` |
//! | 6/8  | `#5ec962` |
//! | 7/8  | `#addc30` |
//! | 1    | `#fde725` |
//!
//! Output is deterministic except for an optional timestamp comment.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 110.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

pub const COLORMAP: [(u8, u8, u8); 9] = [
    (0x44, 0x01, 0x54),
    (0x47, 0x2d, 0x7b),
    (0x3b, 0x52, 0x8b),
    (0x2c, 0x72, 0x8e),
    (0x21, 0x91, 0x8c),
    (0x28, 0xae, 0x80),
    (0x5e, 0xc9, 0x62),
    (0xad, 0xdc, 0x30),
    (0xfd, 0xe7, 0x25),
];

/// Line colours, cycled.
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Colour for `t ∈ [0, 1]` (clamped).
pub fn colormap(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (COLORMAP.len() - 1) as f64;
    let i = (pos.floor() as usize).min(COLORMAP.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (COLORMAP[i], COLORMAP[i + 1]);
    let mix = |x: u8, y: u8| (x as f64 + f * (y as f64 - x as f64)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

#[derive(Debug, Clone)]
pub struct Labels {
    pub title: String,
    pub x: String,
    pub y: String,
}

impl Labels {
    pub fn new(title: impl Into<String>, x: impl Into<String>, y: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x: x.into(),
            y: y.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Roughly five round tick values covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

struct Doc {
    text: String,
}

impl Doc {
    fn new(timestamp: bool) -> Self {
        let mut text = String::new();
        let _ = writeln!(
            text,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        if timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            let _ = writeln!(text, "<!-- generated at unix time {secs} -->");
        }
        let _ = writeln!(text, r#"<rect width="100%" height="100%" fill="white"/>"#);
        Self { text }
    }

    fn axes(&mut self, frame: &Frame, labels: &Labels) {
        let t = &mut self.text;
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            t,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        for v in ticks(frame.x.0, frame.x.1) {
            let p = frame.px(v);
            let _ = writeln!(t, r#"<line x1="{p:.2}" y1="{y0:.2}" x2="{p:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
            let _ = writeln!(t, r#"<text x="{p:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 18.0, tick_label(v));
        }
        for v in ticks(frame.y.0, frame.y.1) {
            let p = frame.py(v);
            let _ = writeln!(t, r#"<line x1="{:.2}" y1="{p:.2}" x2="{x0:.2}" y2="{p:.2}" stroke="black"/>"#, x0 - 5.0);
            let _ = writeln!(
                t,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 8.0,
                p + 4.0,
                tick_label(v)
            );
        }
        let _ = writeln!(
            t,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            (x0 + x1) / 2.0,
            escape(&labels.title)
        );
        let _ = writeln!(
            t,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            HEIGHT - 12.0,
            escape(&labels.x)
        );
        let _ = writeln!(
            t,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&labels.y)
        );
    }

    fn legend(&mut self, entries: &[(String, &str)]) {
        for (i, (label, colour)) in entries.iter().enumerate() {
            let y = TOP + 10.0 + 16.0 * i as f64;
            let x = WIDTH - RIGHT + 10.0;
            let _ = writeln!(
                self.text,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{colour}" stroke-width="2"/>"#,
                x + 16.0
            );
            let _ = writeln!(self.text, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 20.0, y + 4.0, escape(label));
        }
    }

    fn finish(mut self) -> String {
        self.text.push_str("</svg>\n");
        self.text
    }
}

/// One polyline per series, e.g. frequency against phenotype per snapshot.
pub fn line_plot(labels: &Labels, series: &[Series], timestamp: bool) -> String {
    let frame = Frame {
        x: bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0))),
        y: bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain([0.0])),
    };
    let mut doc = Doc::new(timestamp);
    doc.axes(&frame, labels);
    let mut legend = Vec::new();
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            doc.text,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        legend.push((s.label.clone(), colour));
    }
    doc.legend(&legend);
    doc.finish()
}

/// `values[row][col]` drawn with rows along the y axis (`row_coords`, e.g.
/// time) and columns along x (`col_coords`, e.g. phenotype). Colour scales
/// linearly from 0 to the largest value.
pub fn heatmap(labels: &Labels, col_coords: &[f64], row_coords: &[f64], values: &[Vec<f64>], timestamp: bool) -> String {
    let half = |c: &[f64]| if c.len() > 1 { (c[1] - c[0]).abs() / 2.0 } else { 0.5 };
    let (hx, hy) = (half(col_coords), half(row_coords));
    let (xl, xh) = bounds(col_coords.iter().copied());
    let (yl, yh) = bounds(row_coords.iter().copied());
    let frame = Frame {
        x: (xl - hx, xh + hx),
        y: (yl - hy, yh + hy),
    };
    let vmax = values.iter().flatten().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let mut doc = Doc::new(timestamp);
    let edges = |c: &[f64], i: usize, h: f64| {
        let lo = if i == 0 { c[0] - h } else { (c[i - 1] + c[i]) / 2.0 };
        let hi = if i + 1 == c.len() { c[i] + h } else { (c[i] + c[i + 1]) / 2.0 };
        (lo, hi)
    };
    for (r, row) in values.iter().enumerate() {
        let (y_lo, y_hi) = edges(row_coords, r, hy);
        let (py_top, py_bot) = (frame.py(y_hi), frame.py(y_lo));
        for (c, &v) in row.iter().enumerate() {
            let (x_lo, x_hi) = edges(col_coords, c, hx);
            let (px0, px1) = (frame.px(x_lo), frame.px(x_hi));
            let t = if vmax > 0.0 { v / vmax } else { 0.0 };
            let _ = writeln!(
                doc.text,
                r#"<rect x="{px0:.2}" y="{py_top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                px1 - px0,
                py_bot - py_top,
                colormap(t)
            );
        }
    }
    doc.axes(&frame, labels);
    // colour bar
    let bar_x = WIDTH - RIGHT + 20.0;
    let steps = 32;
    let span = HEIGHT - TOP - BOTTOM;
    for i in 0..steps {
        let t = i as f64 / (steps - 1) as f64;
        let y = HEIGHT - BOTTOM - (i + 1) as f64 * span / steps as f64;
        let _ = writeln!(
            doc.text,
            r#"<rect x="{bar_x:.2}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            span / steps as f64 + 0.5,
            colormap(t)
        );
    }
    let _ = writeln!(doc.text, r#"<text x="{:.2}" y="{:.2}">0</text>"#, bar_x + 20.0, HEIGHT - BOTTOM);
    let _ = writeln!(doc.text, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, bar_x + 20.0, TOP + 10.0, tick_label(vmax));
    doc.finish()
}

/// Scatter of individual points plus a line through per-x means.
pub fn scatter(labels: &Labels, points: &[(f64, f64)], means: &[(f64, f64)], timestamp: bool) -> String {
    let all = || points.iter().chain(means);
    let frame = Frame {
        x: bounds(all().map(|p| p.0)),
        y: bounds(all().map(|p| p.1).chain([0.0])),
    };
    let pad = |(lo, hi): (f64, f64)| {
        let d = 0.05 * (hi - lo);
        (lo - d, hi + d)
    };
    let frame = Frame {
        x: pad(frame.x),
        y: pad(frame.y),
    };
    let mut doc = Doc::new(timestamp);
    doc.axes(&frame, labels);
    for &(x, y) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let _ = writeln!(
            doc.text,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#1f77b4" fill-opacity="0.6"/>"##,
            frame.px(x),
            frame.py(y)
        );
    }
    if !means.is_empty() {
        let pts: Vec<String> = means
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            doc.text,
            r##"<polyline fill="none" stroke="#d62728" stroke-width="2" points="{}"/>"##,
            pts.join(" ")
        );
        for &(x, y) in means {
            let _ = writeln!(
                doc.text,
                r##"<rect x="{:.2}" y="{:.2}" width="7" height="7" fill="#d62728"/>"##,
                frame.px(x) - 3.5,
                frame.py(y) - 3.5
            );
        }
    }
    doc.legend(&[("replica".into(), "#1f77b4"), ("mean".into(), "#d62728")]);
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colormap_hits_its_stops() {
        assert_eq!(colormap(0.0), "#440154");
        assert_eq!(colormap(0.5), "#21918c");
        assert_eq!(colormap(1.0), "#fde725");
        assert_eq!(colormap(7.0), "#fde725");
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), [0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(ticks(-14.0, 14.0), [-10.0, 0.0, 10.0]);
    }

    #[test]
    fn timestamp_is_the_only_nondeterminism() {
        let s = [Series {
            label: "a".into(),
            points: vec![(0.0, 1.0), (1.0, 2.0)],
        }];
        let l = Labels::new("t", "x", "y");
        assert_eq!(line_plot(&l, &s, false), line_plot(&l, &s, false));
        let stamped = line_plot(&l, &s, true);
        assert!(stamped.contains("<!-- generated at unix time"));
        let stripped: String = stamped.lines().filter(|l| !l.starts_with("<!--")).map(|l| format!("{l}\n")).collect();
        assert_eq!(stripped, line_plot(&l, &s, false));
    }

    #[test]
    fn heatmap_draws_one_cell_per_value() {
        let svg = heatmap(
            &Labels::new("h", "x", "t"),
            &[-1.0, 0.0, 1.0],
            &[0.0, 5.0],
            &[vec![0.0, 1.0, 0.0], vec![0.5, 0.0, 0.5]],
            false,
        );
        assert!(svg.contains("fill=\"#fde725\""));
        assert_eq!(svg.matches("<rect").count(), 1 + 6 + 1 + 32);
    }
}
