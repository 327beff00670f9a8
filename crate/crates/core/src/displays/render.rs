//! Figure data model and a small deterministic SVG writer.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WatchError};
use crate::stats::fmt_sig;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 90.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    /// Polyline; `lower`/`upper` draw a shaded band.
    Line,
    Points,
    /// Star markers (pseudo-outcome averages).
    Stars,
    /// Point estimate with a vertical interval.
    Intervals,
    Bars,
    /// Consecutive point pairs form separate segments.
    Segments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y, lower: None, upper: None }
    }

    pub fn with_band(x: f64, y: f64, lower: f64, upper: f64) -> Point {
        Point {
            x,
            y,
            lower: Some(lower),
            upper: Some(upper),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub style: Style,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

/// Everything needed to draw one figure; serialized next to its SVG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure {
    pub id: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// When non-empty, x values are indices into these labels.
    #[serde(default)]
    pub x_categories: Vec<String>,
    #[serde(default)]
    pub series: Vec<Series>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<Heatmap>,
    #[serde(default)]
    pub annotations: Vec<String>,
}

impl Figure {
    pub fn new(id: &str, title: &str, x_label: &str, y_label: &str) -> Figure {
        Figure {
            id: id.into(),
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_categories: Vec::new(),
            series: Vec::new(),
            heatmap: None,
            annotations: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.heatmap.as_ref().is_none_or(|h| h.values.is_empty()) && self.series.iter().all(|s| s.points.is_empty())
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn num(v: f64) -> String {
    fmt_sig(v, 4)
}

struct Scale {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, a: f64, b: f64) -> Scale {
        let (lo, hi) = if hi - lo > 1e-12 * (1.0 + lo.abs()) {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        } else {
            (lo - 1.0, hi + 1.0)
        };
        Scale { lo, hi, a, b }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..5).map(|k| self.lo + (self.hi - self.lo) * k as f64 / 4.0).collect()
    }
}

fn extent(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    vals.filter(|v| v.is_finite())
        .fold(None, |acc, v| Some(acc.map_or((v, v), |(lo, hi): (f64, f64)| (lo.min(v), hi.max(v)))))
}

/// Render a figure to SVG text. Output depends only on the figure value.
pub fn render_svg(fig: &Figure) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
        w = WIDTH,
        h = HEIGHT
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="28" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        esc(&fig.title)
    );
    if fig.is_empty() {
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" font-size="14" text-anchor="middle" fill="#666">no data</text>"##,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
    } else if let Some(h) = &fig.heatmap {
        draw_heatmap(&mut s, h);
    } else {
        draw_plot(&mut s, fig);
    }
    for (k, a) in fig.annotations.iter().enumerate() {
        let _ = writeln!(
            s,
            r##"<text x="10" y="{}" font-size="10" fill="#444">{}</text>"##,
            HEIGHT - 28.0 + 12.0 * k as f64 - 12.0 * (fig.annotations.len().saturating_sub(2)) as f64,
            esc(a)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn draw_plot(s: &mut String, fig: &Figure) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let pts = || fig.series.iter().flat_map(|se| se.points.iter());
    let (xlo, xhi) = if fig.x_categories.is_empty() {
        extent(pts().map(|p| p.x)).unwrap_or((0.0, 1.0))
    } else {
        (-0.5, fig.x_categories.len() as f64 - 0.5)
    };
    let has_bars = fig.series.iter().any(|se| se.style == Style::Bars);
    let ys = pts().flat_map(|p| [Some(p.y), p.lower, p.upper]).flatten().chain(has_bars.then_some(0.0));
    let (ylo, yhi) = extent(ys).unwrap_or((0.0, 1.0));
    let xs = if fig.x_categories.is_empty() {
        Scale::new(xlo, xhi, x0, x1)
    } else {
        Scale { lo: xlo, hi: xhi, a: x0, b: x1 }
    };
    let ysc = Scale::new(ylo, yhi, y0, y1);

    let _ = writeln!(s, r##"<g stroke="#000" stroke-width="1">"##);
    let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, num(x0), num(y0), num(x1), num(y0));
    let _ = writeln!(s, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, num(x0), num(y0), num(x0), num(y1));
    s.push_str("</g>\n");
    for t in ysc.ticks() {
        let py = ysc.map(t);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#000"/><text x="{}" y="{}" font-size="10" text-anchor="end">{}</text>"##,
            num(x0 - 4.0),
            num(py),
            num(x0),
            num(py),
            num(x0 - 6.0),
            num(py + 3.0),
            num(t)
        );
    }
    if fig.x_categories.is_empty() {
        for t in xs.ticks() {
            let px = xs.map(t);
            let _ = writeln!(
                s,
                r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#000"/><text x="{}" y="{}" font-size="10" text-anchor="middle">{}</text>"##,
                num(px),
                num(y0),
                num(px),
                num(y0 + 4.0),
                num(px),
                num(y0 + 16.0),
                num(t)
            );
        }
    } else {
        for (k, c) in fig.x_categories.iter().enumerate() {
            let px = xs.map(k as f64);
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="10" text-anchor="end" transform="rotate(-40 {} {})">{}</text>"#,
                num(px),
                num(y0 + 14.0),
                num(px),
                num(y0 + 14.0),
                esc(c)
            );
        }
    }
    if ysc.lo < 0.0 && ysc.hi > 0.0 {
        let pz = ysc.map(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
            num(x0),
            num(pz),
            num(x1),
            num(pz)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        num((x0 + x1) / 2.0),
        num(HEIGHT - BOTTOM + 48.0),
        esc(&fig.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        num((y0 + y1) / 2.0),
        num((y0 + y1) / 2.0),
        esc(&fig.y_label)
    );

    let n_bar_series = fig.series.iter().filter(|se| se.style == Style::Bars).count().max(1);
    let mut bar_k = 0;
    for (k, se) in fig.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        match se.style {
            Style::Line => {
                let banded: Vec<&Point> = se.points.iter().filter(|p| p.lower.is_some() && p.upper.is_some()).collect();
                if banded.len() >= 2 {
                    let mut poly: Vec<String> = banded
                        .iter()
                        .map(|p| format!("{},{}", num(xs.map(p.x)), num(ysc.map(p.upper.unwrap_or(p.y)))))
                        .collect();
                    poly.extend(
                        banded
                            .iter()
                            .rev()
                            .map(|p| format!("{},{}", num(xs.map(p.x)), num(ysc.map(p.lower.unwrap_or(p.y))))),
                    );
                    let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, poly.join(" "));
                }
                let line: Vec<String> = se.points.iter().map(|p| format!("{},{}", num(xs.map(p.x)), num(ysc.map(p.y)))).collect();
                let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
            }
            Style::Points => {
                for p in &se.points {
                    let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="2.5" fill="{color}"/>"#, num(xs.map(p.x)), num(ysc.map(p.y)));
                }
            }
            Style::Stars => {
                for p in &se.points {
                    let _ = writeln!(s, r#"<polygon points="{}" fill="{color}"/>"#, star(xs.map(p.x), ysc.map(p.y), 6.0));
                }
            }
            Style::Intervals => {
                for p in &se.points {
                    let px = xs.map(p.x);
                    if let (Some(lo), Some(hi)) = (p.lower, p.upper) {
                        let _ = writeln!(
                            s,
                            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#,
                            num(px),
                            num(ysc.map(lo)),
                            num(px),
                            num(ysc.map(hi))
                        );
                    }
                    let _ = writeln!(s, r#"<circle cx="{}" cy="{}" r="3.5" fill="{color}"/>"#, num(px), num(ysc.map(p.y)));
                }
            }
            Style::Bars => {
                let slot = (xs.map(1.0) - xs.map(0.0)).abs() * 0.8;
                let w = slot / n_bar_series as f64;
                for p in &se.points {
                    let left = xs.map(p.x) - slot / 2.0 + w * bar_k as f64;
                    let (a, b) = (ysc.map(0.0), ysc.map(p.y));
                    let _ = writeln!(
                        s,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{color}"/>"#,
                        num(left),
                        num(a.min(b)),
                        num(w),
                        num((a - b).abs())
                    );
                }
                bar_k += 1;
            }
            Style::Segments => {
                for pair in se.points.chunks(2) {
                    if let [p, q] = pair {
                        let _ = writeln!(
                            s,
                            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="1.5"/>"#,
                            num(xs.map(p.x)),
                            num(ysc.map(p.y)),
                            num(xs.map(q.x)),
                            num(ysc.map(q.y))
                        );
                    }
                }
            }
        }
        let ly = TOP + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="12" height="12" fill="{color}"/><text x="{}" y="{}" font-size="11">{}</text>"#,
            num(WIDTH - RIGHT + 14.0),
            num(ly),
            num(WIDTH - RIGHT + 30.0),
            num(ly + 10.0),
            esc(&se.name)
        );
    }
}

fn star(cx: f64, cy: f64, r: f64) -> String {
    (0..10)
        .map(|k| {
            let ang = std::f64::consts::PI * (k as f64 / 5.0 - 0.5);
            let rad = if k % 2 == 0 { r } else { r * 0.45 };
            format!("{},{}", num(cx + rad * ang.cos()), num(cy + rad * ang.sin()))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn draw_heatmap(s: &mut String, h: &Heatmap) {
    let nr = h.rows.len().max(1) as f64;
    let nc = h.cols.len().max(1) as f64;
    let (x0, y0) = (LEFT + 30.0, TOP + 10.0);
    let cell = ((WIDTH - x0 - 20.0) / nc).min((HEIGHT - BOTTOM - y0) / nr);
    let max = h
        .values
        .iter()
        .flatten()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let small = nr.max(nc) > 12.0;
    for (i, row) in h.values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = if max > 0.0 && v.is_finite() { (v.abs() / max).min(1.0) } else { 0.0 };
            let shade = |c: f64| (255.0 - t * (255.0 - c)).round() as u8;
            let (px, py) = (x0 + cell * j as f64, y0 + cell * i as f64);
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#{:02x}{:02x}{:02x}" stroke="#fff"/>"##,
                num(px),
                num(py),
                num(cell),
                num(cell),
                shade(31.0),
                shade(119.0),
                shade(180.0)
            );
            if !small {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" font-size="9" text-anchor="middle">{}</text>"#,
                    num(px + cell / 2.0),
                    num(py + cell / 2.0 + 3.0),
                    fmt_sig(v, 2)
                );
            }
        }
    }
    let fs = if small { 7 } else { 10 };
    for (i, r) in h.rows.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="{fs}" text-anchor="end">{}</text>"#,
            num(x0 - 4.0),
            num(y0 + cell * (i as f64 + 0.5) + 3.0),
            esc(r)
        );
    }
    for (j, c) in h.cols.iter().enumerate() {
        let px = x0 + cell * (j as f64 + 0.5);
        let py = y0 + cell * nr + 10.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="{fs}" text-anchor="end" transform="rotate(-60 {} {})">{}</text>"#,
            num(px),
            num(py),
            num(px),
            num(py),
            esc(c)
        );
    }
}

/// Write `<dir>/<id>.svg` and `<dir>/<id>.json`; returns the file names.
pub fn write_figure(fig: &Figure, dir: &Path) -> Result<(String, String)> {
    std::fs::create_dir_all(dir).map_err(|e| WatchError::io(dir, e))?;
    let svg = format!("{}.svg", fig.id);
    let json = format!("{}.json", fig.id);
    std::fs::write(dir.join(&svg), render_svg(fig)).map_err(|e| WatchError::io(dir.join(&svg), e))?;
    let data = serde_json::to_string_pretty(fig)?;
    std::fs::write(dir.join(&json), data + "\n").map_err(|e| WatchError::io(dir.join(&json), e))?;
    Ok((svg, json))
}
