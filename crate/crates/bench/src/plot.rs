//! Self-contained SVG figures: convergence curves and archive heatmaps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use moqd_core::pareto::hypervolume_2d;
use moqd_core::MoqdArchive;

use crate::compare::{Metric, RunData};
use crate::error::{BenchError, Result};
use crate::stats::quantile;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const EMPTY_CELL: &str = "#eeeeee";

/// Fixed colour per algorithm label; unknown labels cycle through a spare palette.
pub fn color_for(label: &str, index: usize) -> &'static str {
    match label {
        "mome_pgx" => "#d62728",
        "mome" => "#1f77b4",
        "mome_crowding" => "#2ca02c",
        "mo_pga" => "#9467bd",
        "mo_pga[0]" => "#17becf",
        "mo_pga[1]" => "#bcbd22",
        "pga_me" => "#ff7f0e",
        "nsga2" => "#8c564b",
        "spea2" => "#e377c2",
        _ => ["#7f7f7f", "#393b79", "#637939", "#8c6d31", "#843c39"][index % 5],
    }
}

/// Median and quartiles of one group at an evaluation count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub evals: u64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Order statistics across replications at every row shared by all runs.
pub fn curve_stats(runs: &[RunData], metric: Metric) -> Vec<CurvePoint> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    first
        .records
        .iter()
        .enumerate()
        .filter_map(|(i, rec)| {
            let vals: Vec<f64> = runs
                .iter()
                .filter_map(|r| r.records.get(i).filter(|x| x.evals == rec.evals))
                .map(|x| metric.value(x))
                .filter(|v| v.is_finite())
                .collect();
            (vals.len() == runs.len()).then(|| CurvePoint {
                evals: rec.evals,
                median: quantile(&vals, 0.5).expect("non-empty"),
                q1: quantile(&vals, 0.25).expect("non-empty"),
                q3: quantile(&vals, 0.75).expect("non-empty"),
            })
        })
        .collect()
}

fn nice_ticks(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / count as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|k| k as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e5 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
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

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str) {
        let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
        let _ = writeln!(svg, r##"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="#333"/>"##, x1 - x0, y1 - y0);
        for t in nice_ticks(self.x.0, self.x.1, 6) {
            let x = self.px(t);
            let _ = writeln!(svg, r##"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{}" stroke="#333"/>"##, y1 + 5.0);
            let _ = writeln!(svg, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, y1 + 20.0, fmt_tick(t));
        }
        for t in nice_ticks(self.y.0, self.y.1, 6) {
            let y = self.py(t);
            let _ = writeln!(svg, r##"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="#333"/>"##, x0 - 5.0);
            let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, fmt_tick(t));
        }
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0, escape(x_label));
        let _ = writeln!(
            svg,
            r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }
}

fn open_svg(title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{LEFT}" y="24" font-size="15">{}</text>"#, escape(title));
    svg
}

/// Median curve per label with interquartile shading when a label has more
/// than one run.
pub fn curves_svg(runs: &[RunData], metric: Metric) -> Result<String> {
    let mut groups: BTreeMap<&str, Vec<RunData>> = BTreeMap::new();
    for r in runs {
        groups.entry(r.label.as_str()).or_default().push(r.clone());
    }
    let series: Vec<(&str, usize, Vec<CurvePoint>)> = groups
        .iter()
        .map(|(label, rs)| (*label, rs.len(), curve_stats(rs, metric)))
        .filter(|(_, _, c)| !c.is_empty())
        .collect();
    if series.is_empty() {
        return Err(BenchError::Usage("no plottable metric rows".into()));
    }
    let pts = series.iter().flat_map(|(_, _, c)| c.iter());
    let (mut xmax, mut ymin, mut ymax) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        xmax = xmax.max(p.evals as f64);
        ymin = ymin.min(p.q1);
        ymax = ymax.max(p.q3);
    }
    let pad = ((ymax - ymin) * 0.05).max(1e-9);
    let frame = Frame {
        x: (0.0, xmax.max(1.0)),
        y: (ymin - pad, ymax + pad),
    };

    let mut svg = open_svg(&format!("{} vs evaluations", metric.name()));
    frame.axes(&mut svg, "evaluations", metric.name());
    for (i, (label, n, curve)) in series.iter().enumerate() {
        let color = color_for(label, i);
        if *n > 1 {
            let upper = curve.iter().map(|p| format!("{:.2},{:.2}", frame.px(p.evals as f64), frame.py(p.q3)));
            let lower = curve.iter().rev().map(|p| format!("{:.2},{:.2}", frame.px(p.evals as f64), frame.py(p.q1)));
            let points: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                svg,
                r#"<polygon class="iqr" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                points.join(" ")
            );
        }
        let line: Vec<String> = curve
            .iter()
            .map(|p| format!("{:.2},{:.2}", frame.px(p.evals as f64), frame.py(p.median)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="median" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, lx + 25.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{} (n={n})</text>"#, lx + 32.0, ly + 4.0, escape(label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Voronoi region of `sites[i]` inside the axis-aligned box, by clipping the
/// box against every bisector half-plane.
fn voronoi_cell(sites: &[Vec<f64>], i: usize, bounds: &[(f64, f64)]) -> Vec<[f64; 2]> {
    let (xl, xh) = bounds[0];
    let (yl, yh) = bounds[1];
    let mut poly = vec![[xl, yl], [xh, yl], [xh, yh], [xl, yh]];
    let p = &sites[i];
    for (j, q) in sites.iter().enumerate() {
        if j == i || poly.is_empty() {
            continue;
        }
        // keep points x with (q - p) . x <= (|q|^2 - |p|^2) / 2
        let n = [q[0] - p[0], q[1] - p[1]];
        let c = (q[0] * q[0] + q[1] * q[1] - p[0] * p[0] - p[1] * p[1]) / 2.0;
        let side = |v: &[f64; 2]| n[0] * v[0] + n[1] * v[1] - c;
        let mut next = Vec::with_capacity(poly.len() + 1);
        for k in 0..poly.len() {
            let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
            let (sa, sb) = (side(&a), side(&b));
            if sa <= 0.0 {
                next.push(a);
            }
            if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
                let t = sa / (sa - sb);
                next.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        poly = next;
    }
    poly
}

fn lerp_color(t: f64) -> String {
    // dark blue through teal to yellow
    let stops = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let t = t.clamp(0.0, 1.0);
    let (a, b) = if t <= 0.5 { (stops[0], stops[1]) } else { (stops[1], stops[2]) };
    let u = (t - a.0) / (b.0 - a.0);
    let c: Vec<u8> = (0..3).map(|k| (a.1[k] + u * (b.1[k] - a.1[k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Per-cell hypervolumes (`None` for empty cells).
pub fn cell_hypervolumes(archive: &MoqdArchive, reference: &[f64]) -> Result<Vec<Option<f64>>> {
    archive
        .cells()
        .iter()
        .map(|c| {
            if c.is_empty() {
                Ok(None)
            } else {
                Ok(Some(hypervolume_2d(&c.scores(), reference)?.volume))
            }
        })
        .collect()
}

/// Descriptor-space heatmap of a 2-D archive coloured by cell hypervolume.
pub fn archive_svg(archive: &MoqdArchive, reference: &[f64], title: &str) -> Result<String> {
    let centroids = archive.centroids();
    if centroids.dim() != 2 {
        return Err(BenchError::Usage(format!(
            "archive plots need 2-D descriptors, this archive has {}",
            centroids.dim()
        )));
    }
    let hv = cell_hypervolumes(archive, reference)?;
    let occupied: Vec<f64> = hv.iter().flatten().copied().collect();
    let lo = occupied.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = occupied.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bounds = centroids.bounds();
    let frame = Frame {
        x: bounds[0],
        y: bounds[1],
    };

    let mut svg = open_svg(title);
    for (i, cell_hv) in hv.iter().enumerate() {
        let poly = voronoi_cell(centroids.points(), i, bounds);
        let pts: Vec<String> = poly.iter().map(|v| format!("{:.2},{:.2}", frame.px(v[0]), frame.py(v[1]))).collect();
        let (class, fill) = match cell_hv {
            Some(v) => {
                let t = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
                ("cell occupied", lerp_color(t))
            }
            None => ("cell empty", EMPTY_CELL.to_string()),
        };
        let _ = writeln!(
            svg,
            r##"<polygon class="{class}" points="{}" fill="{fill}" stroke="#ffffff" stroke-width="0.8"/>"##,
            pts.join(" ")
        );
    }
    frame.axes(&mut svg, "descriptor 1", "descriptor 2");

    // colour bar
    let (bx, by, bh) = (WIDTH - RIGHT + 30.0, TOP + 20.0, HEIGHT - TOP - BOTTOM - 40.0);
    for k in 0..50 {
        let t = 1.0 - k as f64 / 49.0;
        let _ = writeln!(
            svg,
            r#"<rect x="{bx}" y="{:.2}" width="18" height="{:.2}" fill="{}"/>"#,
            by + bh * k as f64 / 50.0,
            bh / 50.0 + 0.5,
            lerp_color(t)
        );
    }
    if !occupied.is_empty() {
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, bx + 24.0, by + 8.0, fmt_tick(hi));
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, bx + 24.0, by + bh, fmt_tick(lo));
    }
    let _ = writeln!(svg, r#"<text x="{bx}" y="{}">cell hypervolume</text>"#, by - 8.0);
    svg.push_str("</svg>\n");
    Ok(svg)
}
