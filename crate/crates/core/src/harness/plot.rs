//! Deterministic hand-written SVG: line plots and phase heatmaps.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::config::ExperimentKind;
use super::{median, require_records, ExperimentRecord};
use crate::error::{config, Result};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    /// `(x, y, value in [0, 1])`.
    pub cells: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    pub heatmap: Option<Heatmap>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Axis {
        let vals: Vec<f64> = values.filter(|v| v.is_finite() && (!log || *v > 0.0)).collect();
        let t = |v: f64| if log { v.log10() } else { v };
        let mut lo = vals.iter().map(|&v| t(v)).fold(f64::INFINITY, f64::min);
        let mut hi = vals.iter().map(|&v| t(v)).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Axis {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn unit(&self, v: f64) -> Option<f64> {
        if self.log && v <= 0.0 || !v.is_finite() {
            return None;
        }
        let t = if self.log { v.log10() } else { v };
        Some((t - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..=4)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                let v = if self.log { 10f64.powf(t) } else { t };
                (i as f64 / 4.0, label(v))
            })
            .collect()
    }
}

fn label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render a plot to SVG text. Identical input gives identical bytes.
pub fn render_plot(p: &Plot) -> String {
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let heat = p.heatmap.as_ref();
    let xs = p
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|q| q.0))
        .chain(heat.into_iter().flat_map(|h| h.cells.iter().map(|c| c.0)));
    let ys = p
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|q| q.1))
        .chain(heat.into_iter().flat_map(|h| h.cells.iter().map(|c| c.1)));
    let ax = Axis::fit(xs, p.log_x);
    let ay = Axis::fit(ys, p.log_y);
    let px = |u: f64| LEFT + u * pw;
    let py = |u: f64| TOP + (1.0 - u) * ph;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&p.title));
    if let Some(h) = heat {
        let mut xv: Vec<f64> = h.cells.iter().map(|c| c.0).collect();
        let mut yv: Vec<f64> = h.cells.iter().map(|c| c.1).collect();
        for v in [&mut xv, &mut yv] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let bounds = |vals: &[f64], a: &Axis, v: f64| -> (f64, f64) {
            let i = vals.iter().position(|&w| w == v).unwrap_or(0);
            let c = a.unit(v).unwrap_or(0.0);
            let lo = if i > 0 { 0.5 * (c + a.unit(vals[i - 1]).unwrap_or(c)) } else { 0.0 };
            let hi = if i + 1 < vals.len() { 0.5 * (c + a.unit(vals[i + 1]).unwrap_or(c)) } else { 1.0 };
            (lo, hi)
        };
        for &(x, y, v) in &h.cells {
            let (x0, x1) = bounds(&xv, &ax, x);
            let (y0, y1) = bounds(&yv, &ay, y);
            let g = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({g},{g},255)"/>"#,
                px(x0),
                py(y1),
                (x1 - x0) * pw,
                (y1 - y0) * ph
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (u, t) in ax.ticks() {
        let x = px(u);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#, TOP + ph + 18.0);
    }
    for (u, t) in ay.ticks() {
        let y = py(u);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t}</text>"#, LEFT - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, escape(&p.x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&p.y_label)
    );
    for (i, series) in p.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = series
            .points
            .iter()
            .filter_map(|&(x, y)| Some(format!("{:.2},{:.2}", px(ax.unit(x)?), py(ay.unit(y)?))))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
            for p in &pts {
                let (x, y) = p.split_once(',').expect("formatted pair");
                let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&series.name));
    }
    s.push_str("</svg>\n");
    s
}

fn medians(records: &[ExperimentRecord], method: &str, metric: &str, key: impl Fn(&ExperimentRecord) -> Option<f64>) -> Vec<(f64, f64)> {
    let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.method == method && r.metric == metric) {
        if let Some(x) = key(r) {
            groups.entry(x.to_bits()).or_insert((x, Vec::new())).1.push(r.value);
        }
    }
    let mut out: Vec<(f64, f64)> = groups
        .into_values()
        .filter_map(|(x, mut v)| median(&mut v).map(|m| (x, m)))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn methods(records: &[ExperimentRecord]) -> Vec<String> {
    let mut m: Vec<String> = records
        .iter()
        .filter(|r| !r.method.starts_with("threshold"))
        .map(|r| r.method.clone())
        .collect();
    m.sort();
    m.dedup();
    m
}

fn line_plot(title: &str, x: &str, y: &str, logs: (bool, bool), series: Vec<Series>) -> Plot {
    Plot {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        log_x: logs.0,
        log_y: logs.1,
        series,
        heatmap: None,
    }
}

fn most_common<T: Ord + Copy>(values: impl Iterator<Item = T>) -> Option<T> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    counts.into_iter().max_by_key(|&(v, c)| (c, std::cmp::Reverse(v))).map(|(v, _)| v)
}

/// Plots for a finished sweep as `(file name, SVG)` pairs.
pub fn emit_plots(records: &[ExperimentRecord], kind: ExperimentKind) -> Result<Vec<(String, String)>> {
    require_records(records)?;
    let ms = methods(records);
    let n_key = |r: &ExperimentRecord| Some(r.n as f64);
    let mut out = Vec::new();
    match kind {
        ExperimentKind::Convergence => {
            let group = if records.iter().any(|r| r.metric == "group_error_1") { 1 } else { 0 };
            let metric = format!("group_error_{group}");
            let series = ms
                .iter()
                .map(|m| Series {
                    name: m.clone(),
                    points: medians(records, m, &metric, n_key),
                })
                .collect();
            let p = line_plot("Median eigenvector error after alignment", "n", &metric, (true, true), series);
            out.push(("convergence.svg".into(), render_plot(&p)));
            let ev = ms
                .iter()
                .map(|m| Series {
                    name: m.clone(),
                    points: medians(records, m, "relative_eigenvalue_error_2", n_key),
                })
                .collect();
            let p = line_plot("Median relative eigenvalue error", "n", "relative error of second eigenvalue", (true, true), ev);
            out.push(("eigenvalues.svg".into(), render_plot(&p)));
        }
        ExperimentKind::Phase => {
            let thresholds: Vec<Series> = ["threshold-cml", "threshold-aiml"]
                .iter()
                .map(|t| Series {
                    name: t.to_string(),
                    points: medians(records, t, "delta_threshold", n_key),
                })
                .filter(|s| !s.points.is_empty())
                .collect();
            for m in &ms {
                let mut cells: BTreeMap<(usize, u64), (f64, Vec<f64>)> = BTreeMap::new();
                for r in records.iter().filter(|r| &r.method == m && r.metric == "success") {
                    if let Some(d) = r.delta {
                        cells.entry((r.n, d.to_bits())).or_insert((d, Vec::new())).1.push(r.value);
                    }
                }
                let heat = cells
                    .into_iter()
                    .map(|((n, _), (d, v))| (n as f64, d, v.iter().sum::<f64>() / v.len() as f64))
                    .collect();
                let mut p = line_plot(&format!("Success rate ({m})"), "n", "delta", (true, true), thresholds.clone());
                p.heatmap = Some(Heatmap { cells: heat });
                out.push((format!("phase-{m}.svg"), render_plot(&p)));
            }
        }
        ExperimentKind::Counterexample => {
            let mut series = Vec::new();
            for m in &ms {
                for metric in ["accuracy", "alignment_error"] {
                    series.push(Series {
                        name: format!("{m} {metric}"),
                        points: medians(records, m, metric, |r| r.delta),
                    });
                }
            }
            let p = line_plot("Parallel copies: clustering and alignment", "copy offset", "median", (true, false), series);
            out.push(("counterexample.svg".into(), render_plot(&p)));
        }
        ExperimentKind::Downstream => {
            let xi: Vec<&ExperimentRecord> = records.iter().filter(|r| r.metric == "xi").collect();
            let fixed_n = most_common(xi.iter().map(|r| r.n)).ok_or_else(|| config("no misclassification records"))?;
            let fixed_m = most_common(xi.iter().filter_map(|r| r.m)).unwrap_or(0);
            let by_m = ms
                .iter()
                .map(|m| Series {
                    name: m.clone(),
                    points: medians(records, m, "xi", |r| (r.n == fixed_n).then(|| r.m.map(|v| v as f64)).flatten()),
                })
                .collect();
            let p = line_plot(&format!("Misclassification at n = {fixed_n}"), "m", "median xi", (true, false), by_m);
            out.push(("xi-vs-m.svg".into(), render_plot(&p)));
            let by_n = ms
                .iter()
                .map(|m| Series {
                    name: m.clone(),
                    points: medians(records, m, "xi", |r| (r.m == Some(fixed_m)).then_some(r.n as f64)),
                })
                .collect();
            let p = line_plot(&format!("Misclassification at m = {fixed_m}"), "n", "median xi", (true, false), by_n);
            out.push(("xi-vs-n.svg".into(), render_plot(&p)));
        }
        ExperimentKind::Lowerbound => {
            let series = ["error_sum", "inequality_floor"]
                .iter()
                .map(|metric| Series {
                    name: metric.to_string(),
                    points: medians(records, "lr-test", metric, n_key),
                })
                .collect();
            let p = line_plot("Likelihood-ratio test errors", "n", "value", (true, false), series);
            out.push(("lowerbound.svg".into(), render_plot(&p)));
        }
    }
    Ok(out)
}
