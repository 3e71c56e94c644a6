use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;
use tailcross::simulate::{ExperimentRow, Outcome};

use super::{required, Context};
use crate::args::PlotArgs;
use crate::error::{CliError, Result};
use crate::output::{emit, read_per_conditional, read_results, PerConditionalRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    GridLines,
    MseOverlay,
    ThresholdScatter,
}

impl std::str::FromStr for PlotKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid-lines" => Ok(PlotKind::GridLines),
            "mse-overlay" => Ok(PlotKind::MseOverlay),
            "threshold-scatter" => Ok(PlotKind::ThresholdScatter),
            other => Err(CliError::usage(format!("unknown plot kind '{other}'"))),
        }
    }
}

#[derive(Debug, Serialize)]
struct Resolved {
    data: PathBuf,
    kind: PlotKind,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values
            .into_iter()
            .filter(|v| v.is_finite())
            .fold(None, |acc, v| {
                Some(match acc {
                    None => Range { lo: v, hi: v },
                    Some(r) => Range {
                        lo: r.lo.min(v),
                        hi: r.hi.max(v),
                    },
                })
            })
    }

    fn union(self, other: Option<Range>) -> Range {
        match other {
            Some(o) => Range {
                lo: self.lo.min(o.lo),
                hi: self.hi.max(o.hi),
            },
            None => self,
        }
    }

    /// Widens degenerate ranges and adds a 5% margin.
    fn padded(self) -> Range {
        let span = self.hi - self.lo;
        let pad = if span > 0.0 {
            0.05 * span
        } else {
            0.5 * self.lo.abs().max(1.0)
        };
        Range {
            lo: self.lo - pad,
            hi: self.hi + pad,
        }
    }
}

/// Maps data coordinates into the plot area.
struct Frame {
    x: Range,
    y: Range,
    log_x: bool,
}

impl Frame {
    fn tx(&self, x: f64) -> f64 {
        let x = if self.log_x { x.log10() } else { x };
        LEFT + (x - self.x.lo) / (self.x.hi - self.x.lo) * (WIDTH - LEFT - RIGHT)
    }

    fn ty(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.lo) / (self.y.hi - self.y.lo) * (HEIGHT - TOP - BOTTOM)
    }
}

struct Svg {
    body: String,
}

impl Svg {
    fn new(title: &str) -> Self {
        let mut body = String::new();
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            body,
            r#"<style>.axis{{stroke:#000}} .grid{{stroke:#ddd}} .reference{{stroke:#888;stroke-dasharray:4 3}} .errorbar{{stroke-width:1}} .estimate,.mse,.ground-truth{{fill:none;stroke-width:1.5}} .mse{{stroke-dasharray:6 2}} .ground-truth{{stroke:#000;stroke-dasharray:1 2}} .non-positive{{fill:#fff;stroke-width:1.5}}</style>"#
        );
        let _ = writeln!(
            body,
            r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#fff"/>"##
        );
        let _ = writeln!(
            body,
            r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            (WIDTH - RIGHT + LEFT) / 2.0,
            escape(title)
        );
        Svg { body }
    }

    fn line(
        &mut self,
        class: &str,
        color: Option<&str>,
        (x1, y1): (f64, f64),
        (x2, y2): (f64, f64),
    ) {
        let stroke = color
            .map(|c| format!(r#" stroke="{c}""#))
            .unwrap_or_default();
        let _ = writeln!(
            self.body,
            r#"<line class="{class}"{stroke} x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#
        );
    }

    fn path(&mut self, class: &str, color: &str, points: &[(f64, f64)]) {
        if points.is_empty() {
            return;
        }
        let d: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(i, (x, y))| format!("{}{x:.2} {y:.2}", if i == 0 { "M" } else { "L" }))
            .collect();
        let _ = writeln!(
            self.body,
            r#"<path class="{class}" stroke="{color}" d="{}"/>"#,
            d.join(" ")
        );
    }

    fn marker(&mut self, non_positive: bool, color: &str, (x, y): (f64, f64)) {
        if non_positive {
            let _ = writeln!(
                self.body,
                r#"<path class="marker non-positive" stroke="{color}" d="M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2} Z"/>"#,
                x,
                y - 5.0,
                x - 4.5,
                y + 3.5,
                x + 4.5,
                y + 3.5
            );
        } else {
            let _ = writeln!(
                self.body,
                r#"<circle class="marker" fill="{color}" cx="{x:.2}" cy="{y:.2}" r="3.5"/>"#
            );
        }
    }

    fn text(&mut self, (x, y): (f64, f64), anchor: &str, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#,
            escape(text)
        );
    }

    fn axes(&mut self, f: &Frame, x_label: &str, y_label: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = f.x.lo + t * (f.x.hi - f.x.lo);
            let yv = f.y.lo + t * (f.y.hi - f.y.lo);
            let px = x0 + t * (x1 - x0);
            let py = y0 + t * (y1 - y0);
            self.line("grid", None, (px, y0), (px, y1));
            self.line("grid", None, (x0, py), (x1, py));
            let xlab = if f.log_x {
                tick(10f64.powf(xv))
            } else {
                tick(xv)
            };
            self.text((px, y0 + 16.0), "middle", &xlab);
            self.text((x0 - 6.0, py + 4.0), "end", &tick(yv));
        }
        self.line("axis", None, (x0, y0), (x1, y0));
        self.line("axis", None, (x0, y0), (x0, y1));
        self.text(((x0 + x1) / 2.0, HEIGHT - 18.0), "middle", x_label);
        let _ = writeln!(
            self.body,
            r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(y_label)
        );
    }

    fn legend(&mut self, entries: &[(String, &str)]) {
        for (i, (label, color)) in entries.iter().enumerate() {
            let y = TOP + 10.0 + 18.0 * i as f64;
            let x = WIDTH - RIGHT + 15.0;
            self.line("legend", Some(color), (x, y), (x + 20.0, y));
            self.text((x + 26.0, y + 4.0), "start", label);
        }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Mean and sample standard deviation of one grid cell of one series.
#[derive(Debug, Clone)]
struct Cell {
    x: f64,
    mean: f64,
    std: f64,
    non_positive: bool,
    ground_truth: Option<f64>,
    mse: Option<f64>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Series keyed by `method/estimator`, each a list of cells sorted by x.
fn cells(rows: &[ExperimentRow]) -> BTreeMap<String, Vec<Cell>> {
    let mut groups: BTreeMap<String, BTreeMap<u64, Vec<&ExperimentRow>>> = BTreeMap::new();
    for r in rows {
        if matches!(r.outcome, Outcome::Failed(_)) {
            continue;
        }
        let x = r.param.unwrap_or(0.0);
        groups
            .entry(format!("{}/{}", r.method, r.estimator))
            .or_default()
            .entry(order_key(x))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|(name, by_x)| {
            let list = by_x
                .into_values()
                .map(|rs| {
                    let values: Vec<f64> = rs.iter().filter_map(|r| r.outcome.value()).collect();
                    let (mean, std) = mean_std(&values);
                    let mses: Vec<f64> = rs.iter().filter_map(|r| r.mse).collect();
                    Cell {
                        x: rs[0].param.unwrap_or(0.0),
                        mean,
                        std,
                        non_positive: rs
                            .iter()
                            .any(|r| matches!(r.outcome, Outcome::NonPositive(_))),
                        ground_truth: rs[0].ground_truth,
                        mse: (!mses.is_empty()).then(|| mean_std(&mses).0),
                    }
                })
                .collect();
            (name, list)
        })
        .collect()
}

/// Total order on finite reals usable as a map key.
fn order_key(x: f64) -> u64 {
    let bits = x.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

fn grid_plot(rows: &[ExperimentRow], overlay_mse: bool) -> String {
    let series = cells(rows);
    let all: Vec<&Cell> = series.values().flatten().collect();
    let log_x = overlay_mse && !all.is_empty() && all.iter().all(|c| c.x > 0.0);
    let xs = || all.iter().map(|c| if log_x { c.x.log10() } else { c.x });
    let x = Range::of(xs())
        .unwrap_or(Range { lo: 0.0, hi: 1.0 })
        .padded();
    let mut y = Range::of(all.iter().flat_map(|c| [c.mean - c.std, c.mean + c.std]))
        .unwrap_or(Range { lo: 0.0, hi: 1.0 })
        .union(Range::of(all.iter().filter_map(|c| c.ground_truth)));
    if !overlay_mse {
        // keep the identity line visible across the whole grid
        y = y.union(Range::of(xs()));
    }
    let frame = Frame {
        x,
        y: y.padded(),
        log_x,
    };

    let title = if overlay_mse {
        "Tail estimates and rescaled log MSE"
    } else {
        "Estimated shape parameter"
    };
    let mut svg = Svg::new(title);
    let x_label = if overlay_mse {
        "model parameter"
    } else {
        "xi_max"
    };
    svg.axes(&frame, x_label, "estimated shape");
    if !overlay_mse {
        svg.line(
            "reference",
            None,
            (frame.tx(x.lo), frame.ty(x.lo)),
            (frame.tx(x.hi), frame.ty(x.hi)),
        );
    }
    let mut legend = Vec::new();
    for (i, (name, list)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        legend.push((name.clone(), color));
        let pts: Vec<(f64, f64)> = list
            .iter()
            .map(|c| (frame.tx(c.x), frame.ty(c.mean)))
            .collect();
        svg.path("estimate", color, &pts);
        for c in list {
            if c.std > 0.0 {
                let px = frame.tx(c.x);
                svg.line(
                    "errorbar",
                    Some(color),
                    (px, frame.ty(c.mean - c.std)),
                    (px, frame.ty(c.mean + c.std)),
                );
            }
            svg.marker(c.non_positive, color, (frame.tx(c.x), frame.ty(c.mean)));
        }
        if i == 0 {
            let truth: Vec<(f64, f64)> = list
                .iter()
                .filter_map(|c| c.ground_truth.map(|g| (frame.tx(c.x), frame.ty(g))))
                .collect();
            if !truth.is_empty() {
                svg.path("ground-truth", "#000", &truth);
                legend.push(("ground truth".into(), "#000"));
            }
        }
    }
    if overlay_mse {
        mse_path(&mut svg, &frame, &series);
        legend.push(("log MSE (rescaled)".into(), "#555"));
    }
    svg.legend(&legend);
    svg.finish()
}

/// Log10 of the per-cell MSE, mapped linearly onto the estimate axis range.
fn mse_path(svg: &mut Svg, frame: &Frame, series: &BTreeMap<String, Vec<Cell>>) {
    let mut by_x: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for c in series.values().flatten() {
        if let Some(m) = c.mse.filter(|m| *m > 0.0) {
            by_x.entry(order_key(c.x)).or_insert((c.x, m.log10()));
        }
    }
    let Some(r) = Range::of(by_x.values().map(|v| v.1)) else {
        return;
    };
    let lo = frame.y.lo + 0.05 * (frame.y.hi - frame.y.lo);
    let hi = frame.y.hi - 0.05 * (frame.y.hi - frame.y.lo);
    let pts: Vec<(f64, f64)> = by_x
        .values()
        .map(|&(x, l)| {
            let t = if r.hi > r.lo {
                (l - r.lo) / (r.hi - r.lo)
            } else {
                0.5
            };
            (frame.tx(x), frame.ty(lo + t * (hi - lo)))
        })
        .collect();
    svg.path("mse", "#555", &pts);
}

fn scatter_plot(rows: &[PerConditionalRow]) -> String {
    let pts: Vec<&PerConditionalRow> = rows.iter().filter(|r| r.estimate.is_some()).collect();
    let x = Range::of(pts.iter().map(|r| r.threshold))
        .unwrap_or(Range { lo: 0.0, hi: 1.0 })
        .padded();
    let y = Range::of(pts.iter().filter_map(|r| r.estimate))
        .unwrap_or(Range { lo: 0.0, hi: 1.0 })
        .padded();
    let frame = Frame { x, y, log_x: false };
    let mut svg = Svg::new("Per-draw threshold against estimated shape");
    svg.axes(&frame, "97th percentile of |prediction|", "estimated shape");
    let mut params: Vec<f64> = Vec::new();
    for r in &pts {
        if !params.contains(&r.param) {
            params.push(r.param);
        }
    }
    for r in &pts {
        let i = params.iter().position(|p| *p == r.param).unwrap_or(0);
        let color = PALETTE[i % PALETTE.len()];
        let (px, py) = (frame.tx(r.threshold), frame.ty(r.estimate.unwrap_or(0.0)));
        let _ = writeln!(
            svg.body,
            r#"<circle class="point" fill="{color}" fill-opacity="0.6" cx="{px:.2}" cy="{py:.2}" r="2.5"/>"#
        );
    }
    let legend: Vec<(String, &str)> = params
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("param {}", tick(*p)), PALETTE[i % PALETTE.len()]))
        .collect();
    svg.legend(&legend);
    svg.finish()
}

pub fn render(kind: PlotKind, data: &std::path::Path) -> Result<String> {
    Ok(match kind {
        PlotKind::GridLines => grid_plot(&read_results(data)?, false),
        PlotKind::MseOverlay => grid_plot(&read_results(data)?, true),
        PlotKind::ThresholdScatter => scatter_plot(&read_per_conditional(data)?),
    })
}

pub fn run(args: &PlotArgs, ctx: &Context) -> Result<()> {
    let out = required(args.common.out.clone(), "out")?;
    let resolved = Resolved {
        data: required(args.data.clone(), "data")?,
        kind: required(args.kind.as_deref(), "kind")?.parse()?,
    };
    let svg = render(resolved.kind, &resolved.data)?;
    emit(Some(&out), |w| w.write_all(svg.as_bytes()))?;
    ctx.manifest("plot", &out, &resolved, &[])
}
