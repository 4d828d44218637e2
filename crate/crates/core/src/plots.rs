//! Minimal static SVG line charts for run artifacts.

use std::fmt::Write as _;

use crate::sim::SimLog;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: [f64; 4] = [40.0, 20.0, 50.0, 70.0]; // top, right, bottom, left
const MAX_POINTS: usize = 4000;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub label: &'a str,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series<'a>>,
    /// Same scale on both axes (for trajectories)
    pub equal_aspect: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Round tick spacing covering `span` in roughly `n` steps.
fn tick_step(span: f64, n: f64) -> f64 {
    let raw = span / n;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.0 {
        2.0
    } else if f < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        let pad = 0.5 * (1.0 + lo.abs()) * 1e-3;
        return (lo - pad, hi + pad);
    }
    let pad = 0.04 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Chart<'_> {
    pub fn to_svg(&self) -> String {
        let [mt, mr, mb, ml] = MARGIN;
        let pw = WIDTH - ml - mr;
        let ph = HEIGHT - mt - mb;
        let (mut x0, mut x1) = bounds(self.series.iter().flat_map(|s| s.x.iter().copied()));
        let (mut y0, mut y1) = bounds(self.series.iter().flat_map(|s| s.y.iter().copied()));
        if self.equal_aspect {
            let sx = (x1 - x0) / pw;
            let sy = (y1 - y0) / ph;
            if sx > sy {
                let c = 0.5 * (y0 + y1);
                y0 = c - 0.5 * sx * ph;
                y1 = c + 0.5 * sx * ph;
            } else {
                let c = 0.5 * (x0 + x1);
                x0 = c - 0.5 * sy * pw;
                x1 = c + 0.5 * sy * pw;
            }
        }
        let px = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| mt + (y1 - y) / (y1 - y0) * ph;

        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(self.title)
        );

        for (lo, hi, horizontal) in [(x0, x1, true), (y0, y1, false)] {
            let step = tick_step(hi - lo, 6.0);
            let mut v = (lo / step).ceil() * step;
            while v <= hi {
                let label = format!("{}", (v / step).round() * step);
                let label = if label.len() > 9 {
                    format!("{v:.3e}")
                } else {
                    label
                };
                if horizontal {
                    let x = px(v);
                    let _ = writeln!(
                        out,
                        r##"<line x1="{x:.2}" y1="{mt}" x2="{x:.2}" y2="{:.2}" stroke="#e5e5e5"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
                        mt + ph,
                        mt + ph + 16.0
                    );
                } else {
                    let y = py(v);
                    let _ = writeln!(
                        out,
                        r##"<line x1="{ml}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"##,
                        ml + pw,
                        ml - 6.0,
                        y + 4.0
                    );
                }
                v += step;
            }
        }
        let _ = writeln!(
            out,
            r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            ml + pw / 2.0,
            HEIGHT - 12.0,
            escape(self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            mt + ph / 2.0,
            escape(self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let stride = s.x.len().div_ceil(MAX_POINTS).max(1);
            let mut pts = String::new();
            let n = s.x.len().min(s.y.len());
            for k in (0..n)
                .step_by(stride)
                .chain((n > 0 && (n - 1) % stride != 0).then_some(n - 1))
            {
                if s.x[k].is_finite() && s.y[k].is_finite() {
                    let _ = write!(pts, "{:.2},{:.2} ", px(s.x[k]), py(s.y[k]));
                }
            }
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.trim_end()
            );
            let ly = mt + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                ml + pw - 150.0,
                ml + pw - 128.0,
                ml + pw - 122.0,
                ly + 4.0,
                escape(s.label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// File names of the standard run plots, in the order of [`run_charts`].
pub const PLOT_FILES: [&str; 4] = ["trajectory.svg", "e_h1.svg", "e_h3.svg", "steer.svg"];

/// Vehicle path against the reference, both estimation errors and the
/// steering command.
pub fn run_charts(log: &SimLog) -> [String; 4] {
    let t = log.column(|r| r.t);
    let title = |what: &str| format!("{}: {what}", log.scenario);
    let trajectory = Chart {
        title: &title("trajectory"),
        x_label: "X [m]",
        y_label: "Y [m]",
        series: vec![
            Series {
                label: "reference",
                x: log.column(|r| r.ref_x),
                y: log.column(|r| r.ref_y),
            },
            Series {
                label: "vehicle",
                x: log.column(|r| r.x),
                y: log.column(|r| r.y),
            },
        ],
        equal_aspect: true,
    }
    .to_svg();
    let single = |name: &str, label: &str, y: Vec<f64>| {
        Chart {
            title: &title(name),
            x_label: "t [s]",
            y_label: label,
            series: vec![Series {
                label: name,
                x: t.clone(),
                y,
            }],
            equal_aspect: false,
        }
        .to_svg()
    };
    let e_h1 = single("e_h1", "z1 - z1_hat [m]", log.column(|r| r.e_h1));
    let e_h3 = single("e_h3", "z3 - z3_hat [rad]", log.column(|r| r.e_h3));
    let steer = single(
        "steering",
        "applied steering command [rad]",
        log.column(|r| r.steer),
    );
    [trajectory, e_h1, e_h3, steer]
}
