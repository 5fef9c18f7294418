//! Text, CSV and SVG renderings of solver results.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::newton::SolveReport;
use crate::ode::Trajectory;

/// Table value: 7 decimals, or short exponent form for tiny nonzero values.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        "0.0000000".to_string()
    } else if v.abs() < 1e-6 {
        format!("{v:.3e}")
    } else {
        format!("{v:.7}")
    }
}

/// Shortest decimal that round-trips the value rounded to 15 significant digits.
pub fn format_csv_number(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{}", if v == 0.0 { 0.0 } else { v });
    }
    let rounded: f64 = format!("{v:.14e}").parse().expect("formatted float parses");
    let mag = rounded.abs();
    if (1e-4..1e15).contains(&mag) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// Two-column initial/final value table.
pub fn boundary_table(labels: &[&str], report: &SolveReport) -> String {
    let traj = &report.final_trajectory;
    let (ta, tb) = (traj.t_start(), traj.t_end());
    let left: Vec<String> = labels
        .iter()
        .zip(report.initial_values())
        .map(|(l, v)| format!("{l}({ta})={}", format_value(*v)))
        .collect();
    let right: Vec<String> = labels
        .iter()
        .zip(report.final_values())
        .map(|(l, v)| format!("{l}({tb})={}", format_value(*v)))
        .collect();
    let width = left
        .iter()
        .map(String::len)
        .chain(std::iter::once("Initial values".len()))
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$} | Final values", "Initial values");
    for (l, r) in left.iter().zip(&right) {
        let _ = writeln!(out, "{l:<width$} | {r}");
    }
    out
}

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=traj.dim()).map(|i| format!("x{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for node in traj.nodes() {
        let row: Vec<String> = std::iter::once(node.t)
            .chain(node.x.iter().copied())
            .map(format_csv_number)
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(mut w: W, report: &SolveReport) -> io::Result<()> {
    let k = report.c_final.len();
    let mut header = vec!["k".to_string()];
    header.extend((1..=k).map(|i| format!("c{i}")));
    header.push("residual_inf".into());
    header.push("step_inf".into());
    writeln!(w, "{}", header.join(","))?;
    for it in &report.iterations {
        let mut row = vec![it.k.to_string()];
        row.extend(it.c.iter().map(|v| format_csv_number(*v)));
        row.push(format_csv_number(it.residual_norm));
        row.push(format_csv_number(it.step_norm));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Parses a trajectory CSV back into `(t, x)` rows.
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<(f64, Vec<f64>)>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let cols = header.split(',').count();
    if !header.starts_with("t,") && header != "t" {
        return Err(format!("unexpected header '{header}'"));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let values = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| format!("'{s}': {e}")))
                .collect::<Result<Vec<f64>, String>>()?;
            if values.len() != cols {
                return Err(format!("row has {} fields, header has {cols}", values.len()));
            }
            Ok((values[0], values[1..].to_vec()))
        })
        .collect()
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const SAMPLES: usize = 400;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Line plot of every state component over `t`: one polyline per component,
/// linear axes autoscaled with a 5% margin, five ticks per axis, and a legend.
pub fn render_svg(traj: &Trajectory, labels: &[&str], title: &str) -> String {
    let (t0, t1) = (traj.t_start().min(traj.t_end()), traj.t_start().max(traj.t_end()));
    let times: Vec<f64> = (0..SAMPLES)
        .map(|k| {
            if k == SAMPLES - 1 {
                t1
            } else {
                t0 + (t1 - t0) * k as f64 / (SAMPLES - 1) as f64
            }
        })
        .collect();
    let samples: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| traj.interpolate(t).expect("sample times lie in the span"))
        .collect();

    let (mut lo, mut hi) = samples
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    if hi <= lo {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (ymin, ymax) = (lo - pad, hi + pad);
    let tpad = 0.05 * (t1 - t0);
    let (xmin, xmax) = (t0 - tpad, t1 + tpad);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |t: f64| MARGIN_LEFT + (t - xmin) / (xmax - xmin) * plot_w;
    let sy = |v: f64| MARGIN_TOP + (ymax - v) / (ymax - ymin) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="800" height="600" viewBox="0 0 800 600" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    let (x_axis_y, y_axis_x) = (MARGIN_TOP + plot_h, MARGIN_LEFT);
    let _ = writeln!(
        s,
        r#"<line x1="{y_axis_x:.1}" y1="{x_axis_y:.1}" x2="{:.1}" y2="{x_axis_y:.1}" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        s,
        r#"<line x1="{y_axis_x:.1}" y1="{MARGIN_TOP:.1}" x2="{y_axis_x:.1}" y2="{x_axis_y:.1}" stroke="black"/>"#
    );
    for k in 0..TICKS {
        let frac = k as f64 / (TICKS - 1) as f64;
        let tv = xmin + frac * (xmax - xmin);
        let px = sx(tv);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.1}" y1="{x_axis_y:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#,
            x_axis_y + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x_axis_y + 20.0,
            tick_label(tv)
        );
        let yv = ymin + frac * (ymax - ymin);
        let py = sy(yv);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{py:.1}" x2="{y_axis_x:.1}" y2="{py:.1}" stroke="black"/>"#,
            y_axis_x - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            y_axis_x - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );

    for i in 0..traj.dim() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = times
            .iter()
            .zip(&samples)
            .map(|(t, x)| format!("{:.2},{:.2}", sx(*t), sy(x[i])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
    }

    let legend_x = MARGIN_LEFT + plot_w - 110.0;
    for i in 0..traj.dim() {
        let color = PALETTE[i % PALETTE.len()];
        let y = MARGIN_TOP + 15.0 + 18.0 * i as f64;
        let label = labels.get(i).map_or_else(|| format!("x{}", i + 1), |l| l.to_string());
        let _ = writeln!(
            s,
            r#"<line x1="{legend_x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"/>"#,
            legend_x + 25.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            legend_x + 32.0,
            y + 4.0,
            escape(&label)
        );
    }
    s.push_str("</svg>\n");
    s
}
