// SPDX-License-Identifier: Apache-2.0

//! CSV, SVG and canonical-JSON writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha1::{Digest, Sha1};

use super::PowerCurvePoint;
use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const CSV_HEADER: [&str; 10] = [
    "scenario",
    "n",
    "param",
    "reps",
    "empirical_power",
    "empirical_se",
    "predicted_power",
    "m_hat",
    "sigma_hat",
    "seed",
];

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.max(1) - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal text of `x` rounded to 12 significant digits.
pub fn format_sig(x: f64) -> String {
    let r = round_sig(x, SIGNIFICANT_DIGITS);
    if r == 0.0 {
        return "0".into();
    }
    let s = format!("{r:?}");
    match s.strip_suffix(".0") {
        Some(t) => t.to_string(),
        None => s,
    }
}

/// SHA-1 of `"blob <len>\0" ++ bytes`, as computed by `git hash-object`.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().fold(String::with_capacity(40), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// JSON with object keys sorted and floats at 12 significant digits.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T, pretty: bool) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v, pretty, 0);
    Ok(out)
}

fn write_value(out: &mut String, v: &Value, pretty: bool, depth: usize) {
    let newline = |out: &mut String, depth: usize| {
        if pretty {
            out.push('\n');
            out.push_str(&"  ".repeat(depth));
        }
    };
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&n.as_f64().map(format_sig).unwrap_or_else(|| "null".into()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                write_value(out, item, pretty, depth + 1);
            }
            newline(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push('{');
            for (i, (k, item)) in sorted.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                if pretty {
                    out.push(' ');
                }
                write_value(out, item, pretty, depth + 1);
            }
            newline(out, depth);
            out.push('}');
        }
    }
}

pub fn csv_string(points: &[PowerCurvePoint]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.write_record([
            p.scenario.clone(),
            p.n.to_string(),
            format_sig(p.param),
            p.reps.to_string(),
            format_sig(p.empirical_power),
            format_sig(p.empirical_se),
            p.predicted_power.map(format_sig).unwrap_or_default(),
            format_sig(p.m_hat),
            format_sig(p.sigma_hat),
            p.seed.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_csv(points: &[PowerCurvePoint], path: &Path) -> Result<()> {
    require_points(points)?;
    std::fs::write(path, csv_string(points)?)?;
    Ok(())
}

fn require_points(points: &[PowerCurvePoint]) -> Result<()> {
    if points.is_empty() {
        Err(Error::InvalidArgument("no points to write".into()))
    } else {
        Ok(())
    }
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 220.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;

const REDS: [&str; 4] = ["#d62728", "#8c1c13", "#ff7f0e", "#e377c2"];
const BLUES: [&str; 4] = ["#1f77b4", "#08306b", "#17becf", "#6a51a3"];
const DASHES: [&str; 3] = ["", "6 3", "2 2"];

struct Curve {
    label: String,
    color: &'static str,
    dash: &'static str,
    xy: Vec<(f64, f64)>,
}

/// Groups points into curves: one empirical (red family) and, when every
/// point carries a prediction, one predicted (blue family) per
/// `(scenario, n)` pair, in first-appearance order.
fn curves(points: &[PowerCurvePoint]) -> Vec<Curve> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for p in points {
        let k = (p.scenario.clone(), p.n);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let multi_n = keys.iter().any(|(s, n)| keys.iter().any(|(s2, n2)| s == s2 && n != n2));
    let mut out = Vec::new();
    for (i, (scenario, n)) in keys.iter().enumerate() {
        let group: Vec<&PowerCurvePoint> = points.iter().filter(|p| &p.scenario == scenario && p.n == *n).collect();
        let name = if multi_n { format!("{scenario} n={n}") } else { scenario.clone() };
        let dash = DASHES[(i / REDS.len()) % DASHES.len()];
        out.push(Curve {
            label: format!("{name} empirical"),
            color: REDS[i % REDS.len()],
            dash,
            xy: group.iter().map(|p| (p.param, p.empirical_power)).collect(),
        });
        if group.iter().all(|p| p.predicted_power.is_some()) {
            out.push(Curve {
                label: format!("{name} predicted"),
                color: BLUES[i % BLUES.len()],
                dash,
                xy: group.iter().map(|p| (p.param, p.predicted_power.unwrap_or(f64::NAN))).collect(),
            });
        }
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn svg_string(points: &[PowerCurvePoint], title: &str) -> String {
    let curves = curves(points);
    let (mut x0, mut x1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.param), b.max(p.param)));
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    // axes and ticks
    let _ = writeln!(
        s,
        r#"<path d="M{l:.2} {t:.2} V{b:.2} H{r:.2}" fill="none" stroke="black"/>"#,
        l = LEFT,
        t = TOP,
        b = TOP + ph,
        r = LEFT + pw
    );
    for k in 0..=5 {
        let f = k as f64 / 5.0;
        let x = x0 + f * (x1 - x0);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{y1:.2}" stroke="black"/><text x="{px:.2}" y="{ty:.2}" text-anchor="middle">{label}</text>"#,
            px = sx(x),
            y0 = TOP + ph,
            y1 = TOP + ph + 4.0,
            ty = TOP + ph + 16.0,
            label = format_sig(round_sig(x, 4))
        );
        let _ = writeln!(
            s,
            r#"<line x1="{x0:.2}" y1="{py:.2}" x2="{x1:.2}" y2="{py:.2}" stroke="black"/><text x="{tx:.2}" y="{ty:.2}" text-anchor="end">{label}</text>"#,
            x0 = LEFT - 4.0,
            x1 = LEFT,
            py = sy(f),
            tx = LEFT - 6.0,
            ty = sy(f) + 4.0,
            label = format_sig(f)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">param</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">power</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    for c in &curves {
        let pts: Vec<String> = c.xy.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let dash = if c.dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{}""#, c.dash) };
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            pts.join(" "),
            c.color
        );
        for &(x, y) in &c.xy {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}"/>"#, sx(x), sy(y), c.color);
        }
    }
    for (i, c) in curves.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * i as f64;
        let x = LEFT + pw + 12.0;
        let dash = if c.dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{}""#, c.dash) };
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="1.5"{dash}/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 20.0,
            c.color,
            x + 24.0,
            y + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_svg(points: &[PowerCurvePoint], path: &Path) -> Result<()> {
    require_points(points)?;
    let title = points[0].scenario.split('/').next().unwrap_or("power").to_string();
    std::fs::write(path, svg_string(points, &title))?;
    Ok(())
}
