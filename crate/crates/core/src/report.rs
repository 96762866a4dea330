//! CSV emission and static SVG line plots.
//!
//! Plots are rendered from CSV text alone, so they can be regenerated
//! offline from saved output.

use std::fmt::Write as _;

use thiserror::Error;

use crate::errterm::ErrEstimate;
use crate::oseledets::SpectrumEstimate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("CSV has no column named {0}")]
    Column(String),
    #[error("CSV line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("nothing to plot")]
    Empty,
}

pub const SPECTRUM_HEADER: &str = "label,i,lambda,stderr,samples,T,seed,normalization";
pub const ERR_HEADER: &str = "t,count,count_over_vol,running_err";
pub const SWEEP_HEADER: &str = "parameter,s,lambda1,stderr,status";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn spectrum_csv(label: &str, est: &SpectrumEstimate, time: f64, seed: u64) -> String {
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    for (i, (l, e)) in est.values.iter().zip(&est.stderr).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(label),
            i + 1,
            l,
            e,
            est.samples,
            time,
            seed,
            est.normalization
        );
    }
    out
}

/// Rows of the running estimate followed by one summary row:
/// `summary,<value>,converged=<0|1> spread=<s> unaveraged=<u>,tails=<T>:<v> …`.
pub fn err_csv(est: &ErrEstimate) -> String {
    let mut out = String::from(ERR_HEADER);
    out.push('\n');
    for r in &est.rows {
        let _ = writeln!(out, "{},{},{},{}", r.t, r.count, r.count_over_vol, r.running_err);
    }
    let tails: Vec<String> = est.tail.iter().map(|(t, v)| format!("{t}:{v}")).collect();
    let _ = writeln!(
        out,
        "summary,{},converged={} spread={} unaveraged={},tails={}",
        est.value,
        u8::from(est.converged),
        est.tail_spread,
        est.unaveraged,
        tails.join(" ")
    );
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub s: f64,
    pub outcome: std::result::Result<(f64, f64), String>,
}

pub fn sweep_csv(parameter: &str, rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        match &r.outcome {
            Ok((l, e)) => {
                let _ = writeln!(out, "{},{},{},{},ok", csv_field(parameter), r.s, l, e);
            }
            Err(msg) => {
                let status = csv_field(&format!("failed: {msg}"));
                let _ = writeln!(out, "{},{},,,{}", csv_field(parameter), r.s, status);
            }
        }
    }
    out
}

/// Splits one CSV line, honouring double quotes.
pub fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut cur)),
            _ => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

/// Which columns to draw.
#[derive(Debug, Clone)]
pub struct PlotSpec<'a> {
    pub title: &'a str,
    pub x: &'a str,
    pub y: &'a str,
    pub err: Option<&'a str>,
}

impl PlotSpec<'static> {
    /// The default plot for a CSV with one of the known headers.
    pub fn for_header(header: &str) -> Option<Self> {
        match header.trim() {
            SPECTRUM_HEADER => Some(PlotSpec { title: "Lyapunov spectrum", x: "i", y: "lambda", err: Some("stderr") }),
            ERR_HEADER => Some(PlotSpec { title: "running error term", x: "t", y: "running_err", err: None }),
            SWEEP_HEADER => Some(PlotSpec { title: "top exponent along sweep", x: "s", y: "lambda1", err: Some("stderr") }),
            _ => None,
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// A polyline plot of `y` against `x`, skipping rows whose fields do not
/// parse as numbers (summary and failed rows).
pub fn svg_from_csv(csv: &str, spec: &PlotSpec<'_>) -> Result<String, ReportError> {
    let mut lines = csv.lines();
    let header = split_csv_line(lines.next().ok_or(ReportError::Empty)?);
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReportError::Column(name.to_string()))
    };
    let (xi, yi) = (col(spec.x)?, col(spec.y)?);
    let ei = spec.err.map(col).transpose()?;
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    for line in lines {
        let f = split_csv_line(line);
        let num = |i: usize| f.get(i).and_then(|s| s.parse::<f64>().ok());
        if let (Some(x), Some(y)) = (num(xi), num(yi)) {
            let e = ei.and_then(num).unwrap_or(0.0);
            pts.push((x, y, e));
        }
    }
    if pts.is_empty() {
        return Err(ReportError::Empty);
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y, e) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y - e);
        y1 = y1.max(y + e);
    }
    if x1 == x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 == y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#, W / 2.0, xml_escape(spec.title));
    let (ax0, ax1, ay0, ay1) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<path d="M{ax0},{ay1} L{ax0},{ay0} L{ax1},{ay0}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="black"/>"#, px(fx), ay0, ay0 + 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#, px(fx), ay0 + 18.0, tick(fx));
        let _ = writeln!(s, r#"<line x1="{1}" y1="{0:.2}" x2="{2}" y2="{0:.2}" stroke="black"/>"#, py(fy), ax0 - 5.0, ax0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#, ax0 - 8.0, py(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#, W / 2.0, H - 15.0, xml_escape(spec.x));
    let _ = writeln!(s, r#"<text x="15" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 15 {})">{}</text>"#, H / 2.0, H / 2.0, xml_escape(spec.y));
    let path: Vec<String> = pts.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#, path.join(" "));
    for &(x, y, e) in &pts {
        if e > 0.0 {
            let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="steelblue"/>"#, px(x), py(y - e), py(y + e));
        }
        if pts.len() <= 64 {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, px(x), py(y));
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e5) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::errterm::zero_estimate;
    use crate::oseledets::Normalization;

    fn estimate() -> SpectrumEstimate {
        SpectrumEstimate {
            values: vec![1.0, -1.0],
            stderr: vec![0.01, 0.02],
            samples: 4,
            normalization: Normalization::Minus4,
            per_sample: vec![],
            failures: vec![],
            caveat: None,
        }
    }

    #[test]
    fn spectrum_rows() {
        let csv = spectrum_csv("fuchsian triangle:3,3,4", &estimate(), 100.0, 7);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SPECTRUM_HEADER);
        assert_eq!(lines[1], "\"fuchsian triangle:3,3,4\",1,1,0.01,4,100,7,minus4");
        assert_eq!(split_csv_line(lines[2])[0], "fuchsian triangle:3,3,4");
        assert_eq!(split_csv_line(lines[2]).len(), 8);
    }

    #[test]
    fn sweep_marks_failures() {
        let rows = [
            SweepRow { s: 0.0, outcome: Ok((1.0, 0.1)) },
            SweepRow { s: 1.0, outcome: Err("relation residual 0.2".into()) },
        ];
        let csv = sweep_csv("bend_im", &rows);
        assert!(csv.lines().nth(2).unwrap().ends_with("failed: relation residual 0.2"));
        let svg = svg_from_csv(&csv, &PlotSpec::for_header(SWEEP_HEADER).unwrap()).unwrap();
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn err_summary_row() {
        let csv = err_csv(&zero_estimate(20.0));
        assert_eq!(csv.lines().next(), Some(ERR_HEADER));
        assert!(csv.lines().last().unwrap().starts_with("summary,0,converged=1"));
    }

    #[test]
    fn svg_is_a_function_of_the_csv() {
        let csv = spectrum_csv("x", &estimate(), 10.0, 1);
        let spec = PlotSpec::for_header(SPECTRUM_HEADER).unwrap();
        let a = svg_from_csv(&csv, &spec).unwrap();
        assert_eq!(a, svg_from_csv(&csv, &spec).unwrap());
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(matches!(
            svg_from_csv(&csv, &PlotSpec { title: "", x: "nope", y: "lambda", err: None }),
            Err(ReportError::Column(_))
        ));
        assert_eq!(svg_from_csv(SPECTRUM_HEADER, &spec), Err(ReportError::Empty));
    }

    #[test]
    fn quoted_fields_round_trip() {
        assert_eq!(split_csv_line(r#"a,"b,""c""",d"#), vec!["a", "b,\"c\"", "d"]);
    }
}
