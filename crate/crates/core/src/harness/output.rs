use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;
use super::run::{RunSummary, TraceRecord};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "t,eta,alpha,loss,true_grad_norm,est_norm,err_norm,clipped,step_norm";

/// C's `%.17g`: 17 significant digits, trailing zeros dropped, exponent form
/// when the decimal exponent is below -4 or at least 17.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn trace_to_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            format_g17(r.eta),
            format_g17(r.alpha),
            format_g17(r.loss),
            format_g17(r.true_grad_norm),
            format_g17(r.est_norm),
            format_g17(r.err_norm),
            r.clipped as u8,
            format_g17(r.step_norm),
        );
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    write_file(path, &trace_to_csv(trace))
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config("trace CSV: unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::Config(format!("trace CSV line {}: {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad("expected 9 fields"));
            }
            let num = |j: usize| f[j].parse::<f64>().map_err(|_| bad(&format!("bad number `{}`", f[j])));
            Ok(TraceRecord {
                t: f[0].parse().map_err(|_| bad("bad t"))?,
                eta: num(1)?,
                alpha: num(2)?,
                loss: num(3)?,
                true_grad_norm: num(4)?,
                est_norm: num(5)?,
                err_norm: num(6)?,
                clipped: match f[7] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("clipped must be 0 or 1")),
                },
                step_norm: num(8)?,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    #[serde(flatten)]
    summary: &'a RunSummary,
    config: &'a RunConfig,
}

/// The summary's fields at top level plus a `config` key echoing the run config.
pub fn summary_json(summary: &RunSummary, config: &RunConfig) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&SummaryFile { summary, config })
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_summary_json(path: &Path, summary: &RunSummary, config: &RunConfig) -> Result<()> {
    write_file(path, &summary_json(summary, config)?)
}

/// Reads a summary file back, returning the summary and the echoed config.
pub fn read_summary_json(path: &Path) -> Result<(RunSummary, RunConfig)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let config = value
        .get("config")
        .cloned()
        .ok_or_else(|| Error::Config(format!("{}: missing `config`", path.display())))?;
    let mut rest = value;
    rest.as_object_mut().map(|m| m.remove("config"));
    let parse = |e: serde_json::Error| Error::Config(format!("{}: {e}", path.display()));
    Ok((serde_json::from_value(rest).map_err(parse)?, serde_json::from_value(config).map_err(parse)?))
}

/// Named trace columns accepted by [`emit_plot`].
pub fn column(r: &TraceRecord, name: &str) -> Option<f64> {
    Some(match name {
        "eta" => r.eta,
        "alpha" => r.alpha,
        "loss" => r.loss,
        "true_grad_norm" => r.true_grad_norm,
        "est_norm" => r.est_norm,
        "err_norm" => r.err_norm,
        "step_norm" => r.step_norm,
        _ => return None,
    })
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// SVG line chart of `columns` against `t`, both axes logarithmic.
/// Non-positive values are left out.
pub fn plot_svg(trace: &[TraceRecord], columns: &[&str]) -> Result<String> {
    let (w, h, pad) = (720.0, 440.0, 60.0);
    let mut series = Vec::new();
    for &c in columns {
        let pts: Vec<(f64, f64)> = trace
            .iter()
            .filter_map(|r| column(r, c).map(|v| (r.t as f64, v)))
            .filter(|&(_, v)| v > 0.0 && v.is_finite())
            .map(|(t, v)| (t.log10(), v.log10()))
            .collect();
        if column(&TraceRecord::zeroed(), c).is_none() {
            return Err(Error::invalid(format!("unknown trace column `{c}`")));
        }
        series.push((c, pts));
    }
    let all = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for d in (x0 as i32)..=(x1 as i32) {
        let x = sx(d as f64);
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, pad, h - pad);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"#, h - pad + 16.0);
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = sy(d as f64);
        let _ = writeln!(s, r##"<line x1="{pad}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, w - pad);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, pad - 6.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">t</text>"#, w / 2.0, h - 12.0);
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        if !path.is_empty() {
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
        }
        let ly = pad - 30.0 + 14.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" fill="{color}">{name}</text>"#, w - pad - 120.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(path: &Path, trace: &[TraceRecord], columns: &[&str]) -> Result<()> {
    write_file(path, &plot_svg(trace, columns)?)
}

impl TraceRecord {
    fn zeroed() -> Self {
        TraceRecord {
            t: 0,
            eta: 0.0,
            alpha: 0.0,
            loss: 0.0,
            true_grad_norm: 0.0,
            est_norm: 0.0,
            err_norm: 0.0,
            clipped: false,
            step_norm: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_matches_c_printf() {
        // expected strings from printf("%.17g")
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (100.0, "100"),
            (1.5e-5, "1.5e-05"),
            (1e-4, "0.0001"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (123456789.0, "123456789"),
            (-2.5, "-2.5"),
            (f64::MAX, "1.7976931348623157e+308"),
            (5e-324, "4.9406564584124654e-324"),
            (0.0, "0"),
            (1.0 / 3.0, "0.33333333333333331"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g17(x), want, "{x:e}");
        }
    }

    proptest! {
        #[test]
        fn g17_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            prop_assert_eq!(format_g17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(trace_to_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_parse_back() {
        let r = TraceRecord {
            t: 3,
            eta: 0.1,
            alpha: 1.0 / 3.0,
            loss: -1e-300,
            true_grad_norm: 2.0,
            est_norm: 1e20,
            err_norm: 0.0,
            clipped: true,
            step_norm: 7e-8,
        };
        let back = parse_trace_csv(&trace_to_csv(&[r, r])).unwrap();
        assert_eq!(back, vec![r, r]);
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = write_trace_csv(&blocker.join("trace.csv"), &[]).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }

    #[test]
    fn plot_rejects_unknown_column() {
        assert!(plot_svg(&[], &["nope"]).is_err());
        let svg = plot_svg(&[TraceRecord { t: 1, ..TraceRecord::zeroed() }], &["err_norm"]).unwrap();
        assert!(svg.starts_with("<svg"));
    }
}
