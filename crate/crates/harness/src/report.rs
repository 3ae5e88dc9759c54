//! CSV and table output. Numbers use six significant digits and `.` as the
//! decimal separator regardless of locale.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::experiment::{AggregateRow, ExperimentOutput, Reference, TrialRow};

pub const SUMMARY_HEADER: &str =
    "delta,trials,error_rate,mean_tau,stddev_tau,slope,t_star_or_bounds,tracking_distance";
pub const TRIALS_HEADER: &str = "seed,delta,tau,declared,correct,capped,final_tracking_distance";
pub const TRACE_HEADER: &str = "seed,delta,t,tracking_distance,z,zeta";

const SIG_DIGITS: i32 = 6;

/// `%g`-style formatting with six significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Exponent after rounding, so 999999.7 is treated as 1e6.
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS).contains(&exp) {
        let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

fn reference_cell(r: &Reference) -> String {
    match r {
        Reference::TStar(t) => fmt_sig(*t),
        Reference::Bounds { upper, lower } => format!("{};{}", fmt_sig(*upper), fmt_sig(*lower)),
    }
}

fn summary_cells(row: &AggregateRow) -> [String; 8] {
    [
        fmt_sig(row.delta),
        row.trials.to_string(),
        fmt_sig(row.error_rate),
        fmt_sig(row.mean_tau),
        fmt_sig(row.stddev_tau),
        fmt_sig(row.slope),
        reference_cell(&row.reference),
        opt(row.tracking_distance),
    ]
}

pub fn summary_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&summary_cells(row).join(","));
        out.push('\n');
    }
    out
}

pub fn trials_csv(trials: &[TrialRow]) -> String {
    let mut out = String::from(TRIALS_HEADER);
    out.push('\n');
    for r in trials {
        let declared = r.declared.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.seed,
            fmt_sig(r.delta),
            r.tau,
            declared,
            r.correct,
            r.capped,
            opt(r.final_tracking_distance)
        );
    }
    out
}

pub fn trace_csv(trials: &[TrialRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trials {
        for p in &r.trace {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.seed,
                fmt_sig(r.delta),
                p.t,
                fmt_sig(p.tracking_distance),
                fmt_sig(p.z),
                fmt_sig(p.zeta)
            );
        }
    }
    out
}

/// Fixed-width table mirroring the summary CSV.
pub fn summary_table(rows: &[AggregateRow]) -> String {
    let header: Vec<&str> = SUMMARY_HEADER.split(',').collect();
    let body: Vec<[String; 8]> = rows.iter().map(summary_cells).collect();
    let widths: Vec<usize> = (0..8)
        .map(|i| {
            body.iter()
                .map(|r| r[i].len())
                .chain([header[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        out.push_str(padded.join("  ").trim_end());
        out.push('\n');
    };
    line(header.clone(), &mut out);
    for r in &body {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

/// Writes `summary.csv`, `trials.csv` and, when any trial was traced,
/// `trace.csv` into `dir`. Returns the paths written.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec![
        (dir.join("summary.csv"), summary_csv(&output.rows)),
        (dir.join("trials.csv"), trials_csv(&output.trials)),
    ];
    if output.trials.iter().any(|t| !t.trace.is_empty()) {
        files.push((dir.join("trace.csv"), trace_csv(&output.trials)));
    }
    let mut written = Vec::new();
    for (path, text) in files {
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}
