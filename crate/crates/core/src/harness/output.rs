//! CSV emission and parsing.
//!
//! Reals are written as `{:.16e}` (17 significant digits), which parses back
//! to the identical `f64`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{IrlError, Result};
use crate::harness::experiment::{mean_sd, summarize, ExperimentOutput, MetricsRow, SummaryRow};

pub const ITERATIONS_HEADER: &str = "run_id,algorithm,estimator,iteration,loglik,similarity_J,value_true,value_expert,policy_agreement,iter_wall_ms";
pub const SUMMARY_HEADER: &str = "algorithm,estimator,mean_value_true,sd_value_true,mean_agreement,sd_agreement,mean_total_s,n_repeats,failures";
pub const PLOT_HEADER: &str = "series,iteration,mean,sd";

pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Metrics with a plot-data file each, by column name.
pub const PLOT_METRICS: [&str; 5] = [
    "loglik",
    "similarity_J",
    "value_true",
    "policy_agreement",
    "iter_wall_ms",
];

fn metric(row: &MetricsRow, name: &str) -> f64 {
    match name {
        "loglik" => row.loglik,
        "similarity_J" => row.similarity_j,
        "value_true" => row.value_true,
        "policy_agreement" => row.policy_agreement,
        "iter_wall_ms" => row.iter_wall_ms,
        _ => unreachable!("unknown metric {name}"),
    }
}

pub fn format_iterations_csv(rows: &[MetricsRow]) -> String {
    let mut s = format!("{ITERATIONS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.run_id,
            r.algorithm,
            r.estimator,
            r.iteration,
            r.loglik,
            r.similarity_j,
            r.value_true,
            r.value_expert,
            r.policy_agreement,
            r.iter_wall_ms
        );
    }
    s
}

pub fn format_summary_csv(summary: &[SummaryRow]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for r in summary {
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.algorithm,
            r.estimator,
            r.mean_value_true,
            r.sd_value_true,
            r.mean_agreement,
            r.sd_agreement,
            r.mean_total_s,
            r.n_repeats,
            r.failures
        );
    }
    s
}

/// Mean and sample deviation across runs per (series, iteration), where a
/// series is `ALGORITHM-ESTIMATOR`.
pub fn format_plot_data(rows: &[MetricsRow], name: &str) -> String {
    let mut series: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for r in rows {
        let label = format!("{}-{}", r.algorithm, r.estimator);
        let idx = match series.iter().position(|(l, _)| *l == label) {
            Some(i) => i,
            None => {
                series.push((label, Vec::new()));
                series.len() - 1
            }
        };
        let cols = &mut series[idx].1;
        if cols.len() <= r.iteration {
            cols.resize(r.iteration + 1, Vec::new());
        }
        cols[r.iteration].push(metric(r, name));
    }
    let mut s = format!("{PLOT_HEADER}\n");
    for (label, cols) in &series {
        for (t, vals) in cols.iter().enumerate().filter(|(_, v)| !v.is_empty()) {
            let (m, sd) = mean_sd(vals);
            let _ = writeln!(s, "{label},{t},{m:.16e},{sd:.16e}");
        }
    }
    s
}

fn fields(line: &str, n: usize, lineno: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != n {
        return Err(IrlError::parse(lineno, format!("expected {n} fields, found {}", f.len())));
    }
    Ok(f)
}

fn field<T: std::str::FromStr>(tok: &str, lineno: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| IrlError::parse(lineno, format!("cannot parse `{tok}`")))
}

fn body<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(IrlError::parse(1, "unexpected header")),
    }
    Ok(lines.filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| (i + 1, l)))
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<MetricsRow>> {
    body(text, ITERATIONS_HEADER)?
        .map(|(n, line)| {
            let f = fields(line, 10, n)?;
            Ok(MetricsRow {
                run_id: field(f[0], n)?,
                algorithm: f[1].parse().map_err(|_| IrlError::parse(n, "bad algorithm"))?,
                estimator: f[2].parse().map_err(|_| IrlError::parse(n, "bad estimator"))?,
                iteration: field(f[3], n)?,
                loglik: field(f[4], n)?,
                similarity_j: field(f[5], n)?,
                value_true: field(f[6], n)?,
                value_expert: field(f[7], n)?,
                policy_agreement: field(f[8], n)?,
                iter_wall_ms: field(f[9], n)?,
            })
        })
        .collect()
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    body(text, SUMMARY_HEADER)?
        .map(|(n, line)| {
            let f = fields(line, 9, n)?;
            Ok(SummaryRow {
                algorithm: f[0].parse().map_err(|_| IrlError::parse(n, "bad algorithm"))?,
                estimator: f[1].parse().map_err(|_| IrlError::parse(n, "bad estimator"))?,
                mean_value_true: field(f[2], n)?,
                sd_value_true: field(f[3], n)?,
                mean_agreement: field(f[4], n)?,
                sd_agreement: field(f[5], n)?,
                mean_total_s: field(f[6], n)?,
                n_repeats: field(f[7], n)?,
                failures: field(f[8], n)?,
            })
        })
        .collect()
}

/// Recomputes a summary from an iterations file, taking failure counts from
/// the emitted summary since failed runs leave no rows.
pub fn resummarize(iterations_csv: &str, summary_csv: &str) -> Result<Vec<SummaryRow>> {
    let rows = parse_metrics_csv(iterations_csv)?;
    let emitted = parse_summary_csv(summary_csv)?;
    let mut fresh = summarize(&rows, &[]);
    for s in &mut fresh {
        if let Some(e) = emitted
            .iter()
            .find(|e| e.algorithm == s.algorithm && e.estimator == s.estimator)
        {
            s.failures = e.failures;
        }
    }
    Ok(fresh)
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    std::fs::write(&path, text).map_err(|e| IrlError::io(&path, e))?;
    Ok(path)
}

/// Writes the iterations file, the summary file and one `plot_<metric>.csv`
/// per metric into `dir`, creating it if needed.
pub fn emit_outputs(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| IrlError::io(dir, e))?;
    let mut written = vec![
        write(dir.join(ITERATIONS_FILE), &format_iterations_csv(&output.rows))?,
        write(dir.join(SUMMARY_FILE), &format_summary_csv(&output.summary()))?,
    ];
    for name in PLOT_METRICS {
        written.push(write(
            dir.join(format!("plot_{name}.csv")),
            &format_plot_data(&output.rows, name),
        )?);
    }
    Ok(written)
}
