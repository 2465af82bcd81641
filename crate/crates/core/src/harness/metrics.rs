use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::minilang::ErrorType;
use crate::mrlf::{InnerLossReport, IterationRecord, TrainHistory};
use crate::rewards::RewardBreakdown;

/// Per-iteration metrics line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub iteration: u64,
    pub pass_at_1: f64,
    pub pass_at_5: Option<f64>,
    pub rollout_pass_rate: f64,
    pub losses: InnerLossReport,
    pub rewards: RewardBreakdown,
    pub errors: BTreeMap<ErrorType, u64>,
    pub meta_grad_norm: f64,
    pub theta_norm: f64,
}

impl From<&IterationRecord> for MetricsRecord {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iteration: r.iteration,
            pass_at_1: r.pass_at_1,
            pass_at_5: r.pass_at_5,
            rollout_pass_rate: r.rollout_pass_rate,
            losses: r.losses,
            rewards: r.rewards,
            errors: r.errors.clone(),
            meta_grad_norm: r.meta_grad_norm,
            theta_norm: r.theta_norm,
        }
    }
}

/// JSON formatter that writes every float with 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
}

/// Compact JSON with 17-significant-digit floats.
pub fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17);
    value.serialize(&mut ser).expect("metrics serialize");
    String::from_utf8(out).expect("json is utf-8")
}

/// `x` to four significant digits, switching to exponent form outside
/// `[1e-3, 1e5)`.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-3..5).contains(&mag) {
        return format!("{x:.3e}");
    }
    format!("{x:.*}", (3 - mag).max(0) as usize)
}

/// Plain-text table: a header row and aligned columns.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: Vec<&str>| {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut s = line(header.to_vec());
    s.push('\n');
    for r in rows {
        s.push_str(&line(r.iter().map(String::as_str).collect()));
        s.push('\n');
    }
    s
}

fn window_mean(records: &[IterationRecord], f: impl Fn(&IterationRecord) -> f64) -> f64 {
    records.iter().map(f).sum::<f64>() / records.len() as f64
}

/// Human summary of a training history.
pub fn summary_table(history: &TrainHistory) -> String {
    let r = &history.records;
    let w = r.len().clamp(1, 20);
    let (first, last) = (&r[..w.min(r.len())], &r[r.len().saturating_sub(w)..]);
    let stop = history.stop.map_or("running", |s| match s {
        crate::mrlf::StopReason::MaxIterations => "max_iterations",
        crate::mrlf::StopReason::Plateau => "plateau",
    });
    let final_losses = r.last().map(|x| x.losses).unwrap_or_default();
    let mut s = String::new();
    let _ = writeln!(s, "iterations: {}  stop: {stop}", r.len());
    let rows = vec![
        vec![
            format!("first {}", first.len()),
            sig4(window_mean(first, |x| x.pass_at_1)),
            sig4(window_mean(first, |x| x.rollout_pass_rate)),
            sig4(window_mean(first, |x| x.rewards.composite)),
            sig4(window_mean(first, |x| x.losses.l_inner)),
        ],
        vec![
            format!("last {}", last.len()),
            sig4(window_mean(last, |x| x.pass_at_1)),
            sig4(window_mean(last, |x| x.rollout_pass_rate)),
            sig4(window_mean(last, |x| x.rewards.composite)),
            sig4(window_mean(last, |x| x.losses.l_inner)),
        ],
    ];
    s.push_str(&render_table(&["window", "pass@1", "rollout_pass", "composite", "l_inner"], &rows));
    let rows = vec![final_losses.components().iter().chain([&final_losses.l_inner]).map(|&v| sig4(v)).collect()];
    s.push_str("final losses\n");
    s.push_str(&render_table(&["sl", "coarse", "error", "complexity", "style", "negative", "inner"], &rows));
    s
}

/// Writes one metrics line per iteration to `path` and the summary table to
/// a sibling `.summary.txt` file, returning the summary path.
pub fn emit_report(history: &TrainHistory, path: &Path) -> io::Result<PathBuf> {
    if history.records.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "history is empty"));
    }
    let mut out = String::new();
    for r in &history.records {
        out.push_str(&to_json_line(&MetricsRecord::from(r)));
        out.push('\n');
    }
    fs::write(path, out)?;
    let summary = path.with_extension("summary.txt");
    fs::write(&summary, summary_table(history))?;
    Ok(summary)
}

pub fn read_metrics(path: &Path) -> io::Result<Vec<MetricsRecord>> {
    fs::read_to_string(path)?
        .lines()
        .map(|l| serde_json::from_str(l).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
        .collect()
}
