//! Turns cycle series into result artifacts: per-phase statistics, outlier
//! counts, phase comparisons, Table-shaped matrices and plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AttackSpec, CycleSeries, CANONICAL_CODES};
use crate::sim::BreakdownWindow;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty series")]
    EmptySeries,
    #[error("theta must be in (0, 1), got {0}")]
    BadTheta(f64),
    #[error("config id mismatch: {0} vs {1}")]
    ConfigMismatch(String, String),
    #[error("duplicate matrix cell for ({0}, {1})")]
    DuplicateCell(String, String),
    #[error("no runs supplied")]
    NoRuns,
    #[error("unknown plot mode {0:?}")]
    UnknownMode(String),
}

/// Statistics over the periods of one phase. Percentiles are nearest-rank.
/// Outliers are periods beyond `(1 ± theta) * nominal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub count: usize,
    pub mean_ns: f64,
    pub min_ns: u64,
    pub max_ns: u64,
    pub stddev_ns: f64,
    pub p50_ns: u64,
    pub p99_ns: u64,
    pub p999_ns: u64,
    pub outlier_count_high: usize,
    pub outlier_count_low: usize,
    pub max_over_nominal_ratio: f64,
    pub min_under_nominal_ratio: f64,
}

/// Nearest-rank percentile over sorted data: the ceil(q*n)-th value.
fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn compute_stats(
    series: &CycleSeries,
    nominal_ns: u64,
    theta: f64,
) -> Result<CycleStats, AnalysisError> {
    if series.records.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(AnalysisError::BadTheta(theta));
    }
    let mut periods: Vec<u64> = series.periods().collect();
    periods.sort_unstable();
    let n = periods.len();
    let sum: u128 = periods.iter().map(|&p| u128::from(p)).sum();
    let mean = sum as f64 / n as f64;
    let var = periods
        .iter()
        .map(|&p| {
            let d = p as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n as f64;
    let hi = (1.0 + theta) * nominal_ns as f64;
    let lo = (1.0 - theta) * nominal_ns as f64;
    Ok(CycleStats {
        count: n,
        mean_ns: mean,
        min_ns: periods[0],
        max_ns: periods[n - 1],
        stddev_ns: var.sqrt(),
        p50_ns: nearest_rank(&periods, 0.50),
        p99_ns: nearest_rank(&periods, 0.99),
        p999_ns: nearest_rank(&periods, 0.999),
        outlier_count_high: periods.iter().filter(|&&p| (p as f64) > hi).count(),
        outlier_count_low: periods.iter().filter(|&&p| (p as f64) < lo).count(),
        max_over_nominal_ratio: periods[n - 1] as f64 / nominal_ns as f64,
        min_under_nominal_ratio: periods[0] as f64 / nominal_ns as f64,
    })
}

/// Per-phase comparison for one procedure run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub config_id: String,
    pub attack: AttackSpec,
    pub stress: bool,
    pub nominal_ns: u64,
    pub idle_pre: CycleStats,
    pub attack_stats: CycleStats,
    pub idle_post: CycleStats,
    /// True when the post-idle maximum sits within tolerance of the
    /// pre-idle maximum, i.e. the attack left no lasting damage.
    pub persistent_ok: bool,
    pub attack_max_ratio: f64,
    pub outlier_high_delta: i64,
}

pub fn compare_phases(
    pre: &CycleSeries,
    attack: &CycleSeries,
    post: &CycleSeries,
    attack_spec: AttackSpec,
    stress: bool,
    nominal_ns: u64,
    theta: f64,
    tolerance: f64,
) -> Result<PhaseReport, AnalysisError> {
    for s in [attack, post] {
        if s.config_id != pre.config_id {
            return Err(AnalysisError::ConfigMismatch(
                pre.config_id.clone(),
                s.config_id.clone(),
            ));
        }
    }
    let idle_pre = compute_stats(pre, nominal_ns, theta)?;
    let attack_stats = compute_stats(attack, nominal_ns, theta)?;
    let idle_post = compute_stats(post, nominal_ns, theta)?;
    let persistent_ok = (idle_post.max_ns.abs_diff(idle_pre.max_ns) as f64)
        <= tolerance * nominal_ns as f64;
    Ok(PhaseReport {
        config_id: pre.config_id.clone(),
        attack: attack_spec,
        stress,
        nominal_ns,
        idle_pre,
        attack_stats,
        idle_post,
        persistent_ok,
        attack_max_ratio: attack_stats.max_ns as f64 / nominal_ns as f64,
        outlier_high_delta: attack_stats.outlier_count_high as i64
            - idle_pre.outlier_count_high as i64,
    })
}

/// Maximum-cycle-time matrix shaped like the result tables: one row per
/// config code, columns Idle + one per attack. Cells are nanoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    /// cells[row][col]; None = run missing or failed.
    pub cells: Vec<Vec<Option<u64>>>,
}

/// Table row order used in the result tables.
fn row_order_key(code: &str) -> usize {
    CANONICAL_CODES.iter().position(|&c| c == code).unwrap_or(usize::MAX)
}

/// Table column order: Idle first, then the attacks in table order.
fn column_order_key(label: &str) -> usize {
    ["Idle", "SYN flooding", "ARP flooding", "Nmap"]
        .iter()
        .position(|&c| c == label)
        .unwrap_or(usize::MAX)
}

pub fn build_result_matrix(runs: &[PhaseReport]) -> Result<ResultMatrix, AnalysisError> {
    if runs.is_empty() {
        return Err(AnalysisError::NoRuns);
    }
    let mut rows: Vec<String> = Vec::new();
    let mut columns: Vec<String> = vec!["Idle".to_string()];
    let mut cells: BTreeMap<(String, String), u64> = BTreeMap::new();
    for run in runs {
        let col = run.attack.column_label().to_string();
        if run.attack.is_attack() && !columns.contains(&col) {
            columns.push(col.clone());
        }
        if !rows.contains(&run.config_id) {
            rows.push(run.config_id.clone());
        }
        if run.attack.is_attack()
            && cells
                .insert((run.config_id.clone(), col.clone()), run.attack_stats.max_ns)
                .is_some()
        {
            return Err(AnalysisError::DuplicateCell(run.config_id.clone(), col));
        }
        // the Idle cell takes the worst of both idle phases across all runs
        let idle_worst = run.idle_pre.max_ns.max(run.idle_post.max_ns);
        cells
            .entry((run.config_id.clone(), "Idle".to_string()))
            .and_modify(|v| *v = (*v).max(idle_worst))
            .or_insert(idle_worst);
    }
    rows.sort_by_key(|r| (row_order_key(r), r.clone()));
    columns.sort_by_key(|c| (column_order_key(c), c.clone()));
    let grid = rows
        .iter()
        .map(|r| {
            columns
                .iter()
                .map(|c| cells.get(&(r.clone(), c.clone())).copied())
                .collect()
        })
        .collect();
    Ok(ResultMatrix { rows, columns, cells: grid })
}

impl ResultMatrix {
    pub fn cell(&self, row: &str, col: &str) -> Option<u64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.columns.iter().position(|x| x == col)?;
        self.cells[r][c]
    }

    /// Aligned text table, cells in milliseconds.
    pub fn render_text(&self) -> String {
        let mut widths = vec![4usize];
        for c in &self.columns {
            widths.push(c.len().max(9));
        }
        let mut out = String::new();
        let _ = write!(out, "{:<w$}", "", w = widths[0]);
        for (i, c) in self.columns.iter().enumerate() {
            let _ = write!(out, " | {:>w$}", c, w = widths[i + 1]);
        }
        out.push('\n');
        let total: usize = widths.iter().sum::<usize>() + 3 * self.columns.len();
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for (r, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "{:<w$}", row, w = widths[0]);
            for (c, _) in self.columns.iter().enumerate() {
                match self.cells[r][c] {
                    Some(ns) => {
                        let _ = write!(
                            out,
                            " | {:>w$}",
                            format!("{:.3} ms", ns as f64 / 1e6),
                            w = widths[c + 1]
                        );
                    }
                    None => {
                        let _ = write!(out, " | {:>w$}", "-", w = widths[c + 1]);
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Lossless CSV: cells in integer nanoseconds, empty = missing.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["config".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("csv write");
        for (r, row) in self.rows.iter().enumerate() {
            let mut rec = vec![row.clone()];
            for c in 0..self.columns.len() {
                rec.push(self.cells[r][c].map(|v| v.to_string()).unwrap_or_default());
            }
            w.write_record(&rec).expect("csv write");
        }
        String::from_utf8(w.into_inner().expect("csv flush")).expect("utf8")
    }

    pub fn from_csv(text: &str) -> Result<Self, AnalysisError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers().map_err(|_| AnalysisError::NoRuns)?.clone();
        let columns: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        let mut cells = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|_| AnalysisError::NoRuns)?;
            rows.push(rec[0].to_string());
            cells.push(
                rec.iter()
                    .skip(1)
                    .map(|v| if v.is_empty() { None } else { v.parse().ok() })
                    .collect(),
            );
        }
        if rows.is_empty() {
            return Err(AnalysisError::NoRuns);
        }
        Ok(ResultMatrix { rows, columns, cells })
    }
}

/// Plot-ready columnar data plus an optional SVG rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMode {
    Scatter,
    Histogram,
    CpuBreakdown,
}

impl PlotMode {
    pub fn parse(s: &str) -> Result<Self, AnalysisError> {
        match s {
            "scatter" => Ok(PlotMode::Scatter),
            "histogram" => Ok(PlotMode::Histogram),
            "cpu_breakdown" => Ok(PlotMode::CpuBreakdown),
            other => Err(AnalysisError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotData {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Cycle scatter: time since phase start (s) vs period (ms).
pub fn scatter_data(series: &CycleSeries) -> Result<PlotData, AnalysisError> {
    if series.records.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    Ok(PlotData {
        columns: vec!["time_s".into(), "period_ms".into()],
        rows: series
            .records
            .iter()
            .map(|r| vec![r.start_time_ns as f64 / 1e9, r.period_ns as f64 / 1e6])
            .collect(),
    })
}

/// Histogram with log-friendly bins: bin lower edge (ms) vs count.
pub fn histogram_data(series: &CycleSeries) -> Result<PlotData, AnalysisError> {
    if series.records.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    let min = series.periods().min().unwrap().max(1);
    let max = series.periods().max().unwrap();
    // geometric bins, 5 per octave
    let ratio = 2f64.powf(0.2);
    let mut edges = vec![min as f64];
    while *edges.last().unwrap() < max as f64 {
        edges.push(edges.last().unwrap() * ratio);
    }
    let mut counts = vec![0u64; edges.len()];
    for p in series.periods() {
        let mut i = 0;
        while i + 1 < edges.len() && (p as f64) >= edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
    }
    Ok(PlotData {
        columns: vec!["bin_lower_ms".into(), "count".into()],
        rows: edges
            .iter()
            .zip(&counts)
            .filter(|(_, &c)| c > 0 || true)
            .map(|(e, &c)| vec![e / 1e6, c as f64])
            .collect(),
    })
}

/// CPU class fractions per window: time (s) vs softirq/user/idle/system %.
pub fn cpu_breakdown_data(windows: &[BreakdownWindow]) -> Result<PlotData, AnalysisError> {
    if windows.is_empty() {
        return Err(AnalysisError::EmptySeries);
    }
    Ok(PlotData {
        columns: vec![
            "time_s".into(),
            "softirq_pct".into(),
            "user_pct".into(),
            "idle_pct".into(),
            "system_pct".into(),
        ],
        rows: windows
            .iter()
            .map(|w| {
                vec![w.start_s, w.softirq * 100.0, w.user * 100.0, w.idle * 100.0, w.system * 100.0]
            })
            .collect(),
    })
}

/// Minimal SVG scatter rendering of 2-column plot data.
pub fn render_svg(data: &PlotData, title: &str) -> String {
    const W: f64 = 800.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let xs: Vec<f64> = data.rows.iter().map(|r| r[0]).collect();
    let ys: Vec<f64> = data.rows.iter().map(|r| r[1]).collect();
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let sx = |x: f64| M + (x - x0) / (x1 - x0).max(1e-12) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0).max(1e-12) * (H - 2.0 * M);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        W / 2.0,
        title
    );
    let _ = write!(
        svg,
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - M,
        W - M,
        H - M,
        H - M
    );
    for row in &data.rows {
        let _ = write!(
            svg,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"steelblue\"/>\n",
            sx(row[0]),
            sy(row[1])
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Writes plot data (and an SVG next to it) for the requested mode.
pub fn export_plot_data(
    series: Option<&CycleSeries>,
    breakdown: Option<&[BreakdownWindow]>,
    mode: PlotMode,
    out_csv: &Path,
    out_svg: Option<&Path>,
) -> Result<(), AnalysisError> {
    let data = match mode {
        PlotMode::Scatter => scatter_data(series.ok_or(AnalysisError::EmptySeries)?)?,
        PlotMode::Histogram => histogram_data(series.ok_or(AnalysisError::EmptySeries)?)?,
        PlotMode::CpuBreakdown => {
            cpu_breakdown_data(breakdown.ok_or(AnalysisError::EmptySeries)?)?
        }
    };
    std::fs::write(out_csv, data.to_csv()).map_err(|_| AnalysisError::NoRuns)?;
    if let Some(svg) = out_svg {
        let title = match mode {
            PlotMode::Scatter => "cycle period over time",
            PlotMode::Histogram => "cycle period histogram",
            PlotMode::CpuBreakdown => "CPU load breakdown",
        };
        std::fs::write(svg, render_svg(&data, title)).map_err(|_| AnalysisError::NoRuns)?;
    }
    Ok(())
}
