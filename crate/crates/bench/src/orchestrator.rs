//! Drives full experiments: three-phase procedures, the canonical matrix,
//! artifact persistence, and re-analysis from persisted artifacts.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use cyclebench_core::analysis::{
    build_result_matrix, compare_phases, PhaseReport, ResultMatrix,
};
use cyclebench_core::model::{AttackSpec, Backend, CycleSeries, ExperimentConfig, Phase};
use cyclebench_core::series::{self, SeriesMeta};
use cyclebench_core::sim::{report_cpu_breakdown, simulate_phase_full, SimParams};

use crate::agent;
use crate::attack::{self, FloodOptions, StressHandle};

pub const ARTIFACT_ENV: &str = "CYCLEBENCH_ARTIFACTS";
pub const DEFAULT_THETA: f64 = 0.10;
pub const DEFAULT_PERSISTENCE_TOL: f64 = 0.05;
/// Generators start this long before the attack phase and stop this long
/// after it, so the measured window sits fully inside attack conditions.
pub const GENERATOR_MARGIN_S: f64 = 1.0;

pub fn artifact_root() -> PathBuf {
    std::env::var_os(ARTIFACT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("artifacts"))
}

/// Fixed three-phase procedure for one config.
#[derive(Debug, Clone)]
pub struct ProcedurePlan {
    pub config: ExperimentConfig,
    pub phase_durations_s: [f64; 3],
    pub gap_s: f64,
    pub scale_factor: f64,
}

impl ProcedurePlan {
    /// Applies the scale factor to the config's durations. Scan attack
    /// phases default to 10 s (pre-scale) regardless of the flood duration.
    pub fn new(config: ExperimentConfig, scale_factor: f64) -> Result<ProcedurePlan> {
        if !(scale_factor > 0.0 && scale_factor <= 1.0) {
            bail!("scale factor must be in (0, 1], got {scale_factor}");
        }
        let idle = config.phase_duration_s * scale_factor;
        let attack = match config.attack {
            AttackSpec::SynScan { .. } => 10.0_f64.min(config.phase_duration_s) * scale_factor,
            _ => idle,
        };
        Ok(ProcedurePlan {
            gap_s: config.gap_s * scale_factor,
            config,
            phase_durations_s: [idle, attack, idle],
            scale_factor,
        })
    }
}

/// Wall-clock bounds of one completed procedure, for sequentiality audits.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunLogEntry {
    pub run_tag: String,
    pub started_unix_ns: u128,
    pub finished_unix_ns: u128,
    pub ok: bool,
}

fn unix_now_ns() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0)
}

fn run_dir(root: &Path, config: &ExperimentConfig) -> PathBuf {
    root.join(config.run_tag())
}

fn phase_paths(dir: &Path, phase: Phase) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{}.jsonl", phase.tag())),
        dir.join(format!("{}.meta.json", phase.tag())),
    )
}

fn persist_phase(
    dir: &Path,
    config: &ExperimentConfig,
    phase: Phase,
    series: &CycleSeries,
    seed: Option<u64>,
    incomplete: bool,
) -> Result<()> {
    let (jsonl, meta_path) = phase_paths(dir, phase);
    series::write_jsonl(&jsonl, series)?;
    let meta = SeriesMeta {
        config: config.clone(),
        phase,
        backend: config.backend,
        wall_duration_ns: series.wall_duration_ns,
        rng_seed: seed,
        host: Some(crate::sys::kernel_version()),
        incomplete,
    };
    series::write_meta(&meta_path, &meta)?;
    Ok(())
}


/// Runs the three-phase procedure and persists all artifacts under
/// `root/<run_tag>/`. Returns the analyzed report.
pub fn run_procedure(
    plan: &ProcedurePlan,
    params: &SimParams,
    root: &Path,
) -> Result<PhaseReport> {
    let dir = run_dir(root, &plan.config);
    std::fs::create_dir_all(&dir)?;
    let series = match plan.config.backend {
        Backend::Sim => run_sim_procedure(plan, params, &dir)?,
        Backend::Real => run_real_procedure(plan, &dir)?,
    };
    let seed = (plan.config.backend == Backend::Sim).then_some(params.rng_seed);
    for (i, phase) in Phase::ALL.into_iter().enumerate() {
        persist_phase(&dir, &plan.config, phase, &series[i], seed, false)?;
    }
    let report = analyze_run(&series, &plan.config)?;
    std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

fn run_sim_procedure(
    plan: &ProcedurePlan,
    params: &SimParams,
    dir: &Path,
) -> Result<Vec<CycleSeries>> {
    let mut out = Vec::new();
    for (i, phase) in Phase::ALL.into_iter().enumerate() {
        let mut cfg = plan.config.clone();
        cfg.phase_duration_s = plan.phase_durations_s[i];
        let sim = simulate_phase_full(&cfg, params, phase)
            .with_context(|| format!("simulating {} {}", cfg.run_tag(), phase.tag()))?;
        if phase == Phase::Attack {
            // attack-phase CPU breakdown, for load plots
            let windows: Vec<_> = sim
                .cores
                .iter()
                .map(|core| report_cpu_breakdown(core, sim.elapsed_ns, 1.0))
                .collect();
            std::fs::write(dir.join("breakdown.json"), serde_json::to_vec_pretty(&windows)?)?;
        }
        out.push(sim.series);
    }
    Ok(out)
}

fn run_real_procedure(plan: &ProcedurePlan, dir: &Path) -> Result<Vec<CycleSeries>> {
    // fail fast before any phase starts
    let caps = agent::selftest();
    if !caps.can_set_fifo {
        bail!("privilege: host denies RT scheduling ({})", caps.notes.join("; "));
    }
    let cfg = &plan.config;
    let mut stress: Option<StressHandle> = None;
    if cfg.stress.enabled {
        stress = Some(
            StressHandle::start(cfg.stress.workers, &cfg.stress.pinning)
                .map_err(|e| anyhow::anyhow!("stress: {e}"))?,
        );
    }
    let mut out = Vec::new();
    let result = (|| -> Result<()> {
        for (i, phase) in Phase::ALL.into_iter().enumerate() {
            let duration = plan.phase_durations_s[i];
            let generator = if phase == Phase::Attack {
                start_generator(cfg, duration + 2.0 * GENERATOR_MARGIN_S)?
            } else {
                None
            };
            if generator.is_some() {
                std::thread::sleep(Duration::from_secs_f64(GENERATOR_MARGIN_S));
            }
            let cfg_run = cfg.clone();
            let series = std::thread::spawn(move || {
                agent::run_cycle_loop_tagged(&cfg_run, duration, phase)
            })
            .join()
            .map_err(|_| anyhow::anyhow!("agent thread panicked"))?
            .map_err(|e| anyhow::anyhow!("agent: {e}"))?;
            if let Some(g) = generator {
                std::thread::sleep(Duration::from_secs_f64(GENERATOR_MARGIN_S));
                g.join().ok();
            }
            out.push(series);
            if i < 2 {
                std::thread::sleep(Duration::from_secs_f64(plan.gap_s));
            }
        }
        Ok(())
    })();
    if let Some(s) = stress {
        let report = s.stop();
        std::fs::write(dir.join("stress.json"), serde_json::to_vec_pretty(&report)?)?;
    }
    if let Err(e) = result {
        // retain whatever completed, marked incomplete
        for (i, series) in out.iter().enumerate() {
            let _ = persist_phase(dir, cfg, Phase::ALL[i], series, None, true);
        }
        std::fs::write(dir.join("INCOMPLETE"), e.to_string())?;
        return Err(e.context("procedure aborted; partial artifacts retained"));
    }
    Ok(out)
}

fn start_generator(
    cfg: &ExperimentConfig,
    duration_s: f64,
) -> Result<Option<std::thread::JoinHandle<()>>> {
    let target: std::net::Ipv4Addr =
        std::env::var(TARGET_ENV).unwrap_or_else(|_| "127.0.0.1".into()).parse()?;
    let iface = std::env::var(IFACE_ENV).unwrap_or_else(|_| "lo".into());
    match cfg.attack.clone() {
        AttackSpec::None => Ok(None),
        AttackSpec::SynFlood { rate_pps } => {
            let opts = FloodOptions {
                target,
                target_port: 80,
                source: target,
                randomize_source: false,
                rate_pps,
                duration_s,
                rotate_ports: false,
            };
            Ok(Some(std::thread::spawn(move || {
                if let Err(e) = attack::syn_flood(&opts) {
                    eprintln!("syn flood generator failed: {e}");
                }
            })))
        }
        AttackSpec::ArpFlood { rate_pps } => Ok(Some(std::thread::spawn(move || {
            if let Err(e) = attack::arp_flood(&iface, target, rate_pps, duration_s) {
                eprintln!("arp flood generator failed: {e}");
            }
        }))),
        AttackSpec::SynScan { port_range } => Ok(Some(std::thread::spawn(move || {
            if let Err(e) = attack::syn_scan(target, target, port_range, 512) {
                eprintln!("scan generator failed: {e}");
            }
        }))),
    }
}

pub const TARGET_ENV: &str = "CYCLEBENCH_TARGET";
pub const IFACE_ENV: &str = "CYCLEBENCH_IFACE";

fn analyze_run(series: &[CycleSeries], config: &ExperimentConfig) -> Result<PhaseReport> {
    Ok(compare_phases(
        &series[0],
        &series[1],
        &series[2],
        config.attack.clone(),
        config.stress.enabled,
        config.cycle_period_ns,
        DEFAULT_THETA,
        DEFAULT_PERSISTENCE_TOL,
    )?)
}

/// Output of one full matrix run: both tables plus per-run reports.
#[derive(Debug)]
pub struct MatrixOutput {
    pub no_stress: Option<ResultMatrix>,
    pub stress: Option<ResultMatrix>,
    pub reports: Vec<PhaseReport>,
    pub failures: Vec<(String, String)>,
}

/// Runs every config strictly sequentially (concurrent attacks would
/// contaminate each other's measurements) and builds the result tables.
/// A failed run is recorded and its cells stay missing.
pub fn run_matrix(
    configs: &[ExperimentConfig],
    params: &SimParams,
    scale: f64,
    root: &Path,
) -> Result<MatrixOutput> {
    if configs.is_empty() {
        bail!("config list must not be empty");
    }
    std::fs::create_dir_all(root)?;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut runlog: Vec<RunLogEntry> = Vec::new();
    for config in configs {
        let plan = ProcedurePlan::new(config.clone(), scale)?;
        let started = unix_now_ns();
        let result = run_procedure(&plan, params, root);
        runlog.push(RunLogEntry {
            run_tag: config.run_tag(),
            started_unix_ns: started,
            finished_unix_ns: unix_now_ns(),
            ok: result.is_ok(),
        });
        match result {
            Ok(report) => reports.push(report),
            Err(e) => failures.push((config.run_tag(), format!("{e:#}"))),
        }
    }
    std::fs::write(root.join("runlog.json"), serde_json::to_vec_pretty(&runlog)?)?;
    let output = build_tables(reports, failures)?;
    write_tables(&output, root)?;
    Ok(output)
}

fn build_tables(
    reports: Vec<PhaseReport>,
    failures: Vec<(String, String)>,
) -> Result<MatrixOutput> {
    let split = |stress: bool| -> Result<Option<ResultMatrix>> {
        let subset: Vec<PhaseReport> =
            reports.iter().filter(|r| r.stress == stress).cloned().collect();
        if subset.is_empty() {
            Ok(None)
        } else {
            Ok(Some(build_result_matrix(&subset)?))
        }
    };
    Ok(MatrixOutput { no_stress: split(false)?, stress: split(true)?, reports, failures })
}

fn write_tables(output: &MatrixOutput, root: &Path) -> Result<()> {
    for (matrix, name) in
        [(&output.no_stress, "table_no_stress"), (&output.stress, "table_stress")]
    {
        if let Some(m) = matrix {
            std::fs::write(root.join(format!("{name}.txt")), m.render_text())?;
            std::fs::write(root.join(format!("{name}.csv")), m.to_csv())?;
        }
    }
    Ok(())
}

/// Rebuilds every report and both tables from persisted artifacts alone.
/// Running this twice over the same directory yields identical bytes.
pub fn analyze_dir(root: &Path) -> Result<MatrixOutput> {
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for dir in dirs {
        match reanalyze_run(&dir) {
            Ok(report) => reports.push(report),
            Err(e) => failures.push((
                dir.file_name().unwrap_or_default().to_string_lossy().into_owned(),
                format!("{e:#}"),
            )),
        }
    }
    if reports.is_empty() && failures.is_empty() {
        bail!("no runs found under {}", root.display());
    }
    let output = build_tables(reports, failures)?;
    write_tables(&output, root)?;
    Ok(output)
}

fn reanalyze_run(dir: &Path) -> Result<PhaseReport> {
    if dir.join("INCOMPLETE").exists() {
        bail!("run marked incomplete");
    }
    let mut series = Vec::new();
    let mut config: Option<ExperimentConfig> = None;
    for phase in Phase::ALL {
        let (jsonl, meta_path) = phase_paths(dir, phase);
        let (s, meta) = series::read_series(&jsonl, &meta_path)?;
        if meta.incomplete {
            bail!("phase {} marked incomplete", phase.tag());
        }
        series.push(s);
        config.get_or_insert(meta.config);
    }
    analyze_run(&series, &config.expect("three phases read"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use cyclebench_core::model::canonical_matrix;

    fn sim_config(code: &str, attack: AttackSpec, stress: bool) -> ExperimentConfig {
        ExperimentConfig::canonical(code, attack, stress, 5.0, Backend::Sim).unwrap()
    }

    #[test]
    fn plan_scales_durations() {
        let plan = ProcedurePlan::new(sim_config("SF", AttackSpec::syn_flood(), false), 0.5)
            .unwrap();
        assert_eq!(plan.phase_durations_s, [2.5, 2.5, 2.5]);
        assert!(ProcedurePlan::new(sim_config("SF", AttackSpec::None, false), 0.0).is_err());
    }

    #[test]
    fn scan_attack_phase_capped_at_ten_seconds() {
        let mut cfg = sim_config("SF", AttackSpec::syn_scan(), false);
        cfg.phase_duration_s = 300.0;
        let plan = ProcedurePlan::new(cfg, 1.0).unwrap();
        assert_eq!(plan.phase_durations_s, [300.0, 10.0, 300.0]);
    }

    #[test]
    fn sim_procedure_persists_full_artifact_set() {
        let dir = tempfile::tempdir().unwrap();
        let plan =
            ProcedurePlan::new(sim_config("SF", AttackSpec::syn_flood(), false), 1.0).unwrap();
        let report = run_procedure(&plan, &SimParams::default(), dir.path()).unwrap();
        assert_eq!(report.config_id, "SF");
        assert!(report.idle_pre.count > 4000);
        let run = dir.path().join("SF-syn");
        for f in [
            "idle_pre.jsonl",
            "idle_pre.meta.json",
            "attack.jsonl",
            "attack.meta.json",
            "idle_post.jsonl",
            "idle_post.meta.json",
            "report.json",
            "breakdown.json",
        ] {
            assert!(run.join(f).exists(), "missing {f}");
        }
    }

    #[test]
    fn matrix_rejects_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        assert!(run_matrix(&[], &SimParams::default(), 1.0, dir.path()).is_err());
    }

    #[test]
    fn matrix_runs_are_sequential_and_reanalysis_matches() {
        let dir = tempfile::tempdir().unwrap();
        let configs =
            canonical_matrix(2.0, &[AttackSpec::syn_flood()], &[false], Backend::Sim).unwrap();
        let out = run_matrix(&configs, &SimParams::default(), 1.0, dir.path()).unwrap();
        assert!(out.failures.is_empty());
        let table = out.no_stress.as_ref().unwrap();
        assert_eq!(table.rows.len(), 7);

        let runlog: Vec<RunLogEntry> =
            serde_json::from_slice(&std::fs::read(dir.path().join("runlog.json")).unwrap())
                .unwrap();
        for pair in runlog.windows(2) {
            assert!(pair[0].finished_unix_ns <= pair[1].started_unix_ns, "runs overlapped");
        }

        let first = std::fs::read(dir.path().join("table_no_stress.csv")).unwrap();
        let re = analyze_dir(dir.path()).unwrap();
        assert_eq!(re.no_stress.as_ref().unwrap(), table);
        let second = std::fs::read(dir.path().join("table_no_stress.csv")).unwrap();
        assert_eq!(first, second, "re-analysis changed the persisted table");
    }

    #[test]
    fn analyze_empty_dir_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(analyze_dir(dir.path()).is_err());
    }
}
