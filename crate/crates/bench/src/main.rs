use std::net::Ipv4Addr;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use cyclebench::agent::{self, AgentError, AgentErrorKind};
use cyclebench::attack::{self, AttackError, FloodOptions};
use cyclebench::orchestrator::{self, ProcedurePlan};
use cyclebench::sys::SysError;
use cyclebench_core::config::ConfigFile;
use cyclebench_core::model::{canonical_matrix, AttackSpec, Backend, PortRange};
use cyclebench_core::sim::SimParams;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_PRIVILEGE: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Cyclic real-time task benchmark under network flooding and CPU stress",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one three-phase measurement procedure from a config file.
    Run(RunArgs),
    /// Run the full canonical test-case matrix and emit both tables.
    Matrix(MatrixArgs),
    /// Rebuild reports and tables from persisted artifacts.
    Analyze { dir: PathBuf },
    /// Report host real-time capabilities.
    Selftest,
    /// Traffic generators.
    #[command(subcommand)]
    Flood(FloodCommand),
    /// SYN scan a target's port range.
    Scan(ScanArgs),
    /// Pinned busy-spin CPU load.
    Stress(StressArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the config file's backend.
    #[arg(long, value_parser = parse_backend)]
    backend: Option<Backend>,
    /// Duration scale factor in (0, 1]; 1/60 gives 5 s flood phases.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long, value_parser = parse_backend, default_value = "sim")]
    backend: Backend,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Base flood phase duration in seconds before scaling.
    #[arg(long, default_value_t = 300.0)]
    phase_duration: f64,
    /// Output directory; defaults to $CYCLEBENCH_ARTIFACTS or ./artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum FloodCommand {
    /// Paced TCP SYN flood.
    Syn {
        #[arg(long)]
        target: Ipv4Addr,
        #[arg(long, default_value_t = 80)]
        port: u16,
        #[arg(long, default_value_t = 100_000)]
        rate: u64,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Source address responses return to; defaults to the target
        /// (loopback-style runs).
        #[arg(long)]
        source: Option<Ipv4Addr>,
        /// Spoof a fresh source per packet instead of a fixed one.
        #[arg(long)]
        random_source: bool,
        /// Rotate destination ports instead of a fixed one.
        #[arg(long)]
        rotate_ports: bool,
    },
    /// Paced gratuitous-ARP flood.
    Arp {
        #[arg(long)]
        iface: String,
        #[arg(long)]
        target: Ipv4Addr,
        #[arg(long, default_value_t = 100_000)]
        rate: u64,
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
    },
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    target: Ipv4Addr,
    /// Port range, e.g. 1-65535.
    #[arg(long, default_value = "1-65535", value_parser = parse_port_range)]
    ports: PortRange,
    #[arg(long, default_value_t = 512)]
    parallelism: usize,
}

#[derive(Args)]
struct StressArgs {
    #[arg(long)]
    workers: u32,
    /// Comma-separated core list, one entry per worker, e.g. 0,1.
    #[arg(long, value_delimiter = ',')]
    pin: Vec<usize>,
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "sim" => Ok(Backend::Sim),
        "real" => Ok(Backend::Real),
        other => Err(format!("unknown backend {other:?} (expected sim|real)")),
    }
}

fn parse_port_range(s: &str) -> Result<PortRange, String> {
    let (first, last) = s.split_once('-').ok_or("expected FIRST-LAST")?;
    let first: u16 = first.parse().map_err(|e| format!("bad first port: {e}"))?;
    let last: u16 = last.parse().map_err(|e| format!("bad last port: {e}"))?;
    PortRange::new(first, last).map_err(|e| e.to_string())
}

/// Failure class, mapped to the process exit code.
enum Failure {
    Config,
    Privilege,
    Runtime,
}

fn classify(err: &anyhow::Error) -> Failure {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<AttackError>() {
            return match e {
                AttackError::Privilege(_) => Failure::Privilege,
                AttackError::Config(_) => Failure::Config,
                _ => Failure::Runtime,
            };
        }
        if let Some(e) = cause.downcast_ref::<AgentError>() {
            return match e.kind() {
                AgentErrorKind::Privilege => Failure::Privilege,
                AgentErrorKind::Admission | AgentErrorKind::Affinity => Failure::Config,
                AgentErrorKind::Runtime => Failure::Runtime,
            };
        }
        if let Some(e) = cause.downcast_ref::<SysError>() {
            return match e {
                SysError::Privilege(_) => Failure::Privilege,
                SysError::Admission(_) | SysError::Affinity(_) => Failure::Config,
                SysError::Os(_) => Failure::Runtime,
            };
        }
        if cause.downcast_ref::<cyclebench_core::config::ConfigError>().is_some()
            || cause.downcast_ref::<cyclebench_core::model::ModelError>().is_some()
        {
            return Failure::Config;
        }
        let msg = cause.to_string();
        if msg.starts_with("privilege") {
            return Failure::Privilege;
        }
        if msg.contains("scale factor") || msg.contains("config") {
            return Failure::Config;
        }
    }
    Failure::Runtime
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(match classify(&e) {
                Failure::Config => EXIT_CONFIG,
                Failure::Privilege => EXIT_PRIVILEGE,
                Failure::Runtime => EXIT_RUNTIME,
            })
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Analyze { dir } => {
            let out = orchestrator::analyze_dir(&dir)?;
            print_tables(&out);
            Ok(())
        }
        Command::Selftest => {
            let report = agent::selftest();
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Flood(cmd) => cmd_flood(cmd),
        Command::Scan(args) => {
            let summary = attack::syn_scan(args.target, args.target, args.ports, args.parallelism)
                .map_err(|e| anyhow!(e))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        Command::Stress(args) => {
            let report = attack::cpu_stress(args.workers, &args.pin, args.duration)
                .map_err(|e| anyhow!(e))?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut file = ConfigFile::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    if let Some(backend) = args.backend {
        file.experiment.backend = backend;
    }
    let plan = ProcedurePlan::new(file.experiment.clone(), args.scale)?;
    let root = orchestrator::artifact_root();
    let report = orchestrator::run_procedure(&plan, &file.sim, &root)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!(
        "artifacts: {}",
        root.join(file.experiment.run_tag()).display()
    );
    Ok(())
}

fn cmd_matrix(args: MatrixArgs) -> Result<()> {
    let attacks =
        [AttackSpec::syn_flood(), AttackSpec::arp_flood(), AttackSpec::syn_scan()];
    let configs =
        canonical_matrix(args.phase_duration, &attacks, &[false, true], args.backend)?;
    let root = args.out.unwrap_or_else(orchestrator::artifact_root);
    let out = orchestrator::run_matrix(&configs, &SimParams::default(), args.scale, &root)?;
    print_tables(&out);
    for (tag, err) in &out.failures {
        eprintln!("run {tag} failed: {err}");
    }
    println!("artifacts: {}", root.display());
    Ok(())
}

fn cmd_flood(cmd: FloodCommand) -> Result<()> {
    let telemetry = match cmd {
        FloodCommand::Syn {
            target,
            port,
            rate,
            duration,
            source,
            random_source,
            rotate_ports,
        } => attack::syn_flood(&FloodOptions {
            target,
            target_port: port,
            source: source.unwrap_or(target),
            randomize_source: random_source,
            rate_pps: rate,
            duration_s: duration,
            rotate_ports,
        })
        .map_err(|e| anyhow!(e))?,
        FloodCommand::Arp { iface, target, rate, duration } => {
            attack::arp_flood(&iface, target, rate, duration).map_err(|e| anyhow!(e))?
        }
    };
    println!("{}", serde_json::to_string_pretty(&telemetry)?);
    Ok(())
}

fn print_tables(out: &orchestrator::MatrixOutput) {
    if let Some(m) = &out.no_stress {
        println!("Maximum cycle time, no additional CPU load:\n{}", m.render_text());
    }
    if let Some(m) = &out.stress {
        println!("Maximum cycle time, with additional CPU load:\n{}", m.render_text());
    }
}
