//! `stirap`: configuration-driven runs of the two-qubit cavity
//! state-transfer simulator.
//!
//! Subcommands:
//! - `run`      single trajectory -> time-series CSV plus a summary line
//! - `sweep`    2-D parameter grid -> records CSV (resumable, parallel)
//! - `converge` Fock-cutoff ladder -> convergence report CSV
//!
//! Exit codes: 0 success, 2 configuration/schema problem, 3 propagation
//! failure, 4 cutoff non-convergence.

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stirap_core::hilbert::Basis;
use stirap_core::observables::{
    leakage, populations, stirap_subspace_labels, transfer_efficiency, LeakageMode,
};
use stirap_core::propagator::{converge_cutoff, propagate, PropagatorError};
use stirap_core::sweep::{
    format_full_precision, matching_prefix, read_csv, record_csv_line, run_sweep_resumable,
    SweepRecord, SWEEP_CSV_HEADER,
};

use config::{ConfigErrors, RunConfig};

#[derive(Parser)]
#[command(name = "stirap", version, about = "Two-qubit cavity state-transfer simulator")]
struct Cli {
    /// Reserved for future stochastic extensions; accepted and ignored.
    #[arg(long, global = true, hide_short_help = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a single trajectory and write the population time series.
    Run(CommonArgs),
    /// Evaluate a 2-D parameter grid and write one record per point.
    Sweep(SweepArgs),
    /// Search the Fock-cutoff ladder until the efficiency stops changing.
    Converge(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Parallel workers; defaults to the available cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Reuse records already present in the output file.
    #[arg(long)]
    resume: bool,
}

enum CliError {
    Config(ConfigErrors),
    Propagation(String),
    NonConvergence(String),
    Other(anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Propagation(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Other(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Config(e) => e.to_string(),
            CliError::Propagation(m) => format!("propagation failed: {m}"),
            CliError::NonConvergence(m) => m.clone(),
            CliError::Other(e) => format!("{e:#}"),
        }
    }
}

impl From<ConfigErrors> for CliError {
    fn from(e: ConfigErrors) -> Self {
        CliError::Config(e)
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Converge(args) => cmd_converge(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn out_path(dir: &Path, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Other(anyhow::anyhow!("creating {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

fn cmd_run(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let params = cfg.system_params();
    let pulses = cfg.pulse_pair()?;
    let basis = Basis::new(cfg.numerics.n_max)
        .map_err(|e| ConfigErrors(vec![format!("numerics.n_max: {e}")]))?;
    let psi0 = basis
        .state_vector(&cfg.initial_amplitudes())
        .map_err(|e| ConfigErrors(vec![format!("initial_state: {e}")]))?;

    let grid = pulses.time_grid(cfg.numerics.n_out);
    let traj = propagate(&params, &pulses, &basis, &psi0, &grid, &cfg.integrator_opts())
        .map_err(|e| CliError::Propagation(e.to_string()))?;

    let tracked = stirap_subspace_labels();
    let pops = populations(&traj, &basis, &tracked)
        .map_err(|e| CliError::Propagation(e.to_string()))?;
    let leak_high = leakage(&traj, &basis, LeakageMode::NAbove(1))
        .map_err(|e| CliError::Propagation(e.to_string()))?;
    let efficiency = transfer_efficiency(&traj, &basis);
    let peak_leak = pops
        .norm_sq
        .iter()
        .zip(pops.stirap_subspace.iter())
        .map(|(n, s)| n - s)
        .fold(f64::MIN, f64::max);

    let file_name = cfg.output.trajectory.as_deref().unwrap_or("trajectory.csv");
    let path = out_path(&args.out, file_name)?;
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(
        w,
        "t,p_0gg,p_0ge,p_0eg,p_1gg,stirap_subspace,norm_sq,leakage_n_above_1"
    )?;
    for (k, t) in pops.times.iter().enumerate() {
        let cols = [
            *t,
            pops.series[0][k],
            pops.series[1][k],
            pops.series[2][k],
            pops.series[3][k],
            pops.stirap_subspace[k],
            pops.norm_sq[k],
            leak_high[k],
        ];
        let line: Vec<String> = cols.iter().map(|x| format_full_precision(*x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;

    println!(
        "efficiency={} peak_stirap_leakage={} final_norm_sq={} trajectory={}",
        format_full_precision(efficiency),
        format_full_precision(peak_leak),
        format_full_precision(traj.final_norm_sq()),
        path.display()
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.common.config)?;
    let spec = cfg.sweep_spec()?;
    let workers = match args.workers {
        Some(w) if w >= 1 => w,
        Some(w) => {
            return Err(ConfigErrors(vec![format!("--workers: must be >= 1, got {w}")]).into())
        }
        None => std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1),
    };

    let file_name = cfg.output.sweep.as_deref().unwrap_or("sweep.csv");
    let path = out_path(&args.common.out, file_name)?;

    let existing: Vec<SweepRecord> = if args.resume && path.exists() {
        read_csv(BufReader::new(File::open(&path)?))
            .map_err(|e| CliError::Other(anyhow::anyhow!("reading {}: {e}", path.display())))?
    } else {
        Vec::new()
    };
    let keep = matching_prefix(&spec, &existing);

    // Rewrite the kept prefix through a temp file, move it into place, then
    // append newly computed records with a flush after each one: an
    // interrupted sweep always leaves a resumable output file behind.
    let tmp_path = path.with_extension("csv.partial");
    {
        let mut w = BufWriter::new(File::create(&tmp_path)?);
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        for rec in &existing[..keep] {
            writeln!(w, "{}", record_csv_line(rec))?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp_path, &path)?;

    let mut w = BufWriter::new(File::options().append(true).open(&path)?);
    let result = run_sweep_resumable(&spec, workers, &existing[..keep], |rec| {
        writeln!(w, "{}", record_csv_line(rec))?;
        w.flush()?;
        Ok(())
    })
    .map_err(|e| CliError::Propagation(e.to_string()))?;
    drop(w);

    let meta_path = path.with_extension("meta.toml");
    let config_snapshot =
        toml::to_string(&cfg).map_err(|e| CliError::Other(anyhow::anyhow!(e)))?;
    let mut meta = BufWriter::new(File::create(&meta_path)?);
    writeln!(meta, "code_version = {:?}", result.metadata.code_version)?;
    writeln!(meta, "workers = {}", result.metadata.workers)?;
    writeln!(meta, "wall_time_s = {}", result.metadata.wall_time_s)?;
    writeln!(meta, "resumed_records = {keep}")?;
    writeln!(meta, "config = '''\n{config_snapshot}'''")?;
    meta.flush()?;

    let failed = result.records.iter().filter(|r| !r.is_ok()).count();
    println!(
        "sweep: {} points ({} reused, {} failed), workers={}, wall={:.1}s, output={}",
        result.records.len(),
        keep,
        failed,
        workers,
        result.metadata.wall_time_s,
        path.display()
    );
    Ok(())
}

fn cmd_converge(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.config)?;
    let params = cfg.system_params();
    let pulses = cfg.pulse_pair()?;
    let conv = cfg.converge.clone().unwrap_or_default();
    let psi0 = cfg.initial_amplitudes();

    let outcome = converge_cutoff(
        &params,
        &pulses,
        &psi0,
        conv.start_nmax,
        conv.rel_tol,
        &cfg.integrator_opts(),
        transfer_efficiency,
    );

    let (ladder, converged) = match &outcome {
        Ok(res) => (res.ladder.clone(), Some((res.n_max, res.value))),
        Err(PropagatorError::NoCutoffConvergence { ladder, .. }) => (ladder.clone(), None),
        Err(e) => return Err(CliError::Propagation(e.to_string())),
    };

    let mut report = String::from("n_max,efficiency\n");
    for (n, v) in &ladder {
        report.push_str(&format!("{n},{}\n", format_full_precision(*v)));
    }
    print!("{report}");

    if let Some(file_name) = cfg.output.convergence.as_deref() {
        let path = out_path(&args.out, file_name)?;
        std::fs::write(&path, &report)?;
    }

    match converged {
        Some((n_max, value)) => {
            println!(
                "converged: n_max={n_max} efficiency={}",
                format_full_precision(value)
            );
            Ok(())
        }
        None => Err(CliError::NonConvergence(format!(
            "cutoff ladder did not converge (rel_tol = {}); ladder printed above",
            conv.rel_tol
        ))),
    }
}
