use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use optical_io::experiments::plot::write_plots;
use optical_io::experiments::*;
use optical_io::{Error, Result};

/// Simulated all-optical control and readout of superconducting qubits.
#[derive(Debug, Parser)]
#[command(name = "optical-io", version)]
struct Cli {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory for result files.
    #[arg(long, global = true, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    /// I/O mode: drive letter then readout letter (M microwave, O optical).
    #[arg(long, global = true, value_name = "MODE")]
    mode: Option<IoMode>,
    /// Also write SVG plots next to the result files.
    #[arg(long, global = true)]
    plots: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transducer linearity, S21 channel spectra and pump tunability.
    Characterize,
    /// Power Rabi with the readout-frequency map, dual-qubit readout and
    /// single-shot statistics.
    Readout(ReadoutArgs),
    /// Coherence suite and randomized benchmarking.
    Closedloop(ClosedloopArgs),
    /// Multiplexed channel count and per-channel SNR.
    Budget(BudgetArgs),
}

#[derive(Debug, Args)]
struct ReadoutArgs {
    /// Qubit index for the power Rabi and single-shot runs.
    #[arg(long, default_value_t = 0)]
    qubit: usize,
    /// Keep the configured pump during the readout-frequency map instead of
    /// retuning it onto each frequency.
    #[arg(long)]
    fixed_pump: bool,
}

#[derive(Debug, Args)]
struct ClosedloopArgs {
    /// Qubit index.
    #[arg(long, default_value_t = 1)]
    qubit: usize,
}

#[derive(Debug, Args)]
struct BudgetArgs {
    /// Channel spacing, Hz.
    #[arg(long)]
    spacing: Option<f64>,
    /// Pump power per channel, W.
    #[arg(long)]
    per_channel_pump: Option<f64>,
    /// Cooling budget at the pump stage, W.
    #[arg(long)]
    cooling_budget: Option<f64>,
    /// Conversion efficiency per pump watt, 1/W.
    #[arg(long)]
    target_efficiency: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::FitFailure { .. }) { 2 } else { 1 })
        }
    }
}

fn load(cli: &Cli) -> Result<LinkConfig> {
    let mut cfg = match &cli.config {
        Some(path) => LinkConfig::load(path)?,
        None => LinkConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = cli.mode {
        cfg.io_mode = mode;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(cli: &Cli, result: &ExperimentResult, stem: &str) -> Result<()> {
    let dir = cli.out.as_path();
    let path = result.write(dir)?;
    println!("{stem}: {}", path.display());
    for w in &result.warnings {
        eprintln!("warning ({stem}): {w}");
    }
    if cli.plots {
        for p in write_plots(result, dir)? {
            println!("  plot: {}", p.display());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|source| Error::Io { path: display(&cli.out), source })?;
    match &cli.command {
        Command::Characterize => {
            let powers = cfg.characterization.mw_powers_dbm.clone();
            emit(cli, &run_linearity(&cfg, &powers)?, "linearity")?;
            emit(cli, &run_channel_spectra(&cfg)?, "channel spectra")?;
            emit(cli, &run_tunability(&cfg)?, "tunability")?;
        }
        Command::Readout(args) => {
            let amps = cfg.protocol.rabi_amplitudes.values();
            let policy = if args.fixed_pump { PumpPolicy::Fixed } else { PumpPolicy::Tracked };
            let sweep = cfg.io_mode.optical_readout().then(|| ReadoutSweep::from_config(&cfg, policy));
            emit(cli, &run_power_rabi(&cfg, args.qubit, &amps, sweep.as_ref())?, "power rabi")?;
            if cfg.qubits.len() >= 2 {
                let driven = vec![true; cfg.qubits.len()];
                emit(cli, &run_dual_readout(&cfg, &driven)?, "dual readout")?;
            }
            let p = &cfg.protocol;
            let shots = run_single_shot(&cfg, args.qubit, p.single_shot_count, p.single_shot_average)?;
            emit(cli, &shots, "single shot")?;
        }
        Command::Closedloop(args) => {
            let modes = match cli.mode {
                Some(m) => vec![m],
                None => IoMode::ALL.to_vec(),
            };
            if modes.len() == IoMode::ALL.len() {
                let cmp = run_coherence_all_modes(&cfg, args.qubit)?;
                for r in &cmp.runs {
                    emit(cli, r, "coherence")?;
                }
                emit(cli, &cmp.comparison, "coherence comparison")?;
            } else {
                emit(cli, &run_coherence_suite(&cfg, args.qubit)?, "coherence")?;
            }
            let p = &cfg.protocol;
            for m in modes {
                emit(cli, &run_rb(&cfg.with_mode(m), args.qubit, &p.rb_lengths, p.rb_sequences)?, "rb")?;
            }
        }
        Command::Budget(args) => {
            let mut cfg = cfg;
            let b = &mut cfg.budget;
            b.spacing = args.spacing.unwrap_or(b.spacing);
            b.per_channel_pump = args.per_channel_pump.unwrap_or(b.per_channel_pump);
            b.cooling_budget = args.cooling_budget.unwrap_or(b.cooling_budget);
            b.target_efficiency = args.target_efficiency.unwrap_or(b.target_efficiency);
            let (report, result) = run_budget(&cfg)?;
            println!(
                "channels: {} (bandwidth {}, power {}), SNR per channel {:.1} dB",
                report.channels, report.channels_by_bandwidth, report.channels_by_power, report.snr_db_per_channel
            );
            emit(cli, &result, "budget")?;
        }
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}
