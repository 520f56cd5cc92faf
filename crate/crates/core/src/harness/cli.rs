use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use super::{
    emit_aggregate_csv, emit_spectrum_plotdata, emit_timing_csv, emit_trials_csv,
    read_measurement_dump, run_experiment, write_measurement_dump, ExperimentConfig, HarnessError,
};
use crate::bandplan::BandPlan;
use crate::sampling::{make_operator, sensing_map};
use crate::sigmodel::{write_spectrum_csv, SpectrumVector};
use crate::solvers::{solve, Partition};

#[derive(Parser, Debug)]
#[command(
    name = "spectrum-cs",
    about = "Compressive wideband spectrum sensing experiments",
    arg_required_else_help = true,
    disable_version_flag = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte Carlo experiment from a config file.
    Simulate(Common),
    /// Recover a spectrum from a measurement dump.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Measurement dump written by `simulate`.
        #[arg(long)]
        input: PathBuf,
    },
    /// Validate and print a band-plan file.
    Plan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the version.
    Version,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated solver names to run.
    #[arg(long, value_delimiter = ',')]
    solver: Option<Vec<String>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

/// Entry point; `argv[0]` is the program name. Returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Version => {
            println!("spectrum-cs {}", crate::VERSION);
            Ok(())
        }
        Command::Plan { config } => {
            let plan = BandPlan::from_file(&config)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", config.display())))?;
            print!("{plan}");
            Ok(())
        }
        Command::Simulate(common) => simulate(&common),
        Command::Solve { common, input } => solve_dump(&common, &input),
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), HarnessError> {
    let mut cfg = ExperimentConfig::from_file(&common.config)?;
    if let Some(t) = common.trials {
        cfg.run.trials = t;
    }
    if let Some(s) = common.seed {
        cfg.run.seed = s;
    }
    if let Some(names) = &common.solver {
        cfg.select_solvers(names)?;
    }
    cfg.validate()?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.run.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|e| HarnessError::Io {
        path: out.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((cfg, out))
}

fn simulate(common: &Common) -> Result<(), HarnessError> {
    let (cfg, out) = load(common)?;
    let res = run_experiment(&cfg)?;
    let k = cfg.plan.num_sections();
    emit_trials_csv(&res.records, k, out.join("trials.csv"))?;
    emit_aggregate_csv(&res.report, &cfg.plan, out.join("aggregate.csv"))?;
    emit_timing_csv(&res.records, &res.report, out.join("timing.csv"))?;
    emit_spectrum_plotdata(
        &res.first_truth,
        &res.first_recoveries,
        out.join("plotdata.csv"),
    )?;
    write_measurement_dump(&res.first_measurement, out.join("measurement.json"))?;
    if !common.quiet {
        println!(
            "{} trials, {} solvers, normalization {}, EBR vs '{}' on mean energies",
            cfg.run.trials,
            cfg.solvers.len(),
            res.report.normalization,
            res.report.baseline
        );
        for s in &res.report.solvers {
            let energies: Vec<String> = s.mean_energy.iter().map(|e| format!("{e:.4}")).collect();
            println!("  {:<12} E = [{}]", s.name, energies.join(", "));
            let ebr: Vec<String> = s
                .ebr_vs_baseline
                .iter()
                .map(|v| {
                    v.map(|x| format!("{x:.1}%"))
                        .unwrap_or_else(|| "n/a".into())
                })
                .collect();
            println!("  {:<12} EBR = [{}]", "", ebr.join(", "));
            if let (Some(d), Some(fa)) = (s.all_active_detected_rate, s.false_alarm_rate) {
                println!(
                    "  {:<12} all-active detected {:.3}, false alarm {:.4}",
                    "", d, fa
                );
            }
            if s.unconverged > 0 {
                println!("  {:<12} {} unconverged solves", "", s.unconverged);
            }
        }
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn solve_dump(common: &Common, input: &Path) -> Result<(), HarnessError> {
    let (cfg, out) = load(common)?;
    let dump = read_measurement_dump(input)?;
    let n = cfg.plan.n_bins();
    if dump.n != n {
        return Err(HarnessError::Config(format!(
            "dump has n = {}, plan has {n} bins",
            dump.n
        )));
    }
    let op = make_operator(dump.kind, dump.m, dump.n, dump.seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let map = sensing_map(Arc::new(op), n).map_err(|e| HarnessError::Config(e.to_string()))?;
    let sections = Partition::new(n, cfg.plan.section_index_ranges().to_vec())
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let y = dump.values();
    for s in &cfg.solvers {
        let res = solve(&map, &y, &sections, &s.config)
            .map_err(|e| HarnessError::Runtime(format!("solver '{}': {e}", s.name)))?;
        let r = SpectrumVector::new(cfg.plan.clone(), res.r_hat)
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        let path = out.join(format!("recovery_{}.csv", s.name));
        write_spectrum_csv(&r, &path).map_err(|e| HarnessError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if !common.quiet {
            println!(
                "{:<12} objective {:.6e}  residual {:.6e} (bound {:.6e})  {} iterations{}",
                s.name,
                res.objective,
                res.residual_norm,
                res.bound,
                res.iterations,
                if res.converged { "" } else { "  NOT CONVERGED" }
            );
        }
    }
    Ok(())
}
