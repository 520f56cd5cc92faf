//! Seeded Monte Carlo experiments over a band plan.
//!
//! Every trial draws a spectrum, its Nyquist-rate samples, AWGN and a
//! measurement operator from seeds derived from `(master seed, trial index,
//! stream)`, then runs every configured solver on the same measurements.
//! Trials run in parallel under the `parallel` feature; records are always
//! returned in trial order, so output does not depend on scheduling.

mod cli;
mod config;
mod io;

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use thiserror::Error;

pub use cli::cli_main;
pub use config::{
    DetectionPolicy, ExperimentConfig, MeasurementSection, NamedSolver, RunSection, SignalSection,
};
pub use io::{
    emit_aggregate_csv, emit_spectrum_plotdata, emit_timing_csv, emit_trials_csv,
    read_measurement_dump, read_trials_csv, write_measurement_dump, MeasurementDump,
};

use crate::bandplan::BandPlan;
use crate::detect::{detection_statistics, subband_energies, Normalization, SubbandEnergies};
use crate::linalg::norm2;
use crate::sampling::{make_operator, measure, sensing_map, MeasurementOperator, SensingMap};
use crate::sigmodel::{
    add_noise, generate_spectrum, noise_variance, spectrum_to_time, SpectrumVector, TimeSignal,
};
use crate::solvers::{solve, Partition, SolveResult};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    /// CLI exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}

const STREAM_SIGNAL: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_OPERATOR: u64 = 3;
const STREAM_CAL_SIGNAL: u64 = 4;
const STREAM_CAL_NOISE: u64 = 5;
const STREAM_CAL_OPERATOR: u64 = 6;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for `stream` of trial `trial`; depends on nothing else.
pub fn derive_seed(master: u64, trial: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ trial)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub solver: String,
    /// Per-section energies under the run's normalization.
    pub energies: Vec<f64>,
    /// `‖r̂‖₂`; raw energies are `energies · r_norm` under `total`.
    pub r_norm: f64,
    pub residual_norm: f64,
    pub bound: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Empty when detection is disabled.
    pub decisions: Vec<bool>,
    /// Wall-clock solve time; kept out of `trials.csv`.
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSummary {
    pub name: String,
    pub trials_used: usize,
    pub unconverged: usize,
    pub mean_energy: Vec<f64>,
    /// Sample standard deviation; 0 for a single trial.
    pub std_energy: Vec<f64>,
    /// EBR of this solver's mean energies against the baseline's, percent.
    pub ebr_vs_baseline: Vec<Option<f64>>,
    pub threshold: Option<f64>,
    /// Fraction of trials declaring each section occupied.
    pub occupied_rate: Vec<f64>,
    /// Fraction of trials in which every active section was declared.
    pub all_active_detected_rate: Option<f64>,
    /// Occupied declarations over inactive-section opportunities.
    pub false_alarm_rate: Option<f64>,
    pub mean_iterations: f64,
    pub mean_solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    pub normalization: Normalization,
    pub baseline: String,
    pub solvers: Vec<SolverSummary>,
}

impl AggregateReport {
    pub fn solver(&self, name: &str) -> Option<&SolverSummary> {
        self.solvers.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub report: AggregateReport,
    /// Trial 0's ground truth and each solver's recovery, for plotting.
    pub first_truth: SpectrumVector,
    pub first_recoveries: Vec<(String, SpectrumVector)>,
    pub first_measurement: MeasurementDump,
}

struct TrialInputs {
    truth: SpectrumVector,
    map: SensingMap,
    y: Vec<Complex64>,
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    sections: Partition,
    fixed_map: Option<SensingMap>,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self, HarnessError> {
        let plan = &cfg.plan;
        let sections = Partition::new(plan.n_bins(), plan.section_index_ranges().to_vec())
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let fixed_map = if cfg.run.redraw_operator {
            None
        } else {
            let seed = cfg
                .measurement
                .seed
                .unwrap_or_else(|| derive_seed(cfg.run.seed, 0, STREAM_OPERATOR));
            Some(self_map(cfg, seed)?)
        };
        Ok(Self {
            cfg,
            sections,
            fixed_map,
        })
    }

    fn stream_index(&self, trial: usize, redraw: bool) -> u64 {
        if redraw {
            trial as u64
        } else {
            0
        }
    }

    fn operator_map(&self, trial: usize, stream: u64) -> Result<SensingMap, HarnessError> {
        match &self.fixed_map {
            Some(m) => Ok(m.clone()),
            None => self_map(
                self.cfg,
                derive_seed(self.cfg.run.seed, trial as u64, stream),
            ),
        }
    }

    fn trial_inputs(&self, trial: usize) -> Result<TrialInputs, HarnessError> {
        let run = &self.cfg.run;
        let sig_seed = derive_seed(
            run.seed,
            self.stream_index(trial, run.redraw_signal),
            STREAM_SIGNAL,
        );
        let noise_seed = derive_seed(
            run.seed,
            self.stream_index(trial, run.redraw_noise),
            STREAM_NOISE,
        );
        let truth = generate_spectrum(&self.cfg.plan, &self.cfg.signal.spec(sig_seed))
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        let x = spectrum_to_time(&truth);
        let var = noise_variance(&x, self.cfg.signal.snr_db)
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        let noisy = add_noise(&x, var, noise_seed);
        let map = self.operator_map(trial, STREAM_OPERATOR)?;
        let y = measure_with(map.operator(), &noisy)?;
        Ok(TrialInputs { truth, map, y })
    }

    /// Pure noise at the variance a drawn signal would get.
    fn calibration_inputs(
        &self,
        index: usize,
    ) -> Result<(SensingMap, Vec<Complex64>), HarnessError> {
        let run = &self.cfg.run;
        let sig_seed = derive_seed(run.seed, index as u64, STREAM_CAL_SIGNAL);
        let truth = generate_spectrum(&self.cfg.plan, &self.cfg.signal.spec(sig_seed))
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        let x = spectrum_to_time(&truth);
        let var = noise_variance(&x, self.cfg.signal.snr_db)
            .map_err(|e| HarnessError::Runtime(e.to_string()))?;
        let silent = TimeSignal {
            samples: vec![Complex64::new(0.0, 0.0); x.len()],
            ..x
        };
        let noise = add_noise(
            &silent,
            var,
            derive_seed(run.seed, index as u64, STREAM_CAL_NOISE),
        );
        let map = self.operator_map(index, STREAM_CAL_OPERATOR)?;
        let y = measure_with(map.operator(), &noise)?;
        Ok((map, y))
    }

    fn solve_one(
        &self,
        map: &SensingMap,
        y: &[Complex64],
        solver: &NamedSolver,
    ) -> Result<(SolveResult, f64), HarnessError> {
        let start = Instant::now();
        let res = solve(map, y, &self.sections, &solver.config)
            .map_err(|e| HarnessError::Runtime(format!("solver '{}': {e}", solver.name)))?;
        Ok((res, start.elapsed().as_secs_f64()))
    }

    fn energies(&self, r_hat: &[Complex64]) -> (SubbandEnergies, SubbandEnergies, f64) {
        let plan = &self.cfg.plan;
        let sv = SpectrumVector::new(plan.clone(), r_hat.to_vec()).expect("solver output length");
        let raw = subband_energies(&sv, plan, Normalization::Raw);
        let shown = match self.cfg.run.normalization {
            Normalization::Raw => raw.clone(),
            Normalization::Total => subband_energies(&sv, plan, Normalization::Total),
        };
        (raw, shown, norm2(r_hat))
    }
}

fn measure_with(op: &MeasurementOperator, x: &TimeSignal) -> Result<Vec<Complex64>, HarnessError> {
    measure(op, x)
        .map(|m| m.values)
        .map_err(|e| HarnessError::Runtime(e.to_string()))
}

fn self_map(cfg: &ExperimentConfig, seed: u64) -> Result<SensingMap, HarnessError> {
    let n = cfg.plan.n_bins();
    let op = make_operator(cfg.measurement.kind, cfg.measurement.m, n, seed)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    sensing_map(Arc::new(op), n).map_err(|e| HarnessError::Config(e.to_string()))
}

/// Maps `f` over `0..count`, in parallel when enabled, preserving order.
fn map_indices<T, F>(count: usize, parallelism: usize, f: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(usize) -> Result<T, HarnessError> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if parallelism != 1 {
            let work = || (0..count).into_par_iter().map(&f).collect();
            if parallelism == 0 {
                return work();
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(parallelism)
                .build()
                .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            return pool.install(work);
        }
    }
    let _ = parallelism;
    (0..count).map(f).collect()
}

/// Per-solver thresholds, or `None` when detection is off.
fn thresholds(runner: &Runner) -> Result<Option<Vec<f64>>, HarnessError> {
    let cfg = runner.cfg;
    match cfg.run.detection {
        DetectionPolicy::None => Ok(None),
        DetectionPolicy::Fixed { threshold } => Ok(Some(vec![threshold; cfg.solvers.len()])),
        DetectionPolicy::Calibrated { pfa, trials } => {
            let per_trial = map_indices(trials, cfg.run.parallelism, |i| {
                let (map, y) = runner.calibration_inputs(i)?;
                cfg.solvers
                    .iter()
                    .map(|s| {
                        let (res, _) = runner.solve_one(&map, &y, s)?;
                        let (raw, _, _) = runner.energies(&res.r_hat);
                        Ok(detection_statistics(&raw, &cfg.plan))
                    })
                    .collect::<Result<Vec<_>, HarnessError>>()
            })?;
            Ok(Some(
                (0..cfg.solvers.len())
                    .map(|s| {
                        let pooled: Vec<f64> = per_trial
                            .iter()
                            .flat_map(|t| t[s].iter().copied())
                            .collect();
                        crate::detect::calibrate_threshold(&pooled, pfa)
                    })
                    .collect(),
            ))
        }
    }
}

/// Runs the configured experiment. Output is a pure function of `cfg`
/// apart from `solve_seconds`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let runner = Runner::new(cfg)?;
    let thresholds = thresholds(&runner)?;

    type TrialOut = (
        Vec<TrialRecord>,
        Option<(SpectrumVector, Vec<Vec<Complex64>>, MeasurementDump)>,
    );
    let per_trial: Vec<TrialOut> = map_indices(cfg.run.trials, cfg.run.parallelism, |t| {
        let inputs = runner.trial_inputs(t)?;
        let mut records = Vec::with_capacity(cfg.solvers.len());
        let mut recoveries = Vec::new();
        for (si, s) in cfg.solvers.iter().enumerate() {
            let (res, secs) = runner.solve_one(&inputs.map, &inputs.y, s)?;
            let (raw, shown, r_norm) = runner.energies(&res.r_hat);
            let decisions = match &thresholds {
                Some(th) => detection_statistics(&raw, &cfg.plan)
                    .into_iter()
                    .map(|v| v > th[si])
                    .collect(),
                None => Vec::new(),
            };
            records.push(TrialRecord {
                trial: t,
                solver: s.name.clone(),
                energies: shown.values,
                r_norm,
                residual_norm: res.residual_norm,
                bound: res.bound,
                objective: res.objective,
                iterations: res.iterations,
                converged: res.converged,
                decisions,
                solve_seconds: secs,
            });
            if t == 0 {
                recoveries.push(res.r_hat);
            }
        }
        let first = (t == 0).then(|| {
            let op = inputs.map.operator();
            let dump = MeasurementDump {
                kind: op.kind(),
                m: op.m(),
                n: op.n(),
                seed: op.seed(),
                y: inputs.y.iter().map(|v| (v.re, v.im)).collect(),
            };
            (inputs.truth, recoveries, dump)
        });
        Ok((records, first))
    })?;

    let mut records = Vec::with_capacity(cfg.run.trials * cfg.solvers.len());
    let mut first = None;
    for (recs, f) in per_trial {
        records.extend(recs);
        if f.is_some() {
            first = f;
        }
    }
    let (first_truth, recov, first_measurement) = first.expect("trial 0 ran");
    let first_recoveries = cfg
        .solvers
        .iter()
        .zip(recov)
        .map(|(s, r)| {
            (
                s.name.clone(),
                SpectrumVector::new(cfg.plan.clone(), r).expect("solver output length"),
            )
        })
        .collect();

    let names: Vec<String> = cfg.solvers.iter().map(|s| s.name.clone()).collect();
    let report = aggregate(
        &cfg.plan,
        &names,
        cfg.baseline(),
        cfg.run.normalization,
        cfg.run.include_unconverged,
        thresholds.as_deref(),
        &records,
    );
    Ok(ExperimentOutput {
        records,
        report,
        first_truth,
        first_recoveries,
        first_measurement,
    })
}

/// Aggregates trial records; EBR is taken on mean energies.
pub fn aggregate(
    plan: &BandPlan,
    solver_names: &[String],
    baseline: &str,
    normalization: Normalization,
    include_unconverged: bool,
    thresholds: Option<&[f64]>,
    records: &[TrialRecord],
) -> AggregateReport {
    let k = plan.num_sections();
    let mut solvers: Vec<SolverSummary> = solver_names
        .iter()
        .enumerate()
        .map(|(si, name)| {
            let all: Vec<&TrialRecord> = records.iter().filter(|r| &r.solver == name).collect();
            let unconverged = all.iter().filter(|r| !r.converged).count();
            let used: Vec<&TrialRecord> = all
                .iter()
                .copied()
                .filter(|r| include_unconverged || r.converged)
                .collect();
            let n = used.len() as f64;
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| -> f64 {
                if used.is_empty() {
                    f64::NAN
                } else {
                    used.iter().map(|r| f(r)).sum::<f64>() / n
                }
            };
            let mean_energy: Vec<f64> = (0..k).map(|j| mean(&|r| r.energies[j])).collect();
            let std_energy: Vec<f64> = (0..k)
                .map(|j| {
                    if used.len() < 2 {
                        0.0
                    } else {
                        let m = mean_energy[j];
                        (used
                            .iter()
                            .map(|r| (r.energies[j] - m).powi(2))
                            .sum::<f64>()
                            / (n - 1.0))
                            .sqrt()
                    }
                })
                .collect();
            let threshold = thresholds.map(|t| t[si]);
            let detecting = threshold.is_some() && !used.is_empty();
            let occupied_rate = if detecting {
                (0..k)
                    .map(|j| mean(&|r| if r.decisions[j] { 1.0 } else { 0.0 }))
                    .collect()
            } else {
                Vec::new()
            };
            let (all_active_detected_rate, false_alarm_rate) = if detecting {
                let active: Vec<usize> = (0..k)
                    .filter(|&j| plan.is_active(j) == Some(true))
                    .collect();
                let inactive: Vec<usize> = (0..k)
                    .filter(|&j| plan.is_active(j) == Some(false))
                    .collect();
                let all_rate = mean(&|r| {
                    if active.iter().all(|&j| r.decisions[j]) {
                        1.0
                    } else {
                        0.0
                    }
                });
                let fa = if inactive.is_empty() {
                    None
                } else {
                    let hits: usize = used
                        .iter()
                        .map(|r| inactive.iter().filter(|&&j| r.decisions[j]).count())
                        .sum();
                    Some(hits as f64 / (inactive.len() * used.len()) as f64)
                };
                (Some(all_rate), fa)
            } else {
                (None, None)
            };
            SolverSummary {
                name: name.clone(),
                trials_used: used.len(),
                unconverged,
                mean_iterations: mean(&|r| r.iterations as f64),
                mean_solve_seconds: mean(&|r| r.solve_seconds),
                mean_energy,
                std_energy,
                ebr_vs_baseline: Vec::new(),
                threshold,
                occupied_rate,
                all_active_detected_rate,
                false_alarm_rate,
            }
        })
        .collect();

    if let Some(base) = solvers
        .iter()
        .find(|s| s.name == baseline)
        .map(|s| s.mean_energy.clone())
    {
        let base = SubbandEnergies::new(base, normalization);
        for s in &mut solvers {
            let e = SubbandEnergies::new(s.mean_energy.clone(), normalization);
            s.ebr_vs_baseline = crate::detect::ebr(&e, &base, plan);
        }
    }
    AggregateReport {
        normalization,
        baseline: baseline.to_string(),
        solvers,
    }
}
