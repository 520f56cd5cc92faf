//! CSV and JSON emission. Floats are written with 17 significant digits so
//! every value parses back to the identical `f64`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{AggregateReport, HarnessError, TrialRecord};
use crate::bandplan::BandPlan;
use crate::sampling::OperatorKind;
use crate::sigmodel::SpectrumVector;

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(f).unwrap_or_default()
}

fn io_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, HarnessError> {
    csv::WriterBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(io_err(path))
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<(), HarnessError> {
    w.flush().map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// `k` sections: `trial,solver,converged,iterations,objective,residual_norm,
/// bound,r_norm,e_1..e_k[,occ_1..occ_k]`. Occupancy columns appear only
/// when some record carries decisions.
pub fn emit_trials_csv(
    records: &[TrialRecord],
    num_sections: usize,
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let with_occ = records.iter().any(|r| !r.decisions.is_empty());
    let mut w = writer(path)?;
    let mut header: Vec<String> = [
        "trial",
        "solver",
        "converged",
        "iterations",
        "objective",
        "residual_norm",
        "bound",
        "r_norm",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=num_sections).map(|k| format!("e_{k}")));
    if with_occ {
        header.extend((1..=num_sections).map(|k| format!("occ_{k}")));
    }
    w.write_record(&header).map_err(io_err(path))?;
    for r in records {
        let mut row = vec![
            r.trial.to_string(),
            r.solver.clone(),
            u8::from(r.converged).to_string(),
            r.iterations.to_string(),
            f(r.objective),
            f(r.residual_norm),
            f(r.bound),
            f(r.r_norm),
        ];
        row.extend(r.energies.iter().map(|&e| f(e)));
        if with_occ {
            row.extend(r.decisions.iter().map(|&d| u8::from(d).to_string()));
        }
        w.write_record(&row).map_err(io_err(path))?;
    }
    finish(w, path)
}

/// Parses a file written by [`emit_trials_csv`]; `solve_seconds` is 0.
pub fn read_trials_csv(path: impl AsRef<Path>) -> Result<Vec<TrialRecord>, HarnessError> {
    let path = path.as_ref();
    let mut rd = csv::Reader::from_path(path).map_err(io_err(path))?;
    let header = rd.headers().map_err(io_err(path))?.clone();
    let k = header.iter().filter(|h| h.starts_with("e_")).count();
    let with_occ = header.iter().any(|h| h.starts_with("occ_"));
    let bad = |line: usize, what: &str| HarnessError::Io {
        path: path.display().to_string(),
        message: format!("line {line}: bad {what}"),
    };
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(io_err(path))?;
        let line = i + 2;
        let num = |j: usize, what: &str| -> Result<f64, HarnessError> {
            rec.get(j)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| bad(line, what))
        };
        let int = |j: usize, what: &str| -> Result<usize, HarnessError> {
            rec.get(j)
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(|| bad(line, what))
        };
        let energies = (0..k)
            .map(|j| num(8 + j, "energy"))
            .collect::<Result<Vec<_>, _>>()?;
        let decisions = if with_occ {
            (0..k)
                .map(|j| int(8 + k + j, "decision").map(|v| v == 1))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            Vec::new()
        };
        out.push(TrialRecord {
            trial: int(0, "trial")?,
            solver: rec.get(1).ok_or_else(|| bad(line, "solver"))?.to_string(),
            converged: int(2, "converged")? == 1,
            iterations: int(3, "iterations")?,
            objective: num(4, "objective")?,
            residual_norm: num(5, "residual_norm")?,
            bound: num(6, "bound")?,
            r_norm: num(7, "r_norm")?,
            energies,
            decisions,
            solve_seconds: 0.0,
        });
    }
    Ok(out)
}

/// One row per (solver, section), then a per-solver summary file next to
/// it named `<stem>_solvers.csv`.
pub fn emit_aggregate_csv(
    report: &AggregateReport,
    plan: &BandPlan,
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record([
        "solver",
        "section",
        "label",
        "f_lo_hz",
        "f_hi_hz",
        "active",
        "normalization",
        "mean_energy",
        "std_energy",
        "baseline",
        "ebr_basis",
        "ebr_pct",
        "occupied_rate",
    ])
    .map_err(io_err(path))?;
    for s in &report.solvers {
        for (k, sec) in plan.sections().iter().enumerate() {
            w.write_record([
                s.name.clone(),
                (k + 1).to_string(),
                sec.label.clone(),
                f(sec.f_lo),
                f(sec.f_hi),
                sec.active_truth
                    .map(|a| u8::from(a).to_string())
                    .unwrap_or_default(),
                report.normalization.to_string(),
                f(s.mean_energy[k]),
                f(s.std_energy[k]),
                report.baseline.clone(),
                "mean_energies".to_string(),
                opt(s.ebr_vs_baseline.get(k).copied().flatten()),
                opt(s.occupied_rate.get(k).copied()),
            ])
            .map_err(io_err(path))?;
        }
    }
    finish(w, path)?;

    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("aggregate");
    let spath = path.with_file_name(format!("{stem}_solvers.csv"));
    let mut w = writer(&spath)?;
    w.write_record([
        "solver",
        "trials_used",
        "unconverged",
        "mean_iterations",
        "threshold",
        "all_active_detected_rate",
        "false_alarm_rate",
    ])
    .map_err(io_err(&spath))?;
    for s in &report.solvers {
        w.write_record([
            s.name.clone(),
            s.trials_used.to_string(),
            s.unconverged.to_string(),
            f(s.mean_iterations),
            opt(s.threshold),
            opt(s.all_active_detected_rate),
            opt(s.false_alarm_rate),
        ])
        .map_err(io_err(&spath))?;
    }
    finish(w, &spath)
}

/// `trial,solver,solve_seconds` plus per-solver means relative to the
/// baseline. Wall time is machine-dependent, so it lives apart from the
/// deterministic outputs.
pub fn emit_timing_csv(
    records: &[TrialRecord],
    report: &AggregateReport,
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = writer(path)?;
    w.write_record(["trial", "solver", "solve_seconds", "relative_to_baseline"])
        .map_err(io_err(path))?;
    let base = report
        .solver(&report.baseline)
        .map(|s| s.mean_solve_seconds)
        .unwrap_or(f64::NAN);
    for s in &report.solvers {
        w.write_record([
            "mean".to_string(),
            s.name.clone(),
            f(s.mean_solve_seconds),
            f(s.mean_solve_seconds / base),
        ])
        .map_err(io_err(path))?;
    }
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.solver.clone(),
            f(r.solve_seconds),
            String::new(),
        ])
        .map_err(io_err(path))?;
    }
    finish(w, path)
}

/// `bin,freq_hz,truth,<name>...` with spectral magnitudes `|r_k|`.
pub fn emit_spectrum_plotdata(
    truth: &SpectrumVector,
    recoveries: &[(String, SpectrumVector)],
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    for (name, r) in recoveries {
        if r.len() != truth.len() {
            return Err(HarnessError::Runtime(format!(
                "recovery '{name}' has {} bins, truth has {}",
                r.len(),
                truth.len()
            )));
        }
    }
    let mut w = writer(path)?;
    let mut header = vec![
        "bin".to_string(),
        "freq_hz".to_string(),
        "truth".to_string(),
    ];
    header.extend(recoveries.iter().map(|(n, _)| n.clone()));
    w.write_record(&header).map_err(io_err(path))?;
    let plan = truth.plan();
    for k in 0..truth.len() {
        let mut row = vec![
            k.to_string(),
            f(plan.bin_frequency(k)),
            f(truth.values()[k].norm()),
        ];
        row.extend(recoveries.iter().map(|(_, r)| f(r.values()[k].norm())));
        w.write_record(&row).map_err(io_err(path))?;
    }
    finish(w, path)
}

/// Everything needed to rebuild one trial's `(A, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementDump {
    pub kind: OperatorKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// `(re, im)` pairs.
    pub y: Vec<(f64, f64)>,
}

impl MeasurementDump {
    pub fn values(&self) -> Vec<Complex64> {
        self.y
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect()
    }
}

pub fn write_measurement_dump(
    dump: &MeasurementDump,
    path: impl AsRef<Path>,
) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let text =
        serde_json::to_string_pretty(dump).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_measurement_dump(path: impl AsRef<Path>) -> Result<MeasurementDump, HarnessError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let dump: MeasurementDump = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    if dump.y.len() != dump.m {
        return Err(HarnessError::Config(format!(
            "{}: y has {} entries, m = {}",
            path.display(),
            dump.y.len(),
            dump.m
        )));
    }
    Ok(dump)
}
