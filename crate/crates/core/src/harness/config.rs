//! Experiment configuration file.
//!
//! ```toml
//! [bandplan]                  # inline plan, or `file = "plan.toml"`
//! f_min_hz = 0.0
//! f_max_hz = 500e6
//! n_bins = 500
//! [[bandplan.band]]
//! f_lo_hz = 30e6
//! f_hi_hz = 70e6
//!
//! [signal]
//! psd_ranges = [[0.0277, 0.1126]]
//! snr_db = 13.0
//!
//! [measurement]
//! kind = "selection"
//! m = 250
//!
//! [[solver]]
//! name = "lasso"
//! program = "lasso"
//! epsilon = { value = 0.1, mode = "relative" }
//!
//! [run]
//! trials = 200
//! seed = 2024
//! ```
//!
//! Relative `file` paths resolve against the config file's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bandplan::{BandPlan, BandPlanFile};
use crate::detect::Normalization;
use crate::sampling::OperatorKind;
use crate::sigmodel::{SignalMode, SignalSpec};
use crate::solvers::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub psd_ranges: Vec<(f64, f64)>,
    pub snr_db: f64,
    #[serde(default)]
    pub mode: SignalMode,
}

impl SignalSection {
    pub fn spec(&self, seed: u64) -> SignalSpec {
        SignalSpec {
            psd_ranges: self.psd_ranges.clone(),
            snr_db: self.snr_db,
            seed,
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub kind: OperatorKind,
    pub m: usize,
    /// Operator seed when the operator is not redrawn per trial. Defaults to
    /// a stream derived from the master seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectionPolicy {
    #[default]
    None,
    Fixed {
        threshold: f64,
    },
    /// Per-solver threshold at false-alarm rate `pfa` from noise-only runs.
    Calibrated {
        #[serde(default = "default_pfa")]
        pfa: f64,
        #[serde(default = "default_calibration_trials")]
        trials: usize,
    },
}

fn default_pfa() -> f64 {
    0.01
}

fn default_calibration_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub trials: usize,
    pub seed: u64,
    pub normalization: Normalization,
    /// Solver name EBR is measured against; defaults to the first solver.
    pub baseline: Option<String>,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    pub parallelism: usize,
    pub redraw_signal: bool,
    pub redraw_noise: bool,
    pub redraw_operator: bool,
    pub include_unconverged: bool,
    pub detection: DetectionPolicy,
    /// Output directory, overridden by `--out`.
    pub out: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0,
            normalization: Normalization::Total,
            baseline: None,
            parallelism: 0,
            redraw_signal: true,
            redraw_noise: true,
            redraw_operator: true,
            include_unconverged: true,
            detection: DetectionPolicy::None,
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedSolver {
    pub name: String,
    pub config: SolverConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub plan: Arc<BandPlan>,
    pub signal: SignalSection,
    pub measurement: MeasurementSection,
    pub solvers: Vec<NamedSolver>,
    pub run: RunSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    bandplan: toml::Table,
    signal: SignalSection,
    measurement: MeasurementSection,
    solver: Vec<toml::Table>,
    #[serde(default)]
    run: RunSection,
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        // An unreadable config is a config error, not a runtime failure.
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    /// Parses a config whose relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let cfg_err = |e: String| HarnessError::Config(e);
        let raw: RawConfig = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;

        let plan = match raw.bandplan.get("file") {
            Some(toml::Value::String(f)) => {
                if raw.bandplan.len() != 1 {
                    return Err(cfg_err(
                        "[bandplan] takes either `file` or an inline plan, not both".into(),
                    ));
                }
                let p = base_dir.join(f);
                BandPlan::from_file(&p).map_err(|e| cfg_err(format!("{}: {e}", p.display())))?
            }
            Some(_) => return Err(cfg_err("[bandplan] file must be a string".into())),
            None => {
                let file: BandPlanFile = raw
                    .bandplan
                    .try_into()
                    .map_err(|e: toml::de::Error| cfg_err(format!("[bandplan]: {e}")))?;
                file.build().map_err(|e| cfg_err(e.to_string()))?
            }
        };

        let mut solvers = Vec::with_capacity(raw.solver.len());
        for mut table in raw.solver {
            let name = match table.remove("name") {
                Some(toml::Value::String(s)) => Some(s),
                Some(_) => return Err(cfg_err("solver name must be a string".into())),
                None => None,
            };
            let config: SolverConfig = table
                .try_into()
                .map_err(|e: toml::de::Error| cfg_err(format!("[[solver]]: {e}")))?;
            let name = name.unwrap_or_else(|| config.program.name().to_string());
            solvers.push(NamedSolver { name, config });
        }

        let cfg = ExperimentConfig {
            plan: Arc::new(plan),
            signal: raw.signal,
            measurement: raw.measurement,
            solvers,
            run: raw.run,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |s: String| Err(HarnessError::Config(s));
        if self.run.trials == 0 {
            return bad("run.trials must be >= 1".into());
        }
        if self.solvers.is_empty() {
            return bad("at least one [[solver]] is required".into());
        }
        let mut seen = HashSet::new();
        for s in &self.solvers {
            if !seen.insert(s.name.as_str()) {
                return bad(format!("duplicate solver name '{}'", s.name));
            }
            if let Err(e) = s.config.validate() {
                return bad(format!("solver '{}': {e}", s.name));
            }
            if s.config.program == crate::solvers::Program::BlockL2l1
                && !self.plan.n_bins().is_multiple_of(s.config.d0)
            {
                return bad(format!(
                    "solver '{}': d0 = {} does not divide n = {}",
                    s.name,
                    s.config.d0,
                    self.plan.n_bins()
                ));
            }
        }
        let n = self.plan.n_bins();
        if self.measurement.m == 0 || self.measurement.m > n {
            return bad(format!(
                "measurement.m = {} must be in 1..={n}",
                self.measurement.m
            ));
        }
        if let Some(b) = &self.run.baseline {
            if !seen.contains(b.as_str()) {
                return bad(format!("baseline '{b}' is not a configured solver"));
            }
        }
        match self.run.detection {
            DetectionPolicy::Fixed { threshold } if !(threshold >= 0.0) => {
                return bad("detection threshold must be >= 0".into())
            }
            DetectionPolicy::Calibrated { pfa, trials }
                if !(0.0..1.0).contains(&pfa) || trials == 0 =>
            {
                return bad("calibration needs pfa in [0, 1) and trials >= 1".into())
            }
            _ => {}
        }
        self.signal
            .spec(0)
            .validate()
            .map_err(|e| HarnessError::Config(format!("[signal]: {e}")))?;
        let active = self.plan.active_bands().len();
        if self.signal.psd_ranges.len() != active {
            return bad(format!(
                "[signal] psd_ranges has {} entries, plan has {active} active sections",
                self.signal.psd_ranges.len()
            ));
        }
        Ok(())
    }

    pub fn baseline(&self) -> &str {
        self.run
            .baseline
            .as_deref()
            .unwrap_or(self.solvers[0].name.as_str())
    }

    /// Keeps only the named solvers, in the order given.
    pub fn select_solvers(&mut self, names: &[String]) -> Result<(), HarnessError> {
        let mut picked = Vec::with_capacity(names.len());
        for n in names {
            match self.solvers.iter().find(|s| &s.name == n) {
                Some(s) => picked.push(s.clone()),
                None => return Err(HarnessError::Config(format!("unknown solver '{n}'"))),
            }
        }
        self.solvers = picked;
        if let Some(b) = &self.run.baseline {
            if !self.solvers.iter().any(|s| &s.name == b) {
                self.run.baseline = None;
            }
        }
        self.validate()
    }
}
