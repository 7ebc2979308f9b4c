//! Experiment configuration: JSON in, validated and seed-resolved model out.

use std::path::{Path, PathBuf};

use ec_eigen_core::faults::{FaultEvent, FaultSchedule, MultiRandomParams, ScheduleMode, ScheduleSpec};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Environment variable that overrides every seed in the config, for
/// reproducing a run without editing files.
pub const SEED_ENV_VAR: &str = "EC_EIGEN_SEED";

const CODING_SEED_SALT: u64 = 0xc0d1_c0de;
const SCHEDULE_SEED_SALT: u64 = 0x5c4e_d01e;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", rename_all_fields = "kebab-case")]
pub enum MatrixSpec {
    Tridiagonal { n: usize },
    Identity { n: usize },
    RandomSpd { n: usize, density: f64, seed: u64 },
    File { path: PathBuf },
    CovarianceCsv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    PowerExplicit,
    PowerImplicit,
    Tracemin,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub struct CodingSpec {
    pub k: usize,
    /// Nonzeros per row; `null` means the default for `k`.
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Load a previously encoded matrix and blocks instead of building.
    #[serde(default)]
    pub blocks_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "kebab-case", rename_all_fields = "kebab-case")]
pub enum ScheduleConfig {
    None,
    Single {
        iteration: usize,
        rows: Vec<usize>,
    },
    MultiRandom {
        events: usize,
        rows_per_event: usize,
        iteration_range: (usize, usize),
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Fully spelled-out events. Unlike the generated modes this is *not*
    /// checked against the coding capacity up front: arriving faults are the
    /// solver's problem, which is exactly what the runtime guard is for.
    Explicit {
        events: Vec<FaultEvent>,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    #[default]
    None,
    RestartOnFault,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", default)]
pub struct CgSpec {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for CgSpec {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub matrix: MatrixSpec,
    pub solver: SolverKind,
    /// Wanted eigenpairs: block width for the power method, count of
    /// smallest pairs for trace minimization.
    pub wanted: usize,
    pub epsilon: f64,
    pub max_iterations: usize,
    #[serde(default)]
    pub coding: Option<CodingSpec>,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub baseline: Baseline,
    #[serde(default)]
    pub cg: CgSpec,
    /// Apply a diagonal shift to make an indefinite matrix positive definite
    /// before solving; eigenvalues are reported unshifted.
    #[serde(default)]
    pub shift: bool,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Also dump recovered eigenvectors in Matrix Market array format.
    #[serde(default)]
    pub dump_eigenvectors: bool,
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            HarnessError::Config(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("bad config: {e}")))?;
        cfg.apply_seed_override();
        Ok(cfg)
    }

    /// `EC_EIGEN_SEED`, when set, replaces the run seed and re-derives the
    /// coding and schedule seeds from it.
    pub fn apply_seed_override(&mut self) {
        let Ok(text) = std::env::var(SEED_ENV_VAR) else { return };
        let Ok(seed) = text.trim().parse::<u64>() else { return };
        self.seed = seed;
        if let Some(c) = self.coding.as_mut() {
            c.seed = Some(seed ^ CODING_SEED_SALT);
        }
        if let ScheduleConfig::MultiRandom { seed: s, .. } = &mut self.schedule {
            *s = Some(seed ^ SCHEDULE_SEED_SALT);
        }
    }

    pub fn coding_seed(&self) -> u64 {
        self.coding
            .as_ref()
            .and_then(|c| c.seed)
            .unwrap_or(self.seed ^ CODING_SEED_SALT)
    }

    pub fn schedule_seed(&self) -> u64 {
        match &self.schedule {
            ScheduleConfig::MultiRandom { seed, .. } => {
                seed.unwrap_or(self.seed ^ SCHEDULE_SEED_SALT)
            }
            _ => self.seed ^ SCHEDULE_SEED_SALT,
        }
    }

    /// Materialize the fault schedule for a problem of `n` rows with coding
    /// capacity `k` (0 when uncoded).
    pub fn build_schedule(&self, n: usize, k: usize) -> Result<FaultSchedule, HarnessError> {
        let schedule = match &self.schedule {
            ScheduleConfig::None => FaultSchedule::none(),
            ScheduleConfig::Single { iteration, rows } => {
                ec_eigen_core::faults::generate_schedule(
                    &ScheduleSpec::Single { iteration: *iteration, rows: rows.clone() },
                    n,
                    k,
                    self.schedule_seed(),
                )?
            }
            ScheduleConfig::MultiRandom { events, rows_per_event, iteration_range, .. } => {
                ec_eigen_core::faults::generate_schedule(
                    &ScheduleSpec::MultiRandom(MultiRandomParams {
                        events: *events,
                        rows_per_event: *rows_per_event,
                        iteration_range: *iteration_range,
                    }),
                    n,
                    k,
                    self.schedule_seed(),
                )?
            }
            ScheduleConfig::Explicit { events } => {
                let mode = match events.len() {
                    0 => ScheduleMode::None,
                    1 => ScheduleMode::Single,
                    _ => ScheduleMode::MultiRandom,
                };
                let s = FaultSchedule { mode, seed: self.schedule_seed(), events: events.clone() };
                s.validate(n)?;
                s
            }
        };
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.wanted == 0 {
            return Err(HarnessError::Config("wanted must be at least 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(HarnessError::Config("epsilon must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(HarnessError::Config("max-iterations must be at least 1".into()));
        }
        let has_events = !matches!(self.schedule, ScheduleConfig::None);
        if has_events && self.coding.is_none() && self.baseline == Baseline::None {
            return Err(HarnessError::Config(
                "a fault schedule needs coding (or baseline = restart-on-fault)".into(),
            ));
        }
        if let Some(c) = &self.coding {
            if c.k == 0 {
                return Err(HarnessError::Config("coding.k must be at least 1".into()));
            }
            if let Some(p) = c.p {
                if p == 0 || p > c.k {
                    return Err(HarnessError::Config(format!(
                        "coding.p = {p} must be in 1..=k = {}",
                        c.k
                    )));
                }
            }
            if let Some(dir) = &c.blocks_dir {
                if !dir.exists() {
                    return Err(HarnessError::Config(format!(
                        "blocks directory {} does not exist",
                        dir.display()
                    )));
                }
            }
        }
        match &self.matrix {
            MatrixSpec::File { path } | MatrixSpec::CovarianceCsv { path } => {
                if !path.exists() {
                    return Err(HarnessError::Config(format!(
                        "matrix file {} does not exist",
                        path.display()
                    )));
                }
            }
            MatrixSpec::Tridiagonal { n } | MatrixSpec::Identity { n } => {
                if *n == 0 {
                    return Err(HarnessError::Config("matrix size must be positive".into()));
                }
            }
            MatrixSpec::RandomSpd { n, density, .. } => {
                if *n < 2 {
                    return Err(HarnessError::Config("random-spd needs n >= 2".into()));
                }
                if !(*density > 0.0 && *density <= 1.0) {
                    return Err(HarnessError::Config("density must be in (0, 1]".into()));
                }
            }
        }
        Ok(())
    }

    /// Total erasures the schedule will attempt, for the capacity warning.
    pub fn scheduled_erasures(&self) -> usize {
        match &self.schedule {
            ScheduleConfig::None => 0,
            ScheduleConfig::Single { rows, .. } => rows.len(),
            ScheduleConfig::MultiRandom { events, rows_per_event, .. } => events * rows_per_event,
            ScheduleConfig::Explicit { events } => events.iter().map(|e| e.rows.len()).sum(),
        }
    }
}
