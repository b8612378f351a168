//! Experiment configuration files: TOML with `[experiment]`, `[scenario]`,
//! `[detector]` and `[pursuit]` sections. One experiment per file.

use serde::Deserialize;

use lse_core::cfar::{CfarConfig, CfarVariant};
use lse_core::nomp::{RefineSettings, StatGrid};

use crate::scenario::ScenarioSpec;
use crate::{HarnessError, Result};

/// Which algorithm the runner benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Full detection loop with initialization.
    NompCfar,
    /// Purely additive ablation.
    NompCfarForward,
    /// Noise-variance-aware pursuit with a fixed threshold.
    NompBaseline,
    /// Conventional per-cell FFT + CFAR.
    ClassicalCfar,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    algorithm: Algorithm,
    trials: usize,
    p_fa: f64,
    master_seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SnrSpec {
    Same(f64),
    PerTarget(Vec<f64>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    dims: Vec<usize>,
    k_targets: usize,
    snr_db: SnrSpec,
    #[serde(default = "default_min_sep")]
    min_sep_bins: f64,
    #[serde(default = "default_one")]
    snapshots: usize,
    #[serde(default)]
    compression_ratio: Option<f64>,
    #[serde(default)]
    noise_fluct_db: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorSection {
    #[serde(default = "default_variant")]
    variant: String,
    n_ref: usize,
    #[serde(default = "default_guard")]
    n_guard: usize,
    #[serde(default)]
    os_rank: Option<usize>,
    #[serde(default)]
    exclusion_radius: Option<usize>,
    #[serde(default = "default_stat_grid")]
    stat_grid: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PursuitSection {
    k_max: usize,
    #[serde(default = "default_oversample")]
    oversample: usize,
    #[serde(default = "default_one")]
    newton_steps: usize,
    #[serde(default = "default_cyclic")]
    cyclic_rounds: usize,
    #[serde(default)]
    max_iters: Option<usize>,
    #[serde(default = "default_sigma2")]
    baseline_sigma2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: ExperimentSection,
    scenario: ScenarioSection,
    detector: DetectorSection,
    pursuit: PursuitSection,
}

fn default_min_sep() -> f64 {
    2.5
}
fn default_one() -> usize {
    1
}
fn default_variant() -> String {
    "ca".into()
}
fn default_guard() -> usize {
    4
}
fn default_stat_grid() -> String {
    "oversampled".into()
}
fn default_oversample() -> usize {
    4
}
fn default_cyclic() -> usize {
    3
}
fn default_sigma2() -> f64 {
    1.0
}

/// Fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Algorithm under test.
    pub algorithm: Algorithm,
    /// Number of Monte Carlo trials.
    pub trials: usize,
    /// Nominal average false alarm probability.
    pub p_fa: f64,
    /// Master seed; per-trial seeds derive from it.
    pub master_seed: u64,
    /// Scene template (the per-trial seed is filled by the runner).
    pub scenario: ScenarioSpec,
    /// Detector variant.
    pub variant: CfarVariant,
    /// Reference cell count.
    pub n_ref: usize,
    /// Guard cells per side per dimension.
    pub n_guard: usize,
    /// Order-statistic rank.
    pub os_rank: usize,
    /// Exclusion radius around known components.
    pub exclusion_radius: usize,
    /// Refinement knobs (statistic grid included).
    pub refine: RefineSettings,
    /// Candidate budget of the detection loop.
    pub k_max: usize,
    /// Iteration bound.
    pub max_iters: usize,
    /// Noise variance assumed by the fixed-threshold baseline.
    pub baseline_sigma2: f64,
}

impl ExperimentConfig {
    /// Parses and validates a TOML experiment file.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let snr_db = match raw.scenario.snr_db {
            SnrSpec::Same(v) => vec![v; raw.scenario.k_targets],
            SnrSpec::PerTarget(v) => v,
        };
        if snr_db.len() != raw.scenario.k_targets {
            return Err(HarnessError::Config(format!(
                "scenario.snr_db: {} entries for {} targets",
                snr_db.len(),
                raw.scenario.k_targets
            )));
        }
        let variant = match raw.detector.variant.as_str() {
            "ca" => CfarVariant::CellAveraging,
            "os" => CfarVariant::OrderStatistic,
            other => {
                return Err(HarnessError::Config(format!(
                    "detector.variant: unknown value {other:?} (expected \"ca\" or \"os\")"
                )))
            }
        };
        let stat_grid = match raw.detector.stat_grid.as_str() {
            "oversampled" => StatGrid::Oversampled,
            "dft" => StatGrid::Dft,
            other => {
                return Err(HarnessError::Config(format!(
                    "detector.stat_grid: unknown value {other:?} (expected \"oversampled\" or \"dft\")"
                )))
            }
        };
        if !(0.0 < raw.experiment.p_fa && raw.experiment.p_fa < 1.0) {
            return Err(HarnessError::Config(
                "experiment.p_fa must be in (0, 1)".into(),
            ));
        }
        if raw.detector.n_ref == 0 {
            return Err(HarnessError::Config("detector.n_ref must be positive".into()));
        }
        let os_rank = raw
            .detector
            .os_rank
            .unwrap_or((3 * raw.detector.n_ref).div_euclid(4).max(1));
        if os_rank == 0 || os_rank > raw.detector.n_ref {
            return Err(HarnessError::Config(format!(
                "detector.os_rank {os_rank} outside 1..={}",
                raw.detector.n_ref
            )));
        }
        if raw.pursuit.k_max == 0 {
            return Err(HarnessError::Config("pursuit.k_max must be positive".into()));
        }
        let max_iters = raw.pursuit.max_iters.unwrap_or(8 * raw.pursuit.k_max);
        if max_iters < raw.pursuit.k_max {
            return Err(HarnessError::Config(
                "pursuit.max_iters must be at least k_max".into(),
            ));
        }
        if raw.pursuit.oversample == 0 {
            return Err(HarnessError::Config(
                "pursuit.oversample must be at least 1".into(),
            ));
        }
        if !(raw.pursuit.baseline_sigma2 > 0.0) {
            return Err(HarnessError::Config(
                "pursuit.baseline_sigma2 must be positive".into(),
            ));
        }

        Ok(ExperimentConfig {
            algorithm: raw.experiment.algorithm,
            trials: raw.experiment.trials,
            p_fa: raw.experiment.p_fa,
            master_seed: raw.experiment.master_seed,
            scenario: ScenarioSpec {
                dims: raw.scenario.dims,
                k_targets: raw.scenario.k_targets,
                snr_db,
                min_sep_bins: raw.scenario.min_sep_bins,
                snapshots: raw.scenario.snapshots,
                compression_ratio: raw.scenario.compression_ratio,
                noise_fluct_db: raw.scenario.noise_fluct_db,
                seed: 0,
            },
            variant,
            n_ref: raw.detector.n_ref,
            n_guard: raw.detector.n_guard,
            os_rank,
            exclusion_radius: raw
                .detector
                .exclusion_radius
                .unwrap_or(raw.detector.n_guard),
            refine: RefineSettings {
                newton_steps_single: raw.pursuit.newton_steps,
                cyclic_rounds: raw.pursuit.cyclic_rounds,
                oversample: raw.pursuit.oversample,
                step_accept_rule: true,
                stat_grid,
            },
            k_max: raw.pursuit.k_max,
            max_iters,
            baseline_sigma2: raw.pursuit.baseline_sigma2,
        })
    }

    /// Detector configuration with the given threshold multiplier.
    pub fn cfar_config(&self, alpha: f64) -> CfarConfig<f64> {
        CfarConfig {
            variant: self.variant,
            n_ref: self.n_ref,
            n_guard: self.n_guard,
            os_rank: self.os_rank,
            alpha,
            exclusion_radius: self.exclusion_radius,
        }
    }
}
