//! Monte Carlo scene generation: uniformly drawn frequencies with a
//! wrap-around separation constraint, amplitudes set from per-target
//! integrated SNR against the nominal unit noise floor, optional noise
//! variance fluctuation, multiple snapshots and complex-Bernoulli
//! compression.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use lse_core::nomp::CandidateSet;
use lse_core::pursuit::CompressionOperator;
use lse_core::tensor::{synthesize, wrap_dist, ComplexTensor, FrequencyVector, SinusoidComponent};
use lse_core::Tensor64;

use crate::{HarnessError, Result};

/// Budget of full scene redraws before the separation constraint is deemed
/// infeasible.
const REJECTION_BUDGET: usize = 100_000;

/// Scene description for one Monte Carlo trial.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    /// Grid sizes.
    pub dims: Vec<usize>,
    /// Number of targets K.
    pub k_targets: usize,
    /// Per-target integrated SNR in dB (against the nominal unit noise
    /// variance).
    pub snr_db: Vec<f64>,
    /// Minimum pairwise wrap-around separation, in DFT bins, enforced per
    /// dimension.
    pub min_sep_bins: f64,
    /// Number of snapshots S.
    pub snapshots: usize,
    /// Compression rate M/N (1-D scenes only).
    pub compression_ratio: Option<f64>,
    /// Noise fluctuation half-range u in dB: the actual noise variance is
    /// `10^(U/10)` with `U ~ Uniform[−u, u]`.
    pub noise_fluct_db: f64,
    /// Trial seed.
    pub seed: u64,
}

/// What the sensor observed.
#[derive(Debug, Clone)]
pub enum Observation {
    /// One tensor snapshot.
    Single(Tensor64),
    /// Several tensor snapshots sharing frequencies.
    Snapshots(Vec<Tensor64>),
    /// Compressed 1-D measurement with its operator.
    Compressed {
        /// Measured vector Φ·vec(z) + noise.
        y: Vec<Complex64>,
        /// The compression operator.
        phi: CompressionOperator<f64>,
    },
}

/// One generated trial.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// True components. For multi-snapshot scenes the stored amplitude is
    /// the first snapshot's.
    pub truth: CandidateSet<f64>,
    /// Per-snapshot true amplitudes (length S each).
    pub truth_amps: Vec<Vec<Complex64>>,
    /// The observation.
    pub observation: Observation,
    /// Actual noise variance used (1.0 unless fluctuation is enabled).
    pub sigma2: f64,
}

impl ScenarioSpec {
    fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.iter().any(|&n| n == 0) {
            return Err(HarnessError::Config("dims must be positive".into()));
        }
        if self.k_targets == 0 {
            return Err(HarnessError::Config("k_targets must be at least 1".into()));
        }
        if self.snr_db.len() != self.k_targets {
            return Err(HarnessError::Config(format!(
                "snr_db has {} entries for {} targets",
                self.snr_db.len(),
                self.k_targets
            )));
        }
        if self.snapshots == 0 {
            return Err(HarnessError::Config("snapshots must be at least 1".into()));
        }
        if self.min_sep_bins < 0.0 {
            return Err(HarnessError::Config("min_sep_bins must be nonnegative".into()));
        }
        for &n in &self.dims {
            if self.min_sep_bins * self.k_targets as f64 >= n as f64 {
                return Err(HarnessError::Infeasible(format!(
                    "{} targets at {} bins separation cannot fit {} cells",
                    self.k_targets, self.min_sep_bins, n
                )));
            }
        }
        if let Some(r) = self.compression_ratio {
            if !(0.0 < r && r <= 1.0) {
                return Err(HarnessError::Config(
                    "compression_ratio must be in (0, 1]".into(),
                ));
            }
            if self.dims.len() != 1 {
                return Err(HarnessError::Config(
                    "compression applies to 1-D scenes only".into(),
                ));
            }
            if self.snapshots != 1 {
                return Err(HarnessError::Config(
                    "compression and multiple snapshots are exclusive".into(),
                ));
            }
        }
        if self.noise_fluct_db < 0.0 {
            return Err(HarnessError::Config(
                "noise_fluct_db must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

fn draw_separated_frequencies(
    rng: &mut ChaCha8Rng,
    dims: &[usize],
    k: usize,
    min_sep_bins: f64,
) -> Result<Vec<FrequencyVector<f64>>> {
    let two_pi = 2.0 * std::f64::consts::PI;
    'redraw: for _ in 0..REJECTION_BUDGET {
        let freqs: Vec<Vec<f64>> = (0..k)
            .map(|_| dims.iter().map(|_| rng.gen::<f64>() * two_pi).collect())
            .collect();
        for i in 0..k {
            for j in (i + 1)..k {
                for (d, &n) in dims.iter().enumerate() {
                    let sep = wrap_dist(freqs[i][d], freqs[j][d]);
                    if sep <= min_sep_bins * two_pi / n as f64 {
                        continue 'redraw;
                    }
                }
            }
        }
        return Ok(freqs.into_iter().map(FrequencyVector::new).collect());
    }
    Err(HarnessError::Infeasible(format!(
        "separation constraint not met in {REJECTION_BUDGET} draws"
    )))
}

fn noise_tensor(rng: &mut ChaCha8Rng, dims: &[usize], sigma2: f64) -> Tensor64 {
    let n: usize = dims.iter().product();
    let s = (sigma2 / 2.0).sqrt();
    let data = (0..n)
        .map(|_| {
            Complex64::new(
                rng.sample::<f64, _>(rand_distr::StandardNormal) * s,
                rng.sample::<f64, _>(rand_distr::StandardNormal) * s,
            )
        })
        .collect();
    ComplexTensor::from_data(dims, data).expect("valid dims")
}

/// Complex-Bernoulli compression operator with entries `(±1 ± j)/√2`.
pub fn bernoulli_operator(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
) -> CompressionOperator<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let data = (0..rows * cols)
        .map(|_| {
            Complex64::new(
                if rng.gen::<bool>() { s } else { -s },
                if rng.gen::<bool>() { s } else { -s },
            )
        })
        .collect();
    CompressionOperator::new(rows, cols, data).expect("valid operator shape")
}

/// Generates one trial: rejection-sampled separated frequencies, amplitudes
/// with uniform phases and magnitudes `√(SNR_lin/N)` against the nominal
/// unit noise floor, additive noise at the (possibly fluctuated) variance,
/// and the configured observation model.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n: usize = spec.dims.iter().product();
    let two_pi = 2.0 * std::f64::consts::PI;

    let freqs = draw_separated_frequencies(&mut rng, &spec.dims, spec.k_targets, spec.min_sep_bins)?;

    // per-snapshot amplitudes: fixed magnitude from the nominal SNR, fresh
    // uniform phase per snapshot
    let mags: Vec<f64> = spec
        .snr_db
        .iter()
        .map(|&db| (10f64.powf(db / 10.0) / n as f64).sqrt())
        .collect();
    let truth_amps: Vec<Vec<Complex64>> = (0..spec.k_targets)
        .map(|k| {
            (0..spec.snapshots)
                .map(|_| Complex64::from_polar(mags[k], rng.gen::<f64>() * two_pi))
                .collect()
        })
        .collect();

    let sigma2 = if spec.noise_fluct_db > 0.0 {
        let u = rng.gen_range(-spec.noise_fluct_db..=spec.noise_fluct_db);
        10f64.powf(u / 10.0)
    } else {
        1.0
    };

    let mut truth = CandidateSet::new(&spec.dims);
    truth.components = freqs
        .iter()
        .enumerate()
        .map(|(k, f)| SinusoidComponent::new(truth_amps[k][0], f.clone()))
        .collect();

    let observation = if let Some(ratio) = spec.compression_ratio {
        let m = ((ratio * n as f64).round() as usize).clamp(1, n);
        let phi = bernoulli_operator(&mut rng, m, n);
        let z = synthesize(&spec.dims, &truth.components).expect("valid scene");
        let s = (sigma2 / 2.0).sqrt();
        let y = phi
            .apply(z.data())
            .into_iter()
            .map(|v| {
                v + Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal) * s,
                    rng.sample::<f64, _>(rand_distr::StandardNormal) * s,
                )
            })
            .collect();
        Observation::Compressed { y, phi }
    } else if spec.snapshots == 1 {
        let z = synthesize(&spec.dims, &truth.components).expect("valid scene");
        let noise = noise_tensor(&mut rng, &spec.dims, sigma2);
        let data = z
            .data()
            .iter()
            .zip(noise.data())
            .map(|(a, b)| a + b)
            .collect();
        Observation::Single(ComplexTensor::from_data(&spec.dims, data).expect("valid dims"))
    } else {
        let mut snaps = Vec::with_capacity(spec.snapshots);
        for s_idx in 0..spec.snapshots {
            let comps: Vec<SinusoidComponent<f64>> = freqs
                .iter()
                .enumerate()
                .map(|(k, f)| SinusoidComponent::new(truth_amps[k][s_idx], f.clone()))
                .collect();
            let z = synthesize(&spec.dims, &comps).expect("valid scene");
            let noise = noise_tensor(&mut rng, &spec.dims, sigma2);
            let data = z
                .data()
                .iter()
                .zip(noise.data())
                .map(|(a, b)| a + b)
                .collect();
            snaps.push(ComplexTensor::from_data(&spec.dims, data).expect("valid dims"));
        }
        Observation::Snapshots(snaps)
    };

    Ok(Scenario {
        truth,
        truth_amps,
        observation,
        sigma2,
    })
}
