//! Line-spectral estimation and detection with adaptive (CFAR) thresholds.
//!
//! The crate estimates the number, frequencies and complex amplitudes of
//! multidimensional sinusoids from noisy samples without knowledge of the
//! noise variance. Detection thresholds are derived from reference cells of
//! the spectrum so that a user-specified false alarm rate is maintained even
//! when the noise floor drifts.
//!
//! Main pieces:
//!
//! * [`tensor`] — complex tensor math: steering vectors, atoms, normalized
//!   and oversampled multidimensional spectra, peak finding, wrap-around
//!   frequency distance.
//! * [`cfar`] — reference/guard cell geometry, noise-floor estimation, the
//!   soft detection margin, and analytic false-alarm curves with threshold
//!   solvers for cell-averaging (single- and multi-snapshot) and
//!   order-statistic detectors.
//! * [`nomp`] — Newtonized greedy pursuit primitives: coarse on-grid
//!   detection, Newton frequency refinement, cyclic refinement, joint
//!   least-squares amplitude re-estimation, and the noise-variance-aware
//!   pursuit baseline.
//! * [`pursuit`] — the CFAR-driven model-order estimation loop (activate /
//!   deactivate one component per iteration), plus forward-only,
//!   multi-snapshot and compressive-measurement variants.
//! * [`analysis`] — Marcum-Q based detection probability prediction, the
//!   multi-target upper bound, a single-tone CRB reference, and scoring of
//!   estimates against ground truth.
//! * [`io`] — binary tensor file format for recorded data cubes.
//!
//! All numerics are generic over the scalar type through [`Scalar`];
//! concrete aliases for the common instantiations are exported at the crate
//! root ([`Tensor64`], [`Candidates64`], ...). `f64` is the precision the
//! test suite pins; `f32` is supported for storage-constrained callers.

pub mod analysis;
pub mod cfar;
pub mod error;
pub mod io;
pub mod nomp;
pub mod pursuit;
pub mod quad;
pub mod scalar;
pub mod special;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` complex tensor.
pub type Tensor64 = tensor::ComplexTensor<f64>;
/// `f32` complex tensor.
pub type Tensor32 = tensor::ComplexTensor<f32>;
/// `f64` frequency vector.
pub type Frequency64 = tensor::FrequencyVector<f64>;
/// `f64` sinusoid component.
pub type Component64 = tensor::SinusoidComponent<f64>;
/// `f64` candidate set.
pub type Candidates64 = nomp::CandidateSet<f64>;
/// `f64` detector configuration.
pub type CfarConfig64 = cfar::CfarConfig<f64>;
/// `f64` pursuit settings.
pub type PursuitSettings64 = pursuit::NompCfarSettings<f64>;
/// `f64` detection report.
pub type Report64 = pursuit::DetectionReport<f64>;
