//! Detection-driven model order estimation: a fixed-count pursuit
//! initializes a candidate set, then an iterative loop computes a soft
//! detection margin per component and either deactivates the weakest
//! component (most negative margin) or activates a new one detected in the
//! residual, until every retained component clears its adaptive threshold
//! and the residual holds nothing further.
//!
//! Variants: forward-only (no initialization, purely additive), multiple
//! snapshots sharing frequencies (snapshot-averaged power statistics), and
//! 1-D compressive measurements through normalized projected atoms.

use std::collections::HashMap;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::cfar::{self, CfarConfig, DeltaReport};
use crate::error::{Error, Result};
use crate::nomp::{
    coarse_detect_multi, cyclic_rebuild_refit, merge_pursuit_duplicates, rebuild_residuals,
    refine_freq, topk_multi, CandidateSet, PursuitComponent, RefineSettings, StatGrid,
};
use crate::scalar::Scalar;
use crate::tensor::{
    atom, oversampled_spectrum, peak_of_power_slice, ComplexTensor, FrequencyVector, GridIndex,
    SinusoidComponent,
};

/// Settings of the detection loop.
#[derive(Debug, Clone)]
pub struct NompCfarSettings<T> {
    /// Upper bound on the number of components (initialization size).
    pub k_max: usize,
    /// Detector geometry and threshold multiplier.
    pub cfar: CfarConfig<T>,
    /// Refinement knobs.
    pub refine: RefineSettings,
    /// Safety bound on loop iterations.
    pub max_iters: usize,
}

impl<T: Scalar> NompCfarSettings<T> {
    /// Settings with the iteration bound defaulted to `8·k_max`.
    pub fn new(k_max: usize, cfar: CfarConfig<T>) -> Self {
        NompCfarSettings {
            k_max,
            cfar,
            refine: RefineSettings::default(),
            max_iters: 8 * k_max.max(1),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::invalid("k_max must be at least 1"));
        }
        if self.max_iters < self.k_max {
            return Err(Error::invalid("max_iters must be at least k_max"));
        }
        if self.refine.oversample == 0 {
            return Err(Error::invalid("oversample factor must be at least 1"));
        }
        self.cfar.validate()
    }
}

/// What happened in one iteration of the detection loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceAction {
    /// Component removed (most negative margin).
    Deactivate,
    /// Component added from the residual.
    Activate,
    /// Loop ended.
    Stop,
}

/// One trace record of the detection loop.
#[derive(Debug, Clone)]
pub struct TraceEvent<T> {
    /// Action taken.
    pub action: TraceAction,
    /// Component index the action refers to (0 for stop).
    pub index: usize,
    /// Margin that drove the action, in dB.
    pub delta_db: T,
}

/// Final component list with per-component detection diagnostics.
#[derive(Debug, Clone)]
pub struct DetectionReport<T> {
    /// Retained components.
    pub components: CandidateSet<T>,
    /// Per-component margins Δ_k in dB, recomputed on the returned set.
    pub margins: Vec<T>,
    /// Per-component thresholds α·σ̂².
    pub thresholds: Vec<T>,
    /// Per-component noise floor estimates σ̂².
    pub noise_floors: Vec<T>,
    /// Loop iterations executed.
    pub iterations: usize,
    /// Per-iteration action log.
    pub trace: Option<Vec<TraceEvent<T>>>,
    /// False when the loop hit its iteration bound.
    pub converged: bool,
    /// True when the loop stopped because the candidate budget was full
    /// while the residual still crossed the threshold.
    pub saturated: bool,
    /// Diagnostics (reduced reference windows, skipped grid cells, guards).
    pub notes: Vec<String>,
}

/// Compression matrix Φ applied to vectorized observations.
#[derive(Debug, Clone)]
pub struct CompressionOperator<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>, // row-major rows×cols
}

impl<T: Scalar> CompressionOperator<T> {
    /// Builds an operator from row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if rows == 0 || cols == 0 || rows > cols {
            return Err(Error::invalid(
                "compression operator needs 1 <= rows <= cols",
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid("operator data length mismatch"));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("operator entries must be finite"));
        }
        Ok(CompressionOperator { rows, cols, data })
    }

    /// Identity operator (no compression).
    pub fn identity(n: usize) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        let mut data = vec![zero; n * n];
        for i in 0..n {
            data[i * n + i] = Complex::new(T::one(), T::zero());
        }
        CompressionOperator {
            rows: n,
            cols: n,
            data,
        }
    }

    /// Number of compressed measurements M.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Original length N.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Φ x.
    pub fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        debug_assert_eq!(x.len(), self.cols);
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; self.rows];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let mut acc = zero;
            for (a, b) in row.iter().zip(x) {
                acc = acc + a * b;
            }
            *o = acc;
        }
        out
    }

    /// Φᴴ y.
    pub fn adjoint(&self, y: &[Complex<T>]) -> Vec<Complex<T>> {
        debug_assert_eq!(y.len(), self.rows);
        let zero = Complex::new(T::zero(), T::zero());
        let mut out = vec![zero; self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            let yv = y[r];
            for (o, a) in out.iter_mut().zip(row) {
                *o = *o + a.conj() * yv;
            }
        }
        out
    }
}

// ─── Residue and pseudo-measurements ────────────────────────────────────

/// Residual after subtracting every component of the set.
pub fn residual<T: Scalar>(y: &ComplexTensor<T>, set: &CandidateSet<T>) -> Result<ComplexTensor<T>> {
    let model = crate::tensor::synthesize(y.dims(), &set.components)?;
    y.sub(&model)
}

/// Residual with component `k` added back: the measurement seen by the
/// detector when testing component `k` in isolation.
pub fn pseudo_measurement<T: Scalar>(
    y: &ComplexTensor<T>,
    set: &CandidateSet<T>,
    k: usize,
) -> Result<ComplexTensor<T>> {
    if k >= set.len() {
        return Err(Error::IndexOutOfRange(format!(
            "component {k} of {}",
            set.len()
        )));
    }
    let mut r = residual(y, set)?;
    crate::tensor::add_component(&mut r, &set.components[k])?;
    Ok(r)
}

// ─── Detection statistics on tensor snapshots ───────────────────────────

/// Snapshot-averaged power of the detection statistic grid together with
/// the matching N-grid power (subsampled from the oversampled transform
/// when the statistic grid is finer).
struct StatPower<T> {
    stat_power: Vec<T>,
    stat_dims: Vec<usize>,
    n_power: Vec<T>,
    gamma: usize,
}

fn averaged_stat_power<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    settings: &RefineSettings,
) -> StatPower<T> {
    let gamma = match settings.stat_grid {
        StatGrid::Dft => 1,
        StatGrid::Oversampled => settings.oversample,
    };
    let dims = snapshots[0].dims().to_vec();
    let mut stat_power: Vec<T> = Vec::new();
    for y in snapshots {
        let spec = oversampled_spectrum(y, gamma).expect("gamma >= 1");
        if stat_power.is_empty() {
            stat_power = spec.power();
        } else {
            for (a, p) in stat_power.iter_mut().zip(spec.power()) {
                *a = *a + p;
            }
        }
    }
    let inv_s = T::one() / T::from_count(snapshots.len());
    for a in stat_power.iter_mut() {
        *a = *a * inv_s;
    }
    let stat_dims: Vec<usize> = dims.iter().map(|&n| n * gamma).collect();
    let n_power = if gamma == 1 {
        stat_power.clone()
    } else {
        subsample_power(&stat_power, &stat_dims, &dims, gamma)
    };
    StatPower {
        stat_power,
        stat_dims,
        n_power,
        gamma,
    }
}

/// Values of the oversampled power at exact N-grid locations (bin γk per
/// dimension equals the N-point transform bin k).
fn subsample_power<T: Scalar>(
    stat_power: &[T],
    stat_dims: &[usize],
    dims: &[usize],
    gamma: usize,
) -> Vec<T> {
    let n_total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(n_total);
    let mut midx = vec![0usize; dims.len()];
    for _ in 0..n_total {
        let mut lin = 0usize;
        for d in (0..dims.len()).rev() {
            lin = lin * stat_dims[d] + midx[d] * gamma;
        }
        out.push(stat_power[lin]);
        for d in 0..dims.len() {
            midx[d] += 1;
            if midx[d] < dims[d] {
                break;
            }
            midx[d] = 0;
        }
    }
    out
}

/// Runs the soft detector on averaged snapshot power: peak on the statistic
/// grid, noise floor from N-grid reference cells around the peak's coarse
/// location.
fn delta_on_stat<T: Scalar>(
    sp: &StatPower<T>,
    dims: &[usize],
    config: &CfarConfig<T>,
    excluded: &[GridIndex],
) -> Result<DeltaReport<T>> {
    let (peak_lin, peak_power) = peak_of_power_slice(&sp.stat_power);
    let stat_idx = GridIndex::from_linear(peak_lin, &sp.stat_dims);
    let cut_coords: Vec<usize> = stat_idx
        .coords()
        .iter()
        .zip(dims)
        .map(|(&k, &n)| {
            let snapped = (k as f64 / sp.gamma as f64).round() as usize;
            snapped % n
        })
        .collect();
    let cut = GridIndex::new(cut_coords, dims).expect("snapped in bounds");
    cfar::delta_at_cut(&sp.n_power, dims, cut, peak_power, config, excluded)
}

/// Nearest N-grid cells of every component except `skip` (pass
/// `usize::MAX` to keep all), used as reference-cell exclusions.
fn exclusion_cells<T: Scalar>(
    comps: &[PursuitComponent<T>],
    dims: &[usize],
    skip: usize,
) -> Vec<GridIndex> {
    comps
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != skip)
        .map(|(_, c)| c.freq.nearest_cell(dims))
        .collect()
}

/// Peaks below this fraction of the mean observation energy are numerical
/// dust — leakage of exactly-cancelled components at the accuracy limit of
/// the refinement — not detectable signal. Roughly −190 dB relative for
/// `f64` and −59 dB for `f32`; both far beyond any physical dynamic range.
fn dust_floor<T: Scalar>(snapshots: &[ComplexTensor<T>]) -> T {
    let avg = snapshots
        .iter()
        .map(|y| y.energy())
        .fold(T::zero(), |a, b| a + b)
        / T::from_count(snapshots.len());
    avg * (T::epsilon() * T::from_f64c(1e3)).powf(T::from_f64c(1.5))
}

fn margins_multi<T: Scalar>(
    residuals: &[ComplexTensor<T>],
    comps: &[PursuitComponent<T>],
    settings: &NompCfarSettings<T>,
    floor: T,
) -> Result<Vec<DeltaReport<T>>> {
    let dims = residuals[0].dims().to_vec();
    let mut reports = Vec::with_capacity(comps.len());
    for k in 0..comps.len() {
        let a = atom(&dims, &comps[k].freq)?;
        let pseudos: Vec<ComplexTensor<T>> = residuals
            .iter()
            .enumerate()
            .map(|(s, r)| {
                let x = comps[k].amps[s];
                let data = r
                    .data()
                    .iter()
                    .zip(&a)
                    .map(|(rv, av)| *rv + x * *av)
                    .collect();
                ComplexTensor::from_data(&dims, data).expect("dims match")
            })
            .collect();
        let sp = averaged_stat_power(&pseudos, &settings.refine);
        let excl = exclusion_cells(comps, &dims, k);
        let mut rep = delta_on_stat(&sp, &dims, &settings.cfar, &excl)?;
        if rep.peak_power <= floor {
            rep.delta_db = T::neg_infinity();
        }
        reports.push(rep);
    }
    Ok(reports)
}

/// Soft margins of every component of a set against its pseudo-measurement,
/// with the other components' nearest cells excluded from the reference
/// window.
pub fn component_margins<T: Scalar>(
    y: &ComplexTensor<T>,
    set: &CandidateSet<T>,
    settings: &NompCfarSettings<T>,
) -> Result<Vec<DeltaReport<T>>> {
    settings.validate()?;
    let comps: Vec<PursuitComponent<T>> = set
        .components
        .iter()
        .map(|c| PursuitComponent {
            amps: vec![c.amplitude],
            freq: c.freq.clone(),
        })
        .collect();
    let res = residual(y, set)?;
    let floor = dust_floor(std::slice::from_ref(y));
    margins_multi(std::slice::from_ref(&res), &comps, settings, floor)
}

// ─── The detection loop ─────────────────────────────────────────────────

fn smv_amplitude<T: Scalar>(amps: &[Complex<T>]) -> Complex<T> {
    if amps.len() == 1 {
        return amps[0];
    }
    let mean_sq = amps
        .iter()
        .map(|a| a.norm_sqr())
        .fold(T::zero(), |a, b| a + b)
        / T::from_count(amps.len());
    let mag = mean_sq.sqrt();
    let phase = amps[0].arg();
    Complex::from_polar(mag, phase)
}

fn build_report<T: Scalar>(
    dims: &[usize],
    comps: &[PursuitComponent<T>],
    margins: Vec<DeltaReport<T>>,
    iterations: usize,
    trace: Vec<TraceEvent<T>>,
    converged: bool,
    saturated: bool,
    notes: Vec<String>,
) -> DetectionReport<T> {
    let mut set = CandidateSet::new(dims);
    set.components = comps
        .iter()
        .map(|c| SinusoidComponent::new(smv_amplitude(&c.amps), c.freq.clone()))
        .collect();
    DetectionReport {
        components: set,
        margins: margins.iter().map(|m| m.delta_db).collect(),
        thresholds: margins.iter().map(|m| m.threshold).collect(),
        noise_floors: margins.iter().map(|m| m.noise_floor).collect(),
        iterations,
        trace: Some(trace),
        converged,
        saturated,
        notes,
    }
}

fn run_engine<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    settings: &NompCfarSettings<T>,
) -> Result<DetectionReport<T>> {
    settings.validate()?;
    let dims = snapshots[0].dims().to_vec();
    let floor = dust_floor(snapshots);
    let (mut comps, mut residuals) = topk_multi(snapshots, settings.k_max, &settings.refine)?;

    let mut trace: Vec<TraceEvent<T>> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let mut iterations = 0usize;
    let mut converged = true;
    let mut saturated = false;
    // cycle guard state: cell removed in the immediately preceding
    // iteration and the margin each cell last activated with
    let mut removed_prev_iter: Option<usize> = None;
    let mut activation_delta: HashMap<usize, T> = HashMap::new();

    loop {
        if iterations >= settings.max_iters {
            converged = false;
            notes.push("iteration bound reached".into());
            break;
        }
        iterations += 1;
        let removed_last = removed_prev_iter.take();

        if !comps.is_empty() {
            let margins = margins_multi(&residuals, &comps, settings, floor)?;
            let (k_min, d_min) = margins
                .iter()
                .enumerate()
                .map(|(k, m)| (k, m.delta_db))
                .fold((0usize, T::infinity()), |acc, (k, d)| {
                    if d < acc.1 {
                        (k, d)
                    } else {
                        acc
                    }
                });
            if d_min < T::zero() {
                trace.push(TraceEvent {
                    action: TraceAction::Deactivate,
                    index: k_min,
                    delta_db: d_min,
                });
                let cell = comps[k_min].freq.nearest_cell(&dims).linear(&dims);
                removed_prev_iter = Some(cell);
                comps.remove(k_min);
                cyclic_rebuild_refit(snapshots, &mut residuals, &mut comps, &settings.refine)?;
                continue;
            }
        }

        // activation test on the residual, existing components excluded
        let sp = averaged_stat_power(&residuals, &settings.refine);
        let excl = exclusion_cells(&comps, &dims, usize::MAX);
        let rep = delta_on_stat(&sp, &dims, &settings.cfar, &excl)?;
        if rep.delta_db >= T::zero() && rep.peak_power > floor {
            if comps.len() >= settings.k_max {
                saturated = true;
                notes.push("candidate budget full while residual still fires".into());
                trace.push(TraceEvent {
                    action: TraceAction::Stop,
                    index: 0,
                    delta_db: rep.delta_db,
                });
                break;
            }
            let cand = coarse_detect_multi(&residuals, settings.refine.oversample);
            let cell = cand.freq.nearest_cell(&dims).linear(&dims);
            if removed_last == Some(cell) {
                if let Some(&prev) = activation_delta.get(&cell) {
                    if rep.delta_db <= prev {
                        notes.push("cycle guard: re-activation of just-removed cell with no improvement".into());
                        trace.push(TraceEvent {
                            action: TraceAction::Stop,
                            index: 0,
                            delta_db: rep.delta_db,
                        });
                        break;
                    }
                }
            }
            activation_delta.insert(cell, rep.delta_db);
            let (freq, amps) = refine_freq(&residuals, &cand.freq, &settings.refine);
            comps.push(PursuitComponent { amps, freq });
            merge_pursuit_duplicates(&mut comps);
            rebuild_residuals(snapshots, &comps, &mut residuals);
            trace.push(TraceEvent {
                action: TraceAction::Activate,
                index: comps.len() - 1,
                delta_db: rep.delta_db,
            });
            continue;
        }
        trace.push(TraceEvent {
            action: TraceAction::Stop,
            index: 0,
            delta_db: rep.delta_db,
        });
        break;
    }

    let final_margins = margins_multi(&residuals, &comps, settings, floor)?;
    Ok(build_report(
        &dims,
        &comps,
        final_margins,
        iterations,
        trace,
        converged,
        saturated,
        notes,
    ))
}

/// Full detection run on a single observation: fixed-count initialization,
/// then the deactivate/activate margin loop until every retained component
/// clears its threshold.
pub fn nomp_cfar<T: Scalar>(
    y: &ComplexTensor<T>,
    settings: &NompCfarSettings<T>,
) -> Result<DetectionReport<T>> {
    run_engine(std::slice::from_ref(y), settings)
}

/// Multi-snapshot detection run: snapshots share frequencies, amplitudes
/// vary per snapshot, statistics average the per-snapshot power spectra.
pub fn nomp_cfar_mmv<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    settings: &NompCfarSettings<T>,
) -> Result<DetectionReport<T>> {
    if snapshots.is_empty() {
        return Err(Error::invalid("at least one snapshot required"));
    }
    let dims = snapshots[0].dims();
    if snapshots.iter().any(|s| s.dims() != dims) {
        return Err(Error::invalid("snapshots must share dimensions"));
    }
    run_engine(snapshots, settings)
}

/// Forward-only ablation: no initialization and no deactivation, just
/// incremental detection on the residual until the detector stays quiet.
pub fn nomp_cfar_forward<T: Scalar>(
    y: &ComplexTensor<T>,
    settings: &NompCfarSettings<T>,
) -> Result<DetectionReport<T>> {
    settings.validate()?;
    let dims = y.dims().to_vec();
    let floor = dust_floor(std::slice::from_ref(y));
    let snapshots = vec![y.clone()];
    let mut residuals = vec![y.clone()];
    let mut comps: Vec<PursuitComponent<T>> = Vec::new();
    let mut trace = Vec::new();
    let mut notes = Vec::new();
    let mut iterations = 0usize;
    let mut converged = true;

    loop {
        if iterations >= settings.max_iters || comps.len() >= y.len() {
            converged = false;
            notes.push("iteration bound reached".into());
            break;
        }
        iterations += 1;
        let sp = averaged_stat_power(&residuals, &settings.refine);
        let excl = exclusion_cells(&comps, &dims, usize::MAX);
        let rep = delta_on_stat(&sp, &dims, &settings.cfar, &excl)?;
        if rep.delta_db < T::zero() || rep.peak_power <= floor {
            trace.push(TraceEvent {
                action: TraceAction::Stop,
                index: 0,
                delta_db: rep.delta_db,
            });
            break;
        }
        let cand = coarse_detect_multi(&residuals, settings.refine.oversample);
        let (freq, amps) = refine_freq(&residuals, &cand.freq, &settings.refine);
        comps.push(PursuitComponent { amps, freq });
        merge_pursuit_duplicates(&mut comps);
        cyclic_rebuild_refit(&snapshots, &mut residuals, &mut comps, &settings.refine)?;
        trace.push(TraceEvent {
            action: TraceAction::Activate,
            index: comps.len() - 1,
            delta_db: rep.delta_db,
        });
    }

    let final_margins = margins_multi(&residuals, &comps, settings, floor)?;
    Ok(build_report(
        &dims,
        &comps,
        final_margins,
        iterations,
        trace,
        converged,
        false,
        notes,
    ))
}

// ─── Compressive variant (1-D) ──────────────────────────────────────────

struct CompressiveWorkspace<T> {
    phi: CompressionOperator<T>,
    y: Vec<Complex<T>>,
    n: usize,
    /// ρ(ω) = ‖Φa(ω)‖² on the N grid and the γN grid.
    rho_n: Vec<T>,
    rho_os: Vec<T>,
    /// diagonal sums g_d = Σ_i (ΦᴴΦ)_{i,i+d}, d = 0..N−1.
    gdiag: Vec<Complex<T>>,
    skipped_cells: usize,
}

impl<T: Scalar> CompressiveWorkspace<T> {
    fn new(y: Vec<Complex<T>>, phi: CompressionOperator<T>, gamma: usize) -> Self {
        let n = phi.cols();
        // g_d from summed row autocorrelations
        let zero = Complex::new(T::zero(), T::zero());
        let mut gdiag = vec![zero; n];
        for r in 0..phi.rows() {
            let row = &phi.data[r * n..(r + 1) * n];
            for d in 0..n {
                let mut acc = zero;
                for i in 0..(n - d) {
                    acc = acc + row[i].conj() * row[i + d];
                }
                gdiag[d] = gdiag[d] + acc;
            }
        }
        let rho_at = |omega: T, g: &[Complex<T>]| -> T {
            let mut acc = g[0].re;
            for (d, gd) in g.iter().enumerate().skip(1) {
                let ph = T::from_count(d) * omega;
                let e = Complex::new(ph.cos(), ph.sin());
                acc = acc + T::from_f64c(2.0) * (*gd * e).re;
            }
            acc
        };
        let rho_n: Vec<T> = (0..n)
            .map(|k| rho_at(T::two_pi() * T::from_count(k) / T::from_count(n), &gdiag))
            .collect();
        let rho_os: Vec<T> = (0..n * gamma)
            .map(|k| {
                rho_at(
                    T::two_pi() * T::from_count(k) / T::from_count(n * gamma),
                    &gdiag,
                )
            })
            .collect();
        CompressiveWorkspace {
            phi,
            y,
            n,
            rho_n,
            rho_os,
            gdiag,
            skipped_cells: 0,
        }
    }

    fn rho_floor(&self) -> T {
        let max = self
            .rho_os
            .iter()
            .fold(T::zero(), |a, &b| a.max(b));
        max * T::from_f64c(1e-12)
    }

    /// Generalized power spectrum `|ă(ω)ᴴ r|²` of an M-domain vector on a
    /// grid of `len` points; zero-norm atoms are skipped.
    fn gen_power(&mut self, r: &[Complex<T>], len: usize, rho: &[T]) -> Vec<T> {
        let b = self.phi.adjoint(r);
        let u = padded_fft(&b, len);
        let floor = self.rho_floor();
        u.iter()
            .zip(rho)
            .map(|(uv, &rv)| {
                if rv <= floor {
                    self.skipped_cells += 1;
                    T::zero()
                } else {
                    uv.norm_sqr() / rv
                }
            })
            .collect()
    }

    fn rho_value<T2>(&self, omega: T) -> T {
        let mut acc = self.gdiag[0].re;
        for (d, gd) in self.gdiag.iter().enumerate().skip(1) {
            let ph = T::from_count(d) * omega;
            let e = Complex::new(ph.cos(), ph.sin());
            acc = acc + T::from_f64c(2.0) * (*gd * e).re;
        }
        acc
    }

    /// u(ω), u′(ω), u″(ω) of b = Φᴴ r.
    fn u_derivs(b: &[Complex<T>], omega: T) -> (Complex<T>, Complex<T>, Complex<T>) {
        let zero = Complex::new(T::zero(), T::zero());
        let (mut u, mut s1, mut s2) = (zero, zero, zero);
        for (nn, bv) in b.iter().enumerate() {
            let nf = T::from_count(nn);
            let ph = -(nf * omega);
            let e = Complex::new(ph.cos(), ph.sin());
            let z = *bv * e;
            u = u + z;
            s1 = s1 + z * nf;
            s2 = s2 + z * (nf * nf);
        }
        // u' = −j s1, u'' = −s2
        let j = Complex::new(T::zero(), T::one());
        (u, -(j * s1), -s2)
    }

    fn rho_derivs(&self, omega: T) -> (T, T, T) {
        let zero = Complex::new(T::zero(), T::zero());
        let (mut r0, mut r1, mut r2) = (self.gdiag[0], zero, zero);
        for (d, gd) in self.gdiag.iter().enumerate().skip(1) {
            let df = T::from_count(d);
            let ph = df * omega;
            let e = Complex::new(ph.cos(), ph.sin());
            let z = *gd * e;
            r0 = r0 + z * T::from_f64c(2.0);
            r1 = r1 + z * (df * T::from_f64c(2.0));
            r2 = r2 + z * (df * df * T::from_f64c(2.0));
        }
        // ρ = Re r0, ρ' = −Im r1·... d/dω e^{jdω} = jd e^{jdω}: ρ' = Re(j·r1) = −Im(r1)
        (r0.re, -r1.im, -r2.re)
    }

    /// Normalized objective q(ω) = |u(ω)|²/ρ(ω) and the refined frequency
    /// after damped Newton ascent.
    fn refine(&self, r: &[Complex<T>], omega0: T, settings: &RefineSettings) -> (T, Complex<T>) {
        let b = self.phi.adjoint(r);
        let floor = self.rho_floor();
        let q_of = |w: T| -> T {
            let (u, _, _) = Self::u_derivs(&b, w);
            let (rho, _, _) = self.rho_derivs(w);
            if rho <= floor {
                T::zero()
            } else {
                u.norm_sqr() / rho
            }
        };
        let mut omega = omega0;
        let mut q_cur = q_of(omega);
        for _ in 0..settings.newton_steps_single.max(1) {
            let (u, up, upp) = Self::u_derivs(&b, omega);
            let (rho, rp, rpp) = self.rho_derivs(omega);
            if rho <= floor {
                break;
            }
            let a0 = u.norm_sqr();
            let a1 = T::from_f64c(2.0) * (u.conj() * up).re;
            let a2 = T::from_f64c(2.0) * (u.conj() * upp).re + T::from_f64c(2.0) * up.norm_sqr();
            let q1 = a1 / rho - a0 * rp / (rho * rho);
            let q2 = a2 / rho - T::from_f64c(2.0) * a1 * rp / (rho * rho)
                - a0 * rpp / (rho * rho)
                + T::from_f64c(2.0) * a0 * rp * rp / (rho * rho * rho);
            let mut moved = false;
            if q2 < T::zero() {
                let mut step = -q1 / q2;
                for _ in 0..20 {
                    let cand = omega + step;
                    let q_new = q_of(cand);
                    if q_new > q_cur {
                        omega = cand;
                        q_cur = q_new;
                        moved = true;
                        break;
                    }
                    step = step * T::from_f64c(0.5);
                }
            }
            if !moved {
                let dir = if q1 >= T::zero() { T::one() } else { -T::one() };
                let mut h = T::PI() / (T::from_f64c(2.0) * T::from_count(self.n));
                let mut improved = false;
                for _ in 0..24 {
                    let cand = omega + dir * h;
                    let q_new = q_of(cand);
                    if q_new > q_cur {
                        omega = cand;
                        q_cur = q_new;
                        improved = true;
                        break;
                    }
                    h = h * T::from_f64c(0.5);
                }
                if !improved {
                    break;
                }
            }
        }
        let omega = crate::tensor::wrap_angle(omega);
        let (u, _, _) = Self::u_derivs(&b, omega);
        let (rho, _, _) = self.rho_derivs(omega);
        let amp = if rho <= floor {
            Complex::new(T::zero(), T::zero())
        } else {
            u / rho.sqrt()
        };
        (omega, amp)
    }

    /// Compressed atom ă(ω) = Φa(ω)/‖Φa(ω)‖.
    fn gen_atom(&self, omega: T) -> Vec<Complex<T>> {
        let a = crate::tensor::steering_vector(self.n, omega).expect("n >= 1");
        let pa = self.phi.apply(&a);
        let norm = pa
            .iter()
            .map(|z| z.norm_sqr())
            .fold(T::zero(), |x, y| x + y)
            .sqrt();
        if norm <= T::zero() {
            return pa;
        }
        pa.into_iter().map(|z| z / norm).collect()
    }
}

fn padded_fft<T: Scalar>(x: &[Complex<T>], len: usize) -> Vec<Complex<T>> {
    let mut buf = vec![Complex::new(T::zero(), T::zero()); len];
    buf[..x.len().min(len)].copy_from_slice(&x[..x.len().min(len)]);
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    buf
}

/// Detection loop over 1-D compressive measurements through normalized
/// projected atoms. Estimation works in the compressed domain; reported
/// amplitudes are mapped back to their uncompressed equivalents.
pub fn nomp_cfar_compressive<T: Scalar>(
    y_c: &[Complex<T>],
    phi: &CompressionOperator<T>,
    settings: &NompCfarSettings<T>,
) -> Result<DetectionReport<T>> {
    settings.validate()?;
    if y_c.len() != phi.rows() {
        return Err(Error::invalid(
            "measurement length does not match operator rows",
        ));
    }
    let n = phi.cols();
    let dims = [n];
    let gamma = settings.refine.oversample;
    let mut ws = CompressiveWorkspace::new(y_c.to_vec(), phi.clone(), gamma);
    let stat_oversampled = settings.refine.stat_grid == StatGrid::Oversampled;
    let floor = y_c
        .iter()
        .map(|z| z.norm_sqr())
        .fold(T::zero(), |a, b| a + b)
        * (T::epsilon() * T::from_f64c(1e3)).powf(T::from_f64c(1.5));

    // component state: generalized amplitude and frequency
    let mut comps: Vec<(Complex<T>, T)> = Vec::new();
    let residual_vec = |ws: &CompressiveWorkspace<T>, comps: &[(Complex<T>, T)]| {
        let mut r = ws.y.clone();
        for &(x, w) in comps {
            let ga = ws.gen_atom(w);
            for (rv, av) in r.iter_mut().zip(&ga) {
                *rv = *rv - x * *av;
            }
        }
        r
    };

    let excl_of = |comps: &[(Complex<T>, T)], skip: usize| -> Vec<GridIndex> {
        comps
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != skip)
            .map(|(_, &(_, w))| FrequencyVector::new(vec![w]).nearest_cell(&dims))
            .collect()
    };

    // margin of one pseudo-measurement (residual + component back)
    let margin_of = |ws: &mut CompressiveWorkspace<T>,
                     r_pseudo: &[Complex<T>],
                     excl: &[GridIndex]|
     -> Result<DeltaReport<T>> {
        let n_power = {
            let rho = ws.rho_n.clone();
            ws.gen_power(r_pseudo, n, &rho)
        };
        let mut rep = if stat_oversampled {
            let rho = ws.rho_os.clone();
            let os_power = ws.gen_power(r_pseudo, n * gamma, &rho);
            let (peak_lin, peak_power) = peak_of_power_slice(&os_power);
            let cut = GridIndex::new(
                vec![((peak_lin as f64 / gamma as f64).round() as usize) % n],
                &dims,
            )
            .expect("in bounds");
            cfar::delta_at_cut(&n_power, &dims, cut, peak_power, &settings.cfar, excl)
        } else {
            cfar::delta_from_power(&n_power, &dims, &settings.cfar, excl)
        }?;
        if rep.peak_power <= floor {
            rep.delta_db = T::neg_infinity();
        }
        Ok(rep)
    };

    let ls_refit = |ws: &CompressiveWorkspace<T>, comps: &mut Vec<(Complex<T>, T)>| -> Result<()> {
        let k = comps.len();
        if k == 0 {
            return Ok(());
        }
        let atoms: Vec<Vec<Complex<T>>> = comps.iter().map(|&(_, w)| ws.gen_atom(w)).collect();
        let m = ws.phi.rows();
        let zero = Complex::new(T::zero(), T::zero());
        let mut g = vec![zero; k * k];
        for i in 0..k {
            for j in i..k {
                let mut acc = zero;
                for t in 0..m {
                    acc = acc + atoms[i][t].conj() * atoms[j][t];
                }
                g[i * k + j] = acc;
                g[j * k + i] = acc.conj();
            }
        }
        let mut rhs = vec![(0..k)
            .map(|i| {
                let mut acc = zero;
                for t in 0..m {
                    acc = acc + atoms[i][t].conj() * ws.y[t];
                }
                acc
            })
            .collect::<Vec<_>>()];
        crate::nomp::cholesky_solve_pub(&g, &mut rhs, k)?;
        for (i, c) in comps.iter_mut().enumerate() {
            c.0 = rhs[0][i];
        }
        Ok(())
    };

    // merge components the refinement collapsed onto one frequency
    let merge_close = |comps: &mut Vec<(Complex<T>, T)>, tol_bins: T| -> bool {
        let tol = tol_bins * T::two_pi() / T::from_count(n);
        let mut merged = false;
        let mut i = 0;
        while i < comps.len() {
            let mut j = i + 1;
            while j < comps.len() {
                if crate::tensor::wrap_dist(comps[i].1, comps[j].1) < tol {
                    let x = comps[j].0;
                    comps[i].0 = comps[i].0 + x;
                    comps.remove(j);
                    merged = true;
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
        merged
    };

    let cyclic = |ws: &mut CompressiveWorkspace<T>,
                  comps: &mut Vec<(Complex<T>, T)>|
     -> Result<()> {
        for _ in 0..settings.refine.cyclic_rounds {
            for k in 0..comps.len() {
                let mut r = residual_vec(ws, comps);
                let ga = ws.gen_atom(comps[k].1);
                for (rv, av) in r.iter_mut().zip(&ga) {
                    *rv = *rv + comps[k].0 * *av;
                }
                let (w_new, x_new) = ws.refine(&r, comps[k].1, &settings.refine);
                comps[k] = (x_new, w_new);
            }
        }
        merge_close(comps, T::from_f64c(1e-6));
        loop {
            match ls_refit(ws, comps) {
                Ok(()) => break,
                Err(Error::IllConditioned { .. }) if merge_close(comps, T::from_f64c(0.01)) => {
                    continue
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    };

    let coarse = |ws: &mut CompressiveWorkspace<T>, r: &[Complex<T>]| -> (T, T) {
        let rho = ws.rho_os.clone();
        let q = ws.gen_power(r, n * gamma, &rho);
        let (lin, power) = peak_of_power_slice(&q);
        (
            T::two_pi() * T::from_count(lin) / T::from_count(n * gamma),
            power,
        )
    };

    // initialization: fixed-count extraction
    for _ in 0..settings.k_max {
        let r = residual_vec(&ws, &comps);
        let (w0, _) = coarse(&mut ws, &r);
        let (w, x) = ws.refine(&r, w0, &settings.refine);
        comps.push((x, w));
        cyclic(&mut ws, &mut comps)?;
    }

    let mut trace = Vec::new();
    let mut notes = Vec::new();
    let mut iterations = 0usize;
    let mut converged = true;
    let mut saturated = false;
    let mut removed_prev_iter: Option<usize> = None;
    let mut activation_delta: HashMap<usize, T> = HashMap::new();

    loop {
        if iterations >= settings.max_iters {
            converged = false;
            notes.push("iteration bound reached".into());
            break;
        }
        iterations += 1;
        let removed_last = removed_prev_iter.take();

        if !comps.is_empty() {
            let r = residual_vec(&ws, &comps);
            let mut margins = Vec::with_capacity(comps.len());
            for k in 0..comps.len() {
                let ga = ws.gen_atom(comps[k].1);
                let mut rp = r.clone();
                for (rv, av) in rp.iter_mut().zip(&ga) {
                    *rv = *rv + comps[k].0 * *av;
                }
                let excl = excl_of(&comps, k);
                margins.push(margin_of(&mut ws, &rp, &excl)?);
            }
            let (k_min, d_min) = margins
                .iter()
                .enumerate()
                .map(|(k, m)| (k, m.delta_db))
                .fold((0usize, T::infinity()), |acc, (k, d)| {
                    if d < acc.1 {
                        (k, d)
                    } else {
                        acc
                    }
                });
            if d_min < T::zero() {
                trace.push(TraceEvent {
                    action: TraceAction::Deactivate,
                    index: k_min,
                    delta_db: d_min,
                });
                let cell = FrequencyVector::new(vec![comps[k_min].1])
                    .nearest_cell(&dims)
                    .linear(&dims);
                removed_prev_iter = Some(cell);
                comps.remove(k_min);
                cyclic(&mut ws, &mut comps)?;
                continue;
            }
        }

        let r = residual_vec(&ws, &comps);
        let excl = excl_of(&comps, usize::MAX);
        let rep = margin_of(&mut ws, &r, &excl)?;
        if rep.delta_db >= T::zero() {
            if comps.len() >= settings.k_max {
                saturated = true;
                trace.push(TraceEvent {
                    action: TraceAction::Stop,
                    index: 0,
                    delta_db: rep.delta_db,
                });
                break;
            }
            let (w0, _) = coarse(&mut ws, &r);
            let cell = FrequencyVector::new(vec![w0]).nearest_cell(&dims).linear(&dims);
            if removed_last == Some(cell) {
                if let Some(&prev) = activation_delta.get(&cell) {
                    if rep.delta_db <= prev {
                        notes.push("cycle guard: re-activation of just-removed cell with no improvement".into());
                        trace.push(TraceEvent {
                            action: TraceAction::Stop,
                            index: 0,
                            delta_db: rep.delta_db,
                        });
                        break;
                    }
                }
            }
            activation_delta.insert(cell, rep.delta_db);
            let (w, x) = ws.refine(&r, w0, &settings.refine);
            comps.push((x, w));
            trace.push(TraceEvent {
                action: TraceAction::Activate,
                index: comps.len() - 1,
                delta_db: rep.delta_db,
            });
            continue;
        }
        trace.push(TraceEvent {
            action: TraceAction::Stop,
            index: 0,
            delta_db: rep.delta_db,
        });
        break;
    }

    // final margins on the returned set
    let r = residual_vec(&ws, &comps);
    let mut final_margins = Vec::with_capacity(comps.len());
    for k in 0..comps.len() {
        let ga = ws.gen_atom(comps[k].1);
        let mut rp = r.clone();
        for (rv, av) in rp.iter_mut().zip(&ga) {
            *rv = *rv + comps[k].0 * *av;
        }
        let excl = excl_of(&comps, k);
        final_margins.push(margin_of(&mut ws, &rp, &excl)?);
    }
    if ws.skipped_cells > 0 {
        notes.push(format!(
            "{} grid cells skipped for vanishing projected atoms",
            ws.skipped_cells
        ));
    }

    // map generalized amplitudes back to uncompressed equivalents
    let mut set = CandidateSet::new(&dims);
    set.components = comps
        .iter()
        .map(|&(x, w)| {
            let rho = ws.rho_value::<T>(w);
            let amp = if rho > T::zero() {
                x / rho.sqrt()
            } else {
                Complex::new(T::zero(), T::zero())
            };
            SinusoidComponent::new(amp, FrequencyVector::new(vec![w]))
        })
        .collect();
    Ok(DetectionReport {
        components: set,
        margins: final_margins.iter().map(|m| m.delta_db).collect(),
        thresholds: final_margins.iter().map(|m| m.threshold).collect(),
        noise_floors: final_margins.iter().map(|m| m.noise_floor).collect(),
        iterations,
        trace: Some(trace),
        converged,
        saturated,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfar::FalseAlarmSpec;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn noise(dims: &[usize], sigma2: f64, rng: &mut ChaCha8Rng) -> ComplexTensor<f64> {
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
        ComplexTensor::from_data(dims, data).unwrap()
    }

    fn comp(w: f64, x: Complex64) -> SinusoidComponent<f64> {
        SinusoidComponent::new(x, FrequencyVector::new(vec![w]))
    }

    fn settings_for(n: usize, k_max: usize, p_fa: f64) -> NompCfarSettings<f64> {
        let alpha = cfar::alpha_from_pfa(&FalseAlarmSpec {
            p_fa,
            n_cells: n,
            n_ref: 50.min(n / 4).max(4),
            snapshots: 1,
        })
        .unwrap();
        let cfg = CfarConfig::ca(50.min(n / 4).max(4), 4.min(n / 16).max(1), alpha);
        NompCfarSettings::new(k_max, cfg)
    }

    #[test]
    fn residual_identities() {
        let n = 32usize;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = noise(&[n], 1.0, &mut rng);
        let empty = CandidateSet::new(&[n]);
        let r = residual(&y, &empty).unwrap();
        assert_abs_diff_eq!(r.energy(), y.energy(), epsilon = 1e-12);

        let truth = vec![
            comp(0.8, Complex64::new(1.0, -0.2)),
            comp(2.7, Complex64::new(0.4, 0.9)),
        ];
        let z = crate::tensor::synthesize(&[n], &truth).unwrap();
        let mut set = CandidateSet::new(&[n]);
        set.components = truth;
        let r2 = residual(&z, &set).unwrap();
        assert!(r2.energy() < 1e-24 * z.energy().max(1.0));
    }

    #[test]
    fn residual_matches_elementwise_oracle() {
        let n = 24usize;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = noise(&[n], 1.0, &mut rng);
        let mut set = CandidateSet::new(&[n]);
        set.components = vec![
            comp(1.1, Complex64::new(0.5, 0.5)),
            comp(4.0, Complex64::new(-1.0, 0.25)),
        ];
        let r = residual(&y, &set).unwrap();
        for i in 0..n {
            let mut expect = y.data()[i];
            for c in &set.components {
                let a = crate::tensor::atom(&[n], &c.freq).unwrap();
                expect -= c.amplitude * a[i];
            }
            assert!((r.data()[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn pseudo_measurement_identities() {
        let n = 32usize;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = noise(&[n], 1.0, &mut rng);
        let mut set = CandidateSet::new(&[n]);
        set.components = vec![comp(0.9, Complex64::new(1.0, 0.0))];
        // removing the only component returns the observation
        let p = pseudo_measurement(&y, &set, 0).unwrap();
        for (a, b) in p.data().iter().zip(y.data()) {
            assert!((a - b).norm() < 1e-12);
        }
        // equals the residual of the set without component k
        set.components.push(comp(2.2, Complex64::new(0.0, 0.7)));
        set.components.push(comp(4.4, Complex64::new(-0.3, 0.1)));
        for k in 0..3 {
            let p = pseudo_measurement(&y, &set, k).unwrap();
            let mut reduced = CandidateSet::new(&[n]);
            reduced.components = set
                .components
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, c)| c.clone())
                .collect();
            let r = residual(&y, &reduced).unwrap();
            for (a, b) in p.data().iter().zip(r.data()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
        assert!(pseudo_measurement(&y, &set, 3).is_err());
    }

    #[test]
    fn margins_strong_component_clears_threshold() {
        let n = 128usize;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let snr = 10f64.powf(3.0);
        let w = 2.0 * std::f64::consts::PI * 37.0 / n as f64;
        let x = Complex64::from_polar((snr / n as f64).sqrt(), 1.0);
        let sig = crate::tensor::synthesize(&[n], &[comp(w, x)]).unwrap();
        let y = ComplexTensor::from_data(
            &[n],
            sig.data()
                .iter()
                .zip(noise(&[n], 1.0, &mut rng).data())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap();
        let mut set = CandidateSet::new(&[n]);
        set.components = vec![comp(w, x)];
        let settings = settings_for(n, 4, 1e-2);
        let margins = component_margins(&y, &set, &settings).unwrap();
        assert_eq!(margins.len(), 1);
        assert!(margins[0].delta_db > 0.0, "margin {}", margins[0].delta_db);
    }

    #[test]
    fn margins_interference_cancellation() {
        // each component's margin within 0.5 dB of the margin it would have
        // alone in the scene
        let n = 256usize;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let snr = 10f64.powf(2.2);
        let w1 = 2.0 * std::f64::consts::PI * 50.3 / n as f64;
        let w2 = 2.0 * std::f64::consts::PI * 120.8 / n as f64;
        let x1 = Complex64::from_polar((snr / n as f64).sqrt(), 0.4);
        let x2 = Complex64::from_polar((snr / n as f64).sqrt(), 2.9);
        let noise_t = noise(&[n], 1.0, &mut rng);
        let both = crate::tensor::synthesize(&[n], &[comp(w1, x1), comp(w2, x2)]).unwrap();
        let y_both = ComplexTensor::from_data(
            &[n],
            both.data()
                .iter()
                .zip(noise_t.data())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap();
        let settings = settings_for(n, 4, 1e-2);
        let mut set = CandidateSet::new(&[n]);
        set.components = vec![comp(w1, x1), comp(w2, x2)];
        let margins = component_margins(&y_both, &set, &settings).unwrap();

        for (k, (w, x)) in [(w1, x1), (w2, x2)].iter().enumerate() {
            let solo = crate::tensor::synthesize(&[n], &[comp(*w, *x)]).unwrap();
            let y_solo = ComplexTensor::from_data(
                &[n],
                solo.data()
                    .iter()
                    .zip(noise_t.data())
                    .map(|(a, b)| a + b)
                    .collect(),
            )
            .unwrap();
            let mut solo_set = CandidateSet::new(&[n]);
            solo_set.components = vec![comp(*w, *x)];
            let solo_margin = component_margins(&y_solo, &solo_set, &settings).unwrap();
            assert!(
                (margins[k].delta_db - solo_margin[0].delta_db).abs() < 0.5,
                "component {k}: {} vs solo {}",
                margins[k].delta_db,
                solo_margin[0].delta_db
            );
        }
    }

    #[test]
    fn noiseless_scene_is_recovered_exactly() {
        let n = 128usize;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let truth = vec![
            comp(17.0 * step, Complex64::new(1.0, 0.3)),
            comp(55.5 * step, Complex64::new(-0.6, 0.8)),
            comp(99.25 * step, Complex64::new(0.2, -1.1)),
        ];
        let y = crate::tensor::synthesize(&[n], &truth).unwrap();
        let settings = settings_for(n, 6, 1e-2);
        let report = nomp_cfar(&y, &settings).unwrap();
        assert_eq!(report.components.len(), 3, "notes: {:?}", report.notes);
        assert!(report.converged);
        for t in &truth {
            let best = report
                .components
                .components
                .iter()
                .map(|e| crate::tensor::wrap_dist(t.freq.angles()[0], e.freq.angles()[0]))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "frequency error {best}");
        }
        for &m in &report.margins {
            assert!(m >= 0.0);
        }
    }

    #[test]
    fn final_margins_match_recomputation() {
        let n = 128usize;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let snr = 10f64.powf(2.5);
        let truth = vec![
            comp(20.4 * step, Complex64::from_polar((snr / n as f64).sqrt(), 0.0)),
            comp(70.9 * step, Complex64::from_polar((snr / n as f64).sqrt(), 1.0)),
        ];
        let sig = crate::tensor::synthesize(&[n], &truth).unwrap();
        let y = ComplexTensor::from_data(
            &[n],
            sig.data()
                .iter()
                .zip(noise(&[n], 1.0, &mut rng).data())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap();
        let settings = settings_for(n, 4, 1e-2);
        let report = nomp_cfar(&y, &settings).unwrap();
        let again = component_margins(&y, &report.components, &settings).unwrap();
        assert_eq!(again.len(), report.margins.len());
        for (a, b) in report.margins.iter().zip(&again) {
            assert_abs_diff_eq!(*a, b.delta_db, epsilon = 1e-9);
        }
        for &m in &report.margins {
            assert!(m >= 0.0, "exit margin {m} negative");
        }
    }

    #[test]
    fn scale_equivariance() {
        let n = 64usize;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let snr = 10f64.powf(2.0);
        let truth = vec![comp(
            21.3 * step,
            Complex64::from_polar((snr / n as f64).sqrt(), 0.7),
        )];
        let sig = crate::tensor::synthesize(&[n], &truth).unwrap();
        let y = ComplexTensor::from_data(
            &[n],
            sig.data()
                .iter()
                .zip(noise(&[n], 1.0, &mut rng).data())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap();
        let settings = settings_for(n, 3, 1e-2);
        let r1 = nomp_cfar(&y, &settings).unwrap();
        let c = Complex64::new(2.5, -1.25);
        let r2 = nomp_cfar(&y.scale(c), &settings).unwrap();
        assert_eq!(r1.components.len(), r2.components.len());
        for (a, b) in r1
            .components
            .components
            .iter()
            .zip(&r2.components.components)
        {
            assert!(
                crate::tensor::wrap_dist(a.freq.angles()[0], b.freq.angles()[0]) < 1e-9
            );
            assert!((b.amplitude - a.amplitude * c).norm() < 1e-6 * a.amplitude.norm() * c.norm());
        }
    }

    #[test]
    fn mmv_single_snapshot_reduces_to_smv() {
        let n = 64usize;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let snr = 10f64.powf(1.8);
        let sig = crate::tensor::synthesize(
            &[n],
            &[
                comp(10.2 * step, Complex64::from_polar((snr / n as f64).sqrt(), 0.3)),
                comp(40.7 * step, Complex64::from_polar((snr / n as f64).sqrt(), 2.0)),
            ],
        )
        .unwrap();
        let y = ComplexTensor::from_data(
            &[n],
            sig.data()
                .iter()
                .zip(noise(&[n], 1.0, &mut rng).data())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap();
        let settings = settings_for(n, 5, 1e-2);
        let a = nomp_cfar(&y, &settings).unwrap();
        let b = nomp_cfar_mmv(std::slice::from_ref(&y), &settings).unwrap();
        assert_eq!(a.components.len(), b.components.len());
        for (x, z) in a.components.components.iter().zip(&b.components.components) {
            assert!((x.amplitude - z.amplitude).norm() < 1e-8);
            assert!(
                crate::tensor::wrap_dist(x.freq.angles()[0], z.freq.angles()[0]) < 1e-8
            );
        }
    }

    #[test]
    fn mmv_rejects_empty_and_mismatched() {
        let settings = settings_for(32, 2, 1e-2);
        let empty: Vec<ComplexTensor<f64>> = vec![];
        assert!(nomp_cfar_mmv(&empty, &settings).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = noise(&[32], 1.0, &mut rng);
        let b = noise(&[16], 1.0, &mut rng);
        assert!(nomp_cfar_mmv(&[a, b], &settings).is_err());
    }

    #[test]
    fn forward_detects_clean_pair() {
        let n = 128usize;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let truth = vec![
            comp(30.0 * step, Complex64::new(1.0, 0.0)),
            comp(80.5 * step, Complex64::new(0.0, 1.0)),
        ];
        let y = crate::tensor::synthesize(&[n], &truth).unwrap();
        let settings = settings_for(n, 8, 1e-2);
        let report = nomp_cfar_forward(&y, &settings).unwrap();
        assert!(report.components.len() >= 2);
        for t in &truth {
            let best = report
                .components
                .components
                .iter()
                .map(|e| crate::tensor::wrap_dist(t.freq.angles()[0], e.freq.angles()[0]))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6);
        }
        // forward-only never revisits decisions, so numerical leakage may
        // linger as components; anything beyond the pair must be dust
        for c in report.components.components.iter() {
            let d1 = crate::tensor::wrap_dist(c.freq.angles()[0], truth[0].freq.angles()[0]);
            let d2 = crate::tensor::wrap_dist(c.freq.angles()[0], truth[1].freq.angles()[0]);
            if d1 > 1e-6 && d2 > 1e-6 {
                assert!(c.amplitude.norm() < 1e-6, "spurious {}", c.amplitude.norm());
            }
        }
    }

    #[test]
    fn compressive_identity_matches_plain() {
        let n = 64usize;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let snr = 10f64.powf(2.2);
        let truth = vec![
            comp(12.4 * step, Complex64::from_polar((snr / n as f64).sqrt(), 0.5)),
            comp(44.8 * step, Complex64::from_polar((snr / n as f64).sqrt(), 1.7)),
        ];
        let sig = crate::tensor::synthesize(&[n], &truth).unwrap();
        let y = ComplexTensor::from_data(
            &[n],
            sig.data()
                .iter()
                .zip(noise(&[n], 1.0, &mut rng).data())
                .map(|(a, b)| a + b)
                .collect(),
        )
        .unwrap();
        let settings = settings_for(n, 5, 1e-2);
        let plain = nomp_cfar(&y, &settings).unwrap();
        let phi = CompressionOperator::identity(n);
        let compressed = nomp_cfar_compressive(y.data(), &phi, &settings).unwrap();
        assert_eq!(plain.components.len(), compressed.components.len());
        let mut a: Vec<f64> = plain
            .components
            .components
            .iter()
            .map(|c| c.freq.angles()[0])
            .collect();
        let mut b: Vec<f64> = compressed
            .components
            .components
            .iter()
            .map(|c| c.freq.angles()[0])
            .collect();
        a.sort_by(|p, q| p.partial_cmp(q).unwrap());
        b.sort_by(|p, q| p.partial_cmp(q).unwrap());
        for (x, z) in a.iter().zip(&b) {
            assert!(crate::tensor::wrap_dist(*x, *z) < 1e-7, "{x} vs {z}");
        }
    }

    #[test]
    fn compressive_generalized_spectrum_matches_direct_evaluation() {
        let n = 32usize;
        let m = 16usize;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let entries: Vec<Complex64> = (0..m * n)
            .map(|_| {
                Complex64::new(
                    if rng.gen::<bool>() { s } else { -s },
                    if rng.gen::<bool>() { s } else { -s },
                )
            })
            .collect();
        let phi = CompressionOperator::new(m, n, entries).unwrap();
        let y: Vec<Complex64> = (0..m)
            .map(|_| {
                Complex64::new(
                    rng.sample(rand_distr::StandardNormal),
                    rng.sample(rand_distr::StandardNormal),
                )
            })
            .collect();
        let mut ws = CompressiveWorkspace::new(y.clone(), phi.clone(), 4);
        let rho = ws.rho_n.clone();
        let q = ws.gen_power(&y, n, &rho);
        for k in 0..n {
            let w = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let ga = ws.gen_atom(w);
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in ga.iter().zip(&y) {
                acc += a.conj() * b;
            }
            assert_abs_diff_eq!(q[k], acc.norm_sqr(), epsilon = 1e-9);
        }
    }

    #[test]
    fn compressive_recovers_half_rate_scene() {
        let n = 64usize;
        let m = 32usize;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let entries: Vec<Complex64> = (0..m * n)
            .map(|_| {
                Complex64::new(
                    if rng.gen::<bool>() { s } else { -s },
                    if rng.gen::<bool>() { s } else { -s },
                )
            })
            .collect();
        let phi = CompressionOperator::new(m, n, entries).unwrap();
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let snr = 10f64.powf(2.2);
        let truth = vec![
            comp(9.3 * step, Complex64::from_polar((snr / n as f64).sqrt(), 0.2)),
            comp(41.6 * step, Complex64::from_polar((snr / n as f64).sqrt(), 1.2)),
        ];
        let z = crate::tensor::synthesize(&[n], &truth).unwrap();
        let yc: Vec<Complex64> = phi
            .apply(z.data())
            .into_iter()
            .map(|v| {
                v + Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal) * s,
                    rng.sample::<f64, _>(rand_distr::StandardNormal) * s,
                )
            })
            .collect();
        let settings = settings_for(n, 4, 1e-2);
        let report = nomp_cfar_compressive(&yc, &phi, &settings).unwrap();
        assert!(!report.components.is_empty());
        for t in &truth {
            let best = report
                .components
                .components
                .iter()
                .map(|e| crate::tensor::wrap_dist(t.freq.angles()[0], e.freq.angles()[0]))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 0.5 * step, "frequency error {best}");
        }
    }

    #[test]
    fn compression_operator_validation() {
        assert!(CompressionOperator::<f64>::new(4, 2, vec![]).is_err());
        assert!(CompressionOperator::<f64>::new(
            1,
            2,
            vec![Complex64::new(f64::NAN, 0.0), Complex64::new(0.0, 0.0)]
        )
        .is_err());
    }
}
