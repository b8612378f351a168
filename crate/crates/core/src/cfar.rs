//! Adaptive-threshold (CFAR) detector mathematics.
//!
//! Reference/guard cell geometry with exclusion sets, noise-floor
//! estimation, the soft detection margin Δ, and the analytic link between
//! the threshold multiplier α and the average false alarm probability for
//! cell-averaging (single- and multi-snapshot) and order-statistic
//! detectors. Factorials and binomials run in log space throughout; the
//! semi-infinite false-alarm integrals are truncated where the gamma weight
//! tail drops below 1e−12 and evaluated by adaptive Gauss–Kronrod panels.

use crate::error::{Error, Result};
use crate::quad;
use crate::scalar::Scalar;
use crate::special;
use crate::tensor::{dft_spectrum, peak_of_power_slice, ComplexTensor, GridIndex};

/// Noise-level estimator used by the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfarVariant {
    /// Cell averaging: noise level is the mean reference power.
    CellAveraging,
    /// Order statistic: noise level is the r-th smallest reference power.
    OrderStatistic,
}

/// Detector geometry and threshold multiplier.
#[derive(Debug, Clone)]
pub struct CfarConfig<T> {
    /// Detector variant.
    pub variant: CfarVariant,
    /// Total number of reference cells N_r.
    pub n_ref: usize,
    /// Guard cells per side per dimension.
    pub n_guard: usize,
    /// Rank r of the order statistic (1-based, only used by the OS variant).
    pub os_rank: usize,
    /// Threshold multiplier α.
    pub alpha: T,
    /// Cells within this circular Chebyshev radius of an excluded index are
    /// not eligible as reference cells.
    pub exclusion_radius: usize,
}

impl<T: Scalar> CfarConfig<T> {
    /// Cell-averaging detector; the exclusion radius defaults to the guard
    /// width.
    pub fn ca(n_ref: usize, n_guard: usize, alpha: T) -> Self {
        CfarConfig {
            variant: CfarVariant::CellAveraging,
            n_ref,
            n_guard,
            os_rank: (3 * n_ref).div_euclid(4).max(1),
            alpha,
            exclusion_radius: n_guard,
        }
    }

    /// Order-statistic detector; the exclusion radius defaults to the guard
    /// width.
    pub fn os(n_ref: usize, n_guard: usize, os_rank: usize, alpha: T) -> Self {
        CfarConfig {
            variant: CfarVariant::OrderStatistic,
            n_ref,
            n_guard,
            os_rank,
            alpha,
            exclusion_radius: n_guard,
        }
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.n_ref == 0 {
            return Err(Error::invalid("n_ref must be at least 1"));
        }
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(Error::invalid("alpha must be positive and finite"));
        }
        if self.variant == CfarVariant::OrderStatistic
            && !(1 <= self.os_rank && self.os_rank <= self.n_ref)
        {
            return Err(Error::invalid(format!(
                "os_rank {} outside 1..={}",
                self.os_rank, self.n_ref
            )));
        }
        Ok(())
    }
}

/// Soft detection outcome around one cell under test.
#[derive(Debug, Clone)]
pub struct DeltaReport<T> {
    /// Margin Δ = 10·log10(peak_power / threshold) in dB; nonnegative iff
    /// the detector fires.
    pub delta_db: T,
    /// Location of the tested peak.
    pub peak: GridIndex,
    /// Power of the tested peak.
    pub peak_power: T,
    /// Noise level estimate (mean or order statistic of reference powers).
    pub noise_floor: T,
    /// Threshold α · noise_floor.
    pub threshold: T,
    /// Number of reference cells actually collected (may fall below the
    /// configured N_r when exclusions deplete the window).
    pub n_ref_used: usize,
    /// Set when the noise floor was exactly zero (Δ forced to +∞).
    pub zero_floor: bool,
}

/// Inputs for solving the threshold multiplier from a false alarm target.
#[derive(Debug, Clone)]
pub struct FalseAlarmSpec<T> {
    /// Nominal average false alarm probability, in (0, 1).
    pub p_fa: T,
    /// Number of cells examined by the peak search, N.
    pub n_cells: usize,
    /// Number of reference cells, N_r.
    pub n_ref: usize,
    /// Number of snapshots S (1 for single-measurement operation).
    pub snapshots: usize,
}

// ─── Reference window geometry ──────────────────────────────────────────

fn circ_dist_1d(a: usize, b: usize, n: usize) -> usize {
    let d = if a >= b { a - b } else { b - a };
    d.min(n - d)
}

fn circ_cheb(a: &[usize], b: &[usize], dims: &[usize]) -> usize {
    a.iter()
        .zip(b)
        .zip(dims)
        .map(|((&x, &y), &n)| circ_dist_1d(x, y, n))
        .max()
        .unwrap_or(0)
}

/// Collects up to `n_ref` reference cells around the cell under test.
///
/// The window grows outward ring by ring (circular Chebyshev rings, with
/// wrap-around in every dimension), skipping the CUT, the guard band of
/// `n_guard` cells per side, and any cell within `exclusion_radius` of an
/// excluded index. Within a ring, offsets are enumerated from positive to
/// negative so the collected set is deterministic when the budget fills
/// mid-ring. When exclusions deplete the grid, fewer than `n_ref` cells are
/// returned; an empty result is an error.
pub fn reference_cells<T: Scalar>(
    cut: &GridIndex,
    grid_dims: &[usize],
    config: &CfarConfig<T>,
    excluded: &[GridIndex],
) -> Result<Vec<GridIndex>> {
    config.validate()?;
    let n_total: usize = grid_dims.iter().product();
    let ndim = grid_dims.len();
    if cut.coords().len() != ndim {
        return Err(Error::invalid("CUT rank does not match grid rank"));
    }
    let mut visited = vec![false; n_total];
    visited[cut.linear(grid_dims)] = true;
    let mut cells = Vec::with_capacity(config.n_ref);

    let rho_max = grid_dims.iter().map(|&n| n / 2).max().unwrap_or(0);
    let mut offset = vec![0isize; ndim];
    for rho in (config.n_guard + 1)..=rho_max.max(config.n_guard) {
        ring_scan(
            grid_dims,
            cut.coords(),
            rho as isize,
            0,
            &mut offset,
            &mut |cell: &[usize]| {
                let lin = {
                    let mut l = 0usize;
                    for d in (0..ndim).rev() {
                        l = l * grid_dims[d] + cell[d];
                    }
                    l
                };
                if visited[lin] {
                    return true;
                }
                visited[lin] = true;
                if circ_cheb(cell, cut.coords(), grid_dims) <= config.n_guard {
                    return true;
                }
                for ex in excluded {
                    if circ_cheb(cell, ex.coords(), grid_dims) <= config.exclusion_radius {
                        return true;
                    }
                }
                cells.push(GridIndex::new(cell.to_vec(), grid_dims).expect("in bounds"));
                cells.len() < config.n_ref
            },
        );
        if cells.len() >= config.n_ref {
            break;
        }
    }
    if cells.is_empty() {
        return Err(Error::DegenerateWindow(format!(
            "no eligible reference cell around {:?}",
            cut.coords()
        )));
    }
    Ok(cells)
}

/// Enumerates the Chebyshev ring of radius `rho` around `cut` in descending
/// offset order per dimension, calling `visit` with wrapped coordinates.
/// `visit` returns false to stop early.
fn ring_scan(
    dims: &[usize],
    cut: &[usize],
    rho: isize,
    depth: usize,
    offset: &mut Vec<isize>,
    visit: &mut impl FnMut(&[usize]) -> bool,
) -> bool {
    if depth == dims.len() {
        if offset.iter().map(|o| o.abs()).max().unwrap_or(0) != rho {
            return true;
        }
        let cell: Vec<usize> = offset
            .iter()
            .zip(cut)
            .zip(dims)
            .map(|((&o, &c), &n)| (c as isize + o).rem_euclid(n as isize) as usize)
            .collect();
        return visit(&cell);
    }
    let mut o = rho;
    while o >= -rho {
        offset[depth] = o;
        if !ring_scan(dims, cut, rho, depth + 1, offset, visit) {
            return false;
        }
        o -= 1;
    }
    true
}

/// Reference powers around the CUT, in collection order.
fn window_powers<T: Scalar>(
    power: &[T],
    dims: &[usize],
    cut: &GridIndex,
    config: &CfarConfig<T>,
    excluded: &[GridIndex],
) -> Result<Vec<T>> {
    let cells = reference_cells(cut, dims, config, excluded)?;
    Ok(cells.iter().map(|c| power[c.linear(dims)]).collect())
}

/// Mean reference power around the CUT (the cell-averaging noise estimate).
pub fn noise_floor<T: Scalar>(
    spectrum: &ComplexTensor<T>,
    cut: &GridIndex,
    config: &CfarConfig<T>,
    excluded: &[GridIndex],
) -> Result<T> {
    let power = spectrum.power();
    let w = window_powers(&power, spectrum.dims(), cut, config, excluded)?;
    let m = T::from_count(w.len());
    Ok(w.iter().copied().fold(T::zero(), |a, b| a + b) / m)
}

/// Threshold of the order-statistic detector: α_OS times the r-th smallest
/// window value (1-based rank).
pub fn os_threshold<T: Scalar>(window: &[T], os_rank: usize, alpha_os: T) -> Result<T> {
    if window.is_empty() {
        return Err(Error::DegenerateWindow(
            "empty order-statistic window".into(),
        ));
    }
    if os_rank == 0 || os_rank > window.len() {
        return Err(Error::invalid(format!(
            "order-statistic rank {} outside 1..={}",
            os_rank,
            window.len()
        )));
    }
    let mut w = window.to_vec();
    let (_, v, _) = w.select_nth_unstable_by(os_rank - 1, |a, b| a.partial_cmp(b).unwrap());
    Ok(alpha_os * *v)
}

/// Soft detection on a raw power map: finds the peak, estimates the noise
/// level from reference cells around it, and returns the margin report.
/// This is the common kernel behind the single-snapshot detector, the
/// snapshot-averaged detector and the compressive generalized spectrum.
pub fn delta_from_power<T: Scalar>(
    power: &[T],
    dims: &[usize],
    config: &CfarConfig<T>,
    excluded: &[GridIndex],
) -> Result<DeltaReport<T>> {
    let (peak_lin, peak_power) = peak_of_power_slice(power);
    let peak = GridIndex::from_linear(peak_lin, dims);
    delta_at_cut(power, dims, peak, peak_power, config, excluded)
}

/// Same as [`delta_from_power`] but with the cell under test pinned by the
/// caller (the peak search may have run on a finer grid).
pub fn delta_at_cut<T: Scalar>(
    power: &[T],
    dims: &[usize],
    cut: GridIndex,
    peak_power: T,
    config: &CfarConfig<T>,
    excluded: &[GridIndex],
) -> Result<DeltaReport<T>> {
    let w = window_powers(power, dims, &cut, config, excluded)?;
    let n_ref_used = w.len();
    let noise = match config.variant {
        CfarVariant::CellAveraging => {
            w.iter().copied().fold(T::zero(), |a, b| a + b) / T::from_count(n_ref_used)
        }
        CfarVariant::OrderStatistic => {
            let rank = config.os_rank.min(n_ref_used);
            os_threshold(&w, rank, T::one())?
        }
    };
    let threshold = config.alpha * noise;
    let ten = T::from_f64c(10.0);
    let (delta_db, zero_floor) = if noise == T::zero() {
        (T::infinity(), true)
    } else {
        ((peak_power / threshold).log10() * ten, false)
    };
    Ok(DeltaReport {
        delta_db,
        peak: cut,
        peak_power,
        noise_floor: noise,
        threshold,
        n_ref_used,
        zero_floor,
    })
}

/// The soft detector on a time-domain observation: transforms to the
/// normalized spectrum, finds the spectral peak, estimates the noise floor
/// from reference cells around it and returns Δ = 10·log10(peak/(α·σ̂²)).
pub fn cfar_delta<T: Scalar>(
    y: &ComplexTensor<T>,
    config: &CfarConfig<T>,
    excluded: &[GridIndex],
) -> Result<DeltaReport<T>> {
    config.validate()?;
    let spectrum = dft_spectrum(y);
    delta_from_power(&spectrum.power(), spectrum.dims(), config, excluded)
}

// ─── False-alarm curves and threshold solvers ───────────────────────────

fn quad_tol<T: Scalar>() -> T {
    T::from_f64c(1e-10).max(T::epsilon() * T::from_f64c(64.0))
}

fn tail_tol<T: Scalar>() -> T {
    T::from_f64c(1e-12).max(T::epsilon() * T::from_f64c(8.0))
}

/// Average false alarm probability of the cell-averaging detector whose
/// peak search spans `n_cells` bins and whose noise estimate averages
/// `n_ref` reference cells, at threshold multiplier `alpha`:
/// `1 − 1/Γ(N_r) ∫ (1 − e^{−αx/N_r})^N x^{N_r−1} e^{−x} dx`.
pub fn pfa_from_alpha<T: Scalar>(alpha: T, n_cells: usize, n_ref: usize) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::invalid("alpha must be positive"));
    }
    if n_cells == 0 || n_ref == 0 {
        return Err(Error::invalid("cell counts must be positive"));
    }
    let shape = T::from_count(n_ref);
    let n = T::from_count(n_cells);
    let ln_norm = special::ln_gamma(shape);
    let rate = alpha / shape;
    let cut = quad::gamma_tail_cutoff(shape, tail_tol::<T>());
    let integral = quad::integrate(
        |x: T| {
            if x <= T::zero() {
                return T::zero();
            }
            let ln_gamma_w = (shape - T::one()) * x.ln() - x - ln_norm;
            let u = rate * x;
            let ln_cdf = n * (-((-u).exp_m1())).ln();
            (ln_gamma_w + ln_cdf).exp()
        },
        T::zero(),
        cut,
        quad_tol::<T>(),
    )?;
    Ok((T::one() - integral).max(T::zero()).min(T::one()))
}

/// Alternating binomial series form of [`pfa_from_alpha`]:
/// `1 − Σ (−1)^n C(N,n) (nα/N_r + 1)^{−N_r}`, evaluated with compensated
/// summation. Guarded to `n_cells ≤ 64`, beyond which the terms span too
/// many orders of magnitude to cancel reliably.
pub fn pfa_from_alpha_series<T: Scalar>(alpha: T, n_cells: usize, n_ref: usize) -> Result<T> {
    if !(alpha > T::zero()) {
        return Err(Error::invalid("alpha must be positive"));
    }
    if n_cells > 64 {
        return Err(Error::Domain(format!(
            "series form unstable for n_cells = {n_cells} > 64"
        )));
    }
    let shape = T::from_count(n_ref);
    // Neumaier compensated summation
    let mut sum = T::zero();
    let mut comp = T::zero();
    for n in 0..=n_cells {
        let ln_mag = special::ln_binomial::<T>(n_cells, n)
            - shape * (T::from_count(n) * alpha / shape).ln_1p();
        let mut term = ln_mag.exp();
        if n % 2 == 1 {
            term = -term;
        }
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp = comp + ((sum - t) + term);
        } else {
            comp = comp + ((term - t) + sum);
        }
        sum = t;
    }
    let total = sum + comp;
    Ok((T::one() - total).max(T::zero()).min(T::one()))
}

/// Small-P̄_FA approximation `N (α/N_r + 1)^{−N_r}`.
pub fn pfa_approx<T: Scalar>(alpha: T, n_cells: usize, n_ref: usize) -> T {
    let shape = T::from_count(n_ref);
    let n = T::from_count(n_cells);
    (n.ln() - shape * (alpha / shape).ln_1p()).exp()
}

/// Closed-form inverse of [`pfa_approx`]: `N_r ((N/p)^{1/N_r} − 1)`.
pub fn alpha_from_pfa_approx<T: Scalar>(p_fa: T, n_cells: usize, n_ref: usize) -> T {
    let shape = T::from_count(n_ref);
    let n = T::from_count(n_cells);
    shape * ((n / p_fa).ln() / shape).exp_m1()
}

/// Threshold multiplier of the noise-variance-aware detector:
/// `−ln(1 − (1 − p)^{1/N})`.
pub fn alpha_nomp<T: Scalar>(p_fa: T, n_cells: usize) -> Result<T> {
    if !(p_fa > T::zero() && p_fa < T::one()) {
        return Err(Error::invalid("p_fa must be in (0, 1)"));
    }
    if n_cells == 0 {
        return Err(Error::invalid("n_cells must be positive"));
    }
    let n = T::from_count(n_cells);
    Ok(-(-(((-p_fa).ln_1p() / n).exp_m1())).ln())
}

/// Average false alarm probability of the snapshot-averaged detector
/// (S snapshots, chi-square statistics with 2S and 2SN_r degrees of
/// freedom). Reduces to [`pfa_from_alpha`] at S = 1.
pub fn pfa_from_alpha_mmv<T: Scalar>(
    alpha: T,
    n_cells: usize,
    n_ref: usize,
    snapshots: usize,
) -> Result<T> {
    if snapshots == 0 {
        return Err(Error::invalid("snapshot count must be at least 1"));
    }
    if !(alpha > T::zero()) {
        return Err(Error::invalid("alpha must be positive"));
    }
    if n_cells == 0 || n_ref == 0 {
        return Err(Error::invalid("cell counts must be positive"));
    }
    let shape = T::from_count(snapshots * n_ref);
    let s_cdf = T::from_count(snapshots);
    let nr = T::from_count(n_ref);
    let n = T::from_count(n_cells);
    let ln_norm = special::ln_gamma(shape);
    let cut = quad::gamma_tail_cutoff(shape, tail_tol::<T>());
    let integral = quad::integrate(
        |u: T| {
            if u <= T::zero() {
                return T::zero();
            }
            let cdf = special::gamma_p(s_cdf, alpha * u / nr);
            if cdf <= T::zero() {
                return T::zero();
            }
            let ln_w = (shape - T::one()) * u.ln() - u - ln_norm;
            (ln_w + n * cdf.ln()).exp()
        },
        T::zero(),
        cut,
        quad_tol::<T>(),
    )?;
    Ok((T::one() - integral).max(T::zero()).min(T::one()))
}

/// Average false alarm probability of the order-statistic detector: the
/// peak-over-N-cells exceedance averaged over the density of the r-th order
/// statistic of N_r exponential reference powers.
pub fn pfa_from_alpha_os<T: Scalar>(
    alpha_os: T,
    n_cells: usize,
    n_ref: usize,
    os_rank: usize,
) -> Result<T> {
    if !(alpha_os > T::zero()) {
        return Err(Error::invalid("alpha must be positive"));
    }
    if os_rank == 0 || os_rank > n_ref {
        return Err(Error::invalid(format!(
            "order-statistic rank {os_rank} outside 1..={n_ref}"
        )));
    }
    let n = T::from_count(n_cells);
    let r = T::from_count(os_rank);
    let decay = T::from_count(n_ref - os_rank + 1);
    let ln_pref = r.ln() + special::ln_binomial::<T>(n_ref, os_rank);
    // truncate where the envelope r·C(N_r,r)·e^{−decay·v} has tail < 1e−14
    let cut = ((ln_pref - decay.ln() + T::from_f64c(33.0)) / decay).max(T::one());
    let integral = quad::integrate(
        |v: T| {
            if v <= T::zero() {
                return T::zero();
            }
            let mut ln_f =
                ln_pref + n * (-((-alpha_os * v).exp_m1())).ln() - decay * v;
            if os_rank > 1 {
                ln_f = ln_f + (r - T::one()) * (-((-v).exp_m1())).ln();
            }
            ln_f.exp()
        },
        T::zero(),
        cut,
        quad_tol::<T>(),
    )?;
    Ok((T::one() - integral).max(T::zero()).min(T::one()))
}

/// Solves the threshold multiplier for a target false alarm probability by
/// bisection of the strictly decreasing analytic curve (the snapshot count
/// selects between the single- and multi-snapshot curves). The returned α̂
/// satisfies `|P̄_FA(α̂) − p_fa| < 1e−4·p_fa`.
pub fn alpha_from_pfa<T: Scalar>(spec: &FalseAlarmSpec<T>) -> Result<T> {
    if !(spec.p_fa > T::zero() && spec.p_fa < T::one()) {
        return Err(Error::invalid("p_fa must be in (0, 1)"));
    }
    if spec.snapshots == 0 {
        return Err(Error::invalid("snapshot count must be at least 1"));
    }
    let eval = |alpha: T| -> Result<T> {
        if spec.snapshots == 1 {
            pfa_from_alpha(alpha, spec.n_cells, spec.n_ref)
        } else {
            pfa_from_alpha_mmv(alpha, spec.n_cells, spec.n_ref, spec.snapshots)
        }
    };
    bisect_decreasing(eval, spec.p_fa)
}

/// Solves the order-statistic threshold multiplier for a target false alarm
/// probability.
pub fn alpha_os_from_pfa<T: Scalar>(
    p_fa: T,
    n_cells: usize,
    n_ref: usize,
    os_rank: usize,
) -> Result<T> {
    if !(p_fa > T::zero() && p_fa < T::one()) {
        return Err(Error::invalid("p_fa must be in (0, 1)"));
    }
    bisect_decreasing(
        |a| pfa_from_alpha_os(a, n_cells, n_ref, os_rank),
        p_fa,
    )
}

fn bisect_decreasing<T: Scalar>(eval: impl Fn(T) -> Result<T>, target: T) -> Result<T> {
    let tol = target * T::from_f64c(1e-4);
    let mut lo = T::from_f64c(1e-9);
    let mut hi = T::one();
    let mut i = 0;
    while eval(hi)? > target {
        hi = hi * T::from_f64c(2.0);
        i += 1;
        if i > 70 {
            return Err(Error::Numerical(
                "bracket failure solving threshold multiplier".into(),
            ));
        }
    }
    for _ in 0..400 {
        let mid = (lo + hi) * T::from_f64c(0.5);
        let p = eval(mid)?;
        if (p - target).abs() < tol {
            return Ok(mid);
        }
        if p > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= T::epsilon() * hi.max(T::one()) {
            break;
        }
    }
    Err(Error::Numerical(
        "bisection failed to reach the false-alarm tolerance".into(),
    ))
}
