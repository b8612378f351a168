//! Newtonized greedy pursuit primitives: coarse on-grid detection, damped
//! Newton refinement of frequencies on the concentrated matched-filter
//! objective, cyclic refinement over a candidate set, joint least-squares
//! amplitude re-estimation, and the noise-variance-aware pursuit with its
//! fixed-count initialization variant.
//!
//! The concentrated objective for a frequency ω is
//! `G(ω) = |a(ω)ᴴ y|² / N` (snapshot-averaged when several measurements
//! share the frequency). Gradient and Hessian are analytic: the derivative
//! of an atom entry multiplies it by `−j n_d`, so the first and second
//! moment sums of the index weights give ∇G and ∇²G exactly.

use num_complex::Complex;

use crate::cfar;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{
    atom, oversampled_spectrum, synthesize, ComplexTensor, FrequencyVector, SinusoidComponent,
};

/// Grid on which detection statistics (stopping rules and margins) are
/// evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatGrid {
    /// The N-point DFT grid of the observation.
    Dft,
    /// The γ-times oversampled grid also used for coarse detection.
    Oversampled,
}

/// Knobs for the refinement stages.
#[derive(Debug, Clone)]
pub struct RefineSettings {
    /// Newton steps per single refinement, R_s.
    pub newton_steps_single: usize,
    /// Rounds of cyclic refinement, R_c.
    pub cyclic_rounds: usize,
    /// Oversampling factor γ of the coarse detection grid.
    pub oversample: usize,
    /// Accept a step only if the objective improves (safeguarded ascent);
    /// when false, raw Newton steps are taken unchecked.
    pub step_accept_rule: bool,
    /// Grid for detection statistics.
    pub stat_grid: StatGrid,
}

impl Default for RefineSettings {
    fn default() -> Self {
        RefineSettings {
            newton_steps_single: 1,
            cyclic_rounds: 3,
            oversample: 4,
            step_accept_rule: true,
            stat_grid: StatGrid::Oversampled,
        }
    }
}

/// Ordered list of estimated sinusoid components over a common grid.
#[derive(Debug, Clone)]
pub struct CandidateSet<T> {
    /// Estimated components, in extraction order.
    pub components: Vec<SinusoidComponent<T>>,
    /// Grid sizes of the underlying observation.
    pub dims: Vec<usize>,
}

impl<T: Scalar> CandidateSet<T> {
    /// Empty set over the given grid.
    pub fn new(dims: &[usize]) -> Self {
        CandidateSet {
            components: Vec::new(),
            dims: dims.to_vec(),
        }
    }

    /// Number of components.
    pub fn len(&self) -> usize {
        self.components.len()
    }

    /// True when no component is present.
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Merges components whose frequencies coincide (wrap-around distance
    /// below `tol` in every coordinate) by summing amplitudes. Keeps the
    /// earliest occurrence's position.
    pub fn merge_duplicates(&mut self, tol: T) {
        let mut i = 0;
        while i < self.components.len() {
            let mut j = i + 1;
            while j < self.components.len() {
                let same = self.components[i]
                    .freq
                    .wrap_dists(&self.components[j].freq)
                    .iter()
                    .all(|&d| d < tol);
                if same {
                    let amp = self.components[j].amplitude;
                    self.components[i].amplitude = self.components[i].amplitude + amp;
                    self.components.remove(j);
                } else {
                    j += 1;
                }
            }
            i += 1;
        }
    }
}

// ─── Concentrated objective: value, gradient, Hessian ───────────────────

/// Matched-filter sums of a tensor at ω: `c = a(ω)ᴴ y`, the index-weighted
/// first moments `S1[d] = Σ n_d y_n e^{−j n·ω}` and second moments
/// `S2[d][e] = Σ n_d n_e y_n e^{−j n·ω}`.
struct FilterMoments<T> {
    c: Complex<T>,
    s1: Vec<Complex<T>>,
    s2: Vec<Complex<T>>, // D×D row-major, symmetric
}

fn phase_tables<T: Scalar>(dims: &[usize], omega: &[T]) -> Vec<Vec<Complex<T>>> {
    dims.iter()
        .zip(omega)
        .map(|(&n, &w)| {
            (0..n)
                .map(|i| {
                    let p = -(T::from_count(i) * w);
                    Complex::new(p.cos(), p.sin())
                })
                .collect()
        })
        .collect()
}

fn filter_value<T: Scalar>(y: &ComplexTensor<T>, tables: &[Vec<Complex<T>>]) -> Complex<T> {
    let dims = y.dims();
    let ndim = dims.len();
    let mut midx = vec![0usize; ndim];
    let mut c = Complex::new(T::zero(), T::zero());
    for &v in y.data() {
        let mut e = Complex::new(T::one(), T::zero());
        for d in 0..ndim {
            e = e * tables[d][midx[d]];
        }
        c = c + v * e;
        for d in 0..ndim {
            midx[d] += 1;
            if midx[d] < dims[d] {
                break;
            }
            midx[d] = 0;
        }
    }
    c
}

fn filter_moments<T: Scalar>(y: &ComplexTensor<T>, tables: &[Vec<Complex<T>>]) -> FilterMoments<T> {
    let dims = y.dims();
    let ndim = dims.len();
    let mut midx = vec![0usize; ndim];
    let zero = Complex::new(T::zero(), T::zero());
    let mut c = zero;
    let mut s1 = vec![zero; ndim];
    let mut s2 = vec![zero; ndim * ndim];
    for &v in y.data() {
        let mut e = Complex::new(T::one(), T::zero());
        for d in 0..ndim {
            e = e * tables[d][midx[d]];
        }
        let z = v * e;
        c = c + z;
        for d in 0..ndim {
            let nd = T::from_count(midx[d]);
            let znd = z * nd;
            s1[d] = s1[d] + znd;
            for e2 in d..ndim {
                let ne = T::from_count(midx[e2]);
                s2[d * ndim + e2] = s2[d * ndim + e2] + znd * ne;
            }
        }
        for d in 0..ndim {
            midx[d] += 1;
            if midx[d] < dims[d] {
                break;
            }
            midx[d] = 0;
        }
    }
    for d in 0..ndim {
        for e in 0..d {
            s2[d * ndim + e] = s2[e * ndim + d];
        }
    }
    FilterMoments { c, s1, s2 }
}

/// Snapshot-averaged objective value `G(ω) = (1/S) Σ_s |c_s|²/N` together
/// with the per-snapshot matched-filter amplitudes `c_s/N`.
pub(crate) fn objective_value<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    omega: &[T],
) -> (T, Vec<Complex<T>>) {
    let dims = snapshots[0].dims();
    let n = T::from_count(snapshots[0].len());
    let s_count = T::from_count(snapshots.len());
    let tables = phase_tables(dims, omega);
    let mut g = T::zero();
    let mut amps = Vec::with_capacity(snapshots.len());
    for y in snapshots {
        let c = filter_value(y, &tables);
        g = g + c.norm_sqr() / n;
        amps.push(c / n);
    }
    (g / s_count, amps)
}

/// Objective value, gradient and Hessian at ω (snapshot-averaged).
pub(crate) fn objective_grad_hess<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    omega: &[T],
) -> (T, Vec<T>, Vec<T>) {
    let dims = snapshots[0].dims();
    let ndim = dims.len();
    let n = T::from_count(snapshots[0].len());
    let s_count = T::from_count(snapshots.len());
    let tables = phase_tables(dims, omega);
    let two = T::from_f64c(2.0);
    let mut g = T::zero();
    let mut grad = vec![T::zero(); ndim];
    let mut hess = vec![T::zero(); ndim * ndim];
    for y in snapshots {
        let m = filter_moments(y, &tables);
        g = g + m.c.norm_sqr() / n;
        let cbar = m.c.conj();
        for d in 0..ndim {
            // dG/dω_d = (2/N)·Im(c̄ · S1[d])
            grad[d] = grad[d] + two * (cbar * m.s1[d]).im / n;
            for e in d..ndim {
                // d²G/dω_d dω_e = (2/N)·[Re(S1_d S̄1_e) − Re(c̄ S2_de)]
                let v = two * ((m.s1[d] * m.s1[e].conj()).re - (cbar * m.s2[d * ndim + e]).re) / n;
                hess[d * ndim + e] = hess[d * ndim + e] + v;
            }
        }
    }
    for d in 0..ndim {
        for e in 0..d {
            hess[d * ndim + e] = hess[e * ndim + d];
        }
    }
    let inv_s = T::one() / s_count;
    (
        g * inv_s,
        grad.into_iter().map(|v| v * inv_s).collect(),
        hess.into_iter().map(|v| v * inv_s).collect(),
    )
}

/// Cholesky test for positive definiteness of a small symmetric matrix.
fn is_positive_definite<T: Scalar>(m: &[T], ndim: usize) -> bool {
    let mut l = vec![T::zero(); ndim * ndim];
    for j in 0..ndim {
        let mut d = m[j * ndim + j];
        for k in 0..j {
            d = d - l[j * ndim + k] * l[j * ndim + k];
        }
        if d <= T::zero() {
            return false;
        }
        let dj = d.sqrt();
        l[j * ndim + j] = dj;
        for i in (j + 1)..ndim {
            let mut v = m[i * ndim + j];
            for k in 0..j {
                v = v - l[i * ndim + k] * l[j * ndim + k];
            }
            l[i * ndim + j] = v / dj;
        }
    }
    true
}

/// Solves a small dense symmetric system by Gaussian elimination with
/// partial pivoting; returns None when singular to working precision.
fn solve_small<T: Scalar>(a: &[T], b: &[T], ndim: usize) -> Option<Vec<T>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..ndim {
        let mut piv = col;
        for r in (col + 1)..ndim {
            if m[r * ndim + col].abs() > m[piv * ndim + col].abs() {
                piv = r;
            }
        }
        if m[piv * ndim + col].abs() < T::epsilon() * T::from_f64c(16.0) {
            return None;
        }
        if piv != col {
            for c in 0..ndim {
                m.swap(col * ndim + c, piv * ndim + c);
            }
            rhs.swap(col, piv);
        }
        let d = m[col * ndim + col];
        for r in (col + 1)..ndim {
            let f = m[r * ndim + col] / d;
            for c in col..ndim {
                let v = m[col * ndim + c];
                m[r * ndim + c] = m[r * ndim + c] - f * v;
            }
            let rv = rhs[col];
            rhs[r] = rhs[r] - f * rv;
        }
    }
    for col in (0..ndim).rev() {
        let mut v = rhs[col];
        for c in (col + 1)..ndim {
            v = v - m[col * ndim + c] * rhs[c];
        }
        rhs[col] = v / m[col * ndim + col];
    }
    Some(rhs)
}

/// Refines a frequency shared by all snapshots with up to R_s damped Newton
/// steps on the concentrated objective; returns the refined frequency and
/// the per-snapshot matched-filter amplitudes. The objective never
/// decreases relative to entry.
pub(crate) fn refine_freq<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    freq: &FrequencyVector<T>,
    settings: &RefineSettings,
) -> (FrequencyVector<T>, Vec<Complex<T>>) {
    let dims = snapshots[0].dims().to_vec();
    let ndim = dims.len();
    let mut omega: Vec<T> = freq.angles().to_vec();
    let (mut g_cur, mut amps) = objective_value(snapshots, &omega);

    let n_max = dims.iter().copied().max().unwrap_or(1);
    for _ in 0..settings.newton_steps_single {
        let (g0, grad, hess) = objective_grad_hess(snapshots, &omega);
        debug_assert!(g0 >= g_cur - g_cur.abs() * T::from_f64c(1e-12) - T::from_f64c(1e-300));
        let gnorm = grad.iter().map(|&v| v * v).fold(T::zero(), |a, b| a + b).sqrt();
        if gnorm < T::epsilon() * T::from_f64c(64.0) * (g0 + T::one()) {
            break;
        }
        // Newton direction on the negated Hessian (ascent needs −H ≻ 0)
        let neg_hess: Vec<T> = hess.iter().map(|&v| -v).collect();
        let mut moved = false;
        if is_positive_definite(&neg_hess, ndim) {
            if let Some(delta) = solve_small(&neg_hess, &grad, ndim) {
                if !settings.step_accept_rule {
                    for d in 0..ndim {
                        omega[d] = omega[d] + delta[d];
                    }
                    let (g_new, a_new) = objective_value(snapshots, &omega);
                    g_cur = g_new;
                    amps = a_new;
                    continue;
                }
                let mut scale = T::one();
                for _ in 0..20 {
                    let cand: Vec<T> = omega
                        .iter()
                        .zip(&delta)
                        .map(|(&w, &dl)| w + scale * dl)
                        .collect();
                    let (g_new, a_new) = objective_value(snapshots, &cand);
                    if g_new > g_cur {
                        omega = cand;
                        g_cur = g_new;
                        amps = a_new;
                        moved = true;
                        break;
                    }
                    scale = scale * T::from_f64c(0.5);
                }
            }
        }
        if !moved {
            // gradient ascent with backtracking, starting at a fraction of a bin
            let mut h = T::PI() / (T::from_f64c(2.0) * T::from_count(n_max)) / gnorm;
            let mut improved = false;
            for _ in 0..24 {
                let cand: Vec<T> = omega
                    .iter()
                    .zip(&grad)
                    .map(|(&w, &gd)| w + h * gd)
                    .collect();
                let (g_new, a_new) = objective_value(snapshots, &cand);
                if g_new > g_cur {
                    omega = cand;
                    g_cur = g_new;
                    amps = a_new;
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
    (FrequencyVector::new(omega), amps)
}

/// One single-refinement pass of a component against its pseudo-measurement
/// (damped Newton ascent plus amplitude refit). Non-improving refinements
/// return the input unchanged up to the amplitude refit at the same
/// frequency.
pub fn newton_refine_single<T: Scalar>(
    y_pseudo: &ComplexTensor<T>,
    comp: &SinusoidComponent<T>,
    settings: &RefineSettings,
) -> SinusoidComponent<T> {
    let snaps = std::slice::from_ref(y_pseudo);
    let (freq, amps) = refine_freq(snaps, &comp.freq, settings);
    SinusoidComponent::new(amps[0], freq)
}

/// Cyclic refinement: R_c rounds over the set; each component is refined
/// against its pseudo-measurement (residual plus own contribution) and the
/// residual is updated in place. Total residual energy never increases.
pub fn cyclic_refine<T: Scalar>(
    y: &ComplexTensor<T>,
    set: &CandidateSet<T>,
    settings: &RefineSettings,
) -> CandidateSet<T> {
    let mut comps: Vec<PursuitComponent<T>> = set
        .components
        .iter()
        .map(|c| PursuitComponent {
            amps: vec![c.amplitude],
            freq: c.freq.clone(),
        })
        .collect();
    let mut residuals = vec![residual_of(y, &set.components)];
    cyclic_refine_multi(&mut residuals, &mut comps, settings);
    let mut out = CandidateSet::new(&set.dims);
    out.components = comps
        .into_iter()
        .map(|c| SinusoidComponent::new(c.amps[0], c.freq))
        .collect();
    out.merge_duplicates(T::from_f64c(1e-12));
    out
}

/// Component with one amplitude per snapshot sharing a frequency.
#[derive(Debug, Clone)]
pub(crate) struct PursuitComponent<T> {
    pub amps: Vec<Complex<T>>,
    pub freq: FrequencyVector<T>,
}

pub(crate) fn residual_of<T: Scalar>(
    y: &ComplexTensor<T>,
    comps: &[SinusoidComponent<T>],
) -> ComplexTensor<T> {
    let model = synthesize(y.dims(), comps).expect("dims validated");
    y.sub(&model).expect("dims match")
}

/// In-place cyclic refinement over snapshot residuals.
pub(crate) fn cyclic_refine_multi<T: Scalar>(
    residuals: &mut [ComplexTensor<T>],
    comps: &mut Vec<PursuitComponent<T>>,
    settings: &RefineSettings,
) {
    let dims = residuals[0].dims().to_vec();
    for _round in 0..settings.cyclic_rounds {
        #[cfg(debug_assertions)]
        let energy_before: T = residuals.iter().map(|r| r.energy()).fold(T::zero(), |a, b| a + b);
        for k in 0..comps.len() {
            let a = atom(&dims, &comps[k].freq).expect("valid freq");
            // pseudo-measurement per snapshot: residual + own contribution
            for (s, r) in residuals.iter_mut().enumerate() {
                let x = comps[k].amps[s];
                for (rv, av) in r.data_mut().iter_mut().zip(&a) {
                    *rv = *rv + x * *av;
                }
            }
            let (freq, amps) = refine_freq(residuals, &comps[k].freq, settings);
            let a_new = atom(&dims, &freq).expect("valid freq");
            for (s, r) in residuals.iter_mut().enumerate() {
                let x = amps[s];
                for (rv, av) in r.data_mut().iter_mut().zip(&a_new) {
                    *rv = *rv - x * *av;
                }
            }
            comps[k].freq = freq;
            comps[k].amps = amps;
        }
        #[cfg(debug_assertions)]
        {
            let energy_after: T =
                residuals.iter().map(|r| r.energy()).fold(T::zero(), |a, b| a + b);
            debug_assert!(
                energy_after
                    <= energy_before + (energy_before + T::one()) * T::from_f64c(1e-9),
                "residual energy increased across a cyclic round"
            );
        }
    }
}

// ─── Least squares ──────────────────────────────────────────────────────

/// Complex Hermitian positive definite solve via Cholesky; `g` is K×K
/// row-major, `b` has K entries per right-hand side.
fn cholesky_solve<T: Scalar>(
    g: &[Complex<T>],
    rhs: &mut [Vec<Complex<T>>],
    k: usize,
) -> Result<()> {
    let zero = Complex::new(T::zero(), T::zero());
    let mut l = vec![zero; k * k];
    let scale = (0..k)
        .map(|j| g[j * k + j].re)
        .fold(T::zero(), |a, b| a.max(b));
    let floor = scale * T::from_f64c(1e-12).max(T::epsilon() * T::from_f64c(64.0));
    for j in 0..k {
        let mut d = g[j * k + j].re;
        for m in 0..j {
            d = d - l[j * k + m].norm_sqr();
        }
        if !(d > floor) {
            let cond = (scale / d.max(T::epsilon() * scale)).to_f64().unwrap_or(f64::INFINITY);
            return Err(Error::IllConditioned { cond });
        }
        let dj = d.sqrt();
        l[j * k + j] = Complex::new(dj, T::zero());
        for i in (j + 1)..k {
            let mut v = g[i * k + j];
            for m in 0..j {
                v = v - l[i * k + m] * l[j * k + m].conj();
            }
            l[i * k + j] = v / dj;
        }
    }
    for b in rhs.iter_mut() {
        // forward: L z = b
        for i in 0..k {
            let mut v = b[i];
            for m in 0..i {
                v = v - l[i * k + m] * b[m];
            }
            b[i] = v / l[i * k + i].re;
        }
        // backward: Lᴴ x = z
        for i in (0..k).rev() {
            let mut v = b[i];
            for m in (i + 1)..k {
                v = v - l[m * k + i].conj() * b[m];
            }
            b[i] = v / l[i * k + i].re;
        }
    }
    Ok(())
}

/// Shared entry to the complex Cholesky solver for sibling modules.
pub(crate) fn cholesky_solve_pub<T: Scalar>(
    g: &[Complex<T>],
    rhs: &mut [Vec<Complex<T>>],
    k: usize,
) -> Result<()> {
    cholesky_solve(g, rhs, k)
}

/// Replaces the amplitudes of the set by the least-squares solution of
/// `min ‖vec(y) − A x‖²` over the set's atoms; frequencies are untouched.
pub fn ls_reestimate<T: Scalar>(y: &ComplexTensor<T>, set: &CandidateSet<T>) -> Result<CandidateSet<T>> {
    let mut comps: Vec<PursuitComponent<T>> = set
        .components
        .iter()
        .map(|c| PursuitComponent {
            amps: vec![c.amplitude],
            freq: c.freq.clone(),
        })
        .collect();
    ls_reestimate_multi(std::slice::from_ref(y), &mut comps)?;
    let mut out = CandidateSet::new(&set.dims);
    out.components = comps
        .into_iter()
        .map(|c| SinusoidComponent::new(c.amps[0], c.freq))
        .collect();
    Ok(out)
}

/// Joint LS amplitude re-fit across snapshots with shared atoms.
pub(crate) fn ls_reestimate_multi<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    comps: &mut [PursuitComponent<T>],
) -> Result<()> {
    let k = comps.len();
    if k == 0 {
        return Ok(());
    }
    let dims = snapshots[0].dims();
    let n: usize = snapshots[0].len();
    if k > n {
        return Err(Error::invalid("more components than measurements"));
    }
    let atoms: Vec<Vec<Complex<T>>> = comps
        .iter()
        .map(|c| atom(dims, &c.freq))
        .collect::<Result<_>>()?;
    // normal equations G = AᴴA, b_s = Aᴴ y_s
    let zero = Complex::new(T::zero(), T::zero());
    let mut g = vec![zero; k * k];
    for i in 0..k {
        for j in i..k {
            let mut acc = zero;
            for t in 0..n {
                acc = acc + atoms[i][t].conj() * atoms[j][t];
            }
            g[i * k + j] = acc;
            g[j * k + i] = acc.conj();
        }
    }
    let mut rhs: Vec<Vec<Complex<T>>> = snapshots
        .iter()
        .map(|y| {
            (0..k)
                .map(|i| {
                    let mut acc = zero;
                    for t in 0..n {
                        acc = acc + atoms[i][t].conj() * y.data()[t];
                    }
                    acc
                })
                .collect()
        })
        .collect();
    cholesky_solve(&g, &mut rhs, k)?;
    for (s, x) in rhs.iter().enumerate() {
        for (i, comp) in comps.iter_mut().enumerate() {
            comp.amps[s] = x[i];
        }
    }
    Ok(())
}

// ─── Coarse detection and pursuit loops ─────────────────────────────────

/// Strongest component of the snapshot-averaged oversampled spectrum:
/// frequency at the grid argmax of `(1/S)Σ|a(ω)ᴴ y_s|²/N`, amplitudes from
/// the matched filter at that frequency.
pub(crate) fn coarse_detect_multi<T: Scalar>(
    residuals: &[ComplexTensor<T>],
    gamma: usize,
) -> PursuitComponent<T> {
    let n = T::from_count(residuals[0].len());
    let mut avg_power: Vec<T> = Vec::new();
    let mut specs = Vec::with_capacity(residuals.len());
    for r in residuals {
        let spec = oversampled_spectrum(r, gamma).expect("gamma >= 1");
        if avg_power.is_empty() {
            avg_power = spec.power();
        } else {
            for (a, p) in avg_power.iter_mut().zip(spec.power()) {
                *a = *a + p;
            }
        }
        specs.push(spec);
    }
    let inv_s = T::one() / T::from_count(residuals.len());
    for a in avg_power.iter_mut() {
        *a = *a * inv_s;
    }
    let (lin, _) = crate::tensor::peak_of_power_slice(&avg_power);
    let big_dims = specs[0].dims();
    let midx = crate::tensor::GridIndex::from_linear(lin, big_dims);
    let omega: Vec<T> = midx
        .coords()
        .iter()
        .zip(big_dims)
        .map(|(&k, &gn)| T::two_pi() * T::from_count(k) / T::from_count(gn))
        .collect();
    let inv_sqrt_n = T::one() / n.sqrt();
    let amps = specs
        .iter()
        .map(|s| s.data()[lin] * inv_sqrt_n)
        .collect();
    PursuitComponent {
        amps,
        freq: FrequencyVector::new(omega),
    }
}

/// Strongest component of the oversampled residual spectrum: the frequency
/// at the grid argmax of `|a(ω)ᴴ r|²/N` with its matched-filter amplitude.
pub fn coarse_detect<T: Scalar>(residual: &ComplexTensor<T>, gamma: usize) -> SinusoidComponent<T> {
    let c = coarse_detect_multi(std::slice::from_ref(residual), gamma);
    SinusoidComponent::new(c.amps[0], c.freq)
}

/// Peak power of the detection statistic of the residuals on the configured
/// grid (snapshot-averaged power spectrum).
pub(crate) fn residual_peak_power<T: Scalar>(
    residuals: &[ComplexTensor<T>],
    settings: &RefineSettings,
) -> T {
    let gamma = match settings.stat_grid {
        StatGrid::Dft => 1,
        StatGrid::Oversampled => settings.oversample,
    };
    let mut avg: Vec<T> = Vec::new();
    for r in residuals {
        let spec = oversampled_spectrum(r, gamma).expect("gamma >= 1");
        if avg.is_empty() {
            avg = spec.power();
        } else {
            for (a, p) in avg.iter_mut().zip(spec.power()) {
                *a = *a + p;
            }
        }
    }
    let inv_s = T::one() / T::from_count(residuals.len());
    avg.iter()
        .map(|&p| p * inv_s)
        .fold(T::zero(), |a, b| a.max(b))
}

/// One detect–refine–re-fit round shared by the pursuit loops. Returns
/// false when the candidate had exactly zero amplitude (nothing left).
fn pursuit_round<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    residuals: &mut Vec<ComplexTensor<T>>,
    comps: &mut Vec<PursuitComponent<T>>,
    settings: &RefineSettings,
) -> Result<()> {
    let cand = coarse_detect_multi(residuals, settings.oversample);
    // single refinement of the new component against the current residuals
    let (freq, amps) = refine_freq(residuals, &cand.freq, settings);
    comps.push(PursuitComponent { amps, freq });
    merge_pursuit_duplicates(comps);
    cyclic_rebuild_refit(snapshots, residuals, comps, settings)
}

/// Cyclic refinement + LS + residual rebuild after a set change. Components
/// that refinement drove onto (numerically) the same frequency are merged so
/// the normal equations stay solvable.
pub(crate) fn cyclic_rebuild_refit<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    residuals: &mut Vec<ComplexTensor<T>>,
    comps: &mut Vec<PursuitComponent<T>>,
    settings: &RefineSettings,
) -> Result<()> {
    rebuild_residuals(snapshots, comps, residuals);
    cyclic_refine_multi(residuals, comps, settings);
    merge_pursuit_duplicates(comps);
    let dims = snapshots[0].dims().to_vec();
    merge_unresolvable(comps, &dims, T::from_f64c(1e-6));
    loop {
        match ls_reestimate_multi(snapshots, comps) {
            Ok(()) => break,
            Err(Error::IllConditioned { .. }) if merge_closest_pair(comps, &dims) => continue,
            Err(e) => return Err(e),
        }
    }
    rebuild_residuals(snapshots, comps, residuals);
    Ok(())
}

/// Merges components closer than `tol_bins` DFT bins in every dimension.
pub(crate) fn merge_unresolvable<T: Scalar>(
    comps: &mut Vec<PursuitComponent<T>>,
    dims: &[usize],
    tol_bins: T,
) {
    let mut i = 0;
    while i < comps.len() {
        let mut j = i + 1;
        while j < comps.len() {
            let close = comps[i]
                .freq
                .wrap_dists(&comps[j].freq)
                .iter()
                .zip(dims)
                .all(|(&d, &n)| d * T::from_count(n) < tol_bins * T::two_pi());
            if close {
                let amps = comps[j].amps.clone();
                for (a, b) in comps[i].amps.iter_mut().zip(amps) {
                    *a = *a + b;
                }
                comps.remove(j);
            } else {
                j += 1;
            }
        }
        i += 1;
    }
}

/// Merges the closest pair if it sits within a hundredth of a bin (atoms
/// effectively parallel); returns whether a merge happened.
fn merge_closest_pair<T: Scalar>(comps: &mut Vec<PursuitComponent<T>>, dims: &[usize]) -> bool {
    if comps.len() < 2 {
        return false;
    }
    let mut best = (T::infinity(), 0usize, 0usize);
    for i in 0..comps.len() {
        for j in (i + 1)..comps.len() {
            let d = comps[i]
                .freq
                .wrap_dists(&comps[j].freq)
                .iter()
                .zip(dims)
                .map(|(&d, &n)| d * T::from_count(n) / T::two_pi())
                .fold(T::zero(), |a, b| a.max(b));
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    if best.0 < T::from_f64c(0.01) {
        let (_, i, j) = best;
        let amps = comps[j].amps.clone();
        for (a, b) in comps[i].amps.iter_mut().zip(amps) {
            *a = *a + b;
        }
        comps.remove(j);
        true
    } else {
        false
    }
}

pub(crate) fn merge_pursuit_duplicates<T: Scalar>(comps: &mut Vec<PursuitComponent<T>>) {
    let tol = T::from_f64c(1e-12);
    let mut i = 0;
    while i < comps.len() {
        let mut j = i + 1;
        while j < comps.len() {
            let same = comps[i]
                .freq
                .wrap_dists(&comps[j].freq)
                .iter()
                .all(|&d| d < tol);
            if same {
                let amps = comps[j].amps.clone();
                for (a, b) in comps[i].amps.iter_mut().zip(amps) {
                    *a = *a + b;
                }
                comps.remove(j);
            } else {
                j += 1;
            }
        }
        i += 1;
    }
}

pub(crate) fn rebuild_residuals<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    comps: &[PursuitComponent<T>],
    residuals: &mut Vec<ComplexTensor<T>>,
) {
    residuals.clear();
    for (s, y) in snapshots.iter().enumerate() {
        let set: Vec<SinusoidComponent<T>> = comps
            .iter()
            .map(|c| SinusoidComponent::new(c.amps[s], c.freq.clone()))
            .collect();
        residuals.push(residual_of(y, &set));
    }
}

/// Noise-variance-aware pursuit: extracts components while the residual
/// spectrum peak exceeds the fixed threshold `α′σ²` designed for the target
/// false alarm rate.
pub fn nomp_baseline<T: Scalar>(
    y: &ComplexTensor<T>,
    sigma2: T,
    p_fa: T,
    settings: &RefineSettings,
) -> Result<CandidateSet<T>> {
    if !(sigma2 > T::zero()) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    let tau = cfar::alpha_nomp(p_fa, y.len())? * sigma2;
    let snapshots = vec![y.clone()];
    let mut residuals = vec![y.clone()];
    let mut comps: Vec<PursuitComponent<T>> = Vec::new();
    while comps.len() < y.len() {
        if residual_peak_power(&residuals, settings) < tau {
            break;
        }
        pursuit_round(&snapshots, &mut residuals, &mut comps, settings)?;
    }
    let mut out = CandidateSet::new(y.dims());
    out.components = comps
        .into_iter()
        .map(|c| SinusoidComponent::new(c.amps[0], c.freq))
        .collect();
    Ok(out)
}

/// Fixed-count pursuit: exactly `k_max` detect–refine–re-fit iterations
/// with no stopping test.
pub fn nomp_topk<T: Scalar>(
    y: &ComplexTensor<T>,
    k_max: usize,
    settings: &RefineSettings,
) -> Result<CandidateSet<T>> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    if k_max > y.len() {
        return Err(Error::invalid(format!(
            "k_max {} exceeds the number of measurements {}",
            k_max,
            y.len()
        )));
    }
    let snapshots = vec![y.clone()];
    let mut residuals = vec![y.clone()];
    let mut comps: Vec<PursuitComponent<T>> = Vec::new();
    for _ in 0..k_max {
        pursuit_round(&snapshots, &mut residuals, &mut comps, settings)?;
    }
    let mut out = CandidateSet::new(y.dims());
    out.components = comps
        .into_iter()
        .map(|c| SinusoidComponent::new(c.amps[0], c.freq))
        .collect();
    Ok(out)
}

/// Multi-snapshot fixed-count pursuit used to initialize the detection loop.
pub(crate) fn topk_multi<T: Scalar>(
    snapshots: &[ComplexTensor<T>],
    k_max: usize,
    settings: &RefineSettings,
) -> Result<(Vec<PursuitComponent<T>>, Vec<ComplexTensor<T>>)> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    if k_max > snapshots[0].len() {
        return Err(Error::invalid(format!(
            "k_max {} exceeds the number of measurements {}",
            k_max,
            snapshots[0].len()
        )));
    }
    let mut residuals: Vec<ComplexTensor<T>> = snapshots.to_vec();
    let mut comps: Vec<PursuitComponent<T>> = Vec::new();
    for _ in 0..k_max {
        pursuit_round(snapshots, &mut residuals, &mut comps, settings)?;
    }
    Ok((comps, residuals))
}

/// True when two frequency vectors coincide to `tol` in every coordinate.
pub fn same_frequency<T: Scalar>(a: &FrequencyVector<T>, b: &FrequencyVector<T>, tol: T) -> bool {
    a.wrap_dists(b).iter().all(|&d| d < tol)
}
