//! Complex tensor math: steering vectors, atoms, signal synthesis,
//! normalized and oversampled multidimensional spectra, peak finding and
//! wrap-around frequency distance.
//!
//! Vectorization order: the linear index runs with the **first dimension
//! fastest**, i.e. `lin = n_1 + N_1*(n_2 + N_2*(n_3 + ...))`. This matches
//! the Kronecker structure of the vectorized atom, where the factor for the
//! first dimension sits rightmost in the chain.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// D-dimensional array of complex samples (observations, residues, spectra).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor<T> {
    dims: Vec<usize>,
    data: Vec<Complex<T>>,
}

/// D angular frequencies in radians, each reduced into `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector<T> {
    omega: Vec<T>,
}

/// One (complex amplitude, frequency vector) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidComponent<T> {
    /// Complex amplitude.
    pub amplitude: Complex<T>,
    /// D-dimensional frequency.
    pub freq: FrequencyVector<T>,
}

/// Multi-index into a tensor grid, one entry per dimension.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridIndex {
    idx: Vec<usize>,
}

// ─── GridIndex ──────────────────────────────────────────────────────────

impl GridIndex {
    /// Builds an index, checking bounds against `dims`.
    pub fn new(idx: Vec<usize>, dims: &[usize]) -> Result<Self> {
        if idx.len() != dims.len() {
            return Err(Error::invalid(format!(
                "index rank {} does not match tensor rank {}",
                idx.len(),
                dims.len()
            )));
        }
        for (d, (&i, &n)) in idx.iter().zip(dims).enumerate() {
            if i >= n {
                return Err(Error::IndexOutOfRange(format!(
                    "index {i} out of bounds for dimension {d} of size {n}"
                )));
            }
        }
        Ok(GridIndex { idx })
    }

    /// Index components.
    pub fn coords(&self) -> &[usize] {
        &self.idx
    }

    /// Linear position with the first dimension fastest.
    pub fn linear(&self, dims: &[usize]) -> usize {
        debug_assert_eq!(self.idx.len(), dims.len());
        let mut lin = 0;
        for d in (0..dims.len()).rev() {
            lin = lin * dims[d] + self.idx[d];
        }
        lin
    }

    /// Inverse of [`GridIndex::linear`].
    pub fn from_linear(mut lin: usize, dims: &[usize]) -> Self {
        let mut idx = Vec::with_capacity(dims.len());
        for &n in dims {
            idx.push(lin % n);
            lin /= n;
        }
        GridIndex { idx }
    }
}

// ─── FrequencyVector ────────────────────────────────────────────────────

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_angle<T: Scalar>(omega: T) -> T {
    let two_pi = T::two_pi();
    let mut r = omega % two_pi;
    if r < T::zero() {
        r = r + two_pi;
    }
    // `% two_pi` of a slightly negative value can round up to exactly 2π.
    if r >= two_pi {
        r = r - two_pi;
    }
    r
}

/// Wrap-around distance between two angles: `min_a |ω_b − ω_a + 2πa|`, in `[0, π]`.
pub fn wrap_dist<T: Scalar>(omega_a: T, omega_b: T) -> T {
    let two_pi = T::two_pi();
    let d = wrap_angle(omega_b - omega_a);
    d.min(two_pi - d)
}

impl<T: Scalar> FrequencyVector<T> {
    /// Builds a frequency vector, reducing every component into `[0, 2π)`.
    pub fn new(omega: impl Into<Vec<T>>) -> Self {
        let omega = omega.into().into_iter().map(wrap_angle).collect();
        FrequencyVector { omega }
    }

    /// Number of dimensions.
    pub fn ndim(&self) -> usize {
        self.omega.len()
    }

    /// Angle components.
    pub fn angles(&self) -> &[T] {
        &self.omega
    }

    /// Componentwise wrap-around distance to another frequency vector.
    pub fn wrap_dists(&self, other: &Self) -> Vec<T> {
        self.omega
            .iter()
            .zip(&other.omega)
            .map(|(&a, &b)| wrap_dist(a, b))
            .collect()
    }

    /// Nearest DFT grid cell on an `dims` grid (per-dimension rounding).
    pub fn nearest_cell(&self, dims: &[usize]) -> GridIndex {
        let idx = self
            .omega
            .iter()
            .zip(dims)
            .map(|(&w, &n)| {
                let bin = (w * T::from_count(n) / T::two_pi()).round();
                (bin.to_usize().unwrap_or(0)) % n
            })
            .collect();
        GridIndex { idx }
    }
}

impl<T: Scalar> SinusoidComponent<T> {
    /// Convenience constructor.
    pub fn new(amplitude: Complex<T>, freq: FrequencyVector<T>) -> Self {
        SinusoidComponent { amplitude, freq }
    }
}

// ─── ComplexTensor ──────────────────────────────────────────────────────

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::invalid("tensor must have at least one dimension"));
    }
    if dims.iter().any(|&n| n == 0) {
        return Err(Error::invalid("every dimension size must be at least 1"));
    }
    Ok(())
}

impl<T: Scalar> ComplexTensor<T> {
    /// All-zeros tensor.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        let n = dims.iter().product();
        Ok(ComplexTensor {
            dims: dims.to_vec(),
            data: vec![Complex::new(T::zero(), T::zero()); n],
        })
    }

    /// Tensor from raw data in canonical linear order (first dimension fastest).
    pub fn from_data(dims: &[usize], data: Vec<Complex<T>>) -> Result<Self> {
        check_dims(dims)?;
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::invalid(format!(
                "data length {} does not match product of dims {}",
                data.len(),
                n
            )));
        }
        Ok(ComplexTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    /// Dimension sizes.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of dimensions D.
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Total number of elements N.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; tensors have at least one element.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Data in canonical linear order.
    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    /// Mutable data in canonical linear order.
    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    /// Value at a multi-index.
    pub fn get(&self, idx: &GridIndex) -> Complex<T> {
        self.data[idx.linear(&self.dims)]
    }

    /// Squared Frobenius norm Σ|y|².
    pub fn energy(&self) -> T {
        self.data
            .iter()
            .map(|z| z.re * z.re + z.im * z.im)
            .fold(T::zero(), |a, b| a + b)
    }

    /// Elementwise difference; dims must match.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::invalid("tensor dims mismatch in subtraction"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(ComplexTensor {
            dims: self.dims.clone(),
            data,
        })
    }

    /// Scales every element by `c`.
    pub fn scale(&self, c: Complex<T>) -> Self {
        ComplexTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    /// Per-element squared magnitudes, linear order.
    pub fn power(&self) -> Vec<T> {
        self.data
            .iter()
            .map(|z| z.re * z.re + z.im * z.im)
            .collect()
    }
}

// ─── Steering vectors and atoms ─────────────────────────────────────────

/// Array steering vector `[1, e^{jω}, …, e^{j(P−1)ω}]`.
pub fn steering_vector<T: Scalar>(p: usize, omega: T) -> Result<Vec<Complex<T>>> {
    if p == 0 {
        return Err(Error::invalid("steering vector length must be positive"));
    }
    let mut v = Vec::with_capacity(p);
    for k in 0..p {
        let phase = T::from_count(k) * omega;
        v.push(Complex::new(phase.cos(), phase.sin()));
    }
    Ok(v)
}

/// Vectorized multidimensional atom: the Kronecker chain of per-dimension
/// steering vectors, element `n` equal to `∏_d e^{j n_d ω_d}` in canonical
/// linear order. Squared norm is exactly N.
pub fn atom<T: Scalar>(dims: &[usize], freq: &FrequencyVector<T>) -> Result<Vec<Complex<T>>> {
    check_dims(dims)?;
    if freq.ndim() != dims.len() {
        return Err(Error::invalid(format!(
            "frequency rank {} does not match tensor rank {}",
            freq.ndim(),
            dims.len()
        )));
    }
    let per_dim: Vec<Vec<Complex<T>>> = dims
        .iter()
        .zip(freq.angles())
        .map(|(&n, &w)| steering_vector(n, w))
        .collect::<Result<_>>()?;

    let n_total: usize = dims.iter().product();
    let mut out = Vec::with_capacity(n_total);
    let mut midx = vec![0usize; dims.len()];
    for _ in 0..n_total {
        let mut v = Complex::new(T::one(), T::zero());
        for (d, &i) in midx.iter().enumerate() {
            v = v * per_dim[d][i];
        }
        out.push(v);
        // odometer increment, first dimension fastest
        for d in 0..dims.len() {
            midx[d] += 1;
            if midx[d] < dims[d] {
                break;
            }
            midx[d] = 0;
        }
    }
    Ok(out)
}

/// Noiseless synthesis: tensor whose vectorization is `Σ_k x_k · atom(ω_k)`.
pub fn synthesize<T: Scalar>(
    dims: &[usize],
    components: &[SinusoidComponent<T>],
) -> Result<ComplexTensor<T>> {
    let mut out = ComplexTensor::zeros(dims)?;
    for comp in components {
        add_component(&mut out, comp)?;
    }
    Ok(out)
}

/// Adds `x_k · atom(ω_k)` to a tensor in place.
pub fn add_component<T: Scalar>(
    tensor: &mut ComplexTensor<T>,
    comp: &SinusoidComponent<T>,
) -> Result<()> {
    let a = atom(&tensor.dims, &comp.freq)?;
    for (y, av) in tensor.data.iter_mut().zip(a) {
        *y = *y + comp.amplitude * av;
    }
    Ok(())
}

/// Subtracts `x_k · atom(ω_k)` from a tensor in place.
pub fn sub_component<T: Scalar>(
    tensor: &mut ComplexTensor<T>,
    comp: &SinusoidComponent<T>,
) -> Result<()> {
    let a = atom(&tensor.dims, &comp.freq)?;
    for (y, av) in tensor.data.iter_mut().zip(a) {
        *y = *y - comp.amplitude * av;
    }
    Ok(())
}

// ─── Spectra ────────────────────────────────────────────────────────────

/// In-place forward FFT along every dimension of `data` laid out with the
/// first of `dims` fastest.
fn fft_all_dims<T: Scalar>(dims: &[usize], data: &mut [Complex<T>]) {
    let mut planner = FftPlanner::<T>::new();
    let mut stride = 1usize;
    for &nd in dims {
        let fft = planner.plan_fft_forward(nd);
        let mut line = vec![Complex::new(T::zero(), T::zero()); nd];
        let block = stride * nd;
        let n_total = data.len();
        let mut base = 0;
        while base < n_total {
            for off in 0..stride {
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + off + j * stride];
                }
                fft.process(&mut line);
                for (j, &v) in line.iter().enumerate() {
                    data[base + off + j * stride] = v;
                }
            }
            base += block;
        }
        stride = block;
    }
}

/// Normalized D-dimensional DFT: forward transform along every dimension
/// scaled by `1/√N`. Unitary, so total energy is preserved.
pub fn dft_spectrum<T: Scalar>(y: &ComplexTensor<T>) -> ComplexTensor<T> {
    let mut data = y.data.clone();
    fft_all_dims(&y.dims, &mut data);
    let s = T::one() / T::from_count(y.len()).sqrt();
    for v in &mut data {
        *v = Complex::new(v.re * s, v.im * s);
    }
    ComplexTensor {
        dims: y.dims.clone(),
        data,
    }
}

/// Zero-padded spectrum on a `γ`-times denser grid per dimension. Bin `k_d`
/// corresponds to frequency `2π k_d/(γ N_d)`; values keep the `1/√N`
/// normalization of [`dft_spectrum`], with N the original element count, so
/// `γ = 1` reproduces it exactly.
pub fn oversampled_spectrum<T: Scalar>(
    y: &ComplexTensor<T>,
    gamma: usize,
) -> Result<ComplexTensor<T>> {
    if gamma == 0 {
        return Err(Error::invalid("oversampling factor must be at least 1"));
    }
    if gamma == 1 {
        return Ok(dft_spectrum(y));
    }
    let big_dims: Vec<usize> = y.dims.iter().map(|&n| n * gamma).collect();
    let mut padded = ComplexTensor::zeros(&big_dims)?;
    let mut midx = vec![0usize; y.dims.len()];
    for lin in 0..y.len() {
        // canonical index in the padded tensor
        let mut big_lin = 0;
        for d in (0..y.dims.len()).rev() {
            big_lin = big_lin * big_dims[d] + midx[d];
        }
        padded.data[big_lin] = y.data[lin];
        for d in 0..y.dims.len() {
            midx[d] += 1;
            if midx[d] < y.dims[d] {
                break;
            }
            midx[d] = 0;
        }
    }
    fft_all_dims(&big_dims, &mut padded.data);
    let s = T::one() / T::from_count(y.len()).sqrt();
    for v in &mut padded.data {
        *v = Complex::new(v.re * s, v.im * s);
    }
    Ok(padded)
}

/// Location and value of the maximum of `|·|²`; ties resolved toward the
/// smallest canonical linear index.
pub fn peak_location<T: Scalar>(spectrum: &ComplexTensor<T>) -> (GridIndex, T) {
    let (lin, power) = peak_of_power_slice(&spectrum.power());
    (GridIndex::from_linear(lin, &spectrum.dims), power)
}

/// Peak scan over a raw power slice; ties toward the smallest index.
pub(crate) fn peak_of_power_slice<T: Scalar>(power: &[T]) -> (usize, T) {
    let mut best = 0usize;
    let mut best_p = power[0];
    for (i, &p) in power.iter().enumerate().skip(1) {
        if p > best_p {
            best_p = p;
            best = i;
        }
    }
    (best, best_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn randn_tensor(dims: &[usize], seed: u64) -> ComplexTensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = dims.iter().product();
        let data = (0..n)
            .map(|_| {
                Complex64::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                )
            })
            .collect();
        ComplexTensor::from_data(dims, data).unwrap()
    }

    #[test]
    fn steering_identity_case() {
        let v = steering_vector::<f64>(4, 0.0).unwrap();
        for z in v {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn steering_half_turn() {
        let v = steering_vector::<f64>(2, std::f64::consts::PI).unwrap();
        assert_abs_diff_eq!(v[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn steering_matches_direct_loop() {
        let omega = 0.37;
        let v = steering_vector::<f64>(8, omega).unwrap();
        for (p, z) in v.iter().enumerate() {
            let expect = Complex64::new(0.0, p as f64 * omega).exp();
            assert_abs_diff_eq!(z.re, expect.re, epsilon = 1e-14);
            assert_abs_diff_eq!(z.im, expect.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn steering_rejects_empty() {
        assert!(matches!(
            steering_vector::<f64>(0, 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn atom_all_ones() {
        let freq = FrequencyVector::new(vec![0.0, 0.0]);
        let a = atom::<f64>(&[2, 2], &freq).unwrap();
        assert_eq!(a.len(), 4);
        for z in a {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn atom_one_dim_is_steering_vector() {
        let freq = FrequencyVector::new(vec![1.234]);
        let a = atom::<f64>(&[7], &freq).unwrap();
        let s = steering_vector::<f64>(7, 1.234).unwrap();
        for (x, y) in a.iter().zip(&s) {
            assert_abs_diff_eq!(x.re, y.re, epsilon = 1e-15);
            assert_abs_diff_eq!(x.im, y.im, epsilon = 1e-15);
        }
    }

    #[test]
    fn atom_matches_outer_product_oracle() {
        let freq = FrequencyVector::new(vec![0.5, 1.1]);
        let a = atom::<f64>(&[3, 2], &freq).unwrap();
        let a3 = steering_vector::<f64>(3, 0.5).unwrap();
        let a2 = steering_vector::<f64>(2, 1.1).unwrap();
        for j in 0..2 {
            for i in 0..3 {
                let expect = a3[i] * a2[j];
                let got = a[i + 3 * j];
                assert_abs_diff_eq!(got.re, expect.re, epsilon = 1e-14);
                assert_abs_diff_eq!(got.im, expect.im, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn atom_energy_is_element_count() {
        let freq = FrequencyVector::new(vec![0.71, 2.9, 4.3]);
        let a = atom::<f64>(&[3, 4, 5], &freq).unwrap();
        let energy: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        assert_abs_diff_eq!(energy, 60.0, epsilon = 1e-10);
        for z in a {
            assert_abs_diff_eq!(z.norm_sqr(), 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn atom_rejects_rank_mismatch() {
        let freq = FrequencyVector::new(vec![0.5]);
        assert!(atom::<f64>(&[3, 2], &freq).is_err());
    }

    #[test]
    fn synthesize_empty_is_zero() {
        let z = synthesize::<f64>(&[4, 3], &[]).unwrap();
        assert_eq!(z.energy(), 0.0);
    }

    #[test]
    fn on_grid_component_concentrates_in_one_bin() {
        let n = 16;
        let omega = 2.0 * std::f64::consts::PI * 5.0 / n as f64;
        let comp = SinusoidComponent::new(Complex64::new(1.0, 0.0), FrequencyVector::new(vec![omega]));
        let y = synthesize(&[n], &[comp]).unwrap();
        let spec = dft_spectrum(&y);
        for (i, z) in spec.data().iter().enumerate() {
            if i == 5 {
                assert_abs_diff_eq!(z.norm(), (n as f64).sqrt(), epsilon = 1e-10);
            } else {
                assert!(z.norm() <= 1e-10, "leakage at bin {i}: {}", z.norm());
            }
        }
    }

    #[test]
    fn synthesize_superposition_oracle() {
        let dims = [5, 4];
        let c1 = SinusoidComponent::new(
            Complex64::new(0.3, -1.1),
            FrequencyVector::new(vec![0.9, 2.2]),
        );
        let c2 = SinusoidComponent::new(
            Complex64::new(-0.7, 0.2),
            FrequencyVector::new(vec![4.0, 0.4]),
        );
        let y = synthesize(&dims, &[c1.clone(), c2.clone()]).unwrap();
        let a1 = atom(&dims, &c1.freq).unwrap();
        let a2 = atom(&dims, &c2.freq).unwrap();
        for (i, v) in y.data().iter().enumerate() {
            let expect = c1.amplitude * a1[i] + c2.amplitude * a2[i];
            assert_abs_diff_eq!(v.re, expect.re, epsilon = 1e-13);
            assert_abs_diff_eq!(v.im, expect.im, epsilon = 1e-13);
        }
    }

    #[test]
    fn dft_of_ones_is_sqrt_n_at_dc() {
        let y = ComplexTensor::from_data(&[4], vec![Complex64::new(1.0, 0.0); 4]).unwrap();
        let spec = dft_spectrum(&y);
        assert_abs_diff_eq!(spec.data()[0].re, 2.0, epsilon = 1e-12);
        for z in &spec.data()[1..] {
            assert!(z.norm() < 1e-12);
        }
    }

    #[test]
    fn dft_is_unitary() {
        let y = randn_tensor(&[6, 5, 3], 42);
        let spec = dft_spectrum(&y);
        let rel = (spec.energy() - y.energy()).abs() / y.energy();
        assert!(rel < 1e-10, "energy drift {rel}");
    }

    #[test]
    fn dft_matches_direct_sum_oracle() {
        let dims = [3usize, 4usize];
        let y = randn_tensor(&dims, 7);
        let spec = dft_spectrum(&y);
        let n = 12.0f64;
        for k2 in 0..4usize {
            for k1 in 0..3usize {
                let mut acc = Complex64::new(0.0, 0.0);
                for n2 in 0..4usize {
                    for n1 in 0..3usize {
                        let ph = -2.0 * std::f64::consts::PI
                            * (k1 as f64 * n1 as f64 / 3.0 + k2 as f64 * n2 as f64 / 4.0);
                        acc += y.data()[n1 + 3 * n2] * Complex64::new(0.0, ph).exp();
                    }
                }
                acc /= n.sqrt();
                let got = spec.data()[k1 + 3 * k2];
                assert_abs_diff_eq!(got.re, acc.re, epsilon = 1e-10);
                assert_abs_diff_eq!(got.im, acc.im, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn oversample_gamma_one_is_plain_dft() {
        let y = randn_tensor(&[8], 3);
        let a = dft_spectrum(&y);
        let b = oversampled_spectrum(&y, 1).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_abs_diff_eq!(x.re, y.re, epsilon = 1e-14);
            assert_abs_diff_eq!(x.im, y.im, epsilon = 1e-14);
        }
    }

    #[test]
    fn oversample_resolves_half_bin() {
        let n = 16;
        let omega = 2.0 * std::f64::consts::PI * 1.5 / n as f64;
        let comp = SinusoidComponent::new(Complex64::new(1.0, 0.0), FrequencyVector::new(vec![omega]));
        let y = synthesize(&[n], &[comp]).unwrap();
        let spec = oversampled_spectrum(&y, 4).unwrap();
        let (peak, _) = peak_location(&spec);
        assert_eq!(peak.coords(), &[6]);
    }

    #[test]
    fn oversample_matches_matched_filter_oracle() {
        let y = randn_tensor(&[6], 11);
        let gamma = 4;
        let spec = oversampled_spectrum(&y, gamma).unwrap();
        for k in 0..6 * gamma {
            let omega = 2.0 * std::f64::consts::PI * k as f64 / (gamma as f64 * 6.0);
            let a = steering_vector::<f64>(6, omega).unwrap();
            let mut acc = Complex64::new(0.0, 0.0);
            for (av, yv) in a.iter().zip(y.data()) {
                acc += av.conj() * yv;
            }
            acc /= 6.0f64.sqrt();
            assert_abs_diff_eq!(spec.data()[k].re, acc.re, epsilon = 1e-12);
            assert_abs_diff_eq!(spec.data()[k].im, acc.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn peak_simple_case() {
        let y = ComplexTensor::from_data(
            &[3],
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 3.0),
                Complex64::new(-2.0, 0.0),
            ],
        )
        .unwrap();
        let (idx, p) = peak_location(&y);
        assert_eq!(idx.coords(), &[1]);
        assert_abs_diff_eq!(p, 9.0, epsilon = 1e-14);
    }

    #[test]
    fn peak_tie_breaks_to_lowest_linear_index() {
        let y = ComplexTensor::from_data(&[2, 2], vec![Complex64::new(1.0, 0.0); 4]).unwrap();
        let (idx, _) = peak_location(&y);
        assert_eq!(idx.coords(), &[0, 0]);
    }

    #[test]
    fn peak_agrees_with_exhaustive_scan() {
        let y = randn_tensor(&[7, 5], 23);
        let (idx, p) = peak_location(&y);
        let lin = idx.linear(y.dims());
        for (i, z) in y.data().iter().enumerate() {
            assert!(z.norm_sqr() <= p + 1e-15);
            if z.norm_sqr() == p {
                assert!(lin <= i);
            }
        }
    }

    #[test]
    fn wrap_dist_examples() {
        let two_pi = 2.0 * std::f64::consts::PI;
        assert_abs_diff_eq!(wrap_dist(0.1, two_pi - 0.1), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_dist(1.7, 1.7), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            wrap_dist(0.0, std::f64::consts::PI + 0.3),
            std::f64::consts::PI - 0.3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn shift_property_moves_peak() {
        let n = 32usize;
        let y = randn_tensor(&[n], 5);
        let (p0, _) = peak_location(&dft_spectrum(&y));
        let m = 3usize;
        let delta = 2.0 * std::f64::consts::PI * m as f64 / n as f64;
        let shift = steering_vector::<f64>(n, delta).unwrap();
        let shifted = ComplexTensor::from_data(
            &[n],
            y.data().iter().zip(&shift).map(|(a, b)| a * b).collect(),
        )
        .unwrap();
        let (p1, _) = peak_location(&dft_spectrum(&shifted));
        assert_eq!(p1.coords()[0], (p0.coords()[0] + m) % n);
    }

    #[test]
    fn grid_index_roundtrip() {
        let dims = [3usize, 4, 5];
        for lin in 0..60 {
            let idx = GridIndex::from_linear(lin, &dims);
            assert_eq!(idx.linear(&dims), lin);
        }
    }

    #[test]
    fn frequency_canonicalizes() {
        let f = FrequencyVector::new(vec![-0.3, 7.0]);
        assert!(f.angles()[0] > 0.0 && f.angles()[0] < 2.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(
            f.angles()[0],
            2.0 * std::f64::consts::PI - 0.3,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            f.angles()[1],
            7.0 - 2.0 * std::f64::consts::PI,
            epsilon = 1e-12
        );
    }
}
