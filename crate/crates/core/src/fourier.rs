//! Signals on Z_N and their discrete Fourier transforms.
//!
//! Conventions used throughout the crate:
//!
//! * `e(x)` denotes exp(2 pi i x).
//! * The analysis transform is averaged: f̂(ξ) = (1/N) Σ_n f(n) e(−nξ/N).
//! * The synthesis transform is unnormalized: f(n) = Σ_ξ f̂(ξ) e(nξ/N),
//!   so a round trip reproduces the signal exactly (up to f64 rounding).
//!
//! Sequences indexed by `[N] = {1, ..., N}` are folded onto Z_N by reducing
//! the index mod N; position 0 therefore carries the weight of n = N.

use std::sync::Mutex;

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::FftPlanner;
use thiserror::Error;

/// exp(2 pi i x).
pub fn e(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * x)
}

#[derive(Debug, Error)]
pub enum FourierError {
    #[error("signal must be nonempty")]
    Empty,
    #[error("signal contains a non-finite entry at position {0}")]
    NonFinite(usize),
    #[error("modulus {modulus} is smaller than the sequence length {length}")]
    ModulusTooSmall { modulus: u64, length: u64 },
}

static PLANNER: Lazy<Mutex<FftPlanner<f64>>> = Lazy::new(|| Mutex::new(FftPlanner::new()));

/// In-place unnormalized forward FFT: b(ξ) = Σ_n a(n) e(−nξ/N).
pub(crate) fn fft_forward_unnormalized(buf: &mut [Complex64]) {
    let fft = PLANNER.lock().unwrap().plan_fft_forward(buf.len());
    fft.process(buf);
}

/// In-place unnormalized inverse FFT: b(n) = Σ_ξ a(ξ) e(nξ/N).
pub(crate) fn fft_inverse_unnormalized(buf: &mut [Complex64]) {
    let fft = PLANNER.lock().unwrap().plan_fft_inverse(buf.len());
    fft.process(buf);
}

/// A finite complex signal on Z_N, indexed 0..N-1.
#[derive(Clone)]
pub struct CyclicSignal {
    values: Vec<Complex64>,
}

impl CyclicSignal {
    pub fn new(values: Vec<Complex64>) -> Result<Self, FourierError> {
        if values.is_empty() {
            return Err(FourierError::Empty);
        }
        for (i, v) in values.iter().enumerate() {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(FourierError::NonFinite(i));
            }
        }
        Ok(CyclicSignal { values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> Complex64) -> Result<Self, FourierError> {
        Self::new((0..n).map(|i| f(i)).collect())
    }

    pub fn constant(n: usize, c: Complex64) -> Result<Self, FourierError> {
        Self::new(vec![c; n])
    }

    /// Folds a `[N]`-indexed sequence (1-based) onto Z_M via n mod M.
    /// Requires M >= N so that no two indices collide; slots not hit by any
    /// index are zero.
    pub fn from_indexed_sequence(seq: &[Complex64], modulus: u64) -> Result<Self, FourierError> {
        let n = seq.len() as u64;
        if n == 0 {
            return Err(FourierError::Empty);
        }
        if modulus < n {
            return Err(FourierError::ModulusTooSmall { modulus, length: n });
        }
        let mut values = vec![Complex64::new(0.0, 0.0); modulus as usize];
        for (i, &v) in seq.iter().enumerate() {
            let idx = ((i as u64 + 1) % modulus) as usize;
            values[idx] = v;
        }
        Self::new(values)
    }

    pub fn modulus(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> Complex64 {
        self.values[idx % self.values.len()]
    }

    /// (1/N) Σ_n a(n).
    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Averaged L1 norm (1/N) Σ_n |a(n)|.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).sum::<f64>() / self.values.len() as f64
    }

    /// Averaged L2 norm ((1/N) Σ_n |a(n)|^2)^(1/2).
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// The cyclic shift a_t(n) = a(n + t).
    pub fn shifted(&self, t: usize) -> CyclicSignal {
        let n = self.values.len();
        let t = t % n;
        let mut values = Vec::with_capacity(n);
        values.extend_from_slice(&self.values[t..]);
        values.extend_from_slice(&self.values[..t]);
        CyclicSignal { values }
    }

    /// Pointwise a(n) · conj(a(n + t)), the multiplicative derivative used in
    /// the Gowers norm recursion.
    pub(crate) fn shift_conj_product(values: &[Complex64], t: usize) -> Vec<Complex64> {
        let n = values.len();
        (0..n).map(|i| values[i] * values[(i + t) % n].conj()).collect()
    }
}

/// Fourier coefficients of a signal on Z_N under the averaged transform.
#[derive(Clone)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
}

/// Analysis transform: coefficient ξ is (1/N) Σ_n a(n) e(−nξ/N).
pub fn dft(signal: &CyclicSignal) -> Spectrum {
    let n = signal.modulus();
    let mut buf = signal.values().to_vec();
    fft_forward_unnormalized(&mut buf);
    let scale = 1.0 / n as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
    Spectrum { coeffs: buf }
}

impl Spectrum {
    pub fn from_coefficients(coeffs: Vec<Complex64>) -> Result<Self, FourierError> {
        if coeffs.is_empty() {
            return Err(FourierError::Empty);
        }
        Ok(Spectrum { coeffs })
    }

    pub fn modulus(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficient(&self, xi: usize) -> Complex64 {
        self.coeffs[xi % self.coeffs.len()]
    }

    /// Synthesis transform: a(n) = Σ_ξ c(ξ) e(nξ/N).
    pub fn inverse(&self) -> CyclicSignal {
        let mut buf = self.coeffs.clone();
        fft_inverse_unnormalized(&mut buf);
        CyclicSignal { values: buf }
    }

    /// Multiplies coefficients pointwise; under the averaged transform this
    /// realizes the normalized convolution (f*g)(n) = (1/N) Σ_m f(m) g(n-m).
    pub fn pointwise_product(&self, other: &Spectrum) -> Result<Spectrum, FourierError> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(FourierError::ModulusTooSmall {
                modulus: other.coeffs.len() as u64,
                length: self.coeffs.len() as u64,
            });
        }
        Ok(Spectrum {
            coeffs: self
                .coeffs
                .iter()
                .zip(other.coeffs.iter())
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn transform_of_constant_is_delta_at_zero() {
        let sig = CyclicSignal::constant(16, Complex64::new(1.0, 0.0)).unwrap();
        let spec = dft(&sig);
        assert!(close(spec.coefficient(0), Complex64::new(1.0, 0.0), 1e-12));
        for xi in 1..16 {
            assert!(spec.coefficient(xi).norm() <= 1e-12, "leak at {xi}");
        }
    }

    #[test]
    fn transform_of_exponential_is_shifted_delta() {
        let n = 32;
        let sig = CyclicSignal::from_fn(n, |i| e(3.0 * i as f64 / n as f64)).unwrap();
        let spec = dft(&sig);
        for xi in 0..n {
            let expected = if xi == 3 { 1.0 } else { 0.0 };
            assert!(
                (spec.coefficient(xi).norm() - expected).abs() <= 1e-12,
                "coefficient {xi}"
            );
        }
    }

    #[test]
    fn indexed_sequence_folds_endpoint_to_zero() {
        let seq: Vec<Complex64> = (1..=8).map(|n| Complex64::new(n as f64, 0.0)).collect();
        let sig = CyclicSignal::from_indexed_sequence(&seq, 8).unwrap();
        // n = 8 wraps to slot 0; n = 1..7 sit at their own indices.
        assert!(close(sig.value(0), Complex64::new(8.0, 0.0), 0.0));
        assert!(close(sig.value(1), Complex64::new(1.0, 0.0), 0.0));
        assert!(close(sig.value(7), Complex64::new(7.0, 0.0), 0.0));

        let padded = CyclicSignal::from_indexed_sequence(&seq, 10).unwrap();
        assert!(close(padded.value(8), Complex64::new(8.0, 0.0), 0.0));
        assert!(padded.value(0).norm() == 0.0);
        assert!(padded.value(9).norm() == 0.0);
    }

    #[test]
    fn modulus_smaller_than_sequence_is_rejected() {
        let seq = vec![Complex64::new(1.0, 0.0); 8];
        assert!(matches!(
            CyclicSignal::from_indexed_sequence(&seq, 7),
            Err(FourierError::ModulusTooSmall { .. })
        ));
    }

    #[test]
    fn shift_rotates_left() {
        let sig = CyclicSignal::from_fn(5, |i| Complex64::new(i as f64, 0.0)).unwrap();
        let shifted = sig.shifted(2);
        assert_eq!(shifted.value(0).re, 2.0);
        assert_eq!(shifted.value(3).re, 0.0);
        assert_eq!(shifted.value(4).re, 1.0);
    }

    #[test]
    fn convolution_theorem_for_normalized_convolution() {
        let n = 24;
        let f = CyclicSignal::from_fn(n, |i| e(0.3 * i as f64) * 0.7).unwrap();
        let g = CyclicSignal::from_fn(n, |i| Complex64::new((i as f64).cos(), 0.2)).unwrap();
        let conv = CyclicSignal::from_fn(n, |i| {
            (0..n)
                .map(|m| f.value(m) * g.value((i + n - m) % n))
                .sum::<Complex64>()
                / n as f64
        })
        .unwrap();
        let lhs = dft(&conv);
        let rhs = dft(&f).pointwise_product(&dft(&g)).unwrap();
        for xi in 0..n {
            assert!(
                close(lhs.coefficient(xi), rhs.coefficient(xi), 1e-12),
                "coefficient {xi}"
            );
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..96)
        ) {
            let sig = CyclicSignal::new(
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
            ).unwrap();
            let back = dft(&sig).inverse();
            for i in 0..sig.modulus() {
                prop_assert!(close(sig.value(i), back.value(i), 1e-9));
            }
        }

        #[test]
        fn parseval_under_averaged_transform(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..96)
        ) {
            let sig = CyclicSignal::new(
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
            ).unwrap();
            // (1/N) Σ |a(n)|^2 = Σ_ξ |â(ξ)|^2.
            let time: f64 = sig.values().iter().map(|v| v.norm_sqr()).sum::<f64>()
                / sig.modulus() as f64;
            let freq: f64 = dft(&sig).coefficients().iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((time - freq).abs() <= 1e-9);
        }

        #[test]
        fn mean_is_zeroth_coefficient(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..64)
        ) {
            let sig = CyclicSignal::new(
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
            ).unwrap();
            prop_assert!(close(sig.mean(), dft(&sig).coefficient(0), 1e-12));
        }
    }
}
