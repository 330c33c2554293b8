//! Major-arc frequency sets, the associated Fejér-type kernel, and the
//! structured/uniform decomposition of bounded weights.
//!
//! For parameters Q, V >= 1 and a modulus N > 2QV, the frequency set Ξ is a
//! union of Q blocks of 2V consecutive frequencies centered near the
//! rationals p/Q. The kernel φ has spectrum φ̂(ξ) = 1 − ‖Qξ/N‖ N/(QV) on Ξ
//! and 0 elsewhere; convolving a weight with φ (in the normalized sense
//! (g*h)(n) = (1/N) Σ_m g(m) h(n−m)) projects it onto the major arcs and
//! splits it as f = f_st + f_un with f_st spectrally confined to Ξ.

use std::collections::HashSet;

use num_complex::Complex64;
use thiserror::Error;

use crate::fourier::{dft, e, CyclicSignal, Spectrum};
use crate::multiplicative::MultiplicativeRule;
use crate::sets::{SetError, WeightVector};
use crate::sieve::{is_prime_u64, FactorTable, SieveError};

#[derive(Debug, Error)]
pub enum StructureError {
    #[error("kernel parameters require Q >= 1 and V >= 1, got Q = {q}, V = {v}")]
    InvalidParams { q: u64, v: u64 },
    #[error("modulus N = {n} must exceed 2QV = {arcs} for the arc blocks to be disjoint")]
    ArcsDoNotFit { n: u64, arcs: u64 },
    #[error("weight has modulus {max}, above the unit bound assumed by the decomposition")]
    WeightExceedsUnit { max: f64 },
    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Sieve(#[from] SieveError),
}

/// Kernel parameters Q and V, with an optional label for the frequency the
/// caller has in mind.
#[derive(Clone, Debug)]
pub struct KernelParams {
    q: u64,
    v: u64,
    theta_label: Option<String>,
}

impl KernelParams {
    pub fn new(q: u64, v: u64) -> Result<Self, StructureError> {
        if q == 0 || v == 0 {
            return Err(StructureError::InvalidParams { q, v });
        }
        Ok(KernelParams {
            q,
            v,
            theta_label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.theta_label = Some(label.into());
        self
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn v(&self) -> u64 {
        self.v
    }

    pub fn theta_label(&self) -> Option<&str> {
        self.theta_label.as_deref()
    }

    fn check_modulus(&self, n: u64) -> Result<(), StructureError> {
        let arcs = 2 * self.q * self.v;
        if n <= arcs {
            return Err(StructureError::ArcsDoNotFit { n, arcs });
        }
        Ok(())
    }
}

/// The frequency set Ξ ⊂ Z_N together with its partition into Q blocks.
pub struct MajorArcs {
    n: u64,
    blocks: Vec<Vec<u64>>,
    members: HashSet<u64>,
}

impl MajorArcs {
    pub fn modulus(&self) -> u64 {
        self.n
    }

    /// Block p, the 2V frequencies near p/Q, for p = 0..Q−1.
    pub fn block(&self, p: usize) -> &[u64] {
        &self.blocks[p]
    }

    pub fn blocks(&self) -> &[Vec<u64>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, xi: u64) -> bool {
        self.members.contains(&(xi % self.n))
    }

    pub fn members(&self) -> impl Iterator<Item = u64> + '_ {
        self.blocks.iter().flatten().copied()
    }
}

/// The blocks {floor(pN/Q) + j mod N : −V < j <= V} for p = 0..Q−1.
pub fn major_arcs(n: u64, params: &KernelParams) -> Result<MajorArcs, StructureError> {
    params.check_modulus(n)?;
    let (q, v) = (params.q, params.v);
    let mut blocks = Vec::with_capacity(q as usize);
    let mut members = HashSet::new();
    for p in 0..q {
        let center = p * n / q;
        let mut block = Vec::with_capacity(2 * v as usize);
        let lo = -(v as i64) + 1;
        for j in lo..=(v as i64) {
            let xi = (center as i64 + j).rem_euclid(n as i64) as u64;
            block.push(xi);
            members.insert(xi);
        }
        blocks.push(block);
    }
    Ok(MajorArcs { n, blocks, members })
}

/// Numerator of N·‖Qξ/N‖: the distance from Qξ to the nearest multiple of N.
fn circle_dist_numerator(n: u64, q: u64, xi: u64) -> u64 {
    let r = (q as u128 * xi as u128 % n as u128) as u64;
    r.min(n - r)
}

/// The kernel spectrum: φ̂(ξ) = 1 − ‖Qξ/N‖ N/(QV) on Ξ, 0 otherwise. The
/// distance is evaluated in integer arithmetic, so on-arc values are exact
/// rationals rounded once.
pub fn kernel_spectrum(n: u64, params: &KernelParams) -> Result<Spectrum, StructureError> {
    let arcs = major_arcs(n, params)?;
    let qv = (params.q * params.v) as f64;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n as usize];
    for xi in arcs.members() {
        let dist = circle_dist_numerator(n, params.q, xi);
        coeffs[xi as usize] = Complex64::new(1.0 - dist as f64 / qv, 0.0);
    }
    Ok(Spectrum::from_coefficients(coeffs).expect("n > 0"))
}

/// The kernel in physical space, with its measured deviation from a true
/// kernel (nonnegative real, average 1).
pub struct KernelSignal {
    pub signal: CyclicSignal,
    pub min_real: f64,
    pub max_imag_abs: f64,
    pub average: Complex64,
}

pub fn kernel_signal(n: u64, params: &KernelParams) -> Result<KernelSignal, StructureError> {
    let signal = kernel_spectrum(n, params)?.inverse();
    let min_real = signal.values().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let max_imag_abs = signal.values().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let average = signal.mean();
    Ok(KernelSignal {
        signal,
        min_real,
        max_imag_abs,
        average,
    })
}

/// The splitting f = f_st + f_un of a unit-bounded weight over [N].
pub struct Decomposition {
    n: u64,
    params: KernelParams,
    original: WeightVector,
    structured: CyclicSignal,
    uniform: Vec<Complex64>,
    spectral_leakage: f64,
}

impl Decomposition {
    pub fn modulus(&self) -> u64 {
        self.n
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn original(&self) -> &WeightVector {
        &self.original
    }

    /// f_st as a signal on Z_N.
    pub fn structured_signal(&self) -> &CyclicSignal {
        &self.structured
    }

    /// f_st(n) for n ∈ [1, N].
    pub fn structured_at(&self, n: u64) -> Complex64 {
        self.structured.value((n % self.n) as usize)
    }

    /// f_un(n) for n ∈ [1, N].
    pub fn uniform_at(&self, n: u64) -> Complex64 {
        self.uniform[(n - 1) as usize]
    }

    pub fn uniform_values(&self) -> &[Complex64] {
        &self.uniform
    }

    /// max_n |f(n) − f_st(n) − f_un(n)| over [1, N].
    pub fn reconstruction_residual(&self) -> f64 {
        (1..=self.n)
            .map(|n| {
                (self.original.value(n) - self.structured_at(n) - self.uniform_at(n)).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_structured_modulus(&self) -> f64 {
        self.structured.linf_norm()
    }

    pub fn max_uniform_modulus(&self) -> f64 {
        self.uniform.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max |f̂_st(ξ)| over ξ outside Ξ.
    pub fn spectral_leakage(&self) -> f64 {
        self.spectral_leakage
    }
}

/// Splits the weight into its major-arc projection f_st = f * φ and the
/// remainder f_un = f − f_st taken pointwise on [N].
pub fn decompose(f: &WeightVector, params: &KernelParams) -> Result<Decomposition, StructureError> {
    let n = f.len();
    params.check_modulus(n)?;
    let max = f.max_modulus();
    if max > 1.0 + 1e-9 {
        return Err(StructureError::WeightExceedsUnit { max });
    }
    let arcs = major_arcs(n, params)?;
    let phi_hat = kernel_spectrum(n, params)?;
    let f_signal = CyclicSignal::from_indexed_sequence(f.values(), n)
        .expect("weight length equals modulus");
    // Under the averaged transform, pointwise spectral multiplication is the
    // normalized convolution with the kernel.
    let f_hat = dft(&f_signal);
    let st_hat = f_hat.pointwise_product(&phi_hat).expect("equal lengths");
    let structured = st_hat.inverse();

    let st_check = dft(&structured);
    let spectral_leakage = (0..n)
        .filter(|&xi| !arcs.contains(xi))
        .map(|xi| st_check.coefficient(xi as usize).norm())
        .fold(0.0, f64::max);

    let uniform: Vec<Complex64> = (1..=n)
        .map(|m| f.value(m) - structured.value((m % n) as usize))
        .collect();

    Ok(Decomposition {
        n,
        params: params.clone(),
        original: f.clone(),
        structured,
        uniform,
        spectral_leakage,
    })
}

/// The smallest prime exceeding s·N that is congruent to 1 mod Q.
pub fn next_admissible_prime(s: u64, n: u64, q: u64) -> Result<u64, StructureError> {
    if s == 0 || n == 0 || q == 0 {
        return Err(StructureError::InvalidParams { q, v: s.max(1) });
    }
    let start = s
        .checked_mul(n)
        .and_then(|sn| sn.checked_add(1))
        .ok_or(StructureError::Overflow("s * N"))?;
    let mut m = start;
    loop {
        if m % q == 1 % q && is_prime_u64(m) {
            return Ok(m);
        }
        m = m.checked_add(1).ok_or(StructureError::Overflow("prime scan"))?;
    }
}

/// Partial Fourier averages (1/N) Σ_{n<=N} f(n) e(−n ξ_N / N) at the
/// major-arc frequency ξ_N = (pN + ξ′)/Q, for each N in the increasing list.
/// The phase is reduced exactly in integer arithmetic before evaluation.
pub fn major_arc_fourier_trace(
    f: &MultiplicativeRule,
    q: u64,
    p: u64,
    xi_prime: i64,
    n_list: &[u64],
    table: &FactorTable,
) -> Result<Vec<(u64, Complex64)>, StructureError> {
    if q == 0 {
        return Err(StructureError::InvalidParams { q, v: 1 });
    }
    let mut sorted = n_list.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let max_n = *sorted.last().ok_or(StructureError::Overflow("empty N list"))?;
    if max_n > table.n_max() {
        return Err(StructureError::Sieve(SieveError::OutOfRange {
            n: max_n,
            n_max: table.n_max(),
        }));
    }
    // The frequency ξ_N moves with N, so each checkpoint needs its own pass;
    // the phase n(pN + ξ′)/(QN) is reduced mod 1 in integers to keep the
    // trigonometric argument small.
    let mut out = Vec::with_capacity(sorted.len());
    for &big_n in &sorted {
        let mut acc = Complex64::new(0.0, 0.0);
        let den = q as i128 * big_n as i128;
        let num_base = p as i128 * big_n as i128 + xi_prime as i128;
        for m in 1..=big_n {
            let num = (m as i128 * num_base).rem_euclid(den);
            let phase = num as f64 / den as f64;
            acc += f.eval(table, m)? * e(-phase);
        }
        out.push((big_n, acc / big_n as f64));
    }
    Ok(out)
}
