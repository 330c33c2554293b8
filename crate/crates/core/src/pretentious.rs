//! Halász-style pretentious distances, mean-value traces, and a heuristic
//! classifier separating aperiodic multiplicative functions from those that
//! pretend to be a twisted character chi(n) n^{it}.
//!
//! The distance is always the truncated sum
//! D²(f, g; P) = Σ_{p <= P} (1/p) (1 − Re(f(p) conj(g(p)))),
//! taken over the primes of a factor table. The classifier scans a t-grid
//! against all primitive Dirichlet characters of small modulus and compares
//! the minimum of D²(f·chi, n^{it}; P) to two thresholds: a fixed pretension
//! threshold, and a divergence threshold proportional to Σ_{p <= P} 1/p so
//! that it grows with the cutoff like the distance of a genuinely aperiodic
//! function. Verdicts are heuristic measurements, not proofs.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::characters::{CharacterError, DirichletCharacter};
use crate::multiplicative::MultiplicativeRule;
use crate::sieve::{FactorTable, SieveError};

#[derive(Debug, Error)]
pub enum PretentiousError {
    #[error(transparent)]
    Sieve(#[from] SieveError),
    #[error(transparent)]
    Character(#[from] CharacterError),
    #[error("cutoff list must be nonempty and increasing")]
    BadCutoffs,
    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),
}

/// Truncated distances D²(f, g; P) at each cutoff of an increasing list.
#[derive(Clone, Debug)]
pub struct DistanceTrace {
    pub cutoffs: Vec<u64>,
    pub partial_sums: Vec<f64>,
}

/// D²(f, g; P) = Σ_{p <= P} (1/p)(1 − Re(f(p) conj(g(p)))).
pub fn halasz_distance_sq(
    f: &MultiplicativeRule,
    g: &MultiplicativeRule,
    p_cutoff: u64,
    table: &FactorTable,
) -> Result<f64, PretentiousError> {
    Ok(halasz_distance_trace(f, g, &[p_cutoff], table)?.partial_sums[0])
}

/// The same sum reported at every checkpoint of an increasing cutoff list,
/// in a single pass over the primes.
pub fn halasz_distance_trace(
    f: &MultiplicativeRule,
    g: &MultiplicativeRule,
    cutoffs: &[u64],
    table: &FactorTable,
) -> Result<DistanceTrace, PretentiousError> {
    if cutoffs.is_empty() || cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PretentiousError::BadCutoffs);
    }
    let max = *cutoffs.last().expect("nonempty");
    if max > table.n_max() {
        return Err(PretentiousError::Sieve(SieveError::OutOfRange {
            n: max,
            n_max: table.n_max(),
        }));
    }
    let mut partial_sums = Vec::with_capacity(cutoffs.len());
    let mut acc = 0.0f64;
    let mut idx = 0usize;
    for p in table.primes() {
        while idx < cutoffs.len() && p > cutoffs[idx] {
            partial_sums.push(acc);
            idx += 1;
        }
        if p > max {
            break;
        }
        let term = 1.0 - (f.prime_value(p) * g.prime_value(p).conj()).re;
        acc += term / p as f64;
    }
    while idx < cutoffs.len() {
        partial_sums.push(acc);
        idx += 1;
    }
    Ok(DistanceTrace {
        cutoffs: cutoffs.to_vec(),
        partial_sums,
    })
}

/// Both sides of the triangle inequality
/// D(f1 f2, g1 g2) <= D(f1, g1) + D(f2, g2) on truncated sums.
pub fn triangle_residuals(
    f1: &MultiplicativeRule,
    f2: &MultiplicativeRule,
    g1: &MultiplicativeRule,
    g2: &MultiplicativeRule,
    p_cutoff: u64,
    table: &FactorTable,
) -> Result<(f64, f64), PretentiousError> {
    let lhs = halasz_distance_sq(
        &f1.pointwise_product(f2),
        &g1.pointwise_product(g2),
        p_cutoff,
        table,
    )?
    .max(0.0)
    .sqrt();
    let d1 = halasz_distance_sq(f1, g1, p_cutoff, table)?.max(0.0).sqrt();
    let d2 = halasz_distance_sq(f2, g2, p_cutoff, table)?.max(0.0).sqrt();
    Ok((lhs, d1 + d2))
}

/// Partial means (1/N) Σ_{n <= N} f(an + b) at each checkpoint of the
/// increasing list.
pub fn mean_value_trace(
    f: &MultiplicativeRule,
    a: u64,
    b: u64,
    n_list: &[u64],
    table: &FactorTable,
) -> Result<Vec<(u64, Complex64)>, PretentiousError> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || a == 0 {
        return Err(PretentiousError::BadCutoffs);
    }
    let max_n = *n_list.last().expect("nonempty");
    let max_arg = a
        .checked_mul(max_n)
        .and_then(|an| an.checked_add(b))
        .ok_or(PretentiousError::Overflow("a * N + b"))?;
    if max_arg > table.n_max() {
        return Err(PretentiousError::Sieve(SieveError::OutOfRange {
            n: max_arg,
            n_max: table.n_max(),
        }));
    }
    let mut out = Vec::with_capacity(n_list.len());
    let mut acc = Complex64::new(0.0, 0.0);
    let mut idx = 0usize;
    for n in 1..=max_n {
        acc += f.eval(table, a * n + b)?;
        if n == n_list[idx] {
            out.push((n, acc / n as f64));
            idx += 1;
        }
    }
    Ok(out)
}

/// Scan configuration for [`classify`].
#[derive(Clone, Debug)]
pub struct ClassifyOptions {
    pub t_min: f64,
    pub t_max: f64,
    pub t_step: f64,
    /// Characters: all primitive characters of modulus <= q_max, plus the
    /// trivial character (as the primitive character mod 1).
    pub q_max: u64,
    pub prime_cutoff: u64,
    /// Pretentious when the minimal D² is at or below this value.
    pub pretentious_threshold: f64,
    /// Aperiodic evidence when the minimal D² exceeds this fraction of
    /// Σ_{p <= P} 1/p, the distance scale of a function with no correlation
    /// to any scanned target; the realized threshold grows with the cutoff.
    pub divergence_fraction: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            t_min: -4.0,
            t_max: 4.0,
            t_step: 0.01,
            q_max: 12,
            prime_cutoff: 1_000_000,
            pretentious_threshold: 1.0,
            divergence_fraction: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pretentious,
    AperiodicEvidence,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Pretentious => write!(f, "pretentious"),
            Verdict::AperiodicEvidence => write!(f, "aperiodic-evidence"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Outcome of a classification scan, with enough witness data to reproduce
/// the verdict from the recorded grid.
#[derive(Clone, Debug)]
pub struct Classification {
    pub verdict: Verdict,
    pub min_distance_sq: f64,
    pub best_t: f64,
    pub best_character: String,
    pub pretentious_threshold: f64,
    /// The realized divergence threshold, divergence_fraction · Σ 1/p.
    pub divergence_threshold: f64,
    /// Whether f(2^k) = −2^{ik t} held for all k <= 40 at the witness t;
    /// only evaluated for pretentious verdicts.
    pub two_power_condition: Option<bool>,
    pub grid_points: u64,
    pub options: ClassifyOptions,
}

/// Scans D²(f·chi, n^{it}; P) over the (t, chi) grid and reports the closest
/// pretentious target or evidence of aperiodicity. Degenerate grids yield an
/// inconclusive verdict rather than an error.
pub fn classify(
    f: &MultiplicativeRule,
    table: &FactorTable,
    options: &ClassifyOptions,
) -> Result<Classification, PretentiousError> {
    if options.prime_cutoff > table.n_max() {
        return Err(PretentiousError::Sieve(SieveError::OutOfRange {
            n: options.prime_cutoff,
            n_max: table.n_max(),
        }));
    }
    let primes: Vec<u64> = table
        .primes()
        .take_while(|&p| p <= options.prime_cutoff)
        .collect();
    let base: f64 = primes.iter().map(|&p| 1.0 / p as f64).sum();
    let divergence_threshold = options.divergence_fraction * base;

    let mut characters: Vec<DirichletCharacter> = Vec::new();
    for q in 1..=options.q_max {
        characters.extend(DirichletCharacter::primitive_mod(q)?);
    }

    let grid_len = if options.t_step > 0.0 && options.t_max >= options.t_min {
        ((options.t_max - options.t_min) / options.t_step).floor() as usize + 1
    } else {
        0
    };

    if grid_len == 0 || characters.is_empty() || primes.is_empty() {
        return Ok(Classification {
            verdict: Verdict::Inconclusive,
            min_distance_sq: f64::INFINITY,
            best_t: f64::NAN,
            best_character: "none".into(),
            pretentious_threshold: options.pretentious_threshold,
            divergence_threshold,
            two_power_condition: None,
            grid_points: 0,
            options: options.clone(),
        });
    }

    // Per character, the prime data of f(p) chi(p) scaled by 1/p; per grid
    // point only the dot product with (cos(t ln p), sin(t ln p)) remains.
    let char_data: Vec<Vec<(f64, f64)>> = characters
        .iter()
        .map(|chi| {
            primes
                .iter()
                .map(|&p| {
                    let w = f.prime_value(p) * chi.value(p);
                    (w.re / p as f64, w.im / p as f64)
                })
                .collect()
        })
        .collect();
    let log_primes: Vec<f64> = primes.iter().map(|&p| (p as f64).ln()).collect();

    // Each grid point computes its own sincos table, shared across all
    // characters; results are collected in grid order and reduced
    // sequentially so the scan is deterministic under parallel scheduling.
    let per_t: Vec<(f64, usize)> = (0..grid_len)
        .into_par_iter()
        .map(|k| {
            let t = options.t_min + k as f64 * options.t_step;
            let trig: Vec<(f64, f64)> = log_primes.iter().map(|&l| (t * l).sin_cos()).collect();
            let mut best = (f64::INFINITY, 0usize);
            for (ci, data) in char_data.iter().enumerate() {
                let mut corr = 0.0f64;
                for ((a, b), (s, c)) in data.iter().zip(trig.iter()) {
                    corr += a * c + b * s;
                }
                let d2 = base - corr;
                if d2 < best.0 {
                    best = (d2, ci);
                }
            }
            best
        })
        .collect();

    let mut min_distance_sq = f64::INFINITY;
    let mut best_k = 0usize;
    let mut best_ci = 0usize;
    for (k, &(d2, ci)) in per_t.iter().enumerate() {
        if d2 < min_distance_sq {
            min_distance_sq = d2;
            best_k = k;
            best_ci = ci;
        }
    }
    let best_t = options.t_min + best_k as f64 * options.t_step;
    let best_character = characters[best_ci].label().to_string();

    let verdict = if min_distance_sq <= options.pretentious_threshold {
        Verdict::Pretentious
    } else if min_distance_sq > divergence_threshold {
        Verdict::AperiodicEvidence
    } else {
        Verdict::Inconclusive
    };

    let two_power_condition = if verdict == Verdict::Pretentious {
        let ln2 = std::f64::consts::LN_2;
        let ok = (1..=40u32).all(|k| {
            let target = -Complex64::from_polar(1.0, k as f64 * best_t * ln2);
            (f.eval_prime_power(2, k) - target).norm() <= 1e-9
        });
        Some(ok)
    } else {
        None
    };

    Ok(Classification {
        verdict,
        min_distance_sq,
        best_t,
        best_character,
        pretentious_threshold: options.pretentious_threshold,
        divergence_threshold,
        two_power_condition,
        grid_points: grid_len as u64,
        options: options.clone(),
    })
}
