//! Gowers uniformity norms U^s(Z_N).
//!
//! The norms are defined inductively: ‖a‖_{U^1} = |(1/N) Σ_n a(n)| and
//! ‖a‖_{U^{s+1}}^{2^{s+1}} = (1/N) Σ_t ‖a · conj(a_t)‖_{U^s}^{2^s} where
//! a_t(n) = a(n + t) is the cyclic shift. The U^2 case is evaluated in
//! O(N log N) through the autocorrelation, which also yields the independent
//! spectral identity ‖a‖_{U^2}^4 = Σ_ξ |â(ξ)|^4 used as a cross-check. For
//! s >= 3 the shift recursion runs over all N shifts with the inner step
//! FFT-accelerated, so the cost is O(N^{s-1} log N); degrees above a
//! configurable s_max are rejected rather than subsampled.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::fourier::{dft, fft_forward_unnormalized, CyclicSignal};
use crate::sets::{ArithmeticSet, SetError, WeightVector};
use crate::sieve::FactorTable;

/// Default bound on the norm degree; U^4 on N = 2^12 is around 10^11 FFT
/// butterflies and marks the edge of interactive use.
pub const DEFAULT_S_MAX: u32 = 4;

/// Degrees above this are refused regardless of the configured s_max.
pub const HARD_S_CAP: u32 = 6;

#[derive(Debug, Error)]
pub enum GowersError {
    #[error("the Gowers norm degree must be at least 1")]
    DegreeZero,
    #[error(
        "degree s = {s} exceeds s_max = {s_max}: the shift recursion costs \
         O(N^(s-1) log N), which is past the configured budget; raise s_max \
         explicitly (hard cap {HARD_S_CAP}) or reduce N"
    )]
    DegreeTooLarge { s: u32, s_max: u32 },
    #[error(transparent)]
    Set(#[from] SetError),
}

fn check_degree(s: u32, s_max: u32) -> Result<(), GowersError> {
    if s == 0 {
        return Err(GowersError::DegreeZero);
    }
    let cap = s_max.min(HARD_S_CAP);
    if s > cap {
        return Err(GowersError::DegreeTooLarge { s, s_max: cap });
    }
    Ok(())
}

/// ‖a‖_{U^2}^4 = (1/N) Σ_t |c(t)|^2 with c(t) = (1/N) Σ_n a(n) conj(a(n+t)),
/// evaluated with two unnormalized FFTs.
fn u2_pow(values: &[Complex64]) -> f64 {
    let n = values.len();
    let mut buf = values.to_vec();
    fft_forward_unnormalized(&mut buf);
    let mut sq: Vec<Complex64> = buf
        .iter()
        .map(|c| Complex64::new(c.norm_sqr(), 0.0))
        .collect();
    fft_forward_unnormalized(&mut sq);
    // sq[t] = Σ_ξ |A(ξ)|^2 e(−tξ/N) = N^2 c(t).
    let sum: f64 = sq.iter().map(|c| c.norm_sqr()).sum();
    sum / (n as f64).powi(5)
}

/// ‖a‖_{U^s}^{2^s} by the inductive definition.
fn u_norm_pow(values: &[Complex64], s: u32) -> f64 {
    match s {
        1 => {
            let mean = values.iter().sum::<Complex64>() / values.len() as f64;
            mean.norm_sqr()
        }
        2 => u2_pow(values),
        _ => {
            let n = values.len();
            let terms: Vec<f64> = (0..n)
                .into_par_iter()
                .map(|t| u_norm_pow(&CyclicSignal::shift_conj_product(values, t), s - 1))
                .collect();
            // Ordered sequential reduction keeps the result independent of
            // the rayon schedule.
            terms.iter().sum::<f64>() / n as f64
        }
    }
}

/// ‖signal‖_{U^s(Z_N)} with the default degree budget.
pub fn u_norm(signal: &CyclicSignal, s: u32) -> Result<f64, GowersError> {
    u_norm_with_max(signal, s, DEFAULT_S_MAX)
}

/// ‖signal‖_{U^s(Z_N)} with an explicit degree budget.
pub fn u_norm_with_max(signal: &CyclicSignal, s: u32, s_max: u32) -> Result<f64, GowersError> {
    check_degree(s, s_max)?;
    let pow = u_norm_pow(signal.values(), s).max(0.0);
    Ok(pow.powf(1.0 / (1u64 << s) as f64))
}

/// The spectral route to the U^2 norm: (Σ_ξ |â(ξ)|^4)^{1/4}.
pub fn u2_via_spectrum(signal: &CyclicSignal) -> f64 {
    let spec = dft(signal);
    let sum: f64 = spec.coefficients().iter().map(|c| c.norm_sqr().powi(2)).sum();
    sum.max(0.0).powf(0.25)
}

/// U^s(Z_M) norm of the weight zero-extended from [N] to Z_M; requires
/// M >= N.
pub fn restricted_norm(w: &WeightVector, s: u32, modulus: u64) -> Result<f64, GowersError> {
    restricted_norm_with_max(w, s, modulus, DEFAULT_S_MAX)
}

pub fn restricted_norm_with_max(
    w: &WeightVector,
    s: u32,
    modulus: u64,
    s_max: u32,
) -> Result<f64, GowersError> {
    check_degree(s, s_max)?;
    let signal = CyclicSignal::from_indexed_sequence(w.values(), modulus)
        .map_err(|_| GowersError::Set(SetError::InvalidModulus(modulus)))?;
    u_norm_with_max(&signal, s, s_max)
}

/// For each N in `n_list`, the norm ‖1_S − c‖_{U^s(Z_N)} of the centered
/// indicator, with c the exact density |A|/b for modular kinds and the
/// empirical density over [1, N] otherwise.
pub fn gowers_uniform_profile(
    set: &ArithmeticSet,
    s: u32,
    n_list: &[u64],
    table: &FactorTable,
) -> Result<Vec<(u64, f64)>, GowersError> {
    check_degree(s, DEFAULT_S_MAX)?;
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let w = WeightVector::from_centered_set(set, table, n)?;
        let signal = CyclicSignal::from_indexed_sequence(w.values(), n)
            .map_err(|_| GowersError::Set(SetError::InvalidModulus(n)))?;
        out.push((n, u_norm(&signal, s)?));
    }
    Ok(out)
}

/// Both sides of ‖a‖_{U^s}^{2^s} <= ‖a‖_∞^{2^s − 1} ‖a‖_{L^1(Z_N)}, with the
/// averaged L^1 norm.
pub fn linf_l1_bound_check(signal: &CyclicSignal, s: u32) -> Result<(f64, f64), GowersError> {
    check_degree(s, DEFAULT_S_MAX)?;
    let lhs = u_norm_pow(signal.values(), s).max(0.0);
    let exponent = (1u64 << s) as i32 - 1;
    let rhs = signal.linf_norm().powi(exponent) * signal.l1_norm();
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::e;
    use crate::multiplicative::MultiplicativeRule;
    use once_cell::sync::Lazy;
    use proptest::prelude::*;

    static TABLE: Lazy<FactorTable> = Lazy::new(|| FactorTable::build(1 << 17).unwrap());

    /// Straight inductive definition with only the s = 1 base case and no
    /// FFT anywhere; the independent oracle for the fast implementation.
    fn reference_pow(values: &[Complex64], s: u32) -> f64 {
        let n = values.len();
        if s == 1 {
            let mean = values.iter().sum::<Complex64>() / n as f64;
            return mean.norm_sqr();
        }
        let total: f64 = (0..n)
            .map(|t| {
                let prod: Vec<Complex64> =
                    (0..n).map(|i| values[i] * values[(i + t) % n].conj()).collect();
                reference_pow(&prod, s - 1)
            })
            .sum();
        total / n as f64
    }

    fn reference_norm(values: &[Complex64], s: u32) -> f64 {
        reference_pow(values, s).max(0.0).powf(1.0 / (1u64 << s) as f64)
    }

    fn random_signal(n: usize, seed: u64) -> CyclicSignal {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        CyclicSignal::from_fn(n, |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .unwrap()
    }

    fn liouville_signal(n: u64) -> CyclicSignal {
        let w = WeightVector::from_rule(&MultiplicativeRule::liouville(), &TABLE, n).unwrap();
        CyclicSignal::from_indexed_sequence(w.values(), n).unwrap()
    }

    #[test]
    fn constant_signal_has_norm_c_for_every_degree() {
        for &c in &[0.0, 0.25, 1.0] {
            let sig = CyclicSignal::constant(32, Complex64::new(c, 0.0)).unwrap();
            for s in 1..=4 {
                let v = u_norm(&sig, s).unwrap();
                assert!((v - c).abs() <= 1e-12, "s={s}, c={c}: got {v}");
            }
        }
    }

    #[test]
    fn character_has_unit_u2_and_u3_norm() {
        let n = 64;
        let sig = CyclicSignal::from_fn(n, |i| e(5.0 * i as f64 / n as f64)).unwrap();
        assert!((u_norm(&sig, 2).unwrap() - 1.0).abs() <= 1e-12);
        assert!((u_norm(&sig, 3).unwrap() - 1.0).abs() <= 1e-12);
        assert!((u2_via_spectrum(&sig) - 1.0).abs() <= 1e-12);
        // U^1 of a nontrivial character is 0.
        assert!(u_norm(&sig, 1).unwrap() <= 1e-12);
    }

    #[test]
    fn fast_path_matches_reference_definition() {
        for (i, &n) in [8usize, 12, 16, 33].iter().enumerate() {
            let sig = random_signal(n, 100 + i as u64);
            for s in 1..=4 {
                let fast = u_norm(&sig, s).unwrap();
                let slow = reference_norm(sig.values(), s);
                assert!(
                    (fast - slow).abs() <= 1e-10,
                    "N={n}, s={s}: fast {fast} vs reference {slow}"
                );
            }
        }
    }

    #[test]
    fn dual_path_agreement_on_liouville() {
        let sig = liouville_signal(1 << 14);
        let inductive = u_norm(&sig, 2).unwrap();
        let spectral = u2_via_spectrum(&sig);
        assert!(
            (inductive - spectral).abs() <= 1e-9 * inductive.max(1.0),
            "inductive {inductive} vs spectral {spectral}"
        );
    }

    #[test]
    fn degree_budget_is_enforced() {
        let sig = random_signal(16, 7);
        assert!(matches!(u_norm(&sig, 0), Err(GowersError::DegreeZero)));
        assert!(matches!(
            u_norm(&sig, 5),
            Err(GowersError::DegreeTooLarge { s: 5, s_max: 4 })
        ));
        // An explicit budget unlocks s = 5 but the hard cap still stands.
        let v5 = u_norm_with_max(&sig, 5, 5).unwrap();
        assert!((0.0..=1.01).contains(&v5));
        assert!(matches!(
            u_norm_with_max(&sig, 7, 10),
            Err(GowersError::DegreeTooLarge { s: 7, s_max: 6 })
        ));
    }

    #[test]
    fn restricted_norm_examples() {
        let n = 64;
        let ones = WeightVector::ones(n);
        let v = restricted_norm(&ones, 1, 2 * n).unwrap();
        assert!((v - 0.5).abs() <= 1e-12);

        let zeros =
            WeightVector::from_values(vec![Complex64::new(0.0, 0.0); n as usize], 1.0).unwrap();
        for s in 1..=4 {
            assert_eq!(restricted_norm(&zeros, s, 2 * n).unwrap(), 0.0);
        }
    }

    #[test]
    fn restricted_liouville_norm_decays() {
        let lam = MultiplicativeRule::liouville();
        let small = WeightVector::from_rule(&lam, &TABLE, 1 << 11).unwrap();
        let large = WeightVector::from_rule(&lam, &TABLE, 1 << 17).unwrap();
        let v_small = restricted_norm(&small, 2, 1 << 12).unwrap();
        let v_large = restricted_norm(&large, 2, 1 << 18).unwrap();
        assert!(
            v_large < v_small,
            "no decay: {v_small} at 2^11 vs {v_large} at 2^17"
        );
    }

    #[test]
    fn profile_of_periodic_set_does_not_decay() {
        let evens = ArithmeticSet::evens();
        let profile = gowers_uniform_profile(&evens, 2, &[1 << 10, 1 << 12], &TABLE).unwrap();
        for &(n, v) in &profile {
            assert!((v - 0.5).abs() <= 1e-9, "N={n}: {v}");
        }
    }

    #[test]
    fn profile_of_omega_parity_set_decays() {
        let s = ArithmeticSet::omega_mod(&[0], 2).unwrap();
        let profile = gowers_uniform_profile(&s, 2, &[1 << 11, 1 << 17], &TABLE).unwrap();
        let (v_small, v_large) = (profile[0].1, profile[1].1);
        assert!(
            v_large < 0.5 * v_small,
            "expected strong decay, got {v_small} then {v_large}"
        );
    }

    #[test]
    fn profile_of_everything_is_zero() {
        let all = ArithmeticSet::custom("all", Some(1.0), |_, _| Ok(true));
        let profile = gowers_uniform_profile(&all, 2, &[128, 256], &TABLE).unwrap();
        for &(_, v) in &profile {
            assert!(v <= 1e-12);
        }
    }

    #[test]
    fn spike_satisfies_linf_l1_bound() {
        let n = 16;
        let sig = CyclicSignal::from_fn(n, |i| {
            if i == 3 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .unwrap();
        let (lhs, rhs) = linf_l1_bound_check(&sig, 2).unwrap();
        // U^2 of a unit spike: all |â(ξ)| = 1/N, so lhs = N / N^4.
        assert!((lhs - 1.0 / (n as f64).powi(3)).abs() <= 1e-15);
        assert!((rhs - 1.0 / n as f64).abs() <= 1e-15);
        assert!(lhs <= rhs + 1e-12);

        let ones = CyclicSignal::constant(8, Complex64::new(1.0, 0.0)).unwrap();
        let (lhs, rhs) = linf_l1_bound_check(&ones, 3).unwrap();
        assert!((lhs - 1.0).abs() <= 1e-12);
        assert!((rhs - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn interval_restriction_trend_on_liouville() {
        // Lemma-style comparison: as the global uniformity norm of Liouville
        // drops with N, the norm of its restriction to the middle interval
        // J = (N/4, 3N/4] drops as well. Measured trend, not a constant.
        let mut global = Vec::new();
        let mut restricted = Vec::new();
        for &n in &[1u64 << 11, 1 << 14, 1 << 17] {
            let sig = liouville_signal(n);
            global.push(u_norm(&sig, 2).unwrap());
            let masked = CyclicSignal::from_fn(n as usize, |i| {
                if i > (n / 4) as usize && i <= (3 * n / 4) as usize {
                    sig.value(i)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .unwrap();
            restricted.push(u_norm(&masked, 2).unwrap());
        }
        assert!(global[0] > global[1] && global[1] > global[2], "{global:?}");
        assert!(
            restricted[0] > restricted[1] && restricted[1] > restricted[2],
            "{restricted:?}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn dual_path_agreement_on_random_signals(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4..128)
        ) {
            let sig = CyclicSignal::new(
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
            ).unwrap();
            let a = u_norm(&sig, 2).unwrap();
            let b = u2_via_spectrum(&sig);
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn monotone_in_degree(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4..48)
        ) {
            let sig = CyclicSignal::new(
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
            ).unwrap();
            let mut prev = u_norm(&sig, 1).unwrap();
            for s in 2..=4 {
                let cur = u_norm(&sig, s).unwrap();
                prop_assert!(prev <= cur + 1e-9, "s={s}: {prev} > {cur}");
                prev = cur;
            }
        }

        #[test]
        fn modulation_and_shift_invariance(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4..64),
            xi in 0usize..16,
            t in 0usize..16,
        ) {
            let sig = CyclicSignal::new(
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
            ).unwrap();
            let n = sig.modulus();
            let modulated = CyclicSignal::from_fn(
                n, |i| sig.value(i) * e((i * xi) as f64 / n as f64),
            ).unwrap();
            let shifted = sig.shifted(t);
            for s in 2..=3 {
                let base = u_norm(&sig, s).unwrap();
                prop_assert!((u_norm(&modulated, s).unwrap() - base).abs() <= 1e-9);
                prop_assert!((u_norm(&shifted, s).unwrap() - base).abs() <= 1e-12);
            }
            // Shifts also preserve U^1; modulation does not in general.
            prop_assert!(
                (u_norm(&shifted, 1).unwrap() - u_norm(&sig, 1).unwrap()).abs() <= 1e-12
            );
        }

        #[test]
        fn linf_l1_bound_holds(
            parts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4..64),
            s in 1u32..5,
        ) {
            let sig = CyclicSignal::new(
                parts.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
            ).unwrap();
            let (lhs, rhs) = linf_l1_bound_check(&sig, s).unwrap();
            prop_assert!(lhs <= rhs + 1e-12, "s={s}: {lhs} > {rhs}");
        }
    }
}
