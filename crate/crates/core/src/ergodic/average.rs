//! Weighted multiple ergodic averages, recurrence scans, and the
//! experiments that compare dynamical averages against norm bounds.

use num_complex::Complex64;
use rayon::prelude::*;

use super::system::{FiniteSystem, IntPolynomial, Observable, PolynomialMatrix};
use super::ErgodicError;
use crate::fourier::e;
use crate::gowers::{restricted_norm, HARD_S_CAP};
use crate::sets::{ArithmeticSet, WeightVector};
use crate::sieve::FactorTable;
use crate::structure::Decomposition;

/// Largest lcm of map orders for which averages are folded over residue
/// classes mod that lcm instead of summed term by term. The iterate of
/// every point depends on n only through n mod the lcm, so the fold is
/// exact, not an approximation.
const RESIDUE_CLASS_LIMIT: u64 = 1 << 16;

/// Residue counting is used only while `lcm * |X| * columns` stays below
/// this, keeping the precomputation comparable to one direct pass.
const RESIDUE_WORK_LIMIT: u128 = 1 << 28;

/// Terms per parallel task on the direct summation path.
const DIRECT_BLOCK: u64 = 4096;

/// The averaged function `A_N(x) = (1/N) sum_{n<=N} w(n) prod_j F_j(T^{e_j(n)} x)`
/// together with its mean and L2 norm under the uniform measure.
#[derive(Clone)]
pub struct WeightedAverage {
    function: Vec<Complex64>,
    mean: Complex64,
    l2_norm: f64,
    n: u64,
}

impl std::fmt::Debug for WeightedAverage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "WeightedAverage(n = {}, mean = {:.6} + {:.6}i, l2 = {:.6})",
            self.n, self.mean.re, self.mean.im, self.l2_norm
        )
    }
}

impl WeightedAverage {
    pub fn function(&self) -> &[Complex64] {
        &self.function
    }

    pub fn value(&self, x: usize) -> Complex64 {
        self.function[x]
    }

    pub fn mean(&self) -> Complex64 {
        self.mean
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// Exponent of one map for one observable at a fixed n: either already
/// reduced mod the map order, or a polynomial evaluated per cycle length.
#[derive(Clone, Copy)]
enum ExpSpec<'a> {
    Fixed(i64),
    Poly(&'a IntPolynomial, i64),
}

fn build_exps<'a>(
    polys: &'a PolynomialMatrix,
    orders: &[Option<u64>],
    n: i64,
) -> Vec<Vec<ExpSpec<'a>>> {
    (0..polys.num_rows())
        .map(|i| {
            (0..polys.num_cols())
                .map(|j| match orders[i] {
                    Some(ord) => ExpSpec::Fixed(polys.get(i, j).eval_mod(n, ord) as i64),
                    None => ExpSpec::Poly(polys.get(i, j), n),
                })
                .collect()
        })
        .collect()
}

fn column_point(sys: &FiniteSystem, exps: &[Vec<ExpSpec>], j: usize, x: usize) -> usize {
    let mut y = x;
    for (i, map) in sys.maps().iter().enumerate() {
        y = match exps[i][j] {
            ExpSpec::Fixed(e) => map.power_apply(e, y),
            ExpSpec::Poly(p, n) => map.power_apply_poly(p, n, y),
        };
    }
    y
}

fn product_value(
    sys: &FiniteSystem,
    obs: &[Observable],
    exps: &[Vec<ExpSpec>],
    x: usize,
) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    for (j, f) in obs.iter().enumerate() {
        prod *= f.value(column_point(sys, exps, j, x));
    }
    prod
}

fn check_shapes(
    sys: &FiniteSystem,
    polys: &PolynomialMatrix,
    obs: &[Observable],
) -> Result<(), ErgodicError> {
    if polys.num_rows() != sys.num_maps() {
        return Err(ErgodicError::DimensionMismatch(format!(
            "{} polynomial rows for {} maps",
            polys.num_rows(),
            sys.num_maps()
        )));
    }
    if polys.num_cols() != obs.len() {
        return Err(ErgodicError::DimensionMismatch(format!(
            "{} polynomial columns for {} observables",
            polys.num_cols(),
            obs.len()
        )));
    }
    for f in obs {
        if f.len() != sys.size() {
            return Err(ErgodicError::DimensionMismatch(format!(
                "observable on {} points in a system of {} points",
                f.len(),
                sys.size()
            )));
        }
    }
    Ok(())
}

fn map_orders(sys: &FiniteSystem) -> Vec<Option<u64>> {
    sys.maps().iter().map(|m| m.order()).collect()
}

/// lcm of all map orders when every order is known and the lcm fits.
fn order_lcm(orders: &[Option<u64>]) -> Option<u64> {
    let mut l: u64 = 1;
    for ord in orders {
        let o = (*ord)?;
        let g = gcd(l, o);
        l = l.checked_mul(o / g)?;
    }
    Some(l)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `(1/N) sum_{n=1}^N w(n) prod_j (prod_i T_i^{p_{i,j}(n)}) F_j`.
///
/// When the lcm L of the map orders is small the sum is folded exactly over
/// residue classes mod L; otherwise terms are summed in fixed blocks of n.
/// Both paths add partial sums in a fixed order, so repeated runs give
/// byte-identical results.
pub fn weighted_average(
    sys: &FiniteSystem,
    polys: &PolynomialMatrix,
    obs: &[Observable],
    w: &WeightVector,
    n: u64,
) -> Result<WeightedAverage, ErgodicError> {
    weighted_average_impl(sys, polys, obs, w, n, true)
}

fn weighted_average_impl(
    sys: &FiniteSystem,
    polys: &PolynomialMatrix,
    obs: &[Observable],
    w: &WeightVector,
    n: u64,
    allow_residue_fold: bool,
) -> Result<WeightedAverage, ErgodicError> {
    check_shapes(sys, polys, obs)?;
    if n == 0 || n > w.len() {
        return Err(ErgodicError::DimensionMismatch(format!(
            "average over [1, {n}] with {} weights",
            w.len()
        )));
    }
    let size = sys.size();
    let orders = map_orders(sys);
    let lcm = order_lcm(&orders);

    let residue_fold = allow_residue_fold
        && match lcm {
            Some(l) => {
                l <= RESIDUE_CLASS_LIMIT
                    && l <= n
                    && (l as u128) * (size as u128) * (polys.num_cols() as u128)
                        <= RESIDUE_WORK_LIMIT
            }
            None => false,
        };

    let mut acc = vec![Complex64::new(0.0, 0.0); size];
    if residue_fold {
        let l = lcm.unwrap() as usize;
        let mut class_weights = vec![Complex64::new(0.0, 0.0); l];
        for (idx, &value) in w.values()[..n as usize].iter().enumerate() {
            class_weights[(idx + 1) % l] += value;
        }
        for (r, &wr) in class_weights.iter().enumerate() {
            if wr.norm_sqr() == 0.0 {
                continue;
            }
            let exps = build_exps(polys, &orders, r as i64);
            if size >= 1 << 14 {
                acc.par_iter_mut().enumerate().for_each(|(x, slot)| {
                    *slot += wr * product_value(sys, obs, &exps, x);
                });
            } else {
                for (x, slot) in acc.iter_mut().enumerate() {
                    *slot += wr * product_value(sys, obs, &exps, x);
                }
            }
        }
    } else {
        let mut starts = Vec::new();
        let mut start = 1u64;
        while start <= n {
            starts.push(start);
            start += DIRECT_BLOCK;
        }
        // Blocks are buffered in bounded groups so peak memory stays near
        // 64 MiB regardless of N and |X|.
        let blocks_per_group = ((1usize << 22) / size.max(1)).clamp(1, 64);
        for group in starts.chunks(blocks_per_group) {
            let partials: Vec<Vec<Complex64>> = group
                .par_iter()
                .map(|&block_start| {
                    let block_end = (block_start + DIRECT_BLOCK - 1).min(n);
                    let mut local = vec![Complex64::new(0.0, 0.0); size];
                    for m in block_start..=block_end {
                        let wm = w.value(m);
                        if wm.norm_sqr() == 0.0 {
                            continue;
                        }
                        let exps = build_exps(polys, &orders, m as i64);
                        for (x, slot) in local.iter_mut().enumerate() {
                            *slot += wm * product_value(sys, obs, &exps, x);
                        }
                    }
                    local
                })
                .collect();
            for partial in partials {
                for (a, b) in acc.iter_mut().zip(partial) {
                    *a += b;
                }
            }
        }
    }

    let scale = 1.0 / n as f64;
    let function: Vec<Complex64> = acc.into_iter().map(|z| z * scale).collect();
    let mean = function.iter().sum::<Complex64>() / size as f64;
    let l2_norm = (function.iter().map(|z| z.norm_sqr()).sum::<f64>() / size as f64).sqrt();
    Ok(WeightedAverage {
        function,
        mean,
        l2_norm,
        n,
    })
}

/// L2 gap between the average restricted to `S` and the density-scaled full
/// average: the weighted average with weights `1_S(n) - d(S)`.
pub fn restricted_vs_scaled(
    sys: &FiniteSystem,
    polys: &PolynomialMatrix,
    obs: &[Observable],
    set: &ArithmeticSet,
    table: &FactorTable,
    n: u64,
) -> Result<f64, ErgodicError> {
    let density = set.limiting_density().ok_or_else(|| {
        crate::sets::SetError::UnknownDensity(set.label().to_string())
    })?;
    let mut values = Vec::with_capacity(n as usize);
    for m in 1..=n {
        let ind = if set.indicator(table, m)? { 1.0 } else { 0.0 };
        values.push(Complex64::new(ind - density, 0.0));
    }
    let w = WeightVector::from_values(values, 1.0)?;
    Ok(weighted_average(sys, polys, obs, &w, n)?.l2_norm())
}

/// Exact measure of `A ∩ (prod_i T_i^{p_{i,1}(n)})A ∩ .. ∩ (prod_i T_i^{p_{i,m}(n)})A`
/// under the uniform measure.
pub fn intersection_measure(
    sys: &FiniteSystem,
    polys: &PolynomialMatrix,
    a_points: &[usize],
    n: i64,
) -> Result<f64, ErgodicError> {
    if polys.num_rows() != sys.num_maps() {
        return Err(ErgodicError::DimensionMismatch(format!(
            "{} polynomial rows for {} maps",
            polys.num_rows(),
            sys.num_maps()
        )));
    }
    let mask = membership_mask(sys, a_points)?;
    let neg = negated_matrix(polys)?;
    let orders = map_orders(sys);
    let exps = build_exps(&neg, &orders, n);
    let count = intersect_count(sys, &mask, &exps);
    Ok(count as f64 / sys.size() as f64)
}

fn membership_mask(sys: &FiniteSystem, a_points: &[usize]) -> Result<Vec<bool>, ErgodicError> {
    if a_points.is_empty() {
        return Err(ErgodicError::EmptyMeasure);
    }
    let mut mask = vec![false; sys.size()];
    for &p in a_points {
        if p >= sys.size() {
            return Err(ErgodicError::DimensionMismatch(format!(
                "set point {p} out of range for {} points",
                sys.size()
            )));
        }
        mask[p] = true;
    }
    Ok(mask)
}

/// x lies in the image set `T^e A` exactly when `T^{-e} x` lies in `A`, so
/// the intersection is counted through the negated exponent matrix.
fn negated_matrix(polys: &PolynomialMatrix) -> Result<PolynomialMatrix, ErgodicError> {
    let mut rows = Vec::with_capacity(polys.num_rows());
    for i in 0..polys.num_rows() {
        let mut row = Vec::with_capacity(polys.num_cols());
        for j in 0..polys.num_cols() {
            let coeffs: Option<Vec<i64>> = polys
                .get(i, j)
                .coefficients()
                .iter()
                .map(|&c| c.checked_neg())
                .collect();
            let coeffs = coeffs.ok_or(ErgodicError::Overflow("polynomial negation"))?;
            row.push(IntPolynomial::new(coeffs));
        }
        rows.push(row);
    }
    PolynomialMatrix::from_rows(rows)
}

fn intersect_count(sys: &FiniteSystem, mask: &[bool], exps: &[Vec<ExpSpec>]) -> usize {
    let cols = exps[0].len();
    (0..sys.size())
        .filter(|&x| mask[x] && (0..cols).all(|j| mask[column_point(sys, exps, j, x)]))
        .count()
}

/// Result of scanning `n = 1..N` for times of multiple recurrence inside an
/// arithmetic set of integers.
#[derive(Clone, Debug)]
pub struct RecurrenceScan {
    good: Vec<u64>,
    scanned: u64,
    base_measure: f64,
    density: f64,
    lower_density: f64,
}

impl RecurrenceScan {
    /// Good times in increasing order; n = 0 is never scanned.
    pub fn good(&self) -> &[u64] {
        &self.good
    }

    pub fn contains(&self, n: u64) -> bool {
        self.good.binary_search(&n).is_ok()
    }

    pub fn scanned(&self) -> u64 {
        self.scanned
    }

    /// Measure of the base set `A`.
    pub fn base_measure(&self) -> f64 {
        self.base_measure
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    /// `inf over M >= N/2 of |good ∩ [M]| / M`, a finite-scale stand-in for
    /// lower density.
    pub fn lower_density(&self) -> f64 {
        self.lower_density
    }
}

/// Scans `n ∈ S ∩ [1, N]` for `μ(A ∩ T^{p_1(n)}A ∩ ..) > 0`, counting each
/// intersection exactly. Requires every polynomial to vanish at 0.
pub fn recurrence_scan(
    sys: &FiniteSystem,
    polys: &PolynomialMatrix,
    a_points: &[usize],
    set: &ArithmeticSet,
    table: &FactorTable,
    n: u64,
) -> Result<RecurrenceScan, ErgodicError> {
    if polys.num_rows() != sys.num_maps() {
        return Err(ErgodicError::DimensionMismatch(format!(
            "{} polynomial rows for {} maps",
            polys.num_rows(),
            sys.num_maps()
        )));
    }
    if n == 0 {
        return Err(ErgodicError::DimensionMismatch(
            "recurrence scan needs N >= 1".into(),
        ));
    }
    if let Some((row, col)) = polys.nonzero_constant_entry() {
        return Err(ErgodicError::ZeroConstantRequired { row, col });
    }
    let mask = membership_mask(sys, a_points)?;
    let neg = negated_matrix(polys)?;
    let orders = map_orders(sys);
    let lcm = order_lcm(&orders);
    let size = sys.size();

    // With known orders the count depends on n only mod their lcm, so one
    // table of L counts answers every query.
    let class_counts: Option<Vec<usize>> = match lcm {
        Some(l)
            if l <= RESIDUE_CLASS_LIMIT
                && (l as u128) * (size as u128) * (polys.num_cols() as u128)
                    <= RESIDUE_WORK_LIMIT =>
        {
            Some(
                (0..l)
                    .map(|r| {
                        let exps = build_exps(&neg, &orders, r as i64);
                        intersect_count(sys, &mask, &exps)
                    })
                    .collect(),
            )
        }
        _ => None,
    };

    let mut good = Vec::new();
    for m in 1..=n {
        if !set.indicator(table, m)? {
            continue;
        }
        let count = match &class_counts {
            Some(counts) => counts[(m % lcm.unwrap()) as usize],
            None => {
                let exps = build_exps(&neg, &orders, m as i64);
                intersect_count(sys, &mask, &exps)
            }
        };
        if count > 0 {
            good.push(m);
        }
    }

    let density = good.len() as f64 / n as f64;
    let mut lower_density = f64::INFINITY;
    let mut idx = 0usize;
    for m in n.div_ceil(2)..=n {
        while idx < good.len() && good[idx] <= m {
            idx += 1;
        }
        lower_density = lower_density.min(idx as f64 / m as f64);
    }
    let base_measure = mask.iter().filter(|&&b| b).count() as f64 / size as f64;
    Ok(RecurrenceScan {
        good,
        scanned: n,
        base_measure,
        density,
        lower_density,
    })
}

/// The degree table used by default: one more than the maximum polynomial
/// degree, clamped to `[2, HARD_S_CAP]`. Linear systems get s = 2 and
/// quadratic systems s = 3.
pub fn default_uniformity_degree(polys: &PolynomialMatrix) -> u32 {
    (polys.max_degree() as u32 + 1).clamp(2, HARD_S_CAP)
}

/// Records the pair (L2 norm of the weighted average, restricted Gowers
/// norm of the weight in `Z_{sN}`) for ratio studies. No bound between the
/// two is asserted because the comparison constant is not quantified.
pub fn uniformity_bound_experiment(
    sys: &FiniteSystem,
    polys: &PolynomialMatrix,
    obs: &[Observable],
    w: &WeightVector,
    s: u32,
    n: u64,
) -> Result<(f64, f64), ErgodicError> {
    let lhs = weighted_average(sys, polys, obs, w, n)?.l2_norm();
    let modulus = (s as u64)
        .checked_mul(n)
        .ok_or(ErgodicError::Overflow("restricted norm modulus"))?;
    let rhs = restricted_norm(&w.truncated(n)?, s, modulus)?;
    Ok((lhs, rhs))
}

/// Compares `(1/N) sum_{n<=N} e(nα/Ñ)` with the integral
/// `c = (1/β)∫_0^β e(αy) dy`, where `Ñ = N/β` must be an integer. Returns
/// `(empirical_mean, c)`.
pub fn partial_summation_check(
    alpha: f64,
    beta_num: u64,
    beta_den: u64,
    n: u64,
) -> Result<(Complex64, Complex64), ErgodicError> {
    if !alpha.is_finite() {
        return Err(ErgodicError::DimensionMismatch("alpha must be finite".into()));
    }
    if beta_num == 0 || beta_den == 0 || beta_num > beta_den {
        return Err(ErgodicError::DimensionMismatch(format!(
            "beta = {beta_num}/{beta_den} must lie in (0, 1]"
        )));
    }
    if n == 0 {
        return Err(ErgodicError::DimensionMismatch(
            "partial summation needs N >= 1".into(),
        ));
    }
    let span = n
        .checked_mul(beta_den)
        .ok_or(ErgodicError::Overflow("N / beta"))?;
    if span % beta_num != 0 {
        return Err(ErgodicError::BetaNotRealizable {
            num: beta_num,
            den: beta_den,
            n,
        });
    }
    let n_tilde = (span / beta_num) as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for m in 1..=n {
        sum += e(alpha * m as f64 / n_tilde);
    }
    let empirical = sum / n as f64;

    let predicted = if alpha == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        let ab = alpha * beta_num as f64 / beta_den as f64;
        (e(ab) - Complex64::new(1.0, 0.0)) / Complex64::new(0.0, std::f64::consts::TAU * ab)
    };
    Ok((empirical, predicted))
}

/// Weighted averages of one system at several truncation points.
#[derive(Clone, Debug)]
pub struct AverageTrace {
    n_list: Vec<u64>,
    averages: Vec<WeightedAverage>,
}

impl AverageTrace {
    pub fn len(&self) -> usize {
        self.n_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_list.is_empty()
    }

    pub fn n_list(&self) -> &[u64] {
        &self.n_list
    }

    pub fn averages(&self) -> &[WeightedAverage] {
        &self.averages
    }

    pub fn means(&self) -> Vec<Complex64> {
        self.averages.iter().map(|a| a.mean()).collect()
    }

    pub fn l2_norms(&self) -> Vec<f64> {
        self.averages.iter().map(|a| a.l2_norm()).collect()
    }

    /// Largest |mean(N_{k+1}) - mean(N_k)| between consecutive entries.
    pub fn max_successive_mean_gap(&self) -> f64 {
        self.averages
            .windows(2)
            .map(|pair| (pair[1].mean() - pair[0].mean()).norm())
            .fold(0.0, f64::max)
    }
}

/// Averages weighted by the structured part of a decomposition at each
/// truncation point in `n_list`.
pub fn structured_weight_average(
    sys: &FiniteSystem,
    polys: &PolynomialMatrix,
    obs: &[Observable],
    dec: &Decomposition,
    n_list: &[u64],
) -> Result<AverageTrace, ErgodicError> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ErgodicError::DimensionMismatch(
            "n_list must be nonempty and strictly increasing".into(),
        ));
    }
    let max_n = *n_list.last().unwrap();
    if max_n > dec.modulus() {
        return Err(ErgodicError::DimensionMismatch(format!(
            "trace point {} exceeds the decomposition span {}",
            max_n,
            dec.modulus()
        )));
    }
    let cap = dec.max_structured_modulus().max(1.0);
    let mut averages = Vec::with_capacity(n_list.len());
    for &nk in n_list {
        let values: Vec<Complex64> = (1..=nk).map(|m| dec.structured_at(m)).collect();
        let w = WeightVector::from_values(values, cap)?;
        averages.push(weighted_average(sys, polys, obs, &w, nk)?);
    }
    Ok(AverageTrace {
        n_list: n_list.to_vec(),
        averages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiplicative::MultiplicativeRule;
    use crate::structure::{decompose, kernel_spectrum, KernelParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rotation(m: u64, shift: i64) -> FiniteSystem {
        FiniteSystem::make_product_rotation(&[m], &[vec![shift]]).unwrap()
    }

    fn indicator_zero(sys: &FiniteSystem) -> Observable {
        Observable::indicator(sys.size(), &[0]).unwrap()
    }

    fn random_weights(len: usize, seed: u64) -> WeightVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        WeightVector::from_values(values, 2.0).unwrap()
    }

    #[test]
    fn rotation_average_of_indicator_is_density() {
        // On Z_2 with w = 1 each point sees the state 0 exactly N/2 times.
        let sys = rotation(2, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let obs = [indicator_zero(&sys)];
        let avg =
            weighted_average(&sys, &polys, &obs, &WeightVector::ones(100_000), 100_000).unwrap();
        for x in 0..sys.size() {
            assert!((avg.value(x).re - 0.5).abs() <= 1e-12);
            assert!(avg.value(x).im.abs() <= 1e-12);
        }
        assert!((avg.mean().re - 0.5).abs() <= 1e-12);
        assert!((avg.l2_norm() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn orbit_average_matches_closed_form() {
        // N a multiple of the orbit period makes the ergodic average equal
        // the orbit mean exactly.
        let sys = rotation(5, 2);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values: Vec<Complex64> = (0..5)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let orbit_mean = values.iter().sum::<Complex64>() / 5.0;
        let obs = [Observable::new(values, 2.0).unwrap()];
        let avg = weighted_average(&sys, &polys, &obs, &WeightVector::ones(100), 100).unwrap();
        for x in 0..5 {
            assert!((avg.value(x) - orbit_mean).norm() <= 1e-12);
        }
    }

    #[test]
    fn zero_weights_give_zero_average() {
        let sys = rotation(6, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::square());
        let obs = [indicator_zero(&sys)];
        let w = WeightVector::from_values(vec![Complex64::new(0.0, 0.0); 500], 1.0).unwrap();
        let avg = weighted_average(&sys, &polys, &obs, &w, 500).unwrap();
        assert_eq!(avg.l2_norm(), 0.0);
        assert_eq!(avg.mean(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn residue_fold_matches_direct_summation() {
        let sys =
            FiniteSystem::make_product_rotation(&[6], &[vec![1], vec![2]]).unwrap();
        let polys = PolynomialMatrix::from_rows(vec![
            vec![IntPolynomial::linear(), IntPolynomial::square()],
            vec![IntPolynomial::monomial(2, 1), IntPolynomial::linear()],
        ])
        .unwrap();
        let f1 = Observable::from_fn(6, 1.0, |x| e(x as f64 / 6.0)).unwrap();
        let f2 = Observable::indicator(6, &[0, 3]).unwrap();
        let obs = [f1, f2];
        let w = random_weights(5000, 42);
        let folded = weighted_average_impl(&sys, &polys, &obs, &w, 5000, true).unwrap();
        let direct = weighted_average_impl(&sys, &polys, &obs, &w, 5000, false).unwrap();
        for x in 0..6 {
            assert!((folded.value(x) - direct.value(x)).norm() <= 1e-9);
        }
        assert!((folded.l2_norm() - direct.l2_norm()).abs() <= 1e-9);
    }

    #[test]
    fn shape_mismatches_are_rejected() {
        let sys = rotation(4, 1);
        let polys = PolynomialMatrix::column(IntPolynomial::linear(), 2).unwrap();
        let obs = [indicator_zero(&sys)];
        assert!(matches!(
            weighted_average(&sys, &polys, &obs, &WeightVector::ones(10), 10),
            Err(ErgodicError::DimensionMismatch(_))
        ));
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let short = Observable::indicator(3, &[0]).unwrap();
        assert!(weighted_average(&sys, &polys, &[short], &WeightVector::ones(10), 10).is_err());
        assert!(
            weighted_average(&sys, &polys, &obs, &WeightVector::ones(10), 11).is_err()
        );
    }

    #[test]
    fn liouville_average_on_skew_product_decays() {
        let table = FactorTable::build(1 << 16).unwrap();
        let lambda = MultiplicativeRule::liouville();
        let sys = FiniteSystem::make_skew_product(16, 1).unwrap();
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let m = 16u64;
        let obs =
            [Observable::from_fn(sys.size(), 1.0, |p| e((p as u64 / m) as f64 / m as f64))
                .unwrap()];
        let w = WeightVector::from_rule(&lambda, &table, 1 << 16).unwrap();
        let norms: Vec<f64> = [1u64 << 12, 1 << 14, 1 << 16]
            .iter()
            .map(|&nk| weighted_average(&sys, &polys, &obs, &w, nk).unwrap().l2_norm())
            .collect();
        assert!(norms[1] < norms[0]);
        assert!(norms[2] < norms[1]);
        assert!(norms[2] < 0.05);
    }

    #[test]
    fn evens_against_scaled_average_resonates() {
        // 1_evens - 1/2 aligns with the period-2 rotation: the gap is
        // exactly 1/4 at even N.
        let table = FactorTable::build(10_000).unwrap();
        let sys = rotation(2, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let obs = [indicator_zero(&sys)];
        let gap = restricted_vs_scaled(
            &sys,
            &polys,
            &obs,
            &ArithmeticSet::evens(),
            &table,
            10_000,
        )
        .unwrap();
        assert!((gap - 0.25).abs() <= 1e-9);
    }

    #[test]
    fn omega_parity_set_tracks_scaled_average() {
        let table = FactorTable::build(100_000).unwrap();
        let sys = FiniteSystem::make_product_rotation(&[7], &[vec![1], vec![2]]).unwrap();
        let polys = PolynomialMatrix::column(IntPolynomial::linear(), 2).unwrap();
        let obs = [indicator_zero(&sys)];
        let set = ArithmeticSet::omega_mod(&[0], 2).unwrap();
        let gap = restricted_vs_scaled(&sys, &polys, &obs, &set, &table, 100_000).unwrap();
        assert!(gap < 0.01, "gap = {gap}");
    }

    #[test]
    fn full_set_has_zero_gap() {
        let table = FactorTable::build(1000).unwrap();
        let sys = rotation(5, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let obs = [indicator_zero(&sys)];
        let all = ArithmeticSet::omega_mod(&[0], 1).unwrap();
        let gap = restricted_vs_scaled(&sys, &polys, &obs, &all, &table, 1000).unwrap();
        assert!(gap <= 1e-12);
    }

    #[test]
    fn intersection_measure_examples() {
        let sys = rotation(6, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let measure = |n: i64| intersection_measure(&sys, &polys, &[0], n).unwrap();
        assert!((measure(6) - 1.0 / 6.0).abs() <= 1e-15);
        assert_eq!(measure(3), 0.0);

        let skew = FiniteSystem::make_skew_product(2, 1).unwrap();
        let origin = skew.point(&[0, 0]).unwrap();
        let m = |n: i64| {
            intersection_measure(
                &skew,
                &PolynomialMatrix::single(IntPolynomial::linear()),
                &[origin],
                n,
            )
            .unwrap()
        };
        assert!((m(2) - 0.25).abs() <= 1e-15);
        assert_eq!(m(1), 0.0);
    }

    #[test]
    fn recurrence_on_rotation_finds_multiples_of_the_order() {
        let table = FactorTable::build(1000).unwrap();
        let sys = rotation(6, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let all = ArithmeticSet::omega_mod(&[0], 1).unwrap();
        let scan = recurrence_scan(&sys, &polys, &[0], &all, &table, 1000).unwrap();
        assert_eq!(scan.good()[..4], [6, 12, 18, 24]);
        assert!(scan.contains(996));
        assert!(!scan.contains(0));
        assert!((scan.density() - 1.0 / 6.0).abs() <= 0.01);
        assert!((scan.base_measure() - 1.0 / 6.0).abs() <= 1e-15);
    }

    #[test]
    fn squares_recur_on_z4_at_even_times() {
        // n^2 ≡ 0 (mod 4) exactly for even n.
        let table = FactorTable::build(200).unwrap();
        let sys = rotation(4, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::square());
        let all = ArithmeticSet::omega_mod(&[0], 1).unwrap();
        let scan = recurrence_scan(&sys, &polys, &[0], &all, &table, 200).unwrap();
        let expected: Vec<u64> = (1..=200).filter(|n| n % 2 == 0).collect();
        assert_eq!(scan.good(), expected.as_slice());
        assert!((scan.lower_density() - 0.5).abs() <= 0.01);
    }

    #[test]
    fn shifted_omega_set_still_contains_good_times() {
        let table = FactorTable::build(100_000).unwrap();
        let sys = rotation(6, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let set = ArithmeticSet::omega_mod(&[0], 2).unwrap().with_shift(1);
        let scan = recurrence_scan(&sys, &polys, &[0], &set, &table, 100_000).unwrap();
        assert!(scan.density() > 0.03, "density = {}", scan.density());
        assert!(scan.lower_density() > 0.03);
        for &g in scan.good().iter().take(50) {
            assert_eq!(g % 6, 0);
            assert!(set.indicator(&table, g).unwrap());
        }
    }

    #[test]
    fn recurrence_rejects_nonzero_constants_and_empty_sets() {
        let table = FactorTable::build(100).unwrap();
        let sys = rotation(6, 1);
        let all = ArithmeticSet::omega_mod(&[0], 1).unwrap();
        let shifted = PolynomialMatrix::single(IntPolynomial::new(vec![1, 1]));
        assert!(matches!(
            recurrence_scan(&sys, &shifted, &[0], &all, &table, 100),
            Err(ErgodicError::ZeroConstantRequired { row: 0, col: 0 })
        ));
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        assert!(matches!(
            recurrence_scan(&sys, &polys, &[], &all, &table, 100),
            Err(ErgodicError::EmptyMeasure)
        ));
    }

    #[test]
    fn default_degree_table() {
        let linear = PolynomialMatrix::single(IntPolynomial::linear());
        assert_eq!(default_uniformity_degree(&linear), 2);
        let quad = PolynomialMatrix::single(IntPolynomial::square());
        assert_eq!(default_uniformity_degree(&quad), 3);
        let cubic = PolynomialMatrix::single(IntPolynomial::monomial(1, 3));
        assert_eq!(default_uniformity_degree(&cubic), 4);
        let high = PolynomialMatrix::single(IntPolynomial::monomial(1, 9));
        assert_eq!(default_uniformity_degree(&high), HARD_S_CAP);
    }

    #[test]
    fn uniformity_pair_vanishes_for_zero_weights() {
        let sys = rotation(2, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let obs = [indicator_zero(&sys)];
        let w = WeightVector::from_values(vec![Complex64::new(0.0, 0.0); 256], 1.0).unwrap();
        let (lhs, rhs) = uniformity_bound_experiment(&sys, &polys, &obs, &w, 2, 256).unwrap();
        assert_eq!(lhs, 0.0);
        assert!(rhs <= 1e-12);
    }

    #[test]
    fn golden_rotation_weight_is_uniform() {
        // e(n theta) for badly approximable theta has small U^2 norm and a
        // small averaged correlation with any rotation.
        let theta = 0.5 * (5f64.sqrt() - 1.0);
        let n = 1u64 << 14;
        let values: Vec<Complex64> = (1..=n).map(|m| e(theta * m as f64)).collect();
        let w = WeightVector::from_values(values, 1.0).unwrap();
        let sys = rotation(2, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let obs = [indicator_zero(&sys)];
        let (lhs, rhs) = uniformity_bound_experiment(&sys, &polys, &obs, &w, 2, n).unwrap();
        assert!(lhs <= 0.02, "lhs = {lhs}");
        assert!(rhs <= 0.6, "rhs = {rhs}");
    }

    #[test]
    fn liouville_skew_uniformity_pair_is_small() {
        let table = FactorTable::build(1 << 14).unwrap();
        let sys = FiniteSystem::make_skew_product(8, 1).unwrap();
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let obs =
            [Observable::from_fn(sys.size(), 1.0, |p| e((p as u64 / 8) as f64 / 8.0)).unwrap()];
        let w = WeightVector::from_rule(&MultiplicativeRule::liouville(), &table, 1 << 14)
            .unwrap();
        let (lhs, rhs) = uniformity_bound_experiment(&sys, &polys, &obs, &w, 3, 1 << 14).unwrap();
        assert!(lhs <= 0.05, "lhs = {lhs}");
        assert!(rhs <= 0.5, "rhs = {rhs}");
    }

    #[test]
    fn partial_summation_trivial_cases() {
        let (mean, c) = partial_summation_check(0.0, 1, 2, 1000).unwrap();
        assert!((mean - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
        assert_eq!(c, Complex64::new(1.0, 0.0));

        // alpha = 1, beta = 1 sums a full set of N-th roots of unity.
        let (mean, c) = partial_summation_check(1.0, 1, 1, 4096).unwrap();
        assert!(mean.norm() <= 1e-10);
        assert!(c.norm() <= 1e-12);
    }

    #[test]
    fn partial_summation_half_window() {
        let (mean, c) = partial_summation_check(1.0, 1, 2, 100_000).unwrap();
        let exact = Complex64::new(0.0, 2.0 / std::f64::consts::PI);
        assert!((c - exact).norm() <= 1e-12);
        assert!((c.norm() - 0.6366).abs() <= 1e-3);
        assert!((mean - c).norm() <= 1e-2);
    }

    #[test]
    fn partial_summation_rejects_unrealizable_beta() {
        assert!(matches!(
            partial_summation_check(1.0, 3, 7, 10),
            Err(ErgodicError::BetaNotRealizable { num: 3, den: 7, n: 10 })
        ));
        assert!(partial_summation_check(1.0, 3, 2, 10).is_err());
        assert!(partial_summation_check(1.0, 0, 2, 10).is_err());
    }

    #[test]
    fn constant_weight_decomposition_reproduces_plain_averages() {
        let params = KernelParams::new(2, 3).unwrap();
        let f = WeightVector::ones(101);
        let dec = decompose(&f, &params).unwrap();
        let sys = rotation(2, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let obs = [indicator_zero(&sys)];
        let trace =
            structured_weight_average(&sys, &polys, &obs, &dec, &[50, 101]).unwrap();
        for (&nk, avg) in trace.n_list().iter().zip(trace.averages()) {
            let plain =
                weighted_average(&sys, &polys, &obs, &WeightVector::ones(nk), nk).unwrap();
            for x in 0..sys.size() {
                assert!((avg.value(x) - plain.value(x)).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn liouville_structured_trace_stabilizes() {
        let n = 1u64 << 17;
        let table = FactorTable::build(n).unwrap();
        let f = WeightVector::from_rule(&MultiplicativeRule::liouville(), &table, n).unwrap();
        let dec = decompose(&f, &KernelParams::new(2, 3).unwrap()).unwrap();
        let sys = rotation(2, 1);
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let obs = [indicator_zero(&sys)];
        let n_list: Vec<u64> = (13..=17).map(|k| 1u64 << k).collect();
        let trace = structured_weight_average(&sys, &polys, &obs, &dec, &n_list).unwrap();
        assert!(trace.max_successive_mean_gap() <= 0.02);
        for avg in trace.averages() {
            assert!(avg.l2_norm() + 1e-12 >= avg.mean().norm());
        }
    }

    #[test]
    fn single_frequency_structured_trace_matches_partial_summation() {
        // f(n) = e(n/1009) sits on the major arc at xi = 1, so its
        // structured part is exactly phi_hat(1) e(n/1009) and the trace mean
        // over a trivial system reduces to the partial summation sum.
        let n_tilde = 1009u64;
        let params = KernelParams::new(2, 3).unwrap();
        let values: Vec<Complex64> = (1..=n_tilde).map(|m| e(m as f64 / n_tilde as f64)).collect();
        let f = WeightVector::from_values(values, 1.0).unwrap();
        let dec = decompose(&f, &params).unwrap();
        let phi_hat = kernel_spectrum(n_tilde, &params).unwrap().coefficient(1);
        assert!((phi_hat.re - 2.0 / 3.0).abs() <= 1e-12);

        let sys = FiniteSystem::make_product_rotation(&[1], &[vec![0]]).unwrap();
        let polys = PolynomialMatrix::single(IntPolynomial::linear());
        let obs = [Observable::constant(1, Complex64::new(1.0, 0.0)).unwrap()];
        let trace = structured_weight_average(&sys, &polys, &obs, &dec, &[500]).unwrap();
        let (empirical, predicted) = partial_summation_check(1.0, 500, 1009, 500).unwrap();
        assert!((trace.means()[0] - phi_hat * empirical).norm() <= 1e-9);
        assert!((trace.means()[0] - phi_hat * predicted).norm() <= 0.01);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_residue_fold_agrees_with_direct(
            m in 2u64..9,
            shift in 1i64..8,
            c1 in -3i64..4,
            c2 in -3i64..4,
            seed in 0u64..1000,
        ) {
            let sys = rotation(m, shift);
            let polys = PolynomialMatrix::single(IntPolynomial::new(vec![0, c1, c2]));
            let obs = [Observable::from_fn(sys.size(), 1.0, |x| {
                e(x as f64 / m as f64)
            }).unwrap()];
            let w = random_weights(600, seed);
            let folded = weighted_average_impl(&sys, &polys, &obs, &w, 600, true).unwrap();
            let direct = weighted_average_impl(&sys, &polys, &obs, &w, 600, false).unwrap();
            for x in 0..sys.size() {
                prop_assert!((folded.value(x) - direct.value(x)).norm() <= 1e-9);
            }
        }

        #[test]
        fn prop_mean_bounded_by_l2(seed in 0u64..2000) {
            let sys = rotation(6, 1);
            let polys = PolynomialMatrix::single(IntPolynomial::linear());
            let obs = [indicator_zero(&sys)];
            let w = random_weights(400, seed);
            let avg = weighted_average(&sys, &polys, &obs, &w, 400).unwrap();
            prop_assert!(avg.mean().norm() <= avg.l2_norm() + 1e-12);
        }
    }
}
