//! Linear-form pattern densities, IP_k searches, and arithmetic-progression
//! searches with constrained common differences.

use rayon::prelude::*;
use thiserror::Error;

use crate::sets::ArithmeticSet;
use crate::sieve::{FactorTable, SieveError};

/// Cap on the number of grid points `N^d` a density count may visit.
pub const GRID_WORK_BUDGET: u128 = 1 << 32;

/// Largest supported IP rank; IP_k validation touches 2^k - 1 subset sums.
pub const MAX_IP_RANK: u32 = 5;

#[derive(Debug, Error)]
pub enum CombinatoricsError {
    #[error("a linear form system needs at least one form")]
    EmptyForms,
    #[error("form {0} is identically zero")]
    ZeroForm(usize),
    #[error("form {index} has {got} coefficients, expected arity {expected}")]
    ArityMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("forms {i} and {j} are proportional")]
    NotIndependent { i: usize, j: usize },
    #[error("form values reach {needed} but the factor table stops at {available}")]
    RangeExceeded { needed: u64, available: u64 },
    #[error("grid of {points} points exceeds the work budget {budget}")]
    GridTooLarge { points: u128, budget: u128 },
    #[error("IP rank {0} outside 1..={MAX_IP_RANK}")]
    RankOutOfRange(u32),
    #[error("subset sums reach {needed} but the factor table stops at {available}")]
    SumsOutOfRange { needed: u64, available: u64 },
    #[error("progression length must be at least 1")]
    ZeroLength,
    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),
    #[error(transparent)]
    Sieve(#[from] SieveError),
}

/// A system of pairwise independent integer linear forms on `N^d`.
#[derive(Clone, Debug)]
pub struct LinearFormSystem {
    arity: usize,
    forms: Vec<Vec<i64>>,
}

impl LinearFormSystem {
    /// Validates shape, nonzero forms, and pairwise independence: two forms
    /// are dependent exactly when every 2x2 minor of their coefficient pair
    /// vanishes.
    pub fn new(arity: usize, forms: Vec<Vec<i64>>) -> Result<Self, CombinatoricsError> {
        if forms.is_empty() || arity == 0 {
            return Err(CombinatoricsError::EmptyForms);
        }
        for (idx, form) in forms.iter().enumerate() {
            if form.len() != arity {
                return Err(CombinatoricsError::ArityMismatch {
                    index: idx,
                    got: form.len(),
                    expected: arity,
                });
            }
            if form.iter().all(|&c| c == 0) {
                return Err(CombinatoricsError::ZeroForm(idx));
            }
        }
        for i in 0..forms.len() {
            for j in (i + 1)..forms.len() {
                let mut dependent = true;
                'pairs: for a in 0..arity {
                    for b in (a + 1)..arity {
                        let cross = forms[i][a] as i128 * forms[j][b] as i128
                            - forms[i][b] as i128 * forms[j][a] as i128;
                        if cross != 0 {
                            dependent = false;
                            break 'pairs;
                        }
                    }
                }
                // With all minors zero the forms are scalar multiples of
                // each other (both are nonzero by the check above); for
                // arity 1 any two forms are proportional.
                if dependent {
                    return Err(CombinatoricsError::NotIndependent { i, j });
                }
            }
        }
        Ok(LinearFormSystem { arity, forms })
    }

    /// The single-form identity system `L(m) = m`.
    pub fn identity() -> Self {
        LinearFormSystem {
            arity: 1,
            forms: vec![vec![1]],
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn num_forms(&self) -> usize {
        self.forms.len()
    }

    pub fn forms(&self) -> &[Vec<i64>] {
        &self.forms
    }

    pub fn eval(&self, i: usize, point: &[i64]) -> i64 {
        self.forms[i]
            .iter()
            .zip(point)
            .map(|(&c, &x)| c as i128 * x as i128)
            .sum::<i128>() as i64
    }

    /// Largest value any form attains on `[1, N]^d`; used for range checks.
    fn max_value(&self, n: u64) -> u64 {
        let n = n as i128;
        self.forms
            .iter()
            .map(|form| {
                form.iter()
                    .map(|&c| {
                        let c = c as i128;
                        (c * n).max(c)
                    })
                    .sum::<i128>()
                    .max(0) as u64
            })
            .max()
            .unwrap_or(0)
    }
}

/// `(1/N^d) #{m in [1,N]^d : every L_i(m) lies in S}`, counted exactly.
/// Form values outside `[1, n]`-positivity (zero or negative) never belong
/// to `S`.
pub fn linear_forms_density(
    system: &LinearFormSystem,
    set: &ArithmeticSet,
    table: &FactorTable,
    n: u64,
) -> Result<f64, CombinatoricsError> {
    if n == 0 {
        return Err(CombinatoricsError::ZeroLength);
    }
    let points = (n as u128)
        .checked_pow(system.arity() as u32)
        .ok_or(CombinatoricsError::Overflow("grid size"))?;
    if points > GRID_WORK_BUDGET {
        return Err(CombinatoricsError::GridTooLarge {
            points,
            budget: GRID_WORK_BUDGET,
        });
    }
    let needed = system.max_value(n);
    if needed > table.n_max() {
        return Err(CombinatoricsError::RangeExceeded {
            needed,
            available: table.n_max(),
        });
    }

    // Parallel over the first coordinate; each task counts an integer, so
    // the reduction order cannot affect the result.
    let d = system.arity();
    let count: u64 = (1..=n)
        .into_par_iter()
        .map(|first| {
            let mut point = vec![1i64; d];
            point[0] = first as i64;
            let mut local = 0u64;
            loop {
                let hit = (0..system.num_forms()).all(|i| {
                    let v = system.eval(i, &point);
                    v >= 1 && set.indicator(table, v as u64).unwrap_or(false)
                });
                if hit {
                    local += 1;
                }
                // Odometer over coordinates 1..d; coordinate 0 is fixed.
                let mut k = d - 1;
                loop {
                    if k == 0 {
                        return local;
                    }
                    if (point[k] as u64) < n {
                        point[k] += 1;
                        break;
                    }
                    point[k] = 1;
                    k -= 1;
                }
            }
        })
        .sum();
    Ok(count as f64 / points as f64)
}

/// Finds `k` generators `a_1 < .. < a_k <= bound` whose 2^k - 1 nonempty
/// subset sums all lie in `S`, by depth-first search over candidates in
/// increasing order. Returns `None` when the search space is exhausted.
pub fn find_ipk(
    set: &ArithmeticSet,
    k: u32,
    bound: u64,
    table: &FactorTable,
) -> Result<Option<Vec<u64>>, CombinatoricsError> {
    if k == 0 || k > MAX_IP_RANK {
        return Err(CombinatoricsError::RankOutOfRange(k));
    }
    let needed = bound
        .checked_mul(k as u64)
        .ok_or(CombinatoricsError::Overflow("subset sum bound"))?;
    if needed > table.n_max() {
        return Err(CombinatoricsError::SumsOutOfRange {
            needed,
            available: table.n_max(),
        });
    }

    fn extend(
        set: &ArithmeticSet,
        table: &FactorTable,
        bound: u64,
        k: usize,
        chosen: &mut Vec<u64>,
        sums: &mut Vec<u64>,
    ) -> Result<bool, CombinatoricsError> {
        if chosen.len() == k {
            return Ok(true);
        }
        let start = chosen.last().map_or(1, |&a| a + 1);
        'candidates: for a in start..=bound {
            if !set.indicator(table, a)? {
                continue;
            }
            for &s in sums.iter() {
                if !set.indicator(table, s + a)? {
                    continue 'candidates;
                }
            }
            let old_len = sums.len();
            let new_sums: Vec<u64> = sums.iter().map(|&s| s + a).collect();
            sums.push(a);
            sums.extend(new_sums);
            chosen.push(a);
            if extend(set, table, bound, k, chosen, sums)? {
                return Ok(true);
            }
            chosen.pop();
            sums.truncate(old_len);
        }
        Ok(false)
    }

    let mut chosen = Vec::with_capacity(k as usize);
    let mut sums = Vec::new();
    if extend(set, table, bound, k as usize, &mut chosen, &mut sums)? {
        Ok(Some(chosen))
    } else {
        Ok(None)
    }
}

/// Checks that all 2^k - 1 nonempty subset sums of `generators` lie in `S`.
pub fn validate_ipk(
    set: &ArithmeticSet,
    generators: &[u64],
    table: &FactorTable,
) -> Result<bool, CombinatoricsError> {
    if generators.is_empty() || generators.len() > MAX_IP_RANK as usize {
        return Err(CombinatoricsError::RankOutOfRange(generators.len() as u32));
    }
    for mask in 1u32..(1 << generators.len()) {
        let mut sum = 0u64;
        for (bit, &a) in generators.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                sum = sum
                    .checked_add(a)
                    .ok_or(CombinatoricsError::Overflow("subset sum"))?;
            }
        }
        if !set.indicator(table, sum)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// First length-`k` arithmetic progression inside `E` whose common
/// difference lies in `S`, scanning differences `d in S ∩ [1, N/k]` in
/// increasing order and starts in increasing order. `members[i]` states
/// whether `i + 1` belongs to `E ⊆ [1, N]`.
pub fn ap_search(
    members: &[bool],
    k: u32,
    set: &ArithmeticSet,
    table: &FactorTable,
) -> Result<Option<(u64, u64)>, CombinatoricsError> {
    if k == 0 {
        return Err(CombinatoricsError::ZeroLength);
    }
    let n = members.len() as u64;
    let in_e = |x: u64| members[(x - 1) as usize];
    for diff in 1..=(n / k as u64) {
        if !set.indicator(table, diff)? {
            continue;
        }
        let reach = diff * (k as u64 - 1);
        for start in 1..=(n - reach) {
            if (0..k as u64).all(|j| in_e(start + j * diff)) {
                return Ok(Some((start, diff)));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use once_cell::sync::Lazy;

    static TABLE: Lazy<FactorTable> = Lazy::new(|| FactorTable::build(1_000_000).unwrap());

    fn omega_parity() -> ArithmeticSet {
        ArithmeticSet::omega_mod(&[0], 2).unwrap()
    }

    fn bigomega_parity() -> ArithmeticSet {
        ArithmeticSet::bigomega_mod(&[0], 2).unwrap()
    }

    fn all_naturals() -> ArithmeticSet {
        ArithmeticSet::omega_mod(&[0], 1).unwrap()
    }

    #[test]
    fn construction_rejects_degenerate_systems() {
        assert!(matches!(
            LinearFormSystem::new(2, vec![]),
            Err(CombinatoricsError::EmptyForms)
        ));
        assert!(matches!(
            LinearFormSystem::new(2, vec![vec![0, 0]]),
            Err(CombinatoricsError::ZeroForm(0))
        ));
        assert!(matches!(
            LinearFormSystem::new(2, vec![vec![1, 2], vec![2, 4]]),
            Err(CombinatoricsError::NotIndependent { i: 0, j: 1 })
        ));
        assert!(matches!(
            LinearFormSystem::new(1, vec![vec![1], vec![3]]),
            Err(CombinatoricsError::NotIndependent { i: 0, j: 1 })
        ));
        assert!(matches!(
            LinearFormSystem::new(2, vec![vec![1]]),
            Err(CombinatoricsError::ArityMismatch { .. })
        ));
        assert!(LinearFormSystem::new(2, vec![vec![1, 1], vec![1, 2]]).is_ok());
    }

    #[test]
    fn identity_form_density_approaches_one_half() {
        let density =
            linear_forms_density(&LinearFormSystem::identity(), &omega_parity(), &TABLE, 1_000_000)
                .unwrap();
        assert!((density - 0.5).abs() < 0.01, "density = {density}");
    }

    #[test]
    fn two_form_density_approaches_one_quarter() {
        let system = LinearFormSystem::new(2, vec![vec![1, 1], vec![1, 2]]).unwrap();
        let density = linear_forms_density(&system, &omega_parity(), &TABLE, 2000).unwrap();
        assert!((density - 0.25).abs() < 0.02, "density = {density}");
    }

    #[test]
    fn full_set_has_density_one() {
        let system = LinearFormSystem::new(2, vec![vec![1, 1], vec![1, 2]]).unwrap();
        let density = linear_forms_density(&system, &all_naturals(), &TABLE, 200).unwrap();
        assert_eq!(density, 1.0);
    }

    #[test]
    fn non_positive_form_values_never_count() {
        // L(m, n) = m - n is positive on exactly N(N-1)/2 of the N^2 pairs.
        let system = LinearFormSystem::new(2, vec![vec![1, -1]]).unwrap();
        let density = linear_forms_density(&system, &all_naturals(), &TABLE, 100).unwrap();
        assert!((density - 99.0 / 200.0).abs() <= 1e-15);
    }

    #[test]
    fn density_range_check() {
        let small = FactorTable::build(10_000).unwrap();
        let system = LinearFormSystem::new(1, vec![vec![200]]).unwrap();
        assert!(matches!(
            linear_forms_density(&system, &all_naturals(), &small, 100),
            Err(CombinatoricsError::RangeExceeded { needed: 20_000, .. })
        ));
    }

    #[test]
    fn ip1_returns_first_member() {
        let found = find_ipk(&bigomega_parity(), 1, 100, &TABLE).unwrap().unwrap();
        assert_eq!(found.len(), 1);
        assert!(bigomega_parity().indicator(&TABLE, found[0]).unwrap());
        // Nothing below it is a member.
        for m in 1..found[0] {
            assert!(!bigomega_parity().indicator(&TABLE, m).unwrap());
        }
    }

    #[test]
    fn ip2_witness_from_the_bigomega_set() {
        let set = bigomega_parity();
        // {4, 6} is a valid IP_2 witness: Omega of 4, 6, and 10 are all even.
        assert!(validate_ipk(&set, &[4, 6], &TABLE).unwrap());
        let found = find_ipk(&set, 2, 1000, &TABLE).unwrap().unwrap();
        assert_eq!(found.len(), 2);
        assert!(found[0] < found[1]);
        assert!(validate_ipk(&set, &found, &TABLE).unwrap());
    }

    #[test]
    fn ip3_witness_inside_shifted_omega_set() {
        let set = omega_parity().with_shift(1);
        let found = find_ipk(&set, 3, 10_000, &TABLE).unwrap().unwrap();
        assert!(found.windows(2).all(|w| w[0] < w[1]));
        assert!(*found.last().unwrap() <= 10_000);
        assert!(validate_ipk(&set, &found, &TABLE).unwrap());
    }

    #[test]
    fn ipk_rank_and_range_limits() {
        assert!(matches!(
            find_ipk(&omega_parity(), 6, 100, &TABLE),
            Err(CombinatoricsError::RankOutOfRange(6))
        ));
        assert!(matches!(
            find_ipk(&omega_parity(), 0, 100, &TABLE),
            Err(CombinatoricsError::RankOutOfRange(0))
        ));
        let small = FactorTable::build(100).unwrap();
        assert!(matches!(
            find_ipk(&omega_parity(), 3, 50, &small),
            Err(CombinatoricsError::SumsOutOfRange { needed: 150, .. })
        ));
    }

    #[test]
    fn ipk_exhaustion_is_a_value() {
        // No member of the empty custom set exists, so every rank fails.
        let empty = ArithmeticSet::custom("never", Some(0.0), |_, _| Ok(false));
        assert_eq!(find_ipk(&empty, 2, 200, &TABLE).unwrap(), None);
    }

    #[test]
    fn ap_in_the_full_interval_uses_the_smallest_difference() {
        let members = vec![true; 100];
        let (start, diff) = ap_search(&members, 3, &bigomega_parity(), &TABLE)
            .unwrap()
            .unwrap();
        assert_eq!(start, 1);
        // The smallest member of the difference set.
        let min_s = (1..=33)
            .find(|&d| bigomega_parity().indicator(&TABLE, d).unwrap())
            .unwrap();
        assert_eq!(diff, min_s);
    }

    #[test]
    fn even_numbers_need_an_even_difference() {
        let members: Vec<bool> = (1..=100u64).map(|x| x % 2 == 0).collect();
        let (start, diff) = ap_search(&members, 3, &bigomega_parity(), &TABLE)
            .unwrap()
            .unwrap();
        assert_eq!((start, diff), (2, 4));
        for j in 0..3 {
            let term = start + j * diff;
            assert_eq!(term % 2, 0);
        }
    }

    #[test]
    fn sparse_sets_yield_no_progression() {
        let mut members = vec![false; 50];
        members[7] = true;
        members[20] = true;
        assert_eq!(
            ap_search(&members, 3, &all_naturals(), &TABLE).unwrap(),
            None
        );
        assert!(matches!(
            ap_search(&members, 0, &all_naturals(), &TABLE),
            Err(CombinatoricsError::ZeroLength)
        ));
    }
}
