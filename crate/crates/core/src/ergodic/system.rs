//! Permutations with cycle decompositions, commuting systems, integer
//! polynomials with overflow-checked evaluation, and bounded observables.

use num_complex::Complex64;

use super::ErgodicError;

/// Largest number of points a system may carry, roughly 16.7 million.
/// A system stores one `u32` per point per map plus cycle bookkeeping, so
/// this keeps the footprint in the low hundreds of megabytes.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 24;

/// A permutation of `{0, .., size-1}` with its cycle decomposition.
///
/// Powers are evaluated through the cycles: `T^e(x)` walks `e mod len`
/// steps around the cycle containing `x`, so arbitrary (even negative or
/// astronomically large) exponents cost O(1).
#[derive(Clone)]
pub struct Permutation {
    forward: Vec<u32>,
    /// cycles[c] lists the points of cycle `c` in orbit order.
    cycles: Vec<Vec<u32>>,
    cycle_id: Vec<u32>,
    cycle_pos: Vec<u32>,
}

impl std::fmt::Debug for Permutation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Permutation(size = {}, cycles = {})",
            self.forward.len(),
            self.cycles.len()
        )
    }
}

impl Permutation {
    /// Builds a permutation from the image array `forward[x] = T(x)`.
    pub fn from_map(forward: Vec<u32>) -> Result<Self, ErgodicError> {
        let size = forward.len();
        if size == 0 {
            return Err(ErgodicError::NotBijection {
                expected: 0,
                got: 0,
            });
        }
        let mut seen = vec![false; size];
        for &y in &forward {
            let y = y as usize;
            if y >= size || seen[y] {
                return Err(ErgodicError::NotBijection {
                    expected: size,
                    got: size,
                });
            }
            seen[y] = true;
        }
        let mut cycles = Vec::new();
        let mut cycle_id = vec![u32::MAX; size];
        let mut cycle_pos = vec![0u32; size];
        for start in 0..size {
            if cycle_id[start] != u32::MAX {
                continue;
            }
            let id = cycles.len() as u32;
            let mut cycle = Vec::new();
            let mut x = start;
            loop {
                cycle_id[x] = id;
                cycle_pos[x] = cycle.len() as u32;
                cycle.push(x as u32);
                x = forward[x] as usize;
                if x == start {
                    break;
                }
            }
            cycles.push(cycle);
        }
        Ok(Permutation {
            forward,
            cycles,
            cycle_id,
            cycle_pos,
        })
    }

    pub fn size(&self) -> usize {
        self.forward.len()
    }

    pub fn apply(&self, x: usize) -> usize {
        self.forward[x] as usize
    }

    /// `T^e(x)` for any integer exponent, via the cycle containing `x`.
    pub fn power_apply(&self, e: i64, x: usize) -> usize {
        let cycle = &self.cycles[self.cycle_id[x] as usize];
        let len = cycle.len() as i64;
        let pos = self.cycle_pos[x] as i64;
        cycle[(pos + e.rem_euclid(len)) as usize % cycle.len()] as usize
    }

    /// `T^{p(n)}(x)` with the exponent reduced mod the cycle length of `x`,
    /// so the polynomial value never needs to fit in an integer type.
    pub fn power_apply_poly(&self, poly: &IntPolynomial, n: i64, x: usize) -> usize {
        let cycle = &self.cycles[self.cycle_id[x] as usize];
        let len = cycle.len() as u64;
        let e = poly.eval_mod(n, len);
        cycle[(self.cycle_pos[x] as u64 + e) as usize % cycle.len()] as usize
    }

    /// Order of the permutation, the lcm of its cycle lengths, or `None`
    /// if that lcm overflows `u64`.
    pub fn order(&self) -> Option<u64> {
        let mut l: u64 = 1;
        for cycle in &self.cycles {
            let len = cycle.len() as u64;
            let g = gcd(l, len);
            l = l.checked_mul(len / g)?;
        }
        Some(l)
    }

    /// Number of cycles, which is the dimension of the invariant functions.
    pub fn cycle_count(&self) -> usize {
        self.cycles.len()
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A finite uniform-measure space with pairwise commuting permutations.
#[derive(Clone, Debug)]
pub struct FiniteSystem {
    size: usize,
    maps: Vec<Permutation>,
    /// Coordinate moduli when the space is a product of cyclic groups,
    /// little-endian: point `x` has coordinates `(x / stride_i) % m_i`.
    coord_moduli: Option<Vec<u64>>,
}

impl FiniteSystem {
    /// Validates sizes and pairwise commutativity (checked pointwise, which
    /// is exact for permutations) and assembles the system.
    pub fn new(maps: Vec<Permutation>) -> Result<Self, ErgodicError> {
        Self::with_moduli(maps, None)
    }

    fn with_moduli(
        maps: Vec<Permutation>,
        coord_moduli: Option<Vec<u64>>,
    ) -> Result<Self, ErgodicError> {
        if maps.is_empty() {
            return Err(ErgodicError::DimensionMismatch(
                "a system needs at least one map".into(),
            ));
        }
        let size = maps[0].size();
        for map in &maps {
            if map.size() != size {
                return Err(ErgodicError::DimensionMismatch(format!(
                    "maps act on {} and {} points",
                    size,
                    map.size()
                )));
            }
        }
        for i in 0..maps.len() {
            for j in (i + 1)..maps.len() {
                for x in 0..size {
                    if maps[i].apply(maps[j].apply(x)) != maps[j].apply(maps[i].apply(x)) {
                        return Err(ErgodicError::NotCommuting { i, j, x });
                    }
                }
            }
        }
        Ok(FiniteSystem {
            size,
            maps,
            coord_moduli,
        })
    }

    /// Product of cyclic groups `Z_{m_1} x .. x Z_{m_d}` with one rotation
    /// per entry of `shifts`; `shifts[i][k]` is the shift of coordinate `k`
    /// under map `i`. Rotations of a fixed abelian group always commute.
    pub fn make_product_rotation(
        moduli: &[u64],
        shifts: &[Vec<i64>],
    ) -> Result<Self, ErgodicError> {
        if moduli.is_empty() || moduli.iter().any(|&m| m == 0) {
            return Err(ErgodicError::DimensionMismatch(
                "moduli must be nonempty and positive".into(),
            ));
        }
        if shifts.is_empty() || shifts.iter().any(|s| s.len() != moduli.len()) {
            return Err(ErgodicError::DimensionMismatch(
                "each shift vector must match the number of moduli".into(),
            ));
        }
        let mut size: u128 = 1;
        for &m in moduli {
            size *= m as u128;
        }
        if size > DEFAULT_POINT_BUDGET as u128 {
            return Err(ErgodicError::PointBudget {
                size,
                budget: DEFAULT_POINT_BUDGET,
            });
        }
        let size = size as usize;
        let mut maps = Vec::with_capacity(shifts.len());
        for shift in shifts {
            let reduced: Vec<u64> = shift
                .iter()
                .zip(moduli)
                .map(|(&s, &m)| s.rem_euclid(m as i64) as u64)
                .collect();
            let mut forward = vec![0u32; size];
            let mut coords = vec![0u64; moduli.len()];
            for (x, slot) in forward.iter_mut().enumerate() {
                decode_coords(x as u64, moduli, &mut coords);
                for (c, (&s, &m)) in coords.iter_mut().zip(reduced.iter().zip(moduli)) {
                    *c = (*c + s) % m;
                }
                *slot = encode_coords(&coords, moduli) as u32;
            }
            maps.push(Permutation::from_map(forward)?);
        }
        Self::with_moduli(maps, Some(moduli.to_vec()))
    }

    /// The skew product on `Z_M x Z_M` sending `(x, y)` to
    /// `(x + a, y + 2x + a)`, whose second coordinate accumulates the
    /// quadratic orbit `T^n(0, 0) = (na, n^2 a)`.
    pub fn make_skew_product(m: u64, a: i64) -> Result<Self, ErgodicError> {
        if m == 0 {
            return Err(ErgodicError::DimensionMismatch(
                "skew product modulus must be positive".into(),
            ));
        }
        let size = (m as u128) * (m as u128);
        if size > DEFAULT_POINT_BUDGET as u128 {
            return Err(ErgodicError::PointBudget {
                size,
                budget: DEFAULT_POINT_BUDGET,
            });
        }
        let size = size as usize;
        let a = a.rem_euclid(m as i64) as u64;
        let moduli = vec![m, m];
        let mut forward = vec![0u32; size];
        for (p, slot) in forward.iter_mut().enumerate() {
            let x = p as u64 % m;
            let y = p as u64 / m;
            let nx = (x + a) % m;
            let ny = (y + 2 * x % m + a) % m;
            *slot = (nx + m * ny) as u32;
        }
        let map = Permutation::from_map(forward)?;
        Self::with_moduli(vec![map], Some(moduli))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn map(&self, i: usize) -> &Permutation {
        &self.maps[i]
    }

    pub fn maps(&self) -> &[Permutation] {
        &self.maps
    }

    /// Coordinate moduli when the space is a product of cyclic groups.
    pub fn coord_moduli(&self) -> Option<&[u64]> {
        self.coord_moduli.as_deref()
    }

    /// Coordinates of a point when the space is a product of cyclic groups.
    pub fn coords(&self, x: usize) -> Option<Vec<u64>> {
        let moduli = self.coord_moduli.as_ref()?;
        let mut coords = vec![0u64; moduli.len()];
        decode_coords(x as u64, moduli, &mut coords);
        Some(coords)
    }

    /// Point index of a coordinate tuple; inverse of [`coords`](Self::coords).
    pub fn point(&self, coords: &[u64]) -> Option<usize> {
        let moduli = self.coord_moduli.as_ref()?;
        if coords.len() != moduli.len() || coords.iter().zip(moduli).any(|(&c, &m)| c >= m) {
            return None;
        }
        Some(encode_coords(coords, moduli) as usize)
    }
}

fn decode_coords(x: u64, moduli: &[u64], out: &mut [u64]) {
    let mut rest = x;
    for (c, &m) in out.iter_mut().zip(moduli) {
        *c = rest % m;
        rest /= m;
    }
}

fn encode_coords(coords: &[u64], moduli: &[u64]) -> u64 {
    let mut x = 0u64;
    for (&c, &m) in coords.iter().zip(moduli).rev() {
        x = x * m + c;
    }
    x
}

/// An integer polynomial `c_0 + c_1 n + .. + c_d n^d` used as an iterate
/// exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntPolynomial {
    /// Coefficients in increasing degree order with trailing zeros trimmed;
    /// the zero polynomial is the empty vector.
    coeffs: Vec<i64>,
}

impl IntPolynomial {
    pub fn new(mut coeffs: Vec<i64>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        IntPolynomial { coeffs }
    }

    pub fn zero() -> Self {
        IntPolynomial { coeffs: Vec::new() }
    }

    /// The identity exponent `p(n) = n`.
    pub fn linear() -> Self {
        IntPolynomial::new(vec![0, 1])
    }

    /// `p(n) = n^2`.
    pub fn square() -> Self {
        IntPolynomial::new(vec![0, 0, 1])
    }

    /// Monomial `c n^d`.
    pub fn monomial(c: i64, d: usize) -> Self {
        let mut coeffs = vec![0i64; d + 1];
        coeffs[d] = c;
        IntPolynomial::new(coeffs)
    }

    pub fn coefficients(&self) -> &[i64] {
        &self.coeffs
    }

    /// Degree with the convention that the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn constant_term(&self) -> i64 {
        self.coeffs.first().copied().unwrap_or(0)
    }

    pub fn has_zero_constant(&self) -> bool {
        self.constant_term() == 0
    }

    /// Horner evaluation with overflow detection.
    pub fn eval(&self, n: i64) -> Result<i64, ErgodicError> {
        let mut acc: i64 = 0;
        for &c in self.coeffs.iter().rev() {
            acc = acc
                .checked_mul(n)
                .and_then(|v| v.checked_add(c))
                .ok_or(ErgodicError::Overflow("polynomial evaluation"))?;
        }
        Ok(acc)
    }

    /// `p(n) mod modulus` in `[0, modulus)`, exact for every `i64` input:
    /// Horner in `i128` with reduction after each step keeps all
    /// intermediates below `2^127`.
    pub fn eval_mod(&self, n: i64, modulus: u64) -> u64 {
        assert!(modulus > 0, "modulus must be positive");
        let m = modulus as i128;
        let n = (n as i128).rem_euclid(m);
        let mut acc: i128 = 0;
        for &c in self.coeffs.iter().rev() {
            acc = (acc * n + c as i128).rem_euclid(m);
        }
        acc as u64
    }
}

/// The exponent matrix of a multiple average: entry `(i, j)` is the
/// polynomial power of map `i` applied to observable `j`.
#[derive(Clone, Debug)]
pub struct PolynomialMatrix {
    rows: Vec<Vec<IntPolynomial>>,
}

impl PolynomialMatrix {
    /// `rows[i][j] = p_{i,j}`; all rows must share one length.
    pub fn from_rows(rows: Vec<Vec<IntPolynomial>>) -> Result<Self, ErgodicError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(ErgodicError::DimensionMismatch(
                "polynomial matrix must be nonempty".into(),
            ));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ErgodicError::DimensionMismatch(
                "polynomial matrix rows have unequal lengths".into(),
            ));
        }
        Ok(PolynomialMatrix { rows })
    }

    /// The 1 x 1 matrix of a single map acting through `p`.
    pub fn single(p: IntPolynomial) -> Self {
        PolynomialMatrix {
            rows: vec![vec![p]],
        }
    }

    /// `num_maps x 1` matrix applying the same exponent to every map.
    pub fn column(p: IntPolynomial, num_maps: usize) -> Result<Self, ErgodicError> {
        if num_maps == 0 {
            return Err(ErgodicError::DimensionMismatch(
                "polynomial matrix must be nonempty".into(),
            ));
        }
        Ok(PolynomialMatrix {
            rows: vec![vec![p]; num_maps],
        })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> &IntPolynomial {
        &self.rows[i][j]
    }

    pub fn max_degree(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|p| p.degree()))
            .max()
            .unwrap_or(0)
    }

    pub fn all_zero_constant(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().all(|p| p.has_zero_constant()))
    }

    /// First entry with a nonzero constant term, if any.
    pub fn nonzero_constant_entry(&self) -> Option<(usize, usize)> {
        for (i, row) in self.rows.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                if !p.has_zero_constant() {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

/// A bounded complex function on the points of a system.
#[derive(Clone)]
pub struct Observable {
    values: Vec<Complex64>,
    cap: f64,
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Observable(size = {}, cap = {})",
            self.values.len(),
            self.cap
        )
    }
}

impl Observable {
    /// Values indexed by point, checked against the declared sup-norm cap.
    pub fn new(values: Vec<Complex64>, cap: f64) -> Result<Self, ErgodicError> {
        if values.is_empty() {
            return Err(ErgodicError::DimensionMismatch(
                "observable must have at least one value".into(),
            ));
        }
        let max = values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        if !max.is_finite() || max > cap + 1e-9 {
            return Err(ErgodicError::ObservableExceedsCap { max, cap });
        }
        Ok(Observable { values, cap })
    }

    /// Indicator of a set of points, cap 1.
    pub fn indicator(size: usize, points: &[usize]) -> Result<Self, ErgodicError> {
        let mut values = vec![Complex64::new(0.0, 0.0); size];
        for &p in points {
            if p >= size {
                return Err(ErgodicError::DimensionMismatch(format!(
                    "indicator point {p} out of range for {size} points"
                )));
            }
            values[p] = Complex64::new(1.0, 0.0);
        }
        Observable::new(values, 1.0)
    }

    pub fn constant(size: usize, z: Complex64) -> Result<Self, ErgodicError> {
        Observable::new(vec![z; size], z.norm())
    }

    pub fn from_fn<F: FnMut(usize) -> Complex64>(
        size: usize,
        cap: f64,
        mut f: F,
    ) -> Result<Self, ErgodicError> {
        Observable::new((0..size).map(|x| f(x)).collect(), cap)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn value(&self, x: usize) -> Complex64 {
        self.values[x]
    }
}
