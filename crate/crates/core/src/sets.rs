//! Arithmetic sets defined through prime-counting functions, and weight
//! vectors materializing functions or indicators over an initial segment.
//!
//! The supported set kinds fix a counting function (omega or Omega) and a
//! membership test on its value: a residue set mod b, or a condition
//! ‖omega(n) * alpha‖ ∈ A for a finite union of closed subintervals of
//! [0, 1/2]. Squarefree numbers and custom predicates round out the kinds.
//! Every set carries a shift c >= 0: n belongs to S + c iff n > c and
//! n − c belongs to S.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::fourier::e;
use crate::multiplicative::MultiplicativeRule;
use crate::sieve::{FactorTable, SieveError};

type CustomPredicate = Arc<dyn Fn(&FactorTable, u64) -> Result<bool, SieveError> + Send + Sync>;

#[derive(Debug, Error)]
pub enum SetError {
    #[error(transparent)]
    Sieve(#[from] SieveError),
    #[error("modulus must be >= 1, got {0}")]
    InvalidModulus(u64),
    #[error("residue {a} is not below the modulus {b}")]
    ResidueOutOfRange { a: u64, b: u64 },
    #[error("interval [{lo}, {hi}] is not a closed subinterval of [0, 1/2]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("weight of modulus {max} exceeds the declared bound {cap}")]
    BoundExceeded { max: f64, cap: f64 },
    #[error("no density is known for set {0}; supply one or use an empirical count")]
    UnknownDensity(String),
}

#[derive(Clone)]
enum SetKind {
    OmegaMod { residues: Vec<bool>, modulus: u64 },
    BigOmegaMod { residues: Vec<bool>, modulus: u64 },
    OmegaFrac { intervals: Vec<(f64, f64)>, alpha: f64 },
    BigOmegaFrac { intervals: Vec<(f64, f64)>, alpha: f64 },
    Squarefree,
    Custom { density: Option<f64>, pred: CustomPredicate },
}

/// A subset of the positive integers cut out by a prime-counting condition,
/// possibly shifted to the right.
#[derive(Clone)]
pub struct ArithmeticSet {
    kind: SetKind,
    shift: u64,
    label: String,
}

fn residue_mask(residues: &[u64], modulus: u64) -> Result<Vec<bool>, SetError> {
    if modulus == 0 {
        return Err(SetError::InvalidModulus(modulus));
    }
    let mut mask = vec![false; modulus as usize];
    for &a in residues {
        if a >= modulus {
            return Err(SetError::ResidueOutOfRange { a, b: modulus });
        }
        mask[a as usize] = true;
    }
    Ok(mask)
}

fn check_intervals(intervals: &[(f64, f64)]) -> Result<(), SetError> {
    for &(lo, hi) in intervals {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo < 0.0 || hi > 0.5 {
            return Err(SetError::InvalidInterval { lo, hi });
        }
    }
    Ok(())
}

fn residue_label(residues: &[u64], modulus: u64) -> String {
    let rs: Vec<String> = residues.iter().map(|a| a.to_string()).collect();
    format!("{{{}}} mod {}", rs.join(","), modulus)
}

/// Distance from x to the nearest integer.
fn circle_norm(x: f64) -> f64 {
    (x - x.round()).abs()
}

impl ArithmeticSet {
    /// {n : omega(n) mod b ∈ A}.
    pub fn omega_mod(residues: &[u64], modulus: u64) -> Result<Self, SetError> {
        Ok(ArithmeticSet {
            label: format!("S_omega({})", residue_label(residues, modulus)),
            kind: SetKind::OmegaMod {
                residues: residue_mask(residues, modulus)?,
                modulus,
            },
            shift: 0,
        })
    }

    /// {n : Omega(n) mod b ∈ A}.
    pub fn bigomega_mod(residues: &[u64], modulus: u64) -> Result<Self, SetError> {
        Ok(ArithmeticSet {
            label: format!("S_bigomega({})", residue_label(residues, modulus)),
            kind: SetKind::BigOmegaMod {
                residues: residue_mask(residues, modulus)?,
                modulus,
            },
            shift: 0,
        })
    }

    /// {n : ‖omega(n) alpha‖ ∈ A} for closed intervals A within [0, 1/2].
    pub fn omega_frac(intervals: Vec<(f64, f64)>, alpha: f64) -> Result<Self, SetError> {
        check_intervals(&intervals)?;
        Ok(ArithmeticSet {
            label: format!("S_omega(||.{alpha}|| in {intervals:?})"),
            kind: SetKind::OmegaFrac { intervals, alpha },
            shift: 0,
        })
    }

    /// {n : ‖Omega(n) alpha‖ ∈ A} for closed intervals A within [0, 1/2].
    pub fn bigomega_frac(intervals: Vec<(f64, f64)>, alpha: f64) -> Result<Self, SetError> {
        check_intervals(&intervals)?;
        Ok(ArithmeticSet {
            label: format!("S_bigomega(||.{alpha}|| in {intervals:?})"),
            kind: SetKind::BigOmegaFrac { intervals, alpha },
            shift: 0,
        })
    }

    pub fn squarefree() -> Self {
        ArithmeticSet {
            label: "squarefree".into(),
            kind: SetKind::Squarefree,
            shift: 0,
        }
    }

    /// A set given by an arbitrary predicate, with an optional known density
    /// used wherever a limiting density is required.
    pub fn custom(
        label: impl Into<String>,
        density: Option<f64>,
        pred: impl Fn(&FactorTable, u64) -> Result<bool, SieveError> + Send + Sync + 'static,
    ) -> Self {
        ArithmeticSet {
            label: label.into(),
            kind: SetKind::Custom {
                density,
                pred: Arc::new(pred),
            },
            shift: 0,
        }
    }

    /// The even numbers, a periodic control set of density 1/2.
    pub fn evens() -> Self {
        Self::custom("evens", Some(0.5), |_, n| Ok(n % 2 == 0))
    }

    /// The same set shifted right by c: n ∈ S + c iff n > c and n − c ∈ S.
    pub fn with_shift(mut self, c: u64) -> Self {
        if c > 0 {
            self.label = format!("{}+{}", self.label, c);
        }
        self.shift = c;
        self
    }

    pub fn shift(&self) -> u64 {
        self.shift
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Membership test; n ≤ shift yields false without touching the table.
    pub fn indicator(&self, table: &FactorTable, n: u64) -> Result<bool, SieveError> {
        if n <= self.shift {
            return Ok(false);
        }
        let m = n - self.shift;
        match &self.kind {
            SetKind::OmegaMod { residues, modulus } => {
                Ok(residues[(table.omega(m)? as u64 % modulus) as usize])
            }
            SetKind::BigOmegaMod { residues, modulus } => {
                Ok(residues[(table.big_omega(m)? as u64 % modulus) as usize])
            }
            SetKind::OmegaFrac { intervals, alpha } => {
                let d = circle_norm(table.omega(m)? as f64 * alpha);
                Ok(intervals.iter().any(|&(lo, hi)| lo <= d && d <= hi))
            }
            SetKind::BigOmegaFrac { intervals, alpha } => {
                let d = circle_norm(table.big_omega(m)? as f64 * alpha);
                Ok(intervals.iter().any(|&(lo, hi)| lo <= d && d <= hi))
            }
            SetKind::Squarefree => table.is_squarefree(m),
            SetKind::Custom { pred, .. } => pred(table, m),
        }
    }

    /// The limiting density, when the kind carries one: |A|/b for modular
    /// kinds, 6/pi^2 for squarefree, twice the total interval length for
    /// fractional kinds (valid for irrational alpha), the declared value for
    /// custom sets.
    pub fn limiting_density(&self) -> Option<f64> {
        match &self.kind {
            SetKind::OmegaMod { residues, modulus }
            | SetKind::BigOmegaMod { residues, modulus } => {
                Some(residues.iter().filter(|&&r| r).count() as f64 / *modulus as f64)
            }
            SetKind::OmegaFrac { intervals, .. } | SetKind::BigOmegaFrac { intervals, .. } => {
                let len: f64 = intervals.iter().map(|&(lo, hi)| hi - lo).sum();
                Some((2.0 * len).min(1.0))
            }
            SetKind::Squarefree => Some(6.0 / (std::f64::consts::PI * std::f64::consts::PI)),
            SetKind::Custom { density, .. } => *density,
        }
    }

    /// True for the residue-set kinds, whose limiting density |A|/b is exact.
    pub fn is_modular(&self) -> bool {
        matches!(
            self.kind,
            SetKind::OmegaMod { .. } | SetKind::BigOmegaMod { .. }
        )
    }

    /// |S ∩ [1, N]| / N.
    pub fn empirical_density(&self, table: &FactorTable, n: u64) -> Result<f64, SieveError> {
        let mut count = 0u64;
        for m in 1..=n {
            if self.indicator(table, m)? {
                count += 1;
            }
        }
        Ok(count as f64 / n as f64)
    }

    /// The centering constant used when the set is turned into a mean-zero
    /// weight: the exact limiting density for modular kinds, the empirical
    /// density over [1, N] otherwise.
    pub fn centering_density(&self, table: &FactorTable, n: u64) -> Result<f64, SieveError> {
        if self.is_modular() {
            Ok(self.limiting_density().expect("modular sets have a density"))
        } else {
            self.empirical_density(table, n)
        }
    }
}

impl std::fmt::Debug for ArithmeticSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ArithmeticSet({})", self.label)
    }
}

/// Residual of the roots-of-unity filter recovering 1_{omega ≡ a mod b} from
/// powers of the rule f(p^k) = e(1/b):
/// |1_{S_{a,b}}(n) − (1/b) Σ_{j<b} e(−aj/b) f(n)^j|.
pub fn roots_identity_residual(
    a: u64,
    b: u64,
    table: &FactorTable,
    n: u64,
) -> Result<f64, SetError> {
    let set = ArithmeticSet::omega_mod(&[a], b)?;
    let f = MultiplicativeRule::omega_root(1.0 / b as f64);
    let fv = f.eval(table, n)?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    for j in 0..b {
        sum += e(-(a as f64) * j as f64 / b as f64) * power;
        power *= fv;
    }
    sum /= b as f64;
    let ind = if set.indicator(table, n)? { 1.0 } else { 0.0 };
    Ok((sum - Complex64::new(ind, 0.0)).norm())
}

/// A complex weight sequence over [1, N] with a declared sup-norm bound.
#[derive(Clone)]
pub struct WeightVector {
    values: Vec<Complex64>,
    bound: f64,
}

impl WeightVector {
    /// Wraps explicit values, checking them against the declared bound
    /// (with 1e-9 slack for accumulated rounding).
    pub fn from_values(values: Vec<Complex64>, bound: f64) -> Result<Self, SetError> {
        let max = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if max > bound + 1e-9 {
            return Err(SetError::BoundExceeded { max, cap: bound });
        }
        Ok(WeightVector { values, bound })
    }

    /// Materializes f(1), ..., f(N).
    pub fn from_rule(
        rule: &MultiplicativeRule,
        table: &FactorTable,
        n: u64,
    ) -> Result<Self, SetError> {
        let mut values = Vec::with_capacity(n as usize);
        for m in 1..=n {
            values.push(rule.eval(table, m)?);
        }
        Self::from_values(values, 1.0)
    }

    /// Materializes 1_S(1), ..., 1_S(N).
    pub fn from_set(set: &ArithmeticSet, table: &FactorTable, n: u64) -> Result<Self, SetError> {
        let mut values = Vec::with_capacity(n as usize);
        for m in 1..=n {
            values.push(Complex64::new(
                if set.indicator(table, m)? { 1.0 } else { 0.0 },
                0.0,
            ));
        }
        Self::from_values(values, 1.0)
    }

    /// The mean-zero weight 1_S(n) − d with d the set's centering density.
    pub fn from_centered_set(
        set: &ArithmeticSet,
        table: &FactorTable,
        n: u64,
    ) -> Result<Self, SetError> {
        let d = set.centering_density(table, n)?;
        let mut values = Vec::with_capacity(n as usize);
        for m in 1..=n {
            let ind = if set.indicator(table, m)? { 1.0 } else { 0.0 };
            values.push(Complex64::new(ind - d, 0.0));
        }
        Self::from_values(values, 1.0)
    }

    pub fn ones(n: u64) -> Self {
        WeightVector {
            values: vec![Complex64::new(1.0, 0.0); n as usize],
            bound: 1.0,
        }
    }

    pub fn len(&self) -> u64 {
        self.values.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// w(n) with 1-based indexing matching the underlying [1, N] range.
    pub fn value(&self, n: u64) -> Complex64 {
        self.values[(n - 1) as usize]
    }

    /// The prefix w(1), ..., w(M).
    pub fn truncated(&self, m: u64) -> Result<Self, SetError> {
        if m == 0 || m > self.len() {
            return Err(SetError::Sieve(SieveError::OutOfRange {
                n: m,
                n_max: self.len(),
            }));
        }
        Ok(WeightVector {
            values: self.values[..m as usize].to_vec(),
            bound: self.bound,
        })
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
