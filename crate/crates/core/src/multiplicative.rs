//! Bounded multiplicative functions specified by their prime-power values.
//!
//! A [`MultiplicativeRule`] assigns a complex value of modulus at most 1 to
//! every prime power p^k; evaluation at n multiplies the values over the
//! factorization of n obtained from a [`FactorTable`], with f(1) = 1. The
//! built-in rules cover the Liouville and Möbius functions, indicator of the
//! squarefree numbers, root-of-unity twists of omega and Omega, Archimedean
//! characters n^it, and Dirichlet characters; arbitrary rules can be supplied
//! as closures.

use std::sync::Arc;

use num_complex::Complex64;

use crate::characters::DirichletCharacter;
use crate::fourier::e;
use crate::sieve::{FactorTable, SieveError};

type CustomRule = Arc<dyn Fn(u64, u32) -> Complex64 + Send + Sync>;

#[derive(Clone)]
enum RuleKind {
    One,
    Liouville,
    Mobius,
    SquarefreeIndicator,
    /// f(p^k) = e(phase), so f(n) = e(omega(n) * phase).
    OmegaRoot { phase: f64 },
    /// f(p^k) = e(k * phase), so f(n) = e(Omega(n) * phase).
    BigOmegaRoot { phase: f64 },
    /// f(p^k) = p^{ikt}, so f(n) = n^{it}.
    PowerT { t: f64 },
    Character(DirichletCharacter),
    Custom(CustomRule),
}

/// A multiplicative function with |f(n)| <= 1, defined by prime-power values.
#[derive(Clone)]
pub struct MultiplicativeRule {
    label: String,
    completely_multiplicative: bool,
    kind: RuleKind,
}

impl MultiplicativeRule {
    pub fn one() -> Self {
        MultiplicativeRule {
            label: "one".into(),
            completely_multiplicative: true,
            kind: RuleKind::One,
        }
    }

    /// The Liouville function lambda(n) = (-1)^Omega(n).
    pub fn liouville() -> Self {
        MultiplicativeRule {
            label: "liouville".into(),
            completely_multiplicative: true,
            kind: RuleKind::Liouville,
        }
    }

    /// The Möbius function.
    pub fn mobius() -> Self {
        MultiplicativeRule {
            label: "mobius".into(),
            completely_multiplicative: false,
            kind: RuleKind::Mobius,
        }
    }

    /// Indicator of the squarefree numbers, mu(n)^2.
    pub fn squarefree_indicator() -> Self {
        MultiplicativeRule {
            label: "squarefree".into(),
            completely_multiplicative: false,
            kind: RuleKind::SquarefreeIndicator,
        }
    }

    /// f(n) = zeta^omega(n) for the root of unity zeta = e(phase).
    pub fn omega_root(phase: f64) -> Self {
        MultiplicativeRule {
            label: format!("omega_root({phase})"),
            completely_multiplicative: false,
            kind: RuleKind::OmegaRoot { phase },
        }
    }

    /// f(n) = zeta^Omega(n) for the root of unity zeta = e(phase).
    pub fn bigomega_root(phase: f64) -> Self {
        MultiplicativeRule {
            label: format!("bigomega_root({phase})"),
            completely_multiplicative: true,
            kind: RuleKind::BigOmegaRoot { phase },
        }
    }

    /// f(n) = e(alpha * omega(n)) for arbitrary real alpha.
    pub fn unimodular_omega(alpha: f64) -> Self {
        MultiplicativeRule {
            label: format!("unimodular_omega({alpha})"),
            completely_multiplicative: false,
            kind: RuleKind::OmegaRoot { phase: alpha },
        }
    }

    /// f(n) = e(alpha * Omega(n)) for arbitrary real alpha.
    pub fn unimodular_bigomega(alpha: f64) -> Self {
        MultiplicativeRule {
            label: format!("unimodular_bigomega({alpha})"),
            completely_multiplicative: true,
            kind: RuleKind::BigOmegaRoot { phase: alpha },
        }
    }

    /// The Archimedean character f(n) = n^{it}.
    pub fn power_t(t: f64) -> Self {
        MultiplicativeRule {
            label: format!("power({t})"),
            completely_multiplicative: true,
            kind: RuleKind::PowerT { t },
        }
    }

    pub fn character(chi: DirichletCharacter) -> Self {
        MultiplicativeRule {
            label: chi.label().to_string(),
            completely_multiplicative: true,
            kind: RuleKind::Character(chi),
        }
    }

    /// A rule given by an arbitrary prime-power map. The caller is
    /// responsible for keeping |f(p^k)| <= 1.
    pub fn custom(
        label: impl Into<String>,
        completely_multiplicative: bool,
        f: impl Fn(u64, u32) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        MultiplicativeRule {
            label: label.into(),
            completely_multiplicative,
            kind: RuleKind::Custom(Arc::new(f)),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_completely_multiplicative(&self) -> bool {
        self.completely_multiplicative
    }

    /// Value at the prime power p^k (k >= 1).
    pub fn eval_prime_power(&self, p: u64, k: u32) -> Complex64 {
        match &self.kind {
            RuleKind::One => Complex64::new(1.0, 0.0),
            RuleKind::Liouville => {
                if k % 2 == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            }
            RuleKind::Mobius => match k {
                1 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, 0.0),
            },
            RuleKind::SquarefreeIndicator => {
                if k == 1 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            RuleKind::OmegaRoot { phase } => e(*phase),
            RuleKind::BigOmegaRoot { phase } => e(k as f64 * *phase),
            RuleKind::PowerT { t } => Complex64::from_polar(1.0, k as f64 * t * (p as f64).ln()),
            RuleKind::Character(chi) => chi.value(p).powu(k),
            RuleKind::Custom(f) => f(p, k),
        }
    }

    /// Value at a prime, the quantity entering pretentious distances.
    pub fn prime_value(&self, p: u64) -> Complex64 {
        self.eval_prime_power(p, 1)
    }

    /// f(n) as the product of prime-power values over the factorization of n.
    pub fn eval(&self, table: &FactorTable, n: u64) -> Result<Complex64, SieveError> {
        let mut acc = Complex64::new(1.0, 0.0);
        for (p, k) in table.factorize(n)? {
            acc *= self.eval_prime_power(p, k);
        }
        Ok(acc)
    }

    /// The pointwise complex conjugate rule.
    pub fn conjugate(&self) -> Self {
        let inner = self.clone();
        MultiplicativeRule {
            label: format!("conj({})", self.label),
            completely_multiplicative: self.completely_multiplicative,
            kind: RuleKind::Custom(Arc::new(move |p, k| inner.eval_prime_power(p, k).conj())),
        }
    }

    /// The pointwise product rule (f*g)(p^k) = f(p^k) g(p^k).
    pub fn pointwise_product(&self, other: &Self) -> Self {
        let a = self.clone();
        let b = other.clone();
        MultiplicativeRule {
            label: format!("{}*{}", self.label, other.label),
            completely_multiplicative: self.completely_multiplicative
                && other.completely_multiplicative,
            kind: RuleKind::Custom(Arc::new(move |p, k| {
                a.eval_prime_power(p, k) * b.eval_prime_power(p, k)
            })),
        }
    }

    /// The pointwise power rule f^j.
    pub fn power(&self, j: u32) -> Self {
        let inner = self.clone();
        MultiplicativeRule {
            label: format!("{}^{j}", self.label),
            completely_multiplicative: self.completely_multiplicative,
            kind: RuleKind::Custom(Arc::new(move |p, k| inner.eval_prime_power(p, k).powu(j))),
        }
    }
}

impl std::fmt::Debug for MultiplicativeRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MultiplicativeRule({})", self.label)
    }
}
