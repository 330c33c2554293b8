//! Dirichlet characters with explicit value tables.
//!
//! Characters mod q are enumerated through the structure of (Z/q)^*: one
//! cyclic component per odd prime-power divisor (generated by a primitive
//! root), plus the components {-1} x <3> for the power of two. A character is
//! determined by an exponent tuple against those generators; its value table
//! over a full period is materialized at construction so that evaluation is a
//! single array lookup.

use num_complex::Complex64;
use thiserror::Error;

use crate::fourier::e;

/// Largest supported modulus. Value tables are materialized in full, so the
/// cap keeps a single character under 16 MiB.
pub const MAX_MODULUS: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum CharacterError {
    #[error("character modulus must be >= 1, got {0}")]
    InvalidModulus(u64),
    #[error("character modulus {0} exceeds the supported maximum {MAX_MODULUS}")]
    ModulusTooLarge(u64),
}

/// A Dirichlet character mod q, stored as its full value table.
#[derive(Clone)]
pub struct DirichletCharacter {
    modulus: u64,
    conductor: u64,
    label: String,
    values: Vec<Complex64>,
}

/// One cyclic factor of (Z/q)^*: `dlog[r]` is the exponent of the generator
/// reaching residue r, or `None` when r is picked up by another factor.
struct Component {
    modulus: u64,
    order: u64,
    dlog: Vec<Option<u64>>,
}

fn mod_pow(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = (acc as u128 * base as u128 % m as u128) as u64;
        }
        base = (base as u128 * base as u128 % m as u128) as u64;
        exp >>= 1;
    }
    acc
}

fn prime_factors(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            let mut k = 0;
            while n % d == 0 {
                n /= d;
                k += 1;
            }
            out.push((d, k));
        }
        d += 1;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Primitive root mod p^a for an odd prime p.
fn primitive_root(p: u64, a: u32) -> u64 {
    let phi_p = p - 1;
    let factors = prime_factors(phi_p);
    let mut g = 2;
    loop {
        if factors.iter().all(|&(q, _)| mod_pow(g, phi_p / q, p) != 1) {
            break;
        }
        g += 1;
    }
    if a == 1 {
        return g;
    }
    // A primitive root mod p lifts to p^a unless g^(p-1) = 1 mod p^2.
    let p2 = p * p;
    if mod_pow(g, p - 1, p2) == 1 {
        g += p;
    }
    g
}

fn dlog_table(m: u64, generator: u64, order: u64) -> Vec<Option<u64>> {
    let mut dlog = vec![None; m as usize];
    let mut r = 1u64;
    for k in 0..order {
        dlog[r as usize] = Some(k);
        r = (r as u128 * generator as u128 % m as u128) as u64;
    }
    dlog
}

fn unit_group_components(q: u64) -> Vec<Component> {
    let mut comps = Vec::new();
    for (p, a) in prime_factors(q) {
        let m = p.pow(a);
        if p == 2 {
            if a >= 2 {
                comps.push(Component {
                    modulus: m,
                    order: 2,
                    dlog: dlog_table(m, m - 1, 2),
                });
            }
            if a >= 3 {
                let order = m / 4;
                comps.push(Component {
                    modulus: m,
                    order,
                    dlog: dlog_table(m, 3, order),
                });
            }
            // For 2^a with a >= 3 every unit is uniquely (-1)^s 3^k; merge the
            // two partial tables into joint coordinates.
            if a >= 3 {
                let order3 = m / 4;
                let last = comps.len() - 1;
                let mut sign = vec![None; m as usize];
                let mut three = vec![None; m as usize];
                for s in 0..2u64 {
                    for k in 0..order3 {
                        let r = (mod_pow(m - 1, s, m) as u128 * mod_pow(3, k, m) as u128
                            % m as u128) as u64;
                        sign[r as usize] = Some(s);
                        three[r as usize] = Some(k);
                    }
                }
                comps[last - 1].dlog = sign;
                comps[last].dlog = three;
            }
        } else {
            let order = m / p * (p - 1);
            let g = primitive_root(p, a);
            comps.push(Component {
                modulus: m,
                order,
                dlog: dlog_table(m, g, order),
            });
        }
    }
    comps
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl DirichletCharacter {
    /// The character mod 1, identically equal to 1.
    pub fn trivial() -> Self {
        DirichletCharacter {
            modulus: 1,
            conductor: 1,
            label: "chi_1_0".to_string(),
            values: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// All phi(q) characters mod q, principal first, in a fixed enumeration
    /// order (lexicographic over generator exponents).
    pub fn all_mod(q: u64) -> Result<Vec<Self>, CharacterError> {
        if q == 0 {
            return Err(CharacterError::InvalidModulus(q));
        }
        if q > MAX_MODULUS {
            return Err(CharacterError::ModulusTooLarge(q));
        }
        if q == 1 {
            return Ok(vec![Self::trivial()]);
        }
        let comps = unit_group_components(q);
        let phi: u64 = comps.iter().map(|c| c.order).product();
        let mut out = Vec::with_capacity(phi as usize);
        let mut exps = vec![0u64; comps.len()];
        for idx in 0..phi {
            let mut values = vec![Complex64::new(0.0, 0.0); q as usize];
            for n in 0..q {
                if gcd(n, q) != 1 {
                    continue;
                }
                let mut phase = 0.0f64;
                for (c, &ec) in comps.iter().zip(exps.iter()) {
                    let k = c.dlog[(n % c.modulus) as usize]
                        .expect("unit residue missing from discrete log table");
                    phase += (ec as f64 * k as f64) / c.order as f64;
                }
                values[n as usize] = e(phase);
            }
            let mut chi = DirichletCharacter {
                modulus: q,
                conductor: 0,
                label: format!("chi_{q}_{idx}"),
                values,
            };
            chi.conductor = chi.compute_conductor();
            out.push(chi);
            // Advance the exponent tuple with ripple carry.
            for (c, ec) in comps.iter().zip(exps.iter_mut()).rev() {
                *ec += 1;
                if *ec < c.order {
                    break;
                }
                *ec = 0;
            }
        }
        Ok(out)
    }

    /// The primitive characters mod q (possibly empty, e.g. q = 2, 6, 10).
    pub fn primitive_mod(q: u64) -> Result<Vec<Self>, CharacterError> {
        Ok(Self::all_mod(q)?
            .into_iter()
            .filter(|c| c.is_primitive())
            .collect())
    }

    /// The principal character mod q.
    pub fn principal(q: u64) -> Result<Self, CharacterError> {
        Ok(Self::all_mod(q)?.remove(0))
    }

    fn compute_conductor(&self) -> u64 {
        let q = self.modulus;
        'divisor: for d in 1..=q {
            if q % d != 0 {
                continue;
            }
            for n in 1..q {
                if gcd(n, q) == 1
                    && (n - 1) % d == 0
                    && (self.values[n as usize] - Complex64::new(1.0, 0.0)).norm() > 1e-9
                {
                    continue 'divisor;
                }
            }
            return d;
        }
        q
    }

    /// chi(n), extended q-periodically to all of Z (0 on non-units).
    pub fn value(&self, n: u64) -> Complex64 {
        self.values[(n % self.modulus) as usize]
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor == self.modulus
    }

    pub fn is_principal(&self) -> bool {
        self.conductor == 1
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl std::fmt::Debug for DirichletCharacter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "DirichletCharacter({}, mod {}, conductor {})",
            self.label, self.modulus, self.conductor
        )
    }
}
