//! Smallest-prime-factor sieve and factorization queries.
//!
//! A [`FactorTable`] stores, for every integer in `[2, n_max]`, its smallest
//! prime factor in a `u32` slot. The table is built with a linear sieve in
//! O(n_max) time and 4·n_max bytes, and answers factorization, omega, and
//! Omega queries in O(log n) by repeated division by the stored factor.

use thiserror::Error;

/// Default cap on the sieve allocation, in bytes of smallest-prime-factor
/// storage. 1 GiB covers n_max up to about 2.6e8.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;

#[derive(Debug, Error)]
pub enum SieveError {
    #[error("factor table requires n_max >= 2, got {0}")]
    RangeTooSmall(u64),
    #[error("n_max = {n_max} needs {needed} bytes of sieve storage, over the budget of {budget}")]
    BudgetExceeded {
        n_max: u64,
        needed: u64,
        budget: u64,
    },
    #[error("n = {n} is outside the factor table range [1, {n_max}]")]
    OutOfRange { n: u64, n_max: u64 },
}

/// Smallest-prime-factor table over `[2, n_max]`.
pub struct FactorTable {
    n_max: u64,
    spf: Vec<u32>,
}

impl std::fmt::Debug for FactorTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FactorTable(n_max = {})", self.n_max)
    }
}


impl FactorTable {
    /// Builds the table with the default memory budget.
    pub fn build(n_max: u64) -> Result<Self, SieveError> {
        Self::build_with_budget(n_max, DEFAULT_MEMORY_BUDGET)
    }

    /// Builds the table, refusing allocations beyond `budget_bytes`.
    pub fn build_with_budget(n_max: u64, budget_bytes: usize) -> Result<Self, SieveError> {
        if n_max < 2 {
            return Err(SieveError::RangeTooSmall(n_max));
        }
        let needed = (n_max + 1).saturating_mul(4);
        if n_max > u32::MAX as u64 || needed > budget_bytes as u64 {
            return Err(SieveError::BudgetExceeded {
                n_max,
                needed,
                budget: budget_bytes as u64,
            });
        }
        let len = (n_max + 1) as usize;
        let mut spf = vec![0u32; len];
        let mut primes: Vec<u32> = Vec::new();
        for i in 2..len {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            for &p in &primes {
                let p = p as usize;
                if p > spf[i] as usize || i * p >= len {
                    break;
                }
                spf[i * p] = p as u32;
            }
        }
        Ok(FactorTable { n_max, spf })
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    fn check(&self, n: u64) -> Result<(), SieveError> {
        if n == 0 || n > self.n_max {
            Err(SieveError::OutOfRange {
                n,
                n_max: self.n_max,
            })
        } else {
            Ok(())
        }
    }

    /// Smallest prime factor of `n`; requires `2 <= n <= n_max`.
    pub fn smallest_prime_factor(&self, n: u64) -> Result<u64, SieveError> {
        self.check(n)?;
        if n == 1 {
            return Err(SieveError::OutOfRange {
                n,
                n_max: self.n_max,
            });
        }
        Ok(self.spf[n as usize] as u64)
    }

    /// Number of distinct prime factors; omega(1) = 0.
    pub fn omega(&self, n: u64) -> Result<u32, SieveError> {
        self.check(n)?;
        let mut m = n as usize;
        let mut count = 0;
        while m > 1 {
            let p = self.spf[m];
            count += 1;
            while m > 1 && self.spf[m] == p {
                m /= p as usize;
            }
        }
        Ok(count)
    }

    /// Number of prime factors with multiplicity; Omega(1) = 0.
    pub fn big_omega(&self, n: u64) -> Result<u32, SieveError> {
        self.check(n)?;
        let mut m = n as usize;
        let mut count = 0;
        while m > 1 {
            m /= self.spf[m] as usize;
            count += 1;
        }
        Ok(count)
    }

    /// Prime factorization as (prime, exponent) pairs in increasing prime order.
    pub fn factorize(&self, n: u64) -> Result<Vec<(u64, u32)>, SieveError> {
        self.check(n)?;
        let mut m = n as usize;
        let mut out = Vec::new();
        while m > 1 {
            let p = self.spf[m];
            let mut k = 0;
            while m > 1 && self.spf[m] == p {
                m /= p as usize;
                k += 1;
            }
            out.push((p as u64, k));
        }
        Ok(out)
    }

    pub fn is_prime(&self, n: u64) -> Result<bool, SieveError> {
        self.check(n)?;
        Ok(n >= 2 && self.spf[n as usize] as u64 == n)
    }

    pub fn is_squarefree(&self, n: u64) -> Result<bool, SieveError> {
        self.check(n)?;
        let mut m = n as usize;
        while m > 1 {
            let p = self.spf[m] as usize;
            m /= p;
            if m > 1 && self.spf[m] as usize == p {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Iterates the primes in `[2, n_max]` in increasing order.
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.spf
            .iter()
            .enumerate()
            .skip(2)
            .filter(|(i, &p)| p as usize == *i)
            .map(|(i, _)| i as u64)
    }
}

/// Deterministic Miller-Rabin primality test, exact for all `u64` inputs.
///
/// Uses the verified witness set {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d % 2 == 0 {
        d /= 2;
        r += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut base: u64, mut exp: u64| {
        let mut acc = 1u64;
        base %= n;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul(acc, base);
            }
            base = mul(base, base);
            exp >>= 1;
        }
        acc
    };
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..r - 1 {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
