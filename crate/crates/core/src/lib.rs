//! A numerical laboratory for uniformity phenomena of bounded multiplicative
//! functions and for weighted multiple ergodic averages on finite systems.
//!
//! The crate is organized around five computable objects:
//!
//! * [`sieve::FactorTable`] — a smallest-prime-factor sieve giving O(log n)
//!   factorization, omega/Omega, and membership tests for arithmetic sets
//!   defined through prime-counting functions ([`sets::ArithmeticSet`]).
//! * [`fourier::CyclicSignal`] / [`fourier::Spectrum`] — complex sequences on
//!   Z_N with the averaged Fourier transform f̂(ξ) = (1/N) Σ f(n) e(−nξ/N).
//! * Gowers uniformity norms U^s(Z_N) ([`gowers`]), with a spectral U² oracle
//!   and interval-restricted variants.
//! * The major-arc kernel decomposition f = f_st + f_un ([`structure`]),
//!   splitting a bounded weight into a spectrally confined structured part and
//!   a uniform remainder.
//! * Finite measure-preserving systems with commuting transformations and
//!   weighted polynomial ergodic averages ([`ergodic`]).
//!
//! [`pretentious`] adds Halász-style distance computations and a heuristic
//! aperiodicity classifier; [`combinatorics`] searches for linear patterns,
//! IP_k configurations, and arithmetic progressions with restricted common
//! differences.

pub mod characters;
pub mod combinatorics;
pub mod ergodic;
pub mod fourier;
pub mod gowers;
pub mod multiplicative;
pub mod pretentious;
pub mod sets;
pub mod sieve;
pub mod structure;
