//! Finite commuting measure-preserving systems and weighted polynomial
//! multiple ergodic averages.
//!
//! Points carry the uniform measure, transformations are permutations
//! (bijections preserve uniform measure exactly), and every average is a
//! finite sum, so the statements under test become exactly computable. Maps
//! are powered through their cycle decomposition: after O(|X|) preprocessing
//! a power T^e costs O(1) per point, with polynomial exponents reduced mod
//! cycle lengths.

mod average;
mod system;

pub use average::{
    default_uniformity_degree, intersection_measure, partial_summation_check, recurrence_scan,
    restricted_vs_scaled, structured_weight_average, uniformity_bound_experiment,
    weighted_average, AverageTrace, RecurrenceScan, WeightedAverage,
};
pub use system::{
    FiniteSystem, IntPolynomial, Observable, Permutation, PolynomialMatrix, DEFAULT_POINT_BUDGET,
};

use thiserror::Error;

use crate::gowers::GowersError;
use crate::sets::SetError;
use crate::sieve::SieveError;

#[derive(Debug, Error)]
pub enum ErgodicError {
    #[error("map array of length {got} is not a permutation of {expected} points")]
    NotBijection { expected: usize, got: usize },
    #[error("maps {i} and {j} do not commute (first disagreement at point {x})")]
    NotCommuting { i: usize, j: usize, x: usize },
    #[error("system of {size} points exceeds the budget of {budget}")]
    PointBudget { size: u128, budget: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("arithmetic overflow computing {0}")]
    Overflow(&'static str),
    #[error("recurrence requires zero constant terms, but p[{row}][{col}](0) != 0")]
    ZeroConstantRequired { row: usize, col: usize },
    #[error("the set A must have positive measure")]
    EmptyMeasure,
    #[error("beta = {num}/{den} does not give an integer span N/beta for N = {n}")]
    BetaNotRealizable { num: u64, den: u64, n: u64 },
    #[error("observable value of modulus {max} exceeds the declared cap {cap}")]
    ObservableExceedsCap { max: f64, cap: f64 },
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Sieve(#[from] SieveError),
    #[error(transparent)]
    Gowers(#[from] GowersError),
}
