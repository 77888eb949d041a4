//! Exact scalars, combinatorial identities and entropy functionals.

mod combinatorics;
mod config;
mod entropy;
mod field;
mod integrals;
mod linalg;
mod qsqrt2;

pub use combinatorics::{
    beta_identity, beta_integral_closed, beta_integral_expanded, binomial, binomial_pmf,
    compositions, hypergeometric_pmf, incomplete_beta_qsqrt2, multinomial, multinomial_sandwich,
    FrequencyVector, MultinomialSandwich,
};
pub use config::Config;
pub use entropy::{exact_exp_neg_nd, pinsker_pair_check, rel_entropy, PinskerReport};
pub use field::{
    fraction_string, int, max_of, parse_fraction, rat, rational_grid_point, sum, sum_ref, Field,
    Rational,
};
pub use integrals::{integral_sandwich_check, simpson, IntegralSandwich};
pub use linalg::{null_space, rank, row_reduce, solve_sparse};
pub use qsqrt2::QSqrt2;
