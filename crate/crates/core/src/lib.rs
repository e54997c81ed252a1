//! Fourier extension of equispaced samples on `[-1, 1]` to Fourier series on
//! `[-T, T]`, solved in `O(N log^2 N)` by projecting onto periodic discrete
//! prolate spheroidal sequences (explicitly or through a randomized sketch).

pub mod approx;
pub mod error;
pub mod formats;
pub mod lstsq;
pub mod operator;
pub mod params;
pub mod plunge;
pub mod scalar;
pub mod solver;
pub mod tridiagonal;

pub use error::{Error, Result};
pub use params::{resolve, ProblemConfig, Rational};
pub use scalar::Real;
pub use solver::{Method, SolveReport};

/// Double-precision instantiations.
pub type Coefficients64 = operator::Coefficients<f64>;
pub type SampleVector64 = operator::SampleVector<f64>;
pub type SolveReport64 = solver::SolveReport<f64>;
pub type PlungeBasis64 = plunge::PlungeBasis<f64>;
pub type Operator64 = operator::FftOperator<f64>;

/// Single-precision instantiations; use `tau` of `1e-5` or larger.
pub type Coefficients32 = operator::Coefficients<f32>;
pub type SampleVector32 = operator::SampleVector<f32>;
pub type SolveReport32 = solver::SolveReport<f32>;
