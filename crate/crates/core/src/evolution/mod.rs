//! Key evolution: PRF-driven updates, the affine Markov model, its spectral
//! analysis, and the bounded-noise accumulation check.

mod accumulation;
mod markov;
mod prf;
mod spectral;

use thiserror::Error;

use crate::zq::ZqError;

pub use accumulation::{noise_accumulation_check, AccumulationReport, DEFAULT_ACCUMULATION_TRIALS};
pub use markov::{
    build_kernel, build_kernel_capped, check_primitive, default_k_max, markov_step,
    markov_step_with_noise, ChainSpec, KernelMatrix, NoiseLaw, Primitivity, DEFAULT_KERNEL_CAP,
};
pub use prf::{prf_evolve, prf_matrix, prf_noise, prf_secret, LatticeState, PrfState};
pub use spectral::{
    eigenvalue_magnitudes, empirical_mixing_time, spectral_report, tau_mix_bound,
    verify_ergodicity, ErgodicityReport, SpectralReport, EMPIRICAL_MIXING_MAX_STATES,
    STOCHASTIC_TOL,
};

#[derive(Debug, Error, PartialEq)]
pub enum EvolutionError {
    #[error("state space q^n = {q}^{n} ({states:?} states) exceeds the kernel cap of {cap}")]
    StateSpaceTooLarge {
        q: u32,
        n: usize,
        states: Option<usize>,
        cap: usize,
    },
    #[error("kernel row {row} sums to {sum} or has negative entries")]
    NotStochastic { row: usize, sum: f64 },
    #[error("matrix is not invertible mod {q} (det ≡ 0)")]
    NotInvertible { q: u32 },
    #[error("transition matrix must be square and non-empty")]
    NotSquare,
    #[error("invalid noise law: {0}")]
    InvalidNoise(String),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("eigenvalue iteration did not converge")]
    EigenFailed,
    #[error("modulus mismatch: matrix is mod {matrix}, parameters use {params}")]
    ModulusMismatch { matrix: u32, params: u32 },
    #[error(transparent)]
    Zq(#[from] ZqError),
}
