//! The CHSH game: two-qubit state algebra, round sampling for quantum and
//! local strategies, estimation and transcript verification.

mod game;
mod state;

use thiserror::Error;

pub use game::{
    angle_grid, correlation, estimate, hoeffding_half_width, lhv_max, lhv_min, play_round,
    quantum_advantage_gap, run_game, tsirelson_scan, verify_session, ChshEstimate, ChshRound,
    ChshTranscript, LhvTable, RoundSampler, Strategy, TsirelsonScan, VerificationReport,
    CLASSICAL_BOUND, DEFAULT_EPSILON,
};
pub use state::{
    chsh_value, epr_state, joint_outcome_probs, kron, werner_outcome_probs, JointProbs, Mat2, Mat4,
    Observable, ObservableLabel, TwoQubitState, C64, IDENTITY2, SIGMA_X, SIGMA_Z, STATE_TOL,
};

#[derive(Debug, Error, PartialEq)]
pub enum ChshError {
    #[error("state is not normalized (‖ψ‖² = {0})")]
    NotNormalized(f64),
    #[error("observable must be Hermitian with eigenvalues ±1")]
    DegenerateObservable,
    #[error("round {round} is inconsistent: C ≠ x·y·(−1)^(a·b) or values out of range")]
    InconsistentTranscript { round: usize },
    #[error("transcript has no rounds")]
    EmptyTranscript,
    #[error("visibility must lie in [0, 1], got {0}")]
    InvalidVisibility(f64),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
}
