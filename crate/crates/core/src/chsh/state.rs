//! Two-qubit pure states, ±1 observables and Born-rule joint probabilities.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ChshError;

pub type C64 = Complex64;
pub type Mat2 = [[C64; 2]; 2];
pub type Mat4 = [[C64; 4]; 4];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub const IDENTITY2: Mat2 = [[ONE, ZERO], [ZERO, ONE]];
pub const SIGMA_X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub const SIGMA_Z: Mat2 = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];

/// Tolerance for Hermiticity, involution and normalization checks.
pub const STATE_TOL: f64 = 1e-12;

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[2 * i + k][2 * j + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat2_lin(alpha: f64, a: &Mat2, beta: f64, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][j] * alpha + b[i][j] * beta;
        }
    }
    out
}

/// Pure two-qubit state, amplitudes in the order |00⟩, |01⟩, |10⟩, |11⟩.
/// The first tensor factor is Alice's qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitState {
    amplitudes: [C64; 4],
}

impl TwoQubitState {
    pub fn new(amplitudes: [C64; 4]) -> Result<Self, ChshError> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(ChshError::NotNormalized(norm));
        }
        Ok(TwoQubitState { amplitudes })
    }

    pub fn basis(index: usize) -> Self {
        let mut amplitudes = [ZERO; 4];
        amplitudes[index] = ONE;
        TwoQubitState { amplitudes }
    }

    pub fn amplitudes(&self) -> &[C64; 4] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨ψ| op |ψ⟩` (real part; exact for Hermitian `op`).
    pub fn expectation(&self, op: &Mat4) -> f64 {
        let mut acc = ZERO;
        for i in 0..4 {
            for j in 0..4 {
                acc += self.amplitudes[i].conj() * op[i][j] * self.amplitudes[j];
            }
        }
        acc.re
    }
}

/// The EPR pair (|00⟩ + |11⟩)/√2.
pub fn epr_state() -> TwoQubitState {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    TwoQubitState {
        amplitudes: [h, ZERO, ZERO, h],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservableLabel {
    A0,
    A1,
    B0,
    B1,
    Custom,
}

/// A single-qubit observable with spectrum in {+1, −1}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observable {
    matrix: Mat2,
    label: ObservableLabel,
}

impl Observable {
    /// Validates Hermiticity and `O² = I`.
    pub fn new(matrix: Mat2, label: ObservableLabel) -> Result<Self, ChshError> {
        let hermitian = (0..2)
            .all(|i| (0..2).all(|j| (matrix[i][j] - matrix[j][i].conj()).norm() <= STATE_TOL));
        let sq = mat2_mul(&matrix, &matrix);
        let involution =
            (0..2).all(|i| (0..2).all(|j| (sq[i][j] - IDENTITY2[i][j]).norm() <= STATE_TOL));
        if !(hermitian && involution) {
            return Err(ChshError::DegenerateObservable);
        }
        Ok(Observable { matrix, label })
    }

    /// `cos θ·σ_z + sin θ·σ_x`, a measurement direction in the x–z plane.
    pub fn at_angle(theta: f64) -> Self {
        Observable {
            matrix: mat2_lin(theta.cos(), &SIGMA_Z, theta.sin(), &SIGMA_X),
            label: ObservableLabel::Custom,
        }
    }

    /// Alice's setting `a`: σ_z for 0, σ_x for 1.
    pub fn alice(a: u8) -> Self {
        match a {
            0 => Observable {
                matrix: SIGMA_Z,
                label: ObservableLabel::A0,
            },
            _ => Observable {
                matrix: SIGMA_X,
                label: ObservableLabel::A1,
            },
        }
    }

    /// Bob's setting `b`: (σ_z + σ_x)/√2 for 0, (σ_z − σ_x)/√2 for 1.
    pub fn bob(b: u8) -> Self {
        let sign = if b == 0 { 1.0 } else { -1.0 };
        Observable {
            matrix: mat2_lin(FRAC_1_SQRT_2, &SIGMA_Z, sign * FRAC_1_SQRT_2, &SIGMA_X),
            label: if b == 0 {
                ObservableLabel::B0
            } else {
                ObservableLabel::B1
            },
        }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.matrix
    }

    pub fn label(&self) -> ObservableLabel {
        self.label
    }

    /// Eigenprojector `(I ± O)/2` for outcome `+1` (`plus = true`) or `−1`.
    pub fn projector(&self, plus: bool) -> Mat2 {
        let s = if plus { 0.5 } else { -0.5 };
        mat2_lin(0.5, &IDENTITY2, s, &self.matrix)
    }
}

/// `P(x, y)` indexed `[x][y]` with index 0 ↔ +1 and 1 ↔ −1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointProbs(pub [[f64; 2]; 2]);

impl JointProbs {
    pub fn get(&self, x: i8, y: i8) -> f64 {
        self.0[(x < 0) as usize][(y < 0) as usize]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().flatten().sum()
    }

    /// `E[xy] = Σ xy·P(x, y)`.
    pub fn correlation(&self) -> f64 {
        self.0[0][0] + self.0[1][1] - self.0[0][1] - self.0[1][0]
    }
}

/// Born-rule joint outcome probabilities `⟨ψ| Π_x ⊗ Π_y |ψ⟩`.
pub fn joint_outcome_probs(
    state: &TwoQubitState,
    alice: &Observable,
    bob: &Observable,
) -> JointProbs {
    let mut p = [[0.0; 2]; 2];
    for (xi, xp) in [true, false].into_iter().enumerate() {
        for (yi, yp) in [true, false].into_iter().enumerate() {
            let op = kron(&alice.projector(xp), &bob.projector(yp));
            // clamp rounding below zero
            p[xi][yi] = state.expectation(&op).max(0.0);
        }
    }
    JointProbs(p)
}

/// Joint probabilities for the Werner state `v·|ψ⟩⟨ψ| + (1 − v)·I/4`.
pub fn werner_outcome_probs(
    state: &TwoQubitState,
    alice: &Observable,
    bob: &Observable,
    visibility: f64,
) -> JointProbs {
    let pure = joint_outcome_probs(state, alice, bob);
    let mut p = [[0.0; 2]; 2];
    for (xi, xp) in [true, false].into_iter().enumerate() {
        for (yi, yp) in [true, false].into_iter().enumerate() {
            let tr_a = alice.projector(xp)[0][0].re + alice.projector(xp)[1][1].re;
            let tr_b = bob.projector(yp)[0][0].re + bob.projector(yp)[1][1].re;
            p[xi][yi] = visibility * pure.0[xi][yi] + (1.0 - visibility) * tr_a * tr_b / 4.0;
        }
    }
    JointProbs(p)
}

/// `S = E[A0B0] + E[A0B1] + E[A1B0] − E[A1B1]` on a state.
pub fn chsh_value(
    state: &TwoQubitState,
    a0: &Observable,
    a1: &Observable,
    b0: &Observable,
    b1: &Observable,
) -> f64 {
    let e = |a: &Observable, b: &Observable| joint_outcome_probs(state, a, b).correlation();
    e(a0, b0) + e(a0, b1) + e(a1, b0) - e(a1, b1)
}
