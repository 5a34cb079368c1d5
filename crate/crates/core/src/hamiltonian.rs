//! CHSH transcripts as 2-local Hamiltonians: one 4×4 term per round on a
//! fresh EPR pair, exact ground energy by blockwise Jacobi, and (α, β)
//! promise decisions.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chsh::{
    epr_state, kron, ChshTranscript, Mat4, Observable, TwoQubitState, C64, IDENTITY2,
};

/// Off-diagonal magnitude below which Jacobi skips a rotation (scaled by
/// `max(1, ‖H‖_F)`).
pub const JACOBI_THRESHOLD: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-9;
const MAX_SWEEPS: usize = 64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Error, PartialEq)]
pub enum HamiltonianError {
    #[error("matrix is not Hermitian (‖H − H†‖ = {0:e})")]
    NotHermitian(f64),
    #[error("term on pair {pair} has operator norm {norm} > 1")]
    NormExceeded { pair: usize, norm: f64 },
    #[error("invalid promise: alpha ({alpha}) must be below beta ({beta})")]
    InvalidPromise { alpha: f64, beta: f64 },
    #[error("transcript has no rounds")]
    EmptyTranscript,
}

/// A 4×4 Hermitian operator on two qubits (Alice ⊗ Bob).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianOp4 {
    matrix: Mat4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen4 {
    /// Ascending.
    pub values: [f64; 4],
    /// Column `j` is the eigenvector for `values[j]`.
    pub vectors: Mat4,
    /// `max_j ‖H v_j − λ_j v_j‖`.
    pub max_residual: f64,
}

fn hermitian_defect(m: &Mat4) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            acc += (m[i][j] - m[j][i].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn adjoint(a: &Mat4) -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

fn identity4() -> Mat4 {
    let mut out = [[ZERO; 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        row[i] = ONE;
    }
    out
}

impl HermitianOp4 {
    pub fn new(matrix: Mat4) -> Result<Self, HamiltonianError> {
        let d = hermitian_defect(&matrix);
        if d > HERMITIAN_TOL {
            return Err(HamiltonianError::NotHermitian(d));
        }
        Ok(HermitianOp4 { matrix })
    }

    pub fn zero() -> Self {
        HermitianOp4 {
            matrix: [[ZERO; 4]; 4],
        }
    }

    pub fn identity() -> Self {
        HermitianOp4 {
            matrix: identity4(),
        }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.matrix)
    }

    pub fn add(&self, other: &HermitianOp4) -> HermitianOp4 {
        let mut m = self.matrix;
        for (row, orow) in m.iter_mut().zip(other.matrix.iter()) {
            for (x, y) in row.iter_mut().zip(orow) {
                *x += y;
            }
        }
        HermitianOp4 { matrix: m }
    }

    pub fn trace(&self) -> f64 {
        (0..4).map(|i| self.matrix[i][i].re).sum()
    }

    pub fn expectation(&self, state: &TwoQubitState) -> f64 {
        state.expectation(&self.matrix)
    }

    /// Cyclic complex Jacobi. Each pivot `(p, q)` is first made real by a
    /// phase on column `q`, then annihilated by a real Givens rotation.
    pub fn eigen(&self) -> Eigen4 {
        let mut a = self.matrix;
        let mut v = identity4();
        let scale = self
            .matrix
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            .max(1.0);
        let threshold = JACOBI_THRESHOLD * scale;
        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..3 {
                for q in p + 1..4 {
                    let apq = a[p][q];
                    let mag = apq.norm();
                    if mag <= threshold {
                        continue;
                    }
                    rotated = true;
                    let phase = C64::from_polar(1.0, -apq.arg());
                    let theta = 0.5 * (2.0 * mag).atan2(a[q][q].re - a[p][p].re);
                    let (s, c) = theta.sin_cos();
                    let mut u = identity4();
                    u[p][p] = C64::new(c, 0.0);
                    u[p][q] = C64::new(s, 0.0);
                    u[q][p] = phase * -s;
                    u[q][q] = phase * c;
                    a = mat4_mul(&adjoint(&u), &mat4_mul(&a, &u));
                    // restore exact Hermiticity lost to rounding
                    for i in 0..4 {
                        a[i][i].im = 0.0;
                        for j in i + 1..4 {
                            let avg = (a[i][j] + a[j][i].conj()) * 0.5;
                            a[i][j] = avg;
                            a[j][i] = avg.conj();
                        }
                    }
                    v = mat4_mul(&v, &u);
                }
            }
            if !rotated {
                break;
            }
        }

        let mut order = [0usize, 1, 2, 3];
        order.sort_by(|&i, &j| a[i][i].re.total_cmp(&a[j][j].re));
        let mut values = [0.0; 4];
        let mut vectors = [[ZERO; 4]; 4];
        for (col, &k) in order.iter().enumerate() {
            values[col] = a[k][k].re;
            for row in 0..4 {
                vectors[row][col] = v[row][k];
            }
        }
        let mut max_residual: f64 = 0.0;
        for j in 0..4 {
            let mut r = 0.0;
            for i in 0..4 {
                let hv: C64 = (0..4).map(|k| self.matrix[i][k] * vectors[k][j]).sum();
                r += (hv - vectors[i][j] * values[j]).norm_sqr();
            }
            max_residual = max_residual.max(r.sqrt());
        }
        Eigen4 {
            values,
            vectors,
            max_residual,
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().values[0]
    }

    /// Spectral norm `max |λ|`.
    pub fn operator_norm(&self) -> f64 {
        let e = self.eigen();
        e.values[0].abs().max(e.values[3].abs())
    }
}

/// `½(I − (−1)^{a·b} A_a ⊗ B_b)` with the canonical CHSH observables.
pub fn term_from_settings(a: u8, b: u8) -> HermitianOp4 {
    let sign = if a & b & 1 == 1 { -1.0 } else { 1.0 };
    let ab = kron(Observable::alice(a).matrix(), Observable::bob(b).matrix());
    let id = kron(&IDENTITY2, &IDENTITY2);
    let mut m = [[ZERO; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = (id[i][j] - ab[i][j] * sign) * 0.5;
        }
    }
    HermitianOp4 { matrix: m }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianInstance {
    terms: Vec<(usize, HermitianOp4)>,
    pair_count: usize,
    norm_check: f64,
}

impl HamiltonianInstance {
    /// Terms sharing a `pair_index` act on the same two qubits and are summed.
    pub fn from_terms(terms: Vec<(usize, HermitianOp4)>) -> Result<Self, HamiltonianError> {
        let mut norm_check: f64 = 0.0;
        for (pair, op) in &terms {
            let d = op.hermitian_defect();
            if d > HERMITIAN_TOL {
                return Err(HamiltonianError::NotHermitian(d));
            }
            let norm = op.operator_norm();
            if norm > 1.0 + NORM_TOL {
                return Err(HamiltonianError::NormExceeded { pair: *pair, norm });
            }
            norm_check = norm_check.max(norm);
        }
        let pair_count = terms
            .iter()
            .map(|(p, _)| *p)
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        Ok(HamiltonianInstance {
            terms,
            pair_count,
            norm_check,
        })
    }

    pub fn terms(&self) -> &[(usize, HermitianOp4)] {
        &self.terms
    }

    pub fn pair_count(&self) -> usize {
        self.pair_count
    }

    /// Largest operator norm among the terms.
    pub fn norm_check(&self) -> f64 {
        self.norm_check
    }

    /// Summed 4×4 block per pair index.
    pub fn blocks(&self) -> BTreeMap<usize, HermitianOp4> {
        let mut out: BTreeMap<usize, HermitianOp4> = BTreeMap::new();
        for (pair, op) in &self.terms {
            let e = out.entry(*pair).or_insert_with(HermitianOp4::zero);
            *e = e.add(op);
        }
        out
    }

    /// Direct sum with `other`, whose pair indices are shifted past ours.
    pub fn disjoint_union(&self, other: &HamiltonianInstance) -> HamiltonianInstance {
        let offset = self.terms.iter().map(|(p, _)| p + 1).max().unwrap_or(0);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|(p, op)| (p + offset, *op)));
        HamiltonianInstance {
            terms,
            pair_count: self.pair_count + other.pair_count,
            norm_check: self.norm_check.max(other.norm_check),
        }
    }
}

/// One term per round on its own EPR pair (`pair_index = round index`).
pub fn instance_from_transcript(
    transcript: &ChshTranscript,
) -> Result<HamiltonianInstance, HamiltonianError> {
    if transcript.rounds.is_empty() {
        return Err(HamiltonianError::EmptyTranscript);
    }
    let table: Vec<HermitianOp4> = (0..4).map(|i| term_from_settings(i >> 1, i & 1)).collect();
    let terms = transcript
        .rounds
        .iter()
        .enumerate()
        .map(|(i, r)| (i, table[(2 * r.a + r.b) as usize]))
        .collect();
    HamiltonianInstance::from_terms(terms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundEnergyReport {
    pub ground_energy: f64,
    /// `(pair_index, λ_min of that pair's block)`.
    pub per_pair_energies: Vec<(usize, f64)>,
    pub max_residual: f64,
}

pub fn ground_energy_report(instance: &HamiltonianInstance) -> GroundEnergyReport {
    let mut per_pair_energies = Vec::with_capacity(instance.pair_count());
    let mut max_residual: f64 = 0.0;
    // rounds drawn from only four settings: reuse eigensolves for repeated blocks
    let mut cache: Vec<(HermitianOp4, f64)> = Vec::new();
    for (pair, block) in instance.blocks() {
        let lambda = match cache.iter().find(|(b, _)| *b == block) {
            Some((_, l)) => *l,
            None => {
                let e = block.eigen();
                max_residual = max_residual.max(e.max_residual);
                cache.push((block, e.values[0]));
                e.values[0]
            }
        };
        per_pair_energies.push((pair, lambda));
    }
    GroundEnergyReport {
        ground_energy: per_pair_energies.iter().map(|(_, l)| l).sum(),
        per_pair_energies,
        max_residual,
    }
}

/// `λ_min(H)` as the sum of per-pair block minima.
pub fn ground_energy(instance: &HamiltonianInstance) -> f64 {
    ground_energy_report(instance).ground_energy
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromiseInstance {
    pub hamiltonian: HamiltonianInstance,
    pub alpha: f64,
    pub beta: f64,
}

impl PromiseInstance {
    pub fn new(
        hamiltonian: HamiltonianInstance,
        alpha: f64,
        beta: f64,
    ) -> Result<Self, HamiltonianError> {
        // NaN bounds fail this too
        if alpha.partial_cmp(&beta) != Some(std::cmp::Ordering::Less) {
            return Err(HamiltonianError::InvalidPromise { alpha, beta });
        }
        Ok(PromiseInstance {
            hamiltonian,
            alpha,
            beta,
        })
    }

    pub fn gap(&self) -> f64 {
        self.beta - self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromiseDecision {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
    #[serde(rename = "outside_promise")]
    OutsidePromise,
}

impl fmt::Display for PromiseDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromiseDecision::Yes => "YES",
            PromiseDecision::No => "NO",
            PromiseDecision::OutsidePromise => "outside_promise",
        })
    }
}

pub fn decide_promise(instance: &PromiseInstance) -> Result<PromiseDecision, HamiltonianError> {
    if instance.alpha.partial_cmp(&instance.beta) != Some(std::cmp::Ordering::Less) {
        return Err(HamiltonianError::InvalidPromise {
            alpha: instance.alpha,
            beta: instance.beta,
        });
    }
    let e = ground_energy(&instance.hamiltonian);
    Ok(if e <= instance.alpha {
        PromiseDecision::Yes
    } else if e >= instance.beta {
        PromiseDecision::No
    } else {
        PromiseDecision::OutsidePromise
    })
}

/// `⟨EPR| H_{ab} |EPR⟩ = (1 − 1/√2)/2` for every setting.
pub fn ideal_term_energy() -> f64 {
    0.5 * (1.0 - FRAC_1_SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEnergyReport {
    pub m: usize,
    /// Exact `⟨EPR| H_{ab} |EPR⟩` indexed `[a][b]`.
    pub ideal_term_energies: [[f64; 2]; 2],
    pub ideal_expected: f64,
    pub identity_holds: bool,
    /// Mean of `(1 − c)/2` over rounds.
    pub measured_mean_energy: f64,
    pub deviation: f64,
}

pub fn correlation_energy_link(
    transcript: &ChshTranscript,
) -> Result<CorrelationEnergyReport, HamiltonianError> {
    if transcript.rounds.is_empty() {
        return Err(HamiltonianError::EmptyTranscript);
    }
    let psi = epr_state();
    let mut ideal_term_energies = [[0.0; 2]; 2];
    for a in 0..2u8 {
        for b in 0..2u8 {
            ideal_term_energies[a as usize][b as usize] =
                term_from_settings(a, b).expectation(&psi);
        }
    }
    let ideal_expected = ideal_term_energy();
    let identity_holds = ideal_term_energies
        .iter()
        .flatten()
        .all(|e| (e - ideal_expected).abs() <= 1e-12);
    let m = transcript.rounds.len();
    let measured_mean_energy = transcript
        .rounds
        .iter()
        .map(|r| (1.0 - r.c as f64) / 2.0)
        .sum::<f64>()
        / m as f64;
    Ok(CorrelationEnergyReport {
        m,
        ideal_term_energies,
        ideal_expected,
        identity_holds,
        measured_mean_energy,
        deviation: measured_mean_energy - ideal_expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chsh::{run_game, ChshRound, Strategy, DEFAULT_EPSILON};
    use crate::hash::Seed;

    fn transcript(rounds: Vec<ChshRound>) -> ChshTranscript {
        ChshTranscript {
            rounds,
            strategy_tag: "test".into(),
        }
    }

    fn all_settings_block() -> HermitianOp4 {
        (0..4).fold(HermitianOp4::zero(), |acc, i| {
            acc.add(&term_from_settings(i >> 1, i & 1))
        })
    }

    #[test]
    fn terms_are_projectors() {
        for a in 0..2 {
            for b in 0..2 {
                let t = term_from_settings(a, b);
                assert!(t.hermitian_defect() <= 1e-12);
                assert!((t.trace() - 2.0).abs() < 1e-12);
                let e = t.eigen();
                for (got, want) in e.values.iter().zip([0.0, 0.0, 1.0, 1.0]) {
                    assert!((got - want).abs() < 1e-10, "{a}{b}: {:?}", e.values);
                }
                assert!(e.max_residual <= 1e-10);
                assert!((t.operator_norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn four_setting_block() {
        let e = all_settings_block().eigen();
        assert!((e.values[0] - (2.0 - 2f64.sqrt())).abs() < 1e-9);
        assert!((e.values[3] - (2.0 + 2f64.sqrt())).abs() < 1e-9);
        assert!(e.max_residual <= 1e-10);
    }

    #[test]
    fn jacobi_handles_complex_phases() {
        // diag(1,2,3,4) conjugated by a unitary with complex entries
        let theta = 0.7;
        let (s, c) = f64::sin_cos(theta);
        let mut u = identity4();
        u[0][0] = C64::new(c, 0.0);
        u[0][2] = C64::new(0.0, s);
        u[2][0] = C64::new(0.0, s);
        u[2][2] = C64::new(c, 0.0);
        let mut d = [[ZERO; 4]; 4];
        for i in 0..4 {
            d[i][i] = C64::new(i as f64 + 1.0, 0.0);
        }
        let m = mat4_mul(&u, &mat4_mul(&d, &adjoint(&u)));
        let e = HermitianOp4::new(m).unwrap().eigen();
        for (got, want) in e.values.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(e.max_residual <= 1e-10);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = identity4();
        m[0][1] = C64::new(0.0, 1.0);
        assert!(matches!(
            HermitianOp4::new(m),
            Err(HamiltonianError::NotHermitian(_))
        ));
    }

    #[test]
    fn instance_shape() {
        let t = transcript(vec![ChshRound::new(1, 1, 1, -1)]);
        let inst = instance_from_transcript(&t).unwrap();
        assert_eq!(inst.terms().len(), 1);
        assert_eq!(inst.pair_count(), 1);
        assert!(ground_energy(&inst).abs() < 1e-10);
        assert_eq!(
            instance_from_transcript(&transcript(vec![])),
            Err(HamiltonianError::EmptyTranscript)
        );
    }

    #[test]
    fn promise_decisions() {
        let inst = HamiltonianInstance::from_terms(
            (0..4)
                .map(|i| (0, term_from_settings(i >> 1, i & 1)))
                .collect(),
        )
        .unwrap();
        let decide =
            |a, b| decide_promise(&PromiseInstance::new(inst.clone(), a, b).unwrap()).unwrap();
        assert_eq!(decide(0.6, 0.7), PromiseDecision::Yes);
        assert_eq!(decide(0.3, 0.5), PromiseDecision::No);
        assert_eq!(decide(0.5, 0.65), PromiseDecision::OutsidePromise);
        assert_eq!(
            PromiseInstance::new(inst, 0.7, 0.7),
            Err(HamiltonianError::InvalidPromise {
                alpha: 0.7,
                beta: 0.7
            })
        );
    }

    #[test]
    fn repeated_pairs_add() {
        let one = HamiltonianInstance::from_terms(
            (0..4)
                .map(|i| (0, term_from_settings(i >> 1, i & 1)))
                .collect(),
        )
        .unwrap();
        let mut acc = one.clone();
        for _ in 0..4 {
            acc = acc.disjoint_union(&one);
        }
        assert_eq!(acc.pair_count(), 5);
        assert!((ground_energy(&acc) - 5.0 * (2.0 - 2f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn ideal_energy_link() {
        let mut rng = Seed::from_u64(11).rng();
        let (t, _) = run_game(&Strategy::QuantumIdeal, 100_000, DEFAULT_EPSILON, &mut rng).unwrap();
        let r = correlation_energy_link(&t).unwrap();
        assert!(r.identity_holds);
        assert!((r.ideal_expected - 0.146_446_6).abs() < 1e-6);
        assert!(r.deviation.abs() < 0.003, "{}", r.measured_mean_energy);

        let (t, _) = run_game(&Strategy::best_lhv(), 10_000, DEFAULT_EPSILON, &mut rng).unwrap();
        let r = correlation_energy_link(&t).unwrap();
        assert!((r.measured_mean_energy - 0.25).abs() < 0.02);
    }
}
