//! Worst-case and sampled growth of `‖M^t e‖_∞` against the `q/4` margin.

use serde::{Deserialize, Serialize};

use super::EvolutionError;
use crate::mlwe::{cbd_vec, Params};
use crate::zq::{ZqMat, ZqVec};

pub const DEFAULT_ACCUMULATION_TRIALS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccumulationReport {
    pub horizon: u64,
    pub q: u32,
    pub eta: u32,
    /// `q/4`.
    pub margin: f64,
    /// `‖lift(M^t mod q)‖_∞ · η` for `t = 0..=horizon`.
    pub worst_case_bounds: Vec<i64>,
    pub worst_case_max: i64,
    /// First `t` whose worst-case bound reaches the margin.
    pub first_violation: Option<u64>,
    pub worst_case_pass: bool,
    pub trials: usize,
    /// Largest `‖M^t e mod q‖_∞` (centered) over sampled `e` and `t ≤ horizon`.
    pub sampled_max: i64,
    pub sampled_pass: bool,
}

/// Checks `‖M^t e‖_∞ < q/4` for `t ≤ horizon`, both as a worst-case bound
/// over `e ∈ [−η, η]^n` and by sampling `e ← χ_η` from the params seed.
pub fn noise_accumulation_check(
    m: &ZqMat,
    params: &Params,
    horizon: u64,
    trials: usize,
) -> Result<AccumulationReport, EvolutionError> {
    if !m.is_square() {
        return Err(EvolutionError::NotSquare);
    }
    let q = m.modulus();
    if q != params.q {
        return Err(EvolutionError::ModulusMismatch {
            matrix: q,
            params: params.q,
        });
    }
    if m.det_mod()? == 0 {
        return Err(EvolutionError::NotInvertible { q });
    }
    let eta = params.eta;
    let within = |x: i64| 4 * x < q as i64;

    let mut powers = Vec::with_capacity(horizon as usize + 1);
    let mut p = ZqMat::identity(m.rows(), q);
    for _ in 0..=horizon {
        powers.push(p.clone());
        p = p.mul(m)?;
    }
    let worst_case_bounds: Vec<i64> = powers
        .iter()
        .map(|p| p.centered_inf_norm() * eta as i64)
        .collect();
    let worst_case_max = worst_case_bounds.iter().copied().max().unwrap_or(0);
    let first_violation = worst_case_bounds
        .iter()
        .position(|&b| !within(b))
        .map(|t| t as u64);

    let mut rng = params.seed.derive("noise-accumulation").rng();
    let mut sampled_max = 0i64;
    for _ in 0..trials {
        let e = ZqVec::from_signed(&cbd_vec(m.rows(), eta, &mut rng), q);
        for p in &powers {
            sampled_max = sampled_max.max(p.mul_vec(&e)?.inf_norm());
        }
    }

    Ok(AccumulationReport {
        horizon,
        q,
        eta,
        margin: q as f64 / 4.0,
        worst_case_bounds,
        worst_case_max,
        first_violation,
        worst_case_pass: first_violation.is_none(),
        trials,
        sampled_max,
        sampled_pass: within(sampled_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::Seed;

    fn toy() -> Params {
        Params::toy().with_seed(Seed::from_u64(2))
    }

    #[test]
    fn doubling_mod_97() {
        let m = ZqMat::from_rows(&[vec![2]], 97).unwrap();
        let r3 = noise_accumulation_check(&m, &toy(), 3, 2000).unwrap();
        assert_eq!(r3.worst_case_bounds, vec![2, 4, 8, 16]);
        assert!(r3.worst_case_pass && r3.sampled_pass);
        assert_eq!(r3.sampled_max, 16);

        let r5 = noise_accumulation_check(&m, &toy(), 5, 2000).unwrap();
        assert_eq!(r5.worst_case_bounds, vec![2, 4, 8, 16, 32, 64]);
        assert_eq!(r5.first_violation, Some(4));
        assert!(!r5.worst_case_pass);
        // 2^5·2 = 64 ≡ −33 mod 97
        assert_eq!(r5.sampled_max, 33);
        assert!(!r5.sampled_pass);
    }

    #[test]
    fn identity_stays_at_eta() {
        let m = ZqMat::identity(4, 97);
        let r = noise_accumulation_check(&m, &toy(), 50, 500).unwrap();
        assert!(r.worst_case_bounds.iter().all(|&b| b == 2));
        assert!(r.worst_case_pass && r.sampled_pass);
        assert!(r.sampled_max <= 2);
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = ZqMat::from_rows(&[vec![1, 2], vec![2, 4]], 5).unwrap();
        let mut p = toy();
        p.q = 5;
        assert_eq!(
            noise_accumulation_check(&m, &p, 3, 10),
            Err(EvolutionError::NotInvertible { q: 5 })
        );
    }
}
