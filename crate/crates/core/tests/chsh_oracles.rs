mod common;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use chsh_kyber::chsh::{
    epr_state, estimate, joint_outcome_probs, lhv_max, lhv_min, run_game, verify_session,
    werner_outcome_probs, LhvTable, Observable, Strategy, DEFAULT_EPSILON,
};
use chsh_kyber::hash::Seed;
use common::{epr_vector, reference_observable, CMat};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn projector(obs: &CMat, plus: bool) -> CMat {
    let s = if plus { 0.5 } else { -0.5 };
    CMat::identity(2, 2) * Complex64::new(0.5, 0.0) + obs * Complex64::new(s, 0.0)
}

fn rotated(theta: f64) -> CMat {
    let c = |x: f64| Complex64::new(x, 0.0);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            c(theta.cos()),
            c(theta.sin()),
            c(theta.sin()),
            c(-theta.cos()),
        ],
    )
}

/// `⟨ψ|P_x ⊗ P_y|ψ⟩` with nalgebra.
fn born(a: &CMat, b: &CMat, x: bool, y: bool) -> f64 {
    let psi = epr_vector();
    let op = projector(a, x).kronecker(&projector(b, y));
    (psi.adjoint() * op * &psi)[(0, 0)].re
}

#[test]
fn born_rule_matches_reference_on_angle_grid() {
    let psi = epr_state();
    for i in 0..24 {
        for j in 0..24 {
            let (ta, tb) = (i as f64 * PI / 12.0, j as f64 * PI / 12.0);
            let p = joint_outcome_probs(&psi, &Observable::at_angle(ta), &Observable::at_angle(tb));
            assert!((p.total() - 1.0).abs() < 1e-12);
            for (xi, x) in [true, false].into_iter().enumerate() {
                for (yi, y) in [true, false].into_iter().enumerate() {
                    assert!(p.0[xi][yi] >= 0.0);
                    let r = born(&rotated(ta), &rotated(tb), x, y);
                    assert!((p.0[xi][yi] - r).abs() < 1e-12);
                }
            }
            // EPR correlation is cos(θa − θb)
            assert!((p.correlation() - (ta - tb).cos()).abs() < 1e-12);
        }
    }
}

#[test]
fn canonical_observables_match_written_out_matrices() {
    for s in 0..2u8 {
        for (party, obs) in [('A', Observable::alice(s)), ('B', Observable::bob(s))] {
            let r = reference_observable(party, s);
            let m = obs.matrix();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((m[i][j] - r[(i, j)]).norm() < 1e-12);
                }
            }
            let sq = &r * &r;
            assert!((sq - CMat::identity(2, 2)).norm() < 1e-12);
            assert!((r.adjoint() - &r).norm() < 1e-12);
        }
    }
}

#[test]
fn ideal_correlators_and_per_setting_expectation() {
    let psi = epr_state();
    for a in 0..2u8 {
        for b in 0..2u8 {
            let corr =
                joint_outcome_probs(&psi, &Observable::alice(a), &Observable::bob(b)).correlation();
            let expected = if a == 1 && b == 1 {
                -FRAC_1_SQRT_2
            } else {
                FRAC_1_SQRT_2
            };
            assert!((corr - expected).abs() < 1e-12, "({a},{b}) {corr}");
            let sign = if a & b == 1 { -1.0 } else { 1.0 };
            assert!((sign * corr - FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }
}

#[test]
fn werner_correlation_is_visibility_scaled() {
    let psi = epr_state();
    for k in 0..=10 {
        let v = k as f64 / 10.0;
        let p = werner_outcome_probs(&psi, &Observable::alice(0), &Observable::bob(0), v);
        assert!((p.total() - 1.0).abs() < 1e-12);
        assert!((p.correlation() - v * FRAC_1_SQRT_2).abs() < 1e-12);
    }
}

#[test]
fn noisy_mean_is_monotone_and_crosses_half_near_inverse_sqrt2() {
    let mut last = f64::NEG_INFINITY;
    let mut crossing = None;
    for k in 0..=10 {
        let v = k as f64 / 10.0;
        let s = Strategy::QuantumNoisy { visibility: v };
        let (_, est) =
            run_game(&s, 200_000, DEFAULT_EPSILON, &mut Seed::from_u64(k).rng()).unwrap();
        assert!(est.e_hat >= last - 1e-12, "v = {v}: {} < {last}", est.e_hat);
        assert!((est.e_hat - v * FRAC_1_SQRT_2).abs() < 0.01);
        last = est.e_hat;
    }
    // finer grid on the exact mean v/√2 to locate the crossing
    for k in 0..=100 {
        let v = k as f64 / 100.0;
        let p = werner_outcome_probs(&epr_state(), &Observable::alice(0), &Observable::bob(0), v);
        if crossing.is_none() && p.correlation() > 0.5 {
            crossing = Some(v);
        }
    }
    let v = crossing.unwrap();
    assert!((v - FRAC_1_SQRT_2).abs() <= 0.02, "crossing at {v}");
}

#[test]
fn lhv_enumeration_by_brute_force() {
    // every deterministic assignment of ±1 outcomes to both settings
    let mut best = i32::MIN;
    let mut worst = i32::MAX;
    for a0 in [-1, 1] {
        for a1 in [-1, 1] {
            for b0 in [-1, 1] {
                for b1 in [-1, 1] {
                    let s = a0 * b0 + a0 * b1 + a1 * b0 - a1 * b1;
                    best = best.max(s);
                    worst = worst.min(s);
                }
            }
        }
    }
    assert_eq!(best as f64 / 4.0, lhv_max());
    assert_eq!(worst as f64 / 4.0, lhv_min());
    assert_eq!(LhvTable::all().count(), 16);
    assert!(LhvTable::all().all(|t| t.quarter_sum().abs() == 2));
}

#[test]
fn s_hat_matches_balanced_mean_on_transcripts() {
    for (i, s) in [
        Strategy::QuantumIdeal,
        Strategy::QuantumNoisy { visibility: 0.8 },
        Strategy::best_lhv(),
        Strategy::random_lhv(),
    ]
    .iter()
    .enumerate()
    {
        let (t, est) = run_game(
            s,
            50_000,
            DEFAULT_EPSILON,
            &mut Seed::from_u64(i as u64).rng(),
        )
        .unwrap();
        // setting-balanced mean of C recomputed from the rounds
        let mut sums = [[0.0f64; 2]; 2];
        let mut counts = [[0.0f64; 2]; 2];
        for r in &t.rounds {
            sums[r.a as usize][r.b as usize] += r.c as f64;
            counts[r.a as usize][r.b as usize] += 1.0;
        }
        let balanced: f64 = (0..4)
            .map(|k| sums[k / 2][k % 2] / counts[k / 2][k % 2])
            .sum::<f64>()
            / 4.0;
        assert!((est.s_hat - 4.0 * balanced).abs() < 1e-9);
        // and s_hat ≈ 4·e_hat up to setting-count fluctuations
        assert!((est.s_hat - 4.0 * est.e_hat).abs() < 0.05);
        assert_eq!(estimate(&t, DEFAULT_EPSILON), est);
    }
}

#[test]
fn lhv_false_accept_rate_is_zero() {
    let strategies: Vec<Strategy> = LhvTable::all()
        .map(|table| Strategy::ClassicalDeterministic { table })
        .chain([Strategy::random_lhv()])
        .collect();
    for i in 0..10_000u64 {
        let s = &strategies[(i % 17) as usize];
        let (t, _) = run_game(s, 4096, DEFAULT_EPSILON, &mut Seed::from_u64(i).rng()).unwrap();
        assert!(
            !verify_session(&t, DEFAULT_EPSILON).unwrap().accepted,
            "game {i}"
        );
    }
}

#[test]
fn tampered_round_is_detected() {
    let (mut t, _) = run_game(
        &Strategy::QuantumIdeal,
        100,
        DEFAULT_EPSILON,
        &mut Seed::from_u64(1).rng(),
    )
    .unwrap();
    t.rounds[5].c = -t.rounds[5].c;
    assert!(verify_session(&t, DEFAULT_EPSILON).is_err());
}
