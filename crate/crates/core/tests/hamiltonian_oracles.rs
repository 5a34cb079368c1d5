#![allow(clippy::needless_range_loop)]

mod common;

use std::f64::consts::FRAC_1_SQRT_2;

use chsh_kyber::chsh::{epr_state, run_game, Strategy, DEFAULT_EPSILON};
use chsh_kyber::hamiltonian::{
    correlation_energy_link, decide_promise, ground_energy, ground_energy_report,
    instance_from_transcript, term_from_settings, HamiltonianInstance, HermitianOp4,
    PromiseDecision, PromiseInstance,
};
use chsh_kyber::hash::Seed;
use common::{
    embed, epr_vector, hermitian_eigenvalues, min_eigenvalue, reference_term, to_dmatrix, CMat,
};
use num_complex::Complex64;
use rand::Rng;

#[test]
fn terms_match_reference_assembly() {
    for a in 0..2u8 {
        for b in 0..2u8 {
            let t = term_from_settings(a, b);
            let m = to_dmatrix(t.matrix());
            assert!((&m - reference_term(a, b)).norm() < 1e-12);
            assert!((m.adjoint() - &m).norm() < 1e-12);
            let ev = hermitian_eigenvalues(&m);
            for (x, want) in ev.iter().zip([0.0, 0.0, 1.0, 1.0]) {
                assert!((x - want).abs() < 1e-10);
            }
            let ours = t.eigen().values;
            for (x, y) in ours.iter().zip(&ev) {
                assert!((x - y).abs() < 1e-10);
            }
            assert!(t.operator_norm() <= 1.0 + 1e-9);
            // ⟨EPR|H|EPR⟩ with the written-out state vector
            let psi = epr_vector();
            let e = (psi.adjoint() * &m * &psi)[(0, 0)].re;
            assert!((e - (1.0 - FRAC_1_SQRT_2) / 2.0).abs() < 1e-12);
            assert!((t.expectation(&epr_state()) - e).abs() < 1e-12);
        }
    }
}

fn random_hermitian(rng: &mut impl Rng) -> [[Complex64; 4]; 4] {
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    for i in 0..4 {
        m[i][i] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        for j in i + 1..4 {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[i][j] = z;
            m[j][i] = z.conj();
        }
    }
    m
}

#[test]
fn jacobi_matches_nalgebra_on_random_hermitian() {
    let mut rng = Seed::from_u64(21).rng();
    for _ in 0..500 {
        let raw = random_hermitian(&mut rng);
        let op = HermitianOp4::new(raw).unwrap();
        let ours = op.eigen();
        let reference = hermitian_eigenvalues(&to_dmatrix(&raw));
        for (x, y) in ours.values.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        assert!(ours.max_residual < 1e-10);
    }
}

#[test]
fn non_hermitian_rejected() {
    let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
    m[0][1] = Complex64::new(1.0, 0.0);
    assert!(HermitianOp4::new(m).is_err());
}

#[test]
fn up_to_three_pairs_match_dense_assembly() {
    let mut rng = Seed::from_u64(5).rng();
    for _ in 0..30 {
        let pairs = rng.random_range(1..=3);
        let mut terms = Vec::new();
        let dim = 4usize.pow(pairs as u32);
        let mut big = CMat::zeros(dim, dim);
        for _ in 0..rng.random_range(1..=6) {
            let (p, a, b) = (
                rng.random_range(0..pairs),
                rng.random_range(0..2u8),
                rng.random_range(0..2u8),
            );
            terms.push((p, term_from_settings(a, b)));
            big += embed(&reference_term(a, b), p, pairs);
        }
        // pairs without terms still count toward the dense dimension
        let h = HamiltonianInstance::from_terms(terms).unwrap();
        assert!((ground_energy(&h) - min_eigenvalue(&big)).abs() < 1e-9);
    }
}

#[test]
fn disjoint_union_is_additive() {
    let mut rng = Seed::from_u64(6).rng();
    for _ in 0..50 {
        let mk = |rng: &mut chsh_kyber::hash::DetRng| {
            let terms = (0..rng.random_range(1..8))
                .map(|_| {
                    (
                        rng.random_range(0..4usize),
                        term_from_settings(rng.random_range(0..2), rng.random_range(0..2)),
                    )
                })
                .collect();
            HamiltonianInstance::from_terms(terms).unwrap()
        };
        let (x, y) = (mk(&mut rng), mk(&mut rng));
        let u = x.disjoint_union(&y);
        assert!((ground_energy(&u) - ground_energy(&x) - ground_energy(&y)).abs() < 1e-9);
        assert_eq!(u.pair_count(), x.pair_count() + y.pair_count());
    }
}

#[test]
fn transcript_instance_energy_and_promise() {
    let (t, _) = run_game(
        &Strategy::QuantumIdeal,
        2000,
        DEFAULT_EPSILON,
        &mut Seed::from_u64(1).rng(),
    )
    .unwrap();
    let h = instance_from_transcript(&t).unwrap();
    assert_eq!(h.pair_count(), 2000);
    assert!(h.norm_check() <= 1.0 + 1e-9);
    let r = ground_energy_report(&h);
    // one term per pair, each with λ_min = 0
    assert!(r.ground_energy.abs() < 1e-9);
    let yes = PromiseInstance::new(h.clone(), 0.1, 0.2).unwrap();
    assert_eq!(decide_promise(&yes).unwrap(), PromiseDecision::Yes);
    let no = PromiseInstance::new(h.clone(), -0.2, -0.1).unwrap();
    assert_eq!(decide_promise(&no).unwrap(), PromiseDecision::No);
    assert!(PromiseInstance::new(h, 0.2, 0.2).is_err());

    let link = correlation_energy_link(&t).unwrap();
    assert!(link.identity_holds);
    assert!((link.measured_mean_energy - (1.0 - FRAC_1_SQRT_2) / 2.0).abs() < 0.05);
}
