mod common;

use chsh_kyber::chsh::{run_game, Strategy, DEFAULT_EPSILON};
use chsh_kyber::hash::Seed;
use chsh_kyber::mlwe::{cbd_vec, Params};
use chsh_kyber::security::{
    cca_bound, delta_blocksize, enhanced_bits, estimate, measured_beta, modulate_noise, param_set,
    resource_csv, resource_report, resource_report_for_transcript, table_csv, table_report,
    AttackFamily, FamilyTag, ScalingModel, Variant, VariantTag,
};
use chsh_kyber::zq::ZqVec;
use common::mean_var;

/// Reference rows: bits ± σ for standard, QCS, CHSH; then QCS %, CHSH %, differential %.
const REFERENCE: [(&str, [f64; 6], [f64; 3]); 3] = [
    (
        "kyber512",
        [124.7, 150.6, 162.7, 20.8, 30.4, 8.0],
        [2.5, 2.8, 3.1],
    ),
    (
        "kyber768",
        [185.2, 221.6, 241.1, 19.7, 30.2, 8.8],
        [2.5, 4.7, 4.6],
    ),
    (
        "kyber1024",
        [250.0, 300.8, 325.3, 20.3, 30.1, 8.2],
        [4.1, 5.0, 6.4],
    ),
];

#[test]
fn table_rows_reproduce_reference_values() {
    let rows = table_report();
    assert_eq!(rows.len(), 3);
    for (row, (name, want, sigmas)) in rows.iter().zip(REFERENCE) {
        assert_eq!(row.paramset, name);
        let got = [
            row.standard_bits,
            row.qcs_bits,
            row.chsh_bits,
            row.qcs_pct,
            row.chsh_pct,
            row.differential_pct,
        ];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 0.1, "{name}: {g} vs {w}");
        }
        assert_eq!([row.sigma_standard, row.sigma_qcs, row.sigma_chsh], sigmas);
        // the log-additive contrast stays within a bit of the baseline
        assert!(row.log_additive_chsh_bits - row.standard_bits < 1.0);
    }
    let csv = table_csv(&rows).unwrap();
    assert!(csv.starts_with(
        "paramset,standard_bits,qcs_bits,chsh_bits,qcs_pct,chsh_pct,differential_pct\n"
    ));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn variant_defaults() {
    assert_eq!(Variant::standard().beta_tilde, 0.0);
    assert_eq!(Variant::qcs().beta_tilde, 0.20);
    assert_eq!(Variant::chsh().beta_tilde, 0.30);
    for tag in [VariantTag::Standard, VariantTag::Qcs, VariantTag::Chsh] {
        assert_eq!(
            Variant::from_tag(tag).beta_tilde == 0.0,
            tag == VariantTag::Standard
        );
        assert_eq!(tag.to_string().parse::<VariantTag>().unwrap(), tag);
    }
}

#[test]
fn estimates_positive_for_every_cell() {
    for set in ["kyber512", "kyber768", "kyber1024"] {
        for family in FamilyTag::ALL {
            for model in [ScalingModel::Multiplicative, ScalingModel::LogAdditive] {
                for v in [Variant::standard(), Variant::qcs(), Variant::chsh()] {
                    let e = estimate(set, v, &AttackFamily::with_default_baselines(family), model)
                        .unwrap();
                    assert!(e.bits > 0.0);
                    assert!(e.bits >= e.base_bits);
                }
            }
        }
    }
    assert!(param_set("kyber2048").is_err());
    assert!(estimate(
        "kyber512",
        Variant::chsh().with_beta(-0.1),
        &AttackFamily::with_default_baselines(FamilyTag::Bkz),
        ScalingModel::Multiplicative
    )
    .is_err());
}

#[test]
fn blocksize_shift_is_logarithmic() {
    assert_eq!(delta_blocksize(0.0, 100.0), 0.0);
    assert!((delta_blocksize(1.0, 100.0) - 100.0).abs() < 1e-12);
    assert!(delta_blocksize(0.30, 100.0) > delta_blocksize(0.20, 100.0));
    assert!((enhanced_bits(100.0, 1.0, ScalingModel::LogAdditive) - 101.0).abs() < 1e-12);
}

#[test]
fn cca_bound_edges() {
    assert!(cca_bound(0, 0.5, 0.5, 0.0).is_err());
    let two = 2f64.powi(-40);
    assert_eq!(
        cca_bound(1 << 20, two, two, 1e-30).unwrap(),
        2f64.powi(-19) + 1e-30
    );
    assert_eq!(cca_bound(u64::MAX, 0.5, 0.5, 0.5).unwrap(), 1.0);
    assert!((cca_bound(10, 1e-3, 2e-3, 1e-6).unwrap() - 0.030001).abs() < 1e-12);
    assert!(cca_bound(1, -1.0, 0.0, 0.0).is_err());
}

#[test]
fn modulation_hits_inflated_variance() {
    let n = 1_000_000;
    let (t, _) = run_game(
        &Strategy::QuantumIdeal,
        n,
        DEFAULT_EPSILON,
        &mut Seed::from_u64(2).rng(),
    )
    .unwrap();
    for (eta, beta) in [(2u32, 0.30), (2, 0.20), (4, 0.30)] {
        let mut rng = Seed::from_u64(eta as u64 * 10 + (beta * 10.0) as u64).rng();
        let sigma_sq = eta as f64 / 2.0;
        let e = ZqVec::from_signed(&cbd_vec(n, eta, &mut rng), 3329);
        let (out, m) = modulate_noise(&e, &t, beta, eta, &mut rng).unwrap();
        let (mean, var, _) = mean_var(out.centered().into_iter().map(|x| x as f64));
        let target = sigma_sq * (1.0 + beta);
        assert!(
            (var / target - 1.0).abs() < 0.01,
            "eta {eta} beta {beta}: {var}"
        );
        assert!(mean.abs() < 4.0 * target.sqrt() / (n as f64).sqrt());
        assert!((m.realized_beta - beta).abs() < 0.01);
        assert!(m.xi_stream.iter().all(|&x| x.abs() == 1));
        assert!((m.xi_mean - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.01);
    }
}

#[test]
fn measured_beta_maps_ideal_to_default() {
    let (t, _) = run_game(
        &Strategy::QuantumIdeal,
        200_000,
        DEFAULT_EPSILON,
        &mut Seed::from_u64(3).rng(),
    )
    .unwrap();
    assert!((measured_beta(&t) - 0.30).abs() < 0.02);
    let (c, _) = run_game(
        &Strategy::best_lhv(),
        200_000,
        DEFAULT_EPSILON,
        &mut Seed::from_u64(3).rng(),
    )
    .unwrap();
    assert!(measured_beta(&c) < 0.02);
}

#[test]
fn resource_counts_follow_reference_scaling() {
    // 2m qubits and 4m classical bits per session
    let r = resource_report(&Params::toy().with_m(512));
    assert_eq!(r.quantum_comm_qubits, 1024);
    assert_eq!(r.classical_overhead_bits, 2048);
    assert_eq!(r.entangling_gates, 512);
    assert_eq!(r.circuit_depth, 9);
    assert!(r.annotations.contains_key("classical_latency"));
    let (t, _) = run_game(
        &Strategy::QuantumIdeal,
        256,
        DEFAULT_EPSILON,
        &mut Seed::from_u64(1).rng(),
    )
    .unwrap();
    let rt = resource_report_for_transcript(&Params::toy(), &t);
    let rot = rt.single_qubit_rotations.unwrap();
    assert!((256..=512).contains(&rot));
    assert!(resource_csv(&r)
        .unwrap()
        .starts_with("metric,classical,enhanced\n"));
}
