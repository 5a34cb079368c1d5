use std::collections::HashSet;

use chsh_kyber::chsh::{verify_session, Strategy};
use chsh_kyber::evolution::{
    build_kernel, spectral_report, verify_ergodicity, ChainSpec, NoiseLaw,
};
use chsh_kyber::hash::Seed;
use chsh_kyber::mlwe::Params;
use chsh_kyber::protocol::{
    fo_decaps_pair, fo_encaps, fo_encaps_message, fo_keygen, replay, run_campaign, run_session,
    verify_replay, Channel, EvolutionConfig, SessionConfig,
};
use chsh_kyber::zq::ZqMat;

#[test]
fn fo_round_trip_over_many_seeds() {
    for params in [Params::toy(), Params::small()] {
        let kp = fo_keygen(&params, &Seed::from_u64(1)).unwrap();
        for i in 0..1000 {
            let (ct, ss) = fo_encaps(&kp.keypair.public, &params, &Seed::from_u64(i)).unwrap();
            let d = fo_decaps_pair(&kp, &ct, &params);
            assert!(d.reencryption_ok);
            assert_eq!(d.shared_secret, ss);
        }
    }
}

#[test]
fn distinct_messages_give_distinct_ciphertexts() {
    let params = Params::toy();
    let kp = fo_keygen(&params, &Seed::from_u64(2)).unwrap();
    let mut cts = HashSet::new();
    for i in 0..10_000u64 {
        let (ct, _) = fo_encaps(&kp.keypair.public, &params, &Seed::from_u64(i)).unwrap();
        assert!(cts.insert(ct.to_bytes()), "collision at {i}");
    }
    // the same μ is derandomized to the same ciphertext
    let mu: Vec<bool> = (0..256).map(|i| i % 5 == 0).collect();
    assert_eq!(
        fo_encaps_message(&kp.keypair.public, &params, &mu).unwrap(),
        fo_encaps_message(&kp.keypair.public, &params, &mu).unwrap()
    );
}

#[test]
fn different_tamperings_give_different_reject_secrets() {
    let params = Params::toy();
    let kp = fo_keygen(&params, &Seed::from_u64(3)).unwrap();
    let (ct, _) = fo_encaps(&kp.keypair.public, &params, &Seed::from_u64(4)).unwrap();
    let mut secrets = HashSet::new();
    for j in 0..ct.v.len() {
        let mut bad = ct.clone();
        bad.v[j] = (bad.v[j] + 1) % params.q;
        let d = fo_decaps_pair(&kp, &bad, &params);
        assert!(!d.reencryption_ok);
        assert!(secrets.insert(d.shared_secret));
    }
}

#[test]
fn honest_sessions_all_agree() {
    let mut keys = HashSet::new();
    for i in 0..1000 {
        let out = run_session(&SessionConfig::toy(i)).unwrap();
        assert!(
            out.result.accepted && out.result.shared_secret_match,
            "session {i}"
        );
        assert!(keys.insert(out.result.final_key.unwrap()));
    }
}

#[test]
fn lhv_sessions_all_rejected_without_key_material() {
    let strategies: Vec<Strategy> = (0..16)
        .map(|i| Strategy::ClassicalDeterministic {
            table: chsh_kyber::chsh::LhvTable::from_index(i),
        })
        .chain([Strategy::random_lhv()])
        .collect();
    for i in 0..10_000u64 {
        let strategy = strategies[(i % 17) as usize].clone();
        let config = SessionConfig::toy(i).with_channel(Channel::AdversarialLhv { strategy });
        let out = run_session(&config).unwrap();
        assert!(!out.result.accepted, "session {i}");
        assert!(out.result.final_key.is_none());
        if i % 250 == 0 {
            let text = serde_json::to_string(&out.transcript).unwrap()
                + &serde_json::to_string(&out.result).unwrap();
            for needle in [
                "key_hex",
                "final_key",
                "ct_hex",
                "pk_hash_hex",
                "\"encaps\"",
                "\"keygen\"",
            ] {
                assert!(!text.contains(needle), "{needle} leaked in session {i}");
            }
        }
    }
}

#[test]
fn noisy_half_visibility_rejected() {
    let mut sum = 0.0;
    for i in 0..50 {
        let c = SessionConfig::toy(i).with_channel(Channel::NoisyVisibility { visibility: 0.5 });
        let out = run_session(&c).unwrap();
        assert!(!out.result.accepted);
        sum += out.result.chsh_estimate.e_hat;
    }
    assert!((sum / 50.0 - 0.5 * std::f64::consts::FRAC_1_SQRT_2).abs() < 0.01);
}

#[test]
fn transcripts_replay_byte_for_byte() {
    let configs = [
        SessionConfig::toy(1),
        SessionConfig::toy(2).with_evolution(EvolutionConfig::Prf),
        SessionConfig::toy(3).with_channel(Channel::NoisyVisibility { visibility: 0.9 }),
        SessionConfig::toy(4).with_channel(Channel::AdversarialLhv {
            strategy: Strategy::best_lhv(),
        }),
        SessionConfig::new(Params::small().with_seed(Seed::from_u64(5))),
    ];
    for c in configs {
        let out = run_session(&c).unwrap();
        verify_replay(&out.transcript).unwrap();
        // through a JSON round trip, as the CLI does
        let text = serde_json::to_string_pretty(&out.transcript).unwrap();
        let back = serde_json::from_str(&text).unwrap();
        verify_replay(&back).unwrap();
        let again = replay(&back).unwrap();
        assert_eq!(
            serde_json::to_string(&again.result).unwrap(),
            serde_json::to_string(&out.result).unwrap()
        );
    }
}

#[test]
fn replay_detects_edits() {
    let out = run_session(&SessionConfig::toy(9)).unwrap();
    let mut t = out.transcript.clone();
    t.chsh[0].x = -t.chsh[0].x;
    t.chsh[0].c = -t.chsh[0].c;
    assert!(verify_replay(&t).is_err());
}

#[test]
fn premises_agree_with_module_checks() {
    for config in [
        SessionConfig::toy(1),
        SessionConfig::toy(2).with_evolution(EvolutionConfig::Prf),
        SessionConfig::toy(3).with_channel(Channel::AdversarialLhv {
            strategy: Strategy::best_lhv(),
        }),
        SessionConfig::toy(4).with_evolution(EvolutionConfig::Markov {
            chain: ChainSpec::new(ZqMat::identity(1, 5), NoiseLaw::point_mass_zero()).unwrap(),
        }),
        SessionConfig::new(Params::small().with_seed(Seed::from_u64(5))),
    ] {
        let out = run_session(&config).unwrap();
        let p = &out.result.premises;
        let p_ = &config.params;

        let v = verify_session(&out.transcript.chsh_transcript(), config.epsilon).unwrap();
        assert_eq!(p.quantum_verification, v.accepted && p_.m >= 2 * p_.n);

        let expected_markov = match &config.evolution {
            EvolutionConfig::Markov { chain } => {
                let erg = verify_ergodicity(chain, config.effective_gap_floor()).unwrap();
                chain.matrix().det_mod().unwrap() != 0 && erg.certified
            }
            EvolutionConfig::Prf => false,
        };
        assert_eq!(p.markov_conditions, expected_markov);

        let lambda = config.effective_lambda() as f64;
        let expected_mlwe = p_.n as f64 * (p_.q as f64).log2() >= lambda * lambda
            && p_.q as usize >= p_.n * p_.n
            && p_.eta <= 4;
        assert_eq!(p.mlwe_parameters, expected_mlwe);
    }
}

#[test]
fn campaign_has_no_collisions() {
    let r = run_campaign(&SessionConfig::toy(11).with_sessions(1000)).unwrap();
    assert_eq!(r.summary.sessions, 1000);
    assert_eq!(r.summary.key_collisions, 0);
    assert_eq!(r.summary.accepted, 1000);
    assert_eq!(r.summary.matched, 1000);
    assert!(!r.summary.frozen);
}

#[test]
fn markov_campaign_approaches_stationary() {
    let chain =
        ChainSpec::new(ZqMat::from_rows(&[vec![1]], 5).unwrap(), NoiseLaw::Uniform).unwrap();
    let config = SessionConfig::toy(12)
        .with_evolution(EvolutionConfig::Markov {
            chain: chain.clone(),
        })
        .with_sessions(2000);
    let r = run_campaign(&config).unwrap();
    let tv = r.summary.tv_to_stationary.unwrap();
    assert!(tv < 0.05, "TV {tv}");
    let spec = spectral_report(&build_kernel(&chain).unwrap(), 0.01).unwrap();
    assert!(spec.stationary.iter().all(|p| (p - 0.2).abs() < 1e-9));
    // uniform noise makes successive states independent
    assert!(r.summary.serial_correlation.unwrap().abs() < 0.1);
    assert!(r.summary.predicted_serial_correlation.unwrap().abs() < 1e-9);
}

#[test]
fn frozen_chain_is_flagged() {
    let chain = ChainSpec::new(ZqMat::identity(1, 5), NoiseLaw::point_mass_zero()).unwrap();
    let r = run_campaign(
        &SessionConfig::toy(13)
            .with_evolution(EvolutionConfig::Markov { chain })
            .with_sessions(10),
    )
    .unwrap();
    assert!(r.summary.frozen);
    assert_eq!(r.summary.key_collisions, 0);
}
