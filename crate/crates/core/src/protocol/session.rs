use serde::{Deserialize, Serialize};

use super::config::{EvolutionConfig, SessionConfig};
use super::fo::{fo_decaps_pair, fo_encaps, fo_keygen};
use super::ProtocolError;
use crate::chsh::{
    run_game, verify_session, ChshEstimate, ChshRound, ChshTranscript, VerificationReport,
};
use crate::evolution::{
    build_kernel, markov_step, prf_evolve, spectral_report, verify_ergodicity, ErgodicityReport,
    EvolutionError, LatticeState, NoiseLaw, PrfState, SpectralReport,
};
use crate::hash::{hash32, Domain, Seed};
use crate::mlwe::keygen;
use crate::zq::ZqVec;

/// The evolving secret carried from one session to the next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvolutionState {
    Prf {
        lattice: LatticeState,
        prf: PrfState,
    },
    Markov {
        s: ZqVec,
    },
}

impl EvolutionState {
    pub fn secret(&self) -> &ZqVec {
        match self {
            EvolutionState::Prf { lattice, .. } => &lattice.s,
            EvolutionState::Markov { s } => s,
        }
    }
}

pub fn initial_state(config: &SessionConfig) -> Result<EvolutionState, ProtocolError> {
    let seed = config.seed();
    Ok(match &config.evolution {
        EvolutionConfig::Prf => {
            let kp = keygen(&config.params, &seed.derive("evolution-init"))?;
            EvolutionState::Prf {
                lattice: LatticeState {
                    s: kp.secret.s,
                    a: kp.public.a,
                    t: kp.public.t,
                },
                prf: PrfState::from_seed(&seed.derive("prf")),
            }
        }
        EvolutionConfig::Markov { chain } => {
            let mut rng = seed.derive("markov-init").rng();
            let entries = (0..chain.n())
                .map(|_| NoiseLaw::Uniform.sample(chain.q(), &mut rng))
                .collect();
            EvolutionState::Markov {
                s: ZqVec::new(entries, chain.q()).expect("uniform residues below q"),
            }
        }
    })
}

fn evolve(
    state: &EvolutionState,
    config: &SessionConfig,
    session_id: u64,
) -> Result<EvolutionState, ProtocolError> {
    Ok(match (state, &config.evolution) {
        (EvolutionState::Prf { lattice, prf }, EvolutionConfig::Prf) => {
            let (lattice, prf) = prf_evolve(lattice, prf, &config.params)?;
            EvolutionState::Prf { lattice, prf }
        }
        (EvolutionState::Markov { s }, EvolutionConfig::Markov { chain }) => {
            let mut rng = config
                .seed()
                .derive_indexed("markov-step", session_id)
                .rng();
            EvolutionState::Markov {
                s: markov_step(s, chain, &mut rng)?,
            }
        }
        _ => {
            return Err(ProtocolError::Config(
                "evolution state does not match the configured mode".into(),
            ))
        }
    })
}

/// Compact view of the chain's spectral analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub mode: String,
    pub states: Option<usize>,
    pub gap: Option<f64>,
    pub tau_mix_bound: Option<u64>,
    pub irreducible: Option<bool>,
    pub aperiodic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiseDetail {
    pub m: usize,
    /// `2n`.
    pub m_floor: usize,
    pub verification_accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ergodicity: Option<ErgodicityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub det_mod_q: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markov_note: Option<String>,
    pub n_log2_q: f64,
    pub lambda: u32,
    pub lambda_sq: u64,
    pub q_ge_n_sq: bool,
    pub eta_bounded: bool,
}

/// The three checkable conditions of the dual-hardness claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Premises {
    pub quantum_verification: bool,
    pub markov_conditions: bool,
    pub mlwe_parameters: bool,
    pub detail: PremiseDetail,
}

/// Per-configuration analysis shared by all sessions of a run.
#[derive(Debug, Clone)]
pub struct SessionContext {
    pub config: SessionConfig,
    pub spectral: Option<SpectralReport>,
    pub evolution_summary: EvolutionSummary,
    ergodicity: Option<ErgodicityReport>,
    det_mod_q: Option<u32>,
    markov_note: Option<String>,
}

impl SessionContext {
    pub fn new(config: &SessionConfig) -> Result<Self, ProtocolError> {
        config.validate()?;
        let (mut spectral, mut ergodicity, mut det_mod_q, mut markov_note) =
            (None, None, None, None);
        let summary = match &config.evolution {
            EvolutionConfig::Prf => {
                markov_note = Some("prf evolution: chain premises not applicable".to_string());
                EvolutionSummary {
                    mode: "prf".into(),
                    states: None,
                    gap: None,
                    tau_mix_bound: None,
                    irreducible: None,
                    aperiodic: None,
                    note: markov_note.clone(),
                }
            }
            EvolutionConfig::Markov { chain } => {
                det_mod_q = Some(chain.matrix().det_mod().map_err(EvolutionError::from)?);
                let analysis = build_kernel(chain)
                    .and_then(|k| spectral_report(&k, config.epsilon))
                    .and_then(|r| Ok((r, verify_ergodicity(chain, config.effective_gap_floor())?)));
                match analysis {
                    Ok((r, e)) => {
                        let s = EvolutionSummary {
                            mode: "markov".into(),
                            states: Some(r.states),
                            gap: Some(r.gap),
                            tau_mix_bound: r.tau_mix_bound,
                            irreducible: Some(r.irreducible),
                            aperiodic: Some(r.aperiodic),
                            note: None,
                        };
                        spectral = Some(r);
                        ergodicity = Some(e);
                        s
                    }
                    Err(e) => {
                        markov_note = Some(e.to_string());
                        EvolutionSummary {
                            mode: "markov".into(),
                            states: chain.state_count(),
                            gap: None,
                            tau_mix_bound: None,
                            irreducible: None,
                            aperiodic: None,
                            note: markov_note.clone(),
                        }
                    }
                }
            }
        };
        Ok(SessionContext {
            config: config.clone(),
            spectral,
            evolution_summary: summary,
            ergodicity,
            det_mod_q,
            markov_note,
        })
    }

    fn premises(&self, verification_accepted: bool) -> Premises {
        let p = &self.config.params;
        let m_floor = 2 * p.n;
        let lambda = self.config.effective_lambda();
        let lambda_sq = lambda as u64 * lambda as u64;
        let n_log2_q = p.n as f64 * (p.q as f64).log2();
        let q_ge_n_sq = p.q as u64 >= (p.n as u64).pow(2);
        let eta_bounded = p.eta <= 4;
        let markov_conditions = match (&self.ergodicity, self.det_mod_q) {
            (Some(e), Some(d)) => d != 0 && e.certified,
            _ => false,
        };
        Premises {
            quantum_verification: verification_accepted && p.m >= m_floor,
            markov_conditions,
            mlwe_parameters: n_log2_q >= lambda_sq as f64 && q_ge_n_sq && eta_bounded,
            detail: PremiseDetail {
                m: p.m,
                m_floor,
                verification_accepted,
                ergodicity: self.ergodicity.clone(),
                det_mod_q: self.det_mod_q,
                markov_note: self.markov_note.clone(),
                n_log2_q,
                lambda,
                lambda_sq,
                q_ge_n_sq,
                eta_bounded,
            },
        }
    }
}

mod hex32_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<[u8; 32]>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_some(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[u8; 32]>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|h| {
                let mut out = [0u8; 32];
                hex::decode_to_slice(&h, &mut out).map_err(serde::de::Error::custom)?;
                Ok(out)
            })
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub session_id: u64,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    pub chsh_estimate: ChshEstimate,
    pub verification: VerificationReport,
    pub shared_secret_match: bool,
    /// Present iff the session was accepted and both sides agree.
    #[serde(with = "hex32_opt", default, skip_serializing_if = "Option::is_none")]
    pub final_key: Option<[u8; 32]>,
    pub evolution_report: Option<EvolutionSummary>,
    pub premises: Premises,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub e_hat: f64,
    pub s_hat: f64,
    /// `[e_hat − w, e_hat + w]` with the Hoeffding half-width `w`.
    pub ci: [f64; 2],
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KemRecord {
    pub pk_hash_hex: String,
    pub ct_hex: String,
    pub fo_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub accepted: bool,
    #[serde(rename = "match")]
    pub matched: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_hex: Option<String>,
}

/// Seeds used by the session. KEM seeds are omitted for rejected sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master: Seed,
    pub session: Seed,
    pub chsh: Seed,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keygen: Option<Seed>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encaps: Option<Seed>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session_id: u64,
    pub config: SessionConfig,
    pub chsh: Vec<ChshRound>,
    pub estimate: EstimateRecord,
    pub kem: Option<KemRecord>,
    pub result: ResultRecord,
    pub seeds: SeedRecord,
    /// Evolution state at session start; only recorded for accepted sessions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionState>,
    pub premises: Premises,
}

impl Transcript {
    pub fn chsh_transcript(&self) -> ChshTranscript {
        ChshTranscript {
            rounds: self.chsh.clone(),
            strategy_tag: self.config.channel.strategy().tag(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub result: SessionResult,
    pub transcript: Transcript,
    pub next_state: EvolutionState,
}

fn keygen_seed(master: &Seed, state: &EvolutionState) -> Seed {
    Seed(hash32(
        Domain::SeedDerive,
        &[&master.0, b"keygen", &state.secret().to_le16()],
    ))
}

impl SessionContext {
    /// One session: CHSH gate, then (on accept) the FO-wrapped KEM, then the
    /// evolution step.
    pub fn run(
        &self,
        session_id: u64,
        state: &EvolutionState,
    ) -> Result<SessionOutcome, ProtocolError> {
        let config = &self.config;
        let params = &config.params;
        let master = *config.seed();
        let session_seed = master.derive_indexed("session", session_id);
        let chsh_seed = session_seed.derive("chsh");

        let strategy = config.channel.strategy();
        let (chsh, estimate) = run_game(&strategy, params.m, config.epsilon, &mut chsh_seed.rng())?;
        let verification = verify_session(&chsh, config.epsilon)?;
        let accepted = verification.accepted;

        let mut seeds = SeedRecord {
            master,
            session: session_seed,
            chsh: chsh_seed,
            keygen: None,
            encaps: None,
        };
        let (mut kem, mut final_key, mut matched, mut abort_reason) = (None, None, false, None);
        if accepted {
            let kseed = keygen_seed(&master, state);
            let eseed = session_seed.derive("encaps");
            let kp = fo_keygen(params, &kseed)?;
            let (ct, ss_sender) = fo_encaps(&kp.keypair.public, params, &eseed)?;
            let dec = fo_decaps_pair(&kp, &ct, params);
            matched = dec.shared_secret == ss_sender;
            kem = Some(KemRecord {
                pk_hash_hex: hex::encode(kp.keypair.public.hash()),
                ct_hex: hex::encode(ct.to_bytes()),
                fo_ok: dec.reencryption_ok,
            });
            if matched {
                let th = hash32(Domain::Transcript, &[&chsh.to_bytes()]);
                final_key = Some(hash32(Domain::SessionKey, &[&ss_sender, &th]));
            } else {
                abort_reason = Some("shared secrets disagree".to_string());
            }
            seeds.keygen = Some(kseed);
            seeds.encaps = Some(eseed);
        } else {
            abort_reason = Some(format!(
                "CHSH verification rejected: mean C = {:.4} does not exceed {:.4}",
                verification.e_hat, verification.threshold
            ));
        }

        let premises = self.premises(accepted);
        let result = SessionResult {
            session_id,
            accepted,
            abort_reason,
            chsh_estimate: estimate.clone(),
            verification,
            shared_secret_match: matched,
            final_key,
            evolution_report: Some(self.evolution_summary.clone()),
            premises: premises.clone(),
        };
        let transcript = Transcript {
            session_id,
            config: config.clone(),
            chsh: chsh.rounds,
            estimate: EstimateRecord {
                e_hat: estimate.e_hat,
                s_hat: estimate.s_hat,
                ci: [
                    estimate.e_hat - estimate.ci_half_width,
                    estimate.e_hat + estimate.ci_half_width,
                ],
                violated: estimate.violated,
            },
            kem,
            result: ResultRecord {
                accepted,
                matched,
                key_hex: final_key.map(hex::encode),
            },
            seeds,
            evolution: accepted.then(|| state.clone()),
            premises,
        };
        let next_state = evolve(state, config, session_id)?;
        Ok(SessionOutcome {
            result,
            transcript,
            next_state,
        })
    }
}

/// Runs session 0 from the configured initial state.
pub fn run_session(config: &SessionConfig) -> Result<SessionOutcome, ProtocolError> {
    let ctx = SessionContext::new(config)?;
    ctx.run(0, &initial_state(config)?)
}

/// Re-executes a transcript from its recorded configuration, session id and
/// evolution state.
pub fn replay(transcript: &Transcript) -> Result<SessionOutcome, ProtocolError> {
    let ctx = SessionContext::new(&transcript.config)?;
    let state = match &transcript.evolution {
        Some(s) => s.clone(),
        None => initial_state(&transcript.config)?,
    };
    ctx.run(transcript.session_id, &state)
}

/// Replays and checks the serialized transcript is reproduced byte for byte.
pub fn verify_replay(transcript: &Transcript) -> Result<(), ProtocolError> {
    let again = replay(transcript)?.transcript;
    let a = serde_json::to_vec(transcript).map_err(|e| ProtocolError::Replay(e.to_string()))?;
    let b = serde_json::to_vec(&again).map_err(|e| ProtocolError::Replay(e.to_string()))?;
    if a != b {
        return Err(ProtocolError::Replay(format!(
            "session {} diverged",
            transcript.session_id
        )));
    }
    Ok(())
}
