//! Two-party session orchestration: the CHSH gate, FO-wrapped KEM, key
//! evolution across sessions, premise checks, transcripts and campaigns.

mod campaign;
mod config;
mod fo;
mod session;

use thiserror::Error;

use crate::chsh::ChshError;
use crate::evolution::EvolutionError;
use crate::mlwe::{KemError, ParamsError};

pub use campaign::{campaign_csv, run_campaign, CampaignReport, CampaignRow, CampaignSummary};
pub use config::{default_chain, Channel, EvolutionConfig, SessionConfig, DEFAULT_LAMBDA};
pub use fo::{
    fo_decaps, fo_decaps_pair, fo_encaps, fo_encaps_message, fo_keygen, FoDecapsulation, FoKeyPair,
    SharedSecret,
};
pub use session::{
    initial_state, replay, run_session, verify_replay, EstimateRecord, EvolutionState,
    EvolutionSummary, KemRecord, PremiseDetail, Premises, ResultRecord, SeedRecord, SessionContext,
    SessionOutcome, SessionResult, Transcript,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Kem(#[from] KemError),
    #[error(transparent)]
    Chsh(#[from] ChshError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error("replay mismatch: {0}")]
    Replay(String),
}
