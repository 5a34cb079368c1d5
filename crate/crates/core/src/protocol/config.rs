use serde::{Deserialize, Deserializer, Serialize};

use super::ProtocolError;
use crate::chsh::{Strategy, DEFAULT_EPSILON};
use crate::evolution::{ChainSpec, NoiseLaw};
use crate::hash::Seed;
use crate::mlwe::Params;
use crate::zq::ZqMat;

/// Security parameter that the parameter-size premise is scaled from.
pub const DEFAULT_LAMBDA: u32 = 128;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Channel {
    #[default]
    Ideal,
    /// Werner-state degradation of every EPR pair.
    NoisyVisibility { visibility: f64 },
    /// The channel is replaced by a local strategy of the adversary's choice.
    AdversarialLhv {
        #[serde(default = "Strategy::best_lhv")]
        strategy: Strategy,
    },
}

impl Channel {
    pub fn strategy(&self) -> Strategy {
        match self {
            Channel::Ideal => Strategy::QuantumIdeal,
            Channel::NoisyVisibility { visibility } => Strategy::QuantumNoisy {
                visibility: *visibility,
            },
            Channel::AdversarialLhv { strategy } => strategy.clone(),
        }
    }
}

/// `s' = 2s + e mod 5` with `e` uniform: primitive, full support, gap 1.
pub fn default_chain() -> ChainSpec {
    ChainSpec::new(
        ZqMat::from_rows(&[vec![2]], 5).expect("2 < 5"),
        NoiseLaw::Uniform,
    )
    .expect("square")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvolutionConfig {
    Prf,
    Markov { chain: ChainSpec },
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig::Markov {
            chain: default_chain(),
        }
    }
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_sessions() -> usize {
    1
}

/// Accepts either a preset name (`"toy"`, `"small"`) or a full parameter object.
fn params_or_preset<'de, D: Deserializer<'de>>(d: D) -> Result<Params, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Preset(String),
        Full(Params),
    }
    match Repr::deserialize(d)? {
        Repr::Full(p) => Ok(p),
        Repr::Preset(name) => Params::preset(&name)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown preset {name:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(deserialize_with = "params_or_preset")]
    pub params: Params,
    #[serde(default)]
    pub channel: Channel,
    #[serde(default)]
    pub evolution: EvolutionConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_sessions")]
    pub sessions: usize,
    /// Nominal λ for the `n·log₂ q ≥ λ²` premise; defaults to
    /// `128·n/256` (at least 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<u32>,
    /// Spectral-gap floor for the chain premise; defaults to `1/(n+1)²`
    /// with `n` the chain dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_floor: Option<f64>,
}

impl SessionConfig {
    pub fn new(params: Params) -> Self {
        SessionConfig {
            params,
            channel: Channel::Ideal,
            evolution: EvolutionConfig::default(),
            epsilon: DEFAULT_EPSILON,
            sessions: 1,
            lambda: None,
            gap_floor: None,
        }
    }

    pub fn toy(seed: u64) -> Self {
        SessionConfig::new(Params::toy().with_seed(Seed::from_u64(seed)))
    }

    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = channel;
        self
    }

    pub fn with_evolution(mut self, evolution: EvolutionConfig) -> Self {
        self.evolution = evolution;
        self
    }

    pub fn with_sessions(mut self, sessions: usize) -> Self {
        self.sessions = sessions;
        self
    }

    pub fn seed(&self) -> &Seed {
        &self.params.seed
    }

    pub fn effective_lambda(&self) -> u32 {
        self.lambda
            .unwrap_or_else(|| ((DEFAULT_LAMBDA as usize * self.params.n) / 256).max(1) as u32)
    }

    pub fn effective_gap_floor(&self) -> f64 {
        self.gap_floor.unwrap_or_else(|| match &self.evolution {
            EvolutionConfig::Markov { chain } => 1.0 / ((chain.n() + 1) as f64).powi(2),
            EvolutionConfig::Prf => 0.0,
        })
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        self.params.validate()?;
        if self.sessions == 0 {
            return Err(ProtocolError::Config("sessions must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ProtocolError::Config(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if let Channel::NoisyVisibility { visibility } = self.channel {
            if !(0.0..=1.0).contains(&visibility) {
                return Err(ProtocolError::Config(format!(
                    "visibility must lie in [0, 1], got {visibility}"
                )));
            }
        }
        if let Some(g) = self.gap_floor {
            if !(0.0..=1.0).contains(&g) {
                return Err(ProtocolError::Config(format!(
                    "gap_floor must lie in [0, 1], got {g}"
                )));
            }
        }
        Ok(())
    }
}
