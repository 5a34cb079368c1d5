//! Domain-separated hashing, seeds and deterministic random streams.
//!
//! Every hash, KDF and PRF in the crate is SHAKE256 prefixed with a
//! [`Domain`] tag, so outputs from different roles can never collide.
//! Randomness comes from ChaCha20 streams keyed by [`Seed`]s, and child seeds
//! are derived by hashing the parent together with a label.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

/// Deterministic random stream used throughout the crate.
pub type DetRng = ChaCha20Rng;

/// Domain-separation tags for every hash-based primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    SeedDerive,
    AExpand,
    Coins,
    Kdf,
    Reject,
    Transcript,
    PublicKey,
    Ciphertext,
    PrfSecret,
    PrfMatrix,
    PrfNoise,
    SessionKey,
}

impl Domain {
    fn tag(self) -> &'static [u8] {
        match self {
            Domain::SeedDerive => b"chsh-kyber/seed",
            Domain::AExpand => b"chsh-kyber/A-expand",
            Domain::Coins => b"chsh-kyber/coins",
            Domain::Kdf => b"chsh-kyber/kdf",
            Domain::Reject => b"chsh-kyber/reject",
            Domain::Transcript => b"chsh-kyber/transcript",
            Domain::PublicKey => b"chsh-kyber/pk",
            Domain::Ciphertext => b"chsh-kyber/ct",
            Domain::PrfSecret => b"chsh-kyber/prf-H",
            Domain::PrfMatrix => b"chsh-kyber/prf-psi",
            Domain::PrfNoise => b"chsh-kyber/prf-noise",
            Domain::SessionKey => b"chsh-kyber/session-key",
        }
    }
}

/// Incremental domain-separated SHAKE256.
///
/// Each `absorb` call is length-prefixed so that concatenation boundaries are
/// unambiguous.
#[derive(Clone)]
pub struct Xof {
    inner: Shake256,
}

impl Xof {
    pub fn new(domain: Domain) -> Self {
        let mut x = Xof {
            inner: Shake256::default(),
        };
        x.absorb(domain.tag());
        x
    }

    pub fn absorb(&mut self, data: &[u8]) -> &mut Self {
        self.inner.update(&(data.len() as u64).to_le_bytes());
        self.inner.update(data);
        self
    }

    pub fn reader(self) -> impl XofReader {
        self.inner.finalize_xof()
    }

    pub fn finish32(self) -> [u8; 32] {
        let mut out = [0u8; 32];
        self.reader().read(&mut out);
        out
    }
}

/// One-shot hash of several byte strings under a domain.
pub fn hash32(domain: Domain, parts: &[&[u8]]) -> [u8; 32] {
    let mut x = Xof::new(domain);
    for p in parts {
        x.absorb(p);
    }
    x.finish32()
}

/// A 32-byte seed. Serialized as lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed(pub [u8; 32]);

impl Seed {
    /// Expands a small integer seed (as typed on a command line) into 32 bytes.
    pub fn from_u64(v: u64) -> Self {
        Seed(hash32(Domain::SeedDerive, &[b"u64", &v.to_le_bytes()]))
    }

    /// Child seed for an independent sub-stream.
    pub fn derive(&self, label: &str) -> Seed {
        Seed(hash32(Domain::SeedDerive, &[&self.0, label.as_bytes()]))
    }

    /// Child seed indexed by an integer (per-session or per-shard streams).
    pub fn derive_indexed(&self, label: &str, index: u64) -> Seed {
        Seed(hash32(
            Domain::SeedDerive,
            &[&self.0, label.as_bytes(), &index.to_le_bytes()],
        ))
    }

    pub fn rng(&self) -> DetRng {
        DetRng::from_seed(self.0)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Seed(out))
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({})", self.to_hex())
    }
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(u64),
            Hex(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(Seed::from_u64(v)),
            Repr::Hex(s) => Seed::from_hex(&s).map_err(serde::de::Error::custom),
        }
    }
}
