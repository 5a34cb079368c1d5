//! Desk-scale matrix Module-LWE KEM.
//!
//! Keys follow `t = A·s + e mod q` with `A ∈ Z_q^{n×k}` and CBD secrets.
//! Bits are encrypted dual-Regev style: `u = Aᵀr + e1`,
//! `v_j = tᵀr + e2_j + b_j·⌊q/2⌋`, and decoded by rounding
//! `v_j − sᵀu` to the nearer of `{0, ⌊q/2⌋}`. Decoding is correct whenever
//! the accumulated noise `eᵀr − sᵀe1 + e2_j` stays below `q/4` in magnitude.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{hash32, Domain, Seed};
use crate::zq::{center, is_prime, reduce, ZqError, ZqMat, ZqVec};

/// Bits carried by one encapsulation.
pub const MESSAGE_BITS: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("{name} must be at least 1")]
    Zero { name: &'static str },
    #[error("modulus {0} is not prime")]
    NotPrime(u32),
    #[error("modulus {q} must exceed 8·eta = {bound}")]
    MarginTooSmall { q: u32, bound: u64 },
    #[error("modulus {0} does not fit the 16-bit coefficient encoding")]
    ModulusTooLarge(u32),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KemError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Zq(#[from] ZqError),
    #[error("ciphertext carries {got} bits, expected {expected}")]
    MessageLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub k: usize,
    pub q: u32,
    pub eta: u32,
    /// EPR pairs consumed by one session's CHSH test.
    pub m: usize,
    pub seed: Seed,
    /// Test hook: replaces every CBD draw in the KEM with 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub zero_noise: bool,
}

impl Params {
    /// n = k = 4, q = 97, η = 2.
    pub fn toy() -> Self {
        Params {
            n: 4,
            k: 4,
            q: 97,
            eta: 2,
            m: 4096,
            seed: Seed::default(),
            zero_noise: false,
        }
    }

    /// n = k = 16, q = 3329, η = 2.
    pub fn small() -> Self {
        Params {
            n: 16,
            k: 16,
            q: 3329,
            eta: 2,
            m: 4096,
            seed: Seed::default(),
            zero_noise: false,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "toy" => Some(Self::toy()),
            "small" => Some(Self::small()),
            _ => None,
        }
    }

    pub fn with_seed(mut self, seed: Seed) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        for (name, v) in [
            ("n", self.n),
            ("k", self.k),
            ("m", self.m),
            ("eta", self.eta as usize),
        ] {
            if v == 0 {
                return Err(ParamsError::Zero { name });
            }
        }
        if !is_prime(self.q) {
            return Err(ParamsError::NotPrime(self.q));
        }
        if self.q > u16::MAX as u32 {
            return Err(ParamsError::ModulusTooLarge(self.q));
        }
        let bound = 8 * self.eta as u64;
        if self.q as u64 <= bound {
            return Err(ParamsError::MarginTooSmall { q: self.q, bound });
        }
        Ok(())
    }

    /// The η actually used by the samplers (0 under the zero-noise hook).
    pub fn noise_eta(&self) -> u32 {
        if self.zero_noise {
            0
        } else {
            self.eta
        }
    }

    pub fn half_q(&self) -> u32 {
        self.q / 2
    }
}

/// Centered binomial value from raw bits: popcount of the low `2η` bits minus η.
pub fn cbd_from_bits(bits: u64, eta: u32) -> i64 {
    debug_assert!(eta <= 32);
    let mask = if eta == 32 {
        u64::MAX
    } else {
        (1u64 << (2 * eta)) - 1
    };
    (bits & mask).count_ones() as i64 - eta as i64
}

/// One draw from χ_η: the sum of 2η fair bits, minus η.
pub fn cbd_sample<R: RngCore + ?Sized>(eta: u32, rng: &mut R) -> i64 {
    let mut remaining = eta;
    let mut total = 0i64;
    while remaining > 0 {
        let chunk = remaining.min(32);
        total += cbd_from_bits(rng.next_u64(), chunk);
        remaining -= chunk;
    }
    total
}

pub fn cbd_vec<R: RngCore + ?Sized>(len: usize, eta: u32, rng: &mut R) -> Vec<i64> {
    (0..len).map(|_| cbd_sample(eta, rng)).collect()
}

fn uniform_mat<R: RngCore + ?Sized>(rows: usize, cols: usize, q: u32, rng: &mut R) -> ZqMat {
    let entries = (0..rows * cols).map(|_| rng.random_range(0..q)).collect();
    ZqMat::from_entries(rows, cols, entries, q).expect("entries sampled below q")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicKey {
    pub a: ZqMat,
    pub t: ZqVec,
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.a.to_le16();
        out.extend(self.t.to_le16());
        out
    }

    pub fn hash(&self) -> [u8; 32] {
        hash32(Domain::PublicKey, &[&self.to_bytes()])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretKey {
    pub s: ZqVec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

/// Keygen noise, kept only for auditing.
#[derive(Debug, Clone)]
pub struct KeygenNoise {
    pub e: Vec<i64>,
}

pub fn keygen(params: &Params, seed: &Seed) -> Result<KeyPair, KemError> {
    keygen_audited(params, seed).map(|(kp, _)| kp)
}

/// Keygen that also returns the error vector `e` so callers can check
/// `t = A·s + e` and the decoding margin.
pub fn keygen_audited(params: &Params, seed: &Seed) -> Result<(KeyPair, KeygenNoise), KemError> {
    params.validate()?;
    let q = params.q;
    let eta = params.noise_eta();
    let a = uniform_mat(params.n, params.k, q, &mut seed.derive("A").rng());
    let s_raw = cbd_vec(params.k, eta, &mut seed.derive("s").rng());
    let e = cbd_vec(params.n, eta, &mut seed.derive("e").rng());
    let s = ZqVec::from_signed(&s_raw, q);
    let t = a.mul_vec(&s)?.add(&ZqVec::from_signed(&e, q))?;
    Ok((
        KeyPair {
            public: PublicKey { a, t },
            secret: SecretKey { s },
        },
        KeygenNoise { e },
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub u: ZqVec,
    pub v: Vec<u32>,
}

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.u.to_le16();
        for &x in &self.v {
            out.extend((x as u16).to_le_bytes());
        }
        out
    }

    pub fn hash(&self) -> [u8; 32] {
        hash32(Domain::Ciphertext, &[&self.to_bytes()])
    }

    /// Total number of coefficients (`k` for u plus one per bit).
    pub fn coefficient_count(&self) -> usize {
        self.u.len() + self.v.len()
    }
}

/// Encryption randomness, kept only for auditing.
#[derive(Debug, Clone)]
pub struct EncryptNoise {
    pub r: Vec<i64>,
    pub e1: Vec<i64>,
    pub e2: Vec<i64>,
}

/// Encrypts an explicit bit-string with coins derived from `seed`.
pub fn encrypt(
    pk: &PublicKey,
    params: &Params,
    bits: &[bool],
    seed: &Seed,
) -> Result<Ciphertext, KemError> {
    encrypt_audited(pk, params, bits, seed).map(|(ct, _)| ct)
}

pub fn encrypt_audited(
    pk: &PublicKey,
    params: &Params,
    bits: &[bool],
    seed: &Seed,
) -> Result<(Ciphertext, EncryptNoise), KemError> {
    params.validate()?;
    let q = params.q;
    let eta = params.noise_eta();
    let r_raw = cbd_vec(params.n, eta, &mut seed.derive("r").rng());
    let e1 = cbd_vec(params.k, eta, &mut seed.derive("e1").rng());
    let e2 = cbd_vec(bits.len(), eta, &mut seed.derive("e2").rng());
    let r = ZqVec::from_signed(&r_raw, q);
    let u =
        pk.a.transpose_mul_vec(&r)?
            .add(&ZqVec::from_signed(&e1, q))?;
    let tr = pk.t.dot(&r)? as i64;
    let half = params.half_q() as i64;
    let v = bits
        .iter()
        .zip(&e2)
        .map(|(&b, &noise)| reduce(tr + noise + if b { half } else { 0 }, q))
        .collect();
    Ok((Ciphertext { u, v }, EncryptNoise { r: r_raw, e1, e2 }))
}

/// Samples a fresh [`MESSAGE_BITS`]-bit string and encrypts it.
pub fn encaps(
    pk: &PublicKey,
    params: &Params,
    seed: &Seed,
) -> Result<(Ciphertext, Vec<bool>), KemError> {
    let mut rng = seed.derive("msg").rng();
    let bits: Vec<bool> = (0..MESSAGE_BITS).map(|_| rng.random()).collect();
    let ct = encrypt(pk, params, &bits, &seed.derive("coins"))?;
    Ok((ct, bits))
}

/// Rounds `v_j − sᵀu` to the nearer of `0` and `⌊q/2⌋`.
pub fn decaps(sk: &SecretKey, ct: &Ciphertext, params: &Params) -> Result<Vec<bool>, KemError> {
    let q = params.q;
    let su = sk.s.dot(&ct.u)? as i64;
    let half = params.half_q() as i64;
    Ok(ct
        .v
        .iter()
        .map(|&v| {
            let d = reduce(v as i64 - su, q);
            let to_zero = center(d, q).abs();
            let to_half = center(reduce(d as i64 - half, q), q).abs();
            to_half < to_zero
        })
        .collect())
}

/// Exact per-bit decoding noise `eᵀr − sᵀe1 + e2_j` as integers.
pub fn decoding_noise(keygen: &KeygenNoise, sk: &SecretKey, enc: &EncryptNoise) -> Vec<i64> {
    let er: i64 = keygen.e.iter().zip(&enc.r).map(|(a, b)| a * b).sum();
    let s = sk.s.centered();
    let se1: i64 = s.iter().zip(&enc.e1).map(|(a, b)| a * b).sum();
    enc.e2.iter().map(|e2| er - se1 + e2).collect()
}

/// Whether every per-bit noise value stays strictly inside the `q/4` margin.
pub fn within_margin(noise: &[i64], q: u32) -> bool {
    noise.iter().all(|&x| 4 * x.abs() < q as i64)
}

pub fn bits_to_bytes(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub fn bytes_to_bits(bytes: &[u8], len: usize) -> Vec<bool> {
    (0..len)
        .map(|i| (bytes[i / 8] >> (i % 8)) & 1 == 1)
        .collect()
}
