//! Fujisaki–Okamoto wrapping of the bit-encryption KEM with implicit
//! rejection.

use rand::RngCore;

use crate::hash::{hash32, Domain, Seed};
use crate::mlwe::{
    bits_to_bytes, bytes_to_bits, decaps, encrypt, keygen, Ciphertext, KemError, KeyPair, Params,
    PublicKey, SecretKey, MESSAGE_BITS,
};

pub type SharedSecret = [u8; 32];

/// A key pair plus the implicit-rejection secret `z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoKeyPair {
    pub keypair: KeyPair,
    pub z: [u8; 32],
}

pub fn fo_keygen(params: &Params, seed: &Seed) -> Result<FoKeyPair, KemError> {
    Ok(FoKeyPair {
        keypair: keygen(params, seed)?,
        z: seed.derive("z").0,
    })
}

/// Encryption coins `H(μ ‖ H(pk))`.
fn coins(mu: &[bool], pk_hash: &[u8; 32]) -> Seed {
    Seed(hash32(Domain::Coins, &[&bits_to_bytes(mu), pk_hash]))
}

fn kdf(mu: &[bool], ct: &Ciphertext) -> SharedSecret {
    hash32(Domain::Kdf, &[&bits_to_bytes(mu), &ct.hash()])
}

/// Deterministic encapsulation of a chosen message.
pub fn fo_encaps_message(
    pk: &PublicKey,
    params: &Params,
    mu: &[bool],
) -> Result<(Ciphertext, SharedSecret), KemError> {
    let ct = encrypt(pk, params, mu, &coins(mu, &pk.hash()))?;
    let ss = kdf(mu, &ct);
    Ok((ct, ss))
}

/// Draws `μ` from `seed` and encapsulates it.
pub fn fo_encaps(
    pk: &PublicKey,
    params: &Params,
    seed: &Seed,
) -> Result<(Ciphertext, SharedSecret), KemError> {
    let mut bytes = [0u8; MESSAGE_BITS / 8];
    seed.derive("mu").rng().fill_bytes(&mut bytes);
    fo_encaps_message(pk, params, &bytes_to_bits(&bytes, MESSAGE_BITS))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoDecapsulation {
    pub shared_secret: SharedSecret,
    /// Whether re-encryption reproduced the received ciphertext.
    pub reencryption_ok: bool,
}

/// Decrypts, re-encrypts and compares. A mismatch (or a malformed
/// ciphertext) yields `H(z ‖ H(ct))` instead of an error.
pub fn fo_decaps(
    sk: &SecretKey,
    pk: &PublicKey,
    z: &[u8; 32],
    ct: &Ciphertext,
    params: &Params,
) -> FoDecapsulation {
    let reencrypted = decaps(sk, ct, params).and_then(|mu| fo_encaps_message(pk, params, &mu));
    match reencrypted {
        Ok((ct2, ss)) if ct2 == *ct => FoDecapsulation {
            shared_secret: ss,
            reencryption_ok: true,
        },
        _ => FoDecapsulation {
            shared_secret: hash32(Domain::Reject, &[z, &ct.hash()]),
            reencryption_ok: false,
        },
    }
}

pub fn fo_decaps_pair(kp: &FoKeyPair, ct: &Ciphertext, params: &Params) -> FoDecapsulation {
    fo_decaps(&kp.keypair.secret, &kp.keypair.public, &kp.z, ct, params)
}
