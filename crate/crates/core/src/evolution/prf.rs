//! Keyed pseudorandom state updates `s' = H(s)`, `A' = ψ(A)`,
//! `t' = A'·s' + e' mod q`.

use serde::{Deserialize, Serialize};
use sha3::digest::XofReader;

use crate::hash::{Domain, Seed, Xof};
use crate::mlwe::{cbd_vec, KemError, Params};
use crate::zq::{ZqMat, ZqVec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrfState {
    pub key_h: Seed,
    pub key_psi: Seed,
    pub counter: u64,
}

impl PrfState {
    pub fn from_seed(seed: &Seed) -> Self {
        PrfState {
            key_h: seed.derive("prf-H"),
            key_psi: seed.derive("prf-psi"),
            counter: 0,
        }
    }
}

/// The evolving lattice state `x_t = (s_t, A_t, t_t)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeState {
    pub s: ZqVec,
    pub a: ZqMat,
    pub t: ZqVec,
}

/// Expands an XOF stream into `len` residues mod q by rejection sampling:
/// 16-bit little-endian words are masked to the bit length of q and kept
/// only when below q.
fn expand_residues(xof: Xof, len: usize, q: u32) -> Vec<u32> {
    let bits = 32 - (q - 1).leading_zeros();
    let mask = if bits >= 16 {
        u16::MAX as u32
    } else {
        (1u32 << bits) - 1
    };
    let mut reader = xof.reader();
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 2];
    while out.len() < len {
        reader.read(&mut buf);
        let v = u16::from_le_bytes(buf) as u32 & mask;
        if v < q {
            out.push(v);
        }
    }
    out
}

/// `H(s)`: keyed hash of the secret expanded to a fresh vector over Z_q.
pub fn prf_secret(key: &Seed, counter: u64, s: &ZqVec) -> ZqVec {
    let mut x = Xof::new(Domain::PrfSecret);
    x.absorb(&key.0)
        .absorb(&counter.to_le_bytes())
        .absorb(&s.to_le16());
    ZqVec::new(expand_residues(x, s.len(), s.modulus()), s.modulus()).expect("residues below q")
}

/// `ψ(A)`: keyed hash of the matrix expanded to a fresh matrix of the same shape.
pub fn prf_matrix(key: &Seed, counter: u64, a: &ZqMat) -> ZqMat {
    let mut x = Xof::new(Domain::PrfMatrix);
    x.absorb(&key.0)
        .absorb(&counter.to_le_bytes())
        .absorb(&a.to_le16());
    let entries = expand_residues(x, a.rows() * a.cols(), a.modulus());
    ZqMat::from_entries(a.rows(), a.cols(), entries, a.modulus()).expect("residues below q")
}

/// Fresh CBD noise for step `counter`, derived from both PRF keys.
pub fn prf_noise(prf: &PrfState, len: usize, eta: u32) -> Vec<i64> {
    let seed = Seed(
        Xof::new(Domain::PrfNoise)
            .absorb(&prf.key_h.0)
            .absorb(&prf.key_psi.0)
            .absorb(&prf.counter.to_le_bytes())
            .clone()
            .finish32(),
    );
    cbd_vec(len, eta, &mut seed.rng())
}

/// One evolution step. Returns the next state and the advanced PRF state.
pub fn prf_evolve(
    state: &LatticeState,
    prf: &PrfState,
    params: &Params,
) -> Result<(LatticeState, PrfState), KemError> {
    let s = prf_secret(&prf.key_h, prf.counter, &state.s);
    let a = prf_matrix(&prf.key_psi, prf.counter, &state.a);
    let e = prf_noise(prf, a.rows(), params.noise_eta());
    let t = a.mul_vec(&s)?.add(&ZqVec::from_signed(&e, params.q))?;
    let next = PrfState {
        counter: prf.counter + 1,
        ..prf.clone()
    };
    Ok((LatticeState { s, a, t }, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlwe::keygen;

    fn start() -> (LatticeState, PrfState, Params) {
        let p = Params::toy().with_seed(Seed::from_u64(11));
        let kp = keygen(&p, &p.seed).unwrap();
        let st = LatticeState {
            s: kp.secret.s,
            a: kp.public.a,
            t: kp.public.t,
        };
        (st, PrfState::from_seed(&p.seed), p)
    }

    #[test]
    fn deterministic_and_counter_advances() {
        let (st, prf, p) = start();
        let (a, pa) = prf_evolve(&st, &prf, &p).unwrap();
        let (b, pb) = prf_evolve(&st, &prf, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert_eq!(pa.counter, prf.counter + 1);
    }

    #[test]
    fn t_matches_independent_recomputation() {
        let (mut st, mut prf, p) = start();
        for _ in 0..20 {
            let e = prf_noise(&prf, p.n, p.eta);
            let (next, np) = prf_evolve(&st, &prf, &p).unwrap();
            for i in 0..p.n {
                let mut acc: i64 = e[i];
                for j in 0..p.k {
                    acc += next.a.get(i, j) as i64 * next.s.get(j) as i64;
                }
                assert_eq!(next.t.get(i) as i64, acc.rem_euclid(p.q as i64));
            }
            st = next;
            prf = np;
        }
    }

    #[test]
    fn counter_changes_output() {
        let (st, prf, p) = start();
        let bumped = PrfState {
            counter: 5,
            ..prf.clone()
        };
        assert_ne!(
            prf_evolve(&st, &prf, &p).unwrap().0,
            prf_evolve(&st, &bumped, &p).unwrap().0
        );
    }
}
