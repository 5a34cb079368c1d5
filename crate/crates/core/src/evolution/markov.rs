//! Affine Markov chain `s' = M·s + e mod q` on Z_q^n and its exact kernel.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::EvolutionError;
use crate::mlwe::cbd_sample;
use crate::zq::{reduce, ZqMat, ZqVec};

/// Largest state space `q^n` for which a dense kernel is built.
pub const DEFAULT_KERNEL_CAP: usize = 4096;

/// Per-coordinate noise law, i.i.d. across coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseLaw {
    /// Centered binomial χ_η.
    Cbd { eta: u32 },
    /// Uniform over all of Z_q.
    Uniform,
    /// Uniform over a finite set of signed offsets.
    Support { values: Vec<i64> },
    /// Explicit probability per residue `0..q`.
    Table { probs: Vec<f64> },
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl NoiseLaw {
    pub fn point_mass_zero() -> Self {
        NoiseLaw::Support { values: vec![0] }
    }

    /// Probability of each residue `0..q`, folding the law mod q.
    pub fn residue_probs(&self, q: u32) -> Vec<f64> {
        let mut p = vec![0.0; q as usize];
        match self {
            NoiseLaw::Cbd { eta } => {
                let n = 2 * *eta as u64;
                let scale = 0.5f64.powi(n as i32);
                for j in 0..=n {
                    p[reduce(j as i64 - *eta as i64, q) as usize] += binomial(n, j) * scale;
                }
            }
            NoiseLaw::Uniform => p.iter_mut().for_each(|x| *x = 1.0 / q as f64),
            NoiseLaw::Support { values } => {
                let w = 1.0 / values.len() as f64;
                for &v in values {
                    p[reduce(v, q) as usize] += w;
                }
            }
            NoiseLaw::Table { probs } => p.copy_from_slice(probs),
        }
        p
    }

    pub fn validate(&self, q: u32) -> Result<(), EvolutionError> {
        match self {
            NoiseLaw::Support { values } if values.is_empty() => {
                return Err(EvolutionError::InvalidNoise("empty support".into()))
            }
            NoiseLaw::Table { probs } => {
                if probs.len() != q as usize {
                    return Err(EvolutionError::InvalidNoise(format!(
                        "table has {} entries, modulus is {q}",
                        probs.len()
                    )));
                }
                if probs.iter().any(|&x| !x.is_finite() || x < 0.0) {
                    return Err(EvolutionError::InvalidNoise(
                        "negative or non-finite probability".into(),
                    ));
                }
            }
            _ => {}
        }
        let total: f64 = self.residue_probs(q).iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(EvolutionError::InvalidNoise(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(())
    }

    /// Whether every residue of Z_q has positive probability.
    pub fn has_full_support(&self, q: u32) -> bool {
        self.residue_probs(q).iter().all(|&x| x > 0.0)
    }

    pub fn sample<R: RngCore + ?Sized>(&self, q: u32, rng: &mut R) -> u32 {
        match self {
            NoiseLaw::Cbd { eta } => reduce(cbd_sample(*eta, rng), q),
            NoiseLaw::Uniform => rng.random_range(0..q),
            NoiseLaw::Support { values } => reduce(values[rng.random_range(0..values.len())], q),
            NoiseLaw::Table { .. } => {
                let probs = self.residue_probs(q);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i as u32;
                    }
                }
                // rounding: fall back to the last residue with mass
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u32
            }
        }
    }
}

/// Transition matrix `M` plus the noise law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainSpecRepr", into = "ChainSpecRepr")]
pub struct ChainSpec {
    m: ZqMat,
    noise: NoiseLaw,
}

#[derive(Serialize, Deserialize)]
struct ChainSpecRepr {
    q: u32,
    m: Vec<Vec<i64>>,
    noise: NoiseLaw,
}

impl TryFrom<ChainSpecRepr> for ChainSpec {
    type Error = EvolutionError;

    fn try_from(r: ChainSpecRepr) -> Result<Self, Self::Error> {
        ChainSpec::new(ZqMat::from_rows(&r.m, r.q)?, r.noise)
    }
}

impl From<ChainSpec> for ChainSpecRepr {
    fn from(c: ChainSpec) -> Self {
        let n = c.n();
        ChainSpecRepr {
            q: c.q(),
            m: (0..n)
                .map(|i| (0..n).map(|j| c.m.get(i, j) as i64).collect())
                .collect(),
            noise: c.noise,
        }
    }
}

impl ChainSpec {
    pub fn new(m: ZqMat, noise: NoiseLaw) -> Result<Self, EvolutionError> {
        if !m.is_square() || m.rows() == 0 {
            return Err(EvolutionError::NotSquare);
        }
        noise.validate(m.modulus())?;
        Ok(ChainSpec { m, noise })
    }

    pub fn matrix(&self) -> &ZqMat {
        &self.m
    }

    pub fn noise(&self) -> &NoiseLaw {
        &self.noise
    }

    pub fn q(&self) -> u32 {
        self.m.modulus()
    }

    pub fn n(&self) -> usize {
        self.m.rows()
    }

    /// `q^n`, or `None` on overflow.
    pub fn state_count(&self) -> Option<usize> {
        (self.q() as usize).checked_pow(self.n() as u32)
    }

    pub fn state_index(&self, s: &ZqVec) -> usize {
        let q = self.q() as usize;
        s.entries()
            .iter()
            .rev()
            .fold(0, |acc, &v| acc * q + v as usize)
    }

    pub fn state_from_index(&self, mut idx: usize) -> ZqVec {
        let q = self.q() as usize;
        let entries = (0..self.n())
            .map(|_| {
                let v = idx % q;
                idx /= q;
                v as u32
            })
            .collect();
        ZqVec::new(entries, self.q()).expect("digits below q")
    }
}

/// `(M·s + e) mod q` with an explicit noise vector.
pub fn markov_step_with_noise(
    s: &ZqVec,
    spec: &ChainSpec,
    e: &ZqVec,
) -> Result<ZqVec, EvolutionError> {
    Ok(spec.m.mul_vec(s)?.add(e)?)
}

/// One transition with noise drawn from the chain's law.
pub fn markov_step<R: RngCore + ?Sized>(
    s: &ZqVec,
    spec: &ChainSpec,
    rng: &mut R,
) -> Result<ZqVec, EvolutionError> {
    let q = spec.q();
    let e: Vec<u32> = (0..spec.n()).map(|_| spec.noise.sample(q, rng)).collect();
    markov_step_with_noise(s, spec, &ZqVec::new(e, q)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Primitivity {
    PrimitiveAt { k: u64 },
    Inconclusive { k_max: u64 },
}

impl Primitivity {
    pub fn is_primitive(&self) -> bool {
        matches!(self, Primitivity::PrimitiveAt { .. })
    }
}

/// Smallest `k ≤ k_max` such that every entry of `M^k` is nonzero mod q.
pub fn check_primitive(m: &ZqMat, k_max: u64) -> Result<Primitivity, EvolutionError> {
    if !m.is_square() {
        return Err(EvolutionError::NotSquare);
    }
    let mut power = m.clone();
    for k in 1..=k_max {
        if power.entries().iter().all(|&v| v != 0) {
            return Ok(Primitivity::PrimitiveAt { k });
        }
        power = power.mul(m)?;
    }
    Ok(Primitivity::Inconclusive { k_max })
}

/// Default primitivity search depth, `n·q`.
pub fn default_k_max(m: &ZqMat) -> u64 {
    m.rows() as u64 * m.modulus() as u64
}

/// Dense row-stochastic transition matrix over the `q^n` states.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    rows: DMatrix<f64>,
}

impl KernelMatrix {
    /// Wraps an explicit matrix, checking non-negativity and row sums.
    pub fn from_matrix(rows: DMatrix<f64>, tol: f64) -> Result<Self, EvolutionError> {
        if rows.nrows() != rows.ncols() || rows.nrows() == 0 {
            return Err(EvolutionError::NotSquare);
        }
        for (i, row) in rows.row_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > tol {
                return Err(EvolutionError::NotStochastic { row: i, sum });
            }
        }
        Ok(KernelMatrix { rows })
    }

    pub fn size(&self) -> usize {
        self.rows.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.rows.row_iter() {
            w.write_record(row.iter().map(|x| format!("{x:.17e}")))
                .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf8 csv")
    }
}

pub fn build_kernel(spec: &ChainSpec) -> Result<KernelMatrix, EvolutionError> {
    build_kernel_capped(spec, DEFAULT_KERNEL_CAP)
}

/// Entry `(s, s')` is `Π_i p[(s'_i − (M·s)_i) mod q]`.
pub fn build_kernel_capped(spec: &ChainSpec, cap: usize) -> Result<KernelMatrix, EvolutionError> {
    let states = match spec.state_count() {
        Some(c) if c <= cap => c,
        other => {
            return Err(EvolutionError::StateSpaceTooLarge {
                q: spec.q(),
                n: spec.n(),
                states: other,
                cap,
            })
        }
    };
    let q = spec.q();
    let probs = spec.noise.residue_probs(q);
    let mut rows = DMatrix::zeros(states, states);
    for from in 0..states {
        let ms = spec.m.mul_vec(&spec.state_from_index(from))?;
        for to in 0..states {
            let target = spec.state_from_index(to);
            let p: f64 = (0..spec.n())
                .map(|i| probs[reduce(target.get(i) as i64 - ms.get(i) as i64, q) as usize])
                .product();
            rows[(from, to)] = p;
        }
    }
    Ok(KernelMatrix { rows })
}
