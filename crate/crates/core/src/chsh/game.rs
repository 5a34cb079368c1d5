use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::state::{epr_state, joint_outcome_probs, werner_outcome_probs, JointProbs, Observable};
use super::ChshError;

/// Default verification confidence parameter, 2^−32.
pub const DEFAULT_EPSILON: f64 = 2.3283064365386963e-10;

/// Best classical expectation of C.
pub const CLASSICAL_BOUND: f64 = 0.5;

/// Hoeffding half-width for the mean of `m` i.i.d. ±1 variables at
/// confidence `1 − ε`: `sqrt(2·ln(2/ε)/m)`.
pub fn hoeffding_half_width(m: usize, epsilon: f64) -> f64 {
    (2.0 * (2.0 / epsilon).ln() / m as f64).sqrt()
}

/// A deterministic local strategy: `x = alice[a]`, `y = bob[b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LhvTable {
    pub alice: [i8; 2],
    pub bob: [i8; 2],
}

impl LhvTable {
    /// Bits of `index` (0..16) select −1 for alice[0], alice[1], bob[0], bob[1].
    pub fn from_index(index: u8) -> Self {
        let s = |bit: u8| if index >> bit & 1 == 1 { -1 } else { 1 };
        LhvTable {
            alice: [s(0), s(1)],
            bob: [s(2), s(3)],
        }
    }

    pub fn index(&self) -> u8 {
        let b = |v: i8, bit: u8| ((v < 0) as u8) << bit;
        b(self.alice[0], 0) | b(self.alice[1], 1) | b(self.bob[0], 2) | b(self.bob[1], 3)
    }

    pub fn all() -> impl Iterator<Item = LhvTable> {
        (0..16).map(LhvTable::from_index)
    }

    /// Exact `E[C]` under uniform settings, in quarters: `Σ_{a,b} f(a)g(b)(−1)^{ab}`.
    pub fn quarter_sum(&self) -> i32 {
        let mut acc = 0i32;
        for a in 0..2 {
            for b in 0..2 {
                let sign = if a & b == 1 { -1 } else { 1 };
                acc += (self.alice[a] * self.bob[b]) as i32 * sign;
            }
        }
        acc
    }

    pub fn expectation(&self) -> f64 {
        self.quarter_sum() as f64 / 4.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    QuantumIdeal,
    /// Werner mixture `v·EPR + (1 − v)·I/4`.
    QuantumNoisy {
        visibility: f64,
    },
    ClassicalDeterministic {
        table: LhvTable,
    },
    /// Shared randomness λ picks a table with the given weights each round.
    ClassicalRandomLhv {
        mixture: Vec<(f64, LhvTable)>,
    },
}

impl Strategy {
    /// Always answer +1: attains the classical optimum 1/2.
    pub fn best_lhv() -> Self {
        Strategy::ClassicalDeterministic {
            table: LhvTable::from_index(0),
        }
    }

    /// Uniform mixture over all 16 deterministic tables.
    pub fn random_lhv() -> Self {
        Strategy::ClassicalRandomLhv {
            mixture: LhvTable::all().map(|t| (1.0 / 16.0, t)).collect(),
        }
    }

    pub fn tag(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::QuantumIdeal => write!(f, "quantum"),
            Strategy::QuantumNoisy { visibility } => write!(f, "noisy:{visibility}"),
            Strategy::ClassicalDeterministic { table } => write!(f, "lhv:{}", table.index()),
            Strategy::ClassicalRandomLhv { .. } if *self == Strategy::random_lhv() => {
                write!(f, "lhv:random")
            }
            Strategy::ClassicalRandomLhv { .. } => write!(f, "lhv:mixture"),
        }
    }
}

impl FromStr for Strategy {
    type Err = ChshError;

    /// `quantum`, `noisy:<v>`, `lhv:<0..15>` or `lhv:random`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ChshError::InvalidStrategy(s.to_string());
        match s.split_once(':') {
            None if s == "quantum" => Ok(Strategy::QuantumIdeal),
            Some(("noisy", v)) => {
                let visibility: f64 = v.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&visibility) {
                    return Err(ChshError::InvalidVisibility(visibility));
                }
                Ok(Strategy::QuantumNoisy { visibility })
            }
            Some(("lhv", "random")) => Ok(Strategy::random_lhv()),
            Some(("lhv", idx)) => {
                let i: u8 = idx.parse().map_err(|_| bad())?;
                if i >= 16 {
                    return Err(bad());
                }
                Ok(Strategy::ClassicalDeterministic {
                    table: LhvTable::from_index(i),
                })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChshRound {
    pub a: u8,
    pub b: u8,
    pub x: i8,
    pub y: i8,
    pub c: i8,
}

impl ChshRound {
    pub fn new(a: u8, b: u8, x: i8, y: i8) -> Self {
        ChshRound {
            a,
            b,
            x,
            y,
            c: correlation(a, b, x, y),
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.a <= 1
            && self.b <= 1
            && self.x.abs() == 1
            && self.y.abs() == 1
            && self.c == correlation(self.a, self.b, self.x, self.y)
    }

    pub fn to_bytes(&self) -> [u8; 5] {
        [self.a, self.b, self.x as u8, self.y as u8, self.c as u8]
    }
}

/// `C = x·y·(−1)^{a·b}`.
pub fn correlation(a: u8, b: u8, x: i8, y: i8) -> i8 {
    let sign = if a & b == 1 { -1 } else { 1 };
    x * y * sign
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshTranscript {
    pub rounds: Vec<ChshRound>,
    pub strategy_tag: String,
}

impl ChshTranscript {
    pub fn m(&self) -> usize {
        self.rounds.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.rounds.iter().flat_map(|r| r.to_bytes()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshEstimate {
    pub m: usize,
    pub epsilon: f64,
    /// Mean of C over all rounds.
    pub e_hat: f64,
    /// `S` from the four per-setting correlators.
    pub s_hat: f64,
    /// Setting-balanced mean of C; equals `s_hat / 4`.
    pub e_hat_balanced: f64,
    /// `E[A_a B_b]` indexed `[a][b]`.
    pub correlators: [[f64; 2]; 2],
    pub counts: [[usize; 2]; 2],
    pub ci_half_width: f64,
    pub violated: bool,
}

pub fn estimate(transcript: &ChshTranscript, epsilon: f64) -> ChshEstimate {
    let m = transcript.m();
    let mut sum_c = 0i64;
    let mut sum_xy = [[0i64; 2]; 2];
    let mut counts = [[0usize; 2]; 2];
    for r in &transcript.rounds {
        sum_c += r.c as i64;
        sum_xy[r.a as usize][r.b as usize] += (r.x * r.y) as i64;
        counts[r.a as usize][r.b as usize] += 1;
    }
    let mut correlators = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            if counts[a][b] > 0 {
                correlators[a][b] = sum_xy[a][b] as f64 / counts[a][b] as f64;
            }
        }
    }
    let s_hat = correlators[0][0] + correlators[0][1] + correlators[1][0] - correlators[1][1];
    let e_hat = if m > 0 { sum_c as f64 / m as f64 } else { 0.0 };
    let ci_half_width = hoeffding_half_width(m.max(1), epsilon);
    ChshEstimate {
        m,
        epsilon,
        e_hat,
        s_hat,
        e_hat_balanced: s_hat / 4.0,
        correlators,
        counts,
        ci_half_width,
        violated: m > 0 && e_hat - ci_half_width > CLASSICAL_BOUND,
    }
}

/// Per-strategy round generator with the outcome tables precomputed.
#[derive(Debug, Clone)]
pub struct RoundSampler {
    strategy: Strategy,
    quantum: Option<[[JointProbs; 2]; 2]>,
    mixture_cdf: Vec<(f64, LhvTable)>,
}

impl RoundSampler {
    pub fn new(strategy: &Strategy) -> Result<Self, ChshError> {
        let quantum_table = |v: f64| {
            let psi = epr_state();
            let mut t = [[JointProbs([[0.0; 2]; 2]); 2]; 2];
            for a in 0..2u8 {
                for b in 0..2u8 {
                    t[a as usize][b as usize] =
                        werner_outcome_probs(&psi, &Observable::alice(a), &Observable::bob(b), v);
                }
            }
            t
        };
        let mut sampler = RoundSampler {
            strategy: strategy.clone(),
            quantum: None,
            mixture_cdf: Vec::new(),
        };
        match strategy {
            Strategy::QuantumIdeal => {
                let psi = epr_state();
                let mut t = [[JointProbs([[0.0; 2]; 2]); 2]; 2];
                for a in 0..2u8 {
                    for b in 0..2u8 {
                        t[a as usize][b as usize] =
                            joint_outcome_probs(&psi, &Observable::alice(a), &Observable::bob(b));
                    }
                }
                sampler.quantum = Some(t);
            }
            Strategy::QuantumNoisy { visibility } => {
                if !(0.0..=1.0).contains(visibility) {
                    return Err(ChshError::InvalidVisibility(*visibility));
                }
                sampler.quantum = Some(quantum_table(*visibility));
            }
            Strategy::ClassicalDeterministic { .. } => {}
            Strategy::ClassicalRandomLhv { mixture } => {
                let total: f64 = mixture.iter().map(|(w, _)| w).sum();
                if mixture.is_empty()
                    || mixture.iter().any(|(w, _)| w.is_nan() || *w < 0.0)
                    || (total - 1.0).abs() > 1e-9
                {
                    return Err(ChshError::InvalidStrategy(
                        "LHV mixture weights must sum to 1".into(),
                    ));
                }
                let mut acc = 0.0;
                sampler.mixture_cdf = mixture
                    .iter()
                    .map(|(w, t)| {
                        acc += w;
                        (acc, *t)
                    })
                    .collect();
            }
        }
        Ok(sampler)
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn play<R: RngCore + ?Sized>(&self, rng: &mut R) -> ChshRound {
        let a = rng.random::<bool>() as u8;
        let b = rng.random::<bool>() as u8;
        let (x, y) = match (&self.strategy, &self.quantum) {
            (_, Some(tables)) => {
                let p = &tables[a as usize][b as usize].0;
                let u: f64 = rng.random();
                let outcomes = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
                let probs = [p[0][0], p[0][1], p[1][0], p[1][1]];
                let mut acc = 0.0;
                let mut pick = outcomes[3];
                for (o, pr) in outcomes.iter().zip(probs) {
                    acc += pr;
                    if u < acc {
                        pick = *o;
                        break;
                    }
                }
                pick
            }
            (Strategy::ClassicalDeterministic { table }, None) => {
                (table.alice[a as usize], table.bob[b as usize])
            }
            (Strategy::ClassicalRandomLhv { .. }, None) => {
                let u: f64 = rng.random();
                let table = self
                    .mixture_cdf
                    .iter()
                    .find(|(c, _)| u < *c)
                    .or(self.mixture_cdf.last())
                    .map(|(_, t)| *t)
                    .expect("validated non-empty mixture");
                (table.alice[a as usize], table.bob[b as usize])
            }
            _ => unreachable!("quantum strategies always carry tables"),
        };
        ChshRound::new(a, b, x, y)
    }
}

/// Plays one round; settings `a`, `b` are independent fair bits.
pub fn play_round<R: RngCore + ?Sized>(
    strategy: &Strategy,
    rng: &mut R,
) -> Result<ChshRound, ChshError> {
    Ok(RoundSampler::new(strategy)?.play(rng))
}

pub fn run_game<R: RngCore + ?Sized>(
    strategy: &Strategy,
    m: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<(ChshTranscript, ChshEstimate), ChshError> {
    if m == 0 {
        return Err(ChshError::EmptyTranscript);
    }
    let sampler = RoundSampler::new(strategy)?;
    let rounds = (0..m).map(|_| sampler.play(rng)).collect();
    let transcript = ChshTranscript {
        rounds,
        strategy_tag: strategy.tag(),
    };
    let est = estimate(&transcript, epsilon);
    Ok((transcript, est))
}

/// Maximum exact `E[C]` over the 16 deterministic local strategies.
pub fn lhv_max() -> f64 {
    LhvTable::all()
        .map(|t| t.quarter_sum())
        .max()
        .expect("16 tables") as f64
        / 4.0
}

/// Minimum exact `E[C]` over the 16 deterministic local strategies.
pub fn lhv_min() -> f64 {
    LhvTable::all()
        .map(|t| t.quarter_sum())
        .min()
        .expect("16 tables") as f64
        / 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsirelsonScan {
    pub max_abs_s: f64,
    /// Maximizing angles `(α0, α1, β0, β1)`.
    pub argmax: [f64; 4],
    pub evaluations: usize,
}

/// Maximum of `|S|` over all `(α0, α1) ∈ alice²`, `(β0, β1) ∈ bob²` on the
/// EPR state, with observables `cos θ·σ_z + sin θ·σ_x`.
///
/// `S` splits into a β0 part `E(α0,β0) + E(α1,β0)` and a β1 part
/// `E(α0,β1) − E(α1,β1)`, so for each Alice pair both halves are maximized
/// (and minimized) independently; the result is the exact grid optimum.
pub fn tsirelson_scan(alice: &[f64], bob: &[f64]) -> TsirelsonScan {
    let psi = epr_state();
    let bob_obs: Vec<Observable> = bob.iter().map(|&t| Observable::at_angle(t)).collect();
    let corr: Vec<Vec<f64>> = alice
        .iter()
        .map(|&ta| {
            let oa = Observable::at_angle(ta);
            bob_obs
                .iter()
                .map(|ob| joint_outcome_probs(&psi, &oa, ob).correlation())
                .collect()
        })
        .collect();
    let mut best = TsirelsonScan {
        max_abs_s: f64::NEG_INFINITY,
        argmax: [0.0; 4],
        evaluations: alice.len() * bob.len(),
    };
    for i0 in 0..alice.len() {
        for i1 in 0..alice.len() {
            let (mut hi0, mut lo0, mut hi1, mut lo1) = (
                (f64::NEG_INFINITY, 0),
                (f64::INFINITY, 0),
                (f64::NEG_INFINITY, 0),
                (f64::INFINITY, 0),
            );
            for j in 0..bob.len() {
                let p0 = corr[i0][j] + corr[i1][j];
                let p1 = corr[i0][j] - corr[i1][j];
                if p0 > hi0.0 {
                    hi0 = (p0, j);
                }
                if p0 < lo0.0 {
                    lo0 = (p0, j);
                }
                if p1 > hi1.0 {
                    hi1 = (p1, j);
                }
                if p1 < lo1.0 {
                    lo1 = (p1, j);
                }
            }
            for (s, j0, j1) in [
                (hi0.0 + hi1.0, hi0.1, hi1.1),
                (-(lo0.0 + lo1.0), lo0.1, lo1.1),
            ] {
                if s > best.max_abs_s {
                    best.max_abs_s = s;
                    best.argmax = [alice[i0], alice[i1], bob[j0], bob[j1]];
                }
            }
        }
    }
    best
}

/// Inclusive uniform grid over `[lo, hi]` with `steps` intervals.
pub fn angle_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
        .collect()
}

/// `(2√2 − 2)/4 − sqrt(2·ln(2/ε)/m)`, floored at zero.
pub fn quantum_advantage_gap(m: usize, epsilon: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    ((2.0 * SQRT_2 - 2.0) / 4.0 - hoeffding_half_width(m, epsilon)).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub m: usize,
    pub epsilon: f64,
    pub e_hat: f64,
    pub half_width: f64,
    /// Mean C must exceed this to accept: `1/2 + half_width`.
    pub threshold: f64,
    pub accepted: bool,
}

/// Recomputes `E[C]` from raw rounds and accepts iff it clears the classical
/// bound by the Hoeffding margin.
pub fn verify_session(
    transcript: &ChshTranscript,
    epsilon: f64,
) -> Result<VerificationReport, ChshError> {
    if transcript.rounds.is_empty() {
        return Err(ChshError::EmptyTranscript);
    }
    if let Some(round) = transcript.rounds.iter().position(|r| !r.is_consistent()) {
        return Err(ChshError::InconsistentTranscript { round });
    }
    let m = transcript.m();
    let sum: i64 = transcript
        .rounds
        .iter()
        .map(|r| correlation(r.a, r.b, r.x, r.y) as i64)
        .sum();
    let e_hat = sum as f64 / m as f64;
    let half_width = hoeffding_half_width(m, epsilon);
    Ok(VerificationReport {
        m,
        epsilon,
        e_hat,
        half_width,
        threshold: CLASSICAL_BOUND + half_width,
        accepted: e_hat - half_width > CLASSICAL_BOUND,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::Seed;

    #[test]
    fn lhv_enumeration() {
        assert_eq!(lhv_max(), 0.5);
        assert_eq!(lhv_min(), -0.5);
        assert_eq!(LhvTable::from_index(0).expectation(), 0.5);
        for t in LhvTable::all() {
            assert_eq!(LhvTable::from_index(t.index()), t);
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!(
            "quantum".parse::<Strategy>().unwrap(),
            Strategy::QuantumIdeal
        );
        assert_eq!(
            "noisy:0.5".parse::<Strategy>().unwrap(),
            Strategy::QuantumNoisy { visibility: 0.5 }
        );
        assert_eq!("lhv:0".parse::<Strategy>().unwrap(), Strategy::best_lhv());
        assert_eq!(
            "lhv:random".parse::<Strategy>().unwrap().tag(),
            "lhv:random"
        );
        assert!("lhv:16".parse::<Strategy>().is_err());
        assert!(matches!(
            "noisy:1.5".parse::<Strategy>(),
            Err(ChshError::InvalidVisibility(_))
        ));
        assert!("classical".parse::<Strategy>().is_err());
        for s in ["quantum", "noisy:0.25", "lhv:7", "lhv:random"] {
            assert_eq!(s.parse::<Strategy>().unwrap().tag(), s);
        }
    }

    #[test]
    fn round_correlation() {
        assert_eq!(ChshRound::new(1, 1, 1, 1).c, -1);
        assert_eq!(ChshRound::new(0, 1, -1, 1).c, -1);
        assert_eq!(ChshRound::new(1, 0, -1, -1).c, 1);
        let mut r = ChshRound::new(1, 1, 1, 1);
        r.c = 1;
        assert!(!r.is_consistent());
    }

    #[test]
    fn single_round_is_vacuous() {
        let mut rng = Seed::from_u64(1).rng();
        let (_, est) = run_game(&Strategy::QuantumIdeal, 1, DEFAULT_EPSILON, &mut rng).unwrap();
        assert!(est.ci_half_width > 1.0);
        assert!(!est.violated);
    }

    #[test]
    fn balanced_mean_is_quarter_s() {
        let mut rng = Seed::from_u64(4).rng();
        let (_, est) =
            run_game(&Strategy::QuantumIdeal, 20_000, DEFAULT_EPSILON, &mut rng).unwrap();
        assert!((est.s_hat - 4.0 * est.e_hat_balanced).abs() < 1e-12);
        assert!((est.s_hat - 4.0 * est.e_hat).abs() < 0.1);
    }

    #[test]
    fn tampered_round_detected() {
        let mut rng = Seed::from_u64(2).rng();
        let (mut t, _) = run_game(&Strategy::QuantumIdeal, 100, DEFAULT_EPSILON, &mut rng).unwrap();
        t.rounds[37].c = -t.rounds[37].c;
        assert_eq!(
            verify_session(&t, DEFAULT_EPSILON),
            Err(ChshError::InconsistentTranscript { round: 37 })
        );
    }

    #[test]
    fn advantage_gap_limits() {
        assert_eq!(quantum_advantage_gap(1, DEFAULT_EPSILON), 0.0);
        let limit = (2.0 * SQRT_2 - 2.0) / 4.0;
        assert!((limit - 0.2071).abs() < 1e-4);
        assert!((quantum_advantage_gap(usize::MAX, DEFAULT_EPSILON) - limit).abs() < 1e-6);
        // sqrt(2·33·ln2 / 1e6) ≈ 0.00676
        let g = quantum_advantage_gap(1_000_000, DEFAULT_EPSILON);
        assert!((g - (limit - 0.006764)).abs() < 1e-5, "{g}");
    }

    #[test]
    fn default_epsilon_is_two_to_minus_32() {
        assert_eq!(DEFAULT_EPSILON, 2f64.powi(-32));
    }
}
