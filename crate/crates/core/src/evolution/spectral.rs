//! Spectral analysis of explicit transition kernels.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, Schur};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::markov::{
    build_kernel, check_primitive, default_k_max, ChainSpec, KernelMatrix, Primitivity,
};
use super::EvolutionError;
use crate::hash::Seed;

/// Row-sum tolerance accepted by [`spectral_report`].
pub const STOCHASTIC_TOL: f64 = 1e-8;

/// Largest kernel for which the empirical TV mixing time is computed
/// (each step is a dense matrix product).
pub const EMPIRICAL_MIXING_MAX_STATES: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub states: usize,
    /// Eigenvalue magnitudes, sorted descending.
    pub eigenvalue_magnitudes: Vec<f64>,
    /// `1 − max{|λ_2|, |λ_n|}`, clamped to `[0, 1]`.
    pub gap: f64,
    pub epsilon: f64,
    /// `ceil(ln(1/ε) / gap)`; `None` when the gap is zero.
    pub tau_mix_bound: Option<u64>,
    /// Smallest `t` with `max_x TV(P^t(x,·), π) ≤ ε`, when computed and reached.
    pub tau_mix_empirical: Option<u64>,
    pub irreducible: bool,
    pub aperiodic: bool,
    /// Period of the communicating class of state 0.
    pub period: u64,
    pub stationary: Vec<f64>,
}

impl SpectralReport {
    /// Nominal mixing-time bound for another ε.
    pub fn tau_mix(&self, epsilon: f64) -> Option<u64> {
        tau_mix_bound(self.gap, epsilon)
    }
}

pub fn tau_mix_bound(gap: f64, epsilon: f64) -> Option<u64> {
    (gap > 0.0).then(|| ((1.0 / epsilon).ln() / gap).ceil() as u64)
}

fn check_stochastic(p: &DMatrix<f64>) -> Result<(), EvolutionError> {
    for (i, row) in p.row_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(EvolutionError::NotStochastic { row: i, sum });
        }
    }
    Ok(())
}

/// Eigenvalue magnitudes of a dense real matrix, sorted descending.
pub fn eigenvalue_magnitudes(p: &DMatrix<f64>) -> Result<Vec<f64>, EvolutionError> {
    let schur = schur_with_fallback(p).ok_or(EvolutionError::EigenFailed)?;
    let mut mags: Vec<f64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    Ok(mags)
}

/// Francis QR can stall on kernels whose spectrum sits on roots of unity
/// (permutation-like chains). Retry after a fixed orthogonal similarity,
/// which preserves eigenvalues but changes the Hessenberg form.
fn schur_with_fallback(p: &DMatrix<f64>) -> Option<Schur<f64, nalgebra::Dyn>> {
    let n = p.nrows();
    let iters = 1000 * n.max(10);
    if let Some(s) = Schur::try_new(p.clone(), f64::EPSILON, iters) {
        return Some(s);
    }
    let mut rng = Seed::from_u64(n as u64).rng();
    (0..4).find_map(|_| {
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = g.qr().q();
        Schur::try_new(q.transpose() * p * &q, 1e-14, iters)
    })
}

fn spectral_gap(mags: &[f64]) -> f64 {
    match mags.get(1) {
        Some(second) => (1.0 - second).clamp(0.0, 1.0),
        None => 1.0,
    }
}

fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Irreducibility and period from the positive-entry digraph.
///
/// The period of state 0's class is the gcd of `level(u) + 1 − level(v)` over
/// all edges `u → v` inside the class, with levels from a BFS rooted at 0.
fn graph_structure(p: &DMatrix<f64>) -> (bool, u64) {
    let n = p.nrows();
    let mut fwd = vec![Vec::new(); n];
    let mut rev = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if p[(i, j)] > 0.0 {
                fwd[i].push(j);
                rev[j].push(i);
            }
        }
    }
    let out = reachable(&fwd, 0);
    let back = reachable(&rev, 0);
    let class: Vec<bool> = out.iter().zip(&back).map(|(a, b)| *a && *b).collect();
    let irreducible = class.iter().all(|&c| c);

    let mut level = vec![u64::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &v in &fwd[u] {
            if class[v] && level[v] == u64::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut period = 0u64;
    for u in (0..n).filter(|&u| class[u]) {
        for &v in fwd[u].iter().filter(|&&v| class[v]) {
            let diff = (level[u] + 1) as i64 - level[v] as i64;
            period = gcd(period, diff.unsigned_abs());
        }
    }
    (irreducible, period)
}

/// Solves `π P = π`, `Σ π = 1`. Falls back to a Cesàro average of `P^t`
/// from the uniform start when the linear system is singular.
fn stationary_distribution(p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let solved = a.lu().solve(&b).filter(|x| {
        x.iter().all(|v| v.is_finite() && *v > -1e-9)
            && (x.transpose() * p - x.transpose()).amax() < 1e-9
    });
    let pi: Vec<f64> = match solved {
        Some(x) => x.iter().map(|v| v.max(0.0)).collect(),
        None => {
            let mut dist = DVector::<f64>::from_element(n, 1.0 / n as f64);
            let mut avg = DVector::<f64>::zeros(n);
            let steps = 20_000;
            for _ in 0..steps {
                avg += &dist;
                dist = (dist.transpose() * p).transpose();
            }
            (avg / steps as f64).iter().copied().collect()
        }
    };
    let total: f64 = pi.iter().sum();
    pi.into_iter().map(|v| v / total).collect()
}

fn max_tv(pt: &DMatrix<f64>, pi: &[f64]) -> f64 {
    pt.row_iter()
        .map(|row| 0.5 * row.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest `t ≤ t_max` at which every start state is within TV `ε` of `π`.
pub fn empirical_mixing_time(
    p: &DMatrix<f64>,
    pi: &[f64],
    epsilon: f64,
    t_max: u64,
) -> Option<u64> {
    let mut pt = p.clone();
    for t in 1..=t_max {
        if max_tv(&pt, pi) <= epsilon {
            return Some(t);
        }
        pt = &pt * p;
    }
    None
}

pub fn spectral_report(
    kernel: &KernelMatrix,
    epsilon: f64,
) -> Result<SpectralReport, EvolutionError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(EvolutionError::InvalidEpsilon(epsilon));
    }
    let p = kernel.matrix();
    check_stochastic(p)?;
    let mags = eigenvalue_magnitudes(p)?;
    let gap = spectral_gap(&mags);
    let (irreducible, period) = graph_structure(p);
    let stationary = stationary_distribution(p);
    let bound = tau_mix_bound(gap, epsilon);
    let tau_mix_empirical = match bound {
        Some(b) if p.nrows() <= EMPIRICAL_MIXING_MAX_STATES => {
            empirical_mixing_time(p, &stationary, epsilon, 10 * b + 100)
        }
        _ => None,
    };
    Ok(SpectralReport {
        states: p.nrows(),
        eigenvalue_magnitudes: mags,
        gap,
        epsilon,
        tau_mix_bound: bound,
        tau_mix_empirical,
        irreducible,
        aperiodic: period == 1,
        period,
        stationary,
    })
}

/// The three ergodicity premises: primitive `M`, full-support noise, and a
/// spectral gap above a polynomial floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicityReport {
    pub primitivity: Primitivity,
    pub primitive: bool,
    pub full_support: bool,
    pub gap: f64,
    pub gap_threshold: f64,
    pub gap_ok: bool,
    pub irreducible: bool,
    pub aperiodic: bool,
    pub certified: bool,
}

pub fn verify_ergodicity(
    spec: &ChainSpec,
    gap_threshold: f64,
) -> Result<ErgodicityReport, EvolutionError> {
    let kernel = build_kernel(spec)?;
    let p = kernel.matrix();
    let primitivity = check_primitive(spec.matrix(), default_k_max(spec.matrix()))?;
    let full_support = spec.noise().has_full_support(spec.q());
    let gap = spectral_gap(&eigenvalue_magnitudes(p)?);
    let (irreducible, period) = graph_structure(p);
    let primitive = primitivity.is_primitive();
    let gap_ok = gap >= gap_threshold;
    Ok(ErgodicityReport {
        primitivity,
        primitive,
        full_support,
        gap,
        gap_threshold,
        gap_ok,
        irreducible,
        aperiodic: period == 1,
        certified: primitive && full_support && gap_ok,
    })
}
