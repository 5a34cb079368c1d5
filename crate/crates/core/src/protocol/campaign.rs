use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::config::{EvolutionConfig, SessionConfig};
use super::session::{initial_state, SessionContext, SessionResult};
use super::ProtocolError;
use crate::evolution::{build_kernel, tau_mix_bound};

/// Warm-up target for the empirical TV comparison.
const WARMUP_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub session_id: u64,
    pub accepted: bool,
    #[serde(rename = "match")]
    pub matched: bool,
    pub e_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub sessions: usize,
    pub accepted: usize,
    pub matched: usize,
    pub key_collisions: usize,
    pub distinct_secret_states: usize,
    /// Every session started from the same secret state.
    pub frozen: bool,
    /// Lag-1 correlation of the first secret coordinate across sessions.
    pub serial_correlation: Option<f64>,
    /// The same statistic under the stationary chain, when the kernel is built.
    pub predicted_serial_correlation: Option<f64>,
    pub warmup: Option<u64>,
    /// TV distance between post-warm-up visited states and the stationary law.
    pub tv_to_stationary: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub rows: Vec<CampaignRow>,
    pub summary: CampaignSummary,
    #[serde(skip)]
    pub results: Vec<SessionResult>,
}

fn lag1_correlation(xs: &[f64]) -> Option<f64> {
    if xs.len() < 3 {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return None;
    }
    let cov = xs
        .windows(2)
        .map(|w| (w[0] - mean) * (w[1] - mean))
        .sum::<f64>()
        / (n - 1.0);
    Some(cov / var)
}

/// Runs `config.sessions` sessions, evolving the secret between them.
pub fn run_campaign(config: &SessionConfig) -> Result<CampaignReport, ProtocolError> {
    if config.sessions < 2 {
        return Err(ProtocolError::Config(
            "a campaign needs at least 2 sessions".into(),
        ));
    }
    let ctx = SessionContext::new(config)?;
    let mut state = initial_state(config)?;
    let mut rows = Vec::with_capacity(config.sessions);
    let mut results = Vec::with_capacity(config.sessions);
    let mut secrets = Vec::with_capacity(config.sessions);
    let mut keys = HashSet::new();
    let mut key_collisions = 0;
    for i in 0..config.sessions as u64 {
        secrets.push(state.secret().clone());
        let out = ctx.run(i, &state)?;
        if let Some(k) = out.result.final_key {
            if !keys.insert(k) {
                key_collisions += 1;
            }
        }
        rows.push(CampaignRow {
            session_id: i,
            accepted: out.result.accepted,
            matched: out.result.shared_secret_match,
            e_hat: out.result.chsh_estimate.e_hat,
        });
        results.push(out.result);
        state = out.next_state;
    }

    let distinct: HashSet<&[u32]> = secrets.iter().map(|s| s.entries()).collect();
    let first: Vec<f64> = secrets.iter().map(|s| s.get(0) as f64).collect();

    let (mut predicted, mut warmup, mut tv) = (None, None, None);
    if let (EvolutionConfig::Markov { chain }, Some(spec)) = (&config.evolution, &ctx.spectral) {
        let pi = &spec.stationary;
        let kernel = build_kernel(chain)?;
        let f: Vec<f64> = (0..pi.len())
            .map(|i| chain.state_from_index(i).get(0) as f64)
            .collect();
        let mean: f64 = pi.iter().zip(&f).map(|(p, x)| p * x).sum();
        let var: f64 = pi.iter().zip(&f).map(|(p, x)| p * (x - mean).powi(2)).sum();
        let cross: f64 = (0..pi.len())
            .map(|i| pi[i] * f[i] * (0..pi.len()).map(|j| kernel.get(i, j) * f[j]).sum::<f64>())
            .sum();
        predicted = (var > 0.0).then(|| (cross - mean * mean) / var);

        warmup = tau_mix_bound(spec.gap, WARMUP_EPSILON);
        if let Some(w) = warmup.filter(|&w| (w as usize) < secrets.len()) {
            let tail = &secrets[w as usize..];
            let mut counts = vec![0usize; pi.len()];
            for s in tail {
                counts[chain.state_index(s)] += 1;
            }
            let n = tail.len() as f64;
            tv = Some(
                0.5 * counts
                    .iter()
                    .zip(pi)
                    .map(|(&c, p)| (c as f64 / n - p).abs())
                    .sum::<f64>(),
            );
        }
    }

    let summary = CampaignSummary {
        sessions: config.sessions,
        accepted: rows.iter().filter(|r| r.accepted).count(),
        matched: rows.iter().filter(|r| r.matched).count(),
        key_collisions,
        distinct_secret_states: distinct.len(),
        frozen: distinct.len() == 1,
        serial_correlation: lag1_correlation(&first),
        predicted_serial_correlation: predicted,
        warmup,
        tv_to_stationary: tv,
    };
    Ok(CampaignReport {
        rows,
        summary,
        results,
    })
}

/// `session_id,accepted,match,e_hat` rows.
pub fn campaign_csv(report: &CampaignReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &report.rows {
        w.serialize(r)?;
    }
    Ok(
        String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)
            .expect("csv output is utf-8"),
    )
}
