//! Command-line front end. `cli_main` returns the process exit code:
//! 0 on success, 1 when a session fails verification, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chsh::{
    angle_grid, run_game, tsirelson_scan, verify_session, ChshRound, ChshTranscript, Strategy,
};
use crate::evolution::{
    build_kernel, noise_accumulation_check, spectral_report, verify_ergodicity, ChainSpec,
    NoiseLaw, DEFAULT_ACCUMULATION_TRIALS,
};
use crate::hamiltonian::{
    decide_promise, ground_energy_report, instance_from_transcript, PromiseInstance,
};
use crate::hash::Seed;
use crate::mlwe::{keygen, Params};
use crate::protocol::{
    campaign_csv, run_campaign, run_session, verify_replay, Channel, EvolutionConfig,
    SessionConfig, Transcript,
};
use crate::security::{
    cca_bound, delta_blocksize, estimate, resource_csv, resource_report, table_csv, table_report,
    AttackFamily, FamilyTag, ScalingModel, Variant, VariantTag, DEFAULT_BLOCKSIZE_CALIBRATION,
};
use crate::zq::ZqMat;

pub const SEED_ENV: &str = "CHSH_KYBER_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "chsh-kyber",
    version,
    about = "CHSH-gated matrix Module-LWE key agreement simulator"
)]
struct Cli {
    /// Master seed: a decimal integer or 64 hex digits.
    #[arg(long, global = true, env = SEED_ENV)]
    seed: Option<String>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a key pair.
    Keygen(ParamArgs),
    /// Run one session and emit its transcript.
    Session(SessionArgs),
    /// Run several sessions with key evolution and summarize them.
    Campaign(SessionArgs),
    /// Play the CHSH game or scan measurement angles.
    Chsh(ChshArgs),
    /// Spectral and ergodicity analysis of an affine chain.
    Markov(MarkovArgs),
    /// Ground energy and promise decision for a transcript.
    Hamiltonian(HamiltonianArgs),
    /// Bit-security estimate for one parameter set and variant.
    Estimate(EstimateArgs),
    /// Security and resource tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Parameter preset (toy, small).
    #[arg(long)]
    params: Option<String>,
    /// EPR pairs per session.
    #[arg(long)]
    m: Option<usize>,
}

#[derive(Debug, Args)]
struct SessionArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// ideal, noisy:<v>, lhv, lhv:<0..15> or lhv:random.
    #[arg(long)]
    channel: Option<String>,
    /// prf or markov.
    #[arg(long)]
    evolution: Option<String>,
    /// Sessions in a campaign.
    #[arg(long)]
    sessions: Option<usize>,
    /// Verification failure probability.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Replay a transcript file and check it reproduces byte for byte.
    #[arg(long, conflicts_with_all = ["channel", "evolution", "sessions"])]
    replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ChshArgs {
    /// quantum, noisy:<v>, lhv:<0..15> or lhv:random.
    #[arg(long, default_value = "quantum")]
    strategy: String,
    #[arg(long, default_value_t = 4096)]
    m: usize,
    /// Verification failure probability.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Include the raw rounds in the output.
    #[arg(long)]
    rounds: bool,
    /// Scan all angle quadruples on a grid of this many degrees instead.
    #[arg(long)]
    scan_step_deg: Option<f64>,
}

#[derive(Debug, Args)]
struct MarkovArgs {
    #[arg(long)]
    q: Option<u32>,
    /// Expected dimension of the matrix.
    #[arg(long)]
    n: Option<usize>,
    /// Rows separated by ';', entries by ','.
    #[arg(long, alias = "M")]
    matrix: Option<String>,
    /// uniform, cbd:<eta>, support:<v1,v2,...> or table:<file> (q probabilities).
    #[arg(long)]
    noise: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Spectral-gap floor for certification (default 1/(n+1)^2).
    #[arg(long)]
    gap_floor: Option<f64>,
    /// Also run the noise-accumulation check to this horizon.
    #[arg(long)]
    horizon: Option<u64>,
    /// CBD parameter for the accumulation check.
    #[arg(long, default_value_t = 2)]
    eta: u32,
}

#[derive(Debug, Args)]
struct HamiltonianArgs {
    /// Session transcript or CHSH transcript JSON.
    #[arg(long)]
    transcript: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long, default_value = "kyber768")]
    paramset: String,
    #[arg(long, default_value = "chsh")]
    variant: String,
    #[arg(long, default_value = "bkz")]
    family: String,
    #[arg(long, default_value = "multiplicative")]
    model: String,
    /// Override the variant's default noise inflation.
    #[arg(long)]
    beta: Option<f64>,
    /// Random-oracle queries for the CCA bound.
    #[arg(long)]
    q_h: Option<u64>,
    #[arg(long, default_value_t = 0.0)]
    adv_mlwe: f64,
    #[arg(long, default_value_t = 0.0)]
    adv_chsh: f64,
    #[arg(long, default_value_t = 0.0)]
    negl: f64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// EPR pairs for the resource table.
    #[arg(long, default_value_t = 512)]
    m: usize,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Rejected(String),
}

impl<E: std::fmt::Display> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult = Result<Output, CliError>;

struct Output {
    body: String,
    /// Extra files written next to `--out` (suffix, contents).
    extra: Vec<(String, String)>,
    rejected: bool,
}

impl Output {
    fn json<T: Serialize>(v: &T) -> Result<Self, CliError> {
        let mut body = serde_json::to_string_pretty(v)?;
        body.push('\n');
        Ok(Output {
            body,
            extra: Vec::new(),
            rejected: false,
        })
    }

    fn text(body: String) -> Self {
        Output {
            body,
            extra: Vec::new(),
            rejected: false,
        }
    }
}

fn parse_seed(s: &str) -> Result<Seed, CliError> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(Seed::from_u64(v));
    }
    Seed::from_hex(s).map_err(|_| {
        CliError::Usage(format!(
            "seed must be an integer or 64 hex digits, got {s:?}"
        ))
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("cannot parse {}: {e}", path.display())))
}

fn no_csv(format: Format, cmd: &str) -> Result<(), CliError> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(CliError::Usage(format!(
            "--format csv is not supported by {cmd}"
        ))),
    }
}

fn parse_channel(s: &str) -> Result<Channel, CliError> {
    match s {
        "ideal" | "quantum" => Ok(Channel::Ideal),
        "lhv" => Ok(Channel::AdversarialLhv {
            strategy: Strategy::best_lhv(),
        }),
        _ => match s.parse::<Strategy>()? {
            Strategy::QuantumIdeal => Ok(Channel::Ideal),
            Strategy::QuantumNoisy { visibility } => Ok(Channel::NoisyVisibility { visibility }),
            strategy => Ok(Channel::AdversarialLhv { strategy }),
        },
    }
}

fn base_params(
    global: &Cli,
    args: &ParamArgs,
    from_config: Option<Params>,
) -> Result<Params, CliError> {
    let mut p = match (&args.params, from_config) {
        (Some(name), _) => Params::preset(name)
            .ok_or_else(|| CliError::Usage(format!("unknown preset {name:?}")))?,
        (None, Some(p)) => p,
        (None, None) => Params::toy(),
    };
    if let Some(s) = &global.seed {
        p.seed = parse_seed(s)?;
    }
    if let Some(m) = args.m {
        p.m = m;
    }
    p.validate()?;
    Ok(p)
}

fn session_config(global: &Cli, args: &SessionArgs) -> Result<SessionConfig, CliError> {
    let mut config = match &global.config {
        Some(path) => read_json::<SessionConfig>(path)?,
        None => SessionConfig::new(Params::toy()),
    };
    config.params = base_params(global, &args.params, Some(config.params.clone()))?;
    if let Some(c) = &args.channel {
        config.channel = parse_channel(c)?;
    }
    match args.evolution.as_deref() {
        None => {}
        Some("prf") => config.evolution = EvolutionConfig::Prf,
        Some("markov") => {
            if !matches!(config.evolution, EvolutionConfig::Markov { .. }) {
                config.evolution = EvolutionConfig::default();
            }
        }
        Some(other) => return Err(CliError::Usage(format!("unknown evolution mode {other:?}"))),
    }
    if let Some(n) = args.sessions {
        config.sessions = n;
    }
    if let Some(e) = args.epsilon {
        config.epsilon = e;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_keygen(global: &Cli, args: &ParamArgs) -> CliResult {
    no_csv(global.format, "keygen")?;
    let from_config = match &global.config {
        Some(path) => Some(read_json::<SessionConfig>(path)?.params),
        None => None,
    };
    let params = base_params(global, args, from_config)?;
    let kp = keygen(&params, &params.seed)?;
    #[derive(Serialize)]
    struct KeygenOut<'a> {
        params: &'a Params,
        pk_hash_hex: String,
        public_key: &'a crate::mlwe::PublicKey,
        secret_key: &'a crate::mlwe::SecretKey,
    }
    Output::json(&KeygenOut {
        params: &params,
        pk_hash_hex: hex::encode(kp.public.hash()),
        public_key: &kp.public,
        secret_key: &kp.secret,
    })
}

fn cmd_session(global: &Cli, args: &SessionArgs) -> CliResult {
    no_csv(global.format, "session")?;
    if let Some(path) = &args.replay {
        let t: Transcript = read_json(path)?;
        verify_replay(&t).map_err(|e| CliError::Rejected(e.to_string()))?;
        return Output::json(&serde_json::json!({
            "session_id": t.session_id,
            "replay": "identical",
        }));
    }
    let config = session_config(global, args)?;
    let outcome = run_session(&config)?;
    let mut out = Output::json(&outcome.transcript)?;
    out.rejected = !(outcome.result.accepted && outcome.result.shared_secret_match);
    Ok(out)
}

fn cmd_campaign(global: &Cli, args: &SessionArgs) -> CliResult {
    if args.replay.is_some() {
        return Err(CliError::Usage("--replay is only valid for session".into()));
    }
    let mut config = session_config(global, args)?;
    if args.sessions.is_none() && config.sessions < 2 {
        config.sessions = 100;
    }
    let report = run_campaign(&config)?;
    match global.format {
        Format::Json => Output::json(&report),
        Format::Csv => Ok(Output::text(campaign_csv(&report)?)),
    }
}

fn cmd_chsh(global: &Cli, args: &ChshArgs) -> CliResult {
    no_csv(global.format, "chsh")?;
    if let Some(step) = args.scan_step_deg {
        if !(step > 0.0 && step <= 90.0) {
            return Err(CliError::Usage("scan-step-deg must lie in (0, 90]".into()));
        }
        let steps = (360.0 / step).round() as usize;
        let grid = angle_grid(0.0, std::f64::consts::TAU, steps);
        let scan = tsirelson_scan(&grid, &grid);
        return Output::json(&serde_json::json!({
            "grid_points": grid.len(),
            "max_abs_s": scan.max_abs_s,
            "argmax_rad": scan.argmax,
            "tsirelson": 2.0 * std::f64::consts::SQRT_2,
        }));
    }
    let seed = match &global.seed {
        Some(s) => parse_seed(s)?,
        None => Seed::default(),
    };
    let strategy: Strategy = args.strategy.parse()?;
    let eps = args.epsilon.unwrap_or(crate::chsh::DEFAULT_EPSILON);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CliError::Usage("epsilon must lie in (0, 1)".into()));
    }
    let (transcript, est) = run_game(&strategy, args.m, eps, &mut seed.derive("chsh").rng())?;
    let verification = verify_session(&transcript, eps)?;
    let mut v = serde_json::json!({
        "strategy": strategy.tag(),
        "estimate": est,
        "verification": verification,
    });
    if args.rounds {
        v["transcript"] = serde_json::to_value(&transcript)?;
    }
    Output::json(&v)
}

fn parse_matrix(s: &str, q: u32) -> Result<ZqMat, CliError> {
    let rows: Vec<Vec<i64>> = s
        .split(';')
        .map(|r| {
            r.split(',')
                .map(|x| x.trim().parse::<i64>())
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad matrix {s:?}: {e}")))?;
    Ok(ZqMat::from_rows(&rows, q)?)
}

fn parse_noise(s: &str) -> Result<NoiseLaw, CliError> {
    match s.split_once(':') {
        None if s == "uniform" => Ok(NoiseLaw::Uniform),
        Some(("cbd", eta)) => Ok(NoiseLaw::Cbd {
            eta: eta
                .parse()
                .map_err(|_| CliError::Usage(format!("bad eta {eta:?}")))?,
        }),
        Some(("support", vals)) => Ok(NoiseLaw::Support {
            values: vals
                .split(',')
                .map(|v| v.trim().parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Usage(format!("bad support {vals:?}: {e}")))?,
        }),
        Some(("table", path)) => {
            let text = std::fs::read_to_string(path)?;
            let probs = if text.trim_start().starts_with('[') {
                serde_json::from_str(&text)?
            } else {
                text.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(str::parse::<f64>)
                    .collect::<Result<_, _>>()?
            };
            Ok(NoiseLaw::Table { probs })
        }
        _ => Err(CliError::Usage(format!("unknown noise law {s:?}"))),
    }
}

fn cmd_markov(global: &Cli, args: &MarkovArgs) -> CliResult {
    let chain = match (&global.config, &args.matrix) {
        (_, Some(m)) => {
            let q = args.q.unwrap_or(5);
            let noise = parse_noise(args.noise.as_deref().unwrap_or("uniform"))?;
            ChainSpec::new(parse_matrix(m, q)?, noise)?
        }
        (Some(path), None) => {
            let v: Value = read_json(path)?;
            let chain = v.get("chain").cloned().unwrap_or(v);
            serde_json::from_value(chain)?
        }
        (None, None) => crate::protocol::default_chain(),
    };
    if let Some(n) = args.n {
        if n != chain.n() {
            return Err(CliError::Usage(format!(
                "--n {n} does not match the {}-dimensional matrix",
                chain.n()
            )));
        }
    }
    let kernel = build_kernel(&chain)?;
    if global.format == Format::Csv {
        return Ok(Output::text(kernel.to_csv()));
    }
    let floor = args
        .gap_floor
        .unwrap_or(1.0 / ((chain.n() + 1) as f64).powi(2));
    let report = spectral_report(&kernel, args.epsilon)?;
    let ergodicity = verify_ergodicity(&chain, floor)?;
    let det = chain.matrix().det_mod()?;
    let accumulation = match args.horizon {
        Some(h) => {
            let mut params = Params::toy();
            params.q = chain.q();
            params.eta = args.eta;
            if let Some(s) = &global.seed {
                params.seed = parse_seed(s)?;
            }
            Some(noise_accumulation_check(
                chain.matrix(),
                &params,
                h,
                DEFAULT_ACCUMULATION_TRIALS,
            )?)
        }
        None => None,
    };
    Output::json(&serde_json::json!({
        "chain": chain,
        "det_mod_q": det,
        "spectral": report,
        "ergodicity": ergodicity,
        "accumulation": accumulation,
    }))
}

fn load_rounds(path: &Path) -> Result<ChshTranscript, CliError> {
    let v: Value = read_json(path)?;
    let pick = |key: &str| {
        v.get(key)
            .or_else(|| v.get("transcript").and_then(|t| t.get(key)))
    };
    let rounds: Vec<ChshRound> = match (pick("chsh"), pick("rounds")) {
        (Some(r), _) | (None, Some(r)) => serde_json::from_value(r.clone())?,
        (None, None) => {
            return Err(CliError::Usage(format!(
                "{} has neither \"chsh\" nor \"rounds\"",
                path.display()
            )))
        }
    };
    if let Some(i) = rounds.iter().position(|r| !r.is_consistent()) {
        return Err(CliError::Usage(format!("round {i} is inconsistent")));
    }
    Ok(ChshTranscript {
        rounds,
        strategy_tag: "file".into(),
    })
}

fn cmd_hamiltonian(global: &Cli, args: &HamiltonianArgs) -> CliResult {
    no_csv(global.format, "hamiltonian")?;
    let transcript = load_rounds(&args.transcript)?;
    let instance = instance_from_transcript(&transcript)?;
    let report = ground_energy_report(&instance);
    let decision = match (args.alpha, args.beta) {
        (Some(alpha), Some(beta)) => Some(decide_promise(&PromiseInstance::new(
            instance.clone(),
            alpha,
            beta,
        )?)?),
        (None, None) => None,
        _ => {
            return Err(CliError::Usage(
                "--alpha and --beta must be given together".into(),
            ))
        }
    };
    Output::json(&serde_json::json!({
        "ground_energy": report.ground_energy,
        "decision": decision,
        "per_pair_energies": report.per_pair_energies.iter().map(|(_, e)| e).collect::<Vec<_>>(),
        "pair_count": instance.pair_count(),
        "norm_check": instance.norm_check(),
        "max_residual": report.max_residual,
    }))
}

fn cmd_estimate(global: &Cli, args: &EstimateArgs) -> CliResult {
    no_csv(global.format, "estimate")?;
    let tag: VariantTag = args.variant.parse()?;
    let family = AttackFamily::with_default_baselines(args.family.parse::<FamilyTag>()?);
    let model: ScalingModel = args.model.parse()?;
    let mut variant = Variant::from_tag(tag);
    if let Some(b) = args.beta {
        variant = variant.with_beta(b);
    }
    let est = estimate(&args.paramset, variant, &family, model)?;
    let cca = match args.q_h {
        Some(q_h) => Some(cca_bound(q_h, args.adv_mlwe, args.adv_chsh, args.negl)?),
        None => None,
    };
    Output::json(&serde_json::json!({
        "estimate": est,
        "blocksize_calibration": DEFAULT_BLOCKSIZE_CALIBRATION,
        "delta_blocksize": delta_blocksize(variant.beta_tilde, DEFAULT_BLOCKSIZE_CALIBRATION),
        "cca_bound": cca,
    }))
}

fn cmd_report(global: &Cli, args: &ReportArgs) -> CliResult {
    let rows = table_report();
    let resources = resource_report(&Params::toy().with_m(args.m));
    match global.format {
        Format::Json => Output::json(&serde_json::json!({
            "security_table": rows,
            "resources": resources,
        })),
        Format::Csv => {
            let table = table_csv(&rows)?;
            let res = resource_csv(&resources)?;
            if global.out.is_some() {
                let mut out = Output::text(table);
                out.extra.push(("resources".into(), res));
                Ok(out)
            } else {
                Ok(Output::text(format!("{table}\n{res}")))
            }
        }
    }
}

/// `report.csv` → `report_resources.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_{suffix}.{ext}"),
        None => format!("{stem}_{suffix}"),
    };
    path.with_file_name(name)
}

fn dispatch(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Keygen(a) => cmd_keygen(cli, a),
        Command::Session(a) => cmd_session(cli, a),
        Command::Campaign(a) => cmd_campaign(cli, a),
        Command::Chsh(a) => cmd_chsh(cli, a),
        Command::Markov(a) => cmd_markov(cli, a),
        Command::Hamiltonian(a) => cmd_hamiltonian(cli, a),
        Command::Estimate(a) => cmd_estimate(cli, a),
        Command::Report(a) => cmd_report(cli, a),
    }
}

/// Runs the CLI against explicit output streams.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let output = match dispatch(&cli) {
        Ok(o) => o,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return 2;
        }
        Err(CliError::Rejected(msg)) => {
            let _ = writeln!(stderr, "rejected: {msg}");
            return 1;
        }
    };
    let written = match &cli.out {
        Some(path) => fs::write(path, &output.body).and_then(|_| {
            output
                .extra
                .iter()
                .try_for_each(|(suffix, body)| fs::write(sibling(path, suffix), body))
        }),
        None => stdout.write_all(output.body.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: cannot write output: {e}");
        return 2;
    }
    if output.rejected {
        let _ = writeln!(stderr, "rejected: session did not pass verification");
        return 1;
    }
    0
}

pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli(
        args,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}
