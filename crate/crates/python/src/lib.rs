//! Python bindings. Structured results cross the boundary as plain
//! dicts and lists decoded from the library's JSON serialization.

use chsh_kyber::chsh::{run_game, Strategy, DEFAULT_EPSILON};
use chsh_kyber::evolution::{
    build_kernel, spectral_report, verify_ergodicity, ChainSpec, NoiseLaw,
};
use chsh_kyber::hamiltonian::{ground_energy_report, instance_from_transcript};
use chsh_kyber::hash::Seed;
use chsh_kyber::mlwe::{self, Params as CoreParams};
use chsh_kyber::protocol::{
    fo_decaps_pair, fo_encaps, fo_keygen, run_campaign, run_session, verify_replay as core_replay,
    Channel, FoKeyPair, SessionConfig, Transcript,
};
use chsh_kyber::security::{self, AttackFamily, FamilyTag, ScalingModel, Variant, VariantTag};
use chsh_kyber::zq::ZqMat;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use serde::Serialize;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts an int or a 64-digit hex string.
fn seed_of(seed: &Bound<'_, PyAny>) -> PyResult<Seed> {
    if let Ok(v) = seed.extract::<u64>() {
        return Ok(Seed::from_u64(v));
    }
    let s: String = seed.extract()?;
    Seed::from_hex(&s).map_err(err)
}

fn channel_of(s: &str) -> PyResult<Channel> {
    match s {
        "ideal" | "quantum" => Ok(Channel::Ideal),
        "lhv" => Ok(Channel::AdversarialLhv {
            strategy: Strategy::best_lhv(),
        }),
        _ => match s.parse::<Strategy>().map_err(err)? {
            Strategy::QuantumIdeal => Ok(Channel::Ideal),
            Strategy::QuantumNoisy { visibility } => Ok(Channel::NoisyVisibility { visibility }),
            strategy => Ok(Channel::AdversarialLhv { strategy }),
        },
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Params {
    inner: CoreParams,
}

#[pymethods]
impl Params {
    /// Preset by name (toy, small), optionally overriding m.
    #[new]
    #[pyo3(signature = (name = "toy", m = None))]
    fn new(name: &str, m: Option<usize>) -> PyResult<Self> {
        let mut inner =
            CoreParams::preset(name).ok_or_else(|| err(format!("unknown preset {name:?}")))?;
        if let Some(m) = m {
            inner.m = m;
        }
        inner.validate().map_err(err)?;
        Ok(Params { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    #[getter]
    fn q(&self) -> u32 {
        self.inner.q
    }

    #[getter]
    fn eta(&self) -> u32 {
        self.inner.eta
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "Params(n={}, k={}, q={}, eta={}, m={})",
            p.n, p.k, p.q, p.eta, p.m
        )
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Ciphertext {
    inner: mlwe::Ciphertext,
}

#[pymethods]
impl Ciphertext {
    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.to_bytes())
    }

    fn __len__(&self) -> usize {
        self.inner.coefficient_count()
    }

    /// Copy with coefficient `index` (u first, then v) incremented mod q.
    fn tampered(&self, index: usize) -> PyResult<Ciphertext> {
        let mut ct = self.inner.clone();
        let k = ct.u.len();
        let q = ct.u.modulus();
        if index < k {
            let x = ct.u.get(index) as i64 + 1;
            ct.u.set(index, x);
        } else if let Some(v) = ct.v.get_mut(index - k) {
            *v = (*v + 1) % q;
        } else {
            return Err(err(format!("coefficient {index} out of range")));
        }
        Ok(Ciphertext { inner: ct })
    }

    fn __eq__(&self, other: &Ciphertext) -> bool {
        self.inner == other.inner
    }
}

/// FO-wrapped key pair with its implicit-rejection secret.
#[pyclass(frozen)]
struct KeyPair {
    inner: FoKeyPair,
    params: CoreParams,
}

#[pymethods]
impl KeyPair {
    #[new]
    fn new(params: &Params, seed: &Bound<'_, PyAny>) -> PyResult<Self> {
        let inner = fo_keygen(&params.inner, &seed_of(seed)?).map_err(err)?;
        Ok(KeyPair {
            inner,
            params: params.inner.clone(),
        })
    }

    #[getter]
    fn public_key_hash(&self) -> String {
        hex::encode(self.inner.keypair.public.hash())
    }

    /// Returns `(ciphertext, shared_secret)`.
    fn encaps<'py>(
        &self,
        py: Python<'py>,
        seed: &Bound<'_, PyAny>,
    ) -> PyResult<(Ciphertext, Bound<'py, PyBytes>)> {
        let (ct, ss) =
            fo_encaps(&self.inner.keypair.public, &self.params, &seed_of(seed)?).map_err(err)?;
        Ok((Ciphertext { inner: ct }, PyBytes::new(py, &ss)))
    }

    /// Returns `(shared_secret, reencryption_ok)`; never raises on a bad ciphertext.
    fn decaps<'py>(&self, py: Python<'py>, ct: &Ciphertext) -> (Bound<'py, PyBytes>, bool) {
        let d = fo_decaps_pair(&self.inner, &ct.inner, &self.params);
        (PyBytes::new(py, &d.shared_secret), d.reencryption_ok)
    }
}

fn session_config(
    seed: &Bound<'_, PyAny>,
    params: Option<&Params>,
    channel: &str,
) -> PyResult<SessionConfig> {
    let base = params.map_or_else(CoreParams::toy, |p| p.inner.clone());
    let config =
        SessionConfig::new(base.with_seed(seed_of(seed)?)).with_channel(channel_of(channel)?);
    config.validate().map_err(err)?;
    Ok(config)
}

/// Runs one session and returns its transcript as a dict.
#[pyfunction]
#[pyo3(signature = (seed, params = None, channel = "ideal"))]
fn session<'py>(
    py: Python<'py>,
    seed: &Bound<'_, PyAny>,
    params: Option<&Params>,
    channel: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let config = session_config(seed, params, channel)?;
    let out = run_session(&config).map_err(err)?;
    to_py(py, &out.transcript)
}

/// Re-executes a transcript (dict or JSON string); true when it reproduces exactly.
#[pyfunction]
fn verify_replay(py: Python<'_>, transcript: &Bound<'_, PyAny>) -> PyResult<bool> {
    let text: String = match transcript.extract::<String>() {
        Ok(s) => s,
        Err(_) => py
            .import("json")?
            .call_method1("dumps", (transcript,))?
            .extract()?,
    };
    let t: Transcript = serde_json::from_str(&text).map_err(err)?;
    Ok(core_replay(&t).is_ok())
}

#[pyfunction]
#[pyo3(signature = (seed, sessions, params = None, channel = "ideal"))]
fn campaign<'py>(
    py: Python<'py>,
    seed: &Bound<'_, PyAny>,
    sessions: usize,
    params: Option<&Params>,
    channel: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let config = session_config(seed, params, channel)?.with_sessions(sessions);
    let report = run_campaign(&config).map_err(err)?;
    to_py(py, &report.summary)
}

/// Plays `m` CHSH rounds; strategy is quantum, noisy:<v>, lhv:<0..15> or lhv:random.
#[pyfunction]
#[pyo3(signature = (strategy = "quantum", m = 4096, seed = None, epsilon = DEFAULT_EPSILON))]
fn chsh<'py>(
    py: Python<'py>,
    strategy: &str,
    m: usize,
    seed: Option<&Bound<'_, PyAny>>,
    epsilon: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let s: Strategy = strategy.parse().map_err(err)?;
    let seed = seed.map(seed_of).transpose()?.unwrap_or_default();
    let (_, est) = run_game(&s, m, epsilon, &mut seed.rng()).map_err(err)?;
    to_py(py, &est)
}

/// Spectral and ergodicity report for `s' = M s + e mod q` with uniform,
/// `cbd:<eta>` or `support:<v,...>` noise.
#[pyfunction]
#[pyo3(signature = (matrix, q, noise = "uniform", epsilon = 0.01, gap_floor = None))]
fn markov<'py>(
    py: Python<'py>,
    matrix: Vec<Vec<i64>>,
    q: u32,
    noise: &str,
    epsilon: f64,
    gap_floor: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let law = match noise.split_once(':') {
        None if noise == "uniform" => NoiseLaw::Uniform,
        Some(("cbd", eta)) => NoiseLaw::Cbd {
            eta: eta.parse().map_err(err)?,
        },
        Some(("support", vals)) => NoiseLaw::Support {
            values: vals
                .split(',')
                .map(|v| v.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(err)?,
        },
        _ => return Err(err(format!("unknown noise law {noise:?}"))),
    };
    let chain = ChainSpec::new(ZqMat::from_rows(&matrix, q).map_err(err)?, law).map_err(err)?;
    let floor = gap_floor.unwrap_or(1.0 / ((chain.n() + 1) as f64).powi(2));
    let spectral = spectral_report(&build_kernel(&chain).map_err(err)?, epsilon).map_err(err)?;
    let ergodicity = verify_ergodicity(&chain, floor).map_err(err)?;
    to_py(
        py,
        &serde_json::json!({ "spectral": spectral, "ergodicity": ergodicity }),
    )
}

/// Ground energy of the 2-local Hamiltonian built from a session transcript.
#[pyfunction]
fn ground_energy<'py>(
    py: Python<'py>,
    transcript: &Bound<'_, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let text: String = py
        .import("json")?
        .call_method1("dumps", (transcript,))?
        .extract()?;
    let t: Transcript = serde_json::from_str(&text).map_err(err)?;
    let h = instance_from_transcript(&t.chsh_transcript()).map_err(err)?;
    let r = ground_energy_report(&h);
    to_py(
        py,
        &serde_json::json!({
            "ground_energy": r.ground_energy,
            "pair_count": h.pair_count(),
            "max_residual": r.max_residual,
        }),
    )
}

#[pyfunction]
#[pyo3(signature = (paramset = "kyber768", variant = "chsh", family = "bkz", model = "multiplicative", beta = None))]
fn estimate<'py>(
    py: Python<'py>,
    paramset: &str,
    variant: &str,
    family: &str,
    model: &str,
    beta: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut v = Variant::from_tag(variant.parse::<VariantTag>().map_err(err)?);
    if let Some(b) = beta {
        v = v.with_beta(b);
    }
    let fam = AttackFamily::with_default_baselines(family.parse::<FamilyTag>().map_err(err)?);
    let model: ScalingModel = model.parse().map_err(err)?;
    let e = security::estimate(paramset, v, &fam, model).map_err(err)?;
    to_py(py, &e)
}

/// Rows of the bit-security comparison table.
#[pyfunction]
fn security_table(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &security::table_report())
}

/// Runs the command-line interface in-process; returns `(exit_code, stdout, stderr)`.
#[pyfunction]
fn cli(args: Vec<String>) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut errs = Vec::new();
    let argv = std::iter::once("chsh-kyber".to_string()).chain(args);
    let code = chsh_kyber::cli::run_cli(argv, &mut out, &mut errs);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&errs).into_owned(),
    )
}

#[pymodule]
fn chsh_kyber_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Params>()?;
    m.add_class::<KeyPair>()?;
    m.add_class::<Ciphertext>()?;
    m.add_function(wrap_pyfunction!(session, m)?)?;
    m.add_function(wrap_pyfunction!(verify_replay, m)?)?;
    m.add_function(wrap_pyfunction!(campaign, m)?)?;
    m.add_function(wrap_pyfunction!(chsh, m)?)?;
    m.add_function(wrap_pyfunction!(markov, m)?)?;
    m.add_function(wrap_pyfunction!(ground_energy, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(security_table, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    m.add("DEFAULT_EPSILON", DEFAULT_EPSILON)?;
    Ok(())
}
