//! Batch commands behind the `shadow-recovery` binary.
//!
//! Each command takes already-parsed inputs and returns the CSV text it would write, so the
//! binary is a thin wrapper and the outputs can be compared byte for byte in tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{Channel, ChannelConfig, PauliChannel};
use crate::clifford::{mitigation_coefficients, CliffordCircuit, GateKind};
use crate::observable::{Heisenberg, Observable};
use crate::oracle::{haar_random_state, simulate_ideal_circuit, simulate_noisy_circuit, DenseState};
use crate::pauli::PauliString;
use crate::recovery::{
    backward_observable, backward_observable_general, recover_expectation_with, BackwardObservable, RecoveryError,
    RecoveryReport,
};
use crate::rng::{derive_seed, tags};
use crate::shadow::{
    estimate_eigenvalues, estimate_state_expectations, learn_eigenvalues, learn_gate_eigenvalues,
    learn_transfer_matrix, plan_sample_size, read_records, sample_channel_shadows, write_records,
    EigenvalueEstimates, ShadowRecord, StateShadowOptions,
};

/// Version tag written at the top of every CSV.
pub const CSV_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Recovery(RecoveryError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ExperimentError {
    /// `2` for recovery-floor violations, `1` for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Recovery(e) if e.is_floor_violation() => 2,
            _ => 1,
        }
    }
}

impl From<RecoveryError> for ExperimentError {
    fn from(e: RecoveryError) -> Self {
        ExperimentError::Recovery(e)
    }
}

fn config<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> ExperimentError + '_ {
    move |e| ExperimentError::Config(format!("{context}: {e}"))
}

fn read_file(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })
}

pub fn load_channel(path: &Path) -> Result<Channel, ExperimentError> {
    let ctx = path.display().to_string();
    let cfg = ChannelConfig::from_json(&read_file(path)?).map_err(config(&ctx))?;
    cfg.build().map_err(config(&ctx))
}

pub fn load_circuit(path: &Path) -> Result<CliffordCircuit, ExperimentError> {
    let ctx = path.display().to_string();
    CliffordCircuit::from_json(&read_file(path)?).map_err(config(&ctx))
}

/// `heisenberg` (normalized to spectral norm 1) or a path to a term file.
pub fn load_observable(spec: &str, n: usize, field_on_all: bool) -> Result<Observable, ExperimentError> {
    if spec == "heisenberg" {
        let h = Heisenberg { field_on_all, ..Heisenberg::reference(n) };
        return h.build().and_then(|o| o.normalized()).map_err(config("heisenberg"));
    }
    let o = Observable::parse(&read_file(Path::new(spec))?).map_err(config(spec))?;
    if o.num_qubits() != n {
        return Err(ExperimentError::Config(format!("{spec}: observable has {} qubits, expected {n}", o.num_qubits())));
    }
    Ok(o)
}

pub fn load_records(path: &Path) -> Result<Vec<ShadowRecord>, ExperimentError> {
    read_records(&read_file(path)?).map_err(config(&path.display().to_string()))
}

pub fn save_records(path: &Path, records: &[ShadowRecord]) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io { path: path.display().to_string(), source };
    let file = std::fs::File::create(path).map_err(io)?;
    write_records(std::io::BufWriter::new(file), records).map_err(io)
}

fn header(out: &mut String, command: &str, params: &[(&str, String)]) {
    let _ = write!(out, "# shadow-recovery {command} {CSV_VERSION}");
    for (k, v) in params {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
}

fn shadow_err(e: crate::shadow::ShadowError) -> ExperimentError {
    ExperimentError::Config(e.to_string())
}

/// Where channel shadows come from.
#[derive(Clone, Debug)]
pub enum ShadowInput {
    /// Sample `count` records with the run seed.
    Sample { count: u64 },
    /// Use these records.
    Records(Vec<ShadowRecord>),
}

impl ShadowInput {
    fn count(&self) -> u64 {
        match self {
            ShadowInput::Sample { count } => *count,
            ShadowInput::Records(r) => r.len() as u64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LearnArgs {
    pub channel: Channel,
    pub shadows: ShadowInput,
    pub k: usize,
    pub seed: u64,
}

/// CSV of `λ̂_P` against the exact diagonal entry of the channel's adjoint transfer matrix.
pub fn cmd_learn(args: &LearnArgs) -> Result<String, ExperimentError> {
    let n = args.channel.num_qubits();
    let est = match &args.shadows {
        ShadowInput::Sample { count } => learn_eigenvalues(&args.channel, *count, args.k, args.seed),
        ShadowInput::Records(r) => estimate_eigenvalues(r, n, args.k),
    }
    .map_err(shadow_err)?;
    let mut out = String::new();
    header(
        &mut out,
        "learn",
        &[("seed", args.seed.to_string()), ("shadows", args.shadows.count().to_string()), ("k", args.k.to_string())],
    );
    out.push_str("pauli,lambda_hat,lambda_exact,error\n");
    let _ = writeln!(out, "{},1,1,0", "I".repeat(n));
    for (p, v) in est.iter() {
        let exact = args.channel.adjoint_entry(p, p);
        let _ = writeln!(out, "{},{},{},{}", p.label(), v, exact, v - exact);
    }
    Ok(out)
}

/// Records for `learn --save-records`.
pub fn learn_records(channel: &Channel, count: u64, seed: u64) -> Result<Vec<ShadowRecord>, ExperimentError> {
    sample_channel_shadows(channel, count, seed).map_err(shadow_err)
}

/// Noisy-state expectations: exact from the dense state, or estimated from measurement shots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectationMode {
    Exact,
    Shadows { shots: u64 },
}

fn noisy_expectations(
    state: &DenseState,
    paulis: &[PauliString],
    mode: ExpectationMode,
    seed: u64,
) -> Result<BTreeMap<PauliString, f64>, ExperimentError> {
    match mode {
        ExpectationMode::Exact => Ok(paulis.iter().map(|p| (*p, state.pauli_expectation(p))).collect()),
        ExpectationMode::Shadows { shots } => {
            estimate_state_expectations(state, paulis, StateShadowOptions::new(shots, seed)).map_err(shadow_err)
        }
    }
}

fn non_identity(o: &BackwardObservable) -> Vec<PauliString> {
    o.terms().keys().filter(|p| !p.is_identity()).copied().collect()
}

fn recovery_csv(command: &str, params: &[(&str, String)], report: &RecoveryReport) -> String {
    let mut out = String::new();
    header(&mut out, command, params);
    out.push_str("quantity,value\n");
    let _ = writeln!(out, "recovered,{}", report.recovered);
    if let Some(v) = report.ideal {
        let _ = writeln!(out, "ideal,{v}");
    }
    if let Some(v) = report.unmitigated {
        let _ = writeln!(out, "unmitigated,{v}");
    }
    if let Some(v) = report.abs_error {
        let _ = writeln!(out, "abs_error,{v}");
    }
    if let (Some(u), Some(i)) = (report.unmitigated, report.ideal) {
        let _ = writeln!(out, "abs_error_unmitigated,{}", (u - i).abs());
    }
    if let Some(v) = report.min_eigenvalue {
        let _ = writeln!(out, "min_eigenvalue,{v}");
    }
    if let Some(v) = report.condition {
        let _ = writeln!(out, "condition,{v}");
    }
    for (p, a) in &report.coefficients {
        let _ = writeln!(out, "coefficient_{p},{a}");
    }
    out
}

#[derive(Clone, Debug)]
pub struct RecoverArgs {
    pub channel: PauliChannel,
    pub observable: Observable,
    pub shadows: ShadowInput,
    pub k: usize,
    pub seed: u64,
    pub state_seed: u64,
    pub exact_eigenvalues: bool,
    pub floor: f64,
    pub expectations: ExpectationMode,
}

/// Diagonal recovery on a Haar-random state. Returns the CSV and the JSON report.
pub fn cmd_recover(args: &RecoverArgs) -> Result<(String, RecoveryReport), ExperimentError> {
    let n = args.channel.num_qubits();
    let est = if args.exact_eigenvalues {
        EigenvalueEstimates::exact(&args.channel, args.k)
    } else {
        match &args.shadows {
            ShadowInput::Sample { count } => learn_eigenvalues(&args.channel, *count, args.k, args.seed),
            ShadowInput::Records(r) => estimate_eigenvalues(r, n, args.k),
        }
    }
    .map_err(shadow_err)?;
    let backward = backward_observable(&args.observable, &est, args.floor)?;
    let sigma = haar_random_state(n, args.state_seed).map_err(config("state"))?;
    let noisy = sigma.apply_channel(&args.channel.clone().into()).map_err(config("channel"))?;
    let exps = noisy_expectations(&noisy, &non_identity(&backward), args.expectations, args.seed)?;
    let f = recover_expectation_with(&backward, |p| exps.get(p).copied())?;
    let report = RecoveryReport::new(&backward, f, Some(sigma.expectation(&args.observable)), Some(noisy.expectation(&args.observable)));
    let params = [
        ("seed", args.seed.to_string()),
        ("state_seed", args.state_seed.to_string()),
        ("shadows", if args.exact_eigenvalues { "exact".into() } else { args.shadows.count().to_string() }),
        ("k", args.k.to_string()),
    ];
    Ok((recovery_csv("recover", &params, &report), report))
}

#[derive(Clone, Debug)]
pub struct RecoverGeneralArgs {
    pub channel: Channel,
    pub observable: Observable,
    pub shadows: u64,
    pub k: usize,
    pub seed: u64,
    pub state_seed: u64,
    pub exact_transfer: bool,
    pub condition_limit: f64,
    pub expectations: ExpectationMode,
}

/// Block-triangular recovery on a Haar-random state.
pub fn cmd_recover_general(args: &RecoverGeneralArgs) -> Result<(String, RecoveryReport), ExperimentError> {
    let n = args.channel.num_qubits();
    let matrix = if args.exact_transfer {
        args.channel.exact_transfer_matrix(args.k).map_err(config("channel"))?
    } else {
        learn_transfer_matrix(&args.channel, args.shadows, args.k, args.seed).map_err(shadow_err)?
    };
    let backward = backward_observable_general(&args.observable, &matrix, args.condition_limit)?;
    let sigma = haar_random_state(n, args.state_seed).map_err(config("state"))?;
    let noisy = sigma.apply_channel(&args.channel).map_err(config("channel"))?;
    let exps = noisy_expectations(&noisy, &non_identity(&backward), args.expectations, args.seed)?;
    let f = recover_expectation_with(&backward, |p| exps.get(p).copied())?;
    let mut report =
        RecoveryReport::new(&backward, f, Some(sigma.expectation(&args.observable)), Some(noisy.expectation(&args.observable)));
    report.warnings.extend(args.channel.warnings().iter().cloned());
    let params = [
        ("seed", args.seed.to_string()),
        ("state_seed", args.state_seed.to_string()),
        ("shadows", if args.exact_transfer { "exact".into() } else { args.shadows.to_string() }),
        ("k", args.k.to_string()),
    ];
    Ok((recovery_csv("recover-general", &params, &report), report))
}

#[derive(Clone, Debug)]
pub struct MitigateArgs {
    pub circuit: CliffordCircuit,
    pub observable: Observable,
    /// Gate shadows per gate kind.
    pub shadows: u64,
    pub seed: u64,
    pub state_seed: u64,
    pub exact_eigenvalues: bool,
    pub floor: f64,
    pub expectations: ExpectationMode,
}

/// Learns each gate kind's noise from gate shadows, then mitigates the circuit output.
pub fn learn_circuit_noise(
    circuit: &CliffordCircuit,
    shadows: u64,
    seed: u64,
) -> Result<BTreeMap<GateKind, EigenvalueEstimates>, ExperimentError> {
    let mut out = BTreeMap::new();
    for kind in GateKind::ALL {
        if !circuit.gates().iter().any(|g| g.kind() == kind) {
            continue;
        }
        let noise = match circuit.noise(kind) {
            Some(c) => c.clone(),
            None => PauliChannel::identity(kind.arity()).map_err(config("noise"))?,
        };
        out.insert(kind, learn_gate_eigenvalues(kind, &noise, shadows, seed).map_err(shadow_err)?);
    }
    Ok(out)
}

pub fn cmd_mitigate(args: &MitigateArgs) -> Result<(String, RecoveryReport), ExperimentError> {
    let n = args.circuit.num_qubits();
    let est = if args.exact_eigenvalues {
        args.circuit.exact_gate_estimates().map_err(config("circuit"))?
    } else {
        learn_circuit_noise(&args.circuit, args.shadows, args.seed)?
    };
    let backward = mitigation_coefficients(&args.circuit, &est, &args.observable, args.floor)?;
    let sigma = haar_random_state(n, args.state_seed).map_err(config("state"))?;
    let ideal = simulate_ideal_circuit(&args.circuit, &sigma).map_err(config("circuit"))?;
    let noisy = simulate_noisy_circuit(&args.circuit, &sigma).map_err(config("circuit"))?;
    let exps = noisy_expectations(&noisy, &non_identity(&backward), args.expectations, args.seed)?;
    let f = recover_expectation_with(&backward, |p| exps.get(p).copied())?;
    let report = RecoveryReport::new(&backward, f, Some(ideal.expectation(&args.observable)), Some(noisy.expectation(&args.observable)));
    let params = [
        ("seed", args.seed.to_string()),
        ("state_seed", args.state_seed.to_string()),
        ("gate_shadows", if args.exact_eigenvalues { "exact".into() } else { args.shadows.to_string() }),
    ];
    Ok((recovery_csv("mitigate", &params, &report), report))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanArgs {
    pub epsilon: f64,
    pub delta: f64,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub lambda_min: f64,
}

pub fn cmd_plan(args: &PlanArgs) -> Result<String, ExperimentError> {
    let plan =
        plan_sample_size(args.epsilon, args.delta, args.n, args.k, args.d, args.lambda_min).map_err(shadow_err)?;
    let mut out = String::new();
    header(&mut out, "plan", &[]);
    out.push_str("epsilon,delta,n,k,d,lambda_min,norm_constant,paulis,eps_tilde,eps_tilde_prime,samples\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{}",
        plan.epsilon,
        plan.delta,
        plan.n,
        plan.k,
        plan.d,
        plan.lambda_min,
        plan.norm_constant,
        plan.paulis,
        plan.eps_tilde,
        plan.eps_tilde_prime,
        plan.samples
    );
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Fig2Args {
    pub channel: PauliChannel,
    /// Spectral-norm-normalized observable.
    pub observable: Observable,
    pub sweep: Vec<u64>,
    pub trials: usize,
    pub states: usize,
    pub seed: u64,
    pub exact_eigenvalues: bool,
    pub floor: f64,
    pub expectations: ExpectationMode,
}

impl Fig2Args {
    /// `N ∈ {1, …, 20} × 10^4`, 10 trials, 500 Haar states.
    pub fn reference(channel: PauliChannel, observable: Observable, seed: u64) -> Self {
        Self {
            channel,
            observable,
            sweep: (1..=20).map(|i| i * 10_000).collect(),
            trials: 10,
            states: 500,
            seed,
            exact_eigenvalues: false,
            floor: crate::recovery::DEFAULT_FLOOR,
            expectations: ExpectationMode::Exact,
        }
    }
}

/// One sweep point of [`cmd_fig2`].
#[derive(Clone, Debug, PartialEq)]
pub struct Fig2Point {
    pub shadows: u64,
    pub mae_raw: Vec<f64>,
    pub mae_recovered: Vec<f64>,
    pub ratios: Vec<f64>,
}

impl Fig2Point {
    pub fn mean_ratio(&self) -> f64 {
        self.ratios.iter().sum::<f64>() / self.ratios.len() as f64
    }

    /// Sample standard deviation over trials (0 for a single trial).
    pub fn std_ratio(&self) -> f64 {
        let m = self.mean_ratio();
        let k = self.ratios.len();
        if k < 2 {
            return 0.0;
        }
        (self.ratios.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
    }
}

/// Ratio of recovered to unprocessed mean absolute error over Haar-random states, for each
/// shadow count in the sweep.
pub fn run_fig2(args: &Fig2Args) -> Result<Vec<Fig2Point>, ExperimentError> {
    if args.sweep.is_empty() || args.sweep[0] == 0 || args.sweep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Config("shadow sweep must be positive and strictly increasing".into()));
    }
    if args.trials == 0 || args.states == 0 {
        return Err(ExperimentError::Config("trials and states must be positive".into()));
    }
    let n = args.channel.num_qubits();
    if args.observable.num_qubits() != n {
        return Err(ExperimentError::Config(format!(
            "observable has {} qubits, channel has {n}",
            args.observable.num_qubits()
        )));
    }
    let k = args.observable.locality().max(1);
    let channel: Channel = args.channel.clone().into();
    let paulis: Vec<PauliString> = args.observable.terms().keys().filter(|p| !p.is_identity()).copied().collect();
    let haar_seed = derive_seed(args.seed, tags::HAAR);

    // Per state: ideal value, unprocessed noisy value, noisy Pauli expectations.
    let states: Vec<(f64, f64, BTreeMap<PauliString, f64>)> = (0..args.states)
        .into_par_iter()
        .map(|i| {
            let sigma = haar_random_state(n, derive_seed(haar_seed, i as u64)).map_err(config("state"))?;
            let noisy = sigma.apply_channel(&channel).map_err(config("channel"))?;
            let exps = noisy_expectations(&noisy, &paulis, args.expectations, derive_seed(args.seed, i as u64))?;
            Ok((sigma.expectation(&args.observable), noisy.expectation(&args.observable), exps))
        })
        .collect::<Result<_, ExperimentError>>()?;
    let mae_raw = states.iter().map(|(ideal, noisy, _)| (noisy - ideal).abs()).sum::<f64>() / states.len() as f64;

    let cells: Vec<(usize, usize)> =
        (0..args.sweep.len()).flat_map(|s| (0..args.trials).map(move |t| (s, t))).collect();
    let results: Vec<f64> = cells
        .par_iter()
        .map(|&(s, t)| {
            let shadows = args.sweep[s];
            let est = if args.exact_eigenvalues {
                EigenvalueEstimates::exact(&args.channel, k)
            } else {
                let trial_seed = derive_seed(derive_seed(args.seed, shadows), t as u64);
                learn_eigenvalues(&args.channel, shadows, k, trial_seed)
            }
            .map_err(shadow_err)?;
            let backward = backward_observable(&args.observable, &est, args.floor)?;
            let mut total = 0.0;
            for (ideal, _, exps) in &states {
                let f = recover_expectation_with(&backward, |p| exps.get(p).copied())?;
                total += (f - ideal).abs();
            }
            Ok(total / states.len() as f64)
        })
        .collect::<Result<_, ExperimentError>>()?;

    Ok(args
        .sweep
        .iter()
        .enumerate()
        .map(|(s, &shadows)| {
            let recovered: Vec<f64> = results[s * args.trials..(s + 1) * args.trials].to_vec();
            Fig2Point {
                shadows,
                mae_raw: vec![mae_raw; args.trials],
                ratios: recovered.iter().map(|m| m / mae_raw).collect(),
                mae_recovered: recovered,
            }
        })
        .collect())
}

pub fn fig2_csv(args: &Fig2Args, points: &[Fig2Point]) -> String {
    let mut out = String::new();
    header(
        &mut out,
        "fig2",
        &[
            ("seed", args.seed.to_string()),
            ("states", args.states.to_string()),
            ("trials", args.trials.to_string()),
            ("eigenvalues", if args.exact_eigenvalues { "exact".into() } else { "learned".into() }),
        ],
    );
    out.push_str("record,n_shadows,trial,mae_raw,mae_recovered,r,r_std\n");
    for p in points {
        for t in 0..p.ratios.len() {
            let _ = writeln!(out, "trial,{},{},{},{},{},", p.shadows, t, p.mae_raw[t], p.mae_recovered[t], p.ratios[t]);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let _ = writeln!(
            out,
            "summary,{},,{},{},{},{}",
            p.shadows,
            mean(&p.mae_raw),
            mean(&p.mae_recovered),
            p.mean_ratio(),
            p.std_ratio()
        );
    }
    out
}

pub fn cmd_fig2(args: &Fig2Args) -> Result<String, ExperimentError> {
    Ok(fig2_csv(args, &run_fig2(args)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heisenberg() -> Observable {
        Heisenberg::reference(2).build().unwrap().normalized().unwrap()
    }

    #[test]
    fn learn_is_deterministic() {
        let args = LearnArgs {
            channel: PauliChannel::reference().into(),
            shadows: ShadowInput::Sample { count: 20_000 },
            k: 2,
            seed: 7,
        };
        let a = cmd_learn(&args).unwrap();
        assert_eq!(a, cmd_learn(&args).unwrap());
        assert_eq!(a.lines().count(), 2 + 16);
        assert!(a.starts_with("# shadow-recovery learn v1 seed=7"));
    }

    #[test]
    fn exact_recover_is_exact() {
        let args = RecoverArgs {
            channel: PauliChannel::reference(),
            observable: heisenberg(),
            shadows: ShadowInput::Sample { count: 1 },
            k: 2,
            seed: 1,
            state_seed: 2,
            exact_eigenvalues: true,
            floor: 0.05,
            expectations: ExpectationMode::Exact,
        };
        let (_, report) = cmd_recover(&args).unwrap();
        assert!(report.abs_error.unwrap() < 1e-10);
    }

    #[test]
    fn floor_violation_exit_code() {
        let noisy = PauliChannel::product(vec![
            crate::channel::QubitPauliProbs::new(0.5, 0.5, 0.0, 0.0),
            crate::channel::QubitPauliProbs::IDENTITY,
        ])
        .unwrap();
        let args = RecoverArgs {
            channel: noisy,
            observable: heisenberg(),
            shadows: ShadowInput::Sample { count: 1 },
            k: 2,
            seed: 1,
            state_seed: 2,
            exact_eigenvalues: true,
            floor: 0.05,
            expectations: ExpectationMode::Exact,
        };
        let e = cmd_recover(&args).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{e}");
    }

    #[test]
    fn plan_output() {
        let args = PlanArgs { epsilon: 0.1, delta: 0.1, n: 2, k: 2, d: 4, lambda_min: 0.384 };
        let out = cmd_plan(&args).unwrap();
        assert!(out.lines().nth(1).unwrap().starts_with("epsilon,delta"));
        assert!(cmd_plan(&PlanArgs { lambda_min: 0.0, ..args }).is_err());
    }

    #[test]
    fn fig2_exact_is_zero() {
        let mut args = Fig2Args::reference(PauliChannel::reference(), heisenberg(), 3);
        args.sweep = vec![10_000, 20_000];
        args.trials = 2;
        args.states = 20;
        args.exact_eigenvalues = true;
        for p in run_fig2(&args).unwrap() {
            assert!(p.ratios.iter().all(|r| *r <= 1e-9));
        }
        args.sweep = vec![20_000, 10_000];
        assert!(run_fig2(&args).is_err());
    }
}
