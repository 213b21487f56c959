use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shadow_recovery::experiment::{
    self, ExpectationMode, ExperimentError, Fig2Args, LearnArgs, MitigateArgs, PlanArgs, RecoverArgs,
    RecoverGeneralArgs, ShadowInput,
};
use shadow_recovery::recovery::{RecoveryReport, DEFAULT_CONDITION_LIMIT, DEFAULT_FLOOR};
use shadow_recovery::{Channel, PauliChannel};

#[derive(Parser)]
#[command(name = "shadow-recovery", version, about = "Learn noise with channel shadows and undo it on observables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate Pauli eigenvalues of a channel from sampled shadows.
    Learn(LearnCmd),
    /// Recover tr(O σ) through a Pauli channel.
    Recover(RecoverCmd),
    /// Recover tr(O σ) through a weight-contracting channel.
    RecoverGeneral(RecoverGeneralCmd),
    /// Mitigate gate noise in a Clifford circuit.
    Mitigate(MitigateCmd),
    /// Sample size needed for a target accuracy.
    Plan(PlanCmd),
    /// Error ratio of recovered to raw expectations across a shadow-count sweep.
    Fig2(Fig2Cmd),
}

#[derive(Args)]
struct Common {
    /// Output CSV (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StateOpts {
    /// `heisenberg` or a path to a Pauli term file.
    #[arg(long, default_value = "heisenberg")]
    observable: String,
    /// Apply the heisenberg field to every qubit.
    #[arg(long)]
    field_on_all: bool,
    /// Seed of the Haar-random input state (defaults to --seed).
    #[arg(long)]
    state_seed: Option<u64>,
    /// Estimate the noisy expectations from this many measurement shots instead of exactly.
    #[arg(long)]
    state_shots: Option<u64>,
    /// Write a JSON report alongside the CSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl StateOpts {
    fn mode(&self) -> ExpectationMode {
        match self.state_shots {
            Some(shots) => ExpectationMode::Shadows { shots },
            None => ExpectationMode::Exact,
        }
    }
}

#[derive(Args)]
struct LearnCmd {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    shadows: u64,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Read shadow records from this file instead of sampling.
    #[arg(long, conflicts_with = "save_records")]
    records: Option<PathBuf>,
    /// Save the sampled shadow records.
    #[arg(long)]
    save_records: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RecoverCmd {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    shadows: u64,
    /// Locality of the eigenvalues to learn (defaults to the observable's).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    records: Option<PathBuf>,
    /// Use the channel's exact eigenvalues.
    #[arg(long)]
    exact_eigenvalues: bool,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    floor: f64,
    #[command(flatten)]
    state: StateOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RecoverGeneralCmd {
    #[arg(long)]
    channel: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    shadows: u64,
    #[arg(long)]
    k: Option<usize>,
    /// Use the channel's exact transfer matrix.
    #[arg(long)]
    exact_eigenvalues: bool,
    /// Largest accepted condition number of a diagonal block.
    #[arg(long, default_value_t = DEFAULT_CONDITION_LIMIT)]
    condition_limit: f64,
    #[command(flatten)]
    state: StateOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MitigateCmd {
    #[arg(long)]
    circuit: PathBuf,
    /// Gate shadows per gate kind.
    #[arg(long, default_value_t = 100_000)]
    shadows: u64,
    #[arg(long)]
    exact_eigenvalues: bool,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    floor: f64,
    #[command(flatten)]
    state: StateOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PlanCmd {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Number of Pauli terms in the observable.
    #[arg(long)]
    d: usize,
    #[arg(long)]
    lambda_min: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Fig2Cmd {
    /// Pauli channel (the built-in two-qubit product channel if omitted).
    #[arg(long)]
    channel: Option<PathBuf>,
    #[arg(long, default_value = "heisenberg")]
    observable: String,
    #[arg(long)]
    field_on_all: bool,
    /// Comma-separated shadow counts.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<u64>>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 500)]
    states: usize,
    #[arg(long)]
    exact_eigenvalues: bool,
    #[arg(long)]
    state_shots: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    floor: f64,
    #[command(flatten)]
    common: Common,
}

fn pauli_only(channel: Channel) -> Result<PauliChannel, ExperimentError> {
    match channel {
        Channel::Pauli(p) => Ok(p),
        Channel::Product(_) => Err(ExperimentError::Config("this command needs a Pauli channel".into())),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), ExperimentError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|source| ExperimentError::Io { path: path.display().to_string(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_report(path: &Option<PathBuf>, report: &RecoveryReport) -> Result<(), ExperimentError> {
    let Some(path) = path else { return Ok(()) };
    let json = serde_json::to_string_pretty(report).map_err(|e| ExperimentError::Config(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(|source| ExperimentError::Io { path: path.display().to_string(), source })
}

fn shadow_input(records: &Option<PathBuf>, shadows: u64) -> Result<ShadowInput, ExperimentError> {
    Ok(match records {
        Some(p) => ShadowInput::Records(experiment::load_records(p)?),
        None => ShadowInput::Sample { count: shadows },
    })
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::Learn(c) => {
            let channel = experiment::load_channel(&c.channel)?;
            if let Some(path) = &c.save_records {
                let records = experiment::learn_records(&channel, c.shadows, c.common.seed)?;
                experiment::save_records(path, &records)?;
            }
            let args = LearnArgs { channel, shadows: shadow_input(&c.records, c.shadows)?, k: c.k, seed: c.common.seed };
            emit(&c.common.out, &experiment::cmd_learn(&args)?)
        }
        Command::Recover(c) => {
            let channel = pauli_only(experiment::load_channel(&c.channel)?)?;
            let observable =
                experiment::load_observable(&c.state.observable, channel.num_qubits(), c.state.field_on_all)?;
            let args = RecoverArgs {
                k: c.k.unwrap_or(observable.locality().max(1)),
                channel,
                observable,
                shadows: shadow_input(&c.records, c.shadows)?,
                seed: c.common.seed,
                state_seed: c.state.state_seed.unwrap_or(c.common.seed),
                exact_eigenvalues: c.exact_eigenvalues,
                floor: c.floor,
                expectations: c.state.mode(),
            };
            let (csv, report) = experiment::cmd_recover(&args)?;
            emit_report(&c.state.report, &report)?;
            emit(&c.common.out, &csv)
        }
        Command::RecoverGeneral(c) => {
            let channel = experiment::load_channel(&c.channel)?;
            let observable =
                experiment::load_observable(&c.state.observable, channel.num_qubits(), c.state.field_on_all)?;
            for w in channel.warnings() {
                eprintln!("warning: {w}");
            }
            let args = RecoverGeneralArgs {
                k: c.k.unwrap_or(observable.locality().max(1)),
                channel,
                observable,
                shadows: c.shadows,
                seed: c.common.seed,
                state_seed: c.state.state_seed.unwrap_or(c.common.seed),
                exact_transfer: c.exact_eigenvalues,
                condition_limit: c.condition_limit,
                expectations: c.state.mode(),
            };
            let (csv, report) = experiment::cmd_recover_general(&args)?;
            emit_report(&c.state.report, &report)?;
            emit(&c.common.out, &csv)
        }
        Command::Mitigate(c) => {
            let circuit = experiment::load_circuit(&c.circuit)?;
            let observable =
                experiment::load_observable(&c.state.observable, circuit.num_qubits(), c.state.field_on_all)?;
            let args = MitigateArgs {
                circuit,
                observable,
                shadows: c.shadows,
                seed: c.common.seed,
                state_seed: c.state.state_seed.unwrap_or(c.common.seed),
                exact_eigenvalues: c.exact_eigenvalues,
                floor: c.floor,
                expectations: c.state.mode(),
            };
            let (csv, report) = experiment::cmd_mitigate(&args)?;
            emit_report(&c.state.report, &report)?;
            emit(&c.common.out, &csv)
        }
        Command::Plan(c) => {
            let args =
                PlanArgs { epsilon: c.epsilon, delta: c.delta, n: c.n, k: c.k, d: c.d, lambda_min: c.lambda_min };
            emit(&c.out, &experiment::cmd_plan(&args)?)
        }
        Command::Fig2(c) => {
            let channel = match &c.channel {
                Some(p) => pauli_only(experiment::load_channel(p)?)?,
                None => PauliChannel::reference(),
            };
            let observable = experiment::load_observable(&c.observable, channel.num_qubits(), c.field_on_all)?;
            let mut args = Fig2Args::reference(channel, observable, c.common.seed);
            if let Some(sweep) = c.sweep {
                args.sweep = sweep;
            }
            args.trials = c.trials;
            args.states = c.states;
            args.exact_eigenvalues = c.exact_eigenvalues;
            args.floor = c.floor;
            if let Some(shots) = c.state_shots {
                args.expectations = ExpectationMode::Shadows { shots };
            }
            emit(&c.common.out, &experiment::cmd_fig2(&args)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
