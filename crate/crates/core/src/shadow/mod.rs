//! Simulated classical shadows of channels and states, and the estimators built on them.
//!
//! A channel shadow record stores the product eigenstate that was prepared and the per-qubit
//! basis and outcome that were measured after one use of the channel. Everything downstream
//! only needs the single-record kernel [`ShadowRecord::kernel`], whose value is `0` or `±1`;
//! estimators accumulate these as exact integers so that sums do not depend on the order in
//! which records are combined.

mod estimate;
mod gate;
mod histogram;
mod plan;
mod record;
mod source;
mod state;

use thiserror::Error;

use crate::channel::ChannelError;
use crate::pauli::PauliError;

pub use estimate::{
    eigenvalues_from_histogram, estimate_eigenvalues, estimate_transfer_entry, estimate_transfer_matrix, estimate_x,
    learn_eigenvalues,
    learn_transfer_matrix, Accumulator, EigenvalueEstimates, Probe,
};
pub use gate::{
    estimate_gate_eigenvalues, estimate_spam_factor, gate_probes, learn_gate_eigenvalues, sample_gate_shadows,
    GateSource, SpamNoisy,
};
pub use histogram::{exact_record_distribution, sample_histogram, RecordHistogram, HISTOGRAM_QUBIT_CAP};
pub use plan::{plan_sample_size, SamplePlan};
pub use record::{read_records, write_records, Axis, Eigenstate, ShadowRecord};
pub use source::{sample_channel_shadows, sample_record, ShadowSource};
pub use state::{estimate_state_expectations, StateSampler, StateShadowOptions};

#[derive(Debug, Error)]
pub enum ShadowError {
    #[error("input has {input} qubits but measurement has {measured}")]
    LengthMismatch { input: usize, measured: usize },
    #[error("{0} qubits exceeds the supported maximum")]
    TooManyQubits(usize),
    #[error("{0}")]
    Parse(String),
    #[error("no shadow records")]
    NoRecords,
    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}
