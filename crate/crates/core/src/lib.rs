//! Classical-shadow information recovery from Pauli and weight-contracting noise.
//!
//! The crate learns the part of an unknown noise channel that a local observable actually
//! depends on, then rescales the observable so that measuring it on the noisy state reproduces
//! the ideal expectation value:
//!
//! - [`pauli`] and [`observable`]: bit-packed Pauli strings and sparse Pauli-decomposed
//!   observables.
//! - [`channel`]: Pauli channels, product channels given by per-qubit transfer matrices, and
//!   their exact eigenvalues / adjoint transfer matrices.
//! - [`shadow`]: simulated channel shadows and the estimators built on them.
//! - [`recovery`]: backward observables for diagonal and block-triangular noise.
//! - [`clifford`]: signed Pauli conjugation through `H`, `S`, `CNOT` and gate-wise mitigation.
//! - [`oracle`]: dense density-matrix ground truth used to check everything above.
//! - [`experiment`]: the batch commands behind the `shadow-recovery` binary.
//!
//! ```
//! use shadow_recovery::channel::PauliChannel;
//! use shadow_recovery::pauli::PauliString;
//!
//! let ch = PauliChannel::reference();
//! let zz: PauliString = "ZZ".parse().unwrap();
//! assert!((ch.exact_eigenvalue(&zz) - 0.384).abs() < 1e-12);
//! ```

pub mod channel;
pub mod clifford;
pub mod experiment;
pub mod observable;
pub mod oracle;
pub mod pauli;
pub mod recovery;
pub mod rng;
pub mod shadow;

pub use channel::{Channel, PauliChannel, ProductChannel, Ptm, TransferMatrix};
pub use clifford::{CliffordCircuit, Gate};
pub use observable::Observable;
pub use pauli::{Letter, PauliString, Sign};
pub use recovery::BackwardObservable;
pub use shadow::{EigenvalueEstimates, Eigenstate, ShadowRecord};
