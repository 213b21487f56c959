//! Backward observables: rescaled observables whose noisy expectation equals the ideal one.
//!
//! For a Pauli channel the adjoint is diagonal, so `ᾱ_P = α_P / λ̂_P`. For a weight-contracting
//! channel the adjoint transfer matrix `M` is upper block triangular in weight order and
//! `ᾱ = M⁻¹ α` is found by block back-substitution.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, LU};
use serde::Serialize;
use thiserror::Error;

use crate::channel::TransferMatrix;
use crate::observable::Observable;
use crate::pauli::PauliString;
use crate::shadow::EigenvalueEstimates;

/// Default eigenvalue floor.
pub const DEFAULT_FLOOR: f64 = 0.05;
/// Default limit on the condition estimate of a diagonal block.
pub const DEFAULT_CONDITION_LIMIT: f64 = 1e6;
const TRIANGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum RecoveryError {
    #[error("no eigenvalue estimate for {0}")]
    MissingEstimate(String),
    #[error("estimated eigenvalue {value} for {pauli} is below the floor {floor}")]
    BelowFloor { pauli: String, value: f64, floor: f64 },
    #[error("floor must be positive, got {0}")]
    InvalidFloor(f64),
    #[error("no expectation value supplied for {0}")]
    MissingExpectation(String),
    #[error("diagonal block for weight {weight} is singular or ill conditioned (condition estimate {condition:e})")]
    IllConditionedBlock { weight: usize, condition: f64 },
    #[error("transfer matrix is not upper block triangular: entry ({row}, {col}) = {value:e}")]
    NotBlockTriangular { row: String, col: String, value: f64 },
    #[error("observable term {0} lies outside the transfer-matrix basis")]
    OutsideBasis(String),
    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitMismatch { expected: usize, found: usize },
    #[error("{0}")]
    Circuit(String),
}

impl RecoveryError {
    /// True for errors that mean the noise is too strong to undo at the requested floor.
    pub fn is_floor_violation(&self) -> bool {
        matches!(self, RecoveryError::BelowFloor { .. } | RecoveryError::IllConditionedBlock { .. })
    }
}

/// Coefficients `ᾱ_P` together with how they were obtained.
#[derive(Clone, Debug, PartialEq)]
pub struct BackwardObservable {
    n: usize,
    terms: BTreeMap<PauliString, f64>,
    provenance: String,
    min_abs_eigenvalue: Option<f64>,
    condition: Option<f64>,
}

impl BackwardObservable {
    pub fn new(
        n: usize,
        terms: BTreeMap<PauliString, f64>,
        provenance: String,
        min_abs_eigenvalue: Option<f64>,
        condition: Option<f64>,
    ) -> Self {
        Self { n, terms, provenance, min_abs_eigenvalue, condition }
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<PauliString, f64> {
        &self.terms
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.terms.get(&p.unsigned()).copied().unwrap_or(0.0)
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Smallest `|λ̂|` divided by (diagonal case).
    pub fn min_abs_eigenvalue(&self) -> Option<f64> {
        self.min_abs_eigenvalue
    }

    /// Largest diagonal-block condition estimate (block case).
    pub fn condition(&self) -> Option<f64> {
        self.condition
    }

    pub fn to_observable(&self) -> Observable {
        Observable::from_terms(self.n, self.terms.iter().map(|(p, a)| (*p, *a))).expect("terms share the register")
    }
}

/// `ᾱ_P = α_P / clamp(λ̂_P, −1, 1)`; `|λ̂_P| < floor` is an error.
pub fn backward_observable(
    observable: &Observable,
    estimates: &EigenvalueEstimates,
    floor: f64,
) -> Result<BackwardObservable, RecoveryError> {
    if !(floor > 0.0) {
        return Err(RecoveryError::InvalidFloor(floor));
    }
    if observable.num_qubits() != estimates.num_qubits() {
        return Err(RecoveryError::QubitMismatch { expected: estimates.num_qubits(), found: observable.num_qubits() });
    }
    let mut terms = BTreeMap::new();
    let mut min_abs = f64::INFINITY;
    for (p, alpha) in observable.terms() {
        let lambda = estimates.get(p).ok_or_else(|| RecoveryError::MissingEstimate(p.label()))?;
        if lambda.abs() < floor {
            return Err(RecoveryError::BelowFloor { pauli: p.label(), value: lambda, floor });
        }
        let clamped = lambda.clamp(-1.0, 1.0);
        if !p.is_identity() {
            min_abs = min_abs.min(clamped.abs());
        }
        terms.insert(*p, alpha / clamped);
    }
    let provenance = if estimates.samples() == 0 {
        "exact eigenvalues".to_string()
    } else {
        format!("eigenvalues estimated from {} records", estimates.samples())
    };
    Ok(BackwardObservable::new(
        observable.num_qubits(),
        terms,
        provenance,
        min_abs.is_finite().then_some(min_abs),
        None,
    ))
}

/// `f = Σ_P ᾱ_P · expectation(P)`, with `tr(I ·) = 1` implied.
pub fn recover_expectation_with(
    backward: &BackwardObservable,
    mut expectation: impl FnMut(&PauliString) -> Option<f64>,
) -> Result<f64, RecoveryError> {
    let mut f = 0.0;
    for (p, a) in backward.terms() {
        let v = if p.is_identity() {
            1.0
        } else {
            expectation(p).ok_or_else(|| RecoveryError::MissingExpectation(p.label()))?
        };
        f += a * v;
    }
    Ok(f)
}

pub fn recover_expectation(
    backward: &BackwardObservable,
    expectations: &BTreeMap<PauliString, f64>,
) -> Result<f64, RecoveryError> {
    recover_expectation_with(backward, |p| expectations.get(&p.unsigned()).copied())
}

/// Same as [`recover_expectation`]; the identity coefficient multiplies `tr(E(σ)) = 1`.
pub fn recover_expectation_general(
    backward: &BackwardObservable,
    expectations: &BTreeMap<PauliString, f64>,
) -> Result<f64, RecoveryError> {
    recover_expectation(backward, expectations)
}

/// Factored diagonal blocks of an upper block triangular transfer matrix.
pub struct BlockSolver<'a> {
    matrix: &'a TransferMatrix,
    factors: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
    conditions: Vec<f64>,
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl<'a> BlockSolver<'a> {
    /// Checks the block structure and factors each diagonal block once.
    pub fn new(matrix: &'a TransferMatrix, condition_limit: f64) -> Result<Self, RecoveryError> {
        let m = matrix.entries();
        let basis = matrix.basis();
        for (col, q) in basis.iter().enumerate() {
            for (row, p) in basis.iter().enumerate() {
                if p.weight() > q.weight() && m[(row, col)].abs() > TRIANGULAR_TOL {
                    return Err(RecoveryError::NotBlockTriangular {
                        row: p.label(),
                        col: q.label(),
                        value: m[(row, col)],
                    });
                }
            }
        }
        let mut factors = Vec::new();
        let mut conditions = Vec::new();
        for block in matrix.blocks() {
            let weight = basis[block.start].weight();
            let d = m.view((block.start, block.start), (block.len(), block.len())).into_owned();
            let lu = d.clone().lu();
            let condition = match lu.try_inverse() {
                Some(inv) => norm1(&d) * norm1(&inv),
                None => f64::INFINITY,
            };
            if !(condition <= condition_limit) {
                return Err(RecoveryError::IllConditionedBlock { weight, condition });
            }
            factors.push(lu);
            conditions.push(condition);
        }
        Ok(Self { matrix, factors, conditions })
    }

    pub fn conditions(&self) -> &[f64] {
        &self.conditions
    }

    /// Solves `M x = b` from the highest-weight block down.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let m = self.matrix.entries();
        let blocks = self.matrix.blocks();
        let mut x = DVector::zeros(b.len());
        for (bi, block) in blocks.iter().enumerate().rev() {
            let mut rhs = b.rows(block.start, block.len()).into_owned();
            for later in &blocks[bi + 1..] {
                let coupling = m.view((block.start, later.start), (block.len(), later.len()));
                rhs -= coupling * x.rows(later.start, later.len());
            }
            let sol = self.factors[bi].solve(&rhs).expect("block factored as invertible");
            x.rows_mut(block.start, block.len()).copy_from(&sol);
        }
        x
    }
}

/// `ᾱ = M̃⁻¹ α` on the weight-`≤ k` basis of `M̃`.
pub fn backward_observable_general(
    observable: &Observable,
    matrix: &TransferMatrix,
    condition_limit: f64,
) -> Result<BackwardObservable, RecoveryError> {
    let n = matrix.basis().first().map(|p| p.num_qubits()).unwrap_or(0);
    if observable.num_qubits() != n {
        return Err(RecoveryError::QubitMismatch { expected: n, found: observable.num_qubits() });
    }
    let mut alpha = DVector::zeros(matrix.dim());
    for (p, a) in observable.terms() {
        let i = matrix.index_of(p).ok_or_else(|| RecoveryError::OutsideBasis(p.label()))?;
        alpha[i] = *a;
    }
    let solver = BlockSolver::new(matrix, condition_limit)?;
    let x = solver.solve(&alpha);
    let terms = matrix.basis().iter().zip(x.iter()).filter(|(_, v)| **v != 0.0).map(|(p, v)| (*p, *v)).collect();
    let worst = solver.conditions().iter().copied().fold(0.0, f64::max);
    Ok(BackwardObservable::new(n, terms, "block back-substitution".to_string(), None, Some(worst)))
}

/// JSON summary of a recovery run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecoveryReport {
    pub recovered: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ideal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unmitigated: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<f64>,
    pub coefficients: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<f64>,
    pub provenance: String,
    pub warnings: Vec<String>,
}

impl RecoveryReport {
    pub fn new(backward: &BackwardObservable, recovered: f64, ideal: Option<f64>, unmitigated: Option<f64>) -> Self {
        Self {
            recovered,
            ideal,
            unmitigated,
            abs_error: ideal.map(|v| (recovered - v).abs()),
            coefficients: backward.terms().iter().map(|(p, a)| (p.label(), *a)).collect(),
            min_eigenvalue: backward.min_abs_eigenvalue(),
            condition: backward.condition(),
            provenance: backward.provenance().to_string(),
            warnings: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Channel, PauliChannel, ProductChannel, Ptm, QubitPauliProbs, Validation};
    use crate::oracle::{haar_random_state, DenseState};

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn expectations(state: &DenseState, basis: &[PauliString]) -> BTreeMap<PauliString, f64> {
        basis.iter().map(|q| (*q, state.pauli_expectation(q))).collect()
    }

    #[test]
    fn identity_channel_leaves_observable() {
        let o = Observable::from_terms(2, [(p("ZZ"), 0.3), (p("XI"), -1.0)]).unwrap();
        let est = EigenvalueEstimates::exact(&PauliChannel::identity(2).unwrap(), 2).unwrap();
        let b = backward_observable(&o, &est, DEFAULT_FLOOR).unwrap();
        assert_eq!(b.to_observable(), o);
    }

    #[test]
    fn single_qubit_division() {
        let ch = PauliChannel::product(vec![QubitPauliProbs::new(0.75, 0.10, 0.10, 0.05)]).unwrap();
        let o = Observable::from_terms(1, [(p("Z"), 1.0)]).unwrap();
        let b = backward_observable(&o, &EigenvalueEstimates::exact(&ch, 1).unwrap(), DEFAULT_FLOOR).unwrap();
        assert!((b.coefficient(&p("Z")) - 1.0 / 0.6).abs() < 1e-12);
        assert!((b.min_abs_eigenvalue().unwrap() - 0.6).abs() < 1e-12);
    }

    #[test]
    fn floor_and_clamp() {
        let o = Observable::from_terms(1, [(p("Z"), 1.0)]).unwrap();
        let mut v = BTreeMap::new();
        v.insert(p("Z"), 0.01);
        let est = EigenvalueEstimates::new(1, 1, v, 100);
        let e = backward_observable(&o, &est, 0.05).unwrap_err();
        assert!(e.is_floor_violation(), "{e}");
        let mut v = BTreeMap::new();
        v.insert(p("Z"), 1.3);
        let est = EigenvalueEstimates::new(1, 1, v, 100);
        assert_eq!(backward_observable(&o, &est, 0.05).unwrap().coefficient(&p("Z")), 1.0);
        assert!(matches!(backward_observable(&o, &est, 0.0), Err(RecoveryError::InvalidFloor(_))));
    }

    #[test]
    fn exact_recovery_identity() {
        let ch = PauliChannel::reference();
        let o = crate::observable::Heisenberg::reference(2).build().unwrap();
        let est = EigenvalueEstimates::exact(&ch, 2).unwrap();
        let b = backward_observable(&o, &est, DEFAULT_FLOOR).unwrap();
        let sigma = haar_random_state(2, 3).unwrap();
        let noisy = sigma.apply_channel(&ch.clone().into()).unwrap();
        let basis = crate::pauli::enumerate_low_weight(2, 2).unwrap();
        let f = recover_expectation(&b, &expectations(&noisy, &basis)).unwrap();
        assert!((f - sigma.expectation(&o)).abs() < 1e-10);
        assert!(matches!(recover_expectation(&b, &BTreeMap::new()), Err(RecoveryError::MissingExpectation(_))));
    }

    #[test]
    fn amplitude_damping_solve() {
        let gamma = 0.2;
        let ch: Channel =
            ProductChannel::new(vec![Ptm::amplitude_damping(gamma), Ptm::identity()], Validation::Strict).unwrap().into();
        let m = ch.exact_transfer_matrix(2).unwrap();
        let o = Observable::from_terms(2, [(p("ZI"), 1.0)]).unwrap();
        let b = backward_observable_general(&o, &m, DEFAULT_CONDITION_LIMIT).unwrap();
        assert!((b.coefficient(&p("ZI")) - 1.0 / (1.0 - gamma)).abs() < 1e-12);
        assert!((b.coefficient(&p("II")) + gamma / (1.0 - gamma)).abs() < 1e-12);
        assert!(b.terms().keys().all(|q| q.weight() <= 2));
        let dense = m.entries().clone().try_inverse().unwrap();
        let mut alpha = DVector::zeros(m.dim());
        alpha[m.index_of(&p("ZI")).unwrap()] = 1.0;
        let reference = dense * alpha;
        for (i, q) in m.basis().iter().enumerate() {
            assert!((b.coefficient(q) - reference[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn diagonal_matrix_matches_diagonal_path() {
        let ch = PauliChannel::reference();
        let o = crate::observable::Heisenberg::reference(2).build().unwrap();
        let a = backward_observable(&o, &EigenvalueEstimates::exact(&ch, 2).unwrap(), DEFAULT_FLOOR).unwrap();
        let m = Channel::Pauli(ch).exact_transfer_matrix(2).unwrap();
        let b = backward_observable_general(&o, &m, DEFAULT_CONDITION_LIMIT).unwrap();
        for (q, v) in a.terms() {
            assert!((b.coefficient(q) - v).abs() < 1e-12);
        }
        assert_eq!(a.terms().len(), b.terms().len());
    }

    #[test]
    fn rejects_bad_matrices() {
        let basis = crate::pauli::enumerate_low_weight(1, 1).unwrap();
        let mut m = DMatrix::identity(4, 4);
        m[(1, 0)] = 0.5;
        let tm = TransferMatrix::new(basis.clone(), m).unwrap();
        assert!(matches!(BlockSolver::new(&tm, 1e6), Err(RecoveryError::NotBlockTriangular { .. })));
        let mut m = DMatrix::identity(4, 4);
        m[(3, 3)] = 0.0;
        let tm = TransferMatrix::new(basis, m).unwrap();
        let e = BlockSolver::new(&tm, 1e6).err().unwrap();
        assert!(matches!(e, RecoveryError::IllConditionedBlock { weight: 1, .. }), "{e}");
    }
}
