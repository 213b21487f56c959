//! Noise channels and their exact eigenvalue / transfer-matrix oracles.
//!
//! Two families are supported:
//!
//! - [`PauliChannel`]: `σ ↦ Σ_Q p(Q) Q σ Q`, stored either as a sparse list of Pauli terms or
//!   as a product of single-qubit Pauli distributions.
//! - [`ProductChannel`]: a tensor product of single-qubit channels, each given by its 4×4 Pauli
//!   transfer matrix ([`Ptm`]) with rows and columns ordered `I, X, Y, Z`.
//!
//! The adjoint transfer matrix `M[P][Q] = 2^{-n} tr(P E†(Q))` is the transpose of the Pauli
//! transfer matrix. It is diagonal for Pauli channels and upper block triangular in weight
//! order for product channels.

use std::collections::HashMap;
use std::ops::Range;

use nalgebra::{DMatrix, Matrix4};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::C64;
use crate::pauli::{count_low_weight, enumerate_low_weight, Letter, PauliError, PauliString, Sign};
use crate::shadow::Eigenstate;

/// Qubit cap for operations that enumerate all `4^n` Paulis.
pub const FULL_ENUMERATION_CAP: usize = 10;

const PROBABILITY_TOL: f64 = 1e-12;
const TRACE_PRESERVING_TOL: f64 = 1e-10;
const CP_TOL: f64 = 1e-10;
const CONTRACTING_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("probability {value} for {what} is negative")]
    NegativeProbability { what: String, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("channel has no qubits or no terms")]
    Empty,
    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitMismatch { expected: usize, found: usize },
    #[error("{n} qubits exceeds the cap of {cap} for this operation")]
    TooManyQubits { n: usize, cap: usize },
    #[error("transfer matrix for qubit {qubit} is not trace preserving (first row {row:?})")]
    NotTracePreserving { qubit: usize, row: [f64; 4] },
    #[error("transfer matrix for qubit {qubit} is not completely positive (Choi eigenvalue {min_eigenvalue})")]
    NotCompletelyPositive { qubit: usize, min_eigenvalue: f64 },
    #[error("transfer matrix needs 16 entries, got {0}")]
    BadPtmLength(usize),
    #[error("inverse transform produced probability {value} for {pauli}; input is not a Pauli channel")]
    NotAChannel { pauli: String, value: f64 },
    #[error("invalid channel config: {0}")]
    Config(String),
}

/// Single-qubit Pauli error probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitPauliProbs {
    #[serde(rename = "pI")]
    pub p_i: f64,
    #[serde(rename = "pX")]
    pub p_x: f64,
    #[serde(rename = "pY")]
    pub p_y: f64,
    #[serde(rename = "pZ")]
    pub p_z: f64,
}

impl QubitPauliProbs {
    pub const IDENTITY: QubitPauliProbs = QubitPauliProbs { p_i: 1.0, p_x: 0.0, p_y: 0.0, p_z: 0.0 };

    pub fn new(p_i: f64, p_x: f64, p_y: f64, p_z: f64) -> Self {
        Self { p_i, p_x, p_y, p_z }
    }

    /// Flip probability `p` split evenly over `X`, `Y`, `Z`.
    pub fn depolarizing(p: f64) -> Self {
        Self::new(1.0 - p, p / 3.0, p / 3.0, p / 3.0)
    }

    #[inline]
    pub fn as_array(&self) -> [f64; 4] {
        [self.p_i, self.p_x, self.p_y, self.p_z]
    }

    #[inline]
    pub fn probability(&self, l: Letter) -> f64 {
        self.as_array()[l.index()]
    }

    /// `Σ_a (−1)^{⟨l,a⟩} p_a`.
    #[inline]
    pub fn eigenvalue(&self, l: Letter) -> f64 {
        Letter::ALL
            .iter()
            .map(|&a| if l.anticommutes(a) { -self.probability(a) } else { self.probability(a) })
            .sum()
    }

    fn validate(&self, qubit: usize) -> Result<(), ChannelError> {
        for (l, p) in Letter::ALL.iter().zip(self.as_array()) {
            if p < 0.0 || !p.is_finite() {
                return Err(ChannelError::NegativeProbability { what: format!("qubit {qubit} letter {}", l.to_char()), value: p });
            }
        }
        let total: f64 = self.as_array().iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(ChannelError::NotNormalized(total));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Distribution {
    Sparse { terms: Vec<(PauliString, f64)>, cumulative: Vec<f64> },
    Product(Vec<QubitPauliProbs>),
}

/// A Pauli channel `σ ↦ Σ_Q p(Q) Q σ Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliChannel {
    n: usize,
    dist: Distribution,
}

impl PauliChannel {
    pub fn identity(n: usize) -> Result<Self, ChannelError> {
        Self::product(vec![QubitPauliProbs::IDENTITY; n])
    }

    /// Product of independent single-qubit Pauli channels.
    pub fn product(qubits: Vec<QubitPauliProbs>) -> Result<Self, ChannelError> {
        if qubits.is_empty() {
            return Err(ChannelError::Empty);
        }
        if qubits.len() > crate::pauli::MAX_QUBITS {
            return Err(PauliError::TooManyQubits(qubits.len()).into());
        }
        for (j, q) in qubits.iter().enumerate() {
            q.validate(j)?;
        }
        Ok(Self { n: qubits.len(), dist: Distribution::Product(qubits) })
    }

    /// Explicit distribution over Pauli strings. Signs are ignored and duplicates merged.
    pub fn sparse(n: usize, terms: impl IntoIterator<Item = (PauliString, f64)>) -> Result<Self, ChannelError> {
        if n == 0 {
            return Err(ChannelError::Empty);
        }
        let mut merged: HashMap<PauliString, f64> = HashMap::new();
        for (p, prob) in terms {
            if p.num_qubits() != n {
                return Err(ChannelError::QubitMismatch { expected: n, found: p.num_qubits() });
            }
            if prob < 0.0 || !prob.is_finite() {
                return Err(ChannelError::NegativeProbability { what: p.to_string(), value: prob });
            }
            *merged.entry(p.unsigned()).or_default() += prob;
        }
        let mut terms: Vec<(PauliString, f64)> = merged.into_iter().filter(|(_, p)| *p > 0.0).collect();
        if terms.is_empty() {
            return Err(ChannelError::Empty);
        }
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        let total: f64 = terms.iter().map(|t| t.1).sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(ChannelError::NotNormalized(total));
        }
        let mut acc = 0.0;
        let cumulative = terms
            .iter()
            .map(|t| {
                acc += t.1;
                acc
            })
            .collect();
        Ok(Self { n, dist: Distribution::Sparse { terms, cumulative } })
    }

    /// Two-qubit product channel with the per-qubit error rates used in the Heisenberg
    /// recovery experiment.
    pub fn reference() -> Self {
        Self::product(vec![QubitPauliProbs::new(0.75, 0.10, 0.10, 0.05), QubitPauliProbs::new(0.77, 0.09, 0.09, 0.05)])
            .expect("valid constants")
    }

    /// `p(Q) = 4^{-n}` for every `Q`.
    pub fn completely_depolarizing(n: usize) -> Result<Self, ChannelError> {
        Self::product(vec![QubitPauliProbs::new(0.25, 0.25, 0.25, 0.25); n])
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn is_product(&self) -> bool {
        matches!(self.dist, Distribution::Product(_))
    }

    /// Per-qubit factors when the channel is stored in product form.
    pub fn factors(&self) -> Option<&[QubitPauliProbs]> {
        match &self.dist {
            Distribution::Product(q) => Some(q),
            Distribution::Sparse { .. } => None,
        }
    }

    /// `p(Q)` for an unsigned `Q`.
    pub fn probability(&self, q: &PauliString) -> f64 {
        match &self.dist {
            Distribution::Product(f) => f.iter().enumerate().map(|(j, f)| f.probability(q.letter(j))).product(),
            Distribution::Sparse { terms, .. } => {
                let key = q.unsigned();
                terms.binary_search_by(|t| t.0.cmp(&key)).map(|i| terms[i].1).unwrap_or(0.0)
            }
        }
    }

    /// `λ_P = Σ_Q (−1)^{⟨P,Q⟩} p(Q)`, computed per qubit in product form.
    pub fn exact_eigenvalue(&self, p: &PauliString) -> f64 {
        assert_eq!(p.num_qubits(), self.n, "Pauli and channel qubit counts differ");
        match &self.dist {
            Distribution::Product(f) => f.iter().enumerate().map(|(j, f)| f.eigenvalue(p.letter(j))).product(),
            Distribution::Sparse { terms, .. } => terms
                .iter()
                .map(|(q, prob)| if p.symplectic_unchecked(q) == 1 { -prob } else { *prob })
                .sum(),
        }
    }

    /// Nonzero terms of the distribution. Product form is expanded, so it is capped at
    /// [`FULL_ENUMERATION_CAP`] qubits.
    pub fn terms(&self) -> Result<Vec<(PauliString, f64)>, ChannelError> {
        match &self.dist {
            Distribution::Sparse { terms, .. } => Ok(terms.clone()),
            Distribution::Product(_) => {
                if self.n > FULL_ENUMERATION_CAP {
                    return Err(ChannelError::TooManyQubits { n: self.n, cap: FULL_ENUMERATION_CAP });
                }
                Ok(enumerate_low_weight(self.n, self.n)?
                    .into_iter()
                    .map(|q| {
                        let p = self.probability(&q);
                        (q, p)
                    })
                    .filter(|(_, p)| *p > 0.0)
                    .collect())
            }
        }
    }

    /// Draws an error Pauli from `p`.
    pub fn sample_error<R: Rng + ?Sized>(&self, rng: &mut R) -> PauliString {
        match &self.dist {
            Distribution::Product(f) => {
                let mut q = PauliString::identity(self.n).expect("n validated");
                for (j, probs) in f.iter().enumerate() {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut letter = Letter::Z;
                    for l in Letter::ALL {
                        acc += probs.probability(l);
                        if u < acc {
                            letter = l;
                            break;
                        }
                    }
                    q.set_letter(j, letter);
                }
                q
            }
            Distribution::Sparse { terms, cumulative } => {
                let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let i = cumulative.partition_point(|&c| c <= u).min(terms.len() - 1);
                terms[i].0
            }
        }
    }

    /// Same channel as a product of Pauli transfer matrices, when stored in product form.
    pub fn to_product_channel(&self) -> Option<ProductChannel> {
        self.factors().map(|f| ProductChannel {
            factors: f.iter().map(|q| Ptm::pauli(*q)).collect(),
            warnings: Vec::new(),
        })
    }
}

/// Flips the sign of each qubit whose axis anticommutes with the error letter there.
pub fn apply_error_to_eigenstate(q: &PauliString, states: &[Eigenstate]) -> Vec<Eigenstate> {
    assert_eq!(q.num_qubits(), states.len(), "error and state lengths differ");
    states
        .iter()
        .enumerate()
        .map(|(j, s)| if q.letter(j).anticommutes(s.axis.letter()) { s.flipped() } else { *s })
        .collect()
}

/// Dense index of a Pauli among all `4^n`: `x | (z << n)`.
#[inline]
pub fn pauli_index(p: &PauliString) -> usize {
    (p.x_bits() | (p.z_bits() << p.num_qubits())) as usize
}

/// Inverse of [`pauli_index`].
pub fn pauli_from_index(n: usize, idx: usize) -> PauliString {
    let m = (1usize << n) - 1;
    PauliString::from_bits(n, (idx & m) as u64, ((idx >> n) & m) as u64, Sign::Plus).expect("n within cap")
}

/// In-place unnormalized Walsh–Hadamard transform over `len = 2^m`.
fn fast_walsh_hadamard(v: &mut [f64]) {
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
}

/// Swaps the x and z halves of a dense Pauli index, turning the symplectic form into the
/// ordinary dot product used by the Walsh–Hadamard transform.
#[inline]
fn swap_halves(n: usize, idx: usize) -> usize {
    let m = (1usize << n) - 1;
    ((idx & m) << n) | (idx >> n)
}

/// All `4^n` eigenvalues, indexed by [`pauli_index`].
pub fn walsh_transform(ch: &PauliChannel) -> Result<Vec<f64>, ChannelError> {
    let n = ch.num_qubits();
    if n > FULL_ENUMERATION_CAP {
        return Err(ChannelError::TooManyQubits { n, cap: FULL_ENUMERATION_CAP });
    }
    let mut v = vec![0.0; 1 << (2 * n)];
    for (q, p) in ch.terms()? {
        v[swap_halves(n, pauli_index(&q))] += p;
    }
    fast_walsh_hadamard(&mut v);
    Ok(v)
}

/// Recovers `p(Q) = 4^{-n} Σ_P (−1)^{⟨P,Q⟩} λ_P` from all `4^n` eigenvalues.
pub fn inverse_walsh_transform(n: usize, eigenvalues: &[f64]) -> Result<PauliChannel, ChannelError> {
    if n > FULL_ENUMERATION_CAP {
        return Err(ChannelError::TooManyQubits { n, cap: FULL_ENUMERATION_CAP });
    }
    let len = 1usize << (2 * n);
    if eigenvalues.len() != len {
        return Err(ChannelError::Config(format!("expected {len} eigenvalues, got {}", eigenvalues.len())));
    }
    let mut v = eigenvalues.to_vec();
    fast_walsh_hadamard(&mut v);
    let scale = 1.0 / len as f64;
    let mut terms = Vec::new();
    for (i, x) in v.into_iter().enumerate() {
        let p = x * scale;
        let q = pauli_from_index(n, swap_halves(n, i));
        if p < -1e-10 {
            return Err(ChannelError::NotAChannel { pauli: q.label(), value: p });
        }
        if p > 0.0 {
            terms.push((q, p));
        }
    }
    let total: f64 = terms.iter().map(|t| t.1).sum();
    for t in terms.iter_mut() {
        t.1 /= total;
    }
    PauliChannel::sparse(n, terms)
}

/// Single-qubit Pauli transfer matrix `T[P][Q] = ½ tr(P N(Q))`, rows and columns `I, X, Y, Z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ptm(pub [[f64; 4]; 4]);

impl Ptm {
    pub fn identity() -> Self {
        Self::diagonal([1.0, 1.0, 1.0, 1.0])
    }

    pub fn diagonal(d: [f64; 4]) -> Self {
        let mut t = [[0.0; 4]; 4];
        for i in 0..4 {
            t[i][i] = d[i];
        }
        Ptm(t)
    }

    /// Depolarizing channel with Bloch shrink factor `lambda` on every axis.
    pub fn depolarizing(lambda: f64) -> Self {
        Self::diagonal([1.0, lambda, lambda, lambda])
    }

    /// Amplitude damping towards `|0⟩` with decay probability `gamma`.
    pub fn amplitude_damping(gamma: f64) -> Self {
        let s = (1.0 - gamma).sqrt();
        let mut t = Self::diagonal([1.0, s, s, 1.0 - gamma]).0;
        t[3][0] = gamma;
        Ptm(t)
    }

    pub fn pauli(probs: QubitPauliProbs) -> Self {
        Self::diagonal([1.0, probs.eigenvalue(Letter::X), probs.eigenvalue(Letter::Y), probs.eigenvalue(Letter::Z)])
    }

    pub fn from_row_major(v: &[f64]) -> Result<Self, ChannelError> {
        if v.len() != 16 {
            return Err(ChannelError::BadPtmLength(v.len()));
        }
        let mut t = [[0.0; 4]; 4];
        for (i, x) in v.iter().enumerate() {
            t[i / 4][i % 4] = *x;
        }
        Ok(Ptm(t))
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.0.iter().flatten().copied().collect()
    }

    #[inline]
    pub fn entry(&self, row: Letter, col: Letter) -> f64 {
        self.0[row.index()][col.index()]
    }

    /// Output Bloch vector for input Bloch vector `r`.
    pub fn apply_bloch(&self, r: [f64; 3]) -> [f64; 3] {
        let t = &self.0;
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate() {
            *o = t[i + 1][0] + (0..3).map(|c| t[i + 1][c + 1] * r[c]).sum::<f64>();
        }
        out
    }

    /// Smallest eigenvalue of the Choi matrix `½ Σ_{P,Q} T[P][Q] Qᵀ ⊗ P`.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        let paulis = single_qubit_paulis();
        let mut choi = Matrix4::<C64>::zeros();
        for p in 0..4 {
            for q in 0..4 {
                let t = self.0[p][q];
                if t == 0.0 {
                    continue;
                }
                choi += paulis[q].transpose().kronecker(&paulis[p]) * C64::new(0.5 * t, 0.0);
            }
        }
        choi.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn single_qubit_paulis() -> [nalgebra::Matrix2<C64>; 4] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        nalgebra::Matrix2::new(l, o, o, l),
        nalgebra::Matrix2::new(o, l, l, o),
        nalgebra::Matrix2::new(o, -i, i, o),
        nalgebra::Matrix2::new(l, o, o, -l),
    ]
}

/// How strictly complete positivity is enforced when building a [`ProductChannel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Validation {
    /// Violations are errors.
    Strict,
    /// Violations are recorded in [`ProductChannel::warnings`].
    #[default]
    Lenient,
}

/// Tensor product of single-qubit channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductChannel {
    factors: Vec<Ptm>,
    warnings: Vec<String>,
}

impl ProductChannel {
    pub fn new(factors: Vec<Ptm>, validation: Validation) -> Result<Self, ChannelError> {
        if factors.is_empty() {
            return Err(ChannelError::Empty);
        }
        if factors.len() > crate::pauli::MAX_QUBITS {
            return Err(PauliError::TooManyQubits(factors.len()).into());
        }
        let mut warnings = Vec::new();
        for (j, t) in factors.iter().enumerate() {
            let row = t.0[0];
            let expected = [1.0, 0.0, 0.0, 0.0];
            if row.iter().zip(expected).any(|(a, b)| (a - b).abs() > TRACE_PRESERVING_TOL) {
                return Err(ChannelError::NotTracePreserving { qubit: j, row });
            }
            let min_eig = t.choi_min_eigenvalue();
            if min_eig < -CP_TOL {
                match validation {
                    Validation::Strict => {
                        return Err(ChannelError::NotCompletelyPositive { qubit: j, min_eigenvalue: min_eig })
                    }
                    Validation::Lenient => warnings.push(format!(
                        "qubit {j}: transfer matrix is not completely positive (Choi eigenvalue {min_eig:.3e})"
                    )),
                }
            }
        }
        Ok(Self { factors, warnings })
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Ptm] {
        &self.factors
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Post-channel Bloch vector of qubit `j` prepared in `s`.
    pub fn output_qubit_density(&self, s: Eigenstate, j: usize) -> [f64; 3] {
        self.factors[j].apply_bloch(s.bloch())
    }

    /// `M[P][Q] = Π_j T_j[Q_j][P_j]`.
    #[inline]
    pub fn adjoint_entry(&self, p: &PauliString, q: &PauliString) -> f64 {
        let mut acc = 1.0;
        for (j, t) in self.factors.iter().enumerate() {
            acc *= t.entry(q.letter(j), p.letter(j));
            if acc == 0.0 {
                break;
            }
        }
        acc
    }
}

/// Any channel the toolkit can learn from and recover against.
#[derive(Clone, Debug, PartialEq)]
pub enum Channel {
    Pauli(PauliChannel),
    Product(ProductChannel),
}

impl Channel {
    pub fn num_qubits(&self) -> usize {
        match self {
            Channel::Pauli(c) => c.num_qubits(),
            Channel::Product(c) => c.num_qubits(),
        }
    }

    pub fn as_pauli(&self) -> Option<&PauliChannel> {
        match self {
            Channel::Pauli(c) => Some(c),
            Channel::Product(_) => None,
        }
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            Channel::Pauli(_) => &[],
            Channel::Product(c) => c.warnings(),
        }
    }

    /// `M[P][Q] = 2^{-n} tr(P E†(Q))`.
    pub fn adjoint_entry(&self, p: &PauliString, q: &PauliString) -> f64 {
        match self {
            Channel::Pauli(c) => {
                if p.unsigned() == q.unsigned() {
                    c.exact_eigenvalue(p)
                } else {
                    0.0
                }
            }
            Channel::Product(c) => c.adjoint_entry(p, q),
        }
    }

    /// Adjoint transfer matrix over all Paulis of weight at most `k`.
    pub fn exact_transfer_matrix(&self, k: usize) -> Result<TransferMatrix, ChannelError> {
        let basis = enumerate_low_weight(self.num_qubits(), k)?;
        let dim = basis.len();
        let mut m = DMatrix::zeros(dim, dim);
        for (c, q) in basis.iter().enumerate() {
            for (r, p) in basis.iter().enumerate() {
                // Only the weight(P) <= weight(Q) half can be nonzero for contracting
                // channels, but the full matrix is computed so the property can be checked.
                m[(r, c)] = self.adjoint_entry(p, q);
            }
        }
        TransferMatrix::new(basis, m)
    }

    pub fn is_weight_contracting(&self, k: usize) -> Result<bool, ChannelError> {
        Ok(self.exact_transfer_matrix(k)?.is_weight_contracting())
    }
}

impl From<PauliChannel> for Channel {
    fn from(c: PauliChannel) -> Self {
        Channel::Pauli(c)
    }
}

impl From<ProductChannel> for Channel {
    fn from(c: ProductChannel) -> Self {
        Channel::Product(c)
    }
}

/// Real matrix over a weight-ordered Pauli basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    basis: Vec<PauliString>,
    index: HashMap<PauliString, usize>,
    blocks: Vec<Range<usize>>,
    entries: DMatrix<f64>,
}

impl TransferMatrix {
    /// `basis` must be sorted by weight (as produced by [`enumerate_low_weight`]).
    pub fn new(basis: Vec<PauliString>, entries: DMatrix<f64>) -> Result<Self, ChannelError> {
        let dim = basis.len();
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(ChannelError::Config(format!(
                "matrix is {}x{}, basis has {dim} elements",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if basis.windows(2).any(|w| w[0].weight() > w[1].weight()) {
            return Err(ChannelError::Config("basis is not sorted by weight".into()));
        }
        let index = basis.iter().enumerate().map(|(i, p)| (p.unsigned(), i)).collect();
        let mut blocks: Vec<Range<usize>> = Vec::new();
        let mut start = 0;
        for i in 1..=dim {
            if i == dim || basis[i].weight() != basis[start].weight() {
                blocks.push(start..i);
                start = i;
            }
        }
        Ok(Self { basis, index, blocks, entries })
    }

    pub fn basis(&self) -> &[PauliString] {
        &self.basis
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, p: &PauliString) -> Option<usize> {
        self.index.get(&p.unsigned()).copied()
    }

    pub fn get(&self, p: &PauliString, q: &PauliString) -> Option<f64> {
        Some(self.entries[(self.index_of(p)?, self.index_of(q)?)])
    }

    /// Index ranges of the equal-weight blocks, in increasing weight.
    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn max_weight(&self) -> usize {
        self.basis.last().map(|p| p.weight()).unwrap_or(0)
    }

    /// True iff every entry with `weight(P) > weight(Q)` vanishes within `1e-10`.
    pub fn is_weight_contracting(&self) -> bool {
        for (c, q) in self.basis.iter().enumerate() {
            for (r, p) in self.basis.iter().enumerate() {
                if p.weight() > q.weight() && self.entries[(r, c)].abs() > CONTRACTING_TOL {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let m = &self.entries;
        (0..m.nrows()).all(|r| (0..m.ncols()).all(|c| r == c || m[(r, c)].abs() <= tol))
    }
}

/// JSON channel description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelConfig {
    PauliProduct {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        qubits: Vec<QubitPauliProbs>,
    },
    PauliSparse {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        terms: Vec<(String, f64)>,
    },
    PtmProduct {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        qubits: Vec<Vec<f64>>,
        #[serde(default)]
        strict: bool,
    },
}

fn check_n(declared: Option<usize>, found: usize) -> Result<(), ChannelError> {
    match declared {
        Some(n) if n != found => Err(ChannelError::QubitMismatch { expected: n, found }),
        _ => Ok(()),
    }
}

impl ChannelConfig {
    pub fn from_json(text: &str) -> Result<Self, ChannelError> {
        serde_json::from_str(text)
            .map_err(|e| ChannelError::Config(format!("line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn build(&self) -> Result<Channel, ChannelError> {
        match self {
            ChannelConfig::PauliProduct { n, qubits } => {
                check_n(*n, qubits.len())?;
                Ok(PauliChannel::product(qubits.clone())?.into())
            }
            ChannelConfig::PauliSparse { n, terms } => {
                let parsed = terms
                    .iter()
                    .map(|(label, p)| Ok((label.parse::<PauliString>()?, *p)))
                    .collect::<Result<Vec<_>, ChannelError>>()?;
                let width = match (n, parsed.first()) {
                    (Some(n), _) => *n,
                    (None, Some((p, _))) => p.num_qubits(),
                    (None, None) => return Err(ChannelError::Empty),
                };
                Ok(PauliChannel::sparse(width, parsed)?.into())
            }
            ChannelConfig::PtmProduct { n, qubits, strict } => {
                check_n(*n, qubits.len())?;
                let factors = qubits.iter().map(|v| Ptm::from_row_major(v)).collect::<Result<Vec<_>, _>>()?;
                let validation = if *strict { Validation::Strict } else { Validation::Lenient };
                Ok(ProductChannel::new(factors, validation)?.into())
            }
        }
    }

    /// Builds a Pauli channel, rejecting transfer-matrix configs.
    pub fn build_pauli(&self) -> Result<PauliChannel, ChannelError> {
        match self.build()? {
            Channel::Pauli(c) => Ok(c),
            Channel::Product(_) => Err(ChannelError::Config("a Pauli channel is required here".into())),
        }
    }
}

/// Number of Paulis of weight at most `k` as a float, for sample-size formulas at large `n`.
pub fn low_weight_count_f64(n: usize, k: usize) -> f64 {
    count_low_weight(n, k) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shadow::Axis;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn reference_eigenvalues() {
        let ch = PauliChannel::reference();
        assert_eq!(ch.exact_eigenvalue(&p("II")), 1.0);
        let q1 = PauliChannel::product(vec![QubitPauliProbs::new(0.75, 0.10, 0.10, 0.05)]).unwrap();
        assert!((q1.exact_eigenvalue(&p("Z")) - 0.60).abs() < 1e-12);
        assert!((ch.exact_eigenvalue(&p("ZZ")) - 0.384).abs() < 1e-12);
        assert!((ch.exact_eigenvalue(&p("XI")) - 0.70).abs() < 1e-12);
    }

    #[test]
    fn product_and_sparse_agree() {
        let ch = PauliChannel::reference();
        let sparse = PauliChannel::sparse(2, ch.terms().unwrap()).unwrap();
        for q in enumerate_low_weight(2, 2).unwrap() {
            assert!((ch.exact_eigenvalue(&q) - sparse.exact_eigenvalue(&q)).abs() < 1e-12);
            assert!((ch.probability(&q) - sparse.probability(&q)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_distributions() {
        assert!(matches!(
            PauliChannel::product(vec![QubitPauliProbs::new(0.9, 0.2, 0.0, -0.1)]),
            Err(ChannelError::NegativeProbability { .. })
        ));
        assert!(matches!(
            PauliChannel::sparse(1, [(p("I"), 0.5), (p("X"), 0.4)]),
            Err(ChannelError::NotNormalized(_))
        ));
        assert!(matches!(PauliChannel::sparse(2, [(p("I"), 1.0)]), Err(ChannelError::QubitMismatch { .. })));
    }

    #[test]
    fn walsh_examples() {
        let dep = PauliChannel::completely_depolarizing(2).unwrap();
        let eig = walsh_transform(&dep).unwrap();
        for (i, l) in eig.iter().enumerate() {
            let expected = if i == 0 { 1.0 } else { 0.0 };
            assert!((l - expected).abs() < 1e-12);
        }
        let id = PauliChannel::identity(2).unwrap();
        assert!(walsh_transform(&id).unwrap().iter().all(|l| (l - 1.0).abs() < 1e-15));

        let ch = PauliChannel::reference();
        let eig = walsh_transform(&ch).unwrap();
        for (i, l) in eig.iter().enumerate() {
            assert!((l - ch.exact_eigenvalue(&pauli_from_index(2, i))).abs() < 1e-12);
        }
        let back = inverse_walsh_transform(2, &eig).unwrap();
        for q in enumerate_low_weight(2, 2).unwrap() {
            assert!((back.probability(&q) - ch.probability(&q)).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_rejects_non_channel() {
        // λ_X = -1 with λ_Y = λ_Z = 1 would need p(X) < 0.
        let eig = vec![1.0, -1.0, 1.0, 1.0];
        let e = inverse_walsh_transform(1, &[eig[0], eig[1], eig[3], eig[2]]).unwrap_err();
        assert!(matches!(e, ChannelError::NotAChannel { .. }), "{e}");
    }

    #[test]
    fn error_on_eigenstates() {
        let plus_z = Eigenstate::new(Axis::Z, Sign::Plus);
        assert_eq!(apply_error_to_eigenstate(&p("I"), &[plus_z]), vec![plus_z]);
        assert_eq!(apply_error_to_eigenstate(&p("X"), &[plus_z]), vec![plus_z.flipped()]);
        assert_eq!(apply_error_to_eigenstate(&p("Z"), &[plus_z]), vec![plus_z]);
        let s = [Eigenstate::new(Axis::X, Sign::Minus), Eigenstate::new(Axis::Y, Sign::Plus)];
        let out = apply_error_to_eigenstate(&p("ZY"), &s);
        assert_eq!(out, vec![s[0].flipped(), s[1]]);
    }

    #[test]
    fn output_densities() {
        let zp = Eigenstate::new(Axis::Z, Sign::Plus);
        let zm = Eigenstate::new(Axis::Z, Sign::Minus);
        let id = ProductChannel::new(vec![Ptm::identity()], Validation::Strict).unwrap();
        assert_eq!(id.output_qubit_density(zp, 0), [0.0, 0.0, 1.0]);
        let dep = ProductChannel::new(vec![Ptm::depolarizing(0.7)], Validation::Strict).unwrap();
        assert_eq!(dep.output_qubit_density(zp, 0), [0.0, 0.0, 0.7]);
        let ad = ProductChannel::new(vec![Ptm::amplitude_damping(0.36)], Validation::Strict).unwrap();
        let r = ad.output_qubit_density(zm, 0);
        assert!((r[2] + 0.28).abs() < 1e-12 && r[0] == 0.0 && r[1] == 0.0);
    }

    #[test]
    fn ptm_validation() {
        assert!(Ptm::amplitude_damping(0.3).choi_min_eigenvalue() > -1e-12);
        assert!(Ptm::depolarizing(1.0).choi_min_eigenvalue() > -1e-12);
        // Bloch-vector inversion is positive but not completely positive.
        let transpose = Ptm::diagonal([1.0, 1.0, -1.0, 1.0]);
        assert!(transpose.choi_min_eigenvalue() < -0.1);
        assert!(matches!(
            ProductChannel::new(vec![transpose], Validation::Strict),
            Err(ChannelError::NotCompletelyPositive { .. })
        ));
        let lenient = ProductChannel::new(vec![transpose], Validation::Lenient).unwrap();
        assert_eq!(lenient.warnings().len(), 1);
        let mut bad = Ptm::identity();
        bad.0[0][3] = 0.1;
        assert!(matches!(
            ProductChannel::new(vec![bad], Validation::Lenient),
            Err(ChannelError::NotTracePreserving { .. })
        ));
    }

    #[test]
    fn transfer_matrix_examples() {
        let ch: Channel = PauliChannel::reference().into();
        let m = ch.exact_transfer_matrix(2).unwrap();
        assert!(m.is_diagonal(0.0));
        for (i, q) in m.basis().iter().enumerate() {
            assert_eq!(m.entries()[(i, i)], ch.as_pauli().unwrap().exact_eigenvalue(q));
        }
        assert!(m.is_weight_contracting());

        let id: Channel = PauliChannel::identity(2).unwrap().into();
        assert_eq!(*id.exact_transfer_matrix(2).unwrap().entries(), DMatrix::identity(16, 16));

        let gamma = 0.2;
        let ad: Channel =
            ProductChannel::new(vec![Ptm::amplitude_damping(gamma), Ptm::identity()], Validation::Strict).unwrap().into();
        let m = ad.exact_transfer_matrix(1).unwrap();
        assert!((m.get(&p("II"), &p("ZI")).unwrap() - gamma).abs() < 1e-15);
        assert!((m.get(&p("ZI"), &p("ZI")).unwrap() - (1.0 - gamma)).abs() < 1e-15);
        assert!((m.get(&p("XI"), &p("XI")).unwrap() - (1.0 - gamma).sqrt()).abs() < 1e-15);
        assert!((m.get(&p("YI"), &p("YI")).unwrap() - (1.0 - gamma).sqrt()).abs() < 1e-15);
        assert_eq!(m.get(&p("ZI"), &p("II")).unwrap(), 0.0);
        assert!(m.is_weight_contracting());
        assert_eq!(m.blocks(), &[0..1, 1..7]);
    }

    #[test]
    fn config_parsing() {
        let text = r#"{"n": 2, "kind": "pauli-product", "qubits": [
            {"pI":0.75,"pX":0.10,"pY":0.10,"pZ":0.05},
            {"pI":0.77,"pX":0.09,"pY":0.09,"pZ":0.05}]}"#;
        let ch = ChannelConfig::from_json(text).unwrap().build_pauli().unwrap();
        assert_eq!(ch, PauliChannel::reference());

        let sparse = r#"{"kind":"pauli-sparse","terms":[["II",0.97],["XZ",0.01],["ZZ",0.02]]}"#;
        let ch = ChannelConfig::from_json(sparse).unwrap().build_pauli().unwrap();
        assert_eq!(ch.num_qubits(), 2);
        assert!((ch.exact_eigenvalue(&p("XI")) - (0.97 + 0.01 - 0.02)).abs() < 1e-12);

        let ptm = r#"{"kind":"ptm-product","qubits":[[1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]]}"#;
        assert!(matches!(ChannelConfig::from_json(ptm).unwrap().build().unwrap(), Channel::Product(_)));

        let err = ChannelConfig::from_json("{\n\"kind\": \"nope\"}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let mismatch = r#"{"n": 3, "kind": "pauli-product", "qubits": [{"pI":1,"pX":0,"pY":0,"pZ":0}]}"#;
        assert!(matches!(
            ChannelConfig::from_json(mismatch).unwrap().build(),
            Err(ChannelError::QubitMismatch { expected: 3, found: 1 })
        ));
    }
}
