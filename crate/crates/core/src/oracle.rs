//! Dense density-matrix ground truth.
//!
//! Qubit `j` is the `j`-th tensor factor, i.e. bit `n − 1 − j` of a computational basis index.
//! Channels and gates act locally on 2×2 blocks (or as index permutations) rather than through
//! full `4^n × 4^n` superoperators, and none of the code here goes through the eigenvalue
//! formulas or shadow kernels it is used to check.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{single_qubit_paulis, Channel, ChannelError, PauliChannel, ProductChannel, Ptm, TransferMatrix};
use crate::clifford::{CliffordCircuit, Gate, GateKind};
use crate::observable::Observable;
use crate::pauli::{enumerate_low_weight, Letter, PauliString};
use crate::rng::{derive_seed, stream_rng, tags};
use crate::shadow::{Axis, Eigenstate, StateSampler};

pub type C64 = nalgebra::Complex<f64>;

/// Largest register for dense states.
pub const STATE_QUBIT_CAP: usize = 12;
/// Largest register for procedures that enumerate all `4^n` Paulis.
pub const ENUMERATION_QUBIT_CAP: usize = 10;

const STATE_TOL: f64 = 1e-10;

#[inline]
fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[inline]
fn bit_of(n: usize, j: usize) -> usize {
    n - 1 - j
}

/// Pauli masks in basis-index bit order.
#[inline]
fn dense_masks(p: &PauliString) -> (usize, usize) {
    let n = p.num_qubits();
    let (mut x, mut z) = (0usize, 0usize);
    for j in 0..n {
        x |= (((p.x_bits() >> j) & 1) as usize) << bit_of(n, j);
        z |= (((p.z_bits() >> j) & 1) as usize) << bit_of(n, j);
    }
    (x, z)
}

/// `P|r⟩ = phase(r) |r ⊕ x⟩`.
#[inline]
fn pauli_phase(sign: f64, ny: u32, z: usize, r: usize) -> C64 {
    let i_pow = match ny % 4 {
        0 => c(1.0),
        1 => C64::new(0.0, 1.0),
        2 => c(-1.0),
        _ => C64::new(0.0, -1.0),
    };
    let parity = if (r & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
    i_pow * (sign * parity)
}

pub fn pauli_matrix(p: &PauliString) -> DMatrix<C64> {
    let dim = 1usize << p.num_qubits();
    let (x, z) = dense_masks(p);
    let ny = (x & z).count_ones();
    let mut m = DMatrix::zeros(dim, dim);
    for r in 0..dim {
        m[(r ^ x, r)] = pauli_phase(p.sign().value(), ny, z, r);
    }
    m
}

/// `tr(P M)` without forming `P`.
pub fn pauli_trace(p: &PauliString, m: &DMatrix<C64>) -> C64 {
    let dim = m.nrows();
    let (x, z) = dense_masks(p);
    let ny = (x & z).count_ones();
    (0..dim).map(|r| pauli_phase(p.sign().value(), ny, z, r) * m[(r, r ^ x)]).sum()
}

/// `P M P` for a Hermitian Pauli `P`.
fn conjugate_by_pauli(p: &PauliString, m: &DMatrix<C64>) -> DMatrix<C64> {
    let dim = m.nrows();
    let (x, z) = dense_masks(p);
    let ny = (x & z).count_ones();
    let phases: Vec<C64> = (0..dim).map(|r| pauli_phase(1.0, ny, z, r)).collect();
    let mut out = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        for row in 0..dim {
            out[(row ^ x, col ^ x)] = phases[row] * m[(row, col)] * phases[col].conj();
        }
    }
    out
}

/// Applies `f` to every 2×2 block of `m` indexed by the value of qubit `j` on rows and
/// columns.
fn for_each_qubit_block(m: &mut DMatrix<C64>, n: usize, j: usize, mut f: impl FnMut(Matrix2<C64>) -> Matrix2<C64>) {
    let dim = 1usize << n;
    let bit = 1usize << bit_of(n, j);
    for r in (0..dim).filter(|r| r & bit == 0) {
        for col in (0..dim).filter(|col| col & bit == 0) {
            let a = Matrix2::new(m[(r, col)], m[(r, col | bit)], m[(r | bit, col)], m[(r | bit, col | bit)]);
            let b = f(a);
            m[(r, col)] = b[(0, 0)];
            m[(r, col | bit)] = b[(0, 1)];
            m[(r | bit, col)] = b[(1, 0)];
            m[(r | bit, col | bit)] = b[(1, 1)];
        }
    }
}

/// `N(A) = ½ Σ_Q tr(Q A) Σ_P T[P][Q] P` for a single-qubit transfer matrix.
fn apply_ptm_2x2(t: &Ptm, a: Matrix2<C64>) -> Matrix2<C64> {
    let paulis = single_qubit_paulis();
    let coords: Vec<C64> = paulis.iter().map(|q| (q * a).trace()).collect();
    let mut out = Matrix2::zeros();
    for (pi, pm) in paulis.iter().enumerate() {
        let coef: C64 = (0..4).map(|qi| coords[qi] * t.0[pi][qi]).sum::<C64>() * 0.5;
        out += pm * coef;
    }
    out
}

fn single_letter_matrix(l: Letter) -> Matrix2<C64> {
    single_qubit_paulis()[l.index()]
}

/// Pauli channel on qubits `qubits` of an `n`-qubit operator.
fn apply_pauli_channel_on(ch: &PauliChannel, qubits: &[usize], m: &DMatrix<C64>) -> DMatrix<C64> {
    let n = m.nrows().trailing_zeros() as usize;
    if let Some(factors) = ch.factors() {
        let mut out = m.clone();
        for (local, probs) in factors.iter().enumerate() {
            let paulis: Vec<(Matrix2<C64>, f64)> =
                Letter::ALL.iter().map(|&l| (single_letter_matrix(l), probs.probability(l))).collect();
            for_each_qubit_block(&mut out, n, qubits[local], |a| {
                paulis.iter().map(|(pm, w)| pm * a * pm * c(*w)).sum()
            });
        }
        out
    } else {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (q, prob) in ch.terms().expect("sparse channels list their terms") {
            let full = PauliString::embed(n, qubits, &q).expect("qubits fit the register");
            out += conjugate_by_pauli(&full, m) * c(prob);
        }
        out
    }
}

fn apply_product_channel(ch: &ProductChannel, m: &DMatrix<C64>) -> DMatrix<C64> {
    let n = ch.num_qubits();
    let mut out = m.clone();
    for (j, t) in ch.factors().iter().enumerate() {
        for_each_qubit_block(&mut out, n, j, |a| apply_ptm_2x2(t, a));
    }
    out
}

/// Channel applied to an arbitrary `2^n × 2^n` operator.
pub fn apply_channel_to_operator(ch: &Channel, m: &DMatrix<C64>) -> Result<DMatrix<C64>, ChannelError> {
    let n = ch.num_qubits();
    if m.nrows() != 1 << n || m.ncols() != 1 << n {
        return Err(ChannelError::QubitMismatch { expected: n, found: m.nrows().trailing_zeros() as usize });
    }
    Ok(match ch {
        Channel::Pauli(p) => apply_pauli_channel_on(p, &(0..n).collect::<Vec<_>>(), m),
        Channel::Product(p) => apply_product_channel(p, m),
    })
}

fn gate_2x2(kind: GateKind) -> Matrix2<C64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match kind {
        GateKind::H => Matrix2::new(c(s), c(s), c(s), c(-s)),
        GateKind::S => Matrix2::new(c(1.0), c(0.0), c(0.0), C64::new(0.0, 1.0)),
        GateKind::Cnot => unreachable!("two-qubit gate"),
    }
}

/// `U M U†`.
fn apply_gate_to_operator(g: &Gate, n: usize, m: &DMatrix<C64>) -> DMatrix<C64> {
    match g.kind() {
        GateKind::Cnot => {
            let cb = 1usize << bit_of(n, g.qubits()[0]);
            let tb = 1usize << bit_of(n, g.qubits()[1]);
            let perm = |r: usize| if r & cb != 0 { r ^ tb } else { r };
            let dim = 1usize << n;
            let mut out = DMatrix::zeros(dim, dim);
            for col in 0..dim {
                for row in 0..dim {
                    out[(perm(row), perm(col))] = m[(row, col)];
                }
            }
            out
        }
        kind => {
            let u = gate_2x2(kind);
            let ud = u.adjoint();
            let mut out = m.clone();
            for_each_qubit_block(&mut out, n, g.qubits()[0], |a| u * a * ud);
            out
        }
    }
}

/// Full unitary of a gate on `n` qubits.
pub fn gate_unitary(g: &Gate, n: usize) -> DMatrix<C64> {
    let dim = 1usize << n;
    let mut u = DMatrix::zeros(dim, dim);
    match g.kind() {
        GateKind::Cnot => {
            let cb = 1usize << bit_of(n, g.qubits()[0]);
            let tb = 1usize << bit_of(n, g.qubits()[1]);
            for r in 0..dim {
                let out = if r & cb != 0 { r ^ tb } else { r };
                u[(out, r)] = c(1.0);
            }
        }
        kind => {
            let local = gate_2x2(kind);
            let bit = 1usize << bit_of(n, g.qubits()[0]);
            for r in 0..dim {
                let a = (r & bit != 0) as usize;
                let base = r & !bit;
                for b in 0..2 {
                    u[(base | if b == 1 { bit } else { 0 }, r)] = local[(b, a)];
                }
            }
        }
    }
    u
}

/// Largest eigenvalue magnitude of a Hermitian matrix.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    m.clone().symmetric_eigenvalues().iter().fold(0.0, |a: f64, v| a.max(v.abs()))
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("{n} qubits exceeds the dense cap of {cap}")]
    TooManyQubits { n: usize, cap: usize },
    #[error("matrix is {rows}x{cols}, not a square power of two")]
    BadShape { rows: usize, cols: usize },
    #[error("state is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("state trace is {0}, expected 1")]
    BadTrace(f64),
    #[error("state has negative eigenvalue {0:e}")]
    NotPositive(f64),
    #[error("qubit count mismatch: expected {expected}, found {found}")]
    QubitMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// A density matrix on at most [`STATE_QUBIT_CAP`] qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n: usize,
    rho: DMatrix<C64>,
}

impl DenseState {
    /// Validates Hermiticity, unit trace and positivity within `1e-10`.
    pub fn new(rho: DMatrix<C64>) -> Result<Self, OracleError> {
        let (rows, cols) = rho.shape();
        if rows != cols || !rows.is_power_of_two() {
            return Err(OracleError::BadShape { rows, cols });
        }
        let n = rows.trailing_zeros() as usize;
        if n > STATE_QUBIT_CAP {
            return Err(OracleError::TooManyQubits { n, cap: STATE_QUBIT_CAP });
        }
        let dev = (&rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > STATE_TOL {
            return Err(OracleError::NotHermitian(dev));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(OracleError::BadTrace(tr.re));
        }
        let min = rho.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min < -STATE_TOL {
            return Err(OracleError::NotPositive(min));
        }
        Ok(Self { n, rho })
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) nonzero vector.
    pub fn from_pure(psi: &DVector<C64>) -> Result<Self, OracleError> {
        let dim = psi.len();
        if !dim.is_power_of_two() {
            return Err(OracleError::BadShape { rows: dim, cols: 1 });
        }
        let n = dim.trailing_zeros() as usize;
        if n > STATE_QUBIT_CAP {
            return Err(OracleError::TooManyQubits { n, cap: STATE_QUBIT_CAP });
        }
        let psi = psi / C64::new(psi.norm(), 0.0);
        Ok(Self { n, rho: &psi * psi.adjoint() })
    }

    pub fn zero(n: usize) -> Result<Self, OracleError> {
        let mut psi = DVector::zeros(1 << n);
        psi[0] = c(1.0);
        Self::from_pure(&psi)
    }

    pub fn maximally_mixed(n: usize) -> Result<Self, OracleError> {
        if n > STATE_QUBIT_CAP {
            return Err(OracleError::TooManyQubits { n, cap: STATE_QUBIT_CAP });
        }
        let dim = 1usize << n;
        Ok(Self { n, rho: DMatrix::identity(dim, dim) * c(1.0 / dim as f64) })
    }

    /// Tensor product of single-qubit Pauli eigenstates.
    pub fn product_eigenstate(states: &[Eigenstate]) -> Result<Self, OracleError> {
        let mut rho = DMatrix::from_element(1, 1, c(1.0));
        for s in states {
            let r = s.bloch();
            let p = single_qubit_paulis();
            let local = (p[0] + p[1] * c(r[0]) + p[2] * c(r[1]) + p[3] * c(r[2])) * c(0.5);
            let local = DMatrix::from_iterator(2, 2, local.iter().copied());
            rho = rho.kronecker(&local);
        }
        Self::new(rho)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.rho * &self.rho).trace().re
    }

    /// `tr(P ρ)`, including the sign of `P`.
    pub fn pauli_expectation(&self, p: &PauliString) -> f64 {
        pauli_trace(p, &self.rho).re
    }

    pub fn expectation(&self, o: &Observable) -> f64 {
        o.terms().iter().map(|(p, a)| a * self.pauli_expectation(p)).sum()
    }

    pub fn apply_channel(&self, ch: &Channel) -> Result<Self, OracleError> {
        Ok(Self { n: self.n, rho: apply_channel_to_operator(ch, &self.rho)? })
    }

    pub fn apply_gate(&self, g: &Gate) -> Self {
        Self { n: self.n, rho: apply_gate_to_operator(g, self.n, &self.rho) }
    }

    /// Applies a Pauli channel to the listed qubits.
    pub fn apply_pauli_noise(&self, ch: &PauliChannel, qubits: &[usize]) -> Self {
        Self { n: self.n, rho: apply_pauli_channel_on(ch, qubits, &self.rho) }
    }

    /// Row-major `(re, im)` pairs.
    pub fn to_row_major_pairs(&self) -> Vec<(f64, f64)> {
        let dim = self.rho.nrows();
        (0..dim).flat_map(|r| (0..dim).map(move |col| (r, col))).map(|(r, col)| (self.rho[(r, col)].re, self.rho[(r, col)].im)).collect()
    }
}

impl StateSampler for DenseState {
    fn num_qubits(&self) -> usize {
        self.n
    }

    fn pauli_expectation(&self, p: &PauliString) -> f64 {
        DenseState::pauli_expectation(self, p)
    }
}

/// `|ψ⟩⟨ψ|` with `ψ` a normalized vector of i.i.d. complex Gaussians.
pub fn haar_random_state(n: usize, seed: u64) -> Result<DenseState, OracleError> {
    if n > STATE_QUBIT_CAP {
        return Err(OracleError::TooManyQubits { n, cap: STATE_QUBIT_CAP });
    }
    let mut rng = stream_rng(derive_seed(seed, tags::HAAR), 0);
    let psi = DVector::from_fn(1 << n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    DenseState::from_pure(&psi)
}

/// Gates only.
pub fn simulate_ideal_circuit(circuit: &CliffordCircuit, rho: &DenseState) -> Result<DenseState, OracleError> {
    check_register(circuit.num_qubits(), rho.num_qubits())?;
    Ok(circuit.gates().iter().fold(rho.clone(), |s, g| s.apply_gate(g)))
}

/// Each gate followed by the noise configured for its kind.
pub fn simulate_noisy_circuit(circuit: &CliffordCircuit, rho: &DenseState) -> Result<DenseState, OracleError> {
    check_register(circuit.num_qubits(), rho.num_qubits())?;
    let mut s = rho.clone();
    for g in circuit.gates() {
        s = s.apply_gate(g);
        if let Some(noise) = circuit.noise(g.kind()) {
            s = s.apply_pauli_noise(noise, g.qubits());
        }
    }
    Ok(s)
}

fn check_register(expected: usize, found: usize) -> Result<(), OracleError> {
    if expected != found {
        return Err(OracleError::QubitMismatch { expected, found });
    }
    Ok(())
}

fn check_enumeration(n: usize) -> Result<(), OracleError> {
    if n > ENUMERATION_QUBIT_CAP {
        return Err(OracleError::TooManyQubits { n, cap: ENUMERATION_QUBIT_CAP });
    }
    Ok(())
}

/// `λ_P = 2^{-n} tr(P E(P))` for every `P` with weight at most `k`.
pub fn brute_force_eigenvalues(ch: &Channel, k: usize) -> Result<Vec<(PauliString, f64)>, OracleError> {
    let n = ch.num_qubits();
    check_enumeration(n)?;
    let scale = 1.0 / (1u64 << n) as f64;
    enumerate_low_weight(n, k)
        .map_err(ChannelError::from)?
        .into_iter()
        .map(|p| {
            let out = apply_channel_to_operator(ch, &pauli_matrix(&p))?;
            Ok((p, pauli_trace(&p, &out).re * scale))
        })
        .collect()
}

/// `M[P][Q] = 2^{-n} tr(E(P) Q)` on the weight-`≤ k` basis.
pub fn brute_force_transfer(ch: &Channel, k: usize) -> Result<TransferMatrix, OracleError> {
    let n = ch.num_qubits();
    check_enumeration(n)?;
    let basis = enumerate_low_weight(n, k).map_err(ChannelError::from)?;
    let scale = 1.0 / (1u64 << n) as f64;
    let dim = basis.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (r, p) in basis.iter().enumerate() {
        let out = apply_channel_to_operator(ch, &pauli_matrix(p))?;
        for (col, q) in basis.iter().enumerate() {
            m[(r, col)] = pauli_trace(q, &out).re * scale;
        }
    }
    Ok(TransferMatrix::new(basis, m)?)
}

fn eigenstate_2x2(s: Eigenstate) -> Matrix2<C64> {
    let p = single_qubit_paulis();
    let r = s.bloch();
    (p[0] + p[1] * c(r[0]) + p[2] * c(r[1]) + p[3] * c(r[2])) * c(0.5)
}

/// Output of the channel on a product eigenstate as a mixture of product operators.
fn product_outputs(ch: &Channel, input: &[Eigenstate]) -> Vec<(f64, Vec<Matrix2<C64>>)> {
    let local: Vec<Matrix2<C64>> = input.iter().map(|s| eigenstate_2x2(*s)).collect();
    match ch {
        Channel::Product(pc) => {
            vec![(1.0, local.iter().zip(pc.factors()).map(|(a, t)| apply_ptm_2x2(t, *a)).collect())]
        }
        Channel::Pauli(pc) => pc
            .terms()
            .expect("enumeration cap checked by caller")
            .into_iter()
            .map(|(q, prob)| {
                let out = local
                    .iter()
                    .enumerate()
                    .map(|(j, a)| {
                        let m = single_letter_matrix(q.letter(j));
                        m * a * m
                    })
                    .collect();
                (prob, out)
            })
            .collect(),
    }
}

/// Exact mean of the single-record value `Π_j tr(Q_j(3|t_j⟩⟨t_j| − I)) · tr(P_j ρ_{s_j})`,
/// summed over every input eigenstate, channel branch, measurement basis and outcome with
/// its probability. For `P = Q` this is the quantity whose mean is `3^{-|P|} λ_P`.
pub fn exact_estimator_expectation(ch: &Channel, p: &PauliString, q: &PauliString) -> Result<f64, OracleError> {
    let n = ch.num_qubits();
    check_register(n, p.num_qubits())?;
    check_register(n, q.num_qubits())?;
    if n > 3 {
        return Err(OracleError::TooManyQubits { n, cap: 3 });
    }
    let paulis = single_qubit_paulis();
    let n_inputs = 6usize.pow(n as u32);
    let n_records = 6usize.pow(n as u32); // basis and outcome per qubit
    let mut total = 0.0;
    for s_idx in 0..n_inputs {
        let input: Vec<Eigenstate> = (0..n).map(|j| Eigenstate::from_index(s_idx / 6usize.pow(j as u32) % 6)).collect();
        let rho_s: Vec<Matrix2<C64>> = input.iter().map(|s| eigenstate_2x2(*s)).collect();
        let input_factor: f64 =
            (0..n).map(|j| (paulis[p.letter(j).index()] * rho_s[j]).trace().re).product::<f64>() * p.sign().value();
        if input_factor == 0.0 {
            continue;
        }
        for (w, out) in product_outputs(ch, &input) {
            for t_idx in 0..n_records {
                let measured: Vec<Eigenstate> =
                    (0..n).map(|j| Eigenstate::from_index(t_idx / 6usize.pow(j as u32) % 6)).collect();
                let mut prob = 1.0 / 3f64.powi(n as i32);
                let mut value = input_factor;
                for j in 0..n {
                    let proj = eigenstate_2x2(measured[j]);
                    prob *= (proj * out[j]).trace().re;
                    let snapshot = proj * c(3.0) - Matrix2::identity();
                    value *= (paulis[q.letter(j).index()] * snapshot).trace().re;
                }
                total += w * prob * value;
            }
        }
    }
    Ok(total / n_inputs as f64)
}

/// Post-channel outcome distribution of a product eigenstate measured in `bases`, from the
/// dense output state. Outcome index bit `j` set means qubit `j` returned `−1`.
pub fn dense_outcome_distribution(ch: &Channel, input: &[Eigenstate], bases: &[Axis]) -> Result<Vec<f64>, OracleError> {
    let rho = DenseState::product_eigenstate(input)?.apply_channel(ch)?;
    let n = input.len();
    let mut probs = vec![0.0; 1 << n];
    for (o, slot) in probs.iter_mut().enumerate() {
        let proj: Vec<Eigenstate> = bases
            .iter()
            .enumerate()
            .map(|(j, b)| Eigenstate::new(*b, crate::Sign::from_negative(o >> j & 1 == 1)))
            .collect();
        let proj = DenseState::product_eigenstate(&proj)?;
        *slot = (proj.matrix() * rho.matrix()).trace().re;
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{QubitPauliProbs, Validation};

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn pauli_matrices_follow_tensor_order() {
        let xz = pauli_matrix(&p("XZ"));
        let expected = DMatrix::from_iterator(2, 2, single_qubit_paulis()[1].iter().copied())
            .kronecker(&DMatrix::from_iterator(2, 2, single_qubit_paulis()[3].iter().copied()));
        assert!((xz - expected).norm() < 1e-15);
        let m = pauli_matrix(&p("-YX"));
        assert!((pauli_trace(&p("YX"), &m).re + 4.0).abs() < 1e-12);
    }

    #[test]
    fn haar_state_properties() {
        let s = haar_random_state(3, 17).unwrap();
        assert!((s.trace() - 1.0).abs() < 1e-12);
        assert!((s.purity() - 1.0).abs() < 1e-12);
        assert_eq!(s, haar_random_state(3, 17).unwrap());
        assert_ne!(s, haar_random_state(3, 18).unwrap());
        assert!(DenseState::new(s.matrix().clone()).is_ok());
    }

    #[test]
    fn haar_mean_z_is_zero() {
        let z = p("Z");
        let mean: f64 = (0..10_000).map(|i| haar_random_state(1, i).unwrap().pauli_expectation(&z)).sum::<f64>() / 1e4;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn channel_application_examples() {
        let rho = haar_random_state(2, 1).unwrap();
        let id: Channel = PauliChannel::identity(2).unwrap().into();
        assert!((rho.apply_channel(&id).unwrap().matrix() - rho.matrix()).norm() < 1e-15);
        let dep: Channel = PauliChannel::completely_depolarizing(2).unwrap().into();
        let mixed = DenseState::maximally_mixed(2).unwrap();
        assert!((rho.apply_channel(&dep).unwrap().matrix() - mixed.matrix()).norm() < 1e-14);
        let t1: Channel = PauliChannel::reference().into();
        let out = DenseState::zero(2).unwrap().apply_channel(&t1).unwrap();
        assert!((out.pauli_expectation(&p("ZI")) - 0.60).abs() < 1e-12);
        let off_diag: f64 = (0..4).flat_map(|r| (0..4).map(move |c| (r, c))).filter(|(r, c)| r != c).map(|(r, c)| out.matrix()[(r, c)].norm()).sum();
        assert!(off_diag < 1e-15);
    }

    #[test]
    fn channels_preserve_state_properties() {
        let chans: Vec<Channel> = vec![
            PauliChannel::reference().into(),
            ProductChannel::new(vec![Ptm::amplitude_damping(0.3), Ptm::depolarizing(0.6)], Validation::Strict).unwrap().into(),
        ];
        for ch in chans {
            let out = haar_random_state(2, 5).unwrap().apply_channel(&ch).unwrap();
            assert!((out.trace() - 1.0).abs() < 1e-12);
            assert!(DenseState::new(out.matrix().clone()).is_ok());
        }
    }

    #[test]
    fn eigenvalue_paths_agree() {
        let ch = PauliChannel::reference();
        for (q, l) in brute_force_eigenvalues(&ch.clone().into(), 2).unwrap() {
            assert!((l - ch.exact_eigenvalue(&q)).abs() < 1e-12, "{q}");
        }
        let id: Channel = PauliChannel::identity(2).unwrap().into();
        assert!(brute_force_eigenvalues(&id, 2).unwrap().iter().all(|(_, l)| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn transfer_paths_agree() {
        let ch: Channel =
            ProductChannel::new(vec![Ptm::amplitude_damping(0.2), Ptm::depolarizing(0.8)], Validation::Strict).unwrap().into();
        let a = brute_force_transfer(&ch, 2).unwrap();
        let b = ch.exact_transfer_matrix(2).unwrap();
        assert!((a.entries() - b.entries()).abs().max() < 1e-12);
        let id: Channel = PauliChannel::identity(2).unwrap().into();
        assert!((brute_force_transfer(&id, 2).unwrap().entries() - DMatrix::identity(16, 16)).abs().max() < 1e-15);
    }

    #[test]
    fn hadamard_on_zero() {
        let c = CliffordCircuit::new(2, vec![Gate::h(0)], Default::default()).unwrap();
        let out = simulate_ideal_circuit(&c, &DenseState::zero(2).unwrap()).unwrap();
        assert!((out.pauli_expectation(&p("XI")) - 1.0).abs() < 1e-12);
        assert!((out.pauli_expectation(&p("IZ")) - 1.0).abs() < 1e-12);
        let u = gate_unitary(&Gate::h(0), 2);
        let direct = &u * DenseState::zero(2).unwrap().matrix() * u.adjoint();
        assert!((direct - out.matrix()).norm() < 1e-12);
    }

    #[test]
    fn single_qubit_channel_matches_oracle() {
        let ch: Channel = PauliChannel::product(vec![QubitPauliProbs::new(0.75, 0.10, 0.10, 0.05)]).unwrap().into();
        let v = exact_estimator_expectation(&ch, &p("Z"), &p("Z")).unwrap();
        assert!((v - 0.20).abs() < 1e-12, "{v}");
    }

    #[test]
    fn dense_outcomes_match_analytic() {
        use crate::shadow::ShadowSource;
        let ch: Channel =
            ProductChannel::new(vec![Ptm::amplitude_damping(0.36), Ptm::depolarizing(0.5)], Validation::Strict).unwrap().into();
        let input = [Eigenstate::new(Axis::Z, crate::Sign::Minus), Eigenstate::new(Axis::Y, crate::Sign::Plus)];
        for bases in [[Axis::Z, Axis::Y], [Axis::X, Axis::Z]] {
            let a = dense_outcome_distribution(&ch, &input, &bases).unwrap();
            let b = ch.outcome_distribution(&input, &bases);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
