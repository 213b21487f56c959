//! Signed Pauli conjugation through `H`, `S`, `CNOT`, and gate-wise noise mitigation.
//!
//! Every gate is followed by a Pauli channel that depends only on the gate kind. For a Pauli
//! `P` measured at the end of the circuit, pulling `P` backwards through the gates picks up one
//! noise eigenvalue per gate:
//!
//! `tr(P C̃(ρ)) = Π_i λ_{i, chain_i(P)} · tr(P C(ρ))`
//!
//! so dividing each coefficient of an observable by that product undoes the noise.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelConfig, ChannelError, PauliChannel};
use crate::observable::Observable;
use crate::pauli::{PauliError, PauliString, Sign};
use crate::recovery::{BackwardObservable, RecoveryError};
use crate::shadow::EigenvalueEstimates;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("unknown gate {0:?}; expected H, S or CNOT")]
    UnknownGate(String),
    #[error("gate {gate} acts on {expected} qubit(s), got {found}")]
    Arity { gate: GateKind, expected: usize, found: usize },
    #[error("gate {gate} qubit {qubit} out of range for {n} qubits")]
    QubitOutOfRange { gate: GateKind, qubit: usize, n: usize },
    #[error("CNOT control and target are both qubit {0}")]
    SameQubit(usize),
    #[error("noise for {gate} acts on {found} qubit(s), expected {expected}")]
    NoiseArity { gate: GateKind, expected: usize, found: usize },
    #[error("gate index {index} out of range for a circuit of {len} gates")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid circuit file: {0}")]
    Config(String),
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    H,
    S,
    #[serde(rename = "CNOT")]
    Cnot,
}

impl GateKind {
    pub const ALL: [GateKind; 3] = [GateKind::H, GateKind::S, GateKind::Cnot];

    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::S => 1,
            GateKind::Cnot => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::Cnot => "CNOT",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "H" => Ok(GateKind::H),
            "S" => Ok(GateKind::S),
            "CNOT" | "CX" => Ok(GateKind::Cnot),
            _ => Err(CircuitError::UnknownGate(s.to_string())),
        }
    }
}

/// A gate on specific qubits. For `CNOT` the qubits are `(control, target)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    kind: GateKind,
    qubits: [usize; 2],
}

impl Gate {
    pub fn h(q: usize) -> Self {
        Self { kind: GateKind::H, qubits: [q, q] }
    }

    pub fn s(q: usize) -> Self {
        Self { kind: GateKind::S, qubits: [q, q] }
    }

    /// Panics if `control == target`; use [`Gate::new`] for unchecked input.
    pub fn cnot(control: usize, target: usize) -> Self {
        assert_ne!(control, target, "CNOT control and target must differ");
        Self { kind: GateKind::Cnot, qubits: [control, target] }
    }

    pub fn new(kind: GateKind, qubits: &[usize]) -> Result<Self, CircuitError> {
        if qubits.len() != kind.arity() {
            return Err(CircuitError::Arity { gate: kind, expected: kind.arity(), found: qubits.len() });
        }
        if kind == GateKind::Cnot && qubits[0] == qubits[1] {
            return Err(CircuitError::SameQubit(qubits[0]));
        }
        let second = if kind.arity() == 2 { qubits[1] } else { qubits[0] };
        Ok(Self { kind, qubits: [qubits[0], second] })
    }

    /// The gate on qubits `0` (and `1`) of a register of its own size.
    pub fn local(kind: GateKind) -> Self {
        match kind {
            GateKind::H => Gate::h(0),
            GateKind::S => Gate::s(0),
            GateKind::Cnot => Gate::cnot(0, 1),
        }
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits[..self.kind.arity()]
    }

    fn check(&self, n: usize) -> Result<(), CircuitError> {
        for &q in self.qubits() {
            if q >= n {
                return Err(CircuitError::QubitOutOfRange { gate: self.kind, qubit: q, n });
            }
        }
        Ok(())
    }

    /// `U† P U`, with the sign tracked.
    pub fn conjugate_pauli(&self, p: &PauliString) -> Result<PauliString, CircuitError> {
        self.check(p.num_qubits())?;
        let (mut x, mut z) = (p.x_bits(), p.z_bits());
        let bit = |v: u64, q: usize| (v >> q) & 1 == 1;
        let flip = match self.kind {
            GateKind::H => {
                let q = self.qubits[0];
                let (xq, zq) = (bit(x, q), bit(z, q));
                x = (x & !(1 << q)) | ((zq as u64) << q);
                z = (z & !(1 << q)) | ((xq as u64) << q);
                xq && zq
            }
            GateKind::S => {
                // S†XS = −Y, S†YS = X.
                let q = self.qubits[0];
                let (xq, zq) = (bit(x, q), bit(z, q));
                z ^= (xq as u64) << q;
                xq && !zq
            }
            GateKind::Cnot => {
                let [c, t] = self.qubits;
                let (xc, zc, xt, zt) = (bit(x, c), bit(z, c), bit(x, t), bit(z, t));
                x ^= (xc as u64) << t;
                z ^= (zt as u64) << c;
                xc && zt && (xt == zc)
            }
        };
        let sign = if flip { p.sign().flipped() } else { p.sign() };
        Ok(PauliString::from_bits(p.num_qubits(), x, z, sign)?)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind.arity() {
            1 => write!(f, "{}({})", self.kind, self.qubits[0]),
            _ => write!(f, "{}({},{})", self.kind, self.qubits[0], self.qubits[1]),
        }
    }
}

/// Gate sequence with gate-kind-dependent Pauli noise after each gate.
#[derive(Clone, Debug, PartialEq)]
pub struct CliffordCircuit {
    n: usize,
    gates: Vec<Gate>,
    noise: BTreeMap<GateKind, PauliChannel>,
}

impl CliffordCircuit {
    /// Kinds missing from `noise` are noiseless.
    pub fn new(n: usize, gates: Vec<Gate>, noise: BTreeMap<GateKind, PauliChannel>) -> Result<Self, CircuitError> {
        if n == 0 || n > crate::pauli::MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n).into());
        }
        for g in &gates {
            g.check(n)?;
        }
        for (kind, ch) in &noise {
            if ch.num_qubits() != kind.arity() {
                return Err(CircuitError::NoiseArity { gate: *kind, expected: kind.arity(), found: ch.num_qubits() });
            }
        }
        Ok(Self { n, gates, noise })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn noise(&self, kind: GateKind) -> Option<&PauliChannel> {
        self.noise.get(&kind)
    }

    /// Signed Paulis obtained by pulling `p` backwards through gates `upto−1, …, 0`.
    /// Entry `0` is `p` itself; entry `i` sits just before gate `upto − i`.
    pub fn conjugate_through_circuit(&self, p: &PauliString, upto: usize) -> Result<Vec<PauliString>, CircuitError> {
        if upto > self.gates.len() {
            return Err(CircuitError::IndexOutOfRange { index: upto, len: self.gates.len() });
        }
        if p.num_qubits() != self.n {
            return Err(PauliError::QubitMismatch { left: self.n, right: p.num_qubits() }.into());
        }
        let mut chain = Vec::with_capacity(upto + 1);
        chain.push(*p);
        for g in self.gates[..upto].iter().rev() {
            let next = g.conjugate_pauli(chain.last().expect("non-empty"))?;
            chain.push(next);
        }
        Ok(chain)
    }

    /// For each gate `i`, the Pauli seen by its noise channel (restricted to the gate's
    /// qubits and unsigned), ordered from the first gate to the last.
    pub fn noise_lookups(&self, p: &PauliString) -> Result<Vec<(GateKind, PauliString)>, CircuitError> {
        let chain = self.conjugate_through_circuit(p, self.gates.len())?;
        let d = self.gates.len();
        self.gates
            .iter()
            .enumerate()
            .map(|(i, g)| Ok((g.kind, chain[d - 1 - i].restrict(g.qubits())?.unsigned())))
            .collect()
    }

    /// Exact eigenvalues of every configured noise channel.
    pub fn exact_gate_estimates(&self) -> Result<BTreeMap<GateKind, EigenvalueEstimates>, CircuitError> {
        GateKind::ALL
            .iter()
            .map(|&kind| {
                let ch = match self.noise.get(&kind) {
                    Some(c) => c.clone(),
                    None => PauliChannel::identity(kind.arity())?,
                };
                let est = EigenvalueEstimates::exact(&ch, kind.arity()).map_err(|e| CircuitError::Config(e.to_string()))?;
                Ok((kind, est))
            })
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self, CircuitError> {
        let file: CircuitFile = serde_json::from_str(text)
            .map_err(|e| CircuitError::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        let gates = file
            .gates
            .iter()
            .map(|g| Gate::new(g.g.parse()?, &g.q))
            .collect::<Result<Vec<_>, CircuitError>>()?;
        let noise = file
            .noise
            .iter()
            .map(|(k, cfg)| Ok((k.parse::<GateKind>()?, cfg.build_pauli()?)))
            .collect::<Result<BTreeMap<_, _>, CircuitError>>()?;
        Self::new(file.n, gates, noise)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitFile {
    n: usize,
    gates: Vec<GateEntry>,
    #[serde(default)]
    noise: BTreeMap<String, ChannelConfig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GateEntry {
    g: String,
    q: Vec<usize>,
}

/// `ᾱ_P = α_P / Π_i λ̂_{i, chain_i(P)}`.
///
/// Each factor is clamped into `[−1, 1]`; any factor with magnitude below `floor` is an error.
pub fn mitigation_coefficients(
    circuit: &CliffordCircuit,
    estimates: &BTreeMap<GateKind, EigenvalueEstimates>,
    observable: &Observable,
    floor: f64,
) -> Result<BackwardObservable, RecoveryError> {
    if !(floor > 0.0) {
        return Err(RecoveryError::InvalidFloor(floor));
    }
    if observable.num_qubits() != circuit.num_qubits() {
        return Err(RecoveryError::QubitMismatch { expected: circuit.num_qubits(), found: observable.num_qubits() });
    }
    let mut terms = BTreeMap::new();
    let mut min_abs = f64::INFINITY;
    for (p, alpha) in observable.terms() {
        let mut product = 1.0;
        for (kind, local) in circuit.noise_lookups(p).map_err(|e| RecoveryError::Circuit(e.to_string()))? {
            if local.is_identity() {
                continue;
            }
            let est = estimates.get(&kind).ok_or_else(|| RecoveryError::MissingEstimate(format!("{kind}: {local}")))?;
            let lambda = est.get(&local).ok_or_else(|| RecoveryError::MissingEstimate(format!("{kind}: {local}")))?;
            if lambda.abs() < floor {
                return Err(RecoveryError::BelowFloor { pauli: format!("{kind}: {local}"), value: lambda, floor });
            }
            let clamped = lambda.clamp(-1.0, 1.0);
            min_abs = min_abs.min(clamped.abs());
            product *= clamped;
        }
        terms.insert(*p, alpha / product);
    }
    Ok(BackwardObservable::new(
        observable.num_qubits(),
        terms,
        format!("gate-wise eigenvalues over {} gates", circuit.gates().len()),
        if min_abs.is_finite() { Some(min_abs) } else { None },
        None,
    ))
}

/// Sign of `U† P U` relative to the unsigned result, for convenience in tests and reports.
pub fn conjugation_sign(gate: &Gate, p: &PauliString) -> Result<Sign, CircuitError> {
    let out = gate.conjugate_pauli(&p.unsigned())?;
    Ok(out.sign())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::QubitPauliProbs;
    use crate::oracle::{gate_unitary, pauli_matrix, C64};
    use nalgebra::DMatrix;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_qubit_tables() {
        let h = Gate::h(0);
        assert_eq!(h.conjugate_pauli(&p("Z")).unwrap(), p("X"));
        assert_eq!(h.conjugate_pauli(&p("X")).unwrap(), p("Z"));
        assert_eq!(h.conjugate_pauli(&p("Y")).unwrap(), p("-Y"));
        let s = Gate::s(0);
        assert_eq!(s.conjugate_pauli(&p("X")).unwrap(), p("-Y"));
        assert_eq!(s.conjugate_pauli(&p("Y")).unwrap(), p("X"));
        assert_eq!(s.conjugate_pauli(&p("Z")).unwrap(), p("Z"));
        let c = Gate::cnot(0, 1);
        assert_eq!(c.conjugate_pauli(&p("XI")).unwrap(), p("XX"));
        assert_eq!(c.conjugate_pauli(&p("IZ")).unwrap(), p("ZZ"));
        assert_eq!(c.conjugate_pauli(&p("IX")).unwrap(), p("IX"));
        assert_eq!(c.conjugate_pauli(&p("ZI")).unwrap(), p("ZI"));
    }

    fn dense_conjugate(g: &Gate, p: &PauliString) -> DMatrix<C64> {
        let u = gate_unitary(g, p.num_qubits());
        u.adjoint() * pauli_matrix(p) * u
    }

    #[test]
    fn tables_match_dense_matrices() {
        for (g, n) in [(Gate::h(0), 1), (Gate::s(0), 1), (Gate::cnot(0, 1), 2), (Gate::cnot(1, 0), 2), (Gate::s(1), 2)] {
            for q in crate::pauli::enumerate_low_weight(n, n).unwrap() {
                let expected = dense_conjugate(&g, &q);
                let got = pauli_matrix(&g.conjugate_pauli(&q).unwrap());
                assert!((expected - got).norm() < 1e-12, "{g} on {q}");
            }
        }
    }

    #[test]
    fn involution_and_order() {
        for q in crate::pauli::enumerate_low_weight(2, 2).unwrap() {
            for g in [Gate::h(0), Gate::cnot(0, 1), Gate::cnot(1, 0)] {
                let twice = g.conjugate_pauli(&g.conjugate_pauli(&q).unwrap()).unwrap();
                assert_eq!(twice, q);
            }
        }
        let s = Gate::s(0);
        let mut x = p("X");
        for _ in 0..2 {
            x = s.conjugate_pauli(&x).unwrap();
        }
        assert_eq!(x, p("-X"));
        for _ in 0..2 {
            x = s.conjugate_pauli(&x).unwrap();
        }
        assert_eq!(x, p("X"));
    }

    #[test]
    fn backward_chain() {
        let c = CliffordCircuit::new(2, vec![Gate::h(0), Gate::cnot(0, 1)], BTreeMap::new()).unwrap();
        let chain = c.conjugate_through_circuit(&p("ZI"), 2).unwrap();
        assert_eq!(chain, vec![p("ZI"), p("ZI"), p("XI")]);
        let empty = CliffordCircuit::new(2, vec![], BTreeMap::new()).unwrap();
        assert_eq!(empty.conjugate_through_circuit(&p("ZI"), 0).unwrap(), vec![p("ZI")]);
        assert!(c.conjugate_through_circuit(&p("ZI"), 3).is_err());
    }

    #[test]
    fn validation() {
        assert!(matches!(Gate::new(GateKind::Cnot, &[1, 1]), Err(CircuitError::SameQubit(1))));
        assert!(Gate::new(GateKind::H, &[0, 1]).is_err());
        assert!(CliffordCircuit::new(2, vec![Gate::h(2)], BTreeMap::new()).is_err());
        let mut noise = BTreeMap::new();
        noise.insert(GateKind::Cnot, PauliChannel::product(vec![QubitPauliProbs::IDENTITY]).unwrap());
        assert!(matches!(CliffordCircuit::new(2, vec![], noise), Err(CircuitError::NoiseArity { .. })));
    }

    #[test]
    fn circuit_json() {
        let text = r#"{"n":2, "gates":[{"g":"H","q":[0]},{"g":"CNOT","q":[0,1]}],
            "noise":{"H":{"kind":"pauli-product","qubits":[{"pI":0.75,"pX":0.10,"pY":0.10,"pZ":0.05}]}}}"#;
        let c = CliffordCircuit::from_json(text).unwrap();
        assert_eq!(c.gates(), &[Gate::h(0), Gate::cnot(0, 1)]);
        assert!(c.noise(GateKind::H).is_some());
        assert!(c.noise(GateKind::Cnot).is_none());
        assert!(CliffordCircuit::from_json(r#"{"n":2,"gates":[{"g":"T","q":[0]}]}"#).is_err());
    }

    #[test]
    fn noiseless_mitigation_is_identity() {
        let c = CliffordCircuit::new(2, vec![Gate::h(0), Gate::s(1), Gate::cnot(0, 1)], BTreeMap::new()).unwrap();
        let est = c.exact_gate_estimates().unwrap();
        let o = Observable::from_terms(2, [(p("ZZ"), 0.5), (p("XI"), -0.25)]).unwrap();
        let b = mitigation_coefficients(&c, &est, &o, 0.05).unwrap();
        for (q, a) in o.terms() {
            assert_eq!(b.coefficient(q), *a);
        }
    }
}
