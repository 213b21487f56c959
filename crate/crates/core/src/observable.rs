//! Sparse Pauli-decomposed observables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::oracle::{pauli_matrix, pauli_trace, spectral_norm, C64, STATE_QUBIT_CAP};
use crate::pauli::{enumerate_low_weight, PauliError, PauliString};

/// Coefficients smaller than this are dropped by [`Observable::pauli_decompose`].
pub const DROP_TOLERANCE: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ObservableError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Pauli(#[from] PauliError),
    #[error("matrix dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NonHermitian(f64),
    #[error("{n} qubits exceeds the dense limit of {cap}")]
    TooManyQubits { n: usize, cap: usize },
    #[error("observable has no nonzero terms")]
    Zero,
    #[error("coefficient for {0} is not finite")]
    NotFinite(String),
    #[error("invalid Heisenberg parameters: {0}")]
    Heisenberg(String),
}

/// `O = Σ_P α_P P` over unsigned Pauli strings.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    n: usize,
    terms: BTreeMap<PauliString, f64>,
}

/// Locality, degree and Pauli norms of an observable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservableStats {
    /// Largest term weight.
    pub k: usize,
    /// Largest number of terms acting non-trivially on any single qubit.
    pub d: usize,
    pub norm1: f64,
    pub norm2: f64,
}

impl Observable {
    /// Signed inputs are folded into the coefficient; repeated Paulis are summed and exact
    /// zeros removed.
    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (PauliString, f64)>) -> Result<Self, ObservableError> {
        let mut map: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (p, c) in terms {
            if p.num_qubits() != n {
                return Err(PauliError::QubitMismatch { left: n, right: p.num_qubits() }.into());
            }
            if !c.is_finite() {
                return Err(ObservableError::NotFinite(p.label()));
            }
            *map.entry(p.unsigned()).or_default() += c * p.sign().value();
        }
        map.retain(|_, c| *c != 0.0);
        Ok(Self { n, terms: map })
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

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn locality(&self) -> usize {
        self.terms.keys().map(|p| p.weight()).max().unwrap_or(0)
    }

    pub fn degree(&self) -> usize {
        (0..self.n)
            .map(|j| self.terms.keys().filter(|p| p.support_mask() >> j & 1 == 1).count())
            .max()
            .unwrap_or(0)
    }

    pub fn norm1(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.terms.values().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn stats(&self) -> ObservableStats {
        ObservableStats { k: self.locality(), d: self.degree(), norm1: self.norm1(), norm2: self.norm2() }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let terms = self.terms.iter().map(|(p, c)| (*p, c * factor)).filter(|(_, c)| *c != 0.0).collect();
        Self { n: self.n, terms }
    }

    /// Rescaled to spectral norm 1, using the dense matrix.
    pub fn normalized(&self) -> Result<Self, ObservableError> {
        let norm = spectral_norm(&self.to_dense()?);
        if norm == 0.0 {
            return Err(ObservableError::Zero);
        }
        Ok(self.scaled(1.0 / norm))
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>, ObservableError> {
        if self.n > STATE_QUBIT_CAP {
            return Err(ObservableError::TooManyQubits { n: self.n, cap: STATE_QUBIT_CAP });
        }
        let dim = 1usize << self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for (p, c) in &self.terms {
            m += pauli_matrix(p) * C64::new(*c, 0.0);
        }
        Ok(m)
    }

    /// `α_P = 2^{-n} tr(P H)` for every Pauli, dropping `|α_P| < 1e-12`.
    pub fn pauli_decompose(h: &DMatrix<C64>) -> Result<Self, ObservableError> {
        let dim = h.nrows();
        if dim != h.ncols() || !dim.is_power_of_two() || dim < 2 {
            return Err(ObservableError::NotPowerOfTwo(dim));
        }
        let n = dim.trailing_zeros() as usize;
        if n > crate::channel::FULL_ENUMERATION_CAP {
            return Err(ObservableError::TooManyQubits { n, cap: crate::channel::FULL_ENUMERATION_CAP });
        }
        let deviation = (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if deviation > HERMITIAN_TOL {
            return Err(ObservableError::NonHermitian(deviation));
        }
        let scale = 1.0 / dim as f64;
        let terms = enumerate_low_weight(n, n)?
            .into_iter()
            .map(|p| {
                let a = pauli_trace(&p, h).re * scale;
                (p, a)
            })
            .filter(|(_, a)| a.abs() >= DROP_TOLERANCE);
        Self::from_terms(n, terms)
    }

    /// Parses one `<label> <coefficient>` pair per line; blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self, ObservableError> {
        let mut terms = Vec::new();
        let mut n = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ObservableError::Parse { line: i + 1, message };
            let mut parts = line.split_whitespace();
            let (Some(label), Some(coef), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(format!("expected `<pauli> <coefficient>`, got {line:?}")));
            };
            let p: PauliString = label.parse().map_err(|e: PauliError| err(e.to_string()))?;
            let c: f64 = coef.parse().map_err(|_| err(format!("bad coefficient {coef:?}")))?;
            match n {
                None => n = Some(p.num_qubits()),
                Some(m) if m != p.num_qubits() => {
                    return Err(err(format!("term has {} qubits, expected {m}", p.num_qubits())))
                }
                _ => {}
            }
            terms.push((p, c));
        }
        let n = n.ok_or(ObservableError::Parse { line: 0, message: "no terms".into() })?;
        Self::from_terms(n, terms)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in &self.terms {
            writeln!(out, "{} {:e}", p.label(), c).expect("writing to a String");
        }
        out
    }
}

/// `C(k, d) = √(2·k!) / (√d · k^{k+2.5} · (2√6 + 4√3)^k)`, the constant relating the Pauli
/// 1-norm of a `k`-local degree-`d` observable to its spectral norm.
pub fn norm_constant(k: usize, d: usize) -> f64 {
    let kf = k as f64;
    let factorial: f64 = (1..=k).map(|i| i as f64).product();
    (2.0 * factorial).sqrt() / ((d as f64).sqrt() * kf.powf(kf + 2.5) * (2.0 * 6f64.sqrt() + 4.0 * 3f64.sqrt()).powi(k as i32))
}

/// Nearest-neighbour anisotropic Heisenberg chain with a longitudinal field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Heisenberg {
    pub n: usize,
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub h: f64,
    /// Put `h Z_j` on every qubit. Otherwise the field only appears on the qubits that
    /// start a bond, `0..n−1`.
    pub field_on_all: bool,
}

impl Heisenberg {
    /// `J_x = 0.27, J_y = 0.42, J_z = 0.76, h = 0.6`.
    pub fn reference(n: usize) -> Self {
        Self { n, jx: 0.27, jy: 0.42, jz: 0.76, h: 0.6, field_on_all: false }
    }

    /// `Σ_{j=0}^{n−2} (J_x X_j X_{j+1} + J_y Y_j Y_{j+1} + J_z Z_j Z_{j+1} + h Z_j)`.
    pub fn build(&self) -> Result<Observable, ObservableError> {
        if self.n < 2 {
            return Err(ObservableError::Heisenberg(format!("need at least 2 qubits, got {}", self.n)));
        }
        let n = self.n;
        let mut terms = Vec::new();
        let two = |j: usize, l: crate::Letter| -> Result<PauliString, PauliError> {
            let mut p = PauliString::identity(n)?;
            p.set_letter(j, l);
            p.set_letter(j + 1, l);
            Ok(p)
        };
        for j in 0..n - 1 {
            terms.push((two(j, crate::Letter::X)?, self.jx));
            terms.push((two(j, crate::Letter::Y)?, self.jy));
            terms.push((two(j, crate::Letter::Z)?, self.jz));
            terms.push((PauliString::single(n, j, crate::Letter::Z)?, self.h));
        }
        if self.field_on_all {
            terms.push((PauliString::single(n, n - 1, crate::Letter::Z)?, self.h));
        }
        Observable::from_terms(n, terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::haar_random_state;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn single_z_stats() {
        let o = Observable::from_terms(1, [(p("Z"), 1.0)]).unwrap();
        let s = o.stats();
        assert_eq!((s.k, s.d, s.norm1), (1, 1, 1.0));
        let dense = o.to_dense().unwrap();
        assert_eq!(Observable::pauli_decompose(&dense).unwrap(), o);
    }

    #[test]
    fn heisenberg_bond_stats() {
        let o = Heisenberg::reference(2).build().unwrap();
        assert_eq!(o.len(), 4);
        assert_eq!(o.coefficient(&p("XX")), 0.27);
        assert_eq!(o.coefficient(&p("ZI")), 0.6);
        assert_eq!(o.coefficient(&p("IZ")), 0.0);
        let s = o.stats();
        assert_eq!((s.k, s.d), (2, 4));
        let all = Heisenberg { field_on_all: true, ..Heisenberg::reference(3) }.build().unwrap();
        assert_eq!(all.coefficient(&p("IIZ")), 0.6);
        assert_eq!(all.degree(), 7);
    }

    #[test]
    fn decompose_round_trip() {
        let o = Heisenberg::reference(3).build().unwrap();
        let back = Observable::pauli_decompose(&o.to_dense().unwrap()).unwrap();
        for (q, c) in o.terms() {
            assert!((back.coefficient(q) - c).abs() < 1e-12);
        }
        assert_eq!(back.len(), o.len());
        // A random Hermitian matrix from a pure state plus its transpose-conjugate.
        let rho = haar_random_state(2, 9).unwrap();
        let h = rho.matrix() * C64::new(3.0, 0.0);
        let o = Observable::pauli_decompose(&h).unwrap();
        assert!((o.to_dense().unwrap() - h).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = DMatrix::<C64>::zeros(2, 2);
        m[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(Observable::pauli_decompose(&m), Err(ObservableError::NonHermitian(_))));
        assert!(matches!(Observable::pauli_decompose(&DMatrix::zeros(3, 3)), Err(ObservableError::NotPowerOfTwo(3))));
    }

    #[test]
    fn text_format() {
        let o = Observable::parse("XZI 0.27\n# comment\n\nIIZ -1.5\nXZI 0.03\n").unwrap();
        assert_eq!(o.num_qubits(), 3);
        assert!((o.coefficient(&p("XZI")) - 0.30).abs() < 1e-15);
        assert_eq!(Observable::parse(&o.to_text()).unwrap(), o);
        let e = Observable::parse("XZ 1\nXZI 2\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(Observable::parse("XQ 1").unwrap_err().to_string().contains("line 1"));
        assert!(Observable::parse("XZ one").is_err());
    }

    #[test]
    fn normalization() {
        let o = Heisenberg::reference(2).build().unwrap().normalized().unwrap();
        assert!((spectral_norm(&o.to_dense().unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_constant_values() {
        // k = 1: √2 / (√d · (2√6 + 4√3)).
        let expected = 2f64.sqrt() / (2.0 * 6f64.sqrt() + 4.0 * 3f64.sqrt());
        assert!((norm_constant(1, 1) - expected).abs() < 1e-15);
        assert!((norm_constant(1, 4) - expected / 2.0).abs() < 1e-15);
        let c = norm_constant(2, 4);
        assert!(c > 3.0e-4 && c < 3.3e-4, "{c}");
    }
}
