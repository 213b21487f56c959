//! Shadows of noisy Clifford gates and of state preparation / measurement noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::PauliChannel;
use crate::clifford::{Gate, GateKind};
use crate::pauli::{enumerate_low_weight, PauliString, Sign};
use crate::rng::{derive_seed, tags};

use super::estimate::{pow3, Accumulator, EigenvalueEstimates, Probe};
use super::source::{eigenstate_expectation, sample_record, ShadowSource};
use super::{Axis, Eigenstate, ShadowError, ShadowRecord};

/// An ideal gate `U` followed by a Pauli channel, on a register of the gate's own size.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSource {
    gate: Gate,
    noise: PauliChannel,
}

impl GateSource {
    pub fn new(kind: GateKind, noise: PauliChannel) -> Result<Self, ShadowError> {
        if noise.num_qubits() != kind.arity() {
            return Err(ShadowError::QubitMismatch { expected: kind.arity(), found: noise.num_qubits() });
        }
        Ok(Self { gate: Gate::local(kind), noise })
    }

    pub fn kind(&self) -> GateKind {
        self.gate.kind()
    }

    pub fn noise(&self) -> &PauliChannel {
        &self.noise
    }
}

impl ShadowSource for GateSource {
    fn num_qubits(&self) -> usize {
        self.noise.num_qubits()
    }

    /// `tr(Q N(U ρ_s U†)) = λ_Q tr(U† Q U ρ_s)`.
    fn output_expectation(&self, input: &[Eigenstate], q: &PauliString) -> f64 {
        let pulled = self.gate.conjugate_pauli(q).expect("gate fits its own register");
        self.noise.exact_eigenvalue(&q.unsigned()) * eigenstate_expectation(input, &pulled)
    }
}

/// Probes for `λ̂_P = 3^{|π(P)|} 3^{|P|} · mean(kernel(π(P), P))` with `π(P) = U† P U`
/// signed, for every non-identity `P` on the gate's qubits.
pub fn gate_probes(kind: GateKind) -> Result<(Vec<PauliString>, Vec<Probe>), ShadowError> {
    let gate = Gate::local(kind);
    let basis: Vec<PauliString> = enumerate_low_weight(kind.arity(), kind.arity())?.into_iter().skip(1).collect();
    let probes = basis
        .iter()
        .map(|p| {
            let pulled = gate.conjugate_pauli(p).map_err(|e| ShadowError::InvalidArgument(e.to_string()))?;
            Ok(Probe { input: pulled, output: *p, scale: pow3(pulled.weight() + p.weight()) })
        })
        .collect::<Result<Vec<_>, ShadowError>>()?;
    Ok((basis, probes))
}

fn gate_seed(seed: u64, kind: GateKind) -> u64 {
    derive_seed(derive_seed(seed, tags::GATE_SHADOWS), kind as u64)
}

fn to_estimates(kind: GateKind, basis: Vec<PauliString>, probes: &[Probe], acc: &Accumulator) -> Result<EigenvalueEstimates, ShadowError> {
    let values = basis
        .into_iter()
        .enumerate()
        .map(|(i, p)| Ok((p, acc.mean(probes, i)?)))
        .collect::<Result<_, ShadowError>>()?;
    Ok(EigenvalueEstimates::new(kind.arity(), kind.arity(), values, acc.records()))
}

/// Records of the noisy gate applied to random product eigenstates.
pub fn sample_gate_shadows(
    kind: GateKind,
    noise: &PauliChannel,
    count: u64,
    seed: u64,
) -> Result<Vec<ShadowRecord>, ShadowError> {
    if count == 0 {
        return Err(ShadowError::NoRecords);
    }
    let source = GateSource::new(kind, noise.clone())?;
    let seed = gate_seed(seed, kind);
    use rayon::prelude::*;
    Ok((0..count).into_par_iter().map(|i| sample_record(&source, seed, i)).collect())
}

/// Noise eigenvalues of a gate from its shadows; the ideal gate is undone by the estimator.
pub fn estimate_gate_eigenvalues(records: &[ShadowRecord], kind: GateKind) -> Result<EigenvalueEstimates, ShadowError> {
    let first = records.first().ok_or(ShadowError::NoRecords)?;
    if first.num_qubits() != kind.arity() {
        return Err(ShadowError::QubitMismatch { expected: kind.arity(), found: first.num_qubits() });
    }
    let (basis, probes) = gate_probes(kind)?;
    let acc = Accumulator::from_records(&probes, records);
    to_estimates(kind, basis, &probes, &acc)
}

/// Streaming counterpart of [`sample_gate_shadows`] + [`estimate_gate_eigenvalues`].
pub fn learn_gate_eigenvalues(
    kind: GateKind,
    noise: &PauliChannel,
    count: u64,
    seed: u64,
) -> Result<EigenvalueEstimates, ShadowError> {
    if count == 0 {
        return Err(ShadowError::NoRecords);
    }
    let source = GateSource::new(kind, noise.clone())?;
    let (basis, probes) = gate_probes(kind)?;
    let acc = Accumulator::from_source(&probes, &source, count, gate_seed(seed, kind));
    to_estimates(kind, basis, &probes, &acc)
}

/// Wraps a source with symmetric preparation and readout flips: every prepared eigenstate is
/// replaced by its orthogonal partner with probability `flip`, and every reported outcome is
/// inverted with the same probability. The record keeps the intended input.
#[derive(Clone, Debug, PartialEq)]
pub struct SpamNoisy<S> {
    inner: S,
    flip: f64,
}

impl<S: ShadowSource> SpamNoisy<S> {
    pub fn new(inner: S, flip: f64) -> Result<Self, ShadowError> {
        if !(0.0..=1.0).contains(&flip) {
            return Err(ShadowError::InvalidArgument(format!("flip probability {flip} outside [0, 1]")));
        }
        Ok(Self { inner, flip })
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: ShadowSource> ShadowSource for SpamNoisy<S> {
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits()
    }

    fn output_expectation(&self, input: &[Eigenstate], q: &PauliString) -> f64 {
        let n = input.len();
        let (p0, p1) = (1.0 - self.flip, self.flip);
        let mut flipped = input.to_vec();
        let mut total = 0.0;
        for mask in 0..1usize << n {
            let mut weight = 1.0;
            for j in 0..n {
                if mask >> j & 1 == 1 {
                    flipped[j] = input[j].flipped();
                    weight *= p1;
                } else {
                    flipped[j] = input[j];
                    weight *= p0;
                }
            }
            if weight > 0.0 {
                total += weight * self.inner.output_expectation(&flipped, q);
            }
        }
        total * (p0 - p1).powi(q.weight() as i32)
    }

    fn sample_outcomes(&self, input: &[Eigenstate], bases: &[Axis], rng: &mut ChaCha8Rng) -> Vec<Sign> {
        let prepared: Vec<Eigenstate> =
            input.iter().map(|s| if rng.random::<f64>() < self.flip { s.flipped() } else { *s }).collect();
        let mut out = self.inner.sample_outcomes(&prepared, bases, rng);
        for o in out.iter_mut() {
            if rng.random::<f64>() < self.flip {
                *o = o.flipped();
            }
        }
        out
    }
}

/// Per-qubit prefactor picked up by every estimated eigenvalue under preparation and readout
/// flips with probability `flip`, measured on a noiseless single-qubit channel where the true
/// eigenvalues are all `1`. Averages the `X`, `Y` and `Z` estimates.
pub fn estimate_spam_factor(flip: f64, count: u64, seed: u64) -> Result<f64, ShadowError> {
    if count == 0 {
        return Err(ShadowError::NoRecords);
    }
    let source = SpamNoisy::new(PauliChannel::identity(1)?, flip)?;
    let basis: Vec<PauliString> = enumerate_low_weight(1, 1)?.into_iter().skip(1).collect();
    let probes: Vec<Probe> = basis.iter().map(|p| Probe::transfer(*p, *p)).collect();
    let acc = Accumulator::from_source(&probes, &source, count, derive_seed(seed, tags::SPAM));
    let mut sum = 0.0;
    for i in 0..probes.len() {
        sum += acc.mean(&probes, i)?;
    }
    Ok(sum / probes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::QubitPauliProbs;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn noiseless_gates_give_unit_eigenvalues() {
        for kind in GateKind::ALL {
            let noise = PauliChannel::identity(kind.arity()).unwrap();
            let est = learn_gate_eigenvalues(kind, &noise, 20_000, 1).unwrap();
            for (q, v) in est.iter() {
                assert!((v - 1.0).abs() < 0.15, "{kind} {q}: {v}");
            }
        }
    }

    #[test]
    fn hadamard_noise_eigenvalue() {
        let noise = PauliChannel::product(vec![QubitPauliProbs::new(0.75, 0.10, 0.10, 0.05)]).unwrap();
        let est = learn_gate_eigenvalues(GateKind::H, &noise, 100_000, 2).unwrap();
        assert!((est.get(&p("Z")).unwrap() - 0.60).abs() < 0.05);
    }

    #[test]
    fn dropping_the_sign_flips_the_estimate() {
        // S†XS = −Y: a probe that ignores the sign estimates −λ_X instead of λ_X.
        let noise = PauliChannel::identity(1).unwrap();
        let records = sample_gate_shadows(GateKind::S, &noise, 20_000, 3).unwrap();
        let good = estimate_gate_eigenvalues(&records, GateKind::S).unwrap().get(&p("X")).unwrap();
        let bad_probe = [Probe { input: p("Y"), output: p("X"), scale: 9.0 }];
        let bad = Accumulator::from_records(&bad_probe, &records).mean(&bad_probe, 0).unwrap();
        assert!(good > 0.8 && bad < -0.8, "{good} {bad}");
    }

    #[test]
    fn spam_expectation_picks_up_square() {
        let src = SpamNoisy::new(PauliChannel::identity(1).unwrap(), 0.1).unwrap();
        let zp = Eigenstate::new(Axis::Z, Sign::Plus);
        let v = src.output_expectation(&[zp], &p("Z"));
        assert!((v - 0.64).abs() < 1e-12);
        let none = SpamNoisy::new(PauliChannel::identity(1).unwrap(), 0.0).unwrap();
        assert_eq!(none.output_expectation(&[zp], &p("Z")), 1.0);
    }

    #[test]
    fn spam_factor_without_noise_is_one() {
        let f = estimate_spam_factor(0.0, 100_000, 5).unwrap();
        assert!((f - 1.0).abs() < 0.03, "{f}");
    }
}
