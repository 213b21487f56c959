//! Things that can be probed with a random product eigenstate and measured in a random
//! product Pauli basis.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{apply_error_to_eigenstate, Channel, PauliChannel, ProductChannel};
use crate::pauli::{Letter, PauliString, Sign};
use crate::rng::{derive_seed, stream_rng, tags};

use super::{Axis, Eigenstate, ShadowError, ShadowRecord};

/// A simulated process that maps an `n`-qubit product eigenstate to an output state.
pub trait ShadowSource: Sync {
    fn num_qubits(&self) -> usize;

    /// `tr(Q · out(ρ_s))` for an unsigned Pauli `Q`.
    fn output_expectation(&self, input: &[Eigenstate], q: &PauliString) -> f64;

    /// Outcome probabilities for measuring each qubit in `bases`. Outcome `o` is indexed by
    /// the bit mask of qubits that returned `−1`.
    fn outcome_distribution(&self, input: &[Eigenstate], bases: &[Axis]) -> Vec<f64> {
        let n = bases.len();
        let full = 1usize << n;
        // E[B_S] for every subset S of qubits, then p(o) = 2^{-n} Σ_S (Π_{j∈S} o_j) E[B_S].
        let mut v = vec![0.0; full];
        let mut b = PauliString::identity(n).expect("n within cap");
        for (subset, slot) in v.iter_mut().enumerate() {
            for (j, axis) in bases.iter().enumerate() {
                b.set_letter(j, if subset >> j & 1 == 1 { axis.letter() } else { Letter::I });
            }
            *slot = self.output_expectation(input, &b);
        }
        walsh_hadamard(&mut v);
        let scale = 1.0 / full as f64;
        v.iter().map(|x| (x * scale).max(0.0)).collect()
    }

    /// Measures the output for `input` in `bases`.
    fn sample_outcomes(&self, input: &[Eigenstate], bases: &[Axis], rng: &mut ChaCha8Rng) -> Vec<Sign> {
        let probs = self.outcome_distribution(input, bases);
        let total: f64 = probs.iter().sum();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = probs.len() - 1;
        for (o, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = o;
                break;
            }
        }
        (0..bases.len()).map(|j| Sign::from_negative(pick >> j & 1 == 1)).collect()
    }
}

pub(super) fn walsh_hadamard(v: &mut [f64]) {
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

/// `tr(P ρ_s)` for a signed `P` and a product eigenstate `s`.
#[inline]
pub(crate) fn eigenstate_expectation(input: &[Eigenstate], p: &PauliString) -> f64 {
    let mut v = p.sign().value();
    for (j, l) in p.support() {
        v *= input[j].pauli_expectation(l);
        if v == 0.0 {
            return 0.0;
        }
    }
    v
}

#[inline]
fn measure_bloch(r: [f64; 3], axis: Axis, rng: &mut ChaCha8Rng) -> Sign {
    let p_plus = 0.5 * (1.0 + r[axis.index()]);
    Sign::from_negative(rng.random::<f64>() >= p_plus)
}

impl ShadowSource for PauliChannel {
    fn num_qubits(&self) -> usize {
        PauliChannel::num_qubits(self)
    }

    fn output_expectation(&self, input: &[Eigenstate], q: &PauliString) -> f64 {
        self.exact_eigenvalue(&q.unsigned()) * eigenstate_expectation(input, q)
    }

    fn sample_outcomes(&self, input: &[Eigenstate], bases: &[Axis], rng: &mut ChaCha8Rng) -> Vec<Sign> {
        let err = self.sample_error(rng);
        let out = apply_error_to_eigenstate(&err, input);
        out.iter()
            .zip(bases)
            .map(|(s, b)| if s.axis == *b { s.sign } else { Sign::from_negative(rng.random::<bool>()) })
            .collect()
    }
}

impl ShadowSource for ProductChannel {
    fn num_qubits(&self) -> usize {
        ProductChannel::num_qubits(self)
    }

    fn output_expectation(&self, input: &[Eigenstate], q: &PauliString) -> f64 {
        let mut v = q.sign().value();
        for (j, l) in q.support() {
            let r = self.output_qubit_density(input[j], j);
            v *= r[Axis::from_letter(l).expect("support letters are non-identity").index()];
        }
        v
    }

    fn sample_outcomes(&self, input: &[Eigenstate], bases: &[Axis], rng: &mut ChaCha8Rng) -> Vec<Sign> {
        input
            .iter()
            .zip(bases)
            .enumerate()
            .map(|(j, (s, b))| measure_bloch(self.output_qubit_density(*s, j), *b, rng))
            .collect()
    }
}

impl ShadowSource for Channel {
    fn num_qubits(&self) -> usize {
        Channel::num_qubits(self)
    }

    fn output_expectation(&self, input: &[Eigenstate], q: &PauliString) -> f64 {
        match self {
            Channel::Pauli(c) => c.output_expectation(input, q),
            Channel::Product(c) => c.output_expectation(input, q),
        }
    }

    fn outcome_distribution(&self, input: &[Eigenstate], bases: &[Axis]) -> Vec<f64> {
        match self {
            Channel::Pauli(c) => c.outcome_distribution(input, bases),
            Channel::Product(c) => c.outcome_distribution(input, bases),
        }
    }

    fn sample_outcomes(&self, input: &[Eigenstate], bases: &[Axis], rng: &mut ChaCha8Rng) -> Vec<Sign> {
        match self {
            Channel::Pauli(c) => c.sample_outcomes(input, bases, rng),
            Channel::Product(c) => c.sample_outcomes(input, bases, rng),
        }
    }
}

/// Record number `index` of the run seeded by `seed`: uniform input eigenstate, uniform
/// measurement bases, outcome drawn from the source.
pub fn sample_record<S: ShadowSource + ?Sized>(source: &S, seed: u64, index: u64) -> ShadowRecord {
    let n = source.num_qubits();
    let mut rng = stream_rng(seed, index);
    let input: Vec<Eigenstate> = (0..n).map(|_| Eigenstate::from_index(rng.random_range(0..6))).collect();
    let bases: Vec<Axis> = (0..n).map(|_| Axis::from_index(rng.random_range(0..3))).collect();
    let signs = source.sample_outcomes(&input, &bases, &mut rng);
    let measured: Vec<Eigenstate> = bases.iter().zip(signs).map(|(b, s)| Eigenstate::new(*b, s)).collect();
    ShadowRecord::new(&input, &measured).expect("lengths agree")
}

/// `count` channel shadow records.
pub fn sample_channel_shadows<S: ShadowSource + ?Sized>(
    source: &S,
    count: u64,
    seed: u64,
) -> Result<Vec<ShadowRecord>, ShadowError> {
    if count == 0 {
        return Err(ShadowError::InvalidArgument("shadow count must be at least 1".into()));
    }
    let seed = derive_seed(seed, tags::CHANNEL_SHADOWS);
    use rayon::prelude::*;
    Ok((0..count).into_par_iter().map(|i| sample_record(source, seed, i)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Ptm, QubitPauliProbs, Validation};

    fn zp() -> Eigenstate {
        Eigenstate::new(Axis::Z, Sign::Plus)
    }

    #[test]
    fn identity_channel_outcomes() {
        let id = PauliChannel::identity(1).unwrap();
        assert_eq!(id.outcome_distribution(&[zp()], &[Axis::Z]), vec![1.0, 0.0]);
        let px = id.outcome_distribution(&[zp()], &[Axis::X]);
        assert!((px[0] - 0.5).abs() < 1e-15 && (px[1] - 0.5).abs() < 1e-15);
        let mut rng = stream_rng(1, 0);
        for _ in 0..100 {
            assert_eq!(id.sample_outcomes(&[zp()], &[Axis::Z], &mut rng), vec![Sign::Plus]);
        }
    }

    #[test]
    fn reference_qubit_flip_rate() {
        let ch = PauliChannel::product(vec![QubitPauliProbs::new(0.75, 0.10, 0.10, 0.05)]).unwrap();
        let p = ch.outcome_distribution(&[zp()], &[Axis::Z]);
        assert!((p[0] - 0.80).abs() < 1e-12);
        let mut rng = stream_rng(3, 0);
        let trials = 200_000;
        let plus = (0..trials).filter(|_| ch.sample_outcomes(&[zp()], &[Axis::Z], &mut rng)[0] == Sign::Plus).count();
        let rate = plus as f64 / trials as f64;
        assert!((rate - 0.80).abs() < 0.005, "{rate}");
    }

    #[test]
    fn product_channel_distribution_matches_bloch() {
        let ch = ProductChannel::new(vec![Ptm::amplitude_damping(0.36), Ptm::depolarizing(0.5)], Validation::Strict)
            .unwrap();
        let input = [Eigenstate::new(Axis::Z, Sign::Minus), Eigenstate::new(Axis::X, Sign::Plus)];
        let p = ch.outcome_distribution(&input, &[Axis::Z, Axis::X]);
        // qubit 0: ⟨Z⟩ = −0.28 → P(+) = 0.36; qubit 1: ⟨X⟩ = 0.5 → P(+) = 0.75.
        let expected = [0.36 * 0.75, 0.64 * 0.75, 0.36 * 0.25, 0.64 * 0.25];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn records_are_reproducible() {
        let ch = PauliChannel::reference();
        let a = sample_channel_shadows(&ch, 50, 9).unwrap();
        let b = sample_channel_shadows(&ch, 50, 9).unwrap();
        assert_eq!(a, b);
        assert!(sample_channel_shadows(&ch, 0, 9).is_err());
    }
}
