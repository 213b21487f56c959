//! Pauli expectation values of a state from random single-qubit Pauli measurements.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::pauli::{Letter, PauliString};
use crate::rng::{derive_seed, stream_rng, tags};

use super::source::walsh_hadamard;
use super::{Axis, ShadowError};

/// Largest register for which all `3^n` basis distributions are tabulated.
const STATE_QUBIT_CAP: usize = 8;

/// A state that can be measured in product Pauli bases.
pub trait StateSampler: Sync {
    fn num_qubits(&self) -> usize;

    /// `tr(P ρ)` for an unsigned `P`.
    fn pauli_expectation(&self, p: &PauliString) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StateShadowOptions {
    pub shots: u64,
    /// Number of batches for the median of means.
    pub batches: usize,
    pub seed: u64,
}

impl StateShadowOptions {
    pub fn new(shots: u64, seed: u64) -> Self {
        Self { shots, batches: 10, seed }
    }

    pub fn with_batches(self, batches: usize) -> Self {
        Self { batches, ..self }
    }
}

fn basis_distribution<S: StateSampler + ?Sized>(state: &S, bases: &[Axis]) -> Vec<f64> {
    let n = bases.len();
    let full = 1usize << n;
    let mut v = vec![0.0; full];
    let mut b = PauliString::identity(n).expect("n within cap");
    for (subset, slot) in v.iter_mut().enumerate() {
        for (j, axis) in bases.iter().enumerate() {
            b.set_letter(j, if subset >> j & 1 == 1 { axis.letter() } else { Letter::I });
        }
        *slot = state.pauli_expectation(&b);
    }
    walsh_hadamard(&mut v);
    let mut acc = 0.0;
    v.iter()
        .map(|x| {
            acc += (x / full as f64).max(0.0);
            acc
        })
        .collect()
}

/// Median-of-means estimates of `tr(P ρ)` for each requested Pauli from one shared set of
/// random-basis measurement shots.
pub fn estimate_state_expectations<S: StateSampler + ?Sized>(
    state: &S,
    paulis: &[PauliString],
    options: StateShadowOptions,
) -> Result<BTreeMap<PauliString, f64>, ShadowError> {
    let n = state.num_qubits();
    if n > STATE_QUBIT_CAP {
        return Err(ShadowError::TooManyQubits(n));
    }
    if options.batches == 0 || options.shots < options.batches as u64 {
        return Err(ShadowError::InvalidArgument(format!(
            "need at least one shot per batch, got {} shots for {} batches",
            options.shots, options.batches
        )));
    }
    for p in paulis {
        if p.num_qubits() != n {
            return Err(ShadowError::QubitMismatch { expected: n, found: p.num_qubits() });
        }
    }
    let n_bases = 3usize.pow(n as u32);
    let cumulative: Vec<Vec<f64>> = (0..n_bases)
        .map(|bi| {
            let mut rest = bi;
            let bases: Vec<Axis> = (0..n)
                .map(|_| {
                    let a = Axis::from_index(rest % 3);
                    rest /= 3;
                    a
                })
                .collect();
            basis_distribution(state, &bases)
        })
        .collect();
    // Basis letters as x/z masks so a shot is checked against a Pauli with word operations.
    let masks: Vec<(u64, u64)> = (0..n_bases)
        .map(|bi| {
            let mut rest = bi;
            let (mut x, mut z) = (0u64, 0u64);
            for j in 0..n {
                let l = Axis::from_index(rest % 3).letter();
                rest /= 3;
                let full = PauliString::single(n, j, l).expect("in range");
                x |= full.x_bits();
                z |= full.z_bits();
            }
            (x, z)
        })
        .collect();

    let k = options.batches;
    let m = paulis.len();
    let shots = options.shots;
    let seed = derive_seed(options.seed, tags::STATE_SHADOWS);
    let net = (0..shots)
        .into_par_iter()
        .fold(
            || vec![0i64; k * m],
            |mut acc, i| {
                let mut rng = stream_rng(seed, i);
                let bi = rng.random_range(0..n_bases);
                let u: f64 = rng.random::<f64>() * cumulative[bi][cumulative[bi].len() - 1];
                let outcome = cumulative[bi].partition_point(|&c| c <= u).min((1 << n) - 1) as u64;
                let (bx, bz) = masks[bi];
                let batch = (i as u128 * k as u128 / shots as u128) as usize;
                for (pi, p) in paulis.iter().enumerate() {
                    let supp = p.support_mask();
                    if ((bx ^ p.x_bits()) | (bz ^ p.z_bits())) & supp != 0 {
                        continue;
                    }
                    let sign = if (outcome & supp).count_ones() % 2 == 1 { -1 } else { 1 };
                    acc[batch * m + pi] += sign;
                }
                acc
            },
        )
        .reduce(
            || vec![0i64; k * m],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let batch_sizes: Vec<u64> = (0..k)
        .map(|b| {
            let start = (b as u128 * shots as u128).div_ceil(k as u128);
            let end = ((b as u128 + 1) * shots as u128).div_ceil(k as u128);
            (end - start) as u64
        })
        .collect();
    let mut out = BTreeMap::new();
    for (pi, p) in paulis.iter().enumerate() {
        let scale = 3f64.powi(p.weight() as i32);
        let mut means: Vec<f64> =
            (0..k).map(|b| scale * net[b * m + pi] as f64 / batch_sizes[b] as f64).collect();
        means.sort_by(f64::total_cmp);
        let median = if k % 2 == 1 { means[k / 2] } else { 0.5 * (means[k / 2 - 1] + means[k / 2]) };
        out.insert(p.unsigned(), median);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `|0…0⟩` or the maximally mixed state.
    struct Simple {
        n: usize,
        mixed: bool,
    }

    impl StateSampler for Simple {
        fn num_qubits(&self) -> usize {
            self.n
        }

        fn pauli_expectation(&self, p: &PauliString) -> f64 {
            if p.is_identity() {
                1.0
            } else if self.mixed || p.x_bits() != 0 {
                0.0
            } else {
                1.0
            }
        }
    }

    #[test]
    fn zero_state_and_mixed_state() {
        let z: PauliString = "ZI".parse().unwrap();
        let x: PauliString = "XZ".parse().unwrap();
        let zero = estimate_state_expectations(&Simple { n: 2, mixed: false }, &[z, x], StateShadowOptions::new(50_000, 1))
            .unwrap();
        assert!((zero[&z] - 1.0).abs() < 0.05);
        assert!(zero[&x].abs() < 0.1);
        let mixed = estimate_state_expectations(&Simple { n: 2, mixed: true }, &[z, x], StateShadowOptions::new(50_000, 1))
            .unwrap();
        assert!(mixed[&z].abs() < 0.05 && mixed[&x].abs() < 0.1);
    }

    #[test]
    fn batch_sizes_cover_all_shots() {
        let z: PauliString = "Z".parse().unwrap();
        let opts = StateShadowOptions::new(7, 3).with_batches(3);
        let est = estimate_state_expectations(&Simple { n: 1, mixed: false }, &[z], opts).unwrap();
        assert!(est[&z].is_finite());
        assert!(estimate_state_expectations(&Simple { n: 1, mixed: false }, &[z], StateShadowOptions::new(2, 3)).is_err());
    }
}
