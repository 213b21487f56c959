//! Aggregated record sampling.
//!
//! A record is one of `36^n` types (input eigenstate and measured eigenstate per qubit), and
//! the estimators only depend on how many records of each type were seen. For small `n` the
//! type distribution is known exactly, so the counts of `N` independent records can be drawn
//! directly as a multinomial vector. This makes sample sizes far beyond what can be streamed
//! one record at a time (the planner's bounds routinely exceed `10^15`) cost `O(36^n)`.

use rand_distr::{Binomial, Distribution};

use crate::rng::{derive_seed, stream_rng, tags};

use super::source::ShadowSource;
use super::{Axis, Eigenstate, ShadowError, ShadowRecord};

/// Largest `n` for which the full type distribution is built.
pub const HISTOGRAM_QUBIT_CAP: usize = 4;

/// Counts of each record type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordHistogram {
    n: usize,
    counts: Vec<u64>,
}

impl RecordHistogram {
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Record types with nonzero count.
    pub fn iter(&self) -> impl Iterator<Item = (ShadowRecord, u64)> + '_ {
        let n = self.n;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(move |(i, c)| (ShadowRecord::from_type_index(n, i), *c))
    }

    pub fn from_records(n: usize, records: &[ShadowRecord]) -> Result<Self, ShadowError> {
        check_cap(n)?;
        let mut counts = vec![0u64; 36usize.pow(n as u32)];
        for r in records {
            if r.num_qubits() != n {
                return Err(ShadowError::QubitMismatch { expected: n, found: r.num_qubits() });
            }
            counts[r.type_index()] += 1;
        }
        Ok(Self { n, counts })
    }
}

fn check_cap(n: usize) -> Result<(), ShadowError> {
    if n == 0 || n > HISTOGRAM_QUBIT_CAP {
        return Err(ShadowError::InvalidArgument(format!(
            "record histograms need 1..={HISTOGRAM_QUBIT_CAP} qubits, got {n}"
        )));
    }
    Ok(())
}

/// Probability of every record type, indexed by [`ShadowRecord::type_index`].
pub fn exact_record_distribution<S: ShadowSource + ?Sized>(source: &S) -> Result<Vec<f64>, ShadowError> {
    let n = source.num_qubits();
    check_cap(n)?;
    let mut dist = vec![0.0; 36usize.pow(n as u32)];
    let weight = 1.0 / (18f64).powi(n as i32);
    let mut input = vec![Eigenstate::from_index(0); n];
    let mut bases = vec![Axis::X; n];
    for s_idx in 0..6usize.pow(n as u32) {
        let mut rest = s_idx;
        for s in input.iter_mut() {
            *s = Eigenstate::from_index(rest % 6);
            rest /= 6;
        }
        for b_idx in 0..3usize.pow(n as u32) {
            let mut rest = b_idx;
            for b in bases.iter_mut() {
                *b = Axis::from_index(rest % 3);
                rest /= 3;
            }
            let probs = source.outcome_distribution(&input, &bases);
            for (o, p) in probs.iter().enumerate() {
                let mut idx = 0usize;
                for j in (0..n).rev() {
                    let measured = bases[j].index() * 2 + (o >> j & 1);
                    idx = idx * 36 + input[j].index() * 6 + measured;
                }
                dist[idx] += weight * p;
            }
        }
    }
    Ok(dist)
}

/// Type counts of `count` independent records, drawn as a multinomial vector by sequential
/// conditional binomials.
pub fn sample_histogram<S: ShadowSource + ?Sized>(
    source: &S,
    count: u64,
    seed: u64,
) -> Result<RecordHistogram, ShadowError> {
    if count == 0 {
        return Err(ShadowError::NoRecords);
    }
    let dist = exact_record_distribution(source)?;
    let mut rng = stream_rng(derive_seed(seed, tags::HISTOGRAM), 0);
    let last = dist.iter().rposition(|p| *p > 0.0).ok_or(ShadowError::NoRecords)?;
    let mut counts = vec![0u64; dist.len()];
    let mut remaining = count;
    let mut mass = 1.0f64;
    for (i, p) in dist.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        if *p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let c = if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q).expect("probability in range").sample(&mut rng)
        };
        counts[i] = c;
        remaining -= c;
        mass -= p;
    }
    Ok(RecordHistogram { n: source.num_qubits(), counts })
}
