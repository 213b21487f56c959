//! Eigenvalue and transfer-matrix estimators.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::channel::{PauliChannel, TransferMatrix};
use crate::pauli::{enumerate_low_weight, PauliString};
use crate::rng::{derive_seed, tags};

use super::histogram::RecordHistogram;
use super::source::{sample_record, ShadowSource};
use super::{ShadowError, ShadowRecord};

/// One estimated quantity: `scale · mean(kernel(input, output))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Probe {
    pub input: PauliString,
    pub output: PauliString,
    pub scale: f64,
}

impl Probe {
    /// `λ̂_P(Q)` (and `λ̂_P` when `P = Q`).
    pub fn transfer(p: PauliString, q: PauliString) -> Self {
        Self { input: p.unsigned(), output: q.unsigned(), scale: pow3(p.weight() + q.weight()) }
    }
}

#[inline]
pub(crate) fn pow3(w: usize) -> f64 {
    3f64.powi(w as i32)
}

/// Net kernel counts per probe. Counts are exact integers, so merging is associative and
/// the result does not depend on how records were split across threads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Accumulator {
    net: Vec<i128>,
    records: u64,
}

impl Accumulator {
    pub fn new(probes: usize) -> Self {
        Self { net: vec![0; probes], records: 0 }
    }

    #[inline]
    pub fn add(&mut self, probes: &[Probe], record: &ShadowRecord, count: u64) {
        for (slot, p) in self.net.iter_mut().zip(probes) {
            let k = record.kernel(&p.input, &p.output);
            if k != 0 {
                *slot += k as i128 * count as i128;
            }
        }
        self.records += count;
    }

    pub fn merge(mut self, other: Accumulator) -> Accumulator {
        for (a, b) in self.net.iter_mut().zip(other.net) {
            *a += b;
        }
        self.records += other.records;
        self
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn net(&self) -> &[i128] {
        &self.net
    }

    pub fn mean(&self, probes: &[Probe], i: usize) -> Result<f64, ShadowError> {
        if self.records == 0 {
            return Err(ShadowError::NoRecords);
        }
        Ok(probes[i].scale * self.net[i] as f64 / self.records as f64)
    }

    pub fn from_records(probes: &[Probe], records: &[ShadowRecord]) -> Self {
        records
            .par_iter()
            .fold(
                || Accumulator::new(probes.len()),
                |mut acc, r| {
                    acc.add(probes, r, 1);
                    acc
                },
            )
            .reduce(|| Accumulator::new(probes.len()), Accumulator::merge)
    }

    /// Streams `count` freshly sampled records without storing them.
    pub fn from_source<S: ShadowSource + ?Sized>(probes: &[Probe], source: &S, count: u64, seed: u64) -> Self {
        (0..count)
            .into_par_iter()
            .fold(
                || Accumulator::new(probes.len()),
                |mut acc, i| {
                    acc.add(probes, &sample_record(source, seed, i), 1);
                    acc
                },
            )
            .reduce(|| Accumulator::new(probes.len()), Accumulator::merge)
    }

    pub fn from_histogram(probes: &[Probe], hist: &RecordHistogram) -> Self {
        let mut acc = Accumulator::new(probes.len());
        for (record, count) in hist.iter() {
            acc.add(probes, &record, count);
        }
        acc
    }
}

fn check_records(records: &[ShadowRecord], n: usize) -> Result<(), ShadowError> {
    let first = records.first().ok_or(ShadowError::NoRecords)?;
    if first.num_qubits() != n {
        return Err(ShadowError::QubitMismatch { expected: n, found: first.num_qubits() });
    }
    Ok(())
}

/// `x̂_P = 3^{|P|} · mean(kernel(P, P))`.
pub fn estimate_x(records: &[ShadowRecord], p: &PauliString) -> Result<f64, ShadowError> {
    check_records(records, p.num_qubits())?;
    let probe = [Probe { input: p.unsigned(), output: p.unsigned(), scale: pow3(p.weight()) }];
    Accumulator::from_records(&probe, records).mean(&probe, 0)
}

/// Estimated eigenvalues `λ̂_P` of a Pauli channel for all `P` up to a weight.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenvalueEstimates {
    n: usize,
    max_weight: usize,
    values: BTreeMap<PauliString, f64>,
    samples: u64,
}

impl EigenvalueEstimates {
    /// `values` need not contain the identity; `λ̂_I = 1` is always implied.
    pub fn new(n: usize, max_weight: usize, values: BTreeMap<PauliString, f64>, samples: u64) -> Self {
        let values = values.into_iter().filter(|(p, _)| !p.is_identity()).map(|(p, v)| (p.unsigned(), v)).collect();
        Self { n, max_weight, values, samples }
    }

    /// The channel's true eigenvalues, for noise-free recovery runs.
    pub fn exact(ch: &PauliChannel, k: usize) -> Result<Self, ShadowError> {
        let values =
            enumerate_low_weight(ch.num_qubits(), k)?.into_iter().skip(1).map(|p| (p, ch.exact_eigenvalue(&p))).collect();
        Ok(Self::new(ch.num_qubits(), k, values, 0))
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn max_weight(&self) -> usize {
        self.max_weight
    }

    /// Number of records behind the estimates (0 for exact values).
    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn get(&self, p: &PauliString) -> Option<f64> {
        if p.is_identity() {
            return Some(1.0);
        }
        self.values.get(&p.unsigned()).copied()
    }

    /// Non-identity entries in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &f64)> {
        self.values.iter()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Divides each `λ̂_P` by `factor^{|P|}` to remove a per-qubit preparation and
    /// measurement prefactor.
    pub fn divide_spam(&self, factor: f64) -> Self {
        let values = self.values.iter().map(|(p, v)| (*p, v / factor.powi(p.weight() as i32))).collect();
        Self { values, ..self.clone() }
    }
}

fn eigen_basis(n: usize, k: usize) -> Result<Vec<PauliString>, ShadowError> {
    Ok(enumerate_low_weight(n, k)?.into_iter().skip(1).collect())
}

fn eigen_estimates(n: usize, k: usize, basis: Vec<PauliString>, probes: &[Probe], acc: &Accumulator) -> Result<EigenvalueEstimates, ShadowError> {
    let values = basis
        .into_iter()
        .enumerate()
        .map(|(i, p)| Ok((p, acc.mean(probes, i)?)))
        .collect::<Result<BTreeMap<_, _>, ShadowError>>()?;
    Ok(EigenvalueEstimates::new(n, k, values, acc.records()))
}

/// `λ̂_P = 3^{|P|} x̂_P` for every `P` with `1 ≤ |P| ≤ k`.
pub fn estimate_eigenvalues(records: &[ShadowRecord], n: usize, k: usize) -> Result<EigenvalueEstimates, ShadowError> {
    check_records(records, n)?;
    let basis = eigen_basis(n, k)?;
    let probes: Vec<Probe> = basis.iter().map(|p| Probe::transfer(*p, *p)).collect();
    let acc = Accumulator::from_records(&probes, records);
    eigen_estimates(n, k, basis, &probes, &acc)
}

/// Same as sampling with [`super::sample_channel_shadows`] and calling
/// [`estimate_eigenvalues`], without keeping the records in memory.
pub fn learn_eigenvalues<S: ShadowSource + ?Sized>(
    source: &S,
    count: u64,
    k: usize,
    seed: u64,
) -> Result<EigenvalueEstimates, ShadowError> {
    if count == 0 {
        return Err(ShadowError::NoRecords);
    }
    let n = source.num_qubits();
    let basis = eigen_basis(n, k)?;
    let probes: Vec<Probe> = basis.iter().map(|p| Probe::transfer(*p, *p)).collect();
    let acc = Accumulator::from_source(&probes, source, count, derive_seed(seed, tags::CHANNEL_SHADOWS));
    eigen_estimates(n, k, basis, &probes, &acc)
}

/// Eigenvalue estimates from an aggregated record histogram.
pub fn eigenvalues_from_histogram(hist: &RecordHistogram, k: usize) -> Result<EigenvalueEstimates, ShadowError> {
    let n = hist.num_qubits();
    let basis = eigen_basis(n, k)?;
    let probes: Vec<Probe> = basis.iter().map(|p| Probe::transfer(*p, *p)).collect();
    let acc = Accumulator::from_histogram(&probes, hist);
    eigen_estimates(n, k, basis, &probes, &acc)
}

/// `λ̂_P(Q) = 3^{|P|} 3^{|Q|} · mean(kernel(P, Q))`, with `λ̂_P(I) = δ_{PI}` exactly.
pub fn estimate_transfer_entry(records: &[ShadowRecord], p: &PauliString, q: &PauliString) -> Result<f64, ShadowError> {
    if p.num_qubits() != q.num_qubits() {
        return Err(ShadowError::QubitMismatch { expected: p.num_qubits(), found: q.num_qubits() });
    }
    check_records(records, p.num_qubits())?;
    if q.is_identity() {
        return Ok(if p.is_identity() { 1.0 } else { 0.0 });
    }
    let probe = [Probe::transfer(*p, *q)];
    Accumulator::from_records(&probe, records).mean(&probe, 0)
}

fn transfer_probes(basis: &[PauliString]) -> (Vec<(usize, usize)>, Vec<Probe>) {
    let mut cells = Vec::new();
    let mut probes = Vec::new();
    for (c, q) in basis.iter().enumerate().skip(1) {
        for (r, p) in basis.iter().enumerate() {
            if p.weight() <= q.weight() {
                cells.push((r, c));
                probes.push(Probe::transfer(*p, *q));
            }
        }
    }
    (cells, probes)
}

fn transfer_from_acc(
    basis: Vec<PauliString>,
    cells: &[(usize, usize)],
    probes: &[Probe],
    acc: &Accumulator,
) -> Result<TransferMatrix, ShadowError> {
    let dim = basis.len();
    let mut m = DMatrix::zeros(dim, dim);
    m[(0, 0)] = 1.0;
    for (i, &(r, c)) in cells.iter().enumerate() {
        m[(r, c)] = acc.mean(probes, i)?;
    }
    Ok(TransferMatrix::new(basis, m)?)
}

/// Estimated adjoint transfer matrix on the weight-`≤ k` basis. Entries below the block
/// diagonal are not estimated and set to zero.
pub fn estimate_transfer_matrix(records: &[ShadowRecord], n: usize, k: usize) -> Result<TransferMatrix, ShadowError> {
    check_records(records, n)?;
    let basis = enumerate_low_weight(n, k)?;
    let (cells, probes) = transfer_probes(&basis);
    let acc = Accumulator::from_records(&probes, records);
    transfer_from_acc(basis, &cells, &probes, &acc)
}

/// Streaming counterpart of [`estimate_transfer_matrix`].
pub fn learn_transfer_matrix<S: ShadowSource + ?Sized>(
    source: &S,
    count: u64,
    k: usize,
    seed: u64,
) -> Result<TransferMatrix, ShadowError> {
    if count == 0 {
        return Err(ShadowError::NoRecords);
    }
    let basis = enumerate_low_weight(source.num_qubits(), k)?;
    let (cells, probes) = transfer_probes(&basis);
    let acc = Accumulator::from_source(&probes, source, count, derive_seed(seed, tags::CHANNEL_SHADOWS));
    transfer_from_acc(basis, &cells, &probes, &acc)
}
