//! Product eigenstate labels and packed shadow records.

use std::fmt;
use std::str::FromStr;

use crate::pauli::{Letter, PauliString, Sign, MAX_QUBITS};

use super::ShadowError;

/// Measurement or preparation axis of a single qubit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    #[inline]
    pub fn letter(self) -> Letter {
        match self {
            Axis::X => Letter::X,
            Axis::Y => Letter::Y,
            Axis::Z => Letter::Z,
        }
    }

    #[inline]
    pub fn from_letter(l: Letter) -> Option<Axis> {
        match l {
            Letter::I => None,
            Letter::X => Some(Axis::X),
            Letter::Y => Some(Axis::Y),
            Letter::Z => Some(Axis::Z),
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    #[inline]
    pub fn from_index(i: usize) -> Axis {
        Axis::ALL[i]
    }
}

/// One of the six single-qubit Pauli eigenstates, e.g. `(Z, +) = |0⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Eigenstate {
    pub axis: Axis,
    pub sign: Sign,
}

impl Eigenstate {
    pub const fn new(axis: Axis, sign: Sign) -> Self {
        Self { axis, sign }
    }

    /// The orthogonal partner on the same axis.
    pub fn flipped(self) -> Self {
        Self { axis: self.axis, sign: self.sign.flipped() }
    }

    /// Index in `0..6`: `axis * 2 + (sign == Minus)`.
    #[inline]
    pub fn index(self) -> usize {
        self.axis.index() * 2 + self.sign.is_negative() as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        Self { axis: Axis::from_index(i / 2), sign: Sign::from_negative(i % 2 == 1) }
    }

    /// Bloch vector `(r_x, r_y, r_z)`.
    pub fn bloch(self) -> [f64; 3] {
        let mut r = [0.0; 3];
        r[self.axis.index()] = self.sign.value();
        r
    }

    /// `tr(L · |s⟩⟨s|)` for a single letter `L`.
    #[inline]
    pub fn pauli_expectation(self, l: Letter) -> f64 {
        match Axis::from_letter(l) {
            None => 1.0,
            Some(a) if a == self.axis => self.sign.value(),
            Some(_) => 0.0,
        }
    }
}

impl fmt::Display for Eigenstate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.sign.is_negative() { '-' } else { '+' };
        write!(f, "{}{}", self.axis.letter().to_char(), sign)
    }
}

/// One access to a channel: the prepared product eigenstate and the measured one.
///
/// Axes are stored as Pauli letter bits and signs as a bit mask, so the estimator kernels are
/// a handful of word operations regardless of `n`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShadowRecord {
    n: usize,
    s_x: u64,
    s_z: u64,
    s_neg: u64,
    t_x: u64,
    t_z: u64,
    t_neg: u64,
}

#[inline]
fn pack(states: &[Eigenstate]) -> (u64, u64, u64) {
    let (mut x, mut z, mut neg) = (0u64, 0u64, 0u64);
    for (j, s) in states.iter().enumerate() {
        let (xb, zb) = s.axis.letter().bits();
        x |= (xb as u64) << j;
        z |= (zb as u64) << j;
        neg |= (s.sign.is_negative() as u64) << j;
    }
    (x, z, neg)
}

#[inline]
fn unpack(x: u64, z: u64, neg: u64, j: usize) -> Eigenstate {
    let letter = Letter::from_bits((x >> j) & 1 == 1, (z >> j) & 1 == 1);
    Eigenstate {
        axis: Axis::from_letter(letter).expect("record qubits always carry an axis"),
        sign: Sign::from_negative((neg >> j) & 1 == 1),
    }
}

impl ShadowRecord {
    pub fn new(input: &[Eigenstate], measured: &[Eigenstate]) -> Result<Self, ShadowError> {
        if input.len() != measured.len() {
            return Err(ShadowError::LengthMismatch { input: input.len(), measured: measured.len() });
        }
        if input.len() > MAX_QUBITS {
            return Err(ShadowError::TooManyQubits(input.len()));
        }
        let (s_x, s_z, s_neg) = pack(input);
        let (t_x, t_z, t_neg) = pack(measured);
        Ok(Self { n: input.len(), s_x, s_z, s_neg, t_x, t_z, t_neg })
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn input(&self, j: usize) -> Eigenstate {
        assert!(j < self.n);
        unpack(self.s_x, self.s_z, self.s_neg, j)
    }

    pub fn measured(&self, j: usize) -> Eigenstate {
        assert!(j < self.n);
        unpack(self.t_x, self.t_z, self.t_neg, j)
    }

    pub fn inputs(&self) -> Vec<Eigenstate> {
        (0..self.n).map(|j| self.input(j)).collect()
    }

    pub fn measurements(&self) -> Vec<Eigenstate> {
        (0..self.n).map(|j| self.measured(j)).collect()
    }

    /// Sign part of `tr(Q ⊗(3|t⟩⟨t| − I)) · tr(P ρ_s)`; the magnitude is `3^{|Q|}`.
    ///
    /// Zero unless the prepared axes match `input_side` on its support and the measured axes
    /// match `output_side` on its support. The sign of `input_side` is included.
    #[inline]
    pub fn kernel(&self, input_side: &PauliString, output_side: &PauliString) -> i64 {
        let ps = input_side.support_mask();
        let qs = output_side.support_mask();
        let in_miss = ((self.s_x ^ input_side.x_bits()) | (self.s_z ^ input_side.z_bits())) & ps;
        let out_miss = ((self.t_x ^ output_side.x_bits()) | (self.t_z ^ output_side.z_bits())) & qs;
        if in_miss | out_miss != 0 {
            return 0;
        }
        let parity = ((self.s_neg & ps).count_ones() + (self.t_neg & qs).count_ones()) & 1;
        let negative = (parity == 1) ^ input_side.sign().is_negative();
        if negative {
            -1
        } else {
            1
        }
    }

    /// Dense index in `0..36^n` used by record histograms.
    pub fn type_index(&self) -> usize {
        let mut idx = 0usize;
        for j in (0..self.n).rev() {
            idx = idx * 36 + self.input(j).index() * 6 + self.measured(j).index();
        }
        idx
    }

    pub fn from_type_index(n: usize, mut idx: usize) -> Self {
        let mut input = Vec::with_capacity(n);
        let mut measured = Vec::with_capacity(n);
        for _ in 0..n {
            let cell = idx % 36;
            idx /= 36;
            input.push(Eigenstate::from_index(cell / 6));
            measured.push(Eigenstate::from_index(cell % 6));
        }
        Self::new(&input, &measured).expect("lengths agree")
    }
}

impl fmt::Display for ShadowRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("s:")?;
        for j in 0..self.n {
            write!(f, "{}", self.input(j))?;
        }
        f.write_str(" t:")?;
        for j in 0..self.n {
            write!(f, "{}", self.measured(j))?;
        }
        Ok(())
    }
}

impl fmt::Debug for ShadowRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ShadowRecord({self})")
    }
}

fn parse_states(s: &str) -> Result<Vec<Eigenstate>, ShadowError> {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() % 2 != 0 {
        return Err(ShadowError::Parse(format!("odd-length state list {s:?}")));
    }
    chars
        .chunks(2)
        .map(|c| {
            let axis = Letter::from_char(c[0])
                .and_then(Axis::from_letter)
                .ok_or_else(|| ShadowError::Parse(format!("bad axis {:?}", c[0])))?;
            let sign = match c[1] {
                '+' => Sign::Plus,
                '-' => Sign::Minus,
                other => return Err(ShadowError::Parse(format!("bad sign {other:?}"))),
            };
            Ok(Eigenstate { axis, sign })
        })
        .collect()
}

impl FromStr for ShadowRecord {
    type Err = ShadowError;

    /// Parses `s:Z+X- t:Z-Y+`.
    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut parts = line.split_whitespace();
        let (Some(s), Some(t), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ShadowError::Parse(format!("expected `s:<states> t:<states>`, got {line:?}")));
        };
        let s = s.strip_prefix("s:").ok_or_else(|| ShadowError::Parse("missing `s:` prefix".into()))?;
        let t = t.strip_prefix("t:").ok_or_else(|| ShadowError::Parse("missing `t:` prefix".into()))?;
        ShadowRecord::new(&parse_states(s)?, &parse_states(t)?)
    }
}

/// Writes one record per line.
pub fn write_records<W: std::io::Write>(mut w: W, records: &[ShadowRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{r}")?;
    }
    Ok(())
}

/// Reads records, skipping blank lines and `#` comments. Errors carry 1-based line numbers.
pub fn read_records(text: &str) -> Result<Vec<ShadowRecord>, ShadowError> {
    let mut out = Vec::new();
    let mut n = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec: ShadowRecord = line
            .parse()
            .map_err(|e: ShadowError| ShadowError::Parse(format!("line {}: {e}", i + 1)))?;
        match n {
            None => n = Some(rec.num_qubits()),
            Some(m) if m != rec.num_qubits() => {
                return Err(ShadowError::Parse(format!(
                    "line {}: record has {} qubits, expected {m}",
                    i + 1,
                    rec.num_qubits()
                )))
            }
            _ => {}
        }
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_text_round_trip() {
        let r: ShadowRecord = "s:Z+X- t:Z-Y+".parse().unwrap();
        assert_eq!(r.input(0), Eigenstate::new(Axis::Z, Sign::Plus));
        assert_eq!(r.input(1), Eigenstate::new(Axis::X, Sign::Minus));
        assert_eq!(r.measured(1), Eigenstate::new(Axis::Y, Sign::Plus));
        assert_eq!(r.to_string(), "s:Z+X- t:Z-Y+");
        assert!("s:Z+ t:Z+X+".parse::<ShadowRecord>().is_err());
        assert!("s:Q+ t:Z+".parse::<ShadowRecord>().is_err());
        assert!("s:Z* t:Z+".parse::<ShadowRecord>().is_err());
    }

    #[test]
    fn type_index_round_trip() {
        let r: ShadowRecord = "s:Y-X+Z- t:X+Z-Y-".parse().unwrap();
        assert_eq!(ShadowRecord::from_type_index(3, r.type_index()), r);
    }

    #[test]
    fn kernel_single_qubit() {
        let z: PauliString = "Z".parse().unwrap();
        let r: ShadowRecord = "s:Z+ t:Z-".parse().unwrap();
        assert_eq!(r.kernel(&z, &z), -1);
        let r: ShadowRecord = "s:X+ t:Z-".parse().unwrap();
        assert_eq!(r.kernel(&z, &z), 0);
        let id: PauliString = "I".parse().unwrap();
        assert_eq!(r.kernel(&id, &id), 1);
        assert_eq!(r.kernel(&z.negated(), &id), 0);
        let x: PauliString = "X".parse().unwrap();
        assert_eq!(r.kernel(&x.negated(), &z), 1);
    }

    #[test]
    fn read_records_reports_line() {
        let err = read_records("s:Z+ t:Z+\n\ns:Z+ t:Q+\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(read_records("s:Z+ t:Z+\ns:Z+Z+ t:Z+Z+").is_err());
    }
}
