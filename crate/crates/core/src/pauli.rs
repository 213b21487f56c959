//! Bit-packed Pauli strings.
//!
//! A [`PauliString`] stores one letter per qubit in two machine words using the symplectic
//! encoding `I = (0, 0)`, `X = (1, 0)`, `Z = (0, 1)`, `Y = (1, 1)` for the `(x, z)` bits, plus a
//! real sign. Labels are written with qubit 0 as the leftmost character, so `"XZI"` is
//! `X ⊗ Z ⊗ I`.
//!
//! Strings are ordered weight-major, then lexicographically on their `(qubit, letter)` support
//! sequence with `X < Y < Z`. [`enumerate_low_weight`] produces exactly this order, which makes
//! the weight blocks of transfer matrices contiguous.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Largest qubit count a [`PauliString`] can hold.
pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PauliError {
    #[error("qubit counts differ: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },
    #[error("{0} qubits exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("invalid Pauli letter {ch:?} at position {pos}")]
    InvalidLetter { ch: char, pos: usize },
    #[error("empty Pauli label")]
    EmptyLabel,
    #[error("weight bound {k} exceeds qubit count {n}")]
    WeightExceedsQubits { k: usize, n: usize },
    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },
    #[error("product has an imaginary phase")]
    ImaginaryPhase,
}

/// Single-qubit Pauli letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    pub const ALL: [Letter; 4] = [Letter::I, Letter::X, Letter::Y, Letter::Z];
    pub const NON_IDENTITY: [Letter; 3] = [Letter::X, Letter::Y, Letter::Z];

    /// Position in the `I, X, Y, Z` ordering used by transfer matrices.
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Letter::I => 0,
            Letter::X => 1,
            Letter::Y => 2,
            Letter::Z => 3,
        }
    }

    #[inline]
    pub fn from_index(i: usize) -> Letter {
        Letter::ALL[i & 3]
    }

    #[inline]
    pub(crate) fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    #[inline]
    pub(crate) fn from_bits(x: bool, z: bool) -> Letter {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'I' | 'i' => Some(Letter::I),
            'X' | 'x' => Some(Letter::X),
            'Y' | 'y' => Some(Letter::Y),
            'Z' | 'z' => Some(Letter::Z),
            _ => None,
        }
    }

    /// True when both letters are non-identity and differ.
    #[inline]
    pub fn anticommutes(self, other: Letter) -> bool {
        self != Letter::I && other != Letter::I && self != other
    }

    // X < Y < Z < I: with equal weights, the string carrying I at the first differing
    // qubit has its next support element further right, so it sorts later.
    #[inline]
    fn order_rank(self) -> u8 {
        match self {
            Letter::X => 0,
            Letter::Y => 1,
            Letter::Z => 2,
            Letter::I => 3,
        }
    }
}

/// Real phase of a Pauli string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    #[inline]
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    #[inline]
    pub fn from_negative(neg: bool) -> Sign {
        if neg {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    #[inline]
    pub fn is_negative(self) -> bool {
        self == Sign::Minus
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        Sign::from_negative(self.is_negative() ^ rhs.is_negative())
    }
}

/// An `n`-qubit Pauli operator with a real sign.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
    sign: Sign,
}

#[inline]
fn mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl PauliString {
    pub fn identity(n: usize) -> Result<Self, PauliError> {
        if n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        Ok(Self { n, x: 0, z: 0, sign: Sign::Plus })
    }

    /// Builds a string from its raw bit masks; bits at or above `n` are discarded.
    pub fn from_bits(n: usize, x: u64, z: u64, sign: Sign) -> Result<Self, PauliError> {
        if n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        let m = mask(n);
        Ok(Self { n, x: x & m, z: z & m, sign })
    }

    pub fn from_letters(letters: &[Letter]) -> Result<Self, PauliError> {
        let mut p = Self::identity(letters.len())?;
        for (j, &l) in letters.iter().enumerate() {
            p.set_letter(j, l);
        }
        Ok(p)
    }

    /// A single non-identity letter on qubit `j`.
    pub fn single(n: usize, j: usize, letter: Letter) -> Result<Self, PauliError> {
        let mut p = Self::identity(n)?;
        if j >= n {
            return Err(PauliError::QubitOutOfRange { index: j, n });
        }
        p.set_letter(j, letter);
        Ok(p)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn x_bits(&self) -> u64 {
        self.x
    }

    #[inline]
    pub fn z_bits(&self) -> u64 {
        self.z
    }

    /// Qubits carrying a non-identity letter.
    #[inline]
    pub fn support_mask(&self) -> u64 {
        self.x | self.z
    }

    #[inline]
    pub fn sign(&self) -> Sign {
        self.sign
    }

    #[inline]
    pub fn weight(&self) -> usize {
        self.support_mask().count_ones() as usize
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.support_mask() == 0
    }

    /// The same letters with a `+` sign.
    #[inline]
    pub fn unsigned(&self) -> Self {
        Self { sign: Sign::Plus, ..*self }
    }

    #[inline]
    pub fn with_sign(&self, sign: Sign) -> Self {
        Self { sign, ..*self }
    }

    #[inline]
    pub fn negated(&self) -> Self {
        self.with_sign(self.sign.flipped())
    }

    /// Letter on qubit `j`. Panics if `j >= n`.
    #[inline]
    pub fn letter(&self, j: usize) -> Letter {
        assert!(j < self.n, "qubit {j} out of range for {} qubits", self.n);
        Letter::from_bits((self.x >> j) & 1 == 1, (self.z >> j) & 1 == 1)
    }

    /// Replaces the letter on qubit `j`. Panics if `j >= n`.
    #[inline]
    pub fn set_letter(&mut self, j: usize, letter: Letter) {
        assert!(j < self.n, "qubit {j} out of range for {} qubits", self.n);
        let (xb, zb) = letter.bits();
        let bit = 1u64 << j;
        self.x = (self.x & !bit) | if xb { bit } else { 0 };
        self.z = (self.z & !bit) | if zb { bit } else { 0 };
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        (0..self.n).map(move |j| self.letter(j))
    }

    /// `(qubit, letter)` pairs for non-identity positions in increasing qubit order.
    pub fn support(&self) -> impl Iterator<Item = (usize, Letter)> + '_ {
        let mut m = self.support_mask();
        std::iter::from_fn(move || {
            if m == 0 {
                return None;
            }
            let j = m.trailing_zeros() as usize;
            m &= m - 1;
            Some((j, self.letter(j)))
        })
    }

    /// 0 when the operators commute, 1 when they anticommute.
    pub fn symplectic_product(&self, other: &PauliString) -> Result<u8, PauliError> {
        self.check_same_n(other)?;
        Ok(self.symplectic_unchecked(other))
    }

    #[inline]
    pub(crate) fn symplectic_unchecked(&self, other: &PauliString) -> u8 {
        (((self.x & other.z) ^ (self.z & other.x)).count_ones() & 1) as u8
    }

    pub fn commutes_with(&self, other: &PauliString) -> Result<bool, PauliError> {
        Ok(self.symplectic_product(other)? == 0)
    }

    /// Operator product `self · other`. Fails if the result carries a phase of `±i`.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString, PauliError> {
        self.check_same_n(other)?;
        // Accumulate the phase in powers of i: XY = iZ, YZ = iX, ZX = iY.
        let mut power: i32 = 0;
        let mut both = self.support_mask() & other.support_mask();
        while both != 0 {
            let j = both.trailing_zeros() as usize;
            both &= both - 1;
            let (a, b) = (self.letter(j), other.letter(j));
            power += match (a, b) {
                (Letter::X, Letter::Y) | (Letter::Y, Letter::Z) | (Letter::Z, Letter::X) => 1,
                (Letter::Y, Letter::X) | (Letter::Z, Letter::Y) | (Letter::X, Letter::Z) => -1,
                _ => 0,
            };
        }
        let power = power.rem_euclid(4);
        if power % 2 == 1 {
            return Err(PauliError::ImaginaryPhase);
        }
        let neg = (power == 2) ^ self.sign.is_negative() ^ other.sign.is_negative();
        Ok(PauliString {
            n: self.n,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
            sign: Sign::from_negative(neg),
        })
    }

    /// Restriction to the listed qubits, in the listed order. Sign is dropped.
    pub fn restrict(&self, qubits: &[usize]) -> Result<PauliString, PauliError> {
        let mut out = PauliString::identity(qubits.len())?;
        for (i, &q) in qubits.iter().enumerate() {
            if q >= self.n {
                return Err(PauliError::QubitOutOfRange { index: q, n: self.n });
            }
            out.set_letter(i, self.letter(q));
        }
        Ok(out)
    }

    /// Places `local` on the listed qubits of an `n`-qubit identity, keeping its sign.
    pub fn embed(n: usize, qubits: &[usize], local: &PauliString) -> Result<PauliString, PauliError> {
        if qubits.len() != local.n {
            return Err(PauliError::QubitMismatch { left: qubits.len(), right: local.n });
        }
        let mut out = PauliString::identity(n)?;
        for (i, &q) in qubits.iter().enumerate() {
            if q >= n {
                return Err(PauliError::QubitOutOfRange { index: q, n });
            }
            out.set_letter(q, local.letter(i));
        }
        Ok(out.with_sign(local.sign))
    }

    /// Letters only, qubit 0 first, without the sign prefix.
    pub fn label(&self) -> String {
        self.letters().map(Letter::to_char).collect()
    }

    fn check_same_n(&self, other: &PauliString) -> Result<(), PauliError> {
        if self.n != other.n {
            Err(PauliError::QubitMismatch { left: self.n, right: other.n })
        } else {
            Ok(())
        }
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then_with(|| self.weight().cmp(&other.weight()))
            .then_with(|| {
                let diff = self.support_mask() | other.support_mask();
                let diff = diff & ((self.x ^ other.x) | (self.z ^ other.z));
                if diff == 0 {
                    return Ordering::Equal;
                }
                let j = diff.trailing_zeros() as usize;
                self.letter(j).order_rank().cmp(&other.letter(j).order_rank())
            })
            .then_with(|| self.sign.is_negative().cmp(&other.sign.is_negative()))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign.is_negative() {
            f.write_str("-")?;
        }
        f.write_str(&self.label())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = PauliError;

    /// Parses labels such as `XZI`, `+XZI` or `-YY`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (sign, body, offset) = match s.as_bytes().first() {
            Some(b'-') => (Sign::Minus, &s[1..], 1),
            Some(b'+') => (Sign::Plus, &s[1..], 1),
            _ => (Sign::Plus, s, 0),
        };
        if body.is_empty() {
            return Err(PauliError::EmptyLabel);
        }
        let letters = body
            .chars()
            .enumerate()
            .map(|(pos, ch)| Letter::from_char(ch).ok_or(PauliError::InvalidLetter { ch, pos: pos + offset }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PauliString::from_letters(&letters)?.with_sign(sign))
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of `n`-qubit Paulis of weight exactly `w`: `C(n, w) · 3^w`.
pub fn count_of_weight(n: usize, w: usize) -> u128 {
    binomial(n, w) * 3u128.pow(w as u32)
}

/// Number of `n`-qubit Paulis of weight at most `k`.
pub fn count_low_weight(n: usize, k: usize) -> u128 {
    (0..=k.min(n)).map(|w| count_of_weight(n, w)).sum()
}

/// All unsigned `n`-qubit Paulis of weight at most `k`, in canonical order.
pub fn enumerate_low_weight(n: usize, k: usize) -> Result<Vec<PauliString>, PauliError> {
    if k > n {
        return Err(PauliError::WeightExceedsQubits { k, n });
    }
    let base = PauliString::identity(n)?;
    let mut out = Vec::with_capacity(count_low_weight(n, k).min(1 << 24) as usize);
    for w in 0..=k {
        push_weight(&mut out, base, 0, w);
    }
    Ok(out)
}

/// Depth-first over `(qubit, letter)` choices, which emits each weight class in lexicographic
/// support order.
fn push_weight(out: &mut Vec<PauliString>, current: PauliString, start: usize, remaining: usize) {
    if remaining == 0 {
        out.push(current);
        return;
    }
    let n = current.num_qubits();
    for q in start..=n - remaining {
        for letter in Letter::NON_IDENTITY {
            let mut next = current;
            next.set_letter(q, letter);
            push_weight(out, next, q + 1, remaining - 1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(p("II").weight(), 0);
        assert_eq!(p("XIZ").weight(), 2);
        for q in enumerate_low_weight(3, 2).unwrap() {
            assert!(q.weight() <= 2);
        }
    }

    #[test]
    fn symplectic_examples() {
        assert_eq!(p("X").symplectic_product(&p("X")).unwrap(), 0);
        assert_eq!(p("X").symplectic_product(&p("Z")).unwrap(), 1);
        assert_eq!(p("XZ").symplectic_product(&p("ZX")).unwrap(), 0);
        assert_eq!(
            p("X").symplectic_product(&p("XX")),
            Err(PauliError::QubitMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn enumeration_lengths_and_order() {
        assert_eq!(enumerate_low_weight(1, 0).unwrap(), vec![p("I")]);
        assert_eq!(enumerate_low_weight(2, 1).unwrap().len(), 7);
        assert_eq!(enumerate_low_weight(2, 2).unwrap().len(), 16);
        assert_eq!(enumerate_low_weight(4, 4).unwrap().len(), 256);
        assert_eq!(enumerate_low_weight(5, 2).unwrap().len() as u128, count_low_weight(5, 2));
        assert!(matches!(enumerate_low_weight(2, 3), Err(PauliError::WeightExceedsQubits { .. })));

        let labels: Vec<String> = enumerate_low_weight(2, 2).unwrap().iter().map(|q| q.label()).collect();
        assert_eq!(
            labels,
            ["II", "XI", "YI", "ZI", "IX", "IY", "IZ", "XX", "XY", "XZ", "YX", "YY", "YZ", "ZX", "ZY", "ZZ"]
        );
        // (0X, 2X) precedes (0Y, 1X): pair order compares the first letter before the next qubit.
        assert!(p("XIX") < p("YXI"));
        let list = enumerate_low_weight(4, 3).unwrap();
        assert!(list.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn multiplication_phases() {
        assert_eq!(p("X").multiply(&p("X")).unwrap(), p("I"));
        assert_eq!(p("X").multiply(&p("Y")), Err(PauliError::ImaginaryPhase));
        // (X⊗Y)(Y⊗X) = (iZ)⊗(-iZ) = Z⊗Z
        assert_eq!(p("XY").multiply(&p("YX")).unwrap(), p("ZZ"));
        // (X⊗Y)(Y⊗Z) = (iZ)(iX) = -ZX
        assert_eq!(p("XY").multiply(&p("YZ")).unwrap(), p("-ZX"));
        assert_eq!(p("-XI").multiply(&p("-IZ")).unwrap(), p("XZ"));
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(p("-xyZ").to_string(), "-XYZ");
        assert_eq!(p("+IZ").sign(), Sign::Plus);
        assert_eq!("XQ".parse::<PauliString>(), Err(PauliError::InvalidLetter { ch: 'Q', pos: 1 }));
        assert_eq!("-".parse::<PauliString>(), Err(PauliError::EmptyLabel));
        let long = "Z".repeat(64);
        assert_eq!(p(&long).weight(), 64);
        assert!(matches!("X".repeat(65).parse::<PauliString>(), Err(PauliError::TooManyQubits(65))));
    }

    #[test]
    fn restrict_and_embed() {
        let q = p("XIZY");
        let r = q.restrict(&[3, 0]).unwrap();
        assert_eq!(r, p("YX"));
        assert_eq!(PauliString::embed(4, &[3, 0], &r).unwrap(), p("XIIY"));
    }
}
