//! Pauli-sum Hamiltonians and symmetry operators.
//!
//! A Hamiltonian is a real-weighted sum of `N`-qubit Pauli strings,
//!
//! ```text
//! H = sum_i h_i P_i
//! ```
//!
//! Qubit order: in text form the **rightmost** letter acts on qubit 0, and in
//! state vectors qubit 0 is the least significant bit of the basis index. The
//! same convention is used by every module in the crate.
//!
//! # Text format
//!
//! One term per line, `<coefficient> <letters>`, with `#` starting a comment:
//!
//! ```text
//! # two-qubit example
//! 0.3 ZZ
//! 0.2 XX
//! 0.1 IZ
//! ```
//!
//! Duplicate strings are merged by adding their coefficients. Coefficients
//! must be finite real numbers.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::Deref;

use faer::c64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ZERO};

/// Largest qubit count for which dense `2^N x 2^N` matrices are built.
pub const DEFAULT_DENSE_LIMIT: usize = 14;

/// Tolerance on the symbolic commutator coefficients.
const COMMUTATOR_TOL: f64 = 1e-10;

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of `N` single-qubit Paulis in symplectic (x, z) form.
///
/// Bit `q` of `x` / `z` is set when the factor on qubit `q` is X / Z; Y sets
/// both. As an operator the string equals `i^{ny} X^x Z^z` where `ny` counts
/// the Y factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!(n_qubits <= 64, "at most 64 qubits are supported");
        PauliString { n_qubits, x: 0, z: 0 }
    }

    /// Build from `(qubit, pauli)` pairs; unlisted qubits are identity.
    pub fn from_ops(n_qubits: usize, ops: impl IntoIterator<Item = (usize, Pauli)>) -> Self {
        let mut s = Self::identity(n_qubits);
        for (q, p) in ops {
            assert!(q < n_qubits, "qubit {q} out of range for {n_qubits} qubits");
            s.set(q, p);
        }
        s
    }

    fn set(&mut self, q: usize, p: Pauli) {
        let bit = 1u64 << q;
        self.x &= !bit;
        self.z &= !bit;
        match p {
            Pauli::I => {}
            Pauli::X => self.x |= bit,
            Pauli::Z => self.z |= bit,
            Pauli::Y => {
                self.x |= bit;
                self.z |= bit;
            }
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn get(&self, q: usize) -> Pauli {
        let bit = 1u64 << q;
        match (self.x & bit != 0, self.z & bit != 0) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (false, true) => Pauli::Z,
            (true, true) => Pauli::Y,
        }
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// True when the string contains only I and Z (diagonal in the
    /// computational basis).
    pub fn is_diagonal(&self) -> bool {
        self.x == 0
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// `self * other = phase * result`.
    pub fn mul(&self, other: &PauliString) -> (c64, PauliString) {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        let out = PauliString {
            n_qubits: self.n_qubits,
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        };
        // i^{ny1 + ny2 - ny_out} (-1)^{|z1 & x2|}
        let mut k = self.y_count() as i64 + other.y_count() as i64 - out.y_count() as i64;
        k += 2 * (self.z & other.x).count_ones() as i64;
        (i_pow(k), out)
    }

    /// Phase picked up acting on computational basis state `b`:
    /// `P |b> = phase(b) |b ^ x>`.
    #[inline]
    pub fn basis_phase(&self, b: u64) -> c64 {
        let k = self.y_count() as i64 + 2 * (self.z & b).count_ones() as i64;
        i_pow(k)
    }

    /// `P |psi>` on a dense amplitude vector.
    pub fn apply(&self, amps: &[c64]) -> Vec<c64> {
        let mut out = vec![ZERO; amps.len()];
        for (b, &a) in amps.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let b = b as u64;
            out[(b ^ self.x) as usize] += self.basis_phase(b) * a;
        }
        out
    }
}

fn i_pow(k: i64) -> c64 {
    match k.rem_euclid(4) {
        0 => c64::new(1.0, 0.0),
        1 => c64::new(0.0, 1.0),
        2 => c64::new(-1.0, 0.0),
        _ => c64::new(0.0, -1.0),
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n_qubits).rev() {
            write!(f, "{}", self.get(q).letter())?;
        }
        Ok(())
    }
}

impl std::str::FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters: Vec<char> = s.chars().collect();
        if letters.is_empty() || letters.len() > 64 {
            return Err(Error::InvalidArgument(format!(
                "pauli string must have 1..=64 letters, got {}",
                letters.len()
            )));
        }
        let n = letters.len();
        let mut out = PauliString::identity(n);
        for (pos, c) in letters.into_iter().enumerate() {
            let p = Pauli::from_char(c).ok_or_else(|| {
                Error::InvalidArgument(format!("invalid pauli letter {c:?}"))
            })?;
            out.set(n - 1 - pos, p);
        }
        Ok(out)
    }
}

/// `H = sum_i h_i P_i` with real, finite coefficients and no repeated strings.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSumHamiltonian {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliSumHamiltonian {
    /// Canonicalize a list of terms: duplicates are merged in order of first
    /// appearance.
    pub fn new(n_qubits: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 64 {
            return Err(Error::InvalidArgument(format!("unsupported qubit count {n_qubits}")));
        }
        let mut index: HashMap<PauliString, usize> = HashMap::new();
        let mut merged: Vec<(f64, PauliString)> = Vec::new();
        for (c, p) in terms {
            if p.n_qubits() != n_qubits {
                return Err(Error::QubitMismatch { expected: n_qubits, found: p.n_qubits() });
            }
            if !c.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite coefficient {c}")));
            }
            match index.get(&p) {
                Some(&k) => merged[k].0 += c,
                None => {
                    index.insert(p, merged.len());
                    merged.push((c, p));
                }
            }
        }
        Ok(PauliSumHamiltonian { n_qubits, terms: merged })
    }

    /// Parse the line-oriented text format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n_qubits: Option<usize> = None;
        let mut terms = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: line_no, message };
            let mut tokens = line.split_whitespace();
            let (Some(coef_tok), Some(str_tok), None) = (tokens.next(), tokens.next(), tokens.next())
            else {
                return Err(err(format!("expected '<coefficient> <pauli-letters>', got {line:?}")));
            };
            let coef: f64 = coef_tok.parse().map_err(|_| {
                if coef_tok.contains(['j', 'i', '(']) {
                    err(format!("complex coefficient {coef_tok:?} is not supported"))
                } else {
                    err(format!("malformed coefficient {coef_tok:?}"))
                }
            })?;
            if !coef.is_finite() {
                return Err(err(format!("non-finite coefficient {coef_tok:?}")));
            }
            let p: PauliString = str_tok.parse().map_err(|e: Error| err(e.to_string()))?;
            match n_qubits {
                None => n_qubits = Some(p.n_qubits()),
                Some(n) if n != p.n_qubits() => {
                    return Err(err(format!(
                        "pauli string {str_tok:?} has {} letters, expected {n}",
                        p.n_qubits()
                    )))
                }
                _ => {}
            }
            terms.push((coef, p));
        }
        let n = n_qubits.ok_or(Error::Parse { line: 0, message: "no terms found".into() })?;
        Self::new(n, terms)
    }

    /// Serialize in the text format; `parse(serialize(h)) == h`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (c, p) in &self.terms {
            out.push_str(&format!("{c:?} {p}\n"));
        }
        out
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of terms `L`.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// Coefficient of the all-identity string (zero if absent).
    pub fn identity_coefficient(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(_, p)| p.x == 0 && p.z == 0)
            .map(|(c, _)| c)
            .sum()
    }

    /// `sum_i |h_i|` over the non-identity terms; bounds `|E - identity_coefficient|`.
    pub fn spectral_radius_bound(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(_, p)| p.x != 0 || p.z != 0)
            .map(|(c, _)| c.abs())
            .sum()
    }

    /// `H + c I`
    pub fn shifted(&self, c: f64) -> Self {
        let mut terms = self.terms.clone();
        terms.push((c, PauliString::identity(self.n_qubits)));
        Self::new(self.n_qubits, terms).expect("shift preserves validity")
    }

    /// `<0...0| H |0...0>`: only I/Z strings contribute, each with +1.
    pub fn vacuum_expectation(&self) -> f64 {
        self.terms.iter().filter(|(_, p)| p.is_diagonal()).map(|(c, _)| c).sum()
    }

    /// Dense matrix, subject to [`DEFAULT_DENSE_LIMIT`].
    pub fn to_dense(&self) -> Result<CMat> {
        self.to_dense_with_limit(DEFAULT_DENSE_LIMIT)
    }

    pub fn to_dense_with_limit(&self, limit: usize) -> Result<CMat> {
        if self.n_qubits > limit {
            return Err(Error::DenseLimit { n_qubits: self.n_qubits, limit });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = CMat::zeros(dim, dim);
        for (c, p) in &self.terms {
            for b in 0..dim as u64 {
                let row = (b ^ p.x) as usize;
                m[(row, b as usize)] += p.basis_phase(b) * *c;
            }
        }
        Ok(m)
    }

    /// `H |psi>` without forming the dense matrix.
    pub fn apply(&self, amps: &[c64]) -> Vec<c64> {
        assert_eq!(amps.len(), 1usize << self.n_qubits, "state dimension mismatch");
        let mut out = vec![ZERO; amps.len()];
        for (c, p) in &self.terms {
            for (b, &a) in amps.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let b = b as u64;
                out[(b ^ p.x) as usize] += p.basis_phase(b) * a * *c;
            }
        }
        out
    }

    /// Symbolic commutator `[H, S]` collected as `sum_R c_R R`.
    pub fn commutator(&self, other: &PauliSumHamiltonian) -> Vec<(c64, PauliString)> {
        let mut acc: HashMap<PauliString, c64> = HashMap::new();
        let mut order = Vec::new();
        for (a, p) in &self.terms {
            for (b, q) in &other.terms {
                if p.commutes_with(q) {
                    continue;
                }
                // anticommuting: PQ - QP = 2 PQ
                let (phase, r) = p.mul(q);
                let entry = acc.entry(r).or_insert_with(|| {
                    order.push(r);
                    ZERO
                });
                *entry += phase * (2.0 * a * b);
            }
        }
        order.into_iter().map(|r| (acc[&r], r)).collect()
    }

    /// Stable fingerprint of the canonical term set, independent of term order.
    pub fn fingerprint(&self) -> u64 {
        let mut sorted: Vec<(PauliString, u64)> =
            self.terms.iter().map(|(c, p)| (*p, c.to_bits())).collect();
        sorted.sort();
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.n_qubits.hash(&mut h);
        sorted.hash(&mut h);
        h.finish()
    }
}

impl fmt::Display for PauliSumHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

/// Conserved quantity `S` with `[H, S] = 0`, stored as a Pauli sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryOperator(PauliSumHamiltonian);

impl SymmetryOperator {
    pub fn new(op: PauliSumHamiltonian) -> Self {
        SymmetryOperator(op)
    }

    /// Particle number `sum_q (I - Z_q) / 2` in the Jordan-Wigner encoding.
    pub fn particle_number(n_qubits: usize) -> Self {
        let mut terms = vec![(n_qubits as f64 / 2.0, PauliString::identity(n_qubits))];
        terms.extend((0..n_qubits).map(|q| (-0.5, PauliString::from_ops(n_qubits, [(q, Pauli::Z)]))));
        SymmetryOperator(PauliSumHamiltonian::new(n_qubits, terms).expect("valid terms"))
    }

    /// Total magnetization `sum_q Z_q`.
    pub fn total_z(n_qubits: usize) -> Self {
        let terms = (0..n_qubits).map(|q| (1.0, PauliString::from_ops(n_qubits, [(q, Pauli::Z)])));
        SymmetryOperator(PauliSumHamiltonian::new(n_qubits, terms).expect("valid terms"))
    }

    pub fn as_sum(&self) -> &PauliSumHamiltonian {
        &self.0
    }
}

impl Deref for SymmetryOperator {
    type Target = PauliSumHamiltonian;

    fn deref(&self) -> &PauliSumHamiltonian {
        &self.0
    }
}

/// `[H, S] = 0`?
///
/// Diagonal pairs commute trivially; otherwise the commutator is expanded
/// symbolically and every collected coefficient must vanish.
pub fn commutes(h: &PauliSumHamiltonian, s: &SymmetryOperator) -> bool {
    if h.n_qubits() != s.n_qubits() {
        log::warn!("commutes: qubit counts differ ({} vs {})", h.n_qubits(), s.n_qubits());
        return false;
    }
    let all_diag = h.terms().iter().chain(s.terms()).all(|(_, p)| p.is_diagonal());
    if all_diag {
        return true;
    }
    h.commutator(s).iter().all(|(c, _)| c.norm() < COMMUTATOR_TOL)
}
