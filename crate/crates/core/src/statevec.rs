//! Dense state vectors and exact real-time evolution.
//!
//! [`SpectralPropagator`] factors `H = V diag(E) V^dagger` once and then
//! applies `e^{-iHt}` as `V diag(e^{-iE t}) V^dagger` for any `t`. Global phases
//! are kept: matrix elements such as `<phi|U|phi>` depend on them.

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::PauliSumHamiltonian;
use crate::linalg::{self, cis_neg, CMat, ZERO};

/// Allowed deviation of `sum |a|^2` from one at construction.
pub const NORM_TOL: f64 = 1e-10;
/// Drift after evolution that triggers renormalization.
pub const DRIFT_TOL: f64 = 1e-8;
/// `|<a|b>|` above which two states count as overlapping.
pub const ORTHO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<c64>,
}

impl StateVector {
    /// Wrap amplitudes, rejecting anything not normalized to [`NORM_TOL`].
    pub fn new(n_qubits: usize, amps: Vec<c64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes do not describe {n_qubits} qubits",
                amps.len()
            )));
        }
        let n2 = norm_sqr(&amps);
        if (n2 - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n2));
        }
        Ok(StateVector { n_qubits, amps })
    }

    /// Normalize arbitrary nonzero amplitudes.
    pub fn normalized(n_qubits: usize, mut amps: Vec<c64>) -> Result<Self> {
        let n = norm_sqr(&amps).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NotNormalized(n * n));
        }
        amps.iter_mut().for_each(|a| *a /= n);
        Self::new(n_qubits, amps)
    }

    /// Computational basis state from a bit string written with qubit 0 on
    /// the right, e.g. `"011"` sets qubits 0 and 1.
    pub fn basis_state(n_qubits: usize, bits: &str) -> Result<Self> {
        if bits.chars().count() != n_qubits {
            return Err(Error::QubitMismatch { expected: n_qubits, found: bits.chars().count() });
        }
        let mut index = 0usize;
        for c in bits.chars() {
            index <<= 1;
            match c {
                '0' => {}
                '1' => index |= 1,
                _ => return Err(Error::InvalidArgument(format!("invalid bit {c:?}"))),
            }
        }
        Ok(Self::basis_index(n_qubits, index))
    }

    pub fn basis_index(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1usize << n_qubits];
        amps[index] = c64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    /// `|0...0>`
    pub fn vacuum(n_qubits: usize) -> Self {
        Self::basis_index(n_qubits, 0)
    }

    /// `(|a> + |b>) / sqrt 2` for orthogonal inputs.
    pub fn superpose(a: &StateVector, b: &StateVector) -> Result<Self> {
        Self::superpose_phased(a, c64::new(1.0, 0.0), b)
    }

    /// `(phase |a> + |b>) / sqrt 2` for orthogonal inputs and a unit-modulus phase.
    pub fn superpose_phased(a: &StateVector, phase: c64, b: &StateVector) -> Result<Self> {
        a.check_same(b)?;
        let overlap = a.inner(b).norm();
        if overlap > ORTHO_TOL {
            return Err(Error::NotOrthogonal(overlap));
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let amps = a.amps.iter().zip(&b.amps).map(|(x, y)| (phase * x + y) * s).collect();
        Self::normalized(a.n_qubits, amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[c64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> c64 {
        inner(&self.amps, &other.amps)
    }

    /// `<self|H|self>`
    pub fn expectation(&self, h: &PauliSumHamiltonian) -> f64 {
        inner(&self.amps, &h.apply(&self.amps)).re
    }

    fn check_same(&self, other: &StateVector) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitMismatch { expected: self.n_qubits, found: other.n_qubits });
        }
        Ok(())
    }

    /// Fold numerical drift back onto the unit sphere.
    fn renormalize(mut amps: Vec<c64>, n_qubits: usize) -> Self {
        let n2 = norm_sqr(&amps);
        if (n2 - 1.0).abs() > DRIFT_TOL {
            log::warn!("state norm drifted to {n2:.3e}; renormalizing");
            let n = n2.sqrt();
            amps.iter_mut().for_each(|a| *a /= n);
        }
        StateVector { n_qubits, amps }
    }
}

pub(crate) fn norm_sqr(v: &[c64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// `sum conj(a_i) b_i`
pub fn inner(a: &[c64], b: &[c64]) -> c64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

/// Cached spectral factorization of a Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    n_qubits: usize,
    energies: Vec<f64>,
    vectors: CMat,
    fingerprint: u64,
}

impl SpectralPropagator {
    pub fn new(h: &PauliSumHamiltonian) -> Result<Self> {
        let dense = h.to_dense()?;
        let (energies, vectors) = linalg::hermitian_eigen(&dense)?;
        Ok(SpectralPropagator { n_qubits: h.n_qubits(), energies, vectors, fingerprint: h.fingerprint() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Eigenvalues, ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Eigenvectors as columns, aligned with [`Self::energies`].
    pub fn vectors(&self) -> &CMat {
        &self.vectors
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Error unless this propagator was built from `h`.
    pub fn check(&self, h: &PauliSumHamiltonian) -> Result<()> {
        if h.fingerprint() != self.fingerprint {
            return Err(Error::FingerprintMismatch);
        }
        Ok(())
    }

    fn check_state(&self, s: &StateVector) -> Result<()> {
        if s.n_qubits != self.n_qubits {
            return Err(Error::QubitMismatch { expected: self.n_qubits, found: s.n_qubits });
        }
        Ok(())
    }

    /// Eigenbasis coefficients `V^dagger |s>`.
    pub fn project(&self, s: &StateVector) -> Vec<c64> {
        linalg::adjoint_mat_vec(&self.vectors, &s.amps)
    }

    /// `e^{-iHt} |s>`
    pub fn evolve(&self, s: &StateVector, t: f64) -> Result<StateVector> {
        self.check_state(s)?;
        if t == 0.0 {
            return Ok(s.clone());
        }
        let mut coeffs = self.project(s);
        for (c, e) in coeffs.iter_mut().zip(&self.energies) {
            *c *= cis_neg(e * t);
        }
        let amps = linalg::mat_vec(&self.vectors, &coeffs);
        Ok(StateVector::renormalize(amps, self.n_qubits))
    }

    /// Like [`Self::evolve`] but verifies the propagator belongs to `h`.
    pub fn evolve_checked(&self, h: &PauliSumHamiltonian, s: &StateVector, t: f64) -> Result<StateVector> {
        self.check(h)?;
        self.evolve(s, t)
    }

    /// `<a| e^{-iHt} |b>` without forming the evolved state.
    pub fn transition(&self, a: &StateVector, b: &StateVector, t: f64) -> Result<c64> {
        self.check_state(a)?;
        self.check_state(b)?;
        if t == 0.0 {
            return Ok(a.inner(b));
        }
        let pa = self.project(a);
        let pb = self.project(b);
        Ok(self.transition_projected(&pa, &pb, t))
    }

    /// [`Self::transition`] on pre-projected eigenbasis coefficients.
    pub fn transition_projected(&self, pa: &[c64], pb: &[c64], t: f64) -> c64 {
        pa.iter()
            .zip(pb)
            .zip(&self.energies)
            .fold(ZERO, |acc, ((x, y), e)| acc + x.conj() * y * cis_neg(e * t))
    }
}
