//! Brute-force ground truth.
//!
//! Everything here works on dense matrices and is meant as the reference the
//! estimators and solvers are compared against. Two propagation paths are
//! provided: the spectral one shared with [`SpectralPropagator`] and an
//! independent scaling-and-squaring Taylor exponential.

use faer::c64;

use crate::error::{Error, Result};
use crate::hamiltonian::PauliSumHamiltonian;
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::statevec::{self, SpectralPropagator, StateVector};

/// Per-pair residual bound `||H v - E v||`.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Full spectrum, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub vectors: CMat,
}

impl Spectrum {
    pub fn ground_energy(&self) -> f64 {
        self.energies[0]
    }

    /// Eigenvector `k` as a state.
    pub fn state(&self, k: usize) -> StateVector {
        let amps: Vec<c64> = self.vectors.col(k).iter().copied().collect();
        let n_qubits = amps.len().trailing_zeros() as usize;
        StateVector::normalized(n_qubits, amps).expect("eigenvectors are unit vectors")
    }

    /// Index of the eigenvalue closest to `e`.
    pub fn nearest(&self, e: f64) -> usize {
        let mut best = 0;
        for (k, &ek) in self.energies.iter().enumerate() {
            if (ek - e).abs() < (self.energies[best] - e).abs() {
                best = k;
            }
        }
        best
    }

    /// Distinct eigenvalues (within `tol`) carrying weight above `weight_tol` in `s`.
    pub fn support(&self, s: &StateVector, tol: f64, weight_tol: f64) -> Vec<f64> {
        let coeffs = linalg::adjoint_mat_vec(&self.vectors, s.amplitudes());
        let mut levels: Vec<(f64, f64)> = Vec::new();
        for (e, c) in self.energies.iter().zip(&coeffs) {
            match levels.last_mut() {
                Some((le, w)) if (e - *le).abs() < tol => *w += c.norm_sqr(),
                _ => levels.push((*e, c.norm_sqr())),
            }
        }
        levels.into_iter().filter(|(_, w)| *w > weight_tol).map(|(e, _)| e).collect()
    }
}

/// Dense diagonalization with a residual check on every pair.
pub fn diagonalize(h: &PauliSumHamiltonian) -> Result<Spectrum> {
    let dense = h.to_dense()?;
    let (energies, vectors) = linalg::hermitian_eigen(&dense)?;
    for (k, e) in energies.iter().enumerate() {
        let v: Vec<c64> = vectors.col(k).iter().copied().collect();
        let hv = h.apply(&v);
        let r: f64 = hv.iter().zip(&v).map(|(a, b)| (a - b * *e).norm_sqr()).sum::<f64>().sqrt();
        if r > RESIDUAL_TOL {
            return Err(Error::Numerical(format!("eigenpair {k} residual {r:.2e}")));
        }
    }
    Ok(Spectrum { energies, vectors })
}

/// `<phi_i| e^{-i n tau H} |phi_j>` through a fresh spectral factorization.
pub fn direct_element(
    h: &PauliSumHamiltonian,
    phi_i: &StateVector,
    phi_j: &StateVector,
    n: i64,
    tau: f64,
) -> Result<c64> {
    let p = SpectralPropagator::new(h)?;
    p.transition(phi_i, phi_j, n as f64 * tau)
}

/// `e^{-iHt}` by scaling and squaring a truncated Taylor series.
///
/// Independent of any eigensolver, used to cross-check the spectral path.
pub fn expm_propagator(h: &PauliSumHamiltonian, t: f64) -> Result<CMat> {
    let dense = h.to_dense()?;
    let dim = dense.nrows();
    // A = -i t H, scaled so that ||A / 2^s||_1 <= 1/2
    let norm1 = (0..dim)
        .map(|j| (0..dim).map(|i| dense[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * t.abs();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm1 * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let factor = c64::new(0.0, -t * scale);
    let a = CMat::from_fn(dim, dim, |i, j| dense[(i, j)] * factor);
    let mut result = CMat::from_fn(dim, dim, |i, j| if i == j { ONE } else { ZERO });
    let mut term = result.clone();
    for k in 1..=30 {
        let inv = 1.0 / k as f64;
        let next = &term * &a;
        term = CMat::from_fn(dim, dim, |i, j| next[(i, j)] * inv);
        result += &term;
        if linalg::frobenius(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// `<phi_i| e^{-i n tau H} |phi_j>` via [`expm_propagator`].
pub fn expm_element(
    h: &PauliSumHamiltonian,
    phi_i: &StateVector,
    phi_j: &StateVector,
    n: i64,
    tau: f64,
) -> Result<c64> {
    let u = expm_propagator(h, n as f64 * tau)?;
    Ok(linalg::sandwich(phi_i.amplitudes(), &u, phi_j.amplitudes()))
}

/// Ground energy by power iteration on `c I - H`, matrix-free.
///
/// `c` is taken from the Pauli-norm bound so the ground state dominates.
/// Stops once the residual `||H v - E v||` drops below `sqrt(tol)`, which
/// bounds the energy error by roughly `tol / gap`. Slow but independent of
/// dense factorizations.
pub fn power_iteration_ground(h: &PauliSumHamiltonian, tol: f64, max_iter: usize) -> f64 {
    let c = h.identity_coefficient() + h.spectral_radius_bound();
    let dim = 1usize << h.n_qubits();
    // deterministic pseudo-random start so no symmetry sector is missed
    let mut v: Vec<c64> = (0..dim)
        .map(|i| {
            let x = (i as f64 * 12.9898 + 1.0).sin() * 43758.5453;
            let y = (i as f64 * 78.233 + 2.0).sin() * 12543.1234;
            c64::new(x - x.floor() - 0.5, y - y.floor() - 0.5)
        })
        .collect();
    let n = statevec::norm_sqr(&v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    let target = tol.sqrt();
    let mut energy = f64::NAN;
    for _ in 0..max_iter {
        let hv = h.apply(&v);
        energy = statevec::inner(&v, &hv).re;
        let residual = hv.iter().zip(&v).map(|(a, b)| (a - b * energy).norm_sqr()).sum::<f64>().sqrt();
        if residual < target {
            break;
        }
        let mut w: Vec<c64> = v.iter().zip(&hv).map(|(x, y)| x * c - y).collect();
        let n = statevec::norm_sqr(&w).sqrt();
        w.iter_mut().for_each(|x| *x /= n);
        v = w;
    }
    energy
}

/// Filter state `sum_{n<M} e^{-i n (H - E_j) tau} |phi_o>` by explicit propagation.
pub fn filter_state(
    prop: &SpectralPropagator,
    phi_o: &StateVector,
    e_filter: f64,
    m: usize,
    tau: f64,
) -> Result<Vec<c64>> {
    let mut acc = vec![ZERO; phi_o.dim()];
    for n in 0..m {
        let t = n as f64 * tau;
        let evolved = prop.evolve(phi_o, t)?;
        let phase = c64::new(0.0, e_filter * t).exp();
        for (a, x) in acc.iter_mut().zip(evolved.amplitudes()) {
            *a += phase * x;
        }
    }
    Ok(acc)
}
