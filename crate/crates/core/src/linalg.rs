//! Thin wrappers over `faer` for the handful of dense factorizations used
//! throughout the crate.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = Mat<c64>;

pub(crate) const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: c64 = c64 { re: 1.0, im: 0.0 };

/// `e^{-i x}`
#[inline]
pub(crate) fn cis_neg(x: f64) -> c64 {
    c64::new(x.cos(), -x.sin())
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
///
/// Matrices whose entries are all real are routed through the real symmetric
/// solver, which is several times faster for the dense Hamiltonians we build.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = m.nrows();
    let is_real = (0..n).all(|j| (0..n).all(|i| m[(i, j)].im == 0.0));
    if is_real {
        let re = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)].re);
        let evd = re
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("{e:?}")))?;
        let vals = evd.S().column_vector().iter().copied().collect();
        let u = evd.U();
        let vecs = CMat::from_fn(n, n, |i, j| c64::new(u[(i, j)], 0.0));
        return Ok((vals, vecs));
    }
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("{e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|x| x.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Singular values, descending.
pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    m.singular_values()
        .map_err(|e| Error::Numerical(format!("{e:?}")))
}

/// Eigenpairs of a general complex matrix (unordered).
pub fn eigen(m: &CMat) -> Result<(Vec<c64>, CMat)> {
    let evd = m.eigen().map_err(|e| Error::Numerical(format!("{e:?}")))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

/// Generalized eigen decomposition through the complex QZ algorithm.
/// Returns `(alpha, beta, vectors)` with eigenvalues `alpha / beta`.
pub fn generalized_eigen(a: &CMat, b: &CMat) -> Result<(Vec<c64>, Vec<c64>, CMat)> {
    let gevd = a
        .generalized_eigen(b)
        .map_err(|e| Error::Numerical(format!("{e:?}")))?;
    let alpha = gevd.S_a().column_vector().iter().copied().collect();
    let beta = gevd.S_b().column_vector().iter().copied().collect();
    Ok((alpha, beta, gevd.U().to_owned()))
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint().to_owned()
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut worst = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    worst
}

pub fn frobenius(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// `m v` for a column stored as a slice.
pub fn mat_vec(m: &CMat, v: &[c64]) -> Vec<c64> {
    assert_eq!(m.ncols(), v.len());
    let mut out = vec![ZERO; m.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == ZERO {
            continue;
        }
        let col = m.col(j);
        for (o, &mij) in out.iter_mut().zip(col.iter()) {
            *o += mij * vj;
        }
    }
    out
}

/// `m^dagger v`
pub fn adjoint_mat_vec(m: &CMat, v: &[c64]) -> Vec<c64> {
    assert_eq!(m.nrows(), v.len());
    (0..m.ncols())
        .map(|j| {
            m.col(j)
                .iter()
                .zip(v)
                .fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
        })
        .collect()
}

/// `x^dagger m y`
pub fn sandwich(x: &[c64], m: &CMat, y: &[c64]) -> c64 {
    let my = mat_vec(m, y);
    x.iter().zip(&my).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
}

/// Symmetrized `(m + m^dagger) / 2`, used to strip round-off asymmetry.
pub fn hermitian_part(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}
