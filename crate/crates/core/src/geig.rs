//! Generalized eigensolver for `F c = lambda S c` with an ill-conditioned `S`.
//!
//! The default backend diagonalizes `S = U diag(sigma) U^dagger`, drops every
//! direction with `sigma <= threshold * sigma_max` (including the negative ones
//! that round-off and shot noise produce) and solves the ordinary problem
//! `X^dagger F X y = lambda y` with `X = U_r diag(sigma_r^{-1/2})`. For a
//! Hermitian PSD matrix this eigendecomposition is its SVD.
//!
//! Propagator-kind eigenvalues are `e^{-i E tau}` and are mapped back to
//! energies with [`unwrap_energy`]:
//!
//! ```
//! use qkrylov::geig::unwrap_energy;
//! use qkrylov::subspace::PencilKind;
//! use qkrylov::c64;
//!
//! let lam = c64::from_polar(1.0, -0.5);
//! let e = unwrap_energy(lam, 0.5, 0.0, 0, PencilKind::KdmU).unwrap();
//! assert!((e.energy - 1.0).abs() < 1e-12);
//! ```

use std::f64::consts::PI;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::ShotModel;
use crate::linalg::{self, CMat};
use crate::subspace::{PencilKind, SubspacePencil};

/// Relative truncation used on exact data.
pub const EXACT_THRESHOLD: f64 = 1e-12;
/// Condition numbers at or above this are shown as "above threshold".
pub const KAPPA_DISPLAY: f64 = 1e17;
/// Half-width of the `|lambda|` band around one accepted for propagator kinds.
pub const MODULUS_BAND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    SvdRegularized,
    GeneralizedSchur,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd_regularized" | "svd" => Ok(Backend::SvdRegularized),
            "generalized_schur" | "qz" => Ok(Backend::GeneralizedSchur),
            _ => Err(Error::InvalidArgument(format!("unknown solver backend {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaFlag {
    Finite,
    /// `kappa >= 1e17`.
    AboveDisplay,
    /// `sigma_min` is at round-off level relative to `sigma_max`.
    NumericallySingular,
}

/// Relative truncation threshold appropriate for a shot model: a fixed
/// `1e-12` on exact data, ten standard errors (`10 / sqrt(shots)`) otherwise.
pub fn default_threshold(shot: &ShotModel) -> f64 {
    if shot.is_exact() {
        EXACT_THRESHOLD
    } else {
        10.0 / (shot.shots as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct GEigSolution {
    pub kind: PencilKind,
    pub tau: f64,
    pub shift: f64,
    pub backend: Backend,
    /// Eigenvalues of `f(H - shift)`.
    pub eigenvalues: Vec<c64>,
    /// Columns `c`, normalized to `c^dagger S c = 1` where `S` allows it.
    pub coefficients: CMat,
    /// `sigma_max / sigma_min` of `S` before truncation.
    pub condition_number: f64,
    pub kappa_flag: KappaFlag,
    pub retained_rank: usize,
    pub threshold: f64,
    /// `||F c - lambda S c|| / (||F|| ||c||)` per eigenpair.
    pub residuals: Vec<f64>,
}

impl GEigSolution {
    pub fn coefficient(&self, k: usize) -> Vec<c64> {
        self.coefficients.col(k).iter().copied().collect()
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "kind": self.kind,
            "tau": self.tau,
            "shift": self.shift,
            "backend": self.backend,
            "eigenvalues": self.eigenvalues.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
            "condition_number": finite_or_null(self.condition_number),
            "kappa_flag": self.kappa_flag,
            "retained_rank": self.retained_rank,
            "svd_threshold": self.threshold,
            "residuals": self.residuals,
        });
        serde_json::to_string_pretty(&v).expect("solution serializes")
    }
}

pub(crate) fn finite_or_null(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Spectral data of `S` shared by both backends.
struct OverlapSpectrum {
    values: Vec<f64>,
    vectors: CMat,
    sigma_max: f64,
    kappa: f64,
    flag: KappaFlag,
}

fn overlap_spectrum(s: &CMat) -> Result<OverlapSpectrum> {
    let asym = linalg::max_abs_diff(s, &linalg::adjoint(s));
    if asym > 1e-8 {
        log::warn!("overlap matrix asymmetry {asym:.2e} exceeds 1e-8; symmetrizing");
    }
    let (values, vectors) = linalg::hermitian_eigen(&linalg::hermitian_part(s))?;
    let sigma_max = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sigma_min = values.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let kappa = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
    let dim = values.len() as f64;
    let flag = if sigma_min < 1e-300 || sigma_min < dim * f64::EPSILON * sigma_max {
        KappaFlag::NumericallySingular
    } else if kappa >= KAPPA_DISPLAY {
        KappaFlag::AboveDisplay
    } else {
        KappaFlag::Finite
    };
    Ok(OverlapSpectrum { values, vectors, sigma_max, kappa, flag })
}

/// Solve the pencil with the chosen backend.
pub fn solve(pencil: &SubspacePencil, threshold: f64, backend: Backend) -> Result<GEigSolution> {
    let (f, s) = (&pencil.f, &pencil.s);
    if f.nrows() != f.ncols() || s.nrows() != s.ncols() || f.nrows() != s.nrows() {
        return Err(Error::NonSquare(format!(
            "F is {}x{}, S is {}x{}",
            f.nrows(),
            f.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    if f.nrows() == 0 {
        return Err(Error::ZeroRank);
    }
    let spec = overlap_spectrum(s)?;
    let (eigenvalues, coefficients) = match backend {
        Backend::SvdRegularized => solve_projected(pencil, &spec, threshold)?,
        Backend::GeneralizedSchur => solve_qz(pencil, &spec, threshold)?,
    };
    let retained_rank = eigenvalues.len();
    log::debug!("{} pencil: retained rank {retained_rank} of {}", pencil.kind, f.nrows());
    let f_norm = linalg::frobenius(f).max(f64::MIN_POSITIVE);
    let residuals = (0..retained_rank)
        .map(|k| {
            let c: Vec<c64> = coefficients.col(k).iter().copied().collect();
            let fc = linalg::mat_vec(f, &c);
            let sc = linalg::mat_vec(s, &c);
            let r: f64 = fc.iter().zip(&sc).map(|(a, b)| (a - b * eigenvalues[k]).norm_sqr()).sum::<f64>().sqrt();
            let cn: f64 = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            r / (f_norm * cn.max(f64::MIN_POSITIVE))
        })
        .collect();
    Ok(GEigSolution {
        kind: pencil.kind,
        tau: pencil.tau,
        shift: pencil.shift,
        backend,
        eigenvalues,
        coefficients,
        condition_number: spec.kappa,
        kappa_flag: spec.flag,
        retained_rank,
        threshold,
        residuals,
    })
}

fn solve_projected(pencil: &SubspacePencil, spec: &OverlapSpectrum, threshold: f64) -> Result<(Vec<c64>, CMat)> {
    let cutoff = threshold * spec.sigma_max;
    let keep: Vec<usize> = (0..spec.values.len()).filter(|&k| spec.values[k] > cutoff).collect();
    if keep.is_empty() {
        return Err(Error::ZeroRank);
    }
    let dim = pencil.dim();
    let x = CMat::from_fn(dim, keep.len(), |i, r| spec.vectors[(i, keep[r])] / spec.values[keep[r]].sqrt());
    let a = linalg::adjoint(&x) * &pencil.f * &x;
    let (vals, y): (Vec<c64>, CMat) = if pencil.kind.is_h() {
        let (v, y) = linalg::hermitian_eigen(&linalg::hermitian_part(&a))?;
        (v.into_iter().map(|e| c64::new(e, 0.0)).collect(), y)
    } else {
        linalg::eigen(&a)?
    };
    Ok((vals, &x * &y))
}

fn solve_qz(pencil: &SubspacePencil, spec: &OverlapSpectrum, threshold: f64) -> Result<(Vec<c64>, CMat)> {
    let s = linalg::hermitian_part(&pencil.s);
    let (alpha, beta, vecs) = linalg::generalized_eigen(&pencil.f, &s)?;
    // infinite or indeterminate pairs come from the null space of S
    let beta_floor = threshold.max(f64::EPSILON) * spec.sigma_max;
    let mut vals = Vec::new();
    let mut cols = Vec::new();
    for k in 0..alpha.len() {
        if beta[k].norm() <= beta_floor || !alpha[k].re.is_finite() || !alpha[k].im.is_finite() {
            continue;
        }
        let mut lam = alpha[k] / beta[k];
        if pencil.kind.is_h() {
            lam = c64::new(lam.re, 0.0);
        }
        let mut c: Vec<c64> = vecs.col(k).iter().copied().collect();
        let norm = linalg::sandwich(&c, &s, &c).re;
        if norm <= beta_floor {
            continue;
        }
        c.iter_mut().for_each(|x| *x /= norm.sqrt());
        vals.push(lam);
        cols.push(c);
    }
    if vals.is_empty() {
        return Err(Error::ZeroRank);
    }
    let dim = pencil.dim();
    Ok((vals, CMat::from_fn(dim, cols.len(), |i, k| cols[k][i])))
}

/// One energy read off an eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub energy: f64,
    /// Aliasing branch `j` (zero for Hamiltonian kinds).
    pub branch: i64,
    pub source: [f64; 2],
    pub kind: PencilKind,
    /// Index of the eigenpair in the solution.
    pub index: usize,
    /// `|lambda| - 1` for propagator kinds, zero otherwise.
    pub modulus_deviation: f64,
}

/// `E = (atan2(-Im lambda, Re lambda) + 2 pi j) / tau + shift`.
pub fn unwrap_energy(lambda: c64, tau: f64, shift: f64, j: i64, kind: PencilKind) -> Result<EnergyEstimate> {
    if lambda.norm() == 0.0 {
        return Err(Error::InvalidArgument("cannot take the phase of a zero eigenvalue".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
    }
    let theta = (-lambda.im).atan2(lambda.re);
    Ok(EnergyEstimate {
        energy: (theta + 2.0 * PI * j as f64) / tau + shift,
        branch: j,
        source: [lambda.re, lambda.im],
        kind,
        index: 0,
        modulus_deviation: lambda.norm() - 1.0,
    })
}

/// Every retained eigenvalue as an energy (branch 0), in solution order.
pub fn energies(sol: &GEigSolution) -> Result<Vec<EnergyEstimate>> {
    sol.eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &lam)| {
            let mut e = if sol.kind.is_h() {
                EnergyEstimate {
                    energy: lam.re + sol.shift,
                    branch: 0,
                    source: [lam.re, lam.im],
                    kind: sol.kind,
                    index: 0,
                    modulus_deviation: 0.0,
                }
            } else {
                unwrap_energy(lam, sol.tau, sol.shift, 0, sol.kind)?
            };
            e.index = k;
            Ok(e)
        })
        .collect()
}

/// Lowest energy in the retained spectrum.
pub fn select_ground(sol: &GEigSolution) -> Result<EnergyEstimate> {
    let all = energies(sol)?;
    let best = all
        .into_iter()
        .min_by(|a, b| a.energy.total_cmp(&b.energy))
        .ok_or(Error::EmptySpectrum)?;
    if !sol.kind.is_h() && best.modulus_deviation.abs() > MODULUS_BAND {
        log::warn!(
            "selected eigenvalue has |lambda| = {:.3}, outside [0.5, 1.5]",
            best.modulus_deviation + 1.0
        );
    }
    Ok(best)
}
