//! Assembly of the `(F, S)` pencils for the four subspace methods.
//!
//! Krylov-basis (KDM) pencils are built from measured correlation data:
//!
//! ```text
//! S[n][n'] = C_{n'-n}          C_k = <phi_o|U^k|phi_o>,  C_{-k} = conj(C_k)
//! F_U[n][n'] = C_{n'-n+1}
//! F_H[n][n'] = g_{n'-n}        g_k = <phi_o|H U^k|phi_o>, g_{-k} = conj(g_k)
//! ```
//!
//! Filter-basis (FDM) pencils never touch the device again: they are the
//! conjugations `W^dagger F W`, `W^dagger S W` of the Krylov pencils, where
//! column `j` of `W` holds `e^{+i n E_j tau}` and so builds the filter state
//! `sum_n e^{-i n (H - E_j) tau} |phi_o>`.
//!
//! An energy shift `c` (working with `H - c` instead of `H`) is pure
//! post-processing on stored data; the shift is carried on the pencil so that
//! solvers can add it back.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CallLedger, Category, ElementEstimator, ShotModel};
use crate::hamiltonian::PauliSumHamiltonian;
use crate::linalg::{self, CMat, ZERO};
use crate::statevec::{SpectralPropagator, StateVector};

/// Below this `|1 - e^{-i x}|` the geometric series is summed term by term.
const GEOMETRIC_SINGULAR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PencilKind {
    #[serde(rename = "KDM_H")]
    KdmH,
    #[serde(rename = "KDM_U")]
    KdmU,
    #[serde(rename = "FDM_H")]
    FdmH,
    #[serde(rename = "FDM_U")]
    FdmU,
}

impl PencilKind {
    /// `f(H) = H` rather than `e^{-iH tau}`.
    pub fn is_h(self) -> bool {
        matches!(self, PencilKind::KdmH | PencilKind::FdmH)
    }

    pub fn is_fdm(self) -> bool {
        matches!(self, PencilKind::FdmH | PencilKind::FdmU)
    }

    /// The Krylov kind whose data an FDM pencil is derived from.
    pub fn krylov(self) -> PencilKind {
        match self {
            PencilKind::KdmH | PencilKind::FdmH => PencilKind::KdmH,
            PencilKind::KdmU | PencilKind::FdmU => PencilKind::KdmU,
        }
    }

    pub fn filtered(self) -> PencilKind {
        match self {
            PencilKind::KdmH | PencilKind::FdmH => PencilKind::FdmH,
            PencilKind::KdmU | PencilKind::FdmU => PencilKind::FdmU,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PencilKind::KdmH => "KDM_H",
            PencilKind::KdmU => "KDM_U",
            PencilKind::FdmH => "FDM_H",
            PencilKind::FdmU => "FDM_U",
        }
    }
}

impl fmt::Display for PencilKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PencilKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "KDM_H" => Ok(PencilKind::KdmH),
            "KDM_U" => Ok(PencilKind::KdmU),
            "FDM_H" => Ok(PencilKind::FdmH),
            "FDM_U" => Ok(PencilKind::FdmU),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

/// Filter energies `E_j`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterGrid {
    pub e_min: f64,
    pub e_max: f64,
    energies: Vec<f64>,
}

impl FilterGrid {
    /// `j` evenly spaced energies including both endpoints; a single energy
    /// sits at the midpoint.
    pub fn uniform(e_min: f64, e_max: f64, j: usize) -> Result<Self> {
        if !(e_min < e_max) || !e_min.is_finite() || !e_max.is_finite() {
            return Err(Error::InvalidArgument(format!("filter window [{e_min}, {e_max}] is empty")));
        }
        if j == 0 {
            return Err(Error::InvalidArgument("filter grid needs J >= 1".into()));
        }
        let energies = if j == 1 {
            vec![0.5 * (e_min + e_max)]
        } else {
            let step = (e_max - e_min) / (j - 1) as f64;
            (0..j).map(|k| if k == j - 1 { e_max } else { e_min + k as f64 * step }).collect()
        };
        Ok(FilterGrid { e_min, e_max, energies })
    }

    /// Arbitrary energies (sorted on input).
    pub fn from_energies(mut energies: Vec<f64>) -> Result<Self> {
        if energies.is_empty() || energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("filter energies must be finite and nonempty".into()));
        }
        energies.sort_by(f64::total_cmp);
        Ok(FilterGrid { e_min: energies[0], e_max: *energies.last().unwrap(), energies })
    }

    /// `E_j = offset + 2 pi j / (M tau)`, `j = 0..M`: makes `W` a scaled DFT.
    pub fn dft(m: usize, tau: f64, offset: f64) -> Self {
        let energies: Vec<f64> = (0..m).map(|j| offset + 2.0 * PI * j as f64 / (m as f64 * tau)).collect();
        FilterGrid { e_min: energies[0], e_max: *energies.last().unwrap(), energies }
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn width(&self) -> f64 {
        self.e_max - self.e_min
    }
}

/// The `M x J` change of basis from Krylov to filter states.
#[derive(Debug, Clone)]
pub struct TransformW {
    pub matrix: CMat,
    /// Set when `J = M` and the energies are spaced by `2 pi / (M tau)`, in
    /// which case `W^dagger W = M I`.
    pub is_dft: bool,
}

/// `W[n][j] = e^{+i n E_j tau}`.
pub fn build_w(grid: &FilterGrid, m: usize, tau: f64) -> TransformW {
    build_w_shifted(grid, m, tau, 0.0)
}

/// `W` for a pencil expressed in the frame of `H - shift`.
pub fn build_w_shifted(grid: &FilterGrid, m: usize, tau: f64, shift: f64) -> TransformW {
    let e = grid.energies();
    let matrix = CMat::from_fn(m, e.len(), |n, j| linalg::cis_neg(-(n as f64) * (e[j] - shift) * tau));
    let spacing = 2.0 * PI / (m as f64 * tau);
    let is_dft = e.len() == m
        && e.iter().enumerate().all(|(j, ej)| (ej - e[0] - j as f64 * spacing).abs() <= 1e-12 * (1.0 + ej.abs()));
    if is_dft {
        log::debug!("filter grid is a {m}-point DFT grid");
    }
    TransformW { matrix, is_dft }
}

/// A generalized eigenproblem `F c = lambda S c` plus provenance.
#[derive(Debug, Clone)]
pub struct SubspacePencil {
    pub kind: PencilKind,
    pub f: CMat,
    pub s: CMat,
    pub tau: f64,
    /// Krylov steps the data came from.
    pub m: usize,
    /// The pencil describes `H - shift`.
    pub shift: f64,
    pub grid: Option<FilterGrid>,
}

impl SubspacePencil {
    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    /// Largest deviation from Hermiticity of `S`.
    pub fn s_asymmetry(&self) -> f64 {
        linalg::max_abs_diff(&self.s, &linalg::adjoint(&self.s))
    }

    /// `true` if `S` is Hermitian and PSD to `tol`.
    pub fn s_is_psd(&self, tol: f64) -> Result<bool> {
        if self.s_asymmetry() > tol {
            return Ok(false);
        }
        let (vals, _) = linalg::hermitian_eigen(&linalg::hermitian_part(&self.s))?;
        Ok(vals.first().map_or(true, |v| *v >= -tol))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PencilJson::from(self)).expect("pencil serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: PencilJson = serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        j.try_into()
    }
}

/// Row-major `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
struct PencilJson {
    kind: PencilKind,
    tau: f64,
    m: usize,
    shift: f64,
    grid: Option<FilterGrid>,
    #[serde(rename = "F")]
    f: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "S")]
    s: Vec<Vec<[f64; 2]>>,
}

fn rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn from_rows(r: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let n = r.len();
    if r.iter().any(|row| row.len() != n) {
        return Err(Error::NonSquare(format!("{n} rows of unequal length")));
    }
    Ok(CMat::from_fn(n, n, |i, j| c64::new(r[i][j][0], r[i][j][1])))
}

impl From<&SubspacePencil> for PencilJson {
    fn from(p: &SubspacePencil) -> Self {
        PencilJson {
            kind: p.kind,
            tau: p.tau,
            m: p.m,
            shift: p.shift,
            grid: p.grid.clone(),
            f: rows(&p.f),
            s: rows(&p.s),
        }
    }
}

impl TryFrom<PencilJson> for SubspacePencil {
    type Error = Error;

    fn try_from(j: PencilJson) -> Result<Self> {
        let f = from_rows(&j.f)?;
        let s = from_rows(&j.s)?;
        if f.nrows() != s.nrows() {
            return Err(Error::NonSquare(format!("F is {0}x{0}, S is {1}x{1}", f.nrows(), s.nrows())));
        }
        Ok(SubspacePencil { kind: j.kind, f, s, tau: j.tau, m: j.m, shift: j.shift, grid: j.grid })
    }
}

/// How the Hamiltonian-weighted elements are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HElementPath {
    /// Toeplitz sequence `g_k`: valid because the evolution commutes with H.
    #[default]
    Toeplitz,
    /// Every `<phi_n|P_i|phi_n'>` measured separately.
    Full,
}

/// Measured data shared by every pencil of one run, grown on demand.
///
/// All requests go through the estimator and are charged to the ledger
/// exactly once; later pencils reuse what is stored.
pub struct KrylovData<'a> {
    prop: &'a SpectralPropagator,
    h: &'a PauliSumHamiltonian,
    phi_o: StateVector,
    tau: f64,
    estimator: ElementEstimator,
    shot: ShotModel,
    path: HElementPath,
    /// `C_0, C_1, ...`
    c: Vec<c64>,
    /// `g_0, g_1, ...` (Toeplitz path)
    g: Vec<c64>,
    /// `F_H[n][n']` rows (full path)
    fh: Vec<Vec<c64>>,
    /// `P_i |phi_o>` cached for the Toeplitz path.
    p_phi: Vec<StateVector>,
}

impl<'a> KrylovData<'a> {
    pub fn new(
        prop: &'a SpectralPropagator,
        h: &'a PauliSumHamiltonian,
        phi_o: &StateVector,
        tau: f64,
        estimator: ElementEstimator,
        shot: ShotModel,
    ) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
        }
        prop.check(h)?;
        if phi_o.n_qubits() != h.n_qubits() {
            return Err(Error::QubitMismatch { expected: h.n_qubits(), found: phi_o.n_qubits() });
        }
        Ok(KrylovData {
            prop,
            h,
            phi_o: phi_o.clone(),
            tau,
            estimator,
            shot,
            path: HElementPath::Toeplitz,
            c: vec![c64::new(1.0, 0.0)],
            g: Vec::new(),
            fh: Vec::new(),
            p_phi: Vec::new(),
        })
    }

    pub fn with_h_path(mut self, path: HElementPath) -> Self {
        self.path = path;
        self
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn phi_o(&self) -> &StateVector {
        &self.phi_o
    }

    pub fn correlations(&self) -> &[c64] {
        &self.c
    }

    /// Make `C_0..=C_k` available, charging new ones to `cat`.
    pub fn ensure_c(&mut self, k: usize, cat: Category, ledger: &CallLedger) -> Result<()> {
        let start = self.c.len();
        if k < start {
            return Ok(());
        }
        let new: Vec<c64> = (start..=k)
            .into_par_iter()
            .map(|n| {
                self.estimator
                    .correlation_as(cat, self.prop, &self.phi_o, n as i64, self.tau, &self.shot, ledger)
            })
            .collect::<Result<_>>()?;
        self.c.extend(new);
        Ok(())
    }

    /// Make `g_0..=g_k` (Toeplitz) or the leading `(k+1) x (k+1)` block of
    /// `F_H` (full path) available.
    pub fn ensure_h(&mut self, k: usize, ledger: &CallLedger) -> Result<()> {
        match self.path {
            HElementPath::Toeplitz => self.ensure_g(k, ledger),
            HElementPath::Full => self.ensure_fh(k + 1, ledger),
        }
    }

    fn ensure_g(&mut self, k: usize, ledger: &CallLedger) -> Result<()> {
        if self.p_phi.is_empty() {
            self.p_phi = self
                .h
                .terms()
                .iter()
                .map(|(_, p)| StateVector::new(self.h.n_qubits(), p.apply(self.phi_o.amplitudes())))
                .collect::<Result<_>>()?;
        }
        let start = self.g.len();
        if k < start {
            return Ok(());
        }
        let new: Vec<c64> = (start..=k)
            .into_par_iter()
            .map(|m| {
                // <phi_o|P_i U^m|phi_o> = <P_i phi_o| U^m |phi_o>
                let mut acc = ZERO;
                for ((coef, _), pphi) in self.h.terms().iter().zip(&self.p_phi) {
                    ledger.record(Category::FHElement, 1, 0);
                    let e = self
                        .estimator
                        .element(self.prop, pphi, &self.phi_o, m as i64, self.tau, &self.shot, ledger)?;
                    acc += e * *coef;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        self.g.extend(new);
        Ok(())
    }

    fn ensure_fh(&mut self, dim: usize, ledger: &CallLedger) -> Result<()> {
        let old = self.fh.len();
        if dim <= old {
            return Ok(());
        }
        let basis: Vec<StateVector> = (0..dim)
            .map(|n| self.prop.evolve(&self.phi_o, n as f64 * self.tau))
            .collect::<Result<_>>()?;
        // new entries: every (n, n') with max(n, n') >= old
        let pairs: Vec<(usize, usize)> =
            (0..dim).flat_map(|n| (0..dim).map(move |np| (n, np))).filter(|(n, np)| *n.max(np) >= old).collect();
        let values: Vec<c64> = pairs
            .par_iter()
            .map(|&(n, np)| {
                let mut acc = ZERO;
                for (coef, p) in self.h.terms() {
                    ledger.record(Category::FHElement, 1, 0);
                    let pb = StateVector::new(self.h.n_qubits(), p.apply(basis[np].amplitudes()))?;
                    let e = self.estimator.element(self.prop, &basis[n], &pb, 0, self.tau, &self.shot, ledger)?;
                    acc += e * *coef;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        for row in self.fh.iter_mut() {
            row.resize(dim, ZERO);
        }
        self.fh.resize(dim, vec![ZERO; dim]);
        for ((n, np), v) in pairs.into_iter().zip(values) {
            self.fh[n][np] = v;
        }
        Ok(())
    }

    /// `C'_k` in the frame of `H - shift`, any sign of `k`.
    fn c_shifted(&self, k: i64, shift: f64) -> c64 {
        let v = self.c[k.unsigned_abs() as usize] * linalg::cis_neg(-(k.abs() as f64) * shift * self.tau);
        if k < 0 {
            v.conj()
        } else {
            v
        }
    }

    fn g_shifted(&self, k: i64, shift: f64) -> c64 {
        let a = k.unsigned_abs() as usize;
        let v = (self.g[a] - self.c[a] * shift) * linalg::cis_neg(-(a as f64) * shift * self.tau);
        if k < 0 {
            v.conj()
        } else {
            v
        }
    }

    /// Krylov `S` of size `m` (needs `C_0..C_{m-1}`).
    pub fn overlap(&self, m: usize, shift: f64) -> Result<CMat> {
        self.need_c(m - 1)?;
        Ok(CMat::from_fn(m, m, |n, np| self.c_shifted(np as i64 - n as i64, shift)))
    }

    /// Krylov `F_U` of size `m` (needs `C_0..C_m`).
    pub fn propagator_matrix(&self, m: usize, shift: f64) -> Result<CMat> {
        self.need_c(m)?;
        Ok(CMat::from_fn(m, m, |n, np| self.c_shifted(np as i64 - n as i64 + 1, shift)))
    }

    /// Krylov `F_H` of size `m`.
    pub fn hamiltonian_matrix(&self, m: usize, shift: f64) -> Result<CMat> {
        self.need_c(m - 1)?;
        match self.path {
            HElementPath::Toeplitz => {
                if self.g.len() < m {
                    return Err(Error::InvalidArgument(format!("g_{} not measured", m - 1)));
                }
                Ok(CMat::from_fn(m, m, |n, np| self.g_shifted(np as i64 - n as i64, shift)))
            }
            HElementPath::Full => {
                if self.fh.len() < m {
                    return Err(Error::InvalidArgument(format!("F_H block {m} not measured")));
                }
                Ok(CMat::from_fn(m, m, |n, np| {
                    let d = np as i64 - n as i64;
                    let s = self.c_shifted(d, 0.0);
                    (self.fh[n][np] - s * shift) * linalg::cis_neg(-(d as f64) * shift * self.tau)
                }))
            }
        }
    }

    fn need_c(&self, k: usize) -> Result<()> {
        if self.c.len() <= k {
            return Err(Error::InvalidArgument(format!("C_{k} not measured")));
        }
        Ok(())
    }

    /// Krylov pencil of size `m` from stored data.
    pub fn pencil(&self, kind: PencilKind, m: usize, shift: f64) -> Result<SubspacePencil> {
        if m == 0 {
            return Err(Error::InvalidArgument("pencil needs M >= 1".into()));
        }
        let kind = kind.krylov();
        let s = self.overlap(m, shift)?;
        let f = if kind.is_h() { self.hamiltonian_matrix(m, shift)? } else { self.propagator_matrix(m, shift)? };
        Ok(SubspacePencil { kind, f, s, tau: self.tau, m, shift, grid: None })
    }
}

/// Options for [`build_kdm`].
#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    pub h_path: HElementPath,
    pub shift: f64,
}

/// Measure and assemble a Krylov pencil of size `m` in one go.
///
/// Ledger: `KDM_U` charges `C_1..C_{M-1}` as overlaps and `C_M` as the
/// extra propagator call (`M` in total). `KDM_H` charges `L M` Hamiltonian
/// elements on the Toeplitz path, `L M^2` on the full path, plus `M - 1`
/// overlaps.
#[allow(clippy::too_many_arguments)]
pub fn build_kdm(
    kind: PencilKind,
    prop: &SpectralPropagator,
    h: &PauliSumHamiltonian,
    phi_o: &StateVector,
    m: usize,
    tau: f64,
    estimator: ElementEstimator,
    shot: ShotModel,
    ledger: &CallLedger,
    opts: &BuildOptions,
) -> Result<SubspacePencil> {
    if kind.is_fdm() {
        return Err(Error::InvalidArgument(format!("{kind} is built with build_fdm")));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    let mut data = KrylovData::new(prop, h, phi_o, tau, estimator, shot)?.with_h_path(opts.h_path);
    data.ensure_c(m - 1, Category::OverlapCn, ledger)?;
    if kind.is_h() {
        data.ensure_h(m - 1, ledger)?;
    } else {
        data.ensure_c(m, Category::FUExtra, ledger)?;
    }
    data.pencil(kind, m, opts.shift)
}

/// `F_J = W^dagger F_K W`, `S_J = W^dagger S_K W`. No device calls.
pub fn build_fdm(kdm: &SubspacePencil, grid: &FilterGrid) -> Result<SubspacePencil> {
    if kdm.kind.is_fdm() {
        return Err(Error::InvalidArgument("build_fdm expects a Krylov pencil".into()));
    }
    let m = kdm.dim();
    if grid.len() > m {
        log::warn!("filter grid has J = {} > M = {m}; S_J is rank deficient", grid.len());
    }
    let w = build_w_shifted(grid, m, kdm.tau, kdm.shift).matrix;
    let wh = linalg::adjoint(&w);
    let f = &wh * &kdm.f * &w;
    let s = &wh * &kdm.s * &w;
    Ok(SubspacePencil { kind: kdm.kind.filtered(), f, s, tau: kdm.tau, m: kdm.m, shift: kdm.shift, grid: Some(grid.clone()) })
}

/// Eigenbasis amplitudes of the filter state at `e_filter`:
/// `c_k (1 - e^{-i M x}) / (1 - e^{-i x})` with `x = (E_k - E_j) tau`.
pub fn filter_state_coefficients(
    prop: &SpectralPropagator,
    phi_o: &StateVector,
    e_filter: f64,
    m: usize,
    tau: f64,
) -> Vec<c64> {
    let coeffs = prop.project(phi_o);
    coeffs
        .iter()
        .zip(prop.energies())
        .map(|(c, e)| {
            let x = (e - e_filter) * tau;
            let denom = c64::new(1.0, 0.0) - linalg::cis_neg(x);
            let factor = if denom.norm() < GEOMETRIC_SINGULAR {
                (0..m).fold(ZERO, |acc, n| acc + linalg::cis_neg(n as f64 * x))
            } else {
                (c64::new(1.0, 0.0) - linalg::cis_neg(m as f64 * x)) / denom
            };
            c * factor
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;

    fn z_setup() -> (PauliSumHamiltonian, SpectralPropagator, StateVector) {
        let h = PauliSumHamiltonian::parse("1.0 Z").unwrap();
        let p = SpectralPropagator::new(&h).unwrap();
        let plus = StateVector::normalized(1, vec![c64::new(1.0, 0.0); 2]).unwrap();
        (h, p, plus)
    }

    fn close(a: c64, re: f64, im: f64) -> bool {
        (a - c64::new(re, im)).norm() < 1e-5
    }

    #[test]
    fn kdm_u_two_step_example() {
        let (h, p, plus) = z_setup();
        let l = CallLedger::new();
        let pen = build_kdm(PencilKind::KdmU, &p, &h, &plus, 2, 0.5, ElementEstimator::Direct, ShotModel::exact(), &l, &Default::default()).unwrap();
        assert!(close(pen.s[(0, 0)], 1.0, 0.0) && close(pen.s[(0, 1)], 0.87758, 0.0));
        assert!(close(pen.s[(1, 0)], 0.87758, 0.0) && close(pen.s[(1, 1)], 1.0, 0.0));
        assert!(close(pen.f[(0, 0)], 0.87758, 0.0) && close(pen.f[(0, 1)], 0.54030, 0.0));
        assert!(close(pen.f[(1, 0)], 1.0, 0.0) && close(pen.f[(1, 1)], 0.87758, 0.0));
        assert_eq!(l.calls(Category::OverlapCn), 1);
        assert_eq!(l.calls(Category::FUExtra), 1);
        assert_eq!(l.total_calls(), 2);
    }

    #[test]
    fn kdm_h_two_step_example() {
        let (h, p, plus) = z_setup();
        let l = CallLedger::new();
        let pen = build_kdm(PencilKind::KdmH, &p, &h, &plus, 2, 0.5, ElementEstimator::Direct, ShotModel::exact(), &l, &Default::default()).unwrap();
        assert!(close(pen.f[(0, 0)], 0.0, 0.0) && close(pen.f[(1, 1)], 0.0, 0.0));
        assert!(close(pen.f[(0, 1)], 0.0, -0.47943) && close(pen.f[(1, 0)], 0.0, 0.47943));
        assert_eq!(l.calls(Category::FHElement), 2);
        assert_eq!(l.calls(Category::OverlapCn), 1);
    }

    #[test]
    fn single_step_pencils() {
        let h = PauliSumHamiltonian::parse("0.3 ZZ\n0.2 XX\n0.1 IZ").unwrap();
        let p = SpectralPropagator::new(&h).unwrap();
        let phi = StateVector::normalized(2, vec![c64::new(0.3, 0.1), c64::new(0.5, 0.0), c64::new(-0.2, 0.4), c64::new(0.1, 0.1)]).unwrap();
        let l = CallLedger::new();
        let u = build_kdm(PencilKind::KdmU, &p, &h, &phi, 1, 0.3, ElementEstimator::Direct, ShotModel::exact(), &l, &Default::default()).unwrap();
        let hh = build_kdm(PencilKind::KdmH, &p, &h, &phi, 1, 0.3, ElementEstimator::Direct, ShotModel::exact(), &l, &Default::default()).unwrap();
        assert!((u.s[(0, 0)] - c64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((u.f[(0, 0)] - p.transition(&phi, &phi, 0.3).unwrap()).norm() < 1e-14);
        assert!((hh.f[(0, 0)].re - phi.expectation(&h)).abs() < 1e-14);
    }

    #[test]
    fn toeplitz_and_full_paths_agree() {
        let h = PauliSumHamiltonian::parse("0.3 ZZ\n0.2 XX\n0.1 IZ\n-0.4 YY").unwrap();
        let p = SpectralPropagator::new(&h).unwrap();
        let phi = StateVector::normalized(2, vec![c64::new(0.3, 0.1), c64::new(0.5, 0.0), c64::new(-0.2, 0.4), c64::new(0.1, 0.1)]).unwrap();
        for shift in [0.0, 0.37] {
            let opts = BuildOptions { shift, ..Default::default() };
            let l1 = CallLedger::new();
            let a = build_kdm(PencilKind::KdmH, &p, &h, &phi, 4, 0.3, ElementEstimator::Direct, ShotModel::exact(), &l1, &opts).unwrap();
            let l2 = CallLedger::new();
            let full = BuildOptions { h_path: HElementPath::Full, shift };
            let b = build_kdm(PencilKind::KdmH, &p, &h, &phi, 4, 0.3, ElementEstimator::Direct, ShotModel::exact(), &l2, &full).unwrap();
            assert!(linalg::max_abs_diff(&a.f, &b.f) < 1e-12);
            assert_eq!(l1.calls(Category::FHElement), 4 * 4);
            assert_eq!(l2.calls(Category::FHElement), 4 * 16);
        }
    }

    #[test]
    fn shifted_pencil_matches_shifted_hamiltonian() {
        let h = PauliSumHamiltonian::parse("0.3 ZZ\n0.2 XX\n0.1 IZ").unwrap();
        let c = 0.8;
        let hs = h.shifted(-c);
        let p = SpectralPropagator::new(&h).unwrap();
        let ps = SpectralPropagator::new(&hs).unwrap();
        let phi = StateVector::normalized(2, vec![c64::new(0.3, 0.1), c64::new(0.5, 0.0), c64::new(-0.2, 0.4), c64::new(0.1, 0.1)]).unwrap();
        for kind in [PencilKind::KdmU, PencilKind::KdmH] {
            let l = CallLedger::new();
            let opts = BuildOptions { shift: c, ..Default::default() };
            let a = build_kdm(kind, &p, &h, &phi, 3, 0.4, ElementEstimator::Direct, ShotModel::exact(), &l, &opts).unwrap();
            let b = build_kdm(kind, &ps, &hs, &phi, 3, 0.4, ElementEstimator::Direct, ShotModel::exact(), &l, &Default::default()).unwrap();
            assert!(linalg::max_abs_diff(&a.f, &b.f) < 1e-12, "{kind}");
            assert!(linalg::max_abs_diff(&a.s, &b.s) < 1e-12, "{kind}");
        }
    }

    #[test]
    fn dft_w_examples() {
        let tau = 0.5;
        let grid = FilterGrid::from_energies(vec![0.0, PI / tau]).unwrap();
        let w = build_w(&grid, 2, tau);
        assert!(w.is_dft);
        let want = [[1.0, 1.0], [1.0, -1.0]];
        for n in 0..2 {
            for j in 0..2 {
                assert!((w.matrix[(n, j)] - c64::new(want[n][j], 0.0)).norm() < 1e-12);
            }
        }
        let w = build_w(&FilterGrid::dft(6, 0.1, -3.0), 6, 0.1);
        assert!(w.is_dft);
        let g = linalg::adjoint(&w.matrix) * &w.matrix;
        let id = CMat::from_fn(6, 6, |i, j| if i == j { c64::new(6.0, 0.0) } else { ZERO });
        assert!(linalg::max_abs_diff(&g, &id) < 1e-10);
        let w = build_w(&FilterGrid::uniform(-1.0, 2.0, 3).unwrap(), 4, 0.3);
        assert!(!w.is_dft);
        assert!((0..3).all(|j| (w.matrix[(0, j)] - c64::new(1.0, 0.0)).norm() == 0.0));
    }

    #[test]
    fn uniform_grid_includes_endpoints() {
        let g = FilterGrid::uniform(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.energies(), &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(FilterGrid::uniform(-1.0, 3.0, 1).unwrap().energies(), &[1.0]);
        assert!(FilterGrid::uniform(1.0, 1.0, 2).is_err());
        assert!(FilterGrid::uniform(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn filter_coefficients_match_explicit_sum() {
        let h = PauliSumHamiltonian::parse("0.3 ZZ\n0.2 XX\n0.1 IZ").unwrap();
        let p = SpectralPropagator::new(&h).unwrap();
        let phi = StateVector::normalized(2, vec![c64::new(0.3, 0.1), c64::new(0.5, 0.0), c64::new(-0.2, 0.4), c64::new(0.1, 0.1)]).unwrap();
        for &e in &[p.energies()[1], -0.17, 0.9] {
            let coeffs = filter_state_coefficients(&p, &phi, e, 5, 0.4);
            let direct = oracle::filter_state(&p, &phi, e, 5, 0.4).unwrap();
            let back = linalg::mat_vec(p.vectors(), &coeffs);
            for (a, b) in back.iter().zip(&direct) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn filter_coefficients_z_example() {
        let (_, p, plus) = z_setup();
        let coeffs = filter_state_coefficients(&p, &plus, 1.0, 4, 0.5);
        // energies ascending: index 1 is E = +1
        let c1 = p.project(&plus)[1];
        assert!((coeffs[1] - c1 * 4.0).norm() < 1e-12);
        let c0 = p.project(&plus)[0];
        let ratio = linalg::cis_neg(-2.0 * 0.5);
        let geo = (0..4).fold(ZERO, |acc, n| acc + ratio.powi(n));
        assert!((coeffs[0] - c0 * geo).norm() < 1e-12);
    }

    #[test]
    fn pencil_json_round_trip() {
        let (h, p, plus) = z_setup();
        let l = CallLedger::new();
        let k = build_kdm(PencilKind::KdmU, &p, &h, &plus, 3, 0.5, ElementEstimator::Direct, ShotModel::exact(), &l, &Default::default()).unwrap();
        let pen = build_fdm(&k, &FilterGrid::uniform(-1.0, 1.0, 2).unwrap()).unwrap();
        let back = SubspacePencil::from_json(&pen.to_json()).unwrap();
        assert_eq!(back.kind, PencilKind::FdmU);
        assert_eq!(linalg::max_abs_diff(&back.f, &pen.f), 0.0);
        assert_eq!(back.grid, pen.grid);
    }

    #[test]
    fn fdm_matches_filter_state_inner_products() {
        let h = PauliSumHamiltonian::parse("0.3 ZZ\n0.2 XX\n0.1 IZ\n0.25 XY").unwrap();
        let p = SpectralPropagator::new(&h).unwrap();
        let phi = StateVector::normalized(2, vec![c64::new(0.3, 0.1), c64::new(0.5, 0.0), c64::new(-0.2, 0.4), c64::new(0.1, 0.1)]).unwrap();
        let l = CallLedger::new();
        let (m, tau) = (4, 0.35);
        let k = build_kdm(PencilKind::KdmU, &p, &h, &phi, m, tau, ElementEstimator::Direct, ShotModel::exact(), &l, &Default::default()).unwrap();
        let grid = FilterGrid::uniform(-0.6, 0.5, 3).unwrap();
        let fdm = build_fdm(&k, &grid).unwrap();
        let states: Vec<Vec<c64>> =
            grid.energies().iter().map(|&e| oracle::filter_state(&p, &phi, e, m, tau).unwrap()).collect();
        let u = oracle::expm_propagator(&h, tau).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let s = crate::statevec::inner(&states[a], &states[b]);
                let f = crate::statevec::inner(&states[a], &linalg::mat_vec(&u, &states[b]));
                assert!((fdm.s[(a, b)] - s).norm() < 1e-10);
                assert!((fdm.f[(a, b)] - f).norm() < 1e-10);
            }
        }
    }
}
