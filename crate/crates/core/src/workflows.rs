//! End-to-end drivers: convergence traces, the variance monitor,
//! filter-window search, excited-state runs and parameter sweeps.
//!
//! A run measures Krylov data once and grows it step by step; every pencil
//! of the run (including the propagator pencil used by the variance monitor)
//! is assembled from that shared data.

use std::fmt::Write as _;

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CallLedger, Category, ElementEstimator, FidelityBackend, LedgerReport, MfeContext, ShotModel};
use crate::geig::{self, finite_or_null, Backend, KappaFlag};
use crate::hamiltonian::{PauliSumHamiltonian, SymmetryOperator};
use crate::linalg;
use crate::statevec::{SpectralPropagator, StateVector};
use crate::subspace::{build_fdm, FilterGrid, HElementPath, KrylovData, PencilKind, SubspacePencil};

/// Energy-error bar used when reporting convergence (Hartree).
pub const CHEMICAL_ACCURACY: f64 = 1.59e-3;
/// Default time step (atomic units).
pub const DEFAULT_TAU: f64 = 0.1;
/// Default variance-based stopping tolerance.
pub const DEFAULT_VARIANCE_TOL: f64 = 1e-8;

/// Which constant is subtracted from `H` before unwrapping phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftPolicy {
    None,
    /// `<phi_o|H|phi_o>`.
    Hf,
    /// Centre of the Pauli-norm bound on the spectrum: the identity coefficient.
    #[default]
    MidSpectrum,
}

impl std::str::FromStr for ShiftPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ShiftPolicy::None),
            "hf" => Ok(ShiftPolicy::Hf),
            "mid_spectrum" => Ok(ShiftPolicy::MidSpectrum),
            _ => Err(Error::InvalidArgument(format!("unknown shift policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPreset {
    /// `[E_ref - 0.3, E_ref + 0.2]`
    Narrow,
    /// `[E_ref - 20, E_ref + 20]`
    Wide,
}

impl WindowPreset {
    pub fn bounds(self, e_ref: f64) -> (f64, f64) {
        match self {
            WindowPreset::Narrow => (e_ref - 0.3, e_ref + 0.2),
            WindowPreset::Wide => (e_ref - 20.0, e_ref + 20.0),
        }
    }
}

/// Filter energies for the FDM methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FilterSpec {
    /// Explicit window, uniform grid of `j` energies.
    Window { e_min: f64, e_max: f64, j: usize },
    /// Window around `<phi_o|H|phi_o>`.
    Preset { preset: WindowPreset, j: usize },
    /// `J = m` DFT grid at every step `m`.
    Dft,
}

impl FilterSpec {
    /// Grid for step `m`.
    pub fn grid(&self, e_ref: f64, m: usize, tau: f64) -> Result<FilterGrid> {
        match *self {
            FilterSpec::Window { e_min, e_max, j } => FilterGrid::uniform(e_min, e_max, j),
            FilterSpec::Preset { preset, j } => {
                let (lo, hi) = preset.bounds(e_ref);
                FilterGrid::uniform(lo, hi, j)
            }
            FilterSpec::Dft => Ok(FilterGrid::dft(m, tau, 0.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Direct,
    Hadamard,
    Mfe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryKind {
    #[default]
    ParticleNumber,
    TotalZ,
}

impl SymmetryKind {
    pub fn operator(self, n_qubits: usize) -> SymmetryOperator {
        match self {
            SymmetryKind::ParticleNumber => SymmetryOperator::particle_number(n_qubits),
            SymmetryKind::TotalZ => SymmetryOperator::total_z(n_qubits),
        }
    }
}

/// Everything that determines a run besides the Hamiltonian and `phi_o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: PencilKind,
    pub tau: f64,
    pub m_max: usize,
    pub filter: Option<FilterSpec>,
    pub shot: ShotModel,
    /// `None` picks [`geig::default_threshold`] for the shot model.
    pub svd_threshold: Option<f64>,
    pub shift: ShiftPolicy,
    pub estimator: EstimatorKind,
    pub fidelity_backend: FidelityBackend,
    /// Symmetry used by the multi-fidelity estimator.
    pub symmetry: SymmetryKind,
    /// MFE with the phase sign left unresolved.
    pub two_fidelity: bool,
    pub backend: Backend,
    pub h_path: HElementPath,
    pub variance_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: PencilKind::KdmU,
            tau: DEFAULT_TAU,
            m_max: 10,
            filter: None,
            shot: ShotModel::exact(),
            svd_threshold: None,
            shift: ShiftPolicy::MidSpectrum,
            estimator: EstimatorKind::Direct,
            fidelity_backend: FidelityBackend::Swap,
            symmetry: SymmetryKind::ParticleNumber,
            two_fidelity: false,
            backend: Backend::SvdRegularized,
            h_path: HElementPath::Toeplitz,
            variance_tol: DEFAULT_VARIANCE_TOL,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {}", self.tau)));
        }
        if self.m_max == 0 {
            return Err(Error::InvalidArgument("m_max must be at least 1".into()));
        }
        if self.method.is_fdm() && self.filter.is_none() {
            return Err(Error::InvalidArgument(format!("{} needs a filter grid", self.method)));
        }
        if let Some(t) = self.svd_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidArgument(format!("svd_threshold must lie in (0, 1), got {t}")));
            }
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.svd_threshold.unwrap_or_else(|| geig::default_threshold(&self.shot))
    }

    pub fn shift_value(&self, h: &PauliSumHamiltonian, phi_o: &StateVector) -> f64 {
        match self.shift {
            ShiftPolicy::None => 0.0,
            ShiftPolicy::Hf => phi_o.expectation(h),
            ShiftPolicy::MidSpectrum => h.identity_coefficient(),
        }
    }

    fn element_estimator(&self, h: &PauliSumHamiltonian) -> Result<ElementEstimator> {
        Ok(match self.estimator {
            EstimatorKind::Direct => ElementEstimator::Direct,
            EstimatorKind::Hadamard => ElementEstimator::Hadamard,
            EstimatorKind::Mfe => {
                let mut ctx = MfeContext::vacuum(h, self.symmetry.operator(h.n_qubits()))?;
                ctx.two_fidelity = self.two_fidelity;
                ElementEstimator::Mfe { ctx: Box::new(ctx), backend: self.fidelity_backend }
            }
        })
    }
}

/// One step of a convergence trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub energy: Option<f64>,
    pub delta_e: Option<f64>,
    #[serde(serialize_with = "ser_finite", deserialize_with = "de_finite")]
    pub kappa: f64,
    pub kappa_flag: Option<KappaFlag>,
    pub variance: Option<f64>,
    pub retained_rank: usize,
    pub calls: u64,
    pub shots: u64,
    /// Worst relative residual of the retained eigenpairs.
    pub residual: Option<f64>,
    pub error: Option<String>,
}

fn ser_finite<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    finite_or_null(*x).serialize(s)
}

// null marks an unbounded condition number
fn de_finite<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub method: PencilKind,
    pub tau: f64,
    pub shift: f64,
    /// Energy the errors are measured against.
    pub reference_energy: f64,
    pub rows: Vec<TraceRow>,
    pub converged: bool,
    pub ledger: LedgerReport,
}

/// Fixed CSV column order.
pub const CSV_COLUMNS: [&str; 8] = ["step", "energy", "delta_e", "kappa", "variance", "retained_rank", "calls", "shots"];

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), |v| format!("{v:e}"))
}

impl ConvergenceTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Energy of the last step that solved.
    pub fn final_energy(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.energy)
    }

    pub fn final_error(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.delta_e)
    }

    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{},{},{},{}",
                r.step,
                opt(r.energy),
                opt(r.delta_e),
                r.kappa,
                opt(r.variance),
                r.retained_rank,
                r.calls,
                r.shots
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }
}

/// `1 - |c^dagger F_U c|^2` with `c` scaled so that `c^dagger S c = 1`.
///
/// Uses only stored matrices. The pencil must be a propagator kind.
pub fn variance(u_pencil: &SubspacePencil, c: &[c64]) -> Result<f64> {
    if u_pencil.kind.is_h() {
        return Err(Error::InvalidArgument("variance needs the propagator pencil".into()));
    }
    if c.len() != u_pencil.dim() {
        return Err(Error::InvalidArgument(format!("coefficient length {} vs pencil {}", c.len(), u_pencil.dim())));
    }
    let norm = linalg::sandwich(c, &u_pencil.s, c).re;
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidArgument("coefficient vector has zero norm in the S metric".into()));
    }
    let v = 1.0 - linalg::sandwich(c, &u_pencil.f, c).norm_sqr() / (norm * norm);
    if !(0.0..=1.0).contains(&v) {
        log::debug!("variance {v:.3e} clamped to [0, 1]");
    }
    Ok(v.clamp(0.0, 1.0))
}

/// What the per-step energy error is measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorReference {
    /// Exact ground energy.
    Ground,
    /// Nearest exact eigenvalue to the estimate.
    Nearest,
}

/// Run one method from `m = 1` to `m_max`, stopping early once the variance
/// falls below `variance_tol`.
pub fn run_method(config: &RunConfig, h: &PauliSumHamiltonian, phi_o: &StateVector) -> Result<ConvergenceTrace> {
    let prop = SpectralPropagator::new(h)?;
    run_with(config, h, &prop, phi_o, ErrorReference::Ground)
}

/// [`run_method`] with a prebuilt propagator.
pub fn run_with(
    config: &RunConfig,
    h: &PauliSumHamiltonian,
    prop: &SpectralPropagator,
    phi_o: &StateVector,
    reference: ErrorReference,
) -> Result<ConvergenceTrace> {
    config.validate()?;
    let ledger = CallLedger::new();
    let shift = config.shift_value(h, phi_o);
    let e_ref = phi_o.expectation(h);
    let estimator = config.element_estimator(h)?;
    let mut data = KrylovData::new(prop, h, phi_o, config.tau, estimator, config.shot)?.with_h_path(config.h_path);
    let threshold = config.threshold();
    let exact = prop.energies();
    let mut rows = Vec::with_capacity(config.m_max);
    let mut converged = false;

    for m in 1..=config.m_max {
        data.ensure_c(m, Category::OverlapCn, &ledger)?;
        if config.method.is_h() {
            data.ensure_h(m - 1, &ledger)?;
        }
        let snap = ledger.snapshot();
        let mut row = TraceRow {
            step: m,
            energy: None,
            delta_e: None,
            kappa: f64::NAN,
            kappa_flag: None,
            variance: None,
            retained_rank: 0,
            calls: snap.calls,
            shots: snap.shots,
            residual: None,
            error: None,
        };
        match step(config, &data, m, shift, e_ref, threshold) {
            Ok((sol, energy, var)) => {
                let target = match reference {
                    ErrorReference::Ground => exact[0],
                    ErrorReference::Nearest => nearest(exact, energy),
                };
                row.energy = Some(energy);
                row.delta_e = Some((energy - target).abs());
                row.kappa = sol.condition_number;
                row.kappa_flag = Some(sol.kappa_flag);
                row.variance = Some(var);
                row.retained_rank = sol.retained_rank;
                row.residual = sol.residuals.iter().copied().reduce(f64::max);
                converged = var < config.variance_tol;
            }
            Err(e) => {
                log::warn!("step {m}: {e}");
                row.error = Some(e.to_string());
            }
        }
        rows.push(row);
        if converged {
            break;
        }
    }
    let reference_energy = match reference {
        ErrorReference::Ground => exact[0],
        ErrorReference::Nearest => rows.iter().rev().find_map(|r| r.energy).map_or(exact[0], |e| nearest(exact, e)),
    };
    Ok(ConvergenceTrace {
        method: config.method,
        tau: config.tau,
        shift,
        reference_energy,
        rows,
        converged,
        ledger: ledger.report(),
    })
}

fn nearest(levels: &[f64], e: f64) -> f64 {
    levels.iter().copied().min_by(|a, b| (a - e).abs().total_cmp(&(b - e).abs())).unwrap_or(f64::NAN)
}

/// The method pencil and its propagator companion at step `m`.
pub fn pencils_at(
    config: &RunConfig,
    data: &KrylovData<'_>,
    m: usize,
    shift: f64,
    e_ref: f64,
) -> Result<(SubspacePencil, SubspacePencil)> {
    let kdm = data.pencil(config.method.krylov(), m, shift)?;
    let kdm_u = if config.method.is_h() { data.pencil(PencilKind::KdmU, m, shift)? } else { kdm.clone() };
    if !config.method.is_fdm() {
        return Ok((kdm, kdm_u));
    }
    let spec = config.filter.as_ref().expect("validated");
    let grid = spec.grid(e_ref, m, config.tau)?;
    Ok((build_fdm(&kdm, &grid)?, build_fdm(&kdm_u, &grid)?))
}

fn step(
    config: &RunConfig,
    data: &KrylovData<'_>,
    m: usize,
    shift: f64,
    e_ref: f64,
    threshold: f64,
) -> Result<(geig::GEigSolution, f64, f64)> {
    let (pencil, u_pencil) = pencils_at(config, data, m, shift, e_ref)?;
    let sol = geig::solve(&pencil, threshold, config.backend)?;
    let ground = geig::select_ground(&sol)?;
    let var = variance(&u_pencil, &sol.coefficient(ground.index))?;
    Ok((sol, ground.energy, var))
}

/// One filter-grid candidate for [`hyperopt`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub grid: FilterGrid,
}

impl Candidate {
    pub fn uniform(e_min: f64, e_max: f64, j: usize) -> Result<Self> {
        Ok(Candidate { label: format!("[{e_min:.4}, {e_max:.4}] J={j}"), grid: FilterGrid::uniform(e_min, e_max, j)? })
    }

    pub fn preset(preset: WindowPreset, e_ref: f64, j: usize) -> Result<Self> {
        let (lo, hi) = preset.bounds(e_ref);
        let mut c = Self::uniform(lo, hi, j)?;
        c.label = format!("{preset:?} J={j}").to_lowercase();
        Ok(c)
    }
}

/// `J = 3, 4, 5` on the narrow window and `J = 6, 7, 8` on the wide one.
pub fn standard_candidates(e_ref: f64) -> Vec<Candidate> {
    let narrow = (3..=5).map(|j| Candidate::preset(WindowPreset::Narrow, e_ref, j));
    let wide = (6..=8).map(|j| Candidate::preset(WindowPreset::Wide, e_ref, j));
    narrow.chain(wide).collect::<Result<_>>().expect("preset windows are valid")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub label: String,
    pub e_min: f64,
    pub e_max: f64,
    pub j: usize,
    pub variance: Option<f64>,
    pub energy: Option<f64>,
    pub delta_e: Option<f64>,
    #[serde(serialize_with = "ser_finite", deserialize_with = "de_finite")]
    pub kappa: f64,
    pub retained_rank: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperoptResult {
    pub best: usize,
    pub table: Vec<ScoreRow>,
    /// Cost of the shared Krylov measurement; candidates add nothing.
    pub ledger: LedgerReport,
}

impl HyperoptResult {
    pub fn best_row(&self) -> &ScoreRow {
        &self.table[self.best]
    }
}

/// Score every candidate grid by the variance of its ground vector, all from
/// one Krylov measurement of `m_max` steps. The method must be an FDM kind.
///
/// Ties (variances within `1e-12`) go to the smaller `J`, then the narrower window.
pub fn hyperopt(
    config: &RunConfig,
    h: &PauliSumHamiltonian,
    phi_o: &StateVector,
    candidates: &[Candidate],
) -> Result<HyperoptResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no hyperopt candidates".into()));
    }
    let prop = SpectralPropagator::new(h)?;
    let ledger = CallLedger::new();
    let shift = config.shift_value(h, phi_o);
    let m = config.m_max;
    let mut data =
        KrylovData::new(&prop, h, phi_o, config.tau, config.element_estimator(h)?, config.shot)?.with_h_path(config.h_path);
    data.ensure_c(m, Category::OverlapCn, &ledger)?;
    let kind = config.method.krylov();
    if kind.is_h() {
        data.ensure_h(m - 1, &ledger)?;
    }
    let kdm = data.pencil(kind, m, shift)?;
    let kdm_u = data.pencil(PencilKind::KdmU, m, shift)?;
    let threshold = config.threshold();
    let e0 = prop.energies()[0];

    let table: Vec<ScoreRow> = candidates
        .par_iter()
        .map(|cand| {
            let mut row = ScoreRow {
                label: cand.label.clone(),
                e_min: cand.grid.e_min,
                e_max: cand.grid.e_max,
                j: cand.grid.len(),
                variance: None,
                energy: None,
                delta_e: None,
                kappa: f64::NAN,
                retained_rank: 0,
                error: None,
            };
            let scored = (|| -> Result<()> {
                let fdm = build_fdm(&kdm, &cand.grid)?;
                let fdm_u = build_fdm(&kdm_u, &cand.grid)?;
                let sol = geig::solve(&fdm, threshold, config.backend)?;
                row.kappa = sol.condition_number;
                row.retained_rank = sol.retained_rank;
                let g = geig::select_ground(&sol)?;
                row.energy = Some(g.energy);
                row.delta_e = Some((g.energy - e0).abs());
                row.variance = Some(variance(&fdm_u, &sol.coefficient(g.index))?);
                Ok(())
            })();
            if let Err(e) = scored {
                row.error = Some(e.to_string());
            }
            row
        })
        .collect();

    let best = (0..table.len())
        .filter(|&i| table[i].variance.is_some())
        .min_by(|&a, &b| {
            let (ra, rb) = (&table[a], &table[b]);
            let (va, vb) = (ra.variance.unwrap(), rb.variance.unwrap());
            if (va - vb).abs() > 1e-12 {
                va.total_cmp(&vb)
            } else {
                ra.j.cmp(&rb.j).then((ra.e_max - ra.e_min).total_cmp(&(rb.e_max - rb.e_min)))
            }
        })
        .ok_or_else(|| Error::Numerical("every hyperopt candidate failed".into()))?;
    Ok(HyperoptResult { best, table, ledger: ledger.report() })
}

/// Outcome of one ansatz in [`excited_run`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcitedResult {
    pub trace: Option<ConvergenceTrace>,
    /// Index of the nearest exact level.
    pub level: Option<usize>,
    pub exact_energy: Option<f64>,
    pub delta_e: Option<f64>,
    pub error: Option<String>,
}

/// Independent runs, one per ansatz state, each scored against the nearest
/// exact eigenvalue.
pub fn excited_run(config: &RunConfig, h: &PauliSumHamiltonian, ansatz: &[StateVector]) -> Result<Vec<ExcitedResult>> {
    let prop = SpectralPropagator::new(h)?;
    let exact = prop.energies();
    Ok(ansatz
        .par_iter()
        .map(|phi| match run_with(config, h, &prop, phi, ErrorReference::Nearest) {
            Ok(trace) => {
                let e = trace.final_energy();
                let level = e.map(|e| {
                    (0..exact.len()).min_by(|&a, &b| (exact[a] - e).abs().total_cmp(&(exact[b] - e).abs())).unwrap()
                });
                ExcitedResult {
                    level,
                    exact_energy: level.map(|k| exact[k]),
                    delta_e: trace.final_error(),
                    trace: Some(trace),
                    error: None,
                }
            }
            Err(e) => ExcitedResult { trace: None, level: None, exact_energy: None, delta_e: None, error: Some(e.to_string()) },
        })
        .collect())
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub energy: Option<f64>,
    pub exact: Option<f64>,
    pub delta_e: Option<f64>,
    pub steps: usize,
    pub calls: u64,
    pub error: Option<String>,
}

/// Run `config` at every axis value; `setup` turns a value into the
/// Hamiltonian and initial state. Failures stay confined to their row.
pub fn sweep<F>(config: &RunConfig, axis: &[f64], setup: F) -> Vec<SweepRow>
where
    F: Fn(f64) -> Result<(PauliSumHamiltonian, StateVector)> + Sync,
{
    axis.par_iter()
        .map(|&value| {
            let point = (|| {
                if !value.is_finite() {
                    return Err(Error::InvalidArgument(format!("axis value {value} is not finite")));
                }
                let (h, phi) = setup(value)?;
                run_method(config, &h, &phi)
            })();
            match point {
                Ok(t) => SweepRow {
                    value,
                    energy: t.final_energy(),
                    exact: Some(t.reference_energy),
                    delta_e: t.final_error(),
                    steps: t.rows.len(),
                    calls: t.ledger.total_calls,
                    error: t.rows.last().and_then(|r| r.error.clone()),
                },
                Err(e) => SweepRow {
                    value,
                    energy: None,
                    exact: None,
                    delta_e: None,
                    steps: 0,
                    calls: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Predicted device calls for `m` steps of a method with `l` Hamiltonian
/// terms: `M` for propagator kinds, `L M + (M - 1)` for Hamiltonian kinds on
/// the Toeplitz path and `L M^2 + (M - 1)` on the full path.
pub fn predicted_calls(kind: PencilKind, h_path: HElementPath, l: usize, m: usize) -> u64 {
    let (l, m) = (l as u64, m as u64);
    if !kind.is_h() {
        return m;
    }
    match h_path {
        HElementPath::Toeplitz => l * m + (m - 1),
        HElementPath::Full => l * m * m + (m - 1),
    }
}

/// Recorded calls against the predicted count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub method: PencilKind,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub calls: u64,
    pub shots: u64,
    pub predicted: u64,
    /// Extra `C_M` measured by Hamiltonian-kind runs for the variance monitor.
    pub monitor_calls: u64,
    #[serde(rename = "match")]
    pub matches: bool,
    pub categories: LedgerReport,
}

pub fn ledger_summary(trace: &ConvergenceTrace, h_path: HElementPath, l: usize) -> LedgerSummary {
    let m = trace.rows.len();
    let predicted = predicted_calls(trace.method, h_path, l, m);
    let monitor_calls = u64::from(trace.method.is_h());
    LedgerSummary {
        method: trace.method,
        m,
        l,
        calls: trace.ledger.total_calls,
        shots: trace.ledger.total_shots,
        predicted,
        monitor_calls,
        matches: trace.ledger.total_calls == predicted + monitor_calls,
        categories: trace.ledger.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn z_case() -> (PauliSumHamiltonian, StateVector) {
        (PauliSumHamiltonian::parse("1.0 Z").unwrap(), models::plus_state(1))
    }

    #[test]
    fn kdm_u_z_trace() {
        let (h, plus) = z_case();
        let cfg = RunConfig { tau: 0.5, m_max: 2, shift: ShiftPolicy::None, ..Default::default() };
        let t = run_method(&cfg, &h, &plus).unwrap();
        assert_eq!(t.rows.len(), 2);
        let last = t.last().unwrap();
        assert!((last.energy.unwrap() + 1.0).abs() < 1e-9);
        assert!(last.delta_e.unwrap() < 1e-9);
        assert_eq!(t.ledger.total_calls, 2);
    }

    #[test]
    fn single_step_h_kind_is_expectation() {
        let h = PauliSumHamiltonian::parse("0.3 ZZ\n0.2 XX\n0.1 IZ").unwrap();
        let phi = StateVector::normalized(2, vec![c64::new(0.3, 0.1), c64::new(0.5, 0.0), c64::new(-0.2, 0.4), c64::new(0.1, 0.1)]).unwrap();
        let cfg = RunConfig { method: PencilKind::KdmH, m_max: 1, ..Default::default() };
        let t = run_method(&cfg, &h, &phi).unwrap();
        assert!((t.rows[0].energy.unwrap() - phi.expectation(&h)).abs() < 1e-12);
    }

    #[test]
    fn variance_examples() {
        let (h, plus) = z_case();
        let cfg = RunConfig { tau: 0.5, m_max: 1, shift: ShiftPolicy::None, variance_tol: 0.0, ..Default::default() };
        let t = run_method(&cfg, &h, &plus).unwrap();
        assert!((t.rows[0].variance.unwrap() - 0.5f64.sin().powi(2)).abs() < 1e-12);
        assert!((0.5f64.sin().powi(2) - 0.22985).abs() < 1e-5);
        // eigenvector of a two-dimensional exact pencil
        let cfg = RunConfig { tau: 0.5, m_max: 2, shift: ShiftPolicy::None, variance_tol: 0.0, ..Default::default() };
        let t = run_method(&cfg, &h, &plus).unwrap();
        assert!(t.rows[1].variance.unwrap() < 1e-10);
    }

    #[test]
    fn variance_rejects_zero_vector_and_h_pencil() {
        let s = linalg::CMat::from_fn(2, 2, |i, j| if i == j { c64::new(1.0, 0.0) } else { c64::new(0.0, 0.0) });
        let p = SubspacePencil { kind: PencilKind::KdmU, f: s.clone(), s, tau: 0.1, m: 2, shift: 0.0, grid: None };
        assert!(variance(&p, &[c64::new(0.0, 0.0); 2]).is_err());
        let v = variance(&p, &[c64::new(0.6, 0.0), c64::new(0.0, 0.8)]).unwrap();
        assert!((0.0..=1.0).contains(&v));
        let hp = SubspacePencil { kind: PencilKind::KdmH, ..p };
        assert!(variance(&hp, &[c64::new(1.0, 0.0), c64::new(0.0, 0.0)]).is_err());
    }

    #[test]
    fn fdm_dft_matches_kdm_trace() {
        let h = models::heisenberg_xxz(4, 0.7).unwrap();
        let phi = models::singlet_ansatz(4, "0011", "0101").unwrap();
        let base = RunConfig { m_max: 5, variance_tol: 0.0, tau: 0.3, ..Default::default() };
        let kdm = run_method(&base, &h, &phi).unwrap();
        let fdm = run_method(&RunConfig { method: PencilKind::FdmU, filter: Some(FilterSpec::Dft), ..base }, &h, &phi).unwrap();
        for (a, b) in kdm.rows.iter().zip(&fdm.rows) {
            assert!((a.energy.unwrap() - b.energy.unwrap()).abs() < 1e-8, "step {}", a.step);
        }
    }

    #[test]
    fn hyperopt_single_candidate() {
        let h = models::tfim(4, 1.0, 1.0).unwrap();
        let phi = models::plus_state(4);
        let cfg = RunConfig { method: PencilKind::FdmU, m_max: 4, filter: Some(FilterSpec::Dft), ..Default::default() };
        let c = vec![Candidate::uniform(-6.0, 0.0, 3).unwrap()];
        let r = hyperopt(&cfg, &h, &phi, &c).unwrap();
        assert_eq!(r.best, 0);
        assert_eq!(r.ledger.total_calls, 4);
    }

    #[test]
    fn predicted_calls_formulae() {
        assert_eq!(predicted_calls(PencilKind::KdmU, HElementPath::Toeplitz, 15, 8), 8);
        assert_eq!(predicted_calls(PencilKind::KdmH, HElementPath::Toeplitz, 15, 8), 127);
        assert_eq!(predicted_calls(PencilKind::FdmH, HElementPath::Full, 5, 4), 83);
    }

    #[test]
    fn csv_schema() {
        let (h, plus) = z_case();
        let cfg = RunConfig { tau: 0.5, m_max: 2, ..Default::default() };
        let csv = run_method(&cfg, &h, &plus).unwrap().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "step,energy,delta_e,kappa,variance,retained_rank,calls,shots");
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn sweep_isolates_failures() {
        let cfg = RunConfig { m_max: 3, ..Default::default() };
        let rows = sweep(&cfg, &[0.5, f64::NAN, 1.5], |g| Ok((models::tfim(3, 1.0, g)?, models::plus_state(3))));
        assert_eq!(rows.len(), 3);
        assert!(rows[0].error.is_none() && rows[2].error.is_none());
        assert!(rows[1].error.is_some());
        assert_eq!(rows[2].value, 1.5);
    }
}
