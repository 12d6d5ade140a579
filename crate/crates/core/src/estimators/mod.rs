//! Simulated measurement back-ends for Krylov matrix elements.
//!
//! Every estimator is a pure function of its inputs and the shot model's
//! seed: the random stream used for a given circuit is derived from the seed
//! and a hash of the circuit's inputs, so results do not depend on evaluation
//! order or thread scheduling. The [`CallLedger`] is the only shared mutable
//! state.

mod ledger;
mod mfe;

use std::hash::{Hash, Hasher};

use faer::c64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

pub use ledger::{CallLedger, Category, CategoryCount, LedgerReport, LedgerSnapshot};
pub use mfe::{mfe_element, MfeContext, MfeEstimate, CLAMP_TOL, F1_FLOOR};

use crate::error::{Error, Result};
use crate::statevec::{SpectralPropagator, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    Exact,
    Sampled,
}

/// Exact expectation values or binomially sampled estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotModel {
    pub mode: ShotMode,
    /// Shots per circuit; ignored in exact mode.
    pub shots: u64,
    pub seed: u64,
}

impl ShotModel {
    pub fn exact() -> Self {
        ShotModel { mode: ShotMode::Exact, shots: 0, seed: 0 }
    }

    pub fn sampled(shots: u64, seed: u64) -> Self {
        assert!(shots > 0, "sampled mode needs at least one shot");
        ShotModel { mode: ShotMode::Sampled, shots, seed }
    }

    pub fn is_exact(&self) -> bool {
        self.mode == ShotMode::Exact
    }

    /// Shots charged to the ledger per circuit.
    pub(crate) fn charged(&self) -> u64 {
        if self.is_exact() {
            0
        } else {
            self.shots
        }
    }

    /// Binomial draw of a probability, deterministic in `(seed, key)`.
    pub(crate) fn sample_probability(&self, p: f64, key: u64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        if self.is_exact() {
            return p;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(key);
        let k = Binomial::new(self.shots, p).expect("probability clamped to [0,1]").sample(&mut rng);
        k as f64 / self.shots as f64
    }
}

/// Circuit family used for fidelity estimation. Both share the binomial
/// statistical model; the tag is carried as metadata.
///
/// The destructive SWAP test needs both states side by side (twice the
/// qubits, constant depth); the mirror circuit prepares one state, un-prepares
/// the other and reads the all-zero probability (same width, double depth).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FidelityBackend {
    #[default]
    Swap,
    Mirror,
}

/// Hash of a circuit's defining inputs; selects the RNG stream.
pub(crate) fn stream_key(cat: Category, sub: u64, t: f64, states: &[&[c64]]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    cat.tag().hash(&mut h);
    sub.hash(&mut h);
    t.to_bits().hash(&mut h);
    for s in states {
        for a in *s {
            a.re.to_bits().hash(&mut h);
            a.im.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

/// `|<a|b>|^2`, exact or sampled, recorded under [`Category::Fidelity`].
pub fn fidelity(a: &StateVector, b: &StateVector, shot: &ShotModel, ledger: &CallLedger) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::QubitMismatch { expected: a.n_qubits(), found: b.n_qubits() });
    }
    let f = a.inner(b).norm_sqr();
    ledger.record(Category::Fidelity, 1, shot.charged());
    let key = stream_key(Category::Fidelity, 0, 0.0, &[a.amplitudes(), b.amplitudes()]);
    Ok(shot.sample_probability(f, key))
}

/// Hadamard test for `<phi_i| e^{-i n tau H} |phi_j>`.
///
/// Sampled mode draws the X- and Y-basis ancilla outcomes separately with
/// probabilities `(1 + Re)/2` and `(1 + Im)/2`; both halves use `shots`, so a
/// call is charged `2 * shots`.
pub fn hadamard_element(
    prop: &SpectralPropagator,
    phi_i: &StateVector,
    phi_j: &StateVector,
    n: i64,
    tau: f64,
    shot: &ShotModel,
    ledger: &CallLedger,
) -> Result<c64> {
    let t = n as f64 * tau;
    let exact = prop.transition(phi_i, phi_j, t)?;
    ledger.record(Category::HadamardCall, 1, 2 * shot.charged());
    if shot.is_exact() {
        return Ok(exact);
    }
    let states = [phi_i.amplitudes(), phi_j.amplitudes()];
    let kx = stream_key(Category::HadamardCall, 0, t, &states);
    let ky = stream_key(Category::HadamardCall, 1, t, &states);
    let re = 2.0 * shot.sample_probability((1.0 + exact.re) / 2.0, kx) - 1.0;
    let im = 2.0 * shot.sample_probability((1.0 + exact.im) / 2.0, ky) - 1.0;
    Ok(c64::new(re, im))
}

/// How each complex matrix element is obtained.
#[derive(Debug, Clone)]
pub enum ElementEstimator {
    /// Ideal inner product; no circuits, never sampled.
    Direct,
    /// Ancilla-based Hadamard test.
    Hadamard,
    /// Multi-fidelity estimation against a symmetry-sector reference.
    Mfe { ctx: Box<MfeContext>, backend: FidelityBackend },
}

impl ElementEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            ElementEstimator::Direct => "direct",
            ElementEstimator::Hadamard => "hadamard",
            ElementEstimator::Mfe { .. } => "mfe",
        }
    }

    /// `<phi_i| e^{-i n tau H} |phi_j>`; records circuit-level counters only.
    pub fn element(
        &self,
        prop: &SpectralPropagator,
        phi_i: &StateVector,
        phi_j: &StateVector,
        n: i64,
        tau: f64,
        shot: &ShotModel,
        ledger: &CallLedger,
    ) -> Result<c64> {
        match self {
            ElementEstimator::Direct => prop.transition(phi_i, phi_j, n as f64 * tau),
            ElementEstimator::Hadamard => hadamard_element(prop, phi_i, phi_j, n, tau, shot, ledger),
            ElementEstimator::Mfe { ctx, .. } => {
                Ok(mfe_element(ctx, prop, phi_i, phi_j, n, tau, shot, ledger)?.value)
            }
        }
    }

    /// `C_n = <phi_o|U^n|phi_o>` recorded under `cat`; `C_0 = 1` is free.
    pub fn correlation_as(
        &self,
        cat: Category,
        prop: &SpectralPropagator,
        phi_o: &StateVector,
        n: i64,
        tau: f64,
        shot: &ShotModel,
        ledger: &CallLedger,
    ) -> Result<c64> {
        if n < 0 {
            return Err(Error::InvalidArgument(format!("correlation step must be >= 0, got {n}")));
        }
        if n == 0 {
            return Ok(c64::new(1.0, 0.0));
        }
        ledger.record(cat, 1, 0);
        self.element(prop, phi_o, phi_o, n, tau, shot, ledger)
    }
}

/// `C_n(tau)` through the Hadamard test, charged to [`Category::OverlapCn`].
pub fn correlation(
    prop: &SpectralPropagator,
    phi_o: &StateVector,
    n: i64,
    tau: f64,
    shot: &ShotModel,
    ledger: &CallLedger,
) -> Result<c64> {
    ElementEstimator::Hadamard.correlation_as(Category::OverlapCn, prop, phi_o, n, tau, shot, ledger)
}
