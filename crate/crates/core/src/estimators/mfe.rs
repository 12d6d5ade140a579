//! Multi-fidelity estimation of complex matrix elements.
//!
//! For target states `|phi_i>`, `|phi_j>` in one symmetry sector and a
//! reference `|R>` in another, evolution never mixes the sectors, so
//!
//! ```text
//! <phi_i + R| U |R + phi_j> / 2 = (r_R e^{i theta_R} + r e^{i theta}) / 2
//! ```
//!
//! where `r e^{i theta} = <phi_i|U|phi_j>` and `r_R e^{i theta_R} = <R|U|R>`.
//! Measuring the magnitude `F1 = r^2` and the fidelity `F2` of the two
//! superpositions fixes `cos(theta - theta_R)`. A third fidelity `F3`, with
//! the reference branch multiplied by `i` on the ket side, fixes the sine and
//! therefore the sign of the phase.
//!
//! The reference must be an eigenstate of `H`, which gives `r_R = 1` and
//! `theta_R = -t <R|H|R>`. For the vacuum that energy is classically cheap:
//! only I/Z strings contribute.

use faer::c64;

use super::{stream_key, CallLedger, Category, ShotModel};
use crate::error::{Error, Result};
use crate::hamiltonian::{commutes, PauliSumHamiltonian, SymmetryOperator};
use crate::statevec::{SpectralPropagator, StateVector, ORTHO_TOL};

/// How far outside `[-1, 1]` an arccos argument may stray before it is an error.
pub const CLAMP_TOL: f64 = 0.05;
/// Below this `F1` the phase is meaningless and reported as undefined.
pub const F1_FLOOR: f64 = 1e-12;

/// Reference state and its analytically known evolution.
#[derive(Debug, Clone)]
pub struct MfeContext {
    reference: StateVector,
    /// `|<R|U|R>|`, one for an eigenstate reference.
    r_ref: f64,
    /// `<R|H|R>`; the reference phase is `-t` times this.
    ref_energy: f64,
    symmetry: SymmetryOperator,
    fingerprint: u64,
    /// Skip `F3` and take the principal arccos branch.
    pub two_fidelity: bool,
}

/// Result of one element estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfeEstimate {
    pub value: c64,
    /// False when `F1` fell below [`F1_FLOOR`]; `value` is then zero.
    pub phase_defined: bool,
    /// True when an arccos/arcsin argument was clamped back into range.
    pub clamped: bool,
    pub f1: f64,
    pub f2: f64,
    pub f3: Option<f64>,
}

impl MfeContext {
    /// Vacuum reference `|0...0>`.
    pub fn vacuum(h: &PauliSumHamiltonian, symmetry: SymmetryOperator) -> Result<Self> {
        Self::with_reference(h, StateVector::vacuum(h.n_qubits()), symmetry)
    }

    /// Arbitrary reference; must be an eigenstate of `h`, and `h` must
    /// conserve `symmetry`.
    pub fn with_reference(
        h: &PauliSumHamiltonian,
        reference: StateVector,
        symmetry: SymmetryOperator,
    ) -> Result<Self> {
        if reference.n_qubits() != h.n_qubits() {
            return Err(Error::QubitMismatch { expected: h.n_qubits(), found: reference.n_qubits() });
        }
        if !commutes(h, &symmetry) {
            return Err(Error::SymmetrySector("Hamiltonian does not conserve the symmetry".into()));
        }
        let hr = h.apply(reference.amplitudes());
        let e = reference.expectation(h);
        let resid: f64 = hr
            .iter()
            .zip(reference.amplitudes())
            .map(|(a, b)| (a - b * e).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if resid > 1e-10 {
            return Err(Error::SymmetrySector(format!(
                "reference is not an eigenstate of H (residual {resid:.2e})"
            )));
        }
        // vacuum energy from the classical shortcut when it applies
        let is_vacuum = reference.amplitudes()[0].norm() > 1.0 - 1e-12;
        let ref_energy = if is_vacuum { h.vacuum_expectation() } else { e };
        Ok(MfeContext {
            reference,
            r_ref: 1.0,
            ref_energy,
            symmetry,
            fingerprint: h.fingerprint(),
            two_fidelity: false,
        })
    }

    pub fn reference(&self) -> &StateVector {
        &self.reference
    }

    pub fn symmetry(&self) -> &SymmetryOperator {
        &self.symmetry
    }

    pub fn r_ref(&self) -> f64 {
        self.r_ref
    }

    /// `theta_R` after evolving for time `t`.
    pub fn reference_phase(&self, t: f64) -> f64 {
        -t * self.ref_energy
    }

    fn check_sector(&self, phi: &StateVector) -> Result<()> {
        let o = self.reference.inner(phi).norm();
        if o >= ORTHO_TOL {
            return Err(Error::SymmetrySector(format!("|<R|phi>| = {o:.2e}")));
        }
        Ok(())
    }
}

fn clamp_arg(x: f64, clamped: &mut bool) -> Result<f64> {
    if x.abs() <= 1.0 {
        return Ok(x);
    }
    if x.abs() - 1.0 <= CLAMP_TOL {
        *clamped = true;
        return Ok(x.clamp(-1.0, 1.0));
    }
    Err(Error::ExcessiveShotNoise(x))
}

/// `<phi_i| e^{-i n tau H} |phi_j>` from two or three fidelities.
#[allow(clippy::too_many_arguments)]
pub fn mfe_element(
    ctx: &MfeContext,
    prop: &SpectralPropagator,
    phi_i: &StateVector,
    phi_j: &StateVector,
    n: i64,
    tau: f64,
    shot: &ShotModel,
    ledger: &CallLedger,
) -> Result<MfeEstimate> {
    if prop.fingerprint() != ctx.fingerprint {
        return Err(Error::FingerprintMismatch);
    }
    ctx.check_sector(phi_i)?;
    ctx.check_sector(phi_j)?;
    let t = n as f64 * tau;
    let r_ref = ctx.r_ref;
    let theta_ref = ctx.reference_phase(t);
    let states = [phi_i.amplitudes(), phi_j.amplitudes()];

    // F1 = |<phi_i|U|phi_j>|^2
    let a = prop.transition(phi_i, phi_j, t)?;
    ledger.record(Category::FidelityF1, 1, shot.charged());
    let f1 = shot.sample_probability(a.norm_sqr(), stream_key(Category::FidelityF1, 0, t, &states));
    if f1 < F1_FLOOR {
        return Ok(MfeEstimate {
            value: c64::new(0.0, 0.0),
            phase_defined: false,
            clamped: false,
            f1,
            f2: f64::NAN,
            f3: None,
        });
    }
    let r = f1.sqrt();

    // F2 = |<R + phi_i| U |R + phi_j>|^2 / 4
    let bra = StateVector::superpose(&ctx.reference, phi_i)?;
    let ket = StateVector::superpose(&ctx.reference, phi_j)?;
    let b = prop.transition(&bra, &ket, t)?;
    ledger.record(Category::FidelityF2, 1, shot.charged());
    let f2 = shot.sample_probability(b.norm_sqr(), stream_key(Category::FidelityF2, 0, t, &states));

    let mut clamped = false;
    let cos_arg = clamp_arg((4.0 * f2 - f1 - r_ref * r_ref) / (2.0 * r_ref * r), &mut clamped)?;
    let mut delta = cos_arg.acos();

    let f3 = if ctx.two_fidelity {
        None
    } else {
        // F3 = |<R + phi_i| U |iR + phi_j>|^2 / 4
        let ket_i = StateVector::superpose_phased(&ctx.reference, c64::new(0.0, 1.0), phi_j)?;
        let c = prop.transition(&bra, &ket_i, t)?;
        ledger.record(Category::FidelityF3, 1, shot.charged());
        let f3 = shot.sample_probability(c.norm_sqr(), stream_key(Category::FidelityF3, 0, t, &states));
        let sin_arg = clamp_arg((4.0 * f3 - f1 - r_ref * r_ref) / (2.0 * r_ref * r), &mut clamped)?;
        if sin_arg < 0.0 {
            delta = -delta;
        }
        Some(f3)
    };

    let theta = delta + theta_ref;
    Ok(MfeEstimate { value: c64::from_polar(r, theta), phase_defined: true, clamped, f1, f2, f3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> (PauliSumHamiltonian, SpectralPropagator, MfeContext, StateVector) {
        let h = PauliSumHamiltonian::parse("1.0 ZI\n1.0 IZ").unwrap();
        let p = SpectralPropagator::new(&h).unwrap();
        let ctx = MfeContext::vacuum(&h, SymmetryOperator::particle_number(2)).unwrap();
        let phi = StateVector::basis_state(2, "11").unwrap();
        (h, p, ctx, phi)
    }

    #[test]
    fn worked_two_qubit_example() {
        let (_, p, ctx, phi) = worked();
        let l = CallLedger::new();
        let est = mfe_element(&ctx, &p, &phi, &phi, 1, 0.2, &ShotModel::exact(), &l).unwrap();
        assert!((est.f1 - 1.0).abs() < 1e-12);
        assert!((est.f2 - 0.4f64.cos().powi(2)).abs() < 1e-12);
        assert!((est.f2 - 0.84835).abs() < 1e-5);
        assert!((ctx.reference_phase(0.2) + 0.4).abs() < 1e-15);
        assert!((est.value - c64::from_polar(1.0, 0.4)).norm() < 1e-12);
        assert_eq!(l.calls(Category::FidelityF1), 1);
        assert_eq!(l.calls(Category::FidelityF2), 1);
        assert_eq!(l.calls(Category::FidelityF3), 1);
    }

    #[test]
    fn zero_steps_gives_overlap() {
        let (_, p, ctx, phi) = worked();
        let l = CallLedger::new();
        let est = mfe_element(&ctx, &p, &phi, &phi, 0, 0.2, &ShotModel::exact(), &l).unwrap();
        assert!((est.value - c64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn sign_resolution_matters_for_negative_phase() {
        // |01> has energy 0 under ZI+IZ, so use a field that makes theta negative
        let h = PauliSumHamiltonian::parse("-1.0 ZI\n-1.0 IZ").unwrap();
        let p = SpectralPropagator::new(&h).unwrap();
        let mut ctx = MfeContext::vacuum(&h, SymmetryOperator::particle_number(2)).unwrap();
        let phi = StateVector::basis_state(2, "11").unwrap();
        let l = CallLedger::new();
        let exact = p.transition(&phi, &phi, 0.2).unwrap();
        let three = mfe_element(&ctx, &p, &phi, &phi, 1, 0.2, &ShotModel::exact(), &l).unwrap();
        assert!((three.value - exact).norm() < 1e-12);
        ctx.two_fidelity = true;
        let two = mfe_element(&ctx, &p, &phi, &phi, 1, 0.2, &ShotModel::exact(), &l).unwrap();
        assert!(two.f3.is_none());
        // principal branch lands on the mirror image about theta_R
        assert!((two.value - exact).norm() > 0.1);
    }

    #[test]
    fn sector_violation_rejected() {
        let (_, p, ctx, _) = worked();
        let l = CallLedger::new();
        let bad = StateVector::superpose(
            &StateVector::basis_state(2, "00").unwrap(),
            &StateVector::basis_state(2, "11").unwrap(),
        )
        .unwrap();
        let r = mfe_element(&ctx, &p, &bad, &bad, 1, 0.2, &ShotModel::exact(), &l);
        assert!(matches!(r, Err(Error::SymmetrySector(_))));
    }

    #[test]
    fn reference_must_be_eigenstate() {
        let h = PauliSumHamiltonian::parse("1.0 XX\n1.0 YY").unwrap();
        let plus = StateVector::superpose(
            &StateVector::basis_state(2, "01").unwrap(),
            &StateVector::basis_state(2, "00").unwrap(),
        )
        .unwrap();
        let r = MfeContext::with_reference(&h, plus, SymmetryOperator::particle_number(2));
        assert!(matches!(r, Err(Error::SymmetrySector(_))));
    }

    #[test]
    fn orthogonal_targets_give_undefined_phase() {
        let (_, p, ctx, _) = worked();
        let a = StateVector::basis_state(2, "01").unwrap();
        let b = StateVector::basis_state(2, "10").unwrap();
        let est = mfe_element(&ctx, &p, &a, &b, 1, 0.2, &ShotModel::exact(), &CallLedger::new()).unwrap();
        assert!(!est.phase_defined);
        assert_eq!(est.value, c64::new(0.0, 0.0));
    }

    #[test]
    fn clamp_behaviour() {
        let mut c = false;
        assert_eq!(clamp_arg(1.03, &mut c).unwrap(), 1.0);
        assert!(c);
        assert!(matches!(clamp_arg(-1.2, &mut c), Err(Error::ExcessiveShotNoise(_))));
    }
}
