//! Built-in Hamiltonians and reference states.
//!
//! Spin chains stand in for molecules at desk scale; a single tiny molecular
//! Hamiltonian is bundled as fixture data (see [`h2_sto3g`]).

use std::path::PathBuf;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Pauli, PauliString, PauliSumHamiltonian, DEFAULT_DENSE_LIMIT};
use crate::oracle;
use crate::statevec::StateVector;

/// Open transverse-field Ising chain `-J sum Z_i Z_{i+1} - g sum X_i`.
///
/// Always `2N - 1` terms; zero couplings are kept so the term count is
/// independent of the parameters.
pub fn tfim(n: usize, coupling: f64, field: f64) -> Result<PauliSumHamiltonian> {
    if n == 0 {
        return Err(Error::InvalidArgument("chain needs at least one site".into()));
    }
    let mut terms = Vec::with_capacity(2 * n - 1);
    for i in 0..n.saturating_sub(1) {
        terms.push((-coupling, PauliString::from_ops(n, [(i, Pauli::Z), (i + 1, Pauli::Z)])));
    }
    for i in 0..n {
        terms.push((-field, PauliString::from_ops(n, [(i, Pauli::X)])));
    }
    PauliSumHamiltonian::new(n, terms)
}

/// Open XXZ chain `sum (X_i X_{i+1} + Y_i Y_{i+1} + delta Z_i Z_{i+1})`.
pub fn heisenberg_xxz(n: usize, delta: f64) -> Result<PauliSumHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidArgument("XXZ chain needs at least two sites".into()));
    }
    let mut terms = Vec::with_capacity(3 * (n - 1));
    for i in 0..n - 1 {
        for (p, c) in [(Pauli::X, 1.0), (Pauli::Y, 1.0), (Pauli::Z, delta)] {
            terms.push((c, PauliString::from_ops(n, [(i, p), (i + 1, p)])));
        }
    }
    PauliSumHamiltonian::new(n, terms)
}

/// `|0...0 1...1>` with the `eta` lowest qubits set.
pub fn hartree_fock_state(n: usize, eta: usize) -> Result<StateVector> {
    if eta > n {
        return Err(Error::InvalidArgument(format!("{eta} particles do not fit in {n} qubits")));
    }
    Ok(StateVector::basis_index(n, (1usize << eta) - 1))
}

/// `(|a> - |b>) / sqrt 2` for two distinct occupation patterns of equal weight.
pub fn singlet_ansatz(n: usize, pattern_a: &str, pattern_b: &str) -> Result<StateVector> {
    if pattern_a == pattern_b {
        return Err(Error::InvalidArgument("singlet patterns must differ".into()));
    }
    let weight = |p: &str| p.chars().filter(|c| *c == '1').count();
    if weight(pattern_a) != weight(pattern_b) {
        return Err(Error::SymmetrySector(format!(
            "patterns {pattern_a} and {pattern_b} hold different particle numbers"
        )));
    }
    let a = StateVector::basis_state(n, pattern_a)?;
    let b = StateVector::basis_state(n, pattern_b)?;
    StateVector::superpose_phased(&b, c64::new(-1.0, 0.0), &a)
}

/// `|+>^n`.
pub fn plus_state(n: usize) -> StateVector {
    let amp = c64::new((1.0 / (1usize << n) as f64).sqrt(), 0.0);
    StateVector::normalized(n, vec![amp; 1usize << n]).expect("uniform state")
}

/// Product of independent open-chain TFIM ground states on consecutive
/// blocks of `block` sites. A cheap reference with large ground-state
/// overlap for the full chain.
pub fn tfim_block_reference(n: usize, coupling: f64, field: f64, block: usize) -> Result<StateVector> {
    if block == 0 || n % block != 0 {
        return Err(Error::InvalidArgument(format!("block size {block} does not divide {n}")));
    }
    let spec = oracle::diagonalize(&tfim(block, coupling, field)?)?;
    let mut ground: Vec<c64> = spec.vectors.col(0).iter().copied().collect();
    // fix the global phase so the largest amplitude is real positive
    let pivot = ground.iter().copied().fold(c64::new(0.0, 0.0), |a, b| if b.norm() > a.norm() { b } else { a });
    let phase = pivot.conj() / pivot.norm();
    ground.iter_mut().for_each(|x| *x *= phase);
    let mut amps = vec![c64::new(1.0, 0.0)];
    for _ in 0..n / block {
        // new block occupies the higher qubits
        let mut next = Vec::with_capacity(amps.len() * ground.len());
        for g in &ground {
            for a in &amps {
                next.push(g * a);
            }
        }
        amps = next;
    }
    StateVector::normalized(n, amps)
}

/// 4-qubit H2 (STO-3G, Jordan-Wigner) fixture Hamiltonian, `L = 15`.
///
/// Externally generated; validated only against the internal dense oracle.
/// Its Hartree-Fock state is [`hartree_fock_state`]`(4, 2)`.
pub fn h2_sto3g() -> PauliSumHamiltonian {
    PauliSumHamiltonian::parse(include_str!("../data/h2_sto3g.ham")).expect("bundled fixture parses")
}

/// Which Hamiltonian an experiment uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Tfim { n_qubits: usize, coupling: f64, field: f64 },
    HeisenbergXxz { n_qubits: usize, delta: f64 },
    H2Sto3g,
    File { path: PathBuf },
}

impl ModelSpec {
    pub fn build(&self) -> Result<PauliSumHamiltonian> {
        let h = match self {
            ModelSpec::Tfim { n_qubits, coupling, field } => {
                check_finite(&[*coupling, *field])?;
                tfim(*n_qubits, *coupling, *field)?
            }
            ModelSpec::HeisenbergXxz { n_qubits, delta } => {
                check_finite(&[*delta])?;
                heisenberg_xxz(*n_qubits, *delta)?
            }
            ModelSpec::H2Sto3g => h2_sto3g(),
            ModelSpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
                PauliSumHamiltonian::parse(&text)?
            }
        };
        if h.n_qubits() > DEFAULT_DENSE_LIMIT {
            return Err(Error::DenseLimit { n_qubits: h.n_qubits(), limit: DEFAULT_DENSE_LIMIT });
        }
        Ok(h)
    }
}

fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("model parameters must be finite".into()))
    }
}
