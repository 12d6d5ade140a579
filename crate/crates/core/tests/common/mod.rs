//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use qkrylov::{c64, Pauli, PauliString, PauliSumHamiltonian, StateVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_pauli(rng: &mut ChaCha8Rng) -> Pauli {
    [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..4)]
}

/// `l` random strings with coefficients in `[-scale, scale]`.
pub fn random_hamiltonian(rng: &mut ChaCha8Rng, n: usize, l: usize, scale: f64) -> PauliSumHamiltonian {
    let terms: Vec<(f64, PauliString)> = (0..l)
        .map(|_| {
            let ops: Vec<(usize, Pauli)> = (0..n).map(|q| (q, random_pauli(rng))).collect();
            (rng.random_range(-scale..scale), PauliString::from_ops(n, ops))
        })
        .collect();
    PauliSumHamiltonian::new(n, terms).unwrap()
}

/// Number-conserving terms: `Z_i`, `Z_i Z_j`, `X_i X_j + Y_i Y_j`, `X_i Y_j - Y_i X_j`.
pub fn random_number_conserving(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> PauliSumHamiltonian {
    let mut terms = Vec::new();
    for i in 0..n {
        terms.push((rng.random_range(-scale..scale), PauliString::from_ops(n, [(i, Pauli::Z)])));
        for j in i + 1..n {
            terms.push((rng.random_range(-scale..scale), PauliString::from_ops(n, [(i, Pauli::Z), (j, Pauli::Z)])));
            let t = rng.random_range(-scale..scale);
            terms.push((t, PauliString::from_ops(n, [(i, Pauli::X), (j, Pauli::X)])));
            terms.push((t, PauliString::from_ops(n, [(i, Pauli::Y), (j, Pauli::Y)])));
            let u = rng.random_range(-scale..scale);
            terms.push((u, PauliString::from_ops(n, [(i, Pauli::X), (j, Pauli::Y)])));
            terms.push((-u, PauliString::from_ops(n, [(i, Pauli::Y), (j, Pauli::X)])));
        }
    }
    PauliSumHamiltonian::new(n, terms).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    let amps = (0..1usize << n).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    StateVector::normalized(n, amps).unwrap()
}

/// Random state supported on basis states with exactly `eta` set bits.
pub fn random_sector_state(rng: &mut ChaCha8Rng, n: usize, eta: u32) -> StateVector {
    let amps = (0..1usize << n)
        .map(|b| {
            if b.count_ones() == eta {
                c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                c64::new(0.0, 0.0)
            }
        })
        .collect();
    StateVector::normalized(n, amps).unwrap()
}
