//! Property tests over random small instances.

mod common;

use proptest::prelude::*;
use qkrylov::estimators::{CallLedger, ElementEstimator, ShotModel};
use qkrylov::geig::{self, Backend, EXACT_THRESHOLD};
use qkrylov::linalg::{self, CMat};
use qkrylov::subspace::{build_fdm, build_kdm, BuildOptions, FilterGrid, PencilKind, SubspacePencil};
use qkrylov::workflows::{self, Candidate, FilterSpec, RunConfig};
use qkrylov::{c64, models, oracle, PauliSumHamiltonian, SpectralPropagator, StateVector};
use rand::Rng;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

fn instance(seed: u64, n: usize, l: usize) -> (PauliSumHamiltonian, StateVector) {
    let mut rng = common::rng(seed);
    let h = common::random_hamiltonian(&mut rng, n, l, 0.5);
    let phi = common::random_state(&mut rng, n);
    (h, phi)
}

fn kdm(kind: PencilKind, h: &PauliSumHamiltonian, phi: &StateVector, m: usize, tau: f64, shift: f64) -> SubspacePencil {
    let prop = SpectralPropagator::new(h).unwrap();
    let opts = BuildOptions { shift, ..Default::default() };
    build_kdm(kind, &prop, h, phi, m, tau, ElementEstimator::Direct, ShotModel::exact(), &CallLedger::new(), &opts)
        .unwrap()
}

fn sorted_energies(p: &SubspacePencil, threshold: f64) -> Vec<f64> {
    let sol = geig::solve(p, threshold, Backend::SvdRegularized).unwrap();
    let mut e: Vec<f64> = geig::energies(&sol).unwrap().iter().map(|x| x.energy).collect();
    e.sort_by(f64::total_cmp);
    e
}

proptest! {
    #![proptest_config(cases(32))]

    #[test]
    fn dense_matrix_is_hermitian(seed in any::<u64>(), n in 1usize..=5, l in 1usize..=10) {
        let (h, _) = instance(seed, n, l);
        let d = h.to_dense().unwrap();
        prop_assert!(linalg::max_abs_diff(&d, &linalg::adjoint(&d)) < 1e-14);
    }

    #[test]
    fn serialize_round_trips(seed in any::<u64>(), n in 1usize..=6, l in 1usize..=12) {
        let (h, _) = instance(seed, n, l);
        prop_assert_eq!(PauliSumHamiltonian::parse(&h.serialize()).unwrap(), h);
    }

    #[test]
    fn vacuum_expectation_is_first_diagonal(seed in any::<u64>(), n in 1usize..=5, l in 1usize..=10) {
        let (h, _) = instance(seed, n, l);
        let d = h.to_dense().unwrap();
        prop_assert!((h.vacuum_expectation() - d[(0, 0)].re).abs() < 1e-14);
    }

    #[test]
    fn propagation_is_a_unitary_group(seed in any::<u64>(), n in 1usize..=5, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let (h, phi) = instance(seed, n, 6);
        let prop = SpectralPropagator::new(&h).unwrap();
        let once = prop.evolve(&phi, s + t).unwrap();
        let twice = prop.evolve(&prop.evolve(&phi, s).unwrap(), t).unwrap();
        let diff = once.amplitudes().iter().zip(twice.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12);
        prop_assert!((once.norm() - 1.0).abs() < 1e-12);
        prop_assert!((once.expectation(&h) - phi.expectation(&h)).abs() < 1e-12);
    }

    #[test]
    fn spectral_and_taylor_propagators_agree(seed in any::<u64>(), k in 0i64..6) {
        let (h, phi) = instance(seed, 6, 10);
        let mut rng = common::rng(seed ^ 0x5eed);
        let other = common::random_state(&mut rng, 6);
        let a = oracle::direct_element(&h, &phi, &other, k, 0.3).unwrap();
        let b = oracle::expm_element(&h, &phi, &other, k, 0.3).unwrap();
        prop_assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn negative_steps_conjugate(seed in any::<u64>(), n in 1usize..=5, k in 1i64..8, tau in 0.05f64..1.0) {
        let (h, phi) = instance(seed, n, 6);
        let plus = oracle::direct_element(&h, &phi, &phi, k, tau).unwrap();
        let minus = oracle::direct_element(&h, &phi, &phi, -k, tau).unwrap();
        prop_assert!((plus.conj() - minus).norm() < 1e-13);
    }

    #[test]
    fn overlap_is_hermitian_toeplitz(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=10, tau in 0.05f64..1.0) {
        let (h, phi) = instance(seed, n, 6);
        let p = kdm(PencilKind::KdmU, &h, &phi, m, tau, 0.0);
        prop_assert!(p.s_asymmetry() < 1e-14);
        for i in 0..m {
            prop_assert!((p.s[(i, i)] - c64::new(1.0, 0.0)).norm() < 1e-12);
            for j in 0..m {
                let direct = oracle::direct_element(&h, &phi, &phi, j as i64 - i as i64, tau).unwrap();
                prop_assert!((p.s[(i, j)] - direct).norm() < 1e-12);
            }
        }
        prop_assert!(p.s_is_psd(1e-10).unwrap());
    }

    #[test]
    fn filter_pencils_are_w_conjugates(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=8, j in 1usize..=8) {
        let (h, phi) = instance(seed, n, 6);
        let j = j.min(m);
        let mut rng = common::rng(seed);
        let grid = FilterGrid::from_energies((0..j).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let prop = SpectralPropagator::new(&h).unwrap();
        let filters: Vec<Vec<c64>> = grid.energies().iter().map(|&e| oracle::filter_state(&prop, &phi, e, m, 0.2).unwrap()).collect();
        let fdm = build_fdm(&kdm(PencilKind::KdmH, &h, &phi, m, 0.2, 0.0), &grid).unwrap();
        let hf: Vec<Vec<c64>> = filters.iter().map(|v| h.apply(v)).collect();
        let f = CMat::from_fn(j, j, |a, b| qkrylov::statevec::inner(&filters[a], &hf[b]));
        let s = CMat::from_fn(j, j, |a, b| qkrylov::statevec::inner(&filters[a], &filters[b]));
        prop_assert!(linalg::max_abs_diff(&fdm.f, &f) < 1e-11);
        prop_assert!(linalg::max_abs_diff(&fdm.s, &s) < 1e-11);
    }

    #[test]
    fn energies_are_shift_covariant(seed in any::<u64>(), n in 2usize..=4, shift in -2.0f64..2.0) {
        let (h, phi) = instance(seed, n, 6);
        for kind in [PencilKind::KdmU, PencilKind::KdmH] {
            let plain = sorted_energies(&kdm(kind, &h, &phi, 3, 0.1, 0.0), 1e-8);
            let moved = sorted_energies(&kdm(kind, &h, &phi, 3, 0.1, shift), 1e-8);
            prop_assert_eq!(plain.len(), moved.len());
            for (a, b) in plain.iter().zip(&moved) {
                prop_assert!((a - b).abs() < 1e-7, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn retained_rank_grows_as_threshold_drops(seed in any::<u64>(), n in 1usize..=4, m in 2usize..=12) {
        let (h, phi) = instance(seed, n, 6);
        let p = kdm(PencilKind::KdmU, &h, &phi, m, 0.2, 0.0);
        let mut last = 0;
        for k in 1..=14 {
            let rank = geig::solve(&p, 10f64.powi(-k), Backend::SvdRegularized).map_or(0, |s| s.retained_rank);
            prop_assert!(rank >= last);
            last = rank;
        }
    }

    #[test]
    fn condition_number_is_singular_value_ratio(seed in any::<u64>(), n in 1usize..=4, m in 1usize..=6) {
        let (h, phi) = instance(seed, n, 6);
        let p = kdm(PencilKind::KdmU, &h, &phi, m, 0.3, 0.0);
        let sv = linalg::singular_values(&p.s).unwrap();
        let hi = sv.iter().copied().fold(0.0, f64::max);
        let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let sol = geig::solve(&p, EXACT_THRESHOLD, Backend::SvdRegularized).unwrap();
        if lo > 1e-8 * hi {
            prop_assert!((sol.condition_number / (hi / lo) - 1.0).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(cases(12))]

    #[test]
    fn error_vanishes_at_full_dimension(seed in any::<u64>(), n in 1usize..=2) {
        let (h, phi) = instance(seed, n, 4);
        let dim = 1usize << n;
        let tau = 0.7;
        let cfg = RunConfig { m_max: dim, tau, variance_tol: 0.0, svd_threshold: Some(1e-10), ..Default::default() };
        let trace = workflows::run_method(&cfg, &h, &phi).unwrap();
        // exactness needs the full-dimension overlap to survive truncation
        let s = kdm(PencilKind::KdmU, &h, &phi, dim, tau, 0.0).s;
        let sv = linalg::singular_values(&s).unwrap();
        let hi = sv.iter().copied().fold(0.0, f64::max);
        let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
        let row = trace.last().unwrap();
        if lo > 1e-6 * hi {
            prop_assert!(row.delta_e.is_some_and(|d| d.abs() < 1e-6), "{:?}", row);
            prop_assert!(row.variance.is_some_and(|v| v < 1e-8), "{:?}", row);
        }
    }

    #[test]
    fn ising_variance_never_rises_before_truncation(n in 3usize..=6, field in 0.5f64..1.5) {
        let h = models::tfim(n, 1.0, field).unwrap();
        let cfg = RunConfig { m_max: 10, variance_tol: 0.0, ..Default::default() };
        let trace = workflows::run_method(&cfg, &h, &models::plus_state(n)).unwrap();
        let untruncated: Vec<f64> =
            trace.rows.iter().take_while(|r| r.retained_rank == r.step).filter_map(|r| r.variance).collect();
        for w in untruncated.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-10, "{:?}", untruncated);
        }
    }

    #[test]
    fn lower_threshold_keeps_converged_levels(n in 3usize..=5, field in 0.5f64..1.5) {
        let h = models::tfim(n, 1.0, field).unwrap();
        let exact = oracle::diagonalize(&h).unwrap().energies;
        let p = kdm(PencilKind::KdmU, &h, &models::plus_state(n), 12, 0.3, 0.0);
        // a level is converged once some Ritz value sits within 1e-8 of it;
        // it must then stay within 1e-6 at every lower threshold
        let near = |e: &[f64], x: f64, tol: f64| e.iter().any(|y| (x - y).abs() < tol);
        let mut converged: Vec<f64> = Vec::new();
        for k in 2..=12 {
            let ritz = sorted_energies(&p, 10f64.powi(-k));
            for level in &converged {
                prop_assert!(near(&ritz, *level, 1e-6), "lost {} at 1e-{}: {:?}", level, k, ritz);
            }
            converged.extend(exact.iter().copied().filter(|x| near(&ritz, *x, 1e-8)));
        }
    }

    #[test]
    fn dft_candidate_reproduces_the_krylov_run(seed in any::<u64>(), n in 2usize..=3, m in 2usize..=5) {
        let (h, phi) = instance(seed, n, 6);
        let tau = 0.5;
        let kdm_cfg = RunConfig { m_max: m, tau, variance_tol: 0.0, svd_threshold: Some(1e-8), ..Default::default() };
        let kdm_trace = workflows::run_method(&kdm_cfg, &h, &phi).unwrap();
        let fdm_cfg = RunConfig { method: PencilKind::FdmU, filter: Some(FilterSpec::Dft), ..kdm_cfg.clone() };
        let shift = fdm_cfg.shift_value(&h, &phi);
        let dft = Candidate { label: "dft".into(), grid: FilterGrid::dft(m, tau, shift) };
        let narrow = Candidate::uniform(-0.1, 0.1, 1).unwrap();
        let result = workflows::hyperopt(&fdm_cfg, &h, &phi, &[narrow, dft]).unwrap();
        let row = &result.table[1];
        let want = kdm_trace.last().unwrap();
        if let (Some(a), Some(b)) = (row.energy, want.energy) {
            prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
        }
        let best = result.best_row().variance.unwrap_or(f64::INFINITY);
        prop_assert!(best <= row.variance.unwrap_or(f64::INFINITY) + 1e-12);
    }
}

#[test]
fn heisenberg_ten_sites_matches_power_iteration() {
    let h = models::heisenberg_xxz(10, 1.0).unwrap();
    let dense = oracle::diagonalize(&h).unwrap().ground_energy();
    let power = oracle::power_iteration_ground(&h, 1e-13, 200_000);
    assert!((dense - power).abs() < 1e-8, "{dense} vs {power}");
}
