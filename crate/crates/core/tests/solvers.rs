//! Solver-level integration tests: eigenvalue equivalence under faults,
//! residual behavior, determinism.

use ec_eigen_core::coding::CodingMatrix;
use ec_eigen_core::faults::{generate_schedule, FaultSchedule, ScheduleSpec};
use ec_eigen_core::operators::FaultAwareSystem;
use ec_eigen_core::power::{power_solve, PowerConfig, PowerVariant};
use ec_eigen_core::recovery::recover_eigenpairs;
use ec_eigen_core::redundancy::compute_redundancy;
use ec_eigen_core::tracemin::{tracemin_solve, CgConfig, TraceMinConfig};
use ec_eigen_core::{linalg, matrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_symmetric(n: usize, seed: u64) -> matrix::SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    matrix::SymMatrix::new_dense(linalg::symmetrize(&m)).unwrap()
}

fn dense_coding(n: usize, k: usize, seed: u64) -> CodingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CodingMatrix::from_dense(&DMatrix::from_fn(n, k, |_, _| rng.gen_range(0.1..1.0))).unwrap()
}

#[test]
fn reconstituted_eigenvalues_equal_originals_across_trials() {
    // direct dense solves of (A', B') against the spectrum of A
    for trial in 0..8u64 {
        let n = 20 + 5 * trial as usize;
        let k = 1 + (trial as usize % 4);
        let a = random_symmetric(n, 100 + trial);
        let e = dense_coding(n, k, 200 + trial);
        let blocks = compute_redundancy(&a, &e).unwrap();
        let mut sys = FaultAwareSystem::new(&a, &e, &blocks).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(300 + trial);
        let l = rng.gen_range(1..=k);
        let mut rows: Vec<usize> = Vec::new();
        while rows.len() < l {
            let r = rng.gen_range(0..n);
            if !rows.contains(&r) {
                rows.push(r);
            }
        }
        sys.inject(&ec_eigen_core::faults::FaultEvent::new(1, rows).unwrap()).unwrap();
        let (a_p, b_p) = sys.reconstitute_explicit().unwrap();
        let (vals, vecs) = linalg::generalized_sym_eig(&a_p, &b_p).unwrap();
        let (reference, _) = linalg::sym_eig(&a.to_dense());
        let scale = a.frobenius_norm();
        for (got, want) in vals.iter().zip(reference.iter()) {
            assert!(
                (got - want).abs() <= 1e-8 * scale,
                "trial {trial}: {got} vs {want}"
            );
        }
        // recovered vectors satisfy the original eigenproblem
        let rec = recover_eigenpairs(vals.as_slice(), &vecs, &e, sys.fault()).unwrap();
        let ad = a.to_dense();
        for j in 0..n {
            let v = rec.eigenvectors.column(j);
            let res = (&ad * v - v * rec.eigenvalues[j]).norm();
            assert!(res <= 1e-8 * scale, "trial {trial} vector {j}: residual {res}");
        }
    }
}

#[test]
fn power_converges_to_top_eigenvalues_after_faults() {
    let n = 100;
    let (a, spectrum) = matrix::random_spd(n, 0.15, 42);
    let e = dense_coding(n, 4, 7);
    let blocks = compute_redundancy(&a, &e).unwrap();
    let mut sys = FaultAwareSystem::new(&a, &e, &blocks).unwrap();
    let schedule = generate_schedule(
        &ScheduleSpec::MultiRandom(ec_eigen_core::faults::MultiRandomParams {
            events: 2,
            rows_per_event: 1,
            iteration_range: (2, 6),
        }),
        n,
        4,
        9,
    )
    .unwrap();
    let cfg = PowerConfig { block_width: 4, tolerance: 1e-9, max_iterations: 2000, seed: 1 };
    let res = power_solve(&mut sys, &schedule, &cfg, PowerVariant::Implicit).unwrap();
    assert!(res.converged(), "{:?}", res.status);
    let scale = a.frobenius_norm();
    for (j, got) in res.eigenvalues.iter().enumerate() {
        let want = spectrum[n - 1 - j];
        assert!(
            (got - want).abs() <= 10.0 * cfg.tolerance * scale,
            "pair {j}: {got} vs {want}"
        );
    }
}

#[test]
fn power_residual_trend_is_monotone_away_from_faults() {
    let n = 80;
    let (a, _) = matrix::random_spd(n, 0.2, 5);
    let e = dense_coding(n, 3, 3);
    let blocks = compute_redundancy(&a, &e).unwrap();
    let mut sys = FaultAwareSystem::new(&a, &e, &blocks).unwrap();
    let schedule = generate_schedule(
        &ScheduleSpec::Single { iteration: 5, rows: vec![17] },
        n,
        3,
        0,
    )
    .unwrap();
    let cfg = PowerConfig { block_width: 4, tolerance: 1e-8, max_iterations: 2000, seed: 11 };
    let res = power_solve(&mut sys, &schedule, &cfg, PowerVariant::Implicit).unwrap();
    assert!(res.converged());
    let mut jumps = 0;
    for w in res.history.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        if next.fault_rows.is_some() {
            continue; // a jump is expected where the fault lands
        }
        if next.r_rel > prev.r_rel * (1.0 + 1e-9) + 1e-15 {
            jumps += 1;
        }
    }
    assert_eq!(jumps, 0, "residual increased away from the fault iteration");
}

#[test]
fn tracemin_trace_is_monotone_without_faults() {
    let n = 90;
    let (a, _) = matrix::random_spd(n, 0.2, 8);
    let e = dense_coding(n, 3, 4);
    let blocks = compute_redundancy(&a, &e).unwrap();
    let mut sys = FaultAwareSystem::new(&a, &e, &blocks).unwrap();
    let cfg = TraceMinConfig {
        wanted: 4,
        tolerance: 1e-9,
        max_outer: 400,
        cg: CgConfig::default(),
        seed: 6,
    };
    let res = tracemin_solve(&mut sys, &FaultSchedule::none(), &cfg).unwrap();
    assert!(res.converged(), "{:?}", res.status);
    let slack = 10.0 * cfg.cg.tolerance * a.frobenius_norm();
    for w in res.history.windows(2) {
        let t0 = w[0].subspace_trace.unwrap();
        let t1 = w[1].subspace_trace.unwrap();
        assert!(t1 <= t0 + slack, "trace rose from {t0} to {t1}");
    }
}

#[test]
fn tracemin_matches_oracle_after_faults() {
    let n = 120;
    let (a, spectrum) = matrix::random_spd(n, 0.1, 23);
    let e = dense_coding(n, 5, 31);
    let blocks = compute_redundancy(&a, &e).unwrap();
    let mut sys = FaultAwareSystem::new(&a, &e, &blocks).unwrap();
    let schedule = generate_schedule(
        &ScheduleSpec::MultiRandom(ec_eigen_core::faults::MultiRandomParams {
            events: 3,
            rows_per_event: 1,
            iteration_range: (2, 7),
        }),
        n,
        5,
        77,
    )
    .unwrap();
    let cfg = TraceMinConfig {
        wanted: 4,
        tolerance: 1e-9,
        max_outer: 400,
        cg: CgConfig::default(),
        seed: 2,
    };
    let res = tracemin_solve(&mut sys, &schedule, &cfg).unwrap();
    assert!(res.converged(), "{:?}", res.status);
    let scale = a.frobenius_norm();
    for (j, got) in res.eigenvalues.iter().enumerate() {
        assert!(
            (got - spectrum[j]).abs() <= 10.0 * cfg.tolerance * scale,
            "pair {j}: {got} vs {}",
            spectrum[j]
        );
    }
    // recovered eigenvectors satisfy the original problem to solver accuracy
    let rec = recover_eigenpairs(&res.eigenvalues, &res.eigenvectors, &e, sys.fault()).unwrap();
    let ad = a.to_dense();
    for j in 0..4 {
        let v = rec.eigenvectors.column(j);
        let r = (&ad * v - v * rec.eigenvalues[j]).norm();
        assert!(r <= 10.0 * cfg.tolerance * scale, "vector {j}: {r}");
    }
}

#[test]
fn identical_seeds_reproduce_bitwise() {
    let n = 60;
    let (a, _) = matrix::random_spd(n, 0.2, 3);
    let e = dense_coding(n, 3, 5);
    let blocks = compute_redundancy(&a, &e).unwrap();
    let schedule = generate_schedule(
        &ScheduleSpec::Single { iteration: 3, rows: vec![10] },
        n,
        3,
        0,
    )
    .unwrap();
    let cfg = TraceMinConfig {
        wanted: 3,
        tolerance: 1e-8,
        max_outer: 300,
        cg: CgConfig::default(),
        seed: 19,
    };
    let mut sys1 = FaultAwareSystem::new(&a, &e, &blocks).unwrap();
    let res1 = tracemin_solve(&mut sys1, &schedule, &cfg).unwrap();
    let mut sys2 = FaultAwareSystem::new(&a, &e, &blocks).unwrap();
    let res2 = tracemin_solve(&mut sys2, &schedule, &cfg).unwrap();
    assert_eq!(res1.eigenvalues, res2.eigenvalues, "bitwise identical eigenvalues");
    assert_eq!(res1.iterations, res2.iterations);
    let h1: Vec<f64> = res1.history.iter().map(|h| h.r_rel).collect();
    let h2: Vec<f64> = res2.history.iter().map(|h| h.r_rel).collect();
    assert_eq!(h1, h2);
}
