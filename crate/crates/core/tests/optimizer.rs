use nalgebra::DVector;
use num_complex::Complex64;

use rwa_control::dynamics::ExactOptions;
use rwa_control::experiments::instance::{random_instance, RandomInstanceSpec};
use rwa_control::nelder_mead::{nelder_mead, SimplexConfig};
use rwa_control::optimize::{double_check, optimize_transfer, TransferConfig, TransferProblem, DEFAULT_EPSILON};

fn rosenbrock(x: &[f64]) -> f64 {
    (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
}

fn ground(n: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(n);
    v[0] = Complex64::new(1.0, 0.0);
    v
}

fn instance_problem(n: usize, seed: u64, detuning: f64) -> TransferProblem {
    let inst = random_instance(&RandomInstanceSpec::new(n, seed)).unwrap();
    TransferProblem::new(inst.system.clone(), inst.drives(detuning).unwrap(), ground(n), inst.goal.clone(), DEFAULT_EPSILON).unwrap()
}

#[test]
fn rosenbrock_converges() {
    let cfg = SimplexConfig {
        max_evaluations: 10_000,
        ..Default::default()
    };
    let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
    assert!(r.f < 1e-8, "{}", r.f);
    assert!(r.stats.evaluations <= 10_000);
    let again = nelder_mead(rosenbrock, &[-1.2, 1.0], &cfg).unwrap();
    assert_eq!(r, again);
}

#[test]
fn random_five_level_tree_succeeds() {
    for seed in 0..5 {
        let problem = instance_problem(5, seed, 1e-6);
        assert_eq!(problem.parameter_count(), 2 * 4 + 1);
        let sol = optimize_transfer(&problem, &TransferConfig { seed, ..Default::default() }).unwrap();
        assert!(sol.rwa_success && sol.rwa_infidelity < 1e-3);
        assert!((0.0..=1.0).contains(&sol.rwa_infidelity));
    }
}

#[test]
fn identical_seed_identical_solution() {
    let problem = instance_problem(4, 11, 1e-3);
    let cfg = TransferConfig {
        seed: 5,
        ..Default::default()
    };
    assert_eq!(optimize_transfer(&problem, &cfg).unwrap(), optimize_transfer(&problem, &cfg).unwrap());
}

#[test]
fn deep_rwa_exact_tracks_rwa() {
    for seed in 0..8 {
        let problem = instance_problem(3, 100 + seed, 1e-7);
        let min_omega = problem.drives.fields().iter().map(|d| d.omega).fold(f64::INFINITY, f64::min);
        let cfg = TransferConfig {
            amplitude_cap: Some(1e-3 * min_omega),
            seed,
            ..Default::default()
        };
        let sol = optimize_transfer(&problem, &cfg).unwrap();
        let checked = double_check(&problem, &sol, &ExactOptions { tol: 1e-10, ..Default::default() }).unwrap();
        let exact = checked.exact_infidelity.unwrap();
        assert!((0.0..=1.0).contains(&exact));
        assert!((exact - sol.rwa_infidelity).abs() < 1e-3, "{seed}: {exact} vs {}", sol.rwa_infidelity);
    }
}
