mod common;

use std::sync::atomic::AtomicBool;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rwa_control::dynamics::{
    frame_transform, infidelity, propagate_effective, propagate_exact, ExactOptions, Frame, StateVector,
};
use rwa_control::error::Error;
use rwa_control::graph::{Coupling, LevelSystem};
use rwa_control::integrator::{integrate, StepControl};
use rwa_control::rwa::{Drive, DriveSet};
use rwa_control::RwaModel;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn ode(matrix: impl Fn(f64) -> DMatrix<Complex64>, y0: &DVector<Complex64>, t: f64, max_step: f64) -> DVector<Complex64> {
    let mut y: Vec<Complex64> = y0.iter().copied().collect();
    integrate(
        |t, y: &[Complex64], dy: &mut [Complex64]| {
            let h = matrix(t);
            let v = &h * DVector::from_column_slice(y);
            for (d, x) in dy.iter_mut().zip(v.iter()) {
                *d = -I * x;
            }
        },
        &mut y,
        0.0,
        t,
        StepControl {
            tol: 1e-13,
            max_step,
            first_step: 1e-3,
        },
        None,
        |_, _| {},
    )
    .unwrap();
    DVector::from_vec(y)
}

#[test]
fn effective_generator_matches_ode() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..5 {
        let (system, drives) = common::random_driven_tree(5, &mut rng);
        let model = RwaModel::build(&system, &drives).unwrap();
        let b0 = StateVector::new(common::random_unit(5, &mut rng), Frame::Rotating, 0.0);
        let t = rng.gen_range(1.0..300.0);
        let exact = propagate_effective(&model.generator, &b0, t).unwrap();
        let g = model.generator.matrix.clone();
        let reference = ode(|_| g.clone(), &b0.amplitudes, t, 1.0);
        assert!(common::max_diff(&exact.amplitudes, &reference) < 1e-9);
    }
}

#[test]
fn free_evolution_phases_up_to_long_times() {
    let energies = vec![0.0, 0.8, 1.9, 3.1, 4.4];
    let couplings = (1..5).map(|k| Coupling::real(k, k - 1, 1.0)).collect();
    let system = LevelSystem::new(energies.clone(), couplings).unwrap();
    let fields = (1..5).map(|k| Drive::new(Complex64::new(0.0, 0.0), energies[k] - energies[k - 1])).collect();
    let drives = DriveSet::new(&system, fields, (1..5).map(|k| (k, k - 1)).collect()).unwrap();
    let psi0 = DVector::from_element(5, Complex64::new(1.0 / 5f64.sqrt(), 0.0));
    for t in [1.0, 10.0, 100.0, 1000.0] {
        let r = propagate_exact(&system, &drives, &StateVector::new(psi0.clone(), Frame::Lab, 0.0), t, &ExactOptions::default()).unwrap();
        for (n, e) in energies.iter().enumerate() {
            let want = psi0[n] * Complex64::from_polar(1.0, -e * t);
            assert!((r.state.amplitudes[n] - want).norm() < 1e-10);
        }
        assert!(r.norm_drift < 1e-9);
        assert_eq!(r.state.time, t);
    }
}

/// Lab-frame Hamiltonian integrated directly, without the interaction picture.
#[test]
fn exact_propagation_matches_lab_frame_ode() {
    let energies = vec![0.0, 2.0, 4.7];
    let h01 = Complex64::new(0.8, 0.3);
    let h12 = Complex64::new(0.0, 1.1);
    let system = LevelSystem::new(energies.clone(), vec![Coupling::new(1, 0, h01), Coupling::new(2, 1, h12)]).unwrap();
    let fields = vec![Drive::polar(0.3, 0.7, 2.01), Drive::polar(0.2, -1.1, 2.68)];
    let drives = DriveSet::new(&system, fields.clone(), vec![(1, 0), (2, 1)]).unwrap();
    let hc = system.control_matrix();
    let hd = DMatrix::from_diagonal(&DVector::from_iterator(3, energies.iter().map(|&e| Complex64::new(e, 0.0))));
    let lab = |t: f64| {
        let s: f64 = fields.iter().map(|d| (d.amplitude * Complex64::from_polar(1.0, -d.omega * t)).re).sum();
        &hd + &hc * Complex64::new(s, 0.0)
    };
    let psi0 = StateVector::basis(3, 0, Frame::Lab);
    let t = 25.0;
    let r = propagate_exact(&system, &drives, &psi0, t, &ExactOptions::default()).unwrap();
    let reference = ode(lab, &psi0.amplitudes, t, 0.05);
    assert!(common::max_diff(&r.state.amplitudes, &reference) < 1e-8);
}

#[test]
fn rwa_error_shrinks_with_drive_strength() {
    let omega = 1.0;
    let system = LevelSystem::new(vec![0.0, omega], vec![Coupling::real(1, 0, 1.0)]).unwrap();
    let mut last = f64::INFINITY;
    for a in [0.1, 0.03, 0.01, 0.003] {
        let drives = DriveSet::new(&system, vec![Drive::polar(a, 0.0, omega)], vec![(1, 0)]).unwrap();
        let t = std::f64::consts::FRAC_PI_2 / a;
        let effective = common::effective_from_ground(&system, &drives, t);
        let r = propagate_exact(&system, &drives, &StateVector::basis(2, 0, Frame::Lab), t, &ExactOptions::default()).unwrap();
        let c = frame_transform(&r.state, Frame::Interaction, &system, &[]).unwrap();
        let err = infidelity(&StateVector::new(effective, Frame::Interaction, t), &c).unwrap();
        assert!(err < last, "{a}: {err} !< {last}");
        last = err;
    }
    assert!(last < 1e-4);
}

#[test]
fn infidelity_is_frame_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (system, _) = common::random_driven_tree(4, &mut rng);
    let t = 12.5;
    let a = StateVector::new(common::random_unit(4, &mut rng), Frame::Interaction, t);
    let b = StateVector::new(common::random_unit(4, &mut rng), Frame::Interaction, t);
    let in_c = infidelity(&a, &b).unwrap();
    let a_lab = frame_transform(&a, Frame::Lab, &system, &[]).unwrap();
    let b_lab = frame_transform(&b, Frame::Lab, &system, &[]).unwrap();
    assert!((infidelity(&a_lab, &b_lab).unwrap() - in_c).abs() < 1e-14);
    assert!(matches!(infidelity(&a_lab, &b), Err(Error::FrameMismatch { .. })));
}

#[test]
fn stop_token_cancels() {
    let system = LevelSystem::new(vec![0.0, 1.0], vec![Coupling::real(1, 0, 1.0)]).unwrap();
    let drives = DriveSet::new(&system, vec![Drive::polar(0.01, 0.0, 1.0)], vec![(1, 0)]).unwrap();
    let stop = AtomicBool::new(true);
    let options = ExactOptions {
        stop: Some(&stop),
        ..Default::default()
    };
    let r = propagate_exact(&system, &drives, &StateVector::basis(2, 0, Frame::Lab), 100.0, &options);
    assert!(matches!(r, Err(Error::Cancelled { .. })));
}
