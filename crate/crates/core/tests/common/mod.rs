#![allow(dead_code)]

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

use rwa_control::dynamics::{frame_transform, propagate_effective, Frame, StateVector};
use rwa_control::experiments::instance::random_tree;
use rwa_control::graph::{Coupling, LevelSystem};
use rwa_control::rwa::{Drive, DriveSet};
use rwa_control::RwaModel;

/// Random tree on `n` levels with sorted energies in `[0, n]`, random complex
/// couplings and one drive per edge at a random detuning of either sign.
pub fn random_driven_tree(n: usize, rng: &mut impl Rng) -> (LevelSystem, DriveSet) {
    let edges = random_tree(n, rng);
    let mut energies: Vec<f64> = (0..n).map(|i| i as f64 + rng.gen_range(0.0..0.5)).collect();
    energies.sort_by(f64::total_cmp);
    let couplings = edges
        .iter()
        .map(|&(a, b)| Coupling::new(a, b, Complex64::from_polar(rng.gen_range(0.2..2.0), rng.gen_range(0.0..6.3))))
        .collect();
    let system = LevelSystem::new(energies, couplings).unwrap();
    let mut fields = Vec::new();
    let mut assignment = Vec::new();
    for (a, b) in system.coupled_edges() {
        let (k, j) = system.orient(a, b);
        let scale = 10f64.powf(rng.gen_range(-7.0..-1.0));
        let detuning = if rng.gen_bool(0.5) { scale } else { -scale };
        fields.push(Drive::polar(rng.gen_range(0.0..0.05), rng.gen_range(0.0..6.3), system.transition(k, j) - detuning));
        assignment.push((k, j));
    }
    let drives = DriveSet::new(&system, fields, assignment).unwrap();
    (system, drives)
}

/// Star with center 0 and unit real couplings, driven at a common detuning.
pub fn star_system(amplitudes: &[Complex64], detuning: f64) -> (LevelSystem, DriveSet) {
    let n = amplitudes.len() + 1;
    let energies: Vec<f64> = (0..n).map(|k| if k == 0 { 0.0 } else { 1.0 + 0.37 * k as f64 }).collect();
    let couplings = (1..n).map(|k| Coupling::real(k, 0, 1.0)).collect();
    let system = LevelSystem::new(energies, couplings).unwrap();
    let fields = amplitudes
        .iter()
        .enumerate()
        .map(|(i, &a)| Drive::new(a, system.transition(i + 1, 0) - detuning))
        .collect();
    let drives = DriveSet::new(&system, fields, (1..n).map(|k| (k, 0)).collect()).unwrap();
    (system, drives)
}

/// Interaction-frame state after `t` under the effective generator, starting in level 0.
pub fn effective_from_ground(system: &LevelSystem, drives: &DriveSet, t: f64) -> DVector<Complex64> {
    let model = RwaModel::build(system, drives).unwrap();
    let b0 = StateVector::basis(system.dim(), 0, Frame::Rotating);
    let b = propagate_effective(&model.generator, &b0, t).unwrap();
    frame_transform(&b, Frame::Interaction, system, &model.generator.gamma.gamma)
        .unwrap()
        .amplitudes
}

pub fn max_diff(a: &DVector<Complex64>, b: &DVector<Complex64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn random_unit(n: usize, rng: &mut impl Rng) -> DVector<Complex64> {
    rwa_control::experiments::instance::random_state(n, rng)
}
