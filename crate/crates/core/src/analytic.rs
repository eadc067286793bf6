//! Closed-form transfer from the ground state for two-level and star systems.
//!
//! The detuning `delta` is the signed value `E_upper - ω` shared by every
//! driven edge, and all coefficients are interaction-frame (`c`) amplitudes.
//! With `x = Ã t / 2` and `Ã = sqrt(Δ² + Σ|A_k|²)` the evolution from `|0⟩` is
//!
//! ```text
//! c_0 = e^{-iΔt/2} (cos x + i (Δ/Ã) sin x)
//! c_k = -i e^{ iΔt/2} (A_k/Ã) sin x
//! ```

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;

/// Bloch-sphere goal `(cos(Θ/2), e^{iφ} sin(Θ/2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelGoal {
    pub theta: f64,
    pub phi: f64,
}

impl TwoLevelGoal {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidArgument(format!("polar angle {theta} outside [0, π]")));
        }
        if !phi.is_finite() {
            return Err(Error::InvalidArgument(format!("azimuth {phi} is not finite")));
        }
        Ok(Self {
            theta,
            phi: phi.rem_euclid(TAU),
        })
    }

    pub fn state(&self) -> DVector<Complex64> {
        let (s, c) = (0.5 * self.theta).sin_cos();
        DVector::from_vec(vec![Complex64::new(c, 0.0), Complex64::from_polar(s, self.phi)])
    }

    /// The same target as a single-leaf star goal.
    pub fn as_star(&self) -> StarGoal {
        let (s, c) = (0.5 * self.theta).sin_cos();
        StarGoal {
            xi: vec![c, s],
            beta: vec![self.phi],
        }
    }
}

/// Star goal: moduli `xi` (center first) and relative phases `beta` of the leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarGoal {
    pub xi: Vec<f64>,
    pub beta: Vec<f64>,
}

impl StarGoal {
    pub fn new(xi: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if xi.len() < 2 || beta.len() + 1 != xi.len() {
            return Err(Error::InvalidArgument(format!(
                "star goal needs N >= 2 moduli and N-1 phases, got {} and {}",
                xi.len(),
                beta.len()
            )));
        }
        if xi.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("star goal moduli must be finite and nonnegative".into()));
        }
        let norm: f64 = xi.iter().map(|x| x * x).sum();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("star goal is not normalized (norm² = {norm})")));
        }
        Ok(Self { xi, beta })
    }

    /// Reads moduli and phases relative to the center amplitude, normalizing first.
    pub fn from_state(c: &[Complex64]) -> Result<Self> {
        let norm = c.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if c.len() < 2 || !(norm > 0.0) {
            return Err(Error::InvalidArgument("goal state must have N >= 2 and nonzero norm".into()));
        }
        let reference = if c[0].norm() > 0.0 { c[0].arg() } else { 0.0 };
        Ok(Self {
            xi: c.iter().map(|a| a.norm() / norm).collect(),
            beta: c[1..].iter().map(|a| (a.arg() - reference).rem_euclid(TAU)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn state(&self) -> DVector<Complex64> {
        let mut v = vec![Complex64::new(self.xi[0], 0.0)];
        v.extend(self.xi[1..].iter().zip(&self.beta).map(|(&x, &b)| Complex64::from_polar(x, b)));
        DVector::from_vec(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSolution {
    /// Drive magnitudes, one per leaf.
    pub amplitudes: Vec<f64>,
    /// Drive phases in `[0, 2π)`.
    pub phases: Vec<f64>,
    pub duration: f64,
    pub reachable: bool,
    /// `sqrt(Δ² + Σ|A|²)`.
    pub rabi: f64,
}

impl ControlSolution {
    /// Complex drive amplitudes `|A| e^{iα}`.
    pub fn drives(&self) -> Vec<Complex64> {
        self.amplitudes
            .iter()
            .zip(&self.phases)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }
}

/// Largest polar angle reachable from `|0⟩` with drive budget `amplitude` at detuning `delta`.
pub fn max_reachable_angle(amplitude: f64, delta: f64) -> f64 {
    let rabi = amplitude.hypot(delta);
    if rabi == 0.0 {
        return 0.0;
    }
    2.0 * (amplitude / rabi).min(1.0).asin()
}

/// Interaction-frame coefficients at time `t` starting from `|0⟩`.
pub fn two_level_evolve(amplitude: Complex64, delta: f64, t: f64) -> (Complex64, Complex64) {
    let c = star_evolve(&[amplitude], delta, t);
    (c[0], c[1])
}

/// Interaction-frame coefficients of a star centered on level 0 with one drive per leaf.
pub fn star_evolve(amplitudes: &[Complex64], delta: f64, t: f64) -> DVector<Complex64> {
    let budget: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let rabi = (delta * delta + budget).sqrt();
    let mut out = DVector::zeros(amplitudes.len() + 1);
    if rabi == 0.0 {
        out[0] = Complex64::new(1.0, 0.0);
        return out;
    }
    let (s, c) = (0.5 * rabi * t).sin_cos();
    let half = 0.5 * delta * t;
    out[0] = Complex64::from_polar(1.0, -half) * Complex64::new(c, delta / rabi * s);
    let leaf = Complex64::from_polar(1.0, half) * Complex64::new(0.0, -s / rabi);
    for (o, a) in out.iter_mut().skip(1).zip(amplitudes) {
        *o = leaf * a;
    }
    out
}

/// Bloch goal from `|0⟩` with fixed drive strength; the returned phase makes the
/// reached state match the goal up to a global phase.
pub fn two_level_solve(goal: &TwoLevelGoal, amplitude: f64, delta: f64) -> Result<ControlSolution> {
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!("drive amplitude must be positive, got {amplitude}")));
    }
    let mut sol = star_solve(&goal.as_star(), &[amplitude], delta)?;
    if delta == 0.0 {
        sol.duration = goal.theta / amplitude;
    }
    Ok(sol)
}

/// Star goal from `|0⟩` under a common detuning.
///
/// Only the total budget `Σ|A_k|²` of `amplitudes` is kept; the returned
/// magnitudes are redistributed in proportion to the goal moduli.
pub fn star_solve(goal: &StarGoal, amplitudes: &[f64], delta: f64) -> Result<ControlSolution> {
    let leaves = goal.dim() - 1;
    if amplitudes.len() != leaves {
        return Err(Error::DimensionMismatch(leaves, amplitudes.len()));
    }
    if amplitudes.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) || !delta.is_finite() {
        return Err(Error::InvalidArgument("amplitudes must be finite and nonnegative".into()));
    }
    for (k, (&x, &a)) in goal.xi[1..].iter().zip(amplitudes).enumerate() {
        if x > 0.0 && a == 0.0 {
            return Err(Error::InconsistentGoal(format!(
                "leaf {} has goal weight {x} but no drive",
                k + 1
            )));
        }
    }
    let budget: f64 = amplitudes.iter().map(|a| a * a).sum();
    let strength = budget.sqrt();
    let rabi = (delta * delta + budget).sqrt();
    let xi0 = goal.xi[0].min(1.0);
    let leaf_weight = goal.xi[1..].iter().map(|x| x * x).sum::<f64>().sqrt();

    if leaf_weight == 0.0 {
        return Ok(ControlSolution {
            amplitudes: amplitudes.to_vec(),
            phases: vec![0.0; leaves],
            duration: 0.0,
            reachable: true,
            rabi,
        });
    }
    let sin_x = leaf_weight * rabi / strength;
    if sin_x > 1.0 + 1e-15 {
        return Err(Error::Unreachable {
            max_reachable: max_reachable_angle(strength, delta),
        });
    }
    let x = if delta == 0.0 {
        leaf_weight.atan2(xi0)
    } else {
        sin_x.min(1.0).asin()
    };
    let duration = 2.0 * x / rabi;
    let (s, c) = x.sin_cos();
    let chi = (delta * s).atan2(rabi * c);
    let offset = FRAC_PI_2 - delta * duration + chi;
    Ok(ControlSolution {
        amplitudes: goal.xi[1..].iter().map(|x| x * strength / leaf_weight).collect(),
        phases: goal.beta.iter().map(|b| (b + offset).rem_euclid(TAU)).collect(),
        duration,
        reachable: true,
        rabi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::infidelity_raw;
    use approx::assert_abs_diff_eq;

    #[test]
    fn resonant_pi_pulse_transfers() {
        let (c0, c1) = two_level_evolve(Complex64::new(1.0, 0.0), 0.0, PI);
        assert_abs_diff_eq!(c0.norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c1.norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn undriven_stays() {
        for t in [0.0, 1.0, 17.0] {
            let (c0, c1) = two_level_evolve(Complex64::new(0.0, 0.0), 0.4, t);
            assert_abs_diff_eq!(c0.norm(), 1.0, epsilon = 1e-15);
            assert_eq!(c1.norm(), 0.0);
        }
    }

    #[test]
    fn quarter_turn() {
        let goal = TwoLevelGoal::new(FRAC_PI_2, 0.0).unwrap();
        let sol = two_level_solve(&goal, 1.0, 0.0).unwrap();
        assert_eq!(sol.duration, FRAC_PI_2);
        let (c0, c1) = two_level_evolve(sol.drives()[0], 0.0, sol.duration);
        let reached = DVector::from_vec(vec![c0, c1]);
        assert!(infidelity_raw(&goal.state(), &reached) < 1e-15);
    }

    #[test]
    fn full_inversion_needs_resonance() {
        let goal = TwoLevelGoal::new(PI, 0.3).unwrap();
        assert!(two_level_solve(&goal, 1.0, 0.0).is_ok());
        for delta in [1e-6, -0.1, 3.0] {
            assert!(matches!(
                two_level_solve(&goal, 1.0, delta),
                Err(Error::Unreachable { .. })
            ));
        }
    }

    #[test]
    fn boundary_case() {
        let goal = TwoLevelGoal::new(FRAC_PI_2, 0.0).unwrap();
        let sol = two_level_solve(&goal, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(sol.duration, 2f64.sqrt() * FRAC_PI_2, epsilon = 1e-7);
        let (c0, c1) = two_level_evolve(sol.drives()[0], 1.0, sol.duration);
        assert!(infidelity_raw(&goal.state(), &DVector::from_vec(vec![c0, c1])) < 1e-12);
    }

    #[test]
    fn equal_leaves() {
        let h = 0.5f64.sqrt();
        let goal = StarGoal::new(vec![0.0, h, h], vec![0.0, 0.0]).unwrap();
        let sol = star_solve(&goal, &[0.3, 0.7], 0.0).unwrap();
        assert_abs_diff_eq!(sol.amplitudes[0], sol.amplitudes[1], epsilon = 1e-15);
        assert_abs_diff_eq!(sol.duration, PI / sol.rabi, epsilon = 1e-15);
        let c = star_evolve(&sol.drives(), 0.0, sol.duration);
        assert!(infidelity_raw(&goal.state(), &c) < 1e-15);
        assert_abs_diff_eq!(c[0].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn trivial_goal_takes_no_time() {
        let goal = StarGoal::new(vec![1.0, 0.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(star_solve(&goal, &[1.0, 1.0], 0.2).unwrap().duration, 0.0);
    }

    #[test]
    fn undriven_weighted_leaf_is_inconsistent() {
        let h = 0.5f64.sqrt();
        let goal = StarGoal::new(vec![0.0, h, h], vec![0.0, 0.0]).unwrap();
        assert!(matches!(star_solve(&goal, &[1.0, 0.0], 0.0), Err(Error::InconsistentGoal(_))));
    }

    #[test]
    fn goal_validation() {
        assert!(TwoLevelGoal::new(4.0, 0.0).is_err());
        assert!(StarGoal::new(vec![0.5, 0.5], vec![0.0]).is_err());
        assert!(StarGoal::new(vec![1.0], vec![]).is_err());
        let g = StarGoal::from_state(&[Complex64::new(0.0, 2.0), Complex64::new(0.0, -2.0)]).unwrap();
        assert_abs_diff_eq!(g.beta[0], PI, epsilon = 1e-15);
        assert_abs_diff_eq!(g.xi[0], 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn reachable_angle_monotone() {
        let mut last = 0.0;
        for i in 1..50 {
            let a = 0.05 * i as f64;
            let r = max_reachable_angle(a, 0.3);
            assert!(r >= last);
            last = r;
        }
        assert_eq!(max_reachable_angle(1.0, 0.0), PI);
    }
}
