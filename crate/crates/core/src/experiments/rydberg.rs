//! Two Rydberg atoms driven by constant lasers: Bell-state preparation from `|00⟩`.
//!
//! Basis order is `00, 01, 0r, 10, 11, 1r, r0, r1, rr` (first character is atom 1).
//! Laser `i` (0-based) is the `i+1`-th Rabi frequency of the blockade Hamiltonian.
//! Frequencies are angular, in rad/µs, and times are in µs.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{infidelity_raw, propagate_harmonic, EffectivePropagator, ExactOptions, HarmonicHamiltonian};
use crate::error::{Error, Result};
use crate::graph::{Coupling, LevelGraph, LevelSystem};
use crate::nelder_mead::{nelder_mead, SimplexConfig};

pub const BASIS: [&str; 9] = ["00", "01", "0r", "10", "11", "1r", "r0", "r1", "rr"];
pub const LASERS: usize = 8;

/// One MHz of ordinary frequency as an angular frequency in rad/µs.
pub const MHZ: f64 = TAU;

const S00: usize = 0;
const S01: usize = 1;
const S0R: usize = 2;
const S10: usize = 3;
const S11: usize = 4;
const S1R: usize = 5;
const SR0: usize = 6;
const SR1: usize = 7;
const SRR: usize = 8;

/// `(laser, upper, lower)` for every transition kept under perfect blockade.
pub const BLOCKADE_TRANSITIONS: [(usize, usize, usize); 12] = [
    (0, S0R, S00),
    (0, S1R, S10),
    (1, SR0, S00),
    (1, SR1, S01),
    (2, S0R, S01),
    (2, S1R, S11),
    (3, SR0, S10),
    (3, SR1, S11),
    (4, SRR, S0R),
    (5, SRR, S1R),
    (6, SRR, SR0),
    (7, SRR, SR1),
];

/// Single-atom line addressed by each laser: (atom 1 or 2, lower qubit state 0 or 1).
const LINES: [(u8, usize); LASERS] = [(2, 0), (1, 0), (2, 1), (1, 1), (1, 0), (1, 1), (2, 0), (2, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockadeMode {
    /// Only the transitions of the blockade Hamiltonian are driven.
    Perfect,
    /// Every laser drives its single-atom line for all partner states, and
    /// `|rr⟩` is shifted by the finite interaction.
    Finite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RydbergScenario {
    /// Complex Rabi frequencies in rad/µs.
    pub rabi: [Complex64; LASERS],
    /// Detunings δ_1..δ_5 in rad/µs.
    pub detunings: [f64; 5],
    /// Blockade interaction in rad/µs.
    pub blockade: f64,
    pub active: [bool; LASERS],
    pub mode: BlockadeMode,
    /// Pulse duration in µs.
    pub duration: f64,
}

impl RydbergScenario {
    /// Published protocol: lasers 1, 4, 5, 8 on, δ_5 = -U, other detunings zero.
    pub fn published() -> Self {
        let u = 20.0 * MHZ;
        let mut rabi = [Complex64::new(0.0, 0.0); LASERS];
        rabi[0] = Complex64::new(1.0 * MHZ, 0.0);
        rabi[3] = Complex64::new(1.0 * MHZ, 0.0);
        rabi[4] = Complex64::new(3.2 * MHZ, 0.0);
        rabi[7] = Complex64::new(1.3 * MHZ, 0.0);
        Self {
            rabi,
            detunings: [0.0, 0.0, 0.0, 0.0, -u],
            blockade: u,
            active: [true, false, false, true, true, false, false, true],
            mode: BlockadeMode::Perfect,
            duration: 0.314,
        }
    }

    /// Same scenario with the interaction (and δ_5 = -U) scaled by `factor`.
    pub fn with_blockade_scaled(&self, factor: f64) -> Self {
        let mut s = self.clone();
        s.blockade *= factor;
        s.detunings[4] *= factor;
        s
    }

    fn rabi_active(&self, laser: usize) -> Complex64 {
        if self.active[laser] {
            self.rabi[laser]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Diagonal of the blockade Hamiltonian.
    pub fn diagonal(&self) -> [f64; 9] {
        let [d1, d2, d3, d4, d5] = self.detunings;
        let mut d = [0.0; 9];
        d[S01] = d1 + d3;
        d[S0R] = d1;
        d[S10] = d2 + d4;
        d[S11] = d1 + d2 + d3 + d4;
        d[S1R] = d1 + d2 + d4;
        d[SR0] = d2;
        d[SR1] = d1 + d2 + d3;
        d[SRR] = d1 + d5 + self.blockade;
        d
    }

    /// Phase rate of level `x` when passing from the bare-atom frame to the blockade frame.
    fn frame_rate(&self, x: usize) -> f64 {
        let interaction = if x == SRR { self.blockade } else { 0.0 };
        interaction - self.diagonal()[x]
    }

    /// Oscillation frequency of laser `i` in the bare-atom frame.
    pub fn laser_frequency(&self, laser: usize) -> f64 {
        let (_, up, low) = BLOCKADE_TRANSITIONS
            .iter()
            .copied()
            .find(|t| t.0 == laser)
            .expect("every laser has a listed transition");
        self.frame_rate(low) - self.frame_rate(up)
    }

    fn validate(&self) -> Result<()> {
        let finite = self.rabi.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.detunings.iter().all(|d| d.is_finite())
            && self.blockade.is_finite();
        if !finite || !(self.duration >= 0.0) {
            return Err(Error::InvalidArgument("Rydberg scenario has non-finite parameters or negative duration".into()));
        }
        Ok(())
    }
}

/// Mirrors `u` into `[0, 1]` with period 2.
fn fold(u: f64) -> f64 {
    let m = u.rem_euclid(2.0);
    if m > 1.0 {
        2.0 - m
    } else {
        m
    }
}

fn level(atom1: usize, atom2: usize) -> usize {
    3 * atom1 + atom2
}

/// Transitions `(upper, lower)` of the single-atom line driven by `laser`.
pub fn line_transitions(laser: usize) -> Vec<(usize, usize)> {
    let (atom, q) = LINES[laser];
    (0..3)
        .map(|p| match atom {
            1 => (level(2, p), level(q, p)),
            _ => (level(p, 2), level(p, q)),
        })
        .collect()
}

/// Blockade-frame Hamiltonian with its coupling graph.
#[derive(Debug, Clone)]
pub struct RydbergModel {
    pub hamiltonian: DMatrix<Complex64>,
    pub graph: LevelGraph,
    /// `(laser, upper, lower)` for every driven transition.
    pub transitions: Vec<(usize, usize, usize)>,
}

impl RydbergModel {
    /// Basis labels of each connected component.
    pub fn component_labels(&self) -> Vec<Vec<&'static str>> {
        self.graph
            .components()
            .into_iter()
            .map(|c| c.into_iter().map(|v| BASIS[v]).collect())
            .collect()
    }

    /// Lasers that drive more than one transition.
    pub fn shared_lasers(&self) -> Vec<usize> {
        (0..LASERS)
            .filter(|&l| self.transitions.iter().filter(|t| t.0 == l).count() > 1)
            .collect()
    }

    /// Level system with the blockade-frame diagonal as energies and the active
    /// Rabi couplings as the coupling pattern.
    pub fn level_system(&self) -> Result<LevelSystem> {
        let energies = (0..9).map(|k| self.hamiltonian[(k, k)].re).collect();
        let couplings = self
            .transitions
            .iter()
            .map(|&(_, up, low)| Coupling::new(up, low, self.hamiltonian[(up, low)]))
            .collect();
        LevelSystem::new(energies, couplings)
    }
}

/// Blockade Hamiltonian with inactive lasers removed. The raising element of
/// laser `i` is `Ω_i / 2`, its lowering element the conjugate.
pub fn build_rydberg(scenario: &RydbergScenario) -> Result<RydbergModel> {
    scenario.validate()?;
    let mut h = DMatrix::zeros(9, 9);
    for (k, d) in scenario.diagonal().iter().enumerate() {
        h[(k, k)] = Complex64::new(*d, 0.0);
    }
    let mut transitions = Vec::new();
    for &(laser, up, low) in &BLOCKADE_TRANSITIONS {
        let omega = scenario.rabi_active(laser);
        if omega.norm() == 0.0 {
            continue;
        }
        h[(up, low)] += 0.5 * omega;
        h[(low, up)] += 0.5 * omega.conj();
        transitions.push((laser, up, low));
    }
    let graph = LevelGraph::from_edges(9, transitions.iter().map(|&(_, u, l)| (u, l)));
    Ok(RydbergModel {
        hamiltonian: h,
        graph,
        transitions,
    })
}

/// Finite-blockade Hamiltonian in the bare-atom frame: `U|rr⟩⟨rr|` plus every
/// active laser on its whole single-atom line at its own frequency.
pub fn finite_blockade_hamiltonian(scenario: &RydbergScenario) -> HarmonicHamiltonian {
    let mut h = HarmonicHamiltonian::new(9);
    h.diagonal[SRR] = scenario.blockade;
    for laser in 0..LASERS {
        let omega = scenario.rabi_active(laser);
        if omega.norm() == 0.0 {
            continue;
        }
        let nu = scenario.laser_frequency(laser);
        for (up, low) in line_transitions(laser) {
            h.push(up, low, 0.5 * omega, nu);
        }
    }
    h
}

fn ground() -> DVector<Complex64> {
    let mut v = DVector::zeros(9);
    v[S00] = Complex64::new(1.0, 0.0);
    v
}

/// `(|00⟩ + |11⟩)/√2`.
pub fn bell_state() -> DVector<Complex64> {
    let mut v = DVector::zeros(9);
    let a = Complex64::new(0.5f64.sqrt(), 0.0);
    v[S00] = a;
    v[S11] = a;
    v
}

/// Blockade-frame state reached from `|00⟩` after the scenario's duration.
pub fn evolve_rydberg(scenario: &RydbergScenario, options: &ExactOptions<'_>) -> Result<DVector<Complex64>> {
    match scenario.mode {
        BlockadeMode::Perfect => {
            let model = build_rydberg(scenario)?;
            Ok(EffectivePropagator::new(&model.hamiltonian)?.evolve(&ground(), scenario.duration))
        }
        BlockadeMode::Finite => {
            scenario.validate()?;
            let h = finite_blockade_hamiltonian(scenario);
            let (mut b, _) = propagate_harmonic(&h, &ground(), 0.0, scenario.duration, options, |_, _| {})?;
            for (k, a) in b.iter_mut().enumerate() {
                *a *= Complex64::from_polar(1.0, scenario.frame_rate(k) * scenario.duration);
            }
            Ok(b)
        }
    }
}

pub fn bell_infidelity(scenario: &RydbergScenario, options: &ExactOptions<'_>) -> Result<f64> {
    Ok(infidelity_raw(&bell_state(), &evolve_rydberg(scenario, options)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RydbergProtocol {
    /// Rabi magnitudes in rad/µs, zero for inactive lasers.
    pub rabi: [f64; LASERS],
    pub phases: [f64; LASERS],
    /// µs.
    pub duration: f64,
    /// Infidelity under perfect blockade.
    pub infidelity: f64,
}

impl RydbergProtocol {
    fn from_scenario(s: &RydbergScenario, infidelity: f64) -> Self {
        let mut rabi = [0.0; LASERS];
        let mut phases = [0.0; LASERS];
        for l in 0..LASERS {
            let z = s.rabi_active(l);
            rabi[l] = z.norm();
            phases[l] = if z.norm() > 0.0 { z.arg().rem_euclid(TAU) } else { 0.0 };
        }
        Self {
            rabi,
            phases,
            duration: s.duration,
            infidelity,
        }
    }

    pub fn apply(&self, base: &RydbergScenario) -> RydbergScenario {
        let mut s = base.clone();
        for l in 0..LASERS {
            s.rabi[l] = Complex64::from_polar(self.rabi[l], self.phases[l]);
        }
        s.duration = self.duration;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReoptimizeConfig {
    pub simplex: SimplexConfig,
    pub starts: usize,
    pub seed: u64,
}

impl Default for ReoptimizeConfig {
    fn default() -> Self {
        Self {
            simplex: SimplexConfig {
                max_evaluations: 20_000,
                restarts: 5,
                xtol: 1e-12,
                ftol: 1e-16,
                target: 1e-12,
                ..SimplexConfig::default()
            },
            starts: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RydbergReport {
    pub scenario: RydbergScenario,
    /// Connected components of the active coupling graph, as basis labels.
    pub components: Vec<Vec<String>>,
    /// The input protocol under perfect blockade.
    pub printed: RydbergProtocol,
    /// Re-optimized protocol under perfect blockade, when requested.
    pub reoptimized: Option<RydbergProtocol>,
    pub evaluations: usize,
    /// Finite-blockade infidelity of the final protocol, when requested.
    pub finite_infidelity: Option<f64>,
}

/// Re-optimizes the active Rabi magnitudes, phases and duration for the
/// perfect-blockade Bell transfer, starting from the scenario's values.
///
/// Each magnitude is bounded above by the scenario's value for that laser, so
/// the published Rabi frequencies act as the feasible drive strengths and the
/// duration absorbs the rest.
pub fn reoptimize(scenario: &RydbergScenario, config: &ReoptimizeConfig) -> Result<(RydbergProtocol, usize)> {
    let active: Vec<usize> = (0..LASERS).filter(|&l| scenario.active[l]).collect();
    if active.is_empty() {
        return Err(Error::InvalidArgument("no active lasers to optimize".into()));
    }
    let mut base = scenario.clone();
    base.mode = BlockadeMode::Perfect;
    let m = active.len();
    let bound: Vec<f64> = active.iter().map(|&l| scenario.rabi[l].norm()).collect();
    let decode = |x: &[f64]| -> RydbergScenario {
        let mut s = base.clone();
        for (i, &l) in active.iter().enumerate() {
            s.rabi[l] = Complex64::from_polar(bound[i] * fold(x[i]), x[m + i]);
        }
        s.duration = x[2 * m].abs();
        s
    };
    let objective = |x: &[f64]| -> f64 {
        let s = decode(x);
        build_rydberg(&s)
            .and_then(|model| EffectivePropagator::new(&model.hamiltonian))
            .map(|p| infidelity_raw(&bell_state(), &p.evolve(&ground(), s.duration)))
            .unwrap_or(f64::NAN)
    };

    let mut x0: Vec<f64> = vec![1.0; m];
    x0.extend(active.iter().map(|&l| scenario.rabi[l].arg()));
    x0.push(scenario.duration);
    let mut simplex = config.simplex.clone();
    simplex.scale = std::iter::repeat(0.1)
        .take(m)
        .chain(std::iter::repeat(PI / 4.0).take(m))
        .chain(std::iter::once(0.1 * scenario.duration.max(1e-3)))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    for s in 0..config.starts.max(1) {
        let start = if s == 0 {
            x0.clone()
        } else {
            let mut x: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
            x.extend((0..m).map(|_| rng.gen_range(0.0..TAU)));
            x.push(x0[2 * m] * rng.gen_range(0.5..1.5));
            x
        };
        let r = nelder_mead(objective, &start, &simplex)?;
        evaluations += r.stats.evaluations;
        if best.as_ref().map_or(true, |(_, f)| r.f < *f) {
            best = Some((r.x, r.f));
        }
        if best.as_ref().is_some_and(|(_, f)| *f <= simplex.target) {
            break;
        }
    }
    let (x, f) = best.expect("at least one start runs");
    Ok((RydbergProtocol::from_scenario(&decode(&x), f), evaluations))
}

/// Bell-state transfer: printed protocol under perfect blockade, optional
/// re-optimization, and optional finite-blockade evaluation of the final protocol.
pub fn rydberg_bell_transfer(
    scenario: &RydbergScenario,
    reoptimize_with: Option<&ReoptimizeConfig>,
    finite_blockade: bool,
    options: &ExactOptions<'_>,
) -> Result<RydbergReport> {
    let mut perfect = scenario.clone();
    perfect.mode = BlockadeMode::Perfect;
    let model = build_rydberg(&perfect)?;
    let printed = RydbergProtocol::from_scenario(&perfect, bell_infidelity(&perfect, options)?);
    let (reoptimized, evaluations) = match reoptimize_with {
        Some(cfg) => {
            let (p, e) = reoptimize(&perfect, cfg)?;
            (Some(p), e)
        }
        None => (None, 0),
    };
    let finite_infidelity = if finite_blockade {
        let protocol = reoptimized.as_ref().unwrap_or(&printed);
        let mut finite = protocol.apply(&perfect);
        finite.mode = BlockadeMode::Finite;
        Some(bell_infidelity(&finite, options)?)
    } else {
        None
    };
    Ok(RydbergReport {
        scenario: scenario.clone(),
        components: model
            .component_labels()
            .into_iter()
            .map(|c| c.into_iter().map(String::from).collect())
            .collect(),
        printed,
        reoptimized,
        evaluations,
        finite_infidelity,
    })
}
