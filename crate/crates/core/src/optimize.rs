//! State transfer by simplex search over drive magnitudes, phases and duration,
//! with an exact-propagation double check of the result.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{star_solve, StarGoal};
use crate::dynamics::{frame_transform, infidelity_raw, propagate_exact, EffectivePropagator, ExactOptions, Frame, StateVector};
use crate::error::{Error, Result};
use crate::graph::{build_graph, LevelSystem};
use crate::nelder_mead::{nelder_mead, SimplexConfig};
use crate::rwa::{Drive, DriveSet, RwaModel};

/// Default success threshold on the infidelity.
pub const DEFAULT_EPSILON: f64 = 1e-3;

const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TransferProblem {
    pub system: LevelSystem,
    /// Drive frequencies and field-to-edge assignment; amplitudes are ignored.
    pub drives: DriveSet,
    /// Interaction-frame state at `t = 0`.
    pub initial: DVector<Complex64>,
    /// Interaction-frame target at `t = T`.
    pub goal: DVector<Complex64>,
    pub epsilon: f64,
}

impl TransferProblem {
    pub fn new(
        system: LevelSystem,
        drives: DriveSet,
        initial: DVector<Complex64>,
        goal: DVector<Complex64>,
        epsilon: f64,
    ) -> Result<Self> {
        let n = system.dim();
        if initial.len() != n {
            return Err(Error::DimensionMismatch(n, initial.len()));
        }
        if goal.len() != n {
            return Err(Error::DimensionMismatch(n, goal.len()));
        }
        for (name, v) in [("initial", &initial), ("goal", &goal)] {
            if (v.norm() - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidArgument(format!("{name} state is not normalized (norm {})", v.norm())));
            }
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("success threshold must be in (0, 1), got {epsilon}")));
        }
        let graph = build_graph(&system);
        if !graph.connected {
            return Err(Error::DisconnectedGraph);
        }
        if !graph.acyclic {
            return Err(Error::CyclicGraph);
        }
        if drives.len() != system.coupled_edges().len() {
            let driven: Vec<_> = drives.assignment().to_vec();
            let missing = system
                .coupled_edges()
                .into_iter()
                .find(|&(k, j)| !driven.iter().any(|&(a, b)| (a, b) == (k, j) || (a, b) == (j, k)));
            if let Some((k, j)) = missing {
                return Err(Error::UnassignedEdge { k, j });
            }
        }
        Ok(Self {
            system,
            drives,
            initial,
            goal,
            epsilon,
        })
    }

    pub fn field_count(&self) -> usize {
        self.drives.len()
    }

    /// Number of optimized parameters: a magnitude and a phase per field, plus the duration.
    pub fn parameter_count(&self) -> usize {
        2 * self.field_count() + 1
    }

    /// The common detuning if every driven edge shares it.
    pub fn common_detuning(&self) -> Option<f64> {
        let d: Vec<f64> = self
            .drives
            .fields()
            .iter()
            .zip(self.drives.assignment())
            .map(|(f, &(k, j))| self.system.transition(k, j) - f.omega)
            .collect();
        let first = *d.first()?;
        // Each difference carries rounding at the scale of the drive frequency.
        let scale = self.drives.fields().iter().map(|f| f.omega.abs()).fold(0.0, f64::max);
        let tol = 1e-12 * first.abs() + 16.0 * f64::EPSILON * scale;
        d.iter().all(|x| (x - first).abs() <= tol).then_some(first)
    }

    /// Drive set with the given magnitudes and phases.
    pub fn drives_with(&self, amplitudes: &[f64], phases: &[f64]) -> DriveSet {
        let amps: Vec<Complex64> = amplitudes
            .iter()
            .zip(phases)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect();
        self.drives.with_amplitudes(&amps)
    }

    /// `0.05 · min ω_f`, the largest magnitude considered safely inside the RWA.
    pub fn default_amplitude_cap(&self) -> f64 {
        0.05 * self.drives.fields().iter().map(|d| d.omega).fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates the RWA transfer for a fixed problem; the rotating-frame weights are
/// computed once and only the drive terms change between calls.
#[derive(Debug, Clone)]
pub struct RwaEvaluator {
    gamma: Vec<f64>,
    /// (upper, lower, coupling) per field.
    edges: Vec<(usize, usize, Complex64)>,
    initial: DVector<Complex64>,
    goal: DVector<Complex64>,
}

impl RwaEvaluator {
    pub fn new(problem: &TransferProblem) -> Result<Self> {
        let model = RwaModel::build(&problem.system, &problem.drives)?;
        let edges = problem
            .drives
            .assignment()
            .iter()
            .map(|&(k, j)| (k, j, problem.system.coupling(k, j)))
            .collect();
        Ok(Self {
            gamma: model.generator.gamma.gamma.clone(),
            edges,
            initial: problem.initial.clone(),
            goal: problem.goal.clone(),
        })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn generator(&self, amplitudes: &[Complex64]) -> DMatrix<Complex64> {
        let n = self.gamma.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, g) in self.gamma.iter().enumerate() {
            m[(k, k)] = Complex64::new(-g, 0.0);
        }
        for (&(k, j, h), a) in self.edges.iter().zip(amplitudes) {
            let z = 0.5 * a * h;
            m[(k, j)] = z;
            m[(j, k)] = z.conj();
        }
        m
    }

    /// Interaction-frame state reached at `duration`.
    pub fn final_state(&self, amplitudes: &[Complex64], duration: f64) -> Result<DVector<Complex64>> {
        let prop = EffectivePropagator::new(&self.generator(amplitudes))?;
        let mut c = prop.evolve(&self.initial, duration);
        for (a, g) in c.iter_mut().zip(&self.gamma) {
            *a *= Complex64::from_polar(1.0, -g * duration);
        }
        Ok(c)
    }

    pub fn infidelity(&self, amplitudes: &[Complex64], duration: f64) -> Result<f64> {
        Ok(infidelity_raw(&self.goal, &self.final_state(amplitudes, duration)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferConfig {
    /// Coefficients, tolerances, restarts and stopping target for each start.
    /// The per-coordinate scale is built from the fields below.
    pub simplex: SimplexConfig,
    /// Independent starting points.
    pub starts: usize,
    /// Evaluation budget shared by all starts.
    pub max_evaluations: usize,
    /// Upper bound on each drive magnitude; `None` uses the problem default.
    pub amplitude_cap: Option<f64>,
    /// Upper bound on the duration; `None` uses `4π N / (cap · min |coupling|)`.
    pub max_duration: Option<f64>,
    /// Initial simplex offsets in cap units, radians, and cap·time units.
    pub amplitude_scale: f64,
    pub phase_scale: f64,
    pub duration_scale: f64,
    pub seed: u64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            simplex: SimplexConfig {
                max_evaluations: 5_000,
                restarts: 3,
                xtol: 1e-10,
                ftol: 1e-16,
                target: 1e-12,
                ..SimplexConfig::default()
            },
            starts: 20,
            max_evaluations: 50_000,
            amplitude_cap: None,
            max_duration: None,
            amplitude_scale: 0.1,
            phase_scale: PI / 4.0,
            duration_scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactCheck {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub norm_drift: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSolution {
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub duration: f64,
    pub rwa_infidelity: f64,
    pub rwa_success: bool,
    pub exact_infidelity: Option<f64>,
    pub exact_success: Option<bool>,
    pub exact_check: Option<ExactCheck>,
    pub evaluations: usize,
    pub starts: usize,
    pub epsilon: f64,
    pub seed: u64,
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

struct Parameterization {
    fields: usize,
    cap: f64,
    max_duration: f64,
}

impl Parameterization {
    fn decode(&self, x: &[f64]) -> (Vec<Complex64>, f64) {
        let f = self.fields;
        let amps = (0..f)
            .map(|i| Complex64::from_polar(self.cap * fold(x[i]), x[f + i]))
            .collect();
        (amps, self.duration(x[2 * f]))
    }

    fn duration(&self, tau: f64) -> f64 {
        let span = self.cap * self.max_duration;
        self.max_duration * fold(tau / span)
    }

    fn encode(&self, amplitudes: &[f64], phases: &[f64], duration: f64) -> Vec<f64> {
        let mut x: Vec<f64> = amplitudes.iter().map(|a| a / self.cap).collect();
        x.extend_from_slice(phases);
        x.push(duration * self.cap);
        x
    }
}

/// Seed from the star closed form when the tree is a star on level 0, the
/// start is `|0⟩`, level 0 lies below every leaf and the detuning is common.
fn analytic_seed(problem: &TransferProblem, cap: f64, max_duration: f64) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let sys = &problem.system;
    let graph = build_graph(sys);
    if graph.star_center() != Some(0) && sys.dim() != 2 {
        return None;
    }
    if (problem.initial[0].norm() - 1.0).abs() > 1e-12 {
        return None;
    }
    let delta = problem.common_detuning().unwrap_or(0.0);
    let mut coupling = vec![Complex64::new(0.0, 0.0); problem.field_count()];
    let mut leaf_of = vec![0; problem.field_count()];
    for (f, &(k, j)) in problem.drives.assignment().iter().enumerate() {
        if j != 0 {
            return None;
        }
        coupling[f] = sys.coupling(k, j);
        leaf_of[f] = k;
    }
    // Undo the start's global phase so the goal is expressed relative to |0⟩.
    let phase = problem.initial[0].conj() / problem.initial[0].norm();
    let goal: Vec<Complex64> = problem.goal.iter().map(|g| g * phase).collect();
    let mut leaf_goal = vec![goal[0]];
    leaf_goal.extend(leaf_of.iter().map(|&k| goal[k]));
    let star = StarGoal::from_state(&leaf_goal).ok()?;
    let weakest = coupling.iter().map(|h| h.norm()).fold(f64::INFINITY, f64::min);
    let budget = vec![cap * weakest / (problem.field_count() as f64).sqrt(); problem.field_count()];
    let sol = star_solve(&star, &budget, delta).ok()?;
    // The closed form sees A_k h_k0; divide the coupling back out.
    let mut amplitudes = Vec::new();
    let mut phases = Vec::new();
    for ((a, p), h) in sol.amplitudes.iter().zip(&sol.phases).zip(&coupling) {
        let z = Complex64::from_polar(*a, *p) / h;
        amplitudes.push(z.norm());
        phases.push(z.arg());
    }
    if amplitudes.iter().any(|&a| a > cap) || sol.duration > max_duration {
        return None;
    }
    Some((amplitudes, phases, sol.duration))
}

/// Minimizes the RWA infidelity over magnitudes, phases and duration.
///
/// Magnitudes and duration are mirrored into `[0, cap]` and `[0, T_max]`, so the
/// simplex search itself is unconstrained.
pub fn optimize_transfer(problem: &TransferProblem, config: &TransferConfig) -> Result<TransferSolution> {
    let evaluator = RwaEvaluator::new(problem)?;
    let f = problem.field_count();
    let cap = config.amplitude_cap.unwrap_or_else(|| problem.default_amplitude_cap());
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidArgument(format!("amplitude cap must be positive, got {cap}")));
    }
    let weakest = problem
        .drives
        .assignment()
        .iter()
        .map(|&(k, j)| problem.system.coupling(k, j).norm())
        .fold(f64::INFINITY, f64::min);
    let max_duration = config
        .max_duration
        .unwrap_or(4.0 * PI * problem.system.dim() as f64 / (cap * weakest));
    let param = Parameterization {
        fields: f,
        cap,
        max_duration,
    };

    let mut simplex = config.simplex.clone();
    simplex.scale = std::iter::repeat(config.amplitude_scale)
        .take(f)
        .chain(std::iter::repeat(config.phase_scale).take(f))
        .chain(std::iter::once(config.duration_scale))
        .collect();

    let objective = |x: &[f64]| -> f64 {
        let (amps, t) = param.decode(x);
        evaluator.infidelity(&amps, t).unwrap_or(f64::NAN)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let seeded = analytic_seed(problem, cap, max_duration);
    let mut used = 0;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut starts = 0;
    for s in 0..config.starts.max(1) {
        let remaining = config.max_evaluations.saturating_sub(used);
        if remaining == 0 {
            break;
        }
        let x0 = match (&seeded, s) {
            (Some((a, p, t)), 0) => param.encode(a, p, *t),
            _ => {
                let mut x: Vec<f64> = (0..f).map(|_| rng.gen_range(0.2..1.0)).collect();
                x.extend((0..f).map(|_| rng.gen_range(0.0..TAU)));
                x.push(rng.gen_range(0.5..PI * problem.system.dim() as f64));
                x
            }
        };
        simplex.max_evaluations = remaining / (config.starts.max(1) - s);
        let r = nelder_mead(objective, &x0, &simplex)?;
        used += r.stats.evaluations;
        starts += 1;
        if best.as_ref().map_or(true, |(_, fb)| r.f < *fb) {
            best = Some((r.x, r.f));
        }
        if best.as_ref().is_some_and(|(_, fb)| *fb <= simplex.target) {
            break;
        }
    }
    let (x, value) = best.expect("at least one start runs");
    let (amps, duration) = param.decode(&x);
    Ok(TransferSolution {
        amplitudes: amps.iter().map(|a| a.norm()).collect(),
        phases: x[f..2 * f].iter().map(|p| p.rem_euclid(TAU)).collect(),
        duration,
        rwa_infidelity: value,
        rwa_success: value < problem.epsilon,
        exact_infidelity: None,
        exact_success: None,
        exact_check: None,
        evaluations: used,
        starts,
        epsilon: problem.epsilon,
        seed: config.seed,
    })
}

/// Closed-form solution for star problems centered on the start level, or
/// `None` when the problem is not of that shape or the goal lies out of reach
/// at magnitude `cap`.
pub fn analytic_transfer(problem: &TransferProblem, cap: Option<f64>) -> Result<Option<TransferSolution>> {
    let cap = cap.unwrap_or_else(|| problem.default_amplitude_cap());
    if !(cap > 0.0 && cap.is_finite()) {
        return Err(Error::InvalidArgument(format!("amplitude cap must be positive, got {cap}")));
    }
    let Some((amplitudes, phases, duration)) = analytic_seed(problem, cap, f64::INFINITY) else {
        return Ok(None);
    };
    let mut solution = TransferSolution {
        amplitudes,
        phases: phases.iter().map(|p| p.rem_euclid(TAU)).collect(),
        duration,
        rwa_infidelity: 1.0,
        rwa_success: false,
        exact_infidelity: None,
        exact_success: None,
        exact_check: None,
        evaluations: 0,
        starts: 0,
        epsilon: problem.epsilon,
        seed: 0,
    };
    solution.rwa_infidelity = rwa_infidelity(problem, &solution)?;
    solution.rwa_success = solution.rwa_infidelity < problem.epsilon;
    Ok(Some(solution))
}

/// RWA infidelity of an existing solution, recomputed from its parameters.
pub fn rwa_infidelity(problem: &TransferProblem, solution: &TransferSolution) -> Result<f64> {
    let evaluator = RwaEvaluator::new(problem)?;
    let amps: Vec<Complex64> = solution
        .amplitudes
        .iter()
        .zip(&solution.phases)
        .map(|(&a, &p)| Complex64::from_polar(a, p))
        .collect();
    evaluator.infidelity(&amps, solution.duration)
}

/// Re-simulates the solution under the full time-dependent Hamiltonian and
/// records the interaction-frame infidelity at `T`.
pub fn double_check(problem: &TransferProblem, solution: &TransferSolution, options: &ExactOptions<'_>) -> Result<TransferSolution> {
    if solution.amplitudes.len() != problem.field_count() || solution.phases.len() != problem.field_count() {
        return Err(Error::DimensionMismatch(problem.field_count(), solution.amplitudes.len()));
    }
    let drives = problem.drives_with(&solution.amplitudes, &solution.phases);
    let psi0 = StateVector::new(problem.initial.clone(), Frame::Lab, 0.0);
    let result = propagate_exact(&problem.system, &drives, &psi0, solution.duration, options)?;
    let c = frame_transform(&result.state, Frame::Interaction, &problem.system, &[])?;
    let exact = infidelity_raw(&problem.goal, &c.amplitudes);
    let mut out = solution.clone();
    out.exact_infidelity = Some(exact);
    out.exact_success = Some(exact < problem.epsilon);
    out.exact_check = Some(ExactCheck {
        accepted_steps: result.stats.accepted_steps,
        rejected_steps: result.stats.rejected_steps,
        norm_drift: result.norm_drift,
        tol: options.tol,
    });
    Ok(out)
}

/// Fields on every coupled edge at exact resonance shifted by `detuning`.
pub fn detuned_drives(system: &LevelSystem, detuning: f64) -> Result<DriveSet> {
    let edges = system.coupled_edges();
    let fields = edges
        .iter()
        .map(|&(k, j)| Drive::new(Complex64::new(0.0, 0.0), system.transition(k, j) - detuning))
        .collect();
    DriveSet::new(system, fields, edges)
}
