//! State propagation under the effective RWA generator and under the full
//! time-dependent Hamiltonian, plus frame changes and figures of merit.
//!
//! Three frames are used for the same physical state:
//! - lab: `ψ_k(t)`
//! - interaction: `c_k = e^{i E_k t} ψ_k`
//! - rotating: `b_k = e^{i γ_k t} c_k`
//!
//! Goal states are always interpreted as interaction-frame targets.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::AtomicBool;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::LevelSystem;
use crate::integrator::{integrate, IntegratorStats, StepControl};
use crate::rwa::{hermitian_deviation, DriveSet, EffectiveGenerator, HERMITIAN_TOL};

/// Default local-error tolerance for exact propagation.
pub const DEFAULT_EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Lab,
    Interaction,
    Rotating,
}

impl Frame {
    pub fn name(self) -> &'static str {
        match self {
            Frame::Lab => "lab",
            Frame::Interaction => "interaction",
            Frame::Rotating => "rotating",
        }
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: DVector<Complex64>,
    pub frame: Frame,
    /// Time stamp in inverse energy units.
    pub time: f64,
}

impl StateVector {
    pub fn new(amplitudes: DVector<Complex64>, frame: Frame, time: f64) -> Self {
        Self {
            amplitudes,
            frame,
            time,
        }
    }

    pub fn from_slice(amplitudes: &[Complex64], frame: Frame, time: f64) -> Self {
        Self::new(DVector::from_column_slice(amplitudes), frame, time)
    }

    /// `|level⟩` at time zero.
    pub fn basis(dim: usize, level: usize, frame: Frame) -> Self {
        let mut v = DVector::zeros(dim);
        v[level] = Complex64::new(1.0, 0.0);
        Self::new(v, frame, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.amplitudes /= Complex64::new(n, 0.0);
        }
        self
    }

    fn require_frame(&self, frame: Frame) -> Result<()> {
        if self.frame != frame {
            return Err(Error::FrameMismatch {
                expected: frame.name(),
                found: self.frame.name(),
            });
        }
        Ok(())
    }
}

fn phase_rotate(v: &DVector<Complex64>, rates: &[f64], t: f64, sign: f64) -> DVector<Complex64> {
    DVector::from_iterator(
        v.len(),
        v.iter()
            .zip(rates)
            .map(|(a, &r)| a * Complex64::from_polar(1.0, sign * r * t)),
    )
}

/// Re-expresses `state` in `target` at the same time stamp.
///
/// `gamma` is only consulted when the rotating frame is involved.
pub fn frame_transform(state: &StateVector, target: Frame, system: &LevelSystem, gamma: &[f64]) -> Result<StateVector> {
    let n = state.dim();
    if system.dim() != n {
        return Err(Error::DimensionMismatch(system.dim(), n));
    }
    let uses_gamma = state.frame == Frame::Rotating || target == Frame::Rotating;
    if uses_gamma && gamma.len() != n {
        return Err(Error::DimensionMismatch(gamma.len(), n));
    }
    let t = state.time;
    let rank = |f: Frame| match f {
        Frame::Lab => 0,
        Frame::Interaction => 1,
        Frame::Rotating => 2,
    };
    let mut v = state.amplitudes.clone();
    let (from, to) = (rank(state.frame), rank(target));
    if from < to {
        if from == 0 {
            v = phase_rotate(&v, system.energies(), t, 1.0);
        }
        if to == 2 {
            v = phase_rotate(&v, gamma, t, 1.0);
        }
    } else if from > to {
        if from == 2 {
            v = phase_rotate(&v, gamma, t, -1.0);
        }
        if to == 0 {
            v = phase_rotate(&v, system.energies(), t, -1.0);
        }
    }
    Ok(StateVector::new(v, target, t))
}

/// `1 - |⟨goal|reached⟩|²`, clamped to `[0, 1]`.
pub fn infidelity(goal: &StateVector, reached: &StateVector) -> Result<f64> {
    reached.require_frame(goal.frame)?;
    if goal.dim() != reached.dim() {
        return Err(Error::DimensionMismatch(goal.dim(), reached.dim()));
    }
    Ok(infidelity_raw(&goal.amplitudes, &reached.amplitudes))
}

pub(crate) fn infidelity_raw(goal: &DVector<Complex64>, reached: &DVector<Complex64>) -> f64 {
    let overlap = goal.dotc(reached);
    (1.0 - overlap.norm_sqr()).clamp(0.0, 1.0)
}

/// Euclidean norm of the amplitude difference; not phase invariant.
pub fn hilbert_distance(goal: &StateVector, start: &StateVector) -> Result<f64> {
    start.require_frame(goal.frame)?;
    if goal.dim() != start.dim() {
        return Err(Error::DimensionMismatch(goal.dim(), start.dim()));
    }
    Ok((&goal.amplitudes - &start.amplitudes).norm())
}

/// Spectral decomposition of a Hermitian generator, reusable for many durations.
#[derive(Debug, Clone)]
pub struct EffectivePropagator {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl EffectivePropagator {
    pub fn new(matrix: &DMatrix<Complex64>) -> Result<Self> {
        let deviation = hermitian_deviation(matrix);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NonHermitianGenerator { deviation });
        }
        let eig = SymmetricEigen::new(matrix.clone());
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `exp(-i G t) v`.
    pub fn evolve(&self, v: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
        let mut coeffs = self.eigenvectors.ad_mul(v);
        for (c, &l) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= Complex64::from_polar(1.0, -l * t);
        }
        &self.eigenvectors * coeffs
    }

    /// The full unitary `exp(-i G t)`.
    pub fn unitary(&self, t: f64) -> DMatrix<Complex64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &l) in scaled.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= Complex64::from_polar(1.0, -l * t);
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// `b(t0 + T) = exp(-i (M⁽ᴵᴵ⁾ - diag γ) T) b(t0)`.
pub fn propagate_effective(generator: &EffectiveGenerator, b0: &StateVector, duration: f64) -> Result<StateVector> {
    b0.require_frame(Frame::Rotating)?;
    if b0.dim() != generator.dim() {
        return Err(Error::DimensionMismatch(generator.dim(), b0.dim()));
    }
    let prop = EffectivePropagator::new(&generator.matrix)?;
    Ok(StateVector::new(
        prop.evolve(&b0.amplitudes, duration),
        Frame::Rotating,
        b0.time + duration,
    ))
}

/// One coupling `coefficient · e^{i frequency t} |row⟩⟨col|` plus its Hermitian conjugate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicTerm {
    pub row: usize,
    pub col: usize,
    pub coefficient: Complex64,
    pub frequency: f64,
}

/// Hamiltonian made of a static real diagonal and harmonically oscillating couplings.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HarmonicHamiltonian {
    pub diagonal: Vec<f64>,
    pub terms: Vec<HarmonicTerm>,
}

impl HarmonicHamiltonian {
    pub fn new(dim: usize) -> Self {
        Self {
            diagonal: vec![0.0; dim],
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn push(&mut self, row: usize, col: usize, coefficient: Complex64, frequency: f64) {
        assert!(row != col && row < self.dim() && col < self.dim());
        self.terms.push(HarmonicTerm {
            row,
            col,
            coefficient,
            frequency,
        });
    }

    /// The full drive Hamiltonian written in the interaction frame:
    /// every field acts on every coupled edge, co- and counter-rotating parts included.
    pub fn from_drives(system: &LevelSystem, drives: &DriveSet) -> Self {
        let mut h = Self::new(system.dim());
        for (k, j) in system.coupled_edges() {
            let coupling = system.coupling(k, j);
            let e_kj = system.transition(k, j);
            for d in drives.fields() {
                h.push(k, j, 0.5 * d.amplitude * coupling, e_kj - d.omega);
                h.push(k, j, 0.5 * d.amplitude.conj() * coupling, e_kj + d.omega);
            }
        }
        h
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().map(|t| t.frequency.abs()).fold(0.0, f64::max)
    }

    /// Matrix at time `t`.
    pub fn matrix(&self, t: f64) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::from_diagonal(&DVector::from_iterator(
            n,
            self.diagonal.iter().map(|&d| Complex64::new(d, 0.0)),
        ));
        for term in &self.terms {
            let z = term.coefficient * Complex64::from_polar(1.0, term.frequency * t);
            m[(term.row, term.col)] += z;
            m[(term.col, term.row)] += z.conj();
        }
        m
    }

    /// `dy = -i H(t) y`.
    pub fn apply(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        for ((d, &e), &a) in dy.iter_mut().zip(&self.diagonal).zip(y) {
            *d = a * e;
        }
        for term in &self.terms {
            let (s, c) = (term.frequency * t).sin_cos();
            let z = term.coefficient * Complex64::new(c, s);
            dy[term.row] += z * y[term.col];
            dy[term.col] += z.conj() * y[term.row];
        }
        for d in dy.iter_mut() {
            *d = Complex64::new(d.im, -d.re);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExactOptions<'a> {
    pub tol: f64,
    pub stop: Option<&'a AtomicBool>,
    /// When set, every accepted step is appended to this CSV file (lab frame).
    pub trajectory: Option<&'a Path>,
}

impl Default for ExactOptions<'_> {
    fn default() -> Self {
        Self {
            tol: DEFAULT_EXACT_TOL,
            stop: None,
            trajectory: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub state: StateVector,
    pub duration: f64,
    pub stats: IntegratorStats,
    /// `| ‖ψ(T)‖ - ‖ψ(0)‖ |`; no renormalization is applied.
    pub norm_drift: f64,
}

/// Integrates the interaction-frame equation `i ċ = H(t) c` for a harmonic Hamiltonian.
pub fn propagate_harmonic(
    hamiltonian: &HarmonicHamiltonian,
    c0: &DVector<Complex64>,
    t0: f64,
    duration: f64,
    options: &ExactOptions<'_>,
    mut observer: impl FnMut(f64, &[Complex64]),
) -> Result<(DVector<Complex64>, IntegratorStats)> {
    if !(options.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", options.tol)));
    }
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!("duration must be non-negative, got {duration}")));
    }
    let mut y: Vec<Complex64> = c0.iter().copied().collect();
    let nu = hamiltonian.max_frequency();
    let diag = hamiltonian.diagonal.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let fastest = nu.max(diag);
    let max_step = if fastest > 0.0 { 1.0 / fastest } else { f64::INFINITY }.min(duration.max(f64::MIN_POSITIVE));
    let control = StepControl {
        tol: options.tol,
        max_step,
        first_step: (0.01 * max_step).min(duration.max(f64::MIN_POSITIVE)),
    };
    let stats = integrate(
        |t, y, dy| hamiltonian.apply(t, y, dy),
        &mut y,
        t0,
        t0 + duration,
        control,
        options.stop,
        &mut observer,
    )?;
    Ok((DVector::from_vec(y), stats))
}

/// Exact evolution under `H_D + Σ_f Re(A_f e^{-iω_f t}) H_C` from a lab-frame state.
///
/// The drift is removed analytically by integrating in the interaction frame,
/// which is an exact rewriting of the same equation.
pub fn propagate_exact(
    system: &LevelSystem,
    drives: &DriveSet,
    psi0: &StateVector,
    duration: f64,
    options: &ExactOptions<'_>,
) -> Result<PropagationResult> {
    psi0.require_frame(Frame::Lab)?;
    if psi0.dim() != system.dim() {
        return Err(Error::DimensionMismatch(system.dim(), psi0.dim()));
    }
    let hamiltonian = HarmonicHamiltonian::from_drives(system, drives);
    let c0 = frame_transform(psi0, Frame::Interaction, system, &[])?;
    let energies = system.energies();

    let mut writer = match options.trajectory {
        Some(path) => {
            let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
            write!(w, "t")?;
            for k in 0..system.dim() {
                write!(w, ",re{k},im{k}")?;
            }
            writeln!(w)?;
            Some(w)
        }
        None => None,
    };
    let mut io_error = None;
    let (c, stats) = propagate_harmonic(&hamiltonian, &c0.amplitudes, psi0.time, duration, options, |t, c| {
        if let Some(w) = writer.as_mut() {
            let mut line = format!("{t}");
            for (a, &e) in c.iter().zip(energies) {
                let psi = a * Complex64::from_polar(1.0, -e * t);
                line.push_str(&format!(",{},{}", psi.re, psi.im));
            }
            if let Err(e) = writeln!(w, "{line}") {
                io_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    if let Some(mut w) = writer {
        w.flush()?;
    }
    let state = StateVector::new(c, Frame::Interaction, psi0.time + duration);
    let state = frame_transform(&state, Frame::Lab, system, &[])?;
    let norm_drift = (state.norm() - psi0.norm()).abs();
    Ok(PropagationResult {
        state,
        duration,
        stats,
        norm_drift,
    })
}

/// `exp(-i H t)` applied by direct eigendecomposition of a Hermitian matrix.
pub fn evolve_hermitian(matrix: &DMatrix<Complex64>, v: &DVector<Complex64>, t: f64) -> Result<DVector<Complex64>> {
    Ok(EffectivePropagator::new(matrix)?.evolve(v, t))
}
