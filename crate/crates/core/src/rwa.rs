//! Multilevel rotating wave approximation.
//!
//! Each drive field is matched to the single coupled transition it is nearly
//! resonant with. Keeping only that resonant term per matrix element gives
//! `M⁽ᴵᴵ⁾`, and subtracting `diag(γ)` yields the time-independent generator of
//! the rotating-frame coefficients `b_k = e^{iγ_k t} c_k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{assign_gamma, build_graph, Detunings, GammaAssignment, LevelGraph, LevelSystem};

/// Default upper bound on the `Δ/ω` and `|A|/ω` ratios.
pub const DEFAULT_VALIDITY_BOUND: f64 = 1e-2;

/// Relative tolerance used for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-14;

/// A monochromatic drive `Re(A e^{-iωt})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    pub amplitude: Complex64,
    pub omega: f64,
}

impl Drive {
    pub fn new(amplitude: Complex64, omega: f64) -> Self {
        Self { amplitude, omega }
    }

    pub fn polar(magnitude: f64, phase: f64, omega: f64) -> Self {
        Self::new(Complex64::from_polar(magnitude, phase), omega)
    }
}

/// Drive fields together with the transition each one is resonant with.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSet {
    fields: Vec<Drive>,
    /// `assignment[f]` is the `(upper, lower)` edge driven by field `f`.
    assignment: Vec<(usize, usize)>,
}

impl DriveSet {
    /// Builds a drive set from an explicit field-to-edge assignment.
    /// Edge orientation in `assignment` is normalized to `(upper, lower)`.
    pub fn new(system: &LevelSystem, fields: Vec<Drive>, assignment: Vec<(usize, usize)>) -> Result<Self> {
        if fields.len() != assignment.len() {
            return Err(Error::InvalidArgument(format!(
                "{} fields but {} assignments",
                fields.len(),
                assignment.len()
            )));
        }
        let graph = build_graph(system);
        let mut normalized = Vec::with_capacity(assignment.len());
        for (f, (&(a, b), drive)) in assignment.iter().zip(&fields).enumerate() {
            validate_drive(f, drive)?;
            if a >= system.dim() || b >= system.dim() || !graph.has_edge(a, b) {
                return Err(Error::InvalidArgument(format!(
                    "field {f} assigned to uncoupled pair ({a},{b})"
                )));
            }
            let edge = system.orient(a, b);
            if let Some(first) = normalized.iter().position(|&e| e == edge) {
                return Err(Error::DuplicateDrive {
                    k: edge.0,
                    j: edge.1,
                    first,
                    second: f,
                });
            }
            normalized.push(edge);
        }
        Ok(Self {
            fields,
            assignment: normalized,
        })
    }

    /// Builds a drive set by matching each field to its resonant transition.
    pub fn auto(system: &LevelSystem, fields: Vec<Drive>, window: f64) -> Result<Self> {
        let omegas: Vec<f64> = fields.iter().map(|d| d.omega).collect();
        let assignment = assign_fields(system, &omegas, window)?;
        Self::new(system, fields, assignment)
    }

    pub fn fields(&self) -> &[Drive] {
        &self.fields
    }

    pub fn assignment(&self) -> &[(usize, usize)] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Field index driving the given pair, if any.
    pub fn field_for(&self, a: usize, b: usize) -> Option<usize> {
        self.assignment
            .iter()
            .position(|&(k, j)| (k == a && j == b) || (k == b && j == a))
    }

    /// Replaces the complex amplitudes, keeping frequencies and assignment.
    pub fn with_amplitudes(&self, amplitudes: &[Complex64]) -> Self {
        assert_eq!(amplitudes.len(), self.fields.len());
        let fields = self
            .fields
            .iter()
            .zip(amplitudes)
            .map(|(d, &a)| Drive::new(a, d.omega))
            .collect();
        Self {
            fields,
            assignment: self.assignment.clone(),
        }
    }

    /// Signed detunings `Δ_kj = E_k - E_j - ω_f` on each driven edge, with `E_k > E_j`.
    pub fn detunings(&self, system: &LevelSystem) -> Detunings {
        let mut d = Detunings::new();
        for (drive, &(k, j)) in self.fields.iter().zip(&self.assignment) {
            d.set(k, j, system.transition(k, j) - drive.omega);
        }
        d
    }
}

fn validate_drive(f: usize, drive: &Drive) -> Result<()> {
    if !(drive.omega.is_finite() && drive.omega > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "field {f} has non-positive frequency {}",
            drive.omega
        )));
    }
    if !(drive.amplitude.re.is_finite() && drive.amplitude.im.is_finite()) {
        return Err(Error::InvalidArgument(format!("field {f} has a non-finite amplitude")));
    }
    Ok(())
}

/// One tenth of the smallest separation among coupled transition frequencies
/// (and of the smallest coupled transition frequency itself).
pub fn default_window(system: &LevelSystem) -> f64 {
    let freqs: Vec<f64> = system
        .coupled_edges()
        .iter()
        .map(|&(k, j)| system.transition(k, j).abs())
        .collect();
    let mut gap = freqs.iter().copied().fold(f64::INFINITY, f64::min);
    for (i, a) in freqs.iter().enumerate() {
        for b in &freqs[i + 1..] {
            gap = gap.min((a - b).abs());
        }
    }
    0.1 * gap
}

/// Matches each frequency to the unique coupled transition within `window`.
pub fn assign_fields(system: &LevelSystem, frequencies: &[f64], window: f64) -> Result<Vec<(usize, usize)>> {
    if !(window > 0.0) {
        return Err(Error::InvalidArgument(format!("resonance window must be positive, got {window}")));
    }
    let edges = system.coupled_edges();
    let mut assignment: Vec<(usize, usize)> = Vec::with_capacity(frequencies.len());
    for (f, &omega) in frequencies.iter().enumerate() {
        let hits: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(k, j)| (system.transition(k, j) - omega).abs() < window)
            .collect();
        let edge = match hits.as_slice() {
            [] => return Err(Error::NoResonantTransition { field: f, omega }),
            [e] => *e,
            _ => {
                return Err(Error::AmbiguousResonance {
                    field: f,
                    omega,
                    count: hits.len(),
                })
            }
        };
        if let Some(first) = assignment.iter().position(|&e| e == edge) {
            return Err(Error::DuplicateDrive {
                k: edge.0,
                j: edge.1,
                first,
                second: f,
            });
        }
        assignment.push(edge);
    }
    Ok(assignment)
}

/// What to do with a coupled transition that no field drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UndrivenEdges {
    #[default]
    Error,
    /// Leave the matrix element at zero (lasers switched off).
    Zero,
}

/// `M⁽ᴵᴵ⁾_{kj} = A_f (H_C)_{kj} / 2` for `E_k > E_j`, and `A_f* (H_C)_{kj} / 2`
/// for `E_k < E_j`, where `f` drives the edge.
pub fn build_m2(system: &LevelSystem, drives: &DriveSet, undriven: UndrivenEdges) -> Result<DMatrix<Complex64>> {
    let n = system.dim();
    let mut m = DMatrix::zeros(n, n);
    for (upper, lower) in system.coupled_edges() {
        let Some(f) = drives.field_for(upper, lower) else {
            match undriven {
                UndrivenEdges::Error => return Err(Error::UnassignedEdge { k: upper, j: lower }),
                UndrivenEdges::Zero => continue,
            }
        };
        let a = drives.fields()[f].amplitude;
        m[(upper, lower)] = 0.5 * a * system.coupling(upper, lower);
        m[(lower, upper)] = 0.5 * a.conj() * system.coupling(lower, upper);
    }
    Ok(m)
}

/// Largest `|M_kj - conj(M_jk)|`, relative to the largest entry magnitude.
pub fn hermitian_deviation(m: &DMatrix<Complex64>) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev / scale
}

/// Time-independent generator `M⁽ᴵᴵ⁾ - diag(γ)` of the rotating-frame coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGenerator {
    pub matrix: DMatrix<Complex64>,
    pub gamma: GammaAssignment,
}

impl EffectiveGenerator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

pub fn build_effective_generator(m2: &DMatrix<Complex64>, gamma: &GammaAssignment) -> Result<EffectiveGenerator> {
    if let Some(worst) = gamma
        .residuals
        .iter()
        .max_by(|a, b| {
            let ra = a.value.abs() / a.detuning.abs().max(1.0);
            let rb = b.value.abs() / b.detuning.abs().max(1.0);
            ra.total_cmp(&rb)
        })
        .filter(|_| !gamma.residuals_vanish())
    {
        return Err(Error::NonvanishingResiduals {
            k: worst.k,
            j: worst.j,
            max_residual: worst.value.abs(),
        });
    }
    if m2.nrows() != gamma.gamma.len() {
        return Err(Error::DimensionMismatch(m2.nrows(), gamma.gamma.len()));
    }
    let deviation = hermitian_deviation(m2);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NonHermitianGenerator { deviation });
    }
    let mut matrix = m2.clone();
    for (k, g) in gamma.gamma.iter().enumerate() {
        matrix[(k, k)] -= Complex64::new(*g, 0.0);
    }
    Ok(EffectiveGenerator {
        matrix,
        gamma: gamma.clone(),
    })
}

/// Everything needed to evolve a tree-shaped drive problem in the RWA.
#[derive(Debug, Clone)]
pub struct RwaModel {
    pub graph: LevelGraph,
    pub detunings: Detunings,
    pub m2: DMatrix<Complex64>,
    pub generator: EffectiveGenerator,
}

impl RwaModel {
    pub fn build(system: &LevelSystem, drives: &DriveSet) -> Result<Self> {
        let graph = build_graph(system);
        let detunings = drives.detunings(system);
        let gamma = assign_gamma(&graph, &detunings, 0.0)?;
        let m2 = build_m2(system, drives, UndrivenEdges::Error)?;
        let generator = build_effective_generator(&m2, &gamma)?;
        Ok(Self {
            graph,
            detunings,
            m2,
            generator,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRatios {
    pub field: usize,
    pub edge: (usize, usize),
    /// `|Δ| / ω`.
    pub detuning_ratio: f64,
    /// `|A| / ω`.
    pub amplitude_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RwaValidityReport {
    pub fields: Vec<FieldRatios>,
    pub worst_detuning_ratio: f64,
    pub worst_amplitude_ratio: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn check_validity(system: &LevelSystem, drives: &DriveSet, bound: f64) -> RwaValidityReport {
    let fields: Vec<FieldRatios> = drives
        .fields()
        .iter()
        .zip(drives.assignment())
        .enumerate()
        .map(|(f, (d, &(k, j)))| FieldRatios {
            field: f,
            edge: (k, j),
            detuning_ratio: (system.transition(k, j) - d.omega).abs() / d.omega,
            amplitude_ratio: d.amplitude.norm() / d.omega,
        })
        .collect();
    let worst_detuning_ratio = fields.iter().map(|r| r.detuning_ratio).fold(0.0, f64::max);
    let worst_amplitude_ratio = fields.iter().map(|r| r.amplitude_ratio).fold(0.0, f64::max);
    let pass = worst_detuning_ratio < bound && worst_amplitude_ratio < bound;
    RwaValidityReport {
        fields,
        worst_detuning_ratio,
        worst_amplitude_ratio,
        bound,
        pass,
    }
}
