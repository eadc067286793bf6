//! JSON file formats for systems, drives, goals and solutions.

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    assign_gamma, build_graph, check_nondegenerate, Coupling, DegeneracyReport, DegeneracyScope, GammaAssignment,
    LevelSystem, DEFAULT_GAP_TOL,
};
use crate::optimize::{detuned_drives, TransferProblem, TransferSolution, DEFAULT_EPSILON};
use crate::rwa::{check_validity, default_window, Drive, DriveSet, RwaValidityReport, DEFAULT_VALIDITY_BOUND};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ComplexValue> for Complex64 {
    fn from(z: ComplexValue) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingFile {
    pub k: usize,
    pub j: usize,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSetFile {
    pub fields: Vec<FieldFile>,
    /// `[field, k, j]` triples; omitted means assignment by resonance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Vec<[usize; 3]>>,
}

/// A level system, optionally with its drive fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub energies: Vec<f64>,
    pub couplings: Vec<CouplingFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drives: Option<DriveSetFile>,
}

impl SystemFile {
    pub fn from_system(system: &LevelSystem, drives: Option<&DriveSet>) -> Self {
        Self {
            energies: system.energies().to_vec(),
            couplings: system
                .couplings()
                .iter()
                .map(|c| CouplingFile {
                    k: c.k,
                    j: c.j,
                    re: c.value.re,
                    im: c.value.im,
                })
                .collect(),
            drives: drives.map(DriveSetFile::from_drives),
        }
    }

    pub fn system(&self) -> Result<LevelSystem> {
        let couplings = self
            .couplings
            .iter()
            .map(|c| Coupling::new(c.k, c.j, Complex64::new(c.re, c.im)))
            .collect();
        LevelSystem::new(self.energies.clone(), couplings)
    }
}

impl DriveSetFile {
    pub fn from_drives(drives: &DriveSet) -> Self {
        Self {
            fields: drives
                .fields()
                .iter()
                .map(|d| FieldFile {
                    re: d.amplitude.re,
                    im: d.amplitude.im,
                    omega: d.omega,
                })
                .collect(),
            assignment: Some(
                drives
                    .assignment()
                    .iter()
                    .enumerate()
                    .map(|(f, &(k, j))| [f, k, j])
                    .collect(),
            ),
        }
    }

    pub fn drives(&self, system: &LevelSystem) -> Result<DriveSet> {
        let fields: Vec<Drive> = self
            .fields
            .iter()
            .map(|f| Drive::new(Complex64::new(f.re, f.im), f.omega))
            .collect();
        match &self.assignment {
            None => DriveSet::auto(system, fields, default_window(system)),
            Some(triples) => {
                let mut edges = vec![None; fields.len()];
                for &[f, k, j] in triples {
                    let slot = edges
                        .get_mut(f)
                        .ok_or_else(|| Error::InvalidArgument(format!("assignment names unknown field {f}")))?;
                    if slot.replace((k, j)).is_some() {
                        return Err(Error::InvalidArgument(format!("field {f} assigned twice")));
                    }
                }
                let edges = edges
                    .into_iter()
                    .enumerate()
                    .map(|(f, e)| e.ok_or_else(|| Error::InvalidArgument(format!("field {f} has no assignment"))))
                    .collect::<Result<Vec<_>>>()?;
                DriveSet::new(system, fields, edges)
            }
        }
    }
}

/// Transfer target in the interaction frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalFile {
    pub goal: Vec<ComplexValue>,
    /// Defaults to the lowest level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<ComplexValue>>,
    /// Common detuning used to build drives when the system file has none.
    #[serde(default)]
    pub detuning: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

fn to_vector(values: &[ComplexValue]) -> DVector<Complex64> {
    DVector::from_iterator(values.len(), values.iter().map(|&z| z.into()))
}

fn from_vector(v: &DVector<Complex64>) -> Vec<ComplexValue> {
    v.iter().map(|&z| z.into()).collect()
}

/// Assembles a transfer problem; `epsilon` overrides the goal file.
pub fn load_problem(system: &SystemFile, goal: &GoalFile, epsilon: Option<f64>) -> Result<TransferProblem> {
    let sys = system.system()?;
    let drives = match &system.drives {
        Some(d) => d.drives(&sys)?,
        None => detuned_drives(&sys, goal.detuning)?,
    };
    let initial = match &goal.initial {
        Some(v) => to_vector(v),
        None => {
            let mut v = DVector::zeros(sys.dim());
            v[0] = Complex64::new(1.0, 0.0);
            v
        }
    };
    let eps = epsilon.or(goal.epsilon).unwrap_or(DEFAULT_EPSILON);
    TransferProblem::new(sys, drives, initial, to_vector(&goal.goal), eps)
}

/// A solution together with the problem it solves, so it can be re-checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub system: SystemFile,
    pub initial: Vec<ComplexValue>,
    pub goal: Vec<ComplexValue>,
    /// `analytic` or `optimized`.
    pub method: String,
    pub solution: TransferSolution,
}

impl SolutionFile {
    pub fn new(problem: &TransferProblem, solution: &TransferSolution, method: &str) -> Self {
        Self {
            system: SystemFile::from_system(&problem.system, Some(&problem.drives)),
            initial: from_vector(&problem.initial),
            goal: from_vector(&problem.goal),
            method: method.to_string(),
            solution: solution.clone(),
        }
    }

    pub fn problem(&self) -> Result<TransferProblem> {
        let sys = self.system.system()?;
        let drives = match &self.system.drives {
            Some(d) => d.drives(&sys)?,
            None => return Err(Error::InvalidArgument("solution file carries no drive frequencies".into())),
        };
        TransferProblem::new(
            sys,
            drives,
            to_vector(&self.initial),
            to_vector(&self.goal),
            self.solution.epsilon,
        )
    }
}

/// Structural and RWA checks on a system and its (optional) drives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemReport {
    pub levels: usize,
    pub edges: Vec<(usize, usize)>,
    pub connected: bool,
    pub acyclic: bool,
    pub star_center: Option<usize>,
    pub components: Vec<Vec<usize>>,
    pub spectrum: DegeneracyReport,
    pub assignment: Option<Vec<(usize, usize)>>,
    pub gamma: Option<GammaAssignment>,
    pub validity: Option<RwaValidityReport>,
    /// First construction error, if any stage failed.
    pub error: Option<String>,
}

pub fn analyze(file: &SystemFile) -> Result<SystemReport> {
    let system = file.system()?;
    let graph = build_graph(&system);
    let mut report = SystemReport {
        levels: system.dim(),
        edges: system.coupled_edges(),
        connected: graph.connected,
        acyclic: graph.acyclic,
        star_center: graph.star_center(),
        components: graph.components(),
        spectrum: check_nondegenerate(&system, DEFAULT_GAP_TOL, DegeneracyScope::Coupled),
        assignment: None,
        gamma: None,
        validity: None,
        error: None,
    };
    let drives = match &file.drives {
        Some(d) => match d.drives(&system) {
            Ok(d) => Some(d),
            Err(e) => {
                report.error = Some(e.to_string());
                None
            }
        },
        None => None,
    };
    if let Some(drives) = &drives {
        report.assignment = Some(drives.assignment().to_vec());
        report.validity = Some(check_validity(&system, drives, DEFAULT_VALIDITY_BOUND));
    }
    let detunings = match &drives {
        Some(d) => d.detunings(&system),
        None => crate::graph::Detunings::zero_on(&graph),
    };
    match assign_gamma(&graph, &detunings, 0.0) {
        Ok(g) => report.gamma = Some(g),
        Err(e) => {
            report.error.get_or_insert(e.to_string());
        }
    }
    Ok(report)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}
