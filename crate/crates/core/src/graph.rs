//! Level schemes as undirected graphs and the pruning algorithm that picks the
//! per-level frame weights `gamma` making the RWA Hamiltonian time-independent.
//!
//! Detunings are stored as an antisymmetric edge labeling: for an edge driven
//! by a field of frequency `omega`, the signed value `E_k - E_j - omega` is
//! attached to the orientation with `E_k > E_j`, and `Δ_jk = -Δ_kj`.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for transition-frequency degeneracy checks.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// Relative tolerance on edge residuals `γ_k - γ_j + Δ_kj`.
pub const RESIDUAL_TOL: f64 = 1e-12;

/// One off-diagonal element `(H_C)_{kj}` of the control Hamiltonian.
/// The mirrored element `(H_C)_{jk}` is its complex conjugate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub k: usize,
    pub j: usize,
    pub value: Complex64,
}

impl Coupling {
    pub fn new(k: usize, j: usize, value: Complex64) -> Self {
        Self { k, j, value }
    }

    pub fn real(k: usize, j: usize, value: f64) -> Self {
        Self::new(k, j, Complex64::new(value, 0.0))
    }
}

/// Drift spectrum plus the zero-diagonal Hermitian control coupling pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSystem {
    energies: Vec<f64>,
    couplings: Vec<Coupling>,
}

impl LevelSystem {
    pub fn new(energies: Vec<f64>, couplings: Vec<Coupling>) -> Result<Self> {
        let n = energies.len();
        if n < 2 {
            return Err(Error::InvalidSystem(format!("need at least 2 levels, got {n}")));
        }
        if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::InvalidSystem(format!("non-finite energy {e}")));
        }
        let mut seen = BTreeMap::new();
        for (idx, c) in couplings.iter().enumerate() {
            if c.k == c.j {
                return Err(Error::InvalidSystem(format!("self-coupling on level {}", c.k)));
            }
            if c.k >= n || c.j >= n {
                return Err(Error::InvalidSystem(format!(
                    "coupling ({},{}) out of range for {n} levels",
                    c.k, c.j
                )));
            }
            if !(c.value.re.is_finite() && c.value.im.is_finite()) {
                return Err(Error::InvalidSystem(format!("non-finite coupling ({},{})", c.k, c.j)));
            }
            if seen.insert(edge_key(c.k, c.j), idx).is_some() {
                return Err(Error::InvalidSystem(format!("duplicate coupling ({},{})", c.k, c.j)));
            }
        }
        Ok(Self { energies, couplings })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    /// `E_k - E_j`.
    pub fn transition(&self, k: usize, j: usize) -> f64 {
        self.energies[k] - self.energies[j]
    }

    /// `(H_C)_{kj}`, zero when the pair is not coupled.
    pub fn coupling(&self, k: usize, j: usize) -> Complex64 {
        for c in &self.couplings {
            if c.k == k && c.j == j {
                return c.value;
            }
            if c.k == j && c.j == k {
                return c.value.conj();
            }
        }
        Complex64::new(0.0, 0.0)
    }

    /// Coupled transitions with nonzero strength, oriented `(upper, lower)` by energy
    /// (ties broken by index) and sorted.
    pub fn coupled_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self
            .couplings
            .iter()
            .filter(|c| c.value.norm() > 0.0)
            .map(|c| self.orient(c.k, c.j))
            .collect();
        edges.sort_unstable();
        edges
    }

    /// Orders a pair as `(upper, lower)`.
    pub fn orient(&self, a: usize, b: usize) -> (usize, usize) {
        let (ea, eb) = (self.energies[a], self.energies[b]);
        if ea > eb || (ea == eb && a > b) {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn control_matrix(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for c in &self.couplings {
            m[(c.k, c.j)] = c.value;
            m[(c.j, c.k)] = c.value.conj();
        }
        m
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Undirected graph with one vertex per level and one edge per nonzero coupling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelGraph {
    n: usize,
    /// Edges as `(min, max)` index pairs, sorted.
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
    pub connected: bool,
    pub acyclic: bool,
}

impl LevelGraph {
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<_> = edges.into_iter().map(|(a, b)| edge_key(a, b)).collect();
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        let components = count_components(&adjacency);
        let connected = components == 1;
        // A forest has exactly n - c edges.
        let acyclic = edges.len() + components == n;
        Self {
            n,
            edges,
            adjacency,
            connected,
            acyclic,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&edge_key(a, b)).is_ok()
    }

    pub fn is_tree(&self) -> bool {
        self.connected && self.acyclic
    }

    /// Center vertex if the graph is a star (a tree where one vertex touches every edge).
    pub fn star_center(&self) -> Option<usize> {
        if !self.is_tree() {
            return None;
        }
        (0..self.n).find(|&v| self.degree(v) == self.n - 1)
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![start];
            label[start] = id;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &self.adjacency[v] {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Breadth-first spanning tree of a connected graph, rooted at vertex 0.
    fn spanning_tree(&self) -> (LevelGraph, Vec<Option<usize>>) {
        let mut parent = vec![None; self.n];
        let mut visited = vec![false; self.n];
        let mut tree_edges = Vec::with_capacity(self.n.saturating_sub(1));
        let mut queue = VecDeque::from([0]);
        visited[0] = true;
        while let Some(v) = queue.pop_front() {
            for &w in &self.adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    parent[w] = Some(v);
                    tree_edges.push((v, w));
                    queue.push_back(w);
                }
            }
        }
        (LevelGraph::from_edges(self.n, tree_edges), parent)
    }
}

fn count_components(adjacency: &[Vec<usize>]) -> usize {
    let n = adjacency.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
    }
    count
}

pub fn build_graph(system: &LevelSystem) -> LevelGraph {
    LevelGraph::from_edges(system.dim(), system.coupled_edges())
}

/// Which transition pairs the degeneracy check compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneracyScope {
    /// Only transitions that carry a coupling edge.
    #[default]
    Coupled,
    /// Every pair of levels (the strict controllability condition).
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyViolation {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub first_frequency: f64,
    pub second_frequency: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyReport {
    pub scope: DegeneracyScope,
    pub gap_tol: f64,
    /// Level pairs whose own transition frequency is below `gap_tol`.
    pub degenerate_levels: Vec<(usize, usize)>,
    pub violations: Vec<DegeneracyViolation>,
    pub valid: bool,
}

/// Lists every pair of distinct transitions whose frequencies `|E_k - E_j|`
/// differ by no more than `gap_tol`.
pub fn check_nondegenerate(
    system: &LevelSystem,
    gap_tol: f64,
    scope: DegeneracyScope,
) -> DegeneracyReport {
    let transitions: Vec<(usize, usize)> = match scope {
        DegeneracyScope::Coupled => system.coupled_edges(),
        DegeneracyScope::AllPairs => {
            let n = system.dim();
            let mut all = Vec::with_capacity(n * (n - 1) / 2);
            for a in 0..n {
                for b in a + 1..n {
                    all.push(system.orient(a, b));
                }
            }
            all.sort_unstable();
            all
        }
    };
    let freq = |(k, j): (usize, usize)| system.transition(k, j).abs();

    let degenerate_levels: Vec<_> = transitions
        .iter()
        .copied()
        .filter(|&t| freq(t) <= gap_tol)
        .collect();

    let mut violations = Vec::new();
    for (i, &a) in transitions.iter().enumerate() {
        for &b in &transitions[i + 1..] {
            let gap = (freq(a) - freq(b)).abs();
            if gap <= gap_tol {
                violations.push(DegeneracyViolation {
                    first: a,
                    second: b,
                    first_frequency: freq(a),
                    second_frequency: freq(b),
                    gap,
                });
            }
        }
    }
    let valid = violations.is_empty() && degenerate_levels.is_empty();
    DegeneracyReport {
        scope,
        gap_tol,
        degenerate_levels,
        violations,
        valid,
    }
}

/// Removal sequence of the pendant-vertex pruning of a tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PruneOrder {
    /// `(vertex, successor)` in removal order.
    pub removals: Vec<(usize, usize)>,
    /// The same removals grouped by pruning round.
    pub rounds: Vec<Vec<(usize, usize)>>,
    pub root: usize,
}

fn require_tree(graph: &LevelGraph) -> Result<()> {
    if !graph.connected {
        return Err(Error::DisconnectedGraph);
    }
    if !graph.acyclic {
        return Err(Error::CyclicGraph);
    }
    Ok(())
}

/// Repeatedly strips all pendant vertices (lowest index first within a round)
/// until a single root remains. When only one edge is left the lower index is
/// kept as root.
pub fn prune_order(graph: &LevelGraph) -> Result<PruneOrder> {
    require_tree(graph)?;
    let n = graph.vertex_count();
    let mut degree: Vec<usize> = (0..n).map(|v| graph.degree(v)).collect();
    let mut alive = vec![true; n];
    let mut remaining = n;
    let mut removals = Vec::with_capacity(n - 1);
    let mut rounds = Vec::new();

    while remaining > 1 {
        let pendants: Vec<usize> = (0..n).filter(|&v| alive[v] && degree[v] == 1).collect();
        let mut round = Vec::with_capacity(pendants.len());
        if remaining == 2 {
            // Both endpoints are pendant; keep the lower index.
            let v = pendants[1];
            let succ = graph.neighbors(v).iter().copied().find(|&w| alive[w]).unwrap();
            alive[v] = false;
            remaining -= 1;
            round.push((v, succ));
        } else {
            for v in pendants {
                let succ = graph.neighbors(v).iter().copied().find(|&w| alive[w]).unwrap();
                alive[v] = false;
                degree[succ] -= 1;
                degree[v] = 0;
                remaining -= 1;
                round.push((v, succ));
            }
        }
        removals.extend_from_slice(&round);
        rounds.push(round);
    }
    let root = (0..n).find(|&v| alive[v]).unwrap();
    Ok(PruneOrder {
        removals,
        rounds,
        root,
    })
}

/// Antisymmetric per-edge detuning labels: `get(k, j) == -get(j, k)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detunings {
    values: BTreeMap<(usize, usize), f64>,
}

impl Detunings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets `Δ_kj = value` (and implicitly `Δ_jk = -value`).
    pub fn set(&mut self, k: usize, j: usize, value: f64) {
        if k < j {
            self.values.insert((k, j), value);
        } else {
            self.values.insert((j, k), -value);
        }
    }

    pub fn with(mut self, k: usize, j: usize, value: f64) -> Self {
        self.set(k, j, value);
        self
    }

    /// `Δ_kj`, or `None` if the edge carries no label.
    pub fn get(&self, k: usize, j: usize) -> Option<f64> {
        if k < j {
            self.values.get(&(k, j)).copied()
        } else {
            self.values.get(&(j, k)).map(|v| -v)
        }
    }

    fn require(&self, k: usize, j: usize) -> Result<f64> {
        self.get(k, j).ok_or_else(|| {
            Error::InvalidArgument(format!("no detuning given for edge ({k},{j})"))
        })
    }

    /// Every label with zero value; pairs a coupled graph with exact resonance.
    pub fn zero_on(graph: &LevelGraph) -> Self {
        let mut d = Self::new();
        for &(a, b) in graph.edges() {
            d.set(a, b, 0.0);
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeResidual {
    pub k: usize,
    pub j: usize,
    /// `γ_k - γ_j + Δ_kj`.
    pub value: f64,
    pub detuning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaAssignment {
    pub gamma: Vec<f64>,
    pub root: usize,
    pub residuals: Vec<EdgeResidual>,
}

impl GammaAssignment {
    /// Largest `|residual| / max(1, |Δ|)` over the edges.
    pub fn max_relative_residual(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.value.abs() / r.detuning.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn residuals_vanish(&self) -> bool {
        self.max_relative_residual() <= RESIDUAL_TOL
    }
}

fn edge_residuals(graph: &LevelGraph, detunings: &Detunings, gamma: &[f64]) -> Result<Vec<EdgeResidual>> {
    graph
        .edges()
        .iter()
        .map(|&(a, b)| {
            // Report with the higher index first so labels read like Δ_10, Δ_31.
            let (k, j) = (b, a);
            let d = detunings.require(k, j)?;
            Ok(EdgeResidual {
                k,
                j,
                value: gamma[k] - gamma[j] + d,
                detuning: d,
            })
        })
        .collect()
}

/// Assigns `γ_root = root_value`, then re-adds pruned vertices in reverse
/// order with `γ_k = γ_succ - Δ_{k,succ}`.
pub fn assign_gamma(graph: &LevelGraph, detunings: &Detunings, root_value: f64) -> Result<GammaAssignment> {
    let order = prune_order(graph)?;
    let mut gamma = vec![0.0; graph.vertex_count()];
    gamma[order.root] = root_value;
    for &(v, succ) in order.removals.iter().rev() {
        gamma[v] = gamma[succ] - detunings.require(v, succ)?;
    }
    let residuals = edge_residuals(graph, detunings, &gamma)?;
    Ok(GammaAssignment {
        gamma,
        root: order.root,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSum {
    /// Vertices around the cycle, starting at its smallest index.
    pub vertices: Vec<usize>,
    /// `Σ Δ_{v_{i+1} v_i}` walking the cycle in the listed direction.
    pub detuning_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleReport {
    /// One fundamental cycle per non-tree edge of a breadth-first spanning tree.
    pub cycles: Vec<CycleSum>,
    /// The cycles whose detuning sum does not vanish.
    pub blocking: Vec<CycleSum>,
    /// Present iff every cycle sum vanishes.
    pub gamma: Option<GammaAssignment>,
}

impl CycleReport {
    pub fn reducible(&self) -> bool {
        self.blocking.is_empty()
    }
}

fn tree_path_to_root(parent: &[Option<usize>], mut v: usize) -> Vec<usize> {
    let mut path = vec![v];
    while let Some(p) = parent[v] {
        path.push(p);
        v = p;
    }
    path
}

fn canonical_cycle(mut cycle: Vec<usize>) -> Vec<usize> {
    let pos = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, &v)| v)
        .map(|(i, _)| i)
        .unwrap();
    cycle.rotate_left(pos);
    if cycle.len() > 2 && cycle[cycle.len() - 1] < cycle[1] {
        cycle[1..].reverse();
    }
    cycle
}

/// Checks whether a graph with cycles still admits a time-independent frame:
/// every fundamental cycle must carry a vanishing signed detuning sum.
pub fn check_cycle_consistency(graph: &LevelGraph, detunings: &Detunings) -> Result<CycleReport> {
    if !graph.connected {
        return Err(Error::DisconnectedGraph);
    }
    let (tree, parent) = graph.spanning_tree();
    let mut cycles = Vec::new();
    for &(a, b) in graph.edges() {
        if tree.has_edge(a, b) {
            continue;
        }
        let pa = tree_path_to_root(&parent, a);
        let pb = tree_path_to_root(&parent, b);
        // Trim the shared tail above the lowest common ancestor.
        let mut ia = pa.len();
        let mut ib = pb.len();
        while ia > 1 && ib > 1 && pa[ia - 2] == pb[ib - 2] {
            ia -= 1;
            ib -= 1;
        }
        let mut cycle: Vec<usize> = pa[..ia].to_vec();
        cycle.extend(pb[..ib - 1].iter().rev());
        let cycle = canonical_cycle(cycle);
        let mut sum = 0.0;
        for i in 0..cycle.len() {
            let from = cycle[i];
            let to = cycle[(i + 1) % cycle.len()];
            sum += detunings.require(to, from)?;
        }
        cycles.push(CycleSum {
            vertices: cycle,
            detuning_sum: sum,
        });
    }

    let blocking: Vec<CycleSum> = cycles
        .iter()
        .filter(|c| {
            let scale = c
                .vertices
                .iter()
                .enumerate()
                .map(|(i, &from)| {
                    let to = c.vertices[(i + 1) % c.vertices.len()];
                    detunings.get(to, from).unwrap_or(0.0).abs()
                })
                .sum::<f64>()
                .max(1.0);
            c.detuning_sum.abs() > RESIDUAL_TOL * scale
        })
        .cloned()
        .collect();

    let gamma = if blocking.is_empty() {
        let mut g = assign_gamma(&tree, detunings, 0.0)?;
        g.residuals = edge_residuals(graph, detunings, &g.gamma)?;
        Some(g)
    } else {
        None
    };
    Ok(CycleReport {
        cycles,
        blocking,
        gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> LevelGraph {
        LevelGraph::from_edges(n, edges.iter().copied())
    }

    fn fig2_tree() -> LevelGraph {
        graph(5, &[(0, 1), (0, 2), (0, 4), (1, 3)])
    }

    #[test]
    fn fig1_graph_is_connected_with_cycle() {
        let g = graph(5, &[(0, 1), (0, 2), (0, 4), (1, 3), (0, 3)]);
        assert!(g.connected);
        assert!(!g.acyclic);
        let t = fig2_tree();
        assert!(t.connected && t.acyclic);
        let two = graph(2, &[(0, 1)]);
        assert!(two.is_tree());
    }

    #[test]
    fn empty_coupling_set_is_disconnected() {
        let sys = LevelSystem::new(vec![0.0, 1.0, 3.0], vec![]).unwrap();
        let g = build_graph(&sys);
        assert!(!g.connected);
        assert!(g.acyclic);
        assert_eq!(g.components().len(), 3);
    }

    #[test]
    fn zero_couplings_do_not_create_edges() {
        let sys = LevelSystem::new(
            vec![0.0, 1.0, 3.0],
            vec![Coupling::real(0, 1, 1.0), Coupling::real(1, 2, 0.0)],
        )
        .unwrap();
        assert_eq!(build_graph(&sys).edges(), &[(0, 1)]);
    }

    #[test]
    fn invalid_systems_are_rejected() {
        assert!(LevelSystem::new(vec![0.0], vec![]).is_err());
        assert!(LevelSystem::new(vec![0.0, f64::NAN], vec![]).is_err());
        assert!(LevelSystem::new(vec![0.0, 1.0], vec![Coupling::real(1, 1, 1.0)]).is_err());
        assert!(LevelSystem::new(vec![0.0, 1.0], vec![Coupling::real(0, 2, 1.0)]).is_err());
        assert!(LevelSystem::new(
            vec![0.0, 1.0],
            vec![Coupling::real(0, 1, 1.0), Coupling::real(1, 0, 1.0)]
        )
        .is_err());
    }

    #[test]
    fn ladder_is_degenerate_in_all_pairs_mode() {
        let sys = LevelSystem::new(vec![0.0, 1.0, 2.0], vec![]).unwrap();
        let r = check_nondegenerate(&sys, DEFAULT_GAP_TOL, DegeneracyScope::AllPairs);
        assert!(!r.valid);
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!((v.first, v.second), ((1, 0), (2, 1)));
    }

    #[test]
    fn distinct_gaps_pass() {
        let sys = LevelSystem::new(vec![0.0, 1.0, 2.5], vec![]).unwrap();
        let r = check_nondegenerate(&sys, 1e-6, DegeneracyScope::AllPairs);
        assert!(r.valid, "{r:?}");
    }

    #[test]
    fn near_degenerate_pair_matches_brute_force() {
        let energies = vec![0.0, 1.0, 1.0 + 1e-9];
        let sys = LevelSystem::new(energies.clone(), vec![]).unwrap();
        let r = check_nondegenerate(&sys, 1e-6, DegeneracyScope::AllPairs);

        // Oracle: all ordered pairs of unordered transitions, deduplicated.
        let mut expected = Vec::new();
        let pairs: Vec<(usize, usize)> = vec![(0, 1), (0, 2), (1, 2)];
        for a in &pairs {
            for b in &pairs {
                if a < b {
                    let fa = (energies[a.0] - energies[a.1]).abs();
                    let fb = (energies[b.0] - energies[b.1]).abs();
                    if (fa - fb).abs() <= 1e-6 {
                        expected.push((fa.min(fb), fa.max(fb)));
                    }
                }
            }
        }
        assert_eq!(expected.len(), 1);
        assert_eq!(r.violations.len(), 1);
        let v = &r.violations[0];
        assert_eq!((v.first, v.second), ((1, 0), (2, 0)));
        // The 1e-9 level splitting is itself below tolerance.
        assert_eq!(r.degenerate_levels, vec![(2, 1)]);
    }

    #[test]
    fn coupled_scope_ignores_uncoupled_transitions() {
        let sys = LevelSystem::new(vec![0.0, 1.0, 2.0], vec![Coupling::real(0, 1, 1.0)]).unwrap();
        assert!(check_nondegenerate(&sys, 1e-6, DegeneracyScope::Coupled).valid);
    }

    #[test]
    fn prune_examples() {
        let p = prune_order(&fig2_tree()).unwrap();
        assert_eq!(p.rounds, vec![vec![(2, 0), (3, 1), (4, 0)], vec![(1, 0)]]);
        assert_eq!(p.root, 0);

        let p = prune_order(&graph(3, &[(0, 1), (1, 2)])).unwrap();
        assert_eq!(p.removals, vec![(0, 1), (2, 1)]);
        assert_eq!(p.root, 1);

        let p = prune_order(&graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)])).unwrap();
        assert_eq!(p.removals, vec![(1, 0), (2, 0), (3, 0), (4, 0)]);
        assert_eq!(p.root, 0);

        let p = prune_order(&graph(2, &[(0, 1)])).unwrap();
        assert_eq!(p.removals, vec![(1, 0)]);
        assert_eq!(p.root, 0);
    }

    #[test]
    fn prune_rejects_non_trees() {
        let cyc = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert!(matches!(prune_order(&cyc), Err(Error::CyclicGraph)));
        let dis = graph(4, &[(0, 1), (2, 3)]);
        assert!(matches!(prune_order(&dis), Err(Error::DisconnectedGraph)));
    }

    #[test]
    fn fig2_gamma_assignment() {
        let (d10, d20, d40, d31) = (0.013, -0.021, 0.007, 0.031);
        let det = Detunings::new()
            .with(1, 0, d10)
            .with(2, 0, d20)
            .with(4, 0, d40)
            .with(3, 1, d31);
        let g = assign_gamma(&fig2_tree(), &det, 0.0).unwrap();
        assert_eq!(g.root, 0);
        assert_eq!(g.gamma[0], 0.0);
        assert_eq!(g.gamma[1], -d10);
        assert_eq!(g.gamma[2], -d20);
        assert_eq!(g.gamma[4], -d40);
        assert_eq!(g.gamma[3], -d10 - d31);
        assert!(g.residuals_vanish());
    }

    #[test]
    fn two_level_gamma() {
        let det = Detunings::new().with(1, 0, 0.25);
        let g = assign_gamma(&graph(2, &[(0, 1)]), &det, 0.0).unwrap();
        assert_eq!(g.gamma, vec![0.0, -0.25]);
        let g = assign_gamma(&graph(2, &[(0, 1)]), &det, 1.5).unwrap();
        assert_eq!(g.gamma, vec![1.5, 1.25]);
    }

    #[test]
    fn detunings_are_antisymmetric() {
        let d = Detunings::new().with(3, 1, 0.5);
        assert_eq!(d.get(3, 1), Some(0.5));
        assert_eq!(d.get(1, 3), Some(-0.5));
        assert_eq!(d.get(0, 1), None);
    }

    #[test]
    fn missing_detuning_is_an_error() {
        let det = Detunings::new().with(1, 0, 0.1);
        assert!(assign_gamma(&graph(3, &[(0, 1), (1, 2)]), &det, 0.0).is_err());
    }

    #[test]
    fn triangle_cycle_sums() {
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let det = Detunings::new().with(1, 0, 0.1).with(2, 1, -0.1).with(2, 0, 0.0);
        let r = check_cycle_consistency(&tri, &det).unwrap();
        assert_eq!(r.cycles.len(), 1);
        assert_eq!(r.cycles[0].vertices, vec![0, 1, 2]);
        assert!(r.cycles[0].detuning_sum.abs() < 1e-15);
        assert!(r.reducible());
        let g = r.gamma.unwrap();
        assert!(g.residuals_vanish());
        assert_eq!(g.residuals.len(), 3);

        let det = Detunings::new().with(1, 0, 0.1).with(2, 1, 0.1).with(2, 0, 0.0);
        let r = check_cycle_consistency(&tri, &det).unwrap();
        assert!(!r.reducible());
        assert!((r.blocking[0].detuning_sum - 0.2).abs() < 1e-15);
        assert!(r.gamma.is_none());
    }

    #[test]
    fn fig1_reports_cycle_013() {
        let g = graph(5, &[(0, 1), (0, 2), (0, 4), (1, 3), (0, 3)]);
        let det = Detunings::new()
            .with(1, 0, 0.0123)
            .with(2, 0, -0.0071)
            .with(4, 0, 0.0049)
            .with(3, 1, 0.0311)
            .with(3, 0, std::f64::consts::SQRT_2 * 0.01);
        let r = check_cycle_consistency(&g, &det).unwrap();
        assert_eq!(r.cycles.len(), 1);
        assert_eq!(r.blocking.len(), 1);
        assert_eq!(r.blocking[0].vertices, vec![0, 1, 3]);
    }

    #[test]
    fn cycle_check_needs_connectivity() {
        let g = graph(4, &[(0, 1), (2, 3)]);
        assert!(matches!(
            check_cycle_consistency(&g, &Detunings::zero_on(&g)),
            Err(Error::DisconnectedGraph)
        ));
    }

    #[test]
    fn star_center_detection() {
        assert_eq!(graph(4, &[(0, 1), (0, 2), (0, 3)]).star_center(), Some(0));
        assert_eq!(graph(4, &[(2, 1), (2, 0), (2, 3)]).star_center(), Some(2));
        assert_eq!(graph(4, &[(0, 1), (1, 2), (2, 3)]).star_center(), None);
        assert_eq!(graph(2, &[(0, 1)]).star_center(), Some(0));
    }
}
