//! Random tree-shaped level systems with detuned drives and random goals.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Coupling, LevelSystem};
use crate::optimize::detuned_drives;
use crate::rwa::DriveSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceSpec {
    pub n: usize,
    pub seed: u64,
    /// Energies are drawn uniformly from `[0, spectrum_max]`; `None` means `[0, n]`.
    pub spectrum_max: Option<f64>,
    /// Smallest allowed spacing between adjacent levels and between any two
    /// coupled transition frequencies.
    pub min_gap: f64,
    pub max_attempts: usize,
}

impl RandomInstanceSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            spectrum_max: None,
            min_gap: 0.1,
            max_attempts: 100_000,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("instance dimension must be >= 2, got {}", self.n)));
        }
        if !(self.min_gap > 0.0) {
            return Err(Error::InvalidArgument(format!("minimum gap must be positive, got {}", self.min_gap)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstance {
    pub system: LevelSystem,
    /// Tree edges as (upper, lower) level pairs.
    pub edges: Vec<(usize, usize)>,
    pub goal: DVector<Complex64>,
}

impl RandomInstance {
    /// Drives resonant with every tree edge, shifted down by `detuning`.
    pub fn drives(&self, detuning: f64) -> Result<DriveSet> {
        detuned_drives(&self.system, detuning)
    }

    /// Smallest distance between a drive frequency and any other coupled transition.
    pub fn crosstalk_gap(&self) -> f64 {
        let freqs: Vec<f64> = self.edges.iter().map(|&(k, j)| self.system.transition(k, j)).collect();
        let mut gap = f64::INFINITY;
        for (a, fa) in freqs.iter().enumerate() {
            for fb in &freqs[a + 1..] {
                gap = gap.min((fa - fb).abs());
            }
        }
        gap
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th instance of dimension `n` under `master`.
pub fn instance_seed(master: u64, n: usize, index: usize) -> u64 {
    mix_seed(mix_seed(mix_seed(master) ^ n as u64) ^ index as u64)
}

/// Uniform labeled tree on `n` vertices from a random Prüfer sequence.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    if n == 2 {
        return vec![(0, 1)];
    }
    let code: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    prufer_decode(&code, n)
}

/// Edges `(min, max)` of the tree encoded by a Prüfer sequence of length `n - 2`.
pub fn prufer_decode(code: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &v in code {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut leaves: std::collections::BTreeSet<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    for &v in code {
        let leaf = *leaves.iter().next().expect("a Prüfer sequence always leaves a leaf");
        leaves.remove(&leaf);
        edges.push((leaf.min(v), leaf.max(v)));
        degree[v] -= 1;
        if degree[v] == 1 {
            leaves.insert(v);
        }
    }
    let rest: Vec<usize> = leaves.into_iter().collect();
    edges.push((rest[0], rest[1]));
    edges.sort_unstable();
    edges
}

fn spectrum_ok(energies: &[f64], edges: &[(usize, usize)], min_gap: f64) -> bool {
    if energies.windows(2).any(|w| w[1] - w[0] < min_gap) {
        return false;
    }
    let freqs: Vec<f64> = edges.iter().map(|&(a, b)| (energies[a] - energies[b]).abs()).collect();
    for (i, a) in freqs.iter().enumerate() {
        if freqs[i + 1..].iter().any(|b| (a - b).abs() < min_gap) {
            return false;
        }
    }
    true
}

/// Draws a tree, a sorted spectrum satisfying the gap constraints, unit
/// couplings on the tree edges, and a goal uniform on the unit sphere.
pub fn random_instance(spec: &RandomInstanceSpec) -> Result<RandomInstance> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let edges = random_tree(n, &mut rng);
    let top = spec.spectrum_max.unwrap_or(n as f64);
    let mut energies = None;
    for _ in 0..spec.max_attempts {
        let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..top)).collect();
        e.sort_by(f64::total_cmp);
        if spectrum_ok(&e, &edges, spec.min_gap) {
            energies = Some(e);
            break;
        }
    }
    let energies = energies.ok_or(Error::ResampleExhausted {
        attempts: spec.max_attempts,
    })?;
    let couplings = edges.iter().map(|&(a, b)| Coupling::real(a, b, 1.0)).collect();
    let system = LevelSystem::new(energies, couplings)?;
    let goal = random_state(n, &mut rng);
    let edges = edges.into_iter().map(|(a, b)| (b.max(a), a.min(b))).collect();
    Ok(RandomInstance { system, edges, goal })
}

/// Normalized complex Gaussian vector, uniform on the unit sphere.
pub fn random_state(n: usize, rng: &mut impl Rng) -> DVector<Complex64> {
    loop {
        let v = DVector::from_iterator(
            n,
            (0..n).map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))),
        );
        let norm = v.norm();
        if norm > 1e-12 {
            return v / Complex64::new(norm, 0.0);
        }
    }
}
