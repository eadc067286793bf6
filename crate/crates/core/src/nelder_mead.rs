//! Nelder–Mead simplex search with restarts around the incumbent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplexConfig {
    /// Initial simplex offset per coordinate; a single entry is broadcast.
    pub scale: Vec<f64>,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_evaluations: usize,
    /// Stop when every vertex lies within this distance (max-norm) of the best.
    pub xtol: f64,
    /// Stop when the objective spread across the simplex falls below this.
    pub ftol: f64,
    /// Simplex rebuilds around the incumbent after convergence.
    pub restarts: usize,
    /// Stop as soon as the objective reaches this value.
    pub target: f64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            scale: vec![0.1],
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_evaluations: 10_000,
            xtol: 1e-10,
            ftol: 1e-15,
            restarts: 3,
            target: f64::NEG_INFINITY,
        }
    }
}

impl SimplexConfig {
    fn validate(&self, dim: usize) -> Result<()> {
        let positive = [self.reflection, self.expansion, self.contraction, self.shrink]
            .iter()
            .all(|c| *c > 0.0 && c.is_finite());
        if !positive || self.expansion <= self.reflection || self.contraction >= 1.0 || self.shrink >= 1.0 {
            return Err(Error::InvalidArgument(
                "simplex coefficients must be positive with expansion > reflection and contraction, shrink < 1".into(),
            ));
        }
        if !(self.scale.len() == 1 || self.scale.len() == dim) || self.scale.iter().any(|s| !(s.abs() > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "simplex scale must have 1 or {dim} nonzero entries"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("cannot optimize over zero parameters".into()));
        }
        Ok(())
    }

    fn scale_at(&self, i: usize) -> f64 {
        if self.scale.len() == 1 {
            self.scale[0]
        } else {
            self.scale[i]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    SimplexSpread,
    ObjectiveSpread,
    MaxEvaluations,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadStats {
    pub evaluations: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub termination: Termination,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub stats: NelderMeadStats,
}

struct Counter<'a, F> {
    objective: &'a mut F,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counter<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let value = (self.objective)(x);
        if !value.is_finite() {
            return Err(Error::ObjectiveNonFinite {
                value,
                evaluation: self.evaluations,
            });
        }
        Ok(value)
    }
}

/// Minimizes `objective` starting from `x0`.
pub fn nelder_mead<F>(mut objective: F, x0: &[f64], config: &SimplexConfig) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    config.validate(n)?;
    let mut counter = Counter {
        objective: &mut objective,
        evaluations: 0,
    };
    let mut best_x = x0.to_vec();
    let mut best_f = counter.eval(x0)?;
    let mut iterations = 0;
    let mut restarts = 0;

    loop {
        let (x, f, termination) = run_simplex(&mut counter, &best_x, best_f, config, &mut iterations)?;
        let improved = f < best_f - config.ftol.max(f64::EPSILON * best_f.abs());
        if f <= best_f {
            best_x = x;
            best_f = f;
        }
        let done = matches!(termination, Termination::MaxEvaluations | Termination::Target)
            || restarts >= config.restarts
            || (restarts > 0 && !improved);
        if done {
            return Ok(NelderMeadResult {
                x: best_x,
                f: best_f,
                stats: NelderMeadStats {
                    evaluations: counter.evaluations,
                    iterations,
                    restarts,
                    termination,
                },
            });
        }
        restarts += 1;
    }
}

fn run_simplex<F: FnMut(&[f64]) -> f64>(
    counter: &mut Counter<'_, F>,
    x0: &[f64],
    f0: f64,
    config: &SimplexConfig,
    iterations: &mut usize,
) -> Result<(Vec<f64>, f64, Termination)> {
    let n = x0.len();
    let mut points = vec![x0.to_vec()];
    let mut values = vec![f0];
    if f0 <= config.target {
        return Ok((x0.to_vec(), f0, Termination::Target));
    }
    for i in 0..n {
        if counter.evaluations >= config.max_evaluations {
            return Ok(best_of(&points, &values, Termination::MaxEvaluations));
        }
        let mut p = x0.to_vec();
        p[i] += config.scale_at(i);
        let v = counter.eval(&p)?;
        points.push(p);
        values.push(v);
    }

    let mut order: Vec<usize> = (0..=n).collect();
    loop {
        // Stable sort keeps lower vertex indices first among ties.
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst, second) = (order[0], order[n], order[n - 1]);
        if values[best] <= config.target {
            return Ok(best_of(&points, &values, Termination::Target));
        }
        let x_spread = points
            .iter()
            .flat_map(|p| p.iter().zip(&points[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if x_spread <= config.xtol {
            return Ok(best_of(&points, &values, Termination::SimplexSpread));
        }
        if values[worst] - values[best] <= config.ftol {
            return Ok(best_of(&points, &values, Termination::ObjectiveSpread));
        }
        if counter.evaluations >= config.max_evaluations {
            return Ok(best_of(&points, &values, Termination::MaxEvaluations));
        }
        *iterations += 1;

        let mut centroid = vec![0.0; n];
        for &i in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&points[i]) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&points[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(config.reflection);
        let fr = counter.eval(&xr)?;
        if fr < values[best] {
            let xe = along(config.reflection * config.expansion);
            let fe = counter.eval(&xe)?;
            if fe < fr {
                points[worst] = xe;
                values[worst] = fe;
            } else {
                points[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            points[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[worst] {
            let xc = along(config.reflection * config.contraction);
            let fc = counter.eval(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-config.contraction);
            let fc = counter.eval(&xc)?;
            (xc, fc)
        };
        if fc < values[worst].min(fr) {
            points[worst] = xc;
            values[worst] = fc;
            continue;
        }
        let anchor = points[best].clone();
        for &i in &order[1..] {
            if counter.evaluations >= config.max_evaluations {
                break;
            }
            for (x, a) in points[i].iter_mut().zip(&anchor) {
                *x = a + config.shrink * (*x - a);
            }
            values[i] = counter.eval(&points[i])?;
        }
    }
}

fn best_of(points: &[Vec<f64>], values: &[f64], termination: Termination) -> (Vec<f64>, f64, Termination) {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] < values[best] {
            best = i;
        }
    }
    (points[best].clone(), values[best], termination)
}
