//! Adaptive Dormand–Prince 5(4) integrator for complex linear ODE systems.

use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Fifth-order weights (equal to the last row of `A`, first-same-as-last).
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Difference between fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Absolute and relative local-error tolerance per step.
    pub tol: f64,
    /// Largest step allowed.
    pub max_step: f64,
    /// Initial step guess.
    pub first_step: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evaluations: usize,
    /// Largest accepted local error estimate (absolute, max-norm).
    pub max_local_error: f64,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` in place.
///
/// `observer` is called after every accepted step with the new time and state.
pub fn integrate<F, O>(
    mut rhs: F,
    y: &mut [Complex64],
    t0: f64,
    t1: f64,
    control: StepControl,
    stop: Option<&AtomicBool>,
    mut observer: O,
) -> Result<IntegratorStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
    O: FnMut(f64, &[Complex64]),
{
    let n = y.len();
    let mut stats = IntegratorStats::default();
    if t1 == t0 {
        return Ok(stats);
    }
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("integration interval [{t0}, {t1}] is reversed")));
    }
    let mut k = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut stage = vec![Complex64::new(0.0, 0.0); n];
    let mut y_new = vec![Complex64::new(0.0, 0.0); n];

    let mut t = t0;
    let mut h = control.first_step.min(control.max_step).min(t1 - t0);
    rhs(t, y, &mut k[0]);
    stats.rhs_evaluations += 1;

    while t < t1 {
        if let Some(flag) = stop {
            if flag.load(Ordering::Relaxed) {
                return Err(Error::Cancelled { t });
            }
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (r, a) in A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += k[r][i] * (h * a);
                    }
                }
                stage[i] = acc;
            }
            rhs(t + C[s] * h, &stage, &mut k[s]);
        }
        stats.rhs_evaluations += 6;

        let mut err: f64 = 0.0;
        let mut err_abs: f64 = 0.0;
        for i in 0..n {
            let mut acc = y[i];
            let mut e = Complex64::new(0.0, 0.0);
            for s in 0..7 {
                if B[s] != 0.0 {
                    acc += k[s][i] * (h * B[s]);
                }
                e += k[s][i] * (h * E[s]);
            }
            y_new[i] = acc;
            let scale = control.tol * y[i].norm().max(acc.norm()).max(1.0);
            err = err.max(e.norm() / scale);
            err_abs = err_abs.max(e.norm());
        }

        if !err.is_finite() {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&y_new);
            // First same as last: stage 7 was evaluated at the new point.
            k.swap(0, 6);
            stats.accepted_steps += 1;
            stats.max_local_error = stats.max_local_error.max(err_abs);
            observer(t, y);
            if last {
                break;
            }
        } else {
            stats.rejected_steps += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else if err.is_infinite() {
            0.2
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(control.max_step);
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }
    }
    Ok(stats)
}
