//! First-order ascent with central finite differences and a backtracking
//! line search.
//!
//! The gradient is preconditioned by the magnitude of the diagonal curvature,
//! which falls out of the same central differences at no extra cost, and
//! successive directions are combined Polak-Ribiere style. Parameters on very
//! different scales (a logit intercept next to a cm-per-mm ratio next to a
//! depth-lag coefficient) otherwise make a single learning rate useless.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Relative finite-difference step; coordinate i uses `h·max(1, |x_i|)`.
    pub gradient_step: f64,
    pub initial_learning_rate: f64,
    /// Relative log-likelihood change regarded as no progress.
    pub convergence_tol: f64,
    pub backtrack_factor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            gradient_step: 1e-5,
            initial_learning_rate: 1e-2,
            convergence_tol: 1e-9,
            backtrack_factor: 0.5,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return domain("max_iterations must be positive");
        }
        for (name, v) in [
            ("gradient_step", self.gradient_step),
            ("initial_learning_rate", self.initial_learning_rate),
            ("convergence_tol", self.convergence_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return domain(format!(
                "backtrack_factor must lie in (0, 1), got {}",
                self.backtrack_factor
            ));
        }
        Ok(())
    }

    /// Largest gradient component (infinity norm) accepted as stationary at
    /// objective value `value`.
    pub fn gradient_tolerance(&self, value: f64) -> f64 {
        10.0 * self.convergence_tol * value.abs().max(1.0)
    }
}

/// Outcome of [`maximize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub gradient_inf_norm: f64,
}

const MAX_BACKTRACKS: usize = 60;
const ARMIJO: f64 = 1e-4;
/// Steps with a relative gain below `convergence_tol` tolerated in a row
/// before the run is declared stalled.
const STALL_LIMIT: usize = 25;
const MAX_MOVE: f64 = 1.0;

/// Central-difference gradient and diagonal curvature of `f` at `x`.
pub fn finite_difference<F>(f: &F, x: &[f64], fx: f64, h: f64) -> (Vec<f64>, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
{
    let mut grad = vec![0.0; x.len()];
    let mut curv = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        probe[i] = x[i] + hi;
        let up = f(&probe);
        probe[i] = x[i] - hi;
        let down = f(&probe);
        probe[i] = x[i];
        let (g, c) = match (up.is_finite(), down.is_finite()) {
            (true, true) => ((up - down) / (2.0 * hi), (up + down - 2.0 * fx) / (hi * hi)),
            (true, false) => ((up - fx) / hi, f64::NAN),
            (false, true) => ((fx - down) / hi, f64::NAN),
            (false, false) => (0.0, f64::NAN),
        };
        grad[i] = g;
        curv[i] = c;
    }
    (grad, curv)
}

/// Maximizes `objective` from `initial`. Accepted steps never decrease the
/// objective; non-finite trial values are treated as rejections.
pub fn maximize<F>(objective: F, initial: &[f64], config: &FitConfig) -> Result<Maximum>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let f = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut x = initial.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return domain(format!("objective is not finite at the initial point ({fx})"));
    }
    let mut trace = vec![fx];
    let mut lr = config.initial_learning_rate;
    let mut stalled = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let eps = f64::EPSILON;
    let mut previous: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    while iterations < config.max_iterations {
        let (grad, curv) = finite_difference(&f, &x, fx, config.gradient_step);
        grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm <= config.gradient_tolerance(fx) {
            converged = true;
            break;
        }
        iterations += 1;

        let precond: Vec<f64> = grad
            .iter()
            .zip(&curv)
            .zip(&x)
            .map(|((&g, &c), &xi)| {
                let hi = config.gradient_step * xi.abs().max(1.0);
                // curvature below the rounding noise of the second difference is not informative
                let noise = 8.0 * eps * fx.abs().max(1.0) / (hi * hi);
                let scale = if c.is_finite() { c.abs().max(noise) } else { noise };
                g / scale
            })
            .collect();
        // Polak-Ribiere (clipped at 0) on the preconditioned gradient
        let mut direction = precond.clone();
        if let Some((prev_grad, prev_precond, prev_dir)) = &previous {
            let num: f64 = precond
                .iter()
                .zip(&grad)
                .zip(prev_grad)
                .map(|((z, g), gp)| z * (g - gp))
                .sum();
            let den: f64 = prev_precond.iter().zip(prev_grad).map(|(z, g)| z * g).sum();
            let beta = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
            if beta > 0.0 && iterations % (x.len() + 1) != 0 {
                for (d, pd) in direction.iter_mut().zip(prev_dir) {
                    *d += beta * pd;
                }
            }
        }
        let mut slope: f64 = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        if !(slope > 0.0) {
            direction = precond.clone();
            slope = grad.iter().zip(&direction).map(|(g, d)| g * d).sum();
        }

        // no coordinate moves by more than max(1, |x_i|) in one step
        let cap = direction
            .iter()
            .zip(&x)
            .map(|(d, xi)| MAX_MOVE * xi.abs().max(1.0) / d.abs())
            .fold(f64::INFINITY, f64::min);
        let mut step = lr.min(cap);
        let mut accepted = None;
        for attempt in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&direction).map(|(xi, d)| xi + step * d).collect();
            let ft = f(&trial);
            if ft.is_finite() && ft >= fx + ARMIJO * step * slope && ft >= fx {
                accepted = Some((trial, ft, attempt));
                break;
            }
            step *= config.backtrack_factor;
        }

        let Some((trial, ft, attempt)) = accepted else {
            break;
        };
        // grow after a first-try success, otherwise keep the step that worked
        lr = if attempt == 0 { (step * 2.0).min(1.0) } else { step };
        let gain = (ft - fx) / fx.abs().max(1.0);
        previous = Some((grad, precond, direction));
        x = trial;
        fx = ft;
        trace.push(fx);
        if gain < config.convergence_tol {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    if !converged {
        let (grad, _) = finite_difference(&f, &x, fx, config.gradient_step);
        grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        converged = grad_norm <= config.gradient_tolerance(fx);
    }

    Ok(Maximum {
        x,
        value: fx,
        iterations,
        converged,
        trace,
        gradient_inf_norm: grad_norm,
    })
}
