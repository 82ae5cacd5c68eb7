//! Inverse map from a sliding direction to the load on the 1-level set.
//!
//! Solves `grad H(F) = V` by Gauss-Newton on `G(F) = |grad H(F) - V|^2 / 2`
//! (the Jacobian of `grad H` is the Hessian, so the step is `Hess^-1 r`), then
//! rescales the solution onto `H = 1`. Homogeneity keeps the gradient
//! direction through the rescaling.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::poly_model::PolyModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    pub max_iterations: usize,
    pub step_tolerance: f64,
    pub residual_tolerance: f64,
    /// Levenberg parameter applied to every step; 0 means plain Gauss-Newton
    /// except at ill-conditioned iterates.
    pub damping: f64,
    /// Hessian condition number above which a damped step is used.
    pub max_condition: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            step_tolerance: 1e-12,
            residual_tolerance: 1e-10,
            damping: 0.0,
            max_condition: 1e12,
        }
    }
}

impl InversionOptions {
    fn validate(&self) -> Result<()> {
        if self.step_tolerance > 0.0 && self.residual_tolerance > 0.0 && self.damping >= 0.0 {
            Ok(())
        } else {
            Err(invalid(
                "inversion tolerances must be positive and damping non-negative",
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    /// Load on the 1-level set (model units).
    pub load: Vector3<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub damped_steps: usize,
    /// `G` after every accepted step, starting from the initial guess.
    pub objective_trace: Vec<f64>,
}

pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Load `F` with `H(F) = 1` and `grad H(F)` parallel to the unit twist `v`.
pub fn invert(
    model: &PolyModel,
    v: &Vector3<f64>,
    opts: &InversionOptions,
) -> Result<Vector3<f64>> {
    invert_with_report(model, v, opts).map(|r| r.load)
}

fn damped_step(h: &Matrix3<f64>, r: &Vector3<f64>, lambda: f64) -> Option<Vector3<f64>> {
    let normal = h * h + Matrix3::identity() * lambda;
    normal.cholesky().map(|c| c.solve(&(h * r)))
}

pub fn invert_with_report(
    model: &PolyModel,
    v: &Vector3<f64>,
    opts: &InversionOptions,
) -> Result<Inversion> {
    opts.validate()?;
    let norm = v.norm();
    if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(Error::NonUnitVelocity { norm });
    }
    let objective = |f: &Vector3<f64>| 0.5 * (model.gradient(f) - v).norm_squared();

    let mut f = *v;
    let mut g = objective(&f);
    let mut trace = vec![g];
    let mut iterations = 0;
    let mut damped_steps = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        let r = model.gradient(&f) - v;
        if r.norm() <= opts.residual_tolerance {
            converged = true;
            break;
        }
        let h = model.hessian(&f);
        let eig = SymmetricEigen::new(h).eigenvalues.abs();
        let (lo, hi) = (eig.min(), eig.max());
        let ill = !(lo > 0.0) || hi / lo > opts.max_condition;
        let mut lambda = if ill || opts.damping > 0.0 {
            opts.damping.max(1e-12 * hi * hi).max(f64::MIN_POSITIVE)
        } else {
            0.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            let step = if lambda == 0.0 {
                h.lu().solve(&r)
            } else {
                damped_step(&h, &r, lambda)
            };
            let Some(step) = step else {
                lambda = (lambda * 10.0).max(1e-12 * hi * hi).max(f64::MIN_POSITIVE);
                continue;
            };
            // Directional derivative of G along -step is -(H r) . step.
            let slope = (h * r).dot(&step);
            let mut t = 1.0;
            while t > 1e-10 {
                let candidate = f - step * t;
                let gc = objective(&candidate);
                if gc <= g - 1e-4 * t * slope {
                    accepted = Some((candidate, gc));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
            lambda = if lambda == 0.0 {
                1e-6 * hi * hi
            } else {
                lambda * 10.0
            };
        }
        if lambda > 0.0 {
            damped_steps += 1;
        }
        iterations += 1;
        let Some((next, gn)) = accepted else {
            return Err(Error::NonConvergence {
                iterations,
                residual: r.norm(),
            });
        };
        let moved = (next - f).norm();
        f = next;
        g = gn;
        trace.push(g);
        if moved <= opts.step_tolerance * f.norm() {
            converged = (model.gradient(&f) - v).norm() <= opts.residual_tolerance.sqrt();
            break;
        }
    }
    let residual = (model.gradient(&f) - v).norm();
    if !converged && residual > opts.residual_tolerance {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    let level = model.evaluate(&f);
    if !(level > 0.0) || !level.is_finite() {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    let load = f / level.powf(1.0 / model.degree() as f64);
    Ok(Inversion {
        load,
        iterations,
        residual,
        damped_steps,
        objective_trace: trace,
    })
}
