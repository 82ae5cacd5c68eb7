//! Barrier-Newton solver for the two small convex programs used in fitting.
//!
//! Variables are stacked as `x = (a, svec(Q))`. The equality constraints
//! `C x = 0` are homogeneous, so an orthonormal null-space basis `N` turns the
//! feasible set into `x = N w` and every Newton step is an unconstrained solve
//! in `w`. The objective is `a^T G a + l . a + c` plus the log-barrier
//! `-mu log det(Q - eps I)`; `mu` is shrunk geometrically until the duality-gap
//! bound `dim(Q) * mu` falls below the requested tolerance.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, QR};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::poly_model::PolyModel;
use crate::sos::{smat, svec, svec_len, GramForm, SosConstraintSystem};

/// `a^T G a + l . a + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub gram: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticObjective {
    /// `|a|^2` alone.
    pub fn regularizer(m: usize) -> Self {
        Self {
            gram: DMatrix::identity(m, m),
            linear: DVector::zeros(m),
            constant: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn value(&self, a: &DVector<f64>) -> f64 {
        (a.transpose() * &self.gram * a)[0] + self.linear.dot(a) + self.constant
    }

    pub fn gradient(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.gram * a * 2.0 + &self.linear
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub initial_barrier: f64,
    pub barrier_shrink: f64,
    pub max_stages: usize,
    /// Stop once `dim(Q) * mu` is at or below this.
    pub gap_tolerance: f64,
    /// Half the squared Newton decrement at which a stage is centered.
    pub newton_tolerance: f64,
    pub max_newton_iterations: usize,
    pub armijo: f64,
    pub backtrack: f64,
    #[serde(skip)]
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            initial_barrier: 1.0,
            barrier_shrink: 0.2,
            max_stages: 20,
            gap_tolerance: 1e-7,
            newton_tolerance: 1e-9,
            max_newton_iterations: 500,
            armijo: 0.3,
            backtrack: 0.5,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub barrier: f64,
    pub newton_iterations: usize,
    /// Objective without the barrier term at the end of the stage.
    pub objective: f64,
    pub decrement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub stages: Vec<StageRecord>,
    pub constraint_residual: f64,
    pub min_eigenvalue: f64,
    /// Norm of the projected gradient of the barrier objective at the last iterate.
    pub kkt_residual: f64,
    pub duality_gap_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub a: DVector<f64>,
    pub q: DMatrix<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    pub diagnostics: SolveDiagnostics,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

pub struct SdpFitProblem<'a> {
    pub objective: QuadraticObjective,
    pub system: &'a SosConstraintSystem,
    pub epsilon: f64,
    pub options: SolverOptions,
}

/// A strictly feasible `(a, Q)`: a scaled copy of a known certified model with
/// `lambda_min(Q) = 2 eps`.
pub fn feasible_start(sys: &SosConstraintSystem, epsilon: f64) -> (DVector<f64>, DMatrix<f64>) {
    let (a, q) = match sys.form() {
        GramForm::HessianKronecker => {
            let mut c = DVector::zeros(9);
            for i in 0..3 {
                c[3 * i + i] = 1.0;
            }
            let q = DMatrix::identity(9, 9) * 4.0 + &c * c.transpose() * 8.0;
            (PolyModel::sphere_quartic().coeffs().clone(), q)
        }
        GramForm::QuadraticForm => (
            PolyModel::quadratic(&nalgebra::Matrix3::identity())
                .coeffs()
                .clone(),
            DMatrix::identity(3, 3),
        ),
    };
    let lambda_min = SymmetricEigen::new(q.clone()).eigenvalues.min();
    let t = 2.0 * epsilon / lambda_min;
    (a * t, q * t)
}

/// Orthonormal basis of the null space of a full-row-rank `C`.
fn null_space(c: &DMatrix<f64>) -> DMatrix<f64> {
    let (k, n) = c.shape();
    let mut aug = DMatrix::zeros(n, k + n);
    aug.view_mut((0, 0), (n, k)).copy_from(&c.transpose());
    aug.view_mut((0, k), (n, n)).fill_with_identity();
    let q = QR::new(aug).q();
    q.columns(k, n - k).into_owned()
}

fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = Cholesky::new(h.clone()) {
        return Some(ch.solve(g));
    }
    h.clone().lu().solve(g)
}

/// Inverse of `Q - eps I` if it is positive definite.
fn barrier_inverse(q: &DMatrix<f64>, epsilon: f64) -> Option<(DMatrix<f64>, f64)> {
    let n = q.nrows();
    let s = q - DMatrix::identity(n, n) * epsilon;
    let ch = Cholesky::new(s)?;
    let logdet = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return None;
    }
    Some((ch.inverse(), logdet))
}

struct Barrier<'a> {
    objective: &'a QuadraticObjective,
    m: usize,
    gram_dim: usize,
    epsilon: f64,
    basis: DMatrix<f64>,
    index_pairs: Vec<(usize, usize)>,
}

impl<'a> Barrier<'a> {
    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let a = x.rows(0, self.m).into_owned();
        let q = smat(x.rows(self.m, x.len() - self.m).as_slice(), self.gram_dim);
        (a, q)
    }

    /// Barrier objective; `None` outside the domain.
    fn value(&self, x: &DVector<f64>, mu: f64) -> Option<f64> {
        let (a, q) = self.split(x);
        let (_, logdet) = barrier_inverse(&q, self.epsilon)?;
        Some(self.objective.value(&a) - mu * logdet)
    }

    /// Gradient and Hessian in null-space coordinates.
    fn derivatives(&self, x: &DVector<f64>, mu: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let (a, q) = self.split(x);
        let (w, _) = barrier_inverse(&q, self.epsilon)?;
        let n = x.len();
        let mut grad = DVector::zeros(n);
        grad.rows_mut(0, self.m)
            .copy_from(&self.objective.gradient(&a));
        let mut hess = DMatrix::zeros(n, n);
        hess.view_mut((0, 0), (self.m, self.m))
            .copy_from(&(&self.objective.gram * 2.0));
        let scale = |p: usize, q: usize| {
            if p == q {
                std::f64::consts::FRAC_1_SQRT_2
            } else {
                std::f64::consts::SQRT_2
            }
        };
        for (i, &(p, q)) in self.index_pairs.iter().enumerate() {
            grad[self.m + i] = -mu * if p == q { w[(p, p)] } else { 2.0 * w[(p, q)] };
            for (j, &(r, s)) in self.index_pairs.iter().enumerate().skip(i) {
                let v = mu
                    * scale(p, q)
                    * scale(r, s)
                    * (w[(p, r)] * w[(q, s)] + w[(p, s)] * w[(q, r)]);
                hess[(self.m + i, self.m + j)] = v;
                hess[(self.m + j, self.m + i)] = v;
            }
        }
        let g = self.basis.transpose() * grad;
        let h = self.basis.transpose() * hess * &self.basis;
        Some((g, h))
    }
}

fn solve_barrier(
    objective: &QuadraticObjective,
    system: &SosConstraintSystem,
    epsilon: f64,
    options: &SolverOptions,
) -> Result<SolveResult> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid(format!(
            "PSD margin must be positive, got {epsilon}"
        )));
    }
    let m = system.basis().len();
    if objective.dim() != m {
        return Err(invalid(format!(
            "objective has {} coefficients, system expects {m}",
            objective.dim()
        )));
    }
    let gram_dim = system.gram_dim();
    let c = system.constraint_matrix();
    let basis = null_space(&c);

    let (a0, q0) = feasible_start(system, epsilon);
    let mut x0 = DVector::zeros(m + svec_len(gram_dim));
    x0.rows_mut(0, m).copy_from(&a0);
    x0.rows_mut(m, svec_len(gram_dim)).copy_from(&svec(&q0));
    if (&c * &x0).amax() > 1e-12 * (1.0 + x0.amax()) {
        return Err(Error::InfeasibleStart(
            "start violates the equality constraints".into(),
        ));
    }
    if barrier_inverse(&q0, epsilon).is_none() {
        return Err(Error::InfeasibleStart(
            "start is not strictly inside Q > eps I".into(),
        ));
    }

    let index_pairs: Vec<(usize, usize)> = (0..gram_dim)
        .flat_map(|i| (i..gram_dim).map(move |j| (i, j)))
        .collect();
    let barrier = Barrier {
        objective,
        m,
        gram_dim,
        epsilon,
        basis,
        index_pairs,
    };

    let mut w = barrier.basis.transpose() * &x0;
    let mut mu = options.initial_barrier;
    let mut stages = Vec::new();
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIterations;
    let mut kkt_residual = f64::INFINITY;

    for _ in 0..options.max_stages {
        let mut stage_iters = 0;
        let mut decrement = f64::INFINITY;
        let mut stage_ok = false;
        while stage_iters < options.max_newton_iterations {
            let x = &barrier.basis * &w;
            let (g, h) = barrier
                .derivatives(&x, mu)
                .ok_or_else(|| Error::InfeasibleStart("iterate left the barrier domain".into()))?;
            kkt_residual = g.norm();
            let step =
                solve_spd(&h, &(-&g)).ok_or_else(|| Error::Singular("Newton system".into()))?;
            let slope = g.dot(&step);
            decrement = -slope;
            if decrement / 2.0 <= options.newton_tolerance {
                stage_ok = true;
                break;
            }
            let f0 = barrier.value(&x, mu).expect("current iterate is feasible");
            let dx = &barrier.basis * &step;
            let mut t = 1.0;
            let accepted = loop {
                if t < 1e-14 {
                    break false;
                }
                match barrier.value(&(&x + &dx * t), mu) {
                    Some(f) if f <= f0 + options.armijo * t * slope => break true,
                    _ => t *= options.backtrack,
                }
            };
            stage_iters += 1;
            iterations += 1;
            if !accepted {
                // Roundoff floor: the predicted decrease is below what f can resolve.
                if decrement <= 1e-10 * (1.0 + f0.abs()) {
                    stage_ok = true;
                } else {
                    status = SolveStatus::LineSearchFailure;
                }
                break;
            }
            w += step * t;
        }
        let (a, _) = barrier.split(&(&barrier.basis * &w));
        let record = StageRecord {
            barrier: mu,
            newton_iterations: stage_iters,
            objective: objective.value(&a),
            decrement,
        };
        if options.verbose {
            eprintln!(
                "barrier {:.3e}: {} newton steps, objective {:.12e}, decrement {:.3e}",
                record.barrier, record.newton_iterations, record.objective, record.decrement
            );
        }
        stages.push(record);
        if !stage_ok {
            if status != SolveStatus::LineSearchFailure {
                status = SolveStatus::MaxIterations;
            }
            break;
        }
        if gram_dim as f64 * mu <= options.gap_tolerance {
            status = SolveStatus::Converged;
            break;
        }
        mu *= options.barrier_shrink;
    }

    let x = &barrier.basis * &w;
    let (a, q) = barrier.split(&x);
    let min_eigenvalue = SymmetricEigen::new(q.clone()).eigenvalues.min();
    let diagnostics = SolveDiagnostics {
        iterations,
        stages,
        constraint_residual: (&c * &x).amax(),
        min_eigenvalue,
        kkt_residual,
        duality_gap_bound: gram_dim as f64 * mu,
    };
    Ok(SolveResult {
        objective: objective.value(&a),
        a,
        q,
        status,
        diagnostics,
    })
}

/// Minimizes the objective over `(a, Q)` with the certificate constraints and `Q >= eps I`.
pub fn solve_sdp(problem: &SdpFitProblem<'_>) -> Result<SolveResult> {
    solve_barrier(
        &problem.objective,
        problem.system,
        problem.epsilon,
        &problem.options,
    )
}

/// Degree-2 case: minimizes over symmetric `A` with `H(F) = F^T A F` and `A >= eps I`.
/// The returned `q` is `A`.
pub fn solve_quadratic_psd(
    objective: &QuadraticObjective,
    epsilon: f64,
    options: &SolverOptions,
) -> Result<SolveResult> {
    let system = SosConstraintSystem::quadratic_form();
    solve_barrier(objective, &system, epsilon, options)
}

/// Exact minimizer without convexity constraints.
pub fn solve_unconstrained(objective: &QuadraticObjective) -> Result<DVector<f64>> {
    let h = &objective.gram * 2.0;
    let ch = Cholesky::new(h)
        .ok_or_else(|| Error::Singular("objective Gram matrix is not positive definite".into()))?;
    Ok(ch.solve(&(-&objective.linear)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasible_start_scales_with_epsilon() {
        let sys = SosConstraintSystem::build(4).unwrap();
        for eps in [1e-4, 2e-4, 1e-2] {
            let (a, q) = feasible_start(&sys, eps);
            assert!(sys.residuals(&a, &q).amax() <= 1e-12);
            let lmin = SymmetricEigen::new(q.clone()).eigenvalues.min();
            assert!(lmin >= 2.0 * eps * (1.0 - 1e-12));
        }
        let (a1, _) = feasible_start(&sys, 1e-4);
        let (a2, _) = feasible_start(&sys, 2e-4);
        assert!((a2 - a1 * 2.0).amax() <= 1e-18);
    }

    #[test]
    fn null_space_is_orthonormal_and_feasible() {
        let sys = SosConstraintSystem::build(4).unwrap();
        let c = sys.constraint_matrix();
        let n = null_space(&c);
        assert_eq!(n.ncols(), sys.n_variables() - sys.len());
        assert!((&c * &n).amax() < 1e-12);
        let gram = n.transpose() * &n;
        assert!((gram - DMatrix::identity(n.ncols(), n.ncols())).amax() < 1e-12);
    }

    #[test]
    fn unconstrained_regularizer_only() {
        let obj = QuadraticObjective::regularizer(15);
        assert_eq!(solve_unconstrained(&obj).unwrap(), DVector::zeros(15));
        let singular = QuadraticObjective {
            gram: DMatrix::zeros(3, 3),
            linear: DVector::zeros(3),
            constant: 0.0,
        };
        assert!(matches!(
            solve_unconstrained(&singular),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn quad_regularizer_only_gives_smallest_feasible_a() {
        // min |a|^2 with A >= eps I: a = coefficients of eps * F.F.
        let eps = 0.01;
        let obj = QuadraticObjective::regularizer(6);
        let res = solve_quadratic_psd(&obj, eps, &SolverOptions::default()).unwrap();
        assert!(res.converged());
        let expect = PolyModel::quadratic(&(nalgebra::Matrix3::identity() * eps))
            .coeffs()
            .clone();
        assert!((res.a - expect).amax() < 1e-6);
        let lmin = SymmetricEigen::new(res.q.clone()).eigenvalues.min();
        assert!(lmin >= eps - 1e-9);
    }

    #[test]
    fn quartic_regularizer_only_optimum() {
        // min |a|^2 with Q >= eps I is attained by (eps / 4) (F.F)^2:
        // coefficient eps/4 on each F_i^4 and eps/2 on each F_i^2 F_j^2, value 15 eps^2 / 16.
        let eps = 1.0;
        let sys = SosConstraintSystem::build(4).unwrap();
        let problem = SdpFitProblem {
            objective: QuadraticObjective::regularizer(15),
            system: &sys,
            epsilon: eps,
            options: SolverOptions {
                gap_tolerance: 1e-10,
                ..SolverOptions::default()
            },
        };
        let res = solve_sdp(&problem).unwrap();
        assert!(res.converged());
        let expect = PolyModel::sphere_quartic().coeffs() * (eps / 4.0);
        assert!((&res.a - expect).amax() < 1e-6, "{}", res.a);
        assert!((res.objective - 15.0 * eps * eps / 16.0).abs() < 1e-6);
    }

    fn ring_objective() -> QuadraticObjective {
        use crate::identification::assemble_objective;
        use crate::support_oracle::{gen_dataset, gen_uniform_support, Protocol, SupportKind};
        use rand::SeedableRng;
        let cfg = gen_uniform_support(SupportKind::Ring, 36).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let ds = gen_dataset(&cfg, Protocol::Uniform, 15, &mut rng).unwrap();
        assemble_objective(
            &ds,
            &crate::poly_model::MonomialBasis::new(4).unwrap(),
            1.0,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn central_path_is_monotone_feasible_and_deterministic() {
        let sys = SosConstraintSystem::build(4).unwrap();
        let problem = SdpFitProblem {
            objective: ring_objective(),
            system: &sys,
            epsilon: 1e-4,
            options: SolverOptions::default(),
        };
        let res = solve_sdp(&problem).unwrap();
        assert!(res.converged());
        let objs: Vec<f64> = res.diagnostics.stages.iter().map(|s| s.objective).collect();
        assert!(
            objs.windows(2)
                .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0)),
            "{objs:?}"
        );
        assert!(res.diagnostics.constraint_residual <= 1e-10);
        assert!(res.diagnostics.min_eigenvalue > 1e-4);
        let again = solve_sdp(&problem).unwrap();
        assert_eq!(again.a, res.a);
        assert_eq!(again.q, res.q);
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = SosConstraintSystem::build(4).unwrap();
        let problem = SdpFitProblem {
            objective: QuadraticObjective::regularizer(15),
            system: &sys,
            epsilon: 0.0,
            options: SolverOptions::default(),
        };
        assert!(solve_sdp(&problem).is_err());
        let problem = SdpFitProblem {
            objective: QuadraticObjective::regularizer(6),
            epsilon: 1e-4,
            ..problem
        };
        assert!(solve_sdp(&problem).is_err());
    }
}
