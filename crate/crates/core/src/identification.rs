//! Fitting limit-surface models to `(F, V)` pairs.
//!
//! For coefficients `a`, pair `i` contributes
//!
//! - `alpha_i = |(I - V_i V_i^T) grad H(F_i)|^2`, the gradient component
//!   orthogonal to the observed twist, and
//! - `beta_i = (H(F_i) - 1)^2`, the level-set residual.
//!
//! Both are quadratic in `a`, so the objective
//! `|a|^2 + sum(eta1 alpha_i + eta2 beta_i)` is a plain quadratic form that is
//! handed to the unconstrained, PSD or sum-of-squares solver depending on the
//! model kind. Weights are picked by validation angular error.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::angular_error;
use crate::inversion::UNIT_TOLERANCE;
use crate::poly_model::{Certificate, ModelKind, MonomialBasis, PolyModel};
use crate::solver::{
    solve_quadratic_psd, solve_sdp, solve_unconstrained, QuadraticObjective, SdpFitProblem,
    SolveDiagnostics, SolverOptions,
};
use crate::sos::{verify_certificate, CertificateReport, SosConstraintSystem};
use crate::support_oracle::Dataset;

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_WEIGHTS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
/// Random points used to check the certificate identity after each fit.
const IDENTITY_SAMPLES: usize = 100;

pub fn default_cv_grid() -> Vec<(f64, f64)> {
    DEFAULT_WEIGHTS
        .iter()
        .flat_map(|&e1| DEFAULT_WEIGHTS.iter().map(move |&e2| (e1, e2)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub kind: ModelKind,
    /// Convexity margin for the certified kinds.
    pub epsilon: f64,
    /// `(eta1, eta2)` candidates.
    pub cv_grid: Vec<(f64, f64)>,
    pub solver: SolverOptions,
}

impl FitConfig {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            epsilon: DEFAULT_EPSILON,
            cv_grid: default_cv_grid(),
            solver: SolverOptions::default(),
        }
    }

    pub fn with_grid(mut self, grid: Vec<(f64, f64)>) -> Self {
        self.cv_grid = grid;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.cv_grid.is_empty() {
            return Err(Error::InvalidParameter("empty weight grid".into()));
        }
        if self
            .cv_grid
            .iter()
            .any(|&(a, b)| !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "weights must be positive and finite".into(),
            ));
        }
        if self.kind.is_certified() && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "convexity margin must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Outcome of one `(eta1, eta2)` candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub eta1: f64,
    pub eta2: f64,
    /// Mean validation angular error in degrees, or the reason the fit failed.
    pub outcome: std::result::Result<f64, String>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: PolyModel,
    pub kind: ModelKind,
    pub eta1: f64,
    pub eta2: f64,
    pub train_error_deg: f64,
    pub validation_error_deg: f64,
    pub grid: Vec<GridPoint>,
    /// Solver diagnostics for the constrained kinds.
    pub diagnostics: Option<SolveDiagnostics>,
    pub certificate_report: Option<CertificateReport>,
}

fn check_unit_twists(ds: &Dataset) -> Result<()> {
    for p in &ds.pairs {
        let norm = p.twist.norm();
        if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NonUnitVelocity { norm });
        }
    }
    Ok(())
}

/// Gram matrix, linear term and constant of the fitting objective.
pub fn assemble_objective(
    train: &Dataset,
    basis: &MonomialBasis,
    eta1: f64,
    eta2: f64,
) -> Result<QuadraticObjective> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_unit_twists(train)?;
    let m = basis.len();
    let mut gram = DMatrix::identity(m, m);
    let mut linear = DVector::zeros(m);
    for p in &train.pairs {
        let f = p.load.0;
        let v = p.twist.0;
        let g = basis.gradient_features(&f);
        let proj = Matrix3::identity() - v * v.transpose();
        gram += (g.transpose() * proj * &g) * eta1;
        let phi = basis.features(&f);
        gram += (&phi * phi.transpose()) * eta2;
        linear -= phi * (2.0 * eta2);
    }
    // Symmetrize away rounding from the products above.
    let gram = (&gram + gram.transpose()) * 0.5;
    Ok(QuadraticObjective {
        gram,
        linear,
        constant: eta2 * train.len() as f64,
    })
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn quartic_system() -> &'static SosConstraintSystem {
    static SYSTEM: OnceLock<SosConstraintSystem> = OnceLock::new();
    SYSTEM.get_or_init(|| SosConstraintSystem::build(4).expect("degree-4 system"))
}

struct Candidate {
    model: PolyModel,
    diagnostics: Option<SolveDiagnostics>,
    report: Option<CertificateReport>,
}

fn fit_candidate(train: &Dataset, cfg: &FitConfig, eta1: f64, eta2: f64) -> Result<Candidate> {
    let degree = cfg.kind.degree();
    let basis = MonomialBasis::new(degree)?;
    let objective = assemble_objective(train, &basis, eta1, eta2)?;
    let (coeffs, gram, diagnostics) = match cfg.kind {
        ModelKind::Poly4 => (solve_unconstrained(&objective)?, None, None),
        ModelKind::Poly4Cvx => {
            let problem = SdpFitProblem {
                objective,
                system: quartic_system(),
                epsilon: cfg.epsilon,
                options: cfg.solver,
            };
            let r = solve_sdp(&problem)?;
            if !r.converged() {
                return Err(Error::FitFailed(format!(
                    "solver stopped with {:?}",
                    r.status
                )));
            }
            (r.a, Some(r.q), Some(r.diagnostics))
        }
        ModelKind::Quad => {
            let r = solve_quadratic_psd(&objective, cfg.epsilon, &cfg.solver)?;
            if !r.converged() {
                return Err(Error::FitFailed(format!(
                    "solver stopped with {:?}",
                    r.status
                )));
            }
            (r.a, Some(r.q), Some(r.diagnostics))
        }
    };
    let mut model = PolyModel::new(degree, coeffs)?;
    let mut report = None;
    if let Some(gram) = gram {
        let system = match cfg.kind {
            ModelKind::Poly4Cvx => quartic_system().clone(),
            _ => SosConstraintSystem::quadratic_form(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = verify_certificate(
            &system,
            model.coeffs(),
            &gram,
            cfg.epsilon,
            IDENTITY_SAMPLES,
            &mut rng,
        );
        if !r.passed() {
            return Err(Error::FitFailed(format!(
                "certificate check failed: {}",
                r.failures.join("; ")
            )));
        }
        report = Some(r);
        model = model.with_certificate(Certificate {
            gram,
            epsilon: cfg.epsilon,
        });
    }
    Ok(Candidate {
        model,
        diagnostics,
        report,
    })
}

/// Fits one model kind, choosing `(eta1, eta2)` by mean validation angular
/// error. With an empty validation set the training error is used instead.
pub fn fit(train: &Dataset, validation: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_unit_twists(train)?;
    check_unit_twists(validation)?;
    if train.pairs.iter().any(|p| !p.load.is_finite()) {
        return Err(Error::InvalidParameter(
            "non-finite load in training data".into(),
        ));
    }

    // Fitting in units where the typical load is 1 keeps the level-set term
    // comparable to the regularizer whatever the data units are.
    let scale = median(train.pairs.iter().map(|p| p.load.0.norm()).collect());
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let normalized = train.scale_loads(1.0 / scale);
    let selection_set = if validation.is_empty() {
        train
    } else {
        validation
    };

    let candidates: Vec<(f64, f64, Result<(Candidate, f64)>)> = cfg
        .cv_grid
        .par_iter()
        .map(|&(eta1, eta2)| {
            let outcome = fit_candidate(&normalized, cfg, eta1, eta2).and_then(|c| {
                let err = angular_error(&c.model, selection_set)?.mean_deg;
                Ok((c, err))
            });
            (eta1, eta2, outcome)
        })
        .collect();

    let mut grid = Vec::with_capacity(candidates.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (eta1, eta2, outcome)) in candidates.iter().enumerate() {
        let recorded = match outcome {
            Ok((_, err)) => {
                if best.is_none_or(|(_, e)| *err < e) {
                    best = Some((i, *err));
                }
                Ok(*err)
            }
            Err(e) => Err(e.to_string()),
        };
        grid.push(GridPoint {
            eta1: *eta1,
            eta2: *eta2,
            outcome: recorded,
        });
    }
    let Some((best_index, selection_error)) = best else {
        let reasons: Vec<String> = grid
            .iter()
            .filter_map(|g| g.outcome.clone().err())
            .collect();
        return Err(Error::FitFailed(format!(
            "every weight pair failed: {}",
            reasons.join(" | ")
        )));
    };
    let (eta1, eta2, outcome) = candidates
        .into_iter()
        .nth(best_index)
        .expect("index in range");
    let (candidate, _) = outcome.expect("selected candidate succeeded");

    let d = cfg.kind.degree() as f64;
    let level = median(
        normalized
            .pairs
            .iter()
            .map(|p| candidate.model.evaluate(&p.load.0))
            .collect(),
    );
    let load_scale = if level > 0.0 && level.is_finite() {
        scale * level.powf(1.0 / d)
    } else {
        scale
    };
    let rho = train.metadata.rho;
    let model = candidate
        .model
        .with_load_scale(load_scale)?
        .with_rho(if rho > 0.0 { rho } else { 1.0 })?;

    let train_error_deg = angular_error(&model, train)?.mean_deg;
    let validation_error_deg = if validation.is_empty() {
        train_error_deg
    } else {
        selection_error
    };
    Ok(FitResult {
        model,
        kind: cfg.kind,
        eta1,
        eta2,
        train_error_deg,
        validation_error_deg,
        grid,
        diagnostics: candidate.diagnostics,
        certificate_report: candidate.report,
    })
}

/// Fits every requested kind on the same split.
pub fn cross_validate(
    train: &Dataset,
    validation: &Dataset,
    kinds: &[ModelKind],
    grid: &[(f64, f64)],
    epsilon: f64,
) -> Vec<(ModelKind, Result<FitResult>)> {
    kinds
        .iter()
        .map(|&kind| {
            let cfg = FitConfig::new(kind)
                .with_grid(grid.to_vec())
                .with_epsilon(epsilon);
            (kind, fit(train, validation, &cfg))
        })
        .collect()
}
