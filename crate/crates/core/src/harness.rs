//! Angular-error metric and the seeded simulation study.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::identification::{default_cv_grid, fit, FitConfig, DEFAULT_EPSILON};
use crate::inversion::UNIT_TOLERANCE;
use crate::poly_model::{ModelKind, PolyModel};
use crate::support_oracle::{
    add_noise, gen_dataset, gen_legged_support, gen_uniform_support, split_dataset, Dataset,
    Protocol, SupportConfig, SupportKind,
};

/// Angle assigned to pairs whose prediction is undefined.
pub const UNDEFINED_PENALTY_DEG: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularError {
    pub mean_deg: f64,
    /// Pairs where `grad H` vanished; each counted as 90 degrees.
    pub undefined: usize,
}

/// Mean angle in degrees between predicted and recorded twist directions.
pub fn angular_error(model: &PolyModel, test: &Dataset) -> Result<AngularError> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    let mut undefined = 0;
    for p in &test.pairs {
        let norm = p.twist.norm();
        if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NonUnitVelocity { norm });
        }
        match model.predict_velocity_direction(&p.load.0) {
            Ok(v) => total += v.dot(&p.twist.0).clamp(-1.0, 1.0).acos().to_degrees(),
            Err(Error::UndefinedDirection) => {
                undefined += 1;
                total += UNDEFINED_PENALTY_DEG;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(AngularError {
        mean_deg: total / test.len() as f64,
        undefined,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudySupport {
    /// Fresh random three-legged support per trial, half facet samples.
    Legged,
    /// Fixed equal-pressure ring.
    Ring,
    /// Fixed equal-pressure square grid.
    Square,
}

impl std::str::FromStr for StudySupport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legged" => Ok(Self::Legged),
            "ring" => Ok(Self::Ring),
            "square" => Ok(Self::Square),
            other => Err(invalid(format!("unknown support protocol '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub support: StudySupport,
    pub n_trials: usize,
    pub dataset_size: usize,
    /// `(test, validation, training pool)`.
    pub fractions: (f64, f64, f64),
    pub train_sizes: Vec<usize>,
    pub sigma: f64,
    pub kinds: Vec<ModelKind>,
    pub master_seed: u64,
    pub cv_grid: Vec<(f64, f64)>,
    pub epsilon: f64,
    /// Contact points for the ring and square supports.
    pub uniform_points: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            support: StudySupport::Legged,
            n_trials: 50,
            dataset_size: 150,
            fractions: (0.5, 0.2, 0.3),
            train_sizes: vec![7, 15, 22, 45],
            sigma: 0.1,
            kinds: ModelKind::ALL.to_vec(),
            master_seed: 0,
            cv_grid: default_cv_grid(),
            epsilon: DEFAULT_EPSILON,
            uniform_points: 360,
        }
    }
}

impl StudyConfig {
    fn fixed_support(&self) -> Result<Option<SupportConfig>> {
        match self.support {
            StudySupport::Legged => Ok(None),
            StudySupport::Ring => {
                gen_uniform_support(SupportKind::Ring, self.uniform_points).map(Some)
            }
            StudySupport::Square => {
                gen_uniform_support(SupportKind::Square, self.uniform_points).map(Some)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(invalid("study needs at least one trial"));
        }
        if self.kinds.is_empty() || self.train_sizes.is_empty() {
            return Err(invalid(
                "study needs at least one model kind and training size",
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(format!(
                "noise level must be non-negative, got {}",
                self.sigma
            )));
        }
        // Split validation also checks that every training size fits in the pool.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        split_dataset(
            self.dataset_size,
            self.fractions,
            &self.train_sizes,
            &mut rng,
        )?;
        self.fixed_support()?;
        Ok(())
    }
}

/// Per-trial RNG: one ChaCha stream per trial under the master seed.
pub fn trial_rng(master_seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyCell {
    pub kind: ModelKind,
    pub train_size: usize,
    /// `None` when no trial succeeded.
    pub mean_deg: Option<f64>,
    pub ci95_half_width_deg: Option<f64>,
    pub n_succeeded: usize,
    pub n_failed: usize,
    /// Test error per trial, `None` where the fit failed.
    pub per_trial_deg: Vec<Option<f64>>,
    /// Trials where some test prediction was undefined.
    pub trials_with_undefined: usize,
}

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub format_version: u32,
    pub config: StudyConfig,
    pub cells: Vec<StudyCell>,
    /// `(trial, kind, train size, message)` for every failed fit.
    pub failures: Vec<(usize, ModelKind, usize, String)>,
}

impl StudyReport {
    pub fn cell(&self, kind: ModelKind, train_size: usize) -> Option<&StudyCell> {
        self.cells
            .iter()
            .find(|c| c.kind == kind && c.train_size == train_size)
    }
}

/// Mean and `1.96 sd / sqrt(n)` with the sample standard deviation.
pub fn mean_and_ci95(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, 1.96 * var.sqrt() / (n as f64).sqrt()))
}

/// `(kind, size) -> Ok((error, undefined count)) | Err(message)` for one trial.
type TrialOutcome = Vec<(ModelKind, usize, std::result::Result<(f64, usize), String>)>;

fn run_trial(
    cfg: &StudyConfig,
    fixed: Option<&SupportConfig>,
    trial: usize,
) -> Result<TrialOutcome> {
    let mut rng = trial_rng(cfg.master_seed, trial);
    let (support, protocol) = match fixed {
        Some(s) => (s.clone(), Protocol::Uniform),
        None => (gen_legged_support(&mut rng), Protocol::Legged),
    };
    let data = gen_dataset(&support, protocol, cfg.dataset_size, &mut rng)?;
    let plan = split_dataset(data.len(), cfg.fractions, &cfg.train_sizes, &mut rng)?;
    let test = data.subset(&plan.test);
    let validation = add_noise(&data.subset(&plan.validation), cfg.sigma, &mut rng)?;
    // Noise is drawn once for the whole pool so nested training sets share it.
    let pool = add_noise(&data.subset(&plan.pool), cfg.sigma, &mut rng)?;

    let mut out = Vec::new();
    for &size in &cfg.train_sizes {
        let train = Dataset::new(pool.pairs[..size].to_vec(), pool.metadata.clone());
        for &kind in &cfg.kinds {
            let fit_cfg = FitConfig::new(kind)
                .with_grid(cfg.cv_grid.clone())
                .with_epsilon(cfg.epsilon);
            let outcome = fit(&train, &validation, &fit_cfg)
                .and_then(|r| angular_error(&r.model, &test))
                .map(|e| (e.mean_deg, e.undefined))
                .map_err(|e| e.to_string());
            out.push((kind, size, outcome));
        }
    }
    Ok(out)
}

/// Runs every trial in parallel; results depend only on the config.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let fixed = cfg.fixed_support()?;
    let trials: Vec<Result<TrialOutcome>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, fixed.as_ref(), t))
        .collect();
    let trials: Vec<TrialOutcome> = trials.into_iter().collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for &kind in &cfg.kinds {
        for &size in &cfg.train_sizes {
            let mut per_trial = Vec::with_capacity(trials.len());
            let mut trials_with_undefined = 0;
            for (t, outcome) in trials.iter().enumerate() {
                let (_, _, r) = outcome
                    .iter()
                    .find(|(k, s, _)| *k == kind && *s == size)
                    .expect("every trial covers every cell");
                match r {
                    Ok((err, undefined)) => {
                        if *undefined > 0 {
                            trials_with_undefined += 1;
                        }
                        per_trial.push(Some(*err));
                    }
                    Err(msg) => {
                        failures.push((t, kind, size, msg.clone()));
                        per_trial.push(None);
                    }
                }
            }
            let ok: Vec<f64> = per_trial.iter().flatten().copied().collect();
            let stats = mean_and_ci95(&ok);
            cells.push(StudyCell {
                kind,
                train_size: size,
                mean_deg: stats.map(|s| s.0),
                ci95_half_width_deg: stats.map(|s| s.1),
                n_succeeded: ok.len(),
                n_failed: per_trial.len() - ok.len(),
                per_trial_deg: per_trial,
                trials_with_undefined,
            });
        }
    }
    Ok(StudyReport {
        format_version: REPORT_FORMAT_VERSION,
        config: cfg.clone(),
        cells,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::support_oracle::{
        load_for_twist, random_unit_twist, DataPair, DatasetMeta, SupportPoint,
    };
    use crate::wrench_space::{GeneralizedLoad, GeneralizedVelocity};
    use nalgebra::{Matrix3, Vector3};

    fn pairs_from(model: &PolyModel, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs = (0..n)
            .map(|_| {
                let f = random_unit_twist(&mut rng).0;
                let v = model.predict_velocity_direction(&f).unwrap();
                DataPair::new(GeneralizedLoad(f), GeneralizedVelocity(v))
            })
            .collect();
        Dataset::new(pairs, DatasetMeta::sensor(1.0))
    }

    #[test]
    fn exact_and_orthogonal_predictions() {
        let model = PolyModel::quadratic(&Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0)));
        let ds = pairs_from(&model, 20, 1);
        assert!(angular_error(&model, &ds).unwrap().mean_deg <= 1e-6);

        let iso = PolyModel::quadratic(&Matrix3::identity());
        let ortho = Dataset::new(
            vec![DataPair::new(
                GeneralizedLoad(Vector3::new(1.0, 0.0, 0.0)),
                GeneralizedVelocity(Vector3::new(0.0, 1.0, 0.0)),
            )],
            DatasetMeta::sensor(1.0),
        );
        assert!((angular_error(&iso, &ortho).unwrap().mean_deg - 90.0).abs() <= 1e-12);
    }

    #[test]
    fn single_point_support_is_isotropic() {
        let cfg = SupportConfig::normalized(
            SupportKind::Custom,
            vec![SupportPoint::new(0.0, 0.0, 1.0)],
            0.5,
        )
        .unwrap()
        .with_rho(1.0)
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pairs = Vec::new();
        while pairs.len() < 50 {
            // Pure translations: a single point cannot resist rotation.
            let mut v = random_unit_twist(&mut rng).0;
            v.z = 0.0;
            let v = GeneralizedVelocity(v / v.norm());
            pairs.push(DataPair::new(load_for_twist(&cfg, &v).unwrap(), v));
        }
        let ds = Dataset::new(pairs, DatasetMeta::sensor(1.0));
        let iso = PolyModel::quadratic(&Matrix3::identity());
        assert!(angular_error(&iso, &ds).unwrap().mean_deg <= 1e-6);
    }

    #[test]
    fn undefined_predictions_count_as_ninety() {
        let zero = PolyModel::new(2, nalgebra::DVector::zeros(6)).unwrap();
        let ds = pairs_from(&PolyModel::sphere_quartic(), 5, 2);
        let e = angular_error(&zero, &ds).unwrap();
        assert_eq!(e.undefined, 5);
        assert_eq!(e.mean_deg, 90.0);
    }

    #[test]
    fn metric_is_symmetric_and_bounded() {
        let model =
            PolyModel::quadratic(&Matrix3::new(2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.7));
        let mut ds = pairs_from(&PolyModel::sphere_quartic(), 30, 3);
        let e = angular_error(&model, &ds).unwrap().mean_deg;
        for p in &mut ds.pairs {
            p.load.0 = -p.load.0;
            p.twist.0 = -p.twist.0;
        }
        let neg = angular_error(&model, &ds).unwrap().mean_deg;
        assert!((e - neg).abs() <= 1e-9);
        assert!((0.0..=180.0).contains(&e));
    }

    #[test]
    fn confidence_interval_closed_form() {
        let xs = [1.0, 2.0, 4.0, 7.0];
        let (m, h) = mean_and_ci95(&xs).unwrap();
        let mut direct = 0.0;
        for x in xs {
            direct += (x - 3.5f64).powi(2);
        }
        assert_eq!(m, 3.5);
        assert!((h - 1.96 * (direct / 3.0f64).sqrt() / 2.0).abs() <= 1e-12);
    }

    #[test]
    fn small_study_is_deterministic() {
        let cfg = StudyConfig {
            support: StudySupport::Ring,
            n_trials: 3,
            train_sizes: vec![7, 15],
            kinds: vec![ModelKind::Quad, ModelKind::Poly4],
            cv_grid: vec![(1.0, 1.0)],
            uniform_points: 60,
            ..StudyConfig::default()
        };
        let a = run_study(&cfg).unwrap();
        let b = run_study(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.cells.len(), 4);
        assert!(a.cells.iter().all(|c| c.per_trial_deg.len() == 3));
    }

    #[test]
    fn rejects_oversized_training_sets() {
        let cfg = StudyConfig {
            train_sizes: vec![100],
            ..StudyConfig::default()
        };
        assert!(run_study(&cfg).is_err());
    }
}
