//! Ground-truth limit surfaces from point supports with Coulomb friction.
//!
//! Every support point contributes `mu * p_i` times the unit direction of its
//! own velocity. Summing the forces and their moments about the body origin
//! gives the load a twist produces. A twist that leaves one point at rest is a
//! rotation about that point: the friction there is indeterminate and the
//! matching loads fill a flat facet of the surface, which [`sample_facet`]
//! samples.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::wrench_space::{GeneralizedLoad, GeneralizedVelocity};

/// Relative point-velocity magnitude below which a twist counts as a facet twist.
pub const POINT_VELOCITY_TOLERANCE: f64 = 1e-12;

/// Minimum separation between two sampled legged support points.
pub const MIN_LEG_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub rx: f64,
    pub ry: f64,
    pub pressure: f64,
}

impl SupportPoint {
    pub fn new(rx: f64, ry: f64, pressure: f64) -> Self {
        Self { rx, ry, pressure }
    }

    fn position(&self) -> Vector2<f64> {
        Vector2::new(self.rx, self.ry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportKind {
    Ring,
    Square,
    Legged,
    Custom,
}

impl SupportKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SupportKind::Ring => "ring",
            SupportKind::Square => "square",
            SupportKind::Legged => "legged",
            SupportKind::Custom => "custom",
        }
    }
}

/// Point supports with pressures summing to one and center of pressure at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportConfig {
    pub kind: SupportKind,
    pub points: Vec<SupportPoint>,
    pub mu: f64,
    pub rho: f64,
}

impl SupportConfig {
    /// Normalizes pressures to sum to one and translates the points so the
    /// center of pressure sits at the origin. `rho` defaults to the
    /// pressure-weighted radius of gyration.
    pub fn normalized(kind: SupportKind, points: Vec<SupportPoint>, mu: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("support needs at least one point"));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(format!(
                "friction coefficient must be non-negative, got {mu}"
            )));
        }
        if points
            .iter()
            .any(|p| !(p.pressure >= 0.0) || !p.rx.is_finite() || !p.ry.is_finite())
        {
            return Err(invalid(
                "support pressures must be non-negative and positions finite",
            ));
        }
        let total: f64 = points.iter().map(|p| p.pressure).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(invalid("total support pressure must be positive"));
        }
        let scaled: Vec<SupportPoint> = points
            .iter()
            .map(|p| SupportPoint::new(p.rx, p.ry, p.pressure / total))
            .collect();
        let cop = scaled
            .iter()
            .fold(Vector2::zeros(), |acc, p| acc + p.position() * p.pressure);
        let points: Vec<SupportPoint> = scaled
            .into_iter()
            .map(|p| SupportPoint::new(p.rx - cop.x, p.ry - cop.y, p.pressure))
            .collect();
        let gyration = points
            .iter()
            .map(|p| p.pressure * (p.rx * p.rx + p.ry * p.ry))
            .sum::<f64>()
            .sqrt();
        let rho = if gyration > 0.0 { gyration } else { 1.0 };
        Ok(Self {
            kind,
            points,
            mu,
            rho,
        })
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid(format!(
                "characteristic length must be positive, got {rho}"
            )));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn total_pressure(&self) -> f64 {
        self.points.iter().map(|p| p.pressure).sum()
    }

    pub fn center_of_pressure(&self) -> Vector2<f64> {
        self.points
            .iter()
            .fold(Vector2::zeros(), |acc, p| acc + p.position() * p.pressure)
    }

    /// Indices of points that can act as a facet pivot.
    pub fn pivots(&self) -> Vec<usize> {
        (0..self.points.len())
            .filter(|&i| self.points[i].pressure > 0.0)
            .collect()
    }

    fn contribution(&self, r: Vector2<f64>, force: Vector2<f64>) -> Vector3<f64> {
        Vector3::new(force.x, force.y, (r.x * force.y - r.y * force.x) / self.rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPair {
    pub load: GeneralizedLoad,
    pub twist: GeneralizedVelocity,
}

impl DataPair {
    pub fn new(load: GeneralizedLoad, twist: GeneralizedVelocity) -> Self {
        Self { load, twist }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRecord {
    pub kind: SupportKind,
    /// `[rx, ry, pressure]` per point.
    pub points: Vec<[f64; 3]>,
}

/// Provenance of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub rho: f64,
    pub mu: f64,
    pub sigma: f64,
    pub seed: Option<u64>,
    pub support: Option<SupportRecord>,
}

impl DatasetMeta {
    pub fn sensor(rho: f64) -> Self {
        Self {
            rho,
            mu: 1.0,
            sigma: 0.0,
            seed: None,
            support: None,
        }
    }

    fn from_config(cfg: &SupportConfig) -> Self {
        Self {
            rho: cfg.rho,
            mu: cfg.mu,
            sigma: 0.0,
            seed: None,
            support: Some(SupportRecord {
                kind: cfg.kind,
                points: cfg
                    .points
                    .iter()
                    .map(|p| [p.rx, p.ry, p.pressure])
                    .collect(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub pairs: Vec<DataPair>,
    pub metadata: DatasetMeta,
}

impl Dataset {
    pub fn new(pairs: Vec<DataPair>, metadata: DatasetMeta) -> Self {
        Self { pairs, metadata }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            pairs: indices.iter().map(|&i| self.pairs[i]).collect(),
            metadata: self.metadata.clone(),
        }
    }

    /// Multiplies every load by `factor`.
    pub fn scale_loads(&self, factor: f64) -> Dataset {
        Dataset {
            pairs: self
                .pairs
                .iter()
                .map(|p| DataPair::new(GeneralizedLoad(p.load.0 * factor), p.twist))
                .collect(),
            metadata: self.metadata.clone(),
        }
    }
}

/// Load produced by sliding the support with twist `twist`.
pub fn load_for_twist(cfg: &SupportConfig, twist: &GeneralizedVelocity) -> Result<GeneralizedLoad> {
    let scale = twist.norm();
    if scale == 0.0 {
        return Err(Error::ZeroTwist);
    }
    let omega = twist.vz() / cfg.rho;
    let mut total = Vector3::zeros();
    for (index, p) in cfg.points.iter().enumerate() {
        let v = Vector2::new(twist.vx() - omega * p.ry, twist.vy() + omega * p.rx);
        let speed = v.norm();
        if speed < POINT_VELOCITY_TOLERANCE * scale {
            return Err(Error::FacetDegeneracy { index });
        }
        let force = v * (cfg.mu * p.pressure / speed);
        total += cfg.contribution(p.position(), force);
    }
    Ok(GeneralizedLoad(total))
}

/// Unit twist of a rotation about support point `pivot`; `sense` +1 is counterclockwise.
pub fn facet_twist(cfg: &SupportConfig, pivot: usize, sense: i8) -> Result<GeneralizedVelocity> {
    let p = cfg
        .points
        .get(pivot)
        .ok_or_else(|| invalid(format!("pivot index {pivot} out of range")))?;
    let w = sense_sign(sense)?;
    GeneralizedVelocity::new(w * p.ry, -w * p.rx, w * cfg.rho).unit()
}

/// Facet load with a given friction force at the pivot.
///
/// `pivot_force` must lie in the disk of radius `mu * p_pivot`; it is not clamped.
pub fn facet_pair_with_pivot_force(
    cfg: &SupportConfig,
    pivot: usize,
    sense: i8,
    pivot_force: Vector2<f64>,
) -> Result<DataPair> {
    let twist = facet_twist(cfg, pivot, sense)?;
    let pivot_point = cfg.points[pivot];
    if pivot_point.pressure <= 0.0 {
        return Err(Error::DegenerateFacet(format!(
            "pivot {pivot} carries no pressure"
        )));
    }
    let omega = twist.vz() / cfg.rho;
    let mut total = cfg.contribution(pivot_point.position(), pivot_force);
    for (index, p) in cfg.points.iter().enumerate() {
        if index == pivot {
            continue;
        }
        let v = Vector2::new(twist.vx() - omega * p.ry, twist.vy() + omega * p.rx);
        let speed = v.norm();
        if speed < POINT_VELOCITY_TOLERANCE {
            return Err(Error::FacetDegeneracy { index });
        }
        total += cfg.contribution(p.position(), v * (cfg.mu * p.pressure / speed));
    }
    Ok(DataPair::new(GeneralizedLoad(total), twist))
}

/// Samples a load uniformly on the facet of rotation about `pivot`.
pub fn sample_facet<R: Rng + ?Sized>(
    cfg: &SupportConfig,
    pivot: usize,
    sense: i8,
    rng: &mut R,
) -> Result<DataPair> {
    if cfg.points.len() < 3 {
        return Err(invalid(
            "facet sampling needs at least three support points",
        ));
    }
    let p = cfg
        .points
        .get(pivot)
        .ok_or_else(|| invalid(format!("pivot index {pivot} out of range")))?;
    if p.pressure <= 0.0 {
        return Err(Error::DegenerateFacet(format!(
            "pivot {pivot} carries no pressure"
        )));
    }
    let radius = cfg.mu * p.pressure * rng.random::<f64>().sqrt();
    let angle = 2.0 * PI * rng.random::<f64>();
    let force = Vector2::new(radius * angle.cos(), radius * angle.sin());
    facet_pair_with_pivot_force(cfg, pivot, sense, force)
}

fn sense_sign(sense: i8) -> Result<f64> {
    match sense {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(invalid(format!(
            "rotation sense must be +1 or -1, got {sense}"
        ))),
    }
}

/// Equal-pressure supports: `Ring` puts points at equal angles on the unit
/// circle, `Square` a regular `k x k` grid over `[-1, 1]^2` (`n_points = k^2`).
pub fn gen_uniform_support(kind: SupportKind, n_points: usize) -> Result<SupportConfig> {
    if n_points < 3 {
        return Err(invalid("uniform support needs at least three points"));
    }
    let pressure = 1.0 / n_points as f64;
    let points = match kind {
        SupportKind::Ring => (0..n_points)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n_points as f64;
                SupportPoint::new(a.cos(), a.sin(), pressure)
            })
            .collect(),
        SupportKind::Square => {
            let k = (n_points as f64).sqrt().round() as usize;
            if k * k != n_points || k < 2 {
                return Err(invalid(format!(
                    "square support needs a perfect square count, got {n_points}"
                )));
            }
            let coord = |i: usize| -1.0 + 2.0 * i as f64 / (k - 1) as f64;
            (0..k)
                .flat_map(|i| (0..k).map(move |j| (i, j)))
                .map(|(i, j)| SupportPoint::new(coord(j), coord(i), pressure))
                .collect()
        }
        other => {
            return Err(invalid(format!(
                "{} is not a uniform support kind",
                other.as_str()
            )))
        }
    };
    SupportConfig::normalized(kind, points, 1.0)
}

/// Three points uniform on the unit circle with pressures uniform on the simplex.
pub fn gen_legged_support<R: Rng + ?Sized>(rng: &mut R) -> SupportConfig {
    loop {
        let angles: [f64; 3] = std::array::from_fn(|_| 2.0 * PI * rng.random::<f64>());
        let weights: [f64; 3] = std::array::from_fn(|_| -(1.0 - rng.random::<f64>()).ln());
        let positions: Vec<Vector2<f64>> = angles
            .iter()
            .map(|a| Vector2::new(a.cos(), a.sin()))
            .collect();
        let too_close = (0..3).any(|i| {
            ((i + 1)..3).any(|j| (positions[i] - positions[j]).norm() < MIN_LEG_SEPARATION)
        });
        if too_close || weights.iter().any(|w| !(*w > 0.0)) {
            continue;
        }
        let points = positions
            .iter()
            .zip(weights)
            .map(|(r, w)| SupportPoint::new(r.x, r.y, w))
            .collect();
        if let Ok(cfg) = SupportConfig::normalized(SupportKind::Legged, points, 1.0) {
            return cfg;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    /// Twists uniform on the unit sphere.
    Uniform,
    /// Half facet samples, half uniform twists.
    Legged,
}

/// Isotropic unit twist from a normalized Gaussian draw.
pub fn random_unit_twist<R: Rng + ?Sized>(rng: &mut R) -> GeneralizedVelocity {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return GeneralizedVelocity(v / n);
        }
    }
}

pub fn gen_dataset<R: Rng + ?Sized>(
    cfg: &SupportConfig,
    protocol: Protocol,
    n: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if n < 2 {
        return Err(invalid("dataset needs at least two pairs"));
    }
    let mut pairs = Vec::with_capacity(n);
    if protocol == Protocol::Legged {
        let pivots = cfg.pivots();
        if pivots.is_empty() || cfg.points.len() < 3 {
            return Err(Error::DegenerateFacet("support has no facets".into()));
        }
        let facets: Vec<(usize, i8)> = pivots.iter().flat_map(|&p| [(p, 1i8), (p, -1i8)]).collect();
        let n_facet = n / 2;
        for k in 0..n_facet {
            let (pivot, sense) = facets[k % facets.len()];
            pairs.push(sample_facet(cfg, pivot, sense, rng)?);
        }
    }
    while pairs.len() < n {
        let twist = random_unit_twist(rng);
        match load_for_twist(cfg, &twist) {
            Ok(load) => pairs.push(DataPair::new(load, twist)),
            Err(Error::FacetDegeneracy { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(Dataset::new(pairs, DatasetMeta::from_config(cfg)))
}

/// Adds i.i.d. Gaussian noise to every load and twist component and
/// renormalizes the twists.
pub fn add_noise<R: Rng + ?Sized>(ds: &Dataset, sigma: f64, rng: &mut R) -> Result<Dataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!(
            "noise level must be non-negative, got {sigma}"
        )));
    }
    let mut out = ds.clone();
    out.metadata.sigma = sigma;
    if sigma == 0.0 {
        return Ok(out);
    }
    let draw = |rng: &mut R| -> Vector3<f64> {
        Vector3::from_fn(|_, _| sigma * Distribution::<f64>::sample(&StandardNormal, rng))
    };
    for pair in &mut out.pairs {
        pair.load = GeneralizedLoad(pair.load.0 + draw(rng));
        let twist = loop {
            let v = pair.twist.0 + draw(rng);
            if v.norm() > 1e-9 {
                break v;
            }
        };
        pair.twist = GeneralizedVelocity(twist / twist.norm());
    }
    Ok(out)
}

/// Disjoint test / validation / training-pool indices and nested training subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
    pub pool: Vec<usize>,
    /// `(size, indices)`; each set is a prefix of `pool`, so smaller sets nest in larger ones.
    pub train: Vec<(usize, Vec<usize>)>,
}

impl SplitPlan {
    pub fn train_set(&self, size: usize) -> Option<&[usize]> {
        self.train
            .iter()
            .find(|(s, _)| *s == size)
            .map(|(_, idx)| idx.as_slice())
    }
}

/// Splits `n` pairs by `(test, validation, pool)` fractions.
pub fn split_dataset<R: Rng + ?Sized>(
    n: usize,
    fractions: (f64, f64, f64),
    train_sizes: &[usize],
    rng: &mut R,
) -> Result<SplitPlan> {
    let (ft, fv, fp) = fractions;
    if [ft, fv, fp].iter().any(|f| !(*f >= 0.0)) || ((ft + fv + fp) - 1.0).abs() > 1e-9 {
        return Err(invalid(format!(
            "split fractions must be non-negative and sum to 1, got {fractions:?}"
        )));
    }
    let n_test = (ft * n as f64).round() as usize;
    let n_val = (fv * n as f64).round() as usize;
    if n_test + n_val > n {
        return Err(invalid("split fractions exceed the dataset size"));
    }
    let n_pool = n - n_test - n_val;
    if let Some(&too_big) = train_sizes.iter().find(|&&s| s > n_pool) {
        return Err(invalid(format!(
            "training size {too_big} exceeds the pool of {n_pool}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let test = order[..n_test].to_vec();
    let validation = order[n_test..n_test + n_val].to_vec();
    let pool = order[n_test + n_val..].to_vec();
    let train = train_sizes
        .iter()
        .map(|&s| (s, pool[..s].to_vec()))
        .collect();
    Ok(SplitPlan {
        test,
        validation,
        pool,
        train,
    })
}
