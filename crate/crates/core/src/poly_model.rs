//! Even-degree homogeneous polynomials in the generalized load.
//!
//! A model `H(F; a) = sum_i a_i Fx^i1 Fy^i2 Fz^i3` describes the set of
//! admissible loads as `H <= 1` and predicts the sliding direction as the
//! normalized gradient. Coefficients are linear in every quantity computed
//! here, so the feature maps (`features`, `gradient_features`) double as the
//! design matrices used by the identification objective.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3xX, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Exponent triples of all degree-`d` monomials in graded-lex order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    degree: u32,
    exponents: Vec<[u32; 3]>,
}

impl MonomialBasis {
    pub fn new(degree: u32) -> Result<Self> {
        if degree == 0 || degree % 2 == 1 {
            return Err(Error::UnsupportedDegree(degree));
        }
        let mut exponents = Vec::with_capacity(((degree + 2) * (degree + 1) / 2) as usize);
        for i1 in (0..=degree).rev() {
            for i2 in (0..=degree - i1).rev() {
                exponents.push([i1, i2, degree - i1 - i2]);
            }
        }
        Ok(Self { degree, exponents })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn exponents(&self) -> &[[u32; 3]] {
        &self.exponents
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn index_of(&self, e: [u32; 3]) -> Option<usize> {
        self.exponents.iter().position(|x| *x == e)
    }

    fn powers(&self, f: &Vector3<f64>) -> [Vec<f64>; 3] {
        std::array::from_fn(|k| {
            let mut p = Vec::with_capacity(self.degree as usize + 1);
            p.push(1.0);
            for j in 1..=self.degree as usize {
                p.push(p[j - 1] * f[k]);
            }
            p
        })
    }

    /// Monomial values at `f`, so that `H(f) = a . features(f)`.
    pub fn features(&self, f: &Vector3<f64>) -> DVector<f64> {
        let p = self.powers(f);
        DVector::from_iterator(
            self.len(),
            self.exponents
                .iter()
                .map(|e| p[0][e[0] as usize] * p[1][e[1] as usize] * p[2][e[2] as usize]),
        )
    }

    /// `3 x m` matrix `J` with `grad H(f) = J a`.
    pub fn gradient_features(&self, f: &Vector3<f64>) -> Matrix3xX<f64> {
        let p = self.powers(f);
        let mut out = Matrix3xX::zeros(self.len());
        for (col, e) in self.exponents.iter().enumerate() {
            for k in 0..3 {
                if e[k] == 0 {
                    continue;
                }
                let mut d = *e;
                d[k] -= 1;
                out[(k, col)] =
                    e[k] as f64 * p[0][d[0] as usize] * p[1][d[1] as usize] * p[2][d[2] as usize];
            }
        }
        out
    }

    /// Second derivatives of every monomial: entry `[col]` is the 3x3 Hessian of monomial `col`.
    pub fn hessian_features(&self, f: &Vector3<f64>) -> Vec<Matrix3<f64>> {
        let p = self.powers(f);
        self.exponents
            .iter()
            .map(|e| {
                let mut h = Matrix3::zeros();
                for k in 0..3 {
                    for l in k..3 {
                        let mut d = *e;
                        let c = if k == l {
                            if d[k] < 2 {
                                continue;
                            }
                            d[k] -= 2;
                            (e[k] * (e[k] - 1)) as f64
                        } else {
                            if d[k] == 0 || d[l] == 0 {
                                continue;
                            }
                            d[k] -= 1;
                            d[l] -= 1;
                            (e[k] * e[l]) as f64
                        };
                        let v = c * p[0][d[0] as usize] * p[1][d[1] as usize] * p[2][d[2] as usize];
                        h[(k, l)] = v;
                        h[(l, k)] = v;
                    }
                }
                h
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Degree 4 with a sum-of-squares convexity certificate.
    #[serde(rename = "poly4-cvx")]
    Poly4Cvx,
    /// Degree 4 without a convexity constraint.
    #[serde(rename = "poly4")]
    Poly4,
    /// Degree 2 with `A >= eps I`.
    #[serde(rename = "quad")]
    Quad,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Poly4Cvx, ModelKind::Poly4, ModelKind::Quad];

    pub fn degree(&self) -> u32 {
        match self {
            ModelKind::Quad => 2,
            _ => 4,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Poly4Cvx => "poly4-cvx",
            ModelKind::Poly4 => "poly4",
            ModelKind::Quad => "quad",
        }
    }

    pub fn is_certified(&self) -> bool {
        !matches!(self, ModelKind::Poly4)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poly4-cvx" => Ok(ModelKind::Poly4Cvx),
            "poly4" => Ok(ModelKind::Poly4),
            "quad" => Ok(ModelKind::Quad),
            other => Err(invalid(format!("unknown model kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Gram matrix certifying convexity, and the margin it was fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub gram: DMatrix<f64>,
    pub epsilon: f64,
}

/// A fitted (or hand-built) homogeneous polynomial limit surface.
///
/// `load_scale` converts the model's 1-level set to data units: a measured
/// load `F` corresponds to the model load `F / load_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyModel {
    basis: MonomialBasis,
    coeffs: DVector<f64>,
    certificate: Option<Certificate>,
    load_scale: f64,
    rho: f64,
}

impl PolyModel {
    pub fn new(degree: u32, coeffs: DVector<f64>) -> Result<Self> {
        let basis = MonomialBasis::new(degree)?;
        if coeffs.len() != basis.len() {
            return Err(invalid(format!(
                "degree {degree} needs {} coefficients, got {}",
                basis.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coefficients must be finite"));
        }
        Ok(Self {
            basis,
            coeffs,
            certificate: None,
            load_scale: 1.0,
            rho: 1.0,
        })
    }

    /// `H(F) = F^T A F` for symmetric `A`.
    pub fn quadratic(a: &Matrix3<f64>) -> Self {
        let coeffs = DVector::from_vec(vec![
            a[(0, 0)],
            a[(0, 1)] + a[(1, 0)],
            a[(0, 2)] + a[(2, 0)],
            a[(1, 1)],
            a[(1, 2)] + a[(2, 1)],
            a[(2, 2)],
        ]);
        Self::new(2, coeffs).expect("quadratic coefficients")
    }

    /// `H(F) = (F . F)^2`, whose 1-level set is the unit sphere.
    pub fn sphere_quartic() -> Self {
        let basis = MonomialBasis::new(4).expect("degree 4");
        let mut coeffs = DVector::zeros(basis.len());
        for (e, c) in [
            ([4, 0, 0], 1.0),
            ([0, 4, 0], 1.0),
            ([0, 0, 4], 1.0),
            ([2, 2, 0], 2.0),
            ([2, 0, 2], 2.0),
            ([0, 2, 2], 2.0),
        ] {
            coeffs[basis.index_of(e).unwrap()] = c;
        }
        Self::new(4, coeffs).expect("quartic coefficients")
    }

    pub fn with_certificate(mut self, certificate: Certificate) -> Self {
        self.certificate = Some(certificate);
        self
    }

    pub fn with_load_scale(mut self, load_scale: f64) -> Result<Self> {
        if !(load_scale > 0.0 && load_scale.is_finite()) {
            return Err(invalid(format!(
                "load scale must be positive, got {load_scale}"
            )));
        }
        self.load_scale = load_scale;
        Ok(self)
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

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn degree(&self) -> u32 {
        self.basis.degree
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        self.certificate.as_ref()
    }

    pub fn load_scale(&self) -> f64 {
        self.load_scale
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn evaluate(&self, f: &Vector3<f64>) -> f64 {
        self.basis.features(f).dot(&self.coeffs)
    }

    pub fn gradient(&self, f: &Vector3<f64>) -> Vector3<f64> {
        self.basis.gradient_features(f) * &self.coeffs
    }

    pub fn hessian(&self, f: &Vector3<f64>) -> Matrix3<f64> {
        self.basis
            .hessian_features(f)
            .iter()
            .zip(self.coeffs.iter())
            .fold(Matrix3::zeros(), |acc, (h, c)| acc + h * *c)
    }

    /// Unit sliding direction `grad H / |grad H|` for load `f`.
    pub fn predict_velocity_direction(&self, f: &Vector3<f64>) -> Result<Vector3<f64>> {
        let g = self.gradient(f);
        let n = g.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::UndefinedDirection);
        }
        Ok(g / n)
    }

    /// Model-unit load for a load measured in data units.
    pub fn to_model_units(&self, f: &Vector3<f64>) -> Vector3<f64> {
        f / self.load_scale
    }
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk model representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ModelKind>,
    pub degree: u32,
    pub ordering: String,
    pub coeffs: Vec<f64>,
    pub epsilon: Option<f64>,
    /// Row-major Gram matrix (9x9 for degree 4, 3x3 for degree 2).
    #[serde(rename = "Q")]
    pub q: Option<Vec<Vec<f64>>>,
    pub load_scale: f64,
    pub rho: f64,
}

impl ModelFile {
    pub fn from_model(model: &PolyModel, kind: Option<ModelKind>) -> Self {
        let cert = model.certificate();
        Self {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            degree: model.degree(),
            ordering: "grlex".into(),
            coeffs: model.coeffs.iter().copied().collect(),
            epsilon: cert.map(|c| c.epsilon),
            q: cert.map(|c| {
                (0..c.gram.nrows())
                    .map(|i| c.gram.row(i).iter().copied().collect())
                    .collect()
            }),
            load_scale: model.load_scale,
            rho: model.rho,
        }
    }

    pub fn into_model(self) -> Result<PolyModel> {
        if self.ordering != "grlex" {
            return Err(invalid(format!(
                "unsupported monomial ordering '{}'",
                self.ordering
            )));
        }
        let mut model = PolyModel::new(self.degree, DVector::from_vec(self.coeffs))?
            .with_load_scale(self.load_scale)?
            .with_rho(self.rho)?;
        if let Some(rows) = self.q {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(invalid("Gram matrix must be square"));
            }
            let gram = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            let epsilon = self
                .epsilon
                .ok_or_else(|| invalid("certificate without epsilon"))?;
            model = model.with_certificate(Certificate { gram, epsilon });
        }
        Ok(model)
    }
}
