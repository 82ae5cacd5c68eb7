//! Stable two-point pushing.
//!
//! A push about a center of rotation is stable when the friction load the
//! object needs for that motion, `H_inv(V)`, lies in the cone of wrenches the
//! two pusher contacts can apply.

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::inversion::{invert, InversionOptions};
use crate::poly_model::PolyModel;
use crate::wrench_space::GeneralizedVelocity;

/// NNLS residual at or below which a load counts as inside the cone.
pub const CONE_TOLERANCE: f64 = 1e-6;

/// Two point contacts on a flat pusher edge, in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushContact {
    p1: Vector2<f64>,
    p2: Vector2<f64>,
    normal: Vector2<f64>,
    mu: f64,
}

impl PushContact {
    /// `normal` points into the object and must be unit length.
    pub fn new(p1: Vector2<f64>, p2: Vector2<f64>, normal: Vector2<f64>, mu: f64) -> Result<Self> {
        if !(p1
            .iter()
            .chain(p2.iter())
            .chain(normal.iter())
            .all(|v| v.is_finite()))
        {
            return Err(invalid("contact geometry must be finite"));
        }
        if p1 == p2 {
            return Err(invalid("push contacts must be distinct"));
        }
        if (normal.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid(format!(
                "contact normal must be unit length, got {}",
                normal.norm()
            )));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(format!(
                "contact friction must be non-negative, got {mu}"
            )));
        }
        Ok(Self { p1, p2, normal, mu })
    }

    pub fn points(&self) -> [Vector2<f64>; 2] {
        [self.p1, self.p2]
    }

    pub fn normal(&self) -> Vector2<f64> {
        self.normal
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Instantaneous motion of the pushed object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Cor {
    /// Rotation about `(cx, cy)` with angular rate of sign `sense`.
    Rotation { cx: f64, cy: f64, sense: i8 },
    /// Translation along `(dx, dy)`, the limit of a COR at infinity.
    Translation { dx: f64, dy: f64 },
}

/// Unit twist of the motion described by `cor`.
pub fn cor_to_twist(cor: &Cor, rho: f64) -> Result<GeneralizedVelocity> {
    let v = match *cor {
        Cor::Rotation { cx, cy, sense } => {
            if sense != 1 && sense != -1 {
                return Err(invalid(format!(
                    "rotation sense must be +1 or -1, got {sense}"
                )));
            }
            let s = f64::from(sense);
            Vector3::new(s * cy, -s * cx, s * rho)
        }
        Cor::Translation { dx, dy } => Vector3::new(dx, dy, 0.0),
    };
    GeneralizedVelocity(v).unit()
}

/// Edge wrenches `n +- mu t` at both contacts, as `(fx, fy, (p x f) / rho)`.
/// Frictionless contacts give two generators instead of four.
pub fn composite_cone(contact: &PushContact, rho: f64) -> Vec<Vector3<f64>> {
    let n = contact.normal;
    let t = Vector2::new(-n.y, n.x);
    let edges: Vec<Vector2<f64>> = if contact.mu == 0.0 {
        vec![n]
    } else {
        vec![n + t * contact.mu, n - t * contact.mu]
    };
    contact
        .points()
        .iter()
        .flat_map(|p| {
            edges
                .iter()
                .map(move |f| Vector3::new(f.x, f.y, (p.x * f.y - p.y * f.x) / rho))
        })
        .collect()
}

/// Distance from `target` to the cone spanned by `generators`, with the
/// minimizing weights. Exact: every subset with independent columns is solved
/// by least squares and the best nonnegative solution is kept.
pub fn cone_distance(generators: &[Vector3<f64>], target: &Vector3<f64>) -> (f64, Vec<f64>) {
    let k = generators.len();
    let mut best = (target.norm(), vec![0.0; k]);
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        if idx.len() > 3 {
            continue;
        }
        let w = DMatrix::from_fn(3, idx.len(), |r, c| generators[idx[c]][r]);
        let svd = w.clone().svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() <= 1e-12 * smax.max(1.0) {
            continue;
        }
        let Ok(lambda) = svd.solve(&DVector::from_column_slice(target.as_slice()), 0.0) else {
            continue;
        };
        if lambda.iter().any(|l| *l < 0.0) {
            continue;
        }
        let residual = (&w * &lambda - DVector::from_column_slice(target.as_slice())).norm();
        if residual < best.0 {
            let mut full = vec![0.0; k];
            for (j, &i) in idx.iter().enumerate() {
                full[i] = lambda[j];
            }
            best = (residual, full);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushVerdict {
    pub stable: bool,
    /// Distance of the unit friction load from the contact cone.
    pub margin: f64,
    pub twist: Vector3<f64>,
    /// Friction load on the 1-level set, in model units.
    pub load: Vector3<f64>,
}

/// Whether the pusher contacts can supply the friction load required to move
/// the object about `cor`. Depends only on the direction of the load, so the
/// model's load scale does not matter.
pub fn is_stable_push(model: &PolyModel, contact: &PushContact, cor: &Cor) -> Result<PushVerdict> {
    let rho = model.rho();
    let twist = cor_to_twist(cor, rho)?;
    let load = invert(model, &twist.0, &InversionOptions::default())?;
    let cone = composite_cone(contact, rho);
    let (margin, _) = cone_distance(&cone, &load.normalize());
    Ok(PushVerdict {
        stable: margin <= CONE_TOLERANCE,
        margin,
        twist: twist.0,
        load,
    })
}

/// Both rotation senses about `(cx, cy)`, positive sense first.
pub fn classify_cor(
    model: &PolyModel,
    contact: &PushContact,
    cx: f64,
    cy: f64,
) -> Result<[PushVerdict; 2]> {
    Ok([
        is_stable_push(model, contact, &Cor::Rotation { cx, cy, sense: 1 })?,
        is_stable_push(model, contact, &Cor::Rotation { cx, cy, sense: -1 })?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bottom_edge(mu: f64) -> PushContact {
        PushContact::new(
            Vector2::new(-0.025, -0.05),
            Vector2::new(0.025, -0.05),
            Vector2::new(0.0, 1.0),
            mu,
        )
        .unwrap()
    }

    /// Projected gradient on the weights; slow but independent of the subset search.
    fn projected_gradient_distance(gens: &[Vector3<f64>], target: &Vector3<f64>) -> f64 {
        let w = DMatrix::from_fn(3, gens.len(), |r, c| gens[c][r]);
        let t = DVector::from_column_slice(target.as_slice());
        let step = 1.0 / (w.transpose() * &w).symmetric_eigenvalues().max();
        let mut l = DVector::zeros(gens.len());
        for _ in 0..200_000 {
            let g = w.transpose() * (&w * &l - &t);
            l = (&l - g * step).map(|v| v.max(0.0));
        }
        (&w * l - t).norm()
    }

    #[test]
    fn cor_twists() {
        let v = cor_to_twist(
            &Cor::Rotation {
                cx: 0.0,
                cy: 0.0,
                sense: 1,
            },
            1.0,
        )
        .unwrap();
        assert!((v.0 - Vector3::new(0.0, 0.0, 1.0)).amax() <= 1e-15);
        let v = cor_to_twist(
            &Cor::Rotation {
                cx: 1.0,
                cy: 0.0,
                sense: 1,
            },
            1.0,
        )
        .unwrap();
        assert!((v.0 - Vector3::new(0.0, -1.0, 1.0) / 2f64.sqrt()).amax() <= 1e-15);
        assert!(cor_to_twist(
            &Cor::Rotation {
                cx: 0.0,
                cy: 0.0,
                sense: 0
            },
            1.0
        )
        .is_err());
    }

    #[test]
    fn far_cor_approaches_translation() {
        // A COR far below the body with positive sense moves the origin along -x.
        let v = cor_to_twist(
            &Cor::Rotation {
                cx: 0.0,
                cy: -1e6,
                sense: 1,
            },
            1.0,
        )
        .unwrap();
        assert!((v.0 - Vector3::new(-1.0, 0.0, 0.0)).norm() <= 2e-6);
    }

    #[test]
    fn cone_geometry() {
        let frictionless = composite_cone(&bottom_edge(0.0), 0.05);
        assert_eq!(frictionless.len(), 2);
        let cone = composite_cone(&bottom_edge(1.0), 0.05);
        assert_eq!(cone.len(), 4);
        for w in &cone {
            assert!(w.x * 0.0 + w.y * 1.0 > 0.0);
        }
        let (d, _) = cone_distance(&cone, &Vector3::new(0.0, 1.0, 0.0));
        assert!(d <= 1e-12);
    }

    #[test]
    fn cone_distance_matches_projected_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let gens: Vec<Vector3<f64>> = (0..4)
                .map(|_| Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
                .collect();
            let target = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let (exact, lambda) = cone_distance(&gens, &target);
            assert!(lambda.iter().all(|l| *l >= 0.0));
            let oracle = projected_gradient_distance(&gens, &target);
            assert!((exact - oracle).abs() <= 1e-6, "{exact} vs {oracle}");
        }
    }

    #[test]
    fn analytic_stable_and_unstable_cases() {
        let model = PolyModel::quadratic(&Matrix3::identity())
            .with_rho(0.05)
            .unwrap();
        let stable = is_stable_push(
            &model,
            &bottom_edge(1.0),
            &Cor::Translation { dx: 0.0, dy: 1.0 },
        )
        .unwrap();
        assert!(stable.stable);
        let contact = bottom_edge(0.0);
        let p = contact.points()[0];
        for sense in [1, -1] {
            let v = is_stable_push(
                &model,
                &contact,
                &Cor::Rotation {
                    cx: p.x,
                    cy: p.y,
                    sense,
                },
            )
            .unwrap();
            assert!(!v.stable);
            assert!(v.margin > 1e-3);
        }
    }

    #[test]
    fn classification_ignores_load_scale() {
        let base = PolyModel::quadratic(&Matrix3::new(1.0, 0.1, 0.0, 0.1, 1.5, 0.2, 0.0, 0.2, 0.8))
            .with_rho(0.05)
            .unwrap();
        let scaled = base.clone().with_load_scale(10.0).unwrap();
        let contact = bottom_edge(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..60 {
            let (cx, cy) = (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            let a = classify_cor(&base, &contact, cx, cy).unwrap();
            let b = classify_cor(&scaled, &contact, cx, cy).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.stable, y.stable);
            }
        }
    }
}
