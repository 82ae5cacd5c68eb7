//! Linear constraints tying polynomial coefficients to a Gram matrix.
//!
//! For a quartic `H(F; a)` the Hessian form `z^T grad^2 H(F; a) z` is a
//! biquadratic polynomial in `(z, F)`. Writing it as `y^T Q y` with
//! `y = z (x) F = (z1 Fx, z1 Fy, z1 Fz, z2 Fx, ..., z3 Fz)` and matching the
//! coefficient of every monomial `z_i z_k F_j F_l` gives one linear equation
//! `Tr(A_k Q) = b_k . a` per monomial. Any `Q >= eps I` satisfying them
//! certifies `grad^2 H(F) >= eps |F|^2 I`.
//!
//! The degree-2 analogue uses `Q = A` directly with `H(F) = F^T Q F`.
//!
//! Both systems are derived from the monomial basis at construction time, then
//! reduced to linearly independent rows.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::poly_model::MonomialBasis;

/// Pivot tolerance used when discarding dependent equations.
pub const ROW_REDUCTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramForm {
    /// `z^T grad^2 H z = (z (x) F)^T Q (z (x) F)`, degree 4.
    HessianKronecker,
    /// `H(F) = F^T Q F`, degree 2.
    QuadraticForm,
}

#[derive(Debug, Clone)]
pub struct SosConstraintSystem {
    form: GramForm,
    basis: MonomialBasis,
    gram_dim: usize,
    indicator_matrices: Vec<DMatrix<f64>>,
    coefficient_vectors: Vec<DVector<f64>>,
    raw_equations: usize,
}

/// Number of free entries of a symmetric `n x n` matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper-triangle entries of a symmetric matrix, row by row.
pub fn svec(q: &DMatrix<f64>) -> DVector<f64> {
    let n = q.nrows();
    let mut out = DVector::zeros(svec_len(n));
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            out[k] = q[(i, j)];
            k += 1;
        }
    }
    out
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            q[(i, j)] = v[k];
            q[(j, i)] = v[k];
            k += 1;
        }
    }
    q
}

/// Coefficients `c` with `c . svec(Q) = Tr(A Q)` for symmetric `A`, `Q`.
fn trace_row(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut out = DVector::zeros(svec_len(n));
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            out[k] = if i == j {
                a[(i, j)]
            } else {
                a[(i, j)] + a[(j, i)]
            };
            k += 1;
        }
    }
    out
}

fn sorted(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl SosConstraintSystem {
    /// Hessian certificate system for quartic models.
    pub fn build(degree: u32) -> Result<Self> {
        if degree != 4 {
            return Err(Error::UnsupportedDegree(degree));
        }
        let basis = MonomialBasis::new(degree)?;
        let m = basis.len();
        type Key = ((usize, usize), (usize, usize));
        let mut equations: BTreeMap<Key, (DMatrix<f64>, DVector<f64>)> = BTreeMap::new();
        let blank = || (DMatrix::zeros(9, 9), DVector::zeros(m));

        for p in 0..9 {
            for q in 0..9 {
                let key = (sorted(p / 3, q / 3), sorted(p % 3, q % 3));
                equations.entry(key).or_insert_with(blank).0[(p, q)] += 1.0;
            }
        }

        for (n, e) in basis.exponents().iter().enumerate() {
            for k in 0..3 {
                for l in k..3 {
                    let mut rest = *e;
                    let c = if k == l {
                        if rest[k] < 2 {
                            continue;
                        }
                        rest[k] -= 2;
                        (e[k] * (e[k] - 1)) as f64
                    } else {
                        if rest[k] == 0 || rest[l] == 0 {
                            continue;
                        }
                        rest[k] -= 1;
                        rest[l] -= 1;
                        2.0 * (e[k] * e[l]) as f64
                    };
                    // The remaining degree-2 monomial in F as a sorted index pair.
                    let mut idx = Vec::with_capacity(2);
                    for (v, &cnt) in rest.iter().enumerate() {
                        idx.extend(std::iter::repeat_n(v, cnt as usize));
                    }
                    let key = ((k, l), (idx[0], idx[1]));
                    equations.entry(key).or_insert_with(blank).1[n] += c;
                }
            }
        }
        Ok(Self::reduce(
            GramForm::HessianKronecker,
            basis,
            9,
            equations.into_values().collect(),
        ))
    }

    /// `H(F) = F^T Q F` system for quadratic models.
    pub fn quadratic_form() -> Self {
        let basis = MonomialBasis::new(2).expect("degree 2");
        let m = basis.len();
        let mut equations: BTreeMap<(usize, usize), (DMatrix<f64>, DVector<f64>)> = BTreeMap::new();
        for j in 0..3 {
            for l in 0..3 {
                let key = sorted(j, l);
                let entry = equations.entry(key).or_insert_with(|| {
                    let mut e = [0u32; 3];
                    e[key.0] += 1;
                    e[key.1] += 1;
                    let mut b = DVector::zeros(m);
                    b[basis.index_of(e).unwrap()] = 1.0;
                    (DMatrix::zeros(3, 3), b)
                });
                entry.0[(j, l)] += 1.0;
            }
        }
        Self::reduce(
            GramForm::QuadraticForm,
            basis,
            3,
            equations.into_values().collect(),
        )
    }

    fn reduce(
        form: GramForm,
        basis: MonomialBasis,
        gram_dim: usize,
        equations: Vec<(DMatrix<f64>, DVector<f64>)>,
    ) -> Self {
        let raw_equations = equations.len();
        let m = basis.len();
        let width = m + svec_len(gram_dim);
        let rows: Vec<DVector<f64>> = equations
            .iter()
            .map(|(a, b)| {
                let mut r = DVector::zeros(width);
                r.rows_mut(0, m).copy_from(&(-b));
                r.rows_mut(m, width - m).copy_from(&trace_row(a));
                r
            })
            .collect();
        let keep = independent_rows(&rows, ROW_REDUCTION_TOLERANCE);
        let (indicator_matrices, coefficient_vectors) =
            keep.iter().map(|&i| equations[i].clone()).unzip();
        Self {
            form,
            basis,
            gram_dim,
            indicator_matrices,
            coefficient_vectors,
            raw_equations,
        }
    }

    pub fn form(&self) -> GramForm {
        self.form
    }

    pub fn degree(&self) -> u32 {
        self.basis.degree()
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn gram_dim(&self) -> usize {
        self.gram_dim
    }

    /// Number of independent constraints `K`.
    pub fn len(&self) -> usize {
        self.indicator_matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicator_matrices.is_empty()
    }

    /// Equations produced by monomial matching before row reduction.
    pub fn raw_equations(&self) -> usize {
        self.raw_equations
    }

    pub fn indicator_matrices(&self) -> &[DMatrix<f64>] {
        &self.indicator_matrices
    }

    pub fn coefficient_vectors(&self) -> &[DVector<f64>] {
        &self.coefficient_vectors
    }

    /// Size of the stacked variable `(a, svec(Q))`.
    pub fn n_variables(&self) -> usize {
        self.basis.len() + svec_len(self.gram_dim)
    }

    /// `K x n` matrix `C` with `C (a, svec(Q)) = (Tr(A_k Q) - b_k . a)_k`.
    pub fn constraint_matrix(&self) -> DMatrix<f64> {
        let m = self.basis.len();
        let width = self.n_variables();
        let mut c = DMatrix::zeros(self.len(), width);
        for (k, (a, b)) in self
            .indicator_matrices
            .iter()
            .zip(&self.coefficient_vectors)
            .enumerate()
        {
            for j in 0..m {
                c[(k, j)] = -b[j];
            }
            let t = trace_row(a);
            for j in 0..t.len() {
                c[(k, m + j)] = t[j];
            }
        }
        c
    }

    /// `Tr(A_k Q) - b_k . a` for every constraint.
    pub fn residuals(&self, a: &DVector<f64>, q: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.indicator_matrices
                .iter()
                .zip(&self.coefficient_vectors)
                .map(|(ak, bk)| (ak.transpose() * q).trace() - bk.dot(a)),
        )
    }

    /// Both sides of the polynomial identity the system encodes, at `(F, z)`.
    pub fn identity_sides(
        &self,
        a: &DVector<f64>,
        q: &DMatrix<f64>,
        f: &Vector3<f64>,
        z: &Vector3<f64>,
    ) -> (f64, f64) {
        match self.form {
            GramForm::HessianKronecker => {
                let hess = self
                    .basis
                    .hessian_features(f)
                    .iter()
                    .zip(a.iter())
                    .fold(nalgebra::Matrix3::zeros(), |acc, (h, c)| acc + h * *c);
                let y = kron(z, f);
                ((z.transpose() * hess * z)[0], (y.transpose() * q * &y)[0])
            }
            GramForm::QuadraticForm => {
                let lhs = self.basis.features(f).dot(a);
                let fd = DVector::from_column_slice(f.as_slice());
                (lhs, (fd.transpose() * q * &fd)[0])
            }
        }
    }
}

/// `z (x) F` in z-major order.
pub fn kron(z: &Vector3<f64>, f: &Vector3<f64>) -> DVector<f64> {
    DVector::from_fn(9, |i, _| z[i / 3] * f[i % 3])
}

/// Indices of a maximal linearly independent subset, scanning in order.
fn independent_rows(rows: &[DVector<f64>], tol: f64) -> Vec<usize> {
    let mut echelon: Vec<(usize, DVector<f64>)> = Vec::new();
    let mut keep = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut r = row.clone();
        for (pivot, e) in &echelon {
            let factor = r[*pivot];
            if factor != 0.0 {
                r.axpy(-factor, e, 1.0);
            }
        }
        let (pivot, value) = r.iter().enumerate().fold((0, 0.0f64), |best, (j, v)| {
            if v.abs() > best.1.abs() {
                (j, *v)
            } else {
                best
            }
        });
        if value.abs() > tol * row.amax().max(1.0) {
            echelon.push((pivot, r / value));
            keep.push(i);
        }
    }
    keep
}

/// Outcome of checking a `(a, Q)` pair against a constraint system.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub max_constraint_residual: f64,
    pub min_eigenvalue: f64,
    pub max_identity_mismatch: f64,
    pub failures: Vec<String>,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub const CONSTRAINT_TOLERANCE: f64 = 1e-8;
pub const EIGENVALUE_SLACK: f64 = 1e-9;
pub const IDENTITY_TOLERANCE: f64 = 1e-8;

/// Checks the linear constraints, the PSD margin, and the polynomial identity
/// at `n_samples` random points.
pub fn verify_certificate<R: Rng + ?Sized>(
    sys: &SosConstraintSystem,
    a: &DVector<f64>,
    q: &DMatrix<f64>,
    epsilon: f64,
    n_samples: usize,
    rng: &mut R,
) -> CertificateReport {
    let mut failures = Vec::new();
    if q.nrows() != sys.gram_dim() || q.ncols() != sys.gram_dim() || a.len() != sys.basis().len() {
        return CertificateReport {
            max_constraint_residual: f64::INFINITY,
            min_eigenvalue: f64::NEG_INFINITY,
            max_identity_mismatch: f64::INFINITY,
            failures: vec!["dimension mismatch".into()],
        };
    }
    let max_constraint_residual = sys.residuals(a, q).amax();
    if !(max_constraint_residual <= CONSTRAINT_TOLERANCE) {
        failures.push(format!(
            "constraint residual {max_constraint_residual:e} exceeds {CONSTRAINT_TOLERANCE:e}"
        ));
    }
    let sym = (q + q.transpose()) * 0.5;
    let min_eigenvalue = SymmetricEigen::new(sym).eigenvalues.min();
    if !(min_eigenvalue >= epsilon - EIGENVALUE_SLACK) {
        failures.push(format!(
            "min eigenvalue {min_eigenvalue:e} below margin {epsilon:e}"
        ));
    }
    let mut max_identity_mismatch: f64 = 0.0;
    for _ in 0..n_samples {
        let f = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let z = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let (lhs, rhs) = sys.identity_sides(a, q, &f, &z);
        max_identity_mismatch = max_identity_mismatch.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
    }
    if !(max_identity_mismatch <= IDENTITY_TOLERANCE) {
        failures.push(format!(
            "identity mismatch {max_identity_mismatch:e} exceeds {IDENTITY_TOLERANCE:e}"
        ));
    }
    CertificateReport {
        max_constraint_residual,
        min_eigenvalue,
        max_identity_mismatch,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly_model::PolyModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sphere_gram() -> DMatrix<f64> {
        // 4|F|^2|z|^2 + 8(F.z)^2 = y^T (4 I + 8 c c^T) y with c picking z_i F_i.
        let mut c = DVector::zeros(9);
        for i in 0..3 {
            c[3 * i + i] = 1.0;
        }
        DMatrix::identity(9, 9) * 4.0 + &c * c.transpose() * 8.0
    }

    #[test]
    fn raw_monomial_count_matches_enumeration() {
        // Distinct z-pairs times distinct F-pairs, counted by brute force.
        let mut keys = std::collections::BTreeSet::new();
        for i in 0..3 {
            for k in 0..3 {
                for j in 0..3 {
                    for l in 0..3 {
                        keys.insert((sorted(i, k), sorted(j, l)));
                    }
                }
            }
        }
        let sys = SosConstraintSystem::build(4).unwrap();
        assert_eq!(keys.len(), 36);
        assert_eq!(sys.raw_equations(), keys.len());
        assert!(sys.len() <= sys.raw_equations());
        assert_eq!(sys.gram_dim(), 9);
        assert_eq!(sys.n_variables(), 15 + 45);
    }

    #[test]
    fn reduced_rank_equals_matrix_rank() {
        let sys = SosConstraintSystem::build(4).unwrap();
        let c = sys.constraint_matrix();
        let sv = c.clone().svd(false, false).singular_values;
        let rank = sv.iter().filter(|s| **s > 1e-9 * sv.max()).count();
        assert_eq!(rank, sys.len());
    }

    #[test]
    fn unsupported_degrees() {
        assert!(matches!(
            SosConstraintSystem::build(2),
            Err(Error::UnsupportedDegree(2))
        ));
        assert!(matches!(
            SosConstraintSystem::build(6),
            Err(Error::UnsupportedDegree(6))
        ));
    }

    #[test]
    fn sphere_quartic_gram_satisfies_every_constraint() {
        let sys = SosConstraintSystem::build(4).unwrap();
        let a = PolyModel::sphere_quartic().coeffs().clone();
        let q = sphere_gram();
        assert!(sys.residuals(&a, &q).amax() <= 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = verify_certificate(&sys, &a, &q, 1e-4, 100, &mut rng);
        assert!(report.passed(), "{report:?}");
        assert!((report.min_eigenvalue - 4.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_gram_fails() {
        let sys = SosConstraintSystem::build(4).unwrap();
        let a = PolyModel::sphere_quartic().coeffs().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = DMatrix::from_fn(9, 9, |_, _| rng.random_range(-1.0..1.0));
        let noise = (&noise + noise.transpose()) * 0.5;
        let noise = &noise * (1e-3 / noise.norm());
        let q = sphere_gram() + noise;
        let report = verify_certificate(&sys, &a, &q, 1e-4, 100, &mut rng);
        assert!(!report.passed());
        assert!(report.max_constraint_residual > CONSTRAINT_TOLERANCE);
    }

    #[test]
    fn zero_certificate_fails_only_the_margin() {
        let sys = SosConstraintSystem::build(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let report = verify_certificate(
            &sys,
            &DVector::zeros(15),
            &DMatrix::zeros(9, 9),
            1e-4,
            50,
            &mut rng,
        );
        assert_eq!(report.max_constraint_residual, 0.0);
        assert_eq!(report.max_identity_mismatch, 0.0);
        assert_eq!(report.failures.len(), 1);
        assert!(report.failures[0].contains("eigenvalue"));
    }

    #[test]
    fn kronecker_norm_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let f = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let z = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let y = kron(&z, &f);
            let expect = f.norm_squared() * z.norm_squared();
            assert!((y.norm_squared() - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }

    #[test]
    fn quadratic_form_system() {
        let sys = SosConstraintSystem::quadratic_form();
        assert_eq!(sys.len(), 6);
        let a = nalgebra::Matrix3::new(2.0, 0.5, -0.1, 0.5, 1.0, 0.3, -0.1, 0.3, 3.0);
        let model = PolyModel::quadratic(&a);
        let q = DMatrix::from_fn(3, 3, |i, j| a[(i, j)]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let report = verify_certificate(&sys, model.coeffs(), &q, 1e-4, 100, &mut rng);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn svec_round_trip() {
        let q = sphere_gram();
        assert_eq!(smat(svec(&q).as_slice(), 9), q);
    }
}
