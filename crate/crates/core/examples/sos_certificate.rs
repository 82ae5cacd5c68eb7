//! The convexity certificate: the linear system tying a quartic's coefficients
//! to a 9x9 Gram matrix, checked on a hand-built certified model.

use limit_surface::poly_model::PolyModel;
use limit_surface::solver::feasible_start;
use limit_surface::sos::{verify_certificate, SosConstraintSystem};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> limit_surface::Result<()> {
    let sys = SosConstraintSystem::build(4)?;
    println!(
        "degree 4: {} monomial equations, {} independent, {} unknowns",
        sys.raw_equations(),
        sys.len(),
        sys.n_variables()
    );

    let eps = 1e-4;
    let (a, q) = feasible_start(&sys, eps);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let report = verify_certificate(&sys, &a, &q, eps, 200, &mut rng);
    println!(
        "scaled (F.F)^2: residual {:.1e}, min eig {:.3e}, identity mismatch {:.1e}, passed {}",
        report.max_constraint_residual,
        report.min_eigenvalue,
        report.max_identity_mismatch,
        report.passed()
    );

    // The negated quartic is concave, so no Gram matrix certifies it; Q = 0 fails every check.
    let saddle = PolyModel::new(4, a.map(|c| -c))?;
    let report = verify_certificate(
        &sys,
        saddle.coeffs(),
        &DMatrix::zeros(9, 9),
        eps,
        50,
        &mut rng,
    );
    println!("negated model with Q = 0: {:?}", report.failures);
    Ok(())
}
