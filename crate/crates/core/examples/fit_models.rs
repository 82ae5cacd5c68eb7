//! Fit quad, poly4 and poly4-cvx to noisy tripod data and compare hold-out error.

use limit_surface::harness::angular_error;
use limit_surface::identification::{fit, FitConfig};
use limit_surface::poly_model::ModelKind;
use limit_surface::support_oracle::{add_noise, gen_dataset, gen_legged_support, Protocol};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> limit_surface::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = gen_legged_support(&mut rng);
    let train = add_noise(
        &gen_dataset(&cfg, Protocol::Legged, 22, &mut rng)?,
        0.1,
        &mut rng,
    )?;
    let val = add_noise(
        &gen_dataset(&cfg, Protocol::Legged, 30, &mut rng)?,
        0.1,
        &mut rng,
    )?;
    let test = gen_dataset(&cfg, Protocol::Legged, 200, &mut rng)?;

    for kind in ModelKind::ALL {
        let r = fit(&train, &val, &FitConfig::new(kind))?;
        let test_err = angular_error(&r.model, &test)?;
        println!(
            "{kind:>9}: eta=({}, {}) train {:.2} deg, validation {:.2} deg, test {:.2} deg, certified {}",
            r.eta1,
            r.eta2,
            r.train_error_deg,
            r.validation_error_deg,
            test_err.mean_deg,
            r.model.certificate().is_some()
        );
        if let Some(d) = &r.diagnostics {
            println!(
                "           {} barrier stages, {} Newton steps, min eig {:.2e}",
                d.stages.len(),
                d.iterations,
                d.min_eigenvalue
            );
        }
    }
    Ok(())
}
