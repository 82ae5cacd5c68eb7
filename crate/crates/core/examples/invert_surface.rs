//! Recover the friction load for a desired sliding twist by inverting a fitted
//! certified quartic.

use limit_surface::identification::{fit, FitConfig};
use limit_surface::inversion::{invert_with_report, InversionOptions};
use limit_surface::poly_model::ModelKind;
use limit_surface::support_oracle::{gen_dataset, gen_legged_support, load_for_twist, Protocol};
use limit_surface::wrench_space::GeneralizedVelocity;
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> limit_surface::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = gen_legged_support(&mut rng);
    let train = gen_dataset(&cfg, Protocol::Legged, 45, &mut rng)?;
    let val = gen_dataset(&cfg, Protocol::Legged, 30, &mut rng)?;
    let model = fit(&train, &val, &FitConfig::new(ModelKind::Poly4Cvx))?.model;

    for v in [
        Vector3::new(1.0, 0.0, 0.0),
        Vector3::new(0.0, 0.0, 1.0),
        Vector3::new(0.3, -0.5, 0.8).normalize(),
    ] {
        let inv = invert_with_report(&model, &v, &InversionOptions::default())?;
        let data_units = inv.load * model.load_scale();
        let truth = load_for_twist(&cfg, &GeneralizedVelocity(v))?.0;
        println!(
            "V = [{:+.3} {:+.3} {:+.3}]  F = [{:+.4} {:+.4} {:+.4}]  oracle [{:+.4} {:+.4} {:+.4}]  H(F) = {:.12}  {} steps",
            v.x,
            v.y,
            v.z,
            data_units.x,
            data_units.y,
            data_units.z,
            truth.x,
            truth.y,
            truth.z,
            model.evaluate(&inv.load),
            inv.iterations
        );
    }
    Ok(())
}
