//! Map which centers of rotation give a stable two-point push against the
//! bottom edge of a fitted object.

use limit_surface::applications::push::{classify_cor, PushContact};
use limit_surface::identification::{fit, FitConfig};
use limit_surface::poly_model::ModelKind;
use limit_surface::support_oracle::{gen_dataset, gen_uniform_support, Protocol, SupportKind};
use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> limit_surface::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = gen_uniform_support(SupportKind::Square, 100)?;
    let train = gen_dataset(&cfg, Protocol::Uniform, 45, &mut rng)?;
    let val = gen_dataset(&cfg, Protocol::Uniform, 30, &mut rng)?;
    let model = fit(&train, &val, &FitConfig::new(ModelKind::Poly4Cvx))?.model;

    // Pusher edge along y = -1 with contacts at x = +-0.4, pushing up.
    let contact = PushContact::new(
        Vector2::new(-0.4, -1.0),
        Vector2::new(0.4, -1.0),
        Vector2::new(0.0, 1.0),
        0.3,
    )?;
    println!("'+' counter-clockwise stable, '-' clockwise stable, '*' both, '.' neither");
    for row in 0..15 {
        let cy = 1.4 - 0.2 * row as f64;
        let line: String = (0..31)
            .map(|col| {
                let cx = -3.0 + 0.2 * col as f64;
                let [ccw, cw] = classify_cor(&model, &contact, cx, cy).expect("classification");
                match (ccw.stable, cw.stable) {
                    (true, true) => '*',
                    (true, false) => '+',
                    (false, true) => '-',
                    (false, false) => '.',
                }
            })
            .collect();
        println!("{cy:+.1} {line}");
    }
    Ok(())
}
