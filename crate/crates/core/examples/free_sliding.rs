//! Let a tripod-supported block slide freely from several initial twists and
//! report where the final twist directions end up.

use limit_surface::applications::sliding::{
    final_twist_direction, simulate_sliding, SlideOptions, SlideState, SlidingBody,
};
use limit_surface::identification::{fit, FitConfig};
use limit_surface::io::write_trajectory;
use limit_surface::poly_model::ModelKind;
use limit_surface::support_oracle::{
    gen_dataset, Protocol, SupportConfig, SupportKind, SupportPoint,
};
use limit_surface::wrench_space::{embed_twist, BodyParams, PoseSE2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn main() -> limit_surface::Result<()> {
    // Legs in metres around the center of mass.
    let support = SupportConfig::normalized(
        SupportKind::Custom,
        vec![
            SupportPoint::new(-0.04, -0.04, 1.0),
            SupportPoint::new(-0.04, 0.08, 1.0),
            SupportPoint::new(0.08, -0.04, 1.0),
        ],
        1.0,
    )?
    .with_rho(0.05)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let train = gen_dataset(&support, Protocol::Legged, 10, &mut rng)?;
    let val = gen_dataset(&support, Protocol::Legged, 10, &mut rng)?;
    let model = fit(&train, &val, &FitConfig::new(ModelKind::Poly4Cvx))?.model;

    let body = BodyParams::with_rho(1.508, 1.508 * 0.0025, 0.05, 0.3, 9.81)?;
    let sliding = SlidingBody::oracle_trained(&model, &body)?;
    for (i, (vx, vy, w)) in [
        (0.15, -0.15, 2.0 * PI),
        (0.25, -0.1, 3.0 * PI),
        (0.5, 0.1, PI),
    ]
    .into_iter()
    .enumerate()
    {
        let start = SlideState::new(PoseSE2::default(), embed_twist(vx, vy, w, body.rho)?);
        let traj = simulate_sliding(&model, &sliding, &start, &SlideOptions::default())?;
        let end = traj.final_state();
        let dir = final_twist_direction(&traj)?;
        println!(
            "start ({vx}, {vy}, {w:.2} rad/s): rest at t = {:.3} s, pose ({:+.3}, {:+.3}, {:+.2}), final direction [{:+.3} {:+.3} {:+.3}]",
            end.time, end.pose.x, end.pose.y, end.pose.theta, dir.x, dir.y, dir.z
        );
        let path = std::env::temp_dir().join(format!("slide-{i}.csv"));
        write_trajectory(std::fs::File::create(&path)?, &traj, body.rho)?;
    }
    Ok(())
}
