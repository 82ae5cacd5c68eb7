//! Point-support Coulomb oracle: generate force-motion pairs for a ring and a
//! random tripod, check dissipativity, and save them as CSV.

use limit_surface::io::{read_dataset, write_dataset};
use limit_surface::support_oracle::{
    add_noise, gen_dataset, gen_legged_support, gen_uniform_support, Protocol, SupportKind,
};
use limit_surface::wrench_space::power;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> limit_surface::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ring = gen_uniform_support(SupportKind::Ring, 360)?;
    let tripod = gen_legged_support(&mut rng);
    println!("tripod rho = {:.4}", tripod.rho);
    for p in &tripod.points {
        println!(
            "  leg at ({:+.3}, {:+.3}) pressure {:.3}",
            p.rx, p.ry, p.pressure
        );
    }

    for (name, cfg, protocol) in [
        ("ring", &ring, Protocol::Uniform),
        ("tripod", &tripod, Protocol::Legged),
    ] {
        let ds = gen_dataset(cfg, protocol, 150, &mut rng)?;
        let min_power = ds
            .pairs
            .iter()
            .map(|p| power(&p.load, &p.twist))
            .fold(f64::INFINITY, f64::min);
        println!("{name}: {} pairs, min F.V = {min_power:.3e}", ds.len());

        let noisy = add_noise(&ds, 0.1, &mut rng)?;
        let dir = std::env::temp_dir().join("limit-surface-example");
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{name}.csv"));
        write_dataset(&path, &noisy)?;
        let back = read_dataset(&path)?;
        println!("  wrote {} (sigma {})", path.display(), back.metadata.sigma);
    }
    Ok(())
}
