//! A reduced version of the seeded comparison study: mean hold-out error of each
//! model kind against training-set size on random tripods.

use limit_surface::harness::{run_study, StudyConfig, StudySupport};

fn main() -> limit_surface::Result<()> {
    let cfg = StudyConfig {
        support: StudySupport::Legged,
        n_trials: 10,
        ..StudyConfig::default()
    };
    let report = run_study(&cfg)?;
    print!("{:>6}", "size");
    for kind in &cfg.kinds {
        print!("{:>20}", kind.to_string());
    }
    println!();
    for &size in &cfg.train_sizes {
        print!("{size:>6}");
        for &kind in &cfg.kinds {
            let cell = report.cell(kind, size).expect("cell");
            match (cell.mean_deg, cell.ci95_half_width_deg) {
                (Some(m), Some(ci)) => print!("{:>20}", format!("{m:.2} +- {ci:.2}")),
                _ => print!("{:>20}", "failed"),
            }
        }
        println!();
    }
    println!("{} failed fits", report.failures.len());
    Ok(())
}
