use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use limit_surface::applications::push::{classify_cor, PushContact};
use limit_surface::applications::sliding::{
    simulate_sliding, SlideOptions, SlideState, SlidingBody,
};
use limit_surface::harness::{angular_error, run_study, StudyConfig, StudySupport};
use limit_surface::identification::{fit, FitConfig};
use limit_surface::inversion::{invert, InversionOptions};
use limit_surface::io::{self, StableRow};
use limit_surface::support_oracle::{
    add_noise, gen_dataset, gen_legged_support, gen_uniform_support, split_dataset, Dataset,
    DatasetMeta, Protocol, SupportKind,
};
use limit_surface::wrench_space::{embed_twist, BodyParams, PoseSE2};
use limit_surface::{Error, ModelKind, Result};

#[derive(Parser)]
#[command(
    name = "limit-surface",
    version,
    about = "Fit and use polynomial limit surfaces for planar sliding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an oracle dataset.
    Gen(GenArgs),
    /// Fit a model to a training set.
    Fit(FitArgs),
    /// Mean angular error of a model on a dataset.
    Eval(EvalArgs),
    /// Load on the 1-level set for a twist direction.
    Invert(InvertArgs),
    /// Classify centers of rotation for a two-point push.
    Stable(StableArgs),
    /// Simulate free sliding.
    Simulate(SimulateArgs),
    /// Run the seeded simulation study.
    Study(StudyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SupportArg {
    Legged,
    Ring,
    Square,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    support: SupportArg,
    #[arg(long, default_value_t = 150)]
    n: usize,
    /// Points for ring and square supports.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write train/validation/test splits; noise then applies to train and validation only.
    #[arg(long)]
    split: bool,
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    kind: ModelKind,
    #[arg(long)]
    train: PathBuf,
    /// Validation set for weight selection; the training set is used when absent.
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Candidate weights, crossed with themselves for (eta1, eta2).
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 1.0, 10.0, 100.0])]
    weights: Vec<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args)]
struct InvertArgs {
    #[arg(long)]
    model: PathBuf,
    /// Normalized twist `vx,vy,vz`; only its direction is used.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_array::<3>)]
    twist: [f64; 3],
}

#[derive(Args)]
struct StableArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_array::<2>)]
    p1: [f64; 2],
    #[arg(long, allow_hyphen_values = true, value_parser = parse_array::<2>)]
    p2: [f64; 2],
    /// Inward contact normal.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_array::<2>)]
    normal: [f64; 2],
    #[arg(long, default_value_t = 1.0)]
    mu_contact: f64,
    /// CSV with `cx,cy` columns; random CORs are drawn when absent.
    #[arg(long)]
    cors: Option<PathBuf>,
    #[arg(long, default_value_t = 60)]
    count: usize,
    /// Half-width of the square the random CORs are drawn from.
    #[arg(long, default_value_t = 0.2)]
    extent: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    mass: f64,
    /// Inertia about the vertical axis through the COM.
    #[arg(long)]
    inertia: f64,
    /// Support friction coefficient.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 9.81)]
    gravity: f64,
    /// Initial body-frame velocity `vx,vy,omega` (omega in rad/s).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_array::<3>)]
    twist: [f64; 3],
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// The model was fitted to measured loads in physical units.
    #[arg(long)]
    sensor: bool,
    /// Include the rotating-frame term in the translational dynamics.
    #[arg(long)]
    frame_rotation: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, value_enum)]
    support: SupportArg,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [7, 15, 22, 45])]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<ModelKind>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

/// `"a,b,c"` into `[a, b, c]`.
fn parse_array<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let values: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}")))
        .collect::<std::result::Result<_, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn default_points(support: SupportArg) -> usize {
    match support {
        SupportArg::Square => 400,
        _ => 360,
    }
}

fn run_gen(args: &GenArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let points = args.points.unwrap_or(default_points(args.support));
    let (cfg, protocol) = match args.support {
        SupportArg::Legged => (gen_legged_support(&mut rng), Protocol::Legged),
        SupportArg::Ring => (
            gen_uniform_support(SupportKind::Ring, points)?,
            Protocol::Uniform,
        ),
        SupportArg::Square => (
            gen_uniform_support(SupportKind::Square, points)?,
            Protocol::Uniform,
        ),
    };
    let mut data = gen_dataset(&cfg, protocol, args.n, &mut rng)?;
    data.metadata.seed = Some(args.seed);
    fs::create_dir_all(&args.output)?;
    if args.split {
        let plan = split_dataset(data.len(), (0.5, 0.2, 0.3), &[], &mut rng)?;
        let train = add_noise(&data.subset(&plan.pool), args.noise, &mut rng)?;
        let validation = add_noise(&data.subset(&plan.validation), args.noise, &mut rng)?;
        io::write_dataset(&args.output.join("train.csv"), &train)?;
        io::write_dataset(&args.output.join("validation.csv"), &validation)?;
        io::write_dataset(&args.output.join("test.csv"), &data.subset(&plan.test))?;
    } else {
        let noisy = add_noise(&data, args.noise, &mut rng)?;
        io::write_dataset(&args.output.join("data.csv"), &noisy)?;
    }
    Ok(())
}

fn run_fit(args: &FitArgs) -> Result<()> {
    let train = io::read_dataset(&args.train)?;
    let val = match &args.val {
        Some(p) => io::read_dataset(p)?,
        None => Dataset::new(vec![], DatasetMeta::sensor(train.metadata.rho)),
    };
    let grid = args
        .weights
        .iter()
        .flat_map(|&a| args.weights.iter().map(move |&b| (a, b)))
        .collect();
    let cfg = FitConfig::new(args.kind)
        .with_grid(grid)
        .with_epsilon(args.epsilon);
    let result = fit(&train, &val, &cfg)?;
    io::write_model(&args.output, &result.model, Some(args.kind))?;
    eprintln!(
        "{}: eta1={} eta2={} train {:.3} deg, validation {:.3} deg",
        args.kind, result.eta1, result.eta2, result.train_error_deg, result.validation_error_deg
    );
    Ok(())
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let (model, _) = io::read_model(&args.model)?;
    let data = io::read_dataset(&args.data)?;
    let e = angular_error(&model, &data)?;
    print_json(&json!({ "mean_deg": e.mean_deg, "undefined": e.undefined, "n": data.len() }))
}

fn run_invert(args: &InvertArgs) -> Result<()> {
    let (model, _) = io::read_model(&args.model)?;
    let v = Vector3::from(args.twist);
    if !(v.norm() > 0.0) {
        return Err(Error::ZeroTwist);
    }
    let v = v.normalize();
    let f = invert(&model, &v, &InversionOptions::default())?;
    let physical = f * model.load_scale();
    print_json(
        &json!({ "twist": v.as_slice(), "load": f.as_slice(), "load_data_units": physical.as_slice() }),
    )
}

fn read_cors(path: &Path) -> Result<Vec<(f64, f64)>> {
    #[derive(serde::Deserialize)]
    struct Row {
        cx: f64,
        cy: f64,
    }
    let rows: Vec<Row> = io::read_rows(fs::File::open(path)?)?;
    Ok(rows.into_iter().map(|r| (r.cx, r.cy)).collect())
}

fn run_stable(args: &StableArgs) -> Result<()> {
    let (model, _) = io::read_model(&args.model)?;
    let contact = PushContact::new(
        Vector2::new(args.p1[0], args.p1[1]),
        Vector2::new(args.p2[0], args.p2[1]),
        Vector2::new(args.normal[0], args.normal[1]),
        args.mu_contact,
    )?;
    let cors = match &args.cors {
        Some(p) => read_cors(p)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            (0..args.count)
                .map(|_| {
                    (
                        rng.random_range(-args.extent..args.extent),
                        rng.random_range(-args.extent..args.extent),
                    )
                })
                .collect()
        }
    };
    let mut rows = Vec::with_capacity(2 * cors.len());
    for (cx, cy) in cors {
        for (verdict, sense) in classify_cor(&model, &contact, cx, cy)?
            .iter()
            .zip([1i8, -1])
        {
            rows.push(StableRow {
                cx,
                cy,
                sense,
                stable: verdict.stable,
                margin: verdict.margin,
            });
        }
    }
    io::write_rows(fs::File::create(&args.output)?, &rows)
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let (model, _) = io::read_model(&args.model)?;
    let body = BodyParams::with_rho(args.mass, args.inertia, model.rho(), args.mu, args.gravity)?;
    let sliding = if args.sensor {
        SlidingBody::sensor_trained(&model, &body)?
    } else {
        SlidingBody::oracle_trained(&model, &body)?
    };
    let twist = embed_twist(args.twist[0], args.twist[1], args.twist[2], model.rho())?;
    let opts = SlideOptions {
        step: args.step,
        frame_rotation: args.frame_rotation,
        ..SlideOptions::default()
    };
    let traj = simulate_sliding(
        &model,
        &sliding,
        &SlideState::new(PoseSE2::default(), twist),
        &opts,
    )?;
    io::write_trajectory(fs::File::create(&args.output)?, &traj, model.rho())?;
    let end = traj.final_state();
    eprintln!(
        "{:?} at t = {:.4} s, pose ({:.4}, {:.4}, {:.4})",
        traj.outcome, end.time, end.pose.x, end.pose.y, end.pose.theta
    );
    Ok(())
}

fn run_study_cmd(args: &StudyArgs) -> Result<()> {
    let support = match args.support {
        SupportArg::Legged => StudySupport::Legged,
        SupportArg::Ring => StudySupport::Ring,
        SupportArg::Square => StudySupport::Square,
    };
    let mut cfg = StudyConfig {
        support,
        n_trials: args.trials,
        sigma: args.sigma,
        master_seed: args.seed,
        train_sizes: args.sizes.clone(),
        uniform_points: args.points.unwrap_or(default_points(args.support)),
        ..StudyConfig::default()
    };
    if !args.kinds.is_empty() {
        cfg.kinds = args.kinds.clone();
    }
    let report = run_study(&cfg)?;
    io::write_json(&args.output, &report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Fit(a) => run_fit(a),
        Command::Eval(a) => run_eval(a),
        Command::Invert(a) => run_invert(a),
        Command::Stable(a) => run_stable(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Study(a) => run_study_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
