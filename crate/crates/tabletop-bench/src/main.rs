//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.

use clap::{Args, Parser, Subcommand};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use tabletop::demo::{record_demo, scripted_demo, DemoScript, Demonstration};
use tabletop::geometry::{lift_planar, PlanarPose, RigidTransform};
use tabletop::scene::{place_object, Mode};
use tabletop::sensor::{collect_dataset, fit_predicted_uncertainty, fit_prior_uncertainty, Region};
use tabletop_bench::config::{ExperimentConfig, Method};
use tabletop_bench::experiment::{
    aggregate, run_single_task_episode, run_target_reaching, run_task_benchmark, summarize_task,
    HarnessError,
};
use tabletop_bench::report::{
    read_records_jsonl, write_records_jsonl, write_report_csv, write_task_summary_csv,
    write_traces_jsonl,
};
use tabletop_bench::seeding::{derive_rng, tag};

#[derive(Parser)]
#[command(
    name = "tabletop-bench",
    about = "Seeded Monte-Carlo benchmarks for tabletop bottleneck-pose estimation and replay",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Key-value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write per-step estimate traces.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct DemoArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Demonstration file; a built-in scripted demonstration is used when
    /// omitted.
    #[arg(long)]
    demo: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Collect the approach and last-inch datasets at the training placement
    /// and fit the uncertainty models.
    Collect(CommonArgs),
    /// Run the target-reaching estimator comparison and write report.csv.
    Reach(CommonArgs),
    /// Run the replay task benchmark and write records + summary.
    Task(DemoArgs),
    /// Run one traced task episode and dump its estimate and pose traces.
    Replay(DemoArgs),
    /// Aggregate a records.jsonl file into a report.csv.
    Report {
        /// Trial records written by `reach` or `task`.
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        let code = match e {
            HarnessError::Config(_) => 1,
            _ => 2,
        };
        std::process::exit(code);
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Collect(args) => collect(args),
        Command::Reach(args) => reach(args),
        Command::Task(args) => task(args),
        Command::Replay(args) => replay_episode(args),
        Command::Report { records, out } => report(&records, &out),
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&args.out)?;
    Ok(cfg)
}

/// The built-in demonstration: a tilted start above the training object
/// followed by a descend-and-twist interaction.
fn default_demo(cfg: &ExperimentConfig) -> Result<Demonstration, HarnessError> {
    let rate = 1.0 / cfg.scene.dt;
    let initial = lift_planar(
        &PlanarPose::new(0.0, 0.0, 0.3),
        cfg.scene.table_height + cfg.scene.bottleneck_height,
    )
    .compose(&RigidTransform::from_rotation_x(0.10));
    let twists = scripted_demo(
        &DemoScript::TwistInsert {
            depth: 0.04,
            speed: 0.06,
            twist_angle: std::f64::consts::FRAC_PI_2,
            yaw_rate: 1.2,
        },
        rate,
    )?;
    Ok(record_demo(&initial, twists, rate, cfg.scene.table_height)?)
}

fn load_demo(cfg: &ExperimentConfig, args: &DemoArgs) -> Result<Demonstration, HarnessError> {
    match &args.demo {
        Some(path) => Ok(Demonstration::load(path)?),
        None => default_demo(cfg),
    }
}

fn collect(args: CommonArgs) -> Result<(), HarnessError> {
    let cfg = load_config(&args)?;
    let world = place_object(&cfg.scene, cfg.master_seed, Mode::Train);

    let mut rng = derive_rng(cfg.master_seed, &[tag::DATASET, 0]);
    let approach = collect_dataset(
        &cfg.scene,
        &world,
        cfg.n_train_trajectories,
        Region::Approach,
        &mut rng,
    );
    let mut rng = derive_rng(cfg.master_seed, &[tag::LAST_INCH_DATASET, 0]);
    let last_inch = collect_dataset(
        &cfg.scene,
        &world,
        cfg.n_last_inch_trajectories,
        Region::LastInch,
        &mut rng,
    );

    let approach_path = args.out.join("dataset_approach.jsonl");
    approach.write_jsonl(BufWriter::new(File::create(&approach_path)?))?;
    let last_inch_path = args.out.join("dataset_last_inch.jsonl");
    last_inch.write_jsonl(BufWriter::new(File::create(&last_inch_path)?))?;

    let prior = fit_prior_uncertainty(
        &approach,
        &cfg.noise_approach,
        &mut derive_rng(cfg.master_seed, &[tag::FIT_PRIOR, 0]),
    )?;
    let predictor = fit_predicted_uncertainty(
        &approach,
        &cfg.noise_approach,
        &mut derive_rng(cfg.master_seed, &[tag::FIT_PREDICTED, 0]),
    )?;
    let last_inch_prior = fit_prior_uncertainty(
        &last_inch,
        &cfg.noise_last_inch,
        &mut derive_rng(cfg.master_seed, &[tag::LAST_INCH_FIT, 0]),
    )?;

    #[derive(serde::Serialize)]
    struct Fitted {
        prior: [f64; 3],
        predictor_coefficients: [(f64, f64); 3],
        last_inch_prior: [f64; 3],
    }
    let fitted = Fitted {
        prior: [prior[0], prior[1], prior[2]],
        predictor_coefficients: *predictor.coefficients(),
        last_inch_prior: [last_inch_prior[0], last_inch_prior[1], last_inch_prior[2]],
    };
    let fitted_path = args.out.join("fitted.json");
    let mut w = BufWriter::new(File::create(&fitted_path)?);
    serde_json::to_writer_pretty(&mut w, &fitted)
        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
    w.flush()?;

    println!(
        "collected {} approach and {} last-inch samples",
        approach.samples.len(),
        last_inch.samples.len()
    );
    println!(
        "fitted prior sigma = [{:.6}, {:.6}, {:.6}]",
        prior[0], prior[1], prior[2]
    );
    println!(
        "wrote {}, {}, {}",
        approach_path.display(),
        last_inch_path.display(),
        fitted_path.display()
    );
    Ok(())
}

fn reach(args: CommonArgs) -> Result<(), HarnessError> {
    let cfg = load_config(&args)?;
    let outcome = run_target_reaching(&cfg, args.trace)?;
    let report_path = args.out.join("report.csv");
    write_report_csv(&outcome.table, &report_path)?;
    let records_path = args.out.join("records.jsonl");
    write_records_jsonl(&outcome.records, &records_path)?;
    if args.trace {
        write_traces_jsonl(&outcome.records, &args.out.join("traces.jsonl"))?;
    }
    for row in &outcome.table.rows {
        println!(
            "{:<24} pos mean {:8.3} mm   ori mean {:7.3} deg",
            row.label, row.pos_mean_mm, row.ori_mean_deg
        );
    }
    println!("wrote {}", report_path.display());
    Ok(())
}

fn task(args: DemoArgs) -> Result<(), HarnessError> {
    let cfg = load_config(&args.common)?;
    let demo = load_demo(&cfg, &args)?;
    demo.save(&args.common.out.join("demo.json"))?;
    let records = run_task_benchmark(&cfg, &demo, args.common.trace)?;
    write_records_jsonl(&records, &args.common.out.join("records.jsonl"))?;
    let summary = summarize_task(&cfg, &records)?;
    let summary_path = args.common.out.join("task_summary.csv");
    write_task_summary_csv(&summary, &summary_path)?;
    if args.common.trace {
        write_traces_jsonl(&records, &args.common.out.join("traces.jsonl"))?;
    }
    for row in &summary {
        println!(
            "{:<32} success {:5.1}% ({}/{})",
            row.label,
            row.success_rate * 100.0,
            row.successes,
            row.trials
        );
    }
    println!("wrote {}", summary_path.display());
    Ok(())
}

fn replay_episode(args: DemoArgs) -> Result<(), HarnessError> {
    let cfg = load_config(&args.common)?;
    let demo = load_demo(&cfg, &args)?;
    demo.save(&args.common.out.join("demo.json"))?;
    use tabletop::estimation::{EstimatorKind, UncertaintySource};
    let full_pipeline = Method::Estimator(EstimatorKind::Filtering(UncertaintySource::Prior));
    let method = if cfg.methods.contains(&full_pipeline) {
        full_pipeline
    } else {
        cfg.methods
            .iter()
            .copied()
            .find(|m| *m != Method::Oracle)
            .unwrap_or(Method::Oracle)
    };
    let (record, trajectory) = run_single_task_episode(&cfg, &demo, method, true)?;
    write_traces_jsonl(
        std::slice::from_ref(&record),
        &args.common.out.join("trace.jsonl"),
    )?;

    #[derive(serde::Serialize)]
    struct PoseLine {
        step: usize,
        pose: Vec<f64>,
    }
    let path = args.common.out.join("replay_path.jsonl");
    let mut w = BufWriter::new(File::create(&path)?);
    for (step, pose) in trajectory.iter().enumerate() {
        let line = PoseLine {
            step,
            pose: pose.to_row_major().to_vec(),
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| HarnessError::Runtime(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    println!(
        "episode: method {} (corrected), terminal error {:.3} mm / {:.3} deg, success {:?}",
        record.method, record.final_pos_error_mm, record.final_yaw_error_deg, record.success
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn report(records_path: &Path, out: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out)?;
    let records = read_records_jsonl(records_path)?;
    let cfg = ExperimentConfig::default();
    let table = aggregate(&cfg, &records)?;
    let path = out.join("report.csv");
    write_report_csv(&table, &path)?;
    println!("aggregated {} records into {}", records.len(), path.display());
    Ok(())
}
