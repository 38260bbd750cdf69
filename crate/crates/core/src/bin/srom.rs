use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use streaming_opinf::error::{Error, Result};
use streaming_opinf::experiment::{
    compare_runs, comparison_table, exit_code, generate, run_burgers, run_custom, run_kse,
    Experiment, ExperimentConfig, Reporter,
};
use streaming_opinf::metrics::MetricTable;

/// Streaming operator inference: data generation, experiment runs and run comparison.
#[derive(Parser)]
#[command(name = "srom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate and print the plan without simulating or writing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate training trajectories into snapshot files.
    Generate(Common),
    /// Run an experiment and write metric CSVs and learned operators.
    Run(Common),
    /// Tabulate metric ratios between two run directories.
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        /// Also write compare.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

fn print_table(t: &MetricTable) {
    println!("{}", t.columns.join(","));
    for row in &t.rows {
        println!("{}", row.join(","));
    }
}

fn run_generate(c: &Common) -> Result<()> {
    let cfg = load(c)?;
    let root = c
        .out
        .clone()
        .or_else(|| cfg.data_dir.clone())
        .unwrap_or_else(|| cfg.output.join("data"));
    let plan = generate(&cfg, &root, c.dry_run, &Reporter::new(false))?;
    let mut total = 0;
    for f in &plan {
        println!("{}\t{}x{}\t{}", f.path.display(), f.rows, f.cols, f.bytes());
        total += f.bytes();
    }
    println!("total\t{} files\t{total}", plan.len());
    Ok(())
}

fn run_experiment(c: &Common) -> Result<()> {
    let cfg = load(c)?;
    if c.dry_run {
        print!("{}", cfg.serialize());
        return Ok(());
    }
    let rep = Reporter::new(false);
    let out = Some(cfg.output.as_path());
    let tables = match cfg.experiment {
        Experiment::Burgers => run_burgers(&cfg, out, &rep)?.tables,
        Experiment::Kse => run_kse(&cfg, out, &rep)?.tables,
        Experiment::CustomStream => run_custom(&cfg, out, &rep)?,
    };
    for t in &tables {
        println!("{}", cfg.output.join(format!("{}.csv", t.name)).display());
    }
    Ok(())
}

fn run_compare(a: &Path, b: &Path, out: Option<&Path>) -> Result<()> {
    for d in [a, b] {
        if !d.is_dir() {
            return Err(Error::Config(format!(
                "{} is not a run directory",
                d.display()
            )));
        }
    }
    let t = comparison_table(&compare_runs(a, b)?)?;
    if let Some(o) = out {
        t.write_to(o)?;
    }
    print_table(&t);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(c) => run_generate(c),
        Command::Run(c) => run_experiment(c),
        Command::Compare { run_a, run_b, out } => run_compare(run_a, run_b, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
