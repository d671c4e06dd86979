//! `qaoa-vrp`: build Hamiltonians, run the classical oracle, solve with QAOA,
//! and reproduce the bundled experiments.
//!
//! Exit status: 0 when a report was produced (a run that misses the optimum
//! still exits 0 and prints a `WARN` line), 2 for invalid input, 3 when a
//! size guard refuses the problem.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qaoa_vrp::encoder::{build_qubo, default_penalty, qubo_to_ising};
use qaoa_vrp::experiment::{
    reproduce, resolve_instance, run_oracle, run_solve, Experiment, ExperimentConfig,
};
use qaoa_vrp::optimizer::OptimizerKind;
use qaoa_vrp::Error;

#[derive(Parser)]
#[command(
    name = "qaoa-vrp",
    version,
    about = "Vehicle routing with QAOA on an exact statevector simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the QUBO and Ising models of an instance as JSON.
    Build(RunArgs),
    /// Exhaustive ground state, degree-feasible minimum and route optimum.
    Oracle(RunArgs),
    /// Optimize a QAOA schedule, sample the final state and compare with the oracle.
    Solve(RunArgs),
    /// Run one of the bundled experiments with its reference settings.
    Reproduce(ReproduceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    NelderMead,
    CoordinateDescent,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::NelderMead => OptimizerKind::NelderMead,
            OptimizerArg::CoordinateDescent => OptimizerKind::CoordinateDescent,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Preset name (vrp-4-2, vrp-5-2, vrp-5-3) or path to an instance JSON file.
    #[arg(long)]
    instance: Option<String>,
    /// Constraint penalty A; defaults to n * max weight.
    #[arg(short = 'A', long = "penalty")]
    penalty: Option<f64>,
    /// Number of QAOA layers.
    #[arg(short = 'p', long = "depth")]
    depth: Option<usize>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Objective evaluations per start; 0 keeps all angles at zero.
    #[arg(long)]
    budget: Option<usize>,
    /// Number of optimizer starts.
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Measurements of the final state; 0 reports exact probabilities.
    #[arg(long)]
    shots: Option<usize>,
    /// Number of configurations to report.
    #[arg(short = 'k', long = "top")]
    top_k: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON configuration; its fields take precedence over flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the JSON report instead of the text summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Which experiment: exp1, exp2 or exp3.
    experiment: String,
    /// Extra depths to evaluate on the ramp schedule, e.g. 6,12,24,40.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<usize>,
    #[command(flatten)]
    run: RunArgs,
}

impl RunArgs {
    /// `base`, then flags, then the config file.
    fn resolve(&self, mut base: ExperimentConfig) -> Result<ExperimentConfig, Error> {
        if let Some(v) = &self.instance {
            base.instance = v.clone();
        }
        if let Some(v) = self.penalty {
            base.penalty = Some(v);
        }
        if let Some(v) = self.depth {
            base.depth = v;
        }
        if let Some(v) = self.optimizer {
            base.optimizer = v.into();
        }
        if let Some(v) = self.budget {
            base.budget = Some(v);
        }
        if let Some(v) = self.starts {
            base.starts = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.shots {
            base.shots = v;
        }
        if let Some(v) = self.top_k {
            base.top_k = v;
        }
        if let Some(v) = &self.out {
            base.output = Some(v.clone());
        }
        match &self.config {
            Some(path) => overlay(base, path),
            None => Ok(base),
        }
    }
}

/// Replaces the fields of `base` that the file names.
fn overlay(base: ExperimentConfig, path: &Path) -> Result<ExperimentConfig, Error> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let file: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(fields) = file else {
        return Err(Error::Malformed(format!(
            "{}: expected a JSON object",
            path.display()
        )));
    };
    let mut merged = serde_json::to_value(&base).expect("config serializes");
    merged
        .as_object_mut()
        .expect("config is an object")
        .extend(fields);
    ExperimentConfig::from_json(&merged.to_string())
}

fn announce(files: &[PathBuf]) {
    for f in files {
        eprintln!("wrote {}", f.display());
    }
}

fn write_config(config: &ExperimentConfig, dir: &Path) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_json() + "\n")?;
    Ok(path)
}

fn cmd_build(args: &RunArgs) -> Result<(), Error> {
    let config = args.resolve(ExperimentConfig::default())?;
    let inst = resolve_instance(&config.instance)?;
    let penalty = config.penalty.unwrap_or_else(|| default_penalty(&inst));
    let qubo = build_qubo(&inst, penalty)?;
    let ising = qubo_to_ising(&qubo);
    let dir = config.output.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let files = [
        (
            dir.join("qubo.json"),
            serde_json::to_string_pretty(&qubo.to_document()),
        ),
        (
            dir.join("ising.json"),
            serde_json::to_string_pretty(&ising.to_document()),
        ),
    ];
    for (path, text) in &files {
        let text = text.as_ref().expect("models serialize");
        std::fs::write(path, format!("{text}\n"))?;
    }
    let fields = ising.fields().iter().filter(|&&h| h != 0.0).count();
    println!(
        "instance {} (n = {}, k = {})",
        config.instance,
        inst.n(),
        inst.k()
    );
    println!("N = {}", qubo.num_vars());
    println!("quadratic terms = {}", qubo.quadratic_terms().count());
    println!("J terms = {}", ising.couplings().len());
    println!("h terms = {fields}");
    println!("A = {penalty}");
    announce(&files.map(|(p, _)| p));
    Ok(())
}

fn cmd_oracle(args: &RunArgs) -> Result<(), Error> {
    let config = args.resolve(ExperimentConfig::default())?;
    let report = run_oracle(&config)?;
    if args.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.render());
    }
    if let Some(dir) = &config.output {
        announce(&report.write_to(dir)?);
    }
    Ok(())
}

fn cmd_solve(args: &RunArgs) -> Result<(), Error> {
    let config = args.resolve(ExperimentConfig::default())?;
    let report = run_solve(&config)?;
    if args.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.render());
    }
    let dir = config
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut files = report.write_to(&dir)?;
    files.push(write_config(&config, &dir)?);
    announce(&files);
    Ok(())
}

fn cmd_reproduce(args: &ReproduceArgs) -> Result<(), Error> {
    let experiment: Experiment = args.experiment.parse()?;
    let config = args.run.resolve(experiment.default_config())?;
    let report = reproduce(experiment, &config, &args.sweep)?;
    if args.run.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.render());
    }
    let dir = config
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&args.experiment));
    let mut files = report.write_to(&dir)?;
    files.push(write_config(&config, &dir)?);
    announce(&files);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_resource() { 3 } else { 2 })
        }
    }
}
