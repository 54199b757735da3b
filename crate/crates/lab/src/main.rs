use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use hjcone_lab::{emit, run_suite, Experiment, ExperimentConfig, LabError};

/// Run one experiment and write its CSV and JSON outputs.
#[derive(Parser, Debug)]
#[command(name = "lab", version)]
struct Cli {
    /// converge | identity-suite | fenchel-suite | hopf-suite | concentration | nonsym-demo
    experiment: Experiment,
    /// JSON configuration; the built-in default for the experiment when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
                path: path.clone(),
                source,
            })?;
            ExperimentConfig::from_json_str(&text)?
        }
        None => ExperimentConfig::default_for(cli.experiment),
    };
    if cfg.experiment != cli.experiment {
        return Err(LabError::Config(format!(
            "config is for {}, not {}",
            cfg.experiment, cli.experiment
        )));
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool, LabError> {
    let cfg = load(cli)?;
    if cli.print_config {
        println!("{}", cfg.to_pretty_json());
        return Ok(true);
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    }
    let rep = run_suite(&cfg)?;
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let paths = emit(&cfg, &rep, &dir)?;
    for c in &rep.checks {
        println!(
            "{} {} = {} {} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.statistic,
            c.relation.symbol(),
            c.threshold
        );
    }
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(rep.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
