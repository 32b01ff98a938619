use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pathlab_cli::{emit, registry, run_experiment, ExperimentConfig, OutputFormat};

#[derive(Parser)]
#[command(name = "pathlab", version, about = "Numerical experiments on path-space expectation operators")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "PATHLAB_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its results.
    Run {
        #[arg(short, long)]
        experiment: Option<String>,
        /// TOML file with configuration keys; flags override it.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        inner: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        z_threshold: Option<f64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(short, long, value_enum)]
        format: Option<OutputFormat>,
    },
    /// List the registered experiments.
    List {
        #[arg(long)]
        json: bool,
        #[arg(long)]
        tag: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match cli.command {
        Command::List { json, tag } => {
            let entries = registry::list(tag.as_deref());
            if json {
                match serde_json::to_string_pretty(&entries) {
                    Ok(s) => println!("{s}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                }
            } else {
                print!("{}", registry::render_table(&entries));
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            experiment,
            config,
            seed,
            samples,
            inner,
            dt,
            horizon,
            z_threshold,
            out,
            format,
        } => {
            let mut cfg = match config {
                Some(path) => match ExperimentConfig::load(&path) {
                    Ok(c) => c,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(2);
                    }
                },
                None => ExperimentConfig::default(),
            };
            if let Some(v) = experiment {
                cfg.experiment = v;
            }
            if let Some(v) = seed {
                cfg.base_seed = v;
            }
            if let Some(v) = samples {
                cfg.n_samples = v;
            }
            if let Some(v) = inner {
                cfg.n_inner = v;
            }
            if let Some(v) = dt {
                cfg.dt = v;
            }
            if let Some(v) = horizon {
                cfg.horizon = v;
            }
            if let Some(v) = z_threshold {
                cfg.z_threshold = v;
            }
            if let Some(v) = out {
                cfg.output = v;
            }
            if let Some(v) = format {
                cfg.format = v;
            }
            run(&cfg)
        }
    }
}

fn run(cfg: &ExperimentConfig) -> ExitCode {
    let result = match run_experiment(cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let files = match emit(&result, &cfg.output, cfg.format) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    println!("{} ({}): {}", result.experiment, result.name, if result.pass { "PASS" } else { "FAIL" });
    for (k, v) in &result.headline {
        println!("  {k} = {v:.6e}");
    }
    for c in result.failed_checks() {
        println!("  failed: {}/{} = {:.6e} ({:?} {:.3e})", c.section, c.name, c.value, c.relation, c.bound);
    }
    for f in files {
        println!("  wrote {}", f.display());
    }
    if result.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
