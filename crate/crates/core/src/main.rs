use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stopmean::harness::{self, Execution, ExperimentConfig};
use stopmean::{DyadicValue, Error, ExactEstimator, QuantizedEstimator};

#[derive(Parser)]
#[command(
    name = "stopmean",
    version,
    about = "Conditional-mean estimation along recurrence stopping times"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write trace.csv and metadata.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run N seeds (in parallel) and write per-seed CSVs plus summary.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run replicates one at a time.
        #[arg(long)]
        serial: bool,
    },
    /// Replay a fixed pattern and print the completions of both estimators.
    Trace {
        /// Comma-separated values, e.g. 0,1,0 or 0,1*2^-33.
        #[arg(long, value_delimiter = ',', required = true)]
        pattern: Vec<String>,
        #[arg(long)]
        levels: u64,
        #[arg(long, default_value_t = 10_000_000)]
        max_samples: u64,
    },
    /// Recompute the summary from a run or sweep output directory.
    Summary {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print a preset experiment config as JSON.
    Preset { name: String },
}

fn output_dir(out: Option<PathBuf>, config: &ExperimentConfig) -> Result<PathBuf, Error> {
    out.or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::Config("no output directory: pass --out or set output_dir".into()))
}

fn trace(pattern: &[String], levels: u64, max_samples: u64) -> Result<(), Error> {
    let values = pattern
        .iter()
        .map(|s| s.parse::<DyadicValue>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::Config(e.to_string()))?;
    if values.is_empty() || levels == 0 {
        return Err(Error::Config(
            "need a non-empty pattern and --levels >= 1".into(),
        ));
    }
    let mut quantized = QuantizedEstimator::new().with_max_level(levels);
    let mut exact = ExactEstimator::new().with_max_level(levels);
    let mut t = 0u64;
    while t < max_samples && !(quantized.is_finished() && exact.is_finished()) {
        let x = values[(t % values.len() as u64) as usize];
        quantized.step(x);
        exact.step(x);
        t += 1;
    }
    println!("n,lambda_n,m_n,lambda_prime_n,m_prime_n");
    let q = quantized.completions();
    let e = exact.completions();
    for i in 0..q.len().max(e.len()) {
        let (lq, mq) = q.get(i).map_or((String::new(), String::new()), |c| {
            (c.lambda.to_string(), c.estimate.to_string())
        });
        let (le, me) = e.get(i).map_or((String::new(), String::new()), |c| {
            (c.lambda.to_string(), c.estimate.to_string())
        });
        println!("{},{lq},{mq},{le},{me}", i + 1);
    }
    if !(quantized.is_finished() && exact.is_finished()) {
        return Err(Error::BudgetExhausted {
            seed: 0,
            budget: max_samples,
            reached: quantized.completed_levels().min(exact.completed_levels()),
            required: levels,
        });
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let out = output_dir(out, &config)?;
            let results = harness::run(&config, &out)?;
            for r in &results {
                eprintln!(
                    "seed {}: {} samples, deepest level {}",
                    r.seed,
                    r.samples,
                    r.deepest_level()
                );
            }
        }
        Command::Sweep {
            config,
            seeds,
            out,
            serial,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let out = output_dir(out, &config)?;
            let execution = if serial {
                Execution::Serial
            } else {
                Execution::Parallel
            };
            let output = harness::sweep(&config, seeds, &out, execution)?;
            println!("{}", serde_json::to_string_pretty(&output.summary)?);
        }
        Command::Trace {
            pattern,
            levels,
            max_samples,
        } => trace(&pattern, levels, max_samples)?,
        Command::Summary { input } => {
            let summary = harness::summarize_dir(&input)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Preset { name } => {
            let config = harness::preset(&name)?;
            println!("{}", serde_json::to_string_pretty(&config)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
