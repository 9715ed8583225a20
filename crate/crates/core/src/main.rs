use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use paretofuse::cli::{self, Overrides};
use paretofuse::stats::Alternative;
use paretofuse::synth::SynthSpec;

#[derive(Parser)]
#[command(
    name = "paretofuse",
    version,
    about = "Feature selection for regression: swarm-searched elastic net subsets fused from the Pareto front"
)]
struct Cli {
    /// Master seed; overrides the config file and PARETOFUSE_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config file and PARETOFUSE_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 or absent = automatic). Results do not depend
    /// on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess, run the swarm search, fuse the Pareto set.
    ///
    /// Writes pareto.json, fusion.json and pareto_front.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the GA-LR scenario grid and the elastic net lambda grid.
    ///
    /// Writes benchmarks.json.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Include wall-clock timings (makes the output non-reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Wilcoxon signed-rank comparison across report files.
    ///
    /// Writes wilcoxon.csv.
    Compare {
        /// fusion.json / benchmarks.json files to compare.
        #[arg(required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
        /// Metric to pair: "rmse" (per fold) or one of train_rmse_cv,
        /// test_rmse, train_r2_adj, test_r2_adj (per report file).
        #[arg(long = "metric", default_values_t = vec![String::from("rmse")])]
        metrics: Vec<String>,
        #[arg(long, value_enum, default_value_t = AlternativeArg::ALess)]
        alternative: AlternativeArg,
    },
    /// Generate a synthetic dataset with a known informative subset.
    ///
    /// Writes <name>.csv, <name>.schema and <name>.truth.json.
    Synth {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        informative: usize,
        #[arg(long, default_value_t = 20)]
        noise: usize,
        /// Standard deviation of the additive Gaussian noise.
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 3.0)]
        coef_min: f64,
        #[arg(long, default_value_t = 4.0)]
        coef_max: f64,
        /// Output file stem.
        #[arg(long, default_value = "synth")]
        name: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AlternativeArg {
    TwoSided,
    ALess,
    AGreater,
}

impl From<AlternativeArg> for Alternative {
    fn from(value: AlternativeArg) -> Alternative {
        match value {
            AlternativeArg::TwoSided => Alternative::TwoSided,
            AlternativeArg::ALess => Alternative::ALess,
            AlternativeArg::AGreater => Alternative::AGreater,
        }
    }
}

fn main() -> ExitCode {
    let args = Cli::parse();
    if let Some(threads) = args.threads {
        cli::configure_threads(threads);
    }
    let overrides = Overrides { seed: args.seed, out: args.out };

    let outcome = match args.command {
        Command::Run { config } => cli::cmd_run(&config, &overrides),
        Command::Benchmark { config, timings } => cli::cmd_benchmark(&config, &overrides, timings),
        Command::Compare { reports, metrics, alternative } => {
            cli::cmd_compare(&reports, &metrics, alternative.into(), &overrides)
        }
        Command::Synth { n, informative, noise, sigma, coef_min, coef_max, name } => {
            let spec = SynthSpec {
                n,
                informative,
                noise,
                noise_sigma: sigma,
                coef_range: (coef_min, coef_max),
                seed: 42,
            };
            cli::cmd_synth(&spec, &name, &overrides)
                .map(|files| vec![files.csv, files.schema, files.truth])
        }
    };

    match outcome {
        Ok(paths) => {
            for path in paths {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
