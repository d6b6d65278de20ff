mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use clickboost::analytics::DEFAULT_MIN_OCCURRENCES;

/// Student performance prediction from clickstream logs.
#[derive(Debug, Parser)]
#[command(name = "clickboost", version, about)]
pub struct Cli {
    /// Worker threads for parallel stages (default: number of cores)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Global seed; takes precedence over CLICKTREE_SEED and the config file
    #[arg(long, global = true, value_name = "S")]
    pub seed: Option<u64>,
    /// JSON run configuration; every section is optional
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RowSet {
    All,
    Train,
    Valid,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset and its ground_truth.csv
    Generate {
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the feature table for labeled rows
    Featurize {
        /// Directory holding the five dataset CSVs
        #[arg(long)]
        data: PathBuf,
        /// Which side of the student-disjoint split to featurize
        #[arg(long, value_enum, default_value_t = RowSet::All)]
        rows: RowSet,
        /// Apply this column mask instead of fitting one
        #[arg(long, value_name = "FILE")]
        reuse_mask: Option<PathBuf>,
        /// Skip unknown action names instead of failing
        #[arg(long)]
        lenient: bool,
        /// Output directory (features.csv, plus mask.json when fitted)
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a boosted-tree model
    Train {
        /// Training feature table
        #[arg(long)]
        features: PathBuf,
        /// Validation feature table for early stopping
        #[arg(long)]
        valid: PathBuf,
        /// Training parameters JSON (defaults to the config's train section)
        #[arg(long)]
        params: Option<PathBuf>,
        /// Model file to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict score probabilities for a feature table
    Predict {
        /// Model file
        #[arg(long)]
        model: PathBuf,
        /// Feature table
        #[arg(long)]
        features: PathBuf,
        /// Predictions CSV to write
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the AUC of predictions against labels as JSON
    Evaluate {
        /// Predictions CSV
        #[arg(long)]
        preds: PathBuf,
        /// Labels CSV
        #[arg(long)]
        labels: PathBuf,
    },
    /// Write difficulty and cohort reports
    Analyze {
        /// Directory holding the five dataset CSVs
        #[arg(long)]
        data: PathBuf,
        /// Minimum rows per group in difficulty tables
        #[arg(long, default_value_t = DEFAULT_MIN_OCCURRENCES)]
        min_occurrences: usize,
        /// Skip unknown action names instead of failing
        #[arg(long)]
        lenient: bool,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomized hyperparameter search ranked by validation AUC
    Search {
        /// Training feature table
        #[arg(long)]
        features: PathBuf,
        /// Validation feature table
        #[arg(long)]
        valid: PathBuf,
        /// Grid JSON (defaults to the config's grid section)
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Number of configurations to evaluate
        #[arg(long)]
        budget: Option<usize>,
        /// Ranking JSON to write (printed to standard output otherwise)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate or load data, then featurize, train, predict, evaluate and analyze
    Pipeline {
        /// Use this dataset instead of generating one
        #[arg(long)]
        data: Option<PathBuf>,
        /// Artifact directory (defaults to the config's paths.out)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args_os()) as u8)
}
