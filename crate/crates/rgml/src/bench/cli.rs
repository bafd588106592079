//! Command-line front end of the benchmark harness.
//!
//! Exit codes: 0 success, 2 usage error, 1 runtime failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;

use super::{cross_validate, ExperimentConfig, Method};
use crate::bench::dataset::LabelColumn;

#[derive(Debug, Parser)]
#[command(
    name = "rgml-bench",
    about = "Mahalanobis k-NN benchmark over learned SPD metrics",
    disable_help_subcommand = true
)]
struct Cli {
    /// CSV dataset: one row per sample, numeric features plus a label column.
    #[arg(long)]
    dataset: PathBuf,

    /// Label column, as a zero-based index or a header name.
    #[arg(long, default_value = "0")]
    label_col: String,

    /// Metric-fitting method.
    #[arg(long, value_parser = ["euclidean", "scm", "gmml", "rgml_gaussian", "rgml_tyler"])]
    method: String,

    /// Geodesic interpolation parameter of the gmml method, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    gmml_t: f64,

    /// Regularization weight of the center pull.
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,

    /// Fraction of training labels randomly changed, in [0, 1).
    #[arg(long, default_value_t = 0.0)]
    mislabel_rate: f64,

    /// Number of cross-validation repeats.
    #[arg(long, default_value_t = 200)]
    repeats: usize,

    /// Training share of each stratified split.
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,

    /// Neighbors of the k-NN vote.
    #[arg(long, default_value_t = 5)]
    k: usize,

    /// Pair budget factor: n_S = n_D = factor * K * (K - 1).
    #[arg(long, default_value_t = 75)]
    pairs_factor: usize,

    /// Master seed; per-repeat generators derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Z-score features using training statistics.
    #[arg(long, default_value_t = false)]
    standardize: bool,

    /// Write the solver trace CSV here (single-repeat rgml runs only).
    #[arg(long)]
    trace_out: Option<PathBuf>,

    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` and runs the experiment, returning the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };

    let method = match cli.method.as_str() {
        "euclidean" => Method::Euclidean,
        "scm" => Method::Scm,
        "gmml" => Method::Gmml { t: cli.gmml_t },
        "rgml_gaussian" => Method::RgmlGaussian,
        "rgml_tyler" => Method::RgmlTyler,
        other => return usage_error(&format!("unknown method {other:?}")),
    };
    if let Method::Gmml { t } = method {
        if !(0.0..=1.0).contains(&t) {
            return usage_error(&format!("--gmml-t must be in [0, 1], got {t}"));
        }
    }
    if cli.trace_out.is_some() {
        if !method.is_rgml() {
            return usage_error("--trace-out requires an rgml method");
        }
        if cli.repeats != 1 {
            return usage_error("--trace-out requires --repeats 1");
        }
    }

    let label_column: LabelColumn = cli.label_col.parse().unwrap();
    let mut config = ExperimentConfig::new(cli.dataset, label_column, method);
    config.lambda = cli.lambda;
    config.mislabel_rate = cli.mislabel_rate;
    config.repeats = cli.repeats;
    config.train_fraction = cli.train_fraction;
    config.k_neighbors = cli.k;
    config.pairs_factor = cli.pairs_factor;
    config.seed = cli.seed;
    config.standardize = cli.standardize;
    if let Err(e) = config.validate() {
        return usage_error(&e.to_string());
    }

    let (record, trace) = match cross_validate(&config) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };

    if let Some(path) = &cli.trace_out {
        let trace = match trace {
            Some(t) => t,
            None => {
                eprintln!("error: no solver trace was produced");
                return 1;
            }
        };
        if let Err(e) = File::create(path).and_then(|f| trace.write_csv(f)) {
            eprintln!("error: failed to write trace to {}: {e}", path.display());
            return 1;
        }
    }

    let json = match serde_json::to_string_pretty(&record) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match &cli.out {
        Some(path) => {
            if let Err(e) =
                File::create(path).and_then(|mut f| writeln!(f, "{json}"))
            {
                eprintln!("error: failed to write {}: {e}", path.display());
                return 1;
            }
        }
        None => println!("{json}"),
    }
    0
}

fn usage_error(message: &str) -> i32 {
    eprintln!("error: {message}");
    2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_dataset_is_usage_error() {
        let code = run_cli(["rgml-bench", "--method", "euclidean"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn gmml_t_out_of_range_is_usage_error() {
        let code = run_cli([
            "rgml-bench",
            "--dataset",
            "does-not-matter.csv",
            "--method",
            "gmml",
            "--gmml-t",
            "1.5",
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn trace_out_needs_single_rgml_repeat() {
        let code = run_cli([
            "rgml-bench",
            "--dataset",
            "x.csv",
            "--method",
            "euclidean",
            "--trace-out",
            "t.csv",
        ]);
        assert_eq!(code, 2);
        let code = run_cli([
            "rgml-bench",
            "--dataset",
            "x.csv",
            "--method",
            "rgml_tyler",
            "--repeats",
            "2",
            "--trace-out",
            "t.csv",
        ]);
        assert_eq!(code, 2);
    }

    #[test]
    fn unreadable_dataset_is_runtime_error() {
        let code = run_cli([
            "rgml-bench",
            "--dataset",
            "/definitely/not/here.csv",
            "--method",
            "euclidean",
            "--repeats",
            "1",
        ]);
        assert_eq!(code, 1);
    }
}
