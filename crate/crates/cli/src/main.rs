//! `mibci`: offline motor-imagery EEG toolkit.
//!
//! Exit status: 0 on success, 1 for validation, configuration and I/O
//! errors, 2 for numerical failures (ill-conditioned covariances, degenerate
//! epochs, solver non-convergence).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mibci_core::model::io::FORMAT_VERSIONS;

#[derive(Debug, Parser)]
#[command(
    name = "mibci",
    about = "Motor-imagery BCI analysis: plan, simulate, filter, CSP, SVM, cross-validate"
)]
#[command(disable_version_flag = true)]
pub struct Cli {
    /// Print the version and supported file formats.
    #[arg(short = 'V', long, global = true)]
    version: bool,

    /// Validate inputs and report what would be written, without writing.
    #[arg(long, global = true)]
    dry_run: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ParadigmArg {
    Arrow,
    Writing,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Causal,
    #[value(alias = "zero_phase")]
    ZeroPhase,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassArg {
    #[value(name = "L", alias = "l")]
    L,
    #[value(name = "R", alias = "r")]
    R,
    All,
}

#[derive(Debug, Args)]
pub struct BandArgs {
    #[arg(long, default_value_t = 8.0)]
    pub low: f64,
    #[arg(long, default_value_t = 30.0)]
    pub high: f64,
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::ZeroPhase)]
    pub mode: ModeArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded trial sequence (plan-v1 JSON).
    Plan {
        #[arg(long, value_enum)]
        paradigm: ParadigmArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        trials_per_run: Option<usize>,
        /// CSV `character,strokes`; defaults to the bundled characters.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize a recording (csv-v1) and its markers (tsv-v1) from a plan.
    Simulate {
        #[arg(long)]
        plan: PathBuf,
        /// Synthesizer JSON; omitted fields take their defaults.
        #[arg(long)]
        cfg: Option<PathBuf>,
        /// Overrides the seed in `--cfg`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        markers: PathBuf,
    },
    /// Cut labelled trial windows out of a recording (epk-v1).
    Epoch {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        markers: PathBuf,
        #[arg(long, num_args = 2, value_names = ["START", "END"], default_values_t = [3.0, 7.0])]
        window: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Butterworth band-pass every trial of an epoch file.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        band: BandArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Welch power spectral density averaged over trials.
    Psd {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ClassArg::All)]
        class: ClassArg,
        #[arg(long, default_value_t = 250)]
        seg_len: usize,
        #[arg(long, default_value_t = 0.5)]
        overlap: f64,
        /// Montage CSV `channel,x,y` naming the columns.
        #[arg(long)]
        montage: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit common spatial patterns on an epoch file.
    CspFit {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = mibci_core::spatial::DEFAULT_PAIRS)]
        pairs: usize,
        #[arg(long, default_value_t = mibci_core::spatial::DEFAULT_RIDGE)]
        ridge: f64,
        #[arg(long)]
        montage: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the selected CSP patterns with electrode positions.
    PatternsExport {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        montage: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalized log-variance CSP features for every trial.
    Features {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a linear soft-margin SVM on a feature CSV.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = mibci_core::classify::DEFAULT_C)]
        c: f64,
        /// Solve on raw features instead of standardized ones.
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated stratified k-fold cross-validation of filter, CSP and SVM.
    Crossval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        markers: PathBuf,
        #[arg(long, num_args = 2, value_names = ["START", "END"], default_values_t = [3.0, 7.0])]
        window: Vec<f64>,
        #[command(flatten)]
        band: BandArgs,
        #[arg(long, default_value_t = mibci_core::spatial::DEFAULT_PAIRS)]
        pairs: usize,
        #[arg(long, default_value_t = mibci_core::spatial::DEFAULT_RIDGE)]
        ridge: f64,
        #[arg(long, default_value_t = mibci_core::classify::DEFAULT_C, conflicts_with = "inner_cv")]
        c: f64,
        /// Choose c per training fold by inner 5-fold CV.
        #[arg(long)]
        inner_cv: bool,
        #[arg(long, default_value_t = 10)]
        repeats: usize,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Paired two-tailed t-test between two columns of values.
    Ttest {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
    },
    /// Mean and sd of 1-5 ratings per condition (`subject,condition,response`).
    Likert {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run a whole experiment from a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides MIBCI_OUTPUT_DIR and the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

pub const OUTPUT_DIR_ENV: &str = "MIBCI_OUTPUT_DIR";

fn version_text() -> String {
    format!(
        "mibci {} (formats: {})",
        env!("CARGO_PKG_VERSION"),
        FORMAT_VERSIONS.join(", ")
    )
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<mibci_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.version {
        println!("{}", version_text());
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return ExitCode::from(1);
    };
    match commands::execute(command, cli.dry_run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
