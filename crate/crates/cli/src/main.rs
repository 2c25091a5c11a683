//! `lmgen`: build population fingerprints of language models, compare them,
//! draw their phylogeny, and predict benchmark scores from similarity.

mod commands;
mod config;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunFlags;
use lmgen_core::tree::Layout;

#[derive(Parser)]
#[command(
    name = "lmgen",
    version,
    about = "Population-genetic fingerprints of language models"
)]
struct Cli {
    /// Log level filter (overridden by RUST_LOG)
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample gene contexts from a line-per-record corpus
    Genes {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 128)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = lmgen_core::genome::DEFAULT_MIN_CUT)]
        min_cut: usize,
        #[arg(long, default_value_t = lmgen_core::genome::DEFAULT_MAX_CUT)]
        max_cut: usize,
        /// Wrap every context in a chat template: PREFIX and SUFFIX
        #[arg(long, num_args = 2, value_names = ["PREFIX", "SUFFIX"])]
        template: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collect population profiles for roster models
    Probe {
        #[command(flatten)]
        run: RunFlags,
        /// Model ids to probe (default: the whole roster)
        models: Vec<String>,
    },
    /// Similarity and distance matrices from profiles
    Matrix {
        #[arg(long, num_args = 1.., required = true)]
        profiles: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Neighbor-Joining tree as Newick and SVG
    Tree {
        #[arg(long)]
        distance: PathBuf,
        /// JSON with `leaf_family` and `colors` maps
        #[arg(long)]
        colors: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "radial")]
        layout: LayoutArg,
        /// Output path prefix; writes PREFIX.nwk and PREFIX.svg
        #[arg(long)]
        out: PathBuf,
    },
    /// RMS contrast of the similarity matrix per allele length
    Contrast {
        #[arg(long, num_args = 1.., required = true)]
        profiles: Vec<PathBuf>,
        /// Allele lengths, e.g. 1,2,3,4 (default: 1 up to the profiles' width)
        #[arg(long, value_delimiter = ',')]
        lengths: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Variability or oracle-deviation scan over a (genes x probes) grid
    Hyperscan {
        #[command(flatten)]
        run: RunFlags,
        /// Cells as GxN, e.g. 16x8,32x8
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<String>,
        #[arg(long, default_value_t = 8)]
        replicates: usize,
        /// Oracle size GxN; its genes are the first G of the gene pool
        #[arg(long)]
        oracle: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-family-out benchmark prediction from a similarity matrix
    Predict {
        #[arg(long)]
        similarity: PathBuf,
        /// CSV with columns model,family,<benchmark>...
        #[arg(long)]
        benchmarks: PathBuf,
        #[arg(long)]
        benchmark: String,
        #[arg(long, default_value_t = lmgen_core::predict::DEFAULT_COMPONENTS)]
        components: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        exclude_heldout_columns: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a synthetic roster from a lineage spec and check tree recovery
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Genes used for the end-to-end check (default: min(128, spec gene count))
        #[arg(long)]
        genes: Option<usize>,
        #[arg(long, default_value_t = 32)]
        probes: u64,
        #[arg(long, default_value_t = lmgen_core::population::DEFAULT_ALLELE_CHARS)]
        allele_chars: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum LayoutArg {
    Radial,
    Rectangular,
}

impl From<LayoutArg> for Layout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Radial => Layout::Radial,
            LayoutArg::Rectangular => Layout::Rectangular,
        }
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Genes {
            corpus,
            count,
            seed,
            min_cut,
            max_cut,
            template,
            out,
        } => commands::genes(
            &corpus,
            count,
            seed,
            min_cut,
            max_cut,
            template.as_deref(),
            &out,
        ),
        Command::Probe { run, models } => commands::probe(&run.resolve()?, &models),
        Command::Matrix { profiles, out_dir } => commands::matrix(&profiles, &out_dir),
        Command::Tree {
            distance,
            colors,
            layout,
            out,
        } => commands::tree(&distance, colors.as_deref(), layout.into(), &out),
        Command::Contrast {
            profiles,
            lengths,
            out,
        } => commands::contrast(&profiles, &lengths, out.as_deref()),
        Command::Hyperscan {
            run,
            grid,
            replicates,
            oracle,
            out,
        } => commands::hyperscan(&run.resolve()?, &grid, replicates, oracle.as_deref(), &out),
        Command::Predict {
            similarity,
            benchmarks,
            benchmark,
            components,
            seed,
            epochs,
            learning_rate,
            exclude_heldout_columns,
            out,
        } => {
            let mut opts = lmgen_core::predict::LofoOptions {
                components,
                seed,
                exclude_heldout_columns,
                ..Default::default()
            };
            opts.train.seed = seed;
            if let Some(e) = epochs {
                opts.train.epochs = e;
            }
            if let Some(lr) = learning_rate {
                opts.train.learning_rate = lr;
            }
            commands::predict(&similarity, &benchmarks, &benchmark, &opts, out.as_deref())
        }
        Command::Synth {
            spec,
            seed,
            genes,
            probes,
            allele_chars,
            out,
        } => commands::synth(&spec, seed, genes, probes, allele_chars, &out),
    }
}

/// The error chain joined with ": ", skipping causes already spelled out by
/// their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log)).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = fail::classify(&e);
            eprintln!("error: {}", describe(&e));
            println!("status=error class={}", class.name());
            ExitCode::from(class.exit_code() as u8)
        }
    }
}
