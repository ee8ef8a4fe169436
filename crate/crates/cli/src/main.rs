use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use postlabel::error::{Error, Result};
use postlabel::nn::{grad_check_suite, GRAD_CHECK_TOLERANCE};
use postlabel::pipeline::{self, Artifacts, Manifest, PipelineConfig, Stage, MANIFEST_FILE};

/// Unsupervised sentiment labeling of social-media posts and neural
/// classifiers trained on the generated labels.
#[derive(Debug, Parser)]
#[command(name = "postlabel", version)]
struct Cli {
    #[command(flatten)]
    global: Global,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Pipeline configuration (TOML). Defaults apply to omitted keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Overrides `[pipeline] seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Overrides `[pipeline] out_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read the configured JSON-lines inputs into corpus.jsonl.
    Ingest,
    /// Normalize, stem and deduplicate the corpus.
    Preprocess,
    /// Build the vocabulary and TF-IDF matrix.
    Vectorize,
    /// Fit k-means for every configured k.
    Cluster,
    /// Embed the TF-IDF rows in 2-D with t-SNE.
    Embed,
    /// Fit LDA topic models.
    Topics,
    /// Map clusters to sentiment labels.
    Label,
    /// Train the experiment grid.
    Train,
    /// Classification reports on the test split.
    Evaluate,
    /// Tables and figures.
    Report,
    /// Every stage in order, with a fresh manifest.
    RunAll,
    /// Generate a synthetic corpus with planted sentiment instead of reading inputs.
    Synth(SynthArgs),
    /// Compare network gradients against finite differences.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Documents per category (overrides `[synth]`).
    #[arg(long)]
    n_docs_per_category: Option<usize>,
    /// Fraction of noise tokens per document (overrides `[synth]`).
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Args)]
struct GradCheckArgs {
    /// Random instances per (architecture, dropout) pair.
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Input width of the probe networks.
    #[arg(long, default_value_t = 12)]
    input_dim: usize,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = GRAD_CHECK_TOLERANCE)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.global.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(global: &Global) -> Result<PipelineConfig> {
    let cwd = std::env::current_dir().map_err(|e| Error::io(".", e))?;
    let mut config = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::from_toml("", &cwd)?,
    };
    if let Some(seed) = global.seed {
        config.pipeline.seed = seed;
    }
    if let Some(out) = &global.out {
        config.pipeline.out_dir = cwd.join(out);
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(Error::config("pipeline", "--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("pipeline", e.to_string()))?;
    }
    let mut config = load_config(&cli.global)?;
    let out = config.resolve(&config.pipeline.out_dir);
    let stage = match cli.command {
        Command::Ingest => Stage::Ingest,
        Command::Preprocess => Stage::Preprocess,
        Command::Vectorize => Stage::Vectorize,
        Command::Cluster => Stage::Cluster,
        Command::Embed => Stage::Embed,
        Command::Topics => Stage::Topics,
        Command::Label => Stage::Label,
        Command::Train => Stage::Train,
        Command::Evaluate => Stage::Evaluate,
        Command::Report => {
            pipeline::run_stage(Stage::Report, &config)?;
            print_tables(&out)?;
            return Ok(());
        }
        Command::RunAll => {
            let manifest = pipeline::run_all(&config)?;
            print_tables(&out)?;
            summarize(&out, &manifest);
            return Ok(());
        }
        Command::Synth(args) => {
            let mut synth = config.synth.take().unwrap_or_default();
            if let Some(n) = args.n_docs_per_category {
                synth.n_docs_per_category = n;
            }
            if let Some(noise) = args.noise {
                synth.noise_fraction = noise;
            }
            config.synth = Some(synth);
            config.ingest.inputs.clear();
            config.validate()?;
            Stage::Ingest
        }
        Command::GradCheck(args) => return grad_check(&args, config.pipeline.seed, &out),
    };
    let manifest = pipeline::run_stage(stage, &config)?;
    summarize(&out, &manifest);
    Ok(())
}

fn summarize(out: &Path, manifest: &Manifest) {
    info!(
        "{} artifacts listed in {}",
        manifest.entries.len(),
        out.join(MANIFEST_FILE).display()
    );
}

fn print_tables(out: &Path) -> Result<()> {
    for name in ["tables/table2.txt", "tables/table3.txt"] {
        let path = out.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        println!("{text}");
    }
    let planted = out.join(pipeline::PLANTED_ACCURACY);
    if planted.is_file() {
        let f = std::fs::File::open(&planted).map_err(|e| Error::io(&planted, e))?;
        println!("test accuracy against planted labels");
        for (run, acc) in pipeline::read_planted_accuracy(std::io::BufReader::new(f))? {
            println!("  {:<24} {:.4}", run.name(), acc);
        }
    }
    Ok(())
}

fn grad_check(args: &GradCheckArgs, seed: u64, out: &Path) -> Result<()> {
    let report = grad_check_suite(args.input_dim, args.classes, args.trials, args.tolerance, seed)?;
    let text = report.render();
    print!("{text}");
    let mut art = Artifacts::open(out)?;
    art.write("reports/grad_check.tsv", text.as_bytes())?;
    art.write_manifest(None)?;
    if report.passed() {
        Ok(())
    } else {
        Err(Error::Numeric(format!(
            "gradient check failed: max relative error {:.3e} exceeds {:.1e}",
            report.max_rel_err, report.tolerance
        )))
    }
}
