//! The `obfugraph` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cfg::{read_corpus, write_corpus, FunctionSample, Obfuscation};
use crate::dataset::{
    audit_leakage, dedupe_shared_functions, split_per_binary, split_per_function, SplitManifest, SplitSet,
    DEFAULT_BINS, DEFAULT_RATIOS, DEFAULT_VAL_RATIO,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, run_benchmark, BenchmarkSpec, Mode, Task};
use crate::features::{default_taxonomy, export_features, FeatureScheme, Featurizer, MnemonicClassTaxonomy};
use crate::model::{train_model, Algorithm, TrainSpec, TrainedModel};
use crate::synth::{gen_corpus, GeneratorConfig};

#[derive(Debug, Parser)]
#[command(name = "obfugraph", version, about = "Obfuscation detection over attributed control-flow graphs")]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Assign functions to train/validation/test.
    Split(SplitArgs),
    /// Export feature vectors or node matrices as JSON lines.
    Featurize(FeaturizeArgs),
    /// Train a classifier.
    Train(TrainArgs),
    /// Score a trained classifier.
    Eval(EvalArgs),
    /// Train and score every cell of a benchmark file.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StrategyArg {
    PerFunction,
    PerBinary,
}

fn parse_scheme(s: &str) -> std::result::Result<FeatureScheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_label(s: &str) -> std::result::Result<Obfuscation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn label_names<S: serde::Serializer>(labels: &[Obfuscation], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(labels.iter().map(|l| l.name()))
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    /// Generator configuration (TOML or JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    /// Overrides `n_functions` of the configuration.
    #[arg(long)]
    n_functions: Option<usize>,
    /// Obfuscation labels to emit per base function (default: all eleven).
    #[arg(long, value_delimiter = ',', value_parser = parse_label)]
    #[serde(serialize_with = "label_names")]
    variants: Vec<Obfuscation>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long)]
    seed: u64,
    /// Train, validation and test fractions (per-function).
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RATIOS)]
    ratios: Vec<f64>,
    /// Quantile bins of the block count used for stratification.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Projects used for training (per-binary).
    #[arg(long, value_delimiter = ',')]
    train_projects: Vec<String>,
    /// Projects held out for testing (per-binary).
    #[arg(long, value_delimiter = ',')]
    test_projects: Vec<String>,
    /// Fraction of the training projects' functions kept for validation (per-binary).
    #[arg(long, default_value_t = DEFAULT_VAL_RATIO)]
    val_ratio: f64,
    /// Remove functions shared between projects before splitting; the reduced corpus is
    /// written next to the manifest.
    #[arg(long)]
    dedupe: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct FeaturizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_parser = parse_scheme)]
    features: FeatureScheme,
    /// Fit corpus-dependent state on the training set of this manifest instead of the whole corpus.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Mnemonic-class table replacing the built-in one.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// rf, gb, gcn, sage or gin.
    #[arg(long, value_parser = parse_algorithm)]
    model: Algorithm,
    #[arg(long, value_parser = parse_scheme)]
    features: FeatureScheme,
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long, value_parser = parse_mode, default_value = "obfuscated-only")]
    mode: Mode,
    #[arg(long)]
    seed: u64,
    /// Training configuration (TOML or JSON) with `trees`, `tree_grid`, `gnn` or `search` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Keep degenerate samples.
    #[arg(long)]
    keep_degenerate: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SetArg {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long, value_parser = parse_mode, default_value = "obfuscated-only")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "test")]
    set: SetArg,
    /// Name written in the report's dataset field.
    #[arg(long, default_value = "dataset")]
    dataset: String,
    #[arg(long)]
    keep_degenerate: bool,
    /// Report path; a CSV twin is written alongside.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BenchmarkArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Benchmark cells (TOML or JSON).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct RunConfig<'a, A: Serialize, R: Serialize> {
    version: &'static str,
    command: &'static str,
    args: &'a A,
    resolved: R,
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(suffix);
    out.with_file_name(name)
}

fn write_run_config<A: Serialize, R: Serialize>(path: &Path, command: &'static str, args: &A, resolved: R) -> Result<()> {
    let config = RunConfig {
        version: env!("CARGO_PKG_VERSION"),
        command,
        args,
        resolved,
    };
    std::fs::write(path, serde_json::to_string_pretty(&config)?)?;
    Ok(())
}

fn load_taxonomy(path: &Option<PathBuf>) -> Result<MnemonicClassTaxonomy> {
    match path {
        Some(p) => MnemonicClassTaxonomy::load(p),
        None => Ok(default_taxonomy().clone()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn cmd_synth(args: &SynthArgs) -> Result<ExitCode> {
    let mut config = match &args.config {
        Some(p) => GeneratorConfig::load(p)?,
        None => GeneratorConfig::default(),
    };
    config.seed = args.seed;
    if let Some(n) = args.n_functions {
        config.n_functions = n;
    }
    let variants = if args.variants.is_empty() {
        Obfuscation::OBFUSCATED.to_vec()
    } else {
        args.variants.clone()
    };
    let corpus = gen_corpus(&config, &variants)?;
    write_corpus(create(&args.out)?, &corpus)?;
    std::fs::write(sidecar(&args.out, ".config.toml"), config.to_toml())?;
    let names: Vec<&str> = variants.iter().map(|v| v.name()).collect();
    write_run_config(&sidecar(&args.out, ".run.json"), "synth", args, (&config, names))?;
    log::info!("wrote {} samples to {}", corpus.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_split(args: &SplitArgs) -> Result<ExitCode> {
    let mut corpus = read_corpus(&args.corpus)?;
    if args.dedupe {
        let (kept, removed) = dedupe_shared_functions(corpus);
        corpus = kept;
        write_corpus(create(&sidecar(&args.out, ".corpus.jsonl"))?, &corpus)?;
        std::fs::write(sidecar(&args.out, ".removed.json"), serde_json::to_string_pretty(&removed)?)?;
    }
    let manifest = match args.strategy {
        StrategyArg::PerFunction => {
            let ratios: [f64; 3] = args
                .ratios
                .as_slice()
                .try_into()
                .map_err(|_| Error::InvalidRatios("exactly three ratios are required".into()))?;
            split_per_function(&corpus, ratios, args.seed, args.bins)?
        }
        StrategyArg::PerBinary => split_per_binary(
            &corpus,
            &args.train_projects,
            &args.test_projects,
            args.val_ratio,
            args.seed,
            args.bins,
        )?,
    };
    let violations = audit_leakage(&manifest, &corpus);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("leakage: {v}");
        }
        return Err(Error::InvalidInput(format!("{} leakage violations", violations.len())));
    }
    if let Some(parent) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    manifest.write(&args.out)?;
    write_run_config(&sidecar(&args.out, ".run.json"), "split", args, ())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_featurize(args: &FeaturizeArgs) -> Result<ExitCode> {
    let corpus = read_corpus(&args.corpus)?;
    let fit_on: Vec<&FunctionSample> = match &args.manifest {
        Some(m) => SplitManifest::read(m)?.select(&corpus, SplitSet::Train),
        None => corpus.iter().collect(),
    };
    let featurizer = Featurizer::fit(args.features, &fit_on, load_taxonomy(&args.taxonomy)?)?;
    export_features(create(&args.out)?, &featurizer, &corpus)?;
    write_run_config(
        &sidecar(&args.out, ".run.json"),
        "featurize",
        args,
        serde_json::json!({ "dim": featurizer.dim() }),
    )?;
    Ok(ExitCode::SUCCESS)
}

fn kept<'a>(corpus: &'a [FunctionSample], keep_degenerate: bool) -> Vec<&'a FunctionSample> {
    corpus.iter().filter(|s| keep_degenerate || !s.degenerate).collect()
}

fn cmd_train(args: &TrainArgs) -> Result<ExitCode> {
    let corpus = read_corpus(&args.corpus)?;
    let manifest = SplitManifest::read(&args.manifest)?;
    let mut spec = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let mut table: toml::Table = if text.trim_start().starts_with('{') {
                serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
            } else {
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
            };
            table.insert("algorithm".into(), args.model.name().into());
            table.insert("features".into(), args.features.name().into());
            table.insert("task".into(), args.task.name().into());
            table.insert("mode".into(), args.mode.name().into());
            table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?
        }
        None => TrainSpec {
            mode: args.mode,
            ..TrainSpec::new(args.model, args.features, args.task)
        },
    };
    if let Some(e) = args.epochs {
        spec.gnn.epochs = e;
    }
    let pool = kept(&corpus, args.keep_degenerate);
    let select = |set| -> Vec<&FunctionSample> {
        pool.iter()
            .copied()
            .filter(|s| manifest.set_of(&s.function_id) == Some(set))
            .collect()
    };
    let outcome = train_model(
        &spec,
        &select(SplitSet::Train),
        &select(SplitSet::Validation),
        load_taxonomy(&args.taxonomy)?,
        args.seed,
    )?;
    if let Some(parent) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    outcome.model.write(&args.out)?;
    if let Some(log) = &outcome.log {
        log.write_csv_file(sidecar(&args.out, ".log.csv"))?;
    }
    if !outcome.grid.is_empty() {
        let mut w = csv::Writer::from_writer(create(&sidecar(&args.out, ".grid.csv"))?);
        for row in &outcome.grid {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    if !outcome.trials.is_empty() {
        let mut w = csv::Writer::from_writer(create(&sidecar(&args.out, ".trials.csv"))?);
        for row in &outcome.trials {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    write_run_config(&sidecar(&args.out, ".run.json"), "train", args, &spec)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ReportCsvRow<'a> {
    features: &'a str,
    dim: usize,
    algorithm: &'a str,
    dataset: &'a str,
    task: &'a str,
    balanced_accuracy: f64,
    runtime_s: f64,
}

fn cmd_eval(args: &EvalArgs) -> Result<ExitCode> {
    let started = std::time::Instant::now();
    let model = TrainedModel::read(&args.model)?;
    let corpus = read_corpus(&args.corpus)?;
    let manifest = SplitManifest::read(&args.manifest)?;
    let set = match args.set {
        SetArg::Train => SplitSet::Train,
        SetArg::Validation => SplitSet::Validation,
        SetArg::Test => SplitSet::Test,
    };
    let samples: Vec<&FunctionSample> = kept(&corpus, args.keep_degenerate)
        .into_iter()
        .filter(|s| manifest.set_of(&s.function_id) == Some(set))
        .collect();
    let report = evaluate(&model, &samples, args.task, args.mode, &args.dataset)?;
    if let Some(parent) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&args.out, report.to_json())?;
    let mut w = csv::Writer::from_writer(create(&args.out.with_extension("csv"))?);
    w.serialize(ReportCsvRow {
        features: &report.feature_scheme,
        dim: report.dim,
        algorithm: model.algorithm.name(),
        dataset: &report.dataset,
        task: report.task.name(),
        balanced_accuracy: report.balanced_accuracy,
        runtime_s: started.elapsed().as_secs_f64(),
    })?;
    w.flush()?;
    write_run_config(&sidecar(&args.out, ".run.json"), "eval", args, ())?;
    println!("balanced_accuracy {:.6}", report.balanced_accuracy);
    Ok(ExitCode::SUCCESS)
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<ExitCode> {
    let corpus = read_corpus(&args.corpus)?;
    let manifest = SplitManifest::read(&args.manifest)?;
    let spec = BenchmarkSpec::load(&args.spec)?;
    let table = run_benchmark(&corpus, &manifest, &spec, &load_taxonomy(&args.taxonomy)?, args.seed);
    table.write(&args.out)?;
    write_run_config(&args.out.join("run.json"), "benchmark", args, &spec)?;
    for r in &table.rows {
        match r.balanced_accuracy {
            Some(ba) => println!("{}\t{}\t{}\t{ba:.4}", r.algorithm, r.features, r.task),
            None => println!("{}\t{}\t{}\t{:?}", r.algorithm, r.features, r.task, r.status),
        }
    }
    let failed = table.failed();
    if failed > 0 {
        eprintln!("error: {failed} benchmark cell(s) failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Split(a) => cmd_split(a),
        Command::Featurize(a) => cmd_featurize(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
