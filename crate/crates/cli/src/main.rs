use clap::{Args, Parser, Subcommand};
use metatree::config::{config_hash, ConfigError, Overrides, RunConfig};
use metatree::data::{fit_transform, load_csv, load_features, spec_from_header, DataError};
use metatree::experiments::{approx_bayes_risk, cross_validate, thread_pool, CvConfig, ExperimentError, RiskConfig, Scale};
use metatree::manifest::{self, Manifest};
use metatree::model::{train_model, MethodTag, PriorSpec};
use metatree::model_io::{ModelFile, ModelIoError};
use metatree::write_csv;
use metatree_core::metrics::sum_squared_error;
use metatree_core::Regressor;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "metatree", version, about = "Boosted meta-tree regression")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a CSV file and write it as JSON.
    Train(TrainArgs),
    /// Predict every row of a CSV file with a saved model.
    Predict(PredictArgs),
    /// Run one of the synthetic or benchmark experiments.
    Experiment(ExperimentArgs),
    /// Download benchmark datasets into the data directory.
    FetchData(FetchArgs),
}

#[derive(Args, Default)]
struct ModelFlags {
    /// TOML file with defaults for the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// mt_gbdt | mt_uni_uni | mt_uni_pos | mt_pos_pos | gbdt_baseline
    #[arg(long)]
    method: Option<MethodTag>,
    #[arg(long = "n-trees")]
    n_trees: Option<usize>,
    #[arg(long = "max-depth")]
    max_depth: Option<usize>,
    /// Prior split probability of every internal meta-tree node.
    #[arg(long)]
    g: Option<f64>,
    /// Leaf prior as m,kappa,alpha,beta.
    #[arg(long, value_parser = parse_prior)]
    prior: Option<PriorSpec>,
    #[arg(long = "learning-rate")]
    learning_rate: Option<f64>,
    #[arg(long = "min-samples-leaf")]
    min_samples_leaf: Option<usize>,
    /// Fit probability-weighted meta-trees on residuals instead of targets.
    #[arg(long = "residual-targets")]
    residual_targets: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long = "cv-folds")]
    cv_folds: Option<usize>,
    #[arg(long = "cv-repeats")]
    cv_repeats: Option<usize>,
    #[arg(long = "data-dir", env = manifest::DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
}

impl ModelFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            method: self.method,
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            g: self.g,
            prior: self.prior,
            learning_rate: self.learning_rate,
            min_samples_leaf: self.min_samples_leaf,
            residual_targets: self.residual_targets.then_some(true),
            seed: self.seed,
            threads: self.threads,
            cv_folds: self.cv_folds,
            cv_repeats: self.cv_repeats,
            data_dir: self.data_dir.clone(),
        }
    }

    fn resolve(&self) -> Result<(RunConfig, Overrides), Failure> {
        let file = self.config.as_deref().map(Overrides::from_file).transpose()?;
        let merged = self.overrides().or(file.clone().unwrap_or_default());
        Ok((RunConfig::resolve(self.overrides(), file)?, merged))
    }
}

fn parse_prior(s: &str) -> Result<PriorSpec, String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v[..] {
        [m, kappa, alpha, beta] => Ok(PriorSpec { m, kappa, alpha, beta }),
        _ => Err(format!("expected m,kappa,alpha,beta, got {s:?}")),
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column.
    #[arg(long)]
    target: String,
    /// Columns to one-hot encode.
    #[arg(long, value_delimiter = ',')]
    nominal: Vec<String>,
    /// Numeric columns to keep unscaled as ordered labels.
    #[arg(long, value_delimiter = ',')]
    ordinal: Vec<String>,
    /// Columns to ignore.
    #[arg(long, value_delimiter = ',')]
    skip: Vec<String>,
    /// Where to write the model.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON training report.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    flags: ModelFlags,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV containing the model's input columns (others are ignored).
    #[arg(long)]
    input: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// 1: risk vs training size, 2: risk vs meta-tree depth, 3: benchmark CV.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    which: u8,
    #[arg(long, value_enum, default_value = "desk")]
    scale: Scale,
    #[arg(long = "out-dir", default_value = "results")]
    out_dir: PathBuf,
    /// Experiment 3 datasets (defaults depend on the scale).
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<String>,
    #[command(flatten)]
    flags: ModelFlags,
}

#[derive(Args)]
struct FetchArgs {
    /// Datasets to fetch (all manifest entries when empty).
    names: Vec<String>,
    /// Alternative manifest file.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Read a dataset from a local file instead of its URL, as name=path.
    #[arg(long, value_parser = parse_source)]
    source: Vec<(String, PathBuf)>,
    #[arg(long = "data-dir", env = manifest::DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
}

fn parse_source(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or_else(|| format!("expected name=path, got {s:?}"))?;
    Ok((name.to_string(), PathBuf::from(path)))
}

/// Failure classes and their exit codes.
#[derive(Debug)]
enum Failure {
    Config(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Data(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<ModelIoError> for Failure {
    fn from(e: ModelIoError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(format!("writing CSV: {e}"))
    }
}

impl From<metatree_core::Error> for Failure {
    fn from(e: metatree_core::Error) -> Self {
        use metatree_core::Error::*;
        match e {
            InvalidParameter(_) | InvalidScheme { .. } => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Model(m) => m.into(),
            ExperimentError::Data(d) => d.into(),
            ExperimentError::Invalid(m) => Failure::Config(m),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct TrainReport {
    method: MethodTag,
    rows: usize,
    dropped_rows: usize,
    /// Σ (y − F(x))² over the training rows, in target units.
    train_sse: f64,
    train_mse: f64,
    wall_time_s: f64,
    seed: u64,
    config_hash: String,
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let (cfg, _) = args.flags.resolve()?;
    let spec = spec_from_header(&args.data, &args.target, &args.nominal, &args.ordinal, &args.skip)?;
    let table = load_csv(&args.data, &spec)?;
    if table.is_empty() {
        return Err(Failure::Data(format!("{}: no complete rows", args.data.display())));
    }
    let rows: Vec<usize> = (0..table.len()).collect();
    let start = Instant::now();
    let (encoded, transformer) = fit_transform(&table, &rows)?;
    let model = train_model(&encoded.dataset, &cfg.params)?;
    let wall = start.elapsed().as_secs_f64();

    let predictions = encoded
        .dataset
        .features
        .rows()
        .map(|x| model.predict(x).map(|z| transformer.unscale_target(z)))
        .collect::<Result<Vec<_>, _>>()?;
    let targets: Vec<f64> = encoded.kept.iter().map(|&i| table.targets[i]).collect();
    let sse = sum_squared_error(&targets, &predictions)?;

    let file = ModelFile::new(cfg.params, cfg.seed, transformer, &model);
    file.save(&args.out)?;
    let report = TrainReport {
        method: cfg.params.method,
        rows: targets.len(),
        dropped_rows: table.dropped,
        train_sse: sse,
        train_mse: sse / targets.len() as f64,
        wall_time_s: wall,
        seed: cfg.seed,
        config_hash: config_hash(&cfg.params),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = &args.report {
        std::fs::write(path, format!("{json}\n")).map_err(|e| io_failure(path, e))?;
    }
    println!("{json}");
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), Failure> {
    let file = ModelFile::load(&args.model)?;
    let model = file.model()?;
    let t = &file.transformer;
    let rows = load_features(&args.input, &t.input_columns())?;
    let mut out = String::from("prediction\n");
    for (i, cells) in rows.iter().enumerate() {
        let x = t.encode_row(cells).map_err(|e| Failure::Data(format!("row {}: {e}", i + 1)))?;
        out.push_str(&format!("{}\n", t.unscale_target(model.predict(&x)?)));
    }
    match &args.output {
        Some(path) => std::fs::write(path, out).map_err(|e| io_failure(path, e))?,
        None => print!("{out}"),
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), Failure> {
    let (cfg, set) = args.flags.resolve()?;
    let pool = thread_pool(cfg.threads);
    let apply = |base: &mut metatree::model::MethodParams| {
        if let Some(b) = set.n_trees {
            base.n_trees = b;
        }
        if let Some(g) = set.g {
            base.g = g;
        }
        if let Some(p) = set.prior {
            base.prior = p;
        }
        base.residual_targets = set.residual_targets.unwrap_or(false);
    };
    let out = &args.out_dir;
    std::fs::create_dir_all(out).map_err(|e| io_failure(out, e))?;
    match args.which {
        1 | 2 => {
            let configs: Vec<RiskConfig> = if args.which == 1 {
                vec![RiskConfig::experiment1(args.scale, cfg.seed)]
            } else {
                [3, 5, 7].iter().map(|&d| RiskConfig::experiment2(args.scale, d, cfg.seed)).collect()
            };
            let (mut summary, mut replicates) = (Vec::new(), Vec::new());
            for mut rc in configs {
                apply(&mut rc.base);
                log::info!("experiment {}: true depth {}", rc.experiment, rc.true_depth);
                let (s, r) = approx_bayes_risk(&rc, &pool)?;
                summary.extend(s);
                replicates.extend(r);
            }
            let stem = format!("experiment{}", args.which);
            write_csv(&out.join(format!("{stem}_summary.csv")), &summary)?;
            write_csv(&out.join(format!("{stem}_replicates.csv")), &replicates)?;
            println!("true_depth,d_max,n,method,mean_mse,stderr");
            for r in &summary {
                println!("{},{},{},{},{:.4},{:.4}", r.true_depth, r.d_max, r.n, r.method, r.mean_mse, r.stderr);
            }
        }
        _ => {
            let mut cv = CvConfig::experiment3(args.scale, cfg.seed);
            apply(&mut cv.base);
            cv.folds = cfg.cv.folds;
            cv.repeats = cfg.cv.repeats;
            if !args.datasets.is_empty() {
                cv.datasets = args.datasets.clone();
            }
            let manifest = Manifest::builtin();
            let mut missing = Vec::new();
            let mut tables = Vec::new();
            for name in &cv.datasets {
                let entry = manifest
                    .get(name)
                    .ok_or_else(|| Failure::Config(format!("unknown dataset {name:?}; known: {:?}", manifest.names())))?;
                if entry.is_fetched(&cfg.data_dir) {
                    tables.push((name.clone(), entry.load(&cfg.data_dir)?));
                } else {
                    missing.push(name.as_str());
                }
            }
            if !missing.is_empty() {
                return Err(Failure::Data(format!(
                    "datasets not found in {}: {}; run `metatree fetch-data {}`",
                    cfg.data_dir.display(),
                    missing.join(", "),
                    missing.join(" ")
                )));
            }
            let (summary, folds) = cross_validate(&cv, &tables, &pool)?;
            write_csv(&out.join("experiment3_summary.csv"), &summary)?;
            write_csv(&out.join("experiment3_folds.csv"), &folds)?;
            println!("dataset,method,d_max,mean_mse,stderr");
            for r in &summary {
                println!("{},{},{},{:.3},{:.3}", r.dataset, r.method, r.d_max, r.mean_mse, r.stderr);
            }
        }
    }
    Ok(())
}

fn cmd_fetch(args: FetchArgs) -> Result<(), Failure> {
    let manifest = match &args.manifest {
        Some(p) => Manifest::from_file(p)?,
        None => Manifest::builtin(),
    };
    let dir = args.data_dir.clone().unwrap_or_else(manifest::data_dir);
    let names: Vec<String> = if args.names.is_empty() {
        manifest.names().iter().map(|s| s.to_string()).collect()
    } else {
        args.names.clone()
    };
    let mut failed = Vec::new();
    for name in &names {
        let entry = manifest.get(name).ok_or_else(|| Failure::Config(format!("unknown dataset {name:?}")))?;
        let source = args.source.iter().find(|(n, _)| n == name).map(|(_, p)| p.as_path());
        match manifest::fetch(entry, &dir, source) {
            Ok(r) => println!("{}: {} rows -> {}", r.name, r.rows, r.path.display()),
            Err(e) => {
                eprintln!("{name}: {e}");
                failed.push(name.as_str());
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Data(format!("could not fetch: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::FetchData(a) => cmd_fetch(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
