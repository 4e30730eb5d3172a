//! Experiment runners: Monte Carlo Bayes risk on synthetic true trees
//! (Experiments 1 and 2) and repeated k-fold cross-validation on benchmark
//! data (Experiment 3).
//!
//! Replicates run on a rayon pool; results are reduced in a fixed key order
//! so output does not depend on scheduling.

use crate::config::config_hash;
use crate::data::{kfold, DataError, RawTable, Transformer};
use crate::model::{train_model, MethodParams, MethodTag, PriorSpec};
use metatree_core::metrics::{mean_and_stderr, model_mse};
use metatree_core::{sample_dataset, sample_true_tree, Dataset};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] metatree_core::Error),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

/// ChaCha8 seeded with `seed` on an independent `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub experiment: u8,
    pub n_true_trees: usize,
    pub n_datasets: usize,
    /// Each replicate draws `max(train_sizes)` training rows; smaller sizes
    /// use a prefix.
    pub train_sizes: Vec<usize>,
    pub n_test: usize,
    pub n_features: usize,
    pub true_depth: usize,
    pub g_star: f64,
    pub true_prior: PriorSpec,
    pub d_max: Vec<usize>,
    pub methods: Vec<MethodTag>,
    /// Shared hyperparameters; method, depth and method defaults are
    /// substituted per run.
    pub base: MethodParams,
    pub seed: u64,
}

impl RiskConfig {
    fn synthetic(experiment: u8, scale: Scale, seed: u64) -> Self {
        let (trees, datasets, b) = match scale {
            Scale::Desk => (10, 2, 20),
            Scale::Paper => (100, 10, 100),
        };
        Self {
            experiment,
            n_true_trees: trees,
            n_datasets: datasets,
            train_sizes: vec![200, 400, 600, 800, 1000],
            n_test: 250,
            n_features: 10,
            true_depth: 3,
            g_star: 0.9,
            true_prior: PriorSpec::default(),
            d_max: vec![5],
            methods: vec![MethodTag::MtGbdt, MethodTag::MtUniUni, MethodTag::MtPosPos, MethodTag::GbdtBaseline],
            base: MethodParams { n_trees: b, ..MethodParams::defaults(MethodTag::MtPosPos) },
            seed,
        }
    }

    pub fn experiment1(scale: Scale, seed: u64) -> Self {
        Self::synthetic(1, scale, seed)
    }

    pub fn experiment2(scale: Scale, true_depth: usize, seed: u64) -> Self {
        Self {
            train_sizes: vec![1000],
            true_depth,
            d_max: vec![3, 4, 5, 6],
            methods: vec![MethodTag::MtGbdt, MethodTag::MtUniUni, MethodTag::MtUniPos, MethodTag::MtPosPos],
            ..Self::synthetic(2, scale, seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_true_trees == 0 || self.n_datasets == 0 || self.n_test == 0 || self.train_sizes.is_empty() {
            return Err(ExperimentError::Invalid("replicate counts and sizes must be ≥ 1".into()));
        }
        if self.train_sizes.contains(&0) || self.d_max.is_empty() || self.methods.is_empty() {
            return Err(ExperimentError::Invalid("empty training size, depth or method list".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub method: MethodTag,
    pub n: usize,
    pub d_max: usize,
    pub true_depth: usize,
    pub mean_mse: f64,
    pub stderr: f64,
    pub replicates: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// One (true tree, dataset, method, n, depth) result in long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub method: MethodTag,
    pub n: usize,
    pub d_max: usize,
    pub true_depth: usize,
    pub tree: usize,
    pub dataset: usize,
    pub mse: f64,
    /// Test MSE of the true conditional mean on the same test set.
    pub oracle_mse: f64,
    /// `Σ P(leaf) / τ` of the true tree.
    pub noise_floor: f64,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Serialize)]
struct RiskRowKey<'a> {
    config: &'a RiskConfig,
    method: MethodTag,
    n: usize,
    d_max: usize,
}

fn risk_row_hash(config: &RiskConfig, method: MethodTag, n: usize, d_max: usize) -> String {
    config_hash(&RiskRowKey { config, method, n, d_max })
}

fn params_for(base: &MethodParams, method: MethodTag, d_max: usize) -> MethodParams {
    MethodParams { max_depth: d_max, ..base.for_method(method) }
}

/// Trains every configured (n, depth, method) on one sampled replicate.
fn risk_replicate(cfg: &RiskConfig, tree_idx: usize, dataset_idx: usize) -> Result<Vec<ReplicateRow>> {
    let prior = cfg.true_prior.params()?;
    let truth = sample_true_tree(
        &mut stream_rng(cfg.seed, (tree_idx as u64) << 16),
        cfg.n_features,
        cfg.true_depth,
        cfg.g_star,
        &prior,
    )?;
    let mut rng = stream_rng(cfg.seed, ((tree_idx as u64) << 16) | (dataset_idx as u64 + 1));
    let n_max = *cfg.train_sizes.iter().max().unwrap();
    let train_all = sample_dataset(&mut rng, &truth, n_max)?;
    let test = sample_dataset(&mut rng, &truth, cfg.n_test)?;
    let oracle_mse = test
        .features
        .rows()
        .zip(&test.targets)
        .map(|(x, y)| (y - truth.conditional_mean(x)).powi(2))
        .sum::<f64>()
        / test.len() as f64;
    let noise_floor = truth.noise_floor();

    let mut rows = Vec::new();
    for &n in &cfg.train_sizes {
        let train = train_all.head(n);
        for &d_max in &cfg.d_max {
            for &method in &cfg.methods {
                let model = train_model(&train, &params_for(&cfg.base, method, d_max))?;
                rows.push(ReplicateRow {
                    method,
                    n,
                    d_max,
                    true_depth: cfg.true_depth,
                    tree: tree_idx,
                    dataset: dataset_idx,
                    mse: model_mse(&model, &test)?,
                    oracle_mse,
                    noise_floor,
                    seed: cfg.seed,
                    config_hash: risk_row_hash(cfg, method, n, d_max),
                });
            }
        }
    }
    Ok(rows)
}

/// Monte Carlo Bayes risk: mean and standard error of test MSE over sampled
/// true trees and datasets, per (method, n, depth).
pub fn approx_bayes_risk(cfg: &RiskConfig, pool: &rayon::ThreadPool) -> Result<(Vec<RiskRow>, Vec<ReplicateRow>)> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..cfg.n_true_trees).flat_map(|t| (0..cfg.n_datasets).map(move |j| (t, j))).collect();
    let per_job: Vec<Vec<ReplicateRow>> =
        pool.install(|| jobs.par_iter().map(|&(t, j)| risk_replicate(cfg, t, j)).collect::<Result<_>>())?;
    let replicates: Vec<ReplicateRow> = per_job.into_iter().flatten().collect();

    let mut groups: BTreeMap<(MethodTag, usize, usize), Vec<f64>> = BTreeMap::new();
    for r in &replicates {
        groups.entry((r.method, r.n, r.d_max)).or_default().push(r.mse);
    }
    let summary = groups
        .into_iter()
        .map(|((method, n, d_max), mses)| {
            let (mean_mse, stderr) = mean_and_stderr(&mses)?;
            Ok(RiskRow {
                method,
                n,
                d_max,
                true_depth: cfg.true_depth,
                mean_mse,
                stderr,
                replicates: mses.len(),
                seed: cfg.seed,
                config_hash: risk_row_hash(cfg, method, n, d_max),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((summary, replicates))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub datasets: Vec<String>,
    pub methods: Vec<MethodTag>,
    pub depths: Vec<usize>,
    pub folds: usize,
    pub repeats: usize,
    pub base: MethodParams,
    pub seed: u64,
}

impl CvConfig {
    pub fn experiment3(scale: Scale, seed: u64) -> Self {
        let datasets: &[&str] = match scale {
            Scale::Desk => &["diabetes", "liver"],
            Scale::Paper => &["abalone", "cps", "diabetes", "liver", "ozone", "student"],
        };
        Self {
            datasets: datasets.iter().map(|s| s.to_string()).collect(),
            methods: vec![MethodTag::MtGbdt, MethodTag::MtUniUni, MethodTag::MtPosPos, MethodTag::GbdtBaseline],
            depths: vec![4, 8],
            folds: 5,
            repeats: 3,
            base: MethodParams::defaults(MethodTag::MtGbdt),
            seed,
        }
    }

    /// Seed of the fold partition for `repeat`.
    pub fn fold_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(repeat as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub dataset: String,
    pub method: MethodTag,
    pub d_max: usize,
    pub fold: usize,
    pub repeat: usize,
    /// On the standardized target.
    pub mse: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub excluded: usize,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummaryRow {
    pub dataset: String,
    pub method: MethodTag,
    pub d_max: usize,
    pub mean_mse: f64,
    pub stderr: f64,
    pub runs: usize,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Serialize)]
struct CvRowKey<'a> {
    config: &'a CvConfig,
    dataset: &'a str,
    method: MethodTag,
    d_max: usize,
}

/// Fits the preprocessing on the training folds and encodes both sides.
pub fn prepare_fold(table: &RawTable, folds: &[Vec<usize>], test_fold: usize) -> Result<(Dataset, Dataset, usize)> {
    let train_rows: Vec<usize> =
        folds.iter().enumerate().filter(|(i, _)| *i != test_fold).flat_map(|(_, f)| f.iter().copied()).collect();
    let mut train_rows = train_rows;
    train_rows.sort_unstable();
    let transformer = Transformer::fit(table, &train_rows)?;
    let train = transformer.transform(table, &train_rows)?;
    let test = transformer.transform(table, &folds[test_fold])?;
    Ok((train.dataset, test.dataset, test.excluded.len()))
}

/// One cross-validation cell; rerunning it with the same config gives the
/// same row.
pub fn cv_run(
    cfg: &CvConfig,
    name: &str,
    table: &RawTable,
    method: MethodTag,
    d_max: usize,
    repeat: usize,
    fold: usize,
) -> Result<CvRow> {
    let folds = kfold(table.len(), cfg.folds, cfg.fold_seed(repeat))?;
    let (train, test, excluded) = prepare_fold(table, &folds, fold)?;
    if test.is_empty() {
        return Err(ExperimentError::Invalid(format!("{name}: fold {fold} has no encodable rows")));
    }
    let model = train_model(&train, &params_for(&cfg.base, method, d_max))?;
    Ok(CvRow {
        dataset: name.to_string(),
        method,
        d_max,
        fold,
        repeat,
        mse: model_mse(&model, &test)?,
        n_train: train.len(),
        n_test: test.len(),
        excluded,
        seed: cfg.seed,
        config_hash: config_hash(&CvRowKey { config: cfg, dataset: name, method, d_max }),
    })
}

/// Repeated k-fold cross-validation of every method and depth on every table.
pub fn cross_validate(
    cfg: &CvConfig,
    tables: &[(String, RawTable)],
    pool: &rayon::ThreadPool,
) -> Result<(Vec<CvSummaryRow>, Vec<CvRow>)> {
    let mut jobs = Vec::new();
    for (ti, _) in tables.iter().enumerate() {
        for &method in &cfg.methods {
            for &d_max in &cfg.depths {
                for repeat in 0..cfg.repeats {
                    for fold in 0..cfg.folds {
                        jobs.push((ti, method, d_max, repeat, fold));
                    }
                }
            }
        }
    }
    let rows: Vec<CvRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ti, method, d_max, repeat, fold)| {
                let (name, table) = &tables[ti];
                cv_run(cfg, name, table, method, d_max, repeat, fold)
            })
            .collect::<Result<_>>()
    })?;
    let mut groups: BTreeMap<(String, MethodTag, usize), Vec<f64>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.dataset.clone(), r.method, r.d_max)).or_default().push(r.mse);
    }
    let summary = groups
        .into_iter()
        .map(|((dataset, method, d_max), mses)| {
            let (mean_mse, stderr) = mean_and_stderr(&mses)?;
            let config_hash = config_hash(&CvRowKey { config: cfg, dataset: &dataset, method, d_max });
            Ok(CvSummaryRow { dataset, method, d_max, mean_mse, stderr, runs: mses.len(), seed: cfg.seed, config_hash })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((summary, rows))
}

pub fn thread_pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}
