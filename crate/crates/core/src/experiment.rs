//! Experiment drivers: k-fold 1-to-n kernels, repeated n-to-n scaling runs
//! and classical SVC baselines, with per-fold CSV, summary JSON and
//! whisker files for plotting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    fold_partition, load_feature_csv, make_synthetic, rebalance, sample_train_test,
    stratified_kfold, FeatureTable, LabelSource, Pipeline, PipelineSpec, ReduceKind, SplitSpec,
    SyntheticKind,
};
use crate::error::{Error, Result};
use crate::kernel::{cross_from_states, gram_from_states, hex, EmbeddingKind, EmbeddingSpec};
use crate::reupload::{Coupling, ExtendInit, QnnParams};
use crate::scalar::Real;
use crate::svm::{
    default_rbf_gamma, fit_features, random_search_svc, solve_dual, KernelKind, SearchSpace,
    SvmConfig,
};
use crate::train::{accuracy, qnn_accuracy, scale_qnn, train_qnn, EncodedSet, Preset, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    OneToN,
    NToN,
    Classical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum DatasetSource {
    Synthetic {
        kind: SyntheticKind,
        m: usize,
        noise: f64,
        seed: u64,
    },
    /// Feature CSV. Labels come from a `gamma` column via the percentile
    /// rule when `gamma_percentile` is set, else from a `label` column.
    Csv {
        path: PathBuf,
        gamma_percentile: Option<f64>,
    },
}

/// A named preset or a full training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrainChoice {
    Named(Preset),
    Custom(TrainConfig),
}

impl TrainChoice {
    pub fn resolve(&self) -> TrainConfig {
        match self {
            TrainChoice::Named(p) => TrainConfig::preset(*p),
            TrainChoice::Custom(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassicalConfig {
    pub c: f64,
    /// RBF width; `None` uses `1 / (p · Var)` of the training fold.
    pub rbf_gamma: Option<f64>,
    /// Random-search draws per fold; 0 skips the search.
    pub search_iters: usize,
    pub search_space: SearchSpace,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            rbf_gamma: None,
            search_iters: 0,
            search_space: SearchSpace::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dataset: DatasetSource,
    /// Optional split file; runs are restricted to its `one_to_n` or
    /// `n_to_n` ids.
    pub split: Option<PathBuf>,
    pub rebalance: bool,
    /// Feature count after reduction.
    pub p: usize,
    pub reduce: ReduceKind,
    /// Embedding width for 1-to-n, largest width for n-to-n.
    pub n_qubits: usize,
    pub n_layers: usize,
    pub coupling: Coupling,
    pub train: TrainChoice,
    pub k_folds: usize,
    pub repeats: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub svm: SvmConfig,
    pub classical: ClassicalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::OneToN,
            dataset: DatasetSource::Synthetic {
                kind: SyntheticKind::Circles,
                m: 2000,
                noise: 0.05,
                seed: 0,
            },
            split: None,
            rebalance: false,
            p: 2,
            reduce: ReduceKind::Pca,
            n_qubits: 2,
            n_layers: 6,
            coupling: Coupling::Star,
            train: TrainChoice::Named(Preset::Optimal),
            k_folds: 10,
            repeats: 5,
            n_train: 500,
            n_test: 200,
            seed: 0,
            svm: SvmConfig::default(),
            classical: ClassicalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.p == 0 {
            return bad("p must be >= 1");
        }
        if self.n_layers == 0 {
            return bad("n_layers must be >= 1");
        }
        if self.n_qubits == 0 || self.n_qubits > crate::qsim::MAX_QUBITS {
            return bad("n_qubits out of range");
        }
        if self.kind != ExperimentKind::NToN && self.k_folds < 2 {
            return bad("k_folds must be >= 2");
        }
        if self.kind == ExperimentKind::NToN
            && (self.repeats == 0 || self.n_train == 0 || self.n_test == 0)
        {
            return bad("repeats, n_train and n_test must be >= 1");
        }
        self.train.resolve().validate()?;
        self.svm.validate()
    }
}

/// Independent stream seed for `(base, stream, index)` (SplitMix64 finalizer).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_SAMPLE: u64 = 3;
const STREAM_SEARCH: u64 = 4;

/// Loads the dataset, applies the split restriction and optional rebalancing.
pub fn load_dataset<T: Real>(cfg: &ExperimentConfig) -> Result<FeatureTable<T>> {
    let mut t = match &cfg.dataset {
        DatasetSource::Synthetic {
            kind,
            m,
            noise,
            seed,
        } => make_synthetic(*kind, *m, *noise, *seed)?,
        DatasetSource::Csv {
            path,
            gamma_percentile,
        } => {
            let src = match gamma_percentile {
                Some(q) => LabelSource::GammaPercentile(*q),
                None => LabelSource::Column,
            };
            load_feature_csv(path, src)?
        }
    };
    if let Some(path) = &cfg.split {
        let split = SplitSpec::load(path)?;
        let wanted = match cfg.kind {
            ExperimentKind::NToN => &split.n_to_n,
            _ => &split.one_to_n,
        };
        let set: std::collections::HashSet<&String> = wanted.iter().collect();
        let keep: Vec<usize> = (0..t.n_rows())
            .filter(|&i| set.contains(&t.ids()[i]))
            .collect();
        if keep.len() != wanted.len() {
            return Err(Error::Data(format!(
                "{} split ids missing from the dataset",
                wanted.len() - keep.len()
            )));
        }
        t = t.subset(&keep);
    }
    if cfg.rebalance {
        t = rebalance(&t, cfg.seed);
    }
    if t.n_features() < cfg.p {
        return Err(Error::Config(format!(
            "p = {} exceeds the {} available features",
            cfg.p,
            t.n_features()
        )));
    }
    Ok(t)
}

/// Hex SHA-256 of the table's CSV form.
pub fn table_hash<T: Real>(t: &FeatureTable<T>) -> Result<String> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf)?;
    Ok(hex(&Sha256::digest(&buf)))
}

/// One line of the per-fold results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    /// Fold index for k-fold runs, repeat index for n-to-n runs.
    pub fold: usize,
    pub model: String,
    pub n_qubits: usize,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Box-and-whisker summary with linearly interpolated quartiles and
/// whiskers at the most extreme points within 1.5 IQR of the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats> {
    if values.is_empty() {
        return Err(Error::Empty("boxplot input"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let (q25, median, q75) = (
        quantile_sorted(&v, 0.25),
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 0.75),
    );
    let iqr = q75 - q25;
    let (lo_fence, hi_fence) = (q25 - 1.5 * iqr, q75 + 1.5 * iqr);
    let inside: Vec<f64> = v
        .iter()
        .copied()
        .filter(|x| *x >= lo_fence && *x <= hi_fence)
        .collect();
    let outliers = v
        .iter()
        .copied()
        .filter(|x| *x < lo_fence || *x > hi_fence)
        .collect();
    Ok(BoxplotStats {
        q25,
        median,
        q75,
        whisker_low: inside.first().copied().unwrap_or(q25),
        whisker_high: inside.last().copied().unwrap_or(q75),
        outliers,
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub n_qubits: usize,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub train_box: BoxplotStats,
    pub test_box: BoxplotStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: ExperimentConfig,
    pub train: TrainConfig,
    pub input_hash: String,
    pub n_points: usize,
    pub seeds: Vec<u64>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub provenance: Provenance,
    pub models: Vec<ModelSummary>,
    /// Best cost per qubit count and repeat (n-to-n runs only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub best_costs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsBundle {
    pub rows: Vec<FoldRow>,
    pub summary: Summary,
}

/// Per-model means, population standard deviations and boxplots, grouped by
/// qubit count then model name.
pub fn summarize(rows: &[FoldRow]) -> Result<Vec<ModelSummary>> {
    let mut groups: BTreeMap<(usize, String), Vec<&FoldRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.n_qubits, r.model.clone()))
            .or_default()
            .push(r);
    }
    let mut models = Vec::new();
    for ((n, model), rs) in groups {
        let tr: Vec<f64> = rs.iter().map(|r| r.train_acc).collect();
        let te: Vec<f64> = rs.iter().map(|r| r.test_acc).collect();
        let (train_mean, train_std) = mean_std(&tr);
        let (test_mean, test_std) = mean_std(&te);
        models.push(ModelSummary {
            model,
            n_qubits: n,
            train_mean,
            train_std,
            test_mean,
            test_std,
            train_box: boxplot_stats(&tr)?,
            test_box: boxplot_stats(&te)?,
        });
    }
    Ok(models)
}

/// Parses a `folds.csv` written by [`ResultsBundle::write`].
pub fn read_fold_rows<R: std::io::Read>(r: R) -> Result<Vec<FoldRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let rows = rd
        .deserialize()
        .collect::<std::result::Result<Vec<FoldRow>, _>>()?;
    Ok(rows)
}

impl ResultsBundle {
    fn new(rows: Vec<FoldRow>, provenance: Provenance, best_costs: Vec<Vec<f64>>) -> Result<Self> {
        let models = summarize(&rows)?;
        Ok(Self {
            rows,
            summary: Summary {
                provenance,
                models,
                best_costs,
            },
        })
    }

    pub fn model(&self, name: &str, n_qubits: usize) -> Option<&ModelSummary> {
        self.summary
            .models
            .iter()
            .find(|m| m.model == name && m.n_qubits == n_qubits)
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut wr = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            wr.serialize(r)?;
        }
        let bytes = wr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    /// One line per model, qubit count and split:
    /// `index model n_qubits split whisker_low q25 median q75 whisker_high`.
    pub fn whisker_string(&self) -> String {
        let mut s =
            String::from("# index model n_qubits split whisker_low q25 median q75 whisker_high\n");
        for (i, m) in self.summary.models.iter().enumerate() {
            for (split, b) in [("train", &m.train_box), ("test", &m.test_box)] {
                s.push_str(&format!(
                    "{i} {} {} {split} {} {} {} {} {}\n",
                    m.model, m.n_qubits, b.whisker_low, b.q25, b.median, b.q75, b.whisker_high
                ));
            }
        }
        s
    }

    /// Writes `folds.csv`, `summary.json` and `whiskers.dat` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("folds.csv"), self.csv_string()?)?;
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&self.summary)?,
        )?;
        std::fs::write(dir.join("whiskers.dat"), self.whisker_string())?;
        Ok(())
    }
}

struct Prepared<T> {
    train: FeatureTable<T>,
    test: FeatureTable<T>,
}

fn prepare<T: Real>(
    data: &FeatureTable<T>,
    train_idx: &[usize],
    test_idx: &[usize],
    cfg: &ExperimentConfig,
) -> Result<Prepared<T>> {
    let train = data.subset(train_idx);
    let test = data.subset(test_idx);
    let reduce = (data.n_features() > cfg.p).then_some(cfg.reduce);
    let pipe = Pipeline::fit(&train, PipelineSpec { reduce, p: cfg.p })?;
    Ok(Prepared {
        train: pipe.apply(&train)?.table,
        test: pipe.apply(&test)?.table,
    })
}

/// Accuracy of an SVM on a precomputed kernel pair.
fn kernel_svm_accuracy<T: Real>(
    spec: &EmbeddingSpec<T>,
    train: &EncodedSet<T>,
    test: &EncodedSet<T>,
    train_ids: &[String],
    svm: &SvmConfig,
) -> Result<(f64, f64)> {
    let tr_states = spec.states(&train.points)?;
    let te_states = spec.states(&test.points)?;
    let k = gram_from_states(&tr_states, train_ids)?;
    let model = solve_dual(&k.entries, &train.labels, train_ids, svm)?;
    let train_pred = model.predict_rows(&k.entries)?;
    let cross = cross_from_states(&tr_states, &te_states)?;
    let test_pred = model.predict_rows(&cross)?;
    Ok((
        accuracy(&train_pred, &train.labels),
        accuracy(&test_pred, &test.labels),
    ))
}

fn provenance<T: Real>(
    cfg: &ExperimentConfig,
    data: &FeatureTable<T>,
    seeds: Vec<u64>,
) -> Result<Provenance> {
    Ok(Provenance {
        config: cfg.clone(),
        train: cfg.train.resolve(),
        input_hash: table_hash(data)?,
        n_points: data.n_rows(),
        seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Random single-qubit starting point for fold or repeat `index`.
pub fn init_params<T: Real>(cfg: &ExperimentConfig, index: u64) -> Result<QnnParams<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_INIT, index));
    let mut p = QnnParams::random_uniform(1, cfg.n_layers, &mut rng)?;
    p.coupling = cfg.coupling;
    Ok(p)
}

/// k-fold: train a single-qubit classifier per fold, then an SVM on its
/// 1-to-n kernel. Rows are `qnn` (n = 1) and `nqk` (n = `n_qubits`).
pub fn run_one_to_n<T: Real>(
    cfg: &ExperimentConfig,
    data: &FeatureTable<T>,
) -> Result<ResultsBundle> {
    cfg.validate()?;
    let folds = stratified_kfold(data.labels(), cfg.k_folds, cfg.seed)?;
    let train_cfg = cfg.train.resolve();
    let seeds: Vec<u64> = (0..cfg.k_folds as u64)
        .map(|f| derive_seed(cfg.seed, STREAM_TRAIN, f))
        .collect();
    let per_fold: Vec<Vec<FoldRow>> = (0..cfg.k_folds)
        .into_par_iter()
        .map(|f| {
            let (tr, te) = fold_partition(&folds, f);
            let prep = prepare(data, &tr, &te, cfg)?;
            let train = EncodedSet::from_table(&prep.train)?;
            let test = EncodedSet::from_table(&prep.test)?;
            let init = init_params(cfg, f as u64)?;
            let hist = train_qnn(&init, &train, &train_cfg.clone().with_seed(seeds[f]))?;
            let qnn = (
                qnn_accuracy(&hist.best_params, &train)?,
                qnn_accuracy(&hist.best_params, &test)?,
            );
            let spec = EmbeddingSpec::new(EmbeddingKind::OneToN, hist.best_params, cfg.n_qubits)?;
            let nqk = kernel_svm_accuracy(&spec, &train, &test, prep.train.ids(), &cfg.svm)?;
            Ok(vec![
                FoldRow {
                    fold: f,
                    model: "qnn".into(),
                    n_qubits: 1,
                    train_acc: qnn.0,
                    test_acc: qnn.1,
                },
                FoldRow {
                    fold: f,
                    model: "nqk".into(),
                    n_qubits: cfg.n_qubits,
                    train_acc: nqk.0,
                    test_acc: nqk.1,
                },
            ])
        })
        .collect::<Result<_>>()?;
    ResultsBundle::new(per_fold.concat(), provenance(cfg, data, seeds)?, Vec::new())
}

/// Repeated train/test draws: grow the classifier to `n_qubits` and, at
/// every width, score it and an SVM on its n-to-n kernel.
pub fn run_n_to_n<T: Real>(
    cfg: &ExperimentConfig,
    data: &FeatureTable<T>,
) -> Result<ResultsBundle> {
    cfg.validate()?;
    let train_cfg = cfg.train.resolve();
    let seeds: Vec<u64> = (0..cfg.repeats as u64)
        .map(|r| derive_seed(cfg.seed, STREAM_TRAIN, r))
        .collect();
    let per_repeat: Vec<(Vec<FoldRow>, Vec<f64>)> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let sample_seed = derive_seed(cfg.seed, STREAM_SAMPLE, r as u64);
            let (tr, te) = sample_train_test(data.labels(), cfg.n_train, cfg.n_test, sample_seed)?;
            let prep = prepare(data, &tr, &te, cfg)?;
            let train = EncodedSet::from_table(&prep.train)?;
            let test = EncodedSet::from_table(&prep.test)?;
            let init = init_params(cfg, r as u64)?;
            let hists = scale_qnn(
                &init,
                &train,
                cfg.n_qubits,
                &train_cfg.clone().with_seed(seeds[r]),
                ExtendInit::CopyFirst,
            )?;
            let mut rows = Vec::new();
            for (i, h) in hists.iter().enumerate() {
                let n = i + 1;
                let qnn = (
                    qnn_accuracy(&h.best_params, &train)?,
                    qnn_accuracy(&h.best_params, &test)?,
                );
                let spec = EmbeddingSpec::new(EmbeddingKind::NToN, h.best_params.clone(), n)?;
                let nqk = kernel_svm_accuracy(&spec, &train, &test, prep.train.ids(), &cfg.svm)?;
                rows.push(FoldRow {
                    fold: r,
                    model: "qnn".into(),
                    n_qubits: n,
                    train_acc: qnn.0,
                    test_acc: qnn.1,
                });
                rows.push(FoldRow {
                    fold: r,
                    model: "nqk".into(),
                    n_qubits: n,
                    train_acc: nqk.0,
                    test_acc: nqk.1,
                });
            }
            let costs = hists.iter().map(|h| h.best_cost.to_f64_lossy()).collect();
            Ok((rows, costs))
        })
        .collect::<Result<_>>()?;
    let (rows, costs): (Vec<Vec<FoldRow>>, Vec<Vec<f64>>) = per_repeat.into_iter().unzip();
    ResultsBundle::new(rows.concat(), provenance(cfg, data, seeds)?, costs)
}

/// Linear and RBF SVCs (plus an optional random search) on the same folds
/// that [`run_one_to_n`] uses for the same seed. Rows have `n_qubits = 0`.
pub fn run_classical<T: Real>(
    cfg: &ExperimentConfig,
    data: &FeatureTable<T>,
) -> Result<ResultsBundle> {
    cfg.validate()?;
    let folds = stratified_kfold(data.labels(), cfg.k_folds, cfg.seed)?;
    let cc = &cfg.classical;
    let seeds: Vec<u64> = (0..cfg.k_folds as u64)
        .map(|f| derive_seed(cfg.seed, STREAM_SEARCH, f))
        .collect();
    let per_fold: Vec<Vec<FoldRow>> = (0..cfg.k_folds)
        .into_par_iter()
        .map(|f| {
            let (tr, te) = fold_partition(&folds, f);
            let prep = prepare(data, &tr, &te, cfg)?;
            let gamma = cc
                .rbf_gamma
                .unwrap_or_else(|| default_rbf_gamma(&prep.train));
            let mut kernels = vec![
                ("linear_svc", KernelKind::Linear, cc.c),
                ("rbf_svc", KernelKind::Rbf { gamma }, cc.c),
            ];
            if cc.search_iters > 0 {
                let best =
                    random_search_svc(&prep.train, cc.search_iters, seeds[f], &cc.search_space)?;
                kernels.push(("search_svc", best.kernel, best.c));
            }
            let mut rows = Vec::new();
            for (name, kernel, c) in kernels {
                let model = fit_features(&prep.train, kernel, &SvmConfig::classical(c))?;
                let score = |t: &FeatureTable<T>| -> Result<f64> {
                    let pred = t
                        .rows()
                        .map(|r| model.predict_features(r))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(accuracy(&pred, t.labels()))
                };
                rows.push(FoldRow {
                    fold: f,
                    model: name.into(),
                    n_qubits: 0,
                    train_acc: score(&prep.train)?,
                    test_acc: score(&prep.test)?,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    ResultsBundle::new(per_fold.concat(), provenance(cfg, data, seeds)?, Vec::new())
}

pub fn run<T: Real>(cfg: &ExperimentConfig, data: &FeatureTable<T>) -> Result<ResultsBundle> {
    match cfg.kind {
        ExperimentKind::OneToN => run_one_to_n(cfg, data),
        ExperimentKind::NToN => run_n_to_n(cfg, data),
        ExperimentKind::Classical => run_classical(cfg, data),
    }
}
