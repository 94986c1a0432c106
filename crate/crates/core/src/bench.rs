//! Set-classification benchmark for comparing poolings.
//!
//! The matched-moments dataset has two classes with identical mean and
//! covariance: class 0 draws sets from `N(0, I_d)`, class 1 from
//! `½N(−μ, Σ′) + ½N(μ, Σ′)` with `μ = m·e_1` and `Σ′ = I − μμᵀ`. Any pooling
//! that only sees moments of degree ≤ 2 is at chance.
//!
//! Features are z-scored with training-split statistics and fed to a
//! multinomial logistic regression trained by full-batch gradient descent.
//! A step that would raise the loss is halved and retried, so the training
//! loss never increases.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{baseline_pool, emperor_descriptor, DescriptorConfig, Pooling};
use crate::error::{Error, Result};
use crate::gmm1d::EmConfig;
use crate::model::{sample_gmm, GmmSpec, MultivariateGmm, PointSet};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSetDataset {
    pub items: Vec<(PointSet, usize)>,
    pub classes: usize,
    pub generators: Vec<MultivariateGmm>,
    pub seed: u64,
}

impl LabeledSetDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|(_, l)| *l).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Class generators of the matched-moments dataset: `[N(0, I), ½N(−μ, Σ′) + ½N(μ, Σ′)]`.
pub fn matched_moment_generators(d: usize, separation: f64) -> Result<[MultivariateGmm; 2]> {
    if !(separation > 0.0 && separation < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "separation must lie in (0, 1), got {separation}"
        )));
    }
    if d == 0 {
        return Err(Error::ZeroDimension);
    }
    let mut mu = DVector::zeros(d);
    mu[0] = separation;
    let cov = DMatrix::identity(d, d) - &mu * mu.transpose();
    let b = MultivariateGmm::new(vec![0.5, 0.5], vec![-mu.clone(), mu], vec![cov.clone(), cov])?;
    Ok([MultivariateGmm::standard(d), b])
}

/// `sets_per_class` sets of `points_per_set` points per generator; item
/// `i` of class `c` is sampled from its own seed substream.
pub fn dataset_from_generators(
    generators: Vec<MultivariateGmm>,
    sets_per_class: usize,
    points_per_set: usize,
    seed: u64,
) -> Result<LabeledSetDataset> {
    if generators.len() < 2 {
        return Err(Error::InvalidArgument("need at least two classes".into()));
    }
    if sets_per_class < 2 {
        return Err(Error::InvalidArgument("need at least two sets per class".into()));
    }
    let d = generators[0].dim();
    if let Some(g) = generators.iter().find(|g| g.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: g.dim(),
        });
    }
    let data_seed = rng::derive_seed(seed, tag::DATA);
    let units: Vec<(usize, usize)> = (0..generators.len())
        .flat_map(|c| (0..sets_per_class).map(move |i| (c, i)))
        .collect();
    let items = units
        .par_iter()
        .map(|&(c, i)| {
            let s = rng::derive_seed(data_seed, (c * sets_per_class + i) as u64);
            sample_gmm(&generators[c], points_per_set, s).map(|p| (p, c))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledSetDataset {
        items,
        classes: generators.len(),
        generators,
        seed,
    })
}

pub fn synth_matched_moments_dataset(
    d: usize,
    sets_per_class: usize,
    points_per_set: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledSetDataset> {
    let gens = matched_moment_generators(d, separation)?;
    dataset_from_generators(gens.to_vec(), sets_per_class, points_per_set, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub l2: f64,
    pub epochs: usize,
    pub step: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            epochs: 300,
            step: 1.0,
            seed: 0,
        }
    }
}

/// Softmax classifier over z-scored features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `C × F`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    /// Training loss after every epoch.
    pub loss_history: Vec<f64>,
}

impl LinearModel {
    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn width(&self) -> usize {
        self.feature_mean.len()
    }

    fn standardize(&self, features: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        standardized(features, &self.feature_mean, &self.feature_scale)
    }

    /// Argmax class per row; ties go to the lowest class index.
    pub fn predict(&self, features: &[Vec<f64>]) -> Result<Vec<usize>> {
        let x = self.standardize(features)?;
        let scores = &x * self.weights.transpose();
        Ok((0..scores.nrows())
            .map(|i| {
                let mut best = 0;
                for c in 1..self.classes() {
                    if scores[(i, c)] + self.bias[c] > scores[(i, best)] + self.bias[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}

fn check_features(features: &[Vec<f64>]) -> Result<usize> {
    let width = features.first().map(Vec::len).ok_or(Error::Empty)?;
    for (row, f) in features.iter().enumerate() {
        if f.len() != width {
            return Err(Error::WidthMismatch {
                expected: width,
                found: f.len(),
            });
        }
        if let Some(col) = f.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature { row, col });
        }
    }
    Ok(width)
}

fn standardized(features: &[Vec<f64>], mean: &[f64], scale: &[f64]) -> Result<DMatrix<f64>> {
    let width = check_features(features)?;
    if width != mean.len() {
        return Err(Error::WidthMismatch {
            expected: mean.len(),
            found: width,
        });
    }
    Ok(DMatrix::from_fn(features.len(), width, |i, j| {
        (features[i][j] - mean[j]) / scale[j]
    }))
}

fn softmax_loss(x: &DMatrix<f64>, y: &[usize], w: &DMatrix<f64>, b: &DVector<f64>, l2: f64) -> (f64, DMatrix<f64>) {
    let n = x.nrows();
    let mut p = x * w.transpose();
    let mut loss = 0.0;
    for i in 0..n {
        let mut row = p.row_mut(i);
        for (c, v) in row.iter_mut().enumerate() {
            *v += b[c];
        }
        let max = row.max();
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[y[i]];
        row.iter_mut().for_each(|v| *v = (*v - lse).exp());
    }
    loss = loss / n as f64 + 0.5 * l2 * w.norm_squared();
    (loss, p)
}

pub fn train_linear_classifier(features: &[Vec<f64>], labels: &[usize], config: &TrainConfig) -> Result<LinearModel> {
    let width = check_features(features)?;
    if labels.len() != features.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            found: labels.len(),
        });
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1).max(2);
    let n = features.len() as f64;
    let mut mean = vec![0.0; width];
    let mut scale = vec![1.0; width];
    for j in 0..width {
        mean[j] = features.iter().map(|f| f[j]).sum::<f64>() / n;
        let var = features.iter().map(|f| (f[j] - mean[j]).powi(2)).sum::<f64>() / n;
        if var > 0.0 {
            scale[j] = var.sqrt();
        }
    }
    let x = standardized(features, &mean, &scale)?;
    let mut rng = rng::substream(config.seed, tag::TRAIN);
    let mut w = DMatrix::from_fn(classes, width, |_, _| 0.01 * rng.sample::<f64, _>(StandardNormal));
    let mut b = DVector::zeros(classes);
    let (mut loss, mut probs) = softmax_loss(&x, labels, &w, &b, config.l2);
    let mut step = config.step;
    let mut history = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        for (i, &l) in labels.iter().enumerate() {
            probs[(i, l)] -= 1.0;
        }
        let gw = probs.transpose() * &x / n + &w * config.l2;
        let gb = DVector::from_fn(classes, |c, _| probs.column(c).sum() / n);
        loop {
            let w_new = &w - &gw * step;
            let b_new = &b - &gb * step;
            let (l_new, p_new) = softmax_loss(&x, labels, &w_new, &b_new, config.l2);
            if l_new <= loss {
                w = w_new;
                b = b_new;
                loss = l_new;
                probs = p_new;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                // no descent step left; recompute probabilities for the next epoch
                probs = softmax_loss(&x, labels, &w, &b, config.l2).1;
                break;
            }
        }
        history.push(loss);
    }
    Ok(LinearModel {
        weights: w,
        bias: b,
        feature_mean: mean,
        feature_scale: scale,
        loss_history: history,
    })
}

pub fn evaluate(model: &LinearModel, features: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::Empty);
    }
    let pred = model.predict(features)?;
    let correct = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Per-class shuffled split; class `c` contributes `round(fraction · n_c)`
/// items to the training side. Returns sorted `(train, test)` indices.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = rng::substream(seed, tag::SPLIT);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        let cut = ((train_fraction * idx.len() as f64).round() as usize).min(idx.len());
        train.extend_from_slice(&idx[..cut]);
        test.extend_from_slice(&idx[cut..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// A feature extractor under comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Pool(Pooling),
    Emperor,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Pool(p) => p.name(),
            Method::Emperor => "EMPEROR".into(),
        }
    }

    pub fn all(gem_p: f64) -> Vec<Method> {
        vec![
            Method::Pool(Pooling::Gap),
            Method::Pool(Pooling::Max),
            Method::Pool(Pooling::Gem {
                p: gem_p,
                strict: false,
            }),
            Method::Pool(Pooling::Cov),
            Method::Emperor,
        ]
    }
}

impl FromStr for Method {
    type Err = Error;

    /// `GAP`, `MAX`, `GeM` (p = 3), `GeM:<p>`, `COV`, `EMPEROR`; case-insensitive.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (head, arg) = match lower.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (lower.as_str(), None),
        };
        match (head, arg) {
            ("gap", None) => Ok(Method::Pool(Pooling::Gap)),
            ("max", None) => Ok(Method::Pool(Pooling::Max)),
            ("cov", None) => Ok(Method::Pool(Pooling::Cov)),
            ("emperor", None) => Ok(Method::Emperor),
            ("gem", p) => {
                let p = p.map_or(Ok(3.0), |v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad GeM exponent `{v}`")))
                })?;
                Ok(Method::Pool(Pooling::Gem { p, strict: false }))
            }
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Method::Pool(Pooling::Gem { p, .. }) => s.serialize_str(&format!("GeM:{p}")),
            other => s.serialize_str(&other.name()),
        }
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DatasetSpec {
    MatchedMoments {
        dim: usize,
        separation: f64,
        sets_per_class: usize,
        points_per_set: usize,
    },
    Generators {
        generators: Vec<GmmSpec>,
        sets_per_class: usize,
        points_per_set: usize,
    },
}

impl DatasetSpec {
    pub fn build(&self, seed: u64) -> Result<LabeledSetDataset> {
        match self {
            DatasetSpec::MatchedMoments {
                dim,
                separation,
                sets_per_class,
                points_per_set,
            } => synth_matched_moments_dataset(*dim, *sets_per_class, *points_per_set, *separation, seed),
            DatasetSpec::Generators {
                generators,
                sets_per_class,
                points_per_set,
            } => {
                let gens = generators.iter().map(GmmSpec::to_gmm).collect::<Result<Vec<_>>>()?;
                dataset_from_generators(gens, *sets_per_class, *points_per_set, seed)
            }
        }
    }
}

/// Benchmark configuration; also the JSON schema of the `bench` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub dataset: DatasetSpec,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_bench_descriptor")]
    pub descriptor: DescriptorConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_methods() -> Vec<Method> {
    Method::all(3.0)
}

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_train_fraction() -> f64 {
    0.7
}

/// `K = 2`, `L = 32`, with a lighter EM budget than single-descriptor use
/// (two restarts, at most 100 iterations) since every set is fitted.
pub fn default_bench_descriptor() -> DescriptorConfig {
    DescriptorConfig {
        slices: 32,
        components: 2,
        em: EmConfig {
            restarts: 2,
            max_iters: 100,
            rel_tol: 1e-6,
            ..EmConfig::default()
        },
        ..DescriptorConfig::default()
    }
}

impl BenchConfig {
    pub fn new(dataset: DatasetSpec) -> Self {
        Self {
            dataset,
            methods: default_methods(),
            descriptor: default_bench_descriptor(),
            seeds: default_seeds(),
            train_fraction: default_train_fraction(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub test_mean: f64,
    pub test_std: f64,
    pub train_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<MethodSummary>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,seed,train_acc,test_acc\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:?},{:?}", r.method, r.seed, r.train_acc, r.test_acc);
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<12} {:>10} {:>18}\n", "method", "train", "test (mean ± std)");
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{:<12} {:>10.4} {:>9.4} ± {:<6.4}",
                s.method, s.train_mean, s.test_mean, s.test_std
            );
        }
        out
    }

    pub fn summary_for(&self, method: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }
}

/// Features of every set under `method`. EMPEROR uses one shared slice set
/// (from `descriptor.seed`) so feature coordinates line up across sets.
pub fn compute_features(
    dataset: &LabeledSetDataset,
    method: Method,
    descriptor: &DescriptorConfig,
) -> Result<Vec<Vec<f64>>> {
    dataset
        .items
        .par_iter()
        .map(|(p, _)| match method {
            Method::Pool(pool) => baseline_pool(p, pool),
            Method::Emperor => emperor_descriptor(p, descriptor).map(|d| d.flatten()),
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn select<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(Error::InvalidArgument("train_fraction must lie in (0, 1)".into()));
    }
    if config.methods.is_empty() || config.seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one method and one seed".into()));
    }
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let dataset = config.dataset.build(seed)?;
        let labels = dataset.labels();
        let (train_idx, test_idx) = stratified_split(&labels, config.train_fraction, seed);
        let descriptor = DescriptorConfig {
            seed: rng::derive_seed(config.descriptor.seed, seed),
            ..config.descriptor
        };
        for &method in &config.methods {
            let tagged = |e: Error| Error::Method {
                method: method.name(),
                source: Box::new(e),
            };
            let features = compute_features(&dataset, method, &descriptor).map_err(tagged)?;
            let train_cfg = TrainConfig {
                seed: rng::derive_seed(config.train.seed, seed),
                ..config.train
            };
            let train_x = select(&features, &train_idx);
            let train_y = select(&labels, &train_idx);
            let model = train_linear_classifier(&train_x, &train_y, &train_cfg).map_err(tagged)?;
            let train_acc = evaluate(&model, &train_x, &train_y).map_err(tagged)?;
            let test_acc =
                evaluate(&model, &select(&features, &test_idx), &select(&labels, &test_idx)).map_err(tagged)?;
            rows.push(BenchRow {
                method: method.name(),
                seed,
                train_acc,
                test_acc,
            });
        }
    }
    let summary = config
        .methods
        .iter()
        .map(|m| {
            let name = m.name();
            let test: Vec<f64> = rows.iter().filter(|r| r.method == name).map(|r| r.test_acc).collect();
            let train: Vec<f64> = rows.iter().filter(|r| r.method == name).map(|r| r.train_acc).collect();
            let n = test.len() as f64;
            let mean = test.iter().sum::<f64>() / n;
            let var = test.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            MethodSummary {
                method: name,
                test_mean: mean,
                test_std: var.sqrt(),
                train_mean: train.iter().sum::<f64>() / n,
            }
        })
        .collect();
    Ok(BenchReport { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momentindex::{enumerate_multi_indices, MultiIndex};
    use crate::moments::multivariate_gmm_moment;

    #[test]
    fn matched_generators_share_low_moments() {
        let [a, b] = matched_moment_generators(4, 0.9).unwrap();
        for k in 1..=2 {
            for alpha in &enumerate_multi_indices(4, k).unwrap() {
                let ma = multivariate_gmm_moment(&a, alpha).unwrap();
                let mb = multivariate_gmm_moment(&b, alpha).unwrap();
                assert!((ma - mb).abs() < 1e-15, "{alpha}: {ma} vs {mb}");
            }
        }
        let e4 = MultiIndex::new(vec![4, 0, 0, 0]).unwrap();
        let b4 = multivariate_gmm_moment(&b, &e4).unwrap();
        let expected = 3.0 * 0.19f64.powi(2) + 6.0 * 0.19 * 0.81 + 0.9f64.powi(4);
        assert!((b4 - expected).abs() < 1e-12);
        assert!((b4 - 1.688).abs() < 1e-3);
        assert_eq!(multivariate_gmm_moment(&a, &e4).unwrap(), 3.0);
        assert!(matched_moment_generators(4, 1.0).is_err());
    }

    #[test]
    fn dataset_shape_and_means() {
        let ds = synth_matched_moments_dataset(3, 4, 400, 0.9, 1).unwrap();
        assert_eq!(ds.len(), 8);
        assert_eq!(ds.labels(), vec![0, 0, 0, 0, 1, 1, 1, 1]);
        for (p, _) in &ds.items {
            for j in 0..3 {
                let m = p.column(j).iter().sum::<f64>() / p.n() as f64;
                assert!(m.abs() < 4.0 / (p.n() as f64).sqrt(), "{m}");
            }
        }
        assert_eq!(ds, synth_matched_moments_dataset(3, 4, 400, 0.9, 1).unwrap());
    }

    fn blobs(n: usize, gap: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut r = rng::rng_from_seed(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let shift = if c == 0 { -gap } else { gap };
            x.push(vec![
                shift + r.sample::<f64, _>(StandardNormal),
                r.sample::<f64, _>(StandardNormal),
            ]);
            y.push(c);
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_train_perfectly() {
        let (x, y) = blobs(100, 6.0, 2);
        let m = train_linear_classifier(&x, &y, &TrainConfig::default()).unwrap();
        assert_eq!(evaluate(&m, &x, &y).unwrap(), 1.0);
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn constant_features_predict_majority() {
        let x = vec![vec![1.0, 2.0]; 10];
        let y = vec![0, 1, 1, 1, 0, 1, 1, 0, 1, 1];
        let m = train_linear_classifier(&x, &y, &TrainConfig::default()).unwrap();
        assert!((evaluate(&m, &x, &y).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn scaling_features_does_not_change_predictions() {
        let (x, y) = blobs(60, 0.5, 3);
        let x2: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
        let cfg = TrainConfig::default();
        let a = train_linear_classifier(&x, &y, &cfg).unwrap();
        let b = train_linear_classifier(&x2, &y, &cfg).unwrap();
        assert_eq!(a.predict(&x).unwrap(), b.predict(&x2).unwrap());
    }

    #[test]
    fn classifier_errors() {
        let (x, y) = blobs(10, 1.0, 4);
        let m = train_linear_classifier(&x, &y, &TrainConfig::default()).unwrap();
        assert!(matches!(
            evaluate(&m, &[vec![1.0]], &[0]),
            Err(Error::WidthMismatch { .. })
        ));
        let mut bad = x.clone();
        bad[3][1] = f64::INFINITY;
        assert!(matches!(
            train_linear_classifier(&bad, &y, &TrainConfig::default()),
            Err(Error::NonFiniteFeature { row: 3, col: 1 })
        ));
        let all_one = vec![1; 10];
        let m1 = train_linear_classifier(&x, &all_one, &TrainConfig::default()).unwrap();
        assert_eq!(evaluate(&m1, &x, &all_one).unwrap(), 1.0);
    }

    #[test]
    fn fixed_prediction_on_random_labels_is_near_chance() {
        let mut r = rng::rng_from_seed(5);
        let labels: Vec<usize> = (0..20_000).map(|_| r.random_range(0..4)).collect();
        let x = vec![vec![0.0]; labels.len()];
        let m = train_linear_classifier(&x[..8], &[0, 1, 2, 3, 0, 1, 2, 3], &TrainConfig::default()).unwrap();
        let acc = evaluate(&m, &x, &labels).unwrap();
        assert!((acc - 0.25).abs() < 0.02, "{acc}");
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let labels: Vec<usize> = (0..23).map(|i| usize::from(i >= 10)).collect();
        let (train, test) = stratified_split(&labels, 0.7, 9);
        assert_eq!(train.len() + test.len(), 23);
        assert!(train.iter().all(|i| !test.contains(i)));
        let c0 = train.iter().filter(|&&i| labels[i] == 0).count();
        assert_eq!(c0, 7);
        assert_eq!(train.len() - c0, 9);
        assert_eq!((train.clone(), test.clone()), stratified_split(&labels, 0.7, 9));
    }

    #[test]
    fn method_parsing() {
        assert_eq!("gap".parse::<Method>().unwrap(), Method::Pool(Pooling::Gap));
        assert_eq!(
            "GeM:2".parse::<Method>().unwrap(),
            Method::Pool(Pooling::Gem { p: 2.0, strict: false })
        );
        assert_eq!("EMPEROR".parse::<Method>().unwrap(), Method::Emperor);
        assert!("fspool".parse::<Method>().is_err());
        let s = serde_json::to_string(&Method::all(3.0)).unwrap();
        let back: Vec<Method> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, Method::all(3.0));
    }

    #[test]
    fn bench_config_from_json() {
        let text = r#"{"dataset":{"kind":"matched_moments","dim":2,"separation":0.5,
            "sets_per_class":4,"points_per_set":20},"methods":["GAP","EMPEROR"],"seeds":[1]}"#;
        let cfg: BenchConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.descriptor, default_bench_descriptor());
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.to_csv().starts_with("method,seed,train_acc,test_acc\nGAP,1,"));
        assert_eq!(r, run_benchmark(&cfg).unwrap());
    }
}
