//! Linear SVM trained with Pegasos-style stochastic subgradient descent,
//! stratified grid-search cross-validation, and category weight ranking.
//!
//! The solver minimizes `lambda/2 * |w|^2 + mean(max(0, 1 - y * (w.x + b)))`
//! over standardized features. The bias is handled as an extra weight on a
//! constant input, so it shares the regularizer and the projection onto the
//! ball of radius `1/sqrt(lambda)`.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::embeddings::{average_embedding, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::macro_f1_signed;
use crate::lexicon::{score, Lexicon};
use crate::rq_extract::{ContextMode, RqInstance};

/// Named blocks of a feature vector: the embedding average first, then one
/// column per category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureLayout {
    pub embedding_dim: usize,
    pub categories: Vec<String>,
}

impl FeatureLayout {
    pub fn new(embedding_dim: usize, categories: Vec<String>) -> Self {
        FeatureLayout {
            embedding_dim,
            categories,
        }
    }

    /// Anonymous dense layout, for inputs that are not text features.
    pub fn dense(dim: usize) -> Self {
        Self::new(dim, Vec::new())
    }

    pub fn categories_only(categories: Vec<String>) -> Self {
        Self::new(0, categories)
    }

    pub fn width(&self) -> usize {
        self.embedding_dim + self.categories.len()
    }
}

/// Feature vector for one instance under one context view.
///
/// Without a table the embedding block is empty; with no categories the
/// vector is the plain embedding average.
pub fn build_features(
    instance: &RqInstance,
    mode: ContextMode,
    table: Option<&EmbeddingTable>,
    lexicon: &Lexicon,
    selected: &[String],
) -> Result<Vec<f64>> {
    let sentences = instance.view_sentences(mode);
    let tokens: Vec<&str> = sentences
        .iter()
        .flat_map(|s| s.tokens.iter().map(String::as_str))
        .collect();
    let mut out = match table {
        Some(t) => average_embedding(&tokens, t),
        None => Vec::new(),
    };
    if !selected.is_empty() {
        out.extend(score(&tokens, sentences.len(), lexicon, selected)?.values());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    /// `+1` or `-1`.
    pub label: i8,
}

impl Example {
    pub fn new(features: Vec<f64>, label: i8) -> Self {
        Example { features, label }
    }
}

/// Per-dimension affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }

    /// Fits on `rows`. Constant columns keep a unit scale so they map to 0.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n = rows.len().max(1) as f64;
        let mut means = vec![0.0; dim];
        for r in &rows {
            for (m, x) in means.iter_mut().zip(*r) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![0.0; dim];
        for r in &rows {
            for ((s, x), m) in stds.iter_mut().zip(*r).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        for s in stds.iter_mut() {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Standardizer { means, stds }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// Weights in standardized feature space.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub layout: FeatureLayout,
    pub standardizer: Standardizer,
}

impl LinearModel {
    /// A model that applies `weights` to raw features.
    pub fn new(weights: Vec<f64>, bias: f64, layout: FeatureLayout) -> Result<Self> {
        if weights.len() != layout.width() {
            return Err(Error::Shape(format!(
                "{} weights for a layout of width {}",
                weights.len(),
                layout.width()
            )));
        }
        let standardizer = Standardizer::identity(weights.len());
        Ok(LinearModel {
            weights,
            bias,
            layout,
            standardizer,
        })
    }

    pub fn margin(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.weights.len(),
                features.len()
            )));
        }
        let z = self.standardizer.apply(features);
        Ok(dot(&self.weights, &z) + self.bias)
    }

    /// `(label, margin)`; a margin of exactly zero maps to `+1`.
    pub fn predict(&self, features: &[f64]) -> Result<(i8, f64)> {
        let m = self.margin(features)?;
        Ok((if m >= 0.0 { 1 } else { -1 }, m))
    }

    pub fn weight_norm(&self) -> f64 {
        dot(&self.weights, &self.weights).sqrt()
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "rq-svm v1 {}", self.weights.len())?;
        write!(out, "layout {}", self.layout.embedding_dim)?;
        for c in &self.layout.categories {
            write!(out, " {c}")?;
        }
        writeln!(out)?;
        write_row(&mut out, "means", &self.standardizer.means)?;
        write_row(&mut out, "stds", &self.standardizer.stds)?;
        write_row(&mut out, "weights", &self.weights)?;
        writeln!(out, "bias {:?}", self.bias)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let lines: Vec<String> = reader
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::Format(e.to_string()))?;
        let field = |i: usize, key: &str| -> Result<Vec<&str>> {
            let line = lines
                .get(i)
                .ok_or_else(|| Error::parse(i + 1, format!("missing `{key}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::parse(i + 1, format!("expected `{key}`")));
            }
            Ok(parts.collect())
        };
        let header = field(0, "rq-svm")?;
        if header.first() != Some(&"v1") {
            return Err(Error::parse(1, "unsupported model version"));
        }
        let dim: usize = header
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(1, "missing dimension"))?;
        let layout = field(1, "layout")?;
        let embedding_dim = layout
            .first()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(2, "missing embedding width"))?;
        let layout = FeatureLayout::new(
            embedding_dim,
            layout[1..].iter().map(|s| s.to_string()).collect(),
        );
        let floats = |i: usize, key: &str| -> Result<Vec<f64>> {
            let v = field(i, key)?
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
            Ok(v)
        };
        let means = floats(2, "means")?;
        let stds = floats(3, "stds")?;
        let weights = floats(4, "weights")?;
        let bias = floats(5, "bias")?;
        if [means.len(), stds.len(), weights.len(), layout.width()] != [dim; 4] || bias.len() != 1 {
            return Err(Error::Format("model dimensions disagree".into()));
        }
        Ok(LinearModel {
            weights,
            bias: bias[0],
            layout,
            standardizer: Standardizer { means, stds },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }
}

fn write_row<W: Write>(out: &mut W, key: &str, values: &[f64]) -> std::io::Result<()> {
    write!(out, "{key}")?;
    for v in values {
        write!(out, " {v:?}")?;
    }
    writeln!(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

fn check_examples(examples: &[Example], width: usize) -> Result<()> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    if let Some(e) = examples.iter().find(|e| e.features.len() != width) {
        return Err(Error::Shape(format!(
            "example has {} features, layout width is {width}",
            e.features.len()
        )));
    }
    if let Some(e) = examples.iter().find(|e| e.label != 1 && e.label != -1) {
        return Err(Error::InvalidArgument(format!(
            "label {} is not +1/-1",
            e.label
        )));
    }
    let pos = examples.iter().any(|e| e.label == 1);
    let neg = examples.iter().any(|e| e.label == -1);
    if !(pos && neg) {
        return Err(Error::OneClass);
    }
    Ok(())
}

/// Trains a linear model. Deterministic for a fixed seed.
pub fn train(
    examples: &[Example],
    layout: &FeatureLayout,
    params: SvmParams,
) -> Result<LinearModel> {
    if !(params.lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    check_examples(examples, layout.width())?;

    let dim = layout.width();
    let standardizer = Standardizer::fit(examples.iter().map(|e| e.features.as_slice()), dim);
    let data: Vec<(Vec<f64>, f64)> = examples
        .iter()
        .map(|e| (standardizer.apply(&e.features), f64::from(e.label)))
        .collect();

    let lambda = params.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let (x, y) = &data[i];
            let margin = y * (dot(&w, x) + b);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            b *= shrink;
            if margin < 1.0 {
                for (v, xi) in w.iter_mut().zip(x) {
                    *v += eta * y * xi;
                }
                b += eta * y;
            }
            let norm = (dot(&w, &w) + b * b).sqrt();
            if norm > radius {
                let s = radius / norm;
                w.iter_mut().for_each(|v| *v *= s);
                b *= s;
            }
        }
    }
    Ok(LinearModel {
        weights: w,
        bias: b,
        layout: layout.clone(),
        standardizer,
    })
}

/// Regularized hinge objective of `model` on `examples`.
pub fn objective(model: &LinearModel, examples: &[Example], lambda: f64) -> Result<f64> {
    let mut hinge = 0.0;
    for e in examples {
        let m = model.margin(&e.features)?;
        hinge += (1.0 - f64::from(e.label) * m).max(0.0);
    }
    let reg = dot(&model.weights, &model.weights) + model.bias * model.bias;
    Ok(lambda / 2.0 * reg + hinge / examples.len().max(1) as f64)
}

/// Stratified fold index for every label. Each class is shuffled and dealt
/// round-robin, so fold sizes per class differ by at most one.
pub fn stratified_folds(labels: &[i8], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut classes: Vec<i8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    for c in classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            assignment[i] = k % folds;
        }
    }
    assignment
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub lambdas: Vec<f64>,
    pub epochs: Vec<usize>,
    pub folds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1],
            epochs: vec![10, 30, 100],
            folds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub lambda: f64,
    pub epochs: usize,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub best_lambda: f64,
    pub best_epochs: usize,
    pub candidates: Vec<CandidateScore>,
}

fn minority_count(examples: &[Example]) -> usize {
    let pos = examples.iter().filter(|e| e.label == 1).count();
    pos.min(examples.len() - pos)
}

fn split_folds(
    examples: &[Example],
    assignment: &[usize],
    fold: usize,
) -> (Vec<Example>, Vec<Example>) {
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (e, &f) in examples.iter().zip(assignment) {
        if f == fold {
            held.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    (train, held)
}

/// Picks the `(lambda, epochs)` pair with the best mean macro-F1 over
/// stratified folds. Ties go to the smaller lambda, then fewer epochs.
pub fn grid_search_cv(
    examples: &[Example],
    layout: &FeatureLayout,
    grid: &GridSpec,
    seed: u64,
) -> Result<GridResult> {
    if grid.lambdas.is_empty() || grid.epochs.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    if grid.folds < 2 {
        return Err(Error::InvalidArgument("need at least 2 folds".into()));
    }
    check_examples(examples, layout.width())?;
    if grid.folds > minority_count(examples) {
        return Err(Error::InvalidArgument(format!(
            "{} folds exceed the minority class size {}",
            grid.folds,
            minority_count(examples)
        )));
    }

    let labels: Vec<i8> = examples.iter().map(|e| e.label).collect();
    let assignment = stratified_folds(&labels, grid.folds, seed);
    let splits: Vec<_> = (0..grid.folds)
        .map(|f| split_folds(examples, &assignment, f))
        .collect();

    let mut candidates = Vec::new();
    for &lambda in &grid.lambdas {
        for &epochs in &grid.epochs {
            let params = SvmParams {
                lambda,
                epochs,
                seed,
            };
            let mut fold_scores = Vec::with_capacity(grid.folds);
            for (train_part, held) in &splits {
                let model = train(train_part, layout, params)?;
                let pred = held
                    .iter()
                    .map(|e| model.predict(&e.features).map(|p| p.0))
                    .collect::<Result<Vec<_>>>()?;
                let gold: Vec<i8> = held.iter().map(|e| e.label).collect();
                fold_scores.push(macro_f1_signed(&pred, &gold)?);
            }
            let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
            candidates.push(CandidateScore {
                lambda,
                epochs,
                fold_scores,
                mean,
            });
        }
    }

    let best = candidates
        .iter()
        .min_by(|a, b| {
            b.mean
                .total_cmp(&a.mean)
                .then(a.lambda.total_cmp(&b.lambda))
                .then(a.epochs.cmp(&b.epochs))
        })
        .expect("grid is nonempty");
    Ok(GridResult {
        best_lambda: best.lambda,
        best_epochs: best.epochs,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureWeight {
    pub category: String,
    /// Mean absolute weight across folds.
    pub fw: f64,
    /// Mean signed weight across folds.
    pub mean_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRanking {
    /// Categories whose mean weight favors the `+1` class, strongest first.
    pub positive: Vec<FeatureWeight>,
    /// Categories whose mean weight favors the `-1` class, strongest first.
    pub negative: Vec<FeatureWeight>,
    /// All categories by descending FW; zero-weight categories come last.
    pub all: Vec<FeatureWeight>,
}

/// Ranks category features by their mean absolute weight over `folds`
/// cross-validation models. Each fold trains on the other folds.
pub fn rank_feature_weights(
    examples: &[Example],
    layout: &FeatureLayout,
    folds: usize,
    params: SvmParams,
) -> Result<FeatureRanking> {
    if layout.embedding_dim != 0 || layout.categories.is_empty() {
        return Err(Error::InvalidArgument(
            "weight ranking needs a category-only layout".into(),
        ));
    }
    check_examples(examples, layout.width())?;
    if folds < 2 || folds > minority_count(examples) {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds invalid for minority class size {}",
            minority_count(examples)
        )));
    }
    let labels: Vec<i8> = examples.iter().map(|e| e.label).collect();
    let assignment = stratified_folds(&labels, folds, params.seed);
    let dim = layout.width();
    let mut abs_sum = vec![0.0; dim];
    let mut signed_sum = vec![0.0; dim];
    for f in 0..folds {
        let (train_part, _) = split_folds(examples, &assignment, f);
        let model = train(&train_part, layout, params)?;
        for (j, w) in model.weights.iter().enumerate() {
            abs_sum[j] += w.abs();
            signed_sum[j] += w;
        }
    }
    let n = folds as f64;
    let mut all: Vec<FeatureWeight> = layout
        .categories
        .iter()
        .enumerate()
        .map(|(j, c)| FeatureWeight {
            category: c.clone(),
            fw: abs_sum[j] / n,
            mean_weight: signed_sum[j] / n,
        })
        .collect();
    all.sort_by(|a, b| {
        b.fw.total_cmp(&a.fw)
            .then_with(|| a.category.cmp(&b.category))
    });
    let positive = all
        .iter()
        .filter(|w| w.mean_weight > 0.0)
        .cloned()
        .collect();
    let negative = all
        .iter()
        .filter(|w| w.mean_weight < 0.0)
        .cloned()
        .collect();
    Ok(FeatureRanking {
        positive,
        negative,
        all,
    })
}
