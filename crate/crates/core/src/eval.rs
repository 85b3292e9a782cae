//! Precision / recall / F1, experiment orchestration and report rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Class, Dataset, Domain};
use crate::embeddings::{embedding_matrix, EmbeddingTable};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::neural::{self, LabeledSequence, NetworkConfig};
use crate::rq_extract::{ContextMode, RqInstance};
use crate::svm::{self, build_features, Example, FeatureLayout, GridSpec, Standardizer, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion counts with respect to one positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn prf(&self) -> Prf {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        Prf {
            precision,
            recall,
            f1: f1_from(precision, recall),
        }
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn confusion<T: PartialEq>(predictions: &[T], gold: &[T], positive: &T) -> Result<Counts> {
    if predictions.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument("no predictions to score".into()));
    }
    let mut c = Counts::default();
    for (p, g) in predictions.iter().zip(gold) {
        match (p == positive, g == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn prf1<T: PartialEq>(predictions: &[T], gold: &[T], positive: &T) -> Result<Prf> {
    Ok(confusion(predictions, gold, positive)?.prf())
}

/// Mean F1 of the `+1` and `-1` classes.
pub fn macro_f1_signed(predictions: &[i8], gold: &[i8]) -> Result<f64> {
    let a = prf1(predictions, gold, &1)?.f1;
    let b = prf1(predictions, gold, &-1)?.f1;
    Ok((a + b) / 2.0)
}

/// Rounds to two decimals, the precision used in rendered tables.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Svm,
    Lstm,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(ModelKind::Svm),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

impl ModelKind {
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Svm => "SVM",
            ModelKind::Lstm => "LSTM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "w2v")]
    W2v,
    #[serde(rename = "w2v+liwc")]
    W2vLiwc,
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w2v" => Ok(FeatureSet::W2v),
            "w2v+liwc" => Ok(FeatureSet::W2vLiwc),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature set `{other}`"
            ))),
        }
    }
}

impl FeatureSet {
    pub fn display_name(self) -> &'static str {
        match self {
            FeatureSet::W2v => "W2V",
            FeatureSet::W2vLiwc => "W2V+LIWC",
        }
    }
}

/// One labeled instance ready for featurization.
#[derive(Debug, Clone)]
pub struct LabeledInstance {
    pub instance: RqInstance,
    pub class: Class,
}

/// Rebuilds instances from the `pre/question/self_answer/post` fields of
/// extracted records. Unlabeled (ambiguous) records are skipped.
pub fn instances_from_dataset(dataset: &Dataset) -> Result<Vec<LabeledInstance>> {
    let mut out = Vec::new();
    for (r, class) in dataset.labeled() {
        let seg = r.segments.as_ref().ok_or_else(|| {
            Error::Format(format!("record `{}` has no extracted RQ segments", r.id))
        })?;
        out.push(LabeledInstance {
            instance: RqInstance::from_segments(&r.id, seg)?,
            class,
        });
    }
    Ok(out)
}

/// Resources shared by every experiment cell.
#[derive(Debug, Clone, Copy)]
pub struct Resources<'a> {
    pub table: &'a EmbeddingTable,
    pub lexicon: &'a Lexicon,
    pub categories: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub domain: Domain,
    pub model: ModelKind,
    pub features: FeatureSet,
    pub context: ContextMode,
    pub class: Class,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub provenance: BTreeMap<String, String>,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub domain: Domain,
    pub model: ModelKind,
    pub features: FeatureSet,
    pub context: ContextMode,
    pub seed: u64,
    pub grid: GridSpec,
    pub lstm: NetworkConfig,
    /// Fraction of the training set held out for LSTM model selection.
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub rows: Vec<ReportRow>,
    /// Chosen hyperparameters and other per-cell provenance.
    pub notes: BTreeMap<String, String>,
}

fn selected<'a>(features: FeatureSet, res: &Resources<'a>) -> &'a [String] {
    match features {
        FeatureSet::W2v => &[],
        FeatureSet::W2vLiwc => res.categories,
    }
}

fn task_classes(train: &[LabeledInstance]) -> Result<[Class; 2]> {
    let first = train
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty training corpus".into()))?;
    Ok(first.class.task().classes())
}

fn sign_of(class: Class, positive: Class) -> i8 {
    if class == positive {
        1
    } else {
        -1
    }
}

/// Trains on `mode` views of `train` and scores the RQ views of `test`.
pub fn run_experiment(
    train: &[LabeledInstance],
    test: &[LabeledInstance],
    spec: &ExperimentSpec,
    res: &Resources<'_>,
) -> Result<ExperimentOutcome> {
    let classes = task_classes(train)?;
    if test.is_empty() {
        return Err(Error::InvalidArgument("empty test corpus".into()));
    }
    if train
        .iter()
        .chain(test)
        .any(|l| !classes.contains(&l.class))
    {
        return Err(Error::InvalidArgument(
            "corpora mix labels from different tasks".into(),
        ));
    }
    let positive = classes[0];
    let mut notes = BTreeMap::new();

    let predictions: Vec<Class> = match spec.model {
        ModelKind::Svm => {
            let cats = selected(spec.features, res);
            let layout = FeatureLayout::new(res.table.dim(), cats.to_vec());
            let featurize = |l: &LabeledInstance, mode| -> Result<Example> {
                let f = build_features(&l.instance, mode, Some(res.table), res.lexicon, cats)?;
                Ok(Example::new(f, sign_of(l.class, positive)))
            };
            let train_ex = train
                .iter()
                .map(|l| featurize(l, spec.context))
                .collect::<Result<Vec<_>>>()?;
            let grid = svm::grid_search_cv(&train_ex, &layout, &spec.grid, spec.seed)?;
            notes.insert("svm.lambda".into(), format!("{:?}", grid.best_lambda));
            notes.insert("svm.epochs".into(), grid.best_epochs.to_string());
            let model = svm::train(
                &train_ex,
                &layout,
                SvmParams {
                    lambda: grid.best_lambda,
                    epochs: grid.best_epochs,
                    seed: spec.seed,
                },
            )?;
            test.iter()
                .map(|l| {
                    let e = featurize(l, ContextMode::Rq)?;
                    let (label, _) = model.predict(&e.features)?;
                    Ok(if label == 1 { classes[0] } else { classes[1] })
                })
                .collect::<Result<_>>()?
        }
        ModelKind::Lstm => {
            let cats = selected(spec.features, res);
            let mut config = spec.lstm.clone();
            config.embed_dim = res.table.dim();
            config.aux_dim = cats.len();
            config.seed = spec.seed;
            let aux_raw = |l: &LabeledInstance, mode| -> Result<Vec<f64>> {
                if cats.is_empty() {
                    Ok(Vec::new())
                } else {
                    build_features(&l.instance, mode, None, res.lexicon, cats)
                }
            };
            let train_aux = train
                .iter()
                .map(|l| aux_raw(l, spec.context))
                .collect::<Result<Vec<_>>>()?;
            let scaler = Standardizer::fit(train_aux.iter().map(Vec::as_slice), cats.len());
            let seq = |l: &LabeledInstance, mode, aux: &[f64]| LabeledSequence {
                matrix: embedding_matrix(
                    &crate::rq_extract::context_view(&l.instance, mode),
                    res.table,
                    config.max_len,
                ),
                aux: scaler.apply(aux),
                label: u8::from(l.class == positive),
            };
            let all: Vec<LabeledSequence> = train
                .iter()
                .zip(&train_aux)
                .map(|(l, a)| seq(l, spec.context, a))
                .collect();
            let (fit, val) = neural::holdout(&all, spec.validation_fraction, spec.seed);
            let trained = neural::train_network(&config, &fit, &val)?;
            notes.insert("lstm.best_epoch".into(), trained.best_epoch.to_string());
            test.iter()
                .map(|l| {
                    let a = aux_raw(l, ContextMode::Rq)?;
                    let s = seq(l, ContextMode::Rq, &a);
                    let p = neural::predict(&trained.params, &s.matrix, &s.aux)?;
                    Ok(if p >= 0.5 { classes[0] } else { classes[1] })
                })
                .collect::<Result<_>>()?
        }
    };

    let gold: Vec<Class> = test.iter().map(|l| l.class).collect();
    let rows = classes
        .iter()
        .map(|c| {
            let prf = prf1(&predictions, &gold, c)?;
            Ok(ReportRow {
                domain: spec.domain,
                model: spec.model,
                features: spec.features,
                context: spec.context,
                class: *c,
                p: prf.precision,
                r: prf.recall,
                f1: prf.f1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutcome { rows, notes })
}

/// The `(model, features, context)` cells of a results table: per model a
/// W2V baseline on the RQ view, then W2V+LIWC on all four views.
pub fn table_cells() -> Vec<(ModelKind, FeatureSet, ContextMode)> {
    let mut cells = Vec::new();
    for model in [ModelKind::Svm, ModelKind::Lstm] {
        cells.push((model, FeatureSet::W2v, ContextMode::Rq));
        for ctx in ContextMode::ALL {
            cells.push((model, FeatureSet::W2vLiwc, ctx));
        }
    }
    cells
}

/// Runs every table cell. Cells run on up to `threads` workers; rows come
/// back in cell order regardless.
pub fn run_grid(
    train: &[LabeledInstance],
    test: &[LabeledInstance],
    base: &ExperimentSpec,
    res: &Resources<'_>,
    threads: usize,
) -> Result<EvalReport> {
    use rayon::prelude::*;

    let cells = table_cells();
    let run = |&(model, features, context): &(ModelKind, FeatureSet, ContextMode)| {
        let spec = ExperimentSpec {
            model,
            features,
            context,
            ..base.clone()
        };
        run_experiment(train, test, &spec, res).map(|o| ((model, features, context), o))
    };
    let outcomes: Vec<_> = if threads <= 1 {
        cells.iter().map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        pool.install(|| cells.par_iter().map(run).collect::<Result<Vec<_>>>())?
    };

    let mut report = EvalReport::default();
    for ((model, features, context), outcome) in outcomes {
        for (k, v) in outcome.notes {
            let key = format!(
                "{}.{}.{}.{k}",
                model_key(model),
                feature_key(features),
                context.as_str()
            );
            report.provenance.insert(key, v);
        }
        report.rows.extend(outcome.rows);
    }
    Ok(report)
}

fn model_key(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Svm => "svm",
        ModelKind::Lstm => "lstm",
    }
}

fn feature_key(f: FeatureSet) -> &'static str {
    match f {
        FeatureSet::W2v => "w2v",
        FeatureSet::W2vLiwc => "w2v+liwc",
    }
}

impl EvalReport {
    /// One JSON object per line: provenance first, then one line per row.
    pub fn write_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let prov = serde_json::json!({ "provenance": self.provenance });
        writeln!(out, "{prov}")?;
        for row in &self.rows {
            writeln!(
                out,
                "{}",
                serde_json::to_string(row).expect("row serializes")
            )?;
        }
        Ok(())
    }

    pub fn read_lines<R: BufRead>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Prov {
            provenance: BTreeMap<String, String>,
        }
        let mut report = EvalReport::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(p) = serde_json::from_str::<Prov>(&line) {
                report.provenance.extend(p.provenance);
                continue;
            }
            let row: ReportRow =
                serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            report.rows.push(row);
        }
        Ok(report)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_lines(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_lines(std::io::BufReader::new(file))
    }

    /// Aligned text table with one line per `(domain, model, features,
    /// context)` and P/R/F1 for each class, rounded to two decimals.
    pub fn render_table(&self) -> String {
        let mut groups: Vec<(
            (Domain, ModelKind, FeatureSet, ContextMode),
            Vec<&ReportRow>,
        )> = Vec::new();
        for row in &self.rows {
            let key = (row.domain, row.model, row.features, row.context);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(row),
                None => groups.push((key, vec![row])),
            }
        }
        let mut classes: Vec<Class> = Vec::new();
        for row in &self.rows {
            if !classes.contains(&row.class) {
                classes.push(row.class);
            }
        }

        let mut out = String::new();
        let _ = write!(
            out,
            "{:>3} | {:<7} | {:<5} | {:<9} | {:<7}",
            "#", "Domain", "Model", "Features", "Training"
        );
        for c in &classes {
            let _ = write!(
                out,
                " || {:<9} {:>4} {:>4} {:>4}",
                c.as_str(),
                "P",
                "R",
                "F1"
            );
        }
        out.push('\n');
        for (i, ((domain, model, features, context), rows)) in groups.iter().enumerate() {
            let _ = write!(
                out,
                "{:>3} | {:<7} | {:<5} | {:<9} | {:<7}",
                i + 1,
                domain.as_str(),
                model.display_name(),
                features.display_name(),
                context.display_name()
            );
            for c in &classes {
                match rows.iter().find(|r| r.class == *c) {
                    Some(r) => {
                        let _ = write!(
                            out,
                            " || {:<9} {:.2} {:.2} {:.2}",
                            "",
                            round2(r.p),
                            round2(r.r),
                            round2(r.f1)
                        );
                    }
                    None => {
                        let _ = write!(out, " || {:<9} {:>4} {:>4} {:>4}", "", "-", "-", "-");
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
