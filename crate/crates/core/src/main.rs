use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rq_core::corpus::{
    balance_classes, clean_tweet, load_corpus, split_dataset, Dataset, Domain, Record,
};
use rq_core::embeddings::{load_embeddings, EmbeddingFormat, EmbeddingTable};
use rq_core::eval::{
    instances_from_dataset, run_experiment, run_grid, EvalReport, ExperimentSpec, FeatureSet,
    LabeledInstance, ModelKind, Resources,
};
use rq_core::lexicon::{domain_categories, load_lexicon, parse_lexicon, Lexicon};
use rq_core::neural::{self, LabeledSequence, NetworkConfig};
use rq_core::rq_extract::{context_view, extract_rqs, ContextMode, ExtractOptions};
use rq_core::svm::{
    self, build_features, Example, FeatureLayout, GridSpec, Standardizer, SvmParams,
};
use rq_core::synth::{generate, SynthOptions};
use rq_core::text::segment_sentences;

const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.dic");

#[derive(Parser)]
#[command(
    name = "rq",
    version,
    about = "Rhetorical question extraction and classification"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, balance or split a record file.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Extract RQ instances from every record.
    Extract(ExtractArgs),
    /// Write one feature vector per instance.
    Featurize(FeaturizeArgs),
    /// Train and save a model.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Train on one corpus, test on another, write the report.
    Evaluate(EvaluateArgs),
    /// Print a saved report.
    Report(ReportArgs),
    /// Run the full table of model / feature / context cells.
    Grid(GridArgs),
    /// Write a synthetic corpus, dictionary and embeddings.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Validate a record file and print class counts.
    Load {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the normalized records here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Downsample the larger class.
    Balance {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Stratified split into `train.lines` and `test.lines` under `--out`.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        train_frac: f64,
    },
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    domain: Domain,
    #[arg(long)]
    min_words: Option<usize>,
    #[arg(long)]
    max_words: Option<usize>,
    /// Skip the post length filter.
    #[arg(long)]
    no_length_filter: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Binary,
}

#[derive(Args, Clone)]
struct ResourceArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    embedding_format: FormatArg,
    /// Dictionary file; the bundled one when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Which category set to score.
    #[arg(long)]
    categories: Domain,
    /// Drop a category from the selected set (repeatable).
    #[arg(long = "exclude-category")]
    exclude: Vec<String>,
}

struct LoadedResources {
    table: EmbeddingTable,
    lexicon: Lexicon,
    categories: Vec<String>,
}

impl ResourceArgs {
    fn load(&self) -> Result<LoadedResources> {
        let format = match self.embedding_format {
            FormatArg::Text => EmbeddingFormat::Text,
            FormatArg::Binary => EmbeddingFormat::Binary,
        };
        let table = load_embeddings(&self.embeddings, format)?;
        let lexicon = match &self.lexicon {
            Some(p) => load_lexicon(p)?,
            None => parse_lexicon(BUILTIN_LEXICON.as_bytes())?,
        };
        let categories: Vec<String> = domain_categories(self.categories)
            .into_iter()
            .filter(|c| !self.exclude.contains(c))
            .collect();
        for c in &self.exclude {
            if !lexicon.knows(c) {
                bail!("unknown category `{c}`");
            }
        }
        Ok(LoadedResources {
            table,
            lexicon,
            categories,
        })
    }

    fn provenance(&self, out: &mut BTreeMap<String, String>) {
        out.insert("embeddings".into(), self.embeddings.display().to_string());
        out.insert(
            "embedding_format".into(),
            match self.embedding_format {
                FormatArg::Text => "text",
                FormatArg::Binary => "binary",
            }
            .into(),
        );
        out.insert(
            "lexicon".into(),
            self.lexicon
                .as_ref()
                .map_or_else(|| "builtin".into(), |p| p.display().to_string()),
        );
        out.insert("categories".into(), self.categories.as_str().into());
        out.insert("exclude".into(), self.exclude.join(","));
    }
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "rq")]
    context: ContextMode,
    #[arg(long, default_value = "w2v+liwc")]
    features: FeatureSet,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Subcommand)]
enum TrainCommand {
    /// Grid-search and train a linear SVM.
    Svm(TrainSvmArgs),
    /// Train the Conv + BiLSTM network.
    Lstm(TrainLstmArgs),
}

#[derive(Args)]
struct GridArgsCommon {
    /// Comma-separated regularization strengths.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Comma-separated epoch counts.
    #[arg(long, value_delimiter = ',')]
    svm_epochs: Option<Vec<usize>>,
    #[arg(long)]
    folds: Option<usize>,
}

impl GridArgsCommon {
    fn spec(&self) -> GridSpec {
        let mut g = GridSpec::default();
        if let Some(l) = &self.lambdas {
            g.lambdas = l.clone();
        }
        if let Some(e) = &self.svm_epochs {
            g.epochs = e.clone();
        }
        if let Some(f) = self.folds {
            g.folds = f;
        }
        g
    }
}

#[derive(Args)]
struct TrainSvmArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "rq")]
    context: ContextMode,
    #[arg(long, default_value = "w2v+liwc")]
    features: FeatureSet,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    grid: GridArgsCommon,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Args)]
struct TrainLstmArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "rq")]
    context: ContextMode,
    #[arg(long, default_value = "w2v+liwc")]
    features: FeatureSet,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file with network hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    validation_fraction: f64,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file with network hyperparameters.
    #[arg(long)]
    lstm_config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    validation_fraction: f64,
    #[command(flatten)]
    grid: GridArgsCommon,
    #[command(flatten)]
    resources: ResourceArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: ModelKind,
    #[arg(long, default_value = "w2v+liwc")]
    features: FeatureSet,
    #[arg(long, default_value = "rq")]
    context: ContextMode,
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Lines,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    format: ReportFormat,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    domain: Domain,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    size: usize,
    #[arg(long, default_value_t = 25)]
    dim: usize,
    #[arg(long, default_value = "Certainty")]
    planted: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rq: error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Corpus(c) => corpus(c),
        Command::Extract(a) => extract(a),
        Command::Featurize(a) => featurize(a),
        Command::Train(TrainCommand::Svm(a)) => train_svm(a),
        Command::Train(TrainCommand::Lstm(a)) => train_lstm(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
        Command::Grid(a) => grid(a),
        Command::Synth(a) => synth(a),
    }
}

fn print_counts(ds: &Dataset) {
    let unlabeled = ds.len() - ds.label_map.len();
    let counts: Vec<String> = ds
        .class_counts()
        .iter()
        .map(|(c, n)| format!("{c}={n}"))
        .collect();
    println!(
        "records={} {} unlabeled={unlabeled}",
        ds.len(),
        counts.join(" ")
    );
}

fn corpus(c: CorpusCommand) -> Result<()> {
    match c {
        CorpusCommand::Load { input, out } => {
            let ds = load_corpus(&input)?;
            print_counts(&ds);
            if let Some(out) = out {
                ds.save(&out)?;
            }
        }
        CorpusCommand::Balance { input, out, seed } => {
            let ds = balance_classes(&load_corpus(&input)?, seed)?;
            print_counts(&ds);
            ds.save(&out)?;
        }
        CorpusCommand::Split {
            input,
            out,
            seed,
            train_frac,
        } => {
            let (train, test) = split_dataset(&load_corpus(&input)?, train_frac, seed)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            train.save(&out.join("train.lines"))?;
            test.save(&out.join("test.lines"))?;
            print_counts(&train);
            print_counts(&test);
        }
    }
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let ds = load_corpus(&a.input)?;
    let mut opts = match a.domain {
        Domain::Forums => ExtractOptions::forums(),
        Domain::Twitter => ExtractOptions::twitter(),
    };
    if let Some(n) = a.min_words {
        opts.min_words = n;
    }
    if let Some(n) = a.max_words {
        opts.max_words = n;
    }
    if a.no_length_filter {
        opts.apply_length_filter = false;
    }
    let mut out = Vec::new();
    for r in &ds.records {
        let text = match r.domain {
            Domain::Twitter => clean_tweet(&r.text),
            Domain::Forums => r.text.clone(),
        };
        let found = extract_rqs(&segment_sentences(&text), &r.id, opts);
        let many = found.len() > 1;
        for (k, inst) in found.into_iter().enumerate() {
            out.push(Record {
                id: if many {
                    format!("{}#{}", r.id, k + 1)
                } else {
                    r.id.clone()
                },
                segments: Some(inst.segments()),
                ..r.clone()
            });
        }
    }
    let result = Dataset::from_records(out)?;
    println!("{} instances from {} records", result.len(), ds.len());
    result.save(&a.out)?;
    Ok(())
}

fn load_instances(path: &Path) -> Result<Vec<LabeledInstance>> {
    let ds = load_corpus(path)?;
    Ok(instances_from_dataset(&ds)
        .with_context(|| format!("reading instances from {}", path.display()))?)
}

fn selected(features: FeatureSet, res: &LoadedResources) -> Vec<String> {
    match features {
        FeatureSet::W2v => Vec::new(),
        FeatureSet::W2vLiwc => res.categories.clone(),
    }
}

fn featurize(a: FeaturizeArgs) -> Result<()> {
    let res = a.resources.load()?;
    let data = load_instances(&a.input)?;
    let cats = selected(a.features, &res);
    let file =
        std::fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut w = std::io::BufWriter::new(file);
    let layout = serde_json::json!({
        "layout": { "embedding_dim": res.table.dim(), "categories": cats }
    });
    writeln!(w, "{layout}")?;
    for l in &data {
        let f = build_features(
            &l.instance,
            a.context,
            Some(&res.table),
            &res.lexicon,
            &cats,
        )?;
        let line =
            serde_json::json!({ "id": l.instance.source_id, "class": l.class, "features": f });
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn train_svm(a: TrainSvmArgs) -> Result<()> {
    let res = a.resources.load()?;
    let data = load_instances(&a.train)?;
    let positive = data
        .first()
        .context("empty training corpus")?
        .class
        .task()
        .positive();
    let cats = selected(a.features, &res);
    let layout = FeatureLayout::new(res.table.dim(), cats.clone());
    let examples = data
        .iter()
        .map(|l| {
            let f = build_features(
                &l.instance,
                a.context,
                Some(&res.table),
                &res.lexicon,
                &cats,
            )?;
            Ok(Example::new(f, if l.class == positive { 1 } else { -1 }))
        })
        .collect::<rq_core::Result<Vec<_>>>()?;
    let grid = svm::grid_search_cv(&examples, &layout, &a.grid.spec(), a.seed)?;
    let model = svm::train(
        &examples,
        &layout,
        SvmParams {
            lambda: grid.best_lambda,
            epochs: grid.best_epochs,
            seed: a.seed,
        },
    )?;
    model.save(&a.out)?;
    println!("lambda={:?} epochs={}", grid.best_lambda, grid.best_epochs);
    Ok(())
}

fn read_network_config(path: Option<&Path>, categories: Domain) -> Result<NetworkConfig> {
    let base = match categories {
        Domain::Forums => NetworkConfig::default(),
        Domain::Twitter => NetworkConfig::twitter(),
    };
    let Some(path) = path else { return Ok(base) };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut value: toml::Table =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let defaults = toml::Table::try_from(&base)?;
    for (k, v) in defaults {
        value.entry(k).or_insert(v);
    }
    Ok(toml::Value::Table(value).try_into()?)
}

fn train_lstm(a: TrainLstmArgs) -> Result<()> {
    let res = a.resources.load()?;
    let data = load_instances(&a.train)?;
    let positive = data
        .first()
        .context("empty training corpus")?
        .class
        .task()
        .positive();
    let cats = selected(a.features, &res);
    let mut config = read_network_config(a.config.as_deref(), a.resources.categories)?;
    config.embed_dim = res.table.dim();
    config.aux_dim = cats.len();
    config.seed = a.seed;
    let raw: Vec<Vec<f64>> = data
        .iter()
        .map(|l| {
            if cats.is_empty() {
                Ok(Vec::new())
            } else {
                build_features(&l.instance, a.context, None, &res.lexicon, &cats)
            }
        })
        .collect::<rq_core::Result<_>>()?;
    let scaler = Standardizer::fit(raw.iter().map(Vec::as_slice), cats.len());
    let all: Vec<LabeledSequence> = data
        .iter()
        .zip(&raw)
        .map(|(l, aux)| LabeledSequence {
            matrix: rq_core::embeddings::embedding_matrix(
                &context_view(&l.instance, a.context),
                &res.table,
                config.max_len,
            ),
            aux: scaler.apply(aux),
            label: u8::from(l.class == positive),
        })
        .collect();
    let (fit, val) = neural::holdout(&all, a.validation_fraction, a.seed);
    let trained = neural::train_network(&config, &fit, &val)?;
    trained.params.save(&a.out)?;
    for s in &trained.history {
        println!(
            "epoch={} train_loss={:.4} val_loss={:.4} val_macro_f1={:.4}",
            s.epoch, s.train_loss, s.val_loss, s.val_macro_f1
        );
    }
    println!("best_epoch={}", trained.best_epoch);
    Ok(())
}

struct Prepared {
    train: Vec<LabeledInstance>,
    test: Vec<LabeledInstance>,
    res: LoadedResources,
    spec: ExperimentSpec,
    provenance: BTreeMap<String, String>,
}

fn prepare(e: &ExperimentArgs, domain: Domain) -> Result<Prepared> {
    let res = e.resources.load()?;
    let train = load_instances(&e.train)?;
    let test = load_instances(&e.test)?;
    let lstm = read_network_config(e.lstm_config.as_deref(), domain)?;
    let spec = ExperimentSpec {
        domain,
        model: ModelKind::Svm,
        features: FeatureSet::W2vLiwc,
        context: ContextMode::Rq,
        seed: e.seed,
        grid: e.grid.spec(),
        lstm,
        validation_fraction: e.validation_fraction,
    };
    let mut provenance = BTreeMap::new();
    provenance.insert("seed".into(), e.seed.to_string());
    provenance.insert("train".into(), e.train.display().to_string());
    provenance.insert("test".into(), e.test.display().to_string());
    provenance.insert("grid".into(), serde_json::to_string(&spec.grid)?);
    provenance.insert("lstm.config".into(), serde_json::to_string(&spec.lstm)?);
    provenance.insert(
        "validation_fraction".into(),
        format!("{:?}", e.validation_fraction),
    );
    e.resources.provenance(&mut provenance);
    Ok(Prepared {
        train,
        test,
        res,
        spec,
        provenance,
    })
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let domain = a.experiment.resources.categories;
    let mut p = prepare(&a.experiment, domain)?;
    p.spec.model = a.model;
    p.spec.features = a.features;
    p.spec.context = a.context;
    let res = Resources {
        table: &p.res.table,
        lexicon: &p.res.lexicon,
        categories: &p.res.categories,
    };
    let outcome = run_experiment(&p.train, &p.test, &p.spec, &res)?;
    let mut report = EvalReport {
        provenance: p.provenance,
        rows: outcome.rows,
    };
    report
        .provenance
        .insert("model".into(), format!("{:?}", a.model).to_lowercase());
    report.provenance.insert(
        "features".into(),
        serde_json::to_value(a.features)?
            .as_str()
            .unwrap_or_default()
            .into(),
    );
    report
        .provenance
        .insert("context".into(), a.context.as_str().into());
    report.provenance.extend(outcome.notes);
    report.save(&a.report)?;
    print!("{}", report.render_table());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let report = EvalReport::load(&a.input)?;
    let stdout = std::io::stdout();
    match a.format {
        ReportFormat::Table => print!("{}", report.render_table()),
        ReportFormat::Lines => report.write_lines(stdout.lock())?,
    }
    Ok(())
}

fn threads_from_env() -> Result<usize> {
    match std::env::var("RQ_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("RQ_THREADS must be a positive integer, got `{v}`")),
        Err(_) => Ok(1),
    }
}

fn grid(a: GridArgs) -> Result<()> {
    let threads = threads_from_env()?;
    let p = prepare(&a.experiment, a.domain)?;
    let res = Resources {
        table: &p.res.table,
        lexicon: &p.res.lexicon,
        categories: &p.res.categories,
    };
    let mut report = run_grid(&p.train, &p.test, &p.spec, &res, threads)?;
    let cell_notes = std::mem::take(&mut report.provenance);
    report.provenance = p.provenance;
    report
        .provenance
        .insert("domain".into(), a.domain.as_str().into());
    report.provenance.extend(cell_notes);
    report.save(&a.out)?;
    print!("{}", report.render_table());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let corpus = generate(&SynthOptions {
        size: a.size,
        embedding_dim: a.dim,
        planted: a.planted,
        seed: a.seed,
        ..SynthOptions::default()
    })?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    corpus.dataset.save(&a.out.join("corpus.lines"))?;
    let (train, test) = split_dataset(&corpus.dataset, a.train_frac, a.seed)?;
    train.save(&a.out.join("train.lines"))?;
    test.save(&a.out.join("test.lines"))?;
    let dic = a.out.join("lexicon.dic");
    std::fs::write(&dic, &corpus.lexicon_text)
        .with_context(|| format!("writing {}", dic.display()))?;
    corpus
        .embeddings
        .save(&a.out.join("embeddings.txt"), EmbeddingFormat::Text)?;
    println!(
        "wrote {} records to {}",
        corpus.dataset.len(),
        a.out.display()
    );
    Ok(())
}
