//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rq_core::corpus::{split_dataset, RqSegments};
use rq_core::embeddings::{read_binary, EmbeddingTable};
use rq_core::eval::{
    f1_from, instances_from_dataset, prf1, round2, run_experiment, ExperimentSpec, FeatureSet,
    ModelKind, Resources,
};
use rq_core::lexicon::domain_categories;
use rq_core::neural::{backward, forward, init_params, loss, NetworkConfig, NetworkParams};
use rq_core::rq_extract::{context_view, extract_rqs, ContextMode, ExtractOptions, RqInstance};
use rq_core::svm::{self, Example, FeatureLayout, GridSpec, SvmParams};
use rq_core::synth::{generate, SynthOptions};
use rq_core::text::segment_sentences;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    ensure(t < limit, format!("took {t:.1?}, limit {limit:?}"))?;
    Ok(t)
}

// 1. Every parameter tensor matches central differences.
fn gradient_check() -> Outcome {
    let start = Instant::now();
    let config = NetworkConfig {
        max_len: 6,
        embed_dim: 4,
        conv_filters: 3,
        conv_kernel: 3,
        pool_width: 2,
        lstm_hidden: 5,
        dense_widths: vec![4, 3],
        dropout_rate: 0.2,
        aux_dim: 3,
        aux_hidden: 4,
        learning_rate: 1e-3,
        epochs: 1,
        batch_size: 1,
        seed: 7,
    };
    let mut params = init_params(&config).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for t in params.tensors_mut() {
        for x in &mut t.data {
            *x += rng.gen_range(-0.1..0.1);
        }
    }
    let matrix: Vec<f64> = (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let aux: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let eps = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (label, dseed) in [(1u8, 3u64), (0, 4)] {
        let f = |p: &NetworkParams| {
            loss(
                forward(p, &matrix, &aux, true, dseed).unwrap().probability,
                label,
            )
        };
        let cache = forward(&params, &matrix, &aux, true, dseed).map_err(|e| e.to_string())?;
        let grad = backward(&params, &cache, label);
        let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
        for (ti, name) in names.iter().enumerate() {
            for i in 0..grad.tensors()[ti].1.data.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[ti].data[i] += eps;
                let mut minus = params.clone();
                minus.tensors_mut()[ti].data[i] -= eps;
                let numeric = (f(&plus) - f(&minus)) / (2.0 * eps);
                let exact = grad.tensors()[ti].1.data[i];
                let rel = (numeric - exact).abs() / numeric.abs().max(exact.abs()).max(1e-6);
                ensure(
                    rel <= 1e-3,
                    format!("{name}[{i}] analytic {exact:e} numeric {numeric:e}"),
                )?;
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!(
        "{checked} entries, max relative error {worst:.2e}, {t:.1?}"
    ))
}

// 2. Pegasos oracles.
fn svm_oracles() -> Outcome {
    let mut data = Vec::new();
    for _ in 0..20 {
        data.push(Example::new(vec![0.0, 1.0], 1));
        data.push(Example::new(vec![0.0, -1.0], -1));
    }
    let layout = FeatureLayout::dense(2);
    let p = |lambda, epochs| SvmParams {
        lambda,
        epochs,
        seed: 1,
    };
    let model = svm::train(&data, &layout, p(0.01, 50)).map_err(|e| e.to_string())?;
    let errors = data
        .iter()
        .filter(|e| model.predict(&e.features).unwrap().0 != e.label)
        .count();
    ensure(
        errors == 0,
        format!("{errors} training errors after 50 epochs"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let blobs: Vec<Example> = (0..40)
        .map(|i| {
            let y: i8 = if i % 2 == 0 { 1 } else { -1 };
            let c = f64::from(y);
            Example::new(
                vec![c + rng.gen_range(-1.0..1.0), -c + rng.gen_range(-1.0..1.0)],
                y,
            )
        })
        .collect();
    let heavy = svm::train(&blobs, &layout, p(1e6, 20)).map_err(|e| e.to_string())?;
    let norm = heavy.weight_norm();
    ensure(norm <= 1e-2, format!("lambda=1e6 gives |w| = {norm:e}"))?;
    Ok(format!("0 training errors; |w| = {norm:.1e} at lambda=1e6"))
}

// 3. Synthetic end to end with a planted category.
fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let corpus = generate(&SynthOptions {
        seed: 11,
        ..SynthOptions::default()
    })
    .map_err(|e| e.to_string())?;
    ensure(corpus.dataset.len() == 400, "corpus size")?;
    let (train, test) = split_dataset(&corpus.dataset, 0.8, 11).map_err(|e| e.to_string())?;
    let train = instances_from_dataset(&train).map_err(|e| e.to_string())?;
    let test = instances_from_dataset(&test).map_err(|e| e.to_string())?;

    let all = domain_categories(rq_core::corpus::Domain::Twitter);
    let without: Vec<String> = all.iter().filter(|c| *c != "Certainty").cloned().collect();
    let spec = |model| ExperimentSpec {
        domain: rq_core::corpus::Domain::Twitter,
        model,
        features: FeatureSet::W2vLiwc,
        context: ContextMode::Rq,
        seed: 11,
        grid: GridSpec::default(),
        lstm: NetworkConfig {
            max_len: 30,
            conv_filters: 8,
            lstm_hidden: 8,
            dense_widths: vec![16],
            dropout_rate: 0.1,
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 16,
            ..NetworkConfig::default()
        },
        validation_fraction: 0.1,
    };
    let run = |model, cats: &[String]| -> Result<Vec<f64>, String> {
        let res = Resources {
            table: &corpus.embeddings,
            lexicon: &corpus.lexicon,
            categories: cats,
        };
        let out = run_experiment(&train, &test, &spec(model), &res).map_err(|e| e.to_string())?;
        Ok(out.rows.iter().map(|r| r.f1).collect())
    };
    let svm_full = run(ModelKind::Svm, &all)?;
    let lstm_full = run(ModelKind::Lstm, &all)?;
    let svm_ablated = run(ModelKind::Svm, &without)?;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join("/")
    };
    let summary = format!(
        "SVM {} LSTM {} SVM-without-planted {}",
        fmt(&svm_full),
        fmt(&lstm_full),
        fmt(&svm_ablated)
    );
    ensure(
        svm_full.iter().all(|&f| f >= 0.95),
        format!("SVM below 0.95: {summary}"),
    )?;
    ensure(
        lstm_full.iter().all(|&f| f >= 0.95),
        format!("LSTM below 0.95: {summary}"),
    )?;
    ensure(
        svm_ablated.iter().all(|&f| f < 0.75),
        format!("ablated SVM not below 0.75: {summary}"),
    )?;
    let t = within(Duration::from_secs(300), start)?;
    Ok(format!("{summary}, {t:.1?}"))
}

// 4. Extraction of the published examples.
fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

const FORUM_EXAMPLES: [(&str, &str); 8] = [
    (
        "Then why do you call a politician who ran such measures liberal",
        "OH yes, it's because you're a\n republican and you're not conservative at all.",
    ),
    (
        "Can you read?",
        "You're the type that just waits to say\nyour next piece and never attempts to listen to others.",
    ),
    ("Pray tell, where would I find the atheist church?  ", "Ridiculous."),
    (
        "You lost this debate Skeptic, why drag it back\n up again?",
        "There are plenty of other subjects\n that we could debate instead.",
    ),
    ("Do you even read what anyone posts?", "Try it, you\nmight learn something.......maybe not......."),
    (
        "If they haven't been discovered yet,\n    HOW THE BLOODY HELL DO YOU KNOW?",
        "Ten percent more brains and you'd be pondlife.",
    ),
    (
        "How is that related to deterrence? ",
        "Once again,\n    deterrence is preventing through the fear of consequences.",
    ),
    (
        "Well, you didn't have my experiences, now did you? ",
        " Each woman who has an abortion could have\n    innumerous circumstances and experiences.",
    ),
];

const TWEET_EXAMPLES: [(&str, &str); 4] = [
    (
        "When something goes wrong, what's the easiest thing to do?",
        "Blame the victim!\n      Obviously they had it coming #sarcasm #itsajoke #dontlynchme",
    ),
    (
        "You know what's the best?",
        "Unreliable friends. They're so much un. #sarcasm #whatever.",
    ),
    (
        "And what, Socrates, is the food of the soul? ",
        "Surely,\n I said, knowledge is the food of the soul. Plato",
    ),
    (
        "Craft ladies, salon owners, party planners?",
        "You need to state your #business [link]",
    ),
];

fn rq_heuristic() -> Outcome {
    let mut failures = Vec::new();
    let mut passed = 0;
    let no_filter = ExtractOptions {
        apply_length_filter: false,
        ..ExtractOptions::forums()
    };
    let cases = FORUM_EXAMPLES
        .iter()
        .enumerate()
        .map(|(i, c)| (format!("forum example {}", i + 1), c, no_filter))
        .chain(TWEET_EXAMPLES.iter().enumerate().map(|(i, c)| {
            (
                format!("tweet example {}", i + 1),
                c,
                ExtractOptions::twitter(),
            )
        }));
    for (name, (bold, italic), opts) in cases {
        let text = format!("{bold} {italic}");
        let found = extract_rqs(&segment_sentences(&text), &name, opts);
        let verdict = match found.as_slice() {
            [one] => {
                let seg = one.segments();
                if collapse(&seg.question) != collapse(bold) {
                    Err(format!("question `{}`", seg.question))
                } else if !collapse(&seg.self_answer).contains(&collapse(italic)) {
                    Err(format!("self_answer `{}`", seg.self_answer))
                } else {
                    Ok(())
                }
            }
            other => Err(format!("{} instances", other.len())),
        };
        match verdict {
            Ok(()) => passed += 1,
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    let control = "I read the whole thread before posting. It was long. Did anyone else read it?";
    let n = extract_rqs(
        &segment_sentences(control),
        "control",
        ExtractOptions::forums(),
    )
    .len()
        + extract_rqs(&segment_sentences(control), "control", no_filter).len();
    if n == 0 {
        passed += 1;
    } else {
        failures.push(format!("control post: {n} instances"));
    }
    if failures.is_empty() {
        Ok(format!("{passed}/13 sub-checks"))
    } else {
        Err(format!("{passed}/13 sub-checks; {}", failures.join("; ")))
    }
}

// 5. Context views compose.
fn context_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let words = [
        "we", "they", "never", "always", "so", "really", "what", "ok", "lol", "x1", ":)", "#tag",
    ];
    let sentence = |rng: &mut ChaCha8Rng, end: &str| -> String {
        let n = rng.gen_range(1..7);
        let w: Vec<&str> = (0..n)
            .map(|_| words[rng.gen_range(0..words.len())])
            .collect();
        format!("{}{end}", w.join(" "))
    };
    let para = |rng: &mut ChaCha8Rng, n: usize, q: bool| -> String {
        (0..n)
            .map(|_| {
                let end = if q && rng.gen_bool(0.5) {
                    "?"
                } else {
                    [".", "!", "..."][rng.gen_range(0..3)]
                };
                sentence(rng, end)
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    for case in 0..1000 {
        let n_pre = rng.gen_range(0..4);
        let n_ans = rng.gen_range(1..4);
        let n_post = rng.gen_range(0..4);
        let seg = RqSegments {
            pre: para(&mut rng, n_pre, true),
            question: sentence(&mut rng, "?"),
            self_answer: para(&mut rng, n_ans, false),
            post: para(&mut rng, n_post, true),
        };
        let inst = RqInstance::from_segments("p", &seg).map_err(|e| format!("case {case}: {e}"))?;
        let full = context_view(&inst, ContextMode::Full);
        let pre = rq_core::text::tokenize(&seg.pre);
        let post = rq_core::text::tokenize(&seg.post);
        let a = [context_view(&inst, ContextMode::PreRq), post].concat();
        let b = [pre, context_view(&inst, ContextMode::RqPost)].concat();
        ensure(
            a == full,
            format!("case {case}: PreRQ + post differs from Full"),
        )?;
        ensure(
            b == full,
            format!("case {case}: pre + RQPost differs from Full"),
        )?;
    }
    Ok("1000 random instances".into())
}

// 6. Metric arithmetic against published rows.
/// `(P, R, F1)` for the sarcastic then other class of each row.
const PUBLISHED_FORUMS: [[f64; 6]; 10] = [
    [0.74, 0.70, 0.72, 0.71, 0.75, 0.73],
    [0.78, 0.74, 0.76, 0.75, 0.79, 0.77],
    [0.76, 0.72, 0.74, 0.73, 0.78, 0.76],
    [0.75, 0.76, 0.75, 0.76, 0.74, 0.75],
    [0.75, 0.77, 0.76, 0.76, 0.74, 0.75],
    [0.76, 0.62, 0.68, 0.68, 0.80, 0.74],
    [0.76, 0.68, 0.72, 0.71, 0.79, 0.75],
    [0.81, 0.60, 0.69, 0.68, 0.86, 0.76],
    [0.74, 0.76, 0.75, 0.76, 0.74, 0.75],
    [0.76, 0.67, 0.71, 0.70, 0.78, 0.74],
];

const PUBLISHED_TWITTER: [[f64; 6]; 10] = [
    [0.77, 0.85, 0.80, 0.83, 0.74, 0.78],
    [0.80, 0.86, 0.83, 0.85, 0.79, 0.82],
    [0.80, 0.87, 0.83, 0.86, 0.78, 0.82],
    [0.79, 0.87, 0.83, 0.86, 0.77, 0.81],
    [0.80, 0.86, 0.83, 0.85, 0.79, 0.82],
    [0.76, 0.70, 0.73, 0.72, 0.78, 0.75],
    [0.80, 0.82, 0.81, 0.82, 0.79, 0.80],
    [0.78, 0.84, 0.81, 0.83, 0.76, 0.80],
    [0.83, 0.81, 0.82, 0.82, 0.84, 0.83],
    [0.80, 0.83, 0.82, 0.83, 0.79, 0.81],
];

fn published_cells() -> Vec<(String, f64, f64, f64)> {
    let mut cells = Vec::new();
    for (domain, rows) in [
        ("forums", &PUBLISHED_FORUMS),
        ("twitter", &PUBLISHED_TWITTER),
    ] {
        for (i, r) in rows.iter().enumerate() {
            cells.push((
                format!("{domain} row {} sarcastic", i + 1),
                r[0],
                r[1],
                r[2],
            ));
            cells.push((format!("{domain} row {} other", i + 1), r[3], r[4], r[5]));
        }
    }
    cells
}

fn metric_arithmetic() -> Outcome {
    // prf1 itself on counts realizing P=3/4, R=3/4.
    let pred = [1, 1, 1, 1, 0, 0, 0, 0];
    let gold = [1, 1, 1, 0, 1, 0, 0, 0];
    let p = prf1(&pred, &gold, &1).map_err(|e| e.to_string())?;
    ensure((p.f1 - 0.75).abs() < 1e-12, "prf1 arithmetic")?;
    for (pp, rr, f) in [(0.74, 0.79, 0.76), (0.77, 0.72, 0.74)] {
        let got = round2(f1_from(pp, rr));
        ensure(
            got == f,
            format!("{pp}/{rr} rounds to {got}, published {f}"),
        )?;
    }
    let mut bad = Vec::new();
    for (name, pp, rr, f) in published_cells() {
        let got = f1_from(pp, rr);
        if (got - f).abs() > 0.005 {
            bad.push(format!("{name}: {got:.4} vs {f:.2}"));
        }
    }
    if bad.is_empty() {
        Ok("both rounded F1 values and all 40 published cells within 0.005".into())
    } else {
        Err(format!(
            "{}/40 published cells outside 0.005: {}",
            bad.len(),
            bad.join("; ")
        ))
    }
}

// The published cells are consistent once P and R are read as 2-dp roundings.
fn rounding_interval_consistency() -> Outcome {
    let mut bad = Vec::new();
    for (name, pp, rr, f) in published_cells() {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in [pp - 0.005, pp + 0.005] {
            for b in [rr - 0.005, rr + 0.005] {
                let v = f1_from(a, b);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if hi < f - 0.005 || lo > f + 0.005 {
            bad.push(name);
        }
    }
    ensure(bad.is_empty(), format!("inconsistent: {}", bad.join(", ")))?;
    Ok("all 40 cells consistent with rounded P/R".into())
}

// 7. word2vec formats.
fn format_fidelity() -> Outcome {
    let mut table = EmbeddingTable::new(3).map_err(|e| e.to_string())?;
    let specials = [
        f32::MIN_POSITIVE,
        -0.0,
        1.0e-38,
        3.402_823_5e38,
        0.1,
        -7.25,
        1.0 / 3.0,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..50 {
        let v: Vec<f32> = (0..3)
            .map(|k| {
                if i < 2 {
                    specials[(i * 3 + k) % specials.len()]
                } else {
                    rng.gen_range(-10.0..10.0)
                }
            })
            .collect();
        table
            .insert(&format!("w{i}"), &v)
            .map_err(|e| e.to_string())?;
    }
    let mut buf = Vec::new();
    table.write_binary(&mut buf).map_err(|e| e.to_string())?;
    let back = read_binary(buf.as_slice()).map_err(|e| e.to_string())?;
    for (w, v) in table.iter() {
        let got = back.get(w).ok_or(format!("missing `{w}`"))?;
        let same = v.iter().zip(got).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, format!("`{w}` differs after round trip"))?;
    }

    let mut reference = b"2 3\n".to_vec();
    for (word, v) in [
        ("cat", [1.0f32, -2.5, 0.125]),
        ("dog", [0.0, 3.0e-3, -1.0e6]),
    ] {
        reference.extend_from_slice(word.as_bytes());
        reference.push(b' ');
        for x in v {
            reference.extend_from_slice(&x.to_le_bytes());
        }
        reference.push(b'\n');
    }
    let parsed = read_binary(reference.as_slice()).map_err(|e| e.to_string())?;
    ensure(parsed.len() == 2 && parsed.dim() == 3, "reference shape")?;
    ensure(
        parsed.get("cat") == Some(&[1.0, -2.5, 0.125][..]),
        "cat vector",
    )?;
    ensure(
        parsed.get("dog") == Some(&[0.0, 3.0e-3, -1.0e6][..]),
        "dog vector",
    )?;
    Ok("50-row bit-exact round trip; reference `2 3` file parsed".into())
}

// 8. Two grid runs give identical reports.
fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_rq");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let run = |args: &[&str], threads: &str| -> Result<(), String> {
        let out = Command::new(bin)
            .args(args)
            .current_dir(d)
            .env("RQ_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(
            out.status.success(),
            format!(
                "`rq {}` failed: {}",
                args.join(" "),
                String::from_utf8_lossy(&out.stderr)
            ),
        )
    };
    run(
        &["synth", "--out", "data", "--seed", "4", "--size", "200"],
        "1",
    )?;
    std::fs::write(
        d.join("lstm.toml"),
        "max_len = 30\nconv_filters = 6\nlstm_hidden = 6\ndense_widths = [8]\nepochs = 4\nbatch_size = 16\n",
    )
    .map_err(|e| e.to_string())?;
    let grid = |out: &str, threads: &str| {
        run(
            &[
                "grid",
                "--domain",
                "twitter",
                "--train",
                "data/train.lines",
                "--test",
                "data/test.lines",
                "--embeddings",
                "data/embeddings.txt",
                "--lexicon",
                "data/lexicon.dic",
                "--categories",
                "twitter",
                "--lstm-config",
                "lstm.toml",
                "--seed",
                "8",
                "--out",
                out,
            ],
            threads,
        )
    };
    grid("a.lines", "1")?;
    grid("b.lines", "1")?;
    grid("c.lines", "4")?;
    let read = |p: &str| std::fs::read(d.join(p)).map_err(|e| e.to_string());
    let (a, b, c) = (read("a.lines")?, read("b.lines")?, read("c.lines")?);
    ensure(a == b, "two single-threaded runs differ")?;
    ensure(a == c, "RQ_THREADS=4 run differs")?;
    let lines = a.iter().filter(|&&x| x == b'\n').count();
    ensure(lines == 21, format!("report has {lines} lines"))?;
    Ok(format!("{} bytes identical across 3 runs", a.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 gradient check", gradient_check),
        ("2 svm oracles", svm_oracles),
        ("3 synthetic end-to-end", synthetic_end_to_end),
        ("4 rq heuristic", rq_heuristic),
        ("5 context algebra", context_algebra),
        ("6 metric arithmetic", metric_arithmetic),
        (
            "6b rounding-interval consistency",
            rounding_interval_consistency,
        ),
        ("7 format fidelity", format_fidelity),
        ("8 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| (*s).to_owned()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(msg) => println!("PASS criterion {name}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {name}: {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
