//! Acceptance suite. Runs every criterion at its stated tolerance, prints
//! one line per criterion and exits non-zero if a mandatory one fails.
//!
//! Criterion 8 needs external data and is advisory; it runs only when the
//! `WETE_20NG_*` variables below are set.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wete::commands;
use wete::RunConfig;
use wete_core::corpus::{build_corpus, BuildOptions, Document};
use wete_core::grad::finite_diff_check;
use wete_core::metrics::{nmi, npmi_pair, purity, topic_diversity, topic_specificity, CooccurrenceStats};
use wete_core::model::{sample_theta, top_words, ParamId, WeibullParams};
use wete_core::train::{train, TrainConfig};
use wete_core::transport::{ct_cost_closed, ct_cost_naive, DocEmbedding, TopicMixture};
use wete_core::{InputTransform, Matrix, ModelConfig, TrainingMode, WeteModel};

enum Outcome {
    Pass(String),
    Fail(String),
    Skipped(String),
}

struct Criterion {
    id: u32,
    name: &'static str,
    advisory: bool,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

// 1. closed form vs explicit double sum
fn closed_form_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let k = rng.random_range(1..=4);
        let h = rng.random_range(1..=5);
        let doc = DocEmbedding::new(
            (0..n as u32).collect(),
            random_simplex(&mut rng, n),
            uniform_matrix(&mut rng, n, h, -2.0, 2.0),
        )
        .unwrap();
        let alpha = uniform_matrix(&mut rng, k, h, -2.0, 2.0);
        let mix = TopicMixture::new(random_simplex(&mut rng, k), &alpha).unwrap();
        let naive = ct_cost_naive(&doc, &mix).unwrap();
        let closed = ct_cost_closed(&doc, &mix).unwrap();
        worst = worst.max((closed - naive).abs() / naive);
    }
    check(worst < 1e-6, format!("max relative gap {worst:.3e} over 1000 instances"))
}

// 2. analytic gradients vs central differences
fn gradient_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let modes = [TrainingMode::Scratch, TrainingMode::Finetune, TrainingMode::Fixed];
    let mut worst = 0.0f64;
    let mut coords = 0usize;
    for m in 0..20 {
        let v = rng.random_range(5..=8);
        let cfg = ModelConfig {
            topics: rng.random_range(2..=3),
            embed_dim: rng.random_range(2..=4),
            hidden: 4,
            epsilon: 1.0,
            mode: modes[m % 3],
            input_transform: if m % 2 == 0 { InputTransform::Log1p } else { InputTransform::Identity },
            seed: m as u64,
        };
        let mut model = WeteModel::from_scratch(cfg.clone(), v).unwrap();
        for id in [ParamId::WordEmbeddings, ParamId::TopicEmbeddings] {
            for x in model.param_mut(id) {
                *x = rng.random_range(-1.0..1.0);
            }
        }
        let docs: Vec<Document> = (0..3)
            .map(|_| {
                let len = rng.random_range(1..=6);
                Document::from_word_ids((0..len).map(|_| rng.random_range(0..v as u32)).collect()).unwrap()
            })
            .collect();
        let batch: Vec<&Document> = docs.iter().collect();
        let noise = uniform_matrix(&mut rng, 3, cfg.topics, 0.01, 0.99);
        let report = finite_diff_check(&model, &batch, &noise, 1e-5).unwrap();
        worst = worst.max(report.max_rel_error());
        coords += model.trainable_params().iter().map(|&id| model.param(id).len()).sum::<usize>();
    }
    check(worst < 1e-4, format!("max relative error {worst:.3e} over {coords} coordinates in 20 models"))
}

// 3. Weibull sample means. The uniforms are stratified, one per cell of
// width 1/n: at k = 0.5 the variance is 20, so iid uniforms leave a
// standard error of 0.7% against the 1% gate.
fn weibull_moments() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut details = Vec::new();
    let mut ok = true;
    for (k, l) in [(0.5, 1.0), (1.0, 1.0), (2.0, 1.0), (2.0, 3.0)] {
        let p = WeibullParams { shape: vec![k], scale: vec![l] };
        let n = 100_000;
        let mean = (0..n)
            .map(|i| {
                let u = (i as f64 + rng.random::<f64>()) / n as f64;
                sample_theta(&p, &[u]).unwrap()[0]
            })
            .sum::<f64>()
            / n as f64;
        let want = l * libm::tgamma(1.0 + 1.0 / k);
        let rel = (mean - want).abs() / want;
        ok &= rel < 0.01;
        details.push(format!("({k},{l}) {:.2}%", rel * 100.0));
    }
    check(ok, format!("relative mean error {}", details.join(", ")))
}

fn simplex_gap(model: &WeteModel, docs: &[Document]) -> f64 {
    let phi = model.topic_word_dist();
    let mut gap = 0.0f64;
    for k in 0..phi.cols() {
        gap = gap.max((phi.column(k).iter().sum::<f64>() - 1.0).abs());
    }
    for d in docs {
        gap = gap.max((model.infer_theta(d).iter().sum::<f64>() - 1.0).abs());
    }
    gap
}

// 4. simplex conservation
fn simplex_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let lines = [
        "river bank water fish boat",
        "bank money loan credit bank",
        "water fish river stream",
        "credit money market stock",
        "boat stream water river fish",
        "loan market stock money",
    ];
    let corpus = build_corpus(&lines, &BuildOptions::default()).unwrap();
    let docs = corpus.documents().to_vec();
    let v = corpus.vocab().len();
    let mut worst = 0.0f64;
    for s in 0..50 {
        let cfg = ModelConfig { topics: 4, embed_dim: 6, hidden: 16, seed: s, ..ModelConfig::default() };
        let mut m = WeteModel::from_scratch(cfg, v).unwrap();
        let scale = rng.random_range(0.1..20.0);
        for id in ParamId::ALL {
            for x in m.param_mut(id) {
                *x = rng.random_range(-scale..scale);
            }
        }
        worst = worst.max(simplex_gap(&m, &docs));
    }
    let cfg = ModelConfig { topics: 3, embed_dim: 8, hidden: 16, mode: TrainingMode::Scratch, ..ModelConfig::default() };
    let mut m = WeteModel::from_scratch(cfg, v).unwrap();
    let mut epochs = 0;
    let tc = TrainConfig { epochs: 10, batch_size: 2, lr: 0.01, ..TrainConfig::default() };
    train(&corpus, &mut m, &tc, |_, model| {
        worst = worst.max(simplex_gap(model, &docs));
        epochs += 1;
    })
    .unwrap();
    check(
        worst < 1e-6 && epochs == 10,
        format!("max |sum - 1| = {worst:.3e} over 50 random models and {epochs} training epochs"),
    )
}

// 5. metric oracles from hand-computed instances
fn metric_oracles() -> Outcome {
    let mut failures = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > 1e-9 {
            failures.push(format!("{name}: {got} vs {want}"));
        }
    };
    // purity: A:(x,x,y), B:(y,y) -> 4/5; 60/40 single cluster -> 0.6
    expect("purity", purity(&[0, 0, 0, 1, 1], &['x', 'x', 'y', 'y', 'y']).unwrap(), 0.8);
    expect("purity 60/40", purity(&[0; 10], &[0, 0, 0, 0, 0, 0, 1, 1, 1, 1]).unwrap(), 0.6);
    // nmi: identical, independent, and the [[2,0],[1,1]] table
    expect("nmi identical", nmi(&[0, 0, 1, 1], &[5, 5, 9, 9]).unwrap(), 1.0);
    expect("nmi independent", nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.0);
    let h = |ps: &[f64]| -ps.iter().map(|p| p * p.ln()).sum::<f64>();
    let mi = 0.5 * (0.5f64 / 0.375).ln() + 0.25 * (0.25f64 / 0.375).ln() + 0.25 * (0.25f64 / 0.125).ln();
    expect("nmi table", nmi(&[0, 0, 1, 1], &[0, 0, 0, 1]).unwrap(), mi / ((h(&[0.5, 0.5]) + h(&[0.75, 0.25])) / 2.0));
    // npmi: perfectly dependent pair without smoothing; disjoint pair at D = 100
    let docs = |sets: Vec<Vec<u32>>| -> Vec<Document> { sets.into_iter().map(|s| Document::from_word_ids(s).unwrap()).collect() };
    let d = docs(vec![vec![0, 1], vec![2, 3]]);
    let s = CooccurrenceStats::from_documents(&d, &[0, 1, 2, 3]).with_smoothing(0.0);
    expect("npmi dependent", npmi_pair(&s, 0, 1).unwrap(), 1.0);
    let d = docs((0..100).map(|i| vec![if i < 20 { 0 } else if i < 50 { 1 } else { 2 }]).collect());
    let s = CooccurrenceStats::from_documents(&d, &[0, 1]);
    expect("npmi disjoint", npmi_pair(&s, 0, 1).unwrap(), (0.01f64 / 0.06).ln() / -(0.01f64).ln());
    // td
    let list = |a: u32| (a..a + 25).collect::<Vec<u32>>();
    expect("td disjoint", topic_diversity(&[list(0), list(25)]), 1.0);
    expect("td identical", topic_diversity(&[list(0), list(0)]), 0.5);
    let shared: Vec<u32> = (900..905).collect();
    let three: Vec<Vec<u32>> = (0..3u32).map(|i| shared.iter().copied().chain(i * 50..i * 50 + 20).collect()).collect();
    expect("td shared", topic_diversity(&three), 65.0 / 75.0);
    // ts
    let phi = Matrix::from_vec(2, 1, vec![0.75, 0.25]).unwrap();
    expect("ts", topic_specificity(&phi, &[0.5, 0.5]).unwrap(), 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln());
    let onehot = Matrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
    expect("ts point mass", topic_specificity(&onehot, &[0.5, 0.5]).unwrap(), 2f64.ln());
    check(failures.is_empty(), if failures.is_empty() { "15 oracle values matched".into() } else { failures.join("; ") })
}

/// 500 documents of 30 tokens, each drawn from one of two disjoint 20-word
/// vocabularies. Returns the lines and the generating side of each.
fn two_sided_corpus(seed: u64) -> (Vec<String>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut sides = Vec::new();
    for j in 0..500 {
        let side = j % 2;
        let tokens: Vec<String> = (0..30)
            .map(|_| format!("{}{}", if side == 0 { "left" } else { "right" }, rng.random_range(0..20)))
            .collect();
        lines.push(tokens.join(" "));
        sides.push(side);
    }
    (lines, sides)
}

// 6. synthetic recovery
fn synthetic_recovery() -> Outcome {
    let (lines, sides) = two_sided_corpus(6);
    let corpus = build_corpus(&lines, &BuildOptions::default()).unwrap();
    let vocab = corpus.vocab();
    let side_of = |id: u32| usize::from(vocab.term(id).starts_with("right"));
    let cfg = ModelConfig {
        topics: 2,
        embed_dim: 8,
        mode: TrainingMode::Scratch,
        seed: 6,
        ..ModelConfig::default()
    };
    let mut model = WeteModel::from_scratch(cfg, vocab.len()).unwrap();
    let tc = TrainConfig { epochs: 50, batch_size: 25, lr: 0.005, seed: 6, log_every: 1 };
    let report = train(&corpus, &mut model, &tc, |_, _| {}).unwrap();
    let losses: Vec<f64> = report.epochs.iter().map(|e| e.mean_loss).collect();
    let decreasing = losses[..5].windows(2).all(|w| w[1] < w[0]);

    let phi = model.topic_word_dist();
    let mut topic_side = [usize::MAX; 2];
    let mut pure = true;
    for k in 0..2 {
        let top = top_words(&phi, k, 10).unwrap();
        let s = side_of(top[0]);
        pure &= top.iter().all(|&w| side_of(w) == s);
        topic_side[k] = s;
    }
    let distinct = topic_side[0] != topic_side[1];
    let correct = corpus
        .documents()
        .iter()
        .zip(&sides)
        .filter(|(d, &side)| {
            let t = model.infer_theta(d);
            let k = if t[1] > t[0] { 1 } else { 0 };
            topic_side[k] == side
        })
        .count();
    let accuracy = correct as f64 / corpus.len() as f64;
    // Each side has 20 words, so two top-25 lists share at least 10 and TD
    // at 25 cannot exceed 0.8. The gate uses the top-10 lists checked above.
    let top10: Vec<Vec<u32>> = (0..2).map(|k| top_words(&phi, k, 10).unwrap()).collect();
    let td = topic_diversity(&top10);
    let top25: Vec<Vec<u32>> = (0..2).map(|k| top_words(&phi, k, 25).unwrap()).collect();
    let td25 = topic_diversity(&top25);
    let first5: Vec<String> = losses[..5].iter().map(|l| format!("{l:.4}")).collect();
    check(
        decreasing && pure && distinct && accuracy >= 0.95 && td == 1.0,
        format!(
            "first-5 losses [{}] decreasing={decreasing}; top-10 pure={pure}; sides distinct={distinct}; argmax accuracy {:.1}%; TD@10 {td} (TD@25 {td25}, bound 0.8)",
            first5.join(", "),
            accuracy * 100.0
        ),
    )
}

fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

// 7. per-step time is linear in batch tokens
fn linear_scaling() -> Outcome {
    let (v, k, h) = (2000usize, 100usize, 100usize);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = ModelConfig { topics: k, embed_dim: h, mode: TrainingMode::Scratch, seed: 7, ..ModelConfig::default() };
    let base: Vec<Document> = (0..100)
        .map(|_| Document::from_word_ids((0..100).map(|_| rng.random_range(0..v as u32)).collect()).unwrap())
        .collect();
    struct Scale {
        docs: Vec<Document>,
        noise: Matrix,
        model: WeteModel,
        opt: wete_core::adam::Adam,
        fastest: f64,
    }
    let mut scales: Vec<Scale> = (1..=8)
        .map(|mult| {
            let docs: Vec<Document> = base.iter().cycle().take(base.len() * mult).cloned().collect();
            Scale {
                noise: uniform_matrix(&mut rng, docs.len(), k, 0.0, 1.0),
                docs,
                model: WeteModel::from_scratch(cfg.clone(), v).unwrap(),
                opt: wete_core::adam::Adam::new(Default::default()),
                fastest: f64::INFINITY,
            }
        })
        .collect();
    // Round-robin over the sizes so a slow stretch on a shared machine
    // hits all of them alike; round 0 is a warm-up. Each size keeps its
    // fastest step.
    for round in 0..8 {
        for s in &mut scales {
            let batch: Vec<&Document> = s.docs.iter().collect();
            let t = Instant::now();
            let (_, g) = wete_core::grad::gradient(&s.model, &batch, &s.noise).unwrap();
            s.opt.step(&mut s.model, &g).unwrap();
            let took = t.elapsed().as_secs_f64();
            if round > 0 {
                s.fastest = s.fastest.min(took);
            }
        }
    }
    let tokens: Vec<f64> = scales.iter().map(|s| s.docs.iter().map(Document::len).sum::<usize>() as f64).collect();
    let secs: Vec<f64> = scales.iter().map(|s| s.fastest).collect();
    let r2 = r_squared(&tokens, &secs);
    let ms: Vec<String> = secs.iter().map(|s| format!("{:.0}", s * 1e3)).collect();
    check(r2 > 0.95, format!("R^2 = {r2:.4}; fastest step ms for 1x..8x: [{}]", ms.join(", ")))
}

fn env_path(key: &str) -> Option<PathBuf> {
    std::env::var_os(key).map(PathBuf::from)
}

// 8. 20 Newsgroups band (advisory, needs external data)
fn newsgroups_band() -> Outcome {
    let keys = ["WETE_20NG_TRAIN", "WETE_20NG_TEST", "WETE_20NG_TEST_LABELS", "WETE_20NG_EMBEDDINGS"];
    let paths: Vec<Option<PathBuf>> = keys.iter().map(|k| env_path(k)).collect();
    if paths.iter().any(Option::is_none) {
        return Outcome::Skipped(format!("set {} to run", keys.join(", ")));
    }
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.apply_overrides(&["mode=fixed", "topics=100", "embed_dim=100", "epsilon=1.0", "batch_size=200", "lr=0.001", "n_clusters=20"])
        .unwrap();
    cfg.corpus = paths[0].clone();
    cfg.test_corpus = paths[1].clone();
    cfg.test_labels = paths[2].clone();
    cfg.embeddings = paths[3].clone();
    cfg.output_dir = dir.path().to_path_buf();
    if let Some(p) = env_path("WETE_20NG_STOPWORDS") {
        cfg.stopwords = Some(p);
    }
    let result = commands::train(&cfg, &mut std::io::sink()).and_then(|_| commands::eval(&cfg));
    match result {
        Ok(r) => {
            let (p, n) = (r.km_purity.unwrap_or(f64::NAN), r.km_nmi.unwrap_or(f64::NAN));
            check(
                (p - 0.673).abs() <= 0.10 && (n - 0.350).abs() <= 0.10,
                format!("km-purity {:.1}%, km-NMI {:.1}%", p * 100.0, n * 100.0),
            )
        }
        Err(e) => Outcome::Fail(format!("run failed: {e}")),
    }
}

fn run_pipeline(dir: &Path, corpus: &Path, labels: &Path) -> (Vec<u8>, String) {
    let mut cfg = RunConfig::default();
    cfg.apply_overrides(&["mode=scratch", "topics=4", "embed_dim=8", "hidden=32", "epochs=5", "batch_size=16", "n_clusters=2", "seed=9"])
        .unwrap();
    cfg.corpus = Some(corpus.to_path_buf());
    cfg.labels = Some(labels.to_path_buf());
    cfg.output_dir = dir.to_path_buf();
    commands::train(&cfg, &mut std::io::sink()).unwrap();
    commands::eval(&cfg).unwrap();
    (
        std::fs::read(cfg.checkpoint_path()).unwrap(),
        std::fs::read_to_string(dir.join(commands::METRICS_TXT)).unwrap(),
    )
}

// 9. end-to-end determinism
fn determinism() -> Outcome {
    let data = tempfile::tempdir().unwrap();
    let (lines, sides) = two_sided_corpus(9);
    let corpus = data.path().join("corpus.txt");
    let labels = data.path().join("labels.txt");
    std::fs::write(&corpus, lines[..120].join("\n")).unwrap();
    let label_text: Vec<&str> = sides[..120].iter().map(|&s| if s == 0 { "left" } else { "right" }).collect();
    std::fs::write(&labels, label_text.join("\n")).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ck1, m1) = run_pipeline(a.path(), &corpus, &labels);
    let (ck2, m2) = run_pipeline(b.path(), &corpus, &labels);
    check(
        ck1 == ck2 && m1 == m2 && m1.contains("km_nmi="),
        format!("checkpoints {} bytes, identical={}; metric reports identical={}", ck1.len(), ck1 == ck2, m1 == m2),
    )
}

fn main() -> ExitCode {
    // libtest flags such as --nocapture are accepted and ignored
    let criteria = [
        Criterion { id: 1, name: "closed-form equivalence", advisory: false, budget: Some(Duration::from_secs(5)), run: closed_form_equivalence },
        Criterion { id: 2, name: "gradient correctness", advisory: false, budget: Some(Duration::from_secs(60)), run: gradient_correctness },
        Criterion { id: 3, name: "Weibull sampler moments", advisory: false, budget: Some(Duration::from_secs(5)), run: weibull_moments },
        Criterion { id: 4, name: "simplex conservation", advisory: false, budget: None, run: simplex_conservation },
        Criterion { id: 5, name: "metric oracles", advisory: false, budget: None, run: metric_oracles },
        Criterion { id: 6, name: "synthetic recovery", advisory: false, budget: Some(Duration::from_secs(120)), run: synthetic_recovery },
        Criterion { id: 7, name: "linear scaling", advisory: false, budget: None, run: linear_scaling },
        Criterion { id: 8, name: "20NG band (advisory)", advisory: true, budget: None, run: newsgroups_band },
        Criterion { id: 9, name: "end-to-end determinism", advisory: false, budget: None, run: determinism },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let over = c.budget.is_some_and(|b| took > b);
        let (status, detail) = match outcome {
            Outcome::Pass(d) if over => ("FAIL", format!("{d}; exceeded time budget")),
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => ("FAIL", d),
            Outcome::Skipped(d) => ("SKIPPED", d),
        };
        if status == "FAIL" && !c.advisory {
            failed += 1;
        }
        println!("criterion {} [{}] {status}: {detail} ({:.2}s)", c.id, c.name, took.as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} mandatory criteria failed");
        ExitCode::FAILURE
    } else {
        println!("all mandatory criteria passed");
        ExitCode::SUCCESS
    }
}
