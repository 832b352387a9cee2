//! Cross-module checks through the public API only.

use proptest::prelude::*;
use wete_core::adam::{Adam, AdamConfig};
use wete_core::corpus::build_corpus;
use wete_core::grad::gradient;
use wete_core::model::objective;
use wete_core::train::{train, TrainConfig};
use wete_core::transport::{ct_cost_closed, ct_cost_naive, DocEmbedding, TopicMixture};
use wete_core::{BuildOptions, Corpus, Matrix, ModelConfig, TrainingMode, WeteModel};

const LINES: [&str; 8] = [
    "river bank water fish boat stream",
    "bank money loan credit bank market",
    "water fish river stream boat",
    "credit money market stock loan",
    "boat stream water river fish",
    "loan market stock money credit",
    "fish water boat river",
    "stock credit money bank loan",
];

fn toy() -> (Corpus, WeteModel) {
    let corpus = build_corpus(&LINES, &BuildOptions::default()).unwrap();
    let cfg = ModelConfig { topics: 3, embed_dim: 6, hidden: 16, mode: TrainingMode::Scratch, seed: 11, ..ModelConfig::default() };
    let model = WeteModel::from_scratch(cfg, corpus.vocab().len()).unwrap();
    (corpus, model)
}

fn half_noise(rows: usize, k: usize) -> Matrix {
    Matrix::from_vec(rows, k, vec![0.5; rows * k]).unwrap()
}

#[test]
fn gradient_reports_the_objective() {
    let (corpus, model) = toy();
    let batch: Vec<_> = corpus.documents().iter().collect();
    let noise = half_noise(batch.len(), 3);
    let direct = objective(&batch, &model, &noise).unwrap();
    let (value, _) = gradient(&model, &batch, &noise).unwrap();
    assert!((direct.loss - value.loss).abs() <= 1e-12 * direct.loss.abs());
    assert!((direct.ct - value.ct).abs() <= 1e-12 * direct.ct.abs().max(1.0));
}

#[test]
fn small_adam_steps_descend() {
    let (corpus, mut model) = toy();
    let batch: Vec<_> = corpus.documents().iter().collect();
    let noise = half_noise(batch.len(), 3);
    let before = objective(&batch, &model, &noise).unwrap().loss;
    let mut opt = Adam::new(AdamConfig { lr: 1e-4, ..AdamConfig::default() });
    for _ in 0..5 {
        let (_, g) = gradient(&model, &batch, &noise).unwrap();
        opt.step(&mut model, &g).unwrap();
    }
    assert_eq!(opt.steps(), 5);
    assert!(objective(&batch, &model, &noise).unwrap().loss < before);
}

#[test]
fn training_lowers_the_fixed_noise_objective() {
    let (corpus, mut model) = toy();
    let batch: Vec<_> = corpus.documents().iter().collect();
    let noise = half_noise(batch.len(), 3);
    let before = objective(&batch, &model, &noise).unwrap().loss;
    let cfg = TrainConfig { epochs: 30, batch_size: 4, lr: 0.01, seed: 3, log_every: 1 };
    let report = train(&corpus, &mut model, &cfg, |_, _| {}).unwrap();
    assert_eq!(report.epochs.len(), 30);
    assert_eq!(report.steps, 60);
    assert!(objective(&batch, &model, &noise).unwrap().loss < before);
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Matrix, Vec<f64>, Matrix)> {
    (1usize..=6, 1usize..=4, 1usize..=5).prop_flat_map(|(n, k, h)| {
        (
            prop::collection::vec(0.05f64..1.0, n),
            prop::collection::vec(-2.0f64..2.0, n * h),
            prop::collection::vec(0.05f64..1.0, k),
            prop::collection::vec(-2.0f64..2.0, k * h),
        )
            .prop_map(move |(w, x, t, a)| {
                let ws: f64 = w.iter().sum();
                let ts: f64 = t.iter().sum();
                (
                    w.iter().map(|v| v / ws).collect(),
                    Matrix::from_vec(n, h, x).unwrap(),
                    t.iter().map(|v| v / ts).collect(),
                    Matrix::from_vec(k, h, a).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn closed_form_matches_double_sum((weights, vectors, theta, alpha) in instance()) {
        let ids = (0..weights.len() as u32).collect();
        let doc = DocEmbedding::new(ids, weights, vectors).unwrap();
        let mix = TopicMixture::new(theta, &alpha).unwrap();
        let naive = ct_cost_naive(&doc, &mix).unwrap();
        let closed = ct_cost_closed(&doc, &mix).unwrap();
        prop_assert!((closed - naive).abs() / naive < 1e-9);
    }

    #[test]
    fn trained_outputs_stay_on_the_simplex(seed in 0u64..1000, epochs in 1usize..4) {
        let (corpus, mut model) = toy();
        let cfg = TrainConfig { epochs, batch_size: 3, lr: 0.05, seed, log_every: 1 };
        train(&corpus, &mut model, &cfg, |_, _| {}).unwrap();
        let phi = model.topic_word_dist();
        for k in 0..phi.cols() {
            prop_assert!((phi.column(k).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for d in corpus.documents() {
            let t = model.infer_theta(d);
            prop_assert!(t.iter().all(|&x| x > 0.0));
            prop_assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
