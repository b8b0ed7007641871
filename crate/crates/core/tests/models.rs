use patclass_core::corpus::{filter_admitted, split, PoolKind};
use patclass_core::dataset::prepare;
use patclass_core::ensemble::{combine, PredictionRanking};
use patclass_core::graph::Graph;
use patclass_core::layers;
use patclass_core::model::{Architecture, ClassifierModel, ModelConfig};
use patclass_core::params::ParamStore;
use patclass_core::seed;
use patclass_core::synth::{generate_synthetic, SyntheticCorpusSpec};
use patclass_core::tensor::Tensor;
use patclass_core::textprep::FeatureSpec;

fn small(arch: Architecture) -> ModelConfig {
    ModelConfig {
        embedding_dim: 16,
        conv_filters: 8,
        kernel_size: 3,
        dense_units: 32,
        hidden_size: 8,
        batch_size: 16,
        seed: 11,
        ..ModelConfig::new(arch, PoolKind::AllSections, FeatureSpec::FirstX(12))
    }
}

fn separable(num_docs: usize, num_labels: usize) -> patclass_core::dataset::PreparedData {
    let docs = filter_admitted(
        &generate_synthetic(&SyntheticCorpusSpec {
            num_docs,
            num_labels,
            filler_vocab: 30,
            p_signal: 1.0,
            min_words: 3,
            max_words: 8,
            seed: 5,
        })
        .unwrap(),
    );
    let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
    prepare(&docs, &split(&ids, 5).unwrap(), PoolKind::AllSections, FeatureSpec::FirstX(12), 1).unwrap()
}

#[test]
fn untrained_models_are_near_uniform() {
    let data = separable(120, 8);
    for arch in Architecture::ALL {
        let m = ClassifierModel::build(small(arch), data.vocab.clone(), data.labels.clone(), None).unwrap();
        let seqs: Vec<_> = data.test.iter().map(|s| s.sequence.clone()).collect();
        for p in m.predict_proba(&seqs).unwrap() {
            let (lo, hi) = p.iter().fold((f32::MAX, 0.0f32), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            assert!(hi / lo < 5.0, "{arch}: max/min = {}", hi / lo);
        }
    }
}

#[test]
fn first_epoch_mean_loss_does_not_exceed_first_batch_loss() {
    // enough batches that the first epoch actually moves the parameters
    let data = separable(800, 4);
    for arch in Architecture::ALL {
        let mut config = small(arch);
        config.epochs = 1;
        config.optimizer.learning_rate = 0.01;
        let mut m = ClassifierModel::build(config, data.vocab.clone(), data.labels.clone(), None).unwrap();
        let h = m.train(&data.train, &data.validation).unwrap().clone();
        let first = h.first_batch_loss.unwrap();
        assert!(h.epochs[0].train_loss <= first, "{arch}: epoch 1 {} > batch 0 {first}", h.epochs[0].train_loss);
    }
}

#[test]
fn uniform_prediction_costs_ln_num_labels() {
    for n in [2usize, 7, 659] {
        let store = ParamStore::<f64>::new();
        let mut g = Graph::new(&store);
        let p = g.constant(Tensor::filled(&[3, n], 1.0 / n as f64));
        let mut t = vec![0.0; 3 * n];
        for (row, c) in [0, n / 2, n - 1].into_iter().enumerate() {
            t[row * n + c] = 1.0;
        }
        let t = g.constant(Tensor::new(&[3, n], t).unwrap());
        let l = g.cross_entropy(p, t).unwrap();
        assert!((g.value(l).item().unwrap() - (n as f64).ln()).abs() < 1e-5);
    }
}

#[test]
fn activations_stay_finite_on_large_inputs() {
    let store = ParamStore::<f32>::new();
    let mut g = Graph::new(&store);
    let x = g.constant(layers::uniform(&mut seed::rng(3), &[4, 9], 50.0));
    let outs = [g.sigmoid(x), g.tanh(x), g.softmax(x, 1).unwrap()];
    for o in outs {
        assert!(g.value(o).data().iter().all(|v| v.is_finite()));
    }
    let p = g.softmax(x, 1).unwrap();
    let t = g.constant(Tensor::new(&[4, 9], (0..36).map(|i| if i % 10 == 0 { 1.0 } else { 0.0 }).collect()).unwrap());
    let l = g.cross_entropy(p, t).unwrap();
    assert!(g.value(l).item().unwrap().is_finite());
}

#[test]
fn confident_member_wins_against_uniform_members() {
    for n in 2..12usize {
        for c in 0..n {
            let mut one = vec![0.0f32; n];
            one[c] = 1.0;
            let uniform = vec![1.0 / n as f32; n];
            let out = combine(&one, &uniform, &uniform).unwrap();
            assert_eq!(PredictionRanking::from_probabilities("d", &out).top(), c);
        }
    }
}

#[test]
fn positive_scaling_keeps_the_ranking() {
    let (p, q, r) = ([0.2f32, 0.5, 0.3], [0.6f32, 0.1, 0.3], [0.1f32, 0.2, 0.7]);
    let base = PredictionRanking::from_probabilities("d", &combine(&p, &q, &r).unwrap());
    let s = |v: [f32; 3]| v.map(|x| x * 0.25);
    let scaled = PredictionRanking::from_probabilities("d", &combine(&s(p), &s(q), &s(r)).unwrap());
    assert_eq!(base.order, scaled.order);
}
