use super::tree::{FeatureDraw, Grower};
use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn schema2() -> LabelSchema {
    LabelSchema::new("t", ["pos", "neg"]).unwrap()
}

fn labels(ls: &[&str]) -> Vec<String> {
    ls.iter().map(|s| s.to_string()).collect()
}

fn dense(rows: &[&[f64]]) -> Vec<SparseVector> {
    rows.iter().map(|r| SparseVector::from_dense(r)).collect()
}

// vocabulary: 0 = "bad", 1 = "good"
fn nb_toy() -> BaselineModel {
    let x = dense(&[&[0.0, 2.0], &[1.0, 0.0]]);
    train_mnb(&x, &labels(&["pos", "neg"]), &schema2(), 2, 1.0).unwrap()
}

#[test]
fn mnb_hand_posterior() {
    let m = nb_toy();
    let Params::Mnb(nb) = &m.params else { unreachable!() };
    // pos: good 2+1 of 2+2, bad 0+1 of 4; neg: good 0+1 of 1+2, bad 1+1 of 3
    let jll = nb.joint_log_likelihood(&SparseVector::from_dense(&[0.0, 1.0]));
    assert!((jll[0] - (0.5f64.ln() + 0.75f64.ln())).abs() < 1e-12);
    assert!((jll[1] - (0.5f64.ln() + (1.0f64 / 3.0).ln())).abs() < 1e-12);
    assert_eq!(predict_baseline(&m, &SparseVector::from_dense(&[0.0, 1.0]), None).unwrap(), "pos");
    // its own training documents
    assert_eq!(predict_baseline(&m, &SparseVector::from_dense(&[0.0, 2.0]), None).unwrap(), "pos");
    assert_eq!(predict_baseline(&m, &SparseVector::from_dense(&[1.0, 0.0]), None).unwrap(), "neg");
}

#[test]
fn mnb_rows_are_distributions() {
    let Params::Mnb(nb) = nb_toy().params else { unreachable!() };
    for row in &nb.feature_log_prob {
        let s: f64 = row.iter().map(|l| l.exp()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn mnb_single_class_always_predicts_it() {
    let s = LabelSchema::new("one", ["only"]).unwrap();
    let x = dense(&[&[1.0, 0.0], &[0.0, 3.0]]);
    let m = train_mnb(&x, &labels(&["only", "only"]), &s, 2, 1.0).unwrap();
    assert_eq!(predict_baseline(&m, &SparseVector::from_dense(&[5.0, 5.0]), None).unwrap(), "only");
}

#[test]
fn mnb_missing_class_errors() {
    let x = dense(&[&[1.0, 0.0]]);
    assert!(
        matches!(train_mnb(&x, &labels(&["pos"]), &schema2(), 2, 1.0), Err(BaselineError::MissingClass(c)) if c == "neg")
    );
}

#[test]
fn mnb_alpha_zero_unseen_token_is_finite() {
    let x = dense(&[&[0.0, 1.0], &[1.0, 0.0]]);
    let m = train_mnb(&x, &labels(&["pos", "neg"]), &schema2(), 2, 0.0).unwrap();
    let Params::Mnb(nb) = &m.params else { unreachable!() };
    let jll = nb.joint_log_likelihood(&SparseVector::from_dense(&[1.0, 1.0]));
    assert!(jll.iter().all(|v| v.is_finite()));
    assert_eq!(nb.feature_log_prob[0][0], LOG_PROB_FLOOR);
    // symmetric evidence: tie goes to schema order
    assert_eq!(predict_baseline(&m, &SparseVector::from_dense(&[1.0, 1.0]), None).unwrap(), "pos");
}

fn separable() -> (Vec<SparseVector>, Vec<String>) {
    (dense(&[&[1.0, 0.0], &[0.9, 0.1], &[0.0, 1.0], &[0.2, 0.8]]), labels(&["pos", "pos", "neg", "neg"]))
}

#[test]
fn logistic_separable_toy_fits_perfectly() {
    let (x, y) = separable();
    let hyper = LogisticHyper { lr: 0.5, epochs: 300, l2: 0.0, batch_size: 2, seed: 3 };
    let m = train_logistic(&x, &y, &schema2(), 2, &hyper).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        assert_eq!(predict_baseline(&m, xi, None).unwrap(), yi);
    }
}

#[test]
fn logistic_zero_epochs_is_uniform() {
    let (x, y) = separable();
    let hyper = LogisticHyper { epochs: 0, ..Default::default() };
    let m = train_logistic(&x, &y, &schema2(), 2, &hyper).unwrap();
    let Params::Lr(lr) = &m.params else { unreachable!() };
    assert_eq!(lr.probabilities(&x[0]), vec![0.5, 0.5]);
    assert_eq!(predict_baseline(&m, &x[2], None).unwrap(), "pos");
}

#[test]
fn logistic_full_batch_loss_is_non_increasing() {
    let (x, y) = separable();
    let hyper = LogisticHyper { lr: 0.2, epochs: 50, l2: 1e-3, batch_size: 4, seed: 0 };
    let m = train_logistic(&x, &y, &schema2(), 2, &hyper).unwrap();
    let Params::Lr(lr) = &m.params else { unreachable!() };
    assert_eq!(lr.loss_history.len(), 50);
    for w in lr.loss_history.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{w:?}");
    }
}

#[test]
fn logistic_diverging_lr_reports_non_finite_loss() {
    let x = dense(&[&[1e200, 0.0], &[0.0, 1e200]]);
    let hyper = LogisticHyper { lr: 1e200, epochs: 5, l2: 0.0, batch_size: 1, seed: 0 };
    let err = train_logistic(&x, &labels(&["pos", "neg"]), &schema2(), 2, &hyper).unwrap_err();
    assert!(matches!(err, BaselineError::NonFiniteLoss { .. }));
}

/// Central finite differences of the loss, independent of the analytic path.
fn numeric_gradient(m: &SoftmaxRegression, x: &[SparseVector], y: &[usize], l2: f64) -> Gradient {
    let h = 1e-6;
    let loss = |m: &SoftmaxRegression| m.loss_and_gradient(x, y, l2).0;
    let mut g =
        Gradient { weights: vec![vec![0.0; m.weights[0].len()]; m.weights.len()], bias: vec![0.0; m.bias.len()] };
    for c in 0..m.weights.len() {
        for j in 0..m.weights[c].len() {
            let (mut up, mut down) = (m.clone(), m.clone());
            up.weights[c][j] += h;
            down.weights[c][j] -= h;
            g.weights[c][j] = (loss(&up) - loss(&down)) / (2.0 * h);
        }
        let (mut up, mut down) = (m.clone(), m.clone());
        up.bias[c] += h;
        down.bias[c] -= h;
        g.bias[c] = (loss(&up) - loss(&down)) / (2.0 * h);
    }
    g
}

fn random_instance(
    seed: u64,
    classes: usize,
    dim: usize,
    n: usize,
) -> (SoftmaxRegression, Vec<SparseVector>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = SoftmaxRegression::zeros(classes, dim);
    m.weights.iter_mut().flatten().for_each(|w| *w = rng.random_range(-1.0..1.0));
    m.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
    let x = (0..n)
        .map(|_| {
            let mut pairs = Vec::new();
            for j in 0..dim {
                if rng.random_bool(0.6) {
                    pairs.push((j, rng.random_range(-2.0..2.0)));
                }
            }
            SparseVector::from_pairs(pairs)
        })
        .collect();
    let y = (0..n).map(|_| rng.random_range(0..classes)).collect();
    (m, x, y)
}

fn max_abs_diff(a: &Gradient, b: &Gradient) -> f64 {
    a.weights
        .iter()
        .flatten()
        .zip(b.weights.iter().flatten())
        .chain(a.bias.iter().zip(&b.bias))
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

#[test]
fn logistic_gradient_matches_finite_differences_five_features() {
    let (m, x, y) = random_instance(11, 3, 5, 8);
    let (_, analytic) = m.loss_and_gradient(&x, &y, 1e-4);
    let numeric = numeric_gradient(&m, &x, &y, 1e-4);
    assert!(max_abs_diff(&analytic, &numeric) < 1e-5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn logistic_gradient_randomized(seed in any::<u64>(), classes in 2usize..5, dim in 1usize..7, n in 1usize..10) {
        let (m, x, y) = random_instance(seed, classes, dim, n);
        let (_, analytic) = m.loss_and_gradient(&x, &y, 1e-3);
        let numeric = numeric_gradient(&m, &x, &y, 1e-3);
        let scale = analytic.weights.iter().flatten().chain(&analytic.bias).map(|v| v.abs()).fold(1.0, f64::max);
        prop_assert!(max_abs_diff(&analytic, &numeric) / scale < 1e-5);
    }
}

#[test]
fn tree_pure_input_is_single_leaf() {
    let x = dense(&[&[1.0], &[2.0], &[3.0]]);
    let m = train_decision_tree(&x, &labels(&["neg", "neg", "neg"]), &schema2(), 1, &TreeHyper::default()).unwrap();
    let Params::Dt(t) = &m.params else { unreachable!() };
    assert_eq!(t.nodes.len(), 1);
    assert!(x.iter().all(|xi| predict_baseline(&m, xi, None).unwrap() == "neg"));
}

#[test]
fn tree_xor_needs_depth_two() {
    let x = dense(&[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0]]);
    let y = labels(&["pos", "pos", "neg", "neg"]);
    let m = train_decision_tree(&x, &y, &schema2(), 2, &TreeHyper { max_depth: 2, min_leaf: 1 }).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        assert_eq!(predict_baseline(&m, xi, None).unwrap(), yi);
    }
    let Params::Dt(t) = &m.params else { unreachable!() };
    assert_eq!(t.depth(), 2);
}

#[test]
fn tree_depth_zero_is_majority_stump() {
    let x = dense(&[&[0.0], &[1.0], &[2.0]]);
    let m = train_decision_tree(
        &x,
        &labels(&["neg", "pos", "neg"]),
        &schema2(),
        1,
        &TreeHyper { max_depth: 0, min_leaf: 1 },
    )
    .unwrap();
    assert!(x.iter().all(|xi| predict_baseline(&m, xi, None).unwrap() == "neg"));
    // exact tie goes to schema order
    let m =
        train_decision_tree(&x[..2], &labels(&["neg", "pos"]), &schema2(), 1, &TreeHyper { max_depth: 0, min_leaf: 1 })
            .unwrap();
    assert_eq!(predict_baseline(&m, &x[0], None).unwrap(), "pos");
}

/// Brute force over every feature and every midpoint between distinct values.
fn oracle_best_gain(x: &[Vec<f64>], y: &[usize], n_classes: usize, min_leaf: usize) -> Option<(usize, f64, f64)> {
    let h = |idx: &[usize]| {
        let mut c = vec![0usize; n_classes];
        idx.iter().for_each(|&i| c[y[i]] += 1);
        tree::entropy(&c)
    };
    let all: Vec<usize> = (0..x.len()).collect();
    let parent = h(&all);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[i][f] <= t);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let n = x.len() as f64;
            let g = parent - l.len() as f64 / n * h(&l) - r.len() as f64 / n * h(&r);
            if best.is_none_or(|b| g > b.2 + 1e-12) {
                best = Some((f, t, g));
            }
        }
    }
    best
}

fn eval_oracle(nodes: &[Node], at: usize, x: &[f64]) -> usize {
    match &nodes[at] {
        Node::Leaf { class, .. } => *class,
        Node::Split { feature, threshold, left, right } => {
            if x[*feature] <= *threshold {
                eval_oracle(nodes, *left, x)
            } else {
                eval_oracle(nodes, *right, x)
            }
        }
    }
}

fn small_dense_set() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (1usize..4, 2usize..9).prop_flat_map(|(dim, n)| {
        (
            prop::collection::vec(prop::collection::vec(prop::sample::select(vec![0.0, 0.5, 1.0, -1.0, 2.0]), dim), n),
            prop::collection::vec(0usize..3, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn root_split_matches_exhaustive_oracle((x, y) in small_dense_set(), min_leaf in 1usize..3) {
        let sparse: Vec<SparseVector> = x.iter().map(|r| SparseVector::from_dense(r)).collect();
        let mut totals = vec![0usize; 3];
        y.iter().for_each(|&c| totals[c] += 1);
        let hyper = TreeHyper { max_depth: 4, min_leaf };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut g = Grower { x: &sparse, y: &y, n_classes: 3, hyper: &hyper, draw: FeatureDraw::All, rng: &mut rng };
        let samples: Vec<usize> = (0..x.len()).collect();
        let got = g.best_split(&samples, &totals);
        let want = oracle_best_gain(&x, &y, 3, min_leaf);
        match (got, want) {
            (None, None) => {}
            (Some(c), Some((f, t, gain))) => {
                prop_assert!((c.gain - gain).abs() < 1e-12);
                prop_assert_eq!(c.feature, f);
                prop_assert!((c.threshold - t).abs() < 1e-12);
            }
            other => prop_assert!(false, "mismatch {:?}", other),
        }
    }

    #[test]
    fn tree_and_forest_match_eval_oracle((x, y) in small_dense_set(), depth in 0usize..4, seed in any::<u64>()) {
        let schema = LabelSchema::new("t", ["a", "b", "c"]).unwrap();
        let dim = x[0].len();
        let sparse: Vec<SparseVector> = x.iter().map(|r| SparseVector::from_dense(r)).collect();
        let ys: Vec<String> = y.iter().map(|&c| schema.label(c).to_string()).collect();
        let dt = train_decision_tree(&sparse, &ys, &schema, dim, &TreeHyper { max_depth: depth, min_leaf: 1 }).unwrap();
        let Params::Dt(tree) = &dt.params else { unreachable!() };
        prop_assert!(tree.nodes.len() <= 20);
        prop_assert!(tree.depth() <= depth);
        let hyper = ForestHyper { n_trees: 5, max_depth: depth, seed, ..Default::default() };
        let rf = train_random_forest(&sparse, &ys, &schema, dim, &hyper).unwrap();
        let Params::Rf(forest) = &rf.params else { unreachable!() };
        for (xd, xs) in x.iter().zip(&sparse) {
            prop_assert_eq!(predict_baseline(&dt, xs, None).unwrap(), schema.label(eval_oracle(&tree.nodes, 0, xd)));
            let mut votes = [0usize; 3];
            forest.trees.iter().for_each(|t| votes[eval_oracle(&t.nodes, 0, xd)] += 1);
            let max = *votes.iter().max().unwrap();
            let want = votes.iter().position(|&v| v == max).unwrap();
            prop_assert_eq!(predict_baseline(&rf, xs, None).unwrap(), schema.label(want));
        }
    }
}

#[test]
fn forest_of_one_unsampled_tree_equals_decision_tree() {
    let x = dense(&[&[0.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[0.5, 0.2]]);
    let y = labels(&["pos", "pos", "neg", "neg", "pos"]);
    let dt = train_decision_tree(&x, &y, &schema2(), 2, &TreeHyper::default()).unwrap();
    let hyper = ForestHyper { n_trees: 1, bootstrap: false, max_features: FeatureSubsample::All, ..Default::default() };
    let rf = train_random_forest(&x, &y, &schema2(), 2, &hyper).unwrap();
    let (Params::Dt(t), Params::Rf(f)) = (&dt.params, &rf.params) else { unreachable!() };
    assert_eq!(&f.trees[0], t);
}

#[test]
fn forest_is_seed_deterministic_and_fits_pure_input() {
    let (x, y) = separable();
    let hyper = ForestHyper { n_trees: 7, seed: 9, ..Default::default() };
    let a = train_random_forest(&x, &y, &schema2(), 2, &hyper).unwrap();
    let b = train_random_forest(&x, &y, &schema2(), 2, &hyper).unwrap();
    assert_eq!(a, b);
    let pure = train_random_forest(&x, &labels(&["neg"; 4]), &schema2(), 2, &hyper).unwrap();
    assert!(x.iter().all(|xi| predict_baseline(&pure, xi, None).unwrap() == "neg"));
    assert!(matches!(
        train_random_forest(&x, &y, &schema2(), 2, &ForestHyper { n_trees: 0, ..Default::default() }),
        Err(BaselineError::InvalidHyper(_))
    ));
}

#[test]
fn knn_cases() {
    let one = train_knn(&dense(&[&[1.0, 0.0]]), &labels(&["neg"]), &schema2(), 2, 1).unwrap();
    assert_eq!(predict_baseline(&one, &SparseVector::from_dense(&[0.0, 1.0]), None).unwrap(), "neg");

    let x = dense(&[&[1.0, 0.0], &[0.9, 0.1], &[0.8, 0.3], &[0.0, 1.0]]);
    let m = train_knn(&x, &labels(&["pos", "pos", "neg", "neg"]), &schema2(), 2, 3).unwrap();
    // three nearest to (1, 0): pos, pos, neg
    assert_eq!(predict_baseline(&m, &SparseVector::from_dense(&[1.0, 0.0]), None).unwrap(), "pos");
    // k override: 1-NN on its own training points is exact
    for (xi, yi) in x.iter().zip(["pos", "pos", "neg", "neg"]) {
        assert_eq!(predict_baseline(&m, xi, Some(1)).unwrap(), yi);
    }
    // 2-NN split vote goes to the closer neighbour's class
    assert_eq!(predict_baseline(&m, &SparseVector::from_dense(&[0.7, 0.3]), Some(2)).unwrap(), "neg");
}

#[test]
fn dimension_mismatch_is_an_error() {
    let m = nb_toy();
    let err = predict_baseline(&m, &SparseVector::from_pairs([(5, 1.0)]), None).unwrap_err();
    assert!(matches!(err, BaselineError::DimensionMismatch { expected: 2, got: 5 }));
}

/// Two-class data where each class prefers its own half of the vocabulary.
fn informative(seed: u64, n: usize, dim: usize) -> (Vec<SparseVector>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let c = if i % 3 == 0 { 1 } else { 0 };
        let pairs = (0..4).map(|_| {
            let own = rng.random_bool(0.75);
            let half = if own == (c == 0) { 0 } else { dim / 2 };
            (half + rng.random_range(0..dim / 2), 1.0)
        });
        x.push(SparseVector::from_pairs(pairs.collect::<Vec<_>>()));
        y.push(if c == 0 { "pos" } else { "neg" }.to_string());
    }
    (x, y)
}

#[test]
fn training_accuracy_at_least_majority_rate() {
    for seed in 0..16 {
        let (x, y) = informative(seed, 60, 12);
        let majority = y.iter().filter(|l| *l == "pos").count().max(y.iter().filter(|l| *l == "neg").count()) as f64
            / y.len() as f64;
        let tfidf: Vec<SparseVector> = x
            .iter()
            .map(|v| {
                let n = v.norm();
                SparseVector::from_pairs(v.entries().iter().map(|&(j, w)| (j, w / n)))
            })
            .collect();
        let specs = [
            (BaselineSpec::Mnb { alpha: 1.0 }, &x),
            (BaselineSpec::Lr(LogisticHyper { epochs: 60, ..Default::default() }), &tfidf),
            (BaselineSpec::Dt(TreeHyper::default()), &tfidf),
            (BaselineSpec::Rf(ForestHyper { n_trees: 15, seed, ..Default::default() }), &tfidf),
            (BaselineSpec::Knn { k: 1 }, &tfidf),
        ];
        for (spec, xs) in specs {
            let m = train(&spec, xs, &y, &schema2(), 12).unwrap();
            let correct = xs.iter().zip(&y).filter(|(xi, yi)| predict_baseline(&m, xi, None).unwrap() == *yi).count();
            let acc = correct as f64 / y.len() as f64;
            assert!(acc >= majority, "{:?} seed {seed}: {acc} < {majority}", spec.kind());
            // prediction is a pure function
            assert_eq!(predict_baseline(&m, &xs[0], None).unwrap(), predict_baseline(&m, &xs[0], None).unwrap());
        }
    }
}

#[test]
fn knn_one_is_perfect_on_distinct_training_points() {
    let x = dense(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[1.0, 1.0, 0.0]]);
    let y = labels(&["pos", "neg", "neg", "pos"]);
    let m = train_knn(&x, &y, &schema2(), 3, 1).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        assert_eq!(predict_baseline(&m, xi, None).unwrap(), yi);
    }
}

#[test]
fn spec_parses_from_toml_with_defaults() {
    #[derive(serde::Deserialize)]
    struct W {
        baselines: Vec<BaselineSpec>,
    }
    let w: W = toml::from_str("[[baselines]]\nkind = \"rf\"\nn_trees = 3\n[[baselines]]\nkind = \"mnb\"\n").unwrap();
    assert_eq!(w.baselines[0], BaselineSpec::Rf(ForestHyper { n_trees: 3, ..Default::default() }));
    assert_eq!(w.baselines[1], BaselineSpec::Mnb { alpha: 1.0 });
    assert!(toml::from_str::<W>("[[baselines]]\nkind = \"lr\"\nbogus = 1\n").is_err());
}

#[test]
fn pipeline_save_load_round_trip() {
    use crate::corpus::{Dataset, LabeledExample, Provenance, Split};
    let ds = Dataset::new(
        schema2(),
        Split::Train,
        vec![
            LabeledExample::new("1", "great lovely day", "pos"),
            LabeledExample::new("2", "awful terrible day", "neg"),
            LabeledExample::new("3", "lovely great food", "pos"),
            LabeledExample::new("4", "terrible awful food", "neg"),
        ],
        Provenance::default(),
    )
    .unwrap();
    for kind in [BaselineKind::Mnb, BaselineKind::Lr, BaselineKind::Dt, BaselineKind::Rf, BaselineKind::Knn] {
        let p = BaselinePipeline::fit(&ds, &BaselineSpec::default_for(kind), &VectorizerConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        p.save(&path).unwrap();
        let q = BaselinePipeline::load(&path).unwrap();
        assert_eq!(p, q);
        assert_eq!(q.predict_text("what a lovely day").unwrap(), p.predict_text("what a lovely day").unwrap());
    }
}
