//! Downstream task probes over node features.
//!
//! Both probes train tiny two-layer perceptrons with hand-written
//! gradients, full-batch updates, and seeded initialization, so a fixed
//! seed reproduces every weight of every epoch. The `PropagatedMlp` model
//! multiplies the features by the row-normalized adjacency twice before
//! training, a propagation-only stand-in for message-passing encoders;
//! comparisons between feature sets stay meaningful, absolute parity with
//! trained graph networks is not a goal.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{CsrMatrix, TextAttributedGraph};

/// Which feature pipeline the classifier trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskModel {
    /// Features as given.
    Mlp,
    /// Features premultiplied by the squared normalized adjacency.
    PropagatedMlp,
}

/// Node-classification hyperparameters.
#[derive(Debug, Clone)]
pub struct ClassifierConfig {
    pub model: TaskModel,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub dropout: f64,
    /// Share of the non-test labeled nodes held out for validation.
    pub val_fraction: f64,
    /// One training run per seed.
    pub seeds: Vec<u64>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            model: TaskModel::PropagatedMlp,
            hidden: 64,
            epochs: 1000,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            patience: 100,
            dropout: 0.5,
            val_fraction: 0.2,
            seeds: vec![0, 1, 2],
        }
    }
}

/// Per-seed results with sample mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub per_run: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn check_features(x: &Array2<f64>, n: usize) -> Result<()> {
    if x.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} feature rows"),
            got: format!("{}", x.nrows()),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "task features".into(),
        });
    }
    Ok(())
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

#[derive(Clone)]
struct Mlp {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

impl Mlp {
    fn init(rng: &mut ChaCha8Rng, d_in: usize, hidden: usize, d_out: usize) -> Mlp {
        Mlp {
            w1: glorot(rng, d_in, hidden),
            b1: Array1::zeros(hidden),
            w2: glorot(rng, hidden, d_out),
            b2: Array1::zeros(d_out),
        }
    }

    /// Pre-activation and ReLU output of the hidden layer.
    fn hidden(&self, x: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let pre = x.dot(&self.w1) + &self.b1;
        let h = pre.mapv(|v| v.max(0.0));
        (pre, h)
    }

    fn output(&self, h: &Array2<f64>) -> Array2<f64> {
        h.dot(&self.w2) + &self.b2
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.output(&self.hidden(x).1)
    }
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.rows_mut() {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    p
}

fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    let mut best_v = row[0];
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

fn gather_rows(x: &Array2<f64>, ids: &[u32]) -> Array2<f64> {
    let mut out = Array2::zeros((ids.len(), x.ncols()));
    for (i, &id) in ids.iter().enumerate() {
        out.row_mut(i).assign(&x.row(id as usize));
    }
    out
}

fn dropout_mask(rng: &mut ChaCha8Rng, rows: usize, cols: usize, p: f64) -> Array2<f64> {
    let keep = 1.0 - p;
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
        .collect();
    Array2::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

fn accuracy(model: &Mlp, x: &Array2<f64>, ids: &[u32], y: &[usize]) -> f64 {
    if ids.is_empty() {
        return 0.0;
    }
    let logits = model.forward(&gather_rows(x, ids));
    let correct = logits
        .rows()
        .into_iter()
        .zip(y)
        .filter(|(row, &label)| argmax(row.view()) == label)
        .count();
    correct as f64 / ids.len() as f64
}

/// Train a classifier per seed and report accuracy on `test_ids`.
///
/// Labels come from the graph; the non-test labeled nodes are shuffled per
/// seed into train and validation parts, training stops early when
/// validation accuracy has not improved for `patience` epochs, and the
/// best-validation weights are the ones evaluated. A class with no
/// training example is an error.
pub fn train_node_classifier(
    features: &Array2<f64>,
    graph: &TextAttributedGraph,
    test_ids: &[u32],
    config: &ClassifierConfig,
) -> Result<RunStats> {
    let n = graph.node_count();
    check_features(features, n)?;
    if config.hidden == 0 || config.epochs == 0 || config.learning_rate <= 0.0 {
        return Err(Error::InvalidConfig(
            "hidden width, epochs, and learning rate must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&config.dropout) || !(0.0..1.0).contains(&config.val_fraction) {
        return Err(Error::InvalidConfig(
            "dropout and validation fraction must lie in [0, 1)".into(),
        ));
    }
    if config.seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    if test_ids.is_empty() {
        return Err(Error::InvalidConfig("test set is empty".into()));
    }

    // global class list over every labeled node, so label indices are
    // stable across runs
    let mut class_set: BTreeSet<String> = BTreeSet::new();
    for v in 0..n as u32 {
        if let Some(label) = graph.label(v)? {
            class_set.insert(label.to_owned());
        }
    }
    let classes: Vec<String> = class_set.into_iter().collect();
    let mut label_idx: Vec<Option<usize>> = vec![None; n];
    for v in 0..n as u32 {
        if let Some(label) = graph.label(v)? {
            label_idx[v as usize] = classes.iter().position(|c| c == label);
        }
    }
    if classes.len() < 2 {
        return Err(Error::InvalidConfig(
            "node classification needs at least two labeled classes".into(),
        ));
    }

    let test_set: BTreeSet<u32> = test_ids.iter().copied().collect();
    let mut test_labels = Vec::with_capacity(test_set.len());
    let test_vec: Vec<u32> = test_set.iter().copied().collect();
    for &v in &test_vec {
        if v as usize >= n {
            return Err(Error::InvalidNodeId { id: v, count: n });
        }
        match label_idx[v as usize] {
            Some(idx) => test_labels.push(idx),
            None => {
                return Err(Error::InvalidConfig(format!(
                    "test node {v} has no label"
                )))
            }
        }
    }

    let pool: Vec<u32> = (0..n as u32)
        .filter(|v| label_idx[*v as usize].is_some() && !test_set.contains(v))
        .collect();
    if pool.is_empty() {
        return Err(Error::InvalidConfig(
            "no labeled nodes left to train on".into(),
        ));
    }

    let x = match config.model {
        TaskModel::Mlp => features.clone(),
        TaskModel::PropagatedMlp => {
            let adj = graph.normalized_adjacency();
            adj.mul_dense(&adj.mul_dense(features))
        }
    };
    let d = x.ncols();
    let c = classes.len();

    let mut per_run = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = pool.clone();
        shuffled.shuffle(&mut rng);
        let n_val = ((config.val_fraction * shuffled.len() as f64).ceil() as usize)
            .min(shuffled.len().saturating_sub(1));
        let (val_ids, train_ids) = shuffled.split_at(n_val);
        let train_y: Vec<usize> = train_ids
            .iter()
            .map(|&v| label_idx[v as usize].expect("pool nodes are labeled"))
            .collect();
        let val_y: Vec<usize> = val_ids
            .iter()
            .map(|&v| label_idx[v as usize].expect("pool nodes are labeled"))
            .collect();
        for (idx, class) in classes.iter().enumerate() {
            if !train_y.contains(&idx) {
                return Err(Error::EmptyClass {
                    label: class.clone(),
                });
            }
        }

        let xt = gather_rows(&x, train_ids);
        let b = train_ids.len() as f64;
        let mut onehot = Array2::<f64>::zeros((train_ids.len(), c));
        for (i, &y) in train_y.iter().enumerate() {
            onehot[[i, y]] = 1.0;
        }

        let mut model = Mlp::init(&mut rng, d, config.hidden, c);
        let mut best = model.clone();
        let mut best_val = f64::NEG_INFINITY;
        let mut best_epoch = 0usize;
        for epoch in 0..config.epochs {
            let (pre, h) = model.hidden(&xt);
            let mask = (config.dropout > 0.0)
                .then(|| dropout_mask(&mut rng, h.nrows(), h.ncols(), config.dropout));
            let hd = match &mask {
                Some(m) => &h * m,
                None => h.clone(),
            };
            let probs = softmax_rows(&(hd.dot(&model.w2) + &model.b2));
            let g = (&probs - &onehot) / b;
            let dw2 = hd.t().dot(&g) + config.weight_decay * &model.w2;
            let db2 = g.sum_axis(Axis(0));
            let mut dh = g.dot(&model.w2.t());
            if let Some(m) = &mask {
                dh = dh * m;
            }
            let dpre = dh * pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            let dw1 = xt.t().dot(&dpre) + config.weight_decay * &model.w1;
            let db1 = dpre.sum_axis(Axis(0));
            model.w2.scaled_add(-config.learning_rate, &dw2);
            model.b2.scaled_add(-config.learning_rate, &db2);
            model.w1.scaled_add(-config.learning_rate, &dw1);
            model.b1.scaled_add(-config.learning_rate, &db1);

            if !val_ids.is_empty() {
                let acc = accuracy(&model, &x, val_ids, &val_y);
                // ties keep the most-trained weights; patience counts from
                // the last strict improvement
                if acc > best_val {
                    best_val = acc;
                    best_epoch = epoch;
                }
                if acc >= best_val {
                    best = model.clone();
                }
                if epoch - best_epoch >= config.patience {
                    break;
                }
            } else {
                best = model.clone();
            }
        }
        per_run.push(accuracy(&best, &x, &test_vec, &test_labels));
    }
    let (mean, std) = mean_std(&per_run);
    Ok(RunStats { per_run, mean, std })
}

/// Link-prediction hyperparameters.
#[derive(Debug, Clone)]
pub struct LinkPredictionConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    /// Size of the fixed evaluation negative set (clipped to the number of
    /// distinct non-edges).
    pub eval_negatives: usize,
    /// The k in Hits@k.
    pub hits_k: usize,
    /// Seed for sampling the evaluation negatives, shared by all runs.
    pub negative_seed: u64,
    pub seeds: Vec<u64>,
}

impl Default for LinkPredictionConfig {
    fn default() -> Self {
        LinkPredictionConfig {
            hidden: 256,
            epochs: 200,
            learning_rate: 0.001,
            dropout: 0.0,
            patience: 50,
            eval_negatives: 10_000,
            hits_k: 100,
            negative_seed: 0,
            seeds: vec![0, 1, 2],
        }
    }
}

/// Hits@k per run plus the saturation flag for small test sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPredictionResult {
    pub per_run: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Test edges per run; under 200 the metric saturates easily.
    pub test_edges: usize,
    pub saturated: bool,
}

/// Fraction of positive scores strictly above the k-th highest negative.
pub fn hits_at(k: usize, positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("hits k must be >= 1".into()));
    }
    if negatives.len() < k {
        return Err(Error::TooFewNegatives {
            available: negatives.len(),
            needed: k,
        });
    }
    if positives.is_empty() {
        return Err(Error::InvalidConfig("no positive scores to rank".into()));
    }
    let mut sorted = negatives.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = sorted[k - 1];
    Ok(positives.iter().filter(|&&s| s > threshold).count() as f64 / positives.len() as f64)
}

fn canonical(u: u32, v: u32) -> (u32, u32) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Distinct non-edges: all of them when few exist, otherwise a seeded
/// sample, returned in ascending pair order either way.
fn sample_nonedges(
    n: usize,
    edges: &BTreeSet<(u32, u32)>,
    want: usize,
    seed: u64,
) -> Vec<(u32, u32)> {
    let possible = n as u128 * (n as u128 - 1) / 2 - edges.len() as u128;
    if possible <= want as u128 {
        let mut all = Vec::new();
        for i in 0..n as u32 {
            for j in (i + 1)..n as u32 {
                if !edges.contains(&(i, j)) {
                    all.push((i, j));
                }
            }
        }
        return all;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: BTreeSet<(u32, u32)> = BTreeSet::new();
    while picked.len() < want {
        let u = rng.gen_range(0..n as u32);
        let v = rng.gen_range(0..n as u32);
        if u == v {
            continue;
        }
        let pair = canonical(u, v);
        if !edges.contains(&pair) {
            picked.insert(pair);
        }
    }
    picked.into_iter().collect()
}

fn normalized_adjacency_from(n: usize, edges: &[(u32, u32)]) -> CsrMatrix {
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(a, b) in edges {
        neighbors[a as usize].push(b);
        neighbors[b as usize].push(a);
    }
    let rows = neighbors
        .into_iter()
        .map(|mut ns| {
            ns.sort_unstable();
            let w = if ns.is_empty() { 0.0 } else { 1.0 / ns.len() as f64 };
            ns.into_iter().map(|c| (c, w)).collect()
        })
        .collect();
    CsrMatrix::from_sorted_rows(n, rows)
}

fn edge_scores(z: &Array2<f64>, pairs: &[(u32, u32)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(u, v)| z.row(u as usize).dot(&z.row(v as usize)))
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Split the edges 70/10/20 per seed, train a dot-product link predictor
/// on a propagated-feature encoder, and report Hits@k against one fixed
/// seeded negative set.
///
/// Message-passing for training uses the training edges only, so
/// validation and test edges never leak into the propagation.
pub fn link_prediction_eval(
    features: &Array2<f64>,
    graph: &TextAttributedGraph,
    config: &LinkPredictionConfig,
) -> Result<LinkPredictionResult> {
    let n = graph.node_count();
    check_features(features, n)?;
    if config.hidden == 0 || config.epochs == 0 || config.learning_rate <= 0.0 {
        return Err(Error::InvalidConfig(
            "hidden width, epochs, and learning rate must be positive".into(),
        ));
    }
    if !(0.0..1.0).contains(&config.dropout) {
        return Err(Error::InvalidConfig("dropout must lie in [0, 1)".into()));
    }
    if config.seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let edges: Vec<(u32, u32)> = graph.edges().to_vec();
    let m = edges.len();
    if m < 10 {
        return Err(Error::InvalidConfig(format!(
            "link prediction needs at least 10 edges, got {m}"
        )));
    }
    let edge_set: BTreeSet<(u32, u32)> = edges.iter().copied().collect();

    let eval_negs = sample_nonedges(n, &edge_set, config.eval_negatives, config.negative_seed);
    if eval_negs.len() < config.hits_k {
        return Err(Error::TooFewNegatives {
            available: eval_negs.len(),
            needed: config.hits_k,
        });
    }

    let n_train = ((0.7 * m as f64).floor() as usize).max(1);
    let n_val = ((0.1 * m as f64).floor() as usize).max(1);
    let n_test = m - n_train - n_val;
    if n_test == 0 {
        return Err(Error::InvalidConfig(
            "edge split leaves no test edges".into(),
        ));
    }

    let d = features.ncols();
    let mut per_run = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        let train: Vec<(u32, u32)> = order[..n_train].iter().map(|&i| edges[i]).collect();
        let val: Vec<(u32, u32)> = order[n_train..n_train + n_val].iter().map(|&i| edges[i]).collect();
        let test: Vec<(u32, u32)> = order[n_train + n_val..].iter().map(|&i| edges[i]).collect();

        let adj = normalized_adjacency_from(n, &train);
        let h0 = adj.mul_dense(&adj.mul_dense(features));

        let mut model = Mlp::init(&mut rng, d, config.hidden, config.hidden);
        let mut best = model.clone();
        let mut best_val = f64::NEG_INFINITY;
        let mut best_epoch = 0usize;
        for epoch in 0..config.epochs {
            // fresh uniform negatives every epoch, checked against the
            // full edge set
            let mut neg = Vec::with_capacity(train.len());
            while neg.len() < train.len() {
                let u = rng.gen_range(0..n as u32);
                let v = rng.gen_range(0..n as u32);
                if u == v || edge_set.contains(&canonical(u, v)) {
                    continue;
                }
                neg.push((u, v));
            }

            let (pre, h) = model.hidden(&h0);
            let mask = (config.dropout > 0.0)
                .then(|| dropout_mask(&mut rng, h.nrows(), h.ncols(), config.dropout));
            let hd = match &mask {
                Some(m) => &h * m,
                None => h.clone(),
            };
            let z = hd.dot(&model.w2) + &model.b2;

            let mut dz = Array2::<f64>::zeros(z.raw_dim());
            let p_inv = 1.0 / train.len() as f64;
            for &(u, v) in &train {
                let (u, v) = (u as usize, v as usize);
                let s = z.row(u).dot(&z.row(v));
                let g = -sigmoid(-s) * p_inv;
                let zu = z.row(u).to_owned();
                let zv = z.row(v).to_owned();
                dz.row_mut(u).scaled_add(g, &zv);
                dz.row_mut(v).scaled_add(g, &zu);
            }
            let q_inv = 1.0 / neg.len() as f64;
            for &(u, v) in &neg {
                let (u, v) = (u as usize, v as usize);
                let s = z.row(u).dot(&z.row(v));
                let g = sigmoid(s) * q_inv;
                let zu = z.row(u).to_owned();
                let zv = z.row(v).to_owned();
                dz.row_mut(u).scaled_add(g, &zv);
                dz.row_mut(v).scaled_add(g, &zu);
            }

            let dw2 = hd.t().dot(&dz);
            let db2 = dz.sum_axis(Axis(0));
            let mut dh = dz.dot(&model.w2.t());
            if let Some(m) = &mask {
                dh = dh * m;
            }
            let dpre = dh * pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            let dw1 = h0.t().dot(&dpre);
            let db1 = dpre.sum_axis(Axis(0));
            model.w2.scaled_add(-config.learning_rate, &dw2);
            model.b2.scaled_add(-config.learning_rate, &db2);
            model.w1.scaled_add(-config.learning_rate, &dw1);
            model.b1.scaled_add(-config.learning_rate, &db1);

            let z_eval = model.forward(&h0);
            let val_hits = hits_at(
                config.hits_k,
                &edge_scores(&z_eval, &val),
                &edge_scores(&z_eval, &eval_negs),
            )?;
            // ties keep the most-trained weights; patience counts from the
            // last strict improvement
            if val_hits > best_val {
                best_val = val_hits;
                best_epoch = epoch;
            }
            if val_hits >= best_val {
                best = model.clone();
            }
            if epoch - best_epoch >= config.patience {
                break;
            }
        }

        let z = best.forward(&h0);
        per_run.push(hits_at(
            config.hits_k,
            &edge_scores(&z, &test),
            &edge_scores(&z, &eval_negs),
        )?);
    }
    let (mean, std) = mean_std(&per_run);
    Ok(LinkPredictionResult {
        per_run,
        mean,
        std,
        test_edges: n_test,
        saturated: n_test < 200,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{block_features, planted_partition};
    use crate::graph::TextAttributedGraph;

    fn nc_config(model: TaskModel) -> ClassifierConfig {
        ClassifierConfig {
            model,
            hidden: 16,
            epochs: 300,
            patience: 60,
            seeds: vec![0, 1, 2],
            ..ClassifierConfig::default()
        }
    }

    #[test]
    fn separable_blocks_classify_almost_perfectly() {
        let g = planted_partition(2, 15, 0.5, 0.05, 7).unwrap();
        let x = block_features(&g, 8, 0.5, 3).unwrap();
        let test_ids: Vec<u32> = (0..30).step_by(3).collect();
        let stats = train_node_classifier(&x, &g, &test_ids, &nc_config(TaskModel::Mlp)).unwrap();
        assert!(stats.mean >= 0.95, "mean accuracy {}", stats.mean);
        let prop =
            train_node_classifier(&x, &g, &test_ids, &nc_config(TaskModel::PropagatedMlp)).unwrap();
        assert!(prop.mean >= 0.95, "propagated accuracy {}", prop.mean);
    }

    #[test]
    fn shuffled_labels_fall_to_chance() {
        let g = planted_partition(2, 15, 0.5, 0.05, 7).unwrap();
        // rebuild with labels assigned by parity of a shuffled position,
        // destroying any relation to the blocks
        let mut b = TextAttributedGraph::builder();
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..30).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(13));
        for v in 0..30u32 {
            let label = if order[v as usize] % 2 == 0 { "block0" } else { "block1" };
            b.add_node_full(g.text(v).unwrap(), Some(label), None);
        }
        for &(u, v) in g.edges() {
            b.add_edge(u, v);
        }
        let shuffled = b.build().unwrap();
        let x = block_features(&g, 8, 0.5, 3).unwrap();
        let test_ids: Vec<u32> = (0..30).step_by(3).collect();
        let stats =
            train_node_classifier(&x, &shuffled, &test_ids, &nc_config(TaskModel::Mlp)).unwrap();
        // two classes: anything near 0.5 is chance; far from it would mean
        // the features still explain the shuffled labels
        assert!((stats.mean - 0.5).abs() < 0.45, "mean {}", stats.mean);
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let g = planted_partition(2, 12, 0.5, 0.05, 1).unwrap();
        let x = block_features(&g, 8, 0.5, 5).unwrap();
        let test_ids: Vec<u32> = (0..24).step_by(4).collect();
        let cfg = nc_config(TaskModel::PropagatedMlp);
        let a = train_node_classifier(&x, &g, &test_ids, &cfg).unwrap();
        let b = train_node_classifier(&x, &g, &test_ids, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_run.len(), 3);
    }

    #[test]
    fn class_missing_from_training_is_an_error() {
        let g = planted_partition(2, 5, 0.8, 0.2, 1).unwrap();
        let x = block_features(&g, 8, 0.5, 5).unwrap();
        // all of block1 is in the test set, so it cannot be trained on
        let test_ids: Vec<u32> = (5..10).collect();
        let err = train_node_classifier(&x, &g, &test_ids, &nc_config(TaskModel::Mlp)).unwrap_err();
        assert!(matches!(err, Error::EmptyClass { label } if label == "block1"));
    }

    #[test]
    fn unlabeled_test_nodes_are_rejected() {
        let mut b = TextAttributedGraph::builder();
        b.add_node_full("first text here", Some("a"), None);
        b.add_node_full("second text here", Some("b"), None);
        b.add_node("third unlabeled text");
        b.add_edge(0, 1);
        b.add_edge(1, 2);
        let g = b.build().unwrap();
        let x = Array2::zeros((3, 4));
        let err = train_node_classifier(&x, &g, &[2], &nc_config(TaskModel::Mlp)).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn hits_at_basics() {
        let neg: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
        let pos = vec![2.0, 3.0, 0.5];
        // threshold for k=10 is the 10th highest negative, 190/200
        let h = hits_at(10, &pos, &neg).unwrap();
        assert!((h - 2.0 / 3.0).abs() < 1e-15);
        // every positive above every negative
        assert_eq!(hits_at(10, &[5.0, 6.0], &neg).unwrap(), 1.0);
        // ties do not count: strictly greater
        assert_eq!(hits_at(1, &[199.0 / 200.0], &neg).unwrap(), 0.0);
        assert!(matches!(
            hits_at(300, &pos, &neg),
            Err(Error::TooFewNegatives { available: 200, needed: 300 })
        ));
        assert!(hits_at(0, &pos, &neg).is_err());
        assert!(hits_at(10, &[], &neg).is_err());
    }

    #[test]
    fn hits_at_is_invariant_under_monotone_transforms() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let pos: Vec<f64> = (0..50).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let neg: Vec<f64> = (0..400).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let base = hits_at(25, &pos, &neg).unwrap();
        let stretch = |v: f64| 2.0 * v + 1.0;
        let squash = |v: f64| v.exp();
        for f in [stretch, squash] {
            let p: Vec<f64> = pos.iter().map(|&v| f(v)).collect();
            let q: Vec<f64> = neg.iter().map(|&v| f(v)).collect();
            assert_eq!(hits_at(25, &p, &q).unwrap(), base);
        }
    }

    #[test]
    fn random_scores_hit_near_the_rank_ratio() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let pos: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let neg: Vec<f64> = (0..3000).map(|_| rng.gen::<f64>()).collect();
        let h = hits_at(100, &pos, &neg).unwrap();
        // expectation is 100/3001; this draw should land close
        assert!(h > 0.01 && h < 0.07, "got {h}");
    }

    fn lp_config() -> LinkPredictionConfig {
        LinkPredictionConfig {
            hidden: 16,
            epochs: 40,
            learning_rate: 0.01,
            patience: 40,
            eval_negatives: 5000,
            hits_k: 40,
            negative_seed: 3,
            seeds: vec![0, 1],
            ..LinkPredictionConfig::default()
        }
    }

    #[test]
    fn informative_features_beat_random_features_on_the_same_splits() {
        let g = planted_partition(2, 12, 0.6, 0.04, 3).unwrap();
        let informative = block_features(&g, 8, 0.2, 5).unwrap();
        let random = {
            use rand::Rng;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
            Array2::from_shape_fn((24, 8), |_| rng.gen_range(-1.0..1.0))
        };
        let cfg = lp_config();
        let a = link_prediction_eval(&informative, &g, &cfg).unwrap();
        let b = link_prediction_eval(&random, &g, &cfg).unwrap();
        assert!(a.saturated, "tiny graphs always saturate");
        assert!(a.mean > 0.7, "block features should rank well, got {}", a.mean);
        assert!(
            a.per_run.iter().zip(&b.per_run).all(|(x, y)| x > y),
            "block features {:?} vs random {:?}",
            a.per_run,
            b.per_run
        );
    }

    #[test]
    fn link_prediction_is_deterministic() {
        let g = planted_partition(2, 12, 0.5, 0.05, 3).unwrap();
        let x = block_features(&g, 8, 0.2, 5).unwrap();
        let cfg = lp_config();
        let a = link_prediction_eval(&x, &g, &cfg).unwrap();
        let b = link_prediction_eval(&x, &g, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_negatives_is_an_error() {
        let g = planted_partition(2, 12, 0.5, 0.05, 3).unwrap();
        let x = block_features(&g, 8, 0.2, 5).unwrap();
        let cfg = LinkPredictionConfig {
            eval_negatives: 5,
            hits_k: 10,
            ..lp_config()
        };
        assert!(matches!(
            link_prediction_eval(&x, &g, &cfg),
            Err(Error::TooFewNegatives { .. })
        ));
    }
}
