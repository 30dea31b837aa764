//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rarelab::classifiers::penalized_loss;
use rarelab::numkit::{bce_grad, bce_loss, Activation, DenseNet, LayerSpec, Mode};
use rarelab::psychometrics::{simulate_responses, ResponseMatrix};
use rarelab::table::CANONICAL_FEATURES;
use rarelab::{LabeledTable, Rng};

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Two well-separated Gaussian blobs in (Panic, Suicidal) with random sex.
pub fn blobs(n0: usize, n1: usize, seed: u64) -> LabeledTable {
    let mut rng = Rng::new(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (label, n, centre) in [(0u8, n0, -2.0), (1u8, n1, 2.0)] {
        for _ in 0..n {
            let female = f64::from(u8::from(rng.bernoulli(0.5)));
            rows.push(vec![
                female,
                female,
                rng.gaussian(centre, 0.5),
                rng.gaussian(centre, 0.5),
            ]);
            labels.push(label);
        }
    }
    LabeledTable::from_dense(CANONICAL_FEATURES, &rows, &labels).unwrap()
}

/// N(0, 1) traits and responses drawn from the given step thresholds.
pub fn simulate_items(
    seed: u64,
    persons: usize,
    thresholds: &[Vec<f64>],
) -> (Vec<f64>, ResponseMatrix) {
    let mut rng = Rng::new(seed);
    let thetas: Vec<f64> = (0..persons).map(|_| rng.normal()).collect();
    let responses = simulate_responses(&thetas, thresholds, &mut rng);
    let names = (1..=thresholds.len()).map(|j| format!("q{j}")).collect();
    let cats = thresholds.iter().map(|t| t.len() as u8 + 1).collect();
    (thetas, ResponseMatrix::new(names, cats, responses).unwrap())
}

// ---------- decision-tree splits ----------

fn gini_of(y: &[u8], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let p = rows.iter().filter(|&&i| y[i] == 1).count() as f64 / rows.len() as f64;
    2.0 * p * (1.0 - p)
}

/// Gini decrease of splitting every row at `x[., f] <= t`, by direct counting.
pub fn split_decrease(x: &Array2<f64>, y: &[u8], f: usize, t: f64) -> f64 {
    let n = y.len() as f64;
    let all: Vec<usize> = (0..y.len()).collect();
    let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[[i, f]] <= t);
    gini_of(y, &all) - l.len() as f64 / n * gini_of(y, &l) - r.len() as f64 / n * gini_of(y, &r)
}

/// Every (feature, midpoint) candidate with its decrease, features then
/// thresholds ascending.
pub fn all_splits(x: &Array2<f64>, y: &[u8]) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for f in 0..x.ncols() {
        let mut values: Vec<f64> = x.column(f).to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let t = pair[0] + (pair[1] - pair[0]) / 2.0;
            out.push((f, t, split_decrease(x, y, f, t)));
        }
    }
    out
}

/// The exhaustive best split (first strict maximum) and the gap to the
/// runner-up, which tells whether the winner is pinned or a near-tie.
pub fn exhaustive_split(x: &Array2<f64>, y: &[u8]) -> Option<((usize, f64, f64), f64)> {
    let splits = all_splits(x, y);
    let mut best: Option<(usize, f64, f64)> = None;
    for &s in &splits {
        if s.2 > 1e-12 && best.is_none_or(|b| s.2 > b.2 + 1e-12) {
            best = Some(s);
        }
    }
    let best = best?;
    let gap = splits
        .iter()
        .filter(|s| (s.0, s.1) != (best.0, best.1))
        .fold(f64::INFINITY, |m, s| m.min((best.2 - s.2).abs()));
    Some((best, gap))
}

/// Random table with small integer features (so ties are common).
pub fn random_table(rng: &mut Rng, max_rows: usize) -> (Array2<f64>, Vec<u8>) {
    let n = 4 + rng.below(max_rows - 3);
    let d = 1 + rng.below(4);
    let x = Array2::from_shape_fn((n, d), |_| rng.below(6) as f64);
    let y = (0..n).map(|_| u8::from(rng.bernoulli(0.5))).collect();
    (x, y)
}

// ---------- logistic regression ----------

/// Coarse-to-fine grid minimization of the penalized loss over (w, b).
pub fn lr_grid_oracle(x: &Array2<f64>, y: &[u8], lambda: f64) -> (f64, f64) {
    let (mut cw, mut cb, mut span) = (0.0, 0.0, 8.0);
    for _ in 0..40 {
        let mut best = (f64::INFINITY, cw, cb);
        for i in -10..=10 {
            for j in -10..=10 {
                let w = cw + span * f64::from(i) / 10.0;
                let b = cb + span * f64::from(j) / 10.0;
                let l = penalized_loss(x.view(), y, &[w], b, lambda);
                if l < best.0 {
                    best = (l, w, b);
                }
            }
        }
        (cw, cb) = (best.1, best.2);
        span *= 0.5;
    }
    (cw, cb)
}

/// Two-point problems: (x values, labels).
pub const LR_TWO_POINT_CASES: [([f64; 2], [u8; 2]); 3] = [
    ([-1.0, 1.0], [0, 1]),
    ([0.5, 2.0], [1, 0]),
    ([-2.0, 3.0], [0, 1]),
];

// ---------- backpropagation ----------

pub const FD_STEP: f64 = 1e-5;

/// Relative error, with gradients under 1e-3 compared on that scale: the
/// central difference carries round-off near `eps * |loss| / FD_STEP`, about
/// 1e-10 here, so exact zeros (e.g. a bias feeding batch norm) come out as
/// noise.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

pub fn random_net(rng: &mut Rng) -> DenseNet {
    let hidden = [
        Activation::LeakyRelu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Linear,
    ];
    let input = 1 + rng.below(4);
    let depth = 1 + rng.below(3);
    let mut specs = Vec::new();
    for _ in 0..depth {
        let mut s = LayerSpec::new(2 + rng.below(4), hidden[rng.below(hidden.len())]);
        if rng.bernoulli(0.5) {
            s = s.with_batch_norm();
        }
        if rng.bernoulli(0.3) {
            s = s.with_dropout(0.25);
        }
        specs.push(s);
    }
    let out = if rng.bernoulli(0.5) {
        Activation::Sigmoid
    } else {
        Activation::Linear
    };
    specs.push(LayerSpec::new(1 + rng.below(2), out));
    let mut net = DenseNet::new(input, &specs, rng).unwrap();
    // move batch-norm parameters off their identity initialization
    for p in net.params_mut() {
        for v in p.iter_mut() {
            *v += 0.1 * rng.normal();
        }
    }
    net
}

/// Scalar objective: BCE for sigmoid outputs, a fixed random projection
/// otherwise. Returns the loss and its gradient with respect to the output.
fn objective(out: &Array2<f64>, sigmoid_out: bool, weights: &Array2<f64>) -> (f64, Array2<f64>) {
    if sigmoid_out {
        let flat: Vec<f64> = out.iter().copied().collect();
        let target: Vec<f64> = weights
            .iter()
            .map(|w| f64::from(u8::from(*w > 0.0)))
            .collect();
        let g = bce_grad(&flat, &target).unwrap();
        (
            bce_loss(&flat, &target).unwrap(),
            Array2::from_shape_vec(out.raw_dim(), g).unwrap(),
        )
    } else {
        ((out * weights).sum(), weights.clone())
    }
}

pub struct FdReport {
    pub entries: usize,
    pub max_rel: f64,
    pub worst: String,
}

/// Compares every parameter and input gradient of a random network and batch
/// against central differences. Dropout masks are replayed exactly.
pub fn finite_difference_check(rng: &mut Rng, case: u64) -> FdReport {
    let mut net = random_net(rng);
    let batch = 3 + rng.below(4);
    let x = Array2::from_shape_fn((batch, net.input_dim()), |_| rng.normal());
    let w = Array2::from_shape_fn((batch, net.output_dim()), |_| rng.normal());
    let sigmoid_out = net.layers().last().unwrap().activation == Activation::Sigmoid;
    let mask_rng = rng.derive_indexed("masks", case);

    let (out, cache) = net
        .forward(x.view(), Mode::Train, &mut mask_rng.clone())
        .unwrap();
    let (_, grad_out) = objective(&out, sigmoid_out, &w);
    let grads = net.backward(&cache, grad_out.view()).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

    let eval = |net: &DenseNet, x: &Array2<f64>| {
        let (o, _) = net
            .forward(x.view(), Mode::Train, &mut mask_rng.clone())
            .unwrap();
        objective(&o, sigmoid_out, &w).0
    };
    let mut report = FdReport {
        entries: 0,
        max_rel: 0.0,
        worst: String::new(),
    };
    let mut record = |e: f64, what: String| {
        report.entries += 1;
        if e > report.max_rel {
            report.max_rel = e;
            report.worst = what;
        }
    };

    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    for (t, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let orig = net.params()[t][k];
            net.params_mut()[t][k] = orig + FD_STEP;
            let up = eval(&net, &x);
            net.params_mut()[t][k] = orig - FD_STEP;
            let down = eval(&net, &x);
            net.params_mut()[t][k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            record(
                rel_err(analytic[t][k], numeric),
                format!("tensor {t} entry {k}"),
            );
        }
    }
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let mut xp = x.clone();
            xp[[i, j]] += FD_STEP;
            let mut xm = x.clone();
            xm[[i, j]] -= FD_STEP;
            let numeric = (eval(&net, &xp) - eval(&net, &xm)) / (2.0 * FD_STEP);
            record(
                rel_err(grads.input[[i, j]], numeric),
                format!("input ({i},{j})"),
            );
        }
    }
    report
}
