//! Deterministic inputs for the kernel benchmarks.

use ndarray::Array2;
use rarelab::pipeline::{stratified_split, Preprocessor, SplitSpec};
use rarelab::psychometrics::{simulate_responses, ResponseMatrix};
use rarelab::surrogate::{generate, SurrogateSpec};
use rarelab::{LabeledTable, Rng};

/// Training rows of the default surrogate (524 rows, 3 positives).
pub fn surrogate_train() -> LabeledTable {
    let table = generate(&SurrogateSpec::default()).expect("default surrogate");
    stratified_split(&table, &SplitSpec::default(), 0)
        .expect("default split")
        .0
}

/// The same rows imputed and standardized, ready for a classifier.
pub fn surrogate_matrix() -> (Array2<f64>, Vec<u8>) {
    let train = surrogate_train();
    let pre = Preprocessor::fit(train.rows()).expect("preprocessor");
    (
        pre.transform(train.rows()).expect("transform"),
        train.labels().to_vec(),
    )
}

/// A balanced two-blob problem with `n` rows and `d` features.
pub fn blobs(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
    let mut rng = Rng::new(seed);
    let y: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let x = Array2::from_shape_fn((n, d), |(i, _)| {
        rng.gaussian(if y[i] == 1 { 1.0 } else { -1.0 }, 1.0)
    });
    (x, y)
}

/// Dichotomous responses of `persons` N(0, 1) people to `items` evenly
/// spread items.
pub fn rasch_responses(persons: usize, items: usize, seed: u64) -> ResponseMatrix {
    let mut rng = Rng::new(seed);
    let thetas: Vec<f64> = (0..persons).map(|_| rng.normal()).collect();
    let thresholds: Vec<Vec<f64>> = (0..items)
        .map(|j| vec![-1.5 + 3.0 * j as f64 / (items.max(2) - 1) as f64])
        .collect();
    let responses = simulate_responses(&thetas, &thresholds, &mut rng);
    let names = (1..=items).map(|j| format!("q{j}")).collect();
    ResponseMatrix::new(names, vec![2; items], responses).expect("simulated responses")
}

/// Two samples of `n` standard normals, the second shifted by 0.3.
pub fn normal_samples(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = Rng::new(seed);
    let a = (0..n).map(|_| rng.normal()).collect();
    let b = (0..n).map(|_| rng.gaussian(0.3, 1.0)).collect();
    (a, b)
}
