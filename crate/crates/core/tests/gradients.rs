//! Backpropagation against central finite differences.

mod common;

use ndarray::Array2;
use rarelab::numkit::{Activation, DenseNet, LayerSpec, Mode};
use rarelab::Rng;

const MAX_REL: f64 = 1e-4;

#[test]
fn backprop_matches_finite_differences_on_random_networks() {
    let mut rng = Rng::new(2024);
    let mut checked = 0;
    for case in 0..24 {
        let r = common::finite_difference_check(&mut rng, case);
        assert!(
            r.max_rel < MAX_REL,
            "net {case}, {}: rel {:e}",
            r.worst,
            r.max_rel
        );
        checked += r.entries;
    }
    assert!(checked > 500);
}

#[test]
fn inference_mode_is_deterministic_and_ignores_dropout() {
    let mut rng = Rng::new(3);
    let specs = [
        LayerSpec::new(4, Activation::LeakyRelu).with_dropout(0.5),
        LayerSpec::new(1, Activation::Sigmoid),
    ];
    let net = DenseNet::new(2, &specs, &mut rng).unwrap();
    let x = Array2::from_shape_fn((5, 2), |(i, j)| i as f64 - j as f64);
    let (a, _) = net
        .forward(x.view(), Mode::Infer, &mut Rng::new(1))
        .unwrap();
    let (b, _) = net
        .forward(x.view(), Mode::Infer, &mut Rng::new(2))
        .unwrap();
    assert_eq!(a, b);
}
