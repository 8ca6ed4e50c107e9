mod common;

use fedloc_core::nn::{self, Activation, DenseLayer, Loss, Network, Targets};

#[test]
fn analytic_gradients_match_finite_differences() {
    let (checked, worst) = common::gradient_check(12, 100);
    assert_eq!(checked, 24);
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn hand_computed_sigmoid_cross_entropy() {
    // one linear-to-sigmoid layer with z = (0, ln 3): s = (1/2, 3/4), S = 5/4
    let layer = DenseLayer::new(1, 2, vec![0.0, 3f64.ln()], vec![0.0, 0.0], Activation::Sigmoid).unwrap();
    let net = Network::new(vec![layer]).unwrap();
    let (loss, g) = nn::loss_and_gradient(&net, &[vec![1.0]], Targets::Classes(&[1]), Loss::SparseCategoricalCrossentropy).unwrap();
    let expected_loss = -(0.75f64 / 1.25).ln();
    assert!((loss - expected_loss).abs() < 1e-12);
    // dL/dz0 = s0(1-s0)/S, dL/dz1 = s1(1-s1)/S - (1-s1)
    let dz0 = 0.25 / 1.25;
    let dz1 = 0.1875 / 1.25 - 0.25;
    for (got, want) in g.values.iter().zip([dz0, dz1, dz0, dz1]) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}
