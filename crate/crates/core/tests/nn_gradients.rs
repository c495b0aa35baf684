//! Backward passes against central finite differences, and forward passes
//! against naive reference loops.

use bangla_bully::nn::gradcheck::{check_network, compare_gradients, GradientCheckable, NetworkObjective};
use bangla_bully::nn::{
    activation, global_avg_pool, init, Activation, Conv1d, Dense, DropoutSpec, Layer, LossKind, Lstm, Mode, Network,
    Tensor,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn tiny_stack(head: usize, dropout: DropoutSpec, seed: u64) -> Network<f64> {
    let mut r = rng(seed);
    let (din, k, w, h, hidden) = (2, 2, 3, 3, 4);
    let mut layers = vec![
        Layer::Conv1d(Conv1d::glorot(k, w, din, &mut r)),
        Layer::activation(Activation::Relu),
        Layer::Lstm(Lstm::glorot(k, h, dropout, &mut r)),
        Layer::GlobalAvgPool,
        Layer::Dense(Dense::glorot(h, hidden, &mut r)),
        Layer::activation(Activation::Relu),
        Layer::Dense(Dense::glorot(hidden, head, &mut r)),
    ];
    // small non-zero biases so every bias gradient path is exercised
    for layer in &mut layers {
        for p in layer.params_mut() {
            if p.shape().len() == 1 {
                for v in p.data_mut() {
                    *v += r.gen_range(-0.1..0.1);
                }
            }
        }
    }
    let (act, loss) = if head == 1 {
        (Activation::Sigmoid, LossKind::BinaryCe)
    } else {
        (Activation::Softmax, LossKind::CategoricalCe)
    };
    layers.push(Layer::activation(act));
    Network::new(layers, loss)
}

fn report_ok(label: &str, report: &bangla_bully::nn::GradCheckReport) {
    for p in &report.params {
        assert!(p.flagged.is_empty(), "{label}: {} flagged {:?}", p.name, &p.flagged[..p.flagged.len().min(5)]);
    }
    assert!(report.checked() > 0, "{label}: nothing checked");
    assert!(report.max_rel_error() < TOL, "{label}: max rel {}", report.max_rel_error());
}

#[test]
fn binary_stack_matches_finite_differences() {
    let net = tiny_stack(1, DropoutSpec::NONE, 1);
    let x = init::uniform(&[6, 2], 1.0, &mut rng(2));
    let y = Tensor::vector(vec![1.0]);
    let report = check_network(&net, &x, &y, Mode::inference(), H, TOL).unwrap();
    report_ok("binary", &report);
}

#[test]
fn multiclass_stack_matches_finite_differences() {
    let net = tiny_stack(5, DropoutSpec::NONE, 3);
    let x = init::uniform(&[6, 2], 1.0, &mut rng(4));
    let y = Tensor::vector(vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    let report = check_network(&net, &x, &y, Mode::inference(), H, TOL).unwrap();
    report_ok("multiclass", &report);
}

#[test]
fn dropout_masks_are_differentiated_exactly() {
    let net = tiny_stack(5, DropoutSpec { rate: 0.3, recurrent_rate: 0.3 }, 5);
    let x = init::uniform(&[6, 2], 1.0, &mut rng(6));
    let y = Tensor::vector(vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    let report = check_network(&net, &x, &y, Mode::training(77), H, TOL).unwrap();
    report_ok("dropout", &report);
}

#[test]
fn lstm_alone_matches_finite_differences() {
    let mut r = rng(8);
    let net = Network::new(
        vec![
            Layer::Lstm(Lstm::glorot(2, 3, DropoutSpec::NONE, &mut r)),
            Layer::GlobalAvgPool,
            Layer::Dense(Dense::glorot(3, 1, &mut r)),
            Layer::activation(Activation::Sigmoid),
        ],
        LossKind::BinaryCe,
    );
    let x = init::uniform(&[6, 2], 1.5, &mut r);
    let report = check_network(&net, &x, &Tensor::vector(vec![0.0]), Mode::inference(), H, TOL).unwrap();
    report_ok("lstm", &report);
}

#[test]
fn conv_alone_matches_finite_differences() {
    let mut r = rng(9);
    let net = Network::new(
        vec![
            Layer::Conv1d(Conv1d::glorot(2, 3, 2, &mut r)),
            Layer::GlobalAvgPool,
            Layer::activation(Activation::Softmax),
        ],
        LossKind::CategoricalCe,
    );
    let x = init::uniform(&[6, 2], 1.0, &mut r);
    let report = check_network(&net, &x, &Tensor::vector(vec![1.0, 0.0]), Mode::inference(), H, TOL).unwrap();
    report_ok("conv", &report);
}

#[test]
fn dense_alone_is_accurate_to_1e6() {
    let mut r = rng(10);
    let net = Network::new(
        vec![Layer::Dense(Dense::glorot(4, 3, &mut r)), Layer::activation(Activation::Softmax)],
        LossKind::CategoricalCe,
    );
    let x = init::uniform(&[4], 1.0, &mut r);
    let report = check_network(&net, &x, &Tensor::vector(vec![0.0, 1.0, 0.0]), Mode::inference(), H, 1e-6).unwrap();
    assert!(report.passed(), "{report:?}");
    assert!(report.max_rel_error() < 1e-6);
}

#[test]
fn unfused_activation_paths_match() {
    // sigmoid + categorical and softmax + binary force the generic
    // loss-gradient-then-activation route
    let mut r = rng(11);
    for (act, loss) in [(Activation::Sigmoid, LossKind::CategoricalCe), (Activation::Softmax, LossKind::BinaryCe)] {
        let net = Network::new(vec![Layer::Dense(Dense::glorot(3, 3, &mut r)), Layer::activation(act)], loss);
        let x = init::uniform(&[3], 1.0, &mut r);
        let report = check_network(&net, &x, &Tensor::vector(vec![0.0, 1.0, 0.0]), Mode::inference(), H, TOL).unwrap();
        report_ok("unfused", &report);
    }
}

#[test]
fn corrupted_gradient_is_flagged() {
    let net = tiny_stack(1, DropoutSpec::NONE, 12);
    let x = init::uniform(&[6, 2], 1.0, &mut rng(13));
    let mut obj =
        NetworkObjective { network: net, input: x, target: Tensor::vector(vec![1.0]), mode: Mode::inference() };
    let mut grads = obj.gradients().unwrap();
    grads.iter_mut().for_each(|g| g.scale(2.0));
    let report = compare_gradients(&mut obj, &grads, H, TOL).unwrap();
    assert!(!report.passed());
    let flagged: usize = report.params.iter().map(|p| p.flagged.len()).sum();
    assert!(flagged > 0);
}

#[test]
fn relu_kink_coordinates_are_excluded() {
    // relu applied directly to the input: coordinates within h of zero
    // straddle the kink
    let net = Network::new(
        vec![
            Layer::activation(Activation::Relu),
            Layer::Dense(Dense::new(Tensor::filled(&[1, 3], 1.0), Tensor::zeros(&[1])).unwrap()),
            Layer::activation(Activation::Sigmoid),
        ],
        LossKind::BinaryCe,
    );
    let x = Tensor::vector(vec![0.5, 3e-6, -0.4]);
    let report = check_network(&net, &x, &Tensor::vector(vec![1.0]), Mode::inference(), H, TOL).unwrap();
    let input = report.params.iter().find(|p| p.name == "input").unwrap();
    assert_eq!(input.skipped, 1);
    assert_eq!(input.checked, 2);
    assert!(report.passed());
}

#[test]
fn zero_influence_parameter_has_zero_gradient() {
    // a relu that is dead for this input blocks everything upstream of it
    let net = Network::new(
        vec![
            Layer::Dense(Dense::new(Tensor::filled(&[1, 2], 1.0), Tensor::vector(vec![-10.0])).unwrap()),
            Layer::activation(Activation::Relu),
            Layer::Dense(Dense::glorot(1, 1, &mut rng(14))),
            Layer::activation(Activation::Sigmoid),
        ],
        LossKind::BinaryCe,
    );
    let back = net.backward(&Tensor::vector(vec![0.3, 0.4]), &Tensor::vector(vec![1.0]), Mode::inference()).unwrap();
    assert!(back.param_grads[0].data().iter().all(|&g| g == 0.0));
    assert!(back.param_grads[1].data().iter().all(|&g| g == 0.0));
}

#[test]
fn gradients_are_deterministic_for_fixed_seed() {
    let net = tiny_stack(5, DropoutSpec::default(), 15);
    let x = init::uniform(&[6, 2], 1.0, &mut rng(16));
    let y = Tensor::vector(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    let a = net.backward(&x, &y, Mode::training(3)).unwrap();
    let b = net.backward(&x, &y, Mode::training(3)).unwrap();
    assert_eq!(a.param_grads, b.param_grads);
    assert_eq!(a.input_grad, b.input_grad);
}

fn naive_conv(input: &[f64], l: usize, din: usize, kernels: &[f64], k: usize, w: usize, bias: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; (l - w + 1) * k];
    for t in 0..l - w + 1 {
        for f in 0..k {
            let mut s = bias[f];
            for dw in 0..w {
                for d in 0..din {
                    s += kernels[(f * w + dw) * din + d] * input[(t + dw) * din + d];
                }
            }
            out[t * k + f] = s;
        }
    }
    out
}

#[test]
fn conv_and_pool_match_reference_loops_on_random_shapes() {
    let mut r = rng(17);
    for _ in 0..100 {
        let (din, k, w) = (r.gen_range(1..6), r.gen_range(1..6), r.gen_range(1..5));
        let l = r.gen_range(w..w + 20);
        let conv =
            Conv1d::<f64>::new(init::uniform(&[k, w, din], 1.0, &mut r), init::uniform(&[k], 1.0, &mut r)).unwrap();
        let x = init::uniform(&[l, din], 2.0, &mut r);
        let got = conv.forward(&x).unwrap();
        let want = naive_conv(x.data(), l, din, conv.kernels.data(), k, w, conv.bias.data());
        assert_eq!(got.shape(), &[l - w + 1, k]);
        for (a, b) in got.data().iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }

        let pooled = global_avg_pool(&got).unwrap();
        for f in 0..k {
            let mean = (0..l - w + 1).map(|t| got.data()[t * k + f]).sum::<f64>() / (l - w + 1) as f64;
            assert!((pooled.data()[f] - mean).abs() < 1e-10);
        }
    }
}

#[test]
fn default_shape_contract() {
    let mut r = rng(18);
    let conv = Conv1d::<f32>::glorot(32, 3, 16, &mut r);
    let lstm = Lstm::<f32>::glorot(32, 100, DropoutSpec::default(), &mut r);
    let hidden = Dense::<f32>::glorot(100, 64, &mut r);
    let x = init::uniform(&[120, 16], 0.1, &mut r);
    let c = activation(&conv.forward(&x).unwrap(), Activation::Relu);
    assert_eq!(c.shape(), &[118, 32]);
    let s = lstm.forward(&c, Mode::inference()).unwrap();
    assert_eq!(s.shape(), &[118, 100]);
    let p = global_avg_pool(&s).unwrap();
    assert_eq!(p.shape(), &[100]);
    assert_eq!(hidden.forward(&p).unwrap().shape(), &[64]);
}
