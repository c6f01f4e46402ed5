use miattn::nn::gradcheck::{grad_check, random_tensor};
use miattn::nn::{BatchNorm, Conv2d, Dropout, ForwardCtx, Layer, Linear, MaxPool2d, Mode, Relu, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

fn seeds() -> impl Iterator<Item = u64> {
    0..10
}

#[test]
fn linear_matches_finite_differences() {
    for seed in seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut l = Linear::new("l", 5, 3, &mut rng);
        let x = random_tensor(&[4, 5], &mut rng);
        let r = grad_check(&mut l, &x, seed).unwrap();
        assert!(r.passes(TOL), "seed {seed}: {r:?}");
    }
}

#[test]
fn conv_matches_finite_differences() {
    for seed in seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Conv2d::new("c", 1, 2, 3, &mut rng);
        let x = random_tensor(&[2, 1, 6, 6], &mut rng);
        let r = grad_check(&mut c, &x, seed).unwrap();
        assert!(r.passes(TOL), "seed {seed}: {r:?}");
        let mut c = Conv2d::new("c", 3, 2, 3, &mut rng);
        let x = random_tensor(&[2, 3, 5, 7], &mut rng);
        let r = grad_check(&mut c, &x, seed).unwrap();
        assert!(r.passes(TOL), "seed {seed}: {r:?}");
    }
}

#[test]
fn batchnorm_matches_finite_differences() {
    for seed in seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bn = BatchNorm::new("bn", 3);
        bn.gamma.value = random_tensor(&[3], &mut rng);
        bn.beta.value = random_tensor(&[3], &mut rng);
        let x = random_tensor(&[5, 3], &mut rng);
        let r = grad_check(&mut bn, &x, seed).unwrap();
        assert!(r.passes(TOL), "seed {seed}: {r:?}");
        let x = random_tensor(&[2, 3, 3, 4], &mut rng);
        let r = grad_check(&mut bn, &x, seed).unwrap();
        assert!(r.passes(TOL), "seed {seed}: {r:?}");
    }
}

#[test]
fn relu_pool_dropout_match_finite_differences() {
    for seed in seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_tensor(&[2, 2, 6, 5], &mut rng);
        let r = grad_check(&mut Relu::new(), &x, seed).unwrap();
        assert!(r.passes(TOL), "seed {seed}: {r:?}");
        // max pooling is not differentiable at ties, so use well-separated values
        let mut spaced = x.clone();
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.shuffle(&mut rng);
        for (rank, &i) in order.iter().enumerate() {
            spaced.data[i] = rank as f64 / x.len() as f64 - 0.5;
        }
        let r = grad_check(&mut MaxPool2d::new(), &spaced, seed).unwrap();
        assert!(r.passes(TOL), "seed {seed}: {r:?}");
        let r = grad_check(&mut Dropout::new(0.5).unwrap(), &x, seed).unwrap();
        assert!(r.passes(TOL), "seed {seed}: {r:?}");
    }
}

#[test]
fn relu_kink_is_skipped() {
    let x = Tensor::new(&[1, 3], vec![0.0, 1.0, -1.0]).unwrap();
    let r = grad_check(&mut Relu::new(), &x, 0).unwrap();
    assert_eq!(r.skipped, 1);
    assert_eq!(r.checked, 2);
}

#[test]
fn batchnorm_train_output_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bn = BatchNorm::new("bn", 2);
    bn.gamma.value = Tensor::new(&[2], vec![1.5, -0.5]).unwrap();
    bn.beta.value = Tensor::new(&[2], vec![0.25, 2.0]).unwrap();
    let x = random_tensor(&[64, 2], &mut rng);
    let y = bn.forward(&x, &mut ForwardCtx::new(Mode::Train, &mut rng)).unwrap();
    for ch in 0..2 {
        let col: Vec<f64> = y.data.iter().skip(ch).step_by(2).copied().collect();
        let mean = col.iter().sum::<f64>() / 64.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
        let (g, b) = (bn.gamma.value.data[ch], bn.beta.value.data[ch]);
        assert!((mean - b).abs() < 1e-6);
        assert!((var - g * g).abs() < 1e-3 * g * g);
    }
}

#[test]
fn sigmoid_logit_gradient() {
    // loss = BCE(sigmoid(w·x)), w=0, x=1, y=1: dL/dw = (p − y)·x = −0.5
    let mut l = Linear::from_parts(
        "w",
        Tensor::new(&[1, 1], vec![0.0]).unwrap(),
        Tensor::new(&[1], vec![0.0]).unwrap(),
    );
    l.bias.trainable = false;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = Tensor::new(&[1, 1], vec![1.0]).unwrap();
    let z = l.forward(&x, &mut ForwardCtx::new(Mode::Train, &mut rng)).unwrap();
    let p = miattn::nn::sigmoid(z.data[0]);
    let (_, g) = miattn::nn::bce_batch(&[p], &[1.0]).unwrap();
    l.backward(&Tensor::new(&[1, 1], g).unwrap()).unwrap();
    assert_eq!(l.weight.grad.as_ref().unwrap()[0], -0.5);
}

