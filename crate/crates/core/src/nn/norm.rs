use rand::RngCore;

use super::{ForwardCtx, Layer, Mode, NnError, Param, Tensor};

/// Batch normalization over the channel axis of `[N, C]` or `[N, C, H, W]` inputs.
///
/// Train mode normalizes with batch statistics and folds them into running estimates;
/// eval mode uses the running estimates.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
    cache: Option<BnCache>,
}

#[derive(Clone, Debug)]
struct BnCache {
    shape: Vec<usize>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub const EPS: f64 = 1e-5;
    pub const MOMENTUM: f64 = 0.1;

    pub fn new(name: &str, channels: usize) -> BatchNorm {
        BatchNorm {
            gamma: Param::new(format!("{name}.gamma"), Tensor::new(&[channels], vec![1.0; channels]).unwrap()),
            beta: Param::new(format!("{name}.beta"), Tensor::zeros(&[channels])),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            eps: Self::EPS,
            momentum: Self::MOMENTUM,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }

    /// `(N, C, spatial)` for a valid input.
    fn layout(&self, x: &Tensor) -> Result<(usize, usize, usize), NnError> {
        let s = x.shape();
        if s.len() < 2 || s[1] != self.channels() {
            return Err(NnError::ShapeMismatch {
                expected: format!("[N, {}, ..]", self.channels()),
                found: format!("{s:?}"),
            });
        }
        Ok((s[0], s[1], s[2..].iter().product()))
    }

    fn for_channel(n: usize, c: usize, sp: usize, ch: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
        (0..n).map(move |s| {
            let start = (s * c + ch) * sp;
            start..start + sp
        })
    }
}

impl Layer for BatchNorm {
    fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        self.forward_owned(x.clone(), ctx)
    }

    fn forward_owned(&mut self, mut x: Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        if ctx.mode == Mode::Eval {
            self.cache = None;
            return self.infer(&x);
        }
        let (n, c, sp) = self.layout(&x)?;
        let m = (n * sp) as f64;
        // reuse the previous batch's buffer when shapes allow
        let mut xhat = self.cache.take().map(|c| c.xhat).unwrap_or_default();
        xhat.resize(x.len(), 0.0);
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let mut sum = 0.0;
            for r in Self::for_channel(n, c, sp, ch) {
                sum += x.data[r].iter().sum::<f64>();
            }
            let mean = sum / m;
            let mut sq = 0.0;
            for r in Self::for_channel(n, c, sp, ch) {
                sq += x.data[r].iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
            }
            let var = sq / m;
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std[ch] = istd;
            let (g, b) = (self.gamma.value.data[ch], self.beta.value.data[ch]);
            for r in Self::for_channel(n, c, sp, ch) {
                for (v, h) in x.data[r.clone()].iter_mut().zip(&mut xhat[r]) {
                    *h = (*v - mean) * istd;
                    *v = g * *h + b;
                }
            }
            let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
            self.running_mean[ch] = (1.0 - self.momentum) * self.running_mean[ch] + self.momentum * mean;
            self.running_var[ch] = (1.0 - self.momentum) * self.running_var[ch] + self.momentum * unbiased;
        }
        self.cache = Some(BnCache {
            shape: x.shape().to_vec(),
            xhat,
            inv_std,
        });
        Ok(x)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        self.backward_owned(grad_out.clone())
    }

    fn backward_owned(&mut self, mut grad: Tensor) -> Result<Tensor, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::NoForwardRecorded)?;
        if grad.shape() != cache.shape.as_slice() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{:?}", cache.shape),
                found: format!("{:?}", grad.shape()),
            });
        }
        let (n, c) = (cache.shape[0], cache.shape[1]);
        let sp: usize = cache.shape[2..].iter().product();
        let m = (n * sp) as f64;
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for ch in 0..c {
            let g = self.gamma.value.data[ch];
            let (mut sum_dy, mut sum_dy_xhat) = (0.0, 0.0);
            for r in Self::for_channel(n, c, sp, ch) {
                for i in r {
                    sum_dy += grad.data[i];
                    sum_dy_xhat += grad.data[i] * cache.xhat[i];
                }
            }
            dgamma[ch] = sum_dy_xhat;
            dbeta[ch] = sum_dy;
            let k = g * cache.inv_std[ch] / m;
            for r in Self::for_channel(n, c, sp, ch) {
                for (d, h) in grad.data[r.clone()].iter_mut().zip(&cache.xhat[r]) {
                    *d = k * (m * *d - sum_dy - h * sum_dy_xhat);
                }
            }
        }
        for (a, b) in self.gamma.grad_mut().iter_mut().zip(&dgamma) {
            *a += b;
        }
        for (a, b) in self.beta.grad_mut().iter_mut().zip(&dbeta) {
            *a += b;
        }
        Ok(grad)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let (n, c, sp) = self.layout(x)?;
        let mut y = x.clone();
        for ch in 0..c {
            let istd = 1.0 / (self.running_var[ch] + self.eps).sqrt();
            let scale = self.gamma.value.data[ch] * istd;
            let shift = self.beta.value.data[ch] - self.running_mean[ch] * scale;
            for r in Self::for_channel(n, c, sp, ch) {
                for v in &mut y.data[r] {
                    *v = *v * scale + shift;
                }
            }
        }
        Ok(y)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

/// Inverted dropout: in train mode each element is zeroed with probability `p` and
/// survivors are scaled by `1/(1-p)`; eval mode is the identity.
#[derive(Clone, Debug)]
pub struct Dropout {
    pub p: f64,
    /// Survivor flags of the last train-mode pass; empty after an identity pass.
    keep: Option<Vec<bool>>,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Dropout, NnError> {
        if !(0.0..1.0).contains(&p) {
            return Err(NnError::InvalidParameter(format!("dropout rate {p} outside [0, 1)")));
        }
        Ok(Dropout { p, keep: None })
    }

    fn scale(&self) -> f64 {
        1.0 / (1.0 - self.p)
    }
}

impl Layer for Dropout {
    fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        self.forward_owned(x.clone(), ctx)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        self.backward_owned(grad_out.clone())
    }

    fn forward_owned(&mut self, mut x: Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        let mut keep = self.keep.take().unwrap_or_default();
        keep.clear();
        if ctx.mode == Mode::Train && self.p > 0.0 {
            // compare 32-bit draws against p scaled to the u32 range
            let cut = (self.p * 4_294_967_296.0) as u64;
            let scale = self.scale();
            keep.extend((0..x.len()).map(|_| u64::from(ctx.rng.next_u32()) >= cut));
            for (v, &k) in x.data.iter_mut().zip(&keep) {
                *v = if k { *v * scale } else { 0.0 };
            }
        }
        self.keep = Some(keep);
        Ok(x)
    }

    fn backward_owned(&mut self, mut grad: Tensor) -> Result<Tensor, NnError> {
        let keep = self.keep.as_ref().ok_or(NnError::NoForwardRecorded)?;
        if !keep.is_empty() {
            if keep.len() != grad.len() {
                return Err(NnError::ShapeMismatch {
                    expected: format!("{} values", keep.len()),
                    found: format!("{:?}", grad.shape()),
                });
            }
            let scale = self.scale();
            for (v, &k) in grad.data.iter_mut().zip(keep) {
                *v = if k { *v * scale } else { 0.0 };
            }
        }
        Ok(grad)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        Ok(x.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bn_train(values: &[f64], gamma: f64, beta: f64) -> Vec<f64> {
        let mut bn = BatchNorm::new("bn", 1);
        bn.gamma.value.data[0] = gamma;
        bn.beta.value.data[0] = beta;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::new(&[values.len(), 1], values.to_vec()).unwrap();
        bn.forward(&x, &mut ForwardCtx::new(Mode::Train, &mut rng)).unwrap().data
    }

    #[test]
    fn batchnorm_examples() {
        let y = bn_train(&[1.0, 3.0], 1.0, 0.0);
        assert!((y[0] + 1.0).abs() < 1e-4 && (y[1] - 1.0).abs() < 1e-4);
        let y = bn_train(&[1.0, 3.0], 2.0, 1.0);
        assert!((y[0] + 1.0).abs() < 1e-4 && (y[1] - 3.0).abs() < 1e-4);
        assert_eq!(bn_train(&[7.0], 1.0, 0.0), vec![0.0]);
    }

    #[test]
    fn batchnorm_eval_uses_running_stats() {
        let mut bn = BatchNorm::new("bn", 1);
        bn.running_mean[0] = 2.0;
        bn.running_var[0] = 4.0 - bn.eps;
        let x = Tensor::new(&[1, 1], vec![6.0]).unwrap();
        let y = bn.infer(&x).unwrap();
        assert!((y.data[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn batchnorm_running_stats_update() {
        let mut bn = BatchNorm::new("bn", 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::new(&[2, 1], vec![1.0, 3.0]).unwrap();
        bn.forward(&x, &mut ForwardCtx::new(Mode::Train, &mut rng)).unwrap();
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-12);
        // unbiased batch variance 2.0
        assert!((bn.running_var[0] - (0.9 + 0.2)).abs() < 1e-12);
    }

    #[test]
    fn dropout_identity_cases() {
        let x = Tensor::new(&[1, 4], vec![1.0, -2.0, 3.5, 0.25]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut d0 = Dropout::new(0.0).unwrap();
        assert_eq!(d0.forward(&x, &mut ForwardCtx::new(Mode::Train, &mut rng)).unwrap(), x);
        let mut d = Dropout::new(0.7).unwrap();
        assert_eq!(d.forward(&x, &mut ForwardCtx::new(Mode::Eval, &mut rng)).unwrap(), x);
        assert!(Dropout::new(1.0).is_err());
    }

    #[test]
    fn dropout_survivor_fraction() {
        let n = 1_000_000;
        let x = Tensor::new(&[1, n], vec![1.0; n]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut d = Dropout::new(0.5).unwrap();
        let y = d.forward(&x, &mut ForwardCtx::new(Mode::Train, &mut rng)).unwrap();
        let survivors = y.data.iter().filter(|&&v| v != 0.0).count() as f64 / n as f64;
        assert!((survivors - 0.5).abs() < 0.01, "{survivors}");
        assert!(y.data.iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
