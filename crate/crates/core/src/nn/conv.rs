use rand_chacha::ChaCha8Rng;

use super::gemm::matmul;
use super::{expect_shape, init_uniform, ForwardCtx, Layer, NnError, Param, Tensor};

/// Output length of a valid (unpadded) convolution: `(d - w) / s + 1`.
pub fn conv_output_dim(d: usize, kernel: usize, stride: usize) -> Option<usize> {
    (d >= kernel && stride > 0).then(|| (d - kernel) / stride + 1)
}

/// Valid 2D convolution, stride 1, on `[N, C_in, H, W]` batches.
///
/// Lowered to GEMM through an im2col buffer that is kept for the backward pass.
#[derive(Clone, Debug)]
pub struct Conv2d {
    /// `[C_out, C_in, k, k]`
    pub weight: Param,
    pub bias: Param,
    /// Skip computing the input gradient (first layer of a network).
    pub input_grad: bool,
    cache: Option<ConvCache>,
}

#[derive(Clone, Debug)]
struct ConvCache {
    input_shape: Vec<usize>,
    cols: Vec<f64>,
}

impl Conv2d {
    pub fn new(
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        rng: &mut ChaCha8Rng,
    ) -> Conv2d {
        let fan_in = in_channels * kernel * kernel;
        let w = init_uniform(rng, out_channels * fan_in, fan_in);
        let b = init_uniform(rng, out_channels, fan_in);
        Conv2d::from_parts(
            name,
            Tensor::new(&[out_channels, in_channels, kernel, kernel], w).expect("kernel shape"),
            Tensor::new(&[out_channels], b).expect("bias shape"),
        )
    }

    pub fn from_parts(name: &str, weight: Tensor, bias: Tensor) -> Conv2d {
        Conv2d {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            input_grad: true,
            cache: None,
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        let s = self.weight.value.shape();
        (s[0], s[1], s[2])
    }

    /// Returns `(N, H_out, W_out)` after validating the input.
    fn check(&self, x: &Tensor) -> Result<(usize, usize, usize), NnError> {
        let (_, cin, k) = self.dims();
        expect_shape(x, &[None, Some(cin), None, None])?;
        let (h, w) = (x.shape()[2], x.shape()[3]);
        match (conv_output_dim(h, k, 1), conv_output_dim(w, k, 1)) {
            (Some(ho), Some(wo)) => Ok((x.batch(), ho, wo)),
            _ => Err(NnError::KernelLargerThanInput {
                kernel: k,
                height: h,
                width: w,
            }),
        }
    }

    fn im2col(&self, sample: &[f64], h: usize, w: usize, cols: &mut [f64]) {
        let (_, cin, k) = self.dims();
        let (ho, wo) = (h - k + 1, w - k + 1);
        let p = ho * wo;
        for c in 0..cin {
            let plane = &sample[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = &mut cols[((c * k + ki) * k + kj) * p..][..p];
                    for i in 0..ho {
                        let src = &plane[(i + ki) * w + kj..][..wo];
                        row[i * wo..(i + 1) * wo].copy_from_slice(src);
                    }
                }
            }
        }
    }

    fn run(&self, x: &Tensor, keep_cols: bool) -> Result<(Tensor, Vec<f64>), NnError> {
        let (n, ho, wo) = self.check(x)?;
        let (cout, cin, k) = self.dims();
        let (h, w) = (x.shape()[2], x.shape()[3]);
        let kk = cin * k * k;
        let p = ho * wo;
        let mut out = Tensor::zeros(&[n, cout, ho, wo]);
        let mut all_cols = if keep_cols { vec![0.0; n * kk * p] } else { Vec::new() };
        let mut scratch = if keep_cols { Vec::new() } else { vec![0.0; kk * p] };
        for s in 0..n {
            let sample = &x.data[s * cin * h * w..(s + 1) * cin * h * w];
            let cols: &mut [f64] = if keep_cols {
                &mut all_cols[s * kk * p..(s + 1) * kk * p]
            } else {
                &mut scratch
            };
            self.im2col(sample, h, w, cols);
            let o = &mut out.data[s * cout * p..(s + 1) * cout * p];
            for (c, chunk) in o.chunks_exact_mut(p).enumerate() {
                chunk.fill(self.bias.value.data[c]);
            }
            matmul(cout, kk, p, &self.weight.value.data, false, cols, false, o, true);
        }
        Ok((out, all_cols))
    }
}

impl Layer for Conv2d {
    fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        let (out, cols) = self.run(x, true)?;
        self.cache = Some(ConvCache {
            input_shape: x.shape().to_vec(),
            cols,
        });
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::NoForwardRecorded)?;
        let (cout, cin, k) = self.dims();
        let (n, h, w) = (cache.input_shape[0], cache.input_shape[2], cache.input_shape[3]);
        let (ho, wo) = (h - k + 1, w - k + 1);
        expect_shape(grad_out, &[Some(n), Some(cout), Some(ho), Some(wo)])?;
        let kk = cin * k * k;
        let p = ho * wo;

        let mut dw = vec![0.0; cout * kk];
        let mut db = vec![0.0; cout];
        let mut dx = Tensor::zeros(&cache.input_shape);
        let mut dcols = vec![0.0; if self.input_grad { kk * p } else { 0 }];
        for s in 0..n {
            let g = &grad_out.data[s * cout * p..(s + 1) * cout * p];
            let cols = &cache.cols[s * kk * p..(s + 1) * kk * p];
            matmul(cout, p, kk, g, false, cols, true, &mut dw, true);
            for (c, chunk) in g.chunks_exact(p).enumerate() {
                db[c] += chunk.iter().sum::<f64>();
            }
            if !self.input_grad {
                continue;
            }
            matmul(kk, cout, p, &self.weight.value.data, true, g, false, &mut dcols, false);
            let dsample = &mut dx.data[s * cin * h * w..(s + 1) * cin * h * w];
            for c in 0..cin {
                let plane = &mut dsample[c * h * w..(c + 1) * h * w];
                for ki in 0..k {
                    for kj in 0..k {
                        let row = &dcols[((c * k + ki) * k + kj) * p..][..p];
                        for i in 0..ho {
                            let dst = &mut plane[(i + ki) * w + kj..][..wo];
                            for (d, v) in dst.iter_mut().zip(&row[i * wo..(i + 1) * wo]) {
                                *d += v;
                            }
                        }
                    }
                }
            }
        }
        for (a, b) in self.weight.grad_mut().iter_mut().zip(&dw) {
            *a += b;
        }
        for (a, b) in self.bias.grad_mut().iter_mut().zip(&db) {
            *a += b;
        }
        Ok(dx)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        Ok(self.run(x, false)?.0)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Non-overlapping 2×2 max pooling; an odd trailing row or column is dropped.
#[derive(Clone, Debug, Default)]
pub struct MaxPool2d {
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub const WINDOW: usize = 2;

    pub fn new() -> MaxPool2d {
        MaxPool2d::default()
    }

    fn run(x: &Tensor) -> Result<(Tensor, Vec<usize>), NnError> {
        expect_shape(x, &[None, None, None, None])?;
        let s = x.shape();
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        if h < 2 || w < 2 {
            return Err(NnError::KernelLargerThanInput {
                kernel: 2,
                height: h,
                width: w,
            });
        }
        let (ho, wo) = (h / 2, w / 2);
        let mut out = Tensor::zeros(&[n, c, ho, wo]);
        let mut arg = vec![0usize; n * c * ho * wo];
        for plane in 0..n * c {
            let base = plane * h * w;
            for i in 0..ho {
                for j in 0..wo {
                    let mut best = base + 2 * i * w + 2 * j;
                    for idx in [
                        base + 2 * i * w + 2 * j + 1,
                        base + (2 * i + 1) * w + 2 * j,
                        base + (2 * i + 1) * w + 2 * j + 1,
                    ] {
                        if x.data[idx] > x.data[best] {
                            best = idx;
                        }
                    }
                    let o = (plane * ho + i) * wo + j;
                    out.data[o] = x.data[best];
                    arg[o] = best;
                }
            }
        }
        Ok((out, arg))
    }
}

impl Layer for MaxPool2d {
    fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        let (out, arg) = MaxPool2d::run(x)?;
        self.cache = Some((x.shape().to_vec(), arg));
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let (shape, arg) = self.cache.as_ref().ok_or(NnError::NoForwardRecorded)?;
        if grad_out.len() != arg.len() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} values", arg.len()),
                found: format!("{:?}", grad_out.shape()),
            });
        }
        let mut dx = Tensor::zeros(shape);
        for (g, &i) in grad_out.data.iter().zip(arg) {
            dx.data[i] += g;
        }
        Ok(dx)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        Ok(MaxPool2d::run(x)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(h: usize, w: usize, data: Vec<f64>) -> Tensor {
        Tensor::new(&[1, 1, h, w], data).unwrap()
    }

    fn conv(k: usize, kernel: Vec<f64>) -> Conv2d {
        Conv2d::from_parts(
            "c",
            Tensor::new(&[1, 1, k, k], kernel).unwrap(),
            Tensor::new(&[1], vec![0.0]).unwrap(),
        )
    }

    #[test]
    fn ones_kernel() {
        let c = conv(3, vec![1.0; 9]);
        let y = c.infer(&single(3, 3, vec![1.0; 9])).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data, vec![9.0]);
    }

    #[test]
    fn diagonal_kernel() {
        let c = conv(2, vec![1.0, 0.0, 0.0, 1.0]);
        let y = c.infer(&single(2, 2, vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(y.data, vec![5.0]);
    }

    #[test]
    fn kernel_too_large() {
        let c = conv(3, vec![1.0; 9]);
        assert!(matches!(
            c.infer(&single(2, 2, vec![0.0; 4])),
            Err(NnError::KernelLargerThanInput { .. })
        ));
    }

    #[test]
    fn multi_channel_matches_direct_sum() {
        let mut rng = rand::SeedableRng::seed_from_u64(3);
        let c = Conv2d::new("c", 2, 3, 3, &mut rng);
        let x = Tensor::new(&[1, 2, 5, 4], (0..40).map(|i| (i as f64 * 0.37).cos()).collect()).unwrap();
        let y = c.infer(&x).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3, 2]);
        let wt = &c.weight.value.data;
        for o in 0..3 {
            for i in 0..3 {
                for j in 0..2 {
                    let mut acc = c.bias.value.data[o];
                    for ci in 0..2 {
                        for a in 0..3 {
                            for b in 0..3 {
                                acc += x.data[ci * 20 + (i + a) * 4 + j + b]
                                    * wt[((o * 2 + ci) * 3 + a) * 3 + b];
                            }
                        }
                    }
                    assert!((y.data[(o * 3 + i) * 2 + j] - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pooling() {
        let p = MaxPool2d::new();
        assert_eq!(p.infer(&single(2, 2, vec![1.0, 2.0, 3.0, 4.0])).unwrap().data, vec![4.0]);
        let iota: Vec<f64> = (1..=16).map(f64::from).collect();
        assert_eq!(p.infer(&single(4, 4, iota)).unwrap().data, vec![6.0, 8.0, 14.0, 16.0]);
        let y = p.infer(&single(3, 3, (1..=9).map(f64::from).collect())).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data, vec![5.0]);
    }

    #[test]
    fn output_dim_formula() {
        assert_eq!(conv_output_dim(150, 3, 1), Some(148));
        assert_eq!(conv_output_dim(2, 3, 1), None);
        assert_eq!(conv_output_dim(7, 3, 2), Some(3));
    }
}
