use rand_chacha::ChaCha8Rng;

use super::gemm::matmul;
use super::{expect_shape, init_uniform, ForwardCtx, Layer, NnError, Param, Tensor};

/// Fully connected layer `y = W x + b` on `[N, in]` batches.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Linear {
    pub fn new(name: &str, inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Linear {
        let w = init_uniform(rng, inputs * outputs, inputs);
        let b = init_uniform(rng, outputs, inputs);
        Linear::from_parts(
            name,
            Tensor::new(&[outputs, inputs], w).expect("weight shape"),
            Tensor::new(&[outputs], b).expect("bias shape"),
        )
    }

    pub fn from_parts(name: &str, weight: Tensor, bias: Tensor) -> Linear {
        Linear {
            weight: Param::new(format!("{name}.weight"), weight),
            bias: Param::new(format!("{name}.bias"), bias),
            input: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[0]
    }

    /// Single-vector forward pass.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let t = Tensor::new(&[1, x.len()], x.to_vec())?;
        Ok(self.infer(&t)?.data)
    }
}

impl Layer for Linear {
    fn forward(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let x = self.input.as_ref().ok_or(NnError::NoForwardRecorded)?;
        let (n, inp, out) = (x.batch(), self.inputs(), self.outputs());
        expect_shape(grad_out, &[Some(n), Some(out)])?;
        matmul(out, n, inp, &grad_out.data, true, &x.data, false, self.weight.grad_mut(), true);
        let db = self.bias.grad_mut();
        for row in grad_out.data.chunks_exact(out) {
            for (d, g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
        let mut dx = Tensor::zeros(&[n, inp]);
        matmul(n, out, inp, &grad_out.data, false, &self.weight.value.data, false, &mut dx.data, false);
        Ok(dx)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let (inp, out) = (self.inputs(), self.outputs());
        expect_shape(x, &[None, Some(inp)])?;
        let n = x.batch();
        let mut y = Tensor::zeros(&[n, out]);
        for row in y.data.chunks_exact_mut(out) {
            row.copy_from_slice(&self.bias.value.data);
        }
        matmul(n, inp, out, &x.data, false, &self.weight.value.data, true, &mut y.data, true);
        Ok(y)
    }

    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(w: &[f64], rows: usize, b: &[f64]) -> Linear {
        Linear::from_parts(
            "l",
            Tensor::new(&[rows, w.len() / rows], w.to_vec()).unwrap(),
            Tensor::new(&[b.len()], b.to_vec()).unwrap(),
        )
    }

    #[test]
    fn identity() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], 2, &[0.0, 0.0]);
        assert_eq!(l.apply(&[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn bias_and_weights() {
        let l = layer(&[1.0, 2.0], 1, &[1.0]);
        assert_eq!(l.apply(&[1.0, 1.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn shape_mismatch() {
        let l = layer(&[1.0, 0.0, 0.0, 1.0], 2, &[0.0, 0.0]);
        assert!(matches!(
            l.apply(&[1.0, 2.0, 3.0]),
            Err(NnError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn backward_requires_forward() {
        let mut l = layer(&[1.0], 1, &[0.0]);
        let g = Tensor::new(&[1, 1], vec![1.0]).unwrap();
        assert_eq!(l.backward(&g), Err(NnError::NoForwardRecorded));
    }
}
