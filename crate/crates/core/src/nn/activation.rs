use super::{ForwardCtx, Layer, NnError, Tensor};

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Clone, Debug, Default)]
pub struct Relu {
    active: Option<Vec<bool>>,
}

impl Relu {
    pub fn new() -> Relu {
        Relu::default()
    }
}

impl Layer for Relu {
    fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        self.forward_owned(x.clone(), ctx)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        self.backward_owned(grad_out.clone())
    }

    fn forward_owned(&mut self, mut x: Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<Tensor, NnError> {
        let mut active = self.active.take().unwrap_or_default();
        active.clear();
        active.extend(x.data.iter().map(|&v| v > 0.0));
        x.data.iter_mut().for_each(|v| *v = relu(*v));
        self.active = Some(active);
        Ok(x)
    }

    fn backward_owned(&mut self, mut grad_out: Tensor) -> Result<Tensor, NnError> {
        let active = self.active.as_ref().ok_or(NnError::NoForwardRecorded)?;
        if active.len() != grad_out.len() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} values", active.len()),
                found: format!("{:?}", grad_out.shape()),
            });
        }
        for (g, &a) in grad_out.data.iter_mut().zip(active) {
            if !a {
                *g = 0.0;
            }
        }
        Ok(grad_out)
    }

    fn infer(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let mut y = x.clone();
        y.data.iter_mut().for_each(|v| *v = relu(*v));
        Ok(y)
    }

    fn kink_at_zero(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        assert_eq!(relu(-2.0), 0.0);
        assert_eq!(relu(1.5), 1.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-30.0) > 0.0 && sigmoid(30.0) < 1.0);
    }
}
