use super::{NnError, Param};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "SGD",
            OptimizerKind::Adam => "ADAM",
        }
    }

    pub fn parse(s: &str) -> Option<OptimizerKind> {
        match s.to_ascii_uppercase().as_str() {
            "SGD" => Some(OptimizerKind::Sgd),
            "ADAM" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

/// Optimizer hyperparameters plus per-parameter moment buffers.
///
/// Buffers are indexed by position in the parameter list, so every step must pass the
/// parameters in the same order.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64) -> OptimizerState {
        OptimizerState {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<(), NnError> {
        match self.kind {
            OptimizerKind::Sgd => {
                self.t += 1;
                sgd_step(params, self.lr)
            }
            OptimizerKind::Adam => adam_step(params, self),
        }
    }
}

fn check_grads(params: &[&mut Param]) -> Result<(), NnError> {
    for p in params.iter().filter(|p| p.trainable) {
        if p.grad.is_none() {
            return Err(NnError::MissingGradient(p.name.clone()));
        }
    }
    Ok(())
}

/// Plain gradient descent `θ ← θ − lr·g` on every trainable parameter.
pub fn sgd_step(params: &mut [&mut Param], lr: f64) -> Result<(), NnError> {
    check_grads(params)?;
    for p in params.iter_mut().filter(|p| p.trainable) {
        let g = p.grad.as_ref().expect("checked");
        for (w, g) in p.value.data.iter_mut().zip(g) {
            *w -= lr * g;
        }
    }
    Ok(())
}

/// Bias-corrected Adam update; increments `state.t`.
pub fn adam_step(params: &mut [&mut Param], state: &mut OptimizerState) -> Result<(), NnError> {
    check_grads(params)?;
    if state.m.len() != params.len() {
        state.m = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        state.v = state.m.clone();
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (i, p) in params.iter_mut().enumerate() {
        if !p.trainable {
            continue;
        }
        let g = p.grad.as_ref().expect("checked");
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        if m.len() != g.len() {
            return Err(NnError::ShapeMismatch {
                expected: format!("{} moments", m.len()),
                found: format!("{} gradients for {}", g.len(), p.name),
            });
        }
        for j in 0..g.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            p.value.data[j] -= state.lr * mh / (vh.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn scalar(value: f64, grad: Option<f64>) -> Param {
        let mut p = Param::new("w", Tensor::new(&[1], vec![value]).unwrap());
        p.grad = grad.map(|g| vec![g]);
        p
    }

    #[test]
    fn sgd_examples() {
        let mut p = scalar(1.0, Some(0.5));
        sgd_step(&mut [&mut p], 0.1).unwrap();
        assert!((p.value.data[0] - 0.95).abs() < 1e-15);
        let mut p = scalar(1.0, Some(0.0));
        sgd_step(&mut [&mut p], 0.1).unwrap();
        assert_eq!(p.value.data[0], 1.0);
    }

    #[test]
    fn adam_first_step() {
        let mut p = scalar(1.0, Some(1.0));
        let mut st = OptimizerState::new(OptimizerKind::Adam, 1e-3);
        st.step(&mut [&mut p]).unwrap();
        assert_eq!(st.t, 1);
        // bias-corrected moments are exactly g and g², so the step is lr·1/(1+eps)
        assert!((p.value.data[0] - (1.0 - 1e-3 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_and_frozen() {
        let mut p = scalar(1.0, None);
        assert_eq!(
            sgd_step(&mut [&mut p], 0.1),
            Err(NnError::MissingGradient("w".into()))
        );
        p.trainable = false;
        let mut st = OptimizerState::new(OptimizerKind::Adam, 0.1);
        st.step(&mut [&mut p]).unwrap();
        assert_eq!(p.value.data[0], 1.0);
    }
}
