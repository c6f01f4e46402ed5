use super::NnError;

/// Dense row-major tensor of up to four dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Tensor, NnError> {
        let expected: usize = shape.iter().product();
        if shape.len() > 4 || data.len() != expected {
            return Err(NnError::ShapeMismatch {
                expected: format!("{shape:?} ({expected} values)"),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading (batch) dimension.
    pub fn batch(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Tensor, NnError> {
        if shape.iter().product::<usize>() != self.data.len() || shape.len() > 4 {
            return Err(NnError::ShapeMismatch {
                expected: format!("{shape:?}"),
                found: format!("{:?}", self.shape),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// A learnable tensor with its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// `None` until a backward pass touches this parameter.
    pub grad: Option<Vec<f64>>,
    pub trainable: bool,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Param {
        Param {
            name: name.into(),
            value,
            grad: None,
            trainable: true,
        }
    }

    /// Gradient buffer for accumulation, created zeroed on first use.
    pub fn grad_mut(&mut self) -> &mut [f64] {
        let n = self.value.len();
        self.grad.get_or_insert_with(|| vec![0.0; n])
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}
