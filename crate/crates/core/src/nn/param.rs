use rand::Rng;

/// A named trainable tensor with its accumulated gradient.
///
/// Values are stored row-major; `grad` always has the same length as `values`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    name: String,
    shape: Vec<usize>,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        assert!(
            shape.iter().all(|&d| d > 0),
            "tensor dimensions must be positive: {shape:?}"
        );
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            values: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    pub fn filled(name: impl Into<String>, shape: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(name, shape);
        t.values.fill(value);
        t
    }

    /// Uniform initialization in `[-range, range]`.
    pub fn uniform<R: Rng>(name: impl Into<String>, shape: &[usize], range: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(name, shape);
        for v in &mut t.values {
            *v = rng.gen_range(-range..=range);
        }
        t
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Anything that owns trainable tensors.
pub trait Params {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
