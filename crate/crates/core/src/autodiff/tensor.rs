use super::TensorError;

/// Dense row-major `f64` array with an attached gradient buffer.
///
/// Signals use a channels-first `[channels, time]` layout and convolution
/// kernels are stored as `[out_ch, in_ch, taps]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Vec<f64>,
    requires_grad: bool,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self, TensorError> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                reason: "dimensions must be positive",
            });
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::InvalidShape {
                shape: shape.to_vec(),
                reason: "element count does not match data length",
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            grad: vec![0.0; numel],
            data,
            requires_grad: false,
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self, TensorError> {
        let numel = shape.iter().product();
        Self::new(shape, vec![0.0; numel])
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
            grad: vec![0.0],
            requires_grad: false,
        }
    }

    /// Marks the tensor as a differentiable leaf.
    pub fn requires_grad(mut self, flag: bool) -> Self {
        self.requires_grad = flag;
        self
    }

    pub fn set_requires_grad(&mut self, flag: bool) {
        self.requires_grad = flag;
    }

    pub fn is_requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        &mut self.grad
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Learnable dilation rate of one convolution layer, in samples.
///
/// The value lives in a one-element tensor so it can take part in a graph
/// like any other parameter. It is kept inside `[1, d_max]` by projection
/// after each optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationParam {
    value: Tensor,
    d_max: f64,
}

pub const D_MIN: f64 = 1.0;

impl DilationParam {
    pub fn new(value: f64, d_max: f64) -> Result<Self, TensorError> {
        if !(d_max.is_finite() && d_max > D_MIN) {
            return Err(TensorError::InvalidDilation { value: d_max });
        }
        if !(value.is_finite() && (D_MIN..=d_max).contains(&value)) {
            return Err(TensorError::InvalidDilation { value });
        }
        Ok(Self {
            value: Tensor::scalar(value).requires_grad(true),
            d_max,
        })
    }

    pub fn value(&self) -> f64 {
        self.value.item()
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn bounds(&self) -> (f64, f64) {
        (D_MIN, self.d_max)
    }

    pub fn tensor(&self) -> &Tensor {
        &self.value
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor {
        &mut self.value
    }

    /// Overwrites the rate, clamping into the valid interval.
    pub fn set(&mut self, value: f64) {
        self.value.data_mut()[0] = value.clamp(D_MIN, self.d_max);
    }

    pub fn project(&mut self) {
        let v = self.value();
        self.set(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(&[0, 3], vec![]).is_err());
    }

    #[test]
    fn grad_starts_zeroed() {
        let mut t = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(t.grad(), &[0.0; 3]);
        t.grad_mut()[1] = 5.0;
        t.zero_grad();
        assert_eq!(t.grad(), &[0.0; 3]);
    }

    #[test]
    fn dilation_bounds() {
        assert!(DilationParam::new(0.5, 2.0).is_err());
        assert!(DilationParam::new(2.5, 2.0).is_err());
        assert!(DilationParam::new(1.0, 1.0).is_err());
        let mut d = DilationParam::new(1.2, 2.0).unwrap();
        d.set(0.7);
        assert_eq!(d.value(), 1.0);
        d.set(9.0);
        assert_eq!(d.value(), 2.0);
    }
}
