use num_complex::Complex64;

use super::DspError;
use crate::autodiff::Tensor;

/// Complex baseband samples in normalized discrete time.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal(Vec<Complex64>);

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>) -> Result<Self, DspError> {
        if samples.is_empty() {
            return Err(DspError::EmptySignal);
        }
        if samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(DspError::NonFinite);
        }
        Ok(Self(samples))
    }

    pub fn zeros(len: usize) -> Result<Self, DspError> {
        Self::new(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.0
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|s| s * a).collect())
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self, DspError> {
        if self.len() != other.len() {
            return Err(DspError::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(Self(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect()))
    }

    pub fn add(&self, other: &Self) -> Result<Self, DspError> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, DspError> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `[2, T]` tensor with I in row 0 and Q in row 1.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(2 * self.len());
        data.extend(self.0.iter().map(|s| s.re));
        data.extend(self.0.iter().map(|s| s.im));
        Tensor::new(&[2, self.len()], data).expect("non-empty signal")
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self, DspError> {
        let &[2, len] = t.shape() else {
            return Err(DspError::InvalidParams(format!(
                "expected a [2, T] tensor, got {:?}",
                t.shape()
            )));
        };
        let (i, q) = t.data().split_at(len);
        Self::new(i.iter().zip(q).map(|(&re, &im)| Complex64::new(re, im)).collect())
    }
}

pub fn mean_power(sig: &ComplexSignal) -> Result<f64, DspError> {
    if sig.is_empty() {
        return Err(DspError::EmptySignal);
    }
    Ok(sig.samples().iter().map(|s| s.norm_sqr()).sum::<f64>() / sig.len() as f64)
}

/// `10·log10(P_soi / P_interference)`.
pub fn measured_sinr_db(soi: &ComplexSignal, interference: &ComplexSignal) -> Result<f64, DspError> {
    let ps = mean_power(soi)?;
    let pi = mean_power(interference)?;
    if pi == 0.0 || ps == 0.0 {
        return Err(DspError::ZeroPower);
    }
    Ok(10.0 * (ps / pi).log10())
}

/// Scales `interference` so that `soi + scale·interference` has exactly the
/// requested SINR. Returns the mixture and the scale.
pub fn mix_at_sinr(
    soi: &ComplexSignal,
    interference: &ComplexSignal,
    sinr_db: f64,
) -> Result<(ComplexSignal, f64), DspError> {
    if soi.len() != interference.len() {
        return Err(DspError::LengthMismatch {
            expected: soi.len(),
            got: interference.len(),
        });
    }
    if !sinr_db.is_finite() {
        return Err(DspError::InvalidParams(format!("sinr_db must be finite, got {sinr_db}")));
    }
    let ps = mean_power(soi)?;
    let pi = mean_power(interference)?;
    if ps == 0.0 || pi == 0.0 {
        return Err(DspError::ZeroPower);
    }
    let scale = (ps / (pi * 10f64.powf(sinr_db / 10.0))).sqrt();
    let mixture = soi.add(&interference.scaled(scale))?;
    Ok((mixture, scale))
}
