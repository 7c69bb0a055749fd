//! Synthetic stand-ins for the two interference classes.
//!
//! * EMI: impulsive bursts on top of a linear chirp.
//! * Comm: a single-carrier QPSK signal at a different symbol rate from the
//!   signal of interest, with a carrier offset and phase. Everything about
//!   it is a function of the seed, so it can be demodulated exactly.

use num_complex::Complex64;

use super::qpsk::{matched_filter_symbols, qpsk_decide, qpsk_map, shape_symbols, QpskParams};
use super::{mean_power, BitString, ComplexSignal, DspError};
use crate::rng::{derive_seed, Rng};

const EMI_STREAM: u64 = 0x454d_49;
const COMM_STREAM: u64 = 0x434f_4d4d;

/// Probability that a burst starts at any sample outside a burst.
const BURST_START_PROB: f64 = 0.003;
const BURST_MEAN_LEN: f64 = 24.0;
/// Burst amplitude relative to the unit-amplitude chirp.
const BURST_AMPLITUDE: f64 = 4.0;

fn normalize(samples: Vec<Complex64>) -> ComplexSignal {
    let power = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / samples.len() as f64;
    let scale = if power > 0.0 { power.sqrt().recip() } else { 1.0 };
    ComplexSignal::new(samples.into_iter().map(|s| s * scale).collect())
        .expect("normalized surrogate is finite and non-empty")
}

/// Unit-power impulsive-plus-swept interference.
pub fn gen_emi_surrogate(seed: u64, length: usize) -> Result<ComplexSignal, DspError> {
    if length == 0 {
        return Err(DspError::EmptySignal);
    }
    let mut rng = Rng::new(derive_seed(seed, EMI_STREAM));
    let f0 = rng.uniform_in(-0.4, 0.4);
    let f1 = rng.uniform_in(-0.4, 0.4);
    let phi0 = rng.uniform_in(0.0, std::f64::consts::TAU);
    let sweep = (f1 - f0) / (2.0 * length as f64);

    let mut burst_left = 0u64;
    let samples = (0..length)
        .map(|n| {
            let t = n as f64;
            let phase = std::f64::consts::TAU * (f0 * t + sweep * t * t) + phi0;
            let mut s = Complex64::from_polar(1.0, phase);
            if burst_left == 0 && rng.bernoulli(BURST_START_PROB) {
                burst_left = rng.geometric(1.0 / BURST_MEAN_LEN);
            }
            if burst_left > 0 {
                let (a, b) = rng.gaussian_pair();
                s += Complex64::new(a, b) * (BURST_AMPLITUDE / std::f64::consts::SQRT_2);
                burst_left -= 1;
            }
            s
        })
        .collect();
    Ok(normalize(samples))
}

/// Parameters and payload of one comm-surrogate realization.
#[derive(Debug, Clone, PartialEq)]
pub struct CommSurrogate {
    pub params: QpskParams,
    /// Carrier offset in cycles per sample.
    pub cfo: f64,
    pub phase: f64,
    pub length: usize,
    pub bits: BitString,
}

impl CommSurrogate {
    pub const PARAMS: QpskParams = QpskParams {
        oversampling: 2,
        rolloff: 0.35,
        rrc_span: 6,
    };
    pub const MAX_CFO: f64 = 0.1;

    /// Symbols whose whole pulse fits in `length` samples (at least one).
    pub fn symbol_count(length: usize) -> usize {
        let p = Self::PARAMS;
        let tails = 2 * p.rrc_span * p.oversampling;
        (length.saturating_sub(tails) / p.oversampling).max(1)
    }

    pub fn from_seed(seed: u64, length: usize) -> Result<Self, DspError> {
        if length == 0 {
            return Err(DspError::EmptySignal);
        }
        let mut rng = Rng::new(derive_seed(seed, COMM_STREAM));
        let cfo = rng.uniform_in(-Self::MAX_CFO, Self::MAX_CFO);
        let phase = rng.uniform_in(0.0, std::f64::consts::TAU);
        let bits = BitString::from_trusted(rng.bits(2 * Self::symbol_count(length)));
        Ok(Self {
            params: Self::PARAMS,
            cfo,
            phase,
            length,
            bits,
        })
    }

    fn rotation(&self, n: usize) -> Complex64 {
        Complex64::from_polar(1.0, std::f64::consts::TAU * self.cfo * n as f64 + self.phase)
    }

    /// Modulates `bits` with this realization's carrier, fitted to `length`
    /// samples and scaled to unit power.
    pub fn synthesize(&self, bits: &BitString) -> Result<ComplexSignal, DspError> {
        if bits.len() != self.bits.len() {
            return Err(DspError::LengthMismatch {
                expected: self.bits.len(),
                got: bits.len(),
            });
        }
        let base = shape_symbols(&qpsk_map(bits)?, &self.params)?;
        let mut samples: Vec<Complex64> = base.into_samples();
        samples.resize(self.length, Complex64::new(0.0, 0.0));
        for (n, s) in samples.iter_mut().enumerate() {
            *s *= self.rotation(n);
        }
        Ok(normalize(samples))
    }

    pub fn signal(&self) -> ComplexSignal {
        self.synthesize(&self.bits).expect("own bits have the right length")
    }

    /// Removes the known carrier and slices every symbol.
    pub fn demodulate(&self, sig: &ComplexSignal) -> Result<BitString, DspError> {
        if sig.len() != self.length {
            return Err(DspError::LengthMismatch {
                expected: self.length,
                got: sig.len(),
            });
        }
        let n_symbols = self.bits.len() / 2;
        let needed = self.params.min_demod_len(n_symbols).max(self.length);
        let mut derotated: Vec<Complex64> = sig
            .samples()
            .iter()
            .enumerate()
            .map(|(n, s)| s * self.rotation(n).conj())
            .collect();
        derotated.resize(needed, Complex64::new(0.0, 0.0));
        let symbols = matched_filter_symbols(&ComplexSignal::new(derotated)?, &self.params, n_symbols)?;
        Ok(BitString::from_trusted(symbols.into_iter().flat_map(qpsk_decide).collect()))
    }
}

/// Unit-power comm interference for `seed`.
pub fn gen_comm_surrogate(seed: u64, length: usize) -> Result<ComplexSignal, DspError> {
    Ok(CommSurrogate::from_seed(seed, length)?.signal())
}

/// Kurtosis (fourth standardized moment) of the instantaneous power `|x|²`.
pub fn power_kurtosis(sig: &ComplexSignal) -> Result<f64, DspError> {
    let p: Vec<f64> = sig.samples().iter().map(|s| s.norm_sqr()).collect();
    let mean = mean_power(sig)?;
    let n = p.len() as f64;
    let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Ok(0.0);
    }
    Ok(p.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n / (var * var))
}
