//! Complex-baseband synthesis and recovery: QPSK and OFDM-QPSK modems,
//! interference surrogates, power measurement and exact-SINR mixing.
//!
//! Timing and carrier are known by construction; nothing here synchronizes.

mod ofdm;
mod qpsk;
mod signal;
mod surrogate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use num_complex::Complex64;
pub use ofdm::{
    delay_response, ofdm_demodulate, ofdm_demodulate_equalized, ofdm_modulate, ofdm_modulate_symbols,
    ofdm_subcarrier_symbols, OfdmParams,
};
pub use qpsk::{
    matched_filter_symbols, qpsk_decide, qpsk_demodulate, qpsk_map, qpsk_waveform, rrc_taps, shape_symbols,
    QpskParams,
};
pub use signal::{measured_sinr_db, mean_power, mix_at_sinr, ComplexSignal};
pub use surrogate::{gen_comm_surrogate, gen_emi_surrogate, power_kurtosis, CommSurrogate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("QPSK needs an even number of bits, got {0}")]
    OddBitCount(usize),
    #[error("signal too short: need {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("signal has zero power")]
    ZeroPower,
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal contains non-finite samples")]
    NonFinite,
    #[error("bit value {0} is not 0 or 1")]
    InvalidBit(u8),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// A sequence of bits stored one per byte.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn new(bits: Vec<u8>) -> Result<Self, DspError> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(DspError::InvalidBit(b));
        }
        Ok(Self(bits))
    }

    pub(crate) fn from_trusted(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    /// Positions where `self` and `reference` differ.
    pub fn count_errors(&self, reference: &BitString) -> Result<usize, DspError> {
        if self.len() != reference.len() {
            return Err(DspError::LengthMismatch {
                expected: reference.len(),
                got: self.len(),
            });
        }
        Ok(self.0.iter().zip(&reference.0).filter(|(a, b)| a != b).count())
    }

    /// Packs 8 bits per byte, least significant bit first.
    pub fn pack(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << i)))
            .collect()
    }

    pub fn unpack(bytes: &[u8], n_bits: usize) -> Result<Self, DspError> {
        if bytes.len() != n_bits.div_ceil(8) {
            return Err(DspError::LengthMismatch {
                expected: n_bits.div_ceil(8),
                got: bytes.len(),
            });
        }
        Ok(Self((0..n_bits).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect()))
    }
}

/// Modulation of the signal of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SoiKind {
    Qpsk,
    OfdmQpsk,
}

impl SoiKind {
    fn qpsk_symbols(len: usize) -> Result<usize, DspError> {
        let p = QpskParams::default();
        let tails = 2 * p.rrc_span * p.oversampling;
        if len < tails + p.oversampling {
            return Err(DspError::SignalTooShort {
                needed: tails + p.oversampling,
                got: len,
            });
        }
        Ok((len - tails) / p.oversampling)
    }

    fn ofdm_symbols(len: usize) -> Result<usize, DspError> {
        let p = OfdmParams::default();
        if len < p.symbol_len() {
            return Err(DspError::SignalTooShort {
                needed: p.symbol_len(),
                got: len,
            });
        }
        Ok(len / p.symbol_len())
    }

    /// Payload bits carried by a `len`-sample waveform with default params.
    pub fn bits_for_len(self, len: usize) -> Result<usize, DspError> {
        match self {
            SoiKind::Qpsk => Ok(2 * Self::qpsk_symbols(len)?),
            SoiKind::OfdmQpsk => Ok(Self::ofdm_symbols(len)? * OfdmParams::default().bits_per_symbol()),
        }
    }

    /// Modulates `bits` and zero-pads to exactly `len` samples.
    pub fn modulate(self, bits: &BitString, len: usize) -> Result<ComplexSignal, DspError> {
        let expected = self.bits_for_len(len)?;
        if bits.len() != expected {
            return Err(DspError::LengthMismatch {
                expected,
                got: bits.len(),
            });
        }
        let sig = match self {
            SoiKind::Qpsk => qpsk_waveform(bits, &QpskParams::default())?,
            SoiKind::OfdmQpsk => ofdm_modulate(bits, &OfdmParams::default(), Self::ofdm_symbols(len)?)?,
        };
        let mut samples = sig.into_samples();
        samples.resize(len, Complex64::new(0.0, 0.0));
        ComplexSignal::new(samples)
    }

    pub fn demodulate(self, sig: &ComplexSignal) -> Result<BitString, DspError> {
        let n_bits = self.bits_for_len(sig.len())?;
        match self {
            SoiKind::Qpsk => qpsk_demodulate(sig, &QpskParams::default(), n_bits),
            SoiKind::OfdmQpsk => {
                let p = OfdmParams::default();
                let n_sym = Self::ofdm_symbols(sig.len())?;
                let body = ComplexSignal::new(sig.samples()[..n_sym * p.symbol_len()].to_vec())?;
                ofdm_demodulate(&body, &p, n_sym)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn bit_validation_and_errors() {
        assert_eq!(BitString::new(vec![0, 2]), Err(DspError::InvalidBit(2)));
        let a = BitString::new(vec![0, 1, 1, 0]).unwrap();
        let b = BitString::new(vec![1, 1, 0, 0]).unwrap();
        assert_eq!(a.count_errors(&b).unwrap(), 2);
        assert!(a.count_errors(&BitString::default()).is_err());
    }

    #[test]
    fn packing_is_lsb_first() {
        let bits = BitString::new(vec![1, 0, 0, 0, 0, 0, 0, 0, 0, 1]).unwrap();
        assert_eq!(bits.pack(), vec![0x01, 0x02]);
        assert_eq!(BitString::unpack(&[0x01, 0x02], 10).unwrap(), bits);
    }

    #[test]
    fn soi_kinds_roundtrip_at_desk_length() {
        let mut rng = Rng::new(2);
        for kind in [SoiKind::Qpsk, SoiKind::OfdmQpsk] {
            let n = kind.bits_for_len(4096).unwrap();
            let bits = BitString::new(rng.bits(n)).unwrap();
            let sig = kind.modulate(&bits, 4096).unwrap();
            assert_eq!(sig.len(), 4096);
            assert_eq!(kind.demodulate(&sig).unwrap(), bits);
        }
        assert_eq!(SoiKind::Qpsk.bits_for_len(4096).unwrap(), 480);
        assert_eq!(SoiKind::OfdmQpsk.bits_for_len(4096).unwrap(), 51 * 96);
    }
}
