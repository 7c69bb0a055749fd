//! OFDM with QPSK subcarriers.
//!
//! Active subcarriers sit symmetrically around DC, which is left empty, and
//! are filled in ascending frequency order `−A/2, …, −1, +1, …, +A/2`. Both
//! transforms are scaled by `1/√N`, so time and frequency powers agree.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::qpsk::{qpsk_decide, qpsk_map};
use super::{BitString, ComplexSignal, DspError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmParams {
    pub fft_size: usize,
    pub cp_len: usize,
    pub active_subcarriers: usize,
}

impl Default for OfdmParams {
    fn default() -> Self {
        Self {
            fft_size: 64,
            cp_len: 16,
            active_subcarriers: 48,
        }
    }
}

impl OfdmParams {
    pub fn validate(&self) -> Result<(), DspError> {
        let n = self.fft_size;
        if n < 4 || !n.is_power_of_two() {
            return Err(DspError::InvalidParams("fft_size must be a power of two ≥ 4".into()));
        }
        if self.cp_len == 0 || self.cp_len >= n {
            return Err(DspError::InvalidParams("cp_len must be in [1, fft_size)".into()));
        }
        let a = self.active_subcarriers;
        if a == 0 || a % 2 != 0 || a > n - 2 {
            return Err(DspError::InvalidParams(
                "active_subcarriers must be even, positive and leave DC unused".into(),
            ));
        }
        Ok(())
    }

    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.active_subcarriers
    }

    /// FFT bin of each active subcarrier, in allocation order.
    pub fn active_bins(&self) -> Vec<usize> {
        let half = self.active_subcarriers / 2;
        let n = self.fft_size;
        (0..half).map(|i| n - half + i).chain(1..=half).collect()
    }
}

/// Builds the time-domain waveform from subcarrier symbols
/// (`n_symbols · active_subcarriers` of them, symbol-major).
pub fn ofdm_modulate_symbols(
    symbols: &[Complex64],
    p: &OfdmParams,
    n_symbols: usize,
) -> Result<ComplexSignal, DspError> {
    p.validate()?;
    let expected = n_symbols * p.active_subcarriers;
    if symbols.len() != expected || n_symbols == 0 {
        return Err(DspError::LengthMismatch {
            expected,
            got: symbols.len(),
        });
    }
    let n = p.fft_size;
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let norm = 1.0 / (n as f64).sqrt();
    let bins = p.active_bins();
    let mut out = Vec::with_capacity(n_symbols * p.symbol_len());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for chunk in symbols.chunks_exact(p.active_subcarriers) {
        buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (&bin, &s) in bins.iter().zip(chunk) {
            buf[bin] = s;
        }
        ifft.process(&mut buf);
        buf.iter_mut().for_each(|v| *v *= norm);
        out.extend_from_slice(&buf[n - p.cp_len..]);
        out.extend_from_slice(&buf);
    }
    ComplexSignal::new(out)
}

pub fn ofdm_modulate(bits: &BitString, p: &OfdmParams, n_symbols: usize) -> Result<ComplexSignal, DspError> {
    p.validate()?;
    let expected = n_symbols * p.bits_per_symbol();
    if bits.len() != expected {
        return Err(DspError::LengthMismatch {
            expected,
            got: bits.len(),
        });
    }
    ofdm_modulate_symbols(&qpsk_map(bits)?, p, n_symbols)
}

/// Strips the cyclic prefixes and returns the active-subcarrier values,
/// optionally divided by a known per-bin channel response.
pub fn ofdm_subcarrier_symbols(
    sig: &ComplexSignal,
    p: &OfdmParams,
    n_symbols: usize,
    channel: Option<&[Complex64]>,
) -> Result<Vec<Complex64>, DspError> {
    p.validate()?;
    let expected = n_symbols * p.symbol_len();
    if sig.len() != expected {
        return Err(DspError::LengthMismatch {
            expected,
            got: sig.len(),
        });
    }
    if let Some(h) = channel {
        if h.len() != p.fft_size {
            return Err(DspError::LengthMismatch {
                expected: p.fft_size,
                got: h.len(),
            });
        }
    }
    let n = p.fft_size;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let norm = 1.0 / (n as f64).sqrt();
    let bins = p.active_bins();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(n_symbols * p.active_subcarriers);
    for block in sig.samples().chunks_exact(p.symbol_len()) {
        buf.copy_from_slice(&block[p.cp_len..]);
        fft.process(&mut buf);
        for &bin in &bins {
            let mut v = buf[bin] * norm;
            if let Some(h) = channel {
                v /= h[bin];
            }
            out.push(v);
        }
    }
    Ok(out)
}

pub fn ofdm_demodulate(sig: &ComplexSignal, p: &OfdmParams, n_symbols: usize) -> Result<BitString, DspError> {
    ofdm_demodulate_equalized(sig, p, n_symbols, None)
}

/// [`ofdm_demodulate`] with a known channel removed per subcarrier before the
/// QPSK decisions.
pub fn ofdm_demodulate_equalized(
    sig: &ComplexSignal,
    p: &OfdmParams,
    n_symbols: usize,
    channel: Option<&[Complex64]>,
) -> Result<BitString, DspError> {
    let symbols = ofdm_subcarrier_symbols(sig, p, n_symbols, channel)?;
    Ok(BitString::from_trusted(symbols.into_iter().flat_map(qpsk_decide).collect()))
}

/// Per-bin response of a pure delay of `delay` samples: `exp(−j2πkδ/N)`.
pub fn delay_response(p: &OfdmParams, delay: usize) -> Vec<Complex64> {
    let n = p.fft_size as f64;
    (0..p.fft_size)
        .map(|k| Complex64::from_polar(1.0, -std::f64::consts::TAU * k as f64 * delay as f64 / n))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::mean_power;
    use crate::rng::Rng;

    fn random_bits(rng: &mut Rng, n: usize) -> BitString {
        BitString::new(rng.bits(n)).unwrap()
    }

    #[test]
    fn allocation_is_symmetric_without_dc() {
        let p = OfdmParams::default();
        let bins = p.active_bins();
        assert_eq!(bins.len(), 48);
        assert!(!bins.contains(&0));
        assert_eq!(bins[0], 40);
        assert_eq!(bins[47], 24);
    }

    #[test]
    fn null_symbols_give_zero_waveform() {
        let p = OfdmParams::default();
        let zeros = vec![Complex64::new(0.0, 0.0); 2 * p.active_subcarriers];
        let sig = ofdm_modulate_symbols(&zeros, &p, 2).unwrap();
        assert!(sig.samples().iter().all(|s| s.norm() == 0.0));
        assert_eq!(sig.len(), 2 * p.symbol_len());
    }

    #[test]
    fn single_subcarrier_matches_dft_definition() {
        let p = OfdmParams::default();
        let n = p.fft_size;
        for (slot, &bin) in p.active_bins().iter().enumerate() {
            let s = Complex64::new(0.3, -1.1);
            let mut syms = vec![Complex64::new(0.0, 0.0); p.active_subcarriers];
            syms[slot] = s;
            let sig = ofdm_modulate_symbols(&syms, &p, 1).unwrap();
            for (i, &v) in sig.samples()[p.cp_len..].iter().enumerate() {
                let phase = std::f64::consts::TAU * (bin * i) as f64 / n as f64;
                let expected = s * Complex64::from_polar(1.0, phase) / (n as f64).sqrt();
                assert!((v - expected).norm() < 1e-12);
            }
            // cyclic prefix is the tail
            assert_eq!(&sig.samples()[..p.cp_len], &sig.samples()[n..]);
        }
    }

    #[test]
    fn roundtrip_exact() {
        let p = OfdmParams::default();
        let mut rng = Rng::new(77);
        for _ in 0..100 {
            let n_sym = 1 + rng.below(4);
            let bits = random_bits(&mut rng, n_sym * p.bits_per_symbol());
            let sig = ofdm_modulate(&bits, &p, n_sym).unwrap();
            assert_eq!(ofdm_demodulate(&sig, &p, n_sym).unwrap(), bits);
        }
    }

    #[test]
    fn cyclic_delay_within_prefix_is_equalized() {
        let p = OfdmParams::default();
        let mut rng = Rng::new(4);
        let bits = random_bits(&mut rng, p.bits_per_symbol());
        let sig = ofdm_modulate(&bits, &p, 1).unwrap();
        for delay in 1..p.cp_len {
            let len = sig.len();
            let delayed: Vec<_> = (0..len).map(|i| sig.samples()[(i + len - delay) % len]).collect();
            let delayed = ComplexSignal::new(delayed).unwrap();
            let h = delay_response(&p, delay);
            let out = ofdm_demodulate_equalized(&delayed, &p, 1, Some(&h)).unwrap();
            assert_eq!(out, bits, "delay {delay}");
        }
    }

    #[test]
    fn zero_waveform_decides_zero_bits() {
        let p = OfdmParams::default();
        let sig = ComplexSignal::zeros(p.symbol_len()).unwrap();
        let bits = ofdm_demodulate(&sig, &p, 1).unwrap();
        assert!(bits.as_slice().iter().all(|&b| b == 0));
    }

    #[test]
    fn parseval() {
        let p = OfdmParams::default();
        let mut rng = Rng::new(8);
        let bits = random_bits(&mut rng, p.bits_per_symbol());
        let syms = qpsk_map(&bits).unwrap();
        let sig = ofdm_modulate_symbols(&syms, &p, 1).unwrap();
        let body = ComplexSignal::new(sig.samples()[p.cp_len..].to_vec()).unwrap();
        let time_power = mean_power(&body).unwrap() * p.fft_size as f64;
        let freq_power: f64 = syms.iter().map(|s| s.norm_sqr()).sum();
        assert!((time_power - freq_power).abs() < 1e-10);
    }

    #[test]
    fn length_errors() {
        let p = OfdmParams::default();
        let bits = BitString::new(vec![0; 10]).unwrap();
        assert!(matches!(ofdm_modulate(&bits, &p, 1), Err(DspError::LengthMismatch { .. })));
        let sig = ComplexSignal::zeros(81).unwrap();
        assert!(matches!(ofdm_demodulate(&sig, &p, 1), Err(DspError::LengthMismatch { .. })));
        let bad = OfdmParams {
            fft_size: 60,
            ..p
        };
        assert!(bad.validate().is_err());
    }
}
