//! Gray-mapped QPSK with root-raised-cosine pulse shaping.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{BitString, ComplexSignal, DspError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpskParams {
    /// Samples per symbol.
    pub oversampling: usize,
    pub rolloff: f64,
    /// Half-length of the pulse in symbols.
    pub rrc_span: usize,
}

impl Default for QpskParams {
    fn default() -> Self {
        Self {
            oversampling: 16,
            rolloff: 0.5,
            rrc_span: 8,
        }
    }
}

impl QpskParams {
    pub fn validate(&self) -> Result<(), DspError> {
        if self.oversampling < 2 {
            return Err(DspError::InvalidParams("oversampling must be at least 2".into()));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(DspError::InvalidParams("rolloff must be in (0, 1]".into()));
        }
        if self.rrc_span == 0 {
            return Err(DspError::InvalidParams("rrc_span must be positive".into()));
        }
        Ok(())
    }

    pub fn num_taps(&self) -> usize {
        2 * self.rrc_span * self.oversampling + 1
    }

    /// Samples produced for `n_symbols` symbols, filter tails included.
    pub fn waveform_len(&self, n_symbols: usize) -> usize {
        n_symbols * self.oversampling + 2 * self.rrc_span * self.oversampling
    }

    /// Shortest signal [`qpsk_demodulate`] accepts for `n_symbols` symbols.
    pub fn min_demod_len(&self, n_symbols: usize) -> usize {
        if n_symbols == 0 {
            0
        } else {
            (n_symbols - 1) * self.oversampling + self.num_taps()
        }
    }
}

/// Root-raised-cosine taps at `t = n/sps − span` symbols, scaled so that the
/// energy `Σh²` equals the oversampling factor. With that scaling a stream of
/// unit-modulus symbols has unit mean power per sample.
pub fn rrc_taps(p: &QpskParams) -> Vec<f64> {
    let beta = p.rolloff;
    let sps = p.oversampling as f64;
    let raw: Vec<f64> = (0..p.num_taps())
        .map(|n| {
            let t = n as f64 / sps - p.rrc_span as f64;
            if t.abs() < 1e-12 {
                1.0 - beta + 4.0 * beta / PI
            } else if (1.0 - (4.0 * beta * t).powi(2)).abs() < 1e-12 {
                let a = PI / (4.0 * beta);
                beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos())
            } else {
                ((PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos())
                    / (PI * t * (1.0 - (4.0 * beta * t).powi(2)))
            }
        })
        .collect();
    let energy: f64 = raw.iter().map(|h| h * h).sum();
    let scale = (sps / energy).sqrt();
    raw.into_iter().map(|h| h * scale).collect()
}

/// `(b0, b1) → ((1 − 2·b0) + j(1 − 2·b1)) / √2`.
pub fn qpsk_map(bits: &BitString) -> Result<Vec<Complex64>, DspError> {
    if bits.len() % 2 != 0 {
        return Err(DspError::OddBitCount(bits.len()));
    }
    Ok(bits
        .as_slice()
        .chunks_exact(2)
        .map(|b| {
            Complex64::new(
                (1.0 - 2.0 * b[0] as f64) * FRAC_1_SQRT_2,
                (1.0 - 2.0 * b[1] as f64) * FRAC_1_SQRT_2,
            )
        })
        .collect())
}

/// Sign decision inverse to [`qpsk_map`]; a component of exactly zero
/// decides bit 0.
pub fn qpsk_decide(symbol: Complex64) -> [u8; 2] {
    [(symbol.re < 0.0) as u8, (symbol.im < 0.0) as u8]
}

/// Upsamples and pulse-shapes already mapped symbols.
pub fn shape_symbols(symbols: &[Complex64], p: &QpskParams) -> Result<ComplexSignal, DspError> {
    p.validate()?;
    let taps = rrc_taps(p);
    let mut out = vec![Complex64::new(0.0, 0.0); p.waveform_len(symbols.len())];
    for (k, &s) in symbols.iter().enumerate() {
        let start = k * p.oversampling;
        for (o, &h) in out[start..start + taps.len()].iter_mut().zip(&taps) {
            *o += s * h;
        }
    }
    ComplexSignal::new(out)
}

pub fn qpsk_waveform(bits: &BitString, p: &QpskParams) -> Result<ComplexSignal, DspError> {
    shape_symbols(&qpsk_map(bits)?, p)
}

/// Matched-filter outputs at the symbol instants, normalized by the pulse
/// energy so that an isolated symbol is recovered exactly.
pub fn matched_filter_symbols(
    sig: &ComplexSignal,
    p: &QpskParams,
    n_symbols: usize,
) -> Result<Vec<Complex64>, DspError> {
    p.validate()?;
    let needed = p.min_demod_len(n_symbols);
    if sig.len() < needed {
        return Err(DspError::SignalTooShort {
            needed,
            got: sig.len(),
        });
    }
    let taps = rrc_taps(p);
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let x = sig.samples();
    Ok((0..n_symbols)
        .map(|k| {
            let start = k * p.oversampling;
            let acc: Complex64 = x[start..start + taps.len()]
                .iter()
                .zip(&taps)
                .map(|(s, &h)| s * h)
                .sum();
            acc / energy
        })
        .collect())
}

/// Demodulates with known timing: symbol `k` is centered at sample
/// `k·sps + span·sps`.
pub fn qpsk_demodulate(sig: &ComplexSignal, p: &QpskParams, n_bits: usize) -> Result<BitString, DspError> {
    if n_bits % 2 != 0 {
        return Err(DspError::OddBitCount(n_bits));
    }
    let symbols = matched_filter_symbols(sig, p, n_bits / 2)?;
    Ok(BitString::from_trusted(
        symbols.into_iter().flat_map(qpsk_decide).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::mean_power;
    use crate::rng::Rng;

    #[test]
    fn mapping_convention() {
        let s = qpsk_map(&BitString::new(vec![0, 0, 1, 1, 0, 1]).unwrap()).unwrap();
        assert!((s[0] - Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((s[1] - Complex64::new(-FRAC_1_SQRT_2, -FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!((s[2] - Complex64::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)).norm() < 1e-15);
        assert!(matches!(
            qpsk_map(&BitString::new(vec![0, 1, 1]).unwrap()),
            Err(DspError::OddBitCount(3))
        ));
    }

    #[test]
    fn random_symbols_have_unit_modulus() {
        let mut rng = Rng::new(5);
        let bits = BitString::new(rng.bits(8)).unwrap();
        for s in qpsk_map(&bits).unwrap() {
            assert!((s.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn decision_rule() {
        assert_eq!(qpsk_decide(Complex64::new(0.9, -0.4)), [0, 1]);
        assert_eq!(qpsk_decide(Complex64::new(-0.1, 0.3)), [1, 0]);
        assert_eq!(qpsk_decide(Complex64::new(0.0, 0.0)), [0, 0]);
    }

    #[test]
    fn rrc_is_symmetric_with_scaled_energy() {
        for p in [
            QpskParams::default(),
            QpskParams {
                oversampling: 2,
                rolloff: 0.35,
                rrc_span: 6,
            },
        ] {
            let h = rrc_taps(&p);
            assert_eq!(h.len(), p.num_taps());
            for i in 0..h.len() {
                assert!((h[i] - h[h.len() - 1 - i]).abs() < 1e-12);
            }
            let e: f64 = h.iter().map(|v| v * v).sum();
            assert!((e - p.oversampling as f64).abs() < 1e-9);
            assert!(h.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn single_symbol_recovered_by_matched_filter() {
        let p = QpskParams::default();
        let bits = BitString::new(vec![1, 0]).unwrap();
        let sig = qpsk_waveform(&bits, &p).unwrap();
        assert_eq!(sig.len(), p.oversampling + 2 * p.rrc_span * p.oversampling);
        let sym = matched_filter_symbols(&sig, &p, 1).unwrap()[0];
        let expected = Complex64::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        assert!((sym - expected).norm() < 1e-9);
    }

    #[test]
    fn constant_stream_has_unit_power_after_tail_trim() {
        let p = QpskParams::default();
        let bits = BitString::new(vec![0; 64]).unwrap();
        let sig = qpsk_waveform(&bits, &p).unwrap();
        let tail = p.rrc_span * p.oversampling;
        let body = ComplexSignal::new(sig.samples()[tail..sig.len() - tail].to_vec()).unwrap();
        let power = mean_power(&body).unwrap();
        assert!((power - 1.0).abs() < 0.05, "power {power}");
    }

    #[test]
    fn waveform_is_linear_in_symbols() {
        let p = QpskParams::default();
        let mut rng = Rng::new(11);
        let bits = BitString::new(rng.bits(20)).unwrap();
        let symbols = qpsk_map(&bits).unwrap();
        let alpha = -2.5;
        let scaled: Vec<_> = symbols.iter().map(|s| s * alpha).collect();
        let a = shape_symbols(&scaled, &p).unwrap();
        let b = qpsk_waveform(&bits, &p).unwrap().scaled(alpha);
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn noiseless_roundtrip() {
        let mut rng = Rng::new(1);
        for p in [
            QpskParams::default(),
            QpskParams {
                oversampling: 2,
                rolloff: 0.35,
                rrc_span: 6,
            },
        ] {
            let bits = BitString::new(rng.bits(2000)).unwrap();
            let sig = qpsk_waveform(&bits, &p).unwrap();
            assert_eq!(qpsk_demodulate(&sig, &p, bits.len()).unwrap(), bits);
        }
    }

    #[test]
    fn short_signal_is_rejected() {
        let p = QpskParams::default();
        let sig = ComplexSignal::zeros(10).unwrap();
        assert!(matches!(
            qpsk_demodulate(&sig, &p, 4),
            Err(DspError::SignalTooShort { .. })
        ));
    }
}
