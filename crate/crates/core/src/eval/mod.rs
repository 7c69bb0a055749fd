//! BER and MSE versus SINR, the SINR at which a BER curve reaches a target,
//! and the percent-improvement figure derived from two such SINRs.

mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::MixtureExample;
use crate::dsp::ComplexSignal;
use crate::error::{Error, Result};
use crate::wavenet::WaveNetModel;

pub use report::{
    curve_csv, emit_report, format_g, parse_curve_csv, Comparison, ComparisonSummary, CurveSummary, EvalResult,
    ReportSummary,
};

/// Anything that turns a mixture into an SOI estimate.
pub trait Separator: Sync {
    fn label(&self) -> &str;
    fn separate(&self, example: &MixtureExample) -> Result<ComplexSignal>;
}

/// Returns the true SOI.
pub struct OracleSeparator;

impl Separator for OracleSeparator {
    fn label(&self) -> &str {
        "oracle"
    }

    fn separate(&self, example: &MixtureExample) -> Result<ComplexSignal> {
        Ok(example.soi.clone())
    }
}

/// Returns the mixture unchanged.
pub struct NullSeparator;

impl Separator for NullSeparator {
    fn label(&self) -> &str {
        "null"
    }

    fn separate(&self, example: &MixtureExample) -> Result<ComplexSignal> {
        Ok(example.mixture.clone())
    }
}

pub struct ModelSeparator {
    pub label: String,
    pub model: WaveNetModel,
}

impl Separator for ModelSeparator {
    fn label(&self) -> &str {
        &self.label
    }

    fn separate(&self, example: &MixtureExample) -> Result<ComplexSignal> {
        let out = self.model.forward(&example.mixture.to_tensor())?;
        Ok(ComplexSignal::from_tensor(&out)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub sinr_db: f64,
    pub ber: f64,
    pub bit_errors: usize,
    pub n_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub label: String,
    pub points: Vec<BerPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsePoint {
    pub sinr_db: f64,
    /// Mean `|estimate − soi|²` per complex sample, averaged over examples.
    pub mse: f64,
    pub n_examples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCurve {
    pub label: String,
    pub points: Vec<MsePoint>,
}

impl MseCurve {
    /// Unweighted mean over levels.
    pub fn mean(&self) -> f64 {
        self.points.iter().map(|p| p.mse).sum::<f64>() / self.points.len() as f64
    }
}

/// Distinct `sinr_db` values of `examples`, ascending.
pub fn sinr_levels(examples: &[MixtureExample]) -> Vec<f64> {
    let mut levels: Vec<f64> = examples.iter().map(|e| e.sinr_db).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
}

struct ExampleScore {
    bit_errors: usize,
    n_bits: usize,
    mse: f64,
}

fn score(separator: &dyn Separator, e: &MixtureExample) -> Result<ExampleScore> {
    let est = separator.separate(e)?;
    if est.len() != e.soi.len() {
        return Err(Error::Eval(format!(
            "{} returned {} samples for a {}-sample example",
            separator.label(),
            est.len(),
            e.soi.len()
        )));
    }
    let bits = e.soi_kind.demodulate(&est)?;
    let mse = est
        .samples()
        .iter()
        .zip(e.soi.samples())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / est.len() as f64;
    Ok(ExampleScore {
        bit_errors: bits.count_errors(&e.bits)?,
        n_bits: e.bits.len(),
        mse,
    })
}

/// Curves over the given levels; a level without examples is an error.
pub fn evaluate_levels(
    separator: &dyn Separator,
    examples: &[MixtureExample],
    levels: &[f64],
) -> Result<(BerCurve, MseCurve)> {
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Eval("levels must be strictly increasing".into()));
    }
    for &level in levels {
        if !examples.iter().any(|e| e.sinr_db == level) {
            return Err(Error::Eval(format!("no test examples at {level} dB")));
        }
    }
    let scores: Vec<ExampleScore> = examples.par_iter().map(|e| score(separator, e)).collect::<Result<_>>()?;
    let label = separator.label().to_string();
    let mut ber = BerCurve {
        label: label.clone(),
        points: Vec::new(),
    };
    let mut mse = MseCurve {
        label,
        points: Vec::new(),
    };
    for &level in levels {
        let at: Vec<&ExampleScore> = examples
            .iter()
            .zip(&scores)
            .filter(|(e, _)| e.sinr_db == level)
            .map(|(_, s)| s)
            .collect();
        let bit_errors = at.iter().map(|s| s.bit_errors).sum();
        let n_bits: usize = at.iter().map(|s| s.n_bits).sum();
        if n_bits == 0 {
            return Err(Error::Eval(format!("no bits at {level} dB")));
        }
        ber.points.push(BerPoint {
            sinr_db: level,
            ber: bit_errors as f64 / n_bits as f64,
            bit_errors,
            n_bits,
        });
        mse.points.push(MsePoint {
            sinr_db: level,
            mse: at.iter().map(|s| s.mse).sum::<f64>() / at.len() as f64,
            n_examples: at.len(),
        });
    }
    Ok((ber, mse))
}

/// Curves over every SINR level present in `examples`.
pub fn evaluate(separator: &dyn Separator, examples: &[MixtureExample]) -> Result<(BerCurve, MseCurve)> {
    if examples.is_empty() {
        return Err(Error::Eval("test set is empty".into()));
    }
    evaluate_levels(separator, examples, &sinr_levels(examples))
}

/// Lowest SINR at which `curve` first drops to `target_ber`, or `None` if it
/// never does.
///
/// Between the bracketing points the crossing is interpolated linearly in
/// `(sinr_db, log10 ber)`, with zero BER replaced by `1/(2·n_bits)` for the
/// logarithm only. If that replacement lies above the target the crossing is
/// placed at the zero-BER point itself.
pub fn sinr_at_target_ber(curve: &BerCurve, target_ber: f64) -> Result<Option<f64>> {
    if !(target_ber > 0.0 && target_ber < 1.0) {
        return Err(Error::Eval(format!("target BER must lie in (0, 1), got {target_ber}")));
    }
    let pts = &curve.points;
    if pts.len() < 2 {
        return Err(Error::Eval(format!("curve `{}` needs at least 2 points", curve.label)));
    }
    let log_ber = |p: &BerPoint| {
        let b = if p.ber == 0.0 { 0.5 / p.n_bits as f64 } else { p.ber };
        b.log10()
    };
    if pts[0].ber <= target_ber {
        return Ok(Some(pts[0].sinr_db));
    }
    for w in pts.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.ber > target_ber && b.ber <= target_ber {
            if b.ber == target_ber {
                return Ok(Some(b.sinr_db));
            }
            let (la, lb, lt) = (log_ber(a), log_ber(b), target_ber.log10());
            let frac = if la > lb { ((la - lt) / (la - lb)).clamp(0.0, 1.0) } else { 1.0 };
            return Ok(Some(a.sinr_db + frac * (b.sinr_db - a.sinr_db)));
        }
    }
    Ok(None)
}

/// `100·(base − new)/base`, with both SINRs in dB.
pub fn percent_improvement(base_sinr_db: f64, new_sinr_db: f64) -> Result<f64> {
    if !(base_sinr_db > 0.0) || !new_sinr_db.is_finite() || !base_sinr_db.is_finite() {
        return Err(Error::Eval(format!(
            "percent improvement needs a positive finite baseline SINR, got {base_sinr_db} dB"
        )));
    }
    Ok(100.0 * (base_sinr_db - new_sinr_db) / base_sinr_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_examples, DatasetSpec, Split};

    fn curve(points: &[(f64, f64)]) -> BerCurve {
        BerCurve {
            label: "c".into(),
            points: points
                .iter()
                .map(|&(s, b)| BerPoint {
                    sinr_db: s,
                    ber: b,
                    bit_errors: (b * 1e6) as usize,
                    n_bits: 1_000_000,
                })
                .collect(),
        }
    }

    #[test]
    fn crossing_interpolates_in_log_domain() {
        let c = curve(&[(5.0, 1e-2), (10.0, 1e-4)]);
        assert!((sinr_at_target_ber(&c, 1e-3).unwrap().unwrap() - 7.5).abs() < 1e-12);
        let c = curve(&[(0.0, 0.3), (5.0, 0.2)]);
        assert_eq!(sinr_at_target_ber(&c, 1e-3).unwrap(), None);
        let c = curve(&[(0.0, 0.3), (5.0, 1e-3), (10.0, 0.0)]);
        assert_eq!(sinr_at_target_ber(&c, 1e-3).unwrap(), Some(5.0));
        assert!(sinr_at_target_ber(&curve(&[(0.0, 0.1)]), 1e-3).is_err());
        assert!(sinr_at_target_ber(&c, 0.0).is_err());
    }

    #[test]
    fn zero_ber_is_clamped_for_interpolation() {
        let mut c = curve(&[(0.0, 1e-1), (10.0, 0.0)]);
        c.points[1].n_bits = 500; // clamp 1e-3
        let s = sinr_at_target_ber(&c, 1e-2).unwrap().unwrap();
        assert!((s - 5.0).abs() < 1e-12);
        // the clamp lies above the target: crossing at the zero point
        assert_eq!(sinr_at_target_ber(&c, 1e-4).unwrap(), Some(10.0));
    }

    #[test]
    fn improvement_figures() {
        assert!((percent_improvement(15.0, 10.0).unwrap() - 33.333333333333336).abs() < 1e-9);
        assert!((percent_improvement(17.0, 7.0).unwrap() - 58.8235294117647).abs() < 1e-9);
        assert_eq!(percent_improvement(12.0, 12.0).unwrap(), 0.0);
        assert!(percent_improvement(0.0, 1.0).is_err());
        assert!(percent_improvement(-3.0, -5.0).is_err());
    }

    fn small_test_set() -> Vec<MixtureExample> {
        generate_examples(&DatasetSpec {
            n_segments: 2,
            examples_per_segment: 3,
            sinr_grid_db: vec![-15.0, 0.0, 15.0],
            example_len: 1024,
            split: Split::Test,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn oracle_and_null_models() {
        let test = small_test_set();
        let (ber, mse) = evaluate(&OracleSeparator, &test).unwrap();
        assert!(ber.points.iter().all(|p| p.ber == 0.0));
        assert!(mse.points.iter().all(|p| p.mse == 0.0));
        let per_example = crate::dsp::SoiKind::Qpsk.bits_for_len(1024).unwrap();
        assert!(ber.points.iter().all(|p| p.n_bits == 2 * per_example));
        let (ber, mse) = evaluate(&NullSeparator, &test).unwrap();
        assert!(ber.points[0].ber > ber.points[2].ber);
        // null MSE is the interference power: 10^(−sinr/10) for a unit-power SOI
        let soi_power = crate::dsp::mean_power(&test[0].soi).unwrap();
        let expected = soi_power * 10f64.powf(1.5);
        let level0: Vec<_> = test.iter().filter(|e| e.sinr_db == -15.0).collect();
        let mean_soi: f64 = level0.iter().map(|e| crate::dsp::mean_power(&e.soi).unwrap()).sum::<f64>() / 2.0;
        assert!((mse.points[0].mse - mean_soi * 10f64.powf(1.5)).abs() < 1e-9 * expected);
    }

    #[test]
    fn empty_levels_are_errors() {
        let test = small_test_set();
        assert!(matches!(
            evaluate_levels(&NullSeparator, &test, &[-15.0, 3.0]),
            Err(Error::Eval(_))
        ));
        assert!(evaluate(&NullSeparator, &[]).is_err());
    }
}
