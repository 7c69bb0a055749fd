use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{percent_improvement, sinr_at_target_ber, BerCurve, MseCurve};
use crate::error::{Error, Result};

/// C's `%.12g`.
pub fn format_g(x: f64) -> String {
    const PRECISION: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    // rounding to 12 significant digits may carry into the next decade, so
    // take the exponent from the rounded form
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= PRECISION {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `sinr_db,metric,n` rows.
pub fn curve_csv(rows: &[(f64, f64, usize)]) -> String {
    let mut out = String::from("sinr_db,metric,n\n");
    for &(s, m, n) in rows {
        out.push_str(&format!("{},{},{}\n", format_g(s), format_g(m), n));
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<(f64, f64, usize)>> {
    let mut lines = text.lines();
    if lines.next() != Some("sinr_db,metric,n") {
        return Err(Error::Eval("CSV header must be `sinr_db,metric,n`".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Eval(format!("CSV line {}: cannot parse {line:?}", i + 2));
            let mut f = line.split(',');
            let (Some(s), Some(m), Some(n), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(bad());
            };
            Ok((
                s.parse().map_err(|_| bad())?,
                m.parse().map_err(|_| bad())?,
                n.parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

/// Both curves of one separator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub ber: BerCurve,
    pub mse: MseCurve,
}

impl EvalResult {
    pub fn label(&self) -> &str {
        &self.ber.label
    }
}

/// A baseline/candidate pair, by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub candidate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub label: String,
    pub sinr_at_target_db: Option<f64>,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub baseline: String,
    pub candidate: String,
    pub baseline_sinr_db: Option<f64>,
    pub candidate_sinr_db: Option<f64>,
    /// `null` when either curve misses the target or the baseline SINR is
    /// not positive; `note` says which.
    pub improvement_pct: Option<f64>,
    /// `100·(baseline − candidate)/baseline` over grid-averaged MSE.
    pub mse_improvement_pct: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub target_ber: f64,
    pub curves: Vec<CurveSummary>,
    pub comparisons: Vec<ComparisonSummary>,
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn summarize(results: &[EvalResult], comparisons: &[Comparison], target_ber: f64) -> Result<ReportSummary> {
    let find = |label: &str| {
        results
            .iter()
            .find(|r| r.label() == label)
            .ok_or_else(|| Error::Eval(format!("no curve labelled `{label}`")))
    };
    let curves = results
        .iter()
        .map(|r| {
            Ok(CurveSummary {
                label: r.label().to_string(),
                sinr_at_target_db: sinr_at_target_ber(&r.ber, target_ber)?,
                mean_mse: r.mse.mean(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let comparisons = comparisons
        .iter()
        .map(|c| {
            let (base, cand) = (find(&c.baseline)?, find(&c.candidate)?);
            let bs = sinr_at_target_ber(&base.ber, target_ber)?;
            let cs = sinr_at_target_ber(&cand.ber, target_ber)?;
            let (improvement_pct, note) = match (bs, cs) {
                (Some(b), Some(n)) => match percent_improvement(b, n) {
                    Ok(p) => (Some(p), None),
                    Err(e) => (None, Some(e.to_string())),
                },
                (None, _) => (None, Some(format!("{} never reaches BER {target_ber}", c.baseline))),
                (_, None) => (None, Some(format!("{} never reaches BER {target_ber}", c.candidate))),
            };
            let (bm, cm) = (base.mse.mean(), cand.mse.mean());
            Ok(ComparisonSummary {
                baseline: c.baseline.clone(),
                candidate: c.candidate.clone(),
                baseline_sinr_db: bs,
                candidate_sinr_db: cs,
                improvement_pct,
                mse_improvement_pct: 100.0 * (bm - cm) / bm,
                note,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportSummary {
        target_ber,
        curves,
        comparisons,
    })
}

/// Writes `<label>.ber.csv` and `<label>.mse.csv` per result and
/// `summary.json` into `out_dir`.
pub fn emit_report(
    results: &[EvalResult],
    comparisons: &[Comparison],
    target_ber: f64,
    out_dir: &Path,
) -> Result<ReportSummary> {
    if results.is_empty() {
        return Err(Error::Eval("nothing to report".into()));
    }
    let summary = summarize(results, comparisons, target_ber)?;
    std::fs::create_dir_all(out_dir).map_err(Error::io(out_dir))?;
    for r in results {
        let stem = file_stem(r.label());
        let ber: Vec<_> = r.ber.points.iter().map(|p| (p.sinr_db, p.ber, p.n_bits)).collect();
        let mse: Vec<_> = r.mse.points.iter().map(|p| (p.sinr_db, p.mse, p.n_examples)).collect();
        for (suffix, rows) in [("ber", ber), ("mse", mse)] {
            let path = out_dir.join(format!("{stem}.{suffix}.csv"));
            std::fs::write(&path, curve_csv(&rows)).map_err(Error::io(&path))?;
        }
    }
    let path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&path, json + "\n").map_err(Error::io(&path))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{BerPoint, MsePoint};

    #[test]
    fn format_g_matches_printf() {
        // reference strings produced by C printf("%.12g")
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-15.0, "-15"),
            (0.1, "0.1"),
            (1e-3, "0.001"),
            (1e-4, "0.0001"),
            (1.5e-5, "1.5e-05"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (999999999999.5, "1e+12"),
            (1.0 / 3.0, "0.333333333333"),
            (2.0 / 3.0, "0.666666666667"),
            (33.333333333333336, "33.3333333333"),
            (6.02214076e23, "6.02214076e+23"),
            (-2.5e-300, "-2.5e-300"),
        ];
        for (x, s) in cases {
            assert_eq!(format_g(x), s, "{x:e}");
        }
    }

    #[test]
    fn csv_roundtrip() {
        let rows: Vec<_> = (0..11).map(|i| (-15.0 + 3.0 * i as f64, 0.1 / (i as f64 + 1.0), 5120)).collect();
        let text = curve_csv(&rows);
        assert_eq!(text.lines().count(), 12);
        let back = parse_curve_csv(&text).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() <= 1e-11 * a.1.abs());
            assert_eq!(a.2, b.2);
        }
        assert!(parse_curve_csv("x,y\n").is_err());
    }

    fn result(label: &str, cross: f64) -> EvalResult {
        // BER 1e-2 at cross−5 dB, 1e-4 at cross+5 dB: crosses 1e-3 at `cross`
        let ber = BerCurve {
            label: label.into(),
            points: vec![
                BerPoint { sinr_db: cross - 5.0, ber: 1e-2, bit_errors: 100, n_bits: 10_000 },
                BerPoint { sinr_db: cross + 5.0, ber: 1e-4, bit_errors: 1, n_bits: 10_000 },
            ],
        };
        let mse = MseCurve {
            label: label.into(),
            points: vec![MsePoint { sinr_db: 0.0, mse: cross, n_examples: 1 }],
        };
        EvalResult { ber, mse }
    }

    #[test]
    fn summary_reports_improvement() {
        let dir = tempfile::tempdir().unwrap();
        let results = [result("fixed", 15.0), result("learned", 10.0)];
        let cmp = [Comparison { baseline: "fixed".into(), candidate: "learned".into() }];
        let summary = emit_report(&results, &cmp, 1e-3, dir.path()).unwrap();
        let pct = summary.comparisons[0].improvement_pct.unwrap();
        assert!((pct - 33.33).abs() < 0.01);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert!((json["comparisons"][0]["improvement_pct"].as_f64().unwrap() - 33.333).abs() < 1e-3);
        assert!(dir.path().join("learned.ber.csv").exists());
        assert!(emit_report(&results, &[Comparison { baseline: "x".into(), candidate: "fixed".into() }], 1e-3, dir.path()).is_err());
    }
}
