//! Pattern export: CSV (primary, one row per sample) and a JSON mirror.
//! Output bytes are deterministic for identical inputs; floats carry nine
//! significant digits.

use crate::beamform::PatternSample;
use crate::error::{Error, Result};
use std::path::Path;

/// Export container format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::InvalidParameter(format!(
                "unknown export format `{other}`, expected csv or json"
            ))),
        }
    }
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else {
        "nan".to_string()
    }
}

/// Render samples as CSV with the fixed header
/// `zenith_deg,azimuth_deg,power_w,power_db_rel`.
pub fn pattern_to_csv(samples: &[PatternSample]) -> Result<String> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter(
            "refusing to export an empty sample list".into(),
        ));
    }
    let mut out = String::from("zenith_deg,azimuth_deg,power_w,power_db_rel\n");
    for s in samples {
        out.push_str(&fmt_float(s.zenith_deg));
        out.push(',');
        out.push_str(&fmt_float(s.azimuth_deg));
        out.push(',');
        out.push_str(&fmt_float(s.power_w));
        out.push(',');
        out.push_str(&fmt_float(s.power_db_rel));
        out.push('\n');
    }
    Ok(out)
}

/// Render samples as a JSON array mirroring the CSV fields. Non-finite
/// relative powers (an exact null in the pattern) map to JSON `null`.
pub fn pattern_to_json(samples: &[PatternSample]) -> Result<String> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter(
            "refusing to export an empty sample list".into(),
        ));
    }
    let mut out = String::from("[\n");
    for (i, s) in samples.iter().enumerate() {
        let db = if s.power_db_rel.is_finite() {
            fmt_float(s.power_db_rel)
        } else {
            "null".to_string()
        };
        out.push_str(&format!(
            "  {{\"zenith_deg\": {}, \"azimuth_deg\": {}, \"power_w\": {}, \"power_db_rel\": {}}}{}\n",
            fmt_float(s.zenith_deg),
            fmt_float(s.azimuth_deg),
            fmt_float(s.power_w),
            db,
            if i + 1 == samples.len() { "" } else { "," },
        ));
    }
    out.push_str("]\n");
    Ok(out)
}

/// Write samples to `path` in the requested format.
pub fn export_pattern(samples: &[PatternSample], path: &Path, format: ExportFormat) -> Result<()> {
    let text = match format {
        ExportFormat::Csv => pattern_to_csv(samples)?,
        ExportFormat::Json => pattern_to_json(samples)?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Read back a CSV produced by [`pattern_to_csv`].
pub fn parse_pattern_csv(text: &str) -> Result<Vec<PatternSample>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(0, "empty pattern file"))?;
    if header != "zenith_deg,azimuth_deg,power_w,power_db_rel" {
        return Err(Error::parse(1, format!("unexpected header `{header}`")));
    }
    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                line_no,
                format!("expected 4 fields, got {}", fields.len()),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            match s {
                "-inf" => Ok(f64::NEG_INFINITY),
                "inf" => Ok(f64::INFINITY),
                _ => s
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("`{s}` is not a number"))),
            }
        };
        samples.push(PatternSample {
            zenith_deg: parse(fields[0])?,
            azimuth_deg: parse(fields[1])?,
            power_w: parse(fields[2])?,
            power_db_rel: parse(fields[3])?,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(z: f64, p: f64, db: f64) -> PatternSample {
        PatternSample {
            zenith_deg: z,
            azimuth_deg: 0.0,
            power_w: p,
            power_db_rel: db,
        }
    }

    #[test]
    fn single_sample_csv() {
        let csv = pattern_to_csv(&[sample(0.0, 1e-9, 0.0)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "zenith_deg,azimuth_deg,power_w,power_db_rel");
        assert!(lines[1].ends_with(",0.00000000e0"), "{}", lines[1]);
    }

    #[test]
    fn empty_export_rejected() {
        assert!(pattern_to_csv(&[]).is_err());
        assert!(pattern_to_json(&[]).is_err());
    }

    #[test]
    fn csv_round_trip_is_tight() {
        let samples: Vec<PatternSample> = (0..50)
            .map(|i| {
                let z = -12.25 + i as f64 * 0.5;
                sample(z, 3.7e-11 * (1.0 + i as f64), -0.123456789 * i as f64)
            })
            .collect();
        let csv = pattern_to_csv(&samples).unwrap();
        let back = parse_pattern_csv(&csv).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert!((a.power_w - b.power_w).abs() <= 1e-8 * a.power_w.abs());
            assert!((a.zenith_deg - b.zenith_deg).abs() <= 1e-8 * a.zenith_deg.abs().max(1.0));
        }
    }

    #[test]
    fn deterministic_bytes() {
        let samples = vec![sample(1.5, 2.5e-10, -3.25), sample(2.0, 1.25e-10, -6.5)];
        assert_eq!(
            pattern_to_csv(&samples).unwrap(),
            pattern_to_csv(&samples).unwrap()
        );
        assert_eq!(
            pattern_to_json(&samples).unwrap(),
            pattern_to_json(&samples).unwrap()
        );
    }

    #[test]
    fn json_mirrors_fields_and_nulls_neg_inf() {
        let json = pattern_to_json(&[sample(0.0, 0.0, f64::NEG_INFINITY), sample(1.0, 1e-9, 0.0)])
            .unwrap();
        assert!(json.contains("\"power_db_rel\": null"), "{json}");
        assert!(json.contains("\"zenith_deg\": 1.00000000e0"), "{json}");
    }

    #[test]
    fn neg_inf_survives_csv_round_trip() {
        let csv = pattern_to_csv(&[sample(0.0, 0.0, f64::NEG_INFINITY)]).unwrap();
        let back = parse_pattern_csv(&csv).unwrap();
        assert_eq!(back[0].power_db_rel, f64::NEG_INFINITY);
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let r = export_pattern(
            &[sample(0.0, 1.0, 0.0)],
            Path::new("/nonexistent-dir/out.csv"),
            ExportFormat::Csv,
        );
        assert!(matches!(r, Err(Error::Io(_))));
    }
}
