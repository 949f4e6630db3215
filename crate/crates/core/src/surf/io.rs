//! Feature CSV: `x,y,scale,strength,sign,label,d0..d35`.
//!
//! Floats are written with 17 significant digits so a write/read cycle is
//! exact.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{Descriptor36, Feature, InterestPoint, DESCRIPTOR_LEN};

#[derive(Debug, Error)]
pub enum FeatureCsvError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
}

pub fn header() -> Vec<String> {
    let mut h: Vec<String> = ["x", "y", "scale", "strength", "sign", "label"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..DESCRIPTOR_LEN).map(|i| format!("d{i}")));
    h
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_features_csv(features: &[Feature], out: impl Write) -> Result<(), FeatureCsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header())?;
    for f in features {
        let mut rec = vec![
            fmt_f64(f.point.x),
            fmt_f64(f.point.y),
            fmt_f64(f.point.scale),
            fmt_f64(f.point.strength),
            if f.point.laplacian_positive { "1" } else { "0" }.to_string(),
            f.label.to_string(),
        ];
        rec.extend(f.desc.0.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv(input: impl Read) -> Result<Vec<Feature>, FeatureCsvError> {
    let mut r = csv::Reader::from_reader(input);
    let expected = header();
    let got: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    if got != expected {
        return Err(FeatureCsvError::Header(got.join(",")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let num = |k: usize| -> Result<f64, FeatureCsvError> {
            rec[k].trim().parse::<f64>().map_err(|e| FeatureCsvError::Row {
                row,
                msg: format!("column {}: {e}", expected[k]),
            })
        };
        let sign = match rec[4].trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(FeatureCsvError::Row {
                    row,
                    msg: format!("bad sign {other:?}"),
                })
            }
        };
        let label: u8 = rec[5]
            .trim()
            .parse()
            .ok()
            .filter(|l| *l <= 3)
            .ok_or_else(|| FeatureCsvError::Row {
                row,
                msg: format!("bad label {:?}", &rec[5]),
            })?;
        let mut d = [0.0; DESCRIPTOR_LEN];
        for (k, slot) in d.iter_mut().enumerate() {
            *slot = num(6 + k)?;
        }
        out.push(Feature {
            point: InterestPoint {
                x: num(0)?,
                y: num(1)?,
                scale: num(2)?,
                strength: num(3)?,
                laplacian_positive: sign,
            },
            desc: Descriptor36(d),
            label,
            membership: None,
        });
    }
    Ok(out)
}

pub fn write_features(features: &[Feature], path: impl AsRef<Path>) -> Result<(), FeatureCsvError> {
    let file = std::fs::File::create(path)?;
    write_features_csv(features, std::io::BufWriter::new(file))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<Feature>, FeatureCsvError> {
    read_features_csv(std::io::BufReader::new(std::fs::File::open(path)?))
}
