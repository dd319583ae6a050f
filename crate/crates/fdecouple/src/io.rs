//! CSV formats for measurements and assembled moments.

use std::path::{Path, PathBuf};

use fdecouple_core::point_index::PointIndex;
use fdecouple_core::sampling_geometry::SampleSet;
use fdecouple_core::signal_model::{FourierSample, MeasurementSet};
use fdecouple_core::Complex64;

/// Frequencies of an external file must match computed samples this closely.
pub const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("no measurement within {MATCH_TOL:e} of sample frequency {frequency:?}")]
    MissingFrequency { frequency: Vec<f64> },
}

fn header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|d| format!("s_{d}")).collect();
    h.push("re".into());
    h.push("im".into());
    h
}

/// Measurements indexed by frequency.
#[derive(Clone, Debug)]
pub struct MeasurementTable {
    index: PointIndex,
    values: Vec<Complex64>,
    pub dimension: usize,
}

impl MeasurementTable {
    pub fn from_samples(samples: &[FourierSample], dimension: usize) -> Result<Self, IoError> {
        let mut index = PointIndex::new(MATCH_TOL);
        let mut values = Vec::with_capacity(samples.len());
        for (row, s) in samples.iter().enumerate() {
            if s.frequency.len() != dimension {
                return Err(IoError::Row {
                    row,
                    message: format!("expected {dimension} coordinates"),
                });
            }
            if !index.insert(s.frequency.clone()) {
                return Err(IoError::Row {
                    row,
                    message: "duplicate frequency".into(),
                });
            }
            values.push(s.value);
        }
        Ok(Self { index, values, dimension })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values at the frequencies of `set`, failing on the first miss.
    pub fn measurements_for(&self, set: &SampleSet) -> Result<MeasurementSet, IoError> {
        let samples = set
            .frequencies
            .iter()
            .map(|s| {
                let k = self.index.find(s).ok_or_else(|| IoError::MissingFrequency { frequency: s.clone() })?;
                Ok(FourierSample {
                    frequency: s.clone(),
                    value: self.values[k],
                })
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        Ok(MeasurementSet {
            samples,
            noise_level: 0.0,
            seed: 0,
        })
    }
}

pub fn parse_measurements<R: std::io::Read>(reader: R, dimension: usize) -> Result<Vec<FourierSample>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let expected = header(dimension);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if found != expected {
        return Err(IoError::Row {
            row: 0,
            message: format!("header {found:?}, expected {expected:?}"),
        });
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nums = rec
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| IoError::Row {
                row: row + 1,
                message: "fields must be finite numbers".into(),
            })?;
        out.push(FourierSample {
            frequency: nums[..dimension].to_vec(),
            value: Complex64::new(nums[dimension], nums[dimension + 1]),
        });
    }
    Ok(out)
}

pub fn read_measurements(path: &Path, dimension: usize) -> Result<Vec<FourierSample>, IoError> {
    let file = std::fs::File::open(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })?;
    parse_measurements(file, dimension)
}

pub fn measurements_csv(samples: &[FourierSample], dimension: usize) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(dimension))?;
    for s in samples {
        let mut rec: Vec<String> = s.frequency.iter().map(f64::to_string).collect();
        rec.push(s.value.re.to_string());
        rec.push(s.value.im.to_string());
        w.write_record(&rec)?;
    }
    finish(w)
}

/// One row per assembled moment: `atom,l,s_1..s_n,re,im`.
pub fn moments_csv<'a>(
    systems: impl IntoIterator<Item = (usize, &'a [Vec<f64>], &'a [Complex64])>,
    dimension: usize,
) -> Result<String, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut h = vec!["atom".to_string(), "l".to_string()];
    h.extend(header(dimension));
    w.write_record(&h)?;
    for (atom, exps, rhs) in systems {
        for (l, (s, m)) in exps.iter().zip(rhs).enumerate() {
            let mut rec = vec![atom.to_string(), l.to_string()];
            rec.extend(s.iter().map(f64::to_string));
            rec.push(m.re.to_string());
            rec.push(m.im.to_string());
            w.write_record(&rec)?;
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, IoError> {
    let bytes = w.into_inner().map_err(|e| IoError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(s: Vec<f64>, re: f64, im: f64) -> FourierSample {
        FourierSample {
            frequency: s,
            value: Complex64::new(re, im),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let samples = vec![
            sample(vec![0.1, -3.0], 1.0 / 3.0, -2e-17),
            sample(vec![std::f64::consts::PI, 0.0], 5.0, 0.0),
        ];
        let text = measurements_csv(&samples, 2).unwrap();
        assert!(text.starts_with("s_1,s_2,re,im\n"));
        assert_eq!(parse_measurements(text.as_bytes(), 2).unwrap(), samples);
    }

    #[test]
    fn lookup_matches_within_tolerance_and_fails_fast() {
        let table = MeasurementTable::from_samples(&[sample(vec![1.0], 2.0, 0.0), sample(vec![2.0], 3.0, 0.0)], 1).unwrap();
        let ok = table.measurements_for(&SampleSet::manual(vec![vec![2.0 + 1e-12]])).unwrap();
        assert_eq!(ok.samples[0].value.re, 3.0);
        let miss = table.measurements_for(&SampleSet::manual(vec![vec![1.0], vec![2.0 + 1e-6]]));
        assert!(matches!(miss, Err(IoError::MissingFrequency { .. })));
    }

    #[test]
    fn rejects_bad_headers_and_duplicates() {
        assert!(parse_measurements("s_1,re\n1,2\n".as_bytes(), 1).is_err());
        assert!(parse_measurements("s_1,re,im\n1,x,0\n".as_bytes(), 1).is_err());
        let dup = [sample(vec![1.0], 0.0, 0.0), sample(vec![1.0], 1.0, 0.0)];
        assert!(MeasurementTable::from_samples(&dup, 1).is_err());
    }

    #[test]
    fn moments_have_atom_and_index_columns() {
        let exps = vec![vec![0.5], vec![1.5]];
        let rhs = vec![Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.0)];
        let text = moments_csv([(1, exps.as_slice(), rhs.as_slice())], 1).unwrap();
        assert_eq!(text, "atom,l,s_1,re,im\n1,0,0.5,1,2\n1,1,1.5,-1,0\n");
    }
}
