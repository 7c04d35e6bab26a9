use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// A stream with one anomaly label per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledStream {
    pub name: String,
    pub values: Vec<f64>,
    pub labels: Vec<bool>,
}

impl LabeledStream {
    pub fn new(name: impl Into<String>, values: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if values.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: labels.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            values,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn series(&self) -> Result<TimeSeries> {
        TimeSeries::new(self.values.clone())
    }

    pub fn anomaly_rate(&self) -> f64 {
        self.labels.iter().filter(|&&l| l).count() as f64 / self.len().max(1) as f64
    }
}

/// Non-blank lines with their 1-based line numbers; a first line whose
/// first field is not numeric is taken as a header.
fn data_lines(text: &str) -> Result<Vec<(usize, &str)>> {
    let mut lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if let Some(&(_, first)) = lines.first() {
        let field = first.split(',').next().unwrap_or("").trim();
        if field.parse::<f64>().is_err() {
            lines.remove(0);
        }
    }
    if lines.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(lines)
}

fn parse_value(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("not a number: {:?}", field.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite value {v}"),
        });
    }
    Ok(v)
}

/// One value per line; extra columns are ignored.
pub fn parse_series_csv(text: &str) -> Result<TimeSeries> {
    let values = data_lines(text)?
        .into_iter()
        .map(|(line, l)| parse_value(l.split(',').next().unwrap_or(""), line))
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::new(values)
}

/// `value,label` rows with labels 0 or 1.
pub fn parse_labeled_csv(text: &str, name: &str) -> Result<LabeledStream> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, l) in data_lines(text)? {
        let mut fields = l.split(',');
        values.push(parse_value(fields.next().unwrap_or(""), line)?);
        let label = match fields.next().map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            Some(other) => {
                return Err(Error::Parse {
                    line,
                    message: format!("label must be 0 or 1, got {other:?}"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line,
                    message: "missing label column".into(),
                })
            }
        };
        labels.push(label);
    }
    LabeledStream::new(name, values, labels)
}

pub fn load_series_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    parse_series_csv(&fs::read_to_string(path)?)
}

pub fn load_labeled_csv(path: impl AsRef<Path>) -> Result<LabeledStream> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_labeled_csv(&fs::read_to_string(path)?, &name)
}

pub fn write_series_csv<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    writeln!(w, "value")?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

pub fn write_labeled_csv<W: Write>(mut w: W, stream: &LabeledStream) -> Result<()> {
    writeln!(w, "value,label")?;
    for (v, &l) in stream.values.iter().zip(&stream.labels) {
        writeln!(w, "{v},{}", u8::from(l))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_values() {
        assert_eq!(parse_series_csv("1\n2\n3\n").unwrap().values(), &[1.0, 2.0, 3.0]);
        assert_eq!(parse_series_csv("value\n1.5\n\n-2\n").unwrap().values(), &[1.5, -2.0]);
    }

    #[test]
    fn labeled_values() {
        let s = parse_labeled_csv("value,label\n1,0\n5,1\n", "x").unwrap();
        assert_eq!(s.values, vec![1.0, 5.0]);
        assert_eq!(s.labels, vec![false, true]);
        assert!(matches!(
            parse_labeled_csv("1,0\n2,7\n", "x"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert!(matches!(
            parse_series_csv("1\n2\nabc\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(parse_series_csv("value\n"), Err(Error::EmptyFile)));
        assert!(matches!(parse_series_csv(""), Err(Error::EmptyFile)));
    }

    #[test]
    fn round_trip() {
        let s = LabeledStream::new("t", vec![0.1, -3.25, 1e-17], vec![true, false, true]).unwrap();
        let mut buf = Vec::new();
        write_labeled_csv(&mut buf, &s).unwrap();
        let back = parse_labeled_csv(std::str::from_utf8(&buf).unwrap(), "t").unwrap();
        assert_eq!(back, s);

        let mut buf = Vec::new();
        write_series_csv(&mut buf, &s.values).unwrap();
        let back = parse_series_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.values(), s.values.as_slice());
    }
}
