//! Multivariate time series container and CSV interchange.
//!
//! Observations are stored as a T×K matrix: rows are time points, columns are
//! component series. The CSV format is a header row of series names followed
//! by one row per observation.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// A length-T, K-variate observed series with component names.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Array2<f64>,
    names: Vec<String>,
}

impl TimeSeries {
    /// Builds a series, validating shape and finiteness. Requires T >= 2,
    /// K >= 1, a name per column, and every entry finite.
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        let (t, k) = values.dim();
        if k < 1 || names.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} series names for {} columns",
                names.len(),
                k
            )));
        }
        if t < 2 {
            return Err(Error::SeriesTooShort { t, min: 2 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series"));
        }
        Ok(Self { values, names })
    }

    /// Builds a series with default names Y1..YK.
    pub fn with_default_names(values: Array2<f64>) -> Result<Self> {
        let k = values.ncols();
        Self::new(values, default_names(k))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of observations T.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of component series K.
    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// Splits into (head, tail) at row `at`; both sides keep the names.
    pub fn split_at(&self, at: usize) -> Result<(TimeSeries, TimeSeries)> {
        if at < 2 || self.len() - at < 2 {
            return Err(Error::InvalidParam(format!(
                "split point {at} leaves a side shorter than 2 of {}",
                self.len()
            )));
        }
        let head = self.values.slice(ndarray::s![..at, ..]).to_owned();
        let tail = self.values.slice(ndarray::s![at.., ..]).to_owned();
        Ok((
            TimeSeries::new(head, self.names.clone())?,
            TimeSeries::new(tail, self.names.clone())?,
        ))
    }

    /// Reads a series from CSV: header row of names, then numeric rows.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let k = names.len();
        let mut rows: Vec<f64> = Vec::new();
        let mut t = 0usize;
        for record in rdr.records() {
            let record = record?;
            if record.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "row {} has {} fields, header has {}",
                    t + 1,
                    record.len(),
                    k
                )));
            }
            for field in record.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::InvalidParam(format!("non-numeric CSV field '{field}'")))?;
                rows.push(v);
            }
            t += 1;
        }
        let values = Array2::from_shape_vec((t, k), rows)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        TimeSeries::new(values, names)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.names)?;
        for row in self.values.rows() {
            wtr.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(std::io::BufWriter::new(file))
    }
}

pub fn default_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("Y{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn csv_round_trip() {
        let ts = TimeSeries::new(
            array![[1.0, 2.0], [3.0, 4.5], [-0.25, 1e-3]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let mut buf = Vec::new();
        ts.to_csv_writer(&mut buf).unwrap();
        let back = TimeSeries::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(ts, back);
    }

    #[test]
    fn rejects_short_and_nonfinite() {
        assert!(matches!(
            TimeSeries::new(array![[1.0, 2.0]], vec!["a".into(), "b".into()]),
            Err(Error::SeriesTooShort { .. })
        ));
        assert!(matches!(
            TimeSeries::new(array![[1.0], [f64::NAN]], vec!["a".into()]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn rejects_ragged_csv() {
        let text = "a,b\n1,2\n3\n";
        assert!(TimeSeries::from_csv_reader(text.as_bytes()).is_err());
    }

    #[test]
    fn rejects_non_numeric_csv() {
        let text = "a,b\n1,2\nx,4\n";
        assert!(TimeSeries::from_csv_reader(text.as_bytes()).is_err());
    }
}
