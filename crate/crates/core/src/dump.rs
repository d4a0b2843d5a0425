//! Lossless JSON dumps of fitted models.
//!
//! Floats are written in shortest round-trip form and parsed back exactly,
//! so a saved model reloads bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Serializes a dense matrix as a list of rows.
pub mod mat_rows {
    use faer::Mat;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat<f64>, s: S) -> Result<S::Ok, S::Error> {
        Stored {
            rows: m.nrows(),
            cols: m.ncols(),
            data: crate::linalg::to_rows(m.as_ref()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat<f64>, D::Error> {
        let stored = Stored::deserialize(d)?;
        if stored.data.len() != stored.rows || stored.data.iter().any(|r| r.len() != stored.cols) {
            return Err(D::Error::custom(format!(
                "matrix body does not match its {}x{} header",
                stored.rows, stored.cols
            )));
        }
        Ok(Mat::from_fn(stored.rows, stored.cols, |i, j| stored.data[i][j]))
    }

    #[derive(Serialize, Deserialize)]
    struct Stored {
        rows: usize,
        cols: usize,
        data: Vec<Vec<f64>>,
    }
}

/// Serializes a list of matrices with [`mat_rows`].
pub mod mat_list {
    use faer::Mat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "super::mat_rows")] Mat<f64>);

    pub fn serialize<S: Serializer>(ms: &[Mat<f64>], s: S) -> Result<S::Ok, S::Error> {
        let wrapped: Vec<Wrapped> = ms.iter().map(|m| Wrapped(m.clone())).collect();
        wrapped.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat<f64>>, D::Error> {
        Ok(Vec::<Wrapped>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}
