//! Row-major JSON form for complex matrices: `{"rows", "cols", "data"}` with
//! `data[i][j] = [re, im]`.

use serde::{Deserialize, Serialize};

use super::linalg::{c, CMat};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Vec<[f64; 2]>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let data = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<CMat> {
        if self.data.len() != self.rows || self.data.iter().any(|r| r.len() != self.cols) {
            return Err(Error::InvalidArgument(format!(
                "matrix JSON does not match declared shape {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i][j];
            c(re, im)
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = CMat::from_fn(2, 3, |i, j| c(i as f64, -(j as f64)));
        let text = serde_json::to_string(&MatrixJson::from_matrix(&m)).unwrap();
        assert!(text.starts_with(r#"{"rows":2,"cols":3,"data":[[[0.0,-0.0]"#));
        let back: MatrixJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let bad = MatrixJson { rows: 2, cols: 1, data: vec![vec![[1.0, 0.0]]] };
        assert!(bad.to_matrix().is_err());
    }
}
