//! JSON file formats.
//!
//! TNSR-JSON: `{ "dims": [n1, …, nD], "layout": "first-index-slowest", "data": […] }`.
//!
//! ODEC-JSON: `{ "alpha": […], "factors": [[column, …] per mode], "dims": […] }`
//! where each factor is a list of `r` columns of length `n_d`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::odec::OdecTensor;
use crate::tensor::{DenseTensor, Shape};

pub const LAYOUT: &str = "first-index-slowest";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub dims: Vec<usize>,
    pub layout: String,
    pub data: Vec<f64>,
}

impl From<&DenseTensor> for TensorFile {
    fn from(x: &DenseTensor) -> Self {
        TensorFile {
            dims: x.dims().to_vec(),
            layout: LAYOUT.to_string(),
            data: x.data().to_vec(),
        }
    }
}

impl TryFrom<TensorFile> for DenseTensor {
    type Error = Error;

    fn try_from(file: TensorFile) -> Result<Self> {
        if file.layout != LAYOUT {
            return Err(Error::Format(format!(
                "unsupported layout {:?}, expected {LAYOUT:?}",
                file.layout
            )));
        }
        let shape = Shape::new(file.dims)?;
        if file.data.len() != shape.len() {
            return Err(Error::Format(format!(
                "dims {shape} need {} entries, file has {}",
                shape.len(),
                file.data.len()
            )));
        }
        DenseTensor::new(shape, file.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdecFile {
    pub alpha: Vec<f64>,
    pub factors: Vec<Vec<Vec<f64>>>,
    pub dims: Vec<usize>,
}

impl From<&OdecTensor> for OdecFile {
    fn from(x: &OdecTensor) -> Self {
        OdecFile {
            alpha: x.alpha().to_vec(),
            factors: x
                .factors()
                .iter()
                .map(|u| u.column_iter().map(|c| c.iter().copied().collect()).collect())
                .collect(),
            dims: x.shape().dims().to_vec(),
        }
    }
}

impl TryFrom<OdecFile> for OdecTensor {
    type Error = Error;

    fn try_from(file: OdecFile) -> Result<Self> {
        let shape = Shape::new(file.dims)?;
        let rank = file.alpha.len();
        let mut factors = Vec::with_capacity(file.factors.len());
        for (d, columns) in file.factors.iter().enumerate() {
            let n = shape.dims().get(d).copied().unwrap_or(0);
            if columns.len() != rank || columns.iter().any(|c| c.len() != n) {
                return Err(Error::Format(format!(
                    "factor {} must hold {rank} columns of length {n}",
                    d + 1
                )));
            }
            factors.push(DMatrix::from_fn(n, rank, |i, j| columns[j][i]));
        }
        OdecTensor::new(file.alpha, factors, shape)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn tensor_to_json(x: &DenseTensor) -> Result<String> {
    Ok(serde_json::to_string(&TensorFile::from(x))?)
}

pub fn tensor_from_json(text: &str) -> Result<DenseTensor> {
    let file: TensorFile = serde_json::from_str(text)?;
    file.try_into()
}

pub fn write_tensor(path: &Path, x: &DenseTensor) -> Result<()> {
    write_json(path, &TensorFile::from(x))
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor> {
    tensor_from_json(&read_text(path)?)
}

pub fn write_odec(path: &Path, x: &OdecTensor) -> Result<()> {
    write_json(path, &OdecFile::from(x))
}

pub fn read_odec(path: &Path) -> Result<OdecTensor> {
    let file: OdecFile = serde_json::from_str(&read_text(path)?)?;
    file.try_into()
}

/// Reads either format; ODEC files are expanded to their dense form.
pub fn read_any_tensor(path: &Path) -> Result<DenseTensor> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("alpha").is_some() {
        let file: OdecFile = serde_json::from_value(value)?;
        Ok(OdecTensor::try_from(file)?.to_dense())
    } else {
        let file: TensorFile = serde_json::from_value(value)?;
        file.try_into()
    }
}
