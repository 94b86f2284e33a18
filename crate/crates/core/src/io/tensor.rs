//! `USTN1` tensor container.
//!
//! Layout: the 6 magic bytes `USTN1\0`, a little-endian `u32` rank in `1..=4`,
//! one little-endian `u32` per dimension, then `product(dims)` IEEE-754
//! binary32 values, little-endian, row-major. Internal computations are f64;
//! writing a tensor is the single place where values are rounded to f32.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"USTN1\0";
pub const MAX_RANK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.is_empty() || shape.len() > MAX_RANK {
            return Err(Error::data(format!("tensor rank {} outside 1..={MAX_RANK}", shape.len())));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::data(format!("tensor shape {shape:?} needs {len} values, got {}", data.len())));
        }
        Ok(Self { shape, data })
    }

    pub fn from_array2(a: &Array2<f64>) -> Self {
        let (r, c) = a.dim();
        Self {
            shape: vec![r, c],
            data: a.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_array2(&self) -> Result<Array2<f64>> {
        if self.shape.len() != 2 {
            return Err(Error::data(format!("expected a rank-2 tensor, got shape {:?}", self.shape)));
        }
        let data = self.data.iter().map(|&v| f64::from(v)).collect();
        Ok(Array2::from_shape_vec((self.shape[0], self.shape[1]), data).expect("validated shape"))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(MAGIC.len() + 4 * (1 + self.shape.len() + self.data.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.shape.len() as u32).to_le_bytes());
        for &d in &self.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = bytes
            .strip_prefix(MAGIC.as_slice())
            .ok_or_else(|| Error::data("missing USTN1 magic"))?;
        let mut next_u32 = |what: &str| -> Result<u32> {
            if cursor.len() < 4 {
                return Err(Error::data(format!("truncated tensor header ({what})")));
            }
            let (head, rest) = cursor.split_at(4);
            cursor = rest;
            Ok(u32::from_le_bytes(head.try_into().unwrap()))
        };
        let rank = next_u32("rank")? as usize;
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::data(format!("tensor rank {rank} outside 1..={MAX_RANK}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(next_u32("dimension")? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::data("tensor dimensions overflow"))?;
        if cursor.len() != len * 4 {
            return Err(Error::data(format!(
                "tensor payload is {} bytes, shape {shape:?} needs {}",
                cursor.len(),
                len * 4
            )));
        }
        let data = cursor
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { shape, data })
    }
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    fs::write(path, tensor.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes).map_err(|e| match e {
        Error::Data(msg) => Error::data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn write_array2(path: &Path, a: &Array2<f64>) -> Result<()> {
    write_tensor(path, &Tensor::from_array2(a))
}

pub fn read_array2(path: &Path) -> Result<Array2<f64>> {
    read_tensor(path)?.to_array2()
}

/// `name.ust` → `name.meta`.
pub fn sidecar_path(tensor_path: &Path) -> PathBuf {
    tensor_path.with_extension("meta")
}

/// Named scalar metadata stored as `key=value` lines, sorted by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata(pub BTreeMap<String, String>);

impl Metadata {
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let raw = self.get(key).ok_or_else(|| Error::data(format!("metadata key '{key}' missing")))?;
        raw.trim()
            .parse()
            .map_err(|_| Error::data(format!("metadata key '{key}' is not a number: '{raw}'")))
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::data(format!("metadata line {} has no '=': '{line}'", n + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_bytes() {
        let t = Tensor::new(vec![2], vec![1.0, -2.5]).unwrap();
        let bytes = t.to_bytes();
        assert_eq!(&bytes[..6], b"USTN1\0");
        assert_eq!(&bytes[6..10], &1u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &2u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[18..22], &(-2.5f32).to_le_bytes());
        assert_eq!(bytes.len(), 22);
    }

    #[test]
    fn rejects_corruption() {
        let t = Tensor::new(vec![2, 2], vec![0.0; 4]).unwrap();
        let bytes = t.to_bytes();
        assert!(Tensor::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Tensor::from_bytes(&bytes[1..]).is_err());
        let mut bad_rank = bytes.clone();
        bad_rank[6] = 5;
        assert!(Tensor::from_bytes(&bad_rank).is_err());
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn metadata_text() {
        let mut m = Metadata::default();
        m.set("sigma", 0.25).set("alpha", "x");
        assert_eq!(m.to_text(), "alpha=x\nsigma=0.25\n");
        let back = Metadata::parse(&m.to_text()).unwrap();
        assert_eq!(back.get_f64("sigma").unwrap(), 0.25);
        assert!(Metadata::parse("novalue").is_err());
        assert!(back.get_f64("alpha").is_err());
    }
}
