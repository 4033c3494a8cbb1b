// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Raw float tensors: `ndim u8 | dims u32 LE … | f32 LE values`, row-major.
//!
//! The same encoding is used on the bridge wire and for `.tensor` files.

use std::path::Path;

use glyphforge_core::init::ActivationMap;
use glyphforge_core::raster::{PixelGrad, RasterImage};

use crate::error::{io_err, Error, Result};
use crate::fsutil::atomic_write;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

fn element_count(dims: &[usize]) -> Option<usize> {
    dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d))
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if dims.len() > u8::MAX as usize {
            return Err(Error::Format(format!("{} dimensions exceed the 255 limit", dims.len())));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return Err(Error::Format("tensor dimension exceeds u32".into()));
        }
        if element_count(&dims) != Some(data.len()) {
            return Err(Error::Format(format!(
                "dims {dims:?} do not match {} values",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    /// Narrows `values` to f32.
    pub fn from_f64(dims: Vec<usize>, values: &[f64]) -> Result<Self> {
        Tensor::new(dims, values.iter().map(|&v| v as f32).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn encoded_len(&self) -> usize {
        1 + 4 * self.dims.len() + 4 * self.data.len()
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.reserve(self.encoded_len());
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(&mut out);
        out
    }

    /// Decodes one tensor from the front of `bytes`, returning it with the
    /// number of bytes consumed.
    pub fn decode(bytes: &[u8]) -> Result<(Tensor, usize)> {
        let ndim = *bytes
            .first()
            .ok_or_else(|| Error::Length("missing tensor header".into()))? as usize;
        let header = 1 + 4 * ndim;
        if bytes.len() < header {
            return Err(Error::Length(format!(
                "tensor header needs {header} bytes, {} available",
                bytes.len()
            )));
        }
        let dims: Vec<usize> = bytes[1..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let count = element_count(&dims).ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        let body = count
            .checked_mul(4)
            .ok_or_else(|| Error::Format("tensor size overflows".into()))?;
        if bytes.len() - header < body {
            return Err(Error::Length(format!(
                "tensor {dims:?} needs {body} value bytes, {} available",
                bytes.len() - header
            )));
        }
        let data = bytes[header..header + body]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((Tensor { dims, data }, header + body))
    }

    /// Decodes a buffer holding exactly one tensor.
    pub fn from_bytes(bytes: &[u8]) -> Result<Tensor> {
        let (t, used) = Tensor::decode(bytes)?;
        if used != bytes.len() {
            return Err(Error::Length(format!(
                "{} trailing bytes after tensor",
                bytes.len() - used
            )));
        }
        Ok(t)
    }

    pub fn read(path: &Path) -> Result<Tensor> {
        Tensor::from_bytes(&std::fs::read(path).map_err(io_err(path))?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes())
    }

    pub fn from_image(image: &RasterImage) -> Tensor {
        Tensor {
            dims: vec![image.height(), image.width(), image.channels()],
            data: image.data().iter().map(|&v| v as f32).collect(),
        }
    }

    /// `H×W×C` tensors become images directly; `H×W` ones become single
    /// channel images.
    pub fn to_image(&self) -> Result<RasterImage> {
        let (h, w, c) = match *self.dims.as_slice() {
            [h, w, c] => (h, w, c),
            [h, w] => (h, w, 1),
            _ => {
                return Err(Error::Format(format!(
                    "an image tensor has 2 or 3 dimensions, got {:?}",
                    self.dims
                )))
            }
        };
        Ok(RasterImage::new(h, w, c, self.to_f64())?)
    }

    pub fn from_map(map: &ActivationMap) -> Tensor {
        Tensor {
            dims: vec![map.height(), map.width()],
            data: map.data().iter().map(|&v| v as f32).collect(),
        }
    }

    /// Accepts `H×W`, `1×H×W`, and `H×W×1`.
    pub fn to_map(&self) -> Result<ActivationMap> {
        let (h, w) = match *self.dims.as_slice() {
            [h, w] | [1, h, w] | [h, w, 1] => (h, w),
            _ => {
                return Err(Error::Format(format!(
                    "an activation map tensor is H×W, got {:?}",
                    self.dims
                )))
            }
        };
        Ok(ActivationMap::new(h, w, self.to_f64())?)
    }

    pub fn from_grad(grad: &PixelGrad) -> Tensor {
        Tensor {
            dims: vec![grad.height, grad.width, grad.channels],
            data: grad.data.iter().map(|&v| v as f32).collect(),
        }
    }

    pub fn to_grad(&self) -> Result<PixelGrad> {
        match *self.dims.as_slice() {
            [height, width, channels] => Ok(PixelGrad {
                height,
                width,
                channels,
                data: self.to_f64(),
            }),
            _ => Err(Error::Format(format!("a pixel gradient is H×W×C, got {:?}", self.dims))),
        }
    }
}
