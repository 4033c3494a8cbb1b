// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Loading and saving raster images.
//!
//! PNG is read at any bit depth and composited over white; `.tensor` files
//! hold raw `H×W×C` floats in `[0, 1]`; `.svg` sketches are rasterized.
//! PNG output is 8-bit with `round(255·v)`.

use std::io::Cursor;
use std::path::Path;

use glyphforge_core::raster::{render, RasterConfig, RasterImage};
use image::{DynamicImage, ImageFormat};

use crate::error::{io_err, Error, Result};
use crate::fsutil::atomic_write;
use crate::svg::read_svg;
use crate::tensor::Tensor;

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn decode_png(bytes: &[u8]) -> Result<RasterImage> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| Error::Image(e.to_string()))?;
    let rgba = img.to_rgba32f();
    let (w, h) = rgba.dimensions();
    let mut data = Vec::with_capacity(w as usize * h as usize * 3);
    for px in rgba.pixels() {
        let a = f64::from(px[3]);
        for k in 0..3 {
            data.push(a * f64::from(px[k]) + (1.0 - a));
        }
    }
    Ok(RasterImage::from_clamped(h as usize, w as usize, 3, data)?)
}

pub fn encode_png(image: &RasterImage) -> Result<Vec<u8>> {
    let (w, h) = (image.width() as u32, image.height() as u32);
    let bytes: Vec<u8> = image.data().iter().map(|&v| (v * 255.0).round() as u8).collect();
    let dynamic = match image.channels() {
        1 => image::GrayImage::from_raw(w, h, bytes).map(DynamicImage::ImageLuma8),
        3 => image::RgbImage::from_raw(w, h, bytes).map(DynamicImage::ImageRgb8),
        c => return Err(Error::Image(format!("cannot write a {c}-channel PNG"))),
    }
    .ok_or_else(|| Error::Image("image buffer has the wrong size".into()))?;
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(out.into_inner())
}

pub fn save_png(image: &RasterImage, path: &Path) -> Result<()> {
    atomic_write(path, &encode_png(image)?)
}

/// Loads a PNG, `.tensor`, or `.svg` file as an image. Sketches are
/// rendered with `raster_cfg`.
pub fn load_image(path: &Path, raster_cfg: &RasterConfig) -> Result<RasterImage> {
    match extension(path).as_str() {
        "png" => decode_png(&std::fs::read(path).map_err(io_err(path))?),
        "tensor" => Tensor::read(path)?.to_image(),
        "svg" => Ok(render(&read_svg(path)?, raster_cfg)?),
        other => Err(Error::Image(format!(
            "{}: unsupported image type `{other}` (expected png, tensor, or svg)",
            path.display()
        ))),
    }
}
