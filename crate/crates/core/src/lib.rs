// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Semantic sketch synthesis core.
//!
//! A sketch is a small set of black cubic Bezier strokes. Strokes are seeded
//! from an activation map ([`init`]), rendered by a soft-coverage
//! differentiable rasterizer ([`raster`]), and pulled toward the embedding of
//! an input image by gradient descent ([`optim`]) through an [`encoder::Encoder`].
//! [`analysis`] holds the similarity, RSA and retrieval mathematics used to
//! evaluate the results.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the bridge
//! client and the command line live in the `glyphforge` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod encoder;
mod error;
pub mod geometry;
pub mod init;
mod math;
pub mod optim;
pub mod raster;

pub use crate::error::{Error, Result};
pub use crate::geometry::{CubicBezierStroke, Point2, SketchSpec, VectorSketch};
pub use crate::raster::{RasterConfig, RasterImage};
