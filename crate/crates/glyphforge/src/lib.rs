// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! File formats, corpus handling, the encoder bridge, and the command line
//! front end around [`glyphforge_core`].

pub mod bridge;
pub mod cache;
pub mod cli;
pub mod corpus;
mod error;
pub mod fsutil;
pub mod imageio;
pub mod svg;
pub mod tensor;

pub use error::{Error, Result};
pub use glyphforge_core as core;

/// Environment variable consulted for the bridge address when the encoder
/// is given as plain `bridge`.
pub const BRIDGE_ENV: &str = "GLYPHFORGE_BRIDGE";
