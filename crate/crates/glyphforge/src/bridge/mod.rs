// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Client and reference server for the encoder bridge, a small binary
//! protocol for encoders that live in another process.

mod client;
pub mod protocol;
pub mod server;

pub use client::{BridgeClient, ChildTransport, Transport};
