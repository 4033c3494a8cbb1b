// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs violate a structural contract (shapes, ids, alignment).
    #[error("contract error: {0}")]
    Contract(String),
    /// The encoder does not serve the requested capability.
    #[error("encoder lacks capability `{0}`")]
    Capability(&'static str),
    /// A quantity needed for normalization is zero.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// A rank correlation is undefined because one side is constant.
    #[error("rank correlation undefined: constant input")]
    UndefinedCorrelation,
    /// The encoder transport failed (bridge encoders only).
    #[error("transport error: {0}")]
    Transport(String),
    /// The remote encoder reported a failure.
    #[error("encoder error: {0}")]
    Remote(String),
    /// Optimization produced a non-finite loss or gradient.
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
