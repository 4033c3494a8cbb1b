// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Framing and payload codecs of the encoder bridge.
//!
//! Every frame is `"GLY1" | code u8 | payload_len u32 LE | payload`, where
//! `code` is an [`Opcode`] on requests and a [`Status`] on responses.

use std::io::{self, Read, Write};

use glyphforge_core::encoder::Capabilities;

use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"GLY1";
pub const HEADER_LEN: usize = 9;
/// Frames announcing larger payloads are rejected before allocation.
pub const MAX_PAYLOAD: u32 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Opcode {
    EmbedImage = 1,
    ActivationMap = 2,
    LossAndGrad = 3,
    EmbedText = 4,
    Describe = 5,
}

impl Opcode {
    pub fn from_u8(code: u8) -> Option<Opcode> {
        Some(match code {
            1 => Opcode::EmbedImage,
            2 => Opcode::ActivationMap,
            3 => Opcode::LossAndGrad,
            4 => Opcode::EmbedText,
            5 => Opcode::Describe,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::EmbedImage => "embed_image",
            Opcode::ActivationMap => "activation_map",
            Opcode::LossAndGrad => "loss_and_grad",
            Opcode::EmbedText => "embed_text",
            Opcode::Describe => "describe",
        }
    }

    /// Capability bit that has to be declared for this operation.
    pub fn capability(self) -> Option<Capabilities> {
        match self {
            Opcode::EmbedImage => Some(Capabilities::EMBED_IMAGE),
            Opcode::ActivationMap => Some(Capabilities::ACTIVATION_MAP),
            Opcode::LossAndGrad => Some(Capabilities::LOSS_GRAD),
            Opcode::EmbedText => Some(Capabilities::EMBED_TEXT),
            Opcode::Describe => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    Capability = 1,
    Malformed = 2,
    Internal = 3,
}

impl Status {
    pub fn from_u8(code: u8) -> Option<Status> {
        Some(match code {
            0 => Status::Ok,
            1 => Status::Capability,
            2 => Status::Malformed,
            3 => Status::Internal,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub code: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("bad frame magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("payload of {0} bytes exceeds the frame limit")]
    TooLarge(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn encode_frame(code: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(code);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, code: u8, payload: &[u8]) -> io::Result<()> {
    w.write_all(&encode_frame(code, payload))?;
    w.flush()
}

/// Reads one frame; `Ok(None)` on a clean end of stream before any header
/// byte.
pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> Result<Option<Frame>, FrameError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match r.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let magic: [u8; 4] = header[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    let len = u32::from_le_bytes(header[5..9].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(FrameError::TooLarge(len));
    }
    let mut payload = vec![0; len as usize];
    r.read_exact(&mut payload)?;
    Ok(Some(Frame {
        code: header[4],
        payload,
    }))
}

/// Payload decoding failure; the message goes back to the peer as is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadError(pub String);

impl From<crate::error::Error> for PayloadError {
    fn from(e: crate::error::Error) -> Self {
        PayloadError(e.to_string())
    }
}

/// Sequential reader over a payload.
pub struct Payload<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Payload<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Payload { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], PayloadError> {
        if self.bytes.len() - self.pos < n {
            return Err(PayloadError(format!(
                "payload truncated: need {n} bytes at offset {}",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, PayloadError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, PayloadError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32, PayloadError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn text(&mut self) -> Result<String, PayloadError> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| PayloadError("text is not UTF-8".into()))
    }

    pub fn tensor(&mut self) -> Result<Tensor, PayloadError> {
        let (t, used) = Tensor::decode(&self.bytes[self.pos..])?;
        self.pos += used;
        Ok(t)
    }

    pub fn finish(self) -> Result<(), PayloadError> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(PayloadError(format!(
                "{} unexpected trailing payload bytes",
                self.bytes.len() - self.pos
            )))
        }
    }
}

pub fn put_text(out: &mut Vec<u8>, text: &str) {
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text.as_bytes());
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Description {
    pub name: String,
    pub embedding_dim: u32,
    pub capabilities: Capabilities,
}

impl Description {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_text(&mut out, &self.name);
        out.extend_from_slice(&self.embedding_dim.to_le_bytes());
        out.push(self.capabilities.0);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PayloadError> {
        let mut p = Payload::new(bytes);
        let d = Description {
            name: p.text()?,
            embedding_dim: p.u32()?,
            capabilities: Capabilities(p.u8()?),
        };
        p.finish()?;
        Ok(d)
    }
}
