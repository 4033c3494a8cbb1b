// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Serves any [`Encoder`] over the bridge protocol.
//!
//! Used to test clients end to end and to expose the builtin encoders to
//! other processes. Malformed requests get a status 2 reply and the
//! connection stays open, except after a bad header, where the stream can
//! no longer be resynchronized and is closed after the reply.

use std::io::{self, Read, Write};
use std::net::TcpListener;
use std::sync::Arc;
use std::thread;

use glyphforge_core::encoder::{Embedding, Encoder};
use glyphforge_core::Error as CoreError;

use super::protocol::{read_frame, write_frame, Description, FrameError, Opcode, Payload, PayloadError, Status};
use crate::tensor::Tensor;

struct Failure(Status, String);

impl From<PayloadError> for Failure {
    fn from(e: PayloadError) -> Self {
        Failure(Status::Malformed, e.0)
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        let status = match e {
            CoreError::Capability(_) => Status::Capability,
            CoreError::Contract(_) | CoreError::Domain(_) => Status::Malformed,
            _ => Status::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn embedding_payload(e: &Embedding) -> Result<Vec<u8>, Failure> {
    Tensor::from_f64(vec![e.dim()], &e.values)
        .map(|t| t.to_bytes())
        .map_err(|err| Failure(Status::Internal, err.to_string()))
}

fn handle<E: Encoder + ?Sized>(encoder: &E, code: u8, payload: &[u8]) -> Result<Vec<u8>, Failure> {
    let op = Opcode::from_u8(code).ok_or_else(|| Failure(Status::Malformed, format!("unknown opcode {code}")))?;
    let descriptor = encoder.descriptor();
    if let Some(cap) = op.capability() {
        if !descriptor.capabilities.contains(cap) {
            return Err(Failure(
                Status::Capability,
                format!("{} is not supported by {}", op.name(), descriptor.name),
            ));
        }
    }
    let mut p = Payload::new(payload);
    let image = |p: &mut Payload| -> Result<_, Failure> {
        p.tensor()?
            .to_image()
            .map_err(|e| Failure(Status::Malformed, e.to_string()))
    };
    let out = match op {
        Opcode::Describe => Description {
            name: descriptor.name,
            embedding_dim: descriptor.embedding_dim as u32,
            capabilities: descriptor.capabilities,
        }
        .encode(),
        Opcode::EmbedImage => {
            let img = image(&mut p)?;
            p.finish()?;
            embedding_payload(&encoder.embed_image(&img)?)?
        }
        Opcode::ActivationMap => {
            let img = image(&mut p)?;
            p.finish()?;
            Tensor::from_map(&encoder.activation_map(&img)?).to_bytes()
        }
        Opcode::LossAndGrad => {
            let img = image(&mut p)?;
            let target = p.tensor()?;
            p.finish()?;
            let lg = encoder.loss_and_grad(&img, &Embedding::new("", target.to_f64()))?;
            let mut out = (lg.loss as f32).to_le_bytes().to_vec();
            Tensor::from_grad(&lg.pixel_grad).encode_into(&mut out);
            out
        }
        Opcode::EmbedText => {
            let text = p.text()?;
            p.finish()?;
            embedding_payload(&encoder.embed_text(&text)?)?
        }
    };
    Ok(out)
}

/// Answers requests on `stream` until the peer closes it.
pub fn serve_connection<S: Read + Write, E: Encoder + ?Sized>(mut stream: S, encoder: &E) -> io::Result<()> {
    loop {
        let frame = match read_frame(&mut stream) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(FrameError::Io(e)) => return Err(e),
            Err(e) => {
                write_frame(&mut stream, Status::Malformed as u8, e.to_string().as_bytes())?;
                return Ok(());
            }
        };
        match handle(encoder, frame.code, &frame.payload) {
            Ok(payload) => write_frame(&mut stream, Status::Ok as u8, &payload)?,
            Err(Failure(status, message)) => write_frame(&mut stream, status as u8, message.as_bytes())?,
        }
    }
}

/// Accepts connections forever, one thread per connection.
pub fn serve_tcp<E: Encoder + Send + Sync + 'static>(listener: TcpListener, encoder: Arc<E>) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let encoder = Arc::clone(&encoder);
        thread::spawn(move || {
            let _ = stream.set_nodelay(true);
            let _ = serve_connection(stream, &*encoder);
        });
    }
    Ok(())
}
