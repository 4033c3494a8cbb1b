// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use glyphforge_core::encoder::{
    resample_bilinear, Capabilities, Embedding, Encoder, EncoderDescriptor, EncoderKind, LossGradResult,
};
use glyphforge_core::init::ActivationMap;
use glyphforge_core::raster::{PixelGrad, RasterImage};
use glyphforge_core::{Error, Result};

use super::protocol::{put_text, read_frame, write_frame, Description, Opcode, Payload, PayloadError, Status};
use crate::tensor::Tensor;

/// Byte stream a bridge client talks over.
pub trait Transport: Read + Write + Send {}

impl<T: Read + Write + Send> Transport for T {}

/// A bridge server running as a child process on our stdin/stdout pipes.
pub struct ChildTransport {
    child: Child,
    stdin: ChildStdin,
    stdout: ChildStdout,
}

impl ChildTransport {
    pub fn spawn(program: &str, args: &[&str]) -> io::Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        Ok(ChildTransport { child, stdin, stdout })
    }
}

impl Read for ChildTransport {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.stdout.read(buf)
    }
}

impl Write for ChildTransport {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.stdin.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.stdin.flush()
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn transport(e: impl std::fmt::Display) -> Error {
    Error::Transport(e.to_string())
}

fn protocol(op: Opcode, e: PayloadError) -> Error {
    Error::Transport(format!("malformed {} response: {}", op.name(), e.0))
}

/// Encoder served by a remote bridge process.
///
/// Requests on one client are serialized; open several clients for
/// concurrent work.
pub struct BridgeClient {
    conn: Mutex<Box<dyn Transport>>,
    descriptor: EncoderDescriptor,
}

impl std::fmt::Debug for BridgeClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BridgeClient")
            .field("descriptor", &self.descriptor)
            .finish_non_exhaustive()
    }
}

impl BridgeClient {
    /// Connects to `tcp:HOST:PORT` (or bare `HOST:PORT`), `unix:PATH`, or
    /// `stdio:PROGRAM ARGS…`, then asks the server to describe itself.
    pub fn connect(address: &str) -> Result<Self> {
        if let Some(cmd) = address.strip_prefix("stdio:") {
            let mut parts = cmd.split_whitespace();
            let program = parts
                .next()
                .ok_or_else(|| Error::Transport("empty stdio command".into()))?;
            let args: Vec<&str> = parts.collect();
            return Self::from_transport(Box::new(ChildTransport::spawn(program, &args).map_err(transport)?));
        }
        #[cfg(unix)]
        if let Some(path) = address.strip_prefix("unix:") {
            let stream = std::os::unix::net::UnixStream::connect(path).map_err(transport)?;
            return Self::from_transport(Box::new(stream));
        }
        let host = address.strip_prefix("tcp:").unwrap_or(address);
        let stream = TcpStream::connect(host).map_err(transport)?;
        stream.set_nodelay(true).map_err(transport)?;
        Self::from_transport(Box::new(stream))
    }

    pub fn from_transport(conn: Box<dyn Transport>) -> Result<Self> {
        let conn = Mutex::new(conn);
        let raw = Self::exchange(&conn, Opcode::Describe, &[])?;
        let d = Description::decode(&raw).map_err(|e| protocol(Opcode::Describe, e))?;
        Ok(BridgeClient {
            conn,
            descriptor: EncoderDescriptor {
                name: d.name,
                kind: EncoderKind::Bridge,
                embedding_dim: d.embedding_dim as usize,
                capabilities: d.capabilities,
            },
        })
    }

    fn exchange(conn: &Mutex<Box<dyn Transport>>, op: Opcode, payload: &[u8]) -> Result<Vec<u8>> {
        let mut stream = conn.lock().unwrap_or_else(|p| p.into_inner());
        write_frame(&mut **stream, op as u8, payload).map_err(transport)?;
        let frame = read_frame(&mut **stream)
            .map_err(transport)?
            .ok_or_else(|| Error::Transport("bridge closed the connection".into()))?;
        let message = || String::from_utf8_lossy(&frame.payload).into_owned();
        match Status::from_u8(frame.code) {
            Some(Status::Ok) => Ok(frame.payload),
            Some(Status::Capability) => Err(Error::Capability(op.name())),
            Some(Status::Malformed) => Err(Error::Remote(format!("bridge rejected {}: {}", op.name(), message()))),
            Some(Status::Internal) => Err(Error::Remote(format!("bridge failed {}: {}", op.name(), message()))),
            None => Err(Error::Transport(format!("unknown response status {}", frame.code))),
        }
    }

    fn call(&self, op: Opcode, payload: &[u8]) -> Result<Vec<u8>> {
        if let Some(cap) = op.capability() {
            if !self.descriptor.capabilities.contains(cap) {
                return Err(Error::Capability(op.name()));
            }
        }
        Self::exchange(&self.conn, op, payload)
    }

    fn embedding_from(&self, op: Opcode, raw: &[u8]) -> Result<Embedding> {
        let mut p = Payload::new(raw);
        let t = p.tensor().map_err(|e| protocol(op, e))?;
        p.finish().map_err(|e| protocol(op, e))?;
        if t.data().len() != self.descriptor.embedding_dim {
            return Err(Error::Contract(format!(
                "bridge returned {} values, described dimension is {}",
                t.data().len(),
                self.descriptor.embedding_dim
            )));
        }
        let values = t.to_f64();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Remote("bridge returned a non-finite embedding".into()));
        }
        Ok(Embedding::new("", values))
    }
}

impl Encoder for BridgeClient {
    fn descriptor(&self) -> EncoderDescriptor {
        self.descriptor.clone()
    }

    fn embed_image(&self, image: &RasterImage) -> Result<Embedding> {
        let raw = self.call(Opcode::EmbedImage, &Tensor::from_image(image).to_bytes())?;
        self.embedding_from(Opcode::EmbedImage, &raw)
    }

    fn activation_map(&self, image: &RasterImage) -> Result<ActivationMap> {
        let op = Opcode::ActivationMap;
        let raw = self.call(op, &Tensor::from_image(image).to_bytes())?;
        let mut p = Payload::new(&raw);
        let t = p.tensor().map_err(|e| protocol(op, e))?;
        p.finish().map_err(|e| protocol(op, e))?;
        let map = t.to_map().map_err(|e| Error::Remote(e.to_string()))?;
        let (h, w) = (image.height(), image.width());
        if (map.height(), map.width()) == (h, w) {
            return Ok(map);
        }
        let resized = resample_bilinear(map.data(), (map.height(), map.width()), (h, w));
        ActivationMap::new(h, w, resized)
    }

    fn loss_and_grad(&self, image: &RasterImage, target: &Embedding) -> Result<LossGradResult> {
        let op = Opcode::LossAndGrad;
        if target.dim() != self.descriptor.embedding_dim {
            return Err(Error::Contract(format!(
                "target has dimension {}, bridge produces {}",
                target.dim(),
                self.descriptor.embedding_dim
            )));
        }
        if !self.descriptor.capabilities.contains(Capabilities::LOSS_GRAD) {
            return Err(Error::Capability(op.name()));
        }
        if target.degenerate {
            return Ok(LossGradResult {
                loss: 1.0,
                pixel_grad: PixelGrad::zeros(image.height(), image.width(), image.channels()),
                degenerate: true,
            });
        }
        let mut payload = Tensor::from_image(image).to_bytes();
        Tensor::from_f64(vec![target.dim()], &target.values)
            .map_err(|e| Error::Contract(e.to_string()))?
            .encode_into(&mut payload);
        let raw = self.call(op, &payload)?;
        let mut p = Payload::new(&raw);
        let loss = f64::from(p.f32().map_err(|e| protocol(op, e))?);
        let grad = p.tensor().map_err(|e| protocol(op, e))?;
        p.finish().map_err(|e| protocol(op, e))?;
        if grad.dims() != [image.height(), image.width(), image.channels()] {
            return Err(Error::Remote(format!(
                "gradient has shape {:?}, image is {}×{}×{}",
                grad.dims(),
                image.height(),
                image.width(),
                image.channels()
            )));
        }
        let pixel_grad = grad.to_grad().map_err(|e| Error::Remote(e.to_string()))?;
        Ok(LossGradResult {
            loss,
            pixel_grad,
            degenerate: false,
        })
    }

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        let mut payload = Vec::new();
        put_text(&mut payload, text);
        let raw = self.call(Opcode::EmbedText, &payload)?;
        self.embedding_from(Opcode::EmbedText, &raw)
    }
}
