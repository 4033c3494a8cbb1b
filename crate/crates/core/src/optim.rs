// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Gradient-based refinement of stroke control points.
//!
//! Each iteration renders the sketch, asks the encoder for the loss against
//! the fixed target embedding and its pixel gradient, pulls that gradient
//! back through the rasterizer, and takes one update step on every
//! control-point coordinate. Points are clamped to the canvas after each
//! step.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::encoder::{Embedding, Encoder};
use crate::error::{domain, Error, Result};
use crate::geometry::{Point2, SketchSpec, VectorSketch};
use crate::init::{init_sketch, SamplerConfig, SketchInit};
use crate::math;
use crate::raster::{backward, render, RasterConfig, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    /// Adaptive moments with bias correction.
    #[default]
    Adam,
    /// Plain gradient descent: `x -= step_size * g`.
    Sgd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub iterations: usize,
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub checkpoint_every: usize,
    pub seed: u64,
    pub rule: UpdateRule,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            iterations: 1500,
            step_size: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            checkpoint_every: 250,
            seed: 0,
            rule: UpdateRule::Adam,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(domain("iterations must be at least 1"));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(domain(format!("step size must be positive, got {}", self.step_size)));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return Err(domain("moment decays must lie in [0, 1)"));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(domain("epsilon must be positive"));
        }
        if self.checkpoint_every == 0 {
            return Err(domain("checkpoint interval must be at least 1"));
        }
        Ok(())
    }

    fn is_checkpoint(&self, iteration: usize) -> bool {
        iteration.is_multiple_of(self.checkpoint_every) || iteration == self.iterations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeTrace {
    /// Loss before each update and after the last one: `iterations + 1`
    /// values.
    pub losses: Vec<f64>,
    /// Sketch at iteration 0, every multiple of the checkpoint interval, and
    /// the final iteration.
    pub checkpoints: Vec<(usize, VectorSketch)>,
    /// The target embedding was all zeros, so nothing was optimized.
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

impl OptimizeTrace {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trace is never empty")
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Moments {
    fn new(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, cfg: &OptimizeConfig, x: &mut [f64], g: &[f64]) {
        match cfg.rule {
            UpdateRule::Sgd => {
                for (xi, gi) in x.iter_mut().zip(g) {
                    *xi -= cfg.step_size * gi;
                }
            }
            UpdateRule::Adam => {
                self.t += 1;
                let c1 = 1.0 - math::powi(cfg.beta1, self.t);
                let c2 = 1.0 - math::powi(cfg.beta2, self.t);
                for i in 0..x.len() {
                    self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g[i];
                    self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                    let m_hat = self.m[i] / c1;
                    let v_hat = self.v[i] / c2;
                    x[i] -= cfg.step_size * m_hat / (math::sqrt(v_hat) + cfg.epsilon);
                }
            }
        }
    }
}

fn checked_loss<E: Encoder + ?Sized>(
    encoder: &E,
    sketch: &VectorSketch,
    raster_cfg: &RasterConfig,
    target: &Embedding,
    iteration: usize,
) -> Result<(f64, crate::raster::PixelGrad)> {
    let rendered = render(sketch, raster_cfg)?;
    let lg = encoder.loss_and_grad(&rendered, target)?;
    if !lg.loss.is_finite() {
        return Err(Error::NonFinite {
            what: "loss",
            iteration,
        });
    }
    if !lg.pixel_grad.is_finite() {
        return Err(Error::NonFinite {
            what: "pixel gradient",
            iteration,
        });
    }
    Ok((lg.loss, lg.pixel_grad))
}

/// Refines `init` toward the embedding of `image`.
pub fn optimize<E: Encoder + ?Sized>(
    init: &VectorSketch,
    image: &RasterImage,
    encoder: &E,
    raster_cfg: &RasterConfig,
    cfg: &OptimizeConfig,
) -> Result<(VectorSketch, OptimizeTrace)> {
    cfg.validate()?;
    raster_cfg.validate()?;
    let target = encoder.embed_image(image)?;
    let mut trace = OptimizeTrace {
        losses: Vec::with_capacity(cfg.iterations + 1),
        checkpoints: Vec::new(),
        degenerate: false,
        warnings: Vec::new(),
    };
    if target.degenerate {
        trace.degenerate = true;
        trace.warnings.push(String::from(
            "target embedding is all zeros; returning the initial sketch unchanged",
        ));
        trace.losses.resize(cfg.iterations + 1, 1.0);
        trace.checkpoints = (0..=cfg.iterations)
            .filter(|&i| cfg.is_checkpoint(i))
            .map(|i| (i, init.clone()))
            .collect();
        return Ok((init.clone(), trace));
    }

    let canvas = init.canvas();
    let mut x = init.coordinates();
    let mut moments = Moments::new(x.len());
    let mut sketch = init.clone();
    for iteration in 0..cfg.iterations {
        let (loss, pixel_grad) = checked_loss(encoder, &sketch, raster_cfg, &target, iteration)?;
        trace.losses.push(loss);
        if cfg.is_checkpoint(iteration) {
            trace.checkpoints.push((iteration, sketch.clone()));
        }
        let grad = backward(&sketch, raster_cfg, &pixel_grad)?.flat();
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                what: "control-point gradient",
                iteration,
            });
        }
        moments.step(cfg, &mut x, &grad);
        for p in x.chunks_exact_mut(2) {
            let q = canvas.clamp(Point2::new(p[0], p[1]));
            p[0] = q.x;
            p[1] = q.y;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "control point",
                iteration,
            });
        }
        sketch = sketch.with_coordinates(&x)?;
    }
    let (loss, _) = checked_loss(encoder, &sketch, raster_cfg, &target, cfg.iterations)?;
    trace.losses.push(loss);
    trace.checkpoints.push((cfg.iterations, sketch.clone()));
    Ok((sketch, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub init: SketchInit,
    pub sketch: VectorSketch,
    pub trace: OptimizeTrace,
}

/// Activation map, stroke initialization, and optimization in one go. The
/// sampler seed is `opt_cfg.seed`.
pub fn full_pipeline<E: Encoder + ?Sized>(
    image: &RasterImage,
    spec: &SketchSpec,
    encoder: &E,
    sampler_cfg: &SamplerConfig,
    raster_cfg: &RasterConfig,
    opt_cfg: &OptimizeConfig,
) -> Result<PipelineOutput> {
    spec.validate()?;
    if (image.height(), image.width()) != (spec.canvas.height, spec.canvas.width) {
        return Err(crate::error::contract(format!(
            "image is {}×{} but the sketch canvas is {}×{}",
            image.height(),
            image.width(),
            spec.canvas.height,
            spec.canvas.width
        )));
    }
    let map = encoder.activation_map(image)?;
    let init = init_sketch(&map, spec, sampler_cfg, opt_cfg.seed)?;
    let (sketch, trace) = optimize(&init.sketch, image, encoder, raster_cfg, opt_cfg)?;
    Ok(PipelineOutput { init, sketch, trace })
}
