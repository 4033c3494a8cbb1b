// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Stroke initialization from an activation map.
//!
//! The map is min-max normalized and turned into a probability field with a
//! temperature softmax. Stroke start points are picked greedily from that
//! field, each pick suppressing its neighbourhood with a Gaussian. The other
//! three control points of every stroke come from a walk along the
//! iso-contours of the normalized map.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, domain, Result};
use crate::geometry::{Canvas, CubicBezierStroke, Point2, SketchSpec, VectorSketch, CONTROL_POINTS};
use crate::math;

/// Non-negative saliency field, row-major `H×W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ActivationMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(domain("activation map dimensions must be positive"));
        }
        if data.len() != height * width {
            return Err(contract(format!(
                "activation map has {} values, expected {}",
                data.len(),
                height * width
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(domain(format!(
                "activation value {v} is not a finite non-negative number"
            )));
        }
        Ok(ActivationMap { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn canvas(&self) -> Canvas {
        Canvas::new(self.height, self.width)
    }

    /// `(m - min) / (max - min)`, or all zeros for a constant map.
    pub fn min_max_normalized(&self) -> ActivationMap {
        let (lo, hi) = self
            .data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let data = if hi > lo {
            self.data.iter().map(|v| (v - lo) / (hi - lo)).collect()
        } else {
            alloc::vec![0.0; self.data.len()]
        };
        ActivationMap {
            height: self.height,
            width: self.width,
            data,
        }
    }
}

/// Softmax probabilities over all pixels of an activation map.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Softmax temperature τ.
    pub temperature: f64,
    /// Standard deviation of the suppression Gaussian, in pixels.
    pub suppression_sigma: f64,
    /// Width of the excluded border frame in pixels; `None` selects 2% of
    /// the smaller canvas side.
    pub border_margin: Option<usize>,
    /// Walk window side as a fraction of the smaller canvas side.
    pub window_frac: f64,
    /// Length of one walk step in pixels.
    pub walk_step: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            temperature: 0.3,
            suppression_sigma: 5.0,
            border_margin: None,
            window_frac: 0.10,
            walk_step: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn border_margin_for(&self, canvas: Canvas) -> usize {
        self.border_margin
            .unwrap_or_else(|| math::round(0.02 * canvas.height.min(canvas.width) as f64) as usize)
    }

    /// Side of the square walk window in pixels.
    pub fn window_side_for(&self, canvas: Canvas) -> f64 {
        math::round(self.window_frac * canvas.height.min(canvas.width) as f64)
    }

    pub fn validate(&self, canvas: Canvas) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(domain("temperature must be positive"));
        }
        if !(self.suppression_sigma > 0.0 && self.suppression_sigma.is_finite()) {
            return Err(domain("suppression sigma must be positive"));
        }
        if 2 * self.border_margin_for(canvas) >= canvas.height.min(canvas.width) {
            return Err(domain("border margin must be less than half the smaller canvas side"));
        }
        if !(self.window_frac > 0.0 && self.window_frac <= 0.5) {
            return Err(domain("window fraction must lie in (0, 0.5]"));
        }
        if !(self.walk_step > 0.0 && self.walk_step.is_finite()) {
            return Err(domain("walk step must be positive"));
        }
        Ok(())
    }
}

/// Min-max normalization followed by a softmax at temperature `tau`.
pub fn normalize_map(map: &ActivationMap, tau: f64) -> Result<ProbabilityMap> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(domain(format!("temperature {tau} must be positive")));
    }
    let scaled: Vec<f64> = map.min_max_normalized().data.iter().map(|v| v / tau).collect();
    let peak = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut data: Vec<f64> = scaled.iter().map(|v| math::exp(v - peak)).collect();
    let total: f64 = data.iter().sum();
    data.iter_mut().for_each(|v| *v /= total);
    Ok(ProbabilityMap {
        height: map.height,
        width: map.width,
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub fn center(self) -> Point2 {
        Point2::new(self.col as f64, self.row as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartPoints {
    /// Picks in selection order.
    pub points: Vec<PixelCoord>,
    /// How many trailing picks were drawn uniformly because the working map
    /// ran out of positive values.
    pub random_fill: usize,
}

/// Greedy start-point selection with Gaussian suppression.
///
/// The border frame is zeroed, then each round takes the global maximum of
/// the working map (first in row-major order on ties) and subtracts a
/// Gaussian scaled so its peak equals the picked value, clamping at zero.
pub fn sample_starts(p: &ProbabilityMap, n: usize, cfg: &SamplerConfig, seed: u64) -> Result<StartPoints> {
    if n == 0 {
        return Err(domain("at least one start point is required"));
    }
    let (h, w) = (p.height, p.width);
    if p.data.len() != h * w || h == 0 || w == 0 {
        return Err(contract("probability map shape is inconsistent"));
    }
    let canvas = Canvas::new(h, w);
    cfg.validate(canvas)?;
    let margin = cfg.border_margin_for(canvas);
    let interior = |r: usize, c: usize| r >= margin && r < h - margin && c >= margin && c < w - margin;

    let mut work = p.data.clone();
    for r in 0..h {
        for c in 0..w {
            if !interior(r, c) {
                work[r * w + c] = 0.0;
            }
        }
    }

    let two_var = 2.0 * cfg.suppression_sigma * cfg.suppression_sigma;
    let falloff = |delta: usize| math::exp(-((delta * delta) as f64) / two_var);
    let row_weights: Vec<f64> = (0..h).map(falloff).collect();
    let col_weights: Vec<f64> = (0..w).map(falloff).collect();

    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let (best, peak) = work.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        );
        if peak <= 0.0 {
            break;
        }
        let (br, bc) = (best / w, best % w);
        points.push(PixelCoord { row: br, col: bc });
        for r in 0..h {
            let wr = peak * row_weights[r.abs_diff(br)];
            if wr == 0.0 {
                continue;
            }
            let row = &mut work[r * w..(r + 1) * w];
            for (c, v) in row.iter_mut().enumerate() {
                *v = (*v - wr * col_weights[c.abs_diff(bc)]).max(0.0);
            }
        }
        work[best] = 0.0;
    }

    let random_fill = n - points.len();
    if random_fill > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random_fill {
            points.push(PixelCoord {
                row: rng.gen_range(margin..h - margin),
                col: rng.gen_range(margin..w - margin),
            });
        }
    }
    Ok(StartPoints { points, random_fill })
}

/// Upper bound on walk steps per control point, in window sides. Keeps
/// walks on closed iso-contours smaller than the window finite.
const MAX_WALK_SIDES: f64 = 8.0;

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Central-difference gradient at the pixel nearest to `p`.
fn gradient_at(map: &ActivationMap, p: Point2) -> Point2 {
    let c = math::round(p.x).clamp(0.0, (map.width - 1) as f64) as isize;
    let r = math::round(p.y).clamp(0.0, (map.height - 1) as f64) as isize;
    let at = |r: isize, c: isize| map.get(reflect(r, map.height), reflect(c, map.width));
    Point2::new((at(r, c + 1) - at(r, c - 1)) / 2.0, (at(r + 1, c) - at(r - 1, c)) / 2.0)
}

#[derive(Debug, Clone, Copy)]
struct Window {
    lo: Point2,
    hi: Point2,
}

impl Window {
    fn contains(&self, p: Point2) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y
    }

    /// Signed distance to the nearest side, positive inside.
    fn room(&self, p: Point2) -> f64 {
        (p.x - self.lo.x)
            .min(self.hi.x - p.x)
            .min(p.y - self.lo.y)
            .min(self.hi.y - p.y)
    }
}

/// Places the remaining control points of a stroke starting at `start` by
/// walking perpendicular to the map gradient.
///
/// Around the current start a square window is opened; the walk advances in
/// `walk_step` increments along the unit tangent until the next step would
/// leave the window (or the canvas), and that position becomes the next
/// control point and the next window center.
///
/// The tangent is the gradient rotated by +90°. Its sign follows the
/// previous step; the very first step instead heads for the side with more
/// room inside the window (ties keep +90°). Where the gradient vanishes the
/// walk keeps its previous direction, or `+x` before any step was taken.
pub fn tangent_walk(map: &ActivationMap, start: Point2, k: usize, cfg: &SamplerConfig) -> Result<CubicBezierStroke> {
    if k != CONTROL_POINTS {
        return Err(domain(format!(
            "strokes have exactly {CONTROL_POINTS} control points, got {k}"
        )));
    }
    let canvas = map.canvas();
    cfg.validate(canvas)?;
    if !start.is_finite() || !canvas.contains(start) {
        return Err(domain(format!(
            "start ({}, {}) lies outside the canvas",
            start.x, start.y
        )));
    }
    let side = cfg.window_side_for(canvas);
    let half = side / 2.0;
    let max_steps = (MAX_WALK_SIDES * side.max(1.0) / cfg.walk_step) as usize;
    let (xmax, ymax) = ((canvas.width - 1) as f64, (canvas.height - 1) as f64);

    let mut points = [start; CONTROL_POINTS];
    let mut prev: Option<Point2> = None;
    let mut center = start;
    for slot in points.iter_mut().skip(1) {
        let window = Window {
            lo: Point2::new((center.x - half).max(0.0), (center.y - half).max(0.0)),
            hi: Point2::new((center.x + half).min(xmax), (center.y + half).min(ymax)),
        };
        let mut pos = center;
        for _ in 0..max_steps {
            let g = gradient_at(map, pos);
            let norm = g.length();
            let dir = if norm <= 1e-12 {
                prev.unwrap_or(Point2::new(1.0, 0.0))
            } else {
                let t = Point2::new(-g.y / norm, g.x / norm);
                match prev {
                    Some(p) if t.dot(p) < 0.0 => t * -1.0,
                    Some(_) => t,
                    None => {
                        let fwd = window.room(pos + t * cfg.walk_step);
                        let back = window.room(pos - t * cfg.walk_step);
                        if back > fwd + 1e-12 {
                            t * -1.0
                        } else {
                            t
                        }
                    }
                }
            };
            let next = pos + dir * cfg.walk_step;
            if !window.contains(next) {
                break;
            }
            pos = next;
            prev = Some(dir);
        }
        *slot = pos;
        center = pos;
    }
    CubicBezierStroke::new(points)
}

/// A freshly initialized sketch together with its start-point picks.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchInit {
    pub sketch: VectorSketch,
    pub starts: StartPoints,
}

/// Softmax → greedy starts → tangent walks. The walks run on the min-max
/// normalized map, before the softmax.
pub fn init_sketch(map: &ActivationMap, spec: &SketchSpec, cfg: &SamplerConfig, seed: u64) -> Result<SketchInit> {
    spec.validate()?;
    if spec.canvas != map.canvas() {
        return Err(contract(format!(
            "activation map {}x{} does not match canvas {}x{}",
            map.height, map.width, spec.canvas.height, spec.canvas.width
        )));
    }
    cfg.validate(spec.canvas)?;
    let probs = normalize_map(map, cfg.temperature)?;
    let starts = sample_starts(&probs, spec.n_strokes, cfg, seed)?;
    let walk_map = map.min_max_normalized();
    let strokes = starts
        .points
        .iter()
        .map(|s| tangent_walk(&walk_map, s.center(), CONTROL_POINTS, cfg))
        .collect::<Result<Vec<_>>>()?;
    let sketch = VectorSketch::new(strokes, spec.stroke_width, spec.canvas)?;
    Ok(SketchInit { sketch, starts })
}
