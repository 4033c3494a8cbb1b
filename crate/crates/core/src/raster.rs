// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Soft-coverage differentiable rasterizer.
//!
//! Each stroke is flattened to a polyline. For a pixel center at distance `d`
//! from stroke `j`, with stroke width `w` and anti-alias half-width `a`,
//!
//! ```text
//! u   = clamp((w/2 + a - d) / (2a), 0, 1)
//! α_j = 3u² - 2u³
//! v   = Π_j (1 - α_j)
//! ```
//!
//! so untouched pixels stay exactly white and overlapping strokes darken
//! multiplicatively. [`backward`] runs the chain rule through that model down
//! to the Bernstein weights of the nearest polyline segment.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, domain, Result};
use crate::geometry::{bernstein, Canvas, Point2, VectorSketch, DEFAULT_FLATTEN_SAMPLES};
use crate::math;

/// Row-major `H×W×C` image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, channels, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(domain(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(RasterImage {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image from values that may stray outside `[0, 1]` (for
    /// example after resampling or a gradient step) by clamping them.
    pub fn from_clamped(height: usize, width: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, channels, data.len())?;
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(RasterImage {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        RasterImage::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    /// Channel mean per pixel, row-major `H×W`.
    pub fn grayscale(&self) -> Vec<f64> {
        let c = self.channels as f64;
        self.data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / c)
            .collect()
    }
}

fn check_shape(height: usize, width: usize, channels: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(domain("image dimensions must be positive"));
    }
    if channels != 1 && channels != 3 {
        return Err(domain(format!("unsupported channel count {channels}")));
    }
    if len != height * width * channels {
        return Err(contract(format!(
            "image data length {len} does not match {height}x{width}x{channels}"
        )));
    }
    Ok(())
}

/// Gradient of a scalar loss with respect to each pixel of a [`RasterImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrad {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl PixelGrad {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        PixelGrad {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `dLoss/dP` for every control point of a sketch.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointGrad {
    pub strokes: Vec<[Point2; 4]>,
}

impl ControlPointGrad {
    /// Gradient laid out like [`VectorSketch::coordinates`].
    pub fn flat(&self) -> Vec<f64> {
        self.strokes
            .iter()
            .flat_map(|s| s.iter().flat_map(|p| [p.x, p.y]))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.strokes.iter().flatten().all(|p| p.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterConfig {
    pub flatten_samples: usize,
    pub aa_halfwidth: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig {
            flatten_samples: DEFAULT_FLATTEN_SAMPLES,
            aa_halfwidth: 1.0,
        }
    }
}

impl RasterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.flatten_samples < 2 {
            return Err(domain("flatten_samples must be at least 2"));
        }
        if !(self.aa_halfwidth > 0.0 && self.aa_halfwidth.is_finite()) {
            return Err(domain("aa_halfwidth must be positive"));
        }
        Ok(())
    }
}

/// Channels of every rendered sketch.
pub const RENDER_CHANNELS: usize = 3;

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy)]
struct PixelRect {
    r0: usize,
    r1: usize,
    c0: usize,
    c1: usize,
}

impl PixelRect {
    fn cols(&self) -> usize {
        self.c1 - self.c0 + 1
    }

    fn rows(&self) -> usize {
        self.r1 - self.r0 + 1
    }

    /// Pixels whose centers lie within `reach` of the box `[lo, hi]`,
    /// clipped to the canvas; `None` when nothing is left.
    fn around(lo: Point2, hi: Point2, reach: f64, canvas: Canvas) -> Option<PixelRect> {
        let c0 = math::ceil(lo.x - reach).max(0.0);
        let r0 = math::ceil(lo.y - reach).max(0.0);
        let c1 = math::floor(hi.x + reach).min((canvas.width - 1) as f64);
        let r1 = math::floor(hi.y + reach).min((canvas.height - 1) as f64);
        if c0 > c1 || r0 > r1 {
            return None;
        }
        Some(PixelRect {
            r0: r0 as usize,
            r1: r1 as usize,
            c0: c0 as usize,
            c1: c1 as usize,
        })
    }
}

/// Distance from each pixel in a stroke's reach to its polyline.
struct StrokeField {
    rect: PixelRect,
    polyline: Vec<Point2>,
    /// Distance to the nearest segment, `INFINITY` when out of reach.
    dist: Vec<f64>,
    /// Index of the nearest segment (lowest index on ties).
    segment: Vec<u32>,
}

impl StrokeField {
    fn compute(polyline: Vec<Point2>, reach: f64, canvas: Canvas) -> Option<StrokeField> {
        let (lo, hi) = bounds(&polyline);
        let rect = PixelRect::around(lo, hi, reach, canvas)?;
        let mut dist = vec![f64::INFINITY; rect.rows() * rect.cols()];
        let mut segment = vec![0u32; dist.len()];
        for (i, seg) in polyline.windows(2).enumerate() {
            let (a, b) = (seg[0], seg[1]);
            let slo = Point2::new(a.x.min(b.x), a.y.min(b.y));
            let shi = Point2::new(a.x.max(b.x), a.y.max(b.y));
            let Some(sr) = PixelRect::around(slo, shi, reach, canvas) else {
                continue;
            };
            for r in sr.r0..=sr.r1 {
                let row = (r - rect.r0) * rect.cols();
                for c in sr.c0..=sr.c1 {
                    let p = Point2::new(c as f64, r as f64);
                    let d = segment_distance(p, a, b).0;
                    let k = row + c - rect.c0;
                    if d < dist[k] {
                        dist[k] = d;
                        segment[k] = i as u32;
                    }
                }
            }
        }
        Some(StrokeField {
            rect,
            polyline,
            dist,
            segment,
        })
    }
}

fn bounds(points: &[Point2]) -> (Point2, Point2) {
    points.iter().fold(
        (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        ),
        |(lo, hi), p| {
            (
                Point2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Point2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        },
    )
}

/// Distance from `p` to segment `ab` and the clamped parameter of the
/// closest point.
#[inline]
fn segment_distance(p: Point2, a: Point2, b: Point2) -> (f64, f64) {
    let ab = b - a;
    let l2 = ab.length_squared();
    let s = if l2 > 0.0 {
        ((p - a).dot(ab) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((p - (a + ab * s)).length(), s)
}

/// Smoothstep coverage: returns `(u, α)`.
#[inline]
fn coverage(d: f64, reach: f64, aa: f64) -> (f64, f64) {
    let u = ((reach - d) / (2.0 * aa)).clamp(0.0, 1.0);
    (u, u * u * (3.0 - 2.0 * u))
}

fn stroke_fields(sketch: &VectorSketch, cfg: &RasterConfig) -> Vec<Option<StrokeField>> {
    let reach = sketch.stroke_width() / 2.0 + cfg.aa_halfwidth;
    let canvas = sketch.canvas();
    let mut polyline = Vec::new();
    sketch
        .strokes()
        .iter()
        .map(|s| {
            s.flatten_into(cfg.flatten_samples, &mut polyline);
            StrokeField::compute(polyline.clone(), reach, canvas)
        })
        .collect()
}

/// Renders `sketch` into a white `H×W×3` image.
pub fn render(sketch: &VectorSketch, cfg: &RasterConfig) -> Result<RasterImage> {
    cfg.validate()?;
    let canvas = sketch.canvas();
    let reach = sketch.stroke_width() / 2.0 + cfg.aa_halfwidth;
    let mut value = vec![1.0f64; canvas.height * canvas.width];
    for field in stroke_fields(sketch, cfg).iter().flatten() {
        let rect = field.rect;
        for r in rect.r0..=rect.r1 {
            for c in rect.c0..=rect.c1 {
                let d = field.dist[(r - rect.r0) * rect.cols() + c - rect.c0];
                let (_, alpha) = coverage(d, reach, cfg.aa_halfwidth);
                if alpha > 0.0 {
                    value[r * canvas.width + c] *= 1.0 - alpha;
                }
            }
        }
    }
    let data = value.iter().flat_map(|&v| [v; RENDER_CHANNELS]).collect();
    Ok(RasterImage {
        height: canvas.height,
        width: canvas.width,
        channels: RENDER_CHANNELS,
        data,
    })
}

/// Propagates `pixel_grad` (the gradient with respect to [`render`]'s
/// output) back to the control points.
pub fn backward(sketch: &VectorSketch, cfg: &RasterConfig, pixel_grad: &PixelGrad) -> Result<ControlPointGrad> {
    cfg.validate()?;
    let canvas = sketch.canvas();
    if pixel_grad.height != canvas.height
        || pixel_grad.width != canvas.width
        || pixel_grad.channels != RENDER_CHANNELS
        || pixel_grad.data.len() != canvas.height * canvas.width * RENDER_CHANNELS
    {
        return Err(contract(format!(
            "pixel gradient {}x{}x{} does not match render output {}x{}x{}",
            pixel_grad.height, pixel_grad.width, pixel_grad.channels, canvas.height, canvas.width, RENDER_CHANNELS
        )));
    }
    let aa = cfg.aa_halfwidth;
    let reach = sketch.stroke_width() / 2.0 + aa;
    let fields = stroke_fields(sketch, cfg);

    // Product of the non-zero transmittances and the count of fully opaque
    // strokes per pixel, so Π_{k≠j}(1 - α_k) is available for every j.
    let n_px = canvas.height * canvas.width;
    let mut product = vec![1.0f64; n_px];
    let mut opaque = vec![0u16; n_px];
    for field in fields.iter().flatten() {
        let rect = field.rect;
        for r in rect.r0..=rect.r1 {
            for c in rect.c0..=rect.c1 {
                let d = field.dist[(r - rect.r0) * rect.cols() + c - rect.c0];
                let (_, alpha) = coverage(d, reach, aa);
                let px = r * canvas.width + c;
                if alpha >= 1.0 {
                    opaque[px] += 1;
                } else if alpha > 0.0 {
                    product[px] *= 1.0 - alpha;
                }
            }
        }
    }

    let dl_dv: Vec<f64> = pixel_grad
        .data
        .chunks_exact(RENDER_CHANNELS)
        .map(|g| g.iter().sum())
        .collect();

    let n = cfg.flatten_samples;
    let last = (n - 1) as f64;
    let mut out = Vec::with_capacity(sketch.len());
    for field in &fields {
        let mut grad = [Point2::default(); 4];
        let Some(field) = field else {
            out.push(grad);
            continue;
        };
        let rect = field.rect;
        for r in rect.r0..=rect.r1 {
            for c in rect.c0..=rect.c1 {
                let k = (r - rect.r0) * rect.cols() + c - rect.c0;
                let d = field.dist[k];
                let (u, alpha) = coverage(d, reach, aa);
                // flat parts of the smoothstep carry no gradient
                if u <= 0.0 || u >= 1.0 || d <= 0.0 {
                    continue;
                }
                let px = r * canvas.width + c;
                let g = dl_dv[px];
                if g == 0.0 || opaque[px] > 0 {
                    continue;
                }
                let others = product[px] / (1.0 - alpha);
                let dl_dalpha = -g * others;
                let dl_dd = dl_dalpha * 6.0 * u * (1.0 - u) * (-1.0 / (2.0 * aa));

                let i = field.segment[k] as usize;
                let (a, b) = (field.polyline[i], field.polyline[i + 1]);
                let p = Point2::new(c as f64, r as f64);
                let (_, s) = segment_distance(p, a, b);
                let q = a + (b - a) * s;
                let dir = (q - p) * (dl_dd / d);
                let wa = bernstein(i as f64 / last);
                let wb = bernstein((i + 1) as f64 / last);
                for m in 0..4 {
                    let coef = (1.0 - s) * wa[m] + s * wb[m];
                    grad[m].x += coef * dir.x;
                    grad[m].y += coef * dir.y;
                }
            }
        }
        out.push(grad);
    }
    Ok(ControlPointGrad { strokes: out })
}

/// Finite-difference step used by [`gradcheck`], in pixels.
pub const GRADCHECK_STEP: f64 = 1e-3;
/// Relative error at which a coordinate passes.
pub const GRADCHECK_TOLERANCE: f64 = 1e-2;
/// Coordinates with a smaller finite-difference magnitude are skipped.
pub const GRADCHECK_MIN_MAGNITUDE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    /// Coordinates whose finite difference exceeded the magnitude floor.
    pub checked: usize,
    pub passed: usize,
    pub max_rel_error: f64,
    pub median_rel_error: f64,
    pub pass_fraction: f64,
}

impl GradcheckReport {
    pub fn from_errors(mut errors: Vec<f64>, tolerance: f64) -> Self {
        errors.sort_by(f64::total_cmp);
        let checked = errors.len();
        let passed = errors.iter().filter(|&&e| e <= tolerance).count();
        let median_rel_error = match checked {
            0 => 0.0,
            n if n % 2 == 1 => errors[n / 2],
            n => 0.5 * (errors[n / 2 - 1] + errors[n / 2]),
        };
        GradcheckReport {
            checked,
            passed,
            max_rel_error: errors.last().copied().unwrap_or(0.0),
            median_rel_error,
            pass_fraction: if checked == 0 {
                1.0
            } else {
                passed as f64 / checked as f64
            },
        }
    }
}

/// Compares [`backward`] with central finite differences of [`render`].
///
/// Every trial jitters the control points by up to ±2 px, draws a random
/// per-pixel weighting `w ∈ [-1, 1]` for the loss `Σ w·v`, and checks every
/// coordinate. Trial `i` draws from stream `i` of a ChaCha generator keyed
/// by `seed`.
pub fn gradcheck(sketch: &VectorSketch, cfg: &RasterConfig, trials: usize, seed: u64) -> Result<GradcheckReport> {
    let errors = gradcheck_errors(sketch, cfg, trials, seed)?;
    Ok(GradcheckReport::from_errors(errors, GRADCHECK_TOLERANCE))
}

/// Relative errors of every checked coordinate, for pooling across sketches.
pub fn gradcheck_errors(sketch: &VectorSketch, cfg: &RasterConfig, trials: usize, seed: u64) -> Result<Vec<f64>> {
    if trials == 0 {
        return Err(domain("gradcheck needs at least one trial"));
    }
    cfg.validate()?;
    let canvas = sketch.canvas();
    let mut errors = Vec::new();
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        let jittered = sketch.map_points(|p| {
            canvas.clamp(Point2::new(
                p.x + rng.gen_range(-2.0..=2.0),
                p.y + rng.gen_range(-2.0..=2.0),
            ))
        });
        let weights: Vec<f64> = (0..canvas.height * canvas.width * RENDER_CHANNELS)
            .map(|_| rng.gen_range(-1.0..=1.0))
            .collect();
        let grad = PixelGrad {
            height: canvas.height,
            width: canvas.width,
            channels: RENDER_CHANNELS,
            data: weights.clone(),
        };
        let analytic = backward(&jittered, cfg, &grad)?.flat();
        let coords = jittered.coordinates();
        let loss = |coords: &[f64]| -> Result<f64> {
            let img = render(&jittered.with_coordinates(coords)?, cfg)?;
            Ok(img.data.iter().zip(&weights).map(|(v, w)| v * w).sum())
        };
        let mut probe = coords.clone();
        for (i, &a) in analytic.iter().enumerate() {
            probe[i] = coords[i] + GRADCHECK_STEP;
            let up = loss(&probe)?;
            probe[i] = coords[i] - GRADCHECK_STEP;
            let down = loss(&probe)?;
            probe[i] = coords[i];
            let fd = (up - down) / (2.0 * GRADCHECK_STEP);
            if math::abs(fd) > GRADCHECK_MIN_MAGNITUDE {
                errors.push(math::abs(a - fd) / math::abs(fd));
            }
        }
    }
    Ok(errors)
}
