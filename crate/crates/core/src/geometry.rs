// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Cubic Bezier strokes and the vector-sketch data model.
//!
//! Coordinates are continuous pixel units. The origin sits on the center of
//! the top-left pixel, `x` grows to the right and `y` grows downward, so the
//! pixel at row `r`, column `c` has its center at `(c, r)`.

use alloc::format;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use crate::error::{contract, domain, Result};

/// Default number of polyline samples per stroke.
pub const DEFAULT_FLATTEN_SAMPLES: usize = 64;

/// Default stroke width in pixels at a 224×224 canvas.
pub const DEFAULT_STROKE_WIDTH: f64 = 3.0;

/// Number of control points per stroke.
pub const CONTROL_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn length(self) -> f64 {
        crate::math::sqrt(self.length_squared())
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Cubic Bernstein basis at `t`: weights of `P0..P3`.
#[inline]
pub fn bernstein(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t]
}

/// A cubic Bezier curve given by exactly four control points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBezierStroke {
    pub points: [Point2; CONTROL_POINTS],
}

impl CubicBezierStroke {
    pub fn new(points: [Point2; CONTROL_POINTS]) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(domain("control points must be finite"));
        }
        Ok(CubicBezierStroke { points })
    }

    /// Degenerate stroke whose four control points coincide.
    pub fn point(p: Point2) -> Self {
        CubicBezierStroke { points: [p; 4] }
    }

    /// Evaluates the curve at `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> Result<Point2> {
        if !(0.0..=1.0).contains(&t) {
            return Err(domain(format!("bezier parameter {t} outside [0, 1]")));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> Point2 {
        // Endpoints are returned exactly rather than through the basis sum.
        if t == 0.0 {
            return self.points[0];
        }
        if t == 1.0 {
            return self.points[3];
        }
        // Offsets from P0 keep coincident control points exact.
        let w = bernstein(t);
        let p = &self.points;
        let (d1, d2, d3) = (p[1] - p[0], p[2] - p[0], p[3] - p[0]);
        Point2::new(
            p[0].x + (w[1] * d1.x + w[2] * d2.x + w[3] * d3.x),
            p[0].y + (w[1] * d1.y + w[2] * d2.y + w[3] * d3.y),
        )
    }

    /// Samples the curve at `t = i / (samples - 1)`.
    pub fn flatten(&self, samples: usize) -> Result<Vec<Point2>> {
        if samples < 2 {
            return Err(domain("flatten needs at least 2 samples"));
        }
        let mut out = Vec::with_capacity(samples);
        self.flatten_into(samples, &mut out);
        Ok(out)
    }

    pub(crate) fn flatten_into(&self, samples: usize, out: &mut Vec<Point2>) {
        out.clear();
        let last = (samples - 1) as f64;
        out.extend((0..samples).map(|i| self.eval_unchecked(i as f64 / last)));
    }

    pub fn map(&self, mut f: impl FnMut(Point2) -> Point2) -> Self {
        CubicBezierStroke {
            points: self.points.map(&mut f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Canvas {
    pub height: usize,
    pub width: usize,
}

impl Canvas {
    pub const fn new(height: usize, width: usize) -> Self {
        Canvas { height, width }
    }

    /// Whether `p` lies in the closed rectangle spanned by the pixel centers.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }

    pub fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(
            p.x.clamp(0.0, (self.width - 1) as f64),
            p.y.clamp(0.0, (self.height - 1) as f64),
        )
    }
}

/// `N` black strokes of a fixed width on a white canvas.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSketch {
    strokes: Vec<CubicBezierStroke>,
    stroke_width: f64,
    canvas: Canvas,
}

impl VectorSketch {
    pub fn new(strokes: Vec<CubicBezierStroke>, stroke_width: f64, canvas: Canvas) -> Result<Self> {
        if strokes.is_empty() {
            return Err(contract("a sketch needs at least one stroke"));
        }
        if !(stroke_width > 0.0 && stroke_width.is_finite()) {
            return Err(domain(format!("stroke width {stroke_width} must be positive")));
        }
        if canvas.height == 0 || canvas.width == 0 {
            return Err(domain("canvas dimensions must be positive"));
        }
        if strokes.iter().flat_map(|s| s.points).any(|p| !p.is_finite()) {
            return Err(domain("control points must be finite"));
        }
        Ok(VectorSketch {
            strokes,
            stroke_width,
            canvas,
        })
    }

    pub fn strokes(&self) -> &[CubicBezierStroke] {
        &self.strokes
    }

    pub fn stroke_width(&self) -> f64 {
        self.stroke_width
    }

    pub fn canvas(&self) -> Canvas {
        self.canvas
    }

    pub fn len(&self) -> usize {
        self.strokes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strokes.is_empty()
    }

    /// Applies `f` to every control point, keeping width and canvas.
    pub fn map_points(&self, mut f: impl FnMut(Point2) -> Point2) -> Self {
        VectorSketch {
            strokes: self.strokes.iter().map(|s| s.map(&mut f)).collect(),
            stroke_width: self.stroke_width,
            canvas: self.canvas,
        }
    }

    /// Sketch of `n_strokes` strokes whose control points are uniform over
    /// the canvas.
    pub fn random<R: rand::Rng + ?Sized>(
        rng: &mut R,
        canvas: Canvas,
        n_strokes: usize,
        stroke_width: f64,
    ) -> Result<Self> {
        let (w, h) = ((canvas.width - 1) as f64, (canvas.height - 1) as f64);
        let strokes = (0..n_strokes)
            .map(|_| {
                CubicBezierStroke::new(core::array::from_fn(|_| {
                    Point2::new(rng.gen_range(0.0..=w), rng.gen_range(0.0..=h))
                }))
            })
            .collect::<Result<Vec<_>>>()?;
        VectorSketch::new(strokes, stroke_width, canvas)
    }

    /// Flat view of all control-point coordinates as `[x0, y0, x1, y1, ...]`.
    pub fn coordinates(&self) -> Vec<f64> {
        self.strokes
            .iter()
            .flat_map(|s| s.points)
            .flat_map(|p| [p.x, p.y])
            .collect()
    }

    /// Rebuilds a sketch of the same shape from coordinates laid out as in
    /// [`VectorSketch::coordinates`].
    pub fn with_coordinates(&self, coords: &[f64]) -> Result<Self> {
        if coords.len() != self.strokes.len() * 8 {
            return Err(contract(format!(
                "expected {} coordinates, got {}",
                self.strokes.len() * 8,
                coords.len()
            )));
        }
        let strokes = coords
            .chunks_exact(8)
            .map(|c| {
                CubicBezierStroke::new([
                    Point2::new(c[0], c[1]),
                    Point2::new(c[2], c[3]),
                    Point2::new(c[4], c[5]),
                    Point2::new(c[6], c[7]),
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorSketch {
            strokes,
            stroke_width: self.stroke_width,
            canvas: self.canvas,
        })
    }
}

/// Shape of a sketch to synthesize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchSpec {
    pub n_strokes: usize,
    pub canvas: Canvas,
    pub stroke_width: f64,
}

impl SketchSpec {
    pub const MAX_STROKES: usize = 1024;

    pub fn new(n_strokes: usize) -> Result<Self> {
        let spec = SketchSpec {
            n_strokes,
            ..SketchSpec::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=Self::MAX_STROKES).contains(&self.n_strokes) {
            return Err(domain(format!(
                "stroke count {} outside 1..={}",
                self.n_strokes,
                Self::MAX_STROKES
            )));
        }
        if !(self.stroke_width > 0.0 && self.stroke_width.is_finite()) {
            return Err(domain("stroke width must be positive"));
        }
        if self.canvas.height == 0 || self.canvas.width == 0 {
            return Err(domain("canvas dimensions must be positive"));
        }
        Ok(())
    }

    /// Control points per stroke. Always four.
    pub const fn k_points(&self) -> usize {
        CONTROL_POINTS
    }
}

impl Default for SketchSpec {
    fn default() -> Self {
        SketchSpec {
            n_strokes: 16,
            canvas: Canvas::new(224, 224),
            stroke_width: DEFAULT_STROKE_WIDTH,
        }
    }
}
