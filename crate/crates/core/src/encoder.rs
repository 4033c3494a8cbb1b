// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! Image encoders.
//!
//! [`Encoder`] is the interface the optimizer and the analyses talk to: image
//! embeddings, activation maps for initialization, the cosine loss with its
//! pixel gradient, and (for encoders that have one) text embeddings.
//!
//! [`OrientedEnergyEncoder`] is a fully analytic stand-in that needs no
//! neural runtime: a bank of first-derivative-of-Gaussian filters at four
//! orientations and two scales, rectified by magnitude and average pooled
//! over a coarse grid. It is not meant to approximate a neural encoder, only
//! to satisfy the same contract with exact gradients.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Error, Result};
use crate::init::ActivationMap;
use crate::math;
use crate::raster::{GradcheckReport, PixelGrad, RasterImage};

/// A feature vector with an identifier and optional category label.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub id: String,
    pub category: Option<String>,
    pub values: Vec<f64>,
    /// Set when the encoder produced no signal at all (an all-zero vector).
    pub degenerate: bool,
}

impl Embedding {
    pub fn new(id: impl Into<String>, values: Vec<f64>) -> Self {
        let degenerate = values.iter().all(|&v| v == 0.0);
        Embedding {
            id: id.into(),
            category: None,
            values,
            degenerate,
        }
    }

    pub fn with_category(mut self, category: impl Into<String>) -> Self {
        self.category = Some(category.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.values.iter().map(|v| v * v).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderKind {
    BuiltinSemantic,
    BuiltinPerceptual,
    Bridge,
}

/// Set of operations an encoder serves. Bit order matches the bridge's
/// `describe` capability mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Capabilities(pub u8);

impl Capabilities {
    pub const EMBED_IMAGE: Capabilities = Capabilities(1);
    pub const EMBED_TEXT: Capabilities = Capabilities(1 << 1);
    pub const ACTIVATION_MAP: Capabilities = Capabilities(1 << 2);
    pub const LOSS_GRAD: Capabilities = Capabilities(1 << 3);
    pub const ALL: Capabilities = Capabilities(0b1111);

    pub const fn union(self, other: Capabilities) -> Capabilities {
        Capabilities(self.0 | other.0)
    }

    pub const fn contains(self, other: Capabilities) -> bool {
        self.0 & other.0 == other.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDescriptor {
    pub name: String,
    pub kind: EncoderKind,
    pub embedding_dim: usize,
    pub capabilities: Capabilities,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradResult {
    /// `1 - cos(Φ(image), target)`, in `[0, 2]`.
    pub loss: f64,
    pub pixel_grad: PixelGrad,
    /// Either embedding was all zeros; the loss is then 1 and the gradient 0.
    pub degenerate: bool,
}

pub trait Encoder {
    fn descriptor(&self) -> EncoderDescriptor;

    fn embed_image(&self, image: &RasterImage) -> Result<Embedding>;

    fn activation_map(&self, image: &RasterImage) -> Result<ActivationMap>;

    fn loss_and_grad(&self, image: &RasterImage, target: &Embedding) -> Result<LossGradResult>;

    fn embed_text(&self, _text: &str) -> Result<Embedding> {
        Err(Error::Capability("embed_text"))
    }
}

/// Side of the square grid every builtin encoder works on.
pub const WORK_SIZE: usize = 224;

const SCALES: [f64; 2] = [2.0, 4.0];

/// `(cos θ, sin θ)` for θ ∈ {0°, 45°, 90°, 135°}, exact on the axes.
const ORIENTATIONS: [(f64, f64); 4] = [
    (1.0, 0.0),
    (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
    (0.0, 1.0),
    (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinVariant {
    /// 8 filters pooled on a 7×7 grid and concatenated: 392 dimensions.
    Semantic,
    /// Magnitudes summed over the two scales per orientation, pooled on a
    /// 14×14 grid: 784 dimensions.
    Perceptual,
}

impl BuiltinVariant {
    fn grid(self) -> usize {
        match self {
            BuiltinVariant::Semantic => 7,
            BuiltinVariant::Perceptual => 14,
        }
    }

    fn channels(self) -> usize {
        match self {
            BuiltinVariant::Semantic => SCALES.len() * ORIENTATIONS.len(),
            BuiltinVariant::Perceptual => ORIENTATIONS.len(),
        }
    }

    pub fn dim(self) -> usize {
        self.channels() * self.grid() * self.grid()
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinVariant::Semantic => "builtin-semantic",
            BuiltinVariant::Perceptual => "builtin-perceptual",
        }
    }

    /// Feature channel of filter `(scale, orientation)`.
    fn channel(self, scale: usize, orientation: usize) -> usize {
        match self {
            BuiltinVariant::Semantic => scale * ORIENTATIONS.len() + orientation,
            BuiltinVariant::Perceptual => orientation,
        }
    }
}

/// Symmetric smoothing kernel and antisymmetric derivative kernel of one
/// scale, stored for offsets `0..=radius`.
#[derive(Debug, Clone)]
struct ScaleKernels {
    smooth: Vec<f64>,
    deriv: Vec<f64>,
}

impl ScaleKernels {
    fn new(sigma: f64) -> Self {
        // kernel side 6σ + 1
        let radius = (3.0 * sigma) as usize;
        let g: Vec<f64> = (0..=radius)
            .map(|j| math::exp(-((j * j) as f64) / (2.0 * sigma * sigma)))
            .collect();
        let g_total = g[0] + 2.0 * g[1..].iter().sum::<f64>();
        let smooth: Vec<f64> = g.iter().map(|v| v / g_total).collect();
        // Unit response to a unit ramp: Σ_j j·d[j] = 1 over both sides.
        let moment = 2.0 * (1..=radius).map(|j| (j * j) as f64 * smooth[j]).sum::<f64>();
        let deriv: Vec<f64> = (0..=radius).map(|j| j as f64 * smooth[j] / moment).collect();
        ScaleKernels { smooth, deriv }
    }
}

/// Half-sample symmetric reflection of an index into `0..n`.
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

#[derive(Clone, Copy)]
enum Axis {
    Rows,
    Cols,
}

#[derive(Clone, Copy)]
enum Parity {
    Even,
    Odd,
}

/// 1-D correlation along `axis` of an `n×n` field with a kernel given for
/// non-negative offsets. Even kernels pair `+j` and `-j` by sum, odd kernels
/// by difference, so a constant field gives an exact zero under an odd
/// kernel.
fn correlate(input: &[f64], n: usize, axis: Axis, kernel: &[f64], parity: Parity) -> Vec<f64> {
    let radius = kernel.len() - 1;
    let mut out = vec![0.0; n * n];
    let mut line = vec![0.0; n];
    for l in 0..n {
        for (i, v) in line.iter_mut().enumerate() {
            *v = match axis {
                Axis::Rows => input[l * n + i],
                Axis::Cols => input[i * n + l],
            };
        }
        for i in 0..n {
            let mut acc = match parity {
                Parity::Even => kernel[0] * line[i],
                Parity::Odd => 0.0,
            };
            for j in 1..=radius {
                let hi = line[reflect(i as isize + j as isize, n)];
                let lo = line[reflect(i as isize - j as isize, n)];
                acc += match parity {
                    Parity::Even => kernel[j] * (hi + lo),
                    Parity::Odd => kernel[j] * (hi - lo),
                };
            }
            match axis {
                Axis::Rows => out[l * n + i] = acc,
                Axis::Cols => out[i * n + l] = acc,
            }
        }
    }
    out
}

/// Adjoint of [`correlate`].
fn correlate_adjoint(grad: &[f64], n: usize, axis: Axis, kernel: &[f64], parity: Parity) -> Vec<f64> {
    let radius = kernel.len() - 1;
    let mut out = vec![0.0; n * n];
    let mut line = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for l in 0..n {
        for (i, v) in line.iter_mut().enumerate() {
            *v = match axis {
                Axis::Rows => grad[l * n + i],
                Axis::Cols => grad[i * n + l],
            };
        }
        acc.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let g = line[i];
            if g == 0.0 {
                continue;
            }
            if let Parity::Even = parity {
                acc[i] += kernel[0] * g;
            }
            for (j, &k) in kernel.iter().enumerate().take(radius + 1).skip(1) {
                let hi = reflect(i as isize + j as isize, n);
                let lo = reflect(i as isize - j as isize, n);
                acc[hi] += k * g;
                match parity {
                    Parity::Even => acc[lo] += k * g,
                    Parity::Odd => acc[lo] -= k * g,
                }
            }
        }
        for (i, &v) in acc.iter().enumerate() {
            match axis {
                Axis::Rows => out[l * n + i] = v,
                Axis::Cols => out[i * n + l] = v,
            }
        }
    }
    out
}

/// Bilinear resampling between grids, with pixel centers aligned and edges
/// clamped. Stored as four taps per output pixel so the transpose is cheap.
#[derive(Debug, Clone)]
struct Resampler {
    src: (usize, usize),
    taps: Vec<[(usize, f64); 4]>,
}

impl Resampler {
    fn new(src: (usize, usize), dst: (usize, usize)) -> Self {
        let axis = |o: usize, s: usize, d: usize| -> (usize, usize, f64) {
            let x = ((o as f64 + 0.5) * s as f64 / d as f64 - 0.5).clamp(0.0, (s - 1) as f64);
            let i0 = math::floor(x) as usize;
            let i1 = (i0 + 1).min(s - 1);
            (i0, i1, x - i0 as f64)
        };
        let mut taps = Vec::with_capacity(dst.0 * dst.1);
        for r in 0..dst.0 {
            let (r0, r1, fr) = axis(r, src.0, dst.0);
            for c in 0..dst.1 {
                let (c0, c1, fc) = axis(c, src.1, dst.1);
                taps.push([
                    (r0 * src.1 + c0, (1.0 - fr) * (1.0 - fc)),
                    (r0 * src.1 + c1, (1.0 - fr) * fc),
                    (r1 * src.1 + c0, fr * (1.0 - fc)),
                    (r1 * src.1 + c1, fr * fc),
                ]);
            }
        }
        Resampler { src, taps }
    }

    fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.taps
            .iter()
            .map(|t| t.iter().map(|&(i, w)| w * input[i]).sum())
            .collect()
    }

    fn adjoint(&self, grad: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.src.0 * self.src.1];
        for (t, &g) in self.taps.iter().zip(grad) {
            for &(i, w) in t {
                out[i] += w * g;
            }
        }
        out
    }
}

/// Resamples a row-major scalar field with bilinear interpolation.
pub fn resample_bilinear(data: &[f64], src: (usize, usize), dst: (usize, usize)) -> Vec<f64> {
    if src == dst {
        return data.to_vec();
    }
    Resampler::new(src, dst).apply(data)
}

/// Responses of one image at every scale and orientation.
struct Responses {
    /// `[scale][orientation]` → `n×n` signed response.
    maps: Vec<[Vec<f64>; 4]>,
}

/// Analytic oriented-energy encoder.
#[derive(Debug, Clone)]
pub struct OrientedEnergyEncoder {
    variant: BuiltinVariant,
    kernels: Vec<ScaleKernels>,
}

impl OrientedEnergyEncoder {
    pub fn new(variant: BuiltinVariant) -> Self {
        OrientedEnergyEncoder {
            variant,
            kernels: SCALES.iter().map(|&s| ScaleKernels::new(s)).collect(),
        }
    }

    pub fn semantic() -> Self {
        Self::new(BuiltinVariant::Semantic)
    }

    pub fn perceptual() -> Self {
        Self::new(BuiltinVariant::Perceptual)
    }

    pub fn variant(&self) -> BuiltinVariant {
        self.variant
    }

    /// Grayscale of `image` on the working grid.
    fn working_gray(&self, image: &RasterImage) -> Vec<f64> {
        let gray = image.grayscale();
        resample_bilinear(&gray, (image.height(), image.width()), (WORK_SIZE, WORK_SIZE))
    }

    fn responses(&self, gray: &[f64]) -> Responses {
        let n = WORK_SIZE;
        let maps = self
            .kernels
            .iter()
            .map(|k| {
                let gx = correlate(
                    &correlate(gray, n, Axis::Rows, &k.deriv, Parity::Odd),
                    n,
                    Axis::Cols,
                    &k.smooth,
                    Parity::Even,
                );
                let gy = correlate(
                    &correlate(gray, n, Axis::Rows, &k.smooth, Parity::Even),
                    n,
                    Axis::Cols,
                    &k.deriv,
                    Parity::Odd,
                );
                ORIENTATIONS.map(|(c, s)| {
                    if s == 0.0 {
                        gx.clone()
                    } else if c == 0.0 {
                        gy.clone()
                    } else {
                        gx.iter().zip(&gy).map(|(x, y)| c * x + s * y).collect()
                    }
                })
            })
            .collect();
        Responses { maps }
    }

    /// Cell index of each working-grid row/column.
    fn cell_of(&self) -> Vec<usize> {
        let grid = self.variant.grid();
        (0..WORK_SIZE).map(|i| i * grid / WORK_SIZE).collect()
    }

    fn cell_sizes(&self) -> Vec<usize> {
        let grid = self.variant.grid();
        let mut sizes = vec![0; grid];
        for c in self.cell_of() {
            sizes[c] += 1;
        }
        sizes
    }

    /// Pooled magnitudes before normalization.
    fn pooled(&self, resp: &Responses) -> Vec<f64> {
        let grid = self.variant.grid();
        let cells = grid * grid;
        let cell_of = self.cell_of();
        let sizes = self.cell_sizes();
        let mut sums = vec![0.0; self.variant.dim()];
        for (s, per_scale) in resp.maps.iter().enumerate() {
            for (o, map) in per_scale.iter().enumerate() {
                let base = self.variant.channel(s, o) * cells;
                for r in 0..WORK_SIZE {
                    let row_cell = cell_of[r] * grid;
                    for c in 0..WORK_SIZE {
                        sums[base + row_cell + cell_of[c]] += math::abs(map[r * WORK_SIZE + c]);
                    }
                }
            }
        }
        for ch in 0..self.variant.channels() {
            for cr in 0..grid {
                for cc in 0..grid {
                    sums[ch * cells + cr * grid + cc] /= (sizes[cr] * sizes[cc]) as f64;
                }
            }
        }
        sums
    }

    /// Raw (unnormalized) pooled features of `image`.
    pub fn features(&self, image: &RasterImage) -> Vec<f64> {
        self.pooled(&self.responses(&self.working_gray(image)))
    }

    /// Pixel gradient of `Σ dfeat·features(image)`.
    fn features_backward(&self, image: &RasterImage, resp: &Responses, dfeat: &[f64]) -> PixelGrad {
        let n = WORK_SIZE;
        let grid = self.variant.grid();
        let cells = grid * grid;
        let cell_of = self.cell_of();
        let sizes = self.cell_sizes();
        let mut dgray = vec![0.0; n * n];
        for (s, per_scale) in resp.maps.iter().enumerate() {
            let k = &self.kernels[s];
            let mut dgx = vec![0.0; n * n];
            let mut dgy = vec![0.0; n * n];
            for (o, map) in per_scale.iter().enumerate() {
                let base = self.variant.channel(s, o) * cells;
                let (cth, sth) = ORIENTATIONS[o];
                for r in 0..n {
                    for c in 0..n {
                        let v = map[r * n + c];
                        if v == 0.0 {
                            continue;
                        }
                        let (cr, cc) = (cell_of[r], cell_of[c]);
                        let df = dfeat[base + cr * grid + cc] / (sizes[cr] * sizes[cc]) as f64;
                        let dr = if v > 0.0 { df } else { -df };
                        dgx[r * n + c] += cth * dr;
                        dgy[r * n + c] += sth * dr;
                    }
                }
            }
            let from_x = correlate_adjoint(
                &correlate_adjoint(&dgx, n, Axis::Cols, &k.smooth, Parity::Even),
                n,
                Axis::Rows,
                &k.deriv,
                Parity::Odd,
            );
            let from_y = correlate_adjoint(
                &correlate_adjoint(&dgy, n, Axis::Cols, &k.deriv, Parity::Odd),
                n,
                Axis::Rows,
                &k.smooth,
                Parity::Even,
            );
            for ((d, a), b) in dgray.iter_mut().zip(&from_x).zip(&from_y) {
                *d += a + b;
            }
        }
        let (h, w, ch) = (image.height(), image.width(), image.channels());
        let dsrc = if (h, w) == (n, n) {
            dgray
        } else {
            Resampler::new((h, w), (n, n)).adjoint(&dgray)
        };
        let scale = 1.0 / ch as f64;
        PixelGrad {
            height: h,
            width: w,
            channels: ch,
            data: dsrc.iter().flat_map(|&g| core::iter::repeat_n(g * scale, ch)).collect(),
        }
    }
}

fn normalized(values: &[f64]) -> Option<(Vec<f64>, f64)> {
    let norm = math::sqrt(values.iter().map(|v| v * v).sum());
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    Some((values.iter().map(|v| v / norm).collect(), norm))
}

impl Encoder for OrientedEnergyEncoder {
    fn descriptor(&self) -> EncoderDescriptor {
        EncoderDescriptor {
            name: self.variant.name().to_string(),
            kind: match self.variant {
                BuiltinVariant::Semantic => EncoderKind::BuiltinSemantic,
                BuiltinVariant::Perceptual => EncoderKind::BuiltinPerceptual,
            },
            embedding_dim: self.variant.dim(),
            capabilities: Capabilities::EMBED_IMAGE
                .union(Capabilities::ACTIVATION_MAP)
                .union(Capabilities::LOSS_GRAD),
        }
    }

    fn embed_image(&self, image: &RasterImage) -> Result<Embedding> {
        let feats = self.features(image);
        Ok(match normalized(&feats) {
            Some((unit, _)) => Embedding::new("", unit),
            None => Embedding::new("", vec![0.0; feats.len()]),
        })
    }

    /// Mean filter magnitude over all scales and orientations, resampled to
    /// the image size.
    fn activation_map(&self, image: &RasterImage) -> Result<ActivationMap> {
        let resp = self.responses(&self.working_gray(image));
        let count = (SCALES.len() * ORIENTATIONS.len()) as f64;
        let mut mean = vec![0.0; WORK_SIZE * WORK_SIZE];
        for map in resp.maps.iter().flatten() {
            for (m, v) in mean.iter_mut().zip(map) {
                *m += math::abs(*v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let out = resample_bilinear(&mean, (WORK_SIZE, WORK_SIZE), (image.height(), image.width()));
        ActivationMap::new(
            image.height(),
            image.width(),
            out.into_iter().map(|v| v.max(0.0)).collect(),
        )
    }

    fn loss_and_grad(&self, image: &RasterImage, target: &Embedding) -> Result<LossGradResult> {
        if target.dim() != self.variant.dim() {
            return Err(contract(alloc::format!(
                "target has dimension {}, encoder produces {}",
                target.dim(),
                self.variant.dim()
            )));
        }
        let resp = self.responses(&self.working_gray(image));
        let feats = self.pooled(&resp);
        let (Some((e, norm)), Some((t, _))) = (normalized(&feats), normalized(&target.values)) else {
            return Ok(LossGradResult {
                loss: 1.0,
                pixel_grad: PixelGrad::zeros(image.height(), image.width(), image.channels()),
                degenerate: true,
            });
        };
        let cos: f64 = e.iter().zip(&t).map(|(a, b)| a * b).sum();
        let loss = (1.0 - cos).clamp(0.0, 2.0);
        // d(1 - e·t)/dF = -(t - (e·t) e) / ‖F‖
        let dfeat: Vec<f64> = e.iter().zip(&t).map(|(ei, ti)| -(ti - cos * ei) / norm).collect();
        Ok(LossGradResult {
            loss,
            pixel_grad: self.features_backward(image, &resp, &dfeat),
            degenerate: false,
        })
    }
}

/// Encoder finite-difference step on pixel values.
pub const ENCODER_GRADCHECK_STEP: f64 = 1e-3;
/// Pixels whose finite difference is smaller are skipped.
pub const ENCODER_GRADCHECK_MIN_MAGNITUDE: f64 = 1e-7;

/// Checks [`Encoder::loss_and_grad`] against central differences of
/// `1 - cos(embed_image(image), target)` on `samples` random pixel values.
///
/// Only values at least one step away from 0 and 1 are sampled, so both
/// probes stay valid images.
pub fn encoder_gradcheck<E: Encoder + ?Sized>(
    encoder: &E,
    image: &RasterImage,
    target: &Embedding,
    samples: usize,
    seed: u64,
) -> Result<GradcheckReport> {
    if samples == 0 {
        return Err(crate::error::domain("gradcheck needs at least one sample"));
    }
    let h = ENCODER_GRADCHECK_STEP;
    let analytic = encoder.loss_and_grad(image, target)?.pixel_grad;
    let candidates: Vec<usize> = image
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= h && v <= 1.0 - h)
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Ok(GradcheckReport::from_errors(
            Vec::new(),
            crate::raster::GRADCHECK_TOLERANCE,
        ));
    }
    let loss = |data: Vec<f64>| -> Result<f64> {
        let img = RasterImage::new(image.height(), image.width(), image.channels(), data)?;
        let e = encoder.embed_image(&img)?;
        Ok(1.0 - crate::analysis::cosine(&e.values, &target.values)?.value)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = Vec::new();
    for _ in 0..samples {
        let i = candidates[rng.gen_range(0..candidates.len())];
        let mut probe = image.data().to_vec();
        probe[i] += h;
        let up = loss(probe.clone())?;
        probe[i] -= 2.0 * h;
        let down = loss(probe)?;
        let fd = (up - down) / (2.0 * h);
        if math::abs(fd) > ENCODER_GRADCHECK_MIN_MAGNITUDE {
            errors.push(math::abs(analytic.data[i] - fd) / math::abs(fd));
        }
    }
    Ok(GradcheckReport::from_errors(errors, crate::raster::GRADCHECK_TOLERANCE))
}
