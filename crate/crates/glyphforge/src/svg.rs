// Copyright 2026 the Glyphforge Authors
// SPDX-License-Identifier: Apache-2.0

//! SVG export and import of vector sketches.
//!
//! Sketch coordinates put the origin at the center of the top-left pixel,
//! SVG user space at its corner, so points are shifted by half a pixel on
//! the way out and back on the way in.

use std::fmt::Write as _;
use std::path::Path;

use glyphforge_core::geometry::{Canvas, CubicBezierStroke, Point2, VectorSketch};
use svgtypes::{PathParser, PathSegment};

use crate::error::{io_err, Error, Result};
use crate::fsutil::atomic_write;

const PIXEL_CENTER: f64 = 0.5;

pub fn to_svg(sketch: &VectorSketch) -> String {
    let Canvas { height, width } = sketch.canvas();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r##"  <rect width="{width}" height="{height}" fill="#ffffff"/>"##);
    for stroke in sketch.strokes() {
        let [p0, p1, p2, p3] = stroke.points.map(|p| (p.x + PIXEL_CENTER, p.y + PIXEL_CENTER));
        let _ = writeln!(
            out,
            r##"  <path d="M {} {} C {} {} {} {} {} {}" stroke="#000000" stroke-width="{}" fill="none" stroke-linecap="round"/>"##,
            p0.0,
            p0.1,
            p1.0,
            p1.1,
            p2.0,
            p2.1,
            p3.0,
            p3.1,
            sketch.stroke_width()
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(sketch: &VectorSketch, path: &Path) -> Result<()> {
    atomic_write(path, to_svg(sketch).as_bytes())
}

fn dimension(node: roxmltree::Node, name: &str) -> Result<usize> {
    let raw = node
        .attribute(name)
        .ok_or_else(|| Error::Svg(format!("root element lacks `{name}`")))?;
    let digits = raw.strip_suffix("px").unwrap_or(raw);
    digits
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Svg(format!("`{name}` must be a whole number of pixels, got `{raw}`")))
}

fn stroke_from_path(d: &str) -> Result<CubicBezierStroke> {
    let mut segments = PathParser::from(d);
    let mut next = || -> Result<Option<PathSegment>> {
        segments
            .next()
            .transpose()
            .map_err(|e| Error::Svg(format!("bad path data `{d}`: {e}")))
    };
    let p0 = match next()? {
        Some(PathSegment::MoveTo { abs: true, x, y }) => (x, y),
        _ => return Err(Error::Svg(format!("path must start with an absolute M: `{d}`"))),
    };
    let (p1, p2, p3) = match next()? {
        Some(PathSegment::CurveTo {
            abs: true,
            x1,
            y1,
            x2,
            y2,
            x,
            y,
        }) => ((x1, y1), (x2, y2), (x, y)),
        _ => return Err(Error::Svg(format!("path must be one absolute C segment: `{d}`"))),
    };
    if next()?.is_some() {
        return Err(Error::Svg(format!("path has more than one curve: `{d}`")));
    }
    let pt = |(x, y): (f64, f64)| Point2::new(x - PIXEL_CENTER, y - PIXEL_CENTER);
    Ok(CubicBezierStroke::new([pt(p0), pt(p1), pt(p2), pt(p3)])?)
}

/// Parses SVG produced by [`to_svg`]: one single-curve path per stroke, a
/// shared stroke width, and the canvas size from the root element.
pub fn from_svg(text: &str) -> Result<VectorSketch> {
    let doc = roxmltree::Document::parse(text).map_err(|e| Error::Svg(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "svg" {
        return Err(Error::Svg("root element is not <svg>".into()));
    }
    let canvas = Canvas::new(dimension(root, "height")?, dimension(root, "width")?);
    let mut width: Option<f64> = None;
    let mut strokes = Vec::new();
    for node in root.descendants().filter(|n| n.has_tag_name("path")) {
        let d = node
            .attribute("d")
            .ok_or_else(|| Error::Svg("path without `d`".into()))?;
        strokes.push(stroke_from_path(d)?);
        let w: f64 = node
            .attribute("stroke-width")
            .ok_or_else(|| Error::Svg("path without `stroke-width`".into()))?
            .parse()
            .map_err(|_| Error::Svg("unreadable stroke-width".into()))?;
        match width {
            Some(prev) if prev != w => return Err(Error::Svg("strokes have different widths".into())),
            _ => width = Some(w),
        }
    }
    let width = width.ok_or_else(|| Error::Svg("no strokes".into()))?;
    Ok(VectorSketch::new(strokes, width, canvas)?)
}

pub fn read_svg(path: &Path) -> Result<VectorSketch> {
    from_svg(&std::fs::read_to_string(path).map_err(io_err(path))?)
}
