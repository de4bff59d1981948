//! Synthetic fixtures with analytically known corners.
//!
//! Shapes are filled polygons rendered with exact horizontal coverage over 16 sub-rows per
//! pixel, so edges are anti-aliased rather than binary.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, Point};
use crate::image::GrayImage;
use crate::scalar::Scalar;

/// Longest chord in the default configurations; shapes must support it.
pub const MAX_CHORD: usize = 30;

const SUB_ROWS: usize = 16;
const MARGIN: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Polygon,
    Star,
    RoundedRect,
    BlobNoCorners,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fill {
    pub foreground: f64,
    pub background: f64,
}

impl Default for Fill {
    fn default() -> Self {
        Self {
            foreground: 0.85,
            background: 0.0,
        }
    }
}

/// Generator inputs, kept with the fixture for reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ShapeParams {
    Polygon {
        vertices: usize,
        radius: f64,
        rotation_deg: f64,
    },
    Star {
        points: usize,
        outer_radius: f64,
        inner_radius: f64,
        rotation_deg: f64,
    },
    RoundedRect {
        width: f64,
        height: f64,
        corner_radius: f64,
        rotation_deg: f64,
    },
    Blob {
        radius: f64,
        aspect: f64,
        rotation_deg: f64,
        /// `(frequency, relative amplitude, phase)`.
        harmonics: Vec<(usize, f64, f64)>,
    },
}

#[derive(Clone, Debug)]
pub struct SynthFixture<T> {
    pub id: String,
    pub image: GrayImage<T>,
    pub true_corners: Vec<Point<f64>>,
    /// Unsigned angle at each true corner, degrees in `[0, 180]`.
    pub corner_angles: Vec<f64>,
    pub shape_kind: ShapeKind,
    pub params: ShapeParams,
    pub fill: Fill,
}

/// Renders a filled polygon (even-odd rule) with anti-aliased coverage.
pub fn rasterize_polygon<T: Scalar>(
    vertices: &[Point<f64>],
    width: usize,
    height: usize,
    fill: Fill,
) -> GrayImage<T> {
    let mut coverage = vec![0.0f64; width * height];
    let n = vertices.len();
    let weight = 1.0 / SUB_ROWS as f64;
    let mut xs: Vec<f64> = Vec::new();
    for py in 0..height {
        for s in 0..SUB_ROWS {
            let y = py as f64 - 0.5 + (s as f64 + 0.5) * weight;
            xs.clear();
            for i in 0..n {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                if (a.y <= y) != (b.y <= y) {
                    xs.push(a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x));
                }
            }
            xs.sort_by(|a, b| a.partial_cmp(b).expect("finite crossings"));
            for span in xs.chunks_exact(2) {
                let (x0, x1) = (span[0].max(-0.5), span[1].min(width as f64 - 0.5));
                if x1 <= x0 {
                    continue;
                }
                let first = (x0 + 0.5).floor() as usize;
                let last = ((x1 + 0.5).ceil() as usize).min(width);
                for px in first..last {
                    let lo = (px as f64 - 0.5).max(x0);
                    let hi = (px as f64 + 0.5).min(x1);
                    if hi > lo {
                        coverage[py * width + px] += (hi - lo) * weight;
                    }
                }
            }
        }
    }
    GrayImage::from_fn(width, height, |x, y| {
        let c = coverage[y * width + x].min(1.0);
        T::lit(fill.background + (fill.foreground - fill.background) * c)
    })
}

fn polygon_angles(vertices: &[Point<f64>]) -> Vec<f64> {
    let n = vertices.len();
    (0..n)
        .map(|i| {
            let p = vertices[i];
            angle_between(vertices[(i + n - 1) % n] - p, vertices[(i + 1) % n] - p)
        })
        .collect()
}

fn perimeter(vertices: &[Point<f64>]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].dist(vertices[(i + 1) % n]))
        .sum()
}

fn check_fits(outline: &[Point<f64>], canvas: (usize, usize)) -> Result<()> {
    let (w, h) = (canvas.0 as f64, canvas.1 as f64);
    if outline
        .iter()
        .any(|p| p.x < MARGIN || p.y < MARGIN || p.x > w - 1.0 - MARGIN || p.y > h - 1.0 - MARGIN)
    {
        return Err(Error::Fixture(format!(
            "shape does not fit a {}x{} canvas with a {MARGIN} px margin",
            canvas.0, canvas.1
        )));
    }
    let min_boundary = (2 * MAX_CHORD + 2) as f64;
    if perimeter(outline) < min_boundary {
        return Err(Error::Fixture(format!(
            "boundary shorter than {min_boundary} px cannot support a {MAX_CHORD}-point chord"
        )));
    }
    Ok(())
}

fn center(canvas: (usize, usize)) -> Point<f64> {
    Point::new((canvas.0 as f64 - 1.0) / 2.0, (canvas.1 as f64 - 1.0) / 2.0)
}

#[allow(clippy::too_many_arguments)]
fn build<T: Scalar>(
    id: String,
    outline: Vec<Point<f64>>,
    true_corners: Vec<Point<f64>>,
    corner_angles: Vec<f64>,
    shape_kind: ShapeKind,
    params: ShapeParams,
    canvas: (usize, usize),
    fill: Fill,
) -> Result<SynthFixture<T>> {
    check_fits(&outline, canvas)?;
    Ok(SynthFixture {
        id,
        image: rasterize_polygon(&outline, canvas.0, canvas.1, fill),
        true_corners,
        corner_angles,
        shape_kind,
        params,
        fill,
    })
}

/// Filled regular n-gon centered on the canvas.
pub fn make_polygon<T: Scalar>(
    n_vertices: usize,
    radius: f64,
    rotation_deg: f64,
    canvas: (usize, usize),
    fill: Fill,
) -> Result<SynthFixture<T>> {
    if n_vertices < 3 || !(radius > 0.0) {
        return Err(Error::Fixture(format!(
            "polygon needs >= 3 vertices and a positive radius, got {n_vertices}, {radius}"
        )));
    }
    let c = center(canvas);
    let rot = rotation_deg.to_radians();
    let vertices: Vec<Point<f64>> = (0..n_vertices)
        .map(|i| {
            let t = rot + TAU * i as f64 / n_vertices as f64;
            Point::new(c.x + radius * t.cos(), c.y + radius * t.sin())
        })
        .collect();
    let angles = polygon_angles(&vertices);
    build(
        format!("polygon{n_vertices}_r{radius}_rot{rotation_deg}"),
        vertices.clone(),
        vertices,
        angles,
        ShapeKind::Polygon,
        ShapeParams::Polygon {
            vertices: n_vertices,
            radius,
            rotation_deg,
        },
        canvas,
        fill,
    )
}

/// Filled star with `n_points` tips; every tip and fold is a true corner.
pub fn make_star<T: Scalar>(
    n_points: usize,
    outer_radius: f64,
    inner_radius: f64,
    rotation_deg: f64,
    canvas: (usize, usize),
    fill: Fill,
) -> Result<SynthFixture<T>> {
    if n_points < 2 || !(outer_radius > inner_radius && inner_radius > 0.0) {
        return Err(Error::Fixture(format!(
            "star needs >= 2 points and outer > inner > 0, got {n_points}, {outer_radius}, {inner_radius}"
        )));
    }
    let c = center(canvas);
    let rot = rotation_deg.to_radians();
    let vertices: Vec<Point<f64>> = (0..2 * n_points)
        .map(|i| {
            let t = rot + PI * i as f64 / n_points as f64;
            let r = if i % 2 == 0 {
                outer_radius
            } else {
                inner_radius
            };
            Point::new(c.x + r * t.cos(), c.y + r * t.sin())
        })
        .collect();
    let angles = polygon_angles(&vertices);
    build(
        format!("star{n_points}_r{outer_radius}-{inner_radius}_rot{rotation_deg}"),
        vertices.clone(),
        vertices,
        angles,
        ShapeKind::Star,
        ShapeParams::Star {
            points: n_points,
            outer_radius,
            inner_radius,
            rotation_deg,
        },
        canvas,
        fill,
    )
}

/// Filled rectangle with circular-arc corners; the true corners sit at the arc midpoints.
pub fn make_rounded_rect<T: Scalar>(
    width: f64,
    height: f64,
    corner_radius: f64,
    rotation_deg: f64,
    canvas: (usize, usize),
    fill: Fill,
) -> Result<SynthFixture<T>> {
    if !(corner_radius >= 0.0 && 2.0 * corner_radius < width.min(height)) {
        return Err(Error::Fixture(format!(
            "corner radius {corner_radius} does not fit a {width}x{height} rectangle"
        )));
    }
    let c = center(canvas);
    let (hw, hh) = (width / 2.0, height / 2.0);
    let rot = rotation_deg.to_radians();
    let place = |p: Point<f64>| {
        let (s, co) = rot.sin_cos();
        Point::new(c.x + p.x * co - p.y * s, c.y + p.x * s + p.y * co)
    };
    let arc_steps = 24;
    let mut outline = Vec::new();
    let mut corners = Vec::new();
    // Corner arc centers in order, each with the start angle of its quarter turn.
    let arcs = [
        (Point::new(hw - corner_radius, hh - corner_radius), 0.0),
        (
            Point::new(-hw + corner_radius, hh - corner_radius),
            0.5 * PI,
        ),
        (Point::new(-hw + corner_radius, -hh + corner_radius), PI),
        (
            Point::new(hw - corner_radius, -hh + corner_radius),
            1.5 * PI,
        ),
    ];
    for (ac, start) in arcs {
        for s in 0..=arc_steps {
            let t = start + 0.5 * PI * s as f64 / arc_steps as f64;
            outline.push(place(ac + Point::new(t.cos(), t.sin()) * corner_radius));
        }
        let mid = start + 0.25 * PI;
        corners.push(place(ac + Point::new(mid.cos(), mid.sin()) * corner_radius));
    }
    build(
        format!("rrect{width}x{height}_rc{corner_radius}_rot{rotation_deg}"),
        outline,
        corners,
        vec![90.0; 4],
        ShapeKind::RoundedRect,
        ShapeParams::RoundedRect {
            width,
            height,
            corner_radius,
            rotation_deg,
        },
        canvas,
        fill,
    )
}

fn blob_outline(c: Point<f64>, params: &ShapeParams) -> Vec<Point<f64>> {
    let ShapeParams::Blob {
        radius,
        aspect,
        rotation_deg,
        harmonics,
    } = params
    else {
        unreachable!("blob parameters")
    };
    let samples = 720;
    let rot = rotation_deg.to_radians();
    (0..samples)
        .map(|i| {
            let t = TAU * i as f64 / samples as f64;
            let r = radius
                * (1.0
                    + harmonics
                        .iter()
                        .map(|&(k, a, phi)| a * (k as f64 * t + phi).cos())
                        .sum::<f64>());
            let (x, y) = (r * aspect * t.cos(), r * t.sin());
            let (s, co) = rot.sin_cos();
            Point::new(c.x + x * co - y * s, c.y + x * s + y * co)
        })
        .collect()
}

/// Smooth closed blob with a low-order Fourier boundary and no corners. Harmonic `k`
/// (2..=4) gets amplitude `u / (smoothness * k^2)` with `u` uniform in `[0, 1)`; an infinite
/// smoothness gives a circle.
pub fn make_blob<T: Scalar>(
    canvas: (usize, usize),
    smoothness: f64,
    seed: u64,
    fill: Fill,
) -> Result<SynthFixture<T>> {
    if !(smoothness >= 1.0) {
        return Err(Error::Fixture(format!(
            "blob smoothness must be >= 1, got {smoothness}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let harmonics = if smoothness.is_infinite() {
        Vec::new()
    } else {
        (2..=4usize)
            .map(|k| {
                let u: f64 = rng.random();
                let phase: f64 = rng.random::<f64>() * TAU;
                (k, u / (smoothness * (k * k) as f64), phase)
            })
            .collect()
    };
    let params = ShapeParams::Blob {
        radius: 0.3 * canvas.0.min(canvas.1) as f64,
        aspect: 1.0,
        rotation_deg: 0.0,
        harmonics,
    };
    let outline = blob_outline(center(canvas), &params);
    build(
        format!("blob_s{smoothness}_seed{seed}"),
        outline,
        Vec::new(),
        Vec::new(),
        ShapeKind::BlobNoCorners,
        params,
        canvas,
        fill,
    )
}

/// Ellipse with semi-axes `radius * aspect` (x) and `radius` (y), a corner-free blob.
pub fn make_ellipse<T: Scalar>(
    radius: f64,
    aspect: f64,
    rotation_deg: f64,
    canvas: (usize, usize),
    fill: Fill,
) -> Result<SynthFixture<T>> {
    let params = ShapeParams::Blob {
        radius,
        aspect,
        rotation_deg,
        harmonics: Vec::new(),
    };
    let outline = blob_outline(center(canvas), &params);
    build(
        format!("ellipse_r{radius}_a{aspect}_rot{rotation_deg}"),
        outline,
        Vec::new(),
        Vec::new(),
        ShapeKind::BlobNoCorners,
        params,
        canvas,
        fill,
    )
}

/// Canvas used by [`corpus`].
pub const CORPUS_CANVAS: (usize, usize) = (256, 256);

/// The 23-fixture corpus: 11 polygons, 5 stars, 3 rounded rectangles and 4 blobs. Every
/// straight side is at least `2 * MAX_CHORD` pixels long.
pub fn corpus<T: Scalar>(seed: u64) -> Vec<SynthFixture<T>> {
    let cv = CORPUS_CANVAS;
    let f = Fill::default();
    let mut out: Vec<SynthFixture<T>> = vec![
        make_polygon(3, 90.0, -90.0, cv, f),
        make_polygon(4, 90.0, 45.0, cv, f),
        make_polygon(4, 90.0, 20.0, cv, f),
        make_polygon(5, 100.0, -90.0, cv, f),
        make_polygon(6, 100.0, 0.0, cv, f),
        make_polygon(7, 105.0, 10.0, cv, f),
        make_polygon(8, 110.0, 22.5, cv, f),
        make_polygon(10, 115.0, 5.0, cv, f),
        make_polygon(12, 118.0, 0.0, cv, f),
        make_polygon(3, 85.0, 30.0, cv, f),
        make_polygon(8, 105.0, 0.0, cv, f),
        make_star(5, 115.0, 70.0, -90.0, cv, f),
        make_star(4, 112.0, 65.0, 0.0, cv, f),
        make_star(6, 115.0, 75.0, 15.0, cv, f),
        make_star(3, 110.0, 60.0, 90.0, cv, f),
        make_star(5, 110.0, 70.0, 20.0, cv, f),
        make_rounded_rect(180.0, 120.0, 6.0, 0.0, cv, f),
        make_rounded_rect(140.0, 140.0, 10.0, 30.0, cv, f),
        make_rounded_rect(190.0, 90.0, 5.0, -15.0, cv, f),
        make_blob(cv, f64::INFINITY, seed, f),
        make_ellipse(70.0, 1.4, 25.0, cv, f),
        make_blob(cv, 4.0, seed.wrapping_add(1), f),
        make_blob(cv, 6.0, seed.wrapping_add(2), f),
    ]
    .into_iter()
    .collect::<Result<_>>()
    .expect("corpus shapes fit the corpus canvas");
    for (i, fx) in out.iter_mut().enumerate() {
        fx.id = format!("fx{i:02}_{}", fx.id);
    }
    out
}
