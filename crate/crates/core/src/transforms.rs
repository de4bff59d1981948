//! Benchmark transformations with exact point maps.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::image::GrayImage;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Scaling,
    Shearing,
    Rotation,
    RotationScale,
    NonuniformScale,
    JpegCompression,
    GaussianNoise,
    /// Not part of the benchmark; used for self-checks.
    Identity,
}

impl Family {
    /// The seven benchmark families, in report order.
    pub const BENCHMARK: [Family; 7] = [
        Family::Scaling,
        Family::Shearing,
        Family::Rotation,
        Family::RotationScale,
        Family::NonuniformScale,
        Family::JpegCompression,
        Family::GaussianNoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Scaling => "scaling",
            Family::Shearing => "shearing",
            Family::Rotation => "rotation",
            Family::RotationScale => "rotation_scale",
            Family::NonuniformScale => "nonuniform_scale",
            Family::JpegCompression => "jpeg_compression",
            Family::GaussianNoise => "gaussian_noise",
            Family::Identity => "identity",
        }
    }

    pub fn is_geometric(self) -> bool {
        !matches!(self, Family::JpegCompression | Family::GaussianNoise)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let all = Family::BENCHMARK.iter().chain([Family::Identity].iter());
        all.copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::param(format!("unknown transform family `{s}`")))
    }
}

/// Per-image transformation counts published for the 23-image benchmark. Shearing, rotation
/// and nonuniform scaling cannot be reproduced from their stated parameter grids.
pub const PUBLISHED_COUNTS: [(Family, usize); 7] = [
    (Family::Scaling, 345),
    (Family::Shearing, 1081),
    (Family::Rotation, 437),
    (Family::RotationScale, 4025),
    (Family::NonuniformScale, 1772),
    (Family::JpegCompression, 460),
    (Family::GaussianNoise, 230),
];

/// One transformation. Unused parameters keep their neutral values (scale 1, shear 0,
/// angle 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub family: Family,
    pub sx: f64,
    pub sy: f64,
    pub shx: f64,
    pub shy: f64,
    /// Degrees.
    pub theta: f64,
    pub quality: Option<u8>,
    pub variance: Option<f64>,
    pub seed: u64,
}

impl TransformSpec {
    fn neutral(family: Family) -> Self {
        Self {
            family,
            sx: 1.0,
            sy: 1.0,
            shx: 0.0,
            shy: 0.0,
            theta: 0.0,
            quality: None,
            variance: None,
            seed: 0,
        }
    }

    pub fn identity() -> Self {
        Self::neutral(Family::Identity)
    }

    pub fn scaling(s: f64) -> Self {
        Self {
            sx: s,
            sy: s,
            ..Self::neutral(Family::Scaling)
        }
    }

    pub fn shearing(shx: f64, shy: f64) -> Self {
        Self {
            shx,
            shy,
            ..Self::neutral(Family::Shearing)
        }
    }

    pub fn rotation(theta: f64) -> Self {
        Self {
            theta,
            ..Self::neutral(Family::Rotation)
        }
    }

    pub fn rotation_scale(theta: f64, sx: f64, sy: f64) -> Self {
        Self {
            theta,
            sx,
            sy,
            ..Self::neutral(Family::RotationScale)
        }
    }

    pub fn nonuniform(sx: f64, sy: f64) -> Self {
        Self {
            sx,
            sy,
            ..Self::neutral(Family::NonuniformScale)
        }
    }

    pub fn jpeg(quality: u8) -> Self {
        Self {
            quality: Some(quality),
            ..Self::neutral(Family::JpegCompression)
        }
    }

    pub fn noise(variance: f64, seed: u64) -> Self {
        Self {
            variance: Some(variance),
            seed,
            ..Self::neutral(Family::GaussianNoise)
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn is_geometric(&self) -> bool {
        self.family.is_geometric()
    }

    /// Short unique name within the family, used in file names and reports.
    pub fn label(&self) -> String {
        let f = self.family.name();
        match self.family {
            Family::Identity => f.to_string(),
            Family::Scaling => format!("{f}_s{}", self.sx),
            Family::Shearing => format!("{f}_x{}_y{}", self.shx, self.shy),
            Family::Rotation => format!("{f}_t{}", self.theta),
            Family::RotationScale => format!("{f}_t{}_x{}_y{}", self.theta, self.sx, self.sy),
            Family::NonuniformScale => format!("{f}_x{}_y{}", self.sx, self.sy),
            Family::JpegCompression => format!("{f}_q{}", self.quality.unwrap_or(0)),
            Family::GaussianNoise => format!("{f}_v{}", self.variance.unwrap_or(0.0)),
        }
    }

    /// Linear part of the forward map, `scale * rotation * shear`, acting on pixel offsets
    /// from the image center.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        if !self.is_geometric() {
            return [[1.0, 0.0], [0.0, 1.0]];
        }
        let (s, c) = self.theta.to_radians().sin_cos();
        let rot = [[c, -s], [s, c]];
        let shear = [[1.0, self.shx], [self.shy, 1.0]];
        let rs = mat_mul(rot, shear);
        [
            [self.sx * rs[0][0], self.sx * rs[0][1]],
            [self.sy * rs[1][0], self.sy * rs[1][1]],
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.matrix();
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        if !(det.is_finite() && det.abs() > 1e-9) {
            return Err(Error::param(format!("{} is singular", self.label())));
        }
        match self.family {
            Family::JpegCompression => match self.quality {
                Some(q) if (1..=100).contains(&q) => Ok(()),
                q => Err(Error::param(format!(
                    "jpeg quality must lie in 1..=100, got {q:?}"
                ))),
            },
            Family::GaussianNoise => match self.variance {
                Some(v) if v > 0.0 && v.is_finite() => Ok(()),
                v => Err(Error::param(format!(
                    "noise variance must be positive, got {v:?}"
                ))),
            },
            _ => Ok(()),
        }
    }
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Inverse of a 2x2 matrix; `None` when singular.
pub fn invert(a: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() <= 1e-12 || !det.is_finite() {
        return None;
    }
    Some([
        [a[1][1] / det, -a[0][1] / det],
        [-a[1][0] / det, a[0][0] / det],
    ])
}

fn tenths(range: std::ops::RangeInclusive<i32>) -> impl Iterator<Item = f64> {
    range.map(|k| k as f64 / 10.0)
}

/// All specs of one family, in a fixed order. Noise specs carry seed 0; see
/// [`TransformSpec::with_seed`].
pub fn enumerate_specs(family: Family) -> Vec<TransformSpec> {
    match family {
        Family::Identity => vec![TransformSpec::identity()],
        Family::Scaling => tenths(5..=20)
            .filter(|&s| s != 1.0)
            .map(TransformSpec::scaling)
            .collect(),
        Family::Shearing => {
            let grid: Vec<f64> = (0..=6).map(|k| k as f64 * 0.002).collect();
            let mut out = Vec::new();
            for &x in &grid {
                for &y in &grid {
                    if x != 0.0 || y != 0.0 {
                        out.push(TransformSpec::shearing(x, y));
                    }
                }
            }
            out
        }
        Family::Rotation => (-9..=9)
            .filter(|&k| k != 0)
            .map(|k| TransformSpec::rotation(k as f64 * 10.0))
            .collect(),
        Family::RotationScale => {
            let mut out = Vec::new();
            for t in -3..=3 {
                for sx in tenths(8..=12) {
                    for sy in tenths(8..=12) {
                        out.push(TransformSpec::rotation_scale(t as f64 * 10.0, sx, sy));
                    }
                }
            }
            out
        }
        Family::NonuniformScale => {
            let mut out = Vec::new();
            for sx in tenths(7..=13) {
                for sy in tenths(5..=15) {
                    out.push(TransformSpec::nonuniform(sx, sy));
                }
            }
            out
        }
        Family::JpegCompression => (1..=20).map(|k| TransformSpec::jpeg(5 * k)).collect(),
        Family::GaussianNoise => (1..=10)
            .map(|k| TransformSpec::noise(k as f64 * 0.005, 0))
            .collect(),
    }
}

/// Every benchmark spec, family by family.
pub fn enumerate_all() -> Vec<TransformSpec> {
    Family::BENCHMARK
        .iter()
        .flat_map(|&f| enumerate_specs(f))
        .collect()
}

fn center(w: usize, h: usize) -> (f64, f64) {
    ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

/// Canvas holding the image of the pixel domain `[-0.5, w - 0.5] x [-0.5, h - 0.5]` under
/// the linear map `a` applied about the center.
pub fn affine_output_dimensions(a: [[f64; 2]; 2], w: usize, h: usize) -> (usize, usize) {
    let (hw, hh) = (w as f64 / 2.0, h as f64 / 2.0);
    let ext_x = (a[0][0] * hw).abs() + (a[0][1] * hh).abs();
    let ext_y = (a[1][0] * hw).abs() + (a[1][1] * hh).abs();
    // Tolerate rounding in the matrix entries, e.g. cos(90 degrees).
    let size = |ext: f64| ((2.0 * ext - 1e-6).ceil().max(1.0)) as usize;
    (size(ext_x), size(ext_y))
}

pub fn output_dimensions(spec: &TransformSpec, w: usize, h: usize) -> (usize, usize) {
    if spec.is_geometric() {
        affine_output_dimensions(spec.matrix(), w, h)
    } else {
        (w, h)
    }
}

/// Forward map of a point in the input frame of a `w x h` image to the output canvas.
pub fn map_point_affine(a: [[f64; 2]; 2], p: Point<f64>, w: usize, h: usize) -> Point<f64> {
    let (ow, oh) = affine_output_dimensions(a, w, h);
    let (cx, cy) = center(w, h);
    let (ox, oy) = center(ow, oh);
    let (dx, dy) = (p.x - cx, p.y - cy);
    Point::new(
        a[0][0] * dx + a[0][1] * dy + ox,
        a[1][0] * dx + a[1][1] * dy + oy,
    )
}

/// Forward map of `p`, given in the frame of a `w x h` input, into the output canvas frame.
/// Identity for photometric families.
pub fn map_point(spec: &TransformSpec, p: Point<f64>, w: usize, h: usize) -> Point<f64> {
    if spec.is_geometric() {
        map_point_affine(spec.matrix(), p, w, h)
    } else {
        p
    }
}

/// Forward map in a frame centered on the origin: just the linear part.
pub fn map_point_centered(spec: &TransformSpec, p: Point<f64>) -> Point<f64> {
    let a = spec.matrix();
    Point::new(a[0][0] * p.x + a[0][1] * p.y, a[1][0] * p.x + a[1][1] * p.y)
}

fn bilinear<T: Scalar>(img: &GrayImage<T>, x: f64, y: f64) -> f64 {
    let (w, h) = img.dimensions();
    if x < -0.5 || y < -0.5 || x > w as f64 - 0.5 || y > h as f64 - 0.5 {
        return 0.0;
    }
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (xi, yi) = (x0 as isize, y0 as isize);
    let g = |dx: isize, dy: isize| img.get_clamped(xi + dx, yi + dy).as_f64();
    let top = g(0, 0) * (1.0 - fx) + g(1, 0) * fx;
    let bottom = g(0, 1) * (1.0 - fx) + g(1, 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Warps `img` by the linear map `a` about its center, sampling by inverse mapping with
/// bilinear interpolation. Output pixels whose preimage leaves the input domain are 0.
pub fn warp_affine<T: Scalar>(img: &GrayImage<T>, a: [[f64; 2]; 2]) -> Result<GrayImage<T>> {
    let inv = invert(a).ok_or_else(|| Error::param("singular affine matrix"))?;
    let (w, h) = img.dimensions();
    let (ow, oh) = affine_output_dimensions(a, w, h);
    let (cx, cy) = center(w, h);
    let (ox, oy) = center(ow, oh);
    Ok(GrayImage::from_fn(ow, oh, |x, y| {
        let (dx, dy) = (x as f64 - ox, y as f64 - oy);
        let sx = inv[0][0] * dx + inv[0][1] * dy + cx;
        let sy = inv[1][0] * dx + inv[1][1] * dy + cy;
        T::lit(bilinear(img, sx, sy))
    }))
}

pub fn apply_geometric<T: Scalar>(
    img: &GrayImage<T>,
    spec: &TransformSpec,
) -> Result<GrayImage<T>> {
    if !spec.is_geometric() {
        return Err(Error::NotGeometric(spec.label()));
    }
    spec.validate()?;
    warp_affine(img, spec.matrix())
}

const LUMINANCE_TABLE: [[f64; 8]; 8] = [
    [16.0, 11.0, 10.0, 16.0, 24.0, 40.0, 51.0, 61.0],
    [12.0, 12.0, 14.0, 19.0, 26.0, 58.0, 60.0, 55.0],
    [14.0, 13.0, 16.0, 24.0, 40.0, 57.0, 69.0, 56.0],
    [14.0, 17.0, 22.0, 29.0, 51.0, 87.0, 80.0, 62.0],
    [18.0, 22.0, 37.0, 56.0, 68.0, 109.0, 103.0, 77.0],
    [24.0, 35.0, 55.0, 64.0, 81.0, 104.0, 113.0, 92.0],
    [49.0, 64.0, 78.0, 87.0, 103.0, 121.0, 120.0, 101.0],
    [72.0, 92.0, 95.0, 98.0, 112.0, 100.0, 103.0, 99.0],
];

/// Luminance quantization table for a quality factor in `1..=100`.
pub fn quantization_table(quality: u8) -> Result<[[f64; 8]; 8]> {
    if !(1..=100).contains(&quality) {
        return Err(Error::param(format!(
            "jpeg quality must lie in 1..=100, got {quality}"
        )));
    }
    let q = quality as f64;
    let scale = if quality < 50 {
        5000.0 / q
    } else {
        200.0 - 2.0 * q
    };
    let mut out = [[0.0; 8]; 8];
    for (row, src) in out.iter_mut().zip(&LUMINANCE_TABLE) {
        for (v, &t) in row.iter_mut().zip(src) {
            *v = ((t * scale + 50.0) / 100.0).floor().clamp(1.0, 255.0);
        }
    }
    Ok(out)
}

fn dct_basis() -> [[f64; 8]; 8] {
    let mut c = [[0.0; 8]; 8];
    for (u, row) in c.iter_mut().enumerate() {
        let a = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
        for (x, v) in row.iter_mut().enumerate() {
            *v = a * (((2 * x + 1) as f64 * u as f64 * std::f64::consts::PI) / 16.0).cos();
        }
    }
    c
}

/// Lossy stage of baseline JPEG on the luminance: 8x8 DCT, quantization, reconstruction.
/// Partial border blocks are padded by edge replication.
pub fn jpeg_degrade<T: Scalar>(img: &GrayImage<T>, quality: u8) -> Result<GrayImage<T>> {
    let table = quantization_table(quality)?;
    let basis = dct_basis();
    let (w, h) = img.dimensions();
    let mut out = vec![0.0f64; w * h];
    let mut block = [[0.0f64; 8]; 8];
    for by in (0..h).step_by(8) {
        for bx in (0..w).step_by(8) {
            for (y, row) in block.iter_mut().enumerate() {
                for (x, v) in row.iter_mut().enumerate() {
                    let px = img.get_clamped((bx + x) as isize, (by + y) as isize);
                    *v = px.as_f64() * 255.0 - 128.0;
                }
            }
            // Forward transform: C * B * C^T, then quantize.
            let mut coef = [[0.0f64; 8]; 8];
            for u in 0..8 {
                for v in 0..8 {
                    let mut s = 0.0;
                    for y in 0..8 {
                        for x in 0..8 {
                            s += basis[u][y] * basis[v][x] * block[y][x];
                        }
                    }
                    coef[u][v] = (s / table[u][v]).round() * table[u][v];
                }
            }
            for y in 0..8 {
                for x in 0..8 {
                    let (px, py) = (bx + x, by + y);
                    if px >= w || py >= h {
                        continue;
                    }
                    let mut s = 0.0;
                    for u in 0..8 {
                        for v in 0..8 {
                            s += basis[u][y] * basis[v][x] * coef[u][v];
                        }
                    }
                    out[py * w + px] = ((s + 128.0) / 255.0).clamp(0.0, 1.0);
                }
            }
        }
    }
    Ok(GrayImage::from_fn(w, h, |x, y| T::lit(out[y * w + x])))
}

/// Adds zero-mean Gaussian noise of the given variance and clamps to `[0, 1]`.
pub fn add_gaussian_noise<T: Scalar>(
    img: &GrayImage<T>,
    variance: f64,
    seed: u64,
) -> Result<GrayImage<T>> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::param(format!(
            "noise variance must be positive, got {variance}"
        )));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = img.dimensions();
    Ok(GrayImage::from_fn(w, h, |x, y| {
        let v = img.get(x, y).as_f64() + normal.sample(&mut rng);
        T::lit(v.clamp(0.0, 1.0))
    }))
}

/// Seed for one (image, spec) pair, independent of processing order.
pub fn derive_seed(base: u64, image_id: &str, label: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(base.to_le_bytes())
        .chain_update(image_id.as_bytes())
        .chain_update([0u8])
        .chain_update(label.as_bytes())
        .finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Applies any spec. Noise is seeded from the spec seed, `image_id` and the spec label.
pub fn apply<T: Scalar>(
    img: &GrayImage<T>,
    spec: &TransformSpec,
    image_id: &str,
) -> Result<GrayImage<T>> {
    spec.validate()?;
    match spec.family {
        Family::JpegCompression => jpeg_degrade(img, spec.quality.expect("validated")),
        Family::GaussianNoise => add_gaussian_noise(
            img,
            spec.variance.expect("validated"),
            derive_seed(spec.seed, image_id, &spec.label()),
        ),
        _ => apply_geometric(img, spec),
    }
}
