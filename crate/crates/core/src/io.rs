//! Graymap and raster loading, corner CSV, dataset manifest.

use std::io::{Read, Write};
use std::path::Path;

use ::image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use ::image::{ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use crate::detector::CornerSet;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::scalar::Scalar;
use crate::synth::SynthFixture;
use crate::transforms::{Family, TransformSpec};

fn image_error(e: ::image::ImageError) -> Error {
    match e {
        ::image::ImageError::IoError(e) => Error::Io(e),
        other => Error::Format {
            kind: "image",
            message: other.to_string(),
        },
    }
}

/// Loads any supported raster (PGM, PNG, BMP, TIFF) as grayscale in `[0, 1]`.
pub fn read_image<T: Scalar>(path: impl AsRef<Path>) -> Result<GrayImage<T>> {
    let img = ::image::ImageReader::open(path.as_ref())?
        .with_guessed_format()?
        .decode()
        .map_err(image_error)?
        .into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img
        .into_raw()
        .into_iter()
        .map(|v| T::lit(v as f64 / 65535.0))
        .collect();
    GrayImage::from_vec(w, h, data)
}

/// 8-bit samples, rounded and clamped.
pub fn to_bytes<T: Scalar>(img: &GrayImage<T>) -> Vec<u8> {
    img.data()
        .iter()
        .map(|v| (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Binary 8-bit graymap (P5).
pub fn write_pgm_to<T: Scalar, W: Write>(img: &GrayImage<T>, out: W) -> Result<()> {
    let (w, h) = img.dimensions();
    PnmEncoder::new(out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&to_bytes(img), w as u32, h as u32, ExtendedColorType::L8)
        .map_err(image_error)
}

pub fn write_pgm<T: Scalar>(img: &GrayImage<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_pgm_to(img, file)
}

/// One row of the corner CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerRow {
    pub image_id: String,
    pub detector: String,
    pub x: f64,
    pub y: f64,
    pub curvature: f64,
    pub is_t_junction: bool,
}

pub const GROUND_TRUTH: &str = "ground_truth";

pub fn corner_rows<T: Scalar>(set: &CornerSet<T>, detector: &str) -> Vec<CornerRow> {
    set.corners
        .iter()
        .map(|c| CornerRow {
            image_id: set.image_id.clone(),
            detector: detector.to_string(),
            x: c.x.as_f64(),
            y: c.y.as_f64(),
            curvature: c.curvature.as_f64(),
            is_t_junction: c.is_t_junction,
        })
        .collect()
}

/// Ground-truth rows for a fixture: curvature holds the interior angle in degrees.
pub fn ground_truth_rows<T>(fx: &SynthFixture<T>) -> Vec<CornerRow> {
    fx.true_corners
        .iter()
        .zip(&fx.corner_angles)
        .map(|(p, a)| CornerRow {
            image_id: fx.id.clone(),
            detector: GROUND_TRUTH.to_string(),
            x: p.x,
            y: p.y,
            curvature: *a,
            is_t_junction: false,
        })
        .collect()
}

/// Writes the header even when `rows` is empty.
pub fn write_corner_csv<W: Write>(rows: &[CornerRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record([
        "image_id",
        "detector",
        "x",
        "y",
        "curvature",
        "is_t_junction",
    ])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corner_csv<R: Read>(input: R) -> Result<Vec<CornerRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(Error::from)
}

/// One transformed image of a dataset. Paths are relative to the manifest's directory
/// unless absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub image_id: String,
    pub family: Family,
    pub label: String,
    pub sx: f64,
    pub sy: f64,
    pub shx: f64,
    pub shy: f64,
    pub theta: f64,
    pub quality: Option<u8>,
    pub variance: Option<f64>,
    pub seed: u64,
    pub base_path: String,
    pub output_path: String,
}

impl ManifestRow {
    pub fn new(image_id: &str, spec: &TransformSpec, base_path: &str, output_path: &str) -> Self {
        Self {
            image_id: image_id.to_string(),
            family: spec.family,
            label: spec.label(),
            sx: spec.sx,
            sy: spec.sy,
            shx: spec.shx,
            shy: spec.shy,
            theta: spec.theta,
            quality: spec.quality,
            variance: spec.variance,
            seed: spec.seed,
            base_path: base_path.to_string(),
            output_path: output_path.to_string(),
        }
    }

    pub fn spec(&self) -> Result<TransformSpec> {
        let spec = TransformSpec {
            family: self.family,
            sx: self.sx,
            sy: self.sy,
            shx: self.shx,
            shy: self.shy,
            theta: self.theta,
            quality: self.quality,
            variance: self.variance,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn write_manifest<W: Write>(rows: &[ManifestRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest<R: Read>(input: R) -> Result<Vec<ManifestRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(Error::from)
}
