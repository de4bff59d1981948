//! End-to-end detection: edges, curves, junctions, curvature, refinement.

use serde::{Deserialize, Serialize};

use crate::contour::{
    bridge_gaps, detect_t_junctions, extract_curves, smooth_curve, Curve, SmoothStatus,
};
use crate::curvature::{
    accumulate, combine_cpda, normalize, profile_maxima, refine_angle, refine_curvature,
    CurvatureProfile, DetectorParams, Mode, OpCounters,
};
use crate::error::Result;
use crate::geometry::Point;
use crate::image::{canny, EdgeMap, GrayImage};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corner<T> {
    pub x: T,
    pub y: T,
    /// Normalized curvature; `1` for T-junctions.
    pub curvature: T,
    /// Index of the source curve; `None` for T-junctions.
    pub curve_id: Option<usize>,
    pub is_t_junction: bool,
}

impl<T: Scalar> Corner<T> {
    pub fn position(&self) -> Point<T> {
        Point::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CornerSet<T> {
    pub image_id: String,
    pub corners: Vec<Corner<T>>,
}

impl<T: Scalar> CornerSet<T> {
    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn positions(&self) -> Vec<Point<T>> {
        self.corners.iter().map(Corner::position).collect()
    }
}

/// Per-run bookkeeping that does not affect the corner set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub edge_pixels: usize,
    pub curves: usize,
    pub unsmoothed_curves: usize,
    pub cornerless_curves: usize,
    pub candidates: usize,
    pub after_curvature_refinement: usize,
    pub after_angle_refinement: usize,
    pub t_junctions: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection<T> {
    pub corners: CornerSet<T>,
    pub counters: OpCounters,
    pub diagnostics: Diagnostics,
}

/// Intermediate state for one curve, exposed for inspection and tests.
#[derive(Clone, Debug)]
pub struct CurveAnalysis<T> {
    pub curve: Curve<T>,
    pub smoothed: Curve<T>,
    pub profile: CurvatureProfile<T>,
    pub candidates: Vec<usize>,
    pub after_curvature: Vec<usize>,
    pub corners: Vec<usize>,
}

/// Curvature stage for one curve: smoothing, accumulation for every chord, normalization,
/// candidate selection and both refinements.
pub fn analyze_curve<T: Scalar>(
    curve: &Curve<T>,
    curve_id: usize,
    params: &DetectorParams,
    counters: &mut OpCounters,
) -> (CurveAnalysis<T>, SmoothStatus) {
    let (smoothed, status) = smooth_curve(curve, T::lit(params.curve_sigma));
    let mut profiles: Vec<CurvatureProfile<T>> = params
        .chord_lengths
        .iter()
        .map(|&l| normalize(accumulate(&smoothed, l, curve_id, counters)))
        .collect();
    let profile = match params.mode {
        Mode::Sca if profiles.len() == 1 => profiles.pop().expect("one profile"),
        _ => combine_cpda(&profiles).expect("profiles share the curve"),
    };
    let values = profile.values().to_vec();
    let candidates = if profile.cornerless {
        Vec::new()
    } else {
        profile_maxima(&profile)
    };
    let after_curvature =
        refine_curvature(&candidates, &values, T::lit(params.curvature_threshold));
    let corners = refine_angle(
        &after_curvature,
        &values,
        &smoothed,
        T::lit(params.angle_threshold),
        params.angle_refinement,
        params.angle_method,
        params.tangent_reach,
    );
    (
        CurveAnalysis {
            curve: curve.clone(),
            smoothed,
            profile,
            candidates,
            after_curvature,
            corners,
        },
        status,
    )
}

/// Runs the full detector on a grayscale image.
pub fn detect<T: Scalar>(img: &GrayImage<T>, params: &DetectorParams) -> Result<Detection<T>> {
    detect_with_id(img, params, "")
}

pub fn detect_with_id<T: Scalar>(
    img: &GrayImage<T>,
    params: &DetectorParams,
    image_id: &str,
) -> Result<Detection<T>> {
    params.validate()?;
    let edges = canny(
        img,
        T::lit(params.canny_sigma),
        T::lit(params.canny_low),
        T::lit(params.canny_high),
    )?;
    detect_edges(&edges, params, image_id)
}

/// Runs everything after edge detection: gap bridging, junctions, curves, corners.
pub fn detect_edges<T: Scalar>(
    edges: &EdgeMap,
    params: &DetectorParams,
    image_id: &str,
) -> Result<Detection<T>> {
    params.validate()?;
    let edges = bridge_gaps(edges);
    let junctions = detect_t_junctions(&edges);
    let curves: Vec<Curve<T>> = extract_curves(&edges, params.effective_min_curve_length());

    let mut counters = OpCounters::default();
    let mut diagnostics = Diagnostics {
        edge_pixels: edges.count(),
        curves: curves.len(),
        ..Diagnostics::default()
    };

    let mut curvature_corners = Vec::new();
    for (id, curve) in curves.iter().enumerate() {
        let (analysis, status) = analyze_curve(curve, id, params, &mut counters);
        if status == SmoothStatus::TooShort {
            diagnostics.unsmoothed_curves += 1;
        }
        if analysis.profile.cornerless {
            diagnostics.cornerless_curves += 1;
        }
        diagnostics.candidates += analysis.candidates.len();
        diagnostics.after_curvature_refinement += analysis.after_curvature.len();
        diagnostics.after_angle_refinement += analysis.corners.len();
        for &k in &analysis.corners {
            let p = curve.points[k];
            curvature_corners.push(Corner {
                x: p.x,
                y: p.y,
                curvature: analysis.profile.values()[k],
                curve_id: Some(id),
                is_t_junction: false,
            });
        }
    }

    let radius = T::lit(params.junction_merge_radius);
    let mut corners: Vec<Corner<T>> = Vec::new();
    for j in &junctions {
        let p: Point<T> = j.position();
        if corners.iter().any(|c| c.position().dist(p) <= radius) {
            continue;
        }
        corners.push(Corner {
            x: p.x,
            y: p.y,
            curvature: T::one(),
            curve_id: None,
            is_t_junction: true,
        });
    }
    diagnostics.t_junctions = corners.len();
    let junction_points: Vec<Point<T>> = corners.iter().map(Corner::position).collect();
    curvature_corners.retain(|c| {
        junction_points
            .iter()
            .all(|&p| c.position().dist(p) > radius)
    });
    // Curvature corners first, in curve order, then junctions.
    curvature_corners.extend(corners);

    Ok(Detection {
        corners: CornerSet {
            image_id: image_id.to_string(),
            corners: curvature_corners,
        },
        counters,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_image_has_no_corners() {
        let img = GrayImage::<f64>::filled(64, 48, 0.3);
        for params in [DetectorParams::sca(), DetectorParams::cpda()] {
            let d = detect(&img, &params).unwrap();
            assert!(d.corners.is_empty());
            assert_eq!(d.counters, OpCounters::default());
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let img = GrayImage::<f64>::new(8, 8);
        let mut p = DetectorParams::sca();
        p.curvature_threshold = 1.5;
        assert!(detect(&img, &p).is_err());
        let mut p = DetectorParams::sca();
        p.chord_lengths = vec![2];
        assert!(detect(&img, &p).is_err());
        let mut p = DetectorParams::cpda();
        p.canny_low = 0.5;
        assert!(detect(&img, &p).is_err());
    }

    #[test]
    fn straight_bar_edge_has_no_corners() {
        // A vertical step spanning the whole image: its edge is a single open straight curve.
        let img = GrayImage::<f64>::from_fn(80, 120, |x, _| if x >= 40 { 0.9 } else { 0.1 });
        for params in [DetectorParams::sca(), DetectorParams::cpda()] {
            let d = detect(&img, &params).unwrap();
            assert_eq!(d.diagnostics.curves, 1);
            assert!(d.corners.is_empty(), "{:?}", d.corners);
        }
    }
}
