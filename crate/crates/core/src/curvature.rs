//! Chord-to-point distance accumulation.
//!
//! For a chord of `L` index steps, the curvature estimate at point `P_k` is the sum of the
//! perpendicular distances from `P_k` to every chord `(P_j, P_{j+L})` that keeps `P_k`
//! strictly inside, `j = k-L+1 ..= k-1`. The two extreme placements (`j = k-L` and `j = k`)
//! pass through `P_k` and contribute nothing, so they are skipped.
//!
//! The single-chord detector uses one chord length; the multi-chord baseline multiplies the
//! normalized profiles of three chord lengths. Both share the candidate selection and the
//! two refinement passes defined here.

use serde::{Deserialize, Serialize};

use crate::contour::Curve;
use crate::error::{Error, Result};
use crate::geometry::{angle_between, Point};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Three chords combined by product.
    Cpda,
    /// One chord.
    Sca,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Cpda => "cpda",
            Mode::Sca => "sca",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cpda" => Ok(Mode::Cpda),
            "sca" => Ok(Mode::Sca),
            other => Err(Error::param(format!("unknown detector `{other}`"))),
        }
    }
}

/// How the false-corner pass revisits candidates after a removal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleRefinement {
    /// Weakest offending candidate removed first, angles recomputed after each removal.
    Iterative,
    /// All angles computed once against the incoming candidate set.
    SinglePass,
}

/// How the angle at a candidate is measured from its two regions of support.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleMethod {
    /// Angle between the straight segments to the neighboring candidates.
    Chord,
    /// Angle between tangent directions at the candidate, with both ends of each region of
    /// support trimmed where smoothing rounds the corners. A straight region contributes its
    /// chord; a curved one the tangent at the candidate of a circle through three samples of
    /// its first `tangent_reach` points.
    Tangent,
}

/// Detector configuration. Defaults come from [`DetectorParams::sca`] and
/// [`DetectorParams::cpda`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub mode: Mode,
    pub chord_lengths: Vec<usize>,
    pub curvature_threshold: f64,
    /// Degrees.
    pub angle_threshold: f64,
    pub canny_sigma: f64,
    pub canny_low: f64,
    pub canny_high: f64,
    pub curve_sigma: f64,
    /// `None` selects `2 * max(chord_lengths) + 2`.
    pub min_curve_length: Option<usize>,
    pub angle_refinement: AngleRefinement,
    pub angle_method: AngleMethod,
    /// Number of support points used by [`AngleMethod::Tangent`].
    pub tangent_reach: usize,
    /// Curvature corners closer than this to a T-junction are merged into the junction.
    pub junction_merge_radius: f64,
}

/// Four times the smoothing footprint (`3 * sigma`) of the default curve smoothing.
pub const DEFAULT_TANGENT_REACH: usize = 36;

impl Default for DetectorParams {
    fn default() -> Self {
        Self::sca()
    }
}

impl DetectorParams {
    pub fn sca() -> Self {
        Self {
            mode: Mode::Sca,
            chord_lengths: vec![15],
            curvature_threshold: 0.067,
            angle_threshold: 157.0,
            canny_sigma: 1.4,
            canny_low: 0.1,
            canny_high: 0.2,
            curve_sigma: 3.0,
            min_curve_length: None,
            angle_refinement: AngleRefinement::Iterative,
            angle_method: AngleMethod::Tangent,
            tangent_reach: DEFAULT_TANGENT_REACH,
            junction_merge_radius: 3.0,
        }
    }

    pub fn cpda() -> Self {
        Self {
            mode: Mode::Cpda,
            chord_lengths: vec![10, 20, 30],
            curvature_threshold: 0.2,
            ..Self::sca()
        }
    }

    pub fn for_mode(mode: Mode) -> Self {
        match mode {
            Mode::Cpda => Self::cpda(),
            Mode::Sca => Self::sca(),
        }
    }

    pub fn max_chord(&self) -> usize {
        self.chord_lengths.iter().copied().max().unwrap_or(0)
    }

    pub fn effective_min_curve_length(&self) -> usize {
        self.min_curve_length.unwrap_or(2 * self.max_chord() + 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chord_lengths.is_empty() || self.chord_lengths.iter().any(|&l| l < 3) {
            return Err(Error::param(format!(
                "chord lengths must be non-empty and each >= 3, got {:?}",
                self.chord_lengths
            )));
        }
        if self.mode == Mode::Sca && self.chord_lengths.len() != 1 {
            return Err(Error::param(
                "single-chord mode takes exactly one chord length",
            ));
        }
        if !(self.curvature_threshold > 0.0 && self.curvature_threshold < 1.0) {
            return Err(Error::param(format!(
                "curvature threshold must lie in (0, 1), got {}",
                self.curvature_threshold
            )));
        }
        if !(self.angle_threshold > 90.0 && self.angle_threshold < 180.0) {
            return Err(Error::param(format!(
                "angle threshold must lie in (90, 180) degrees, got {}",
                self.angle_threshold
            )));
        }
        if !(self.curve_sigma > 0.0) {
            return Err(Error::param("curve smoothing sigma must be positive"));
        }
        if self.tangent_reach < 3 {
            return Err(Error::param("tangent reach must be at least 3 points"));
        }
        if !(self.junction_merge_radius >= 0.0) {
            return Err(Error::param("junction merge radius must be non-negative"));
        }
        Ok(())
    }
}

/// Operation counts for one detection run; merged by addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub sqrt_evals: u64,
    pub distance_evals: u64,
}

impl std::ops::Add for OpCounters {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            sqrt_evals: self.sqrt_evals + o.sqrt_evals,
            distance_evals: self.distance_evals + o.distance_evals,
        }
    }
}

impl std::ops::AddAssign for OpCounters {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl std::iter::Sum for OpCounters {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// Perpendicular distance from `p` to the line through `a` and `b`.
pub fn chord_point_distance<T: Scalar>(
    p: Point<T>,
    a: Point<T>,
    b: Point<T>,
    counters: &mut OpCounters,
) -> Result<T> {
    let chord = b - a;
    if chord.x == T::zero() && chord.y == T::zero() {
        return Err(Error::DegenerateChord);
    }
    counters.sqrt_evals += 1;
    counters.distance_evals += 1;
    Ok(chord.cross(p - a).abs() / chord.norm())
}

/// Per-point curvature data for one curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureProfile<T> {
    pub curve_id: usize,
    /// `None` for a combined multi-chord profile.
    pub chord_length: Option<usize>,
    pub closed: bool,
    /// Accumulated chord distances. A combined profile mirrors `combined` here.
    pub h: Vec<T>,
    /// `h / max(h)` over valid points.
    pub h_norm: Vec<T>,
    /// Value used for candidate selection: `h_norm` for one chord, the product for several.
    pub combined: Vec<T>,
    /// Points with full chord support.
    pub valid: Vec<bool>,
    /// Set by [`normalize`] when every valid `h` is zero.
    pub cornerless: bool,
    /// Largest `h` attributable to rounding alone; [`normalize`] treats anything at or
    /// below it as zero.
    pub noise_floor: T,
}

impl<T: Scalar> CurvatureProfile<T> {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Values that candidates are selected and thresholded on.
    pub fn values(&self) -> &[T] {
        &self.combined
    }
}

/// Which chord placements enter the sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumBounds {
    /// `j = k-L+1 ..= k-1`.
    Interior,
    /// `j = k-L ..= k`, including the two placements that end on `P_k`.
    Inclusive,
}

/// Accumulates chord-to-point distances for chord length `chord` over the interior
/// placements.
pub fn accumulate<T: Scalar>(
    curve: &Curve<T>,
    chord: usize,
    curve_id: usize,
    counters: &mut OpCounters,
) -> CurvatureProfile<T> {
    accumulate_with_bounds(curve, chord, curve_id, SumBounds::Interior, counters)
}

/// Like [`accumulate`] with explicit summation bounds.
///
/// The chord norm depends only on the placement, so it is computed once per placement and
/// shared by every point that placement serves: `sqrt_evals` counts placements, while
/// `distance_evals` counts point-to-chord evaluations.
pub fn accumulate_with_bounds<T: Scalar>(
    curve: &Curve<T>,
    chord: usize,
    curve_id: usize,
    bounds: SumBounds,
    counters: &mut OpCounters,
) -> CurvatureProfile<T> {
    let n = curve.len();
    let mut h = vec![T::zero(); n];
    let mut valid = vec![false; n];
    let pts = &curve.points;

    if chord >= 1 && n > 2 * chord {
        let (first, last) = if curve.closed {
            (0, n - 1)
        } else {
            (chord, n - 1 - chord)
        };
        let (lo, hi) = match bounds {
            SumBounds::Interior => (chord as isize - 1, 1isize),
            SumBounds::Inclusive => (chord as isize, 0isize),
        };
        // Placement j spans (P_j, P_{j+L}); cache its norm on first use.
        let mut norms: Vec<Option<T>> = vec![None; n];
        for (k, hk) in h.iter_mut().enumerate().take(last + 1).skip(first) {
            valid[k] = true;
            let p = pts[k];
            let mut acc = T::zero();
            let mut j = k as isize - lo;
            while j <= k as isize - hi {
                let ja = curve.offset(0, j).expect("chord start inside curve");
                let jb = curve
                    .offset(ja, chord as isize)
                    .expect("chord end inside curve");
                let (a, b) = (pts[ja], pts[jb]);
                let norm = *norms[ja].get_or_insert_with(|| {
                    counters.sqrt_evals += 1;
                    (b - a).norm()
                });
                counters.distance_evals += 1;
                acc += if norm > T::zero() {
                    (b - a).cross(p - a).abs() / norm
                } else {
                    // Coincident chord ends: fall back to the point-to-point distance.
                    counters.sqrt_evals += 1;
                    p.dist(a)
                };
                j += 1;
            }
            *hk = acc;
        }
    }

    CurvatureProfile {
        curve_id,
        chord_length: Some(chord),
        closed: curve.closed,
        h_norm: vec![T::zero(); n],
        combined: vec![T::zero(); n],
        h,
        valid,
        cornerless: false,
        noise_floor: noise_floor(pts, chord),
    }
}

/// Rounding bound for an accumulated sum: each distance carries an error of a few ulps of
/// the largest coordinate, and a sum holds fewer than `chord` of them.
fn noise_floor<T: Scalar>(pts: &[Point<T>], chord: usize) -> T {
    let scale = pts
        .iter()
        .fold(T::one(), |m, p| m.max(p.x.abs()).max(p.y.abs()));
    T::epsilon() * T::lit(64.0) * T::lit(chord.max(1) as f64) * scale
}

/// Divides by the maximum over valid points. A profile whose valid values are all zero,
/// up to rounding, is flagged cornerless and left at zero.
pub fn normalize<T: Scalar>(mut profile: CurvatureProfile<T>) -> CurvatureProfile<T> {
    let max = profile
        .h
        .iter()
        .zip(&profile.valid)
        .filter(|(_, &v)| v)
        .map(|(&h, _)| h)
        .fold(T::zero(), |a, b| a.max(b));
    profile.cornerless = !(max > profile.noise_floor);
    profile.h_norm = profile
        .h
        .iter()
        .zip(&profile.valid)
        .map(|(&h, &v)| {
            if v && !profile.cornerless {
                h / max
            } else {
                T::zero()
            }
        })
        .collect();
    profile.combined = profile.h_norm.clone();
    profile
}

/// Point-wise product of normalized profiles over the same curve; valid only where every
/// chord had support.
pub fn combine_cpda<T: Scalar>(profiles: &[CurvatureProfile<T>]) -> Result<CurvatureProfile<T>> {
    let Some(first) = profiles.first() else {
        return Err(Error::MismatchedProfiles);
    };
    if profiles
        .iter()
        .any(|p| p.curve_id != first.curve_id || p.len() != first.len())
    {
        return Err(Error::MismatchedProfiles);
    }
    let n = first.len();
    let valid: Vec<bool> = (0..n)
        .map(|k| profiles.iter().all(|p| p.valid[k]))
        .collect();
    let combined: Vec<T> = (0..n)
        .map(|k| {
            if valid[k] {
                profiles
                    .iter()
                    .map(|p| p.h_norm[k])
                    .fold(T::one(), |a, b| a * b)
            } else {
                T::zero()
            }
        })
        .collect();
    Ok(CurvatureProfile {
        curve_id: first.curve_id,
        chord_length: None,
        closed: first.closed,
        h: combined.clone(),
        h_norm: combined.clone(),
        cornerless: profiles.iter().any(|p| p.cornerless),
        noise_floor: T::zero(),
        combined,
        valid,
    })
}

/// Strict local maxima among valid neighbors. A plateau counts once, at its first index;
/// closed profiles wrap around.
pub fn local_maxima<T: Scalar>(values: &[T], valid: &[bool], closed: bool) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    if closed {
        if !valid.iter().all(|&v| v) {
            return out;
        }
        let Some(start) = (0..n).find(|&i| values[i] != values[(i + n - 1) % n]) else {
            return out;
        };
        let mut i = 0;
        while i < n {
            let a = (start + i) % n;
            let mut len = 1;
            while len < n && values[(a + len) % n] == values[a] {
                len += 1;
            }
            let before = values[(a + n - 1) % n];
            let after = values[(a + len) % n];
            if values[a] > before && values[a] > after {
                out.push(a);
            }
            i += len;
        }
        out.sort_unstable();
    } else {
        let mut i = 1;
        while i + 1 < n {
            if !valid[i] || !valid[i - 1] {
                i += 1;
                continue;
            }
            let mut end = i;
            while end + 1 < n && valid[end + 1] && values[end + 1] == values[i] {
                end += 1;
            }
            if end + 1 < n
                && valid[end + 1]
                && values[i] > values[i - 1]
                && values[i] > values[end + 1]
            {
                out.push(i);
            }
            i = end + 1;
        }
    }
    out
}

/// Candidates of a profile, using its selection values.
pub fn profile_maxima<T: Scalar>(profile: &CurvatureProfile<T>) -> Vec<usize> {
    local_maxima(profile.values(), &profile.valid, profile.closed)
}

/// Drops weak candidates: those whose value is strictly below `threshold`.
pub fn refine_curvature<T: Scalar>(candidates: &[usize], values: &[T], threshold: T) -> Vec<usize> {
    candidates
        .iter()
        .copied()
        .filter(|&k| values[k] >= threshold)
        .collect()
}

/// Curve indices from `k` toward its neighboring candidate on one side, inclusive.
fn support_arc<T: Scalar>(
    curve: &Curve<T>,
    sorted: &[usize],
    pos: usize,
    forward: bool,
) -> Vec<usize> {
    let n = curve.len();
    let k = sorted[pos];
    let m = sorted.len();
    let step: isize = if forward { 1 } else { -1 };
    let steps = if curve.closed {
        if m == 1 {
            n / 2
        } else {
            let other = if forward {
                sorted[(pos + 1) % m]
            } else {
                sorted[(pos + m - 1) % m]
            };
            let d = if forward {
                (other + n - k) % n
            } else {
                (k + n - other) % n
            };
            if d == 0 {
                n
            } else {
                d
            }
        }
    } else if forward {
        sorted.get(pos + 1).map_or(n - 1, |&o| o) - k
    } else if pos == 0 {
        k
    } else {
        k - sorted[pos - 1]
    };
    (0..=steps)
        .map(|s| {
            curve
                .offset(k, step * s as isize)
                .expect("arc stays on the curve")
        })
        .collect()
}

/// Largest deviation, in pixels, of a region of support from its chord for the region to
/// count as straight; about the amplitude of a digitized line's staircase.
const STRAIGHT_TOLERANCE: f64 = 1.0;

fn tangent_direction<T: Scalar>(curve: &Curve<T>, arc: &[usize], reach: usize) -> Point<T> {
    let p0 = curve.points[arc[0]];
    let n = arc.len() - 1;
    if n <= 3 {
        return curve.points[arc[n]] - p0;
    }
    // Both ends of the arc are rounded by smoothing; skip them.
    let first = (reach / 4).min(n / 4);
    let a = curve.points[arc[first]];

    // Long straight support: the chord of the whole trimmed arc averages out the staircase of
    // a digitized line better than a local fit.
    let b = curve.points[arc[n - first]];
    let chord = b - a;
    let chord_len = chord.norm();
    if n - 2 * first > reach && chord_len > T::epsilon() {
        let straight = arc[first..=n - first].iter().all(|&i| {
            (curve.points[i] - a).cross(chord).abs() <= T::lit(STRAIGHT_TOLERANCE) * chord_len
        });
        if straight {
            return chord;
        }
    }

    // Curved support: circle through three samples near the corner, tangent at the corner.
    let last = reach.min(n - first);
    let p2 = curve.points[arc[(first + last) / 2]];
    let p3 = curve.points[arc[last]];
    let (u, v) = (p2 - a, p3 - a);
    let det = u.cross(v);
    if det.abs() <= T::lit(1e-9) * u.norm() * v.norm() {
        return p3 - a;
    }
    let two = T::lit(2.0);
    let (uu, vv) = (u.norm_sq(), v.norm_sq());
    let center = a + Point::new(
        (v.y * uu - u.y * vv) / (two * det),
        (u.x * vv - v.x * uu) / (two * det),
    );
    let r = p0 - center;
    let tangent = Point::new(-r.y, r.x);
    if tangent.dot(a - p0) >= T::zero() {
        tangent
    } else {
        Point::new(r.y, -r.x)
    }
}

/// Angle in degrees at candidate `k`, measured against its nearest candidates (or curve
/// ends) on either side.
pub fn corner_angle<T: Scalar>(
    curve: &Curve<T>,
    candidates: &[usize],
    k: usize,
    method: AngleMethod,
    reach: usize,
) -> Result<T> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let pos = sorted
        .binary_search(&k)
        .map_err(|_| Error::param(format!("index {k} is not a candidate")))?;
    let back = support_arc(curve, &sorted, pos, false);
    let fwd = support_arc(curve, &sorted, pos, true);
    let p = curve.points[k];
    let (d1, d2) = match method {
        AngleMethod::Chord => {
            // A closed curve with at most two candidates has the same neighbor on both
            // sides; use the middle of each arc instead.
            let pick = |arc: &[usize]| {
                if curve.closed && sorted.len() <= 2 {
                    arc[arc.len() / 2]
                } else {
                    *arc.last().expect("non-empty arc")
                }
            };
            (curve.points[pick(&back)] - p, curve.points[pick(&fwd)] - p)
        }
        AngleMethod::Tangent => (
            tangent_direction(curve, &back, reach),
            tangent_direction(curve, &fwd, reach),
        ),
    };
    if d1.norm_sq() == T::zero() || d2.norm_sq() == T::zero() {
        return Err(Error::DegenerateAngle);
    }
    Ok(angle_between(d1, d2))
}

/// Removes false corners whose angle exceeds `delta` degrees. Candidates whose angle is
/// undefined are kept.
pub fn refine_angle<T: Scalar>(
    candidates: &[usize],
    values: &[T],
    curve: &Curve<T>,
    delta: T,
    refinement: AngleRefinement,
    method: AngleMethod,
    reach: usize,
) -> Vec<usize> {
    let mut kept = candidates.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let too_flat = |set: &[usize], k: usize| {
        corner_angle(curve, set, k, method, reach).is_ok_and(|a| a > delta)
    };
    match refinement {
        AngleRefinement::SinglePass => kept
            .iter()
            .copied()
            .filter(|&k| !too_flat(&kept, k))
            .collect(),
        AngleRefinement::Iterative => {
            loop {
                let mut order = kept.clone();
                order.sort_by(|&a, &b| {
                    values[a]
                        .partial_cmp(&values[b])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
                match order.into_iter().find(|&k| too_flat(&kept, k)) {
                    Some(k) => kept.retain(|&c| c != k),
                    None => break,
                }
            }
            kept
        }
    }
}
