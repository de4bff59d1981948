//! Matching, repeatability and localization error, and the experiment driver.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{DetectorParams, OpCounters};
use crate::detector::{detect_with_id, CornerSet};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::image::GrayImage;
use crate::scalar::Scalar;
use crate::transforms::{apply, enumerate_specs, map_point, Family, TransformSpec};

pub const MATCH_RADIUS: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CornerMatch {
    /// Original corner mapped into the test frame.
    pub original: Point<f64>,
    pub test: Point<f64>,
    pub distance: f64,
    pub original_index: usize,
    pub test_index: usize,
}

/// Greedy one-to-one matching: pairs within `radius` are taken in order of ascending
/// distance, ties broken by original index then test index.
pub fn match_points(original: &[Point<f64>], test: &[Point<f64>], radius: f64) -> Vec<CornerMatch> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, o) in original.iter().enumerate() {
        for (j, t) in test.iter().enumerate() {
            let d = o.dist(*t);
            if d <= radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_o = vec![false; original.len()];
    let mut used_t = vec![false; test.len()];
    let mut out = Vec::new();
    for (d, i, j) in pairs {
        if used_o[i] || used_t[j] {
            continue;
        }
        used_o[i] = true;
        used_t[j] = true;
        out.push(CornerMatch {
            original: original[i],
            test: test[j],
            distance: d,
            original_index: i,
            test_index: j,
        });
    }
    out
}

/// Maps the corners of an original `w x h` image through `spec` and matches them against
/// the corners found on the transformed image.
pub fn match_corners<T: Scalar>(
    original: &CornerSet<T>,
    test: &CornerSet<T>,
    spec: &TransformSpec,
    original_dims: (usize, usize),
    radius: f64,
) -> Vec<CornerMatch> {
    let mapped: Vec<Point<f64>> = original
        .corners
        .iter()
        .map(|c| {
            let p = Point::new(c.x.as_f64(), c.y.as_f64());
            map_point(spec, p, original_dims.0, original_dims.1)
        })
        .collect();
    let test: Vec<Point<f64>> = test.positions().iter().map(|p| p.cast()).collect();
    match_points(&mapped, &test, radius)
}

/// Percentage of repeated corners, averaged over both reference counts. `None` when either
/// image has no corners.
pub fn average_repeatability(repeated: usize, original: usize, test: usize) -> Option<f64> {
    if original == 0 || test == 0 {
        return None;
    }
    let a = repeated as f64;
    Some(100.0 * (a / original as f64 + a / test as f64) / 2.0)
}

/// Root mean square distance over the matched pairs. `None` without matches.
pub fn localization_error(matches: &[CornerMatch]) -> Option<f64> {
    if matches.is_empty() {
        return None;
    }
    let sum: f64 = matches
        .iter()
        .map(|m| (m.original - m.test).norm_sq())
        .sum();
    Some((sum / matches.len() as f64).sqrt())
}

/// A detector configuration with the name used in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedDetector {
    pub name: String,
    pub params: DetectorParams,
}

impl NamedDetector {
    pub fn new(name: impl Into<String>, params: DetectorParams) -> Self {
        Self {
            name: name.into(),
            params,
        }
    }

    /// `sca` and `cpda` with their default parameters.
    pub fn defaults() -> Vec<Self> {
        vec![
            Self::new("sca", DetectorParams::sca()),
            Self::new("cpda", DetectorParams::cpda()),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct BaseImage<T> {
    pub id: String,
    pub image: GrayImage<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkItem {
    pub image_id: String,
    pub spec: TransformSpec,
}

/// Detection on one original image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginalResult {
    pub image_id: String,
    pub detector: String,
    pub corners: usize,
    pub counters: OpCounters,
    pub error: Option<String>,
}

/// One (image, spec, detector) evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub image_id: String,
    pub family: Family,
    pub label: String,
    pub spec: TransformSpec,
    pub detector: String,
    pub repeated: usize,
    pub original_corners: usize,
    pub test_corners: usize,
    pub avg_repeatability: Option<f64>,
    pub localization_error: Option<f64>,
    pub counters: OpCounters,
    pub error: Option<String>,
}

impl ItemResult {
    pub fn status(&self) -> &str {
        match (&self.error, self.avg_repeatability) {
            (Some(e), _) => e,
            (None, None) => "undefined",
            (None, Some(_)) => "ok",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detectors: Vec<String>,
    pub originals: Vec<OriginalResult>,
    pub items: Vec<ItemResult>,
}

/// Means over one group of items. Undefined metrics and failed items are excluded and
/// counted separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub detector: String,
    /// `None` for the overall row.
    pub family: Option<Family>,
    pub items: usize,
    pub average_repeatability: Option<f64>,
    pub localization_error: Option<f64>,
    pub undefined: usize,
    pub failures: usize,
    pub test_corners: usize,
    pub counters: OpCounters,
}

/// Table-style summary for one detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorSummary {
    pub detector: String,
    pub average_repeatability: Option<f64>,
    pub localization_error: Option<f64>,
    /// Corners on the original images only.
    pub corner_count: usize,
    /// Corners on originals plus every transformed image.
    pub corner_count_all: usize,
    pub items: usize,
    pub undefined_items: usize,
    pub failed_items: usize,
    pub counters: OpCounters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub detectors: Vec<DetectorSummary>,
    /// Total sqrt evaluations of the first `sca` detector over the first `cpda` detector.
    pub sqrt_ratio_sca_over_cpda: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

impl EvalReport {
    fn aggregate(&self, detector: &str, family: Option<Family>) -> Aggregate {
        let items: Vec<&ItemResult> = self
            .items
            .iter()
            .filter(|i| i.detector == detector && family.is_none_or(|f| i.family == f))
            .collect();
        let ok: Vec<&&ItemResult> = items.iter().filter(|i| i.error.is_none()).collect();
        Aggregate {
            detector: detector.to_string(),
            family,
            items: items.len(),
            average_repeatability: mean(ok.iter().filter_map(|i| i.avg_repeatability)),
            localization_error: mean(ok.iter().filter_map(|i| i.localization_error)),
            undefined: ok.iter().filter(|i| i.avg_repeatability.is_none()).count(),
            failures: items.len() - ok.len(),
            test_corners: ok.iter().map(|i| i.test_corners).sum(),
            counters: ok.iter().map(|i| i.counters).sum(),
        }
    }

    fn families(&self) -> Vec<Family> {
        let mut f: Vec<Family> = self.items.iter().map(|i| i.family).collect();
        f.sort();
        f.dedup();
        f
    }

    /// Per-family rows for every detector, then one overall row per detector.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let families = self.families();
        let mut out = Vec::new();
        for d in &self.detectors {
            for &f in &families {
                out.push(self.aggregate(d, Some(f)));
            }
        }
        for d in &self.detectors {
            out.push(self.aggregate(d, None));
        }
        out
    }

    pub fn summary(&self) -> Summary {
        let detectors: Vec<DetectorSummary> = self
            .detectors
            .iter()
            .map(|d| {
                let overall = self.aggregate(d, None);
                let originals: Vec<&OriginalResult> = self
                    .originals
                    .iter()
                    .filter(|o| &o.detector == d && o.error.is_none())
                    .collect();
                let corner_count: usize = originals.iter().map(|o| o.corners).sum();
                let original_counters: OpCounters = originals.iter().map(|o| o.counters).sum();
                DetectorSummary {
                    detector: d.clone(),
                    average_repeatability: overall.average_repeatability,
                    localization_error: overall.localization_error,
                    corner_count,
                    corner_count_all: corner_count + overall.test_corners,
                    items: overall.items,
                    undefined_items: overall.undefined,
                    failed_items: overall.failures,
                    counters: original_counters + overall.counters,
                }
            })
            .collect();
        let sqrt_of = |name: &str| {
            detectors
                .iter()
                .find(|d| d.detector == name)
                .map(|d| d.counters.sqrt_evals)
        };
        let sqrt_ratio_sca_over_cpda = match (sqrt_of("sca"), sqrt_of("cpda")) {
            (Some(s), Some(c)) if c > 0 => Some(s as f64 / c as f64),
            _ => None,
        };
        Summary {
            detectors,
            sqrt_ratio_sca_over_cpda,
        }
    }

    /// True when every original and every item was processed.
    pub fn all_succeeded(&self) -> bool {
        self.originals.iter().all(|o| o.error.is_none())
            && self.items.iter().all(|i| i.error.is_none())
    }

    /// Error messages of failed originals and items.
    pub fn failures(&self) -> Vec<String> {
        let originals = self.originals.iter().filter_map(|o| {
            o.error
                .as_ref()
                .map(|e| format!("{} [{}] original: {e}", o.image_id, o.detector))
        });
        let items = self.items.iter().filter_map(|i| {
            i.error
                .as_ref()
                .map(|e| format!("{} [{}] {}: {e}", i.image_id, i.detector, i.label))
        });
        originals.chain(items).collect()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One row per work item followed by aggregate rows (image id `*`; family `all` for the
/// overall rows).
pub fn write_report_csv<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "image_id",
        "family",
        "label",
        "detector",
        "repeated",
        "original_corners",
        "test_corners",
        "avg_repeatability",
        "localization_error",
        "sqrt_evals",
        "distance_evals",
        "status",
    ])?;
    for i in &report.items {
        w.write_record([
            i.image_id.clone(),
            i.family.name().to_string(),
            i.label.clone(),
            i.detector.clone(),
            i.repeated.to_string(),
            i.original_corners.to_string(),
            i.test_corners.to_string(),
            fmt_opt(i.avg_repeatability),
            fmt_opt(i.localization_error),
            i.counters.sqrt_evals.to_string(),
            i.counters.distance_evals.to_string(),
            i.status().to_string(),
        ])?;
    }
    for a in report.aggregates() {
        w.write_record([
            "*".to_string(),
            a.family.map_or("all", Family::name).to_string(),
            "*".to_string(),
            a.detector.clone(),
            String::new(),
            String::new(),
            a.test_corners.to_string(),
            fmt_opt(a.average_repeatability),
            fmt_opt(a.localization_error),
            a.counters.sqrt_evals.to_string(),
            a.counters.distance_evals.to_string(),
            format!(
                "items={} undefined={} failed={}",
                a.items, a.undefined, a.failures
            ),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_json<W: Write>(report: &EvalReport, mut out: W) -> Result<()> {
    let json = serde_json::to_string_pretty(&report.summary()).map_err(|e| Error::Format {
        kind: "summary",
        message: e.to_string(),
    })?;
    out.write_all(json.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Per-spec means over images: one row per (detector, spec), ready for plotting a metric
/// against the transform parameters.
pub fn write_plot_csv<W: Write>(report: &EvalReport, out: W) -> Result<()> {
    let mut groups: BTreeMap<(String, Family, String), Vec<&ItemResult>> = BTreeMap::new();
    for i in report.items.iter().filter(|i| i.error.is_none()) {
        groups
            .entry((i.detector.clone(), i.family, i.label.clone()))
            .or_default()
            .push(i);
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "detector",
        "family",
        "label",
        "sx",
        "sy",
        "shx",
        "shy",
        "theta",
        "quality",
        "variance",
        "avg_repeatability",
        "localization_error",
        "images",
    ])?;
    for ((detector, family, label), items) in groups {
        let s = items[0].spec;
        w.write_record([
            detector,
            family.name().to_string(),
            label,
            s.sx.to_string(),
            s.sy.to_string(),
            s.shx.to_string(),
            s.shy.to_string(),
            s.theta.to_string(),
            s.quality.map_or_else(String::new, |q| q.to_string()),
            fmt_opt(s.variance),
            fmt_opt(mean(items.iter().filter_map(|i| i.avg_repeatability))),
            fmt_opt(mean(items.iter().filter_map(|i| i.localization_error))),
            items.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One spec per benchmark family: the first one at or after the middle of its grid that
/// changes the image.
pub fn smoke_specs() -> Vec<TransformSpec> {
    Family::BENCHMARK
        .iter()
        .map(|&f| {
            let specs = enumerate_specs(f);
            let mid = specs.len() / 2;
            specs[mid..]
                .iter()
                .find(|s| !(s.is_geometric() && s.matrix() == [[1.0, 0.0], [0.0, 1.0]]))
                .copied()
                .unwrap_or(specs[mid])
        })
        .collect()
}

/// Every base image crossed with every spec, in base-major order.
pub fn work_items<T>(bases: &[BaseImage<T>], specs: &[TransformSpec]) -> Vec<WorkItem> {
    bases
        .iter()
        .flat_map(|b| {
            specs.iter().map(|s| WorkItem {
                image_id: b.id.clone(),
                spec: *s,
            })
        })
        .collect()
}

/// Evaluates every item with every detector. `test_image(index, base, item)` produces the transformed image for
/// an item (generated or loaded); its failures are recorded per item. Work runs in parallel
/// but the report order follows `items` and `detectors`.
pub fn run_experiment_with<T, F>(
    bases: &[BaseImage<T>],
    detectors: &[NamedDetector],
    items: &[WorkItem],
    radius: f64,
    test_image: F,
) -> EvalReport
where
    T: Scalar,
    F: Fn(usize, &BaseImage<T>, &WorkItem) -> Result<GrayImage<T>> + Sync,
{
    let originals: Vec<Vec<Result<crate::detector::Detection<T>, String>>> = bases
        .par_iter()
        .map(|b| {
            detectors
                .iter()
                .map(|d| detect_with_id(&b.image, &d.params, &b.id).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();
    let index: BTreeMap<&str, usize> = bases
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.as_str(), i))
        .collect();

    let results: Vec<Vec<ItemResult>> = items
        .par_iter()
        .enumerate()
        .map(|(n, item)| {
            let blank = |d: &NamedDetector, error: String| ItemResult {
                image_id: item.image_id.clone(),
                family: item.spec.family,
                label: item.spec.label(),
                spec: item.spec,
                detector: d.name.clone(),
                repeated: 0,
                original_corners: 0,
                test_corners: 0,
                avg_repeatability: None,
                localization_error: None,
                counters: OpCounters::default(),
                error: Some(error),
            };
            let Some(&bi) = index.get(item.image_id.as_str()) else {
                let msg = format!("unknown base image `{}`", item.image_id);
                return detectors.iter().map(|d| blank(d, msg.clone())).collect();
            };
            let base = &bases[bi];
            let img = match test_image(n, base, item) {
                Ok(img) => img,
                Err(e) => return detectors.iter().map(|d| blank(d, e.to_string())).collect(),
            };
            let test_id = format!("{}:{}", item.image_id, item.spec.label());
            detectors
                .iter()
                .zip(&originals[bi])
                .map(|(d, orig)| {
                    let orig = match orig {
                        Ok(o) => o,
                        Err(e) => return blank(d, format!("original: {e}")),
                    };
                    match detect_with_id(&img, &d.params, &test_id) {
                        Ok(test) => {
                            let matches = match_corners(
                                &orig.corners,
                                &test.corners,
                                &item.spec,
                                base.image.dimensions(),
                                radius,
                            );
                            let (b, c) = (orig.corners.len(), test.corners.len());
                            ItemResult {
                                error: None,
                                repeated: matches.len(),
                                original_corners: b,
                                test_corners: c,
                                avg_repeatability: average_repeatability(matches.len(), b, c),
                                localization_error: localization_error(&matches),
                                counters: test.counters,
                                ..blank(d, String::new())
                            }
                        }
                        Err(e) => blank(d, e.to_string()),
                    }
                })
                .collect()
        })
        .collect();

    let originals = bases
        .iter()
        .zip(&originals)
        .flat_map(|(b, per)| {
            detectors.iter().zip(per).map(move |(d, r)| match r {
                Ok(det) => OriginalResult {
                    image_id: b.id.clone(),
                    detector: d.name.clone(),
                    corners: det.corners.len(),
                    counters: det.counters,
                    error: None,
                },
                Err(e) => OriginalResult {
                    image_id: b.id.clone(),
                    detector: d.name.clone(),
                    corners: 0,
                    counters: OpCounters::default(),
                    error: Some(e.clone()),
                },
            })
        })
        .collect();

    EvalReport {
        detectors: detectors.iter().map(|d| d.name.clone()).collect(),
        originals,
        items: results.into_iter().flatten().collect(),
    }
}

/// Generates every transformed image on the fly (noise seeded from `seed`, image id and
/// spec) and evaluates it.
pub fn run_experiment<T: Scalar>(
    bases: &[BaseImage<T>],
    detectors: &[NamedDetector],
    specs: &[TransformSpec],
    seed: u64,
) -> EvalReport {
    let items = work_items(bases, specs);
    run_experiment_with(bases, detectors, &items, MATCH_RADIUS, |_, base, item| {
        apply(&base.image, &item.spec.with_seed(seed), &base.id)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(x: f64, y: f64) -> Point<f64> {
        Point::new(x, y)
    }

    #[test]
    fn identical_sets_match_at_zero() {
        let pts = [p(1.0, 2.0), p(10.0, 3.0), p(4.0, 40.0)];
        let m = match_points(&pts, &pts, MATCH_RADIUS);
        assert_eq!(m.len(), 3);
        assert!(m
            .iter()
            .all(|m| m.distance == 0.0 && m.original_index == m.test_index));
    }

    #[test]
    fn offset_beyond_radius_is_unmatched() {
        assert!(match_points(&[p(0.0, 0.0)], &[p(5.0, 0.0)], MATCH_RADIUS).is_empty());
        assert_eq!(
            match_points(&[p(0.0, 0.0)], &[p(3.0, 0.0)], MATCH_RADIUS).len(),
            1
        );
    }

    #[test]
    fn equidistant_originals_tie_break_by_index() {
        let m = match_points(&[p(-2.0, 0.0), p(2.0, 0.0)], &[p(0.0, 0.0)], MATCH_RADIUS);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].original_index, 0);
    }

    #[test]
    fn greedy_takes_the_closest_pair_first() {
        // Oracle: enumerate both assignments; greedy must contain the global minimum pair.
        let o = [p(0.0, 0.0), p(2.5, 0.0)];
        let t = [p(2.0, 0.0)];
        let m = match_points(&o, &t, MATCH_RADIUS);
        assert_eq!((m.len(), m[0].original_index), (1, 1));
        assert_abs_diff_eq!(m[0].distance, 0.5);
    }

    #[test]
    fn repeatability_examples() {
        assert_eq!(average_repeatability(10, 10, 10), Some(100.0));
        assert_eq!(average_repeatability(1, 2, 2), Some(50.0));
        assert_eq!(average_repeatability(0, 4, 7), Some(0.0));
        assert_eq!(average_repeatability(0, 0, 7), None);
        assert_eq!(average_repeatability(0, 3, 0), None);
    }

    #[test]
    fn localization_examples() {
        let mk = |dx: f64, dy: f64| CornerMatch {
            original: p(5.0, 5.0),
            test: p(5.0 + dx, 5.0 + dy),
            distance: (dx * dx + dy * dy).sqrt(),
            original_index: 0,
            test_index: 0,
        };
        assert_eq!(localization_error(&[]), None);
        assert_eq!(localization_error(&[mk(0.0, 0.0), mk(0.0, 0.0)]), Some(0.0));
        assert_abs_diff_eq!(
            localization_error(&[mk(1.0, 1.0)]).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            localization_error(&[mk(1.0, 0.0), mk(1.0, 0.0)]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn identity_experiment_is_perfect() {
        let fx = crate::synth::make_polygon::<f64>(5, 50.0, 0.0, (128, 128), Default::default())
            .unwrap();
        let bases = [BaseImage {
            id: "pentagon".into(),
            image: fx.image,
        }];
        let report = run_experiment(
            &bases,
            &NamedDetector::defaults(),
            &[TransformSpec::identity()],
            0,
        );
        assert_eq!(report.items.len(), 2);
        for i in &report.items {
            assert_eq!(i.avg_repeatability, Some(100.0));
            assert_eq!(i.localization_error, Some(0.0));
        }
        let s = report.summary();
        assert_eq!(s.detectors[0].corner_count, 5);
        assert!(report.all_succeeded());
    }

    #[test]
    fn loader_failures_are_recorded_per_item() {
        let bases = [BaseImage {
            id: "a".into(),
            image: GrayImage::<f64>::filled(16, 16, 0.5),
        }];
        let items = vec![
            WorkItem {
                image_id: "a".into(),
                spec: TransformSpec::identity(),
            },
            WorkItem {
                image_id: "missing".into(),
                spec: TransformSpec::identity(),
            },
        ];
        let report = run_experiment_with(
            &bases,
            &NamedDetector::defaults(),
            &items,
            MATCH_RADIUS,
            |_, b, it| {
                if it.spec.family == Family::Identity {
                    Ok(b.image.clone())
                } else {
                    Err(Error::param("unused"))
                }
            },
        );
        assert_eq!(report.items.len(), 4);
        assert!(!report.all_succeeded());
        assert_eq!(report.failures().len(), 2);
        // Blank images have no corners: undefined, not failed.
        assert_eq!(report.items[0].status(), "undefined");
        let agg = report.aggregates();
        let overall = agg
            .iter()
            .find(|a| a.detector == "sca" && a.family.is_none())
            .unwrap();
        assert_eq!((overall.undefined, overall.failures), (1, 1));
        assert_eq!(overall.average_repeatability, None);
    }
}
