//! Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero when a hard
//! criterion fails. Criterion 8's ordering is reported as a warning only.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sca_cli::{run, Cli, Outcome};
use sca_core::contour::Curve;
use sca_core::curvature::{accumulate, accumulate_with_bounds, OpCounters, SumBounds};
use sca_core::detector::analyze_curve;
use sca_core::eval::{
    average_repeatability, localization_error, run_experiment, BaseImage, CornerMatch,
    NamedDetector,
};
use sca_core::synth::{corpus, ShapeKind};
use sca_core::transforms::{enumerate_specs, Family, TransformSpec, PUBLISHED_COUNTS};
use sca_core::{detect, DetectorParams, GrayImage, Point};

struct Outcomes {
    lines: Vec<String>,
    hard_failures: usize,
}

impl Outcomes {
    fn record(&mut self, n: u8, name: &str, pass: bool, detail: String) {
        let line = format!(
            "[{}] {n} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        println!("{line}");
        if !pass {
            self.hard_failures += 1;
        }
        self.lines.push(line);
    }

    fn warn(&mut self, n: u8, name: &str, detail: String) {
        let line = format!("[WARN] {n} {name}: {detail}");
        println!("{line}");
        self.lines.push(line);
    }
}

fn random_curve(rng: &mut ChaCha8Rng) -> (Vec<(f64, f64)>, bool) {
    let n = rng.random_range(8..=200);
    let closed = rng.random_bool(0.5);
    // A random walk stands in for a digitized contour.
    let mut p = (0.0, 0.0);
    let pts = (0..n)
        .map(|_| {
            p.0 += rng.random_range(-1.5..1.5f64);
            p.1 += rng.random_range(-1.5..1.5f64);
            p
        })
        .collect();
    (pts, closed)
}

fn curve(pts: &[(f64, f64)], closed: bool) -> Curve<f64> {
    Curve::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect(), closed)
}

fn oracle(pts: &[(f64, f64)], closed: bool, l: usize) -> Vec<Option<f64>> {
    let n = pts.len();
    let at = |i: isize| pts[i.rem_euclid(n as isize) as usize];
    (0..n)
        .map(|k| {
            if n <= 2 * l || (!closed && (k < l || k + l >= n)) {
                return None;
            }
            let (px, py) = pts[k];
            let mut h = 0.0;
            for j in (k as isize - l as isize + 1)..k as isize {
                let (ax, ay) = at(j);
                let (bx, by) = at(j + l as isize);
                let len = (bx - ax).hypot(by - ay);
                h += if len > 0.0 {
                    ((bx - ax) * (py - ay) - (by - ay) * (px - ax)).abs() / len
                } else {
                    (px - ax).hypot(py - ay)
                };
            }
            Some(h)
        })
        .collect()
}

const CHORDS: [usize; 6] = [3, 5, 10, 15, 20, 30];

fn criterion_1_and_2(out: &mut Outcomes) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let curves: Vec<_> = (0..100).map(|_| random_curve(&mut rng)).collect();
    let (mut worst, mut mismatched_validity, mut pairs) = (0.0f64, 0, 0);
    let mut boundary_diff = 0.0f64;
    for (pts, closed) in &curves {
        let cv = curve(pts, *closed);
        for &l in &CHORDS {
            pairs += 1;
            let mut c = OpCounters::default();
            let p = accumulate(&cv, l, 0, &mut c);
            for (k, want) in oracle(pts, *closed, l).into_iter().enumerate() {
                match want {
                    Some(w) if p.valid[k] => worst = worst.max((p.h[k] - w).abs()),
                    None if !p.valid[k] => {}
                    _ => mismatched_validity += 1,
                }
            }
            let inc = accumulate_with_bounds(&cv, l, 0, SumBounds::Inclusive, &mut c);
            for (a, b) in p.h.iter().zip(&inc.h) {
                boundary_diff = boundary_diff.max((a - b).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    out.record(
        1,
        "accumulation oracle",
        worst <= 1e-9 && mismatched_validity == 0 && secs < 10.0,
        format!("{pairs} curve/chord pairs, max |diff| {worst:.2e} (tol 1e-9), validity mismatches {mismatched_validity}, {secs:.2} s (limit 10 s)"),
    );
    out.record(
        2,
        "boundary placements",
        boundary_diff <= 1e-12,
        format!("max |h_inclusive - h_interior| {boundary_diff:.2e} (tol 1e-12)"),
    );
}

/// Bright band between two parallel lines.
fn band(theta: f64, width: f64) -> GrayImage<f64> {
    let (s, c) = theta.to_radians().sin_cos();
    GrayImage::from_fn(160, 160, |x, y| {
        let d = ((x as f64 - 79.5) * c + (y as f64 - 79.5) * s).abs();
        (width / 2.0 + 0.5 - d).clamp(0.0, 1.0) * 0.8
    })
}

fn criterion_3(out: &mut Outcomes) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut max_h, mut curve_corners, mut exact_nonzero) = (0.0f64, 0, 0);
    for i in 0..100 {
        let n = rng.random_range(70..200);
        let closed = i % 2 == 0;
        // Integer direction: exact arithmetic, h must be exactly zero.
        let (dx, dy) = (rng.random_range(-3..=3i32), rng.random_range(1..=3i32));
        let exact: Vec<(f64, f64)> = (0..n).map(|t| ((t * dx) as f64, (t * dy) as f64)).collect();
        // Arbitrary direction and spacing.
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let mut t = 0.0;
        let real: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                t += rng.random_range(0.2..2.0);
                (10.0 + t * theta.cos(), -5.0 + t * theta.sin())
            })
            .collect();
        for (pts, is_exact) in [(exact, true), (real, false)] {
            let cv = curve(&pts, closed);
            let mut c = OpCounters::default();
            for &l in &CHORDS {
                let p = accumulate(&cv, l, 0, &mut c);
                for h in &p.h {
                    if is_exact && *h != 0.0 {
                        exact_nonzero += 1;
                    }
                    max_h = max_h.max(h.abs());
                }
            }
            for params in [DetectorParams::sca(), DetectorParams::cpda()] {
                let (a, _) = analyze_curve(&cv, 0, &params, &mut c);
                curve_corners += a.corners.len();
            }
        }
    }
    let mut image_corners = 0;
    for k in 0..12 {
        let img = band(k as f64 * 15.0 + 2.0, 20.0);
        for params in [DetectorParams::sca(), DetectorParams::cpda()] {
            image_corners += detect(&img, &params).unwrap().corners.len();
        }
    }
    out.record(
        3,
        "straight-line nullity",
        exact_nonzero == 0 && max_h <= 1e-9 && curve_corners == 0 && image_corners == 0,
        format!(
            "200 collinear curves: {exact_nonzero} nonzero h on exact lines, max |h| {max_h:.1e}; corners on curves {curve_corners}, on 12 straight band images {image_corners} (both detectors)"
        ),
    );
}

struct GroundTruthScore {
    required: usize,
    found: usize,
    missed: Vec<String>,
    blob_fp: Vec<(String, usize)>,
}

fn score(params: &DetectorParams) -> (GroundTruthScore, OpCounters) {
    let mut s = GroundTruthScore {
        required: 0,
        found: 0,
        missed: Vec::new(),
        blob_fp: Vec::new(),
    };
    let mut counters = OpCounters::default();
    for fx in corpus::<f64>(0) {
        let det = detect(&fx.image, params).unwrap();
        counters += det.counters;
        let got = det.corners.positions();
        match fx.shape_kind {
            ShapeKind::Polygon | ShapeKind::Star => {
                for (p, a) in fx.true_corners.iter().zip(&fx.corner_angles) {
                    if *a > 150.0 {
                        continue;
                    }
                    s.required += 1;
                    if got.iter().any(|g| g.dist(*p) <= 3.0) {
                        s.found += 1;
                    } else {
                        s.missed.push(format!("{}@({:.0},{:.0})", fx.id, p.x, p.y));
                    }
                }
            }
            ShapeKind::BlobNoCorners => s.blob_fp.push((fx.id.clone(), got.len())),
            ShapeKind::RoundedRect => {}
        }
    }
    (s, counters)
}

fn criterion_4_and_5(out: &mut Outcomes) {
    let start = Instant::now();
    let (sca, sca_counters) = score(&DetectorParams::sca());
    let (cpda, cpda_counters) = score(&DetectorParams::cpda());
    let secs = start.elapsed().as_secs_f64();
    let blobs_ok = |s: &GroundTruthScore| s.blob_fp.iter().all(|(_, n)| *n <= 1);
    let describe = |s: &GroundTruthScore| {
        format!(
            "{}/{} corners <=150 deg within 3 px{}, blob false positives {:?}",
            s.found,
            s.required,
            if s.missed.is_empty() {
                String::new()
            } else {
                format!(" (missed {})", s.missed.join(" "))
            },
            s.blob_fp.iter().map(|(_, n)| *n).collect::<Vec<_>>()
        )
    };
    out.record(
        4,
        "geometric ground truth (sca)",
        sca.found == sca.required && blobs_ok(&sca) && secs < 60.0,
        format!(
            "{}; both detectors in {secs:.1} s (limit 60 s)",
            describe(&sca)
        ),
    );
    let cpda_line = format!("4 baseline (cpda, not gating): {}", describe(&cpda));
    println!("[INFO] {cpda_line}");
    out.lines.push(format!("[INFO] {cpda_line}"));

    let ratio = sca_counters.sqrt_evals as f64 / cpda_counters.sqrt_evals as f64;
    out.record(
        5,
        "cost ratio",
        (0.28..=0.39).contains(&ratio),
        format!(
            "sqrt evals sca {} / cpda {} = {ratio:.4} over the corpus originals (band [0.28, 0.39])",
            sca_counters.sqrt_evals, cpda_counters.sqrt_evals
        ),
    );
}

fn criterion_6(out: &mut Outcomes) {
    let expected = [
        (Family::Scaling, 345),
        (Family::Shearing, 1104),
        (Family::Rotation, 414),
        (Family::RotationScale, 4025),
        (Family::NonuniformScale, 1771),
        (Family::JpegCompression, 460),
        (Family::GaussianNoise, 230),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (family, want)) in expected.iter().enumerate() {
        let got = enumerate_specs(*family).len() * 23;
        ok &= got == *want;
        let published = PUBLISHED_COUNTS[i].1;
        parts.push(if published == got {
            format!("{}={got}", family.name())
        } else {
            format!("{}={got} (published {published})", family.name())
        });
    }
    out.record(
        6,
        "dataset cardinalities",
        ok,
        format!("23 bases: {}", parts.join(", ")),
    );
}

fn criterion_7(out: &mut Outcomes) {
    let m = CornerMatch {
        original: Point::new(10.0, 10.0),
        test: Point::new(11.0, 11.0),
        distance: 2f64.sqrt(),
        original_index: 0,
        test_index: 0,
    };
    let le = localization_error(&[m]).unwrap();
    let units = average_repeatability(10, 10, 10) == Some(100.0)
        && average_repeatability(1, 2, 2) == Some(50.0)
        && (le - 2f64.sqrt()).abs() <= 1e-12;
    let bases: Vec<BaseImage<f64>> = corpus::<f64>(0)
        .into_iter()
        .map(|f| BaseImage {
            id: f.id,
            image: f.image,
        })
        .collect();
    let report = run_experiment(
        &bases,
        &NamedDetector::defaults(),
        &[TransformSpec::identity()],
        0,
    );
    let defined: Vec<_> = report
        .items
        .iter()
        .filter(|i| i.avg_repeatability.is_some())
        .collect();
    let perfect = defined
        .iter()
        .all(|i| i.avg_repeatability == Some(100.0) && i.localization_error == Some(0.0));
    let undefined = report.items.len() - defined.len();
    out.record(
        7,
        "metric unit identities",
        units && perfect && report.all_succeeded(),
        format!(
            "R(10,10,10)=100, R(1,2,2)=50, L_e((1,1))={le:.12}; identity transform: {}/{} fixture runs at 100% and L_e 0, {undefined} undefined (cornerless blobs)",
            defined.len(),
            report.items.len()
        ),
    );
}

fn evaluate(dir: &Path, extra: &[&str]) -> (Outcome, Duration) {
    let mut args = vec![
        "sca",
        "evaluate",
        "--synth",
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let start = Instant::now();
    let outcome = run(Cli::try_parse_from(args).unwrap()).unwrap();
    (outcome, start.elapsed())
}

fn criterion_8_and_9(out: &mut Outcomes) {
    let tmp = tempfile::tempdir().unwrap();

    let (smoke_outcome, smoke_time) = evaluate(&tmp.path().join("smoke_a"), &["--smoke"]);
    let (full_outcome, full_time) = evaluate(&tmp.path().join("full"), &[]);
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("full/summary.json")).unwrap(),
    )
    .unwrap();
    let det = |name: &str| {
        summary["detectors"]
            .as_array()
            .unwrap()
            .iter()
            .find(|d| d["detector"] == name)
            .unwrap()
            .clone()
    };
    let (s, c) = (det("sca"), det("cpda"));
    let f = |v: &serde_json::Value, k: &str| v[k].as_f64().unwrap_or(f64::NAN);
    let runtime_ok = full_time.as_secs_f64() < 1800.0 && smoke_time.as_secs_f64() < 60.0;
    out.record(
        8,
        "full-suite runtime",
        runtime_ok && full_outcome == Outcome::Success && smoke_outcome == Outcome::Success,
        format!(
            "{} items x 2 detectors in {:.1} s (limit 1800 s); smoke in {:.2} s (limit 60 s)",
            s["items"],
            full_time.as_secs_f64(),
            smoke_time.as_secs_f64()
        ),
    );
    let table = format!(
        "sca: repeatability {:.2}%, L_e {:.4} px, corners {} (all images {}); cpda: repeatability {:.2}%, L_e {:.4} px, corners {} (all images {}); sqrt ratio {:.4}",
        f(&s, "average_repeatability"),
        f(&s, "localization_error"),
        s["corner_count"],
        s["corner_count_all"],
        f(&c, "average_repeatability"),
        f(&c, "localization_error"),
        c["corner_count"],
        c["corner_count_all"],
        f(&summary, "sqrt_ratio_sca_over_cpda"),
    );
    let rep_ok = f(&s, "average_repeatability") >= f(&c, "average_repeatability") - 1.0;
    let count_ok = s["corner_count"].as_u64() >= c["corner_count"].as_u64();
    if rep_ok && count_ok {
        let line = format!("[PASS] 8 qualitative ordering (soft): {table}");
        println!("{line}");
        out.lines.push(line);
    } else {
        out.warn(8, "qualitative ordering (soft)", table);
    }

    let (again, _) = evaluate(&tmp.path().join("smoke_b"), &["--smoke"]);
    let mut identical = again == smoke_outcome;
    for file in ["report.csv", "summary.json", "plot.csv"] {
        let a = std::fs::read(tmp.path().join("smoke_a").join(file)).unwrap();
        let b = std::fs::read(tmp.path().join("smoke_b").join(file)).unwrap();
        identical &= a == b;
    }
    out.record(
        9,
        "determinism",
        identical,
        "two smoke evaluations with seed 7: report.csv, summary.json and plot.csv byte-identical"
            .to_string(),
    );
}

fn main() -> ExitCode {
    // Ignore harness flags such as --nocapture or test-name filters.
    let mut out = Outcomes {
        lines: Vec::new(),
        hard_failures: 0,
    };
    criterion_1_and_2(&mut out);
    criterion_3(&mut out);
    criterion_4_and_5(&mut out);
    criterion_6(&mut out);
    criterion_7(&mut out);
    criterion_8_and_9(&mut out);
    println!("acceptance: {} hard failure(s)", out.hard_failures);
    if out.hard_failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
