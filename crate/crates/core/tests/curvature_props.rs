use proptest::prelude::*;
use sca_core::contour::Curve;
use sca_core::curvature::{
    accumulate, accumulate_with_bounds, combine_cpda, normalize, profile_maxima, refine_angle,
    refine_curvature, AngleMethod, AngleRefinement, OpCounters, SumBounds, DEFAULT_TANGENT_REACH,
};
use sca_core::Point;

/// Direct double loop over (k, j) with wrapped indices.
fn oracle(points: &[(f64, f64)], closed: bool, chord: usize) -> Vec<Option<f64>> {
    let n = points.len();
    let at = |i: isize| points[i.rem_euclid(n as isize) as usize];
    (0..n)
        .map(|k| {
            if n <= 2 * chord || (!closed && (k < chord || k + chord >= n)) {
                return None;
            }
            let mut h = 0.0;
            for j in (k as isize - chord as isize + 1)..=(k as isize - 1) {
                let (ax, ay) = at(j);
                let (bx, by) = at(j + chord as isize);
                let (px, py) = points[k];
                let len = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
                h += if len > 0.0 {
                    ((bx - ax) * (py - ay) - (by - ay) * (px - ax)).abs() / len
                } else {
                    ((px - ax).powi(2) + (py - ay).powi(2)).sqrt()
                };
            }
            Some(h)
        })
        .collect()
}

fn curve(points: &[(f64, f64)], closed: bool) -> Curve<f64> {
    Curve::new(
        points.iter().map(|&(x, y)| Point::new(x, y)).collect(),
        closed,
    )
}

fn points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 7..=max)
}

fn chord() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![3usize, 5, 10, 15])
}

proptest! {
    #[test]
    fn accumulation_matches_double_loop(pts in points(200), closed: bool, l in chord()) {
        let mut c = OpCounters::default();
        let p = accumulate(&curve(&pts, closed), l, 0, &mut c);
        for (k, expect) in oracle(&pts, closed, l).into_iter().enumerate() {
            prop_assert_eq!(p.valid[k], expect.is_some());
            if let Some(e) = expect {
                prop_assert!((p.h[k] - e).abs() <= 1e-9, "k={} got {} want {}", k, p.h[k], e);
            }
        }
    }

    #[test]
    fn boundary_placements_add_nothing(pts in points(120), closed: bool, l in chord()) {
        let cv = curve(&pts, closed);
        let mut c = OpCounters::default();
        let a = accumulate_with_bounds(&cv, l, 0, SumBounds::Interior, &mut c);
        let b = accumulate_with_bounds(&cv, l, 0, SumBounds::Inclusive, &mut c);
        prop_assert_eq!(&a.valid, &b.valid);
        for (x, y) in a.h.iter().zip(&b.h) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn rotation_leaves_h_unchanged(pts in points(120), closed: bool, l in chord(), theta in 0.0f64..std::f64::consts::TAU, dx in -50.0f64..50.0) {
        let (s, c) = theta.sin_cos();
        let moved: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (c * x - s * y + dx, s * x + c * y - dx)).collect();
        let mut n = OpCounters::default();
        let a = accumulate(&curve(&pts, closed), l, 0, &mut n);
        let b = accumulate(&curve(&moved, closed), l, 0, &mut n);
        for (x, y) in a.h.iter().zip(&b.h) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }

    #[test]
    fn uniform_scaling_scales_h(pts in points(120), closed: bool, l in chord(), s in 0.1f64..10.0) {
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (s * x, s * y)).collect();
        let mut n = OpCounters::default();
        let a = normalize(accumulate(&curve(&pts, closed), l, 0, &mut n));
        let b = normalize(accumulate(&curve(&scaled, closed), l, 0, &mut n));
        for k in 0..pts.len() {
            prop_assert!((s * a.h[k] - b.h[k]).abs() <= 1e-6 * a.h[k].max(1.0) * s.max(1.0));
            prop_assert!((a.h_norm[k] - b.h_norm[k]).abs() <= 1e-9);
        }
    }

    #[test]
    fn collinear_curves_have_zero_curvature(
        t in prop::collection::vec(-200.0f64..200.0, 31..150),
        origin in (-50.0f64..50.0, -50.0f64..50.0),
        theta in 0.0f64..std::f64::consts::PI,
        closed: bool,
        l in chord(),
    ) {
        let (s, c) = theta.sin_cos();
        let pts: Vec<(f64, f64)> = t.iter().map(|&t| (origin.0 + c * t, origin.1 + s * t)).collect();
        let mut n = OpCounters::default();
        let p = normalize(accumulate(&curve(&pts, closed), l, 0, &mut n));
        prop_assert!(p.h.iter().all(|h| h.abs() <= 1e-9));
        // With every h negligible there is nothing to refine into a corner.
        let cands = refine_curvature(&profile_maxima(&p), p.values(), 0.067);
        prop_assert!(p.cornerless || cands.iter().all(|&k| p.h[k] <= 1e-9));
    }

    #[test]
    fn product_never_exceeds_a_factor(pts in points(150), closed: bool) {
        let cv = curve(&pts, closed);
        let mut n = OpCounters::default();
        let profiles: Vec<_> = [3usize, 5, 10].iter().map(|&l| normalize(accumulate(&cv, l, 0, &mut n))).collect();
        let combined = combine_cpda(&profiles).unwrap();
        for k in 0..cv.len() {
            for p in &profiles {
                prop_assert!(combined.combined[k] <= p.h_norm[k] + 1e-15);
            }
        }
    }

    #[test]
    fn refinement_never_adds_candidates(
        pts in points(150),
        closed: bool,
        threshold in 0.0f64..1.0,
        delta in 100.0f64..179.0,
        iterative: bool,
        tangent: bool,
    ) {
        let cv = curve(&pts, closed);
        let mut n = OpCounters::default();
        let p = normalize(accumulate(&cv, 5, 0, &mut n));
        let cands = profile_maxima(&p);
        let strong = refine_curvature(&cands, p.values(), threshold);
        prop_assert!(strong.iter().all(|k| cands.contains(k)));
        let refinement = if iterative { AngleRefinement::Iterative } else { AngleRefinement::SinglePass };
        let method = if tangent { AngleMethod::Tangent } else { AngleMethod::Chord };
        let kept = refine_angle(&strong, p.values(), &cv, delta, refinement, method, DEFAULT_TANGENT_REACH);
        prop_assert!(kept.len() <= strong.len());
        prop_assert!(kept.iter().all(|k| strong.contains(k)));
    }
}

#[test]
fn single_chord_costs_a_third_of_three_chords() {
    let pts: Vec<(f64, f64)> = (0..400)
        .map(|i| {
            let t = i as f64 / 400.0 * std::f64::consts::TAU;
            (100.0 * t.cos(), 60.0 * t.sin() + 5.0 * (3.0 * t).sin())
        })
        .collect();
    let cv = curve(&pts, true);
    let mut sca = OpCounters::default();
    accumulate(&cv, 15, 0, &mut sca);
    let mut cpda = OpCounters::default();
    for l in [10, 20, 30] {
        accumulate(&cv, l, 0, &mut cpda);
    }
    assert_eq!(sca.sqrt_evals * 3, cpda.sqrt_evals);
    // Interior placements per point: L - 1.
    assert_eq!(sca.distance_evals * 57, cpda.distance_evals * 14);
}
