//! Edge linking: turns a thinned edge map into ordered curves, finds T-junctions,
//! bridges one-pixel gaps and smooths curves with a 1-D Gaussian.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::image::{gaussian_kernel, EdgeMap, RING};
use crate::scalar::Scalar;

/// Ordered polyline; closed curves wrap from the last point back to the first.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve<T> {
    pub points: Vec<Point<T>>,
    pub closed: bool,
}

impl<T: Scalar> Curve<T> {
    pub fn new(points: Vec<Point<T>>, closed: bool) -> Self {
        Self { points, closed }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index `i + offset`, wrapped for closed curves; `None` when it falls off an open curve.
    pub fn offset(&self, i: usize, offset: isize) -> Option<usize> {
        let n = self.points.len() as isize;
        let j = i as isize + offset;
        if self.closed {
            (n > 0).then(|| j.rem_euclid(n) as usize)
        } else {
            (0..n).contains(&j).then_some(j as usize)
        }
    }
}

/// Edge pixel where three or more branches meet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TJunction {
    pub x: usize,
    pub y: usize,
    pub degree: usize,
}

impl TJunction {
    pub fn position<T: Scalar>(&self) -> Point<T> {
        Point::from_pixel(self.x, self.y)
    }
}

/// Raw output of edge linking, in pixel coordinates.
#[derive(Clone, Debug, Default)]
pub struct Tracing {
    pub chains: Vec<PixelChain>,
    pub junctions: Vec<TJunction>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelChain {
    pub pixels: Vec<(usize, usize)>,
    pub closed: bool,
}

/// Number of distinct edge arcs around `(x, y)`: runs of consecutive edge pixels in the
/// 8-neighborhood ring.
pub fn branch_count(edges: &EdgeMap, x: usize, y: usize) -> usize {
    let on: [bool; 8] =
        std::array::from_fn(|k| edges.get_i(x as isize + RING[k].0, y as isize + RING[k].1));
    let total = on.iter().filter(|&&b| b).count();
    if total == 8 {
        return 1;
    }
    (0..8).filter(|&k| on[k] && !on[(k + 7) % 8]).count()
}

/// Every edge pixel with at least three branches, in raster order.
pub fn detect_t_junctions(edges: &EdgeMap) -> Vec<TJunction> {
    edges
        .pixels()
        .filter_map(|(x, y)| {
            let degree = branch_count(edges, x, y);
            (degree >= 3).then_some(TJunction { x, y, degree })
        })
        .collect()
}

/// Fills the single missing pixel between two chain endpoints two pixels apart.
pub fn bridge_gaps(edges: &EdgeMap) -> EdgeMap {
    let mut out = edges.clone();
    let neighbors = |x: usize, y: usize| -> Vec<(isize, isize)> {
        RING.iter()
            .map(|(dx, dy)| (x as isize + dx, y as isize + dy))
            .filter(|&(nx, ny)| edges.get_i(nx, ny))
            .collect()
    };
    let endpoints: Vec<(usize, usize)> = edges
        .pixels()
        .filter(|&(x, y)| neighbors(x, y).len() == 1)
        .collect();
    let lookup: HashMap<(usize, usize), usize> =
        endpoints.iter().enumerate().map(|(i, &p)| (p, i)).collect();

    for (i, &(x, y)) in endpoints.iter().enumerate() {
        let own = neighbors(x, y);
        for dy in -2isize..=2 {
            for dx in -2isize..=2 {
                if dx.abs().max(dy.abs()) != 2 {
                    continue;
                }
                let (ox, oy) = (x as isize + dx, y as isize + dy);
                if ox < 0 || oy < 0 {
                    continue;
                }
                let Some(&j) = lookup.get(&(ox as usize, oy as usize)) else {
                    continue;
                };
                if j <= i {
                    continue;
                }
                // The two ends of a three-pixel stub share their middle neighbor.
                let other = neighbors(ox as usize, oy as usize);
                if own.iter().any(|p| other.contains(p)) {
                    continue;
                }
                // Truncating division picks a pixel 8-adjacent to both ends.
                let (mx, my) = (x as isize + dx / 2, y as isize + dy / 2);
                if !out.get_i(mx, my) {
                    out.set(mx as usize, my as usize, true);
                }
            }
        }
    }
    out
}

/// Links edge pixels into chains. Junction pixels terminate chains and are copied into
/// every chain that reaches them; every other edge pixel lands in exactly one chain.
pub fn trace_chains(edges: &EdgeMap) -> Tracing {
    let (w, h) = (edges.width(), edges.height());
    let junctions = detect_t_junctions(edges);
    let mut cluster = vec![usize::MAX; w * h];
    label_junction_clusters(edges, &junctions, &mut cluster);
    let is_junction = |x: usize, y: usize| cluster[y * w + x] != usize::MAX;

    let mut visited = vec![false; w * h];
    let mut chains = Vec::new();

    let nbrs = |x: usize, y: usize| {
        // 4-neighbors first, then diagonals, each in ring order.
        [0usize, 2, 4, 6, 1, 3, 5, 7]
            .into_iter()
            .filter_map(move |k| {
                let (nx, ny) = (x as isize + RING[k].0, y as isize + RING[k].1);
                edges.get_i(nx, ny).then_some((nx as usize, ny as usize))
            })
    };

    let mut starts: Vec<(usize, usize)> = Vec::new();
    for (x, y) in edges.pixels() {
        if !is_junction(x, y) && branch_count(edges, x, y) <= 1 {
            starts.push((x, y));
        }
    }
    for (x, y) in edges.pixels() {
        if !is_junction(x, y) && nbrs(x, y).any(|(a, b)| is_junction(a, b)) {
            starts.push((x, y));
        }
    }

    let trace = |start: (usize, usize), visited: &mut Vec<bool>| -> PixelChain {
        let mut pixels = Vec::new();
        let start_cluster = nbrs(start.0, start.1)
            .find(|&(a, b)| is_junction(a, b))
            .map(|(a, b)| {
                pixels.push((a, b));
                cluster[b * w + a]
            });
        pixels.push(start);
        visited[start.1 * w + start.0] = true;
        let mut cur = start;
        let mut ended_at_junction = false;
        loop {
            let steps_taken = pixels.len() - usize::from(start_cluster.is_some());
            if steps_taken > 1 || start_cluster.is_none() {
                let stop = nbrs(cur.0, cur.1).find(|&(a, b)| {
                    is_junction(a, b)
                        && (Some(cluster[b * w + a]) != start_cluster || pixels.len() > 3)
                });
                if let Some(j) = stop {
                    pixels.push(j);
                    ended_at_junction = true;
                    break;
                }
            }
            let next = nbrs(cur.0, cur.1).find(|&(a, b)| !is_junction(a, b) && !visited[b * w + a]);
            match next {
                Some(n) => {
                    visited[n.1 * w + n.0] = true;
                    pixels.push(n);
                    cur = n;
                }
                None => break,
            }
        }
        let closed = start_cluster.is_none() && !ended_at_junction && pixels.len() >= 4 && {
            let (a, b) = (pixels[0], *pixels.last().unwrap());
            a.0.abs_diff(b.0) <= 1 && a.1.abs_diff(b.1) <= 1
        };
        PixelChain { pixels, closed }
    };

    for s in starts {
        if !visited[s.1 * w + s.0] {
            chains.push(trace(s, &mut visited));
        }
    }
    // Remaining pixels belong to loops without endpoints or junctions.
    for (x, y) in edges.pixels() {
        if !is_junction(x, y) && !visited[y * w + x] {
            chains.push(trace((x, y), &mut visited));
        }
    }

    Tracing { chains, junctions }
}

fn label_junction_clusters(edges: &EdgeMap, junctions: &[TJunction], cluster: &mut [usize]) {
    let w = edges.width();
    for j in junctions {
        cluster[j.y * w + j.x] = usize::MAX - 1;
    }
    let mut next_label = 0;
    for j in junctions {
        if cluster[j.y * w + j.x] != usize::MAX - 1 {
            continue;
        }
        let mut stack = vec![(j.x, j.y)];
        cluster[j.y * w + j.x] = next_label;
        while let Some((x, y)) = stack.pop() {
            for (dx, dy) in RING {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                if edges.get_i(nx, ny) {
                    let i = ny as usize * w + nx as usize;
                    if cluster[i] == usize::MAX - 1 {
                        cluster[i] = next_label;
                        stack.push((nx as usize, ny as usize));
                    }
                }
            }
        }
        next_label += 1;
    }
}

/// Ordered curves of at least `min_curve_length` points.
pub fn extract_curves<T: Scalar>(edges: &EdgeMap, min_curve_length: usize) -> Vec<Curve<T>> {
    trace_chains(edges)
        .chains
        .into_iter()
        .filter(|c| c.pixels.len() >= min_curve_length.max(1))
        .map(|c| {
            Curve::new(
                c.pixels
                    .iter()
                    .map(|&(x, y)| Point::from_pixel(x, y))
                    .collect(),
                c.closed,
            )
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothStatus {
    Smoothed,
    /// Open curve shorter than the kernel; returned unchanged.
    TooShort,
}

/// Convolves x and y independently with a normalized Gaussian. Closed curves wrap; open
/// curves replicate their endpoints.
pub fn smooth_curve<T: Scalar>(curve: &Curve<T>, sigma: T) -> (Curve<T>, SmoothStatus) {
    let Ok(kernel) = gaussian_kernel(sigma) else {
        return (curve.clone(), SmoothStatus::TooShort);
    };
    let n = curve.len();
    if n == 0 || (!curve.closed && n <= kernel.len()) {
        return (curve.clone(), SmoothStatus::TooShort);
    }
    let half = (kernel.len() / 2) as isize;
    let points = (0..n)
        .map(|i| {
            let mut acc = Point::new(T::zero(), T::zero());
            for (t, &k) in kernel.iter().enumerate() {
                let j = i as isize + t as isize - half;
                let j = if curve.closed {
                    j.rem_euclid(n as isize) as usize
                } else {
                    j.clamp(0, n as isize - 1) as usize
                };
                acc = acc + curve.points[j] * k;
            }
            acc
        })
        .collect();
    (Curve::new(points, curve.closed), SmoothStatus::Smoothed)
}

/// Plain-text dump of `curve-id x y` triples, one point per line.
pub fn write_curve_dump<T: Scalar, W: std::io::Write>(
    curves: &[Curve<T>],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "curve_id x y")?;
    for (id, c) in curves.iter().enumerate() {
        for p in &c.points {
            writeln!(out, "{id} {} {}", p.x, p.y)?;
        }
    }
    Ok(())
}
