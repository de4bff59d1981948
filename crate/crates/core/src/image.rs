//! Grayscale rasters, Gaussian smoothing and the Canny edge detector.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major grayscale raster with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Scalar> GrayImage<T> {
    /// A black image.
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, T::zero())
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Wraps row-major data, rejecting wrong lengths and values outside `[0, 1]`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: (width, height),
                found: (data.len(), 1),
            });
        }
        if let Some(v) = data.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
            return Err(Error::param(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).max(T::zero()).min(T::one()));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Value with edge replication outside the raster.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> T {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    /// Stores `value` clamped to `[0, 1]`.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value.max(T::zero()).min(T::one());
    }

    pub fn mean(&self) -> T {
        if self.data.is_empty() {
            return T::zero();
        }
        self.data.iter().copied().sum::<T>() / T::from_count(self.data.len())
    }

    pub fn cast<U: Scalar>(&self) -> GrayImage<U> {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Boolean edge raster produced by [`canny`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    /// Builds an edge map from `'#'` (edge) and any other character (background), one row per line.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        let mut map = Self::new(width, height);
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                if c == '#' {
                    map.set(x, y, true);
                }
            }
        }
        map
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    /// `false` outside the raster.
    #[inline]
    pub fn get_i(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.mask[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Edge pixels in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Luminance from separate red, green and blue planes (`0.299 R + 0.587 G + 0.114 B`).
pub fn to_grayscale<T: Scalar>(
    red: &GrayImage<T>,
    green: &GrayImage<T>,
    blue: &GrayImage<T>,
) -> Result<GrayImage<T>> {
    for plane in [green, blue] {
        if plane.dimensions() != red.dimensions() {
            return Err(Error::Dimension {
                expected: red.dimensions(),
                found: plane.dimensions(),
            });
        }
    }
    let (wr, wg, wb) = (T::lit(0.299), T::lit(0.587), T::lit(0.114));
    let data = red
        .data
        .iter()
        .zip(&green.data)
        .zip(&blue.data)
        .map(|((&r, &g), &b)| (wr * r + wg * g + wb * b).max(T::zero()).min(T::one()))
        .collect();
    Ok(GrayImage {
        width: red.width,
        height: red.height,
        data,
    })
}

/// Normalized discrete Gaussian of half-width `ceil(3 sigma)`; index `i` holds offset `i - half`.
pub fn gaussian_kernel<T: Scalar>(sigma: T) -> Result<Vec<T>> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::param(format!("sigma must be positive, got {sigma}")));
    }
    let half = (T::lit(3.0) * sigma).ceil().to_usize().unwrap_or(1).max(1);
    let two_var = T::lit(2.0) * sigma * sigma;
    let mut kernel: Vec<T> = (0..=2 * half)
        .map(|i| {
            let d = T::from_count(i) - T::from_count(half);
            (-(d * d) / two_var).exp()
        })
        .collect();
    let sum: T = kernel.iter().copied().sum();
    for w in &mut kernel {
        *w /= sum;
    }
    Ok(kernel)
}

/// Separable Gaussian blur with edge replication.
pub fn gaussian_smooth<T: Scalar>(img: &GrayImage<T>, sigma: T) -> Result<GrayImage<T>> {
    let kernel = gaussian_kernel(sigma)?;
    let half = (kernel.len() / 2) as isize;
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Ok(img.clone());
    }

    let mut tmp = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (i, &k) in kernel.iter().enumerate() {
                acc += k * img.get_clamped(x as isize + i as isize - half, y as isize);
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = T::zero();
            for (i, &k) in kernel.iter().enumerate() {
                let yy = (y as isize + i as isize - half).clamp(0, h as isize - 1) as usize;
                acc += k * tmp[yy * w + x];
            }
            out[y * w + x] = acc.max(T::zero()).min(T::one());
        }
    }
    Ok(GrayImage {
        width: w,
        height: h,
        data: out,
    })
}

/// Sobel gradient components and magnitude with edge replication.
pub struct Gradient<T> {
    pub gx: Vec<T>,
    pub gy: Vec<T>,
    pub magnitude: Vec<T>,
}

pub fn sobel<T: Scalar>(img: &GrayImage<T>) -> Gradient<T> {
    let (w, h) = img.dimensions();
    let mut gx = vec![T::zero(); w * h];
    let mut gy = vec![T::zero(); w * h];
    let mut magnitude = vec![T::zero(); w * h];
    let two = T::lit(2.0);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let p = |dx: isize, dy: isize| img.get_clamped(x + dx, y + dy);
            let sx = (p(1, -1) + two * p(1, 0) + p(1, 1)) - (p(-1, -1) + two * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + two * p(0, 1) + p(1, 1)) - (p(-1, -1) + two * p(0, -1) + p(1, -1));
            let i = y as usize * w + x as usize;
            gx[i] = sx;
            gy[i] = sy;
            magnitude[i] = sx.hypot(sy);
        }
    }
    Gradient { gx, gy, magnitude }
}

/// Canny edge detection: smoothing, Sobel gradient, non-maximum suppression along the
/// quantized gradient direction, and hysteresis with thresholds `low * Gmax` and `high * Gmax`.
///
/// The result is thinned further by deleting staircase pixels whose only two neighbors are
/// perpendicular 4-neighbors, so every chain is a simple 8-connected path.
pub fn canny<T: Scalar>(img: &GrayImage<T>, sigma: T, low: T, high: T) -> Result<EdgeMap> {
    if !(low > T::zero() && low < high && high <= T::one()) {
        return Err(Error::param(format!(
            "canny thresholds must satisfy 0 < low < high <= 1, got low={low} high={high}"
        )));
    }
    let smoothed = gaussian_smooth(img, sigma)?;
    let (w, h) = img.dimensions();
    let mut edges = EdgeMap::new(w, h);
    if w == 0 || h == 0 {
        return Ok(edges);
    }
    let grad = sobel(&smoothed);
    let gmax = grad
        .magnitude
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b));
    if gmax <= T::epsilon() {
        return Ok(edges);
    }

    let mag = |x: isize, y: isize| -> T {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            T::zero()
        } else {
            grad.magnitude[y as usize * w + x as usize]
        }
    };
    let low_t = low * gmax;
    let high_t = high * gmax;

    // Non-maximum suppression. Ties along the gradient are broken toward the lower side
    // so a symmetric ridge keeps exactly one pixel.
    let mut thin = vec![T::zero(); w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = grad.magnitude[i];
            if m < low_t || m <= T::zero() {
                continue;
            }
            let mut deg = grad.gy[i].atan2(grad.gx[i]).to_degrees();
            if deg < T::zero() {
                deg += T::lit(180.0);
            }
            let d = deg.as_f64();
            let (dx, dy) = if !(22.5..157.5).contains(&d) {
                (1, 0)
            } else if d < 67.5 {
                (1, 1)
            } else if d < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let before = mag(xi - dx, yi - dy);
            let after = mag(xi + dx, yi + dy);
            if m > before && m >= after {
                thin[i] = m;
            }
        }
    }

    // Hysteresis.
    let mut stack: Vec<usize> = Vec::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high_t {
            edges.mask[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for &(dx, dy) in &RING {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let j = ny as usize * w + nx as usize;
            if !edges.mask[j] && thin[j] >= low_t && thin[j] > T::zero() {
                edges.mask[j] = true;
                stack.push(j);
            }
        }
    }

    remove_staircase_pixels(&mut edges);
    Ok(edges)
}

/// 8-neighborhood offsets in clockwise ring order starting at north.
pub(crate) const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn remove_staircase_pixels(edges: &mut EdgeMap) {
    let (w, h) = (edges.width, edges.height);
    for y in 0..h {
        for x in 0..w {
            if !edges.get(x, y) {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            let on: Vec<usize> = (0..8)
                .filter(|&k| edges.get_i(xi + RING[k].0, yi + RING[k].1))
                .collect();
            // Exactly two neighbors, both 4-neighbors (even ring slots) and perpendicular.
            if on.len() == 2
                && on[0].is_multiple_of(2)
                && on[1].is_multiple_of(2)
                && (on[1] - on[0]) % 4 == 2
            {
                edges.set(x, y, false);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn step_image(w: usize, h: usize, split: usize) -> GrayImage<f64> {
        GrayImage::from_fn(w, h, |x, _| if x >= split { 1.0 } else { 0.0 })
    }

    #[test]
    fn grayscale_weights() {
        let black = GrayImage::<f64>::new(3, 2);
        let g = to_grayscale(&black, &black, &black).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));

        let white = GrayImage::<f64>::filled(3, 2, 1.0);
        let g = to_grayscale(&white, &white, &white).unwrap();
        assert!(g.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let r = GrayImage::<f64>::filled(1, 1, 1.0);
        let z = GrayImage::<f64>::new(1, 1);
        let g = to_grayscale(&r, &z, &z).unwrap();
        assert_abs_diff_eq!(g.get(0, 0), 0.299, epsilon = 1e-12);
    }

    #[test]
    fn grayscale_rejects_mismatched_planes() {
        let a = GrayImage::<f32>::new(3, 2);
        let b = GrayImage::<f32>::new(2, 3);
        assert!(matches!(
            to_grayscale(&a, &b, &a),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn from_vec_validates() {
        assert!(GrayImage::from_vec(2, 2, vec![0.0f64; 3]).is_err());
        assert!(GrayImage::from_vec(1, 1, vec![1.5f64]).is_err());
        assert!(GrayImage::from_vec(1, 1, vec![f64::NAN]).is_err());
        assert!(GrayImage::from_vec(2, 1, vec![0.0f64, 1.0]).is_ok());
    }

    #[test]
    fn smoothing_constant_image_is_identity() {
        let img = GrayImage::<f64>::filled(17, 9, 0.37);
        let s = gaussian_smooth(&img, 2.0).unwrap();
        for &v in s.data() {
            assert_abs_diff_eq!(v, 0.37, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothing_impulse_matches_kernel_center() {
        // Independent evaluation of the sigma=1 kernel: half-width 3.
        let raw: Vec<f64> = (-3..=3)
            .map(|i: i32| (-(i * i) as f64 / 2.0).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        let center = raw[3] / sum;

        let mut img = GrayImage::<f64>::new(21, 21);
        img.set(10, 10, 1.0);
        let s = gaussian_smooth(&img, 1.0).unwrap();
        assert_abs_diff_eq!(s.get(10, 10), center * center, epsilon = 1e-12);
        assert_abs_diff_eq!(s.get(11, 10), center * raw[4] / sum, epsilon = 1e-12);
    }

    #[test]
    fn smoothing_preserves_symmetry_and_mean() {
        let img = GrayImage::<f64>::from_fn(31, 31, |x, y| {
            let dx = x as f64 - 15.0;
            let dy = y as f64 - 15.0;
            if dx * dx + dy * dy < 36.0 {
                1.0
            } else {
                0.0
            }
        });
        let s = gaussian_smooth(&img, 1.5).unwrap();
        for y in 0..31 {
            for x in 0..31 {
                assert_abs_diff_eq!(s.get(x, y), s.get(30 - x, y), epsilon = 1e-12);
                assert_abs_diff_eq!(s.get(x, y), s.get(y, x), epsilon = 1e-12);
            }
        }
        // The disk sits far from the border, so total mass is conserved.
        assert_abs_diff_eq!(s.mean(), img.mean(), epsilon = 1e-6);
    }

    #[test]
    fn smoothing_rejects_bad_sigma() {
        let img = GrayImage::<f64>::new(4, 4);
        assert!(gaussian_smooth(&img, 0.0).is_err());
        assert!(gaussian_smooth(&img, -1.0).is_err());
    }

    #[test]
    fn canny_constant_image_is_empty() {
        let img = GrayImage::<f64>::filled(20, 20, 0.5);
        let e = canny(&img, 1.4, 0.1, 0.2).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn canny_rejects_bad_thresholds() {
        let img = GrayImage::<f64>::new(4, 4);
        assert!(canny(&img, 1.4, 0.3, 0.2).is_err());
        assert!(canny(&img, 1.4, 0.0, 0.2).is_err());
        assert!(canny(&img, 1.4, 0.1, 1.2).is_err());
        assert!(canny(&img, 0.0, 0.1, 0.2).is_err());
    }

    #[test]
    fn canny_step_edge_is_single_column() {
        let (w, h, split) = (32, 24, 16);
        let img = step_image(w, h, split);
        let e = canny(&img, 1.4, 0.1, 0.2).unwrap();

        // Brute-force central difference on the raw step: the two columns straddling the
        // step carry the maximal response; the edge must be exactly one of them.
        let raw_grad = |x: usize| {
            let l = img.get_clamped(x as isize - 1, 0);
            let r = img.get_clamped(x as isize + 1, 0);
            (r - l).abs()
        };
        let peak: Vec<usize> = (0..w).filter(|&x| raw_grad(x) == 1.0).collect();
        assert_eq!(peak, vec![split - 1, split]);

        let mut column = None;
        for y in 0..h {
            let row: Vec<usize> = (0..w).filter(|&x| e.get(x, y)).collect();
            assert_eq!(row.len(), 1, "row {y}: {row:?}");
            assert!(peak.contains(&row[0]));
            match column {
                None => column = Some(row[0]),
                Some(c) => assert_eq!(c, row[0]),
            }
        }
    }

    #[test]
    fn canny_square_gives_closed_thin_contour() {
        let img = GrayImage::<f64>::from_fn(64, 64, |x, y| {
            if (16..48).contains(&x) && (16..48).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let e = canny(&img, 1.4, 0.1, 0.2).unwrap();
        assert!(e.count() > 100);
        for (x, y) in e.pixels() {
            // Within 1.5 px of the square outline (pixel boundary at 15.5 / 47.5).
            let fx = x as f64;
            let fy = y as f64;
            let dx = (fx - 15.5).abs().min((fx - 47.5).abs());
            let dy = (fy - 15.5).abs().min((fy - 47.5).abs());
            let inside_x = (15.0..=48.0).contains(&fx);
            let inside_y = (15.0..=48.0).contains(&fy);
            assert!(
                inside_x && inside_y && dx.min(dy) <= 1.5,
                "stray edge at ({x},{y})"
            );
            // Closed simple loop: exactly two neighbors each.
            let n = RING
                .iter()
                .filter(|(dx, dy)| e.get_i(x as isize + dx, y as isize + dy))
                .count();
            assert_eq!(n, 2, "pixel ({x},{y}) has {n} neighbors");
        }
    }

    #[test]
    fn canny_edges_exceed_low_threshold() {
        let img = GrayImage::<f64>::from_fn(40, 40, |x, y| {
            let dx = x as f64 - 20.0;
            let dy = y as f64 - 20.0;
            if dx * dx + 2.0 * dy * dy < 150.0 {
                0.9
            } else {
                0.1
            }
        });
        let e = canny(&img, 1.4, 0.1, 0.2).unwrap();
        let s = gaussian_smooth(&img, 1.4).unwrap();
        let g = sobel(&s);
        let gmax = g.magnitude.iter().copied().fold(0.0, f64::max);
        for (x, y) in e.pixels() {
            assert!(g.magnitude[y * 40 + x] >= 0.1 * gmax);
        }
    }
}
