use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A point in image coordinates: `x` to the right, `y` down, pixel centers on integers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn from_pixel(x: usize, y: usize) -> Self {
        Self::new(T::from_count(x), T::from_count(y))
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2-D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn cast<U: Scalar>(self) -> Point<U> {
        Point::new(U::lit(self.x.as_f64()), U::lit(self.y.as_f64()))
    }
}

impl<T: Scalar> Add for Point<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Scalar> Sub for Point<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Scalar> Mul<T> for Point<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// Unsigned angle in degrees, in `[0, 180]`, between two direction vectors.
pub fn angle_between<T: Scalar>(u: Point<T>, v: Point<T>) -> T {
    let denom = u.norm() * v.norm();
    let cos = (u.dot(v) / denom).max(-T::one()).min(T::one());
    cos.acos().to_degrees()
}
