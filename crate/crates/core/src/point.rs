use core::fmt;
use core::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

/// Largest state dimension supported by [`Point`].
pub const MAX_DIM: usize = 3;

/// A point (or vector) in `R^d` for `1 <= d <= MAX_DIM`, stored inline.
#[derive(Clone, Copy, PartialEq)]
pub struct Point {
    dim: u8,
    coords: [f64; MAX_DIM],
}

impl Point {
    /// Panics if `coords` is empty or longer than [`MAX_DIM`].
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "point dimension {} outside 1..={MAX_DIM}",
            coords.len()
        );
        let mut c = [0.0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        Point {
            dim: dim as u8,
            coords: [0.0; MAX_DIM],
        }
    }

    pub fn scalar(x: f64) -> Self {
        Point::new(&[x])
    }

    /// Unit vector along `axis`.
    pub fn basis(dim: usize, axis: usize) -> Self {
        let mut p = Point::zeros(dim);
        p.coords[axis] = 1.0;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn dot(&self, other: &Point) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    #[inline]
    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (*self - *other).norm()
    }

    /// True when every coordinate is exactly zero.
    pub fn is_origin(&self) -> bool {
        self.as_slice().iter().all(|&c| c == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|c| c.is_finite())
    }

    /// `self + s * v`.
    #[inline]
    pub fn axpy(&self, s: f64, v: &Point) -> Point {
        debug_assert_eq!(self.dim, v.dim);
        let mut out = *self;
        for i in 0..self.dim() {
            out.coords[i] += s * v.coords[i];
        }
        out
    }

    /// Unit vector in the direction of `self`, or `None` at the origin.
    pub fn normalized(&self) -> Option<Point> {
        let n = self.norm();
        (n > 0.0).then(|| *self * (1.0 / n))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Point {
        let mut out = *self;
        for c in out.as_mut_slice() {
            *c = f(*c);
        }
        out
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.as_slice().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Index<usize> for Point {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for Point {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        self.axpy(1.0, &rhs)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        self.axpy(-1.0, &rhs)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        self.map(|c| c * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        self.map(|c| -c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = Point::new(&[1.0, 2.0]);
        let b = Point::new(&[3.0, -1.0]);
        assert_eq!((a + b).as_slice(), &[4.0, 1.0]);
        assert_eq!((a - b).as_slice(), &[-2.0, 3.0]);
        assert_eq!(a.dot(&b), 1.0);
        assert_eq!(Point::new(&[3.0, 4.0]).norm(), 5.0);
        assert!(Point::zeros(2).is_origin());
        assert!(Point::zeros(2).normalized().is_none());
    }

    #[test]
    #[should_panic]
    fn rejects_large_dimension() {
        Point::new(&[0.0; 4]);
    }
}
