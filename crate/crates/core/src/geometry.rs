//! Pinhole camera model, projection and inverse-depth conversions.
//!
//! Camera coordinates are right-handed with x pointing right, y pointing
//! down and z pointing forward. Pixel coordinates are continuous; the
//! center of the pixel with integer index `(i, j)` is `(i + 0.5, j + 0.5)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest depth (meters) accepted by reciprocal conversions and frustum tests.
pub const DEPTH_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> T {
        self.sub(o).norm()
    }

    pub fn lerp(self, o: Self, t: T) -> Self {
        self.add(o.sub(self).scale(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pixel<T> {
    pub u: T,
    pub v: T,
}

impl<T: Scalar> Pixel<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    /// Center of the pixel with integer index `(col, row)`.
    pub fn center_of(col: usize, row: usize) -> Self {
        let half = T::lit(0.5);
        Self::new(
            T::from_usize(col).unwrap() + half,
            T::from_usize(row).unwrap() + half,
        )
    }
}

/// Pinhole intrinsics. `width` and `height` are the image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Scalar> CameraIntrinsics<T> {
    /// Validating constructor.
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if !(self.fx > T::zero() && self.fy > T::zero()) || !self.fx.is_finite() || !self.fy.is_finite()
        {
            return Err(Error::invalid("focal lengths must be positive and finite"));
        }
        let w = T::from_usize(self.width).unwrap();
        let h = T::from_usize(self.height).unwrap();
        if !(self.cx >= T::zero() && self.cx < w && self.cy >= T::zero() && self.cy < h) {
            return Err(Error::invalid("principal point must lie inside the image"));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Mean of `fx` and `fy`; equal to both under the square-pixel model.
    pub fn focal(&self) -> T {
        (self.fx + self.fy) * T::lit(0.5)
    }

    pub fn cast<U: Scalar>(&self) -> CameraIntrinsics<U> {
        CameraIntrinsics {
            fx: U::lit(self.fx.to_f64_lossy()),
            fy: U::lit(self.fy.to_f64_lossy()),
            cx: U::lit(self.cx.to_f64_lossy()),
            cy: U::lit(self.cy.to_f64_lossy()),
            width: self.width,
            height: self.height,
        }
    }
}

/// Intrinsics from a horizontal field of view with square pixels and a
/// centered principal point.
pub fn intrinsics_from_fov<T: Scalar>(
    fov_deg: T,
    width: usize,
    height: usize,
) -> Result<CameraIntrinsics<T>> {
    if !(fov_deg > T::zero() && fov_deg < T::lit(180.0)) {
        return Err(Error::invalid(format!(
            "field of view must be in (0, 180) degrees, got {fov_deg}"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    let half_w = T::from_usize(width).unwrap() * T::lit(0.5);
    let half_h = T::from_usize(height).unwrap() * T::lit(0.5);
    let f = half_w / (fov_deg.to_radians() * T::lit(0.5)).tan();
    CameraIntrinsics::new(f, f, half_w, half_h, width, height)
}

pub fn project<T: Scalar>(p: Point3<T>, k: &CameraIntrinsics<T>) -> Result<Pixel<T>> {
    if !(p.z > T::zero()) {
        return Err(Error::BehindCamera(p.z.to_f64_lossy()));
    }
    Ok(Pixel::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

pub fn unproject<T: Scalar>(px: Pixel<T>, depth: T, k: &CameraIntrinsics<T>) -> Result<Point3<T>> {
    if !(depth > T::zero()) || !depth.is_finite() {
        return Err(Error::InvalidDepth(depth.to_f64_lossy()));
    }
    Ok(Point3::new(
        (px.u - k.cx) * depth / k.fx,
        (px.v - k.cy) * depth / k.fy,
        depth,
    ))
}

pub fn depth_to_inverse<T: Scalar>(depth: T) -> Result<T> {
    reciprocal(depth)
}

pub fn inverse_to_depth<T: Scalar>(inv: T) -> Result<T> {
    reciprocal(inv)
}

fn reciprocal<T: Scalar>(value: T) -> Result<T> {
    if !(value > T::lit(DEPTH_EPS)) || !value.is_finite() {
        return Err(Error::NearZero(value.to_f64_lossy()));
    }
    Ok(value.recip())
}
