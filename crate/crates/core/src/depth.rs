//! Depth maps and back-projection of "stuff" pixels into a labeled cloud.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{unproject, CameraIntrinsics, Pixel, Point3, DEPTH_EPS};
use crate::scalar::Scalar;
use crate::segmentation::{PanopticMap, VOID_ID};

/// Default range kept by [`filter_depth`], meters.
pub const DEFAULT_DEPTH_RANGE: (f64, f64) = (0.1, 1000.0);

/// Per-pixel metric depth with a validity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap<T> {
    width: usize,
    height: usize,
    depth: Vec<T>,
    valid: Vec<bool>,
}

impl<T: Scalar> DepthMap<T> {
    /// Pixels with a finite depth above [`DEPTH_EPS`] are valid.
    pub fn from_values(width: usize, height: usize, depth: Vec<T>) -> Result<Self> {
        if depth.len() != width * height {
            return Err(Error::invalid(format!(
                "depth buffer has {} values, expected {}x{}",
                depth.len(),
                width,
                height
            )));
        }
        let eps = T::lit(DEPTH_EPS);
        let valid = depth.iter().map(|&d| d.is_finite() && d > eps).collect();
        Ok(Self {
            width,
            height,
            depth,
            valid,
        })
    }

    pub fn constant(width: usize, height: usize, z: T) -> Self {
        Self::from_values(width, height, vec![z; width * height]).expect("sizes agree")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Depth at a pixel, or `None` when invalid.
    pub fn get(&self, x: usize, y: usize) -> Option<T> {
        self.get_index(y * self.width + x)
    }

    pub fn get_index(&self, i: usize) -> Option<T> {
        self.valid[i].then(|| self.depth[i])
    }

    pub fn invalidate(&mut self, x: usize, y: usize) {
        self.valid[y * self.width + x] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Raw depth buffer, including values at invalid pixels.
    pub fn raw(&self) -> &[T] {
        &self.depth
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint<T> {
    pub point: Point3<T>,
    pub segment_id: u32,
    pub category_id: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPointCloud<T> {
    pub points: Vec<LabeledPoint<T>>,
}

impl<T> LabeledPointCloud<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Marks pixels outside `(z_min, z_max]` invalid.
pub fn filter_depth<T: Scalar>(depth: &DepthMap<T>, z_min: T, z_max: T) -> Result<DepthMap<T>> {
    if !(z_min > T::zero() && z_min < z_max) {
        return Err(Error::invalid(format!(
            "depth range must satisfy 0 < z_min < z_max, got ({z_min}, {z_max}]"
        )));
    }
    let mut out = depth.clone();
    for (v, &d) in out.valid.iter_mut().zip(&depth.depth) {
        if *v && !(d > z_min && d <= z_max) {
            *v = false;
        }
    }
    Ok(out)
}

/// One point per valid pixel whose panoptic segment is stuff, unprojected
/// from the pixel center. Output is row-major.
pub fn backproject_stuff<T: Scalar>(
    depth: &DepthMap<T>,
    pan: &PanopticMap,
    k: &CameraIntrinsics<T>,
) -> Result<LabeledPointCloud<T>> {
    Error::check_dims(k.dims(), depth.dims())?;
    Error::check_dims(k.dims(), pan.dims())?;
    let mut points = Vec::new();
    let mut cached: Option<(u32, Option<u32>)> = None;
    for y in 0..depth.height {
        for x in 0..depth.width {
            let i = y * depth.width + x;
            let id = pan.ids()[i];
            if id == VOID_ID {
                continue;
            }
            let category = match cached {
                Some((c, cat)) if c == id => cat,
                _ => {
                    let cat = pan
                        .segment(id)
                        .filter(|s| !s.is_thing)
                        .map(|s| s.category_id);
                    cached = Some((id, cat));
                    cat
                }
            };
            let (Some(category_id), Some(z)) = (category, depth.get_index(i)) else {
                continue;
            };
            points.push(LabeledPoint {
                point: unproject(Pixel::center_of(x, y), z, k)?,
                segment_id: id,
                category_id,
            });
        }
    }
    Ok(LabeledPointCloud { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{intrinsics_from_fov, project};
    use crate::segmentation::SegmentInfo;

    fn stuff(id: u32, cat: u32) -> SegmentInfo {
        SegmentInfo { segment_id: id, category_id: cat, is_thing: false, score: None }
    }

    #[test]
    fn single_pixel_at_principal_point() {
        let k = intrinsics_from_fov(60.0_f64, 1, 1).unwrap();
        let pan = PanopticMap::new(1, 1, vec![4], vec![stuff(4, 9)]).unwrap();
        let cloud = backproject_stuff(&DepthMap::constant(1, 1, 2.0), &pan, &k).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0].point, Point3::new(0.0, 0.0, 2.0));
        assert_eq!((cloud.points[0].segment_id, cloud.points[0].category_id), (4, 9));
    }

    #[test]
    fn invalid_pixel_contributes_nothing() {
        let k = intrinsics_from_fov(60.0_f64, 2, 1).unwrap();
        let pan = PanopticMap::new(2, 1, vec![1, 1], vec![stuff(1, 1)]).unwrap();
        let mut d = DepthMap::constant(2, 1, 3.0);
        d.invalidate(1, 0);
        assert_eq!(backproject_stuff(&d, &pan, &k).unwrap().len(), 1);
    }

    #[test]
    fn four_depths_unproject_directly() {
        let k = intrinsics_from_fov(60.0_f64, 2, 2).unwrap();
        let pan = PanopticMap::new(2, 2, vec![1, 1, 2, 2], vec![stuff(1, 1), stuff(2, 2)]).unwrap();
        let d = DepthMap::from_values(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let cloud = backproject_stuff(&d, &pan, &k).unwrap();
        let zs: Vec<f64> = cloud.points.iter().map(|p| p.point.z).collect();
        assert_eq!(zs, vec![1.0, 2.0, 3.0, 4.0]);
        for (i, p) in cloud.points.iter().enumerate() {
            let px = project(p.point, &k).unwrap();
            assert!((px.u - ((i % 2) as f64 + 0.5)).abs() < 1e-9);
            assert!((px.v - ((i / 2) as f64 + 0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn things_and_void_produce_no_points() {
        let k = intrinsics_from_fov(60.0_f64, 3, 1).unwrap();
        let thing = SegmentInfo { segment_id: 2, category_id: 5, is_thing: true, score: None };
        let pan = PanopticMap::new(3, 1, vec![0, 1, 2], vec![stuff(1, 1), thing]).unwrap();
        let cloud = backproject_stuff(&DepthMap::constant(3, 1, 1.0), &pan, &k).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0].segment_id, 1);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let k = intrinsics_from_fov(60.0_f64, 2, 2).unwrap();
        let pan = PanopticMap::empty(2, 2);
        let d = DepthMap::constant(3, 2, 1.0);
        assert!(matches!(
            backproject_stuff(&d, &pan, &k),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn filter_examples() {
        let d = DepthMap::from_values(3, 1, vec![0.1, 5.0, 200.0]).unwrap();
        let f = filter_depth(&d, 0.5, 100.0).unwrap();
        assert_eq!(f.valid_count(), 1);
        assert_eq!(f.get(1, 0), Some(5.0));

        let inside = DepthMap::from_values(2, 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(filter_depth(&inside, 0.5, 100.0).unwrap(), inside);

        let zero = DepthMap::from_values(1, 1, vec![0.0]).unwrap();
        assert_eq!(zero.valid_count(), 0);
        assert_eq!(filter_depth(&zero, 0.1, 1.0).unwrap().valid_count(), 0);

        assert!(filter_depth(&d, 0.0, 1.0).is_err());
        assert!(filter_depth(&d, 2.0, 1.0).is_err());
    }

    #[test]
    fn filter_upper_bound_is_inclusive() {
        let d = DepthMap::from_values(2, 1, vec![0.5, 100.0]).unwrap();
        let f = filter_depth(&d, 0.5, 100.0).unwrap();
        assert_eq!(f.get(0, 0), None);
        assert_eq!(f.get(1, 0), Some(100.0));
    }
}
