//! Placement of normalized instance meshes into camera coordinates.
//!
//! Depth along the optical axis comes from a percentile statistic of the
//! depth map under the instance mask (or from an inverse z-center head);
//! the amodal bounding box fixes image-plane position and isotropic scale.

use crate::error::{Error, Result};
use crate::geometry::{unproject, CameraIntrinsics, Pixel, Point3};
use crate::depth::DepthMap;
use crate::mesh::TriangleMesh;
use crate::scalar::Scalar;
use crate::segmentation::{bbox_of_mask, BinaryMask, InstanceObservation};

pub const DEFAULT_PERCENTILES: (f64, f64) = (2.0, 98.0);

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedThing<T> {
    pub mesh: TriangleMesh<T>,
    pub segment_id: u32,
    pub category_id: u32,
    pub z_c: T,
    /// Meters per normalized mesh unit.
    pub scale: T,
}

/// 1-based nearest-rank index `ceil(p/100 * n)`, clamped to `[1, n]`.
fn nearest_rank(p: f64, n: usize) -> usize {
    ((p * n as f64) / 100.0).ceil().clamp(1.0, n as f64) as usize
}

/// Midpoint of the `p_lo` and `p_hi` nearest-rank percentiles of the valid
/// depths under `mask`.
pub fn estimate_z_center<T: Scalar>(
    depth: &DepthMap<T>,
    mask: &BinaryMask,
    p_lo: f64,
    p_hi: f64,
) -> Result<T> {
    Error::check_dims(depth.dims(), mask.dims())?;
    if !(0.0..=100.0).contains(&p_lo) || !(0.0..=100.0).contains(&p_hi) || p_lo > p_hi {
        return Err(Error::invalid(format!(
            "percentiles must satisfy 0 <= lo <= hi <= 100, got ({p_lo}, {p_hi})"
        )));
    }
    let mut values: Vec<T> = mask
        .iter_set()
        .filter_map(|(x, y)| depth.get(x, y))
        .collect();
    if values.is_empty() {
        return Err(Error::EmptySupport);
    }
    let n = values.len();
    let cmp = |a: &T, b: &T| a.partial_cmp(b).expect("valid depths are finite");
    let hi_idx = nearest_rank(p_hi, n) - 1;
    let lo_idx = nearest_rank(p_lo, n) - 1;
    let (below, hi_val, _) = values.select_nth_unstable_by(hi_idx, cmp);
    let hi = *hi_val;
    let lo = if lo_idx == hi_idx {
        hi
    } else {
        *below.select_nth_unstable_by(lo_idx, cmp).1
    };
    Ok((lo + hi) * T::lit(0.5))
}

fn check_positive<T: Scalar>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Scale-normalized depth extent `(d_z / z_c) * (f / h)`.
pub fn normalized_depth_extent<T: Scalar>(d_z: T, z_c: T, f: T, h: T) -> Result<T> {
    check_positive("z_c", z_c)?;
    check_positive("f", f)?;
    check_positive("h", h)?;
    if !(d_z >= T::zero()) || !d_z.is_finite() {
        return Err(Error::invalid(format!("depth extent must be non-negative, got {d_z}")));
    }
    Ok((d_z / z_c) * (f / h))
}

/// Inverse of [`normalized_depth_extent`].
pub fn depth_extent<T: Scalar>(dz_norm: T, z_c: T, f: T, h: T) -> Result<T> {
    check_positive("z_c", z_c)?;
    check_positive("f", f)?;
    check_positive("h", h)?;
    if !(dz_norm >= T::zero()) || !dz_norm.is_finite() {
        return Err(Error::invalid(format!(
            "normalized depth extent must be non-negative, got {dz_norm}"
        )));
    }
    Ok(dz_norm * z_c * (h / f))
}

/// Places a normalized mesh at depth `z_c` behind the amodal bounding box.
///
/// Scale is isotropic and chosen so the mesh's vertical extent, viewed at
/// `z_c`, spans the pixel height of the box; the mesh origin lands on the
/// ray through the box center.
pub fn place_mesh<T: Scalar>(
    mesh: &TriangleMesh<T>,
    obs: &InstanceObservation<T>,
    segment_id: u32,
    z_c: T,
    k: &CameraIntrinsics<T>,
) -> Result<PlacedThing<T>> {
    check_positive("z_c", z_c)?;
    Error::check_dims(k.dims(), obs.amodal_mask.dims())?;
    mesh.validate()?;
    let bbox = bbox_of_mask(&obs.amodal_mask)?;
    let bounds = mesh
        .bounds()
        .ok_or_else(|| Error::DegenerateShape("mesh has no vertices".into()))?;
    let extent_y = bounds.extent().y;
    if !(extent_y > T::zero()) {
        return Err(Error::DegenerateShape("mesh has zero vertical extent".into()));
    }
    let bbox_h = T::from_usize(bbox.pixel_height()).unwrap();
    let scale = (bbox_h * z_c / k.fy) / extent_y;
    let (u, v) = bbox.center::<T>();
    let translation = unproject(Pixel::new(u, v), z_c, k)?;
    Ok(PlacedThing {
        mesh: mesh.map_vertices(|p| p.scale(scale).add(translation)),
        segment_id,
        category_id: obs.class,
        z_c,
        scale,
    })
}

/// Symmetric chamfer distance: the average of the two directed mean
/// nearest-neighbor distances.
pub fn chamfer_distance<T: Scalar>(a: &[Point3<T>], b: &[Point3<T>]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("chamfer distance needs two nonempty samples"));
    }
    let directed = |from: &[Point3<T>], to: &[Point3<T>]| {
        let sum = from.iter().fold(T::zero(), |acc, p| {
            let nearest = to
                .iter()
                .map(|q| p.sub(*q).dot(p.sub(*q)))
                .fold(T::infinity(), T::min);
            acc + nearest.sqrt()
        });
        sum / T::from_usize(from.len()).unwrap()
    };
    Ok((directed(a, b) + directed(b, a)) * T::lit(0.5))
}
