//! Z-buffered re-projection of a [`Scene3D`] into a panoptic map.

use crate::depth::DepthMap;
use crate::error::Result;
use crate::geometry::{CameraIntrinsics, Point3};
use crate::mesh::TriangleMesh;
use crate::scalar::Scalar;
use crate::scene::Scene3D;
use crate::segmentation::{PanopticMap, SegmentInfo, VOID_ID};

/// Geometry closer than this (meters) is clipped away.
pub const NEAR_PLANE: f64 = 1e-3;

struct ZBuffer<T> {
    width: usize,
    height: usize,
    depth: Vec<T>,
    ids: Vec<u32>,
}

impl<T: Scalar> ZBuffer<T> {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            depth: vec![T::infinity(); width * height],
            ids: vec![VOID_ID; width * height],
        }
    }

    /// Nearest fragment wins; equal depths go to the lower segment id, so
    /// the result does not depend on drawing order.
    #[inline]
    fn write(&mut self, i: usize, z: T, id: u32) {
        let cur = self.depth[i];
        if z < cur || (z == cur && id < self.ids[i]) {
            self.depth[i] = z;
            self.ids[i] = id;
        }
    }

    fn splat(&mut self, p: Point3<T>, id: u32, k: &CameraIntrinsics<T>) {
        if !(p.z > T::lit(NEAR_PLANE)) {
            return;
        }
        let u = (k.fx * p.x / p.z + k.cx).floor();
        let v = (k.fy * p.y / p.z + k.cy).floor();
        if u < T::zero() || v < T::zero() {
            return;
        }
        let (Some(x), Some(y)) = (u.to_usize(), v.to_usize()) else {
            return;
        };
        if x < self.width && y < self.height {
            self.write(y * self.width + x, p.z, id);
        }
    }

    fn draw_mesh(&mut self, mesh: &TriangleMesh<T>, id: u32, k: &CameraIntrinsics<T>) {
        for t in 0..mesh.triangles.len() {
            let tri = mesh.triangle(t);
            let poly = clip_near(&tri, T::lit(NEAR_PLANE));
            for i in 1..poly.len().saturating_sub(1) {
                self.draw_triangle([poly[0], poly[i], poly[i + 1]], id, k);
            }
        }
    }

    fn draw_triangle(&mut self, tri: [Point3<T>; 3], id: u32, k: &CameraIntrinsics<T>) {
        let s: [(T, T, T); 3] = tri.map(|p| {
            (k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy, p.z.recip())
        });
        let edge = |a: (T, T, T), b: (T, T, T), u: T, v: T| (b.0 - a.0) * (v - a.1) - (b.1 - a.1) * (u - a.0);
        let area = edge(s[0], s[1], s[2].0, s[2].1);
        if area == T::zero() || !area.is_finite() {
            return;
        }
        let half = T::lit(0.5);
        let (min_u, max_u) = minmax([s[0].0, s[1].0, s[2].0]);
        let (min_v, max_v) = minmax([s[0].1, s[1].1, s[2].1]);
        let Some((x0, x1)) = pixel_span(min_u, max_u, self.width) else {
            return;
        };
        let Some((y0, y1)) = pixel_span(min_v, max_v, self.height) else {
            return;
        };
        let inv_area = area.recip();
        for y in y0..=y1 {
            let pv = T::from_usize(y).unwrap() + half;
            for x in x0..=x1 {
                let pu = T::from_usize(x).unwrap() + half;
                let l0 = edge(s[1], s[2], pu, pv) * inv_area;
                let l1 = edge(s[2], s[0], pu, pv) * inv_area;
                let l2 = edge(s[0], s[1], pu, pv) * inv_area;
                if l0 < T::zero() || l1 < T::zero() || l2 < T::zero() {
                    continue;
                }
                let inv_z = l0 * s[0].2 + l1 * s[1].2 + l2 * s[2].2;
                if !(inv_z > T::zero()) {
                    continue;
                }
                self.write(y * self.width + x, inv_z.recip(), id);
            }
        }
    }
}

fn minmax<T: Scalar>(v: [T; 3]) -> (T, T) {
    (v[0].min(v[1]).min(v[2]), v[0].max(v[1]).max(v[2]))
}

/// Pixel indices whose centers fall in `[lo, hi]`, clamped to `[0, n)`.
fn pixel_span<T: Scalar>(lo: T, hi: T, n: usize) -> Option<(usize, usize)> {
    let half = T::lit(0.5);
    let first = (lo - half).ceil().max(T::zero());
    let last = (hi - half).floor().min(T::from_usize(n - 1).unwrap());
    if !(first <= last) {
        return None;
    }
    Some((first.to_usize()?, last.to_usize()?))
}

/// Sutherland–Hodgman clip of a triangle against `z >= near`.
fn clip_near<T: Scalar>(tri: &[Point3<T>; 3], near: T) -> Vec<Point3<T>> {
    if tri.iter().all(|p| p.z >= near) {
        return tri.to_vec();
    }
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let (a_in, b_in) = (a.z >= near, b.z >= near);
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.z) / (b.z - a.z);
            let mut p = a.lerp(b, t);
            p.z = near;
            out.push(p);
        }
    }
    out
}

/// Renders every scene element at pixel centers; stuff points become
/// single-pixel splats at their projected location.
pub fn rasterize_scene<T: Scalar>(
    scene: &Scene3D<T>,
    k: &CameraIntrinsics<T>,
) -> Result<(PanopticMap, DepthMap<T>)> {
    k.validate()?;
    let table = scene.segment_table()?;
    let mut zb = ZBuffer::new(k.width, k.height);
    for p in &scene.stuff.points {
        zb.splat(p.point, p.segment_id, k);
    }
    for s in &scene.stuff_meshes {
        zb.draw_mesh(&s.mesh, s.segment_id, k);
    }
    for t in &scene.things {
        zb.draw_mesh(&t.mesh, t.segment_id, k);
    }
    let infos = table.into_iter().map(|(id, seg)| SegmentInfo {
        segment_id: id,
        category_id: seg.category_id,
        is_thing: seg.is_thing,
        score: None,
    });
    let pan = PanopticMap::from_raster_pruned(k.width, k.height, zb.ids, infos)?;
    let depth = DepthMap::from_values(k.width, k.height, zb.depth)?;
    Ok((pan, depth))
}
