//! Indexed triangle meshes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh<T> {
    pub vertices: Vec<Point3<T>>,
    pub triangles: Vec<[u32; 3]>,
}

/// Axis-aligned bounds of a vertex set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn center(&self) -> Point3<T> {
        self.min.add(self.max).scale(T::lit(0.5))
    }

    pub fn extent(&self) -> Point3<T> {
        self.max.sub(self.min)
    }
}

impl<T: Scalar> TriangleMesh<T> {
    pub fn new(vertices: Vec<Point3<T>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = Self {
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(t) = self
            .triangles
            .iter()
            .find(|t| t.iter().any(|&i| i as usize >= n))
        {
            return Err(Error::DegenerateShape(format!(
                "triangle {t:?} indexes past {n} vertices"
            )));
        }
        if let Some(v) = self.vertices.iter().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateShape(format!("non-finite vertex {v:?}")));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Option<Aabb<T>> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().skip(1).fold(
            Aabb {
                min: first,
                max: first,
            },
            |b, v| Aabb {
                min: Point3::new(b.min.x.min(v.x), b.min.y.min(v.y), b.min.z.min(v.z)),
                max: Point3::new(b.max.x.max(v.x), b.max.y.max(v.y), b.max.z.max(v.z)),
            },
        ))
    }

    /// Re-normalizes so the bounding-box center sits at the origin and the
    /// largest absolute coordinate is 1.
    pub fn normalized(&self) -> Result<Self> {
        let b = self
            .bounds()
            .ok_or_else(|| Error::DegenerateShape("mesh has no vertices".into()))?;
        let c = b.center();
        let half = b.extent().scale(T::lit(0.5));
        let r = half.x.max(half.y).max(half.z);
        if !(r > T::zero()) {
            return Err(Error::DegenerateShape("mesh collapses to a point".into()));
        }
        let inv = r.recip();
        Ok(Self {
            vertices: self.vertices.iter().map(|v| v.sub(c).scale(inv)).collect(),
            triangles: self.triangles.clone(),
        })
    }

    pub fn map_vertices(&self, f: impl Fn(Point3<T>) -> Point3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn triangle(&self, t: usize) -> [Point3<T>; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangle(t);
        b.sub(a).cross(c.sub(a)).norm() * T::lit(0.5)
    }

    /// Area-weighted uniform surface samples from a fixed-seed generator.
    pub fn sample_surface(&self, count: usize, seed: u64) -> Result<Vec<Point3<T>>> {
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0f64;
        for t in 0..self.triangles.len() {
            total += self.triangle_area(t).to_f64_lossy();
            cumulative.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::DegenerateShape("mesh has zero surface area".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let target = rng.gen::<f64>() * total;
            let t = cumulative
                .partition_point(|&c| c <= target)
                .min(cumulative.len() - 1);
            let (mut r1, mut r2) = (rng.gen::<f64>(), rng.gen::<f64>());
            if r1 + r2 > 1.0 {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            let [a, b, c] = self.triangle(t);
            out.push(
                a.add(b.sub(a).scale(T::lit(r1)))
                    .add(c.sub(a).scale(T::lit(r2))),
            );
        }
        Ok(out)
    }

    /// Axis-aligned box with the given half extents, centered at the origin,
    /// 12 outward-facing triangles.
    pub fn cuboid(hx: T, hy: T, hz: T) -> Self {
        let vertices = (0..8)
            .map(|i| {
                Point3::new(
                    if i & 1 == 0 { -hx } else { hx },
                    if i & 2 == 0 { -hy } else { hy },
                    if i & 4 == 0 { -hz } else { hz },
                )
            })
            .collect();
        let triangles = vec![
            [0, 2, 1], [1, 2, 3], // z-
            [4, 5, 6], [5, 7, 6], // z+
            [0, 1, 4], [1, 5, 4], // y-
            [2, 6, 3], [3, 6, 7], // y+
            [0, 4, 2], [2, 4, 6], // x-
            [1, 3, 5], [3, 7, 5], // x+
        ];
        Self {
            vertices,
            triangles,
        }
    }

    /// Flat rectangle in the z = 0 plane with the given half extents.
    pub fn quad(hx: T, hy: T) -> Self {
        Self {
            vertices: vec![
                Point3::new(-hx, -hy, T::zero()),
                Point3::new(hx, -hy, T::zero()),
                Point3::new(hx, hy, T::zero()),
                Point3::new(-hx, hy, T::zero()),
            ],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_centers_and_scales() {
        let m = TriangleMesh::new(
            vec![
                Point3::new(1.0_f64, 2.0, 3.0),
                Point3::new(5.0, 2.0, 3.0),
                Point3::new(1.0, 4.0, 4.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let n = m.normalized().unwrap();
        let b = n.bounds().unwrap();
        assert_eq!(b.center(), Point3::origin());
        assert_eq!(b.max.x, 1.0);
        assert_eq!(b.max.y, 0.5);
        assert!(n
            .vertices
            .iter()
            .all(|v| v.x.abs() <= 1.0 && v.y.abs() <= 1.0 && v.z.abs() <= 1.0));
    }

    #[test]
    fn rejects_bad_indices_and_points() {
        assert!(TriangleMesh::new(vec![Point3::<f64>::origin()], vec![[0, 0, 1]]).is_err());
        assert!(TriangleMesh::<f64>::default().normalized().is_err());
        let point = TriangleMesh::new(vec![Point3::new(1.0, 1.0, 1.0)], vec![]).unwrap();
        assert!(point.normalized().is_err());
    }

    #[test]
    fn samples_lie_on_surface_and_are_reproducible() {
        let q = TriangleMesh::quad(2.0_f64, 1.0);
        let a = q.sample_surface(200, 7).unwrap();
        assert_eq!(a, q.sample_surface(200, 7).unwrap());
        assert!(a
            .iter()
            .all(|p| p.z == 0.0 && p.x.abs() <= 2.0 + 1e-12 && p.y.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn cuboid_area() {
        let c = TriangleMesh::cuboid(1.0_f64, 1.0, 1.0);
        let area: f64 = (0..12).map(|t| c.triangle_area(t)).sum();
        assert!((area - 24.0).abs() < 1e-12);
    }
}
