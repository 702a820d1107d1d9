//! Assembled 3D scenes and room layout boxes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::alignment::PlacedThing;
use crate::depth::LabeledPointCloud;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::mesh::TriangleMesh;
use crate::scalar::Scalar;
use crate::segmentation::VOID_ID;

/// Surface-type "stuff" such as a wall of a layout box.
#[derive(Debug, Clone, PartialEq)]
pub struct StuffMesh<T> {
    pub mesh: TriangleMesh<T>,
    pub segment_id: u32,
    pub category_id: u32,
}

/// Stuff as labeled points and surfaces plus placed thing meshes, all in
/// camera coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene3D<T> {
    pub stuff: LabeledPointCloud<T>,
    pub stuff_meshes: Vec<StuffMesh<T>>,
    pub things: Vec<PlacedThing<T>>,
}

/// Per-segment metadata implied by a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneSegment {
    pub category_id: u32,
    pub is_thing: bool,
}

impl<T: Scalar> Scene3D<T> {
    pub fn new(
        stuff: LabeledPointCloud<T>,
        stuff_meshes: Vec<StuffMesh<T>>,
        things: Vec<PlacedThing<T>>,
    ) -> Result<Self> {
        let scene = Self {
            stuff,
            stuff_meshes,
            things,
        };
        scene.segment_table()?;
        Ok(scene)
    }

    pub fn is_empty(&self) -> bool {
        self.stuff.is_empty() && self.stuff_meshes.is_empty() && self.things.is_empty()
    }

    /// Segment id → metadata. Fails when a thing id is reused, when an id is
    /// both stuff and thing, or when a stuff id maps to two categories.
    pub fn segment_table(&self) -> Result<BTreeMap<u32, SceneSegment>> {
        let mut table: BTreeMap<u32, SceneSegment> = BTreeMap::new();
        let mut add = |id: u32, category_id: u32, is_thing: bool| -> Result<()> {
            if id == VOID_ID {
                return Err(Error::invalid("scene element uses the void segment id"));
            }
            let seg = SceneSegment {
                category_id,
                is_thing,
            };
            match table.get(&id) {
                None => {
                    table.insert(id, seg);
                    Ok(())
                }
                Some(prev) if !is_thing && *prev == seg => Ok(()),
                Some(_) => Err(Error::invalid(format!("segment id {id} is not unique"))),
            }
        };
        let mut last = None;
        for p in &self.stuff.points {
            if last != Some((p.segment_id, p.category_id)) {
                add(p.segment_id, p.category_id, false)?;
                last = Some((p.segment_id, p.category_id));
            }
        }
        for s in &self.stuff_meshes {
            add(s.segment_id, s.category_id, false)?;
        }
        for t in &self.things {
            add(t.segment_id, t.category_id, true)?;
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutCategories {
    pub wall: u32,
    pub ceiling: u32,
    pub floor: u32,
}

/// Oriented cuboid given by its 8 corners. Corner `i` is
/// `c0 + bit0(i)·e0 + bit1(i)·e1 + bit2(i)·e2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutBox<T> {
    pub corners: [Point3<T>; 8],
}

impl<T: Scalar> LayoutBox<T> {
    pub fn new(corners: [Point3<T>; 8]) -> Result<Self> {
        let b = Self { corners };
        b.validate()?;
        Ok(b)
    }

    /// Builds the box from its center, three edge vectors.
    pub fn from_center_edges(center: Point3<T>, edges: [Point3<T>; 3]) -> Self {
        let half = T::lit(0.5);
        let c0 = center
            .sub(edges[0].scale(half))
            .sub(edges[1].scale(half))
            .sub(edges[2].scale(half));
        let corners = std::array::from_fn(|i| {
            (0..3).fold(c0, |acc, a| {
                if i >> a & 1 == 1 {
                    acc.add(edges[a])
                } else {
                    acc
                }
            })
        });
        Self { corners }
    }

    fn edges(&self) -> [Point3<T>; 3] {
        let c = &self.corners;
        [c[1].sub(c[0]), c[2].sub(c[0]), c[4].sub(c[0])]
    }

    pub fn validate(&self) -> Result<()> {
        if self.corners.iter().any(|c| !c.is_finite()) {
            return Err(Error::DegenerateLayout("non-finite corner".into()));
        }
        let e = self.edges();
        let scale = e.iter().map(|v| v.norm()).fold(T::zero(), T::max);
        let volume = e[0].cross(e[1]).dot(e[2]).abs();
        if !(scale > T::zero()) || !(volume > T::lit(1e-9) * scale * scale * scale) {
            return Err(Error::DegenerateLayout("corners span no volume".into()));
        }
        let tol = T::lit(1e-6) * scale.max(T::one());
        for i in 0..8 {
            let expected = (0..3).fold(self.corners[0], |acc, a| {
                if i >> a & 1 == 1 {
                    acc.add(e[a])
                } else {
                    acc
                }
            });
            if expected.distance(self.corners[i]) > tol {
                return Err(Error::DegenerateLayout(format!(
                    "corner {i} breaks the parallelepiped"
                )));
            }
        }
        Ok(())
    }

    pub fn center(&self) -> Point3<T> {
        self.corners[0].lerp(self.corners[7], T::lit(0.5))
    }
}

/// Turns a layout box that encloses the camera into six inward-facing
/// two-triangle faces labeled floor, ceiling or wall.
///
/// With y pointing down, the floor is the face whose inward normal is most
/// aligned with −y and the ceiling the one most aligned with +y.
pub fn layout_box_to_stuff_meshes<T: Scalar>(
    layout: &LayoutBox<T>,
    categories: LayoutCategories,
) -> Result<Vec<(TriangleMesh<T>, u32)>> {
    layout.validate()?;
    let center = layout.center();
    let mut faces = Vec::with_capacity(6);
    for axis in 0..3 {
        for side in 0..2 {
            let idx: Vec<usize> = (0..8).filter(|i| (i >> axis) & 1 == side).collect();
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            // quad order around the face: 00, 10, 11, 01 in the (a, b) bits
            let pick = |ba: usize, bb: usize| {
                idx.iter()
                    .copied()
                    .find(|&i| (i >> a) & 1 == ba && (i >> b) & 1 == bb)
                    .unwrap()
            };
            let quad = [pick(0, 0), pick(1, 0), pick(1, 1), pick(0, 1)];
            let verts: Vec<Point3<T>> = quad.iter().map(|&i| layout.corners[i]).collect();
            let normal = verts[1].sub(verts[0]).cross(verts[2].sub(verts[0]));
            let face_center = verts[0].lerp(verts[2], T::lit(0.5));
            let to_inside = center.sub(face_center);
            let (tris, inward) = if normal.dot(to_inside) > T::zero() {
                (vec![[0, 1, 2], [0, 2, 3]], normal)
            } else {
                (vec![[0, 2, 1], [0, 3, 2]], normal.scale(-T::one()))
            };
            let inward = inward.scale(inward.norm().recip());
            // camera at origin must be on the inner side of every face
            if !(inward.dot(Point3::origin().sub(face_center)) > T::zero()) {
                return Err(Error::DegenerateLayout(
                    "camera origin lies outside the layout box".into(),
                ));
            }
            faces.push((TriangleMesh { vertices: verts, triangles: tris }, inward));
        }
    }
    let down = |n: &Point3<T>| -n.y;
    let floor = (0..6)
        .max_by(|&i, &j| down(&faces[i].1).partial_cmp(&down(&faces[j].1)).unwrap().then(j.cmp(&i)))
        .unwrap();
    let ceiling = (0..6)
        .filter(|&i| i != floor)
        .max_by(|&i, &j| faces[i].1.y.partial_cmp(&faces[j].1.y).unwrap().then(j.cmp(&i)))
        .unwrap();
    Ok(faces
        .into_iter()
        .enumerate()
        .map(|(i, (mesh, _))| {
            let cat = if i == floor {
                categories.floor
            } else if i == ceiling {
                categories.ceiling
            } else {
                categories.wall
            };
            (mesh, cat)
        })
        .collect())
}
