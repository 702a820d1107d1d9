use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::depth::{LabeledPoint, LabeledPointCloud};
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::mesh::TriangleMesh;
use crate::scalar::Scalar;

/// Parses `v` and `f` records of a Wavefront OBJ; polygons are fan
/// triangulated and `v/vt/vn` or negative indices are accepted.
pub fn parse_obj<T: Scalar>(text: &str) -> Result<TriangleMesh<T>> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let err = |msg: String| Error::Parse(format!("OBJ line {}: {msg}", lineno + 1));
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| err(e.to_string())))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs three coordinates".into()));
                }
                vertices.push(Point3::new(T::lit(c[0]), T::lit(c[1]), T::lit(c[2])));
            }
            Some("f") => {
                let idx: Vec<u32> = parts
                    .map(|s| {
                        let first = s.split('/').next().unwrap_or("");
                        let i: i64 = first.parse().map_err(|_| err(format!("bad index {s:?}")))?;
                        let n = vertices.len() as i64;
                        let resolved = if i > 0 { i - 1 } else { n + i };
                        if i == 0 || resolved < 0 || resolved >= n {
                            return Err(err(format!("index {i} out of range")));
                        }
                        Ok(resolved as u32)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)
}

pub fn read_obj<T: Scalar>(path: &Path) -> Result<TriangleMesh<T>> {
    parse_obj(&fs::read_to_string(path)?)
}

pub fn obj_string<T: Scalar>(mesh: &TriangleMesh<T>) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    s
}

pub fn write_obj<T: Scalar>(mesh: &TriangleMesh<T>, path: &Path) -> Result<()> {
    fs::write(path, obj_string(mesh))?;
    Ok(())
}

pub fn ply_mesh_string<T: Scalar>(mesh: &TriangleMesh<T>) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    for v in &mesh.vertices {
        writeln!(s, "{} {} {}", v.x, v.y, v.z).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    s
}

/// Reads the ASCII PLY mesh layout written by [`ply_mesh_string`].
pub fn parse_ply_mesh<T: Scalar>(text: &str) -> Result<TriangleMesh<T>> {
    let (header, body) = text
        .split_once("end_header\n")
        .ok_or_else(|| Error::Parse("PLY header is not terminated".into()))?;
    if !header.starts_with("ply\nformat ascii 1.0\n") {
        return Err(Error::Parse("not an ASCII PLY".into()));
    }
    let count = |name: &str| -> Result<usize> {
        header
            .lines()
            .find_map(|l| l.strip_prefix(name))
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::Parse(format!("PLY header lacks {name:?}")))
    };
    let (nv, nf) = (count("element vertex ")?, count("element face ")?);
    let mut lines = body.lines();
    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let line = lines.next().unwrap_or("");
        let c: Vec<f64> = line
            .split_whitespace()
            .take(3)
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("PLY vertex {i}: {line:?}")))?;
        if c.len() != 3 {
            return Err(Error::Parse(format!("PLY vertex {i}: {line:?}")));
        }
        vertices.push(Point3::new(T::lit(c[0]), T::lit(c[1]), T::lit(c[2])));
    }
    let mut triangles = Vec::with_capacity(nf);
    for i in 0..nf {
        let line = lines.next().unwrap_or("");
        let idx: Vec<u32> = line
            .split_whitespace()
            .map(|s| s.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("PLY face {i}: {line:?}")))?;
        if idx.len() < 4 || idx[0] as usize != idx.len() - 1 {
            return Err(Error::Parse(format!("PLY face {i}: {line:?}")));
        }
        for k in 2..idx.len() - 1 {
            triangles.push([idx[1], idx[k], idx[k + 1]]);
        }
    }
    TriangleMesh::new(vertices, triangles)
}

const CLOUD_HEADER_PROPS: &str = "property double x\nproperty double y\nproperty double z\n\
property uint segment_id\nproperty uint category_id\n";

/// ASCII PLY with per-point `segment_id` and `category_id`.
pub fn ply_cloud_string<T: Scalar>(cloud: &LabeledPointCloud<T>) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\n{CLOUD_HEADER_PROPS}end_header\n",
        cloud.len()
    );
    for p in &cloud.points {
        writeln!(
            s,
            "{} {} {} {} {}",
            p.point.x, p.point.y, p.point.z, p.segment_id, p.category_id
        )
        .unwrap();
    }
    s
}

/// Reads the format written by [`ply_cloud_string`].
pub fn parse_ply_cloud<T: Scalar>(text: &str) -> Result<LabeledPointCloud<T>> {
    let (header, body) = text
        .split_once("end_header\n")
        .ok_or_else(|| Error::Parse("PLY header is not terminated".into()))?;
    if !header.starts_with("ply\nformat ascii 1.0\n") || !header.contains(CLOUD_HEADER_PROPS) {
        return Err(Error::Parse("not a labeled ASCII point-cloud PLY".into()));
    }
    let count: usize = header
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .and_then(|n| n.trim().parse().ok())
        .ok_or_else(|| Error::Parse("PLY vertex count missing".into()))?;
    let mut points = Vec::with_capacity(count);
    for (i, line) in body.lines().take(count).enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse(format!("PLY point {i}: {line:?}"));
        if f.len() != 5 {
            return Err(bad());
        }
        let coord = |s: &str| s.parse::<f64>().map(T::lit).map_err(|_| bad());
        points.push(LabeledPoint {
            point: Point3::new(coord(f[0])?, coord(f[1])?, coord(f[2])?),
            segment_id: f[3].parse().map_err(|_| bad())?,
            category_id: f[4].parse().map_err(|_| bad())?,
        });
    }
    if points.len() != count {
        return Err(Error::Parse(format!(
            "PLY declares {count} points but holds {}",
            points.len()
        )));
    }
    Ok(LabeledPointCloud { points })
}
