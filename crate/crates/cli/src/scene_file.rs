//! `scene.json`: the exported scene and per-thing placement report. Geometry
//! lives in sibling files referenced by relative name.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use panoptic3d::io::{parse_obj, parse_ply_cloud, parse_ply_mesh};
use panoptic3d::pipeline::ZSource;
use panoptic3d::{BBox, Camera, CenteredFlag, Mesh, Placed, Scene, StuffMesh};

use crate::error::CliError;
use crate::manifest::resolve;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub camera: Camera,
    /// Default thresholds for `evaluate`.
    pub taus: Vec<f64>,
    pub stuff_points: String,
    pub stuff_point_count: usize,
    pub stuff_meshes: Vec<StuffMeshEntry>,
    pub things: Vec<ThingEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thing_samples: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StuffMeshEntry {
    pub segment_id: u32,
    pub category_id: u32,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThingEntry {
    pub segment_id: u32,
    pub category_id: u32,
    pub mesh_ref: String,
    /// Placed mesh; absent when the thing could not be placed.
    pub path: Option<String>,
    pub z_source: ZSource,
    pub z_c: Option<f64>,
    pub scale: Option<f64>,
    pub amodal_bbox: BBox,
    pub flag: CenteredFlag,
    pub depth_extent: Option<f64>,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::new("io_error", e.to_string()).at(path))
}

/// Loads a mesh from OBJ or PLY, chosen by extension.
pub fn load_mesh(path: &Path) -> Result<Mesh, CliError> {
    let text = read_text(path)?;
    let is_ply = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("ply"));
    let mesh = if is_ply {
        parse_ply_mesh(&text)
    } else {
        parse_obj(&text)
    };
    mesh.map_err(|e| CliError::from(e).at(path))
}

impl SceneFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        if !path.is_file() {
            return Err(CliError::missing(path));
        }
        serde_json::from_str(&read_text(path)?)
            .map_err(|e| CliError::new("scene_error", e.to_string()).at(path))
    }

    /// Reads the referenced geometry back into a [`Scene`].
    pub fn load_scene(&self, dir: &Path) -> Result<Scene, CliError> {
        let cloud_path = resolve(dir, Path::new(&self.stuff_points))?;
        let stuff = parse_ply_cloud(&read_text(&cloud_path)?)
            .map_err(|e| CliError::from(e).at(&cloud_path))?;
        let mut stuff_meshes = Vec::with_capacity(self.stuff_meshes.len());
        for s in &self.stuff_meshes {
            stuff_meshes.push(StuffMesh {
                mesh: load_mesh(&resolve(dir, Path::new(&s.path))?)?,
                segment_id: s.segment_id,
                category_id: s.category_id,
            });
        }
        let mut things = Vec::new();
        for t in &self.things {
            let Some(rel) = &t.path else { continue };
            let (Some(z_c), Some(scale)) = (t.z_c, t.scale) else {
                return Err(CliError::new(
                    "scene_error",
                    format!("thing {} has a mesh but no placement", t.segment_id),
                ));
            };
            things.push(Placed {
                mesh: load_mesh(&resolve(dir, Path::new(rel))?)?,
                segment_id: t.segment_id,
                category_id: t.category_id,
                z_c,
                scale,
            });
        }
        Ok(Scene::new(stuff, stuff_meshes, things)?)
    }
}
