use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use panoptic3d::alignment::DEFAULT_PERCENTILES;
use panoptic3d::dataset::house_order_of;
use panoptic3d::depth::DEFAULT_DEPTH_RANGE;
use panoptic3d::io::{
    obj_string, ply_cloud_string, ply_mesh_string, read_depth, read_mask, read_panoptic, write_panoptic,
    write_pfm, DEFAULT_DEPTH_SCALE,
};
use panoptic3d::metrics::{check_tau, panoptic_quality_multi};
use panoptic3d::pipeline::{LayoutInput, SceneInputs};
use panoptic3d::{
    assemble_scene, intrinsics_from_fov, rasterize_scene, split_and_filter, AssemblyOptions, Camera,
    Cloud, ImageRecord, LabeledPoint, LayoutBox, Mesh, PanopticMetrics, Point, ThingInput,
    DEFAULT_TAUS,
};

use crate::error::CliError;
use crate::manifest::{resolve, CameraSpec, Manifest};
use crate::scene_file::{load_mesh, SceneFile, StuffMeshEntry, ThingEntry};

pub const DEFAULT_FOV_DEG: f64 = 60.0;

/// `--camera-fov`, `--width`, `--height`. Any of them switches to a
/// field-of-view camera; unset parts come from the file being processed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CameraFlags {
    pub fov_deg: Option<f64>,
    pub width: Option<usize>,
    pub height: Option<usize>,
}

impl CameraFlags {
    pub fn is_set(&self) -> bool {
        self.fov_deg.is_some() || self.width.is_some() || self.height.is_some()
    }

    fn from_fov(&self, fov: f64, dims: (usize, usize)) -> Result<Camera, CliError> {
        Ok(intrinsics_from_fov(
            self.fov_deg.unwrap_or(fov),
            self.width.unwrap_or(dims.0),
            self.height.unwrap_or(dims.1),
        )?)
    }

    /// Camera for a manifest; `image_dims` is used when nothing else names a size.
    pub fn for_manifest(
        &self,
        spec: Option<CameraSpec>,
        image_dims: (usize, usize),
    ) -> Result<Camera, CliError> {
        match spec {
            Some(CameraSpec::Intrinsics(k)) if !self.is_set() => {
                k.validate()?;
                Ok(k)
            }
            Some(CameraSpec::Intrinsics(k)) => self.from_fov(DEFAULT_FOV_DEG, k.dims()),
            Some(CameraSpec::Fov {
                fov_deg,
                width,
                height,
            }) => self.from_fov(fov_deg, (width, height)),
            None => self.from_fov(DEFAULT_FOV_DEG, image_dims),
        }
    }

    /// Camera for a saved scene.
    pub fn for_scene(&self, k: Camera) -> Result<Camera, CliError> {
        self.for_manifest(Some(CameraSpec::Intrinsics(k)), k.dims())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum MeshFormat {
    #[default]
    Obj,
    Ply,
}

impl MeshFormat {
    fn ext(self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
        }
    }

    fn encode(self, mesh: &Mesh) -> String {
        match self {
            MeshFormat::Obj => obj_string(mesh),
            MeshFormat::Ply => ply_mesh_string(mesh),
        }
    }
}

/// Command-line overrides for `assemble`; each wins over the manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssembleFlags {
    pub camera: CameraFlags,
    pub percentiles: Option<(f64, f64)>,
    pub depth_scale: Option<f64>,
    pub margin: Option<usize>,
    pub taus: Option<Vec<f64>>,
    /// Surface samples per placed thing written to `thing_samples.ply`.
    pub sample_points: usize,
    pub mesh_format: MeshFormat,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssembleSummary {
    pub scene: PathBuf,
    pub things_placed: usize,
    pub things_skipped: usize,
    pub stuff_points: usize,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::write(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::write(path, e))?;
    text.push('\n');
    write(path, text)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))
}

fn load_panoptic(png: &Path, json: &Path) -> Result<panoptic3d::PanopticMap, CliError> {
    read_panoptic(png, json).map_err(|e| {
        let at = if matches!(e, panoptic3d::Error::Json(_)) { json } else { png };
        CliError::from(e).at(at)
    })
}

fn check_taus(taus: &[f64]) -> Result<(), CliError> {
    if taus.is_empty() {
        return Err(CliError::invalid("at least one IoU threshold is required"));
    }
    for &t in taus {
        check_tau(t)?;
    }
    Ok(())
}

pub fn assemble(
    manifest_path: &Path,
    out_dir: &Path,
    flags: &AssembleFlags,
) -> Result<AssembleSummary, CliError> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let panoptic = load_panoptic(
        &resolve(base, &manifest.panoptic.png)?,
        &resolve(base, &manifest.panoptic.json)?,
    )?;
    let depth_path = resolve(base, &manifest.depth.path)?;
    let scale = flags
        .depth_scale
        .or(manifest.depth.scale)
        .unwrap_or(DEFAULT_DEPTH_SCALE);
    let depth = read_depth(&depth_path, scale).map_err(|e| CliError::from(e).at(&depth_path))?;
    let camera = flags.camera.for_manifest(manifest.camera, panoptic.dims())?;

    let mut things = Vec::with_capacity(manifest.instances.len());
    for inst in &manifest.instances {
        let mask = |p: &Option<PathBuf>| -> Result<_, CliError> {
            p.as_ref()
                .map(|rel| {
                    let path = resolve(base, rel)?;
                    read_mask(&path).map_err(|e| CliError::from(e).at(&path))
                })
                .transpose()
        };
        things.push(ThingInput {
            segment_id: inst.segment_id,
            mesh_ref: inst.mesh.to_string_lossy().into_owned(),
            mesh: load_mesh(&resolve(base, &inst.mesh)?)?,
            modal_mask: mask(&inst.modal_mask)?,
            amodal_mask: mask(&inst.amodal_mask)?,
            inv_zc: inst.inv_zc,
            dz_norm: inst.dz_norm,
        });
    }
    let layout = match &manifest.layout {
        None => None,
        Some(l) => Some(LayoutInput {
            layout: LayoutBox::new(l.corners.map(|[x, y, z]| Point::new(x, y, z)))?,
            categories: l.categories,
            segment_ids: l.segment_ids,
        }),
    };
    let opts = &manifest.options;
    let options = AssemblyOptions {
        percentiles: flags
            .percentiles
            .or(opts.percentiles)
            .unwrap_or(DEFAULT_PERCENTILES),
        depth_range: opts.depth_range.unwrap_or(DEFAULT_DEPTH_RANGE),
        margin: flags.margin.or(opts.margin).unwrap_or(0),
    };
    let taus = flags
        .taus
        .clone()
        .or_else(|| opts.taus.clone())
        .unwrap_or_else(|| DEFAULT_TAUS.to_vec());
    check_taus(&taus)?;

    let assembly = assemble_scene(
        &SceneInputs {
            camera,
            depth,
            panoptic,
            things,
            layout,
        },
        &options,
    )?;
    let scene = &assembly.scene;

    create_dir(out_dir)?;
    let stuff_name = "stuff.ply";
    write(&out_dir.join(stuff_name), ply_cloud_string(&scene.stuff))?;
    let mut stuff_meshes = Vec::new();
    for (i, s) in scene.stuff_meshes.iter().enumerate() {
        let name = format!("layout_{i}.{}", flags.mesh_format.ext());
        write(&out_dir.join(&name), flags.mesh_format.encode(&s.mesh))?;
        stuff_meshes.push(StuffMeshEntry {
            segment_id: s.segment_id,
            category_id: s.category_id,
            path: name,
        });
    }
    let mut entries = Vec::new();
    for r in &assembly.reports {
        let placed = scene.things.iter().find(|t| t.segment_id == r.segment_id);
        let path = match placed {
            Some(t) => {
                let name = format!("thing_{}.{}", t.segment_id, flags.mesh_format.ext());
                write(&out_dir.join(&name), flags.mesh_format.encode(&t.mesh))?;
                Some(name)
            }
            None => None,
        };
        entries.push(ThingEntry {
            segment_id: r.segment_id,
            category_id: r.category_id,
            mesh_ref: r.mesh_ref.clone(),
            path,
            z_source: r.z_source,
            z_c: r.z_c,
            scale: r.scale,
            amodal_bbox: r.amodal_bbox,
            flag: r.flag,
            depth_extent: r.depth_extent,
        });
    }
    let thing_samples = if flags.sample_points > 0 && !scene.things.is_empty() {
        let mut cloud = Cloud::default();
        for t in &scene.things {
            let pts = t.mesh.sample_surface(flags.sample_points, u64::from(t.segment_id))?;
            cloud.points.extend(pts.into_iter().map(|point| LabeledPoint {
                point,
                segment_id: t.segment_id,
                category_id: t.category_id,
            }));
        }
        let name = "thing_samples.ply".to_string();
        write(&out_dir.join(&name), ply_cloud_string(&cloud))?;
        Some(name)
    } else {
        None
    };

    let file = SceneFile {
        camera,
        taus,
        stuff_points: stuff_name.into(),
        stuff_point_count: scene.stuff.len(),
        stuff_meshes,
        things: entries,
        thing_samples,
    };
    let scene_path = out_dir.join("scene.json");
    write_json(&scene_path, &file)?;
    Ok(AssembleSummary {
        scene: scene_path,
        things_placed: scene.things.len(),
        things_skipped: assembly.reports.len() - scene.things.len(),
        stuff_points: scene.stuff.len(),
    })
}

/// Runs [`assemble`] for several manifests on worker threads. With more than
/// one manifest each writes to `out_dir/<file stem>`. Results keep input order.
pub fn assemble_many(
    manifests: &[PathBuf],
    out_dir: &Path,
    flags: &AssembleFlags,
) -> Result<Vec<Result<AssembleSummary, CliError>>, CliError> {
    if manifests.len() <= 1 {
        return Ok(manifests.iter().map(|m| assemble(m, out_dir, flags)).collect());
    }
    let mut stems = BTreeSet::new();
    let mut dirs = Vec::with_capacity(manifests.len());
    for m in manifests {
        let stem = m
            .file_stem()
            .ok_or_else(|| CliError::invalid(format!("{} has no file name", m.display())))?;
        if !stems.insert(stem.to_owned()) {
            return Err(CliError::invalid(format!(
                "manifests share the file stem {stem:?}; outputs would collide"
            )));
        }
        dirs.push(out_dir.join(stem));
    }
    Ok(std::thread::scope(|s| {
        let handles: Vec<_> = manifests
            .iter()
            .zip(&dirs)
            .map(|(m, d)| s.spawn(move || assemble(m, d, flags)))
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::new("internal_error", "worker panicked")))
            })
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReprojectSummary {
    pub panoptic_png: PathBuf,
    pub panoptic_json: PathBuf,
    pub depth: PathBuf,
    pub segments: usize,
}

fn load_scene(scene_path: &Path) -> Result<(SceneFile, panoptic3d::Scene), CliError> {
    let file = SceneFile::load(scene_path)?;
    let scene = file.load_scene(scene_path.parent().unwrap_or(Path::new(".")))?;
    Ok((file, scene))
}

/// Renders a saved scene to `panoptic.png`, `panoptic.json` and `depth.pfm`.
pub fn reproject(
    scene_path: &Path,
    out_dir: &Path,
    camera: &CameraFlags,
) -> Result<ReprojectSummary, CliError> {
    let (file, scene) = load_scene(scene_path)?;
    let k = camera.for_scene(file.camera)?;
    let (pan, depth) = rasterize_scene(&scene, &k)?;
    create_dir(out_dir)?;
    let summary = ReprojectSummary {
        panoptic_png: out_dir.join("panoptic.png"),
        panoptic_json: out_dir.join("panoptic.json"),
        depth: out_dir.join("depth.pfm"),
        segments: pan.segments().len(),
    };
    write_panoptic(&pan, &summary.panoptic_png, &summary.panoptic_json)
        .map_err(|e| CliError::write(&summary.panoptic_png, e))?;
    write_pfm(&depth, &summary.depth).map_err(|e| CliError::write(&summary.depth, e))?;
    Ok(summary)
}

/// Renders a saved scene and scores it against a COCO panoptic annotation.
pub fn evaluate(
    scene_path: &Path,
    gt_png: &Path,
    gt_json: &Path,
    taus: Option<&[f64]>,
    camera: &CameraFlags,
) -> Result<Vec<PanopticMetrics>, CliError> {
    let (file, scene) = load_scene(scene_path)?;
    for p in [gt_png, gt_json] {
        if !p.is_file() {
            return Err(CliError::missing(p));
        }
    }
    let gt = load_panoptic(gt_png, gt_json)?;
    let taus = taus.unwrap_or(&file.taus);
    check_taus(taus)?;
    let k = camera.for_scene(file.camera)?;
    if k.dims() != gt.dims() {
        return Err(panoptic3d::Error::DimensionMismatch {
            expected: k.dims(),
            actual: gt.dims(),
        }
        .into());
    }
    let (pred, _) = rasterize_scene(&scene, &k)?;
    Ok(panoptic_quality_multi(&pred, &gt, taus)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitReport {
    pub train_houses: Vec<String>,
    pub test_houses: Vec<String>,
    pub train_images: usize,
    pub test_images: usize,
    pub dropped_images: Vec<String>,
    pub invalidated_models: Vec<String>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, CliError> {
    if !path.is_file() {
        return Err(CliError::missing(path));
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::new("io_error", e.to_string()).at(path))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .collect())
}

/// Splits a JSONL file of [`ImageRecord`]s by house into `train.jsonl`,
/// `test.jsonl` and `split_report.json`. Houses are ordered by
/// `house_order` (one id per line) or by first appearance.
pub fn split_dataset(
    records_path: &Path,
    train_count: usize,
    out_dir: &Path,
    house_order: Option<&Path>,
) -> Result<SplitReport, CliError> {
    let mut records = Vec::new();
    for (lineno, line) in read_lines(records_path)? {
        let r: ImageRecord = serde_json::from_str(&line).map_err(|e| {
            CliError::new("records_error", format!("line {lineno}: {e}")).at(records_path)
        })?;
        records.push(r);
    }
    let order = match house_order {
        Some(p) => read_lines(p)?.into_iter().map(|(_, l)| l).collect(),
        None => house_order_of(&records),
    };
    let split = split_and_filter(&records, &order, train_count)?;

    create_dir(out_dir)?;
    for (name, images) in [("train.jsonl", &split.train), ("test.jsonl", &split.test)] {
        let mut text = String::new();
        for img in images {
            text.push_str(&serde_json::to_string(img).map_err(|e| CliError::write(Path::new(name), e))?);
            text.push('\n');
        }
        write(&out_dir.join(name), text)?;
    }
    let cut = train_count.min(order.len());
    let report = SplitReport {
        train_houses: order[..cut].to_vec(),
        test_houses: order[cut..].to_vec(),
        train_images: split.train.len(),
        test_images: split.test.len(),
        dropped_images: split.dropped_images,
        invalidated_models: split.invalidated_models.into_iter().collect(),
    };
    write_json(&out_dir.join("split_report.json"), &report)?;
    Ok(report)
}
