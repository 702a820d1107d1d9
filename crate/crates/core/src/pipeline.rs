//! Stage-wise scene assembly: stuff pixels are lifted with the depth map,
//! things are placed from their masks and normalized meshes.

use serde::{Deserialize, Serialize};

use crate::alignment::{depth_extent, estimate_z_center, place_mesh, DEFAULT_PERCENTILES};
use crate::depth::{backproject_stuff, filter_depth, DepthMap, DEFAULT_DEPTH_RANGE};
use crate::error::{Error, Result};
use crate::geometry::{inverse_to_depth, CameraIntrinsics};
use crate::mesh::TriangleMesh;
use crate::partial_loss::{classify_boundary, frustum_validity, BoundaryReason, CenteredFlag};
use crate::scalar::Scalar;
use crate::scene::{layout_box_to_stuff_meshes, LayoutBox, LayoutCategories, Scene3D, StuffMesh};
use crate::segmentation::{bbox_of_mask, BBox, BinaryMask, InstanceObservation, PanopticMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub percentiles: (f64, f64),
    pub depth_range: (f64, f64),
    pub margin: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            percentiles: DEFAULT_PERCENTILES,
            depth_range: DEFAULT_DEPTH_RANGE,
            margin: 0,
        }
    }
}

/// A thing to place, keyed by its segment in the panoptic map.
#[derive(Debug, Clone, PartialEq)]
pub struct ThingInput<T> {
    pub segment_id: u32,
    pub mesh_ref: String,
    pub mesh: TriangleMesh<T>,
    /// Defaults to the segment's pixels in the panoptic map.
    pub modal_mask: Option<BinaryMask>,
    /// Defaults to the modal mask.
    pub amodal_mask: Option<BinaryMask>,
    pub inv_zc: Option<T>,
    pub dz_norm: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutInput<T> {
    pub layout: LayoutBox<T>,
    pub categories: LayoutCategories,
    /// Segment id given to the wall, ceiling and floor surfaces.
    pub segment_ids: LayoutCategories,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneInputs<T> {
    pub camera: CameraIntrinsics<T>,
    pub depth: DepthMap<T>,
    pub panoptic: PanopticMap,
    pub things: Vec<ThingInput<T>>,
    pub layout: Option<LayoutInput<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZSource {
    Percentile,
    InverseHead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThingReport<T> {
    pub segment_id: u32,
    pub category_id: u32,
    pub mesh_ref: String,
    pub z_source: ZSource,
    /// `None` when the inverse head reported a non-positive z-center.
    pub z_c: Option<T>,
    pub scale: Option<T>,
    pub amodal_bbox: BBox,
    pub flag: CenteredFlag,
    /// Metric depth extent recovered from a predicted normalized extent.
    pub depth_extent: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembly<T> {
    pub scene: Scene3D<T>,
    pub reports: Vec<ThingReport<T>>,
}

pub fn assemble_scene<T: Scalar>(
    inputs: &SceneInputs<T>,
    options: &AssemblyOptions,
) -> Result<Assembly<T>> {
    let k = &inputs.camera;
    k.validate()?;
    Error::check_dims(k.dims(), inputs.depth.dims())?;
    Error::check_dims(k.dims(), inputs.panoptic.dims())?;
    let depth = filter_depth(
        &inputs.depth,
        T::lit(options.depth_range.0),
        T::lit(options.depth_range.1),
    )?;
    let stuff = backproject_stuff(&depth, &inputs.panoptic, k)?;

    let mut things = Vec::new();
    let mut reports = Vec::new();
    for input in &inputs.things {
        let seg = inputs.panoptic.segment(input.segment_id).ok_or_else(|| {
            Error::invalid(format!("segment {} is not in the panoptic map", input.segment_id))
        })?;
        if !seg.is_thing {
            return Err(Error::invalid(format!("segment {} is stuff, not a thing", seg.segment_id)));
        }
        let modal = match &input.modal_mask {
            Some(m) => m.clone(),
            None => inputs.panoptic.mask_of(seg.segment_id),
        };
        let amodal = input.amodal_mask.clone().unwrap_or_else(|| modal.clone());
        Error::check_dims(k.dims(), modal.dims())?;
        Error::check_dims(k.dims(), amodal.dims())?;
        let amodal_bbox = bbox_of_mask(&amodal)?;
        let border = classify_boundary(&amodal, k.width, k.height, options.margin)?;

        let (z_source, z_c) = match input.inv_zc {
            Some(inv) => (ZSource::InverseHead, inverse_to_depth(inv).ok()),
            None => {
                let (lo, hi) = options.percentiles;
                (ZSource::Percentile, Some(estimate_z_center(&depth, &modal, lo, hi)?))
            }
        };
        let flag = border.and(match z_c {
            Some(z) => frustum_validity(z),
            None => CenteredFlag::from_reason(BoundaryReason::NonpositiveZc),
        });
        let mut report = ThingReport {
            segment_id: seg.segment_id,
            category_id: seg.category_id,
            mesh_ref: input.mesh_ref.clone(),
            z_source,
            z_c,
            scale: None,
            amodal_bbox,
            flag,
            depth_extent: None,
        };
        if let Some(z) = z_c.filter(|_| flag.reason != BoundaryReason::NonpositiveZc) {
            let obs = InstanceObservation {
                class: seg.category_id,
                score: T::lit(seg.score.unwrap_or(1.0)),
                modal_mask: modal,
                amodal_mask: amodal,
                mesh_ref: input.mesh_ref.clone(),
                dz_norm: input.dz_norm,
                inv_zc: input.inv_zc,
                centered: flag.is_centered,
            };
            let placed = place_mesh(&input.mesh.normalized()?, &obs, seg.segment_id, z, k)?;
            report.scale = Some(placed.scale);
            if let Some(dz) = input.dz_norm {
                let h = T::from_usize(amodal_bbox.pixel_height()).unwrap();
                report.depth_extent = Some(depth_extent(dz, z, k.fy, h)?);
            }
            things.push(placed);
        }
        reports.push(report);
    }

    let mut stuff_meshes = Vec::new();
    if let Some(layout) = &inputs.layout {
        for (mesh, category_id) in layout_box_to_stuff_meshes(&layout.layout, layout.categories)? {
            let c = &layout.categories;
            let ids = &layout.segment_ids;
            let segment_id = if category_id == c.floor {
                ids.floor
            } else if category_id == c.ceiling {
                ids.ceiling
            } else {
                ids.wall
            };
            stuff_meshes.push(StuffMesh {
                mesh,
                segment_id,
                category_id,
            });
        }
    }
    Ok(Assembly {
        scene: Scene3D::new(stuff, stuff_meshes, things)?,
        reports,
    })
}
