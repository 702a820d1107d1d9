//! Single-image panoptic 3D scene assembly and evaluation.
//!
//! Per-image network outputs (panoptic map, amodal masks, depth map,
//! normalized instance meshes) are combined into a [`Scene3D`]: "stuff"
//! pixels become a labeled point cloud and each "thing" mesh is placed in
//! camera coordinates. The scene can be rendered back into the input view
//! with a z-buffer and scored against a 2D panoptic annotation with
//! PQ/SQ/RQ at several IoU thresholds.
//!
//! Geometry is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root name the double-precision instantiations.

pub mod alignment;
pub mod dataset;
pub mod depth;
pub mod error;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod metrics;
pub mod partial_loss;
pub mod pipeline;
pub mod raster;
pub mod scalar;
pub mod scene;
pub mod segmentation;

pub use alignment::{
    chamfer_distance, depth_extent, estimate_z_center, normalized_depth_extent, place_mesh,
    PlacedThing,
};
pub use dataset::{
    decode_panoptic_png, encode_panoptic_png, split_and_filter, ImageRecord, InstanceRecord,
    PanopticAnnotation, SplitResult,
};
pub use depth::{backproject_stuff, filter_depth, DepthMap, LabeledPoint, LabeledPointCloud};
pub use error::{Error, Result};
pub use geometry::{
    depth_to_inverse, intrinsics_from_fov, inverse_to_depth, project, unproject,
    CameraIntrinsics, Pixel, Point3,
};
pub use mesh::TriangleMesh;
pub use metrics::{evaluate_reprojection, panoptic_quality, PanopticMetrics, DEFAULT_TAUS};
pub use partial_loss::{
    aggregate_loss, classify_boundary, frustum_validity, BoundaryReason, CenteredFlag,
    GatedReduction, LossLedger,
};
pub use pipeline::{assemble_scene, Assembly, AssemblyOptions, SceneInputs, ThingInput};
pub use raster::rasterize_scene;
pub use scalar::Scalar;
pub use scene::{layout_box_to_stuff_meshes, LayoutBox, LayoutCategories, Scene3D, StuffMesh};
pub use segmentation::{
    bbox_of_mask, fuse_panoptic, mask_iou, BBox, BinaryMask, InstanceObservation, PanopticMap,
    SegmentInfo,
};

pub type Camera = CameraIntrinsics<f64>;
pub type Camera32 = CameraIntrinsics<f32>;
pub type Point = Point3<f64>;
pub type Point32 = Point3<f32>;
pub type Depth = DepthMap<f64>;
pub type Depth32 = DepthMap<f32>;
pub type Mesh = TriangleMesh<f64>;
pub type Mesh32 = TriangleMesh<f32>;
pub type Cloud = LabeledPointCloud<f64>;
pub type Placed = PlacedThing<f64>;
pub type Scene = Scene3D<f64>;
pub type Scene32 = Scene3D<f32>;
pub type Ledger = LossLedger<f64>;
