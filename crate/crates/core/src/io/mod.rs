//! File formats: depth maps (16-bit PNG, PFM), masks (8-bit PNG, COCO
//! uncompressed RLE), panoptic PNG + JSON, meshes (OBJ in/out, PLY out) and
//! labeled point clouds (ASCII PLY).

mod image_io;
mod mesh_io;

pub use image_io::*;
pub use mesh_io::*;
