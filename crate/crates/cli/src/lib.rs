//! Manifest-driven front end for `panoptic3d`: assemble a scene from files,
//! export it, render it back into the camera and score it.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod scene_file;

pub use commands::{
    assemble, assemble_many, evaluate, reproject, split_dataset, AssembleFlags, AssembleSummary,
    CameraFlags, MeshFormat, ReprojectSummary, SplitReport,
};
pub use error::CliError;
pub use manifest::Manifest;
pub use scene_file::SceneFile;
