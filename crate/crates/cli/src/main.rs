use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use panoptic3d_cli::{
    assemble_many, evaluate, reproject, split_dataset, AssembleFlags, CameraFlags, CliError,
    MeshFormat,
};

#[derive(Parser)]
#[command(name = "panoptic3d", version, about = "Assemble, re-project and score panoptic 3D scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CameraArgs {
    /// Horizontal field of view in degrees (60 when building a camera from the image size).
    #[arg(long)]
    camera_fov: Option<f64>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
}

impl From<&CameraArgs> for CameraFlags {
    fn from(a: &CameraArgs) -> Self {
        CameraFlags {
            fov_deg: a.camera_fov,
            width: a.width,
            height: a.height,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshFormatArg {
    Obj,
    Ply,
}

#[derive(Subcommand)]
enum Command {
    /// Build a scene from one or more manifests and export it.
    Assemble {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        camera: CameraArgs,
        /// Low and high percentile for the z-center, e.g. `2,98`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        percentiles: Option<Vec<f64>>,
        /// 16-bit PNG depth units per meter.
        #[arg(long)]
        depth_scale: Option<f64>,
        #[arg(long)]
        margin: Option<usize>,
        /// Default thresholds stored with the scene for `evaluate`.
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        /// Surface samples per placed thing, written to `thing_samples.ply`.
        #[arg(long, default_value_t = 0)]
        sample_points: usize,
        #[arg(long, value_enum, default_value = "obj")]
        mesh_format: MeshFormatArg,
    },
    /// Render a saved scene into panoptic PNG/JSON and a PFM depth map.
    Reproject {
        scene: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        camera: CameraArgs,
    },
    /// Score a saved scene against a COCO panoptic annotation.
    Evaluate {
        scene: PathBuf,
        #[arg(long)]
        gt_png: PathBuf,
        #[arg(long)]
        gt_json: PathBuf,
        #[arg(long, value_delimiter = ',')]
        taus: Option<Vec<f64>>,
        #[command(flatten)]
        camera: CameraArgs,
        /// Also write `metrics.json` here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Split JSONL image records by house and filter mesh supervision.
    SplitDataset {
        records: PathBuf,
        #[arg(long)]
        train_count: usize,
        #[arg(long)]
        out_dir: PathBuf,
        /// House ids, one per line; defaults to order of first appearance.
        #[arg(long)]
        house_order: Option<PathBuf>,
    },
}

fn print_json(value: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable output"));
}

fn run(command: Command) -> Result<(), Vec<CliError>> {
    match command {
        Command::Assemble {
            manifests,
            out_dir,
            camera,
            percentiles,
            depth_scale,
            margin,
            taus,
            sample_points,
            mesh_format,
        } => {
            let flags = AssembleFlags {
                camera: (&camera).into(),
                percentiles: percentiles.map(|p| (p[0], p[1])),
                depth_scale,
                margin,
                taus,
                sample_points,
                mesh_format: match mesh_format {
                    MeshFormatArg::Obj => MeshFormat::Obj,
                    MeshFormatArg::Ply => MeshFormat::Ply,
                },
            };
            let results = assemble_many(&manifests, &out_dir, &flags).map_err(|e| vec![e])?;
            let mut errors = Vec::new();
            for r in results {
                match r {
                    Ok(summary) => print_json(&summary),
                    Err(e) => errors.push(e),
                }
            }
            if errors.is_empty() {
                Ok(())
            } else {
                Err(errors)
            }
        }
        Command::Reproject {
            scene,
            out_dir,
            camera,
        } => {
            print_json(&reproject(&scene, &out_dir, &(&camera).into()).map_err(|e| vec![e])?);
            Ok(())
        }
        Command::Evaluate {
            scene,
            gt_png,
            gt_json,
            taus,
            camera,
            out_dir,
        } => {
            let metrics = evaluate(&scene, &gt_png, &gt_json, taus.as_deref(), &(&camera).into())
                .map_err(|e| vec![e])?;
            if let Some(dir) = out_dir {
                write_metrics(&dir, &metrics).map_err(|e| vec![e])?;
            }
            print_json(&metrics);
            Ok(())
        }
        Command::SplitDataset {
            records,
            train_count,
            out_dir,
            house_order,
        } => {
            let report = split_dataset(&records, train_count, &out_dir, house_order.as_deref())
                .map_err(|e| vec![e])?;
            print_json(&report);
            Ok(())
        }
    }
}

fn write_metrics(dir: &Path, metrics: &impl Serialize) -> Result<(), CliError> {
    let path = dir.join("metrics.json");
    std::fs::create_dir_all(dir).map_err(|e| CliError::write(dir, e))?;
    let mut text = serde_json::to_string_pretty(metrics).map_err(|e| CliError::write(&path, e))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::write(&path, e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", CliError::new("usage_error", msg.trim_end()).to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(errors) => {
            for e in errors {
                eprintln!("{}", e.to_json());
            }
            ExitCode::FAILURE
        }
    }
}
