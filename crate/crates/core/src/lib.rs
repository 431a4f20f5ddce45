//! Deterministic, headless renderer that paints brain atlas regions from a
//! table of per-region values.
//!
//! The pipeline is: parse a biomarker CSV against an [`atlas::Atlas`], map each
//! value through a [`gradient::Gradient`], assemble cortical or subcortical
//! scenes from per-region triangle meshes, and rasterize them to PNG with the
//! CPU rasterizer in [`renderer`].

pub mod animation;
pub mod atlas;
pub mod config;
pub mod diag;
pub mod gradient;
pub mod ingest;
pub mod mesh;
pub mod par;
pub mod pipeline;
pub mod renderer;
pub mod scene;

pub use atlas::{load_atlas, Atlas, RegionDef};
pub use config::{load_config, RunConfig};
pub use diag::Diagnostic;
pub use gradient::{Gradient, Rgb};
pub use ingest::{parse_biomarker_csv, RegionValueTable};
pub use mesh::TriangleMesh;
pub use par::Parallelism;
pub use pipeline::{run_pipeline, PipelineError, RunManifest};
pub use renderer::{rasterize, Camera, ImageBuffer};
