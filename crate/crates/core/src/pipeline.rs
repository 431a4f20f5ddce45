//! End-to-end batch run: config + CSV in, PNGs + `manifest.json` out.
//!
//! Everything is written to a staging directory next to the output
//! directory first and moved into place only after every image rendered, so
//! a failed run leaves the output directory as it was.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::animation::{self, AnimationManifest, DirSink};
use crate::atlas::{atlas_definition, Atlas, AtlasError};
use crate::config::{AnimationConfig, ConfigError, RunConfig};
use crate::diag::Diagnostic;
use crate::ingest::{check_range, parse_biomarker_csv, RegionValueTable};
use crate::par::{self, Parallelism};
use crate::renderer::{encode_png, RenderOptions};
use crate::scene::{AssetMeshes, MeshSource, RenderSetup, Scene, SceneOptions, View};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ANIMATION_MANIFEST_FILE: &str = "animation.json";

/// Render jobs whose PNGs are held in memory at once.
const BATCH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("config error: {message}")]
    Config {
        message: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("input error: {message}")]
    Input {
        message: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("render error: {0}")]
    Render(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl PipelineError {
    /// Process exit status: 2 input, 3 config, 4 render or I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input { .. } => 2,
            PipelineError::Config { .. } => 3,
            PipelineError::Render(_) | PipelineError::Io(_) => 4,
        }
    }

    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            PipelineError::Config { diagnostics, .. } | PipelineError::Input { diagnostics, .. }
                if !diagnostics.is_empty() =>
            {
                diagnostics.clone()
            }
            PipelineError::Config { message, .. } => vec![Diagnostic::error("config", message.clone())],
            PipelineError::Input { message, .. } => vec![Diagnostic::error("input", message.clone())],
            PipelineError::Render(m) => vec![Diagnostic::error("render", m.clone())],
            PipelineError::Io(m) => vec![Diagnostic::error("io", m.clone())],
        }
    }

    fn config(code: &str, message: String) -> Self {
        PipelineError::Config {
            diagnostics: vec![Diagnostic::error(code, message.clone())],
            message,
        }
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::config("invalid_config", e.to_string())
    }
}

fn io_err(what: &str, path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io(format!("{what} {}: {e}", path.display()))
}

/// Which outputs a run produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RunMode {
    /// One image per row and view, plus animation frames when the config
    /// has an `animation` section.
    #[default]
    Render,
    /// Animation frames only, with default animation settings if the config
    /// has none.
    Animate,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineOptions {
    pub mode: RunMode,
    /// Worker threads for row x view jobs; `None` uses the global pool.
    pub jobs: Option<usize>,
    pub parallelism: Parallelism,
}

/// Replaces every character outside `[A-Za-z0-9_-]` with `_`.
pub fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Validated inputs of a run, before anything is rendered.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub atlas: Atlas,
    pub table: RegionValueTable,
    pub views: Vec<View>,
    pub scene_options: SceneOptions,
    pub warnings: Vec<Diagnostic>,
    pub csv_sha256: String,
}

fn atlas_error(key: &str, e: AtlasError) -> PipelineError {
    let mut d = Diagnostic::error("invalid_config", format!("{key}: {e}"));
    if let AtlasError::Unresolved { suggestions, .. } = &e {
        d.suggestions = suggestions.clone();
    }
    PipelineError::Config {
        message: format!("{key}: {e}"),
        diagnostics: vec![d],
    }
}

/// Resolves the atlas, mapping and exclusions, checks mesh assets, and
/// parses the CSV. Nothing is written.
pub fn prepare(cfg: &RunConfig, csv_text: &str) -> Result<Prepared, PipelineError> {
    cfg.validate()?;
    let views = cfg.resolved_views()?;
    let atlas = atlas_definition(&cfg.atlas, &cfg.asset_root).map_err(|e| atlas_error("atlas", e))?;
    let atlas = atlas
        .apply_custom_mapping(&cfg.mapping)
        .map_err(|e| atlas_error("mapping", e))?;
    atlas
        .verify_assets(&cfg.asset_root, cfg.surface)
        .map_err(|e| atlas_error("asset_root", e))?;
    let mut exclude = BTreeSet::new();
    for (i, name) in cfg.exclude.iter().enumerate() {
        let r = atlas
            .resolve_region(name)
            .map_err(|e| atlas_error(&format!("exclude[{i}]"), e))?;
        exclude.insert(r.canonical_name.clone());
    }
    let (table, mut warnings) = parse_biomarker_csv(csv_text, &atlas).map_err(|e| PipelineError::Input {
        message: e.to_string(),
        diagnostics: vec![e.to_diagnostic()],
    })?;
    warnings.extend(check_range(&table, &cfg.gradient));

    let mut files: BTreeMap<String, &str> = BTreeMap::new();
    for row in &table.rows {
        let s = sanitize_name(&row.image_name);
        if let Some(prev) = files.insert(s.clone(), &row.image_name) {
            let message = format!(
                "image names '{prev}' and '{}' both become '{s}' in file names",
                row.image_name
            );
            return Err(PipelineError::Input {
                diagnostics: vec![Diagnostic::error("image_name_collision", message.clone())],
                message,
            });
        }
    }

    let scene_options = SceneOptions {
        exclude,
        include_right_hemisphere: cfg.include_right_hemisphere,
        glass_opacity: cfg.glass_opacity,
        surface: cfg.surface,
        background: cfg.background,
        ..SceneOptions::default()
    };
    Ok(Prepared {
        config: cfg.clone(),
        atlas,
        table,
        views,
        scene_options,
        warnings,
        csv_sha256: sha256_hex(csv_text.as_bytes()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub rows: usize,
    pub regions: Vec<String>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub image_name: String,
    pub row: usize,
    pub view: String,
    pub width: u32,
    pub height: u32,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub config: RunConfig,
    pub input: InputSummary,
    pub outputs: Vec<OutputRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub animation: Option<AnimationManifest>,
    pub warnings: Vec<Diagnostic>,
}

impl RunManifest {
    /// Every file the run wrote, manifest excluded, in manifest order.
    pub fn files(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.outputs.iter().map(|o| o.file.as_str()).collect();
        if let Some(a) = &self.animation {
            out.extend(a.frames.iter().map(|f| f.file.as_str()));
        }
        out
    }
}

/// Reads the CSV at `csv_path` and runs [`run_pipeline_text`].
pub fn run_pipeline(cfg: &RunConfig, csv_path: &Path, opts: &PipelineOptions) -> Result<RunManifest, PipelineError> {
    let text = std::fs::read_to_string(csv_path).map_err(|e| PipelineError::Input {
        message: format!("cannot read {}: {e}", csv_path.display()),
        diagnostics: vec![],
    })?;
    run_pipeline_text(cfg, &text, opts)
}

pub fn run_pipeline_text(
    cfg: &RunConfig,
    csv_text: &str,
    opts: &PipelineOptions,
) -> Result<RunManifest, PipelineError> {
    let prepared = prepare(cfg, csv_text)?;
    match opts.jobs {
        Some(n) => par::with_threads(n, || execute(&prepared, opts)),
        None => execute(&prepared, opts),
    }
}

fn execute(p: &Prepared, opts: &PipelineOptions) -> Result<RunManifest, PipelineError> {
    let cfg = &p.config;
    let out_dir = &cfg.output_dir;
    let parent = match out_dir.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&parent).map_err(|e| io_err("cannot create", &parent, e))?;
    let stage = tempfile::Builder::new()
        .prefix(".brainpaint-stage-")
        .tempdir_in(&parent)
        .map_err(|e| io_err("cannot create staging directory in", &parent, e))?;

    let meshes = AssetMeshes::new(&cfg.asset_root);
    let setup = RenderSetup {
        atlas: &p.atlas,
        meshes: &meshes,
        gradient: &cfg.gradient,
        options: &p.scene_options,
        width: cfg.width(),
        height: cfg.height(),
        render: RenderOptions {
            supersample: cfg.supersample,
            parallelism: opts.parallelism,
            ..RenderOptions::default()
        },
    };

    let outputs = match opts.mode {
        RunMode::Render => render_stills(p, &setup, stage.path(), opts.parallelism)?,
        RunMode::Animate => Vec::new(),
    };
    let animation = match (opts.mode, &cfg.animation) {
        (RunMode::Animate, a) => Some(a.clone().unwrap_or_default()),
        (RunMode::Render, Some(a)) => Some(a.clone()),
        (RunMode::Render, None) => None,
    };
    let animation = animation
        .map(|a| render_animation(p, &setup, &a, stage.path(), opts.parallelism))
        .transpose()?;

    let mut warnings = p.warnings.clone();
    warnings.extend(meshes.warnings());
    let manifest = RunManifest {
        tool: format!("brainpaint {}", env!("CARGO_PKG_VERSION")),
        config: cfg.clone(),
        input: InputSummary {
            rows: p.table.rows.len(),
            regions: p.table.region_order.clone(),
            sha256: p.csv_sha256.clone(),
        },
        outputs,
        animation,
        warnings,
    };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let path = stage.path().join(MANIFEST_FILE);
    std::fs::write(&path, json).map_err(|e| io_err("cannot write", &path, e))?;
    commit(stage, out_dir)?;
    Ok(manifest)
}

fn render_stills(
    p: &Prepared,
    setup: &RenderSetup<'_>,
    stage: &Path,
    mode: Parallelism,
) -> Result<Vec<OutputRecord>, PipelineError> {
    // scenes are built up front, in order, so mesh loading and its
    // warnings do not depend on scheduling
    let mut jobs: Vec<(usize, &View, Scene)> = Vec::new();
    for row in 0..p.table.rows.len() {
        let values = |r: &str| p.table.value(row, r);
        for view in &p.views {
            let scene = setup
                .build(&values, view)
                .map_err(|e| scene_error(&p.table.rows[row].image_name, e))?;
            jobs.push((row, view, scene));
        }
    }
    let mut records = Vec::with_capacity(jobs.len());
    for batch in jobs.chunks(BATCH) {
        let pngs = par::map(mode, batch, |(row, view, scene)| {
            let img = setup.render_scene(scene).map_err(|e| {
                PipelineError::Render(format!(
                    "row '{}', view '{}': {e}",
                    p.table.rows[*row].image_name, view.name
                ))
            })?;
            encode_png(&img).map_err(|e| PipelineError::Render(e.to_string()))
        });
        for ((row, view, _), png) in batch.iter().zip(pngs) {
            let png = png?;
            let image_name = &p.table.rows[*row].image_name;
            let file = format!("{}_{}.png", sanitize_name(image_name), view.name);
            let path = stage.join(&file);
            std::fs::write(&path, &png).map_err(|e| io_err("cannot write", &path, e))?;
            records.push(OutputRecord {
                file,
                image_name: image_name.clone(),
                row: *row,
                view: view.name.clone(),
                width: setup.width,
                height: setup.height,
                sha256: sha256_hex(&png),
            });
        }
    }
    Ok(records)
}

fn scene_error(image_name: &str, e: crate::scene::SceneError) -> PipelineError {
    use crate::scene::SceneError;
    let message = format!("row '{image_name}': {e}");
    match e {
        SceneError::Mesh { .. } => PipelineError::Io(message),
        SceneError::EmptyScene { .. } => PipelineError::config("empty_scene", message),
        _ => PipelineError::Render(message),
    }
}

fn render_animation(
    p: &Prepared,
    setup: &RenderSetup<'_>,
    a: &AnimationConfig,
    stage: &Path,
    mode: Parallelism,
) -> Result<AnimationManifest, PipelineError> {
    let plan = animation::interpolate_rows(&p.table, a.frames_per_transition, a.fps)
        .map_err(|e| PipelineError::config("invalid_animation", e.to_string()))?;
    // surface scene problems (empty views, unreadable meshes) with row context
    for view in &p.views {
        let values = |r: &str| p.table.value(0, r);
        setup
            .build(&values, view)
            .map_err(|e| scene_error(&p.table.rows[0].image_name, e))?;
    }
    let mut sink = DirSink(stage.to_path_buf());
    let manifest = animation::render_sequence(&plan, setup, &p.views, &mut sink, mode).map_err(|e| match e {
        animation::AnimationError::Sink { .. } => PipelineError::Io(e.to_string()),
        other => PipelineError::Render(other.to_string()),
    })?;
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    let path = stage.join(ANIMATION_MANIFEST_FILE);
    std::fs::write(&path, json).map_err(|e| io_err("cannot write", &path, e))?;
    Ok(manifest)
}

/// Moves staged files into `out_dir`: a rename of the whole directory when
/// `out_dir` does not exist yet, otherwise one rename per file.
fn commit(stage: tempfile::TempDir, out_dir: &Path) -> Result<(), PipelineError> {
    if !out_dir.exists() {
        let staged = stage.keep();
        return std::fs::rename(&staged, out_dir).map_err(|e| {
            let _ = std::fs::remove_dir_all(&staged);
            io_err("cannot move outputs to", out_dir, e)
        });
    }
    if !out_dir.is_dir() {
        return Err(PipelineError::Io(format!(
            "{} exists and is not a directory",
            out_dir.display()
        )));
    }
    let mut names: Vec<_> = std::fs::read_dir(stage.path())
        .map_err(|e| io_err("cannot list", stage.path(), e))?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()
        .map_err(|e| io_err("cannot list", stage.path(), e))?;
    names.sort();
    // the manifest goes last so a reader never sees it before its images
    names.sort_by_key(|n| n == MANIFEST_FILE);
    for name in names {
        let to = out_dir.join(&name);
        std::fs::rename(stage.path().join(&name), &to).map_err(|e| io_err("cannot move output to", &to, e))?;
    }
    Ok(())
}
