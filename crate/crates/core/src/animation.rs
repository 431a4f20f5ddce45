//! Frame sequences that interpolate region values between consecutive table
//! rows, for assembling into a movie with an external muxer.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::RegionValueTable;
use crate::par::{self, Parallelism};
use crate::renderer::encode_png;
use crate::scene::{RenderSetup, View, ViewRenderError};

#[derive(Debug, Error)]
pub enum AnimationError {
    #[error("frames_per_transition must be at least 1, got {0}")]
    FramesPerTransition(u32),
    #[error("fps must be positive and finite, got {0}")]
    Fps(f64),
    #[error("cannot animate an empty table")]
    EmptyTable,
    #[error("frame {frame}, view '{view}': {source}")]
    Render {
        frame: usize,
        view: String,
        source: ViewRenderError,
    },
    #[error("frame {frame}, view '{view}': PNG encoding failed: {message}")]
    Encode {
        frame: usize,
        view: String,
        message: String,
    },
    #[error("writing {file}: {source}")]
    Sink { file: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedFrame {
    pub index: usize,
    pub row_from: usize,
    pub row_to: usize,
    pub t: f64,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub fps: f64,
    pub frames: Vec<PlannedFrame>,
}

impl FramePlan {
    /// Value of `region` in frame `frame`; regions absent from the table
    /// read as 0.
    pub fn value(&self, frame: usize, region: &str) -> f64 {
        self.frames[frame].values.get(region).copied().unwrap_or(0.0)
    }
}

/// `a + t (b - a)`, exact at both ends and clamped to the endpoint range so
/// rounding can never step outside it.
pub fn lerp_value(a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return a;
    }
    if t >= 1.0 {
        return b;
    }
    (a + t * (b - a)).clamp(a.min(b), a.max(b))
}

/// Expands `R` rows into `(R - 1) * F + 1` frames. Frame `i * F + j` sits at
/// `t = j / F` between rows `i` and `i + 1`; the last frame is row `R - 1`.
pub fn interpolate_rows(
    table: &RegionValueTable,
    frames_per_transition: u32,
    fps: f64,
) -> Result<FramePlan, AnimationError> {
    if frames_per_transition < 1 {
        return Err(AnimationError::FramesPerTransition(frames_per_transition));
    }
    if !(fps > 0.0 && fps.is_finite()) {
        return Err(AnimationError::Fps(fps));
    }
    let rows = table.rows.len();
    if rows == 0 {
        return Err(AnimationError::EmptyTable);
    }
    let f = frames_per_transition as usize;
    let regions: BTreeSet<&String> = table.rows.iter().flat_map(|r| r.values.keys()).collect();
    let total = (rows - 1) * f + 1;
    let mut frames = Vec::with_capacity(total);
    for index in 0..total {
        let (row_from, j) = (index / f, index % f);
        let (row_to, t) = if row_from + 1 < rows {
            (row_from + 1, j as f64 / f as f64)
        } else {
            (row_from, 0.0)
        };
        let values = regions
            .iter()
            .map(|&r| {
                let a = table.value(row_from, r);
                let b = table.value(row_to, r);
                (r.clone(), lerp_value(a, b, t))
            })
            .collect();
        frames.push(PlannedFrame {
            index,
            row_from,
            row_to,
            t,
            values,
        });
    }
    Ok(FramePlan { fps, frames })
}

pub fn frame_file_name(index: usize, view: &str) -> String {
    format!("frame_{index:05}_{view}.png")
}

/// Destination for rendered frames.
pub trait FrameSink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()>;
}

/// Writes frames as files in a directory.
#[derive(Debug, Clone)]
pub struct DirSink(pub PathBuf);

impl FrameSink for DirSink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        std::fs::create_dir_all(&self.0)?;
        std::fs::write(self.0.join(name), bytes)
    }
}

/// Keeps frames in memory, keyed by file name.
#[derive(Debug, Clone, Default)]
pub struct MemorySink(pub BTreeMap<String, Vec<u8>>);

impl FrameSink for MemorySink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        self.0.insert(name.to_string(), bytes.to_vec());
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: usize,
    pub file: String,
    pub row_from: usize,
    pub row_to: usize,
    pub t: f64,
    pub view: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnimationManifest {
    pub fps: f64,
    pub frames: Vec<FrameRecord>,
}

/// Frame-view jobs rendered at once before their PNGs are handed to the
/// sink, bounding peak memory for long sequences.
const BATCH: usize = 32;

/// Renders every frame of `plan` in every view, in frame-major order.
pub fn render_sequence(
    plan: &FramePlan,
    setup: &RenderSetup<'_>,
    views: &[View],
    sink: &mut dyn FrameSink,
    mode: Parallelism,
) -> Result<AnimationManifest, AnimationError> {
    let jobs: Vec<(usize, &View)> = (0..plan.frames.len())
        .flat_map(|f| views.iter().map(move |v| (f, v)))
        .collect();
    let mut records = Vec::with_capacity(jobs.len());
    for batch in jobs.chunks(BATCH) {
        let encoded = par::map(mode, batch, |&(f, view)| {
            let frame = &plan.frames[f];
            let values = |r: &str| frame.values.get(r).copied().unwrap_or(0.0);
            let img = setup
                .render_view(&values, view)
                .map_err(|source| AnimationError::Render {
                    frame: f,
                    view: view.name.clone(),
                    source,
                })?;
            encode_png(&img).map_err(|e| AnimationError::Encode {
                frame: f,
                view: view.name.clone(),
                message: e.to_string(),
            })
        });
        for (&(f, view), png) in batch.iter().zip(encoded) {
            let png = png?;
            let frame = &plan.frames[f];
            let file = frame_file_name(frame.index, &view.name);
            sink.write(&file, &png).map_err(|source| AnimationError::Sink {
                file: file.clone(),
                source,
            })?;
            records.push(FrameRecord {
                index: frame.index,
                file,
                row_from: frame.row_from,
                row_to: frame.row_to,
                t: frame.t,
                view: view.name.clone(),
                sha256: hex::encode(Sha256::digest(&png)),
            });
        }
    }
    Ok(AnimationManifest {
        fps: plan.fps,
        frames: records,
    })
}
