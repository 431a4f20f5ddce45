//! Run configuration: a JSON document where every key is optional and
//! unknown keys are errors.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::Surface;
use crate::gradient::{Gradient, Rgb};
use crate::renderer::MAX_PIXELS;
use crate::scene::{SceneKind, View, ViewPreset, DEFAULT_GLASS_OPACITY};

pub const DEFAULT_RESOLUTION: [u32; 2] = [1200, 900];
pub const MAX_SUPERSAMPLE: u32 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("config key '{key}': {message}")]
    Invalid { key: String, message: String },
}

impl ConfigError {
    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Dotted path of the offending key, if the error concerns one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            ConfigError::Io { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnimationConfig {
    pub frames_per_transition: u32,
    pub fps: f64,
}

impl Default for AnimationConfig {
    fn default() -> Self {
        AnimationConfig {
            frames_per_transition: 10,
            fps: 24.0,
        }
    }
}

/// A view as written in config: a preset name, or a named custom angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ViewEntry {
    Preset(String),
    Custom(CustomView),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomView {
    pub name: String,
    pub scene: SceneKind,
    /// Degrees; 0 = front, 90 = left lateral, 180 = back.
    pub azimuth: f64,
    #[serde(default)]
    pub elevation: f64,
}

impl ViewEntry {
    pub fn name(&self) -> &str {
        match self {
            ViewEntry::Preset(n) => n,
            ViewEntry::Custom(c) => &c.name,
        }
    }

    pub fn to_view(&self) -> Result<View, String> {
        match self {
            ViewEntry::Preset(n) => n.parse::<ViewPreset>().map(View::preset).map_err(|e| {
                let names: Vec<&str> = ViewPreset::ALL.iter().map(|p| p.name()).collect();
                format!("{e} (expected one of {})", names.join(", "))
            }),
            ViewEntry::Custom(c) => {
                View::from_angles(&c.name, c.scene, c.azimuth, c.elevation).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atlas: String,
    pub surface: Surface,
    pub gradient: Gradient,
    pub background: Rgb,
    /// `[width, height]` in pixels.
    pub resolution: [u32; 2],
    pub views: Vec<ViewEntry>,
    pub exclude: Vec<String>,
    pub glass_opacity: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub animation: Option<AnimationConfig>,
    pub asset_root: PathBuf,
    pub output_dir: PathBuf,
    pub supersample: u32,
    /// Extra region aliases, custom name to atlas region.
    pub mapping: BTreeMap<String, String>,
    pub include_right_hemisphere: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            atlas: "desikan_killiany".into(),
            surface: Surface::Pial,
            gradient: Gradient::default_gradient(),
            background: Rgb::BLACK,
            resolution: DEFAULT_RESOLUTION,
            views: ViewPreset::DEFAULTS
                .iter()
                .map(|p| ViewEntry::Preset(p.name().into()))
                .collect(),
            exclude: Vec::new(),
            glass_opacity: DEFAULT_GLASS_OPACITY,
            animation: None,
            asset_root: PathBuf::from("assets"),
            output_dir: PathBuf::from("output"),
            supersample: 1,
            mapping: BTreeMap::new(),
            include_right_hemisphere: false,
        }
    }
}

impl RunConfig {
    pub fn width(&self) -> u32 {
        self.resolution[0]
    }

    pub fn height(&self) -> u32 {
        self.resolution[1]
    }

    pub fn resolved_views(&self) -> Result<Vec<View>, ConfigError> {
        self.views
            .iter()
            .enumerate()
            .map(|(i, v)| v.to_view().map_err(|m| ConfigError::invalid(&format!("views[{i}]"), m)))
            .collect()
    }

    /// Checks value ranges and view names. Region names in `exclude` and
    /// `mapping` need an atlas and are checked when the pipeline starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.atlas.trim().is_empty() {
            return Err(ConfigError::invalid("atlas", "must not be empty"));
        }
        let [w, h] = self.resolution;
        if w == 0 || h == 0 {
            return Err(ConfigError::invalid(
                "resolution",
                format!("must be positive, got {w}x{h}"),
            ));
        }
        if !(1..=MAX_SUPERSAMPLE).contains(&self.supersample) {
            return Err(ConfigError::invalid(
                "supersample",
                format!("must be between 1 and {MAX_SUPERSAMPLE}, got {}", self.supersample),
            ));
        }
        let ss = u64::from(self.supersample);
        if u64::from(w) * u64::from(h) * ss * ss > MAX_PIXELS {
            return Err(ConfigError::invalid(
                "resolution",
                format!("{w}x{h} at supersample {ss} exceeds the {MAX_PIXELS}-pixel cap"),
            ));
        }
        if !(0.0..=1.0).contains(&self.glass_opacity) {
            return Err(ConfigError::invalid(
                "glass_opacity",
                format!("must be within [0, 1], got {}", self.glass_opacity),
            ));
        }
        if self.views.is_empty() {
            return Err(ConfigError::invalid("views", "must list at least one view"));
        }
        let mut seen = BTreeSet::new();
        for (i, view) in self.resolved_views()?.iter().enumerate() {
            if !seen.insert(view.name.clone()) {
                return Err(ConfigError::invalid(
                    &format!("views[{i}]"),
                    format!("duplicate view name '{}'", view.name),
                ));
            }
        }
        if let Some(a) = &self.animation {
            if a.frames_per_transition < 1 {
                return Err(ConfigError::invalid(
                    "animation.frames_per_transition",
                    "must be at least 1",
                ));
            }
            if !(a.fps > 0.0 && a.fps.is_finite()) {
                return Err(ConfigError::invalid(
                    "animation.fps",
                    format!("must be positive, got {}", a.fps),
                ));
            }
        }
        Ok(())
    }

    /// Makes relative `asset_root` and `output_dir` relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if self.asset_root.is_relative() {
            self.asset_root = base.join(&self.asset_root);
        }
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }
}

/// Parses and validates a config document. Blank documents give the
/// defaults. Paths are left as written.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg = if text.trim().is_empty() {
        RunConfig::default()
    } else {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize::<_, RunConfig>(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Invalid {
                key: if path == "." { String::new() } else { path },
                message: e.into_inner().to_string(),
            }
        })?
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Reads `path`, parses it, and resolves relative paths against the
/// config file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut cfg = parse_config(&text)?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config(" \n").unwrap(), RunConfig::default());
        assert_eq!(parse_config("{}").unwrap(), RunConfig::default());
        let d = RunConfig::default();
        assert_eq!(d.resolution, [1200, 900]);
        assert_eq!(d.glass_opacity, 0.12);
        let names: Vec<&str> = d.views.iter().map(|v| v.name()).collect();
        assert_eq!(names, ["cortical_front", "cortical_back", "subcortical_front"]);
    }

    #[test]
    fn two_color_gradient() {
        let cfg = parse_config(r##"{"gradient": ["#FFFFFF", "#FF0000"]}"##).unwrap();
        assert_eq!(cfg.gradient.controls(), &[Rgb::WHITE, Rgb::RED]);
        let cfg = parse_config(r#"{"gradient": ["white", [0, 0, 255]]}"#).unwrap();
        assert_eq!(cfg.gradient.controls()[1], Rgb([0, 0, 255]));
    }

    #[test]
    fn unknown_key_is_an_error() {
        let e = parse_config(r#"{"resolutoin": [10, 10]}"#).unwrap_err();
        assert!(e.to_string().contains("unknown field"), "{e}");
        let e = parse_config(r#"{"animation": {"fsp": 3}}"#).unwrap_err();
        assert_eq!(e.key(), Some("animation.fsp"));
    }

    #[test]
    fn invalid_values_name_their_key() {
        let e = parse_config(r#"{"gradient": [[255, 255, 256], "red"]}"#).unwrap_err();
        assert_eq!(e.key(), Some("gradient"));
        assert!(e.to_string().contains("control 0"), "{e}");
        let e = parse_config(r#"{"resolution": [0, 10]}"#).unwrap_err();
        assert_eq!(e.key(), Some("resolution"));
        let e = parse_config(r#"{"views": ["cortical_top"]}"#).unwrap_err();
        assert_eq!(e.key(), Some("views[0]"));
        let e = parse_config(r#"{"glass_opacity": 2}"#).unwrap_err();
        assert_eq!(e.key(), Some("glass_opacity"));
        let e = parse_config(r#"{"surface": "smooth"}"#).unwrap_err();
        assert_eq!(e.key(), Some("surface"));
    }

    #[test]
    fn custom_views() {
        let cfg = parse_config(
            r#"{"views": ["cortical_front", {"name": "oblique", "scene": "cortical", "azimuth": 45, "elevation": 20}]}"#,
        )
        .unwrap();
        let views = cfg.resolved_views().unwrap();
        assert_eq!(views[1].name, "oblique");
        assert!(parse_config(r#"{"views": ["cortical_front", "cortical_front"]}"#).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config(r#"{"atlas": "destrieux", "animation": {"fps": 12}}"#).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
