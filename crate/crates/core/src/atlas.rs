//! Atlas definitions: canonical region names, laterality, render class and the
//! mesh asset each region resolves to.
//!
//! Built-in atlases are compiled in from the tab-separated manifests under
//! `atlases/`. A custom atlas is read from `<asset_root>/<name>/atlas.tsv`.
//!
//! Meshes live under `<asset_root>/<atlas>/`:
//!
//! * lateralized regions: `lh.<mesh_key>.obj` and `rh.<mesh_key>.obj`
//! * midline regions: `<mesh_key>.obj`
//! * cortical regions on the inflated surface: `lh.<mesh_key>.inflated.obj`

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BUILTIN_ATLASES: [&str; 3] = ["desikan_killiany", "destrieux", "tourville"];

const DESIKAN_KILLIANY: &str = include_str!("../atlases/desikan_killiany.tsv");
const DESTRIEUX: &str = include_str!("../atlases/destrieux.tsv");
const TOURVILLE: &str = include_str!("../atlases/tourville.tsv");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtlasError {
    #[error("unknown atlas '{0}'")]
    UnknownAtlas(String),
    #[error("atlas '{atlas}' manifest line {line}: {message}")]
    Manifest {
        atlas: String,
        line: usize,
        message: String,
    },
    #[error("missing mesh asset for region '{region}' ({side}): {path}")]
    MissingMesh { region: String, side: Side, path: PathBuf },
    #[error("unresolved region name '{name}'{}", suggestion_text(.suggestions))]
    Unresolved { name: String, suggestions: Vec<String> },
    #[error("mapping target not found: '{source_name}' -> '{target}'")]
    MappingTargetNotFound { source_name: String, target: String },
    #[error("mapping source '{0}' collides with an existing canonical region name")]
    MappingCollision(String),
    #[error("empty region name")]
    EmptyName,
}

fn suggestion_text(s: &[String]) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!("; did you mean: {}?", s.join(", "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    Left,
    Right,
    Midline,
    /// One value drives a mirrored pair of meshes, one per hemisphere.
    Bilateral,
}

/// One concrete mesh instance of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Midline,
}

impl Side {
    pub fn file_prefix(self) -> Option<&'static str> {
        match self {
            Side::Left => Some("lh"),
            Side::Right => Some("rh"),
            Side::Midline => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Midline => "midline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Klass {
    Cortical,
    Subcortical,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    #[default]
    Pial,
    Inflated,
}

impl FromStr for Surface {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pial" => Ok(Surface::Pial),
            "inflated" => Ok(Surface::Inflated),
            other => Err(format!("unknown surface '{other}' (expected pial or inflated)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionDef {
    pub canonical_name: String,
    pub hemisphere: Hemisphere,
    #[serde(rename = "class")]
    pub klass: Klass,
    pub mesh_key: String,
}

impl RegionDef {
    pub fn sides(&self) -> &'static [Side] {
        match self.hemisphere {
            Hemisphere::Left => &[Side::Left],
            Hemisphere::Right => &[Side::Right],
            Hemisphere::Midline => &[Side::Midline],
            Hemisphere::Bilateral => &[Side::Left, Side::Right],
        }
    }

    pub fn has_side(&self, side: Side) -> bool {
        self.sides().contains(&side)
    }

    /// Asset-relative file name of one mesh instance of this region.
    pub fn mesh_file_name(&self, side: Side, surface: Surface) -> String {
        let suffix = match (self.klass, surface) {
            (Klass::Cortical, Surface::Inflated) => ".inflated",
            _ => "",
        };
        match side.file_prefix() {
            Some(p) => format!("{p}.{}{suffix}.obj", self.mesh_key),
            None => format!("{}{suffix}.obj", self.mesh_key),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Atlas {
    pub name: String,
    pub regions: Vec<RegionDef>,
    pub alias_table: BTreeMap<String, String>,
    index: HashMap<String, usize>,
}

impl PartialEq for Atlas {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.regions == other.regions && self.alias_table == other.alias_table
    }
}

/// Trim, lowercase, and collapse runs of spaces, hyphens and periods into a
/// single underscore.
pub fn normalize_name(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut in_sep = false;
    for ch in raw.trim().chars().flat_map(char::to_lowercase) {
        if matches!(ch, ' ' | '-' | '.') {
            if !in_sep {
                out.push('_');
                in_sep = true;
            }
        } else {
            out.push(ch);
            in_sep = false;
        }
    }
    out
}

fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl Atlas {
    /// Parses a manifest without touching the filesystem.
    pub fn from_manifest(name: &str, text: &str) -> Result<Atlas, AtlasError> {
        let err = |line: usize, message: String| AtlasError::Manifest {
            atlas: name.to_string(),
            line,
            message,
        };
        let mut regions = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(err(
                    line_no,
                    format!("expected 4 tab-separated fields, found {}", fields.len()),
                ));
            }
            let canonical_name = fields[0].to_string();
            if !valid_identifier(&canonical_name) {
                return Err(err(
                    line_no,
                    format!("invalid canonical name '{canonical_name}' (allowed: [a-z0-9_])"),
                ));
            }
            let hemisphere = match fields[1] {
                "left" => Hemisphere::Left,
                "right" => Hemisphere::Right,
                "midline" => Hemisphere::Midline,
                "bilateral" => Hemisphere::Bilateral,
                other => return Err(err(line_no, format!("unknown hemisphere '{other}'"))),
            };
            let klass = match fields[2] {
                "cortical" => Klass::Cortical,
                "subcortical" => Klass::Subcortical,
                other => return Err(err(line_no, format!("unknown class '{other}'"))),
            };
            let mesh_key = fields[3].to_string();
            if mesh_key.is_empty() || mesh_key.contains(['/', '\\']) {
                return Err(err(line_no, format!("invalid mesh key '{mesh_key}'")));
            }
            regions.push(RegionDef {
                canonical_name,
                hemisphere,
                klass,
                mesh_key,
            });
        }
        Atlas::new(name, regions, BTreeMap::new())
    }

    pub fn new(
        name: &str,
        regions: Vec<RegionDef>,
        alias_table: BTreeMap<String, String>,
    ) -> Result<Atlas, AtlasError> {
        let mut index = HashMap::with_capacity(regions.len());
        let mut keys = HashMap::with_capacity(regions.len());
        for (i, r) in regions.iter().enumerate() {
            if index.insert(r.canonical_name.clone(), i).is_some() {
                return Err(AtlasError::Manifest {
                    atlas: name.to_string(),
                    line: 0,
                    message: format!("duplicate canonical name '{}'", r.canonical_name),
                });
            }
            if keys.insert(r.mesh_key.clone(), i).is_some() {
                return Err(AtlasError::Manifest {
                    atlas: name.to_string(),
                    line: 0,
                    message: format!("duplicate mesh key '{}'", r.mesh_key),
                });
            }
        }
        for (alias, target) in &alias_table {
            if !index.contains_key(target) {
                return Err(AtlasError::MappingTargetNotFound {
                    source_name: alias.clone(),
                    target: target.clone(),
                });
            }
        }
        Ok(Atlas {
            name: name.to_string(),
            regions,
            alias_table,
            index,
        })
    }

    pub fn region(&self, canonical_name: &str) -> Option<&RegionDef> {
        self.index.get(canonical_name).map(|&i| &self.regions[i])
    }

    pub fn resolve_region(&self, raw_name: &str) -> Result<&RegionDef, AtlasError> {
        let key = normalize_name(raw_name);
        if key.is_empty() {
            return Err(AtlasError::EmptyName);
        }
        if let Some(r) = self.region(&key) {
            return Ok(r);
        }
        if let Some(r) = self.alias_table.get(&key).and_then(|t| self.region(t)) {
            return Ok(r);
        }
        Err(AtlasError::Unresolved {
            name: raw_name.trim().to_string(),
            suggestions: self.suggest(&key, 3),
        })
    }

    /// Closest canonical names by Levenshtein distance, ties broken by name.
    pub fn suggest(&self, key: &str, n: usize) -> Vec<String> {
        let mut scored: Vec<(usize, &str)> = self
            .regions
            .iter()
            .map(|r| (strsim::levenshtein(key, &r.canonical_name), r.canonical_name.as_str()))
            .collect();
        scored.sort();
        scored.into_iter().take(n).map(|(_, s)| s.to_string()).collect()
    }

    pub fn apply_custom_mapping(&self, mapping: &BTreeMap<String, String>) -> Result<Atlas, AtlasError> {
        let mut aliases = self.alias_table.clone();
        for (source, target) in mapping {
            let resolved = self
                .resolve_region(target)
                .map_err(|_| AtlasError::MappingTargetNotFound {
                    source_name: source.clone(),
                    target: target.clone(),
                })?;
            let key = normalize_name(source);
            if key.is_empty() {
                return Err(AtlasError::EmptyName);
            }
            if self.index.contains_key(&key) {
                return Err(AtlasError::MappingCollision(source.clone()));
            }
            aliases.insert(key, resolved.canonical_name.clone());
        }
        Ok(Atlas {
            alias_table: aliases,
            ..self.clone()
        })
    }

    pub fn mesh_path(&self, asset_root: &Path, region: &RegionDef, side: Side, surface: Surface) -> PathBuf {
        asset_root.join(&self.name).join(region.mesh_file_name(side, surface))
    }

    /// Checks that every mesh instance for `surface` exists under `asset_root`.
    pub fn verify_assets(&self, asset_root: &Path, surface: Surface) -> Result<(), AtlasError> {
        for region in &self.regions {
            for &side in region.sides() {
                let path = self.mesh_path(asset_root, region, side, surface);
                if !path.is_file() {
                    return Err(AtlasError::MissingMesh {
                        region: region.canonical_name.clone(),
                        side,
                        path,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Manifest text of a compiled-in atlas.
pub fn builtin_manifest(name: &str) -> Option<&'static str> {
    match name {
        "desikan_killiany" => Some(DESIKAN_KILLIANY),
        "destrieux" => Some(DESTRIEUX),
        "tourville" => Some(TOURVILLE),
        _ => None,
    }
}

/// Built-in atlases also accept the compact FreeSurfer spelling with the
/// underscores dropped (`inferiortemporal`).
fn compact_aliases(atlas: &Atlas) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for r in &atlas.regions {
        let compact: String = r.canonical_name.chars().filter(|&c| c != '_').collect();
        if compact != r.canonical_name && atlas.region(&compact).is_none() {
            out.entry(compact).or_insert_with(|| r.canonical_name.clone());
        }
    }
    out
}

/// Loads the named atlas definition without checking mesh assets.
pub fn atlas_definition(name: &str, asset_root: &Path) -> Result<Atlas, AtlasError> {
    if let Some(text) = builtin_manifest(name) {
        let atlas = Atlas::from_manifest(name, text)?;
        let aliases = compact_aliases(&atlas);
        return Atlas::new(name, atlas.regions, aliases);
    }
    if !valid_identifier(name) {
        return Err(AtlasError::UnknownAtlas(name.to_string()));
    }
    let path = custom_manifest_path(asset_root, name);
    match std::fs::read_to_string(&path) {
        Ok(text) => Atlas::from_manifest(name, &text),
        Err(_) => Err(AtlasError::UnknownAtlas(name.to_string())),
    }
}

pub fn custom_manifest_path(asset_root: &Path, name: &str) -> PathBuf {
    asset_root.join(name).join("atlas.tsv")
}

/// Loads an atlas and verifies its pial-surface mesh assets exist.
pub fn load_atlas(name: &str, asset_root: &Path) -> Result<Atlas, AtlasError> {
    let atlas = atlas_definition(name, asset_root)?;
    atlas.verify_assets(asset_root, Surface::Pial)?;
    Ok(atlas)
}
