//! Turns an atlas, one row of region values and a gradient into a
//! render-ready scene with a framed camera.
//!
//! Scene frame: +x toward the right hemisphere, +y posterior, +z superior.
//! The front view looks along +y from the anterior side, the back view along
//! -y, and the lateral view along +x from the left.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use glam::DVec3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::{Atlas, Hemisphere, Klass, RegionDef, Side, Surface};
use crate::diag::Diagnostic;
use crate::gradient::{Gradient, Rgb};
use crate::ingest::RegionValueTable;
use crate::mesh::{generate_fixture_mesh, parse_obj, union_bounds, Aabb, TriangleMesh};
use crate::renderer::{
    self, studio_lights, Camera, DirectionalLight, Drawable, ImageBuffer, Material, RenderError, RenderOptions,
    DEFAULT_VFOV_DEG,
};

pub const DEFAULT_GLASS_OPACITY: f64 = 0.12;
/// Extra distance factor applied when framing, leaving a margin around the
/// bounding sphere.
pub const FRAMING_MARGIN: f64 = 1.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("view '{view}' has nothing to draw after exclusions")]
    EmptyScene { view: String },
    #[error("view '{view}' is a {actual} view, expected {expected}")]
    WrongKind {
        view: String,
        expected: SceneKind,
        actual: SceneKind,
    },
    #[error("cannot load mesh for region '{region}' ({side}) from {path}: {message}")]
    Mesh {
        region: String,
        side: Side,
        path: PathBuf,
        message: String,
    },
    #[error("scene bounds are degenerate; cannot frame a camera")]
    DegenerateBounds,
    #[error("unknown view '{0}'")]
    UnknownView(String),
    #[error("invalid view '{name}': {message}")]
    InvalidView { name: String, message: String },
    #[error("invalid value for region '{region}': {message}")]
    Color { region: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Cortical,
    Subcortical,
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SceneKind::Cortical => "cortical",
            SceneKind::Subcortical => "subcortical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViewPreset {
    CorticalFront,
    CorticalBack,
    CorticalLateral,
    SubcorticalFront,
    SubcorticalLateral,
}

impl ViewPreset {
    pub const ALL: [ViewPreset; 5] = [
        ViewPreset::CorticalFront,
        ViewPreset::CorticalBack,
        ViewPreset::CorticalLateral,
        ViewPreset::SubcorticalFront,
        ViewPreset::SubcorticalLateral,
    ];

    pub const DEFAULTS: [ViewPreset; 3] = [
        ViewPreset::CorticalFront,
        ViewPreset::CorticalBack,
        ViewPreset::SubcorticalFront,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ViewPreset::CorticalFront => "cortical_front",
            ViewPreset::CorticalBack => "cortical_back",
            ViewPreset::CorticalLateral => "cortical_lateral",
            ViewPreset::SubcorticalFront => "subcortical_front",
            ViewPreset::SubcorticalLateral => "subcortical_lateral",
        }
    }

    pub fn kind(self) -> SceneKind {
        match self {
            ViewPreset::CorticalFront | ViewPreset::CorticalBack | ViewPreset::CorticalLateral => SceneKind::Cortical,
            ViewPreset::SubcorticalFront | ViewPreset::SubcorticalLateral => SceneKind::Subcortical,
        }
    }

    /// Unit direction from the scene centre toward the eye.
    pub fn eye_direction(self) -> DVec3 {
        match self {
            ViewPreset::CorticalFront | ViewPreset::SubcorticalFront => DVec3::NEG_Y,
            ViewPreset::CorticalBack => DVec3::Y,
            ViewPreset::CorticalLateral | ViewPreset::SubcorticalLateral => DVec3::NEG_X,
        }
    }
}

impl fmt::Display for ViewPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ViewPreset {
    type Err = SceneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ViewPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SceneError::UnknownView(s.to_string()))
    }
}

/// A named viewpoint: which scene to build and where the eye sits.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub name: String,
    pub kind: SceneKind,
    /// Unit direction from the scene centre toward the eye.
    pub eye_direction: DVec3,
}

impl View {
    pub fn preset(p: ViewPreset) -> Self {
        View {
            name: p.name().to_string(),
            kind: p.kind(),
            eye_direction: p.eye_direction(),
        }
    }

    /// A custom angle. Azimuth 0 is the front view, 90 the left lateral view,
    /// 180 the back view; positive elevation raises the eye toward +z.
    pub fn from_angles(name: &str, kind: SceneKind, azimuth_deg: f64, elevation_deg: f64) -> Result<Self, SceneError> {
        let invalid = |message: String| SceneError::InvalidView {
            name: name.to_string(),
            message,
        };
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(invalid("name must be nonempty and use only [A-Za-z0-9_-]".into()));
        }
        if !azimuth_deg.is_finite() || !elevation_deg.is_finite() {
            return Err(invalid("angles must be finite".into()));
        }
        if elevation_deg.abs() >= 89.0 {
            return Err(invalid(format!(
                "elevation {elevation_deg} must lie strictly between -89 and 89 degrees"
            )));
        }
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        Ok(View {
            name: name.to_string(),
            kind,
            eye_direction: DVec3::new(-az.sin() * el.cos(), -az.cos() * el.cos(), el.sin()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneOptions {
    /// Canonical names of regions to leave out of every scene.
    pub exclude: BTreeSet<String>,
    pub include_right_hemisphere: bool,
    pub glass_opacity: f64,
    pub surface: Surface,
    pub vfov_deg: f64,
    pub background: Rgb,
}

impl Default for SceneOptions {
    fn default() -> Self {
        SceneOptions {
            exclude: BTreeSet::new(),
            include_right_hemisphere: false,
            glass_opacity: DEFAULT_GLASS_OPACITY,
            surface: Surface::Pial,
            vfov_deg: DEFAULT_VFOV_DEG,
            background: Rgb::BLACK,
        }
    }
}

/// One colored region mesh in a scene.
#[derive(Debug, Clone)]
pub struct SceneItem {
    pub region: String,
    pub side: Side,
    /// Asset file name of the mesh, e.g. `lh.hippocampus.obj`.
    pub mesh_key: String,
    pub value: f64,
    pub material: Material,
    pub mesh: Arc<TriangleMesh>,
}

/// The transparent reference hemisphere of subcortical views.
#[derive(Debug, Clone)]
pub struct GlassGroup {
    pub material: Material,
    pub meshes: Vec<(String, Arc<TriangleMesh>)>,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub view: String,
    pub items: Vec<SceneItem>,
    pub glass: Option<GlassGroup>,
    pub camera: Camera,
    pub lights: Vec<DirectionalLight>,
    pub background: Rgb,
}

impl Scene {
    /// Drawables in submission order: colored items first (so drawable `i`
    /// is `items[i]`), then glass meshes.
    pub fn drawables(&self) -> Vec<Drawable<'_>> {
        let mut out: Vec<Drawable<'_>> = self
            .items
            .iter()
            .map(|it| Drawable {
                mesh: &it.mesh,
                material: it.material,
            })
            .collect();
        if let Some(g) = &self.glass {
            out.extend(g.meshes.iter().map(|(_, m)| Drawable {
                mesh: m,
                material: g.material,
            }));
        }
        out
    }

    pub fn bounds(&self) -> Option<Aabb> {
        let boxes: Vec<Aabb> = self
            .items
            .iter()
            .map(|i| &i.mesh)
            .chain(self.glass.iter().flat_map(|g| g.meshes.iter().map(|(_, m)| m)))
            .filter_map(|m| m.bounds().ok())
            .collect();
        union_bounds(&boxes)
    }
}

/// Supplies the triangle mesh for one mesh instance of a region.
pub trait MeshSource: Send + Sync {
    fn mesh(
        &self,
        atlas: &Atlas,
        region: &RegionDef,
        side: Side,
        surface: Surface,
    ) -> Result<Arc<TriangleMesh>, SceneError>;

    /// Load warnings collected so far, in load order.
    fn warnings(&self) -> Vec<Diagnostic> {
        Vec::new()
    }
}

/// Reads OBJ assets from `<root>/<atlas>/` and caches them.
#[derive(Debug)]
pub struct AssetMeshes {
    root: PathBuf,
    cache: Mutex<HashMap<PathBuf, Arc<TriangleMesh>>>,
    warnings: Mutex<Vec<Diagnostic>>,
}

impl AssetMeshes {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        AssetMeshes {
            root: root.into(),
            cache: Mutex::new(HashMap::new()),
            warnings: Mutex::new(Vec::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl MeshSource for AssetMeshes {
    fn mesh(
        &self,
        atlas: &Atlas,
        region: &RegionDef,
        side: Side,
        surface: Surface,
    ) -> Result<Arc<TriangleMesh>, SceneError> {
        let path = atlas.mesh_path(&self.root, region, side, surface);
        let mut cache = self.cache.lock().expect("mesh cache poisoned");
        if let Some(m) = cache.get(&path) {
            return Ok(m.clone());
        }
        let fail = |message: String| SceneError::Mesh {
            region: region.canonical_name.clone(),
            side,
            path: path.clone(),
            message,
        };
        let text = std::fs::read_to_string(&path).map_err(|e| fail(e.to_string()))?;
        let name = region.mesh_file_name(side, surface);
        let (mesh, warnings) = parse_obj(&text, &name).map_err(|e| fail(e.to_string()))?;
        if !warnings.is_empty() {
            let mut sink = self.warnings.lock().expect("warning list poisoned");
            sink.extend(warnings.into_iter().map(|mut w| {
                w.message = format!("{name}: {}", w.message);
                w
            }));
        }
        let mesh = Arc::new(mesh);
        cache.insert(path, mesh.clone());
        Ok(mesh)
    }

    fn warnings(&self) -> Vec<Diagnostic> {
        self.warnings.lock().expect("warning list poisoned").clone()
    }
}

/// Generates fixture meshes in memory instead of reading files.
#[derive(Debug, Default)]
pub struct FixtureMeshes {
    seed: u64,
    cache: Mutex<HashMap<(String, Side, Surface), Arc<TriangleMesh>>>,
}

impl FixtureMeshes {
    pub fn new(seed: u64) -> Self {
        FixtureMeshes {
            seed,
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl MeshSource for FixtureMeshes {
    fn mesh(
        &self,
        _atlas: &Atlas,
        region: &RegionDef,
        side: Side,
        surface: Surface,
    ) -> Result<Arc<TriangleMesh>, SceneError> {
        let mut cache = self.cache.lock().expect("mesh cache poisoned");
        let key = (region.canonical_name.clone(), side, surface);
        Ok(cache
            .entry(key)
            .or_insert_with(|| Arc::new(generate_fixture_mesh(region, side, surface, self.seed)))
            .clone())
    }
}

/// Places the camera on the view's eye axis at `(r / tan(vfov/2)) * 1.1`
/// from the bounds centre, where `r` is the bounding-sphere radius.
pub fn frame_camera(bounds: &Aabb, view: &View, vfov_deg: f64) -> Result<Camera, SceneError> {
    let r = bounds.bounding_radius();
    if !(r > 0.0 && r.is_finite()) {
        return Err(SceneError::DegenerateBounds);
    }
    let d = r / (vfov_deg.to_radians() * 0.5).tan() * FRAMING_MARGIN;
    let target = bounds.center();
    let camera = Camera::look_at(
        target + view.eye_direction * d,
        target,
        DVec3::Z,
        vfov_deg,
        (d - r) * 0.5,
        d + 2.0 * r,
    );
    camera.validate().map_err(|message| SceneError::InvalidView {
        name: view.name.clone(),
        message,
    })?;
    Ok(camera)
}

fn region_material(g: &Gradient, region: &str, value: f64) -> Result<Material, SceneError> {
    let color = g.color_at(value).map_err(|e| SceneError::Color {
        region: region.to_string(),
        message: e.to_string(),
    })?;
    Ok(Material::opaque(color))
}

fn colored_item(
    atlas: &Atlas,
    meshes: &dyn MeshSource,
    region: &RegionDef,
    side: Side,
    value: f64,
    g: &Gradient,
    surface: Surface,
) -> Result<SceneItem, SceneError> {
    Ok(SceneItem {
        region: region.canonical_name.clone(),
        side,
        mesh_key: region.mesh_file_name(side, surface),
        value,
        material: region_material(g, &region.canonical_name, value)?,
        mesh: meshes.mesh(atlas, region, side, surface)?,
    })
}

fn finish(
    view: &View,
    items: Vec<SceneItem>,
    glass: Option<GlassGroup>,
    options: &SceneOptions,
) -> Result<Scene, SceneError> {
    let mut scene = Scene {
        view: view.name.clone(),
        items,
        glass,
        camera: Camera::look_at(DVec3::NEG_Y, DVec3::ZERO, DVec3::Z, options.vfov_deg, 0.1, 1.0),
        lights: Vec::new(),
        background: options.background,
    };
    let bounds = scene.bounds().ok_or_else(|| SceneError::EmptyScene {
        view: view.name.clone(),
    })?;
    scene.camera = frame_camera(&bounds, view, options.vfov_deg)?;
    scene.lights = studio_lights(&scene.camera);
    Ok(scene)
}

/// Cortical regions of the left hemisphere (both hemispheres when
/// `include_right_hemisphere` is set) plus midline structures, opaque and
/// colored from `values`.
pub fn build_cortical_scene(
    atlas: &Atlas,
    meshes: &dyn MeshSource,
    values: &dyn Fn(&str) -> f64,
    g: &Gradient,
    view: &View,
    options: &SceneOptions,
) -> Result<Scene, SceneError> {
    if view.kind != SceneKind::Cortical {
        return Err(SceneError::WrongKind {
            view: view.name.clone(),
            expected: SceneKind::Cortical,
            actual: view.kind,
        });
    }
    let mut items = Vec::new();
    for region in atlas
        .regions
        .iter()
        .filter(|r| !options.exclude.contains(&r.canonical_name))
    {
        let sides: &[Side] = match (region.klass, region.hemisphere) {
            (_, Hemisphere::Midline) => &[Side::Midline],
            (Klass::Cortical, _) if options.include_right_hemisphere => &[Side::Left, Side::Right],
            (Klass::Cortical, _) => &[Side::Left],
            (Klass::Subcortical, _) => &[],
        };
        let value = values(&region.canonical_name);
        for &side in sides.iter().filter(|&&s| region.has_side(s)) {
            items.push(colored_item(atlas, meshes, region, side, value, g, options.surface)?);
        }
    }
    if items.is_empty() {
        return Err(SceneError::EmptyScene {
            view: view.name.clone(),
        });
    }
    finish(view, items, None, options)
}

/// Subcortical regions of both hemispheres, opaque and colored, inside the
/// right cortical hemisphere drawn as a single glass group.
pub fn build_subcortical_scene(
    atlas: &Atlas,
    meshes: &dyn MeshSource,
    values: &dyn Fn(&str) -> f64,
    g: &Gradient,
    view: &View,
    options: &SceneOptions,
) -> Result<Scene, SceneError> {
    if view.kind != SceneKind::Subcortical {
        return Err(SceneError::WrongKind {
            view: view.name.clone(),
            expected: SceneKind::Subcortical,
            actual: view.kind,
        });
    }
    let mut items = Vec::new();
    let mut glass = Vec::new();
    for region in atlas
        .regions
        .iter()
        .filter(|r| !options.exclude.contains(&r.canonical_name))
    {
        match region.klass {
            Klass::Subcortical => {
                let value = values(&region.canonical_name);
                for &side in region.sides() {
                    items.push(colored_item(atlas, meshes, region, side, value, g, options.surface)?);
                }
            }
            Klass::Cortical if region.has_side(Side::Right) => {
                let mesh = meshes.mesh(atlas, region, Side::Right, options.surface)?;
                glass.push((region.mesh_file_name(Side::Right, options.surface), mesh));
            }
            Klass::Cortical => {}
        }
    }
    if items.is_empty() {
        return Err(SceneError::EmptyScene {
            view: view.name.clone(),
        });
    }
    let glass = (!glass.is_empty() && options.glass_opacity > 0.0).then(|| GlassGroup {
        material: Material {
            opacity: options.glass_opacity,
            ..Material::opaque(Rgb::WHITE)
        },
        meshes: glass,
    });
    finish(view, items, glass, options)
}

/// Builds the scene `view` calls for from row `row` of `table`.
pub fn build_scene(
    atlas: &Atlas,
    meshes: &dyn MeshSource,
    table: &RegionValueTable,
    row: usize,
    g: &Gradient,
    view: &View,
    options: &SceneOptions,
) -> Result<Scene, SceneError> {
    let values = |region: &str| table.value(row, region);
    build_scene_with(atlas, meshes, &values, g, view, options)
}

/// Like [`build_scene`] with values supplied by a lookup function.
pub fn build_scene_with(
    atlas: &Atlas,
    meshes: &dyn MeshSource,
    values: &dyn Fn(&str) -> f64,
    g: &Gradient,
    view: &View,
    options: &SceneOptions,
) -> Result<Scene, SceneError> {
    match view.kind {
        SceneKind::Cortical => build_cortical_scene(atlas, meshes, values, g, view, options),
        SceneKind::Subcortical => build_subcortical_scene(atlas, meshes, values, g, view, options),
    }
}

pub fn render_scene(scene: &Scene, width: u32, height: u32, opts: &RenderOptions) -> Result<ImageBuffer, RenderError> {
    renderer::render(
        &scene.drawables(),
        &scene.camera,
        &scene.lights,
        scene.background,
        width,
        height,
        opts,
    )
}

/// Everything needed to render one view of one set of region values.
pub struct RenderSetup<'a> {
    pub atlas: &'a Atlas,
    pub meshes: &'a dyn MeshSource,
    pub gradient: &'a Gradient,
    pub options: &'a SceneOptions,
    pub width: u32,
    pub height: u32,
    pub render: RenderOptions,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViewRenderError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Render(#[from] RenderError),
}

impl RenderSetup<'_> {
    pub fn build(&self, values: &dyn Fn(&str) -> f64, view: &View) -> Result<Scene, SceneError> {
        build_scene_with(self.atlas, self.meshes, values, self.gradient, view, self.options)
    }

    pub fn render_scene(&self, scene: &Scene) -> Result<ImageBuffer, RenderError> {
        render_scene(scene, self.width, self.height, &self.render)
    }

    pub fn render_view(&self, values: &dyn Fn(&str) -> f64, view: &View) -> Result<ImageBuffer, ViewRenderError> {
        let scene = self.build(values, view)?;
        Ok(self.render_scene(&scene)?)
    }
}
