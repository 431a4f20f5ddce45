//! Deterministic CPU rasterizer.
//!
//! Rendering runs in two passes over horizontal bands of the image:
//!
//! 1. opaque triangles, back-face culled, z-buffered, shaded per pixel from
//!    perspective-correct interpolated normals;
//! 2. transparent triangles, sorted back to front by view-space centroid depth
//!    and composited with the over operator, tested against (but never
//!    writing) the opaque depth buffer.
//!
//! Every pixel sees the same triangles in the same global order whatever the
//! band count or thread count, so output is bit-identical across both.

mod camera;
mod png_io;
mod raster;

pub use camera::{BehindNearPlane, Camera, ScreenPoint};
pub use png_io::{decode_png, encode_png};

use glam::DVec3;
use thiserror::Error;

use crate::gradient::Rgb;
use crate::mesh::TriangleMesh;
use crate::par::Parallelism;

/// Upper bound on internal (post-supersampling) pixel count.
pub const MAX_PIXELS: u64 = 64 * 1024 * 1024;

pub const DEFAULT_VFOV_DEG: f64 = 35.0;
pub const HEADLIGHT_INTENSITY: f64 = 0.9;
pub const FILL_INTENSITY: f64 = 0.35;
pub const DEFAULT_AMBIENT: f64 = 0.25;
pub const DEFAULT_DIFFUSE: f64 = 0.75;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("resolution {width}x{height} (x{supersample} supersampling) exceeds the {MAX_PIXELS}-pixel cap")]
    ResolutionCap { width: u32, height: u32, supersample: u32 },
    #[error("resolution must be positive, got {width}x{height}")]
    ZeroResolution { width: u32, height: u32 },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid material for item {item}: {message}")]
    InvalidMaterial { item: usize, message: String },
    #[error("invalid light {index}: {message}")]
    InvalidLight { index: usize, message: String },
    #[error("invalid render options: {0}")]
    InvalidOptions(String),
    #[error("PNG encoding failed: {0}")]
    Png(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub base_color: Rgb,
    pub opacity: f64,
    pub ambient: f64,
    pub diffuse: f64,
}

impl Material {
    pub fn opaque(base_color: Rgb) -> Self {
        Material {
            base_color,
            opacity: 1.0,
            ambient: DEFAULT_AMBIENT,
            diffuse: DEFAULT_DIFFUSE,
        }
    }

    pub fn is_opaque(&self) -> bool {
        self.opacity >= 1.0
    }

    pub fn validate(&self) -> Result<(), String> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.opacity) {
            return Err(format!("opacity {} outside [0, 1]", self.opacity));
        }
        if !unit(self.ambient) || !unit(self.diffuse) {
            return Err(format!(
                "ambient {} / diffuse {} outside [0, 1]",
                self.ambient, self.diffuse
            ));
        }
        if self.ambient + self.diffuse > 1.0 + 1e-9 {
            return Err(format!("ambient + diffuse = {} exceeds 1", self.ambient + self.diffuse));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalLight {
    /// Unit vector pointing from the light into the scene.
    pub direction: DVec3,
    pub intensity: f64,
}

impl DirectionalLight {
    pub fn validate(&self) -> Result<(), String> {
        if (self.direction.length() - 1.0).abs() > 1e-6 {
            return Err(format!("direction length {} is not 1", self.direction.length()));
        }
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(format!("intensity {} outside [0, 1]", self.intensity));
        }
        Ok(())
    }
}

/// Headlight along the view direction plus a weaker fill from the viewer's
/// upper left.
pub fn studio_lights(camera: &Camera) -> Vec<DirectionalLight> {
    let (right, up, forward) = camera.basis();
    vec![
        DirectionalLight {
            direction: forward,
            intensity: HEADLIGHT_INTENSITY,
        },
        DirectionalLight {
            direction: (forward + right * 0.5 - up * 0.5).normalize(),
            intensity: FILL_INTENSITY,
        },
    ]
}

/// Lambert + ambient shade of one material under `lights`, per channel in
/// `[0, 255]`, before quantization.
pub fn shade(material: &Material, normal: DVec3, lights: &[DirectionalLight]) -> [f64; 3] {
    let mut factor = material.ambient;
    for l in lights {
        factor += material.diffuse * l.intensity * normal.dot(-l.direction).max(0.0);
    }
    material.base_color.0.map(|c| (f64::from(c) * factor).clamp(0.0, 255.0))
}

/// Round-half-up to 8 bits.
pub fn quantize(c: f64) -> u8 {
    (c + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    pub width: u32,
    pub height: u32,
    /// Row-major RGBA8.
    pub pixels: Vec<u8>,
}

impl ImageBuffer {
    pub fn filled(width: u32, height: u32, rgba: [u8; 4]) -> Self {
        let n = width as usize * height as usize;
        ImageBuffer {
            width,
            height,
            pixels: rgba.iter().copied().cycle().take(n * 4).collect(),
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].try_into().unwrap()
    }

    /// Box-filters down by an integer factor, rounding half up.
    pub fn downsample(&self, factor: u32) -> ImageBuffer {
        if factor <= 1 {
            return self.clone();
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let mut out = Vec::with_capacity(w as usize * h as usize * 4);
        let n = f64::from(factor * factor);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0u32; 4];
                for sy in 0..factor {
                    for sx in 0..factor {
                        let p = self.pixel(x * factor + sx, y * factor + sy);
                        for c in 0..4 {
                            acc[c] += u32::from(p[c]);
                        }
                    }
                }
                out.extend(acc.map(|a| quantize(f64::from(a) / n)));
            }
        }
        ImageBuffer {
            width: w,
            height: h,
            pixels: out,
        }
    }
}

/// One mesh with its material, as submitted to the rasterizer.
#[derive(Debug, Clone, Copy)]
pub struct Drawable<'a> {
    pub mesh: &'a TriangleMesh,
    pub material: Material,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Render at `k` times the resolution and box-filter down.
    pub supersample: u32,
    pub parallelism: Parallelism,
    /// Rows per band; bands are the unit of parallel work.
    pub band_rows: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            supersample: 1,
            parallelism: Parallelism::default(),
            band_rows: 16,
        }
    }
}

/// Per-pixel bookkeeping exposed for inspection and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxBuffers {
    /// Index of the drawable whose opaque surface won the depth test, or
    /// [`AuxBuffers::NONE`].
    pub item: Vec<u32>,
    /// Unit shading normal of the winning opaque surface.
    pub normal: Vec<DVec3>,
    /// View-space depth of the winning opaque surface (infinite if none).
    pub depth: Vec<f64>,
    /// Number of transparent layers composited over the pixel.
    pub layers: Vec<u16>,
    /// Colour after the opaque pass, before transparency, unquantized.
    pub opaque_color: Vec<[f64; 3]>,
}

impl AuxBuffers {
    pub const NONE: u32 = u32::MAX;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub image: ImageBuffer,
    pub aux: AuxBuffers,
}

fn check_inputs(
    scene: &[Drawable<'_>],
    camera: &Camera,
    lights: &[DirectionalLight],
    width: u32,
    height: u32,
    opts: &RenderOptions,
) -> Result<(), RenderError> {
    if width == 0 || height == 0 {
        return Err(RenderError::ZeroResolution { width, height });
    }
    if opts.supersample == 0 || opts.band_rows == 0 {
        return Err(RenderError::InvalidOptions(
            "supersample and band_rows must be at least 1".into(),
        ));
    }
    let ss = u64::from(opts.supersample);
    if u64::from(width) * u64::from(height) * ss * ss > MAX_PIXELS {
        return Err(RenderError::ResolutionCap {
            width,
            height,
            supersample: opts.supersample,
        });
    }
    camera.validate().map_err(RenderError::InvalidCamera)?;
    for (item, d) in scene.iter().enumerate() {
        d.material
            .validate()
            .map_err(|message| RenderError::InvalidMaterial { item, message })?;
    }
    for (index, l) in lights.iter().enumerate() {
        l.validate()
            .map_err(|message| RenderError::InvalidLight { index, message })?;
    }
    Ok(())
}

/// Renders with default options.
pub fn rasterize(
    scene: &[Drawable<'_>],
    camera: &Camera,
    lights: &[DirectionalLight],
    background: Rgb,
    width: u32,
    height: u32,
) -> Result<ImageBuffer, RenderError> {
    render(
        scene,
        camera,
        lights,
        background,
        width,
        height,
        &RenderOptions::default(),
    )
}

pub fn render(
    scene: &[Drawable<'_>],
    camera: &Camera,
    lights: &[DirectionalLight],
    background: Rgb,
    width: u32,
    height: u32,
    opts: &RenderOptions,
) -> Result<ImageBuffer, RenderError> {
    check_inputs(scene, camera, lights, width, height, opts)?;
    let ss = opts.supersample;
    let fb = raster::render_frame(scene, camera, lights, background, width * ss, height * ss, opts, false);
    Ok(fb.into_image().downsample(ss))
}

/// Renders at `supersample == 1` and also returns the per-pixel buffers.
pub fn render_detailed(
    scene: &[Drawable<'_>],
    camera: &Camera,
    lights: &[DirectionalLight],
    background: Rgb,
    width: u32,
    height: u32,
    opts: &RenderOptions,
) -> Result<RenderOutput, RenderError> {
    check_inputs(scene, camera, lights, width, height, opts)?;
    if opts.supersample != 1 {
        return Err(RenderError::InvalidOptions(
            "detailed renders require supersample = 1".into(),
        ));
    }
    let fb = raster::render_frame(scene, camera, lights, background, width, height, opts, true);
    Ok(fb.into_output())
}
