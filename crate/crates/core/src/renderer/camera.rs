use glam::DVec3;
use thiserror::Error;

/// Perspective look-at camera. Screen `x` grows right, `y` grows down,
/// pixel centres sit at half-integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub eye: DVec3,
    pub target: DVec3,
    pub up: DVec3,
    /// Vertical field of view in degrees.
    pub vfov_deg: f64,
    pub near: f64,
    pub far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenPoint {
    pub x: f64,
    pub y: f64,
    /// Positive view-space distance along the viewing axis.
    pub depth: f64,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("point at view depth {depth} is in front of the near plane ({near}); clip it")]
pub struct BehindNearPlane {
    pub depth: f64,
    pub near: f64,
}

impl Camera {
    pub fn look_at(eye: DVec3, target: DVec3, up: DVec3, vfov_deg: f64, near: f64, far: f64) -> Self {
        Camera {
            eye,
            target,
            up,
            vfov_deg,
            near,
            far,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let finite = [self.eye, self.target, self.up].iter().all(|v| v.is_finite())
            && self.vfov_deg.is_finite()
            && self.near.is_finite()
            && self.far.is_finite();
        if !finite {
            return Err("non-finite camera parameter".into());
        }
        let view = self.target - self.eye;
        if view.length() == 0.0 {
            return Err("eye equals target".into());
        }
        if self.up.length() == 0.0 || view.normalize().cross(self.up.normalize()).length() < 1e-9 {
            return Err("up vector is parallel to the view direction".into());
        }
        if !(self.vfov_deg > 0.0 && self.vfov_deg < 180.0) {
            return Err(format!("vertical fov {} outside (0, 180)", self.vfov_deg));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(format!("need 0 < near < far, got near {} far {}", self.near, self.far));
        }
        Ok(())
    }

    /// `(right, up, forward)` unit vectors.
    pub fn basis(&self) -> (DVec3, DVec3, DVec3) {
        let forward = (self.target - self.eye).normalize();
        let right = forward.cross(self.up).normalize();
        let up = right.cross(forward);
        (right, up, forward)
    }

    /// Focal length in pixels for an image `height` pixels tall.
    pub fn focal_px(&self, height: u32) -> f64 {
        f64::from(height) * 0.5 / (self.vfov_deg.to_radians() * 0.5).tan()
    }

    /// World point to view space: x right, y up, z = depth along the view axis.
    pub fn to_view(&self, p: DVec3) -> DVec3 {
        let (r, u, f) = self.basis();
        let d = p - self.eye;
        DVec3::new(d.dot(r), d.dot(u), d.dot(f))
    }

    pub fn project(&self, width: u32, height: u32, p: DVec3) -> Result<ScreenPoint, BehindNearPlane> {
        let v = self.to_view(p);
        if v.z < self.near {
            return Err(BehindNearPlane {
                depth: v.z,
                near: self.near,
            });
        }
        let f = self.focal_px(height);
        Ok(ScreenPoint {
            x: f64::from(width) * 0.5 + f * v.x / v.z,
            y: f64::from(height) * 0.5 - f * v.y / v.z,
            depth: v.z,
        })
    }
}
