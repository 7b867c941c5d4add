//! Tunnel environment: bounds, box obstacles and the UGV sensor rig.
//!
//! The map file is TOML. Lengths are meters and angles are degrees in the
//! file; angles are stored in radians once loaded.
//!
//! ```toml
//! bounds_min = [-4.0, -5.0, -8.0]
//! bounds_max = [36.0, 5.0, 0.0]
//! collision_margin_m = 0.3
//!
//! [ugv]
//! position = [0.0, 0.0, 0.0]
//! lidar_pitch_deg = 15.0
//!
//! [[obstacles]]
//! min = [14.0, 1.5, -8.0]
//! max = [16.0, 3.5, 0.0]
//! ```
//!
//! The UGV sits on the ground, so "height above ground" for a point `p` is
//! `ugv.position.d - p.d`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Sampling step used by [`EnvironmentMap::segment_is_free`] unless the map
/// file overrides it.
pub const DEFAULT_SEGMENT_STEP_M: f64 = 0.1;

/// The built-in 40 x 10 x 8 m tunnel with four obstacles.
pub const TUNNEL_DEFAULT_TOML: &str = include_str!("../assets/tunnel_default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub min: Vec3,
    pub max: Vec3,
}

impl BoxObstacle {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        BoxObstacle { min, max }
    }

    pub fn center(&self) -> Vec3 {
        self.min.lerp(self.max, 0.5)
    }

    /// Closed containment test against the box grown by `margin` on every side.
    pub fn contains_inflated(&self, p: Vec3, margin: f64) -> bool {
        p.n >= self.min.n - margin
            && p.n <= self.max.n + margin
            && p.e >= self.min.e - margin
            && p.e <= self.max.e + margin
            && p.d >= self.min.d - margin
            && p.d <= self.max.d + margin
    }
}

/// Sensor rig carried by the stationary UGV. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UgvRig {
    pub position: Vec3,
    pub lidar_pitch: f64,
    pub lidar_vertical_halfangle: f64,
    pub lidar_max_range: f64,
    pub camera_mount_height: f64,
    pub camera_max_range: f64,
    /// Offset from the UGV to the point where the UAV takes off and lands.
    pub uav_deploy_offset: Vec3,
}

impl Default for UgvRig {
    fn default() -> Self {
        UgvRig {
            position: Vec3::ZERO,
            lidar_pitch: 15f64.to_radians(),
            lidar_vertical_halfangle: 22.5f64.to_radians(),
            lidar_max_range: 50.0,
            camera_mount_height: 0.8,
            camera_max_range: 6.0,
            uav_deploy_offset: Vec3::new(1.0, 0.0, -1.0),
        }
    }
}

impl UgvRig {
    pub fn camera_position(&self) -> Vec3 {
        self.position + Vec3::new(0.0, 0.0, -self.camera_mount_height)
    }

    pub fn lidar_position(&self) -> Vec3 {
        self.position
    }

    pub fn deploy_point(&self) -> Vec3 {
        self.position + self.uav_deploy_offset
    }

    /// Unit "up" normal of the LIDAR scan plane after pitching the scanner
    /// nose-up about the East axis. The boresight points North.
    fn lidar_plane_normal(&self) -> Vec3 {
        let (s, c) = self.lidar_pitch.sin_cos();
        Vec3::new(-s, 0.0, -c)
    }

    /// Signed angle between `target - lidar` and the pitched scan plane.
    pub fn lidar_off_plane_angle(&self, target: Vec3) -> Option<f64> {
        let rel = target - self.lidar_position();
        let range = rel.norm();
        if range < 1e-12 {
            return None;
        }
        let s = (rel.dot(self.lidar_plane_normal()) / range).clamp(-1.0, 1.0);
        Some(s.asin())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    pub bounds_min: Vec3,
    pub bounds_max: Vec3,
    pub obstacles: Vec<BoxObstacle>,
    pub rig: UgvRig,
    pub collision_margin: f64,
    pub segment_step: f64,
}

// ---- file schema ----------------------------------------------------------

fn default_pitch_deg() -> f64 {
    15.0
}
fn default_halfangle_deg() -> f64 {
    22.5
}
fn default_lidar_range() -> f64 {
    50.0
}
fn default_mount_height() -> f64 {
    0.8
}
fn default_camera_range() -> f64 {
    6.0
}
fn default_deploy_offset() -> Vec3 {
    Vec3::new(1.0, 0.0, -1.0)
}
fn default_margin() -> f64 {
    0.3
}
fn default_step() -> f64 {
    DEFAULT_SEGMENT_STEP_M
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UgvFile {
    #[serde(default)]
    position: Vec3,
    #[serde(default = "default_pitch_deg")]
    lidar_pitch_deg: f64,
    #[serde(default = "default_halfangle_deg")]
    lidar_halfangle_deg: f64,
    #[serde(default = "default_lidar_range")]
    lidar_max_range_m: f64,
    #[serde(default = "default_mount_height")]
    camera_mount_height_m: f64,
    #[serde(default = "default_camera_range")]
    camera_max_range_m: f64,
    #[serde(default = "default_deploy_offset")]
    uav_deploy_offset_m: Vec3,
}

impl Default for UgvFile {
    fn default() -> Self {
        UgvFile {
            position: Vec3::ZERO,
            lidar_pitch_deg: default_pitch_deg(),
            lidar_halfangle_deg: default_halfangle_deg(),
            lidar_max_range_m: default_lidar_range(),
            camera_mount_height_m: default_mount_height(),
            camera_max_range_m: default_camera_range(),
            uav_deploy_offset_m: default_deploy_offset(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapFile {
    bounds_min: Vec3,
    bounds_max: Vec3,
    #[serde(default)]
    obstacles: Vec<BoxObstacle>,
    #[serde(default)]
    ugv: UgvFile,
    #[serde(default = "default_margin")]
    collision_margin_m: f64,
    #[serde(default = "default_step")]
    segment_step_m: f64,
}

/// Read and validate a map file.
pub fn load_map(path: impl AsRef<Path>) -> Result<EnvironmentMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::parse("map file", format!("cannot read {}: {e}", path.display())))?;
    EnvironmentMap::from_toml_str(&text)
}

impl EnvironmentMap {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: MapFile = toml::from_str(text).map_err(|e| Error::parse("map file", e))?;
        let rig = UgvRig {
            position: file.ugv.position,
            lidar_pitch: file.ugv.lidar_pitch_deg.to_radians(),
            lidar_vertical_halfangle: file.ugv.lidar_halfangle_deg.to_radians(),
            lidar_max_range: file.ugv.lidar_max_range_m,
            camera_mount_height: file.ugv.camera_mount_height_m,
            camera_max_range: file.ugv.camera_max_range_m,
            uav_deploy_offset: file.ugv.uav_deploy_offset_m,
        };
        let map = EnvironmentMap {
            bounds_min: file.bounds_min,
            bounds_max: file.bounds_max,
            obstacles: file.obstacles,
            rig,
            collision_margin: file.collision_margin_m,
            segment_step: file.segment_step_m,
        };
        map.validate()?;
        Ok(map)
    }

    /// The default tunnel shipped with the crate.
    pub fn tunnel_default() -> Self {
        Self::from_toml_str(TUNNEL_DEFAULT_TOML).expect("built-in tunnel map is valid")
    }

    pub fn to_toml_string(&self) -> String {
        let file = MapFile {
            bounds_min: self.bounds_min,
            bounds_max: self.bounds_max,
            obstacles: self.obstacles.clone(),
            ugv: UgvFile {
                position: self.rig.position,
                lidar_pitch_deg: self.rig.lidar_pitch.to_degrees(),
                lidar_halfangle_deg: self.rig.lidar_vertical_halfangle.to_degrees(),
                lidar_max_range_m: self.rig.lidar_max_range,
                camera_mount_height_m: self.rig.camera_mount_height,
                camera_max_range_m: self.rig.camera_max_range,
                uav_deploy_offset_m: self.rig.uav_deploy_offset,
            },
            collision_margin_m: self.collision_margin,
            segment_step_m: self.segment_step,
        };
        toml::to_string(&file).expect("map serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMap(m));
        if !self.bounds_min.is_finite() || !self.bounds_max.is_finite() {
            return bad("bounds must be finite".into());
        }
        if !(self.bounds_min.n < self.bounds_max.n
            && self.bounds_min.e < self.bounds_max.e
            && self.bounds_min.d < self.bounds_max.d)
        {
            return bad(format!(
                "empty bounds {:?} .. {:?}",
                self.bounds_min.to_array(),
                self.bounds_max.to_array()
            ));
        }
        for (i, ob) in self.obstacles.iter().enumerate() {
            if !ob.min.is_finite() || !ob.max.is_finite() {
                return bad(format!("obstacle {i} has non-finite corners"));
            }
            if !ob.min.le(ob.max) {
                return bad(format!("obstacle {i} has max_corner < min_corner"));
            }
            if !(ob.min.le(self.bounds_max) && self.bounds_min.le(ob.max)) {
                return bad(format!("obstacle {i} lies entirely outside the bounds"));
            }
        }
        let rig = &self.rig;
        if rig.position != Vec3::ZERO {
            return bad("UGV position is the navigation origin and must be [0, 0, 0]".into());
        }
        if !self.in_bounds(rig.position) {
            return bad("UGV position is outside the bounds".into());
        }
        if !rig.uav_deploy_offset.is_finite() {
            return bad("UAV deploy offset must be finite".into());
        }
        if !(rig.lidar_pitch >= 0.0 && rig.lidar_pitch < std::f64::consts::FRAC_PI_2) {
            return bad("lidar pitch must lie in [0, 90) degrees".into());
        }
        if !(rig.lidar_vertical_halfangle > 0.0
            && rig.lidar_vertical_halfangle <= std::f64::consts::FRAC_PI_2)
        {
            return bad("lidar half-angle must lie in (0, 90] degrees".into());
        }
        let positive = [
            ("lidar max range", rig.lidar_max_range),
            ("camera mount height", rig.camera_mount_height),
            ("camera max range", rig.camera_max_range),
            ("segment step", self.segment_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.collision_margin.is_finite() && self.collision_margin >= 0.0) {
            return bad("collision margin must be non-negative".into());
        }
        Ok(())
    }

    pub fn span(&self) -> Vec3 {
        self.bounds_max - self.bounds_min
    }

    pub fn in_bounds(&self, p: Vec3) -> bool {
        self.bounds_min.le(p) && p.le(self.bounds_max)
    }

    /// Height of `p` above the ground plane the UGV stands on.
    pub fn height_above_ground(&self, p: Vec3) -> f64 {
        self.rig.position.d - p.d
    }

    pub fn with_margin(&self, margin: f64) -> Self {
        EnvironmentMap {
            collision_margin: margin,
            ..self.clone()
        }
    }

    pub fn is_free(&self, p: Vec3) -> bool {
        p.is_finite()
            && self.in_bounds(p)
            && !self
                .obstacles
                .iter()
                .any(|ob| ob.contains_inflated(p, self.collision_margin))
    }

    /// Sample points along `a -> b`, endpoints included, at spacing no larger
    /// than the map's segment step. The endpoints are put in a canonical
    /// order first so the sample set does not depend on direction.
    fn segment_samples(&self, a: Vec3, b: Vec3) -> impl Iterator<Item = Vec3> {
        let (a, b) = if a.to_array() <= b.to_array() {
            (a, b)
        } else {
            (b, a)
        };
        let len = a.distance(b);
        let steps = (len / self.segment_step).ceil().max(1.0) as usize;
        (0..=steps).map(move |i| {
            if i == steps {
                b
            } else {
                a.lerp(b, i as f64 / steps as f64)
            }
        })
    }

    pub fn segment_is_free(&self, a: Vec3, b: Vec3) -> bool {
        if !a.is_finite() || !b.is_finite() {
            return false;
        }
        self.segment_samples(a, b).all(|p| self.is_free(p))
    }

    /// Occlusion test against the raw (uninflated) obstacles. Bounds are not
    /// consulted.
    pub fn line_of_sight(&self, a: Vec3, b: Vec3) -> bool {
        if !a.is_finite() || !b.is_finite() {
            return false;
        }
        self.segment_samples(a, b)
            .all(|p| !self.obstacles.iter().any(|ob| ob.contains_inflated(p, 0.0)))
    }

    pub fn camera_sees(&self, uav: Vec3) -> bool {
        let cam = self.rig.camera_position();
        self.height_above_ground(uav) > self.rig.camera_mount_height
            && cam.distance(uav) <= self.rig.camera_max_range
            && self.line_of_sight(cam, uav)
    }

    pub fn lidar_sees(&self, uav: Vec3) -> bool {
        let lidar = self.rig.lidar_position();
        if lidar.distance(uav) > self.rig.lidar_max_range {
            return false;
        }
        match self.rig.lidar_off_plane_angle(uav) {
            Some(angle) if angle.abs() <= self.rig.lidar_vertical_halfangle => self.line_of_sight(lidar, uav),
            _ => false,
        }
    }
}
