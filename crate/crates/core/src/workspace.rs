//! Spherical workspace models and the per-axis position scaling they induce.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid workspace: {field} must be positive and finite, got {value}")]
pub struct InvalidWorkspace {
    pub field: &'static str,
    pub value: f64,
}

/// Per-axis scaling from human arm workspace to robot workspace.
///
/// The lateral axis (y, along the line joining the shoulders) takes the larger
/// of the radius ratio and the origin-distance ratio, so that the robot arms
/// can cover the full shared region between them.
pub fn compute_scaling(r_h: f64, d_h: f64, r_c: f64, d_c: f64) -> Result<Vec3, InvalidWorkspace> {
    for (field, value) in [("r_h", r_h), ("d_h", d_h), ("r_c", r_c), ("d_c", d_c)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(InvalidWorkspace { field, value });
        }
    }
    let radial = r_c / r_h;
    Ok(Vec3::new(radial, radial.max(d_c / d_h), radial))
}

/// Human and robot workspace calibration plus the derived scaling vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkspaceModel {
    r_h: f64,
    d_h: f64,
    r_c: f64,
    d_c: f64,
    #[serde(skip)]
    scaling: Vec3,
}

impl WorkspaceModel {
    pub fn new(r_h: f64, d_h: f64, r_c: f64, d_c: f64) -> Result<Self, InvalidWorkspace> {
        let scaling = compute_scaling(r_h, d_h, r_c, d_c)?;
        Ok(WorkspaceModel {
            r_h,
            d_h,
            r_c,
            d_c,
            scaling,
        })
    }

    pub fn human_radius(&self) -> f64 {
        self.r_h
    }
    pub fn human_origin_distance(&self) -> f64 {
        self.d_h
    }
    pub fn robot_radius(&self) -> f64 {
        self.r_c
    }
    pub fn robot_origin_distance(&self) -> f64 {
        self.d_c
    }

    pub fn scaling(&self) -> Vec3 {
        self.scaling
    }

    pub fn with_human_radius(&self, r_h: f64) -> Result<Self, InvalidWorkspace> {
        Self::new(r_h, self.d_h, self.r_c, self.d_c)
    }

    pub fn with_human_origin_distance(&self, d_h: f64) -> Result<Self, InvalidWorkspace> {
        Self::new(self.r_h, d_h, self.r_c, self.d_c)
    }
}

impl Default for WorkspaceModel {
    fn default() -> Self {
        WorkspaceModel::new(0.75, 0.38, 0.855, 0.50).expect("default workspace is valid")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkspace {
    r_h: f64,
    d_h: f64,
    r_c: f64,
    d_c: f64,
}

impl<'de> Deserialize<'de> for WorkspaceModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawWorkspace::deserialize(d)?;
        WorkspaceModel::new(raw.r_h, raw.d_h, raw.r_c, raw.d_c).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceSphere {
    pub origin: Vec3,
    pub radius: f64,
}

/// Radially projects `p` onto the sphere surface when it lies outside.
pub fn clamp_to_sphere(p: &Vec3, sphere: &WorkspaceSphere) -> (Vec3, bool) {
    let offset = p - sphere.origin;
    let dist = offset.norm();
    if dist <= sphere.radius {
        (*p, false)
    } else {
        (sphere.origin + offset * (sphere.radius / dist), true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scaling_examples() {
        assert_eq!(compute_scaling(1.0, 1.0, 1.0, 1.0).unwrap(), Vec3::new(1.0, 1.0, 1.0));
        let s = compute_scaling(1.0, 0.4, 0.8, 0.4).unwrap();
        assert!((s - Vec3::new(0.8, 1.0, 0.8)).amax() < 1e-15);
        let s = compute_scaling(1.0, 0.5, 0.9, 0.3).unwrap();
        assert!((s - Vec3::new(0.9, 0.9, 0.9)).amax() < 1e-15);
    }

    #[test]
    fn scaling_rejects_non_positive() {
        assert_eq!(
            compute_scaling(0.0, 1.0, 1.0, 1.0).unwrap_err().field,
            "r_h"
        );
        assert!(compute_scaling(1.0, -0.1, 1.0, 1.0).is_err());
        assert!(compute_scaling(1.0, 1.0, f64::NAN, 1.0).is_err());
        assert!(WorkspaceModel::new(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn model_recomputes_on_change() {
        let ws = WorkspaceModel::new(1.0, 0.4, 0.8, 0.4).unwrap();
        let ws2 = ws.with_human_radius(0.5).unwrap();
        assert!((ws2.scaling() - Vec3::new(1.6, 1.6, 1.6)).amax() < 1e-15);
    }

    #[test]
    fn deserialize_validates() {
        let ws: WorkspaceModel = toml::from_str("r_h = 1.0\nd_h = 0.4\nr_c = 0.8\nd_c = 0.4").unwrap();
        assert!((ws.scaling().y - 1.0).abs() < 1e-15);
        assert!(toml::from_str::<WorkspaceModel>("r_h = 0.0\nd_h = 0.4\nr_c = 0.8\nd_c = 0.4").is_err());
    }

    #[test]
    fn clamp_examples() {
        let sphere = WorkspaceSphere {
            origin: Vec3::new(0.1, 0.2, 0.3),
            radius: 0.5,
        };
        assert_eq!(clamp_to_sphere(&sphere.origin, &sphere), (sphere.origin, false));
        let (p, clamped) = clamp_to_sphere(&(sphere.origin + Vec3::new(1.0, 0.0, 0.0)), &sphere);
        assert!(clamped);
        assert!((p - (sphere.origin + Vec3::new(0.5, 0.0, 0.0))).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn exterior_points_land_on_surface(
            o in prop::array::uniform3(-1.0f64..1.0),
            dir in prop::array::uniform3(-1.0f64..1.0),
            r in 0.1f64..2.0,
            k in 1.01f64..50.0,
        ) {
            let dir = Vec3::from(dir);
            prop_assume!(dir.norm() > 1e-3);
            let sphere = WorkspaceSphere { origin: Vec3::from(o), radius: r };
            let p = sphere.origin + dir.normalize() * r * k;
            let (q, clamped) = clamp_to_sphere(&p, &sphere);
            prop_assert!(clamped);
            prop_assert!(((q - sphere.origin).norm() - r).abs() < 1e-12);
        }

        #[test]
        fn scaling_properties(
            r_h in 0.01f64..10.0, d_h in 0.01f64..10.0,
            r_c in 0.01f64..10.0, d_c in 0.01f64..10.0,
            lambda in 0.01f64..100.0,
        ) {
            let s = compute_scaling(r_h, d_h, r_c, d_c).unwrap();
            prop_assert!(s.y >= s.x);
            prop_assert_eq!(s.x, s.z);
            let t = compute_scaling(lambda * r_h, lambda * d_h, lambda * r_c, lambda * d_c).unwrap();
            prop_assert!((s - t).amax() < 1e-12 * s.amax().max(1.0));
        }
    }
}
