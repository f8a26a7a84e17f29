//! Seeded translation and rotation augmentation.
//!
//! Randomness comes from ChaCha20 (`rand_chacha`), seeded from a `u64`, so
//! outputs are reproducible across platforms. The caller owns the generator
//! and passes it to each call; draws happen in a fixed order (translation:
//! X, Y, Z; rotation: one angle per selected axis in X, Y, Z order).

use std::path::Path;

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, LabeledPointCloud, Result, Vec3};

pub type AugmentRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> AugmentRng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationUnit {
    #[default]
    Radians,
    Degrees,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn vector(self) -> Vec3 {
        match self {
            Axis::X => Vec3::x(),
            Axis::Y => Vec3::y(),
            Axis::Z => Vec3::z(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub seed: u64,
    /// Offset bound per axis as a fraction of the bounding-box extent.
    pub translation_range: f64,
    /// Standard deviation of each rotation angle, in `rotation_unit`.
    pub rotation_sigma: f64,
    pub rotation_unit: RotationUnit,
    pub rotation_axes: Vec<Axis>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            seed: 0,
            translation_range: 0.1,
            rotation_sigma: 1.0,
            rotation_unit: RotationUnit::Radians,
            rotation_axes: vec![Axis::Z],
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.translation_range >= 0.0) || !self.translation_range.is_finite() {
            return Err(Error::InvalidConfig("translation range must be a finite value >= 0".into()));
        }
        if !(self.rotation_sigma >= 0.0) || !self.rotation_sigma.is_finite() {
            return Err(Error::InvalidConfig("rotation sigma must be a finite value >= 0".into()));
        }
        Ok(())
    }

    /// Selected axes, deduplicated, in X, Y, Z order.
    fn axes(&self) -> Vec<Axis> {
        let mut axes = self.rotation_axes.clone();
        axes.sort_unstable();
        axes.dedup();
        axes
    }
}

/// Shifts every point by `u ⊙ extent`, `u` uniform in `±translation_range`.
pub fn random_translate(cloud: &LabeledPointCloud, config: &AugmentConfig, rng: &mut AugmentRng) -> (LabeledPointCloud, Vec3) {
    let (lo, hi) = cloud.bounding_box();
    let extent = hi - lo;
    let r = config.translation_range;
    let offset = Vec3::from_fn(|i, _| rng.random_range(-r..=r) * extent[i]);
    let positions = cloud.positions().iter().map(|p| p + offset).collect();
    (
        LabeledPointCloud::from_parts_unchecked(positions, cloud.normals().to_vec(), cloud.labels().map(|l| l.to_vec())),
        offset,
    )
}

/// Applied rotation: angles in radians per axis and the composed matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppliedRotation {
    /// Radians about X, Y, Z; zero for unselected axes.
    pub angles: [f64; 3],
    /// Row-major `Rz · Ry · Rx`.
    pub matrix: [[f64; 3]; 3],
    pub center: [f64; 3],
}

/// Rotates positions and normals about the centroid by normally
/// distributed angles, X first, then Y, then Z.
pub fn random_rotate(cloud: &LabeledPointCloud, config: &AugmentConfig, rng: &mut AugmentRng) -> (LabeledPointCloud, AppliedRotation) {
    let mut angles = [0.0; 3];
    let mut rot = Rotation3::identity();
    for axis in config.axes() {
        let z: f64 = rng.sample(StandardNormal);
        let a = match config.rotation_unit {
            RotationUnit::Radians => z * config.rotation_sigma,
            RotationUnit::Degrees => (z * config.rotation_sigma).to_radians(),
        };
        angles[axis as usize] = a;
        rot = Rotation3::from_axis_angle(&Unit::new_unchecked(axis.vector()), a) * rot;
    }
    let c = cloud.centroid();
    let m = rot.matrix();
    let applied = AppliedRotation {
        angles,
        matrix: std::array::from_fn(|r| std::array::from_fn(|k| m[(r, k)])),
        center: c.into(),
    };
    if angles.iter().all(|&a| a == 0.0) {
        return (cloud.clone(), applied);
    }
    let positions = cloud.positions().iter().map(|p| rot * (p - c) + c).collect();
    let normals = cloud.normals().iter().map(|n| (rot * n).normalize()).collect();
    (
        LabeledPointCloud::from_parts_unchecked(positions, normals, cloud.labels().map(|l| l.to_vec())),
        applied,
    )
}

/// Metadata written next to an augmented cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub seed: u64,
    pub translation_range: f64,
    pub rotation_sigma: f64,
    pub rotation_unit: RotationUnit,
    pub rotation_axes: Vec<Axis>,
    pub offset: [f64; 3],
    pub rotation: AppliedRotation,
}

impl AugmentRecord {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("record serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Translation then rotation from a fresh generator seeded with
/// `config.seed`.
pub fn augment(cloud: &LabeledPointCloud, config: &AugmentConfig) -> Result<(LabeledPointCloud, AugmentRecord)> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let (moved, offset) = random_translate(cloud, config, &mut rng);
    let (rotated, rotation) = random_rotate(&moved, config, &mut rng);
    Ok((
        rotated,
        AugmentRecord {
            seed: config.seed,
            translation_range: config.translation_range,
            rotation_sigma: config.rotation_sigma,
            rotation_unit: config.rotation_unit,
            rotation_axes: config.axes(),
            offset: offset.into(),
            rotation,
        },
    ))
}
