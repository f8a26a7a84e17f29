//! Label boundaries on point clouds and the boundary density metric.
//!
//! A point is a boundary point when strictly more than half of its `k`
//! nearest neighbours (Euclidean, excluding itself) carry a different label.
//! Density is measured as the mean distance from each boundary point to its
//! `m` nearest other boundary points; lower means denser.

use serde::{Deserialize, Serialize};

use crate::knn::KdTree;
use crate::{par, Error, LabeledPointCloud, Result, Vec3};

pub const DEFAULT_K: usize = 8;
pub const DEFAULT_M: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySet {
    /// Sorted point indices.
    pub indices: Vec<u32>,
    pub k_used: usize,
}

impl BoundarySet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: u32) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Membership mask over `n` points.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.indices {
            mask[i as usize] = true;
        }
        mask
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub avg_distance: f64,
    pub m: usize,
    pub boundary_count: usize,
    /// Always `"normalized"`: distances are in the units of the input cloud,
    /// which the pipeline normalizes to a unit bounding box.
    pub units: String,
}

pub fn detect_boundary_points(cloud: &LabeledPointCloud, k: usize) -> Result<BoundarySet> {
    let labels = cloud.labels().ok_or(Error::MissingLabels)?;
    detect_boundary_labels(cloud.positions(), labels, k)
}

/// Boundary detection over an explicit label array, e.g. predictions.
pub fn detect_boundary_labels(positions: &[Vec3], labels: &[u8], k: usize) -> Result<BoundarySet> {
    if labels.len() != positions.len() {
        return Err(Error::LengthMismatch {
            expected: positions.len(),
            actual: labels.len(),
        });
    }
    if k == 0 || positions.len() <= k {
        return Err(Error::InvalidConfig(format!(
            "boundary detection needs k >= 1 and more than k points (k={k}, N={})",
            positions.len()
        )));
    }
    let tree = KdTree::new(positions);
    let threshold = k / 2;
    let flags = par::map_range(positions.len(), |i| {
        let differing = tree
            .nearest(&positions[i], k, Some(i as u32))
            .iter()
            .filter(|n| labels[n.index as usize] != labels[i])
            .count();
        differing > threshold
    });
    let indices = flags
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i as u32)
        .collect();
    Ok(BoundarySet { indices, k_used: k })
}

pub fn boundary_density(cloud: &LabeledPointCloud, boundary: &BoundarySet, m: usize) -> Result<DensityReport> {
    density_of(cloud.positions(), boundary, m)
}

pub(crate) fn density_of(positions: &[Vec3], boundary: &BoundarySet, m: usize) -> Result<DensityReport> {
    if boundary.len() <= m || m == 0 {
        return Err(Error::TooFewBoundaryPoints {
            needed: m + 1,
            found: boundary.len(),
        });
    }
    let points: Vec<Vec3> = boundary.indices.iter().map(|&i| positions[i as usize]).collect();
    let tree = KdTree::new(&points);
    let per_point = par::map_range(points.len(), |i| {
        let nbrs = tree.nearest(&points[i], m, Some(i as u32));
        nbrs.iter().map(|n| n.dist2.sqrt()).sum::<f64>() / m as f64
    });
    Ok(DensityReport {
        avg_distance: per_point.iter().sum::<f64>() / per_point.len() as f64,
        m,
        boundary_count: points.len(),
        units: "normalized".into(),
    })
}

/// Intersection over union of the boundary sets induced by two labelings of
/// the same cloud; 1 when both are empty.
pub fn boundary_iou(pred: &[u8], gt: &[u8], cloud: &LabeledPointCloud, k: usize) -> Result<f64> {
    let n = cloud.len();
    for labels in [pred, gt] {
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: labels.len(),
            });
        }
    }
    let bp = detect_boundary_labels(cloud.positions(), pred, k)?;
    let bg = detect_boundary_labels(cloud.positions(), gt, k)?;
    Ok(set_iou(&bp.indices, &bg.indices))
}

/// IoU of two sorted index lists.
pub(crate) fn set_iou(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Red for boundary points, light grey elsewhere.
pub fn boundary_colors(n: usize, boundary: &BoundarySet) -> Vec<[u8; 3]> {
    boundary
        .mask(n)
        .into_iter()
        .map(|b| if b { [220, 30, 30] } else { [200, 200, 200] })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::brute_force_nearest;

    fn line(n: usize, s: f64) -> Vec<Vec3> {
        (0..n).map(|i| Vec3::new(i as f64 * s, 0.0, 0.0)).collect()
    }

    fn brute_boundary(p: &[Vec3], labels: &[u8], k: usize) -> Vec<u32> {
        (0..p.len())
            .filter(|&i| {
                let d = brute_force_nearest(p, &p[i], k, Some(i as u32))
                    .iter()
                    .filter(|n| labels[n.index as usize] != labels[i])
                    .count();
                d > k / 2
            })
            .map(|i| i as u32)
            .collect()
    }

    #[test]
    fn uniform_labels_have_no_boundary() {
        let cloud = LabeledPointCloud::from_positions(line(30, 1.0), Some(vec![3; 30])).unwrap();
        assert!(detect_boundary_points(&cloud, 8).unwrap().is_empty());
    }

    #[test]
    fn missing_labels() {
        let cloud = LabeledPointCloud::from_positions(line(30, 1.0), None).unwrap();
        assert!(matches!(detect_boundary_points(&cloud, 8), Err(Error::MissingLabels)));
    }

    #[test]
    fn half_line_matches_brute_force() {
        let p = line(40, 0.5);
        let labels: Vec<u8> = (0..40).map(|i| if i < 20 { 1 } else { 2 }).collect();
        let got = detect_boundary_labels(&p, &labels, 8).unwrap();
        assert_eq!(got.indices, brute_boundary(&p, &labels, 8));
        // the 8-neighbourhood of 19 is 15..=18 and 20..=23 (4 differing, not
        // a majority); 20 sees 16..=19 (4) too, so nothing is a boundary on
        // an exactly symmetric interface
        assert!(got.is_empty());
    }

    #[test]
    fn shifted_interface_on_jittered_line() {
        // irrational spacing breaks distance ties; 21 points of class 1
        let p: Vec<Vec3> = (0..40).map(|i| Vec3::new(i as f64 + 0.01 * (i * i) as f64, 0.0, 0.0)).collect();
        let labels: Vec<u8> = (0..40).map(|i| if i <= 20 { 1 } else { 2 }).collect();
        let got = detect_boundary_labels(&p, &labels, 8).unwrap();
        assert_eq!(got.indices, brute_boundary(&p, &labels, 8));
    }

    #[test]
    fn lone_outlier_is_boundary_its_neighbours_are_not() {
        let mut p = Vec::new();
        for x in 0..7 {
            for y in 0..7 {
                p.push(Vec3::new(x as f64, y as f64, 0.0));
            }
        }
        let center = 3 * 7 + 3;
        let mut labels = vec![0u8; p.len()];
        labels[center] = 5;
        let got = detect_boundary_labels(&p, &labels, 8).unwrap();
        assert_eq!(got.indices, vec![center as u32]);
    }

    #[test]
    fn density_on_lattice_line() {
        let s = 0.25;
        let p = line(50, s);
        let all = BoundarySet {
            indices: (0..50).collect(),
            k_used: 8,
        };
        let report = density_of(&p, &all, 4).unwrap();
        // interior points see s, s, 2s, 2s; the two ends on each side differ
        let per: Vec<f64> = (0..50)
            .map(|i| {
                let mut d: Vec<f64> = (0..50).filter(|&j| j != i).map(|j| (i as f64 - j as f64).abs() * s).collect();
                d.sort_by(f64::total_cmp);
                d[..4].iter().sum::<f64>() / 4.0
            })
            .collect();
        let expected = per.iter().sum::<f64>() / 50.0;
        assert!((report.avg_distance - expected).abs() < 1e-12);
        assert!((per[25] - 1.5 * s).abs() < 1e-15);
    }

    #[test]
    fn density_scales_linearly() {
        let p: Vec<Vec3> = (0..30).map(|i| Vec3::new((i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 * 0.1)).collect();
        let q: Vec<Vec3> = p.iter().map(|v| v * 2.0).collect();
        let b = BoundarySet {
            indices: (0..30).collect(),
            k_used: 8,
        };
        let a = density_of(&p, &b, 4).unwrap().avg_distance;
        let c = density_of(&q, &b, 4).unwrap().avg_distance;
        assert!((c - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn density_needs_more_than_m_points() {
        let b = BoundarySet {
            indices: vec![0, 1, 2, 3],
            k_used: 8,
        };
        assert!(matches!(
            density_of(&line(5, 1.0), &b, 4),
            Err(Error::TooFewBoundaryPoints { needed: 5, found: 4 })
        ));
    }

    #[test]
    fn iou_edge_cases() {
        let p: Vec<Vec3> = (0..60).map(|i| Vec3::new((i % 10) as f64, (i / 10) as f64, 0.0)).collect();
        // alternating columns: interior points see 6 of 8 neighbours differ
        let gt: Vec<u8> = (0..60).map(|i| 1 + (i % 2) as u8).collect();
        let cloud = LabeledPointCloud::from_positions(p, Some(gt.clone())).unwrap();
        assert_eq!(boundary_iou(&gt, &gt, &cloud, 8).unwrap(), 1.0);
        let uniform = vec![1u8; 60];
        assert!(!detect_boundary_labels(cloud.positions(), &gt, 8).unwrap().is_empty());
        assert_eq!(boundary_iou(&uniform, &gt, &cloud, 8).unwrap(), 0.0);
        assert_eq!(boundary_iou(&uniform, &uniform, &cloud, 8).unwrap(), 1.0);
        assert!(matches!(boundary_iou(&gt[..5], &gt, &cloud, 8), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn set_iou_counts() {
        assert_eq!(set_iou(&[1, 2, 3], &[2, 3, 4, 5]), 2.0 / 5.0);
        assert_eq!(set_iou(&[], &[]), 1.0);
    }
}
