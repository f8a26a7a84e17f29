//! Cross-entropy, contrastive boundary loss and IoU metrics.
//!
//! All reductions run sequentially in index order so values are bit-stable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::knn::KdTree;
use crate::{Error, LabeledPointCloud, Result, Vec3, MAX_LABEL, NUM_CLASSES};

pub use crate::boundary::boundary_iou;

/// Probabilities are clamped to this floor before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// Tolerance on row sums of [`ClassProbabilities`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Per-item class distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassProbabilities {
    rows: Vec<[f64; NUM_CLASSES]>,
}

impl ClassProbabilities {
    pub fn new(rows: Vec<[f64; NUM_CLASSES]>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            let sum: f64 = r.iter().sum();
            if r.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::InvalidConfig(format!("probability row {i} is not a distribution")));
            }
        }
        Ok(ClassProbabilities { rows })
    }

    pub fn uniform(n: usize) -> Self {
        ClassProbabilities {
            rows: vec![[1.0 / NUM_CLASSES as f64; NUM_CLASSES]; n],
        }
    }

    pub fn one_hot(labels: &[u8]) -> Result<Self> {
        check_classes(labels)?;
        Ok(ClassProbabilities {
            rows: labels
                .iter()
                .map(|&l| {
                    let mut r = [0.0; NUM_CLASSES];
                    r[l as usize] = 1.0;
                    r
                })
                .collect(),
        })
    }

    pub fn rows(&self) -> &[[f64; NUM_CLASSES]] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

fn check_lengths(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

fn check_classes(labels: &[u8]) -> Result<()> {
    match labels.iter().find(|&&l| l > MAX_LABEL) {
        Some(&bad) => Err(Error::InvalidClass(bad as u32)),
        None => Ok(()),
    }
}

/// Mean of `-ln p[truth]` over items.
pub fn cross_entropy(pred: &ClassProbabilities, truth: &[u8]) -> Result<f64> {
    cross_entropy_with(pred, truth, Reduction::Mean)
}

pub fn cross_entropy_with(pred: &ClassProbabilities, truth: &[u8], reduction: Reduction) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    check_classes(truth)?;
    let losses = pred.rows.iter().zip(truth).map(|(row, &t)| -row[t as usize].clamp(LOG_FLOOR, 1.0).ln());
    Ok(match reduction {
        Reduction::Sum => losses.sum(),
        // Running mean: exact when every item has the same loss.
        Reduction::Mean => losses.enumerate().fold(0.0, |mean, (i, l)| mean + (l - mean) / (i + 1) as f64),
    })
}

/// Default CBL neighbourhood radius: 5% of the bounding-box diagonal.
pub fn default_cbl_radius(cloud: &LabeledPointCloud) -> f64 {
    let (lo, hi) = cloud.bounding_box();
    0.05 * (hi - lo).norm()
}

/// Contrastive boundary loss. For each point `x` with neighbours `N_x`
/// within `radius`, the term is `-ln(Σ_same e^{-d} / Σ_all e^{-d})` where
/// `d` is the Euclidean feature distance; empty neighbourhoods contribute 0
/// and the ratio is floored at [`LOG_FLOOR`]. The sum is divided by the
/// total point count.
pub fn cbl_loss(positions: &[Vec3], labels: &[u8], features: &[Vec<f64>], radius: f64) -> Result<f64> {
    check_lengths(positions.len(), labels.len())?;
    check_lengths(positions.len(), features.len())?;
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig("CBL radius must be positive".into()));
    }
    if positions.is_empty() {
        return Ok(0.0);
    }
    let tree = KdTree::new(positions);
    let floor = LOG_FLOOR.ln();
    let mut total = 0.0;
    for x in 0..positions.len() {
        let mut nbrs: Vec<u32> = tree
            .within_radius(&positions[x], radius, Some(x as u32))
            .iter()
            .map(|n| n.index)
            .collect();
        if nbrs.is_empty() {
            continue;
        }
        nbrs.sort_unstable();
        let logits: Vec<(f64, bool)> = nbrs
            .iter()
            .map(|&y| (-feature_distance(&features[x], &features[y as usize]), labels[y as usize] == labels[x]))
            .collect();
        let all = log_sum_exp(logits.iter().map(|&(l, _)| l));
        let same = log_sum_exp(logits.iter().filter(|&&(_, s)| s).map(|&(l, _)| l));
        total -= (same - all).max(floor).min(0.0);
    }
    Ok(total / positions.len() as f64)
}

fn feature_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `ln Σ e^v`, `-inf` for an empty sequence.
fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `|pred = c ∧ gt = c| / |pred = c ∨ gt = c|`, `None` for an empty union.
pub fn per_class_iou(pred: &[u8], gt: &[u8], class: u8) -> Result<Option<f64>> {
    check_lengths(gt.len(), pred.len())?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in pred.iter().zip(gt) {
        let (a, b) = (p == class, g == class);
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok((union > 0).then(|| inter as f64 / union as f64))
}

/// Mean IoU over the classes present in either labeling; 1 for empty input.
pub fn miou(pred: &[u8], gt: &[u8]) -> Result<f64> {
    let ious = all_class_ious(pred, gt)?;
    let defined: Vec<f64> = ious.iter().flatten().copied().collect();
    Ok(if defined.is_empty() {
        1.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    })
}

fn all_class_ious(pred: &[u8], gt: &[u8]) -> Result<[Option<f64>; NUM_CLASSES]> {
    check_lengths(gt.len(), pred.len())?;
    check_classes(pred)?;
    check_classes(gt)?;
    let mut out = [None; NUM_CLASSES];
    for (c, slot) in out.iter_mut().enumerate() {
        *slot = per_class_iou(pred, gt, c as u8)?;
    }
    Ok(out)
}

/// Segmentation report with per-class IoU, mIoU and boundary IoU.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport {
    pub per_class: [Option<f64>; NUM_CLASSES],
    pub miou: f64,
    pub boundary_iou: f64,
}

impl EvaluationReport {
    /// Flat key map: `miou`, `boundary_iou`, `iou_background`, `iou_T1` to
    /// `iou_T16`; undefined IoUs are `null`.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = BTreeMap::new();
        map.insert("miou".to_string(), serde_json::json!(self.miou));
        map.insert("boundary_iou".to_string(), serde_json::json!(self.boundary_iou));
        for (c, v) in self.per_class.iter().enumerate() {
            let key = if c == 0 { "iou_background".to_string() } else { format!("iou_T{c}") };
            map.insert(key, serde_json::json!(v));
        }
        serde_json::to_value(map).expect("report serializes")
    }
}

pub fn evaluate(pred: &[u8], gt: &[u8], cloud: &LabeledPointCloud, k: usize) -> Result<EvaluationReport> {
    Ok(EvaluationReport {
        per_class: all_class_ious(pred, gt)?,
        miou: miou(pred, gt)?,
        boundary_iou: boundary_iou(pred, gt, cloud, k)?,
    })
}

/// Loss components and their unit-weight sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub ce_image: f64,
    pub ce_point: f64,
    pub cbl_point: f64,
    pub total: f64,
}

pub fn total_loss(ce_image: f64, ce_point: f64, cbl_point: f64) -> LossValue {
    LossValue {
        ce_image,
        ce_point,
        cbl_point,
        total: ce_image + ce_point + cbl_point,
    }
}
