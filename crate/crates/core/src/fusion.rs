//! Back-projection of per-pixel class scores onto points and one-hot fusion
//! with point features.
//!
//! Each point collects the score vector of the pixel showing it in every
//! view where it is visible; the mean of those vectors is encoded as a
//! one-hot indicator of its argmax class and appended to the point's
//! geometric features. Views are reduced in their given order, so results
//! do not depend on the thread count.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::knn::KdTree;
use crate::render::{project_points, RenderedView, NO_VERTEX};
use crate::{par, Error, LabeledPointCloud, Result, MAX_LABEL, NUM_CLASSES};

pub type ScoreVector = [f64; NUM_CLASSES];

#[derive(Clone, Debug, PartialEq)]
enum ScoreData {
    /// Row-major, `NUM_CLASSES` values per pixel.
    Dense(Vec<f32>),
    /// Indicator of one class per pixel; `None` pixels score zero.
    OneHot(Vec<Option<u8>>),
}

/// Class scores for every pixel of one view.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelScoreMap {
    width: usize,
    height: usize,
    data: ScoreData,
}

impl PixelScoreMap {
    pub fn dense(width: usize, height: usize, scores: Vec<f32>) -> Result<Self> {
        if scores.len() != width * height * NUM_CLASSES {
            return Err(Error::LengthMismatch {
                expected: width * height * NUM_CLASSES,
                actual: scores.len(),
            });
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig("score maps must be finite".into()));
        }
        Ok(PixelScoreMap {
            width,
            height,
            data: ScoreData::Dense(scores),
        })
    }

    /// One-hot scores from a per-pixel class image.
    pub fn from_label_image(width: usize, height: usize, labels: Vec<Option<u8>>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().flatten().find(|&&l| l > MAX_LABEL) {
            return Err(Error::InvalidClass(*bad as u32));
        }
        Ok(PixelScoreMap {
            width,
            height,
            data: ScoreData::OneHot(labels),
        })
    }

    /// Scores a perfect image segmenter would produce: the class of the
    /// vertex each pixel shows.
    pub fn oracle(view: &RenderedView, vertex_labels: &[u8]) -> Result<Self> {
        let labels = view
            .vertex_ids()
            .iter()
            .map(|&id| {
                if id == NO_VERTEX {
                    Ok(None)
                } else {
                    vertex_labels
                        .get(id as usize)
                        .copied()
                        .map(Some)
                        .ok_or(Error::LengthMismatch {
                            expected: id as usize + 1,
                            actual: vertex_labels.len(),
                        })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_label_image(view.resolution(), view.resolution(), labels)
    }

    /// The same score vector at every pixel.
    pub fn constant(width: usize, height: usize, scores: &[f32; NUM_CLASSES]) -> Result<Self> {
        let data = scores.iter().copied().cycle().take(width * height * NUM_CLASSES).collect();
        Self::dense(width, height, data)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn scores_at(&self, x: usize, y: usize) -> [f32; NUM_CLASSES] {
        let i = y * self.width + x;
        match &self.data {
            ScoreData::Dense(d) => d[i * NUM_CLASSES..(i + 1) * NUM_CLASSES].try_into().unwrap(),
            ScoreData::OneHot(l) => {
                let mut s = [0.0; NUM_CLASSES];
                if let Some(c) = l[i] {
                    s[c as usize] = 1.0;
                }
                s
            }
        }
    }

    /// Dense scores file: `u64` header length, JSON header `{width, height,
    /// classes, dtype}`, then `f32` scores, row-major with the class index
    /// fastest; all little-endian. One-hot maps are expanded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&ScoresHeader {
            width: self.width,
            height: self.height,
            classes: NUM_CLASSES,
            dtype: "float32".into(),
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(8 + header.len() + 4 * self.width * self.height * NUM_CLASSES);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for y in 0..self.height {
            for x in 0..self.width {
                for v in self.scores_at(x, y) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::parse(None, format!("score map: {m}"));
        let len = u64::from_le_bytes(bytes.get(..8).ok_or_else(|| bad("truncated"))?.try_into().unwrap()) as usize;
        let body = bytes.get(8..8 + len).ok_or_else(|| bad("truncated header"))?;
        let header: ScoresHeader = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
        if header.dtype != "float32" || header.classes != NUM_CLASSES {
            return Err(bad("expected float32 scores over 17 classes"));
        }
        let data: Vec<f32> = bytes[8 + len..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::dense(header.width, header.height, data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
    }

    /// Reads a grayscale 8-bit PNG of class ids; 255 marks unlabeled pixels.
    pub fn read_label_png(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let decoder = png::Decoder::new(std::io::BufReader::new(file));
        let mut reader = decoder
            .read_info()
            .map_err(|e| Error::parse(None, format!("{}: {e}", path.display())))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::parse(None, format!("{}: {e}", path.display())))?;
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
            return Err(Error::parse(None, "label image must be 8-bit grayscale"));
        }
        let (w, h) = (info.width as usize, info.height as usize);
        let labels = buf[..w * h].iter().map(|&v| (v != 255).then_some(v)).collect();
        Self::from_label_image(w, h, labels)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoresHeader {
    width: usize,
    height: usize,
    classes: usize,
    dtype: String,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct GatherOptions {
    /// Apply a softmax to each pixel's scores before averaging.
    pub softmax: bool,
    /// Visibility depth tolerance; `None` uses the per-view default.
    pub depth_epsilon: Option<f64>,
}

/// Score vectors one view contributes, by point index.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewContribution {
    points: Vec<u32>,
    scores: Vec<[f32; NUM_CLASSES]>,
}

impl ViewContribution {
    pub fn visible_points(&self) -> &[u32] {
        &self.points
    }
}

pub fn view_contribution(
    cloud: &LabeledPointCloud,
    view: &RenderedView,
    scores: &PixelScoreMap,
    options: &GatherOptions,
) -> Result<ViewContribution> {
    let res = view.resolution();
    if scores.shape() != (res, res) {
        return Err(Error::ShapeMismatch {
            expected: (res, res),
            actual: scores.shape(),
        });
    }
    let mut out = ViewContribution {
        points: Vec::new(),
        scores: Vec::new(),
    };
    for p in project_points(cloud, view, options.depth_epsilon) {
        if !p.visible {
            continue;
        }
        let (x, y) = p.pixel_index(res).expect("visible points are inside the view");
        let Some((x, y)) = sample_pixel(view, x, y, p.index) else {
            continue;
        };
        let mut s = scores.scores_at(x, y);
        if options.softmax {
            softmax(&mut s);
        }
        out.points.push(p.index);
        out.scores.push(s);
    }
    Ok(out)
}

/// Pixel whose scores describe point `index`: the nearest pixel of the
/// 3×3 window that shows the point's vertex, else the nearest covered one.
/// `None` when the whole window is empty, e.g. a silhouette vertex whose
/// surface covers no pixel center nearby.
fn sample_pixel(view: &RenderedView, x: usize, y: usize, index: u32) -> Option<(usize, usize)> {
    let res = view.resolution();
    let mut window: Vec<(usize, usize)> = (y.saturating_sub(1)..=(y + 1).min(res - 1))
        .flat_map(|yy| (x.saturating_sub(1)..=(x + 1).min(res - 1)).map(move |xx| (xx, yy)))
        .collect();
    // own pixel first, then edge neighbours, then corners
    window.sort_by_key(|&(xx, yy)| xx.abs_diff(x) + yy.abs_diff(y));
    let id = |&(xx, yy): &(usize, usize)| view.vertex_ids()[yy * res + xx];
    window
        .iter()
        .find(|p| id(p) == index as i32)
        .or_else(|| window.iter().find(|p| id(p) != NO_VERTEX))
        .copied()
}

fn softmax(s: &mut [f32; NUM_CLASSES]) {
    let max = s.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut total = 0.0;
    for v in s.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in s.iter_mut() {
        *v /= total;
    }
}

/// Running per-point sums; add views in a fixed order for bit-stable means.
#[derive(Clone, Debug)]
pub struct ScoreAccumulator {
    sums: Vec<ScoreVector>,
    counts: Vec<u32>,
}

impl ScoreAccumulator {
    pub fn new(n: usize) -> Self {
        ScoreAccumulator {
            sums: vec![[0.0; NUM_CLASSES]; n],
            counts: vec![0; n],
        }
    }

    pub fn add(&mut self, contribution: &ViewContribution) {
        for (&i, s) in contribution.points.iter().zip(&contribution.scores) {
            let acc = &mut self.sums[i as usize];
            for c in 0..NUM_CLASSES {
                acc[c] += s[c] as f64;
            }
            self.counts[i as usize] += 1;
        }
    }

    pub fn finish(self) -> GatheredScores {
        let means = self
            .sums
            .into_iter()
            .zip(&self.counts)
            .map(|(s, &n)| if n == 0 { s } else { s.map(|v| v / n as f64) })
            .collect();
        GatheredScores {
            means,
            visible_views: self.counts,
        }
    }
}

/// Per-point mean scores over the views that see each point.
#[derive(Clone, Debug, PartialEq)]
pub struct GatheredScores {
    /// Zero vectors for never-visible points.
    pub means: Vec<ScoreVector>,
    pub visible_views: Vec<u32>,
}

impl GatheredScores {
    pub fn never_visible(&self) -> Vec<u32> {
        (0..self.visible_views.len() as u32)
            .filter(|&i| self.visible_views[i as usize] == 0)
            .collect()
    }
}

pub fn gather_pixel_scores(
    cloud: &LabeledPointCloud,
    views: &[(&RenderedView, &PixelScoreMap)],
    options: &GatherOptions,
) -> Result<GatheredScores> {
    let contributions = par::map_slice(views, |(view, scores)| view_contribution(cloud, view, scores, options));
    let mut acc = ScoreAccumulator::new(cloud.len());
    for c in contributions {
        acc.add(&c?);
    }
    Ok(acc.finish())
}

/// Lowest class index among the maxima; `None` for an all-zero vector.
pub fn argmax_class(s: &ScoreVector) -> Option<u8> {
    if s.iter().all(|&v| v == 0.0) {
        return None;
    }
    let mut best = 0;
    for c in 1..NUM_CLASSES {
        if s[c] > s[best] {
            best = c;
        }
    }
    Some(best as u8)
}

pub fn one_hot_encode(scores: &[ScoreVector]) -> Vec<[f32; NUM_CLASSES]> {
    scores
        .iter()
        .map(|s| {
            let mut h = [0.0; NUM_CLASSES];
            if let Some(c) = argmax_class(s) {
                h[c as usize] = 1.0;
            }
            h
        })
        .collect()
}

/// Point features followed by the one-hot block, one row per point.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedPointFeatures {
    n: usize,
    point_width: usize,
    data: Vec<f32>,
    visibility: Vec<u32>,
}

const POINT_FIELDS: [&str; 6] = ["x", "y", "z", "nx", "ny", "nz"];

#[derive(Debug, Serialize, Deserialize)]
struct FeatureHeader {
    n: usize,
    width: usize,
    dtype: String,
    order: String,
    layout: Vec<String>,
    visibility_dtype: String,
}

pub fn concat_features(
    cloud: &LabeledPointCloud,
    one_hots: &[[f32; NUM_CLASSES]],
    visible_views: &[u32],
) -> Result<FusedPointFeatures> {
    for len in [one_hots.len(), visible_views.len()] {
        if len != cloud.len() {
            return Err(Error::LengthMismatch {
                expected: cloud.len(),
                actual: len,
            });
        }
    }
    let point_width = POINT_FIELDS.len();
    let mut data = Vec::with_capacity(cloud.len() * (point_width + NUM_CLASSES));
    for (f, h) in cloud.geometric_features().iter().zip(one_hots) {
        data.extend(f.iter().map(|&v| v as f32));
        data.extend_from_slice(h);
    }
    Ok(FusedPointFeatures {
        n: cloud.len(),
        point_width,
        data,
        visibility: visible_views.to_vec(),
    })
}

impl FusedPointFeatures {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn width(&self) -> usize {
        self.point_width + NUM_CLASSES
    }

    pub fn row(&self, i: usize) -> &[f32] {
        let w = self.width();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn one_hot(&self, i: usize) -> &[f32] {
        &self.row(i)[self.point_width..]
    }

    pub fn visibility(&self) -> &[u32] {
        &self.visibility
    }

    fn header(&self) -> FeatureHeader {
        let layout = POINT_FIELDS
            .iter()
            .map(|s| s.to_string())
            .chain((0..NUM_CLASSES).map(|c| format!("class_{c}")))
            .collect();
        FeatureHeader {
            n: self.n,
            width: self.width(),
            dtype: "float32".into(),
            order: "row-major".into(),
            layout,
            visibility_dtype: "uint32".into(),
        }
    }

    /// `u64` header length, JSON header, `f32` matrix, `u32` visibility
    /// counts; all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header()).expect("header serializes");
        let mut out = Vec::with_capacity(8 + header.len() + 4 * (self.data.len() + self.n));
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.visibility {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::parse(None, format!("fused features: {m}"));
        let len = u64::from_le_bytes(bytes.get(..8).ok_or_else(|| bad("truncated"))?.try_into().unwrap()) as usize;
        let body = bytes.get(8..8 + len).ok_or_else(|| bad("truncated header"))?;
        let header: FeatureHeader = serde_json::from_slice(body).map_err(|e| bad(&e.to_string()))?;
        if header.dtype != "float32" || header.width != header.layout.len() || header.width < NUM_CLASSES {
            return Err(bad("unsupported header"));
        }
        let rest = &bytes[8 + len..];
        if rest.len() != 4 * header.n * (header.width + 1) {
            return Err(bad("payload size does not match header"));
        }
        let (m, v) = rest.split_at(4 * header.n * header.width);
        Ok(FusedPointFeatures {
            n: header.n,
            point_width: header.width - NUM_CLASSES,
            data: m.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
            visibility: v.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Argmax labels from gathered scores; never-visible points copy their
/// nearest visible neighbour.
pub fn vote_labels(cloud: &LabeledPointCloud, gathered: &GatheredScores) -> Result<Vec<u8>> {
    if gathered.means.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            expected: cloud.len(),
            actual: gathered.means.len(),
        });
    }
    let visible: Vec<u32> = (0..cloud.len() as u32)
        .filter(|&i| gathered.visible_views[i as usize] > 0)
        .collect();
    if visible.is_empty() {
        return Err(Error::NoVisiblePoints);
    }
    let mut labels: Vec<u8> = gathered
        .means
        .iter()
        .map(|s| argmax_class(s).unwrap_or(0))
        .collect();
    if visible.len() < cloud.len() {
        let positions: Vec<_> = visible.iter().map(|&i| cloud.positions()[i as usize]).collect();
        let tree = KdTree::new(&positions);
        for i in gathered.never_visible() {
            let nearest = tree.nearest(&cloud.positions()[i as usize], 1, None)[0].index;
            labels[i as usize] = labels[visible[nearest as usize] as usize];
        }
    }
    Ok(labels)
}

/// Non-learned segmenter: averaged scores, argmax, nearest-visible fill.
pub fn majority_vote_segment(
    cloud: &LabeledPointCloud,
    views: &[(&RenderedView, &PixelScoreMap)],
    options: &GatherOptions,
) -> Result<Vec<u8>> {
    vote_labels(cloud, &gather_pixel_scores(cloud, views, options)?)
}
