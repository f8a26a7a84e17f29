//! PCA alignment, the upper-hemisphere camera rig, a software rasterizer and
//! point/pixel correspondence.
//!
//! Camera space: `x` right, `y` up, `z` forward along the optical axis, so
//! depth is positive in front of the camera. Pixel `(u, v)` has `u` growing
//! right and `v` growing down; pixel `(i, j)` covers `[i, i+1) × [j, j+1)`
//! and is sampled at its center.
//!
//! # `.geom` sidecar layout
//!
//! All values little-endian:
//!
//! ```text
//! 8 bytes   magic "DMGEOM01"
//! u32 ×2    width, height
//! f64 ×3    camera position
//! f64 ×3    look-at point
//! f64 ×3    up vector
//! f64 ×3    vertical fov (radians), near, far
//! f64 ×16   world-to-camera matrix, row-major
//! f32 ×W·H  depth plane, row-major, +inf where empty
//! i32 ×W·H  vertex-id plane, row-major, -1 where empty
//! ```

use std::io::Write;
use std::path::Path;

use nalgebra::{Matrix3, Matrix4};
use serde::{Deserialize, Serialize};

use crate::mesh::{area_weighted_normals, compute_vertex_normals, face_cross};
use crate::{par, Error, LabeledPointCloud, Result, TriangleMesh, Vec3};

pub const GEOM_MAGIC: &[u8; 8] = b"DMGEOM01";

/// Vertex id stored for pixels no triangle covers.
pub const NO_VERTEX: i32 = -1;

/// Rotation taking a mesh into its principal frame: `aligned = R (p - c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaAlignment {
    /// Row-major; rows are the principal axes in world coordinates.
    pub rotation: [[f64; 3]; 3],
    pub center: [f64; 3],
    /// Eigenvalues of the vertex covariance, largest first.
    pub variances: [f64; 3],
    /// Set when some principal axes were not determined by the covariance
    /// (repeated or vanishing eigenvalues) and were completed by
    /// Gram-Schmidt from the coordinate axes.
    pub degenerate: bool,
}

impl PcaAlignment {
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.rotation[r][c])
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.matrix() * (p - Vec3::from(self.center))
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        self.matrix().transpose() * p + Vec3::from(self.center)
    }

    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        transform_mesh(mesh, |p| self.apply(p), |n| self.matrix() * n)
    }

    pub fn invert_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        let rt = self.matrix().transpose();
        transform_mesh(mesh, |p| self.invert(p), |n| rt * n)
    }
}

fn transform_mesh(mesh: &TriangleMesh, pos: impl Fn(&Vec3) -> Vec3, dir: impl Fn(&Vec3) -> Vec3) -> TriangleMesh {
    let vertices = mesh.vertices().iter().map(pos).collect();
    let normals = mesh
        .normals()
        .map(|ns| ns.iter().map(|n| dir(n).normalize()).collect());
    TriangleMesh::from_parts_unchecked(
        vertices,
        mesh.triangles().to_vec(),
        normals,
        mesh.labels().map(|l| l.to_vec()),
    )
}

/// Relative eigenvalue gap under which two principal axes count as equal.
const EIGEN_GAP: f64 = 1e-9;

/// Rotates the mesh about its vertex centroid so the largest-variance axis
/// maps to X, the next to Y and the smallest to Z, with Z oriented along
/// the mean surface normal. The centroid lands at the origin.
pub fn pca_align(mesh: &TriangleMesh) -> Result<(TriangleMesh, PcaAlignment)> {
    if mesh.vertex_count() == 0 {
        return Err(Error::InvalidMesh("cannot align an empty mesh".into()));
    }
    let c = mesh.centroid();
    let mut cov = Matrix3::zeros();
    for p in mesh.vertices() {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= mesh.vertex_count() as f64;
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let lambda = order.map(|i| eig.eigenvalues[i].max(0.0));
    let mut axes = order.map(|i| Vec3::from(eig.eigenvectors.column(i)));

    let scale = lambda[0].max(f64::MIN_POSITIVE);
    let same01 = (lambda[0] - lambda[1]) <= EIGEN_GAP * scale;
    let same12 = (lambda[1] - lambda[2]) <= EIGEN_GAP * scale;
    let degenerate = same01 || same12;
    if same01 && same12 {
        axes = [Vec3::x(), Vec3::y(), Vec3::z()];
    } else if same01 {
        // normal direction known, in-plane axes free
        axes[0] = gram_schmidt_from_axes(&[axes[2]]);
        axes[1] = axes[2].cross(&axes[0]);
    } else if same12 {
        axes[1] = gram_schmidt_from_axes(&[axes[0]]);
        axes[2] = axes[0].cross(&axes[1]);
    }

    orient_largest_component_positive(&mut axes[0]);
    let normals_sum: Vec3 = match mesh.normals() {
        Some(ns) => ns.iter().sum(),
        None => area_weighted_normals(mesh.vertices(), mesh.triangles()).iter().sum(),
    };
    let s = normals_sum.dot(&axes[2]);
    if s < 0.0 || (s == 0.0 && !largest_component_positive(&axes[2])) {
        axes[2] = -axes[2];
    }
    axes[1] = axes[2].cross(&axes[0]);

    let alignment = PcaAlignment {
        rotation: axes.map(|a| [a.x, a.y, a.z]),
        center: [c.x, c.y, c.z],
        variances: lambda,
        degenerate,
    };
    if degenerate {
        log::warn!("vertex covariance is degenerate; principal axes completed by Gram-Schmidt");
    }
    Ok((alignment.apply_mesh(mesh), alignment))
}

/// First coordinate axis (in X, Y, Z order) made orthogonal to `fixed`
/// without becoming tiny.
fn gram_schmidt_from_axes(fixed: &[Vec3]) -> Vec3 {
    for e in [Vec3::x(), Vec3::y(), Vec3::z()] {
        let mut v = e;
        for f in fixed {
            v -= f * f.dot(&v);
        }
        if v.norm() > 0.5 {
            return v.normalize();
        }
    }
    unreachable!("one coordinate axis is always far from a single direction")
}

fn largest_component_positive(v: &Vec3) -> bool {
    let i = v.iamax();
    v[i] > 0.0
}

fn orient_largest_component_positive(v: &mut Vec3) {
    if !largest_component_positive(v) {
        *v = -*v;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub up: [f64; 3],
    /// Vertical field of view in radians.
    pub fov_y: f64,
    pub resolution: u32,
    pub near: f64,
    pub far: f64,
}

/// Orthonormal camera frame: right, up, forward.
#[derive(Clone, Copy, Debug)]
struct Frame {
    origin: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
    focal: f64,
    half: f64,
}

impl Camera {
    /// Camera at `position` aimed at `look_at`. `up` is replaced by +X when
    /// it is parallel to the view direction.
    pub fn new(position: Vec3, look_at: Vec3, up: Vec3, fov_y: f64, resolution: u32, near: f64, far: f64) -> Result<Self> {
        let f = look_at - position;
        if !(f.norm() > 0.0) {
            return Err(Error::InvalidConfig("camera position equals its look-at point".into()));
        }
        if !(fov_y > 0.0 && fov_y < std::f64::consts::PI) || resolution == 0 || !(near > 0.0 && far > near) {
            return Err(Error::InvalidConfig("camera needs 0 < fov < 180°, resolution > 0, 0 < near < far".into()));
        }
        let fwd = f.normalize();
        let up = if fwd.cross(&up).norm() < 1e-9 { Vec3::x() } else { up };
        Ok(Camera {
            position: position.into(),
            look_at: look_at.into(),
            up: up.into(),
            fov_y,
            resolution,
            near,
            far,
        })
    }

    fn frame(&self) -> Frame {
        let origin = Vec3::from(self.position);
        let forward = (Vec3::from(self.look_at) - origin).normalize();
        let right = forward.cross(&Vec3::from(self.up)).normalize();
        let up = right.cross(&forward);
        let half = self.resolution as f64 / 2.0;
        Frame {
            origin,
            right,
            up,
            forward,
            focal: half / (self.fov_y / 2.0).tan(),
            half,
        }
    }

    pub fn forward(&self) -> Vec3 {
        self.frame().forward
    }

    /// World-to-camera rigid transform.
    pub fn view_matrix(&self) -> Matrix4<f64> {
        let f = self.frame();
        let t = [-f.right.dot(&f.origin), -f.up.dot(&f.origin), -f.forward.dot(&f.origin)];
        Matrix4::new(
            f.right.x, f.right.y, f.right.z, t[0],
            f.up.x, f.up.y, f.up.z, t[1],
            f.forward.x, f.forward.y, f.forward.z, t[2],
            0.0, 0.0, 0.0, 1.0,
        )
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        let f = self.frame();
        let d = p - f.origin;
        Vec3::new(f.right.dot(&d), f.up.dot(&d), f.forward.dot(&d))
    }

    /// Continuous pixel coordinates and camera depth of a world point.
    pub fn project(&self, p: &Vec3) -> ([f64; 2], f64) {
        let f = self.frame();
        project_with(&f, p)
    }

    /// World point at pixel coordinates `pixel` and camera depth `depth`.
    pub fn unproject(&self, pixel: [f64; 2], depth: f64) -> Vec3 {
        let f = self.frame();
        let xc = (pixel[0] - f.half) * depth / f.focal;
        let yc = -(pixel[1] - f.half) * depth / f.focal;
        f.origin + f.right * xc + f.up * yc + f.forward * depth
    }

    /// Distance from `point` to the optical axis.
    pub fn axis_residual(&self, point: &Vec3) -> f64 {
        let f = self.frame();
        (point - f.origin).cross(&f.forward).norm()
    }
}

fn project_with(f: &Frame, p: &Vec3) -> ([f64; 2], f64) {
    let d = p - f.origin;
    let (xc, yc, zc) = (f.right.dot(&d), f.up.dot(&d), f.forward.dot(&d));
    ([f.half + f.focal * xc / zc, f.half - f.focal * yc / zc], zc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct RigConfig {
    pub n_lat: usize,
    pub n_lon: usize,
    pub fov_deg: f64,
    pub resolution: u32,
    /// Camera distance from the centroid as a multiple of the bbox diagonal.
    pub radius_factor: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        RigConfig {
            n_lat: 6,
            n_lon: 16,
            fov_deg: 40.0,
            resolution: 1024,
            radius_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub cameras: Vec<Camera>,
    pub n_lat: usize,
    pub n_lon: usize,
    pub radius: f64,
    pub center: [f64; 3],
}

impl CameraRig {
    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("rig serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Latitude of ring `i` of `n`: midpoints of `n` equal bands over
/// (0°, 90°), so no camera grazes the mesh plane or sits on the pole.
pub fn ring_latitude(i: usize, n: usize) -> f64 {
    ((i as f64 + 0.5) * 90.0 / n as f64).to_radians()
}

/// `n_lat × n_lon` cameras on the upper hemisphere around the vertex
/// centroid, latitude-major order, all aimed at the centroid.
pub fn build_hemisphere_rig(mesh: &TriangleMesh, config: &RigConfig) -> Result<CameraRig> {
    if config.n_lat == 0 || config.n_lon == 0 {
        return Err(Error::InvalidGrid {
            n_lat: config.n_lat,
            n_lon: config.n_lon,
        });
    }
    let (lo, hi) = mesh
        .bounding_box()
        .ok_or_else(|| Error::InvalidMesh("cannot build a rig around an empty mesh".into()))?;
    let diag = (hi - lo).norm();
    if !(diag > 0.0) {
        return Err(Error::DegenerateMesh("zero bounding-box diagonal"));
    }
    if !(config.radius_factor > 0.5) {
        return Err(Error::InvalidConfig("radius factor must exceed 0.5 so cameras stay outside the mesh".into()));
    }
    let c = mesh.centroid();
    let radius = config.radius_factor * diag;
    let near = (radius - diag).max(radius * 1e-3);
    let far = radius + diag;
    let mut cameras = Vec::with_capacity(config.n_lat * config.n_lon);
    for i in 0..config.n_lat {
        let theta = ring_latitude(i, config.n_lat);
        for j in 0..config.n_lon {
            let phi = (j as f64 * 360.0 / config.n_lon as f64).to_radians();
            let dir = Vec3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), theta.sin());
            cameras.push(Camera::new(
                c + dir * radius,
                c,
                Vec3::z(),
                config.fov_deg.to_radians(),
                config.resolution,
                near,
                far,
            )?);
        }
    }
    Ok(CameraRig {
        cameras,
        n_lat: config.n_lat,
        n_lon: config.n_lon,
        radius,
        center: c.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalLight {
    pub direction: [f64; 3],
    pub color: [f64; 3],
    pub intensity: f64,
}

impl Default for DirectionalLight {
    /// White light straight down, intensity 2.
    fn default() -> Self {
        DirectionalLight {
            direction: [0.0, 0.0, -1.0],
            color: [1.0, 1.0, 1.0],
            intensity: 2.0,
        }
    }
}

impl DirectionalLight {
    pub fn with_intensity(intensity: f64) -> Self {
        DirectionalLight {
            intensity,
            ..Self::default()
        }
    }

    fn shade(&self, n: &Vec3) -> [u8; 3] {
        let l = -Vec3::from(self.direction).normalize();
        let lambert = n.dot(&l).max(0.0);
        self.color
            .map(|c| ((self.intensity * c * lambert).clamp(0.0, 1.0) * 255.0).round() as u8)
    }
}

/// One rendered camera view.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderedView {
    camera: Camera,
    rgb: Vec<u8>,
    depth: Vec<f32>,
    vertex_id: Vec<i32>,
}

impl RenderedView {
    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn resolution(&self) -> usize {
        self.camera.resolution as usize
    }

    /// Row-major RGB8.
    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn depth(&self) -> &[f32] {
        &self.depth
    }

    pub fn vertex_ids(&self) -> &[i32] {
        &self.vertex_id
    }

    pub fn vertex_at(&self, x: usize, y: usize) -> Option<u32> {
        let id = self.vertex_id[y * self.resolution() + x];
        (id != NO_VERTEX).then_some(id as u32)
    }

    pub fn depth_at(&self, x: usize, y: usize) -> f32 {
        self.depth[y * self.resolution() + x]
    }

    pub fn covered_pixels(&self) -> usize {
        self.vertex_id.iter().filter(|&&v| v != NO_VERTEX).count()
    }

    /// Spread of finite depths, 0 for an empty view.
    pub fn depth_range(&self) -> f64 {
        let (lo, hi) = self
            .depth
            .iter()
            .filter(|d| d.is_finite())
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        if hi >= lo {
            (hi - lo) as f64
        } else {
            0.0
        }
    }

    /// View without an image, as read back from a `.geom` sidecar.
    pub fn from_geometry(camera: Camera, depth: Vec<f32>, vertex_id: Vec<i32>) -> Result<Self> {
        let n = camera.resolution as usize * camera.resolution as usize;
        for len in [depth.len(), vertex_id.len()] {
            if len != n {
                return Err(Error::LengthMismatch { expected: n, actual: len });
            }
        }
        if depth
            .iter()
            .zip(&vertex_id)
            .any(|(d, &v)| v != NO_VERTEX && !d.is_finite())
        {
            return Err(Error::parse(None, "covered pixel without finite depth"));
        }
        Ok(RenderedView {
            camera,
            rgb: vec![0; 3 * n],
            depth,
            vertex_id,
        })
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let res = self.camera.resolution;
        let mut encoder = png::Encoder::new(std::io::BufWriter::new(file), res, res);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let to_io = |e: png::EncodingError| Error::io(path, std::io::Error::other(e));
        let mut writer = encoder.write_header().map_err(to_io)?;
        writer.write_image_data(&self.rgb).map_err(to_io)?;
        writer.finish().map_err(to_io)
    }

    pub fn geom_bytes(&self) -> Vec<u8> {
        let n = self.depth.len();
        let mut out = Vec::with_capacity(8 + 8 + 8 * 28 + 8 * n);
        out.extend_from_slice(GEOM_MAGIC);
        out.extend_from_slice(&self.camera.resolution.to_le_bytes());
        out.extend_from_slice(&self.camera.resolution.to_le_bytes());
        let c = &self.camera;
        for v in c.position.iter().chain(&c.look_at).chain(&c.up).chain(&[c.fov_y, c.near, c.far]) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let m = c.view_matrix();
        for r in 0..4 {
            for col in 0..4 {
                out.extend_from_slice(&m[(r, col)].to_le_bytes());
            }
        }
        for d in &self.depth {
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in &self.vertex_id {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn write_geom(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        file.write_all(&self.geom_bytes())
            .and_then(|_| file.flush())
            .map_err(|e| Error::io(path, e))
    }
}

pub fn read_geom(path: &Path) -> Result<RenderedView> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_geom(&bytes)
}

pub fn parse_geom(bytes: &[u8]) -> Result<RenderedView> {
    let header = 8 + 8 + 8 * 12 + 8 * 16;
    if bytes.len() < header || &bytes[..8] != GEOM_MAGIC {
        return Err(Error::parse(None, "not a .geom file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (w, h) = (u32_at(8), u32_at(12));
    if w != h {
        return Err(Error::parse(None, "non-square .geom view"));
    }
    let vals: Vec<f64> = (0..12).map(|i| f64_at(16 + 8 * i)).collect();
    let n = w as usize * h as usize;
    if bytes.len() != header + 8 * n {
        return Err(Error::parse(None, format!(".geom size does not match {w}x{h}")));
    }
    let camera = Camera {
        position: [vals[0], vals[1], vals[2]],
        look_at: [vals[3], vals[4], vals[5]],
        up: [vals[6], vals[7], vals[8]],
        fov_y: vals[9],
        resolution: w,
        near: vals[10],
        far: vals[11],
    };
    let planes = &bytes[header..];
    let depth = planes[..4 * n]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let ids = planes[4 * n..]
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RenderedView::from_geometry(camera, depth, ids)
}

/// Renders one view with a z-buffer, back-face culling and Lambert shading.
/// Uses the mesh normals when present, area-weighted normals otherwise.
pub fn rasterize_view(mesh: &TriangleMesh, camera: &Camera, light: &DirectionalLight) -> RenderedView {
    let computed;
    let normals: &[Vec3] = match mesh.normals() {
        Some(ns) => ns,
        None => {
            computed = compute_vertex_normals(mesh).0;
            computed.normals().unwrap()
        }
    };
    let res = camera.resolution as usize;
    let frame = camera.frame();
    let mut depth = vec![f32::INFINITY; res * res];
    let mut zbuf = vec![f64::INFINITY; res * res];
    let mut ids = vec![NO_VERTEX; res * res];
    let mut rgb = vec![0u8; res * res * 3];

    let projected: Vec<([f64; 2], f64)> = mesh.vertices().iter().map(|p| project_with(&frame, p)).collect();
    let verts = mesh.vertices();

    for (t, tri) in mesh.triangles().iter().enumerate() {
        let corners = mesh.corners(t);
        let n = face_cross(&corners);
        if n.dot(&(frame.origin - corners[0])) <= 0.0 {
            continue;
        }
        let pr = tri.map(|i| projected[i as usize]);
        if pr.iter().any(|&(_, z)| !(z >= camera.near && z <= camera.far)) {
            continue;
        }
        let s = pr.map(|(xy, _)| xy);
        let area = edge(&s[0], &s[1], &s[2]);
        if !(area.abs() > 0.0) {
            continue;
        }
        let min_x = s.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        if max_x < 0.0 || max_y < 0.0 || min_x >= res as f64 || min_y >= res as f64 {
            continue;
        }
        let x0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let x1 = ((max_x - 0.5).floor().min(res as f64 - 1.0)).max(-1.0);
        let y0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let y1 = ((max_y - 0.5).floor().min(res as f64 - 1.0)).max(-1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        let inv_z = pr.map(|(_, z)| 1.0 / z);
        let top_left = [0, 1, 2].map(|k| is_top_left(&s[(k + 1) % 3], &s[(k + 2) % 3], area > 0.0));
        for py in y0..=y1 {
            for px in x0..=x1 {
                let p = [px as f64 + 0.5, py as f64 + 0.5];
                // barycentric weight of corner k from the edge opposite it
                let w = [edge(&s[1], &s[2], &p), edge(&s[2], &s[0], &p), edge(&s[0], &s[1], &p)];
                let inside = (0..3).all(|k| {
                    let v = w[k] * area.signum();
                    v > 0.0 || (v == 0.0 && top_left[k])
                });
                if !inside {
                    continue;
                }
                let b = w.map(|x| x / area);
                let iz = b[0] * inv_z[0] + b[1] * inv_z[1] + b[2] * inv_z[2];
                let z = 1.0 / iz;
                let idx = py * res + px;
                if !(z < zbuf[idx]) {
                    continue;
                }
                // perspective-correct barycentrics
                let pc = [0, 1, 2].map(|k| b[k] * inv_z[k] * z);
                let surface = corners[0] * pc[0] + corners[1] * pc[1] + corners[2] * pc[2];
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for k in 0..3 {
                    let d = (verts[tri[k] as usize] - surface).norm_squared();
                    if d < best_d || (d == best_d && tri[k] < tri[best]) {
                        best = k;
                        best_d = d;
                    }
                }
                let normal = normals[tri[0] as usize] * pc[0]
                    + normals[tri[1] as usize] * pc[1]
                    + normals[tri[2] as usize] * pc[2];
                let normal = if normal.norm() > 0.0 { normal.normalize() } else { n.normalize() };
                zbuf[idx] = z;
                depth[idx] = z as f32;
                ids[idx] = tri[best] as i32;
                rgb[3 * idx..3 * idx + 3].copy_from_slice(&light.shade(&normal));
            }
        }
    }
    RenderedView {
        camera: camera.clone(),
        rgb,
        depth,
        vertex_id: ids,
    }
}

fn edge(a: &[f64; 2], b: &[f64; 2], p: &[f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Top-left fill rule so pixels on a shared edge belong to exactly one
/// triangle. Orientation-aware because screen winding depends on the view.
fn is_top_left(a: &[f64; 2], b: &[f64; 2], positive: bool) -> bool {
    let (dx, dy) = if positive { (b[0] - a[0], b[1] - a[1]) } else { (a[0] - b[0], a[1] - b[1]) };
    // y grows downward: with positive area the loop runs clockwise on screen
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

/// Renders every camera of the rig, in rig order.
pub fn render_rig(mesh: &TriangleMesh, rig: &CameraRig, light: &DirectionalLight) -> Vec<RenderedView> {
    par::map_slice(&rig.cameras, |cam| rasterize_view(mesh, cam, light))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointProjection {
    pub index: u32,
    /// Continuous pixel coordinates.
    pub pixel: [f64; 2],
    /// Camera-space depth of the point.
    pub depth: f64,
    pub visible: bool,
}

impl PointProjection {
    /// Integer pixel containing the projection, if inside the viewport.
    pub fn pixel_index(&self, resolution: usize) -> Option<(usize, usize)> {
        let [u, v] = self.pixel;
        let r = resolution as f64;
        (u >= 0.0 && v >= 0.0 && u < r && v < r).then_some((u as usize, v as usize))
    }
}

/// Default visibility tolerance for a view: 1e-3 of its depth range.
pub fn default_depth_epsilon(view: &RenderedView) -> f64 {
    1e-3 * view.depth_range()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct ProjectOptions {
    /// Depth tolerance; `None` uses [`default_depth_epsilon`].
    pub depth_epsilon: Option<f64>,
    /// Treat point `i` as mesh vertex `i`: it is also visible when the
    /// vertex-id buffer shows it within one pixel of its projection. Keeps
    /// vertices on steeply inclined surfaces visible, where the depth at the
    /// pixel center differs from the vertex depth by more than the
    /// tolerance.
    pub match_vertex_ids: bool,
}

impl Default for ProjectOptions {
    fn default() -> Self {
        ProjectOptions {
            depth_epsilon: None,
            match_vertex_ids: true,
        }
    }
}

/// [`project_points_with`] for a cloud whose points are the rendered
/// mesh's vertices.
pub fn project_points(cloud: &LabeledPointCloud, view: &RenderedView, depth_epsilon: Option<f64>) -> Vec<PointProjection> {
    project_points_with(
        cloud,
        view,
        &ProjectOptions {
            depth_epsilon,
            ..Default::default()
        },
    )
}

/// Projects every point into the view. A point in front of the camera and
/// inside the viewport is visible unless its pixel holds a surface nearer
/// than the point's depth minus the tolerance. Uncovered pixels occlude
/// nothing, which keeps silhouette vertices visible.
pub fn project_points_with(cloud: &LabeledPointCloud, view: &RenderedView, options: &ProjectOptions) -> Vec<PointProjection> {
    let eps = options.depth_epsilon.unwrap_or_else(|| default_depth_epsilon(view));
    warn_on_frame_mismatch(cloud, view);
    let frame = view.camera.frame();
    let res = view.resolution();
    cloud
        .positions()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (pixel, depth) = project_with(&frame, p);
            let mut proj = PointProjection {
                index: i as u32,
                pixel,
                depth,
                visible: false,
            };
            if depth > 0.0 {
                if let Some((x, y)) = proj.pixel_index(res) {
                    let idx = y * res + x;
                    proj.visible = view.vertex_id[idx] == NO_VERTEX
                        || depth <= view.depth[idx] as f64 + eps
                        || options.match_vertex_ids && shows_vertex_near(view, x, y, i as i32);
                }
            }
            proj
        })
        .collect()
}

fn shows_vertex_near(view: &RenderedView, x: usize, y: usize, id: i32) -> bool {
    let res = view.resolution();
    (y.saturating_sub(1)..=(y + 1).min(res - 1))
        .any(|yy| (x.saturating_sub(1)..=(x + 1).min(res - 1)).any(|xx| view.vertex_id[yy * res + xx] == id))
}

fn warn_on_frame_mismatch(cloud: &LabeledPointCloud, view: &RenderedView) {
    let cam = &view.camera;
    let (lo, hi) = cloud.bounding_box();
    let reach = (Vec3::from(cam.position) - Vec3::from(cam.look_at)).norm();
    let center = (lo + hi) / 2.0;
    if (center - Vec3::from(cam.look_at)).norm() > reach {
        log::warn!("point cloud bounding box is far from the camera target; frames may differ");
    }
}

/// Inverse of the projection using the stored point depth.
pub fn unproject(view: &RenderedView, projection: &PointProjection) -> Vec3 {
    view.camera.unproject(projection.pixel, projection.depth)
}
