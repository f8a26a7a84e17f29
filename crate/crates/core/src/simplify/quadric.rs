use nalgebra::{Matrix3, Matrix4};

use crate::mesh::face_cross;
use crate::{TriangleMesh, Vec3};

/// Determinant magnitude (after scaling the 3×3 block to unit max entry)
/// below which the optimal-position system is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// Symmetric 4×4 error quadric stored as its upper triangle:
/// `[aa, ab, ac, ad, bb, bc, bd, cc, cd, dd]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Quadric([f64; 10]);

impl Quadric {
    pub fn zero() -> Self {
        Quadric([0.0; 10])
    }

    /// `p pᵀ` for the plane `a x + b y + c z + d = 0`.
    pub fn from_plane(a: f64, b: f64, c: f64, d: f64) -> Self {
        Quadric([
            a * a, a * b, a * c, a * d,
            b * b, b * c, b * d,
            c * c, c * d,
            d * d,
        ])
    }

    /// Quadric of the plane through a triangle; zero for degenerate triangles.
    pub fn from_triangle(corners: &[Vec3; 3]) -> Self {
        let n = face_cross(corners);
        let len = n.norm();
        if !(len > 0.0) {
            return Quadric::zero();
        }
        let n = n / len;
        Quadric::from_plane(n.x, n.y, n.z, -n.dot(&corners[0]))
    }

    pub fn coefficients(&self) -> &[f64; 10] {
        &self.0
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        let q = &self.0;
        Matrix4::new(
            q[0], q[1], q[2], q[3],
            q[1], q[4], q[5], q[6],
            q[2], q[5], q[7], q[8],
            q[3], q[6], q[8], q[9],
        )
    }

    /// `[v 1] Q [v 1]ᵀ`.
    pub fn evaluate(&self, v: &Vec3) -> f64 {
        let q = &self.0;
        let (x, y, z) = (v.x, v.y, v.z);
        q[0] * x * x + 2.0 * q[1] * x * y + 2.0 * q[2] * x * z + 2.0 * q[3] * x
            + q[4] * y * y + 2.0 * q[5] * y * z + 2.0 * q[6] * y
            + q[7] * z * z + 2.0 * q[8] * z
            + q[9]
    }

    /// Minimizer of the quadric, `None` when the 3×3 block is singular.
    pub fn minimizer(&self) -> Option<Vec3> {
        let q = &self.0;
        let a = Matrix3::new(q[0], q[1], q[2], q[1], q[4], q[5], q[2], q[5], q[7]);
        let scale = a.amax();
        if !(scale > 0.0) || (a / scale).determinant().abs() < SINGULAR_DET {
            return None;
        }
        let b = Vec3::new(-q[3], -q[6], -q[8]);
        a.lu().solve(&b).filter(|x| x.iter().all(|c| c.is_finite()))
    }
}

impl std::ops::Add for Quadric {
    type Output = Quadric;

    fn add(self, rhs: Quadric) -> Quadric {
        Quadric(std::array::from_fn(|i| self.0[i] + rhs.0[i]))
    }
}

impl std::ops::AddAssign for Quadric {
    fn add_assign(&mut self, rhs: Quadric) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

/// Per-vertex sum of the plane quadrics of incident triangles.
pub fn compute_quadrics(mesh: &TriangleMesh) -> Vec<Quadric> {
    let mut out = vec![Quadric::zero(); mesh.vertex_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let q = Quadric::from_triangle(&mesh.corners(t));
        for &v in tri {
            out[v as usize] += q;
        }
    }
    out
}

/// Position minimizing `v̄ᵀ(Q1 + Q2)v̄` and its cost.
///
/// When the system is singular the best of `v1`, `v2` and their midpoint is
/// used (first in that order on ties). The cost is clamped at zero.
pub fn optimal_contraction_target(q1: &Quadric, q2: &Quadric, v1: &Vec3, v2: &Vec3) -> (Vec3, f64) {
    let q = *q1 + *q2;
    let target = q.minimizer().unwrap_or_else(|| {
        let candidates = [*v1, *v2, (v1 + v2) * 0.5];
        let mut best = candidates[0];
        let mut best_cost = q.evaluate(&best);
        for c in &candidates[1..] {
            let cost = q.evaluate(c);
            if cost < best_cost {
                best = *c;
                best_cost = cost;
            }
        }
        best
    });
    (target, q.evaluate(&target).max(0.0))
}
