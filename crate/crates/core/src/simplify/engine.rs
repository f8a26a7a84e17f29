use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::quadric::{compute_quadrics, optimal_contraction_target, Quadric};
use super::{coefficient_for, SimplifyConfig, TargetKind};
use crate::curvature::mean_curvature_of;
use crate::knn::KdTree;
use crate::mesh::{compute_vertex_normals, edge_key, face_cross};
use crate::{Error, Result, TriangleMesh, Vec3};

/// Relative area below which a collapsed triangle counts as degenerate.
const MIN_AREA_RATIO: f64 = 1e-10;

/// Counters from one simplification run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SimplifyReport {
    pub collapses: usize,
    /// Candidates popped with current versions but refused by the topology
    /// or flip checks.
    pub rejected: usize,
    pub refreshes: usize,
    /// Passes re-queuing refused candidates after the heap ran dry.
    pub retries: usize,
    /// Weighted cost of every executed collapse, in execution order.
    pub executed_costs: Vec<f64>,
    pub output_vertices: usize,
    pub output_triangles: usize,
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    weighted: f64,
    base: f64,
    len2: f64,
    v1: u32,
    v2: u32,
    ver1: u32,
    ver2: u32,
    target: Vec3,
}

impl Candidate {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.weighted
            .total_cmp(&other.weighted)
            .then(self.len2.total_cmp(&other.len2))
            .then(self.v1.cmp(&other.v1))
            .then(self.v2.cmp(&other.v2))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// reversed: BinaryHeap is a max-heap
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

struct State {
    pos: Vec<Vec3>,
    quadrics: Vec<Quadric>,
    alive: Vec<bool>,
    version: Vec<u32>,
    labels: Option<Vec<u8>>,
    curvature: Vec<f64>,
    tris: Vec<[u32; 3]>,
    tri_alive: Vec<bool>,
    vert_tris: Vec<Vec<u32>>,
    /// Extra pairs that share no edge (only with `allow_nonedge_pairs`).
    partners: Vec<Vec<u32>>,
    live_vertices: usize,
    live_triangles: usize,
    k_neg: f64,
    k_pos: f64,
}

impl State {
    fn new(mesh: &TriangleMesh, config: &SimplifyConfig, selective: bool) -> Self {
        let n = mesh.vertex_count();
        let mut quadrics = compute_quadrics(mesh);
        add_boundary_quadrics(mesh, &mut quadrics);
        let curvature = if selective {
            mean_curvature_of(mesh.vertices(), mesh.triangles(), mesh.normals())
                .values()
                .to_vec()
        } else {
            vec![0.0; n]
        };
        let mut partners = vec![Vec::new(); n];
        if config.allow_nonedge_pairs {
            let tree = KdTree::new(mesh.vertices());
            let edges = mesh.edge_triangle_counts();
            for (i, p) in mesh.vertices().iter().enumerate() {
                for nb in tree.within_radius(p, config.pair_distance, Some(i as u32)) {
                    let j = nb.index;
                    if (i as u32) < j && !edges.contains_key(&(i as u32, j)) {
                        partners[i].push(j);
                        partners[j as usize].push(i as u32);
                    }
                }
            }
        }
        State {
            pos: mesh.vertices().to_vec(),
            quadrics,
            alive: vec![true; n],
            version: vec![0; n],
            labels: mesh.labels().map(|l| l.to_vec()),
            curvature,
            tris: mesh.triangles().to_vec(),
            tri_alive: vec![true; mesh.triangle_count()],
            vert_tris: mesh.vertex_triangles(),
            partners,
            live_vertices: n,
            live_triangles: mesh.triangle_count(),
            k_neg: config.k_neg,
            k_pos: config.k_pos,
        }
    }

    fn candidate(&self, a: u32, b: u32) -> Candidate {
        let (v1, v2) = if a < b { (a, b) } else { (b, a) };
        let (i, j) = (v1 as usize, v2 as usize);
        let (target, base) =
            optimal_contraction_target(&self.quadrics[i], &self.quadrics[j], &self.pos[i], &self.pos[j]);
        let k = coefficient_for(self.curvature[i], self.curvature[j], self.k_neg, self.k_pos);
        Candidate {
            weighted: base * k,
            base,
            len2: (self.pos[i] - self.pos[j]).norm_squared(),
            v1,
            v2,
            ver1: self.version[i],
            ver2: self.version[j],
            target,
        }
    }

    fn is_current(&self, c: &Candidate) -> bool {
        let (i, j) = (c.v1 as usize, c.v2 as usize);
        self.alive[i] && self.alive[j] && self.version[i] == c.ver1 && self.version[j] == c.ver2
    }

    fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut out: Vec<u32> = self.vert_tris[v as usize]
            .iter()
            .flat_map(|&t| self.tris[t as usize])
            .filter(|&u| u != v)
            .collect();
        out.extend(self.partners[v as usize].iter().copied().filter(|&u| self.alive[u as usize]));
        out.sort_unstable();
        out.dedup();
        out
    }

    fn shares_edge(&self, v1: u32, v2: u32) -> bool {
        self.vert_tris[v1 as usize]
            .iter()
            .any(|&t| self.tris[t as usize].contains(&v2))
    }

    /// Whether contracting `v2` into `v1` at `target` keeps the surface
    /// manifold, orphans no vertex and flips no triangle.
    fn collapse_is_valid(&self, v1: u32, v2: u32, target: &Vec3) -> bool {
        let is_edge = self.shares_edge(v1, v2);
        let mut link: Vec<(u32, u32)> = Vec::new();
        for &v in &[v1, v2] {
            for &t in &self.vert_tris[v as usize] {
                let tri = self.tris[t as usize];
                if tri.contains(&v1) && tri.contains(&v2) {
                    if v == v1 {
                        let w = tri.iter().copied().find(|&u| u != v1 && u != v2).unwrap();
                        let orphaned = self.vert_tris[w as usize].iter().all(|&s| {
                            let st = self.tris[s as usize];
                            st.contains(&v1) && st.contains(&v2)
                        });
                        if orphaned {
                            return false;
                        }
                    }
                    continue;
                }
                let old = tri.map(|i| self.pos[i as usize]);
                let new = tri.map(|i| if i == v1 || i == v2 { *target } else { self.pos[i as usize] });
                let n_old = face_cross(&old);
                let n_new = face_cross(&new);
                let len_old = n_old.norm();
                if n_new.norm() <= MIN_AREA_RATIO * len_old || (len_old > 0.0 && n_old.dot(&n_new) <= 0.0) {
                    return false;
                }
                let mut others = tri.iter().copied().filter(|&u| u != v);
                let (a, b) = (others.next().unwrap(), others.next().unwrap());
                link.push(edge_key(a, b));
            }
        }
        link_is_manifold(&mut link, is_edge)
    }

    fn collapse(&mut self, c: &Candidate) {
        let (v1, v2) = (c.v1, c.v2);
        let (i, j) = (v1 as usize, v2 as usize);
        let v2_tris = std::mem::take(&mut self.vert_tris[j]);
        for t in v2_tris {
            let tri = self.tris[t as usize];
            if tri.contains(&v1) {
                self.tri_alive[t as usize] = false;
                self.live_triangles -= 1;
                for &u in &tri {
                    if u != v2 {
                        self.vert_tris[u as usize].retain(|&s| s != t);
                    }
                }
            } else {
                for u in self.tris[t as usize].iter_mut() {
                    if *u == v2 {
                        *u = v1;
                    }
                }
                self.vert_tris[i].push(t);
            }
        }
        if let Some(labels) = self.labels.as_mut() {
            let d1 = (self.pos[i] - c.target).norm_squared();
            let d2 = (self.pos[j] - c.target).norm_squared();
            if d2 < d1 {
                labels[i] = labels[j];
            }
        }
        let moved = std::mem::take(&mut self.partners[j]);
        for u in moved {
            if u != v1 && !self.partners[i].contains(&u) {
                self.partners[i].push(u);
            }
        }
        self.partners[i].retain(|&u| u != v2);
        let q2 = self.quadrics[j];
        self.quadrics[i] += q2;
        self.pos[i] = c.target;
        self.curvature[i] = (self.curvature[i] + self.curvature[j]) / 2.0;
        self.alive[j] = false;
        self.version[i] += 1;
        self.version[j] += 1;
        self.live_vertices -= 1;
    }

    fn refresh_curvature(&mut self) {
        let live: Vec<[u32; 3]> = self
            .tris
            .iter()
            .zip(&self.tri_alive)
            .filter(|(_, &a)| a)
            .map(|(t, _)| *t)
            .collect();
        self.curvature = mean_curvature_of(&self.pos, &live, None).values().to_vec();
    }

    fn reached(&self, target: usize, kind: TargetKind) -> bool {
        match kind {
            TargetKind::Vertices => self.live_vertices <= target,
            TargetKind::Triangles => self.live_triangles <= target,
        }
    }

    fn into_mesh(self) -> Result<TriangleMesh> {
        let mut remap = vec![u32::MAX; self.pos.len()];
        let mut vertices = Vec::with_capacity(self.live_vertices);
        let mut labels = self.labels.as_ref().map(|_| Vec::with_capacity(self.live_vertices));
        for (v, p) in self.pos.iter().enumerate() {
            if self.alive[v] {
                remap[v] = vertices.len() as u32;
                vertices.push(*p);
                if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                    out.push(src[v]);
                }
            }
        }
        let triangles: Vec<[u32; 3]> = self
            .tris
            .iter()
            .zip(&self.tri_alive)
            .filter(|(_, &a)| a)
            .map(|(t, _)| t.map(|i| remap[i as usize]))
            .collect();
        let mut mesh = TriangleMesh::new(vertices, triangles)?;
        if let Some(labels) = labels {
            mesh = mesh.with_labels(labels)?;
        }
        Ok(compute_vertex_normals(&mesh).0)
    }
}

/// Planes perpendicular to the face through every open edge, so boundary
/// vertices resist sliding inward.
fn add_boundary_quadrics(mesh: &TriangleMesh, quadrics: &mut [Quadric]) {
    let counts = mesh.edge_triangle_counts();
    let v = mesh.vertices();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let n = face_cross(&mesh.corners(t));
        if !(n.norm() > 0.0) {
            continue;
        }
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if counts[&edge_key(a, b)] != 1 {
                continue;
            }
            let e = v[b as usize] - v[a as usize];
            let p = e.cross(&n);
            let len = p.norm();
            if !(len > 0.0) {
                continue;
            }
            let p = p / len;
            let q = Quadric::from_plane(p.x, p.y, p.z, -p.dot(&v[a as usize]));
            quadrics[a as usize] += q;
            quadrics[b as usize] += q;
        }
    }
}

/// The opposite edges around the merged vertex must form one path or one
/// cycle (edge pairs) or a set of disjoint paths and cycles (non-edge
/// pairs), with no edge repeated.
fn link_is_manifold(link: &mut [(u32, u32)], connected: bool) -> bool {
    if link.is_empty() {
        return true;
    }
    link.sort_unstable();
    if link.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    let mut verts: Vec<u32> = link.iter().flat_map(|&(a, b)| [a, b]).collect();
    verts.sort_unstable();
    let mut degree: Vec<(u32, u32)> = Vec::with_capacity(verts.len());
    for v in verts {
        match degree.last_mut() {
            Some((u, d)) if *u == v => *d += 1,
            _ => degree.push((v, 1)),
        }
    }
    if degree.iter().any(|&(_, d)| d > 2) {
        return false;
    }
    if !connected {
        return true;
    }
    let ends = degree.iter().filter(|&&(_, d)| d == 1).count();
    if ends != 0 && ends != 2 {
        return false;
    }
    // every vertex has degree <= 2, so the link is one component iff
    // edges = vertices - 1 (path) or edges = vertices (cycle)
    let nv = degree.len();
    let ne = link.len();
    let index = |v: u32| degree.binary_search_by_key(&v, |&(u, _)| u).unwrap();
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = nv;
    for &(a, b) in link.iter() {
        let (ra, rb) = (find(&mut parent, index(a)), find(&mut parent, index(b)));
        if ra != rb {
            parent[ra] = rb;
            components -= 1;
        }
    }
    components == 1 && (ne == nv - 1 || (ne == nv && nv >= 3))
}

pub(super) fn run(mesh: &TriangleMesh, config: &SimplifyConfig, selective: bool) -> Result<(TriangleMesh, SimplifyReport)> {
    let already = match config.target_kind {
        TargetKind::Vertices => mesh.vertex_count() <= config.target,
        TargetKind::Triangles => mesh.triangle_count() <= config.target,
    };
    if already {
        let report = SimplifyReport {
            output_vertices: mesh.vertex_count(),
            output_triangles: mesh.triangle_count(),
            ..SimplifyReport::default()
        };
        return Ok((mesh.clone(), report));
    }

    let mut state = State::new(mesh, config, selective);
    let interval = config.effective_refresh_interval(mesh.vertex_count());
    let mut report = SimplifyReport::default();

    let mut heap: BinaryHeap<Candidate> = BinaryHeap::new();
    for (a, b) in mesh.edges() {
        heap.push(state.candidate(a, b));
    }
    for (a, nbrs) in state.partners.iter().enumerate() {
        for &b in nbrs {
            if (a as u32) < b {
                heap.push(state.candidate(a as u32, b));
            }
        }
    }

    let mut deferred: Vec<Candidate> = Vec::new();
    let mut since_refresh = 0usize;
    let mut since_retry = 0usize;

    while !state.reached(config.target, config.target_kind) {
        let Some(c) = heap.pop() else {
            if since_retry == 0 {
                return Err(Error::TargetUnreachable {
                    target: config.target,
                    reached: match config.target_kind {
                        TargetKind::Vertices => state.live_vertices,
                        TargetKind::Triangles => state.live_triangles,
                    },
                });
            }
            since_retry = 0;
            report.retries += 1;
            heap.extend(deferred.drain(..).filter(|c| state.is_current(c)));
            continue;
        };
        if !state.is_current(&c) {
            continue;
        }
        if !state.collapse_is_valid(c.v1, c.v2, &c.target) {
            report.rejected += 1;
            deferred.push(c);
            continue;
        }
        state.collapse(&c);
        report.collapses += 1;
        report.executed_costs.push(c.weighted);
        since_retry += 1;
        for n in state.neighbors(c.v1) {
            heap.push(state.candidate(c.v1, n));
        }

        since_refresh += 1;
        if selective && since_refresh >= interval && !state.reached(config.target, config.target_kind) {
            since_refresh = 0;
            state.refresh_curvature();
            report.refreshes += 1;
            let entries = std::mem::take(&mut heap).into_vec();
            heap = entries
                .into_iter()
                .filter(|c| state.is_current(c))
                .map(|c| {
                    let (i, j) = (c.v1 as usize, c.v2 as usize);
                    let k = coefficient_for(state.curvature[i], state.curvature[j], state.k_neg, state.k_pos);
                    Candidate { weighted: c.base * k, ..c }
                })
                .collect();
        }
    }

    let out = state.into_mesh()?;
    report.output_vertices = out.vertex_count();
    report.output_triangles = out.triangle_count();
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_shapes() {
        assert!(link_is_manifold(&mut vec![(1, 2), (2, 3), (3, 1)], true));
        assert!(link_is_manifold(&mut vec![(1, 2), (2, 3)], true));
        // two disjoint paths: pinched vertex
        assert!(!link_is_manifold(&mut vec![(1, 2), (3, 4)], true));
        assert!(link_is_manifold(&mut vec![(1, 2), (3, 4)], false));
        // repeated edge: duplicate triangles
        assert!(!link_is_manifold(&mut vec![(1, 2), (1, 2)], true));
        // three triangles on one edge
        assert!(!link_is_manifold(&mut vec![(1, 2), (1, 3), (1, 4)], true));
        // path plus cycle
        assert!(!link_is_manifold(&mut vec![(1, 2), (2, 3), (3, 1), (5, 6)], true));
    }

    #[test]
    fn tetrahedron_cannot_collapse() {
        let m = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()],
            vec![[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]],
        )
        .unwrap();
        let err = run(&m, &SimplifyConfig::qem(3), false).unwrap_err();
        assert!(matches!(err, Error::TargetUnreachable { .. }));
    }
}
