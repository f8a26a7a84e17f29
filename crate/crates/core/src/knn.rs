//! Exact nearest-neighbour queries over 3D points with a static kd-tree.
//!
//! Results are ordered by squared distance, ties broken by the smaller point
//! index, so queries are deterministic regardless of input ordering.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::Vec3;

const LEAF_SIZE: usize = 12;

#[derive(Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug)]
pub struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<u32>,
    nodes: Vec<Node>,
}

/// A neighbour: squared distance and point index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub dist2: f64,
    pub index: u32,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let points = self.points;
        let slice = &mut self.order[start..end];
        let (lo, hi) = slice.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), &i| (lo.inf(&points[i as usize]), hi.sup(&points[i as usize])),
        );
        let axis = (hi - lo).imax();
        let mid = slice.len() / 2;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points[a as usize][axis]
                .total_cmp(&points[b as usize][axis])
                .then(a.cmp(&b))
        });
        let value = points[slice[mid] as usize][axis];
        self.nodes.push(Node::Split {
            axis,
            value,
            left: 0,
            right: 0,
        });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[id] {
            *l = left;
            *r = right;
        }
        id
    }

    /// The `k` nearest points to `query`, nearest first. `exclude` removes
    /// one index from consideration (the query point itself).
    pub fn nearest(&self, query: &Vec3, k: usize, exclude: Option<u32>) -> Vec<Neighbor> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut heap: BinaryHeap<Neighbor> = BinaryHeap::with_capacity(k + 1);
        self.search_knn(0, query, k, exclude, &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        out
    }

    fn search_knn(
        &self,
        node: usize,
        query: &Vec3,
        k: usize,
        exclude: Option<u32>,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let cand = Neighbor {
                        dist2: (self.points[i as usize] - query).norm_squared(),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let delta = query[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.search_knn(near, query, k, exclude, heap);
                // equal distance still has to be visited for index tie-breaks
                if heap.len() < k || delta * delta <= heap.peek().unwrap().dist2 {
                    self.search_knn(far, query, k, exclude, heap);
                }
            }
        }
    }

    /// All points with distance at most `radius` from `query`, sorted by
    /// (distance, index).
    pub fn within_radius(&self, query: &Vec3, radius: f64, exclude: Option<u32>) -> Vec<Neighbor> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() && radius >= 0.0 {
            self.search_radius(0, query, radius * radius, exclude, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn search_radius(
        &self,
        node: usize,
        query: &Vec3,
        r2: f64,
        exclude: Option<u32>,
        out: &mut Vec<Neighbor>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let dist2 = (self.points[i as usize] - query).norm_squared();
                    if dist2 <= r2 {
                        out.push(Neighbor { dist2, index: i });
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let delta = query[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.search_radius(near, query, r2, exclude, out);
                if delta * delta <= r2 {
                    self.search_radius(far, query, r2, exclude, out);
                }
            }
        }
    }
}

/// O(N) reference query used to cross-check the tree.
pub fn brute_force_nearest(points: &[Vec3], query: &Vec3, k: usize, exclude: Option<u32>) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = points
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i as u32) != exclude)
        .map(|(i, p)| Neighbor {
            dist2: (p - query).norm_squared(),
            index: i as u32,
        })
        .collect();
    all.sort_unstable();
    all.truncate(k);
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lattice(n: usize) -> Vec<Vec3> {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| Vec3::new(i as f64, j as f64, 0.0)))
            .collect()
    }

    #[test]
    fn ties_broken_by_index() {
        // the four axis neighbours of the center are equidistant
        let pts = lattice(3);
        let got = KdTree::new(&pts).nearest(&pts[4], 4, Some(4));
        let idx: Vec<u32> = got.iter().map(|n| n.index).collect();
        assert_eq!(idx, vec![1, 3, 5, 7]);
    }

    #[test]
    fn radius_query_lattice() {
        let pts = lattice(5);
        let got = KdTree::new(&pts).within_radius(&pts[12], 1.0, Some(12));
        assert_eq!(got.len(), 4);
        let got = KdTree::new(&pts).within_radius(&pts[12], 1.5, None);
        assert_eq!(got.len(), 9);
        assert_eq!(got[0].index, 12);
    }

    #[test]
    fn empty_tree() {
        let tree = KdTree::new(&[]);
        assert!(tree.nearest(&Vec3::zeros(), 3, None).is_empty());
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            coords in prop::collection::vec((-5i32..5, -5i32..5, -5i32..5), 1..120),
            k in 1usize..12,
            q in 0usize..120,
        ) {
            // integer coordinates produce many exact distance ties
            let pts: Vec<Vec3> = coords.iter().map(|&(x, y, z)| Vec3::new(x as f64, y as f64, z as f64)).collect();
            let q = q % pts.len();
            let tree = KdTree::new(&pts);
            let got = tree.nearest(&pts[q], k, Some(q as u32));
            let want = brute_force_nearest(&pts, &pts[q], k, Some(q as u32));
            prop_assert_eq!(got, want);
        }
    }
}
