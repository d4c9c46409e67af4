use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::{PointCloud, Vec3};
use crate::error::{Error, Result};

/// Exact k-nearest-neighbor graph. Row `i` lists the `k` points closest to
/// point `i` (itself excluded), ascending by distance, ties by lower index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    k: usize,
    neighbors: Vec<usize>,
}

impl KnnGraph {
    /// Wrap precomputed neighbor rows, checking the graph invariants.
    pub fn from_rows(k: usize, n_points: usize, neighbors: Vec<usize>) -> Result<Self> {
        if k == 0 || k >= n_points {
            return Err(Error::InvalidArgument(format!(
                "k must satisfy 1 <= k < N (k = {k}, N = {n_points})"
            )));
        }
        if neighbors.len() != k * n_points {
            return Err(Error::ShapeMismatch {
                expected: format!("{} neighbor indices", k * n_points),
                actual: format!("{}", neighbors.len()),
            });
        }
        for (i, row) in neighbors.chunks(k).enumerate() {
            for (a, &j) in row.iter().enumerate() {
                if j >= n_points || j == i || row[..a].contains(&j) {
                    return Err(Error::InvalidInput(format!(
                        "invalid neighbor {j} in row {i}"
                    )));
                }
            }
        }
        Ok(Self { k, neighbors })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.neighbors.len() / self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.neighbors.chunks(self.k)
    }
}

/// Build the exact k-nn graph with a kd-tree.
pub fn build_knn_graph(cloud: &PointCloud, k: usize) -> Result<KnnGraph> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 1 <= k < N (k = {k}, N = {n})"
        )));
    }
    let points = cloud.positions();
    let tree = KdTree::new(points);
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| tree.nearest(&points[i], k, i))
        .collect();
    Ok(KnnGraph {
        k,
        neighbors: rows.concat(),
    })
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    fn new(points: &'a [Vec3]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        tree.build(0, points.len());
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let slice = &mut self.order[start..end];
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for &i in slice.iter() {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = slice.len() / 2;
        let points = self.points;
        slice.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = points[slice[mid]][axis];
        // placeholder, patched once both children exist
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, start + mid);
        let right = self.build(start + mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn nearest(&self, query: &Vec3, k: usize, exclude: usize) -> Vec<usize> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(0, query, k, exclude, &mut heap);
        heap.into_sorted_vec().into_iter().map(|c| c.index).collect()
    }

    fn search(
        &self,
        node: usize,
        query: &Vec3,
        k: usize,
        exclude: usize,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &index in &self.order[start..end] {
                    if index == exclude {
                        continue;
                    }
                    let cand = Candidate {
                        dist2: (self.points[index] - query).norm_squared(),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, k, exclude, heap);
                // `<=` keeps equal-distance candidates with lower indices reachable
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.search(far, query, k, exclude, heap);
                }
            }
        }
    }
}
