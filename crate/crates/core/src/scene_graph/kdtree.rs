//! Small k-d tree over node centroids.
//!
//! Queries must return exactly what a linear scan would return, including the
//! lowest-id winner on exact distance ties, so the traversal keeps a
//! (distance², id) pair as the comparison key and descends into the far half
//! whenever the splitting plane is within (or at) the best distance.

use nalgebra::Vector3;

use super::NodeId;

#[derive(Debug, Clone)]
struct Entry {
    point: Vector3<f64>,
    id: NodeId,
}

#[derive(Debug, Clone)]
struct TreeNode {
    entry: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

/// Static 3D index; rebuild it after centroids change.
#[derive(Debug, Clone, Default)]
pub struct KdTree {
    entries: Vec<Entry>,
    nodes: Vec<TreeNode>,
    root: Option<usize>,
}

impl KdTree {
    pub fn build(points: impl IntoIterator<Item = (NodeId, Vector3<f64>)>) -> Self {
        let entries: Vec<Entry> = points
            .into_iter()
            .map(|(id, point)| Entry { point, id })
            .collect();
        let mut order: Vec<usize> = (0..entries.len()).collect();
        let mut tree = KdTree {
            entries,
            nodes: Vec::new(),
            root: None,
        };
        tree.root = tree.build_recursive(&mut order, 0);
        tree
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn build_recursive(&mut self, order: &mut [usize], depth: usize) -> Option<usize> {
        if order.is_empty() {
            return None;
        }
        let axis = depth % 3;
        order.sort_by(|&a, &b| {
            let pa = self.entries[a].point[axis];
            let pb = self.entries[b].point[axis];
            pa.partial_cmp(&pb)
                .unwrap()
                .then(self.entries[a].id.cmp(&self.entries[b].id))
        });
        let mid = order.len() / 2;
        let entry = order[mid];
        let (left_ids, rest) = order.split_at_mut(mid);
        let right_ids = &mut rest[1..];
        let left = self.build_recursive(left_ids, depth + 1);
        let right = self.build_recursive(right_ids, depth + 1);
        let idx = self.nodes.len();
        self.nodes.push(TreeNode {
            entry,
            axis,
            left,
            right,
        });
        Some(idx)
    }

    /// Closest accepted point to `query`; ties go to the lowest id.
    ///
    /// `exclude` drops one id from consideration, `accept` filters candidates.
    /// Returns the winning id and its Euclidean distance.
    pub fn nearest(
        &self,
        query: &Vector3<f64>,
        exclude: Option<NodeId>,
        accept: &dyn Fn(NodeId) -> bool,
    ) -> Option<(NodeId, f64)> {
        let mut best: Option<(f64, NodeId)> = None;
        if let Some(root) = self.root {
            self.search(root, query, exclude, accept, &mut best);
        }
        best.map(|(d2, id)| (id, d2.sqrt()))
    }

    fn search(
        &self,
        node_idx: usize,
        query: &Vector3<f64>,
        exclude: Option<NodeId>,
        accept: &dyn Fn(NodeId) -> bool,
        best: &mut Option<(f64, NodeId)>,
    ) {
        let node = &self.nodes[node_idx];
        let entry = &self.entries[node.entry];
        if Some(entry.id) != exclude && accept(entry.id) {
            let d2 = (entry.point - query).norm_squared();
            let better = match best {
                None => true,
                Some((bd2, bid)) => d2 < *bd2 || (d2 == *bd2 && entry.id < *bid),
            };
            if better {
                *best = Some((d2, entry.id));
            }
        }
        let diff = query[node.axis] - entry.point[node.axis];
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(n) = near {
            self.search(n, query, exclude, accept, best);
        }
        // An equal-distance candidate on the far side could still win on id,
        // so the plane test is inclusive.
        let descend_far = match best {
            None => true,
            Some((bd2, _)) => diff * diff <= *bd2,
        };
        if descend_far {
            if let Some(f) = far {
                self.search(f, query, exclude, accept, best);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Oracle: plain linear scan with the same tie rule.
    fn scan_nearest(
        points: &[(NodeId, Vector3<f64>)],
        query: &Vector3<f64>,
        exclude: Option<NodeId>,
        accept: &dyn Fn(NodeId) -> bool,
    ) -> Option<(NodeId, f64)> {
        let mut best: Option<(f64, NodeId)> = None;
        for (id, p) in points {
            if Some(*id) == exclude || !accept(*id) {
                continue;
            }
            let d2 = (p - query).norm_squared();
            let better = match best {
                None => true,
                Some((bd2, bid)) => d2 < bd2 || (d2 == bd2 && *id < bid),
            };
            if better {
                best = Some((d2, *id));
            }
        }
        best.map(|(d2, id)| (id, d2.sqrt()))
    }

    fn random_points(rng: &mut impl Rng, n: usize) -> Vec<(NodeId, Vector3<f64>)> {
        (0..n)
            .map(|i| {
                (
                    i as NodeId,
                    Vector3::new(
                        rng.random_range(-5.0..5.0),
                        rng.random_range(-5.0..5.0),
                        rng.random_range(-5.0..5.0),
                    ),
                )
            })
            .collect()
    }

    #[test]
    fn matches_linear_scan_on_random_data() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let points = random_points(&mut rng, 300);
        let tree = KdTree::build(points.iter().copied());
        let all = |_: NodeId| true;
        for _ in 0..300 {
            let q = Vector3::new(
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
            );
            assert_eq!(tree.nearest(&q, None, &all), scan_nearest(&points, &q, None, &all));
        }
    }

    #[test]
    fn exact_ties_resolve_to_lowest_id() {
        // Integer grid: the query at the origin is exactly distance 1 from
        // four points carrying shuffled ids.
        let points = vec![
            (7, Vector3::new(1.0, 0.0, 0.0)),
            (3, Vector3::new(-1.0, 0.0, 0.0)),
            (9, Vector3::new(0.0, 1.0, 0.0)),
            (5, Vector3::new(0.0, -1.0, 0.0)),
            (11, Vector3::new(2.0, 2.0, 2.0)),
        ];
        let tree = KdTree::build(points.iter().copied());
        let q = Vector3::zeros();
        let got = tree.nearest(&q, None, &|_| true).unwrap();
        assert_eq!(got.0, 3);
        assert_eq!(got.1, 1.0);
        // Excluding the winner promotes the next-lowest id at the same distance.
        let got = tree.nearest(&q, Some(3), &|_| true).unwrap();
        assert_eq!(got.0, 5);
    }

    #[test]
    fn exclusion_and_predicate_match_scan() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let points = random_points(&mut rng, 120);
        let tree = KdTree::build(points.iter().copied());
        let odd_only = |id: NodeId| id % 2 == 1;
        for _ in 0..100 {
            let q = Vector3::new(
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
                rng.random_range(-6.0..6.0),
            );
            let ex = Some(rng.random_range(0..120) as NodeId);
            assert_eq!(
                tree.nearest(&q, ex, &odd_only),
                scan_nearest(&points, &q, ex, &odd_only)
            );
        }
    }

    #[test]
    fn rejecting_everything_gives_none() {
        let points = random_points(&mut ChaCha12Rng::seed_from_u64(1), 10);
        let tree = KdTree::build(points);
        assert_eq!(tree.nearest(&Vector3::zeros(), None, &|_| false), None);
    }

    #[test]
    fn empty_tree_gives_none() {
        let tree = KdTree::build(Vec::new());
        assert!(tree.is_empty());
        assert_eq!(tree.nearest(&Vector3::zeros(), None, &|_| true), None);
    }

    #[test]
    fn duplicate_positions_resolve_by_id() {
        let p = Vector3::new(1.0, 1.0, 1.0);
        let points = vec![(4, p), (2, p), (8, p)];
        let tree = KdTree::build(points);
        let got = tree.nearest(&Vector3::zeros(), None, &|_| true).unwrap();
        assert_eq!(got.0, 2);
    }
}
