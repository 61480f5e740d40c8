use crate::Point3;

const LEAF: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

/// Static 3D kd-tree answering fixed-radius existence queries. Distances use
/// the same expression as a linear scan, and pruning only discards subtrees
/// whose squared axis gap already exceeds the radius, so answers equal the
/// brute-force ones exactly.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Point3>,
    nodes: Vec<Node>,
}

#[inline]
pub(crate) fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut pts = points.to_vec();
        let mut nodes = Vec::new();
        if !pts.is_empty() {
            let n = pts.len();
            build(&mut pts, 0, n, &mut nodes);
        }
        Self { points: pts, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether some indexed point lies within `radius` of `q` (inclusive).
    pub fn any_within(&self, q: &Point3, radius: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf { start, end } => {
                    if self.points[start..end].iter().any(|p| dist2(p, q) <= r2) {
                        return true;
                    }
                }
                Node::Split { axis, value, left, right } => {
                    let gap = q[axis] - value;
                    let (near, far) = if gap <= 0.0 { (left, right) } else { (right, left) };
                    if gap * gap <= r2 {
                        stack.push(far);
                    }
                    stack.push(near);
                }
            }
        }
        false
    }
}

fn build(pts: &mut [Point3], start: usize, end: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    if end - start <= LEAF {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let slice = &pts[start..end];
    let mut lo = slice[0];
    let mut hi = slice[0];
    for p in slice {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let axis = (hi - lo).imax();
    if hi[axis] == lo[axis] {
        nodes.push(Node::Leaf { start, end });
        return id;
    }
    let mid = (end - start) / 2;
    pts[start..end].select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    let value = pts[start + mid][axis];
    // left holds coordinates ≤ value, right holds coordinates ≥ value
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let left = build(pts, start, start + mid, nodes);
    let right = build(pts, start + mid, end, nodes);
    nodes[id] = Node::Split { axis, value, left, right };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_linear_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(101);
        for trial in 0..30 {
            let n = rng.random_range(1..800);
            // coarse lattice forces duplicates and ties on split planes
            let lattice = trial % 2 == 0;
            let sample = |rng: &mut rand_chacha::ChaCha8Rng| {
                let p = Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                if lattice {
                    p.map(|x| (x * 4.0).round() / 4.0)
                } else {
                    p
                }
            };
            let pts: Vec<Point3> = (0..n).map(|_| sample(&mut rng)).collect();
            let tree = KdTree::new(&pts);
            for _ in 0..300 {
                let q = sample(&mut rng);
                let r = [0.0, 0.05, 0.25, 0.3][rng.random_range(0..4)];
                let brute = pts.iter().any(|p| dist2(p, &q) <= r * r);
                assert_eq!(tree.any_within(&q, r), brute);
            }
        }
        assert!(!KdTree::new(&[]).any_within(&Point3::zeros(), 1.0));
    }
}
