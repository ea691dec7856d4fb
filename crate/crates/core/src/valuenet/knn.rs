use std::cmp::Ordering;

/// Neighbor indices per point, nearest first.
pub type Graph = Vec<Vec<usize>>;

/// Builds the k-nearest-neighbor graph of `points` (row-major, `dim`
/// columns).
///
/// Each point gets `min(k, N − 1)` neighbors, never itself, ordered by
/// Euclidean distance with ties going to the smaller index. The result is
/// exactly that of an exhaustive search: points are scanned outward along
/// the widest coordinate, and the scan stops once the gap in that
/// coordinate alone exceeds the current k-th distance.
pub fn knn_graph(points: &[f64], dim: usize, k: usize) -> Graph {
    assert!(dim > 0 && points.len() % dim == 0, "points must be a whole number of rows");
    let n = points.len() / dim;
    let k = k.min(n.saturating_sub(1));
    if k == 0 {
        return vec![Vec::new(); n];
    }
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let axis = widest_axis(points, dim, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a * dim + axis].total_cmp(&points[b * dim + axis]).then(a.cmp(&b)));

    let mut graph = Vec::with_capacity(n);
    graph.resize(n, Vec::new());
    let mut best = Best::new(k);
    for (pos, &i) in order.iter().enumerate() {
        best.clear();
        let pi = row(i);
        let ai = pi[axis];
        let (mut left, mut right) = (pos, pos + 1);
        let (mut left_open, mut right_open) = (true, true);
        while left_open || right_open {
            for side in [false, true] {
                let j = match side {
                    false if left_open && left > 0 => order[left - 1],
                    true if right_open && right < n => order[right],
                    false => {
                        left_open = false;
                        continue;
                    }
                    true => {
                        right_open = false;
                        continue;
                    }
                };
                let pj = row(j);
                let gap = (ai - pj[axis]) * (ai - pj[axis]);
                if best.is_full() && gap > best.worst() {
                    if side {
                        right_open = false;
                    } else {
                        left_open = false;
                    }
                    continue;
                }
                if side {
                    right += 1;
                } else {
                    left -= 1;
                }
                let bound = if best.is_full() { best.worst() } else { f64::INFINITY };
                if let Some(d2) = bounded_distance(pi, pj, bound) {
                    best.offer(d2, j);
                }
            }
        }
        graph[i] = best.indices();
    }
    graph
}

fn widest_axis(points: &[f64], dim: usize, n: usize) -> usize {
    (0..dim)
        .map(|c| {
            let (lo, hi) = (0..n)
                .map(|i| points[i * dim + c])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            (hi - lo, c)
        })
        .fold((f64::NEG_INFINITY, 0), |acc, (w, c)| if w > acc.0 { (w, c) } else { acc })
        .1
}

/// Squared distance, or `None` once the partial sum exceeds `bound`.
fn bounded_distance(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut d2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        d2 += (x - y) * (x - y);
        if d2 > bound {
            return None;
        }
    }
    Some(d2)
}

/// The k best `(distance², index)` pairs seen so far, kept sorted.
struct Best {
    k: usize,
    items: Vec<(f64, usize)>,
}

impl Best {
    fn new(k: usize) -> Self {
        Best {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn clear(&mut self) {
        self.items.clear();
    }

    fn is_full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst(&self) -> f64 {
        self.items[self.k - 1].0
    }

    fn offer(&mut self, d2: f64, j: usize) {
        let cmp = |a: &(f64, usize)| a.0.total_cmp(&d2).then(a.1.cmp(&j));
        if self.is_full() && cmp(&self.items[self.k - 1]) == Ordering::Less {
            return;
        }
        let at = self.items.partition_point(|a| cmp(a) == Ordering::Less);
        self.items.insert(at, (d2, j));
        self.items.truncate(self.k);
    }

    fn indices(&self) -> Vec<usize> {
        self.items.iter().map(|&(_, j)| j).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points() {
        assert_eq!(knn_graph(&[0.0, 1.0, 3.0], 1, 1), vec![vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn single_point_has_no_neighbors() {
        assert_eq!(knn_graph(&[1.0, 2.0], 2, 8), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn ties_go_to_smaller_index() {
        // 1 and 2 are both at distance 1 from 0
        let g = knn_graph(&[0.0, 1.0, -1.0], 1, 1);
        assert_eq!(g[0], vec![1]);
    }
}
