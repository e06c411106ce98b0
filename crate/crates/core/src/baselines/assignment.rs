//! Exact maximum-weight bipartite matching (Hungarian method on a padded
//! square cost matrix).

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteMatch<S> {
    /// `(row, col, weight)`, rows increasing; every weight is at least the threshold.
    pub pairs: Vec<(usize, usize, S)>,
    pub total: S,
}

/// Optimal matching over edges with weight `>= threshold`; lighter edges are
/// treated as absent. Rows of `weights` must have equal length.
pub fn max_weight_bipartite_matching<S: Scalar>(weights: &[Vec<S>], threshold: S) -> BipartiteMatch<S> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    debug_assert!(weights.iter().all(|r| r.len() == cols));
    let eff = |i: usize, j: usize| -> S {
        if i < rows && j < cols {
            let w = weights[i][j];
            if w >= threshold && w > S::zero() {
                return w;
            }
        }
        S::zero()
    };
    let n = rows.max(cols);
    if rows == 0 || cols == 0 {
        return BipartiteMatch {
            pairs: Vec::new(),
            total: S::zero(),
        };
    }
    // Minimize -w. Indices are 1-based; 0 is the virtual start column.
    let inf = S::infinity();
    let mut u = vec![S::zero(); n + 1];
    let mut v = vec![S::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = -eff(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize, S)> = (1..=n)
        .filter_map(|j| {
            let (i, j) = (p[j] - 1, j - 1);
            let w = eff(i, j);
            (w > S::zero()).then_some((i, j, w))
        })
        .collect();
    pairs.sort_by_key(|&(i, j, _)| (i, j));
    let total = pairs.iter().map(|&(_, _, w)| w).sum();
    BipartiteMatch { pairs, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        let m = max_weight_bipartite_matching(&[vec![0.9f64, 0.85], vec![0.95, 0.1]], 0.8);
        assert_eq!(m.pairs.iter().map(|&(i, j, _)| (i, j)).collect::<Vec<_>>(), [(0, 1), (1, 0)]);
        assert!((m.total - 1.8).abs() < 1e-12);
        let id: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        assert_eq!(max_weight_bipartite_matching(&id, 0.5).total, 4.0);
        let low = vec![vec![0.3, 0.2], vec![0.1, 0.7]];
        let m = max_weight_bipartite_matching(&low, 0.8);
        assert!(m.pairs.is_empty() && m.total == 0.0);
        assert!(max_weight_bipartite_matching::<f64>(&[], 0.8).pairs.is_empty());
    }

    #[test]
    fn rectangular() {
        let w = vec![vec![1.0, 3.0, 2.0]];
        let m = max_weight_bipartite_matching(&w, 0.0);
        assert_eq!(m.pairs, vec![(0, 1, 3.0)]);
        let t = vec![vec![1.0], vec![3.0], vec![2.0f32]];
        assert_eq!(max_weight_bipartite_matching(&t, 0.0).pairs, vec![(1, 0, 3.0)]);
    }
}
