//! Linear sum assignment by the shortest-augmenting-path Hungarian method,
//! `O(n^3)`, with row and column potentials.

use ndarray::Array2;

use crate::scalar::Scalar;

use super::{Result, StabilityError};

/// Optimal matching of rows to columns of a square cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult<F> {
    /// `permutation[row]` is the column matched to `row`.
    pub permutation: Vec<usize>,
    /// Cost of each matched pair, indexed by row.
    pub matched_distances: Vec<F>,
    /// Arithmetic mean of `matched_distances`.
    pub mean_distance: F,
    pub total_cost: F,
}

/// Finds the permutation minimizing the total cost.
pub fn linear_sum_assignment<F: Scalar>(cost: &Array2<F>) -> Result<AssignmentResult<F>> {
    let (n, m) = cost.dim();
    if n != m {
        return Err(StabilityError::NonSquare { rows: n, cols: m });
    }
    if cost.iter().any(|x| !x.is_finite()) {
        return Err(StabilityError::NonFiniteCost);
    }
    if n == 0 {
        return Ok(AssignmentResult {
            permutation: vec![],
            matched_distances: vec![],
            mean_distance: F::zero(),
            total_cost: F::zero(),
        });
    }

    // 1-based arrays; index 0 is the virtual source column.
    let inf = F::infinity();
    let mut u = vec![F::zero(); n + 1];
    let mut v = vec![F::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0usize;
        let mut min_slack = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = inf;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let slack = cost[[r - 1, col - 1]] - u[r] - v[col];
                if slack < min_slack[col] {
                    min_slack[col] = slack;
                    way[col] = col0;
                }
                if min_slack[col] < delta {
                    delta = min_slack[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] = u[owner[col]] + delta;
                    v[col] = v[col] - delta;
                } else {
                    min_slack[col] = min_slack[col] - delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }

    let mut permutation = vec![0usize; n];
    for col in 1..=n {
        permutation[owner[col] - 1] = col - 1;
    }
    let matched_distances: Vec<F> = permutation
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[[r, c]])
        .collect();
    let total_cost: F = matched_distances.iter().copied().sum();
    Ok(AssignmentResult {
        mean_distance: total_cost / F::count(n as u64),
        permutation,
        matched_distances,
        total_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force(cost: &Array2<f64>) -> f64 {
        permutations(cost.nrows())
            .iter()
            .map(|p| p.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn two_by_two() {
        let r = linear_sum_assignment(&array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(r.permutation, vec![1, 0]);
        assert_eq!(r.total_cost, 0.0);
        let r = linear_sum_assignment(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(r.permutation, vec![0, 1]);
        assert_eq!(r.total_cost, 0.0);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=6 {
            for _ in 0..30 {
                let cost = Array2::from_shape_fn((n, n), |_| rng.random_range(-5.0..5.0));
                let r = linear_sum_assignment(&cost).unwrap();
                let mut sorted = r.permutation.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..n).collect::<Vec<_>>());
                assert!((r.total_cost - brute_force(&cost)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integer_valued_ties_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let cost = Array2::from_shape_fn((5, 5), |_| rng.random_range(0..4) as f64);
            assert_eq!(linear_sum_assignment(&cost).unwrap().total_cost, brute_force(&cost));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let rect = Array2::<f64>::zeros((2, 3));
        assert!(matches!(linear_sum_assignment(&rect), Err(StabilityError::NonSquare { .. })));
        let nan = array![[0.0, f64::NAN], [1.0, 0.0]];
        assert!(matches!(linear_sum_assignment(&nan), Err(StabilityError::NonFiniteCost)));
    }
}
