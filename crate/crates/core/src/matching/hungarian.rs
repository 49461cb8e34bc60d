//! Maximum-weight one-to-one assignment (Kuhn–Munkres with potentials).

/// Assignment maximizing the summed weight of `weights` (rows × cols).
///
/// Rectangular inputs are padded with zero-weight dummies to a square
/// matrix; the result holds `min(rows, cols)` `(row, col)` pairs sorted by
/// row.
pub fn hungarian_solve(weights: &[Vec<i64>]) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    assert!(weights.iter().all(|r| r.len() == cols), "ragged weight matrix");
    let n = rows.max(cols);
    let max = weights.iter().flatten().copied().max().unwrap_or(0).max(0);
    // minimize max - w over a 1-based square cost matrix
    let cost = |i: usize, j: usize| -> i64 {
        if i <= rows && j <= cols {
            max - weights[i - 1][j - 1]
        } else {
            max
        }
    };
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
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
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
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
    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .filter(|&j| p[j] <= rows && j <= cols)
        .map(|j| (p[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

pub fn assignment_value(weights: &[Vec<i64>], pairs: &[(usize, usize)]) -> i64 {
    pairs.iter().map(|&(r, c)| weights[r][c]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_dominant_is_identity() {
        let w = vec![vec![9, 1, 2], vec![0, 8, 1], vec![3, 2, 7]];
        assert_eq!(hungarian_solve(&w), vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn rectangular_sizes() {
        let wide = vec![vec![1, 5, 3, 0]];
        assert_eq!(hungarian_solve(&wide), vec![(0, 1)]);
        let tall = vec![vec![1], vec![7], vec![3]];
        assert_eq!(hungarian_solve(&tall), vec![(1, 0)]);
    }

    #[test]
    fn equal_weights_total() {
        let w = vec![vec![4; 5]; 3];
        let pairs = hungarian_solve(&w);
        assert_eq!(pairs.len(), 3);
        assert_eq!(assignment_value(&w, &pairs), 12);
    }

    #[test]
    fn all_zero_still_full_size() {
        let w = vec![vec![0; 2]; 4];
        assert_eq!(hungarian_solve(&w).len(), 2);
    }
}
