//! Rectangular linear assignment (Hungarian / Jonker-Volgenant style shortest
//! augmenting paths) over `f64` costs.

/// Solve the minimum-cost assignment for an `rows × cols` cost matrix.
///
/// Returns, for every row, the assigned column (or `None` when there are more
/// rows than columns and the row is left out). Every column is used at most
/// once. Costs must be finite.
pub fn solve_min(costs: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = costs.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = costs[0].len();
    debug_assert!(costs.iter().all(|r| r.len() == cols));
    if cols == 0 {
        return vec![None; rows];
    }

    // The core routine needs rows <= cols; transpose otherwise.
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| costs[i][j]).collect())
            .collect();
        let col_to_row = solve_min(&transposed);
        let mut out = vec![None; rows];
        for (j, r) in col_to_row.into_iter().enumerate() {
            if let Some(i) = r {
                out[i] = Some(j);
            }
        }
        return out;
    }

    let n = rows;
    let m = cols;
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j] = row (1-based) matched to column j; 0 = free.
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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

    let mut out = vec![None; n];
    for j in 1..=m {
        if p[j] > 0 {
            out[p[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Maximum-weight one-to-one matching restricted to admissible pairs.
///
/// `weights[i][j]` is `Some(w)` for an admissible pair with weight `w > 0`.
/// Pairs are only returned when admissible; rows or columns may stay unmatched.
/// Result is a list of `(row, col)` sorted by row.
pub fn max_weight_matching(weights: &[Vec<Option<f64>>]) -> Vec<(usize, usize)> {
    let rows = weights.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = weights[0].len();
    if cols == 0 {
        return Vec::new();
    }
    // Inadmissible pairs cost 0, the same as leaving both ends unmatched, so
    // a minimum-cost assignment never prefers them over a positive edge.
    let costs: Vec<Vec<f64>> = weights
        .iter()
        .map(|r| r.iter().map(|w| w.map_or(0.0, |w| -w)).collect())
        .collect();
    solve_min(&costs)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.and_then(|j| weights[i][j].map(|_| (i, j))))
        .collect()
}
