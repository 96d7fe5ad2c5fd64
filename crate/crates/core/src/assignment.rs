//! Maximum-weight bipartite assignment via the Hungarian algorithm.
//!
//! Works on exact integer weights so results are bit-reproducible. The
//! O(n^3) shortest-augmenting-path formulation with row/column potentials
//! is used; matrices here are small (speakers per recording).

/// Result of an assignment: chosen column per row and the total weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub row_to_col: Vec<Option<usize>>,
    pub total: i64,
}

/// Finds an assignment of rows to distinct columns maximizing total weight.
///
/// `weights` must be rectangular with non-negative entries. Every row of
/// the smaller side is matched; unmatched rows (when rows > cols) get
/// `None`.
pub fn max_weight_assignment(weights: &[Vec<i64>]) -> Assignment {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Assignment {
            row_to_col: vec![None; rows],
            total: 0,
        };
    }
    debug_assert!(weights.iter().all(|r| r.len() == cols), "ragged matrix");
    debug_assert!(
        weights.iter().flatten().all(|&w| w >= 0),
        "negative weight"
    );

    if rows > cols {
        // Transpose, solve, and invert the matching.
        let transposed: Vec<Vec<i64>> = (0..cols)
            .map(|j| (0..rows).map(|i| weights[i][j]).collect())
            .collect();
        let solved = max_weight_assignment(&transposed);
        let mut row_to_col = vec![None; rows];
        for (j, row) in solved.row_to_col.iter().enumerate() {
            if let Some(i) = row {
                row_to_col[*i] = Some(j);
            }
        }
        return Assignment {
            row_to_col,
            total: solved.total,
        };
    }

    // Minimize negated weights; 1-indexed arrays with a sentinel slot 0.
    const INF: i64 = i64::MAX / 4;
    let n = rows;
    let m = cols;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut matched_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = -weights[i0 - 1][j - 1] - u[i0] - v[j];
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
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }

    let mut row_to_col = vec![None; n];
    let mut total = 0i64;
    for j in 1..=m {
        let i = matched_row[j];
        if i != 0 {
            row_to_col[i - 1] = Some(j - 1);
            total += weights[i - 1][j - 1];
        }
    }
    Assignment { row_to_col, total }
}
