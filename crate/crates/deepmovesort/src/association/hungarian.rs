//! Minimum-cost assignment with forbidden cells.
//!
//! Semantics: among matchings that use only non-gated cells, maximize the
//! number of matched pairs, then minimize total cost, then prefer the
//! lexicographically smallest matching by (row index, column index). Gated
//! cells can never be chosen; a row or column whose cells are all gated
//! stays unmatched.

use super::{Cost, CostMatrix};

/// Large finite stand-in for gated/infeasible cells inside the solver.
/// Any single gated assignment dwarfs every achievable sum of real costs,
/// which makes minimum cost equivalent to maximum cardinality first.
const BIG: f64 = 1e9;

/// Tolerance when deciding that two alternative totals tie.
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Matched (row, col) pairs, sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    /// Sum of matched costs, accumulated in row order.
    pub total_cost: f64,
}

/// Solve the assignment problem for `costs`.
///
/// # Panics
/// Panics on non-finite costs; callers construct matrices via
/// [`super::fuse`], which rejects them with an error.
pub fn solve(costs: &CostMatrix) -> Assignment {
    let (rows, cols) = (costs.rows(), costs.cols());
    for r in 0..rows {
        for c in 0..cols {
            if let Cost::Finite(v) = costs.at(r, c) {
                assert!(v.is_finite(), "non-finite cost at ({r}, {c})");
            }
        }
    }
    if rows == 0 || cols == 0 {
        return Assignment {
            matches: vec![],
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
            total_cost: 0.0,
        };
    }

    // Fix rows in ascending order: for each, take the smallest column that
    // still permits an optimal completion. The first optimum comes from the
    // unrestricted subproblem, so the scan stops at that column at latest.
    let mut avail: Vec<usize> = (0..cols).collect();
    let mut matches: Vec<(usize, usize)> = Vec::new();
    for i in 0..rows {
        let sub_rows: Vec<usize> = (i..rows).collect();
        let (base_val, base_assign) = solve_subproblem(costs, &sub_rows, &avail);
        let j_star = base_assign.first().copied().flatten();
        let mut chosen: Option<usize> = None;
        for (slot, &j) in avail.iter().enumerate() {
            if Some(j) == j_star {
                chosen = Some(slot);
                break;
            }
            let Cost::Finite(cell) = costs.at(i, j) else { continue };
            let rest_rows: Vec<usize> = (i + 1..rows).collect();
            let mut rest_cols = avail.clone();
            rest_cols.remove(slot);
            let (rest_val, _) = solve_subproblem(costs, &rest_rows, &rest_cols);
            let cand = (rest_val.0, rest_val.1 + cell);
            if cand.0 < base_val.0 || (cand.0 == base_val.0 && cand.1 <= base_val.1 + TIE_EPS) {
                chosen = Some(slot);
                break;
            }
        }
        if let Some(slot) = chosen {
            matches.push((i, avail[slot]));
            avail.remove(slot);
        }
    }

    let matched_rows: Vec<usize> = matches.iter().map(|&(r, _)| r).collect();
    let matched_cols: Vec<usize> = matches.iter().map(|&(_, c)| c).collect();
    let total_cost = matches
        .iter()
        .map(|&(r, c)| costs.at(r, c).finite().expect("matched cell is finite"))
        .sum();
    Assignment {
        unmatched_rows: (0..rows).filter(|r| !matched_rows.contains(r)).collect(),
        unmatched_cols: (0..cols).filter(|c| !matched_cols.contains(c)).collect(),
        matches,
        total_cost,
    }
}

/// Optimal value of the subproblem on the given row/column subsets, as
/// (gated assignments, finite cost), plus the matched column per sub-row
/// (`None` when the row lands on a gated cell or a padding column).
fn solve_subproblem(
    costs: &CostMatrix,
    row_ids: &[usize],
    col_ids: &[usize],
) -> ((usize, f64), Vec<Option<usize>>) {
    let nr = row_ids.len();
    let nc = col_ids.len();
    if nr == 0 || nc == 0 {
        return ((0, 0.0), vec![None; nr]);
    }
    let n = nr.max(nc);
    let cell = |r: usize, c: usize| -> f64 {
        if r < nr && c < nc {
            match costs.at(row_ids[r], col_ids[c]) {
                Cost::Finite(v) => v,
                Cost::Gated => BIG,
            }
        } else {
            0.0
        }
    };
    let row_to_col = hungarian_square(n, &cell);

    let mut gated = 0usize;
    let mut finite = 0.0f64;
    let mut out = vec![None; nr];
    for (r, &c) in row_to_col.iter().enumerate().take(nr) {
        if c < nc {
            match costs.at(row_ids[r], col_ids[c]) {
                Cost::Finite(v) => {
                    finite += v;
                    out[r] = Some(col_ids[c]);
                }
                Cost::Gated => gated += 1,
            }
        }
    }
    ((gated, finite), out)
}

/// Jonker-Volgenant shortest augmenting path assignment on an n x n matrix.
/// Returns the column assigned to each row. O(n^3), deterministic.
fn hungarian_square(n: usize, cost: &dyn Fn(usize, usize) -> f64) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // p[j] = row currently assigned to column j, 1-indexed, 0 = free.
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
        // Walk the augmenting path back, flipping assignments.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=n {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}
