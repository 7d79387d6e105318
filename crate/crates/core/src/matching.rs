//! Segment matchings between predictions and ground truth.

use alloc::vec;
use alloc::vec::Vec;

/// Maximum-weight assignment on a dense `rows × cols` weight matrix
/// (row-major). Returns, per row, the matched column if any. Rows and
/// columns may differ in count; the matrix is padded with zero weights.
///
/// O(n³) shortest augmenting path formulation of the Hungarian method.
pub fn max_weight_assignment(weights: &[f64], rows: usize, cols: usize) -> Vec<Option<usize>> {
    debug_assert_eq!(weights.len(), rows * cols);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i * cols + j]
        } else {
            0.0
        }
    };

    // potentials and matching are 1-based, index 0 is the virtual start
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    for j in 1..=n {
        let i = row_of_col[j];
        if i >= 1 && i <= rows && j <= cols {
            assignment[i - 1] = Some(j - 1);
        }
    }
    assignment
}

/// Pairs with IoU at least 0.5, scanning predictions then ground truths in
/// id order. Above 0.5 each side has at most one candidate; at exactly 0.5
/// the smallest ids win.
pub fn threshold_assignment(ious: &[f64], rows: usize, cols: usize) -> Vec<Option<usize>> {
    let mut taken = vec![false; cols];
    let mut assignment = vec![None; rows];
    for (r, slot) in assignment.iter_mut().enumerate() {
        for c in 0..cols {
            if !taken[c] && ious[r * cols + c] >= 0.5 {
                taken[c] = true;
                *slot = Some(c);
                break;
            }
        }
    }
    assignment
}
