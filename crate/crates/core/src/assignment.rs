//! Exact solvers for the square linear assignment problem.
//!
//! [`hungarian`] is the production solver: shortest augmenting paths with
//! row/column potentials, `O(m³)`. [`hungarian_line_cover`] follows the
//! classical four-step statement (row reduction, column reduction, cover
//! zeros with the fewest lines, create zeros) and is kept as a readable
//! reference; [`brute_force_assignment`] enumerates all permutations and
//! serves as the test oracle.
//!
//! Ties between optimal permutations are broken the same way by both
//! Hungarian variants: the lexicographically smallest optimal permutation
//! (row 0's column as small as possible, then row 1's, ...).

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Largest size accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_MAX: usize = 9;

/// Square matrix of finite assignment costs; entry `(i, j)` is the cost of
/// giving row `i` column `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != size) {
            return Err(Error::invalid(format!(
                "cost matrix must be square: {size} rows but a row has {} entries",
                bad.len()
            )));
        }
        Self::from_flat(size, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(size: usize, entries: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("cost matrix must have at least one row"));
        }
        if entries.len() != size * size {
            return Err(Error::invalid(format!(
                "cost matrix of size {size} needs {} entries, got {}",
                size * size,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cost matrix"));
        }
        Ok(CostMatrix { size, entries })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.size + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.size..(row + 1) * self.size]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Sum of `(i, permutation[i])` entries.
    pub fn cost_of(&self, permutation: &[usize]) -> f64 {
        permutation
            .iter()
            .enumerate()
            .map(|(i, &j)| self.get(i, j))
            .sum()
    }

    fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

/// A bijection from rows to columns together with its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `permutation[i]` is the column assigned to row `i`.
    pub permutation: Vec<usize>,
    pub total_cost: f64,
}

impl Assignment {
    fn from_permutation(costs: &CostMatrix, permutation: Vec<usize>) -> Self {
        let total_cost = costs.cost_of(&permutation);
        Assignment {
            permutation,
            total_cost,
        }
    }

    /// Inverse map: `columns[j]` is the row assigned to column `j`.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (i, &j) in self.permutation.iter().enumerate() {
            inv[j] = i;
        }
        inv
    }
}

fn tight_tolerance(costs: &CostMatrix) -> f64 {
    1e-12 * costs.max_abs().max(1.0)
}

/// Optimal assignment via shortest augmenting paths with potentials.
pub fn hungarian(costs: &CostMatrix) -> Assignment {
    let m = costs.size();
    // 1-based potentials; index 0 is the virtual source column.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut col_owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for row in 1..=m {
        col_owner[0] = row;
        let mut j0 = 0;
        let mut min_slack = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = costs.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut permutation = vec![0; m];
    for j in 1..=m {
        permutation[col_owner[j] - 1] = j - 1;
    }
    let tol = tight_tolerance(costs);
    let tight = |i: usize, j: usize| (costs.get(i, j) - u[i + 1] - v[j + 1]).abs() <= tol;
    let permutation = lexicographic_tight_matching(m, &tight, permutation);
    Assignment::from_permutation(costs, permutation)
}

/// Optimal assignment by the classical four steps: subtract row minima,
/// subtract column minima, cover all zeros with a minimum number of lines,
/// and while fewer than `m` lines are needed create additional zeros.
pub fn hungarian_line_cover(costs: &CostMatrix) -> Assignment {
    let m = costs.size();
    let tol = tight_tolerance(costs);
    let mut a: Vec<f64> = costs.entries().to_vec();
    let snap = |x: f64| if x.abs() <= tol { 0.0 } else { x };

    // Step 1
    for i in 0..m {
        let min = a[i * m..(i + 1) * m].iter().copied().fold(f64::INFINITY, f64::min);
        for x in &mut a[i * m..(i + 1) * m] {
            *x = snap(*x - min);
        }
    }
    // Step 2
    for j in 0..m {
        let min = (0..m).map(|i| a[i * m + j]).fold(f64::INFINITY, f64::min);
        for i in 0..m {
            a[i * m + j] = snap(a[i * m + j] - min);
        }
    }

    loop {
        // Step 3
        let is_zero = |i: usize, j: usize| a[i * m + j] == 0.0;
        let matching = max_matching(m, &is_zero);
        let lines = matching.iter().filter(|r| r.is_some()).count();
        if lines == m {
            let permutation = matching.into_iter().map(Option::unwrap).collect();
            let tight = |i: usize, j: usize| a[i * m + j] == 0.0;
            let permutation = lexicographic_tight_matching(m, &tight, permutation);
            return Assignment::from_permutation(costs, permutation);
        }
        let (row_covered, col_covered) = konig_cover(m, &is_zero, &matching);

        // Step 4
        let mut k = f64::INFINITY;
        for i in (0..m).filter(|&i| !row_covered[i]) {
            for j in (0..m).filter(|&j| !col_covered[j]) {
                k = k.min(a[i * m + j]);
            }
        }
        for i in 0..m {
            for j in 0..m {
                let x = &mut a[i * m + j];
                match (row_covered[i], col_covered[j]) {
                    (false, false) => *x = snap(*x - k),
                    (true, true) => *x += k,
                    _ => {}
                }
            }
        }
    }
}

/// Kuhn's augmenting-path maximum matching; `result[i]` is row `i`'s column.
fn max_matching(m: usize, edge: &dyn Fn(usize, usize) -> bool) -> Vec<Option<usize>> {
    fn augment(
        i: usize,
        m: usize,
        edge: &dyn Fn(usize, usize) -> bool,
        seen: &mut [bool],
        col_row: &mut [Option<usize>],
    ) -> bool {
        for j in 0..m {
            if edge(i, j) && !seen[j] {
                seen[j] = true;
                if col_row[j].is_none_or(|r| augment(r, m, edge, seen, col_row)) {
                    col_row[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }

    let mut col_row = vec![None; m];
    for i in 0..m {
        let mut seen = vec![false; m];
        augment(i, m, edge, &mut seen, &mut col_row);
    }
    let mut row_col = vec![None; m];
    for (j, r) in col_row.iter().enumerate() {
        if let Some(r) = r {
            row_col[*r] = Some(j);
        }
    }
    row_col
}

/// Minimum vertex cover from a maximum matching (König's theorem).
/// Returns `(covered rows, covered columns)`.
fn konig_cover(
    m: usize,
    edge: &dyn Fn(usize, usize) -> bool,
    row_col: &[Option<usize>],
) -> (Vec<bool>, Vec<bool>) {
    let mut col_row = vec![None; m];
    for (i, c) in row_col.iter().enumerate() {
        if let Some(c) = c {
            col_row[*c] = Some(i);
        }
    }
    let mut row_seen = vec![false; m];
    let mut col_seen = vec![false; m];
    let mut queue: VecDeque<usize> = (0..m).filter(|&i| row_col[i].is_none()).collect();
    for &i in &queue {
        row_seen[i] = true;
    }
    while let Some(i) = queue.pop_front() {
        for j in 0..m {
            if edge(i, j) && !col_seen[j] && row_col[i] != Some(j) {
                col_seen[j] = true;
                if let Some(r) = col_row[j] {
                    if !row_seen[r] {
                        row_seen[r] = true;
                        queue.push_back(r);
                    }
                }
            }
        }
    }
    (row_seen.iter().map(|s| !s).collect(), col_seen)
}

/// Given a perfect matching inside the `tight` graph, returns the
/// lexicographically smallest perfect matching of that graph.
///
/// Row by row, the smallest tight column that can still be completed is
/// chosen; completion is checked with one reverse alternating search from
/// the row's current column, so the whole pass is `O(m³)`.
fn lexicographic_tight_matching(
    m: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    mut row_col: Vec<usize>,
) -> Vec<usize> {
    let mut col_row = vec![0; m];
    for (i, &j) in row_col.iter().enumerate() {
        col_row[j] = i;
    }
    for i in 0..m {
        // Rows < i are fixed; search only rows >= i and their columns.
        let target = row_col[i];
        // reach[r] = next column on an alternating path from row r to `target`.
        let mut reach: Vec<Option<usize>> = vec![None; m];
        let mut col_seen = vec![false; m];
        col_seen[target] = true;
        let mut queue = VecDeque::from([target]);
        while let Some(c) = queue.pop_front() {
            for r in i..m {
                if reach[r].is_none() && row_col[r] != c && tight(r, c) {
                    reach[r] = Some(c);
                    let next = row_col[r];
                    if !col_seen[next] {
                        col_seen[next] = true;
                        queue.push_back(next);
                    }
                }
            }
        }
        let Some(best) = (0..m).find(|&j| {
            let owner = col_row[j];
            owner >= i && tight(i, j) && (j == target || reach[owner].is_some())
        }) else {
            continue;
        };
        if best == target {
            continue;
        }
        // Rotate along the cycle i -> best -> owner -> ... -> target.
        let old_owner = col_row.clone();
        row_col[i] = best;
        let mut r = old_owner[best];
        loop {
            let c = reach[r].expect("row lies on an alternating path to the target");
            row_col[r] = c;
            if c == target {
                break;
            }
            r = old_owner[c];
        }
        for (row, &col) in row_col.iter().enumerate() {
            col_row[col] = row;
        }
    }
    row_col
}

/// Exhaustive search over all `m!` permutations in lexicographic order,
/// returning the first one attaining the minimum.
pub fn brute_force_assignment(costs: &CostMatrix) -> Result<Assignment> {
    let m = costs.size();
    if m > BRUTE_FORCE_MAX {
        return Err(Error::invalid(format!(
            "brute-force assignment limited to m <= {BRUTE_FORCE_MAX}, got {m}"
        )));
    }
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = perm.clone();
    let mut best_cost = costs.cost_of(&perm);
    while next_permutation(&mut perm) {
        let c = costs.cost_of(&perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    Ok(Assignment {
        permutation: best,
        total_cost: best_cost,
    })
}

/// Advances `p` to the next permutation in lexicographic order.
pub fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix() -> CostMatrix {
        CostMatrix::new(vec![
            vec![-0.4, -2.6, -2.1],
            vec![-3.3, -1.15, -1.5],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn appendix_matrix() {
        for a in [hungarian(&appendix()), hungarian_line_cover(&appendix())] {
            assert_eq!(a.permutation, vec![1, 0, 2]);
            assert!((a.total_cost + 5.9).abs() < 1e-9);
        }
        let b = brute_force_assignment(&appendix()).unwrap();
        assert!((b.total_cost + 5.9).abs() < 1e-9);
    }

    #[test]
    fn zero_diagonal_gives_identity() {
        let c = CostMatrix::new(vec![
            vec![0.0, 1.0, 2.0, 3.0],
            vec![4.0, 0.0, 1.0, 1.0],
            vec![2.0, 5.0, 0.0, 3.0],
            vec![1.0, 1.0, 1.0, 0.0],
        ])
        .unwrap();
        let a = hungarian(&c);
        assert_eq!(a.permutation, vec![0, 1, 2, 3]);
        assert_eq!(a.total_cost, 0.0);
    }

    #[test]
    fn small_positive_matrix() {
        let c = CostMatrix::new(vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]])
            .unwrap();
        for a in [hungarian(&c), hungarian_line_cover(&c), brute_force_assignment(&c).unwrap()] {
            assert_eq!(a.permutation, vec![1, 0, 2]);
            assert_eq!(a.total_cost, 5.0);
        }
    }

    #[test]
    fn single_entry() {
        let c = CostMatrix::new(vec![vec![-7.25]]).unwrap();
        let b = brute_force_assignment(&c).unwrap();
        assert_eq!(b.permutation, vec![0]);
        assert_eq!(b.total_cost, -7.25);
        assert_eq!(hungarian(&c), b);
    }

    #[test]
    fn ties_resolve_to_lexicographically_smallest() {
        let c = CostMatrix::new(vec![vec![0.0; 4]; 4]).unwrap();
        assert_eq!(hungarian(&c).permutation, vec![0, 1, 2, 3]);
        assert_eq!(hungarian_line_cover(&c).permutation, vec![0, 1, 2, 3]);
        // Two optimal solutions: [1, 0, 2] and [2, 0, 1]... plus others; compare with oracle.
        let c = CostMatrix::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 0.0]])
            .unwrap();
        let oracle = brute_force_assignment(&c).unwrap();
        assert_eq!(hungarian(&c).permutation, oracle.permutation);
        assert_eq!(hungarian_line_cover(&c).permutation, oracle.permutation);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CostMatrix::new(vec![vec![1.0, 2.0]]).is_err());
        assert!(CostMatrix::new(vec![]).is_err());
        assert!(CostMatrix::new(vec![vec![f64::NAN]]).is_err());
        assert!(CostMatrix::new(vec![vec![1.0], vec![f64::INFINITY]]).is_err());
        let big = CostMatrix::from_flat(10, vec![0.0; 100]).unwrap();
        assert!(brute_force_assignment(&big).is_err());
    }

    #[test]
    fn next_permutation_enumerates_all() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
    }
}
