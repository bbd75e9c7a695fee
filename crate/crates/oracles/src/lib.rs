//! Brute-force reference solvers.
//!
//! Everything here works on plain slices and closures and never calls into
//! `transport-measures`, so a bug in the library cannot leak into the values
//! these functions return. They are exponential and only meant for the
//! handful of atoms / nodes that the test suites feed them.

/// Minimum of `c·x` over the vertices of `{x ≥ 0, A x = b}`.
///
/// Redundant equality rows are dropped first, then every column subset of
/// size `rank(A)` is tried as a basis. Returns `None` when no basic feasible
/// solution exists. The polytope is assumed bounded.
pub fn lp_vertex_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    let (a, b) = independent_rows(a, b);
    let n = c.len();
    let r = a.len();
    if r == 0 {
        return Some((0.0, vec![0.0; n]));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..r).collect();
    loop {
        if let Some(xb) = solve_square(&a, &b, &subset) {
            if xb.iter().all(|&v| v >= -1e-11) {
                let mut x = vec![0.0; n];
                for (pos, &col) in subset.iter().enumerate() {
                    x[col] = xb[pos].max(0.0);
                }
                let value: f64 = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
                if best.as_ref().is_none_or(|(v, _)| value < *v) {
                    best = Some((value, x));
                }
            }
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    best
}

/// Exact transportation cost between `mu` and `nu` under `cost`.
///
/// Every basic solution of the transportation polytope sits on a spanning
/// tree of the complete bipartite graph rows × columns. All such trees are
/// enumerated, each one is solved by peeling leaves, and the cheapest
/// nonnegative one wins.
pub fn transportation_brute_force(cost: &[Vec<f64>], mu: &[f64], nu: &[f64]) -> f64 {
    let (m, n) = (mu.len(), nu.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(m + n - 1);
    let mut parent: Vec<usize> = (0..m + n).collect();
    trees(&cells, 0, m + n - 1, &mut chosen, &mut parent, &mut |tree| {
        if let Some(x) = peel(tree, mu, nu) {
            let value: f64 = tree.iter().zip(&x).map(|(&(i, j), v)| cost[i][j] * v).sum();
            best = best.min(value);
        }
    });
    best
}

fn find(parent: &[usize], mut v: usize) -> usize {
    while parent[v] != v {
        v = parent[v];
    }
    v
}

/// Calls `visit` on every acyclic choice of `need` more cells from
/// `cells[from..]`. Union-find without path compression so that undoing a
/// union is a single assignment.
fn trees(
    cells: &[(usize, usize)],
    from: usize,
    need: usize,
    chosen: &mut Vec<(usize, usize)>,
    parent: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[(usize, usize)]),
) {
    if need == 0 {
        visit(chosen);
        return;
    }
    for c in from..cells.len() {
        if cells.len() - c < need {
            break;
        }
        let (i, j) = cells[c];
        let m = cells.last().map_or(0, |&(i, _)| i + 1);
        let (a, b) = (find(parent, i), find(parent, m + j));
        if a == b {
            continue;
        }
        parent[a] = b;
        chosen.push((i, j));
        trees(cells, c + 1, need - 1, chosen, parent, visit);
        chosen.pop();
        parent[a] = a;
    }
}

/// Cell values of the basic solution on `tree`, or `None` if one is
/// negative.
fn peel(tree: &[(usize, usize)], mu: &[f64], nu: &[f64]) -> Option<Vec<f64>> {
    let m = mu.len();
    let mut left: Vec<f64> = mu.iter().chain(nu).copied().collect();
    let mut degree = vec![0usize; left.len()];
    for &(i, j) in tree {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut x = vec![f64::NAN; tree.len()];
    for _ in 0..tree.len() {
        let (e, leaf) = tree
            .iter()
            .enumerate()
            .filter(|(e, _)| x[*e].is_nan())
            .find_map(|(e, &(i, j))| {
                if degree[i] == 1 {
                    Some((e, i))
                } else if degree[m + j] == 1 {
                    Some((e, m + j))
                } else {
                    None
                }
            })?;
        let (i, j) = tree[e];
        let other = if leaf == i { m + j } else { i };
        let v = left[leaf];
        if v < -1e-11 {
            return None;
        }
        x[e] = v.max(0.0);
        left[leaf] = 0.0;
        left[other] -= v;
        degree[i] -= 1;
        degree[m + j] -= 1;
    }
    Some(x)
}

/// Every node sequence of length `steps + 1` over `nodes` nodes whose
/// consecutive pairs are allowed, in lexicographic order.
pub fn enumerate_paths(
    nodes: usize,
    steps: usize,
    allowed: &dyn Fn(usize, usize) -> bool,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(steps + 1);
    fn rec(
        nodes: usize,
        steps: usize,
        allowed: &dyn Fn(usize, usize) -> bool,
        path: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if path.len() == steps + 1 {
            out.push(path.clone());
            return;
        }
        for j in 0..nodes {
            if let Some(&i) = path.last() {
                if !allowed(i, j) {
                    continue;
                }
            }
            path.push(j);
            rec(nodes, steps, allowed, path, out);
            path.pop();
        }
    }
    rec(nodes, steps, allowed, &mut path, &mut out);
    out
}

/// Lexicographically first path among those whose total cost is within
/// `tol` of the minimum. `cost(k, i, j)` may be `+∞` to forbid an edge.
/// `start` / `end` pin the endpoints when given.
pub fn brute_force_min_path(
    nodes: usize,
    steps: usize,
    allowed: &dyn Fn(usize, usize) -> bool,
    cost: &dyn Fn(usize, usize, usize) -> f64,
    start: Option<usize>,
    end: Option<usize>,
    tol: f64,
) -> Option<(f64, Vec<usize>)> {
    let scored: Vec<(f64, Vec<usize>)> = enumerate_paths(nodes, steps, allowed)
        .into_iter()
        .filter(|p| start.is_none_or(|s| p[0] == s) && end.is_none_or(|e| p[steps] == e))
        .map(|p| {
            let total: f64 = (0..steps).map(|k| cost(k, p[k], p[k + 1])).sum();
            (total, p)
        })
        .filter(|(v, _)| v.is_finite())
        .collect();
    let min = scored.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    scored.into_iter().find(|(v, _)| *v <= min + tol)
}

fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let r = subset.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if subset[i] < n - r + i {
            subset[i] += 1;
            for k in i + 1..r {
                subset[k] = subset[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn independent_rows(a: &[Vec<f64>], b: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    let mut kept_b = Vec::new();
    // Row-echelon basis of the kept rows, used only for the rank test.
    let mut echelon: Vec<Vec<f64>> = Vec::new();
    for (row, &rhs) in a.iter().zip(b) {
        let mut v = row.clone();
        for e in &echelon {
            let p = e.iter().position(|x| x.abs() > 1e-12).unwrap();
            let f = v[p] / e[p];
            if f != 0.0 {
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= f * ei;
                }
            }
        }
        if v.iter().any(|x| x.abs() > 1e-9) {
            echelon.push(v);
            kept.push(row.clone());
            kept_b.push(rhs);
        }
    }
    (kept, kept_b)
}

fn solve_square(a: &[Vec<f64>], b: &[f64], cols: &[usize]) -> Option<Vec<f64>> {
    let r = cols.len();
    let mut m: Vec<Vec<f64>> = (0..r)
        .map(|i| {
            let mut row: Vec<f64> = cols.iter().map(|&c| a[i][c]).collect();
            row.push(b[i]);
            row
        })
        .collect();
    for col in 0..r {
        let piv = (col..r).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        for row in 0..r {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for k in col..=r {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
    }
    Some((0..r).map(|i| m[i][r] / m[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_transport() {
        let cost = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let v = transportation_brute_force(&cost, &[0.5, 0.5], &[0.25, 0.75]);
        assert!((v - 0.25).abs() < 1e-12);
    }

    #[test]
    fn path_enumeration_counts() {
        assert_eq!(enumerate_paths(3, 2, &|_, _| true).len(), 27);
        let best = brute_force_min_path(
            3,
            2,
            &|_, _| true,
            &|_, i, j| (i as f64 - j as f64).abs(),
            Some(0),
            Some(2),
            0.0,
        )
        .unwrap();
        assert_eq!(best.1, vec![0, 0, 2]);
        assert_eq!(best.0, 2.0);
    }
}
