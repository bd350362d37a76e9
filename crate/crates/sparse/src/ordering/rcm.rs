//! Reverse Cuthill-McKee bandwidth-reducing ordering.

use crate::error::SparseError;
use crate::matrix::SparsityPattern;
use crate::perm::Permutation;

/// Reverse Cuthill-McKee ordering of a square pattern (symmetrized
/// internally).
///
/// Each connected component is traversed breadth-first from a
/// pseudo-peripheral vertex (found by repeated BFS level maximization),
/// neighbors visited in order of increasing degree with ties broken by the
/// lowest vertex index, and the component's ordering is then reversed.
/// Components are processed in order of their lowest-index vertex, so the
/// result is deterministic; a pattern with no off-diagonal entries yields the
/// identity permutation.
pub fn rcm_order(pattern: SparsityPattern<'_>) -> Result<Permutation, SparseError> {
    if pattern.n_rows != pattern.n_cols {
        return Err(SparseError::NotSquare {
            op: "rcm_order",
            n_rows: pattern.n_rows,
            n_cols: pattern.n_cols,
        });
    }
    let n = pattern.n_rows;
    let adj = pattern.symmetric_adjacency();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();

    let mut forward = vec![usize::MAX; n];
    let mut visited = vec![false; n];
    let mut position = 0usize;
    let mut component = Vec::new();

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(seed, &adj, &degree);

        // Cuthill-McKee breadth-first order over this component.
        component.clear();
        component.push(root);
        visited[root] = true;
        let mut head = 0;
        let mut nbrs: Vec<usize> = Vec::new();
        while head < component.len() {
            let v = component[head];
            head += 1;
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&u| !visited[u]));
            nbrs.sort_unstable_by_key(|&u| (degree[u], u));
            for &u in &nbrs {
                visited[u] = true;
                component.push(u);
            }
        }

        // Reverse within the component; distinct components keep their
        // discovery order (this is what makes an empty pattern the identity).
        for (k, &v) in component.iter().rev().enumerate() {
            forward[v] = position + k;
        }
        position += component.len();
    }

    Permutation::from_forward(forward)
}

/// BFS level structure from `root`: `(levels, eccentricity, last_level)`.
fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> (Vec<usize>, usize, Vec<usize>) {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut queue = vec![root];
    let mut head = 0;
    let mut ecc = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for &u in &adj[v] {
            if level[u] == usize::MAX {
                level[u] = level[v] + 1;
                ecc = ecc.max(level[u]);
                queue.push(u);
            }
        }
    }
    let last: Vec<usize> = queue
        .iter()
        .copied()
        .filter(|&v| level[v] == ecc)
        .collect();
    (level, ecc, last)
}

/// George-Liu pseudo-peripheral vertex search starting from `seed`.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = seed;
    let (_, mut ecc, mut last) = bfs_levels(root, adj);
    loop {
        // Lowest-degree vertex of the last level, ties by lowest index.
        let candidate = last
            .iter()
            .copied()
            .min_by_key(|&v| (degree[v], v))
            .expect("last BFS level is never empty");
        if candidate == root {
            return root;
        }
        let (_, cand_ecc, cand_last) = bfs_levels(candidate, adj);
        if cand_ecc > ecc {
            root = candidate;
            ecc = cand_ecc;
            last = cand_last;
        } else {
            return root;
        }
    }
}

/// Bandwidth of a pattern under a symmetric permutation: the largest
/// `|p(i) - p(j)|` over structural entries. Diagnostic used by tests.
pub fn bandwidth(pattern: SparsityPattern<'_>, perm: &Permutation) -> usize {
    let mut bw = 0usize;
    for i in 0..pattern.n_rows {
        for &j in pattern.row(i) {
            bw = bw.max(perm.forward(i).abs_diff(perm.forward(j)));
        }
    }
    bw
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SparseMatrix;

    fn pattern_of(edges: &[(usize, usize)], n: usize) -> SparseMatrix<f64> {
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.0));
        }
        for &(a, b) in edges {
            t.push((a, b, 1.0));
            t.push((b, a, 1.0));
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn path_graph_reaches_bandwidth_one() {
        let a = pattern_of(&[(0, 1), (1, 2), (2, 3)], 4);
        let p = rcm_order(a.pattern()).unwrap();
        assert_eq!(bandwidth(a.pattern(), &p), 1);
    }

    #[test]
    fn empty_pattern_gives_identity() {
        let a = pattern_of(&[], 5);
        let p = rcm_order(a.pattern()).unwrap();
        assert!(p.is_identity());
    }

    #[test]
    fn never_worse_than_input_on_small_graphs() {
        // A scrambled path: identity ordering has large bandwidth.
        let a = pattern_of(&[(0, 4), (4, 2), (2, 3), (3, 1)], 5);
        let p = rcm_order(a.pattern()).unwrap();
        let before = bandwidth(a.pattern(), &Permutation::identity(5));
        let after = bandwidth(a.pattern(), &p);
        assert!(after <= before);
        assert_eq!(after, 1);
    }

    #[test]
    fn deterministic_across_calls() {
        let a = pattern_of(&[(0, 1), (0, 2), (0, 3), (2, 4), (3, 4)], 5);
        let p1 = rcm_order(a.pattern()).unwrap();
        let p2 = rcm_order(a.pattern()).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn disconnected_components_are_each_ordered() {
        let a = pattern_of(&[(0, 1), (3, 4)], 6);
        let p = rcm_order(a.pattern()).unwrap();
        assert!(bandwidth(a.pattern(), &p) <= 1);
        // Vertex 5 is isolated and keeps a valid slot.
        assert!(p.forward(5) < 6);
    }

    #[test]
    fn rejects_rectangular_patterns() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(
            rcm_order(a.pattern()),
            Err(SparseError::NotSquare { .. })
        ));
    }
}
