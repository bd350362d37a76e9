//! Sparse LU factorization.
//!
//! Left-looking column factorization in the Gilbert-Peierls style: for each
//! column, a depth-first search over the structure of the already-computed L
//! predicts the nonzero pattern of the triangular solve, and the numeric
//! phase runs over exactly those positions. Row pivoting is threshold
//! partial pivoting; with threshold 1.0 (the default) it is plain partial
//! pivoting. The factorization itself is single-threaded — parallelism in
//! this crate lives in the iterative path.

use crate::error::SparseError;
use crate::matrix::SparseMatrix;
use crate::perm::Permutation;
use crate::scalar::Scalar;

/// The factors and permutations of `P_r A P_c = L U`.
///
/// `l` is unit lower triangular (unit diagonal stored explicitly) and `u`
/// upper triangular, both in the pivoted coordinates: entry `(i, j)` of
/// either factor refers to pivot position `i` and column position `j`.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    pub l: SparseMatrix<T>,
    pub u: SparseMatrix<T>,
    pub row_perm: Permutation,
    pub col_perm: Permutation,
}

const UNPIVOTED: usize = usize::MAX;

/// Factorizes `a` with the given column permutation (typically from
/// `amd_order`) and pivot threshold in `(0, 1]`.
///
/// A column with no usable pivot (structurally empty or exactly zero after
/// elimination) is reported as singular, naming the original column index.
pub fn lu_factorize<T: Scalar>(
    a: &SparseMatrix<T>,
    col_perm: &Permutation,
    pivot_threshold: f64,
) -> Result<LuFactors<T>, SparseError> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(SparseError::NotSquare {
            op: "lu_factorize",
            n_rows: a.n_rows(),
            n_cols: a.n_cols(),
        });
    }
    if col_perm.len() != n {
        return Err(SparseError::DimensionMismatch {
            context: "lu_factorize column permutation",
            expected: n,
            got: col_perm.len(),
        });
    }
    let threshold = pivot_threshold.clamp(0.0, 1.0);

    // Compressed-column view of A, derived on demand.
    let a_csc = a.transpose();

    // L columns as (original row, value) with the pivot row first; pivot row
    // positions are only final once every column is processed.
    let mut l_cols: Vec<Vec<(usize, T)>> = Vec::with_capacity(n);
    let mut u_cols: Vec<Vec<(usize, T)>> = Vec::with_capacity(n);
    let mut pinv = vec![UNPIVOTED; n]; // original row -> pivot position

    // Dense workspace.
    let mut x = vec![T::ZERO; n];
    let mut visited = vec![0u64; n];
    let mut stamp = 0u64;
    let mut topo: Vec<usize> = Vec::with_capacity(n);
    let mut dfs_stack: Vec<(usize, usize)> = Vec::new();

    for k in 0..n {
        let col = col_perm.inverse(k);
        let (a_rows, a_vals) = a_csc.row(col);

        // Symbolic: reach of the column pattern through pivoted L columns,
        // emitted in postorder so `topo` reversed is a topological order.
        stamp += 1;
        topo.clear();
        for &r0 in a_rows {
            if visited[r0] == stamp {
                continue;
            }
            visited[r0] = stamp;
            dfs_stack.push((r0, 0));
            while let Some((r, cursor)) = dfs_stack.pop() {
                let p = pinv[r];
                if p == UNPIVOTED {
                    topo.push(r);
                    continue;
                }
                // Children of a pivoted row are the subdiagonal rows of its
                // L column (entry 0 is the pivot itself).
                let children = &l_cols[p];
                let mut k = cursor;
                let mut descended = false;
                while k + 1 < children.len() {
                    let child = children[k + 1].0;
                    k += 1;
                    if visited[child] != stamp {
                        visited[child] = stamp;
                        dfs_stack.push((r, k));
                        dfs_stack.push((child, 0));
                        descended = true;
                        break;
                    }
                }
                if !descended {
                    topo.push(r);
                }
            }
        }

        // Numeric: scatter the column, then eliminate in topological order
        // (reverse of the emitted postorder).
        for (&r, &v) in a_rows.iter().zip(a_vals) {
            x[r] = v;
        }
        for &r in topo.iter().rev() {
            let p = pinv[r];
            if p == UNPIVOTED {
                continue;
            }
            let xr = x[r];
            if xr != T::ZERO {
                for &(s, lv) in &l_cols[p][1..] {
                    if visited[s] != stamp {
                        // Fill-in below a pivot reached numerically but not
                        // in the scatter set: the DFS guarantees s is in the
                        // reach, so this cannot happen; keep the guard cheap.
                        debug_assert!(false, "reach missed row {s}");
                    }
                    x[s] -= xr * lv;
                }
            }
        }

        // Split reach into U entries (pivoted rows) and pivot candidates.
        let mut u_col: Vec<(usize, T)> = Vec::new();
        let mut candidates: Vec<usize> = Vec::new();
        for &r in topo.iter().rev() {
            if pinv[r] == UNPIVOTED {
                candidates.push(r);
            } else {
                u_col.push((pinv[r], x[r]));
            }
        }

        // Threshold partial pivoting: prefer the natural diagonal row when
        // it is within `threshold` of the largest candidate.
        let mut best: Option<(usize, f64)> = None;
        for &r in &candidates {
            let m = x[r].modulus();
            match best {
                Some((br, bm)) if bm > m || (bm == m && br < r) => {}
                _ => best = Some((r, m)),
            }
        }
        let (max_row, max_mod) = match best {
            Some(b) if b.1 > 0.0 => b,
            _ => {
                return Err(SparseError::SingularColumn { column: col });
            }
        };
        let pivot_row = if threshold < 1.0 {
            match candidates.iter().find(|&&r| r == col) {
                Some(&diag) if x[diag].modulus() >= threshold * max_mod => diag,
                _ => max_row,
            }
        } else {
            max_row
        };

        let pivot_val = x[pivot_row];
        pinv[pivot_row] = k;
        u_col.push((k, pivot_val));

        let mut l_col: Vec<(usize, T)> = Vec::with_capacity(candidates.len());
        l_col.push((pivot_row, T::ONE));
        for &r in &candidates {
            if r != pivot_row {
                l_col.push((r, x[r] / pivot_val));
            }
        }

        // Reset workspace for the next column.
        for &r in &topo {
            x[r] = T::ZERO;
        }

        l_cols.push(l_col);
        u_cols.push(u_col);
    }

    // Assemble CSR factors in pivoted coordinates.
    let mut l_triplets: Vec<(usize, usize, T)> = Vec::new();
    let mut u_triplets: Vec<(usize, usize, T)> = Vec::new();
    for (k, col) in l_cols.iter().enumerate() {
        for &(r, v) in col {
            l_triplets.push((pinv[r], k, v));
        }
    }
    for (k, col) in u_cols.iter().enumerate() {
        for &(r, v) in col {
            u_triplets.push((r, k, v));
        }
    }

    Ok(LuFactors {
        l: SparseMatrix::from_triplets(n, n, &l_triplets)?,
        u: SparseMatrix::from_triplets(n, n, &u_triplets)?,
        row_perm: Permutation::from_forward(pinv)?,
        col_perm: col_perm.clone(),
    })
}

/// Solves `A x = b` given the factors of `P_r A P_c = L U`.
pub fn lu_solve<T: Scalar>(factors: &LuFactors<T>, b: &[T]) -> Result<Vec<T>, SparseError> {
    let n = factors.l.n_rows();
    if b.len() != n {
        return Err(SparseError::DimensionMismatch {
            context: "lu_solve right-hand side",
            expected: n,
            got: b.len(),
        });
    }

    // Forward substitution on the row-permuted right-hand side.
    let mut z = factors.row_perm.permute_vec(b)?;
    for i in 0..n {
        let (cols, vals) = factors.l.row(i);
        let mut acc = z[i];
        for (&j, &v) in cols.iter().zip(vals) {
            if j < i {
                acc -= v * z[j];
            }
        }
        z[i] = acc; // unit diagonal
    }

    // Back substitution.
    for i in (0..n).rev() {
        let (cols, vals) = factors.u.row(i);
        let mut acc = z[i];
        let mut diag = T::ZERO;
        for (&j, &v) in cols.iter().zip(vals) {
            if j > i {
                acc -= v * z[j];
            } else if j == i {
                diag = v;
            }
        }
        z[i] = acc / diag;
    }

    // Undo the column permutation.
    factors.col_perm.unpermute_vec(&z)
}
