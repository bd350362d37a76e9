use crate::error::SparseError;
use crate::par;
use crate::perm::Permutation;
use crate::scalar::Scalar;

/// Sparse matrix in compressed sparse row (CSR) form.
///
/// Column indices within each row are strictly increasing and duplicate
/// entries are summed at construction, so every structural position appears
/// exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<T>,
}

/// Structure-only view of a matrix (no values), used by the orderings.
#[derive(Debug, Clone, Copy)]
pub struct SparsityPattern<'a> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: &'a [usize],
    pub col_indices: &'a [usize],
}

impl<'a> SparsityPattern<'a> {
    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row(&self, i: usize) -> &'a [usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    /// Adjacency lists of the symmetrized graph of a square pattern
    /// (union of the pattern and its transpose, self-loops dropped, each
    /// list sorted and deduplicated).
    pub fn symmetric_adjacency(&self) -> Vec<Vec<usize>> {
        debug_assert_eq!(self.n_rows, self.n_cols);
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.n_rows];
        for i in 0..self.n_rows {
            for &j in self.row(i) {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds a matrix from `(row, col, value)` triplets.
    ///
    /// Duplicate coordinates are summed (in the order they appear); any
    /// coordinate outside the matrix is an error naming the offending entry.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self, SparseError> {
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(SparseError::TripletOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
        }

        // Count entries per row, then bucket triplets in input order so the
        // later duplicate summation is deterministic.
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut order = vec![0usize; triplets.len()];
        let mut cursor = counts.clone();
        for (k, &(r, _, _)) in triplets.iter().enumerate() {
            order[cursor[r]] = k;
            cursor[r] += 1;
        }

        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);

        let mut row_entries: Vec<(usize, usize)> = Vec::new(); // (col, triplet index)
        for r in 0..n_rows {
            row_entries.clear();
            for &k in &order[counts[r]..counts[r + 1]] {
                row_entries.push((triplets[k].1, k));
            }
            // Stable by construction: ties keep input order for summation.
            row_entries.sort_by_key(|&(c, _)| c);
            let mut e = 0;
            while e < row_entries.len() {
                let col = row_entries[e].0;
                let mut v = triplets[row_entries[e].1].2;
                e += 1;
                while e < row_entries.len() && row_entries[e].0 == col {
                    v += triplets[row_entries[e].1].2;
                    e += 1;
                }
                col_indices.push(col);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }

        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![T::ONE; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> SparsityPattern<'_> {
        SparsityPattern {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets: &self.row_offsets,
            col_indices: &self.col_indices,
        }
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[range.clone()], &self.values[range])
    }

    /// Value at `(i, j)`, zero if the position is not structural.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::ZERO,
        }
    }

    /// The main diagonal (zero where not structural).
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Sparse matrix-vector product `y = A x`, parallel over contiguous row
    /// blocks of `ceil(n_rows / thread_count)`.
    ///
    /// Every output row is computed by exactly one task in storage order, so
    /// the result is bit-identical for every `thread_count`.
    pub fn spmv(&self, x: &[T], thread_count: usize) -> Result<Vec<T>, SparseError> {
        if x.len() != self.n_cols {
            return Err(SparseError::DimensionMismatch {
                context: "spmv input vector",
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut y = vec![T::ZERO; self.n_rows];
        par::fill_blocks(&mut y, thread_count, |range, chunk| {
            let base = range.start;
            for i in range {
                let mut acc = T::ZERO;
                for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                    acc += self.values[k] * x[self.col_indices[k]];
                }
                chunk[i - base] = acc;
            }
        });
        Ok(y)
    }

    /// Returns `B` with `B[row_perm(i), col_perm(j)] = A[i, j]`.
    pub fn permute(
        &self,
        row_perm: &Permutation,
        col_perm: &Permutation,
    ) -> Result<Self, SparseError> {
        if row_perm.len() != self.n_rows {
            return Err(SparseError::DimensionMismatch {
                context: "row permutation",
                expected: self.n_rows,
                got: row_perm.len(),
            });
        }
        if col_perm.len() != self.n_cols {
            return Err(SparseError::DimensionMismatch {
                context: "column permutation",
                expected: self.n_cols,
                got: col_perm.len(),
            });
        }

        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        let mut entries: Vec<(usize, T)> = Vec::new();
        for new_row in 0..self.n_rows {
            let old_row = row_perm.inverse(new_row);
            let (cols, vals) = self.row(old_row);
            entries.clear();
            entries.extend(
                cols.iter()
                    .zip(vals)
                    .map(|(&c, &v)| (col_perm.forward(c), v)),
            );
            entries.sort_unstable_by_key(|&(c, _)| c);
            for &(c, v) in &entries {
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }

        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Transpose (also serves as the compressed-column view of `self`).
    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let row_offsets = counts.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![T::ZERO; self.nnz()];
        let mut cursor = counts;
        for r in 0..self.n_rows {
            for k in self.row_offsets[r]..self.row_offsets[r + 1] {
                let c = self.col_indices[k];
                col_indices[cursor[c]] = r;
                values[cursor[c]] = self.values[k];
                cursor[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Dense copy, for tests and debugging only.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut dense = vec![vec![T::ZERO; self.n_cols]; self.n_rows];
        for (i, dense_row) in dense.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                dense_row[c] = v;
            }
        }
        dense
    }

    /// Largest entry modulus (zero for an empty matrix).
    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.modulus()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort_columns() {
        let a =
            SparseMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (0, 0, 1.0), (1, 1, 2.0), (0, 0, 0.5)])
                .unwrap();
        assert_eq!(a.get(0, 0), 1.5);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(1, 1), 2.0);
        assert_eq!(a.nnz(), 3);
        let (cols, _) = a.row(0);
        assert_eq!(cols, &[0, 1]);
    }

    #[test]
    fn triplets_out_of_range_name_the_entry() {
        let err = SparseMatrix::from_triplets(2, 2, &[(3, 0, 1.0)]).unwrap_err();
        match err {
            SparseError::TripletOutOfRange { row, col, .. } => {
                assert_eq!((row, col), (3, 0));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn spmv_identity() {
        let a = SparseMatrix::<f64>::identity(2);
        let y = a.spmv(&[3.0, 4.0], 1).unwrap();
        assert_eq!(y, vec![3.0, 4.0]);
    }

    #[test]
    fn spmv_rejects_wrong_length() {
        let a = SparseMatrix::<f64>::identity(3);
        assert!(matches!(
            a.spmv(&[1.0, 2.0], 1),
            Err(SparseError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn spmv_thread_counts_are_bit_identical() {
        // Deterministic pseudo-random sparse matrix, ~5 entries per row.
        let n = 1000;
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut triplets = Vec::new();
        for i in 0..n {
            for _ in 0..5 {
                let j = (next() % n as u64) as usize;
                let v = (next() % 1000) as f64 / 350.0 - 1.0;
                triplets.push((i, j, v));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &triplets).unwrap();
        let x: Vec<f64> = (0..n).map(|i| ((i * 37) % 101) as f64 / 17.0).collect();
        let y1 = a.spmv(&x, 1).unwrap();
        for t in [2, 3, 8, 64] {
            let yt = a.spmv(&x, t).unwrap();
            assert!(
                y1.iter().zip(&yt).all(|(a, b)| a.to_bits() == b.to_bits()),
                "thread_count {t} changed spmv bits"
            );
        }
    }

    #[test]
    fn permute_swaps_rows_and_columns() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 2.0)]).unwrap();
        let p = Permutation::from_forward(vec![1, 0]).unwrap();
        let b = a.permute(&p, &p).unwrap();
        assert_eq!(b.to_dense(), vec![vec![2.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn permute_roundtrip_restores_matrix() {
        let a = SparseMatrix::from_triplets(
            3,
            3,
            &[(0, 2, 1.0), (1, 0, -2.0), (2, 1, 5.0), (2, 2, 0.5)],
        )
        .unwrap();
        let p = Permutation::from_forward(vec![2, 0, 1]).unwrap();
        let q = Permutation::from_forward(vec![1, 2, 0]).unwrap();
        let b = a.permute(&p, &q).unwrap();
        // Invert by permuting with the inverse maps.
        let pi = Permutation::from_forward(p.inverse_slice().to_vec()).unwrap();
        let qi = Permutation::from_forward(q.inverse_slice().to_vec()).unwrap();
        let back = b.permute(&pi, &qi).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 3.0), (1, 2, -1.0)])
            .unwrap();
        let t = a.transpose();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.get(2, 0), 1.0);
        assert_eq!(t.transpose(), a);
    }
}
