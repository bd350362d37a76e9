use crate::error::SparseError;

/// A permutation of `0..len`, stored with both direction maps so either
/// lookup is O(1).
///
/// `forward[old] = new` and `inverse[new] = old`; composing the two maps in
/// either order yields the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn identity(len: usize) -> Self {
        let forward: Vec<usize> = (0..len).collect();
        Permutation {
            inverse: forward.clone(),
            forward,
        }
    }

    /// Builds a permutation from its forward map (`forward[old] = new`),
    /// rejecting anything that is not a bijection on `0..len`.
    pub fn from_forward(forward: Vec<usize>) -> Result<Self, SparseError> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (old, &new) in forward.iter().enumerate() {
            if new >= n {
                return Err(SparseError::InvalidPermutation {
                    reason: format!("image {new} of index {old} is out of range for length {n}"),
                });
            }
            if inverse[new] != usize::MAX {
                return Err(SparseError::InvalidPermutation {
                    reason: format!("indices {} and {old} both map to {new}", inverse[new]),
                });
            }
            inverse[new] = old;
        }
        Ok(Permutation { forward, inverse })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &p)| i == p)
    }

    /// New position of old index `i`.
    pub fn forward(&self, i: usize) -> usize {
        self.forward[i]
    }

    /// Old index at new position `i`.
    pub fn inverse(&self, i: usize) -> usize {
        self.inverse[i]
    }

    /// The inverse permutation as its own object.
    pub fn inverted(&self) -> Permutation {
        Permutation {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    pub fn forward_slice(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse_slice(&self) -> &[usize] {
        &self.inverse
    }

    /// Applies the permutation to a vector: `out[forward[i]] = x[i]`.
    pub fn permute_vec<T: Copy>(&self, x: &[T]) -> Result<Vec<T>, SparseError> {
        if x.len() != self.len() {
            return Err(SparseError::DimensionMismatch {
                context: "permute_vec input",
                expected: self.len(),
                got: x.len(),
            });
        }
        let mut out = x.to_vec();
        for (i, &v) in x.iter().enumerate() {
            out[self.forward[i]] = v;
        }
        Ok(out)
    }

    /// Undoes `permute_vec`: `out[i] = x[forward[i]]`.
    pub fn unpermute_vec<T: Copy>(&self, x: &[T]) -> Result<Vec<T>, SparseError> {
        if x.len() != self.len() {
            return Err(SparseError::DimensionMismatch {
                context: "unpermute_vec input",
                expected: self.len(),
                got: x.len(),
            });
        }
        let mut out = x.to_vec();
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = x[self.forward[i]];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_forward_roundtrips_both_directions() {
        let p = Permutation::from_forward(vec![2, 0, 1]).unwrap();
        for i in 0..3 {
            assert_eq!(p.inverse(p.forward(i)), i);
            assert_eq!(p.forward(p.inverse(i)), i);
        }
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::from_forward(vec![0, 0]).is_err());
        assert!(Permutation::from_forward(vec![1, 2]).is_err());
    }

    #[test]
    fn permute_then_unpermute_is_identity() {
        let p = Permutation::from_forward(vec![3, 1, 0, 2]).unwrap();
        let x = [10.0, 20.0, 30.0, 40.0];
        let y = p.permute_vec(&x).unwrap();
        assert_eq!(p.unpermute_vec(&y).unwrap(), x);
        // Spot-check placement: old index 0 lands at position 3.
        assert_eq!(y[3], 10.0);
    }

    #[test]
    fn identity_is_identity() {
        let p = Permutation::identity(5);
        assert!(p.is_identity());
        assert_eq!(p.permute_vec(&[1, 2, 3, 4, 5]).unwrap(), vec![1, 2, 3, 4, 5]);
    }
}
