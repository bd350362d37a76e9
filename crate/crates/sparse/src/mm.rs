//! Matrix Market coordinate import/export (debugging aid).
//!
//! Supports the `coordinate` layout with `general` symmetry for real and
//! complex matrices; indices are 1-based in the text form.

use num_complex::Complex64;

use crate::error::SparseError;
use crate::matrix::SparseMatrix;
use crate::scalar::Scalar;

/// Scalars that know their Matrix Market field name and entry layout.
pub trait MmScalar: Scalar {
    const FIELD: &'static str;
    fn write_entry(&self, out: &mut String);
    fn parse_entry(tokens: &[&str], line: usize) -> Result<Self, SparseError>;
}

fn parse_token(tok: &str, line: usize) -> Result<f64, SparseError> {
    tok.parse::<f64>().map_err(|_| SparseError::MatrixMarket {
        line,
        message: format!("invalid numeric value `{tok}`"),
    })
}

impl MmScalar for f64 {
    const FIELD: &'static str = "real";

    fn write_entry(&self, out: &mut String) {
        out.push_str(&format!("{self:?}"));
    }

    fn parse_entry(tokens: &[&str], line: usize) -> Result<Self, SparseError> {
        if tokens.len() != 1 {
            return Err(SparseError::MatrixMarket {
                line,
                message: format!("expected 1 value field, got {}", tokens.len()),
            });
        }
        parse_token(tokens[0], line)
    }
}

impl MmScalar for Complex64 {
    const FIELD: &'static str = "complex";

    fn write_entry(&self, out: &mut String) {
        out.push_str(&format!("{:?} {:?}", self.re, self.im));
    }

    fn parse_entry(tokens: &[&str], line: usize) -> Result<Self, SparseError> {
        if tokens.len() != 2 {
            return Err(SparseError::MatrixMarket {
                line,
                message: format!("expected 2 value fields, got {}", tokens.len()),
            });
        }
        Ok(Complex64::new(
            parse_token(tokens[0], line)?,
            parse_token(tokens[1], line)?,
        ))
    }
}

/// Serializes a matrix in Matrix Market coordinate form.
pub fn write_matrix_market<T: MmScalar>(a: &SparseMatrix<T>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "%%MatrixMarket matrix coordinate {} general\n",
        T::FIELD
    ));
    out.push_str(&format!("{} {} {}\n", a.n_rows(), a.n_cols(), a.nnz()));
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, v) in cols.iter().zip(vals) {
            out.push_str(&format!("{} {} ", i + 1, j + 1));
            v.write_entry(&mut out);
            out.push('\n');
        }
    }
    out
}

/// Parses a Matrix Market coordinate file.
pub fn parse_matrix_market<T: MmScalar>(text: &str) -> Result<SparseMatrix<T>, SparseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (line_no, header) = lines.next().ok_or(SparseError::MatrixMarket {
        line: 0,
        message: "empty input".into(),
    })?;
    let head_fields: Vec<&str> = header.split_whitespace().collect();
    if head_fields.len() != 5
        || !head_fields[0].eq_ignore_ascii_case("%%MatrixMarket")
        || !head_fields[1].eq_ignore_ascii_case("matrix")
        || !head_fields[2].eq_ignore_ascii_case("coordinate")
        || !head_fields[4].eq_ignore_ascii_case("general")
    {
        return Err(SparseError::MatrixMarket {
            line: line_no,
            message: format!("unsupported header `{header}`"),
        });
    }
    if !head_fields[3].eq_ignore_ascii_case(T::FIELD) {
        return Err(SparseError::MatrixMarket {
            line: line_no,
            message: format!("expected field `{}`, found `{}`", T::FIELD, head_fields[3]),
        });
    }

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, T)> = Vec::new();
    for (line_no, line) in lines {
        if line.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let parse_idx = |tok: &str| -> Result<usize, SparseError> {
            tok.parse::<usize>().map_err(|_| SparseError::MatrixMarket {
                line: line_no,
                message: format!("invalid index `{tok}`"),
            })
        };
        match dims {
            None => {
                if tokens.len() != 3 {
                    return Err(SparseError::MatrixMarket {
                        line: line_no,
                        message: "size line must have 3 fields".into(),
                    });
                }
                dims = Some((
                    parse_idx(tokens[0])?,
                    parse_idx(tokens[1])?,
                    parse_idx(tokens[2])?,
                ));
            }
            Some(_) => {
                if tokens.len() < 2 {
                    return Err(SparseError::MatrixMarket {
                        line: line_no,
                        message: "entry line must start with row and column".into(),
                    });
                }
                let (i, j) = (parse_idx(tokens[0])?, parse_idx(tokens[1])?);
                if i == 0 || j == 0 {
                    return Err(SparseError::MatrixMarket {
                        line: line_no,
                        message: "indices are 1-based".into(),
                    });
                }
                let v = T::parse_entry(&tokens[2..], line_no)?;
                triplets.push((i - 1, j - 1, v));
            }
        }
    }

    let (n_rows, n_cols, nnz) = dims.ok_or(SparseError::MatrixMarket {
        line: 0,
        message: "missing size line".into(),
    })?;
    if triplets.len() != nnz {
        return Err(SparseError::MatrixMarket {
            line: 0,
            message: format!("size line promised {nnz} entries, found {}", triplets.len()),
        });
    }
    SparseMatrix::from_triplets(n_rows, n_cols, &triplets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_roundtrip() {
        let a = SparseMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 1.5), (2, 1, -0.25), (1, 0, 1.0e-12)],
        )
        .unwrap();
        let text = write_matrix_market(&a);
        let b: SparseMatrix<f64> = parse_matrix_market(&text).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn complex_roundtrip() {
        let a = SparseMatrix::from_triplets(
            2,
            2,
            &[
                (0, 0, Complex64::new(1.0, -2.0)),
                (1, 0, Complex64::new(0.0, 3.5)),
            ],
        )
        .unwrap();
        let text = write_matrix_market(&a);
        let b: SparseMatrix<Complex64> = parse_matrix_market(&text).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn field_mismatch_is_reported() {
        let a = SparseMatrix::<f64>::identity(1);
        let text = write_matrix_market(&a);
        let err = parse_matrix_market::<Complex64>(&text).unwrap_err();
        assert!(matches!(err, SparseError::MatrixMarket { line: 1, .. }));
    }
}
