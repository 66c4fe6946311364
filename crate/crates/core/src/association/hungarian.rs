//! Maximum-weight linear assignment (Kuhn-Munkres with potentials).

use crate::error::{Error, Result};

/// Dense row-major value matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ValueMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged value matrix".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// Column matched to each row.
    pub row_to_col: Vec<Option<usize>>,
    pub value: f64,
}

/// Maximum-total-value matching; every row and column is used at most once.
///
/// Rows may stay unmatched when that is better (negative values). Among
/// equal-value alternatives the scan prefers lower column indices.
pub fn hungarian(values: &ValueMatrix) -> Result<Matching> {
    for r in 0..values.rows {
        for c in 0..values.cols {
            let v = values.get(r, c);
            if v.is_nan() {
                return Err(Error::NanValue { row: r, col: c });
            }
            if v.is_infinite() {
                return Err(Error::InvalidArgument(format!("infinite value at ({r}, {c})")));
            }
        }
    }
    if values.rows == 0 || values.cols == 0 {
        return Ok(Matching {
            row_to_col: vec![None; values.rows],
            value: 0.0,
        });
    }
    if values.rows > values.cols {
        let t = hungarian(&values.transpose())?;
        let mut row_to_col = vec![None; values.rows];
        for (c, r) in t.row_to_col.iter().enumerate() {
            if let Some(r) = *r {
                row_to_col[r] = Some(c);
            }
        }
        return Ok(Matching { row_to_col, value: t.value });
    }

    // Negative entries: pad with one zero column per row so that "unmatched"
    // is always available.
    let pad = if values.data.iter().any(|&v| v < 0.0) { values.rows } else { 0 };
    let n = values.rows;
    let m = values.cols + pad;
    let cost = |i: usize, j: usize| -> f64 {
        if j < values.cols {
            -values.get(i, j)
        } else {
            0.0
        }
    };

    // 1-based potentials; column 0 is the virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
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
            for j in 0..=m {
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
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; n];
    let mut value = 0.0;
    for j in 1..=values.cols {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = Some(j - 1);
            value += values.get(p[j] - 1, j - 1);
        }
    }
    Ok(Matching { row_to_col, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> ValueMatrix {
        ValueMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_by_two_anti_diagonal() {
        let r = hungarian(&m(&[&[1.0, 2.0], &[2.0, 1.0]])).unwrap();
        assert_eq!(r.row_to_col, vec![Some(1), Some(0)]);
        assert_eq!(r.value, 4.0);
    }

    #[test]
    fn diagonal() {
        let r = hungarian(&m(&[&[5.0, 0.0], &[0.0, 5.0]])).unwrap();
        assert_eq!(r.row_to_col, vec![Some(0), Some(1)]);
        assert_eq!(r.value, 10.0);
    }

    #[test]
    fn single_row_argmax() {
        let r = hungarian(&m(&[&[0.0, 7.0, 3.0]])).unwrap();
        assert_eq!(r.row_to_col, vec![Some(1)]);
        assert_eq!(r.value, 7.0);
    }

    #[test]
    fn tall_matrix_is_transposed() {
        let r = hungarian(&m(&[&[1.0], &[9.0], &[4.0]])).unwrap();
        assert_eq!(r.row_to_col, vec![None, Some(0), None]);
        assert_eq!(r.value, 9.0);
    }

    #[test]
    fn negative_rows_stay_unmatched() {
        let r = hungarian(&m(&[&[-1.0, -2.0], &[3.0, -1.0]])).unwrap();
        assert_eq!(r.row_to_col, vec![None, Some(0)]);
        assert_eq!(r.value, 3.0);
    }

    #[test]
    fn nan_rejected() {
        let err = hungarian(&m(&[&[1.0, f64::NAN]])).unwrap_err();
        assert!(matches!(err, Error::NanValue { row: 0, col: 1 }));
    }

    #[test]
    fn ties_prefer_lower_columns() {
        let r = hungarian(&m(&[&[3.0, 3.0, 3.0]])).unwrap();
        assert_eq!(r.row_to_col, vec![Some(0)]);
    }

    #[test]
    fn empty_inputs() {
        assert_eq!(hungarian(&ValueMatrix::zeros(0, 4)).unwrap().value, 0.0);
        assert_eq!(hungarian(&ValueMatrix::zeros(2, 0)).unwrap().row_to_col, vec![None, None]);
    }
}
