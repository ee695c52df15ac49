//! Compressed sparse row matrix.

use std::io::{self, Write};

use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from `(row, col, value)` triplets, summing duplicates. Entries
    /// within a row are sorted by column.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(u32, u32, T)]) -> Self {
        let mut count = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            assert!((r as usize) < n_rows && (c as usize) < n_cols, "triplet ({r}, {c}) out of range");
            count[r as usize + 1] += 1;
        }
        for i in 0..n_rows {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut tmp: Vec<(u32, T)> = vec![(0, T::zero()); triplets.len()];
        for &(r, c, v) in triplets {
            tmp[next[r as usize]] = (c, v);
            next[r as usize] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n_rows {
            let row = &mut tmp[count[i]..count[i + 1]];
            row.sort_unstable_by_key(|e| e.0);
            for &(c, v) in row.iter() {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// From CSR arrays with strictly increasing columns in every row.
    pub fn from_parts(n_rows: usize, n_cols: usize, row_ptr: Vec<usize>, col_idx: Vec<u32>, values: Vec<T>) -> Self {
        assert_eq!(row_ptr.len(), n_rows + 1);
        assert_eq!(row_ptr[n_rows], col_idx.len());
        assert_eq!(col_idx.len(), values.len());
        debug_assert!((0..n_rows).all(|i| col_idx[row_ptr[i]..row_ptr[i + 1]].windows(2).all(|w| w[0] < w[1])));
        debug_assert!(col_idx.iter().all(|&c| (c as usize) < n_cols));
        Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
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

    /// `(col, value)` pairs of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (u32, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (u32, u32, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(c, v)| (i as u32, c, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.values[r.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(c, v)| v * x[c as usize]).sum())
            .collect()
    }

    pub fn matvec_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = vec![T::zero(); self.n_cols];
        for (i, xi) in x.iter().enumerate() {
            for (c, v) in self.row(i) {
                y[c as usize] += v * *xi;
            }
        }
        y
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn norm_fro(&self) -> T {
        self.values.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n_cols]; self.n_rows];
        for (i, j, v) in self.triplets() {
            d[i as usize][j as usize] = v;
        }
        d
    }

    /// `row col value` lines, zero-based, preceded by a size header.
    pub fn write_coo<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "% {} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {:.17e}", v.to_f64_lossy())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 3.0), (0, 0, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 4.0);
        assert_eq!(m.get(0, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 2.0]);
        assert_eq!(m.matvec_transpose(&[1.0, 1.0]), vec![1.0, 0.0, 4.0]);
        assert_eq!(m.norm_inf(), 5.0);
    }

    #[test]
    fn coo_dump_roundtrips() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 0.1), (1, 0, -2.5)]);
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let trips: Vec<(u32, u32, f64)> = text
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
            })
            .collect();
        assert_eq!(CsrMatrix::from_triplets(2, 2, &trips), m);
    }
}
