//! Unit-mass null vector by ILU(0)-preconditioned restarted GMRES on the
//! bordered system: one row of `A` replaced by the mass weights.

use log::debug;

use crate::fem::CsrMatrix;
use crate::Real;

struct Csr<T> {
    ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// `A` with row `r` replaced by `w`.
    fn bordered(a: &CsrMatrix<T>, w: &[T], r: usize) -> Self {
        let n = a.n_rows();
        let mut ptr = Vec::with_capacity(n + 1);
        let mut col = Vec::with_capacity(a.nnz() + n);
        let mut val = Vec::with_capacity(a.nnz() + n);
        ptr.push(0);
        for i in 0..n {
            if i == r {
                col.extend(0..n as u32);
                val.extend_from_slice(w);
            } else {
                for (c, v) in a.row(i) {
                    col.push(c);
                    val.push(v);
                }
            }
            ptr.push(col.len());
        }
        Self { ptr, col, val }
    }

    fn n(&self) -> usize {
        self.ptr.len() - 1
    }

    fn matvec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.ptr[i]..self.ptr[i + 1];
            *yi = self.col[r.clone()].iter().zip(&self.val[r]).map(|(&c, &v)| v * x[c as usize]).sum();
        }
    }
}

/// Incomplete LU on the pattern of a matrix: unit lower `L` and `U` share
/// one value array laid out like the matrix, `diag[i]` points at `U_ii`.
struct Ilu0<T> {
    val: Vec<T>,
    diag: Vec<usize>,
}

impl<T: Real> Ilu0<T> {
    /// Rows must have sorted columns and a structural diagonal.
    fn new(m: &Csr<T>) -> Self {
        let n = m.n();
        let diag: Vec<usize> = (0..n)
            .map(|i| {
                let r = m.ptr[i]..m.ptr[i + 1];
                m.ptr[i] + m.col[r].binary_search(&(i as u32)).expect("missing diagonal entry")
            })
            .collect();
        let mut val = m.val.clone();
        let floor = val.iter().fold(T::zero(), |a, v| a.max(v.abs())) * T::epsilon().sqrt();
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (m.ptr[i], m.ptr[i + 1]);
            for k in start..end {
                pos[m.col[k] as usize] = k;
            }
            for k in start..diag[i] {
                let c = m.col[k] as usize;
                let l = val[k] / val[diag[c]];
                val[k] = l;
                for q in diag[c] + 1..m.ptr[c + 1] {
                    let p = pos[m.col[q] as usize];
                    if p != usize::MAX {
                        let u = val[q];
                        val[p] -= l * u;
                    }
                }
            }
            if val[diag[i]].abs() < floor {
                val[diag[i]] = if val[diag[i]] < T::zero() { -floor } else { floor };
            }
            for k in start..end {
                pos[m.col[k] as usize] = usize::MAX;
            }
        }
        Self { val, diag }
    }

    /// `x <- (LU)^-1 x` with `m` the matrix the factors were built from.
    fn apply(&self, m: &Csr<T>, x: &mut [T]) {
        let val = &self.val;
        for i in 0..m.n() {
            let mut s = x[i];
            for k in m.ptr[i]..self.diag[i] {
                s -= val[k] * x[m.col[k] as usize];
            }
            x[i] = s;
        }
        for i in (0..m.n()).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..m.ptr[i + 1] {
                s -= val[k] * x[m.col[k] as usize];
            }
            x[i] = s / val[self.diag[i]];
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

pub(crate) struct KrylovOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Residual norm of the bordered system after each restart cycle.
    pub cycle_residuals: Vec<f64>,
    pub converged: bool,
}

/// Solves `B x = s e_r`, `B` the bordered matrix with its mass row scaled by
/// `s` to the size of a typical row of `A`. A cycle ends early once the
/// residual drops below `rel_tol |A|_F |x|`; the solve stops when
/// `converged(x)` holds after a cycle or after `max_iter` inner iterations.
pub(crate) fn bordered_null_vector<T: Real>(
    a: &CsrMatrix<T>,
    w: &[T],
    restart: usize,
    max_iter: usize,
    rel_tol: T,
    mut converged: impl FnMut(&[T]) -> bool,
) -> KrylovOutcome<T> {
    let n = a.n_rows();
    let r = n - 1;
    let scale = a.norm_fro() / (T::from_usize_lossy(n).sqrt() * dot(w, w).sqrt());
    let ws: Vec<T> = w.iter().map(|v| *v * scale).collect();
    let b_mat = Csr::bordered(a, &ws, r);
    let ilu = Ilu0::new(&b_mat);
    let mut rhs = vec![T::zero(); n];
    rhs[r] = scale;

    let total: T = w.iter().copied().sum();
    let mut x = vec![T::one() / total; n];
    let mut iterations = 0;
    let mut cycle_residuals = Vec::new();
    let mut tmp = vec![T::zero(); n];
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(restart + 1);
    let mut h = vec![vec![T::zero(); restart]; restart + 1];
    let (mut cs, mut sn) = (vec![T::zero(); restart], vec![T::zero(); restart]);

    loop {
        b_mat.matvec_into(&x, &mut tmp);
        let res: Vec<T> = rhs.iter().zip(&tmp).map(|(b, ax)| *b - *ax).collect();
        let beta = dot(&res, &res).sqrt();
        cycle_residuals.push(beta.to_f64_lossy());
        let done = converged(&x);
        let inner_tol = rel_tol * a.norm_fro() * dot(&x, &x).sqrt();
        if done || iterations >= max_iter || beta == T::zero() {
            return KrylovOutcome {
                x,
                iterations,
                cycle_residuals,
                converged: done,
            };
        }
        basis.clear();
        basis.push(res.into_iter().map(|v| v / beta).collect());
        let mut g = vec![T::zero(); restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart && iterations < max_iter {
            let mut z = basis[k].clone();
            ilu.apply(&b_mat, &mut z);
            let mut v = vec![T::zero(); n];
            b_mat.matvec_into(&z, &mut v);
            // Modified Gram-Schmidt.
            for (j, q) in basis.iter().enumerate() {
                let hj = dot(&v, q);
                h[j][k] = hj;
                axpy(-hj, q, &mut v);
            }
            let hn = dot(&v, &v).sqrt();
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + hn * hn).sqrt();
            (cs[k], sn[k]) = if d == T::zero() { (T::one(), T::zero()) } else { (h[k][k] / d, hn / d) };
            h[k][k] = d;
            h[k + 1][k] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            iterations += 1;
            k += 1;
            if hn == T::zero() || g[k].abs() <= inner_tol {
                break;
            }
            basis.push(v.into_iter().map(|e| e / hn).collect());
        }
        // Back substitution for the least-squares coefficients.
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let s = g[i] - (i + 1..k).map(|j| h[i][j] * y[j]).sum::<T>();
            y[i] = s / h[i][i];
        }
        let mut update = vec![T::zero(); n];
        for (yi, q) in y.iter().zip(&basis) {
            axpy(*yi, q, &mut update);
        }
        ilu.apply(&b_mat, &mut update);
        axpy(T::one(), &update, &mut x);
        debug!("gmres: {iterations} iterations, estimated residual {:.3e}", g[k].abs().to_f64_lossy());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i as u32, i as u32, 4.0));
            if i + 1 < n {
                t.push((i as u32, i as u32 + 1, -1.0));
                t.push((i as u32 + 1, i as u32, -2.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let w = vec![1.0; n];
        let b = Csr::bordered(&a, &w, n - 1);
        let ilu = Ilu0::new(&b);
        let x: Vec<f64> = (0..n).map(|i| i as f64 + 1.0).collect();
        let mut y = vec![0.0; n];
        b.matvec_into(&x, &mut y);
        ilu.apply(&b, &mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn birth_death_chain_null_vector() {
        // Generator of a reflecting walk, columns summing to zero; the
        // stationary law is geometric with ratio up/down.
        let (n, up, down) = (40, 1.0, 2.0);
        let mut t = Vec::new();
        for j in 0..n {
            if j + 1 < n {
                t.push((j as u32 + 1, j as u32, up));
                t.push((j as u32, j as u32, -up));
            }
            if j > 0 {
                t.push((j as u32 - 1, j as u32, down));
                t.push((j as u32, j as u32, -down));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let w = vec![1.0; n];
        let out = bordered_null_vector(&a, &w, 10, 500, 1e-14, |x| {
            let r = a.matvec(x);
            dot::<f64>(&r, &r).sqrt() < 1e-12
        });
        assert!(out.converged);
        assert!(out.cycle_residuals.len() >= 2);
        let z: f64 = (0..n).map(|k| 0.5f64.powi(k as i32)).sum();
        let mass: f64 = out.x.iter().sum();
        for (k, v) in out.x.iter().enumerate() {
            assert!((v / mass - 0.5f64.powi(k as i32) / z).abs() < 1e-10, "{k}: {v}");
        }
    }
}
