//! Small dense linear algebra over exact rationals and floating scalars.
//!
//! Everything here is written once against [`Scalar`]; exact arithmetic makes
//! every zero test exact, floating arithmetic uses a relative threshold.

use std::fmt::Debug;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};

use crate::exact::{from_f64, to_f64, Q};

/// Default relative tolerance for floating rank and clustering decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    const EXACT: bool;
    fn magnitude(&self) -> f64;
    fn from_q(x: &Q) -> Self;
    fn from_real(x: f64) -> Self;
    fn conj(&self) -> Self;
    /// Numerical rank of a matrix (exact for rationals).
    fn rank_of(m: &Mat<Self>, tol: f64) -> usize;
    /// A solution of `m x = b` (least squares for floating scalars).
    fn lstsq(m: &Mat<Self>, b: &[Self], tol: f64) -> Vec<Self>;

    fn negligible(&self, scale: f64, tol: f64) -> bool {
        if Self::EXACT {
            self.is_zero()
        } else {
            self.magnitude() <= tol * scale.max(f64::MIN_POSITIVE)
        }
    }
}

impl Scalar for Q {
    const EXACT: bool = true;
    fn magnitude(&self) -> f64 {
        to_f64(&self.abs())
    }
    fn from_q(x: &Q) -> Self {
        x.clone()
    }
    fn from_real(x: f64) -> Self {
        from_f64(x)
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    fn rank_of(m: &Mat<Self>, tol: f64) -> usize {
        m.rref(tol).1.len()
    }
    fn lstsq(m: &Mat<Self>, b: &[Self], tol: f64) -> Vec<Self> {
        m.solve(b, tol).unwrap_or_else(|| vec![Q::zero(); m.cols])
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn from_q(x: &Q) -> Self {
        to_f64(x)
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(&self) -> Self {
        *self
    }
    fn rank_of(m: &Mat<Self>, tol: f64) -> usize {
        if m.rows == 0 || m.cols == 0 {
            return 0;
        }
        let a = DMatrix::from_row_slice(m.rows, m.cols, &m.data);
        svd_rank(a.singular_values().as_slice(), tol)
    }
    fn lstsq(m: &Mat<Self>, b: &[Self], tol: f64) -> Vec<Self> {
        if m.rows == 0 || m.cols == 0 {
            return vec![0.0; m.cols];
        }
        let a = DMatrix::from_row_slice(m.rows, m.cols, &m.data);
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let rhs = nalgebra::DVector::from_column_slice(b);
        svd.solve(&rhs, tol * smax).map(|x| x.as_slice().to_vec()).unwrap_or_else(|_| vec![0.0; m.cols])
    }
}

impl Scalar for Complex64 {
    const EXACT: bool = false;
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn from_q(x: &Q) -> Self {
        Complex64::new(to_f64(x), 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn rank_of(m: &Mat<Self>, tol: f64) -> usize {
        if m.rows == 0 || m.cols == 0 {
            return 0;
        }
        let a = DMatrix::from_row_slice(m.rows, m.cols, &m.data);
        svd_rank(a.singular_values().as_slice(), tol)
    }
    fn lstsq(m: &Mat<Self>, b: &[Self], tol: f64) -> Vec<Self> {
        if m.rows == 0 || m.cols == 0 {
            return vec![Complex64::zero(); m.cols];
        }
        let a = DMatrix::from_row_slice(m.rows, m.cols, &m.data);
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let rhs = nalgebra::DVector::from_column_slice(b);
        svd.solve(&rhs, tol * smax)
            .map(|x| x.as_slice().to_vec())
            .unwrap_or_else(|_| vec![Complex64::zero(); m.cols])
    }
}

fn svd_rank(sv: &[f64], tol: f64) -> usize {
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Scalar> Mat<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![F::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.iter().cloned());
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_cols(cols: &[Vec<F>], nrows: usize) -> Self {
        let mut m = Self::zeros(nrows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for i in 0..nrows {
                m[(i, j)] = col[i].clone();
            }
        }
        m
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G) -> Mat<G> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect() }
    }

    pub fn row(&self, i: usize) -> Vec<F> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<F>> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut m = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m[(a, b)] = self[(i, j)].clone();
            }
        }
        m
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows);
        let mut m = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..o.cols {
                    let t = a.clone() * o[(k, j)].clone();
                    m[(i, j)] = m[(i, j)].clone() + t;
                }
            }
        }
        m
    }

    pub fn mul_vec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut s = F::zero();
                for j in 0..self.cols {
                    let a = &self[(i, j)];
                    if !a.is_zero() {
                        s = s + a.clone() * v[j].clone();
                    }
                }
                s
            })
            .collect()
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.clone() - b.clone())
    }

    fn zip(&self, o: &Self, f: impl Fn(&F, &F) -> F) -> Self {
        assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&o.data).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn scale(&self, s: &F) -> Self {
        self.map(|a| a.clone() * s.clone())
    }

    /// `self - s I`.
    pub fn shift(&self, s: &F) -> Self {
        let mut m = self.clone();
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] = m[(i, i)].clone() - s.clone();
        }
        m
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut r = Self::identity(self.rows);
        for _ in 0..k {
            r = r.mul(self);
        }
        r
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.magnitude()).fold(0.0, f64::max)
    }

    pub fn is_zero_matrix(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Reduced row echelon form and pivot columns. Floating scalars use partial
    /// pivoting and treat entries below `tol * max|a|` as zero.
    pub fn rref(&self, tol: f64) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let scale = self.max_abs();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let p = if F::EXACT {
                (r..m.rows).find(|&i| !m[(i, c)].is_zero())
            } else {
                let best = (r..m.rows).max_by(|&a, &b| m[(a, c)].magnitude().total_cmp(&m[(b, c)].magnitude()));
                best.filter(|&i| !m[(i, c)].negligible(scale, tol))
            };
            let Some(p) = p else {
                if !F::EXACT {
                    for i in r..m.rows {
                        m[(i, c)] = F::zero();
                    }
                }
                continue;
            };
            m.swap_rows(p, r);
            let inv = F::one() / m[(r, c)].clone();
            for j in 0..m.cols {
                m[(r, j)] = m[(r, j)].clone() * inv.clone();
            }
            m[(r, c)] = F::one();
            for i in 0..m.rows {
                if i == r || m[(i, c)].is_zero() {
                    continue;
                }
                let f = m[(i, c)].clone();
                for j in 0..m.cols {
                    let t = f.clone() * m[(r, j)].clone();
                    m[(i, j)] = m[(i, j)].clone() - t;
                }
                m[(i, c)] = F::zero();
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn rank(&self, tol: f64) -> usize {
        F::rank_of(self, tol)
    }

    /// Basis of the right kernel. Each basis vector has a 1 at one free column
    /// and zeros at the other free columns.
    pub fn nullspace(&self, tol: f64) -> Vec<Vec<F>> {
        let (r, piv) = self.rref(tol);
        let free: Vec<usize> = (0..self.cols).filter(|c| !piv.contains(c)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![F::zero(); self.cols];
                v[f] = F::one();
                for (row, &p) in piv.iter().enumerate() {
                    v[p] = -r[(row, f)].clone();
                }
                v
            })
            .collect()
    }

    /// Some solution of `self x = b`, or `None` if inconsistent. Free
    /// variables are set to zero.
    pub fn solve(&self, b: &[F], tol: f64) -> Option<Vec<F>> {
        assert_eq!(b.len(), self.rows);
        let mut aug = Self::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, self.cols)] = b[i].clone();
        }
        let (r, piv) = aug.rref(tol);
        if piv.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![F::zero(); self.cols];
        for (row, &p) in piv.iter().enumerate() {
            x[p] = r[(row, self.cols)].clone();
        }
        Some(x)
    }

    pub fn inverse(&self, tol: f64) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut aug = Self::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug[(i, j)] = self[(i, j)].clone();
            }
            aug[(i, n + i)] = F::one();
        }
        let (r, piv) = aug.rref(tol);
        if piv.len() < n || piv[n - 1] != n - 1 {
            return None;
        }
        let cols: Vec<usize> = (n..2 * n).collect();
        let rows: Vec<usize> = (0..n).collect();
        Some(r.submatrix(&rows, &cols))
    }
}

impl<F> std::ops::Index<(usize, usize)> for Mat<F> {
    type Output = F;
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.cols + j]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for Mat<F> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (x, y)| s + x.clone() * y.clone())
}

/// Hermitian inner product `<a, b> = sum conj(a_i) b_i`.
pub fn inner<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |s, (x, y)| s + x.conj() * y.clone())
}

pub fn norm2<F: Scalar>(a: &[F]) -> f64 {
    a.iter().map(|x| x.magnitude().powi(2)).sum::<f64>().sqrt()
}

pub fn scale_vec<F: Scalar>(a: &[F], s: &F) -> Vec<F> {
    a.iter().map(|x| x.clone() * s.clone()).collect()
}

pub fn sub_vec<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(x, y)| x.clone() - y.clone()).collect()
}

pub fn add_vec<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(x, y)| x.clone() + y.clone()).collect()
}

pub fn first_nonzero<F: Scalar>(v: &[F], tol: f64) -> Option<usize> {
    let scale = v.iter().map(|x| x.magnitude()).fold(0.0, f64::max);
    v.iter().position(|x| !x.negligible(scale, tol))
}

/// Scale so that the first non-negligible coordinate equals one.
pub fn normalize_first<F: Scalar>(v: &[F], tol: f64) -> Vec<F> {
    match first_nonzero(v, tol) {
        Some(i) => {
            let s = F::one() / v[i].clone();
            let mut w = scale_vec(v, &s);
            w[i] = F::one();
            w
        }
        None => v.to_vec(),
    }
}

/// Reduce `w` modulo `span(basis)` by clearing the pivot coordinates of the
/// row-reduced basis. Gives a canonical representative of the coset.
pub fn reduce_modulo<F: Scalar>(w: &[F], basis: &[Vec<F>], tol: f64) -> Vec<F> {
    if basis.is_empty() {
        return w.to_vec();
    }
    let (r, piv) = Mat::from_rows(basis).rref(tol);
    let mut out = w.to_vec();
    for (row, &p) in piv.iter().enumerate() {
        let f = out[p].clone();
        if f.is_zero() {
            continue;
        }
        for j in 0..out.len() {
            out[j] = out[j].clone() - f.clone() * r[(row, j)].clone();
        }
        out[p] = F::zero();
    }
    out
}

/// Whether `v` lies in `span(basis)`.
pub fn in_span<F: Scalar>(v: &[F], basis: &[Vec<F>], tol: f64) -> bool {
    if basis.is_empty() {
        let s = v.iter().map(|x| x.magnitude()).fold(0.0, f64::max);
        return s == 0.0 || (!F::EXACT && s <= tol);
    }
    let a = Mat::from_rows(basis);
    let mut rows = basis.to_vec();
    rows.push(v.to_vec());
    let b = Mat::from_rows(&rows);
    a.rank(tol) == b.rank(tol)
}

/// Whether `v` lies in the column space of `m`.
pub fn in_image<F: Scalar>(m: &Mat<F>, v: &[F], tol: f64) -> bool {
    let mut aug = Mat::zeros(m.rows, m.cols + 1);
    for i in 0..m.rows {
        for j in 0..m.cols {
            aug[(i, j)] = m[(i, j)].clone();
        }
        aug[(i, m.cols)] = v[i].clone();
    }
    m.rank(tol) == aug.rank(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    fn qm(rows: &[&[i64]]) -> Mat<Q> {
        Mat::from_rows(&rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect::<Vec<_>>())
    }

    #[test]
    fn exact_nullspace_and_solve() {
        let a = qm(&[&[1, 2, 3], &[2, 4, 6]]);
        assert_eq!(a.rank(0.0), 1);
        let ns = a.nullspace(0.0);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!(a.mul_vec(v).iter().all(|x| x.is_zero()));
        }
        assert!(a.solve(&[q(1), q(3)], 0.0).is_none());
        let x = a.solve(&[q(1), q(2)], 0.0).unwrap();
        assert_eq!(a.mul_vec(&x), vec![q(1), q(2)]);
    }

    #[test]
    fn float_rank_uses_relative_threshold() {
        let a = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1e-12]]);
        assert_eq!(a.rank(DEFAULT_TOL), 1);
        assert_eq!(a.rank(1e-14), 2);
    }

    #[test]
    fn inverse_roundtrip() {
        let a = qm(&[&[3, -2], &[-1, 2]]);
        let inv = a.inverse(0.0).unwrap();
        assert_eq!(a.mul(&inv), Mat::identity(2));
    }

    #[test]
    fn reduce_modulo_clears_pivots() {
        let basis = vec![vec![q(1), q(1)]];
        let w = reduce_modulo(&[q(3), q(5)], &basis, 0.0);
        assert_eq!(w, vec![q(0), q(2)]);
    }
}
