//! Truncated power series in one or two variables over a [`Scalar`] field,
//! and the small algebra trait the system evaluator is written against.

use crate::linalg::Scalar;

/// A commutative algebra over `F` (scalars themselves, or truncated series).
pub trait Alg<F: Scalar>: Clone {
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale(&self, c: &F) -> Self;
    /// The constant `c`, shaped like `self`.
    fn cst(&self, c: F) -> Self;
}

impl<F: Scalar> Alg<F> for F {
    fn add(&self, o: &Self) -> Self {
        self.clone() + o.clone()
    }
    fn sub(&self, o: &Self) -> Self {
        self.clone() - o.clone()
    }
    fn mul(&self, o: &Self) -> Self {
        self.clone() * o.clone()
    }
    fn scale(&self, c: &F) -> Self {
        self.clone() * c.clone()
    }
    fn cst(&self, c: F) -> Self {
        c
    }
}

/// Power series in `nv` (1 or 2) variables truncated above total degree `deg`.
/// Bivariate coefficients are stored by total degree, then by the power of
/// the first variable descending.
#[derive(Clone, Debug, PartialEq)]
pub struct TSeries<F> {
    nv: usize,
    deg: usize,
    c: Vec<F>,
}

fn tri(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

impl<F: Scalar> TSeries<F> {
    pub fn zero(nv: usize, deg: usize) -> Self {
        assert!(nv == 1 || nv == 2);
        let len = if nv == 1 { deg + 1 } else { (deg + 1) * (deg + 2) / 2 };
        TSeries { nv, deg, c: vec![F::zero(); len] }
    }

    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    pub fn constant(nv: usize, deg: usize, c: F) -> Self {
        let mut s = Self::zero(nv, deg);
        s.c[0] = c;
        s
    }

    pub fn var(nv: usize, deg: usize, i: usize) -> Self {
        let mut s = Self::zero(nv, deg);
        if deg >= 1 {
            if nv == 1 {
                s.c[1] = F::one();
            } else {
                let (a, b) = if i == 0 { (1, 0) } else { (0, 1) };
                s.c[tri(a, b)] = F::one();
            }
        }
        s
    }

    /// Univariate series from coefficients.
    pub fn from_coeffs(deg: usize, coeffs: &[F]) -> Self {
        let mut s = Self::zero(1, deg);
        for (k, x) in coeffs.iter().enumerate().take(deg + 1) {
            s.c[k] = x.clone();
        }
        s
    }

    fn idx(&self, a: usize, b: usize) -> Option<usize> {
        if a + b > self.deg {
            return None;
        }
        if self.nv == 1 {
            (b == 0).then_some(a)
        } else {
            Some(tri(a, b))
        }
    }

    /// Coefficient of `u^a v^b` (`b` must be 0 for univariate series).
    pub fn coef(&self, a: usize, b: usize) -> F {
        self.idx(a, b).map(|i| self.c[i].clone()).unwrap_or_else(F::zero)
    }

    pub fn set(&mut self, a: usize, b: usize, x: F) {
        let i = self.idx(a, b).expect("coefficient beyond truncation");
        self.c[i] = x;
    }

    pub fn coeffs(&self) -> &[F] {
        &self.c
    }

    /// Monomials `(a, b)` of the given total degree.
    pub fn monomials_of_degree(&self, d: usize) -> Vec<(usize, usize)> {
        if self.nv == 1 {
            vec![(d, 0)]
        } else {
            (0..=d).rev().map(|a| (a, d - a)).collect()
        }
    }

    fn pairs(&self) -> Vec<(usize, usize)> {
        (0..=self.deg).flat_map(|d| self.monomials_of_degree(d)).collect()
    }

    /// Lowest total degree with a non-negligible coefficient.
    pub fn order(&self, tol: f64) -> Option<usize> {
        let scale = self.c.iter().map(|x| x.magnitude()).fold(0.0, f64::max);
        (0..=self.deg).find(|&d| self.monomials_of_degree(d).iter().any(|&(a, b)| !self.coef(a, b).negligible(scale, tol)))
    }

    /// Horner evaluation of a univariate polynomial with argument `self`.
    pub fn compose_poly(&self, coeffs: &[F]) -> Self {
        let mut acc = Self::zero(self.nv, self.deg);
        for k in (0..coeffs.len()).rev() {
            acc = acc.mul(self);
            acc.c[0] = acc.c[0].clone() + coeffs[k].clone();
        }
        acc
    }

    /// Substitute univariate series `y(t)` and `l(t)` into a bivariate series.
    pub fn compose2(&self, y: &TSeries<F>, l: &TSeries<F>) -> TSeries<F> {
        assert_eq!(self.nv, 2);
        let deg = y.deg;
        let mut ypow = vec![TSeries::constant(1, deg, F::one())];
        let mut lpow = vec![TSeries::constant(1, deg, F::one())];
        for k in 1..=self.deg {
            ypow.push(ypow[k - 1].mul(y));
            lpow.push(lpow[k - 1].mul(l));
        }
        let mut out = TSeries::zero(1, deg);
        for (a, b) in self.pairs() {
            let c = self.coef(a, b);
            if c.is_zero() {
                continue;
            }
            out = out.add(&ypow[a].mul(&lpow[b]).scale(&c));
        }
        out
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G) -> TSeries<G> {
        TSeries { nv: self.nv, deg: self.deg, c: self.c.iter().map(f).collect() }
    }

    /// Evaluate numerically.
    pub fn eval(&self, u: f64, v: f64) -> f64
    where
        F: Into<f64>,
    {
        self.pairs().into_iter().map(|(a, b)| self.coef(a, b).into() * u.powi(a as i32) * v.powi(b as i32)).sum()
    }
}

impl<F: Scalar> Alg<F> for TSeries<F> {
    fn add(&self, o: &Self) -> Self {
        TSeries { nv: self.nv, deg: self.deg, c: self.c.iter().zip(&o.c).map(|(a, b)| a.clone() + b.clone()).collect() }
    }

    fn sub(&self, o: &Self) -> Self {
        TSeries { nv: self.nv, deg: self.deg, c: self.c.iter().zip(&o.c).map(|(a, b)| a.clone() - b.clone()).collect() }
    }

    fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero(self.nv, self.deg);
        if self.nv == 1 {
            for i in 0..=self.deg {
                if self.c[i].is_zero() {
                    continue;
                }
                for j in 0..=self.deg - i {
                    if !o.c[j].is_zero() {
                        r.c[i + j] = r.c[i + j].clone() + self.c[i].clone() * o.c[j].clone();
                    }
                }
            }
        } else {
            let pairs = self.pairs();
            for &(a1, b1) in &pairs {
                let x = &self.c[tri(a1, b1)];
                if x.is_zero() {
                    continue;
                }
                for &(a2, b2) in &pairs {
                    if a1 + b1 + a2 + b2 > self.deg {
                        continue;
                    }
                    let y = &o.c[tri(a2, b2)];
                    if !y.is_zero() {
                        let k = tri(a1 + a2, b1 + b2);
                        r.c[k] = r.c[k].clone() + x.clone() * y.clone();
                    }
                }
            }
        }
        r
    }

    fn scale(&self, c: &F) -> Self {
        TSeries { nv: self.nv, deg: self.deg, c: self.c.iter().map(|a| a.clone() * c.clone()).collect() }
    }

    fn cst(&self, c: F) -> Self {
        Self::constant(self.nv, self.deg, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{q, Q};

    #[test]
    fn geometric_series_inverse() {
        // (1 - t)(1 + t + t^2 + t^3) = 1 - t^4, truncated at degree 3 -> 1
        let one_minus = TSeries::from_coeffs(3, &[q(1), q(-1)]);
        let geo = TSeries::from_coeffs(3, &[q(1), q(1), q(1), q(1)]);
        assert_eq!(one_minus.mul(&geo), TSeries::constant(1, 3, q(1)));
    }

    #[test]
    fn bivariate_product_and_composition() {
        let y = TSeries::<Q>::var(2, 3, 0);
        let l = TSeries::<Q>::var(2, 3, 1);
        let p = y.add(&l).mul(&y.sub(&l));
        assert_eq!(p.coef(2, 0), q(1));
        assert_eq!(p.coef(0, 2), q(-1));
        assert_eq!(p.coef(1, 1), q(0));
        // substitute y = t, l = t^2: t^2 - t^4 -> t^2 at degree 3
        let t = TSeries::<Q>::var(1, 3, 0);
        let r = p.compose2(&t, &t.mul(&t));
        assert_eq!(r, TSeries::from_coeffs(3, &[q(0), q(0), q(1)]));
        assert_eq!(r.order(0.0), Some(2));
    }
}
