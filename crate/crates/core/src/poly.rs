//! Univariate polynomials over the rationals: characteristic polynomials,
//! square-free decomposition and root isolation.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::exact::{to_f64, Q};
use crate::linalg::Mat;

/// Dense polynomial, coefficients in ascending degree, no trailing zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<Q>);

impl Poly {
    pub fn new(mut c: Vec<Q>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Poly(c)
    }

    pub fn one() -> Self {
        Poly(vec![Q::one()])
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn lead(&self) -> Q {
        self.0.last().cloned().unwrap_or_else(Q::zero)
    }

    pub fn monic(&self) -> Self {
        let l = self.lead();
        Poly(self.0.iter().map(|c| c / &l).collect())
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.0.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_c(&self, x: Complex64) -> Complex64 {
        self.0.iter().rev().fold(Complex64::zero(), |acc, c| acc * x + to_f64(c))
    }

    pub fn derivative(&self) -> Self {
        Poly::new(self.0.iter().enumerate().skip(1).map(|(k, c)| c * Q::from_integer(BigInt::from(k))).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.0.len().max(o.0.len());
        let z = Q::zero();
        Poly::new((0..n).map(|i| self.0.get(i).unwrap_or(&z) - o.0.get(i).unwrap_or(&z)).collect())
    }

    pub fn mul(&self, o: &Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Poly(vec![]);
        }
        let mut c = vec![Q::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Poly::new(c)
    }

    pub fn divrem(&self, d: &Self) -> (Self, Self) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let mut r = self.0.clone();
        if r.len() < d.0.len() {
            return (Poly(vec![]), self.clone());
        }
        let dl = d.lead();
        let mut qc = vec![Q::zero(); r.len() - d.0.len() + 1];
        for k in (0..qc.len()).rev() {
            let c = &r[k + d.0.len() - 1] / &dl;
            if !c.is_zero() {
                for (j, dj) in d.0.iter().enumerate() {
                    r[k + j] -= &c * dj;
                }
            }
            qc[k] = c;
        }
        (Poly::new(qc), Poly::new(r))
    }

    pub fn gcd(&self, o: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let (_, r) = a.divrem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            a
        } else {
            a.monic()
        }
    }

    /// Yun's square-free decomposition: pairs `(factor, multiplicity)` with
    /// pairwise coprime square-free monic factors.
    pub fn squarefree(&self) -> Vec<(Poly, usize)> {
        let mut out = Vec::new();
        if self.degree() == 0 {
            return out;
        }
        let a = self.monic();
        let b = a.derivative();
        let c = a.gcd(&b);
        let mut w = a.divrem(&c).0;
        let mut y = b.divrem(&c).0;
        let mut z = y.sub(&w.derivative());
        let mut i = 1;
        while w.degree() > 0 {
            let g = w.gcd(&z);
            if g.degree() > 0 {
                out.push((g.clone(), i));
            }
            w = w.divrem(&g).0;
            y = z.divrem(&g).0;
            z = y.sub(&w.derivative());
            i += 1;
        }
        out
    }

    /// Numerical roots via companion-matrix eigenvalues, polished by Newton.
    pub fn roots_numeric(&self) -> Vec<Complex64> {
        let n = self.degree();
        if n == 0 {
            return vec![];
        }
        let m = self.monic();
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -to_f64(&m.0[i]);
        }
        let d = m.derivative();
        comp.complex_eigenvalues()
            .iter()
            .map(|&z0| {
                let mut z = z0;
                for _ in 0..8 {
                    let f = m.eval_c(z);
                    let fp = d.eval_c(z);
                    if fp.norm() == 0.0 {
                        break;
                    }
                    let step = f / fp;
                    z -= step;
                    if step.norm() <= 1e-16 * z.norm().max(1.0) {
                        break;
                    }
                }
                z
            })
            .collect()
    }
}

/// Characteristic polynomial `det(x I - A)` by Faddeev–LeVerrier.
pub fn charpoly(a: &Mat<Q>) -> Poly {
    let n = a.rows;
    assert_eq!(n, a.cols);
    let mut c = vec![Q::zero(); n + 1];
    c[n] = Q::one();
    let mut m = Mat::<Q>::zeros(n, n);
    for k in 1..=n {
        let cprev = c[n - k + 1].clone();
        m = a.mul(&m);
        for i in 0..n {
            m[(i, i)] += &cprev;
        }
        let am = a.mul(&m);
        let tr = (0..n).fold(Q::zero(), |s, i| s + &am[(i, i)]);
        c[n - k] = -tr / Q::from_integer(BigInt::from(k));
    }
    Poly::new(c)
}

/// Least common multiple of the denominators of the matrix entries. Every
/// rational eigenvalue of `A` is an integer divided by this number.
pub fn denominator_lcm(a: &Mat<Q>) -> BigInt {
    a.data.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()))
}

/// A root of a polynomial, classified as exactly rational or floating.
#[derive(Clone, Debug)]
pub enum Root {
    Rational(Q),
    Real(f64),
    Complex(Complex64),
}

/// Roots of a square-free factor. Rational roots are found exactly by
/// rounding candidates onto the lattice `Z / den` and checking them.
pub fn isolate_roots(p: &Poly, den: &BigInt) -> Vec<Root> {
    let mut out = Vec::new();
    let mut rest = p.clone();
    let denf = to_f64(&Q::from_integer(den.clone()));
    for z in p.roots_numeric() {
        if z.im.abs() <= 1e-6 * z.norm().max(1.0) {
            let k = (z.re * denf).round();
            if k.is_finite() {
                let cand = Q::new(BigInt::from(k as i128), den.clone());
                if rest.degree() > 0 && rest.eval(&cand).is_zero() {
                    rest = rest.divrem(&Poly::new(vec![-cand.clone(), Q::one()])).0;
                    out.push(Root::Rational(cand));
                    continue;
                }
            }
        }
    }
    if rest.degree() > 0 {
        for z in rest.roots_numeric() {
            if z.im.abs() <= 1e-10 * z.norm().max(1.0) {
                out.push(Root::Real(z.re));
            } else {
                out.push(Root::Complex(z));
            }
        }
    }
    out
}

pub fn sign(x: &Q) -> i32 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::q;

    fn p(c: &[i64]) -> Poly {
        Poly::new(c.iter().map(|&x| q(x)).collect())
    }

    #[test]
    fn charpoly_of_small_matrix() {
        let a = Mat::from_rows(&[vec![q(2), q(-1)], vec![q(-1), q(2)]]);
        assert_eq!(charpoly(&a), p(&[3, -4, 1]));
    }

    #[test]
    fn yun_decomposition() {
        // (x-1)^2 (x-3)^3 x
        let f = p(&[0, 1]).mul(&p(&[-1, 1]).mul(&p(&[-1, 1]))).mul(&p(&[-3, 1]).mul(&p(&[-3, 1])).mul(&p(&[-3, 1])));
        let sf = f.squarefree();
        assert_eq!(sf, vec![(p(&[0, 1]), 1), (p(&[-1, 1]), 2), (p(&[-3, 1]), 3)]);
    }

    #[test]
    fn rational_and_irrational_roots() {
        let f = p(&[-2, 0, 1]).mul(&p(&[-3, 2]));
        let roots = isolate_roots(&f, &BigInt::from(2));
        let rational: Vec<_> = roots.iter().filter_map(|r| if let Root::Rational(x) = r { Some(x.clone()) } else { None }).collect();
        assert_eq!(rational, vec![Q::new(3.into(), 2.into())]);
        assert_eq!(roots.len(), 3);
    }
}
