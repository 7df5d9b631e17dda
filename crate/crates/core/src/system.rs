//! Diffusive input-additive admissible systems
//! `f_i = g(x_i, l) + sum_j w_ij h(x_i, x_j, l)` realized from a Taylor jet.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exact::{fmt_q, parse_rational, q, qf, to_f64, Q};
use crate::linalg::{Mat, Scalar};
use crate::network::Network;
use crate::series::Alg;
use crate::spectral::{eigenvalue_multiplicities, EigenValue};

/// Derivatives at the origin of `g(x, l)` and `h(x1, x2, l)`. `h_22` is
/// determined by `h_11 + 2 h_12 + h_22 = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusiveJet {
    pub g_x: Q,
    pub g_xx: Q,
    pub g_xxx: Q,
    pub g_xl: Q,
    pub h_1: Q,
    pub h_11: Q,
    pub h_12: Q,
    pub h_22: Q,
    pub h_111: Q,
    pub h_122: Q,
    pub h_1l: Q,
}

pub const JET_KEYS: [&str; 11] = ["g_x", "g_xx", "g_xxx", "g_xλ", "h_1", "h_11", "h_12", "h_22", "h_111", "h_122", "h_1λ"];

impl DiffusiveJet {
    /// The reference jet used throughout the tests, with `g_x = -mu h_1`.
    pub fn default_for_mu(mu: &Q) -> Self {
        let h_1 = q(1);
        DiffusiveJet {
            g_x: -(mu * &h_1),
            g_xx: q(1),
            g_xxx: q(-1),
            g_xl: q(1),
            h_11: qf(1, 2),
            h_12: qf(-1, 2),
            h_22: qf(1, 2),
            h_111: qf(1, 4),
            h_122: qf(1, 5),
            h_1l: qf(1, 3),
            h_1,
        }
    }

    /// A jet with all entries zero except the given linear part.
    pub fn linear(g_x: Q, h_1: Q) -> Self {
        let z = Q::zero();
        DiffusiveJet {
            g_x,
            h_1,
            g_xx: z.clone(),
            g_xxx: z.clone(),
            g_xl: z.clone(),
            h_11: z.clone(),
            h_12: z.clone(),
            h_22: z.clone(),
            h_111: z.clone(),
            h_122: z.clone(),
            h_1l: z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if &self.h_11 + q(2) * &self.h_12 + &self.h_22 != Q::zero() {
            return Err(Error::Jet(format!(
                "h_11 + 2 h_12 + h_22 = {} must vanish",
                fmt_q(&(&self.h_11 + q(2) * &self.h_12 + &self.h_22))
            )));
        }
        Ok(())
    }

    pub fn with_mu(&self, mu: &Q) -> Self {
        DiffusiveJet { g_x: -(mu * &self.h_1), ..self.clone() }
    }

    pub fn get(&self, key: &str) -> Option<&Q> {
        Some(match key {
            "g_x" => &self.g_x,
            "g_xx" => &self.g_xx,
            "g_xxx" => &self.g_xxx,
            "g_xλ" | "g_xl" => &self.g_xl,
            "h_1" => &self.h_1,
            "h_11" => &self.h_11,
            "h_12" => &self.h_12,
            "h_22" => &self.h_22,
            "h_111" => &self.h_111,
            "h_122" => &self.h_122,
            "h_1λ" | "h_1l" => &self.h_1l,
            _ => return None,
        })
    }

    pub fn to_text(&self) -> String {
        let mut m = serde_json::Map::new();
        for k in JET_KEYS {
            m.insert(k.to_string(), Value::from(fmt_q(self.get(k).unwrap())));
        }
        serde_json::to_string_pretty(&Value::Object(m)).expect("serializable")
    }
}

/// Parse a jet table. `g_x` may be omitted when `mu` is supplied, in which
/// case `g_x = -mu h_1`; `h_22` may be omitted and is then derived.
pub fn parse_jet(text: &str, mu: Option<&Q>) -> Result<DiffusiveJet> {
    let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let obj = v.as_object().ok_or_else(|| Error::Parse("jet must be a key/value table".into()))?;
    let mut vals: BTreeMap<&str, Q> = BTreeMap::new();
    for (k, x) in obj {
        let key = match k.as_str() {
            "g_xl" | "g_xlambda" => "g_xλ",
            "h_1l" | "h_1lambda" => "h_1λ",
            other => JET_KEYS.iter().copied().find(|j| *j == other).ok_or_else(|| Error::Parse(format!("unknown jet key {other:?}")))?,
        };
        let val = match x {
            Value::String(s) => parse_rational(s)?,
            Value::Number(n) if n.is_i64() => q(n.as_i64().unwrap()),
            other => return Err(Error::Parse(format!("jet value for {k} must be a decimal string, found {other}"))),
        };
        vals.insert(key, val);
    }
    let take = |k: &str| vals.get(k).cloned().ok_or_else(|| Error::Parse(format!("missing jet key {k}")));
    let h_1 = take("h_1")?;
    let h_11 = take("h_11")?;
    let h_12 = take("h_12")?;
    let derived_h22 = -(&h_11 + q(2) * &h_12);
    if let Some(h22) = vals.get("h_22") {
        if h22 != &derived_h22 {
            return Err(Error::Jet(format!("h_22 = {} but h_11 + 2 h_12 + h_22 = 0 requires {}", fmt_q(h22), fmt_q(&derived_h22))));
        }
    }
    let g_x = match (vals.get("g_x"), mu) {
        (Some(g), Some(m)) if g != &-(m * &h_1) => {
            return Err(Error::Jet(format!("g_x = {} does not satisfy g_x + mu h_1 = 0 for mu = {}", fmt_q(g), fmt_q(m))))
        }
        (Some(g), _) => g.clone(),
        (None, Some(m)) => -(m * &h_1),
        (None, None) => return Err(Error::Parse("missing jet key g_x (or supply mu)".into())),
    };
    Ok(DiffusiveJet {
        g_x,
        g_xx: take("g_xx")?,
        g_xxx: take("g_xxx")?,
        g_xl: take("g_xλ")?,
        h_1,
        h_11,
        h_12,
        h_22: derived_h22,
        h_111: take("h_111")?,
        h_122: take("h_122")?,
        h_1l: take("h_1λ")?,
    })
}

// ---------------------------------------------------------------------------
// Sparse multivariate polynomials

#[derive(Clone, Debug, PartialEq)]
pub struct MPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Q>,
}

impl MPoly {
    pub fn zero(nvars: usize) -> Self {
        MPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut p = Self::zero(nvars);
        p.push(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.push(e, Q::one());
        p
    }

    fn push(&mut self, e: Vec<u32>, c: Q) {
        let slot = self.terms.entry(e).or_insert_with(Q::zero);
        *slot += c;
        self.terms.retain(|_, v| !v.is_zero());
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.push(e.clone(), c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&q(-1)))
    }

    pub fn scale(&self, s: &Q) -> Self {
        let mut r = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            r.push(e.clone(), c * s);
        }
        r
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                r.push(e1.iter().zip(e2).map(|(a, b)| a + b).collect(), c1 * c2);
            }
        }
        r
    }

    /// Rename variables: variable `i` becomes variable `map[i]` of a ring
    /// with `nvars` variables. Repeated targets multiply powers.
    pub fn remap(&self, map: &[usize], nvars: usize) -> Self {
        let mut r = Self::zero(nvars);
        for (e, c) in &self.terms {
            let mut ne = vec![0; nvars];
            for (i, &k) in e.iter().enumerate() {
                ne[map[i]] += k;
            }
            r.push(ne, c.clone());
        }
        r
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut r = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut ne = e.clone();
                ne[i] -= 1;
                r.push(ne, c * Q::from_integer(e[i].into()));
            }
        }
        r
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        self.terms.iter().fold(Q::zero(), |s, (e, c)| {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                for _ in 0..k {
                    t *= xi;
                }
            }
            s + t
        })
    }

    /// Partial derivative `d^|e| / dx^e` at the origin.
    pub fn derivative_at_origin(&self, e: &[u32]) -> Q {
        let c = self.terms.get(e).cloned().unwrap_or_else(Q::zero);
        let fact: u64 = e.iter().map(|&k| (1..=k as u64).product::<u64>()).product();
        c * Q::from_integer(fact.into())
    }
}

// ---------------------------------------------------------------------------
// Realization

/// Coefficients of the canonical realization
/// `g = x (g_x + g_xx/2 x + g_xxx/6 x^2 + g_xl l)` and
/// `h = (x - y)(h_1 + h_1l l + a x + b y + p x^2 + r y^2)`,
/// with `a = h_11/2`, `b = -h_22/2`, `p = h_111/6`, `r = h_122/2`.
#[derive(Clone, Debug)]
pub struct JetCoeffs<F> {
    pub gx: F,
    pub gxx2: F,
    pub gxxx6: F,
    pub gxl: F,
    pub h1: F,
    pub h1l: F,
    pub a: F,
    pub b: F,
    pub p: F,
    pub r: F,
}

impl JetCoeffs<Q> {
    pub fn from_jet(j: &DiffusiveJet) -> Self {
        JetCoeffs {
            gx: j.g_x.clone(),
            gxx2: &j.g_xx / q(2),
            gxxx6: &j.g_xxx / q(6),
            gxl: j.g_xl.clone(),
            h1: j.h_1.clone(),
            h1l: j.h_1l.clone(),
            a: &j.h_11 / q(2),
            b: -&j.h_22 / q(2),
            p: &j.h_111 / q(6),
            r: &j.h_122 / q(2),
        }
    }

    pub fn convert<F: Scalar>(&self) -> JetCoeffs<F> {
        let f = F::from_q;
        JetCoeffs {
            gx: f(&self.gx),
            gxx2: f(&self.gxx2),
            gxxx6: f(&self.gxxx6),
            gxl: f(&self.gxl),
            h1: f(&self.h1),
            h1l: f(&self.h1l),
            a: f(&self.a),
            b: f(&self.b),
            p: f(&self.p),
            r: f(&self.r),
        }
    }
}

impl<F: Scalar> JetCoeffs<F> {
    pub fn g<A: Alg<F>>(&self, x: &A, l: &A) -> A {
        let inner = x.scale(&self.gxxx6).add(&x.cst(self.gxx2.clone())).mul(x).add(&x.cst(self.gx.clone())).add(&l.scale(&self.gxl));
        x.mul(&inner)
    }

    pub fn h<A: Alg<F>>(&self, x: &A, y: &A, l: &A) -> A {
        let s = x
            .cst(self.h1.clone())
            .add(&l.scale(&self.h1l))
            .add(&x.scale(&self.p).add(&x.cst(self.a.clone())).mul(x))
            .add(&y.scale(&self.r).add(&y.cst(self.b.clone())).mul(y));
        x.sub(y).mul(&s)
    }

    /// `f_i` for a cell with the given `(source, weight)` inputs; self-loops
    /// contribute nothing because `h(x, x, l) = 0`.
    pub fn cell<A: Alg<F>>(&self, i: usize, inputs: &[(usize, F)], x: &[A], l: &A) -> A {
        let mut f = self.g(&x[i], l);
        for (j, w) in inputs {
            if *j != i {
                f = f.add(&self.h(&x[i], &x[*j], l).scale(w));
            }
        }
        f
    }
}

/// Polynomial realization of a jet, kept as exact multivariate polynomials.
#[derive(Clone, Debug)]
pub struct Realization {
    pub jet: DiffusiveJet,
    /// `g(x, l)`, variables `(x, l)`.
    pub g: MPoly,
    /// `h(x, y, l)`, variables `(x, y, l)`.
    pub h: MPoly,
}

pub fn realize_polynomial_system(jet: &DiffusiveJet) -> Result<Realization> {
    jet.validate()?;
    let k = JetCoeffs::from_jet(jet);
    let (x, l) = (MPoly::var(2, 0), MPoly::var(2, 1));
    let c2 = |v: &Q| MPoly::constant(2, v.clone());
    let g = x.mul(&c2(&k.gx).add(&x.scale(&k.gxx2)).add(&x.mul(&x).scale(&k.gxxx6)).add(&l.scale(&k.gxl)));
    let (x, y, l) = (MPoly::var(3, 0), MPoly::var(3, 1), MPoly::var(3, 2));
    let s = MPoly::constant(3, k.h1.clone())
        .add(&l.scale(&k.h1l))
        .add(&x.scale(&k.a))
        .add(&y.scale(&k.b))
        .add(&x.mul(&x).scale(&k.p))
        .add(&y.mul(&y).scale(&k.r));
    let h = x.sub(&y).mul(&s);
    Ok(Realization { jet: jet.clone(), g, h })
}

/// Read the jet back off the realized polynomials. Fails if the first-order
/// diffusive identity `h_2 = -h_1` does not hold.
pub fn extract_jet(r: &Realization) -> Result<DiffusiveJet> {
    let gd = |e: [u32; 2]| r.g.derivative_at_origin(&e);
    let hd = |e: [u32; 3]| r.h.derivative_at_origin(&e);
    if hd([0, 1, 0]) != -hd([1, 0, 0]) {
        return Err(Error::Jet("h_2 != -h_1".into()));
    }
    Ok(DiffusiveJet {
        g_x: gd([1, 0]),
        g_xx: gd([2, 0]),
        g_xxx: gd([3, 0]),
        g_xl: gd([1, 1]),
        h_1: hd([1, 0, 0]),
        h_11: hd([2, 0, 0]),
        h_12: hd([1, 1, 0]),
        h_22: hd([0, 2, 0]),
        h_111: hd([3, 0, 0]),
        h_122: hd([1, 2, 0]),
        h_1l: hd([1, 0, 1]),
    })
}

/// A realized system on a concrete network.
#[derive(Clone, Debug)]
pub struct AdmissibleSystem {
    pub network: Network,
    pub realization: Realization,
    /// Incoming `(source, weight)` per cell, 0-based, self-loops dropped.
    pub inputs: Vec<Vec<(usize, Q)>>,
    inputs_f: Vec<Vec<(usize, f64)>>,
    coeffs: JetCoeffs<Q>,
    cf: JetCoeffs<f64>,
}

impl AdmissibleSystem {
    pub fn new(network: &Network, jet: &DiffusiveJet) -> Result<Self> {
        let realization = realize_polynomial_system(jet)?;
        let inputs: Vec<Vec<(usize, Q)>> =
            (0..network.n_cells()).map(|i| network.inputs(i).into_iter().filter(|(s, _)| *s != i).collect()).collect();
        let inputs_f = inputs.iter().map(|v| v.iter().map(|(s, w)| (*s, to_f64(w))).collect()).collect();
        let coeffs = JetCoeffs::from_jet(jet);
        let cf = coeffs.convert();
        Ok(AdmissibleSystem { network: network.clone(), realization, inputs, inputs_f, coeffs, cf })
    }

    pub fn dim(&self) -> usize {
        self.network.n_cells()
    }

    pub fn jet(&self) -> &DiffusiveJet {
        &self.realization.jet
    }

    pub fn coeffs(&self) -> &JetCoeffs<Q> {
        &self.coeffs
    }

    pub fn evaluate_f(&self, x: &[f64], l: f64) -> Vec<f64> {
        (0..self.dim()).map(|i| self.cf.cell(i, &self.inputs_f[i], x, &l)).collect()
    }

    pub fn evaluate_f_exact(&self, x: &[Q], l: &Q) -> Vec<Q> {
        (0..self.dim()).map(|i| self.coeffs.cell(i, &self.inputs[i], x, l)).collect()
    }

    /// Residual and Jacobian (row-major) in one pass.
    pub fn residual_jacobian(&self, x: &[f64], l: f64, f: &mut [f64], jac: &mut [f64]) {
        let n = self.dim();
        let c = &self.cf;
        jac.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let xi = x[i];
            let mut fi = xi * (c.gx + xi * (c.gxx2 + xi * c.gxxx6) + c.gxl * l);
            let mut dii = c.gx + xi * (2.0 * c.gxx2 + 3.0 * c.gxxx6 * xi) + c.gxl * l;
            for &(j, w) in &self.inputs_f[i] {
                let y = x[j];
                let s = c.h1 + c.h1l * l + xi * (c.a + c.p * xi) + y * (c.b + c.r * y);
                let d = xi - y;
                fi += w * d * s;
                dii += w * (s + d * (c.a + 2.0 * c.p * xi));
                jac[i * n + j] += w * (-s + d * (c.b + 2.0 * c.r * y));
            }
            f[i] = fi;
            jac[i * n + i] += dii;
        }
    }

    /// Cell equation `f_cell` as a polynomial in `(x_1, ..., x_n, l)`.
    pub fn cell_polynomial(&self, cell: usize) -> MPoly {
        let n = self.dim();
        let mut f = self.realization.g.remap(&[cell, n], n + 1);
        for (j, w) in &self.inputs[cell] {
            f = f.add(&self.realization.h.remap(&[cell, *j, n], n + 1).scale(w));
        }
        f
    }
}

/// Second and third derivative tensors at the origin of one cell equation,
/// restricted to the given coordinates (all indices 1-based).
#[derive(Clone, Debug)]
pub struct HessianTensors {
    pub hessian: Mat<Q>,
    /// Row-major `k x k x k` tensor.
    pub third: Vec<Q>,
}

pub fn hessian_tensors(sys: &AdmissibleSystem, cell: usize, coords: &[usize]) -> HessianTensors {
    let p = sys.cell_polynomial(cell - 1);
    let n = sys.dim();
    let k = coords.len();
    let mut hess = Mat::zeros(k, k);
    let mut third = vec![Q::zero(); k * k * k];
    let exps = |idx: &[usize]| {
        let mut e = vec![0u32; n + 1];
        for &i in idx {
            e[coords[i] - 1] += 1;
        }
        e
    };
    for a in 0..k {
        for b in 0..k {
            hess[(a, b)] = p.derivative_at_origin(&exps(&[a, b]));
            for c in 0..k {
                third[(a * k + b) * k + c] = p.derivative_at_origin(&exps(&[a, b, c]));
            }
        }
    }
    HessianTensors { hessian: hess, third }
}

/// `J = g_x I + h_1 L`.
pub fn jacobian_origin(net: &Network, jet: &DiffusiveJet) -> Mat<Q> {
    net.laplacian().scale(&jet.h_1).add(&Mat::identity(net.n_cells()).scale(&jet.g_x))
}

/// The eigenvalue `mu` of `L_N` with `g_x + mu h_1 = 0`, if any.
pub fn bifurcation_eigenvalue(net: &Network, jet: &DiffusiveJet, tol: f64) -> Result<Option<EigenValue>> {
    let spectrum = eigenvalue_multiplicities(&net.laplacian());
    if jet.h_1.is_zero() {
        if !jet.g_x.is_zero() {
            return Ok(None);
        }
        return match spectrum.len() {
            1 => Ok(Some(spectrum[0].0.clone())),
            _ => Err(Error::Genericity("h_1 = g_x = 0 makes every eigenvalue critical".into())),
        };
    }
    let mu = -&jet.g_x / &jet.h_1;
    let target = EigenValue::Exact(mu);
    let hits: Vec<&EigenValue> = spectrum.iter().map(|(v, _)| v).filter(|v| v.matches(&target, tol)).collect();
    match hits.len() {
        0 => Ok(None),
        1 => Ok(Some(hits[0].clone())),
        _ => Err(Error::Genericity(format!("{} distinct eigenvalues satisfy the bifurcation condition", hits.len()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realization_is_structurally_diffusive() {
        let r = realize_polynomial_system(&DiffusiveJet::default_for_mu(&q(2))).unwrap();
        assert!(r.h.remap(&[0, 0, 1], 2).is_zero());
        assert!(r.g.eval(&[Q::zero(), q(7)]).is_zero());
    }

    #[test]
    fn jet_roundtrip_is_exact() {
        let jet = DiffusiveJet::default_for_mu(&q(3));
        let r = realize_polynomial_system(&jet).unwrap();
        assert_eq!(extract_jet(&r).unwrap(), jet);
    }

    #[test]
    fn inconsistent_jets_are_rejected() {
        let mut jet = DiffusiveJet::default_for_mu(&q(1));
        jet.h_22 = q(3);
        assert!(matches!(realize_polynomial_system(&jet), Err(Error::Jet(_))));
        let text = r#"{"g_x":"-1","g_xx":"1","g_xxx":"-1","g_xλ":"1","h_1":"1","h_11":"0.5","h_12":"-0.5","h_22":"0.7","h_111":"0.25","h_122":"0.2","h_1λ":"1/3"}"#;
        assert!(matches!(parse_jet(text, None), Err(Error::Jet(_))));
        let ok = text.replace("0.7", "0.5");
        assert_eq!(parse_jet(&ok, None).unwrap(), DiffusiveJet::default_for_mu(&q(1)));
    }
}
