//! Extension of component bifurcation branches to a feedforward coalescence.
//!
//! The tail of the second network only listens to the merge cell, so a branch
//! `b(λ)` of the first network turns into a forced problem
//! `G(z, λ) = F^{tail}(b_c(λ), z, λ) = 0`. Everything below solves that problem
//! with truncated power series, exactly when the seed is known exactly.

use std::any::Any;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};

use crate::continuation::{trace_branches, NumericalBranch, OracleConfig, OracleResult, Side};
use crate::error::{Error, Result};
use crate::exact::{fmt_q, q, qser, sqrt_exact, to_f64, Q};
use crate::linalg::{dot, first_nonzero, in_image, normalize_first, scale_vec, Mat, Scalar};
use crate::network::{coalesce, CoalescenceSpec, Layout, Network};
use crate::series::{Alg, TSeries};
use crate::system::{bifurcation_eigenvalue, hessian_tensors, AdmissibleSystem, DiffusiveJet, JetCoeffs};

// ---------------------------------------------------------------------------
// Reported numbers

/// A coefficient that is exact when the inputs allowed it.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Exact(Q),
    Approx(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(x) => to_f64(x),
            Value::Approx(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&Q> {
        match self {
            Value::Exact(x) => Some(x),
            Value::Approx(_) => None,
        }
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        match self {
            Value::Exact(x) => x.is_zero(),
            Value::Approx(x) => x.abs() <= tol,
        }
    }

    pub fn signum(&self) -> i32 {
        match self {
            Value::Exact(x) if x.is_positive() => 1,
            Value::Exact(x) if x.is_negative() => -1,
            Value::Exact(_) => 0,
            Value::Approx(x) if *x > 0.0 => 1,
            Value::Approx(x) if *x < 0.0 => -1,
            Value::Approx(_) => 0,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Exact(x) => write!(f, "{}", fmt_q(x)),
            Value::Approx(x) => write!(f, "{x:.10e}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Value::Exact(x) => s.serialize_str(&fmt_q(x)),
            Value::Approx(x) => s.serialize_f64(*x),
        }
    }
}

fn real<F: Scalar>(x: &F) -> f64 {
    let a: &dyn Any = x;
    if let Some(v) = a.downcast_ref::<Q>() {
        to_f64(v)
    } else if let Some(v) = a.downcast_ref::<f64>() {
        *v
    } else {
        x.magnitude()
    }
}

fn value<F: Scalar>(x: &F) -> Value {
    match (x as &dyn Any).downcast_ref::<Q>() {
        Some(v) => Value::Exact(v.clone()),
        None => Value::Approx(real(x)),
    }
}

fn sqrt_of<F: Scalar>(x: &F) -> Option<F> {
    let a: &dyn Any = x;
    if let Some(v) = a.downcast_ref::<Q>() {
        let r = sqrt_exact(v)?;
        (&r as &dyn Any).downcast_ref::<F>().cloned()
    } else {
        let v = real(x);
        (v >= 0.0).then(|| F::from_real(v.sqrt()))
    }
}

fn side_of(sign: f64) -> Option<Side> {
    if sign > 0.0 {
        Some(Side::Positive)
    } else if sign < 0.0 {
        Some(Side::Negative)
    } else {
        None
    }
}

fn factorial(k: usize) -> Q {
    (1..=k as i64).fold(q(1), |a, i| a * q(i))
}

// ---------------------------------------------------------------------------
// Forced cell blocks

/// A set of unknown cells, optionally driven by one forced cell.
#[derive(Clone, Debug)]
pub struct Block {
    /// Coalescence cell (0-based) carried by each unknown.
    pub cells: Vec<usize>,
    forced: bool,
    /// Inputs of each unknown as `(x-index, weight)`, self-loops dropped. With
    /// forcing, x-index 0 is the forced cell and unknown `j` sits at `j + 1`.
    inputs: Vec<Vec<(usize, Q)>>,
}

impl Block {
    /// A whole network, no forcing.
    pub fn whole(net: &Network) -> Block {
        let n = net.n_cells();
        Block {
            cells: (0..n).collect(),
            forced: false,
            inputs: (0..n).map(|i| net.inputs(i).into_iter().filter(|(s, _)| *s != i).collect()).collect(),
        }
    }

    /// The non-merge cells of a canonical second network, driven by its cell 0.
    pub fn tail(net2: &Network, lay: Layout) -> Block {
        let n2 = net2.n_cells();
        Block {
            cells: (1..n2).map(|k| lay.second_to_full(k)).collect(),
            forced: true,
            inputs: (1..n2).map(|i| net2.inputs(i).into_iter().filter(|(s, _)| *s != i).collect()).collect(),
        }
    }

    pub fn m(&self) -> usize {
        self.cells.len()
    }

    fn off(&self) -> usize {
        self.forced as usize
    }

    /// Jacobian with respect to the unknowns at the origin.
    pub fn jacobian(&self, co: &JetCoeffs<Q>) -> Mat<Q> {
        let off = self.off();
        let mut j = Mat::identity(self.m()).scale(&co.gx);
        for (r, ins) in self.inputs.iter().enumerate() {
            for (s, w) in ins {
                j[(r, r)] = &j[(r, r)] + &co.h1 * w;
                if *s >= off {
                    j[(r, s - off)] = &j[(r, s - off)] - &co.h1 * w;
                }
            }
        }
        j
    }

    /// Derivative with respect to the forced cell at the origin (`h_1 L^c`).
    pub fn forcing_column(&self, co: &JetCoeffs<Q>) -> Vec<Q> {
        self.inputs
            .iter()
            .map(|ins| ins.iter().filter(|(s, _)| self.forced && *s == 0).fold(Q::zero(), |a, (_, w)| a - &co.h1 * w))
            .collect()
    }

    pub fn eval<F: Scalar, A: Alg<F>>(&self, co: &JetCoeffs<F>, z: &[A], l: &A, forced: Option<&A>) -> Vec<A> {
        let mut x: Vec<A> = Vec::with_capacity(z.len() + 1);
        if self.forced {
            x.push(forced.cloned().unwrap_or_else(|| l.cst(F::zero())));
        }
        x.extend(z.iter().cloned());
        let off = self.off();
        self.inputs
            .iter()
            .enumerate()
            .map(|(r, ins)| {
                let w: Vec<(usize, F)> = ins.iter().map(|(s, w)| (*s, F::from_q(w))).collect();
                co.cell(r + off, &w, &x, l)
            })
            .collect()
    }
}

/// Linear data at a singular block Jacobian with one-dimensional kernel.
#[derive(Clone, Debug)]
pub struct KernelData<F> {
    pub j: Mat<F>,
    /// Kernel vector, first nonzero coordinate 1.
    pub v: Vec<F>,
    /// Cokernel vector, first nonzero coordinate ±1 with `<v*, v> >= 0`.
    pub vstar: Vec<F>,
    /// Basis of `v*^⊥ = Im J`.
    pub basis: Vec<Vec<F>>,
    /// `(Bᵀ J B)^{-1}`; absent when the eigenvalue is not algebraically simple.
    pub reduced_inv: Option<Mat<F>>,
    pub fc: Vec<F>,
}

impl KernelData<Q> {
    pub fn new(blk: &Block, co: &JetCoeffs<Q>) -> Result<Self> {
        let m = blk.m();
        let j = blk.jacobian(co);
        let ns = j.nullspace(0.0);
        if ns.len() != 1 {
            return Err(Error::Rank(format!("kernel of the block Jacobian has dimension {}", ns.len())));
        }
        let v = normalize_first(&ns[0], 0.0);
        let mut vstar = normalize_first(&j.transpose().nullspace(0.0)[0], 0.0);
        if dot(&vstar, &v).is_negative() {
            vstar = vstar.iter().map(|x| -x).collect();
        }
        let basis = Mat::from_rows(&[vstar.clone()]).nullspace(0.0);
        let reduced_inv = if basis.is_empty() {
            (!dot(&vstar, &v).is_zero()).then(|| Mat::zeros(0, 0))
        } else {
            let b = Mat::from_cols(&basis, m);
            b.transpose().mul(&j).mul(&b).inverse(0.0)
        };
        let fc = blk.forcing_column(co);
        Ok(KernelData { j, v, vstar, basis, reduced_inv, fc })
    }
}

impl<F: Scalar> KernelData<F> {
    pub fn simple(&self) -> bool {
        self.reduced_inv.is_some()
    }

    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G + Copy) -> KernelData<G> {
        let vm = |v: &Vec<F>| v.iter().map(f).collect::<Vec<G>>();
        KernelData {
            j: self.j.map(f),
            v: vm(&self.v),
            vstar: vm(&self.vstar),
            basis: self.basis.iter().map(vm).collect(),
            reduced_inv: self.reduced_inv.as_ref().map(|m| m.map(f)),
            fc: vm(&self.fc),
        }
    }
}

/// `y v + Σ_k basis_k c_k`.
fn assemble<F: Scalar>(kd: &KernelData<F>, y: &TSeries<F>, c: &[TSeries<F>]) -> Vec<TSeries<F>> {
    (0..kd.v.len())
        .map(|i| c.iter().zip(&kd.basis).fold(y.scale(&kd.v[i]), |acc, (ck, b)| acc.add(&ck.scale(&b[i]))))
        .collect()
}

// ---------------------------------------------------------------------------
// Lyapunov–Schmidt reduction

/// Bivariate reduction data: `z = y v + B c(y, λ)` solves the range equations
/// and `ψ(y, λ) = <v*, G(z, λ)>` is the bifurcation function (raw scaling).
#[derive(Clone, Debug)]
pub struct Ls<F> {
    pub kd: KernelData<F>,
    pub c: Vec<TSeries<F>>,
    pub psi: TSeries<F>,
    pub deg: usize,
}

pub fn ls_reduce<F: Scalar>(blk: &Block, co: &JetCoeffs<F>, kd: &KernelData<F>, beta: &[F], deg: usize) -> Ls<F> {
    let ainv = kd.reduced_inv.as_ref().expect("LS reduction needs a simple eigenvalue");
    let y = TSeries::var(2, deg, 0);
    let l = TSeries::var(2, deg, 1);
    let forced = l.compose_poly(beta);
    let mut c = vec![TSeries::zero(2, deg); kd.basis.len()];
    let residual = |c: &[TSeries<F>]| blk.eval(co, &assemble(kd, &y, c), &l, Some(&forced));
    for d in 1..=deg {
        let r = residual(&c);
        for (a, b) in y.monomials_of_degree(d) {
            let rv: Vec<F> = r.iter().map(|s| s.coef(a, b)).collect();
            let rhs: Vec<F> = kd.basis.iter().map(|bv| dot(bv, &rv)).collect();
            for (ck, x) in c.iter_mut().zip(ainv.mul_vec(&rhs)) {
                ck.set(a, b, -x);
            }
        }
    }
    let r = residual(&c);
    let psi = r.iter().zip(&kd.vstar).fold(TSeries::zero(2, deg), |acc, (s, w)| acc.add(&s.scale(w)));
    Ls { kd: kd.clone(), c, psi, deg }
}

impl<F: Scalar> Ls<F> {
    pub fn to_f64(&self) -> Ls<f64> {
        Ls {
            kd: self.kd.map(|x| real(x)),
            c: self.c.iter().map(|s| s.map(|x| real(x))).collect(),
            psi: self.psi.map(|x| real(x)),
            deg: self.deg,
        }
    }

    /// `z(y(t), l(t))` for univariate `y`, `l`.
    pub fn state(&self, y: &TSeries<F>, l: &TSeries<F>) -> Vec<TSeries<F>> {
        let c: Vec<TSeries<F>> = self.c.iter().map(|ck| ck.compose2(y, l)).collect();
        assemble(&self.kd, y, &c)
    }

    /// Branch `y = λ u(λ)` with `u(0) = s` a simple root of
    /// `c20 s² + c11 s + c02`. Returns `z(λ)`.
    pub fn lambda_branch(&self, s: &F) -> Vec<TSeries<F>> {
        let deg = self.deg;
        let lam = TSeries::var(1, deg, 0);
        let two = F::from_q(&q(2));
        let dp = two * self.psi.coef(2, 0) * s.clone() + self.psi.coef(1, 1);
        let mut u = TSeries::constant(1, deg, s.clone());
        for k in 1..=deg.saturating_sub(2) {
            let r = self.psi.compose2(&lam.mul(&u), &lam);
            u.set(k, 0, -(r.coef(k + 2, 0) / dp.clone()));
        }
        self.state(&lam.mul(&u), &lam)
    }

    /// Branch `λ = y² ν(y)` through a pitchfork (`c20 = 0`). Returns `(λ(y), z(y))`.
    pub fn y_branch(&self) -> (TSeries<F>, Vec<TSeries<F>>) {
        let deg = self.deg;
        let y = TSeries::var(1, deg, 0);
        let y2 = y.mul(&y);
        let c11 = self.psi.coef(1, 1);
        let mut nu = TSeries::constant(1, deg, -(self.psi.coef(3, 0) / c11.clone()));
        for k in 1..=deg.saturating_sub(3) {
            let r = self.psi.compose2(&y, &y2.mul(&nu));
            nu.set(k, 0, -(r.coef(k + 3, 0) / c11.clone()));
        }
        let lam = y2.mul(&nu);
        let z = self.state(&y, &lam);
        (lam, z)
    }
}

// ---------------------------------------------------------------------------
// Kernel-coordinate parametrization

/// Solution of `G = 0` parametrized by the kernel coordinate `t = z_d`.
#[derive(Clone, Debug)]
pub struct KernelSeries<F> {
    pub d: usize,
    pub lam: TSeries<F>,
    pub z: Vec<TSeries<F>>,
}

/// Requires the forcing direction `b_c'(0) h_1 L^c` outside `Im J`; then the
/// bordered matrix `[J without column d | forcing]` is invertible.
pub fn kernel_param<F: Scalar>(blk: &Block, co: &JetCoeffs<F>, kd: &KernelData<F>, beta: &[F], deg: usize, tol: f64) -> Result<KernelSeries<F>> {
    let m = blk.m();
    let d = first_nonzero(&kd.v, tol).ok_or_else(|| Error::Rank("zero kernel vector".into()))?;
    let b1 = beta.get(1).cloned().unwrap_or_else(F::zero);
    let mut cols: Vec<Vec<F>> = (0..m).filter(|&j| j != d).map(|j| kd.j.col(j)).collect();
    cols.push(scale_vec(&kd.fc, &b1));
    let minv = Mat::from_cols(&cols, m)
        .inverse(tol)
        .ok_or_else(|| Error::Rank("forcing direction lies in the image of the tail Jacobian".into()))?;
    let mut z = vec![TSeries::zero(1, deg); m];
    z[d] = TSeries::var(1, deg, 0);
    let mut lam = TSeries::zero(1, deg);
    for k in 1..=deg {
        let forced = lam.compose_poly(beta);
        let r = blk.eval(co, &z, &lam, Some(&forced));
        let rv: Vec<F> = r.iter().map(|s| -s.coef(k, 0)).collect();
        let mut u = minv.mul_vec(&rv).into_iter();
        for (j, zj) in z.iter_mut().enumerate() {
            if j != d {
                zj.set(k, 0, u.next().expect("sized"));
            }
        }
        lam.set(k, 0, u.next().expect("sized"));
    }
    Ok(KernelSeries { d, lam, z })
}

/// Unique forced response when the block Jacobian is invertible; `lam` and
/// `forced` are series in a common parameter.
pub fn forced_extension<F: Scalar>(blk: &Block, co: &JetCoeffs<F>, jinv: &Mat<F>, lam: &TSeries<F>, forced: &TSeries<F>) -> Vec<TSeries<F>> {
    let deg = lam.deg();
    let mut z = vec![TSeries::zero(1, deg); blk.m()];
    for k in 1..=deg {
        let r = blk.eval(co, &z, lam, Some(forced));
        let rv: Vec<F> = r.iter().map(|s| -s.coef(k, 0)).collect();
        for (zj, x) in z.iter_mut().zip(jinv.mul_vec(&rv)) {
            zj.set(k, 0, x);
        }
    }
    z
}

fn series_scale<F: Scalar>(zs: &[TSeries<F>]) -> f64 {
    zs.iter().flat_map(|s| s.coeffs().iter().map(|x| x.magnitude())).fold(0.0, f64::max)
}

/// First order `1..=upto` with a non-negligible coefficient.
fn order_of<F: Scalar>(s: &TSeries<F>, upto: usize, scale: f64, tol: f64) -> Option<usize> {
    (1..=upto.min(s.deg())).find(|&k| !s.coef(k, 0).negligible(scale, tol))
}

fn exponent(order: Option<usize>, power: usize) -> Q {
    order.map_or_else(Q::zero, |o| Q::new((o as i64).into(), (power as i64).into()))
}

// ---------------------------------------------------------------------------
// Problem setup

#[derive(Clone, Debug)]
pub struct BranchConfig {
    /// Total degree of the bivariate reduction series.
    pub degree: usize,
    /// Degree of the kernel-coordinate series.
    pub kernel_degree: usize,
    /// Relative zero threshold for floating coefficients.
    pub tol: f64,
    pub oracle: OracleConfig,
}

impl Default for BranchConfig {
    fn default() -> Self {
        BranchConfig { degree: 6, kernel_degree: 8, tol: 1e-8, oracle: OracleConfig::default() }
    }
}

/// Everything about one FFCN and jet that does not depend on a seed.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: CoalescenceSpec,
    pub jet: DiffusiveJet,
    pub mu: Q,
    pub layout: Layout,
    pub network: Network,
    /// Canonical first network (merge cell last).
    pub first: Network,
    /// Canonical second network (merge cell first).
    pub second: Network,
    pub head: Block,
    pub tail: Block,
    /// `mu` is an eigenvalue of `L_{N1}`.
    pub in_first: bool,
    /// `mu` is an eigenvalue of the reduced Laplacian of the second network.
    pub in_second: bool,
    /// `L^c ∈ Im(J̲̄)`.
    pub lc_in_image: bool,
    pub coeffs: JetCoeffs<Q>,
}

impl Problem {
    pub fn new(spec: &CoalescenceSpec, jet: &DiffusiveJet) -> Result<Problem> {
        jet.validate()?;
        if !spec.is_ffcn() {
            return Err(Error::Precondition("the coalescence is not feedforward".into()));
        }
        if jet.h_1.is_zero() {
            return Err(Error::Precondition("h_1 = 0".into()));
        }
        let network = coalesce(spec);
        if bifurcation_eigenvalue(&network, jet, crate::linalg::DEFAULT_TOL)?.is_none() {
            return Err(Error::Precondition("no Laplacian eigenvalue satisfies g_x + mu h_1 = 0".into()));
        }
        let mu = -&jet.g_x / &jet.h_1;
        let layout = spec.layout();
        let first = spec.canonical_first();
        let second = spec.canonical_second();
        let head = Block::whole(&first);
        let tail = Block::tail(&second, layout);
        let coeffs = JetCoeffs::from_jet(jet);
        let singular = |m: &Mat<Q>| m.rows > 0 && m.rank(0.0) < m.rows;
        let in_first = singular(&head.jacobian(&coeffs));
        let jt = tail.jacobian(&coeffs);
        let in_second = singular(&jt);
        let lc_in_image = in_image(&jt, &tail.forcing_column(&coeffs), 0.0);
        Ok(Problem {
            spec: spec.clone(),
            jet: jet.clone(),
            mu,
            layout,
            network,
            first,
            second,
            head,
            tail,
            in_first,
            in_second,
            lc_in_image,
            coeffs,
        })
    }

    pub fn tail_jacobian(&self) -> Mat<Q> {
        self.tail.jacobian(&self.coeffs)
    }

    pub fn tail_kernel(&self) -> Result<KernelData<Q>> {
        KernelData::new(&self.tail, &self.coeffs)
    }

    /// `L^c`: minus the weights from the merge cell into the tail.
    pub fn l_c(&self) -> Vec<Q> {
        self.tail.forcing_column(&self.coeffs).iter().map(|x| x / &self.coeffs.h1).collect()
    }
}

// ---------------------------------------------------------------------------
// H vector

#[derive(Clone, Debug, Serialize)]
pub struct HVector {
    #[serde(serialize_with = "qser::vec")]
    pub v: Vec<Q>,
    /// `vᵀ H_{f_j} v` over the tail cells.
    #[serde(serialize_with = "qser::vec")]
    pub h: Vec<Q>,
    /// `(g_xx + mu h_11) v∗v + h_22 [W v² − (W v)∗v]`.
    #[serde(serialize_with = "qser::vec")]
    pub structural: Vec<Q>,
    pub in_image: bool,
}

/// `H` for the normalized kernel vector of the tail Jacobian.
pub fn compute_h(p: &Problem) -> Result<HVector> {
    let kd = p.tail_kernel()?;
    h_vector(p, &kd.v)
}

/// `H` for a given tail vector; both forms are computed and must agree.
pub fn h_vector(p: &Problem, v: &[Q]) -> Result<HVector> {
    let sys = AdmissibleSystem::new(&p.network, &p.jet)?;
    let coords: Vec<usize> = p.tail.cells.iter().map(|c| c + 1).collect();
    let m = coords.len();
    let h: Vec<Q> = coords
        .iter()
        .map(|&cell| {
            let t = hessian_tensors(&sys, cell, &coords);
            let mut s = Q::zero();
            for a in 0..m {
                for b in 0..m {
                    s += &t.hessian[(a, b)] * &v[a] * &v[b];
                }
            }
            s
        })
        .collect();
    let w = p.second.adjacency();
    let wbar = |i: usize, k: usize| if i == k { Q::zero() } else { w[(i + 1, k + 1)].clone() };
    let j = &p.jet;
    let lead = &j.g_xx + &p.mu * &j.h_11;
    let structural: Vec<Q> = (0..m)
        .map(|i| {
            let wv2 = (0..m).fold(Q::zero(), |a, k| a + wbar(i, k) * &v[k] * &v[k]);
            let wv = (0..m).fold(Q::zero(), |a, k| a + wbar(i, k) * &v[k]);
            &lead * &v[i] * &v[i] + &j.h_22 * (wv2 - wv * &v[i])
        })
        .collect();
    if h != structural {
        return Err(Error::Consistency("Hessian and structural forms of H disagree".into()));
    }
    let in_image = in_image(&p.tail_jacobian(), &h, 0.0);
    Ok(HVector { v: v.to_vec(), h, structural, in_image })
}

// ---------------------------------------------------------------------------
// Seeds

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Component {
    First,
    Second,
}

/// A branch of one component network that may extend to the coalescence.
#[derive(Clone, Debug, Serialize)]
pub struct BranchSeed {
    pub component: Component,
    pub sides: Vec<Side>,
    pub trivial: bool,
    /// Growth exponent of each cell of the component (canonical numbering).
    #[serde(serialize_with = "qser::vec")]
    pub exponents: Vec<Q>,
    /// `λ = ±p^lambda_power`; 1 for branches smooth in λ.
    pub lambda_power: u32,
    /// Merge-cell coordinate as a polynomial in `p` (index = power).
    pub forcing: Vec<f64>,
    /// Highest power of `p` in `forcing` that is trustworthy.
    pub trusted: usize,
    /// Exact λ-Taylor coefficients of every component cell, when known.
    #[serde(skip)]
    pub exact: Option<Vec<Vec<Q>>>,
    /// The oracle branches of the component forming this seed.
    #[serde(skip)]
    pub branches: Vec<NumericalBranch>,
    /// Index of the merge cell within the component.
    pub merge: usize,
}

impl BranchSeed {
    pub fn bc_prime(&self) -> Value {
        match &self.exact {
            Some(e) => Value::Exact(e[self.merge].get(1).cloned().unwrap_or_else(Q::zero)),
            None => Value::Approx(self.forcing.get(1).copied().unwrap_or(0.0)),
        }
    }

    pub fn smooth(&self) -> bool {
        self.lambda_power == 1
    }
}

fn round_exponent(e: f64) -> Q {
    const C: [(i64, i64); 9] = [(1, 4), (1, 3), (1, 2), (2, 3), (3, 4), (1, 1), (3, 2), (2, 1), (3, 1)];
    let (n, d) = C.iter().copied().min_by(|a, b| ((a.0 as f64 / a.1 as f64) - e).abs().total_cmp(&((b.0 as f64 / b.1 as f64) - e).abs())).expect("nonempty");
    Q::new(n.into(), d.into())
}

fn slope(b: &NumericalBranch) -> Vec<f64> {
    let (l, x) = &b.samples[0];
    x.iter().map(|v| v / l).collect()
}

fn is_linear(b: &NumericalBranch) -> bool {
    b.per_cell_exponent.iter().all(|e| e.identically_zero || (e.exponent - 1.0).abs() < 0.1)
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    let s = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * (1.0 + s))
}

/// Group oracle branches into seeds: a branch smooth through the origin shows
/// up on both sides with matching slopes.
pub fn group_sides(res: &OracleResult) -> Vec<Vec<NumericalBranch>> {
    let neg: Vec<&NumericalBranch> = res.on_side(Side::Negative).collect();
    let pos: Vec<&NumericalBranch> = res.on_side(Side::Positive).collect();
    let mut used = vec![false; pos.len()];
    let mut out = Vec::new();
    for nb in neg {
        let partner = if is_linear(nb) {
            (0..pos.len()).find(|&i| !used[i] && is_linear(pos[i]) && close(&slope(nb), &slope(pos[i]), 1e-3))
        } else {
            None
        };
        match partner {
            Some(i) => {
                used[i] = true;
                out.push(vec![nb.clone(), pos[i].clone()]);
            }
            None => out.push(vec![nb.clone()]),
        }
    }
    for (i, p) in pos.into_iter().enumerate() {
        if !used[i] {
            out.push(vec![p.clone()]);
        }
    }
    out
}

fn numeric_seed(component: Component, group: Vec<NumericalBranch>, merge: usize) -> BranchSeed {
    let n = group[0].samples[0].1.len();
    let exponents: Vec<Q> = (0..n)
        .map(|i| {
            let fits: Vec<f64> = group.iter().map(|b| &b.per_cell_exponent[i]).filter(|e| !e.identically_zero && e.exponent.is_finite()).map(|e| e.exponent).collect();
            if fits.is_empty() {
                Q::zero()
            } else {
                round_exponent(fits.iter().sum::<f64>() / fits.len() as f64)
            }
        })
        .collect();
    let trivial = group.iter().all(|b| b.is_trivial());
    let lambda_power = if exponents.iter().all(|e| e.is_zero() || e.is_one()) { 1 } else { 2 };
    let forcing = fit_forcing(&group, merge, lambda_power);
    let mut sides: Vec<Side> = group.iter().map(|b| b.side).collect();
    sides.sort();
    BranchSeed { component, sides, trivial, exponents, lambda_power, forcing, trusted: 3, exact: None, branches: group, merge }
}

/// Least-squares cubic through the origin for the merge-cell coordinate.
fn fit_forcing(group: &[NumericalBranch], c: usize, power: u32) -> Vec<f64> {
    let pts: Vec<(f64, f64)> = group
        .iter()
        .flat_map(|b| b.samples.iter().map(move |(l, x)| (if power == 1 { *l } else { l.abs().sqrt() }, x[c])))
        .collect();
    let pmax = pts.iter().fold(0.0f64, |m, p| m.max(p.0.abs()));
    if pts.len() < 3 || pmax == 0.0 || pts.iter().all(|p| p.1 == 0.0) {
        return vec![0.0; 4];
    }
    let a = DMatrix::from_fn(pts.len(), 3, |i, k| (pts[i].0 / pmax).powi(k as i32 + 1));
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let sol = a.svd(true, true).solve(&b, 1e-14).unwrap_or_else(|_| DVector::zeros(3));
    vec![0.0, sol[0] / pmax, sol[1] / pmax.powi(2), sol[2] / pmax.powi(3)]
}

/// Exact seeds of the first network from its own reduction when `mu` is a
/// simple eigenvalue with a transcritical crossing. Coefficients `0..degree`.
pub fn exact_first_seeds(net1: &Network, jet: &DiffusiveJet, mu: &Q, degree: usize) -> Result<Vec<Vec<Vec<Q>>>> {
    let blk = Block::whole(net1);
    let co = JetCoeffs::from_jet(jet);
    let n = blk.m();
    let mut out = vec![vec![vec![Q::zero(); degree]; n]];
    let Ok(kd) = KernelData::new(&blk, &co) else { return Ok(out) };
    if !kd.simple() {
        return Ok(out);
    }
    let ls = ls_reduce(&blk, &co, &kd, &[], degree);
    let (c20, c11) = (ls.psi.coef(2, 0), ls.psi.coef(1, 1));
    if c20.is_zero() || c11.is_zero() {
        return Ok(out);
    }
    let s = -(c11 / c20);
    if kd.v.iter().all(|x| x.is_zero() || x.is_one()) {
        let den = &jet.g_xx + mu * &jet.h_11;
        if !den.is_zero() {
            let closed = -q(2) * (&jet.g_xl + mu * &jet.h_1l) / den;
            if closed != s {
                return Err(Error::Consistency(format!("closed-form slope {} differs from the reduction {}", fmt_q(&closed), fmt_q(&s))));
            }
        }
    }
    let z = ls.lambda_branch(&s);
    out.push(z.iter().map(|zi| (0..degree).map(|k| zi.coef(k, 0)).collect()).collect());
    Ok(out)
}

/// `N(u)`: the λ² coefficient of `F(λu, λ)`, quadratic in `u`.
fn quad_part<F: Scalar>(blk: &Block, co: &JetCoeffs<F>, u: &[F]) -> Vec<F> {
    let lam = TSeries::var(1, 2, 0);
    let z: Vec<TSeries<F>> = u.iter().map(|x| lam.scale(x)).collect();
    blk.eval(co, &z, &lam, None).iter().map(|s| s.coef(2, 0)).collect()
}

/// Linear structure of an unforced block at a singular Jacobian of any
/// kernel dimension. Slopes of smooth branches are `u0 = K α` with
/// `C N(K α) = 0`, where `C` spans the cokernel.
#[derive(Clone, Debug)]
pub struct SlopeSystem<F> {
    pub j: Mat<F>,
    pub kernel: Vec<Vec<F>>,
    pub cokernel: Vec<Vec<F>>,
    /// Orthogonal complement of the kernel.
    pub complement: Vec<Vec<F>>,
}

impl SlopeSystem<Q> {
    pub fn new(blk: &Block, co: &JetCoeffs<Q>) -> Self {
        let j = blk.jacobian(co);
        let kernel = j.nullspace(0.0);
        let cokernel = j.transpose().nullspace(0.0);
        let complement = if kernel.is_empty() { Mat::identity(blk.m()).to_rows() } else { Mat::from_rows(&kernel).nullspace(0.0) };
        SlopeSystem { j, kernel, cokernel, complement }
    }
}

impl<F: Scalar> SlopeSystem<F> {
    pub fn map<G: Scalar>(&self, f: impl Fn(&F) -> G + Copy) -> SlopeSystem<G> {
        let vm = |v: &Vec<F>| v.iter().map(f).collect::<Vec<G>>();
        SlopeSystem {
            j: self.j.map(f),
            kernel: self.kernel.iter().map(vm).collect(),
            cokernel: self.cokernel.iter().map(vm).collect(),
            complement: self.complement.iter().map(vm).collect(),
        }
    }

    fn combine(&self, alpha: &[F]) -> Vec<F> {
        let n = self.j.rows;
        (0..n).map(|i| self.kernel.iter().zip(alpha).fold(F::zero(), |a, (k, x)| a + k[i].clone() * x.clone())).collect()
    }

    /// Reduced equations `C N(K α)`.
    pub fn equations(&self, blk: &Block, co: &JetCoeffs<F>, alpha: &[F]) -> Vec<F> {
        let nu = quad_part(blk, co, &self.combine(alpha));
        self.cokernel.iter().map(|c| dot(c, &nu)).collect()
    }

    /// `DN(u0) w`, exact because `N` is quadratic.
    fn dn(&self, blk: &Block, co: &JetCoeffs<F>, u0: &[F], w: &[F]) -> Vec<F> {
        let plus: Vec<F> = u0.iter().zip(w).map(|(a, b)| a.clone() + b.clone()).collect();
        let minus: Vec<F> = u0.iter().zip(w).map(|(a, b)| a.clone() - b.clone()).collect();
        let half = F::from_q(&crate::exact::qf(1, 2));
        quad_part(blk, co, &plus).into_iter().zip(quad_part(blk, co, &minus)).map(|(a, b)| (a - b) * half.clone()).collect()
    }

    /// Taylor coefficients `0..deg` of the smooth branch with slope `u0`.
    /// Fails when the slope is a degenerate root of the reduced equations.
    pub fn branch_series(&self, blk: &Block, co: &JetCoeffs<F>, u0: &[F], deg: usize, tol: f64) -> Result<Vec<Vec<F>>> {
        let n = self.j.rows;
        let mut cols: Vec<Vec<F>> = self.complement.iter().map(|r| self.j.mul_vec(r)).collect();
        cols.extend(self.kernel.iter().map(|k| self.dn(blk, co, u0, k)));
        let minv = Mat::from_cols(&cols, n).inverse(tol).ok_or_else(|| Error::Genericity("degenerate branch slope".into()))?;
        let lam = TSeries::var(1, deg, 0);
        let mut x: Vec<TSeries<F>> = u0.iter().map(|a| lam.scale(a)).collect();
        for k in 1..deg {
            let r = blk.eval(co, &x, &lam, None);
            let rv: Vec<F> = r.iter().map(|s| -s.coef(k + 1, 0)).collect();
            let sol = minv.mul_vec(&rv);
            let (rho, kappa) = sol.split_at(self.complement.len());
            for i in 0..n {
                let a = self.complement.iter().zip(rho).fold(F::zero(), |a, (b, c)| a + b[i].clone() * c.clone());
                let b = self.kernel.iter().zip(kappa).fold(F::zero(), |a, (b, c)| a + b[i].clone() * c.clone());
                x[i].set(k + 1, 0, a);
                let prev = x[i].coef(k, 0);
                x[i].set(k, 0, prev + b);
            }
        }
        Ok(x.iter().map(|s| (0..deg).map(|k| s.coef(k, 0)).collect()).collect())
    }
}

/// Best rational with denominator at most `max_den` (continued fractions).
pub fn rationalize(x: f64, max_den: i64) -> Q {
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i64;
        let (h2, k2) = (ai * h1 + h0, ai * k1 + k0);
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    Q::new(h1.into(), k1.into())
}

/// Newton refinement of a slope estimate on the reduced equations.
fn polish_slope(sys: &SlopeSystem<f64>, blk: &Block, co: &JetCoeffs<f64>, s: &[f64]) -> Option<Vec<f64>> {
    let p = sys.kernel.len();
    let n = sys.j.rows;
    let k = Mat::from_cols(&sys.kernel, n);
    let kt = k.transpose();
    let mut alpha = kt.mul(&k).solve(&kt.mul_vec(s), 1e-12)?;
    for _ in 0..50 {
        let e = sys.equations(blk, co, &alpha);
        let u0 = sys.combine(&alpha);
        let cols: Vec<Vec<f64>> = sys.kernel.iter().map(|kv| {
            let d = sys.dn(blk, co, &u0, kv);
            sys.cokernel.iter().map(|c| dot(c, &d)).collect()
        }).collect();
        let step = Mat::from_cols(&cols, p).solve(&e, 1e-14)?;
        let size = step.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        alpha.iter_mut().zip(&step).for_each(|(a, d)| *a -= d);
        if size <= 1e-15 * (1.0 + alpha.iter().fold(0.0f64, |m, x| m.max(x.abs()))) {
            break;
        }
    }
    Some(alpha)
}

/// Seeds of the first (canonical) network: every oracle branch through the
/// origin. Smooth branches get Taylor series from their polished slope,
/// exact whenever the slope is rational.
pub fn n1_branch_seeds(net1: &Network, jet: &DiffusiveJet, mu: &Q, cfg: &BranchConfig) -> Result<Vec<BranchSeed>> {
    let sys = AdmissibleSystem::new(net1, jet)?;
    let res = trace_branches(&sys, &cfg.oracle);
    let merge = net1.n_cells() - 1;
    let mut seeds: Vec<BranchSeed> = group_sides(&res).into_iter().map(|g| numeric_seed(Component::First, g, merge)).collect();
    let blk = Block::whole(net1);
    let co = JetCoeffs::from_jet(jet);
    let cof = co.convert::<f64>();
    let sq = SlopeSystem::new(&blk, &co);
    let sf = sq.map(to_f64);
    let deg = cfg.degree;
    for seed in seeds.iter_mut().filter(|s| s.smooth()) {
        if seed.trivial {
            seed.exact = Some(vec![vec![Q::zero(); deg]; blk.m()]);
            continue;
        }
        let Some(alpha) = polish_slope(&sf, &blk, &cof, &slope(&seed.branches[0])) else { continue };
        let aq: Vec<Q> = alpha.iter().map(|a| rationalize(*a, 100_000)).collect();
        let ex = if sq.equations(&blk, &co, &aq).iter().all(|e| e.is_zero()) {
            sq.branch_series(&blk, &co, &sq.combine(&aq), deg, 0.0).ok()
        } else {
            None
        };
        match ex {
            Some(ex) => {
                seed.exponents = ex.iter().map(|c| exponent((1..c.len()).find(|&k| !c[k].is_zero()), 1)).collect();
                seed.forcing = ex[merge].iter().map(to_f64).collect();
                seed.exact = Some(ex);
                seed.trusted = deg - 1;
            }
            None => {
                if let Ok(xf) = sf.branch_series(&blk, &cof, &sf.combine(&alpha), deg, 1e-12) {
                    seed.forcing = xf[merge].clone();
                    seed.trusted = deg - 1;
                }
            }
        }
    }
    // cross-check against the scalar reduction when the eigenvalue is simple
    for ex in exact_first_seeds(net1, jet, mu, deg)?.into_iter().skip(1) {
        if !seeds.iter().any(|s| s.exact.as_ref() == Some(&ex)) {
            return Err(Error::Consistency("oracle and reduction disagree on the first-network branches".into()));
        }
    }
    Ok(seeds)
}

/// Seeds of the second (canonical) network for the one-component case in the
/// second network. Branches on which the merge cell moves are rejected.
pub fn n2_branch_seeds(net2: &Network, jet: &DiffusiveJet, cfg: &BranchConfig) -> Result<(Vec<BranchSeed>, Vec<String>)> {
    let sys = AdmissibleSystem::new(net2, jet)?;
    let res = trace_branches(&sys, &cfg.oracle);
    let mut notes = Vec::new();
    let mut seeds = Vec::new();
    for g in group_sides(&res) {
        if g.iter().any(|b| !b.per_cell_exponent[0].identically_zero) {
            notes.push("rejected a second-network branch: the merging cell does not bifurcate".into());
            continue;
        }
        let mut s = numeric_seed(Component::Second, g, 0);
        if s.trivial {
            s.exact = Some(vec![vec![Q::zero(); cfg.degree]; net2.n_cells()]);
        }
        seeds.push(s);
    }
    Ok((seeds, notes))
}

// ---------------------------------------------------------------------------
// Predictions

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Case {
    OnlyInFirst,
    OnlyInSecond,
    SqrtCase,
    LinearCase,
    QuarterRootCase,
    PitchforkLSCase,
    DegenerateUnclassified,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Domain {
    Both,
    PositiveOnly,
    NegativeOnly,
    Empty,
}

impl Domain {
    pub fn from_sides(neg: bool, pos: bool) -> Domain {
        match (neg, pos) {
            (true, true) => Domain::Both,
            (false, true) => Domain::PositiveOnly,
            (true, false) => Domain::NegativeOnly,
            (false, false) => Domain::Empty,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PredictedBranch {
    pub label: String,
    pub sides: Vec<Side>,
    /// 2 for a ± pair.
    pub multiplicity: usize,
    /// Per coalescence cell; 0 marks an identically zero coordinate.
    #[serde(serialize_with = "qser::vec")]
    pub exponents: Vec<Q>,
    pub primary: bool,
}

/// Reduction coefficients for unit `v`, `v*`.
#[derive(Clone, Debug, Serialize)]
pub struct LsCoefficients {
    pub psi_yy: Value,
    pub psi_ylambda: Value,
    pub psi_yyy: Value,
    pub psi_lambdalambda: Value,
}

/// Derivatives at `t = 0` of the kernel-coordinate solution.
#[derive(Clone, Debug, Serialize)]
pub struct KernelDerivatives {
    /// Coalescence cell (1-based) used as parameter.
    pub cell: usize,
    /// `λ'(0), λ''(0), λ'''(0), λ''''(0)`.
    pub z_lambda: Vec<Value>,
    /// `(cell, z''(0))` for the other tail cells.
    pub z_second: Vec<(usize, Value)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchPrediction {
    pub seed: usize,
    pub case: Case,
    pub branches: Vec<PredictedBranch>,
    pub ls: Option<LsCoefficients>,
    pub kernel: Option<KernelDerivatives>,
    /// `Λ''(0)` of the pitchfork branch, unit normalization.
    pub lambda_pp: Option<Value>,
    /// Leading λ-derivative of the range part `W(0, λ)` on the tail.
    pub w_lambda: Option<Vec<Value>>,
    pub notes: Vec<String>,
}

impl BranchPrediction {
    fn new(seed: usize, case: Case) -> Self {
        BranchPrediction { seed, case, branches: vec![], ls: None, kernel: None, lambda_pp: None, w_lambda: None, notes: vec![] }
    }

    fn degenerate(seed: usize, why: impl Into<String>) -> Self {
        let mut p = Self::new(seed, Case::DegenerateUnclassified);
        p.notes.push(why.into());
        p
    }

    pub fn is_predictive(&self) -> bool {
        self.case != Case::DegenerateUnclassified
    }

    pub fn branch_count(&self) -> usize {
        self.branches.iter().map(|b| b.multiplicity).sum()
    }

    pub fn count_on(&self, side: Side) -> usize {
        self.branches.iter().filter(|b| b.sides.contains(&side)).map(|b| b.multiplicity).sum()
    }

    pub fn lambda_domain(&self) -> Domain {
        let primary: Vec<&PredictedBranch> = self.branches.iter().filter(|b| b.primary).collect();
        let on = |s: Side| primary.iter().any(|b| b.sides.contains(&s));
        Domain::from_sides(on(Side::Negative), on(Side::Positive))
    }

    pub fn growth_exponent_per_cell(&self) -> Option<&[Q]> {
        self.branches.iter().find(|b| b.primary).map(|b| b.exponents.as_slice())
    }
}

struct SeedCtx<'a> {
    p: &'a Problem,
    seed: &'a BranchSeed,
    idx: usize,
    cfg: &'a BranchConfig,
}

impl SeedCtx<'_> {
    /// Exponents on the coalescence from the seed plus the tail.
    fn exponents(&self, tail: &[Q]) -> Vec<Q> {
        let lay = self.p.layout;
        let mut e = vec![Q::zero(); lay.n()];
        match self.seed.component {
            Component::First => e[..lay.n1].clone_from_slice(&self.seed.exponents),
            Component::Second => e[lay.c()] = self.seed.exponents[0].clone(),
        }
        for (j, &cell) in self.p.tail.cells.iter().enumerate() {
            e[cell] = tail[j].clone();
        }
        e
    }

    fn sides_with(&self, side: Option<Side>) -> Vec<Side> {
        side.into_iter().filter(|s| self.seed.sides.contains(s)).collect()
    }

    fn tail_exponents<F: Scalar>(&self, z: &[TSeries<F>], upto: usize, power: usize) -> Vec<Q> {
        let scale = series_scale(z);
        z.iter().map(|s| exponent(order_of(s, upto, scale, self.cfg.tol), power)).collect()
    }

    fn branch(&self, label: &str, sides: Vec<Side>, multiplicity: usize, tail: &[Q], primary: bool) -> PredictedBranch {
        PredictedBranch { label: label.into(), sides, multiplicity, exponents: self.exponents(tail), primary }
    }
}

/// Classification and prediction for one seed.
pub fn predict_seed(p: &Problem, seeds: &[BranchSeed], idx: usize, cfg: &BranchConfig) -> Result<BranchPrediction> {
    let seed = &seeds[idx];
    let ctx = SeedCtx { p, seed, idx, cfg };
    if seed.component == Component::Second {
        return Ok(only_in_second(&ctx));
    }
    if !p.in_second {
        return one_component_extension(&ctx);
    }
    if !p.in_first {
        return Err(Error::Precondition("seed of the first network without a bifurcation there".into()));
    }
    if !seed.smooth() {
        return Ok(BranchPrediction::degenerate(idx, "seed is not smooth in λ"));
    }
    match &seed.exact {
        Some(e) => extension(&ctx, e[seed.merge].clone()),
        None => extension(&ctx, seed.forcing.clone()),
    }
}

pub fn classify_case(p: &Problem, seeds: &[BranchSeed], idx: usize, cfg: &BranchConfig) -> Result<Case> {
    Ok(predict_seed(p, seeds, idx, cfg)?.case)
}

fn only_in_second(ctx: &SeedCtx) -> BranchPrediction {
    let mut out = BranchPrediction::new(ctx.idx, Case::OnlyInSecond);
    let tail: Vec<Q> = ctx.seed.exponents[1..].to_vec();
    out.branches.push(ctx.branch("second-network branch, first network at rest", ctx.seed.sides.clone(), 1, &tail, true));
    out
}

/// The tail Jacobian is invertible: each seed extends uniquely.
fn one_component_extension(ctx: &SeedCtx) -> Result<BranchPrediction> {
    let p = ctx.p;
    let seed = ctx.seed;
    let mut out = BranchPrediction::new(ctx.idx, Case::OnlyInFirst);
    let m = p.tail.m();
    let deg = ctx.cfg.degree;
    let jinv = if m == 0 {
        Mat::zeros(0, 0)
    } else {
        p.tail_jacobian().inverse(0.0).ok_or_else(|| Error::Numerical("tail Jacobian is singular".into()))?
    };
    let tail = match &seed.exact {
        Some(e) => {
            let lam = TSeries::var(1, deg, 0);
            let forced = TSeries::from_coeffs(deg, &e[seed.merge]);
            let z = forced_extension(&p.tail, &p.coeffs, &jinv, &lam, &forced);
            ctx.tail_exponents(&z, deg - 1, 1)
        }
        None => {
            let power = seed.lambda_power as usize;
            let sign = if seed.sides.first() == Some(&Side::Negative) { -1.0 } else { 1.0 };
            let pvar = TSeries::<f64>::var(1, deg, 0);
            let lam = (1..power).fold(pvar.clone(), |a, _| a.mul(&pvar)).scale(&sign);
            let forced = TSeries::from_coeffs(deg, &seed.forcing);
            let co = p.coeffs.convert::<f64>();
            let z = forced_extension(&p.tail, &co, &jinv.map(to_f64), &lam, &forced);
            ctx.tail_exponents(&z, seed.trusted, power)
        }
    };
    out.branches.push(ctx.branch("unique extension", seed.sides.clone(), 1, &tail, true));
    Ok(out)
}

fn unit(coef: Value, a: i32, kq: &KernelData<Q>) -> Value {
    let nv = dot(&kq.v, &kq.v);
    let ns = dot(&kq.vstar, &kq.vstar);
    let sq = (0..a).fold(ns, |acc, _| acc * &nv);
    match (&coef, sqrt_exact(&sq)) {
        (Value::Exact(x), _) if x.is_zero() => coef.clone(),
        (Value::Exact(x), Some(r)) => Value::Exact(x / r),
        _ => Value::Approx(coef.to_f64() / to_f64(&sq).sqrt()),
    }
}

fn extension<F: Scalar>(ctx: &SeedCtx, beta: Vec<F>) -> Result<BranchPrediction> {
    let p = ctx.p;
    let cfg = ctx.cfg;
    let idx = ctx.idx;
    let kq = match p.tail_kernel() {
        Ok(k) => k,
        Err(Error::Rank(why)) => return Ok(BranchPrediction::degenerate(idx, why)),
        Err(e) => return Err(e),
    };
    let kd: KernelData<F> = kq.map(F::from_q);
    let co: JetCoeffs<F> = p.coeffs.convert();
    let b1 = beta.get(1).cloned().unwrap_or_else(F::zero);
    let bscale = beta.iter().map(|x| x.magnitude()).fold(1.0, f64::max);
    let forcing_zero = ctx.seed.trivial || b1.negligible(bscale, cfg.tol);
    if !(forcing_zero || p.lc_in_image) {
        return Ok(sqrt_or_quarter(ctx, &kd, &co, &beta)?);
    }
    if !kq.simple() {
        return Ok(BranchPrediction::degenerate(idx, "mu is not a simple eigenvalue of the reduced Laplacian"));
    }
    let ls = ls_reduce(&p.tail, &co, &kd, &beta, cfg.degree);
    linear_or_pitchfork(ctx, &kq, ls)
}

/// Forcing outside `Im J̲̄`: kernel-coordinate series decide between the
/// square-root and quarter-root cases.
fn sqrt_or_quarter<F: Scalar>(ctx: &SeedCtx, kd: &KernelData<F>, co: &JetCoeffs<F>, beta: &[F]) -> Result<BranchPrediction> {
    let p = ctx.p;
    let deg = ctx.cfg.kernel_degree;
    let h = compute_h(p)?;
    let ks = kernel_param(&p.tail, co, kd, beta, deg, ctx.cfg.tol)?;
    let lam_scale = series_scale(std::slice::from_ref(&ks.lam)).max(1.0);
    let k0 = order_of(&ks.lam, deg, lam_scale, ctx.cfg.tol);
    let derivs = KernelDerivatives {
        cell: p.tail.cells[ks.d] + 1,
        z_lambda: (1..=4).map(|k| value(&(ks.lam.coef(k, 0) * F::from_q(&factorial(k))))).collect(),
        z_second: (0..p.tail.m())
            .filter(|&j| j != ks.d)
            .map(|j| (p.tail.cells[j] + 1, value(&(ks.z[j].coef(2, 0) * F::from_q(&q(2))))))
            .collect(),
    };
    let mut out = BranchPrediction::new(ctx.idx, Case::SqrtCase);
    out.kernel = Some(derivs);
    match (h.in_image, k0) {
        (false, Some(2)) => {
            let side = side_of(real(&ks.lam.coef(2, 0)));
            let tail = ctx.tail_exponents(&ks.z, deg, 2);
            out.branches.push(ctx.branch("square-root pair", ctx.sides_with(side), 2, &tail, true));
        }
        (true, Some(4)) if p.tail.m() == 2 => {
            out.case = Case::QuarterRootCase;
            let side = side_of(real(&ks.lam.coef(4, 0)));
            let tail = ctx.tail_exponents(&ks.z, deg, 4);
            out.branches.push(ctx.branch("quarter-root pair", ctx.sides_with(side), 2, &tail, true));
        }
        (true, _) if p.tail.m() != 2 => {
            out.case = Case::DegenerateUnclassified;
            out.notes.push("H lies in the image and the tail has more than two cells".into());
        }
        (_, k) => {
            out.case = Case::DegenerateUnclassified;
            out.notes.push(format!("leading order of λ along the kernel coordinate is {k:?}"));
        }
    }
    Ok(out)
}

fn linear_or_pitchfork<F: Scalar>(ctx: &SeedCtx, kq: &KernelData<Q>, ls: Ls<F>) -> Result<BranchPrediction> {
    let cfg = ctx.cfg;
    let deg = ls.deg;
    let psi = &ls.psi;
    let (c20, c11, c02, c30) = (psi.coef(2, 0), psi.coef(1, 1), psi.coef(0, 2), psi.coef(3, 0));
    let scale = [&c20, &c11, &c02, &c30].iter().map(|x| x.magnitude()).fold(0.0, f64::max);
    let two = F::from_q(&q(2));
    let coeffs = LsCoefficients {
        psi_yy: unit(value(&(two.clone() * c20.clone())), 2, kq),
        psi_ylambda: unit(value(&c11), 1, kq),
        psi_yyy: unit(value(&(F::from_q(&q(6)) * c30.clone())), 3, kq),
        psi_lambdalambda: unit(value(&(two * c02.clone())), 0, kq),
    };
    let w_lambda: Vec<Value> = (0..ls.kd.v.len())
        .map(|i| value(&ls.c.iter().zip(&ls.kd.basis).fold(F::zero(), |a, (ck, b)| a + b[i].clone() * ck.coef(0, 1))))
        .collect();
    let mut out = BranchPrediction::new(ctx.idx, Case::LinearCase);
    out.ls = Some(coeffs);
    out.w_lambda = Some(w_lambda);
    let sides = ctx.seed.sides.clone();
    if !c20.negligible(scale, cfg.tol) {
        let disc = c11.clone() * c11.clone() - F::from_q(&q(4)) * c20.clone() * c02.clone();
        if real(&disc) < 0.0 {
            out.notes.push("the reduced quadratic has no real root".into());
            return Ok(out);
        }
        let roots = |s: Option<F>| -> Option<Vec<F>> {
            let r = s?;
            let den = F::from_q(&q(2)) * c20.clone();
            Some(vec![(-c11.clone() - r.clone()) / den.clone(), (-c11.clone() + r) / den])
        };
        let mut tails = Vec::new();
        match roots(sqrt_of(&disc)) {
            Some(rs) => {
                for s in rs {
                    tails.push(ctx.tail_exponents(&ls.lambda_branch(&s), deg - 1, 1));
                }
            }
            None => {
                let lf = ls.to_f64();
                let d = real(&disc).sqrt();
                let (a, b) = (real(&c20), real(&c11));
                for s in [(-b - d) / (2.0 * a), (-b + d) / (2.0 * a)] {
                    tails.push(ctx.tail_exponents(&lf.lambda_branch(&s), deg - 1, 1));
                }
            }
        }
        // the branch that is not the seed's own zero extension is primary
        let nontrivial = tails.iter().position(|t| t.iter().any(|e| !e.is_zero())).unwrap_or(0);
        for (k, t) in tails.iter().enumerate() {
            out.branches.push(ctx.branch("linear branch", sides.clone(), 1, t, k == nontrivial));
        }
        return Ok(out);
    }
    out.case = Case::PitchforkLSCase;
    if c11.negligible(scale, cfg.tol) || c30.negligible(scale, cfg.tol) {
        out.case = Case::DegenerateUnclassified;
        out.notes.push("psi_ylambda or psi_yyy vanishes".into());
        return Ok(out);
    }
    let s = -(c02.clone() / c11.clone());
    let ta = ctx.tail_exponents(&ls.lambda_branch(&s), deg - 1, 1);
    out.branches.push(ctx.branch("λ-parametrized branch", sides, 1, &ta, false));
    let (lam, zy) = ls.y_branch();
    let nu0 = lam.coef(2, 0);
    let lpp = unit(value(&(F::from_q(&q(2)) * nu0.clone())), 2, kq);
    // unit() divides by |v|^2 |v*|; undo the |v*| factor
    let vs = dot(&kq.vstar, &kq.vstar);
    out.lambda_pp = Some(match (&lpp, sqrt_exact(&vs)) {
        (Value::Exact(x), Some(r)) => Value::Exact(x * r),
        _ => Value::Approx(lpp.to_f64() * to_f64(&vs).sqrt()),
    });
    let tb = ctx.tail_exponents(&zy, deg.saturating_sub(3).max(1), 2);
    out.branches.push(ctx.branch("pitchfork pair", ctx.sides_with(side_of(real(&nu0))), 2, &tb, true));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Whole analysis

#[derive(Clone, Debug)]
pub struct Analysis {
    pub problem: Problem,
    pub seeds: Vec<BranchSeed>,
    pub predictions: Vec<BranchPrediction>,
    pub h: Option<HVector>,
    pub notes: Vec<String>,
}

pub fn analyze(spec: &CoalescenceSpec, jet: &DiffusiveJet, cfg: &BranchConfig) -> Result<Analysis> {
    let p = Problem::new(spec, jet)?;
    let mut notes = Vec::new();
    let seeds = if p.in_first {
        n1_branch_seeds(&p.first, &p.jet, &p.mu, cfg)?
    } else {
        let (s, n) = n2_branch_seeds(&p.second, &p.jet, cfg)?;
        notes.extend(n);
        s
    };
    let predictions = (0..seeds.len()).map(|i| predict_seed(&p, &seeds, i, cfg)).collect::<Result<Vec<_>>>()?;
    let h = if p.in_second { compute_h(&p).ok() } else { None };
    Ok(Analysis { problem: p, seeds, predictions, h, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::qf;
    use crate::network::build_network;

    fn e(s: usize, t: usize, w: i64) -> (usize, usize, Q) {
        (s, t, q(w))
    }

    #[test]
    fn scalar_transcritical_seed_matches_closed_form() {
        // two cells, 1 -> 2 only: mu = 1 with indicator kernel (0, 1)
        let net = build_network(2, &[e(1, 2, 1)]).unwrap();
        let jet = DiffusiveJet::default_for_mu(&q(1));
        let seeds = exact_first_seeds(&net, &jet, &q(1), 5).unwrap();
        assert_eq!(seeds.len(), 2);
        assert_eq!(seeds[1][1][1], qf(-16, 9));
        assert!(seeds[1][0].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn pitchfork_reduction_of_a_cubic() {
        // one cell with g = x(l - x^2)-like jet: g_x = 0, g_xx = 0, g_xxx = -6, g_xl = 1
        let net = build_network(1, &[]).unwrap();
        let mut jet = DiffusiveJet::linear(q(0), q(1));
        jet.g_xxx = q(-6);
        jet.g_xl = q(1);
        let blk = Block::whole(&net);
        let co = JetCoeffs::from_jet(&jet);
        let kd = KernelData::new(&blk, &co).unwrap();
        let ls = ls_reduce(&blk, &co, &kd, &[], 5);
        assert_eq!(ls.psi.coef(1, 1), q(1));
        assert_eq!(ls.psi.coef(3, 0), q(-1));
        let (lam, _) = ls.y_branch();
        assert_eq!(lam.coef(2, 0), q(1));
        assert!(lam.coef(3, 0).is_zero() && lam.coef(4, 0).is_zero());
    }
}
