//! Eigenstructure of Laplacians and the spectral identities of feedforward
//! coalescence networks.
//!
//! Rational matrices go through the characteristic polynomial: a square-free
//! decomposition gives exact algebraic multiplicities, rational roots are
//! recovered exactly, and only irrational or complex roots fall back to
//! floating point.

use std::fmt;

use num_complex::Complex64;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{fmt_q, q, to_f64, Q};
use crate::linalg::{self, in_span, normalize_first, reduce_modulo, Mat, Scalar, DEFAULT_TOL};
use crate::network::{coalesce, is_ffcn, ChainLink, CoalescenceSpec, Network};
use crate::poly::{charpoly, denominator_lcm, isolate_roots, Root};

#[derive(Clone, Debug, PartialEq)]
pub enum EigenValue {
    Exact(Q),
    Real(f64),
    Complex(Complex64),
}

impl EigenValue {
    pub fn to_c64(&self) -> Complex64 {
        match self {
            EigenValue::Exact(x) => Complex64::new(to_f64(x), 0.0),
            EigenValue::Real(x) => Complex64::new(*x, 0.0),
            EigenValue::Complex(z) => *z,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            EigenValue::Exact(x) => x.is_zero(),
            _ => self.to_c64().norm() == 0.0,
        }
    }

    pub fn as_exact(&self) -> Option<&Q> {
        match self {
            EigenValue::Exact(x) => Some(x),
            _ => None,
        }
    }

    /// Equality within the relative clustering tolerance (exact when both are rational).
    pub fn matches(&self, other: &EigenValue, tol: f64) -> bool {
        match (self, other) {
            (EigenValue::Exact(a), EigenValue::Exact(b)) => a == b,
            _ => {
                let (a, b) = (self.to_c64(), other.to_c64());
                (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
            }
        }
    }

    fn sort_key(&self) -> (f64, f64) {
        let z = self.to_c64();
        (z.re, z.im)
    }
}

impl fmt::Display for EigenValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EigenValue::Exact(x) => write!(f, "{}", fmt_q(x)),
            EigenValue::Real(x) => write!(f, "{x:.12}"),
            EigenValue::Complex(z) => write!(f, "{:.12}{:+.12}i", z.re, z.im),
        }
    }
}

impl Serialize for EigenValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Vectors in whichever scalar field the eigenvalue required.
#[derive(Clone, Debug, PartialEq)]
pub enum Vectors {
    Exact(Vec<Vec<Q>>),
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<Complex64>>),
}

impl Vectors {
    pub fn len(&self) -> usize {
        match self {
            Vectors::Exact(v) => v.len(),
            Vectors::Real(v) => v.len(),
            Vectors::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn render(&self) -> Vec<String> {
        fn join<T>(v: &[T], f: impl Fn(&T) -> String) -> String {
            format!("({})", v.iter().map(f).collect::<Vec<_>>().join(", "))
        }
        match self {
            Vectors::Exact(v) => v.iter().map(|x| join(x, fmt_q)).collect(),
            Vectors::Real(v) => v.iter().map(|x| join(x, |a| format!("{a:.9}"))).collect(),
            Vectors::Complex(v) => v.iter().map(|x| join(x, |a| format!("{:.9}{:+.9}i", a.re, a.im))).collect(),
        }
    }

    pub fn exact(&self) -> Option<&Vec<Vec<Q>>> {
        match self {
            Vectors::Exact(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenEntry {
    pub value: EigenValue,
    pub algebraic: usize,
    pub geometric: usize,
    /// Jordan chains; element 0 of each chain is an eigenvector and
    /// `(A - mu I) chain[k] = chain[k-1]`.
    pub chains: Vec<Vectors>,
}

impl EigenEntry {
    pub fn is_semisimple(&self) -> bool {
        self.algebraic == self.geometric
    }

    /// All eigenvectors (first element of each chain), exact path only.
    pub fn eigenvectors_exact(&self) -> Vec<Vec<Q>> {
        self.chains.iter().filter_map(|c| c.exact().map(|v| v[0].clone())).collect()
    }

    /// All chain vectors, exact path only: a basis of the generalized eigenspace.
    pub fn generalized_basis_exact(&self) -> Vec<Vec<Q>> {
        self.chains.iter().filter_map(|c| c.exact().cloned()).flatten().collect()
    }
}

#[derive(Clone, Debug)]
pub struct SpectralStructure {
    pub dim: usize,
    pub entries: Vec<EigenEntry>,
    pub warnings: Vec<String>,
}

impl SpectralStructure {
    pub fn find(&self, mu: &EigenValue, tol: f64) -> Option<&EigenEntry> {
        self.entries.iter().find(|e| e.value.matches(mu, tol))
    }

    pub fn find_exact(&self, mu: &Q) -> Option<&EigenEntry> {
        self.find(&EigenValue::Exact(mu.clone()), 0.0)
    }

    pub fn is_exact(&self) -> bool {
        self.entries.iter().all(|e| matches!(e.value, EigenValue::Exact(_)))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SpectralOptions {
    pub tol: f64,
    /// Fail instead of falling back to floating point.
    pub exact_only: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions { tol: DEFAULT_TOL, exact_only: false }
    }
}

/// Eigenvalues with algebraic multiplicities, without chains.
pub fn eigenvalue_multiplicities(a: &Mat<Q>) -> Vec<(EigenValue, usize)> {
    let p = charpoly(a);
    let den = denominator_lcm(a);
    let mut out = Vec::new();
    for (factor, mult) in p.squarefree() {
        for r in isolate_roots(&factor, &den) {
            let v = match r {
                Root::Rational(x) => EigenValue::Exact(x),
                Root::Real(x) => EigenValue::Real(x),
                Root::Complex(z) => EigenValue::Complex(z),
            };
            out.push((v, mult));
        }
    }
    out.sort_by(|a, b| a.0.sort_key().partial_cmp(&b.0.sort_key()).unwrap_or(std::cmp::Ordering::Equal));
    out
}

pub fn eigen_structure(a: &Mat<Q>) -> SpectralStructure {
    eigen_structure_with(a, SpectralOptions::default()).expect("non-exact mode cannot fail")
}

pub fn eigen_structure_with(a: &Mat<Q>, opts: SpectralOptions) -> Result<SpectralStructure> {
    assert_eq!(a.rows, a.cols, "eigen_structure needs a square matrix");
    let tol = opts.tol;
    let vals = eigenvalue_multiplicities(a);
    if opts.exact_only && vals.iter().any(|(v, _)| !matches!(v, EigenValue::Exact(_))) {
        return Err(Error::Inexact("the spectrum has irrational or complex eigenvalues".into()));
    }
    let mut entries = Vec::new();
    for (value, m_a) in vals {
        let chains = match &value {
            EigenValue::Exact(mu) => jordan_chains(&a.shift(mu), m_a, 0.0).into_iter().map(Vectors::Exact).collect(),
            EigenValue::Real(mu) => {
                jordan_chains(&a.map(to_f64).shift(mu), m_a, tol).into_iter().map(Vectors::Real).collect()
            }
            EigenValue::Complex(mu) => jordan_chains(&a.map(Complex64::from_q).shift(mu), m_a, tol)
                .into_iter()
                .map(Vectors::Complex)
                .collect::<Vec<_>>(),
        };
        let chains: Vec<Vectors> = chains;
        entries.push(EigenEntry { geometric: chains.len(), value, algebraic: m_a, chains });
    }
    let mut warnings = Vec::new();
    for i in 0..entries.len() {
        for j in i + 1..entries.len() {
            let (x, y) = (entries[i].value.to_c64(), entries[j].value.to_c64());
            if (x - y).norm() < 10.0 * tol * x.norm().max(y.norm()).max(1.0) {
                warnings.push(format!(
                    "ClusteringWarning: eigenvalues {} and {} are closer than 10x tolerance",
                    entries[i].value, entries[j].value
                ));
            }
        }
    }
    Ok(SpectralStructure { dim: a.rows, entries, warnings })
}

/// Jordan chains of the nilpotent part of `b` on its generalized kernel of
/// dimension `m_a`, built top-down through the kernels of powers of `b`.
pub fn jordan_chains<F: Scalar>(b: &Mat<F>, m_a: usize, tol: f64) -> Vec<Vec<Vec<F>>> {
    let n = b.rows;
    let mut kernels: Vec<Vec<Vec<F>>> = vec![vec![]];
    let mut power = Mat::identity(n);
    loop {
        power = power.mul(b);
        let k = power.nullspace(tol);
        let grew = k.len() > kernels.last().unwrap().len();
        let done = k.len() >= m_a;
        if grew {
            kernels.push(k);
        }
        if done || !grew || kernels.len() > n + 1 {
            break;
        }
    }
    let depth = kernels.len() - 1;
    let mut chains = Vec::new();
    let mut carried: Vec<Vec<F>> = Vec::new();
    for j in (1..=depth).rev() {
        let mut span: Vec<Vec<F>> = kernels[j - 1].clone();
        span.extend(carried.iter().cloned());
        let mut tops = Vec::new();
        for u in &kernels[j] {
            if in_span(u, &span, tol) {
                continue;
            }
            let top = reduce_modulo(u, &span, tol);
            span.push(top.clone());
            tops.push(top);
        }
        for top in &tops {
            let mut chain = vec![top.clone()];
            for _ in 1..j {
                let next = b.mul_vec(chain.last().unwrap());
                chain.push(next);
            }
            chain.reverse();
            let lead = linalg::first_nonzero(&chain[0], tol).map(|i| chain[0][i].clone());
            if let Some(l) = lead {
                let s = F::one() / l;
                chain = chain.iter().map(|v| linalg::scale_vec(v, &s)).collect();
            }
            chains.push(chain);
        }
        carried = carried.iter().chain(tops.iter()).map(|v| b.mul_vec(v)).collect();
    }
    chains.sort_by_key(|c| std::cmp::Reverse(c.len()));
    chains
}

/// Geometric multiplicity `n - rank(A - mu I)`.
pub fn geometric_multiplicity(a: &Mat<Q>, mu: &EigenValue, tol: f64) -> usize {
    let n = a.rows;
    match mu {
        EigenValue::Exact(x) => n - a.shift(x).rank(0.0),
        EigenValue::Real(x) => n - a.map(to_f64).shift(x).rank(tol),
        EigenValue::Complex(z) => n - a.map(Complex64::from_q).shift(z).rank(tol),
    }
}

// ---------------------------------------------------------------------------
// FFCN structure

/// Partition of the Laplacian of the second network around the merge cell.
#[derive(Clone, Debug)]
pub struct ReducedLaplacians {
    /// `L` without the merge-cell row.
    pub l_bar: Mat<Q>,
    /// `L` without the merge-cell row and column.
    pub l_barbar: Mat<Q>,
    /// Merge-cell column without the merge-cell row.
    pub l_c: Vec<Q>,
}

pub fn reduced_laplacians(net2: &Network, c: usize) -> ReducedLaplacians {
    let l = net2.laplacian();
    let others: Vec<usize> = (0..net2.n_cells()).filter(|&i| i != c - 1).collect();
    let all: Vec<usize> = (0..net2.n_cells()).collect();
    ReducedLaplacians {
        l_bar: l.submatrix(&others, &all),
        l_barbar: l.submatrix(&others, &others),
        l_c: others.iter().map(|&i| l[(i, c - 1)].clone()).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UnionRow {
    pub value: EigenValue,
    pub m_network: usize,
    pub m_first: usize,
    pub m_second: usize,
    pub expected: usize,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct UnionReport {
    pub ok: bool,
    pub rows: Vec<UnionRow>,
}

/// Check `m_a(0) = m1 + m2 - 1` and `m_a(mu) = m1 + m2` for `mu != 0`.
pub fn spectrum_union_check(spec: &CoalescenceSpec, tol: f64) -> Result<UnionReport> {
    if !is_ffcn(spec) {
        return Err(Error::Precondition("spectrum union check needs a feedforward coalescence".into()));
    }
    let full = eigenvalue_multiplicities(&coalesce(spec).laplacian());
    let m1 = eigenvalue_multiplicities(&spec.first.laplacian());
    let m2 = eigenvalue_multiplicities(&spec.second.laplacian());
    let mut values: Vec<EigenValue> = Vec::new();
    for (v, _) in full.iter().chain(&m1).chain(&m2) {
        if !values.iter().any(|u| u.matches(v, tol)) {
            values.push(v.clone());
        }
    }
    let lookup = |list: &[(EigenValue, usize)], v: &EigenValue| {
        list.iter().filter(|(u, _)| u.matches(v, tol)).map(|(_, m)| *m).sum::<usize>()
    };
    let rows: Vec<UnionRow> = values
        .into_iter()
        .map(|v| {
            let (mn, a, b) = (lookup(&full, &v), lookup(&m1, &v), lookup(&m2, &v));
            let expected = if v.is_zero() { a + b - 1 } else { a + b };
            UnionRow { ok: mn == expected, value: v, m_network: mn, m_first: a, m_second: b, expected }
        })
        .collect();
    Ok(UnionReport { ok: rows.iter().all(|r| r.ok), rows })
}

#[derive(Clone, Debug)]
pub struct CouplingConditionReport {
    pub mu: EigenValue,
    pub column_vector: Vec<Q>,
    pub in_image: bool,
    pub particular_solution: Option<Vectors>,
}

fn coupling_generic<F: Scalar>(lbb: &Mat<F>, lc: &[F], mu: &F, tol: f64) -> (bool, Option<Vec<F>>) {
    let b = lbb.shift(mu);
    let rhs: Vec<F> = lc.iter().map(|x| -x.clone()).collect();
    if !linalg::in_image(&b, &rhs, tol) {
        return (false, None);
    }
    let w = F::lstsq(&b, &rhs, tol);
    let res = linalg::sub_vec(&b.mul_vec(&w), &rhs);
    let scale = 1.0 + linalg::norm2(&rhs) + b.max_abs();
    let ok = if F::EXACT { res.iter().all(|x| x.is_zero()) } else { linalg::norm2(&res) <= 1e3 * tol * scale };
    (true, ok.then_some(w))
}

/// Whether `L^c` lies in the image of `L_barbar - mu I` (rank test), with a
/// particular solution of `(L_barbar - mu I) w = -L^c` when it does.
pub fn coupling_condition(net2: &Network, c: usize, mu: &EigenValue, tol: f64) -> Result<CouplingConditionReport> {
    if mu.is_zero() {
        return Err(Error::Precondition("the coupling condition is stated for nonzero eigenvalues".into()));
    }
    let r = reduced_laplacians(net2, c);
    let (in_image, sol) = match mu {
        EigenValue::Exact(m) => {
            let (i, s) = coupling_generic(&r.l_barbar, &r.l_c, m, 0.0);
            (i, s.map(|v| Vectors::Exact(vec![v])))
        }
        EigenValue::Real(m) => {
            let lc: Vec<f64> = r.l_c.iter().map(to_f64).collect();
            let (i, s) = coupling_generic(&r.l_barbar.map(to_f64), &lc, m, tol);
            (i, s.map(|v| Vectors::Real(vec![v])))
        }
        EigenValue::Complex(m) => {
            let lc: Vec<Complex64> = r.l_c.iter().map(Complex64::from_q).collect();
            let (i, s) = coupling_generic(&r.l_barbar.map(Complex64::from_q), &lc, m, tol);
            (i, s.map(|v| Vectors::Complex(vec![v])))
        }
    };
    Ok(CouplingConditionReport { mu: mu.clone(), column_vector: r.l_c, in_image, particular_solution: sol })
}

/// A vector of `L_N` obtained from an eigenvector of `L_{N_1}`.
#[derive(Clone, Debug)]
pub struct Lift {
    /// The lifted vector in coalescence coordinates.
    pub vector: Vec<Q>,
    /// True when the lift is an eigenvector.
    pub eigenvector: bool,
    /// Jordan chain ending at `vector` (eigenvector first). Length 1 when
    /// `eigenvector` is true.
    pub chain: Vec<Vec<Q>>,
}

/// Lift an eigenvector `v1` of `L_{N_1}` (canonical numbering, merge cell
/// last) to the coalescence.
///
/// * `mu = 0`: the all-ones vector lifts to all-ones, any other vector to
///   `c * 1` on the tail, reduced modulo the padded kernel of `L_barbar`.
/// * coupling condition holds: the tail solves `(L_barbar - mu I) w = -c L^c`,
///   reduced modulo `ker(L_barbar - mu I)`.
/// * otherwise a generalized eigenvector is built from the splitting
///   `Im(B^k) + Ker(B^k)` of `B = L_barbar - mu I`.
pub fn lift_eigenvector(spec: &CoalescenceSpec, mu: &Q, v1: &[Q]) -> Result<Lift> {
    if !is_ffcn(spec) {
        return Err(Error::Precondition("lifting needs a feedforward coalescence".into()));
    }
    let n1 = spec.first.n_cells();
    if v1.len() != n1 {
        return Err(Error::Input(format!("vector has {} entries, first network has {n1} cells", v1.len())));
    }
    let l1 = spec.canonical_first().laplacian();
    if v1.iter().all(|x| x.is_zero()) || !l1.shift(mu).mul_vec(v1).iter().all(|x| x.is_zero()) {
        return Err(Error::Input("not an eigenvector of the first Laplacian for this eigenvalue".into()));
    }
    let r = reduced_laplacians(&spec.canonical_second(), 1);
    let c = v1[n1 - 1].clone();
    let b = r.l_barbar.shift(mu);
    let pad = |w: &[Q]| -> Vec<Q> { v1.iter().chain(w.iter()).cloned().collect() };
    let tail_pad = |w: &[Q]| -> Vec<Q> { std::iter::repeat_n(Q::zero(), n1).chain(w.iter().cloned()).collect() };
    let m = r.l_c.len();
    if mu.is_zero() {
        if v1.iter().all(|x| x == &v1[0]) {
            let w = vec![c; m];
            return Ok(Lift { chain: vec![pad(&w)], vector: pad(&w), eigenvector: true });
        }
        let w = reduce_modulo(&vec![c; m], &b.nullspace(0.0), 0.0);
        return Ok(Lift { chain: vec![pad(&w)], vector: pad(&w), eigenvector: true });
    }
    let rhs: Vec<Q> = r.l_c.iter().map(|x| -(x * &c)).collect();
    if let Some(w) = b.solve(&rhs, 0.0) {
        let w = reduce_modulo(&w, &b.nullspace(0.0), 0.0);
        return Ok(Lift { chain: vec![pad(&w)], vector: pad(&w), eigenvector: true });
    }
    // Generalized case: split rhs along Im(B^k) + Ker(B^k) with k = m.
    let bk = b.pow(m.max(1));
    let im: Vec<Vec<Q>> = {
        let (red, piv) = bk.transpose().rref(0.0);
        piv.iter().enumerate().map(|(i, _)| red.row(i)).collect()
    };
    let ker = bk.nullspace(0.0);
    let basis: Vec<Vec<Q>> = im.iter().chain(ker.iter()).cloned().collect();
    let coeffs = Mat::from_cols(&basis, m).solve(&rhs, 0.0).ok_or_else(|| Error::Consistency("Im/Ker splitting failed".into()))?;
    let mut part_im = vec![Q::zero(); m];
    for (k, v) in im.iter().enumerate() {
        part_im = linalg::add_vec(&part_im, &linalg::scale_vec(v, &coeffs[k]));
    }
    let s = linalg::sub_vec(&rhs, &part_im);
    // B restricted to Im(B^k) is invertible; any solution differs by ker(B),
    // which meets Im(B^k) trivially, so project it away.
    let w0 = b.solve(&part_im, 0.0).ok_or_else(|| Error::Consistency("image part not solvable".into()))?;
    let w = project_onto_image(&w0, &im, &ker);
    let top = pad(&w);
    let mut chain = vec![top.clone()];
    let mut cur: Vec<Q> = s.iter().map(|x| -x.clone()).collect();
    while cur.iter().any(|x| !x.is_zero()) {
        chain.push(tail_pad(&cur));
        cur = b.mul_vec(&cur);
    }
    chain.reverse();
    Ok(Lift { vector: top, eigenvector: false, chain })
}

fn project_onto_image(w: &[Q], im: &[Vec<Q>], ker: &[Vec<Q>]) -> Vec<Q> {
    if im.is_empty() {
        return vec![Q::zero(); w.len()];
    }
    let basis: Vec<Vec<Q>> = im.iter().chain(ker.iter()).cloned().collect();
    let coeffs = Mat::from_cols(&basis, w.len()).solve(w, 0.0).expect("complementary subspaces span");
    let mut out = vec![Q::zero(); w.len()];
    for (k, v) in im.iter().enumerate() {
        out = linalg::add_vec(&out, &linalg::scale_vec(v, &coeffs[k]));
    }
    out
}

/// Basis of the kernel of `L_N`: lifts of a kernel basis of `L_{N_1}` (the
/// all-ones vector first) followed by zero-padded kernel vectors of the
/// second network with vanishing merge-cell coordinate.
pub fn zero_eigenspace_basis(spec: &CoalescenceSpec) -> Result<Vec<Vec<Q>>> {
    if !is_ffcn(spec) {
        return Err(Error::Precondition("needs a feedforward coalescence".into()));
    }
    let n1 = spec.first.n_cells();
    let l1 = spec.canonical_first().laplacian();
    let mut k1: Vec<Vec<Q>> = vec![vec![q(1); n1]];
    for v in l1.nullspace(0.0) {
        let r = reduce_modulo(&v, &k1, 0.0);
        if r.iter().any(|x| !x.is_zero()) {
            k1.push(normalize_first(&r, 0.0));
        }
    }
    let mut out = Vec::new();
    for v in &k1 {
        out.push(lift_eigenvector(spec, &Q::zero(), v)?.vector);
    }
    let r = reduced_laplacians(&spec.canonical_second(), 1);
    for w in r.l_barbar.nullspace(0.0) {
        let mut v = vec![Q::zero(); n1];
        v.extend(normalize_first(&w, 0.0));
        out.push(v);
    }
    Ok(out)
}

/// Spectral structure of an r-fold FFCN with the originating component of
/// every chain (1-based index into the chain links).
#[derive(Clone, Debug)]
pub struct FfcnSpectralReport {
    pub network: Network,
    pub structure: SpectralStructure,
    pub provenance: Vec<Vec<usize>>,
}

pub fn ffcn_spectral_report(links: &[ChainLink], opts: SpectralOptions) -> Result<FfcnSpectralReport> {
    let chain = crate::network::sequential_coalesce(links)?;
    let net = chain.network.clone();
    let mut structure = eigen_structure_with(&net.laplacian(), opts)?;
    if links.len() == 2 {
        let spec = CoalescenceSpec::new(
            links[0].network.clone(),
            links[0].merge_out.unwrap_or(1),
            links[1].network.clone(),
            links[1].merge_in.unwrap_or(1),
        )?;
        refine_with_lifts(&spec, &mut structure)?;
    }
    let owner = |v: &Vectors| -> usize {
        let nonzero = |i: usize| match v {
            Vectors::Exact(x) => !x[0][i].is_zero(),
            Vectors::Real(x) => x[0][i].abs() > opts.tol,
            Vectors::Complex(x) => x[0][i].norm() > opts.tol,
        };
        chain.component_cells.iter().position(|cells| cells.iter().any(|&i| nonzero(i))).map_or(0, |k| k + 1)
    };
    let provenance = structure.entries.iter().map(|e| e.chains.iter().map(owner).collect()).collect();
    Ok(FfcnSpectralReport { network: net, structure, provenance })
}

/// For semisimple rational eigenvalues of a two-component FFCN, replace the
/// generic eigenbasis by lifted first-network eigenvectors plus zero-padded
/// second-network eigenvectors, when that gives a full basis.
fn refine_with_lifts(spec: &CoalescenceSpec, s: &mut SpectralStructure) -> Result<()> {
    if !is_ffcn(spec) {
        return Ok(());
    }
    let l1 = spec.canonical_first().laplacian();
    let n1 = l1.rows;
    let r = reduced_laplacians(&spec.canonical_second(), 1);
    for e in s.entries.iter_mut() {
        let Some(mu) = e.value.as_exact().cloned() else { continue };
        if !e.is_semisimple() {
            continue;
        }
        let basis: Vec<Vec<Q>> = if mu.is_zero() {
            zero_eigenspace_basis(spec)?
        } else {
            let mut out = Vec::new();
            let mut seen: Vec<Vec<Q>> = Vec::new();
            for v in l1.shift(&mu).nullspace(0.0) {
                let v = normalize_first(&v, 0.0);
                if let Ok(l) = lift_eigenvector(spec, &mu, &v) {
                    if l.eigenvector && !in_span(&l.vector, &seen, 0.0) {
                        seen.push(l.vector.clone());
                        out.push(l.vector);
                    }
                }
            }
            for w in r.l_barbar.shift(&mu).nullspace(0.0) {
                let mut v = vec![Q::zero(); n1];
                v.extend(normalize_first(&w, 0.0));
                out.push(v);
            }
            out
        };
        if basis.len() == e.geometric && Mat::from_rows(&basis).rank(0.0) == e.geometric {
            e.chains = basis.into_iter().map(|v| Vectors::Exact(vec![v])).collect();
        }
    }
    Ok(())
}

/// `(m_a, m_g)` of a floating matrix at `mu` from ranks of powers of `A - mu I`.
pub fn numerical_jordan_check(a: &Mat<f64>, mu: f64, tol: f64) -> (usize, usize) {
    let n = a.rows;
    let b = a.shift(&mu);
    let m_g = n - b.rank(tol);
    let mut p = b.clone();
    let mut last = m_g;
    for _ in 1..n {
        p = p.mul(&b);
        let k = n - p.rank(tol);
        if k == last {
            break;
        }
        last = k;
    }
    (last, m_g)
}
