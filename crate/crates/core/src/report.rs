//! Reports: network and spectrum summaries, branch predictions, and the
//! comparison of predictions with the continuation oracle.

use std::fmt::Write as _;

use serde::Serialize;

use crate::branch::{Analysis, BranchPrediction, BranchSeed, Case, Component, Domain, HVector, Value};
use crate::continuation::{trace_branches, NumericalBranch, OracleConfig, Side};
use crate::exact::{fmt_q, to_f64, Q};
use crate::linalg::Mat;
use crate::network::Network;
use crate::spectral::{SpectralStructure, UnionReport};
use crate::system::AdmissibleSystem;

fn render_rows(m: &Mat<Q>) -> Vec<String> {
    m.to_rows().iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>().join(" ")).collect()
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let width: Vec<usize> = (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = width[c])).collect();
        let _ = writeln!(out, "  {}", line.join("  ").trim_end());
    }
    out
}

fn fmt_side(s: &[Side]) -> String {
    match (s.contains(&Side::Negative), s.contains(&Side::Positive)) {
        (true, true) => "both".into(),
        (true, false) => "λ<0".into(),
        (false, true) => "λ>0".into(),
        (false, false) => "none".into(),
    }
}

fn fmt_qs(v: &[Q]) -> String {
    format!("({})", v.iter().map(fmt_q).collect::<Vec<_>>().join(", "))
}

// ---------------------------------------------------------------------------
// Networks and spectra

#[derive(Clone, Debug, Serialize)]
pub struct NetworkSummary {
    pub cells: usize,
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize, String)>,
    pub adjacency: Vec<String>,
    pub valency: Vec<String>,
    pub laplacian: Vec<String>,
    pub regular: bool,
}

impl NetworkSummary {
    pub fn of(net: &Network) -> Self {
        NetworkSummary {
            cells: net.n_cells(),
            labels: net.labels().to_vec(),
            edges: net.edges().into_iter().map(|(s, t, w)| (s, t, fmt_q(&w))).collect(),
            adjacency: render_rows(&net.adjacency()),
            valency: (1..=net.n_cells()).map(|i| fmt_q(&net.valency(i))).collect(),
            laplacian: render_rows(&net.laplacian()),
            regular: net.is_regular(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("cells: {} ({})\nregular: {}\n", self.cells, self.labels.join(", "), self.regular);
        for (name, rows) in [("W", &self.adjacency), ("L", &self.laplacian)] {
            let _ = writeln!(s, "{name} =");
            let cells: Vec<Vec<String>> = rows.iter().map(|r| r.split(' ').map(String::from).collect()).collect();
            s.push_str(&align(&cells));
        }
        let _ = writeln!(s, "D = diag({})", self.valency.join(", "));
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumRow {
    pub value: String,
    pub algebraic: usize,
    pub geometric: usize,
    pub semisimple: bool,
    /// Jordan chains, eigenvector first.
    pub chains: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub dim: usize,
    pub exact: bool,
    pub rows: Vec<SpectrumRow>,
    pub union_check: Option<UnionReport>,
    pub warnings: Vec<String>,
}

impl SpectrumReport {
    pub fn new(s: &SpectralStructure, union_check: Option<UnionReport>) -> Self {
        SpectrumReport {
            dim: s.dim,
            exact: s.is_exact(),
            rows: s
                .entries
                .iter()
                .map(|e| SpectrumRow {
                    value: e.value.to_string(),
                    algebraic: e.algebraic,
                    geometric: e.geometric,
                    semisimple: e.is_semisimple(),
                    chains: e.chains.iter().map(|c| c.render()).collect(),
                })
                .collect(),
            union_check,
            warnings: s.warnings.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut rows = vec![vec!["mu".to_string(), "m_a".into(), "m_g".into(), "semisimple".into(), "chains".into()]];
        for r in &self.rows {
            let chains = r.chains.iter().map(|c| c.join(" -> ")).collect::<Vec<_>>().join("; ");
            rows.push(vec![r.value.clone(), r.algebraic.to_string(), r.geometric.to_string(), r.semisimple.to_string(), chains]);
        }
        let mut s = format!("dimension {} ({})\n", self.dim, if self.exact { "exact" } else { "floating" });
        s.push_str(&align(&rows));
        if let Some(u) = &self.union_check {
            let _ = writeln!(s, "multiplicity identities: {}", if u.ok { "hold" } else { "VIOLATED" });
            let mut t = vec![vec!["mu".to_string(), "m(N)".into(), "m(N1)".into(), "m(N2)".into(), "expected".into()]];
            for r in &u.rows {
                t.push(vec![r.value.to_string(), r.m_network.to_string(), r.m_first.to_string(), r.m_second.to_string(), r.expected.to_string()]);
            }
            s.push_str(&align(&t));
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Clone, Debug, Serialize)]
pub struct SeedRow {
    pub index: usize,
    pub component: Component,
    pub sides: Vec<Side>,
    pub trivial: bool,
    pub exact: bool,
    pub bc_prime: Value,
    pub prediction: BranchPrediction,
    pub domain: Domain,
    pub count_negative: usize,
    pub count_positive: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifyReport {
    pub mu: String,
    pub mu_in_first: bool,
    pub mu_in_second: bool,
    pub lc_in_image: bool,
    pub h: Option<HVector>,
    pub seeds: Vec<SeedRow>,
    pub notes: Vec<String>,
}

impl ClassifyReport {
    pub fn new(a: &Analysis) -> Self {
        let p = &a.problem;
        ClassifyReport {
            mu: fmt_q(&p.mu),
            mu_in_first: p.in_first,
            mu_in_second: p.in_second,
            lc_in_image: p.lc_in_image,
            h: a.h.clone(),
            seeds: a.seeds.iter().zip(&a.predictions).enumerate().map(|(i, (s, pr))| seed_row(i, s, pr)).collect(),
            notes: a.notes.clone(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "mu* = {}  (in N1 spectrum: {}, in reduced N2 spectrum: {}, L^c in image: {})\n",
            self.mu, self.mu_in_first, self.mu_in_second, self.lc_in_image
        );
        if let Some(h) = &self.h {
            let _ = writeln!(s, "H = {} for v = {} ({} the image)", fmt_qs(&h.h), fmt_qs(&h.v), if h.in_image { "in" } else { "not in" });
        }
        let mut rows = vec![vec!["seed".to_string(), "sides".into(), "b_c'(0)".into(), "case".into(), "count".into(), "domain".into(), "exponents".into()]];
        for r in &self.seeds {
            let exps = r.prediction.branches.iter().map(|b| format!("{}x{}", b.multiplicity, fmt_qs(&b.exponents))).collect::<Vec<_>>().join(" ");
            rows.push(vec![
                format!("{}{}", r.index, if r.trivial { " (trivial)" } else { "" }),
                fmt_side(&r.sides),
                r.bc_prime.to_string(),
                r.prediction.case.to_string(),
                format!("{}/{}", r.count_negative, r.count_positive),
                format!("{:?}", r.domain),
                exps,
            ]);
        }
        s.push_str(&align(&rows));
        for r in &self.seeds {
            if let Some(ls) = &r.prediction.ls {
                let _ = writeln!(
                    s,
                    "seed {}: psi_yy = {}, psi_ylambda = {}, psi_yyy = {}, psi_lambdalambda = {}",
                    r.index, ls.psi_yy, ls.psi_ylambda, ls.psi_yyy, ls.psi_lambdalambda
                );
            }
            if let Some(k) = &r.prediction.kernel {
                let zl: Vec<String> = k.z_lambda.iter().map(|v| v.to_string()).collect();
                let zs: Vec<String> = k.z_second.iter().map(|(c, v)| format!("z''_{c} = {v}")).collect();
                let _ = writeln!(s, "seed {}: along z_{}: lambda derivatives ({}), {}", r.index, k.cell, zl.join(", "), zs.join(", "));
            }
            if let Some(v) = &r.prediction.lambda_pp {
                let _ = writeln!(s, "seed {}: Lambda''(0) = {v}", r.index);
            }
            for n in &r.prediction.notes {
                let _ = writeln!(s, "seed {}: {n}", r.index);
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

fn seed_row(index: usize, s: &BranchSeed, p: &BranchPrediction) -> SeedRow {
    SeedRow {
        index,
        component: s.component,
        sides: s.sides.clone(),
        trivial: s.trivial,
        exact: s.exact.is_some(),
        bc_prime: s.bc_prime(),
        prediction: p.clone(),
        domain: p.lambda_domain(),
        count_negative: p.count_on(Side::Negative),
        count_positive: p.count_on(Side::Positive),
    }
}

// ---------------------------------------------------------------------------
// Verification against the oracle

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub exponent_tol: f64,
    /// Relative distance for matching a restricted branch to a seed branch.
    pub match_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { exponent_tol: 0.05, match_tol: 1e-6 }
    }
}

/// One oracle branch of the coalescence, summarized.
#[derive(Clone, Debug, Serialize)]
pub struct ObservedBranch {
    pub side: Side,
    /// Seed the branch restricts to, if any.
    pub seed: Option<usize>,
    /// Per-cell fitted exponent; 0 for identically zero coordinates.
    pub exponents: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub trivial: bool,
    /// `(l, x)` sample closest to the origin.
    pub nearest: (f64, Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Agree,
    Disagree,
    /// No definite prediction (degenerate seed).
    Unpredicted,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedVerdict {
    pub seed: usize,
    pub case: Case,
    pub side: Side,
    pub predicted: Option<usize>,
    pub observed: usize,
    pub exponents_match: Option<bool>,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub classification: ClassifyReport,
    pub observed: Vec<ObservedBranch>,
    pub unassigned: usize,
    pub discarded: usize,
    pub verdicts: Vec<SeedVerdict>,
    pub agree: bool,
}

fn observed_exponents(b: &NumericalBranch) -> (Vec<f64>, Vec<f64>) {
    b.per_cell_exponent
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let tiny = b.samples.iter().all(|(_, x)| x[i].abs() < 1e-11);
            if e.identically_zero || tiny {
                (0.0, 0.0)
            } else {
                (e.exponent, e.half_width)
            }
        })
        .unzip()
}

/// Does the restriction of `b` to the component match a branch of `seed`?
fn restricts_to(b: &NumericalBranch, seed: &BranchSeed, cells: &[usize], tol: f64) -> bool {
    let Some(sb) = seed.branches.iter().find(|s| s.side == b.side) else { return false };
    let (l, x) = &b.samples[0];
    let Some(y) = sb.sample_at(*l) else { return false };
    let scale = cells.iter().map(|&c| x[c].abs()).fold(0.0f64, f64::max).max(y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    cells.iter().zip(y).all(|(&c, yv)| (x[c] - yv).abs() <= tol * scale + 1e-12)
}

/// Greedy matching of observed exponent vectors to predicted ones.
fn exponents_match(pred: &[(Vec<Q>, usize)], obs: &[&ObservedBranch], tol: f64) -> bool {
    let mut want: Vec<Vec<f64>> = Vec::new();
    for (e, m) in pred {
        for _ in 0..*m {
            want.push(e.iter().map(to_f64).collect());
        }
    }
    if want.len() != obs.len() {
        return false;
    }
    let mut used = vec![false; obs.len()];
    for w in &want {
        let hit = (0..obs.len()).find(|&k| !used[k] && w.iter().zip(&obs[k].exponents).all(|(a, b)| (a - b).abs() <= tol));
        match hit {
            Some(k) => used[k] = true,
            None => return false,
        }
    }
    true
}

/// Run the oracle on the coalescence and compare it with every seed's
/// prediction, side by side.
pub fn verify(a: &Analysis, oracle: &OracleConfig, cfg: &VerifyConfig) -> crate::Result<VerifyReport> {
    let p = &a.problem;
    let sys = AdmissibleSystem::new(&p.network, &p.jet)?;
    let res = trace_branches(&sys, oracle);
    let lay = p.layout;
    let first_cells: Vec<usize> = (0..lay.n1).collect();
    let second_cells: Vec<usize> = (0..lay.n2).map(|k| lay.second_to_full(k)).collect();
    let mut observed = Vec::new();
    for b in &res.branches {
        let seed = a.seeds.iter().position(|s| match s.component {
            Component::First => restricts_to(b, s, &first_cells, cfg.match_tol),
            Component::Second => {
                first_cells.iter().filter(|&&c| c != lay.c()).all(|&c| b.samples.iter().all(|(_, x)| x[c].abs() < 1e-11))
                    && restricts_to(b, s, &second_cells, cfg.match_tol)
            }
        });
        let (exponents, half_widths) = observed_exponents(b);
        observed.push(ObservedBranch { side: b.side, seed, exponents, half_widths, trivial: b.is_trivial(), nearest: b.samples[0].clone() });
    }
    let unassigned = observed.iter().filter(|o| o.seed.is_none()).count();
    let mut verdicts = Vec::new();
    for (i, pred) in a.predictions.iter().enumerate() {
        for side in [Side::Negative, Side::Positive] {
            let obs: Vec<&ObservedBranch> = observed.iter().filter(|o| o.seed == Some(i) && o.side == side).collect();
            let mut v = SeedVerdict {
                seed: i,
                case: pred.case,
                side,
                predicted: None,
                observed: obs.len(),
                exponents_match: None,
                verdict: Verdict::Unpredicted,
                detail: String::new(),
            };
            if pred.is_predictive() {
                let want: Vec<(Vec<Q>, usize)> = pred.branches.iter().filter(|b| b.sides.contains(&side)).map(|b| (b.exponents.clone(), b.multiplicity)).collect();
                let count = pred.count_on(side);
                let ok_e = exponents_match(&want, &obs, cfg.exponent_tol);
                v.predicted = Some(count);
                v.exponents_match = Some(ok_e);
                v.verdict = if count == obs.len() && ok_e { Verdict::Agree } else { Verdict::Disagree };
                if v.verdict == Verdict::Disagree {
                    let got: Vec<String> = obs.iter().map(|o| format!("({})", o.exponents.iter().map(|e| format!("{e:.3}")).collect::<Vec<_>>().join(", "))).collect();
                    let exp: Vec<String> = want.iter().map(|(e, m)| format!("{m}x{}", fmt_qs(e))).collect();
                    v.detail = format!("expected {}; observed {}", exp.join(" "), got.join(" "));
                }
            } else {
                v.detail = pred.notes.join("; ");
            }
            verdicts.push(v);
        }
    }
    let agree = unassigned == 0 && verdicts.iter().all(|v| v.verdict != Verdict::Disagree);
    Ok(VerifyReport { classification: ClassifyReport::new(a), observed, unassigned, discarded: res.discarded, verdicts, agree })
}

impl VerifyReport {
    pub fn to_text(&self) -> String {
        let mut s = self.classification.to_text();
        let _ = writeln!(s, "oracle: {} branches ({} dropped as not reaching the origin)", self.observed.len(), self.discarded);
        let mut rows = vec![vec!["seed".to_string(), "side".into(), "case".into(), "predicted".into(), "observed".into(), "exponents".into(), "verdict".into()]];
        for v in &self.verdicts {
            rows.push(vec![
                v.seed.to_string(),
                fmt_side(&[v.side]),
                v.case.to_string(),
                v.predicted.map_or("-".into(), |c| c.to_string()),
                v.observed.to_string(),
                v.exponents_match.map_or("-".into(), |b| if b { "match".into() } else { "differ".into() }),
                format!("{:?}", v.verdict),
            ]);
        }
        s.push_str(&align(&rows));
        for v in self.verdicts.iter().filter(|v| v.verdict == Verdict::Disagree) {
            let _ = writeln!(s, "seed {} {}: {}", v.seed, fmt_side(&[v.side]), v.detail);
        }
        if self.unassigned > 0 {
            let _ = writeln!(s, "{} oracle branches match no seed", self.unassigned);
        }
        let _ = writeln!(s, "overall: {}", if self.agree { "agree" } else { "DISAGREE" });
        s
    }
}
