//! Independent numerical oracle: multi-start Newton at sampled parameter
//! values, tangent-predictor continuation along a geometric λ grid, and
//! log-log growth exponent fits.
//!
//! Nothing here looks at the branch-theory predictions; it only evaluates the
//! equations.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::system::AdmissibleSystem;

/// An equation `F(x, l) = 0` with an analytic Jacobian.
pub trait EquilibriumProblem: Sync {
    fn dim(&self) -> usize;
    fn residual_jacobian(&self, x: &[f64], l: f64, f: &mut [f64], jac: &mut [f64]);

    fn residual(&self, x: &[f64], l: f64) -> Vec<f64> {
        let n = self.dim();
        let mut f = vec![0.0; n];
        let mut j = vec![0.0; n * n];
        self.residual_jacobian(x, l, &mut f, &mut j);
        f
    }
}

impl EquilibriumProblem for AdmissibleSystem {
    fn dim(&self) -> usize {
        AdmissibleSystem::dim(self)
    }
    fn residual_jacobian(&self, x: &[f64], l: f64, f: &mut [f64], jac: &mut [f64]) {
        AdmissibleSystem::residual_jacobian(self, x, l, f, jac)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    pub seed_delta: f64,
    pub kappa: f64,
    /// Also seed with `kappa |l|^(1/4)` amplitudes.
    pub quarter_seeds: bool,
    pub newton_tol: f64,
    pub dedup_radius: f64,
    pub max_newton_iters: usize,
    pub basin_radius: f64,
    pub intercept_tol: f64,
    /// Multi-start discovery runs at every `discovery_stride`-th grid point
    /// (and the last one); the other points are filled by continuation.
    pub discovery_stride: usize,
    /// Above this many grid seeds a deterministic random subset is used.
    pub max_seeds: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            lambda_min: 1e-6,
            lambda_max: 1e-2,
            n_lambda: 24,
            seed_delta: 1e-3,
            kappa: 2.0,
            quarter_seeds: true,
            newton_tol: 1e-12,
            dedup_radius: 1e-8,
            max_newton_iters: 50,
            basin_radius: 0.5,
            intercept_tol: 1e-4,
            discovery_stride: 4,
            max_seeds: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, PartialOrd, Ord)]
pub enum Side {
    Negative,
    Positive,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }

    pub fn of(l: f64) -> Side {
        if l < 0.0 {
            Side::Negative
        } else {
            Side::Positive
        }
    }
}

impl OracleConfig {
    /// Grid of `|l|` values, ascending, geometric.
    pub fn magnitudes(&self) -> Vec<f64> {
        let n = self.n_lambda.max(2);
        let r = (self.lambda_max / self.lambda_min).ln() / (n - 1) as f64;
        (0..n).map(|k| self.lambda_min * (r * k as f64).exp()).collect()
    }

    pub fn lambda_grid(&self, side: Side) -> Vec<f64> {
        self.magnitudes().into_iter().map(|m| side.sign() * m).collect()
    }

    pub fn seed_amplitudes(&self, l: f64) -> Vec<f64> {
        let d = self.seed_delta;
        let s = self.kappa * l.abs().sqrt();
        let mut a = vec![0.0, d, -d, 2.0 * d, -2.0 * d, s, -s];
        if self.quarter_seeds {
            let t = self.kappa * l.abs().powf(0.25);
            a.extend([t, -t]);
        }
        a
    }

    fn same(&self, a: &[f64], b: &[f64]) -> bool {
        let na = sup(a);
        dist(a, b) <= self.dedup_radius * (1.0 + na)
    }
}

fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Solve `a x = b` in place by Gaussian elimination with partial pivoting.
fn lu_solve(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[i * n + k].abs() > a[p * n + k].abs() {
                p = i;
            }
        }
        if a[p * n + k] == 0.0 || !a[p * n + k].is_finite() {
            return false;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let piv = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / piv;
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for j in k + 1..n {
            s -= a[k * n + j] * b[j];
        }
        b[k] = s / a[k * n + k];
    }
    true
}

/// Newton from `x0`; returns the root and its residual sup-norm.
pub fn newton<P: EquilibriumProblem + ?Sized>(p: &P, x0: &[f64], l: f64, cfg: &OracleConfig) -> Option<(Vec<f64>, f64)> {
    let n = p.dim();
    let mut x = x0.to_vec();
    let mut f = vec![0.0; n];
    let mut j = vec![0.0; n * n];
    let mut last_step = f64::INFINITY;
    for _ in 0..=cfg.max_newton_iters {
        p.residual_jacobian(&x, l, &mut f, &mut j);
        let r = sup(&f);
        if !r.is_finite() {
            return None;
        }
        let mut dx: Vec<f64> = f.iter().map(|v| -v).collect();
        if !lu_solve(&mut j, &mut dx, n) {
            return (r < cfg.newton_tol).then_some((x, r));
        }
        let step = sup(&dx);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        // Converged once the residual is small and the step is at rounding
        // level relative to x, or has stopped shrinking.
        if r < cfg.newton_tol && (step <= 1e-13 * sup(&x) || step >= 0.5 * last_step) {
            let r = sup(&p.residual(&x, l));
            return Some((x, r));
        }
        last_step = step;
        if sup(&x) > 10.0 * cfg.basin_radius {
            return None;
        }
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct Equilibrium {
    pub x: Vec<f64>,
    pub residual: f64,
    /// 2-norm condition number of the Jacobian at the root.
    pub condition: f64,
}

fn condition<P: EquilibriumProblem + ?Sized>(p: &P, x: &[f64], l: f64) -> f64 {
    let n = p.dim();
    let mut f = vec![0.0; n];
    let mut j = vec![0.0; n * n];
    p.residual_jacobian(x, l, &mut f, &mut j);
    let sv = DMatrix::from_row_slice(n, n, &j).singular_values();
    let (mx, mn) = (sv.max(), sv.min());
    if mn == 0.0 {
        f64::INFINITY
    } else {
        mx / mn
    }
}

/// All equilibria reachable by Newton from the seed grid at parameter `l`,
/// deduplicated, inside the basin radius.
pub fn solve_equilibria<P: EquilibriumProblem + ?Sized>(p: &P, l: f64, cfg: &OracleConfig) -> Vec<Equilibrium> {
    let n = p.dim();
    let amps = cfg.seed_amplitudes(l);
    let m = amps.len();
    let total = (m as f64).powi(n as i32);
    let mut roots: Vec<(Vec<f64>, f64)> = Vec::new();
    let visit = |seed: &[f64], roots: &mut Vec<(Vec<f64>, f64)>| {
        if let Some((x, r)) = newton(p, seed, l, cfg) {
            if sup(&x) <= cfg.basin_radius && !roots.iter().any(|(y, _)| cfg.same(y, &x)) {
                roots.push((x, r));
            }
        }
    };
    if total <= cfg.max_seeds as f64 {
        let mut idx = vec![0usize; n];
        let mut seed = vec![0.0; n];
        loop {
            for i in 0..n {
                seed[i] = amps[idx[i]];
            }
            visit(&seed, &mut roots);
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    } else {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        let mut seed = vec![0.0; n];
        for _ in 0..cfg.max_seeds {
            for s in seed.iter_mut() {
                *s = amps[rng.gen_range(0..m)];
            }
            visit(&seed, &mut roots);
        }
    }
    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    roots.into_iter().map(|(x, r)| Equilibrium { condition: condition(p, &x, l), x, residual: r }).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub half_width: f64,
    /// The coordinate vanishes (to 1e-13) on every sample; exponent is the sentinel 0.
    pub identically_zero: bool,
    /// Fewer than eight usable samples.
    pub insufficient: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NumericalBranch {
    pub side: Side,
    /// `(l, x)` ordered by increasing `|l|`.
    pub samples: Vec<(f64, Vec<f64>)>,
    pub per_cell_exponent: Vec<ExponentFit>,
    pub warnings: Vec<String>,
}

impl NumericalBranch {
    pub fn is_trivial(&self) -> bool {
        self.samples.iter().all(|(_, x)| sup(x) < 1e-13)
    }

    pub fn max_residual<P: EquilibriumProblem + ?Sized>(&self, p: &P) -> f64 {
        self.samples.iter().map(|(l, x)| sup(&p.residual(x, *l))).fold(0.0, f64::max)
    }

    pub fn sample_at(&self, l: f64) -> Option<&Vec<f64>> {
        self.samples.iter().find(|(m, _)| (m - l).abs() <= 1e-12 * l.abs()).map(|(_, x)| x)
    }

    /// Plot-ready dump: one row per sample, then a summary row.
    pub fn to_csv(&self) -> String {
        let n = self.samples.first().map_or(0, |s| s.1.len());
        let mut out = String::from("lambda");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        out.push('\n');
        for (l, x) in &self.samples {
            let _ = write!(out, "{l:.6e}");
            for v in x {
                let _ = write!(out, ",{v:.12e}");
            }
            out.push('\n');
        }
        let _ = write!(out, "# side={:?}", self.side);
        for (i, e) in self.per_cell_exponent.iter().enumerate() {
            let _ = write!(out, " x{}={:.4}±{:.4}{}", i + 1, e.exponent, e.half_width, if e.identically_zero { "(zero)" } else { "" });
        }
        out.push('\n');
        out
    }
}

/// Least-squares slope of `log|x|` against `log|l|` over the given samples.
pub fn fit_exponent(samples: &[(f64, f64)]) -> ExponentFit {
    let pts: Vec<(f64, f64)> = samples.iter().filter(|(_, x)| x.abs() > 1e-13).map(|(l, x)| (l.abs().ln(), x.abs().ln())).collect();
    if pts.is_empty() {
        return ExponentFit { exponent: 0.0, half_width: 0.0, identically_zero: true, insufficient: false };
    }
    if pts.len() < 8 {
        return ExponentFit { exponent: f64::NAN, half_width: f64::INFINITY, identically_zero: false, insufficient: true };
    }
    let k = pts.len() as f64;
    let (mu, mv) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let suu: f64 = pts.iter().map(|p| (p.0 - mu).powi(2)).sum();
    let suv: f64 = pts.iter().map(|p| (p.0 - mu) * (p.1 - mv)).sum();
    let slope = suv / suu;
    let ssr: f64 = pts.iter().map(|p| (p.1 - mv - slope * (p.0 - mu)).powi(2)).sum();
    let se = (ssr / (k - 2.0) / suu).sqrt();
    ExponentFit { exponent: slope, half_width: 2.0 * se, identically_zero: false, insufficient: false }
}

/// Growth exponent of one (0-based) cell along a branch.
pub fn fit_growth_exponent(branch: &NumericalBranch, cell: usize) -> ExponentFit {
    let s: Vec<(f64, f64)> = branch.samples.iter().map(|(l, x)| (*l, x[cell])).collect();
    fit_exponent(&s)
}

/// Tangent predictor: `x + dx/dl * (l1 - l0)` with `dx/dl = -J^{-1} F_l`.
fn predict<P: EquilibriumProblem + ?Sized>(p: &P, x: &[f64], l0: f64, l1: f64) -> Option<Vec<f64>> {
    let n = p.dim();
    let mut f0 = vec![0.0; n];
    let mut j = vec![0.0; n * n];
    let mut f1 = vec![0.0; n];
    let mut scratch = vec![0.0; n * n];
    let h = 1e-3 * l0.abs();
    p.residual_jacobian(x, l0 + h, &mut f1, &mut scratch);
    p.residual_jacobian(x, l0, &mut f0, &mut j);
    // F is affine in l for the realized systems, so the difference quotient is exact
    // up to rounding.
    let mut rhs: Vec<f64> = f1.iter().zip(&f0).map(|(a, b)| -(a - b) / h).collect();
    if !lu_solve(&mut j, &mut rhs, n) {
        return None;
    }
    Some(x.iter().zip(&rhs).map(|(xi, d)| xi + d * (l1 - l0)).collect())
}

/// Follow a root from grid index `k` in direction `dir` (+1 or -1).
fn follow<P: EquilibriumProblem + ?Sized>(p: &P, grid: &[f64], k: usize, x: &[f64], dir: isize, cfg: &OracleConfig) -> Vec<(usize, Vec<f64>)> {
    let mut out = Vec::new();
    let mut cur = x.to_vec();
    let mut i = k as isize;
    loop {
        let nxt = i + dir;
        if nxt < 0 || nxt as usize >= grid.len() {
            break;
        }
        let (l0, l1) = (grid[i as usize], grid[nxt as usize]);
        let Some(pred) = predict(p, &cur, l0, l1) else { break };
        let Some((root, _)) = newton(p, &pred, l1, cfg) else { break };
        let step = dist(&pred, &cur);
        if dist(&root, &pred) > 0.5 * step + cfg.dedup_radius * (1.0 + sup(&pred)) || sup(&root) > cfg.basin_radius {
            break;
        }
        out.push((nxt as usize, root.clone()));
        cur = root;
        i = nxt;
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleResult {
    pub branches: Vec<NumericalBranch>,
    /// Branches dropped because they do not reach the origin.
    pub discarded: usize,
}

impl OracleResult {
    pub fn on_side(&self, side: Side) -> impl Iterator<Item = &NumericalBranch> {
        self.branches.iter().filter(move |b| b.side == side)
    }

    pub fn count(&self, side: Side) -> usize {
        self.on_side(side).count()
    }
}

/// Trace every equilibrium branch through the origin on both sides.
pub fn trace_branches<P: EquilibriumProblem + ?Sized>(p: &P, cfg: &OracleConfig) -> OracleResult {
    let mut branches = Vec::new();
    let mut discarded = 0;
    for side in [Side::Negative, Side::Positive] {
        let (b, d) = trace_side(p, side, cfg);
        branches.extend(b);
        discarded += d;
    }
    OracleResult { branches, discarded }
}

fn trace_side<P: EquilibriumProblem + ?Sized>(p: &P, side: Side, cfg: &OracleConfig) -> (Vec<NumericalBranch>, usize) {
    let grid = cfg.lambda_grid(side);
    let last = grid.len() - 1;
    let mut disc: Vec<usize> = (0..grid.len()).step_by(cfg.discovery_stride.max(1)).collect();
    if disc.last() != Some(&last) {
        disc.push(last);
    }
    // Each branch: samples indexed by grid position.
    let mut built: Vec<Vec<Option<Vec<f64>>>> = Vec::new();
    let mut warnings: Vec<Vec<String>> = Vec::new();
    for &k in &disc {
        for eq in solve_equilibria(p, grid[k], cfg) {
            let hits: Vec<usize> = (0..built.len()).filter(|&b| built[b][k].as_ref().is_some_and(|y| cfg.same(y, &eq.x))).collect();
            if !hits.is_empty() {
                continue;
            }
            let mut samples = vec![None; grid.len()];
            samples[k] = Some(eq.x.clone());
            for dir in [1, -1] {
                for (j, x) in follow(p, &grid, k, &eq.x, dir, cfg) {
                    samples[j] = Some(x);
                }
            }
            built.push(samples);
            warnings.push(Vec::new());
        }
    }
    // Merge branches that share a sample (a continuation that ran into a
    // branch found earlier) and flag near-coincidences.
    let mut merged: Vec<Vec<Option<Vec<f64>>>> = Vec::new();
    let mut merged_warn: Vec<Vec<String>> = Vec::new();
    for (b, w) in built.into_iter().zip(warnings) {
        let target = merged.iter().position(|m| {
            m.iter().zip(&b).any(|(x, y)| matches!((x, y), (Some(x), Some(y)) if cfg.same(x, y)))
        });
        match target {
            Some(t) => {
                for (j, y) in b.into_iter().enumerate() {
                    if merged[t][j].is_none() {
                        merged[t][j] = y;
                    }
                }
            }
            None => {
                merged.push(b);
                merged_warn.push(w);
            }
        }
    }
    let mut out = Vec::new();
    let mut dropped = 0;
    for (m, mut w) in merged.into_iter().zip(merged_warn) {
        let samples: Vec<(f64, Vec<f64>)> = m.into_iter().enumerate().filter_map(|(j, x)| x.map(|x| (grid[j], x))).collect();
        if !reaches_origin(&samples, cfg) {
            dropped += 1;
            continue;
        }
        let n = p.dim();
        for (j, (l, x)) in samples.iter().enumerate() {
            if j > 0 {
                let prev = &samples[j - 1].1;
                let near = dist(prev, x);
                if near > 0.0 && near <= cfg.dedup_radius * (1.0 + sup(x)) && sup(x) > 1e-13 {
                    w.push(format!("LinkWarning: ambiguous link near l = {l:.3e}"));
                }
            }
        }
        let mut br = NumericalBranch { side, samples, per_cell_exponent: vec![], warnings: w };
        br.per_cell_exponent = (0..n).map(|i| fit_growth_exponent(&br, i)).collect();
        out.push(br);
    }
    out.sort_by(|a, b| {
        let na = a.samples.first().map_or(0.0, |s| sup(&s.1));
        let nb = b.samples.first().map_or(0.0, |s| sup(&s.1));
        na.total_cmp(&nb)
    });
    (out, dropped)
}

/// Extrapolate `|x|` to `l = 0` with a power law fitted on the samples
/// nearest the origin, where higher-order corrections are smallest.
fn reaches_origin(samples: &[(f64, Vec<f64>)], cfg: &OracleConfig) -> bool {
    // must be traced down to the smallest grid value, with enough points to fit
    let lmin = samples.iter().map(|s| s.0.abs()).fold(f64::INFINITY, f64::min);
    if samples.len() < 8 || lmin > cfg.lambda_min * (1.0 + 1e-9) {
        return false;
    }
    let mut norms: Vec<(f64, f64)> = samples.iter().map(|(l, x)| (l.abs(), sup(x))).collect();
    if norms.iter().all(|(_, s)| *s < 1e-13) {
        return true;
    }
    if norms.iter().any(|(_, s)| *s > cfg.basin_radius) {
        return false;
    }
    norms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let keep = (norms.len() / 2).max(4).min(norms.len());
    let near = &norms[..keep];
    // local exponent from the points closest to the origin
    let local = fit_exponent(&near[..4.min(near.len())].iter().chain(near.iter().skip(4)).take(8).copied().collect::<Vec<_>>());
    let alpha = if local.exponent.is_finite() {
        local.exponent
    } else {
        let (a, b) = (near[0], near[near.len() - 1]);
        (b.1.max(1e-300) / a.1.max(1e-300)).ln() / (b.0 / a.0).ln()
    };
    let intercept = if alpha > 0.05 {
        // s = c0 + c1 u + c2 u^2 with u = l^alpha, least squares
        let a = DMatrix::from_fn(near.len(), 3, |i, k| near[i].0.powf(alpha * k as f64));
        let b = nalgebra::DVector::from_iterator(near.len(), near.iter().map(|n| n.1));
        match a.svd(true, true).solve(&b, 1e-300) {
            Ok(c) => c[0],
            Err(_) => f64::INFINITY,
        }
    } else {
        near.iter().map(|n| n.1).fold(f64::INFINITY, f64::min)
    };
    // a branch ending away from the origin keeps |x| near its limit, so the
    // intercept is comparable to the smallest sample
    intercept.abs() < cfg.intercept_tol.max(0.25 * near[0].1)
}
