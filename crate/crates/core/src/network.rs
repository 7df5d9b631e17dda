//! Weighted uniform coupled-cell networks and the coalescence operation.
//!
//! Cells are numbered from 1 in every public signature. Internally matrices
//! are 0-based. `W[i][j]` is the weight of the edge `j -> i`.

use std::collections::{BTreeMap, VecDeque};
use std::path::Path;

use num_traits::{One, Zero};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::exact::{fmt_q, parse_rational, q, Q};
use crate::linalg::Mat;

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    n: usize,
    /// (source, target) 0-based -> nonzero weight.
    edges: BTreeMap<(usize, usize), Q>,
    labels: Vec<String>,
}

impl Network {
    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Edges as 1-based `(source, target, weight)` triples.
    pub fn edges(&self) -> Vec<(usize, usize, Q)> {
        self.edges.iter().map(|(&(s, t), w)| (s + 1, t + 1, w.clone())).collect()
    }

    pub fn weight(&self, source: usize, target: usize) -> Q {
        self.edges.get(&(source - 1, target - 1)).cloned().unwrap_or_else(Q::zero)
    }

    /// Incoming edges of a 0-based cell as `(source, weight)`, self-loops included.
    pub fn inputs(&self, cell: usize) -> Vec<(usize, Q)> {
        self.edges.iter().filter(|((_, t), _)| *t == cell).map(|(&(s, _), w)| (s, w.clone())).collect()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::Input(format!("{} labels for {} cells", labels.len(), self.n)));
        }
        self.labels = labels;
        Ok(self)
    }
}

/// Build a connected network from 1-based `(source, target, weight)` triples.
/// Duplicate pairs are summed; zero total weight means no edge.
pub fn build_network(n_cells: usize, edges: &[(usize, usize, Q)]) -> Result<Network> {
    if n_cells == 0 {
        return Err(Error::Input("a network needs at least one cell".into()));
    }
    let mut map: BTreeMap<(usize, usize), Q> = BTreeMap::new();
    for (s, t, w) in edges {
        for &i in [s, t] {
            if i == 0 || i > n_cells {
                return Err(Error::Index { index: i, n: n_cells });
            }
        }
        *map.entry((s - 1, t - 1)).or_insert_with(Q::zero) += w;
    }
    map.retain(|_, w| !w.is_zero());
    let net = Network { n: n_cells, edges: map, labels: (1..=n_cells).map(|i| i.to_string()).collect() };
    if !net.is_connected() {
        return Err(Error::Connectivity);
    }
    Ok(net)
}

impl Network {
    fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for &(s, t) in self.edges.keys() {
            adj[s].push(t);
            adj[t].push(s);
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|x| x)
    }

    pub fn adjacency(&self) -> Mat<Q> {
        let mut w = Mat::zeros(self.n, self.n);
        for (&(s, t), x) in &self.edges {
            w[(t, s)] = x.clone();
        }
        w
    }

    /// Input valency of a 1-based cell.
    pub fn valency(&self, cell: usize) -> Q {
        self.edges.iter().filter(|((_, t), _)| *t == cell - 1).fold(Q::zero(), |a, (_, w)| a + w)
    }

    pub fn valency_matrix(&self) -> Mat<Q> {
        let mut d = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            d[(i, i)] = self.valency(i + 1);
        }
        d
    }

    pub fn laplacian(&self) -> Mat<Q> {
        self.valency_matrix().sub(&self.adjacency())
    }

    pub fn is_regular(&self) -> bool {
        let v0 = self.valency(1);
        (2..=self.n).all(|i| self.valency(i) == v0)
    }

    /// Move cell `cell` (1-based) to position `pos` (0-based), keeping the
    /// relative order of the others. Returns the network and old->new map.
    fn move_cell(&self, cell: usize, pos: usize) -> (Network, Vec<usize>) {
        let mut order: Vec<usize> = (0..self.n).filter(|&i| i != cell - 1).collect();
        order.insert(pos, cell - 1);
        let mut map = vec![0; self.n];
        for (new, &old) in order.iter().enumerate() {
            map[old] = new;
        }
        let edges = self.edges.iter().map(|(&(s, t), w)| ((map[s], map[t]), w.clone())).collect();
        let labels = order.iter().map(|&o| self.labels[o].clone()).collect();
        (Network { n: self.n, edges, labels }, map)
    }
}

#[derive(Clone, Debug)]
pub struct CoalescenceSpec {
    pub first: Network,
    pub merge_1: usize,
    pub second: Network,
    pub merge_2: usize,
}

/// Index bookkeeping of a canonical coalescence: cells `0..n1` come from the
/// first network with `c = n1 - 1` the merged cell, cells `n1..n1+n2-1` are the
/// remaining cells of the second network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n1: usize,
    pub n2: usize,
}

impl Layout {
    pub fn c(&self) -> usize {
        self.n1 - 1
    }
    pub fn n(&self) -> usize {
        self.n1 + self.n2 - 1
    }
    /// Position in the coalescence of cell `k` (0-based) of the canonical second network.
    pub fn second_to_full(&self, k: usize) -> usize {
        if k == 0 {
            self.c()
        } else {
            self.n1 - 1 + k
        }
    }
}

impl CoalescenceSpec {
    pub fn new(first: Network, merge_1: usize, second: Network, merge_2: usize) -> Result<Self> {
        if merge_1 == 0 || merge_1 > first.n {
            return Err(Error::Index { index: merge_1, n: first.n });
        }
        if merge_2 == 0 || merge_2 > second.n {
            return Err(Error::Index { index: merge_2, n: second.n });
        }
        Ok(CoalescenceSpec { first, merge_1, second, merge_2 })
    }

    pub fn layout(&self) -> Layout {
        Layout { n1: self.first.n, n2: self.second.n }
    }

    /// First network renumbered so the merge cell is last.
    pub fn canonical_first(&self) -> Network {
        self.first.move_cell(self.merge_1, self.first.n - 1).0
    }

    /// Second network renumbered so the merge cell is first.
    pub fn canonical_second(&self) -> Network {
        self.second.move_cell(self.merge_2, 0).0
    }

    pub fn is_ffcn(&self) -> bool {
        is_ffcn(self)
    }

    /// Maps from original (0-based) cells of each component to cells of the
    /// coalescence.
    pub fn cell_maps(&self) -> (Vec<usize>, Vec<usize>) {
        let lay = self.layout();
        let (_, m1) = self.first.move_cell(self.merge_1, self.first.n - 1);
        let (_, m2) = self.second.move_cell(self.merge_2, 0);
        (m1, m2.iter().map(|&k| lay.second_to_full(k)).collect())
    }
}

pub fn coalesce(spec: &CoalescenceSpec) -> Network {
    let f = spec.canonical_first();
    let s = spec.canonical_second();
    let lay = spec.layout();
    let mut edges: BTreeMap<(usize, usize), Q> = f.edges.clone();
    for (&(a, b), w) in &s.edges {
        *edges.entry((lay.second_to_full(a), lay.second_to_full(b))).or_insert_with(Q::zero) += w;
    }
    edges.retain(|_, w| !w.is_zero());
    let mut labels = f.labels.clone();
    let (l1, l2) = (&f.labels[lay.c()], &s.labels[0]);
    if l1 != l2 {
        labels[lay.c()] = format!("{l1}={l2}");
    }
    labels.extend(s.labels[1..].iter().cloned());
    Network { n: lay.n(), edges, labels }
}

/// True iff the merge cell receives no edge from the other cells of the
/// second network.
pub fn is_ffcn(spec: &CoalescenceSpec) -> bool {
    let c = spec.merge_2 - 1;
    !spec.second.edges.keys().any(|&(s, t)| t == c && s != c)
}

/// One link of an r-fold chain `N_1 o N_2 o ... o N_r`: `merge_in` is the
/// cell glued to the previous network, `merge_out` the cell glued to the next.
#[derive(Clone, Debug)]
pub struct ChainLink {
    pub network: Network,
    pub merge_in: Option<usize>,
    pub merge_out: Option<usize>,
}

/// Result of a sequential coalescence with the cell ranges contributed by
/// each component (needed for provenance tags).
#[derive(Clone, Debug)]
pub struct Chain {
    pub network: Network,
    /// For each component, the cells of the assembled network it owns
    /// (0-based); the shared cells appear in both neighbours.
    pub component_cells: Vec<Vec<usize>>,
}

pub fn sequential_coalesce(links: &[ChainLink]) -> Result<Chain> {
    let first = links.first().ok_or_else(|| Error::Input("empty chain".into()))?;
    let mut acc = first.network.clone();
    let mut cells: Vec<Vec<usize>> = vec![(0..acc.n).collect()];
    let mut out_cell = first.merge_out;
    for link in &links[1..] {
        let m1 = out_cell.ok_or_else(|| Error::Input("missing outgoing merge cell".into()))?;
        let m2 = link.merge_in.ok_or_else(|| Error::Input("missing incoming merge cell".into()))?;
        let spec = CoalescenceSpec::new(acc.clone(), m1, link.network.clone(), m2)?;
        if !is_ffcn(&spec) {
            return Err(Error::Precondition("chain step is not a feedforward coalescence".into()));
        }
        let (map1, map2) = spec.cell_maps();
        acc = coalesce(&spec);
        for cs in cells.iter_mut() {
            for x in cs.iter_mut() {
                *x = map1[*x];
            }
        }
        cells.push(map2.clone());
        out_cell = link.merge_out.map(|k| map2[k - 1] + 1);
    }
    Ok(Chain { network: acc, component_cells: cells })
}

// ---------------------------------------------------------------------------
// File formats

fn line_of(text: &str, needle: &str) -> usize {
    text.find(needle).map(|p| text[..p].matches('\n').count() + 1).unwrap_or(0)
}

fn json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
}

fn weight_of(v: &Value, text: &str) -> Result<Q> {
    match v {
        Value::String(s) => parse_rational(s).map_err(|e| Error::Parse(format!("line {}: {e}", line_of(text, &format!("\"{s}\""))))),
        Value::Number(n) if n.is_i64() => Ok(q(n.as_i64().unwrap())),
        Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(Error::Parse(format!("line {}: weight must be a string or integer, found {other}", line_of(text, &other.to_string())))),
    }
}

fn network_from_value(v: &Value, text: &str) -> Result<Network> {
    let obj = v.as_object().ok_or_else(|| Error::Parse("network must be an object".into()))?;
    let n = obj
        .get("n_cells")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse("missing or invalid `n_cells`".into()))? as usize;
    let mut edges = Vec::new();
    let list = obj.get("edges").and_then(Value::as_array).cloned().unwrap_or_default();
    for (k, e) in list.iter().enumerate() {
        let t = e.as_array().filter(|a| a.len() == 3).ok_or_else(|| {
            Error::Parse(format!("line {}: edge #{} must be [source, target, weight]", line_of(text, &e.to_string()), k + 1))
        })?;
        let idx = |x: &Value| {
            x.as_u64().map(|u| u as usize).ok_or_else(|| Error::Parse(format!("edge #{}: cell index must be a positive integer", k + 1)))
        };
        edges.push((idx(&t[0])?, idx(&t[1])?, weight_of(&t[2], text)?));
    }
    let mut net = build_network(n, &edges)?;
    if let Some(labels) = obj.get("labels") {
        let labels = labels
            .as_array()
            .and_then(|a| a.iter().map(|x| x.as_str().map(String::from)).collect::<Option<Vec<_>>>())
            .ok_or_else(|| Error::Parse("`labels` must be an array of strings".into()))?;
        net = net.with_labels(labels)?;
    }
    Ok(net)
}

pub fn parse_network(text: &str) -> Result<Network> {
    network_from_value(&json(text)?, text)
}

pub fn load_network(path: &Path) -> Result<Network> {
    parse_network(&std::fs::read_to_string(path)?)
}

/// Whether a parsed document is a coalescence spec rather than a network.
pub fn looks_like_spec(text: &str) -> bool {
    json(text).map(|v| v.get("first").is_some()).unwrap_or(false)
}

/// Parse a coalescence spec; `first`/`second` may be inline objects or paths
/// relative to `base`.
pub fn parse_spec(text: &str, base: &Path) -> Result<CoalescenceSpec> {
    let v = json(text)?;
    let part = |key: &str| -> Result<Network> {
        match v.get(key) {
            Some(Value::String(p)) => load_network(&base.join(p)),
            Some(obj @ Value::Object(_)) => network_from_value(obj, text),
            _ => Err(Error::Parse(format!("missing `{key}`"))),
        }
    };
    let idx = |key: &str| -> Result<usize> {
        v.get(key).and_then(Value::as_u64).map(|u| u as usize).ok_or_else(|| Error::Parse(format!("missing or invalid `{key}`")))
    };
    CoalescenceSpec::new(part("first")?, idx("merge_1")?, part("second")?, idx("merge_2")?)
}

pub fn load_spec(path: &Path) -> Result<CoalescenceSpec> {
    let base = path.parent().unwrap_or(Path::new("."));
    parse_spec(&std::fs::read_to_string(path)?, base)
}

pub fn network_to_text(net: &Network) -> String {
    let edges: Vec<Value> = net
        .edges()
        .into_iter()
        .map(|(s, t, w)| {
            let wv = match (w.denom().is_one(), fmt_q(&w).parse::<i64>()) {
                (true, Ok(i)) => Value::from(i),
                _ => Value::from(fmt_q(&w)),
            };
            Value::from(vec![Value::from(s), Value::from(t), wv])
        })
        .collect();
    let doc = serde_json::json!({ "n_cells": net.n, "labels": net.labels, "edges": edges });
    serde_json::to_string_pretty(&doc).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: usize, t: usize, w: i64) -> (usize, usize, Q) {
        (s, t, q(w))
    }

    #[test]
    fn duplicate_edges_merge_and_zero_edges_vanish() {
        let n = build_network(2, &[e(1, 2, 1), e(1, 2, 2), e(2, 1, 1), e(2, 2, 0)]).unwrap();
        assert_eq!(n.weight(1, 2), q(3));
        assert_eq!(n.edges().len(), 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(build_network(2, &[e(1, 3, 1)]), Err(Error::Index { index: 3, n: 2 })));
        assert!(matches!(build_network(2, &[e(1, 1, 1)]), Err(Error::Connectivity)));
        assert!(build_network(1, &[]).is_ok());
    }

    #[test]
    fn move_cell_keeps_relative_order() {
        let n = build_network(3, &[e(1, 2, 1), e(2, 3, 2)]).unwrap();
        let (m, map) = n.move_cell(1, 2);
        assert_eq!(map, vec![2, 0, 1]);
        assert_eq!(m.weight(3, 1), q(1));
        assert_eq!(m.weight(1, 2), q(2));
    }

    #[test]
    fn parse_reports_bad_weight_line() {
        let text = "{\n \"n_cells\": 2,\n \"edges\": [[1, 2, \"1.x\"]]\n}";
        match parse_network(text) {
            Err(Error::Parse(m)) => assert!(m.contains("line 3"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn text_roundtrip() {
        let n = build_network(3, &[e(1, 2, 1), (2, 3, Q::new(1.into(), 3.into())), e(3, 1, -2)]).unwrap();
        let back = parse_network(&network_to_text(&n)).unwrap();
        assert_eq!(back, n);
    }
}
