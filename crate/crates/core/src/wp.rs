//! Warning Propagation on the Tanner graph.

use std::collections::BTreeMap;
use std::io::Write;

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::{Error, Result};
use crate::galois::{FieldElement, FieldSpec};
use crate::spmat::{frozen_set, SparseMatrix};
use crate::theory::{in_check_class, in_var_class, predicted_node_stats, PredictedStats};

pub use crate::theory::{Label, StatKey};

/// Budget for [`standard_messages`], in dense entries touched
/// (`#minors × rows × cols`).
pub const DEFAULT_STANDARD_BUDGET: u128 = 2_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Msg {
    U,
    F,
}

impl Msg {
    pub fn as_char(self) -> char {
        match self {
            Msg::U => 'u',
            Msg::F => 'f',
        }
    }
}

/// Bipartite graph with an edge `a_i v_j` for every nonzero `A_ij`. Edges are
/// numbered row-major.
#[derive(Clone, Debug)]
pub struct TannerGraph {
    n_vars: usize,
    check_start: Vec<usize>,
    edge_var: Vec<usize>,
    edge_check: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
}

impl TannerGraph {
    pub fn new(a: &SparseMatrix) -> Self {
        let mut check_start = Vec::with_capacity(a.n_rows() + 1);
        let mut edge_var = Vec::with_capacity(a.nnz());
        let mut edge_check = Vec::with_capacity(a.nnz());
        let mut var_edges = vec![Vec::new(); a.n_cols()];
        for (i, row) in a.rows().iter().enumerate() {
            check_start.push(edge_var.len());
            for &(j, _) in row {
                var_edges[j].push(edge_var.len());
                edge_var.push(j);
                edge_check.push(i);
            }
        }
        check_start.push(edge_var.len());
        TannerGraph {
            n_vars: a.n_cols(),
            check_start,
            edge_var,
            edge_check,
            var_edges,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_checks(&self) -> usize {
        self.check_start.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.edge_var.len()
    }

    /// `(check, var)` of edge `e`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        (self.edge_check[e], self.edge_var[e])
    }

    pub fn check_edges(&self, a: usize) -> std::ops::Range<usize> {
        self.check_start[a]..self.check_start[a + 1]
    }

    pub fn var_edges(&self, v: usize) -> &[usize] {
        &self.var_edges[v]
    }

    pub fn check_neighbors(&self, a: usize) -> &[usize] {
        &self.edge_var[self.check_edges(a)]
    }

    pub fn var_degree(&self, v: usize) -> usize {
        self.var_edges[v].len()
    }

    pub fn check_degree(&self, a: usize) -> usize {
        self.check_start[a + 1] - self.check_start[a]
    }
}

/// One message per directed edge, indexed by edge number.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageSet {
    pub var_to_check: Vec<Msg>,
    pub check_to_var: Vec<Msg>,
}

impl MessageSet {
    pub fn uniform(g: &TannerGraph, m: Msg) -> Self {
        MessageSet {
            var_to_check: vec![m; g.n_edges()],
            check_to_var: vec![m; g.n_edges()],
        }
    }

    pub fn n_edges(&self) -> usize {
        self.var_to_check.len()
    }

    /// Fraction of `𝚏` among variable-to-check messages.
    pub fn frozen_fraction(&self) -> f64 {
        if self.var_to_check.is_empty() {
            return 0.0;
        }
        self.var_to_check.iter().filter(|&&m| m == Msg::F).count() as f64
            / self.var_to_check.len() as f64
    }

    /// Number of directed-edge messages that differ.
    pub fn differences(&self, other: &MessageSet) -> usize {
        let diff = |x: &[Msg], y: &[Msg]| x.iter().zip(y).filter(|(a, b)| a != b).count();
        diff(&self.var_to_check, &other.var_to_check)
            + diff(&self.check_to_var, &other.check_to_var)
    }

    /// Every `𝚏` of `self` is also `𝚏` in `other`.
    pub fn frozen_subset_of(&self, other: &MessageSet) -> bool {
        let sub = |x: &[Msg], y: &[Msg]| x.iter().zip(y).all(|(a, b)| *a == Msg::U || *b == Msg::F);
        sub(&self.var_to_check, &other.var_to_check) && sub(&self.check_to_var, &other.check_to_var)
    }

    fn check_shape(&self, g: &TannerGraph) -> Result<()> {
        if self.var_to_check.len() != g.n_edges() || self.check_to_var.len() != g.n_edges() {
            return Err(Error::InvalidParams(format!(
                "message set covers {} edges, graph has {}",
                self.var_to_check.len(),
                g.n_edges()
            )));
        }
        Ok(())
    }

    /// CSV rows `edge,check,var,direction,value`.
    pub fn write_csv<W: Write>(&self, g: &TannerGraph, mut w: W) -> std::io::Result<()> {
        writeln!(w, "edge,check,var,direction,value")?;
        for e in 0..g.n_edges() {
            let (a, v) = g.edge(e);
            writeln!(w, "{e},{a},{v},v2c,{}", self.var_to_check[e].as_char())?;
            writeln!(w, "{e},{a},{v},c2v,{}", self.check_to_var[e].as_char())?;
        }
        Ok(())
    }
}

/// Standard messages: `v_j → a_i` is `𝚏` iff `j ∈ 𝓕(A∖{a_i})`, and
/// `a_i → v_j` is `𝚏` iff `j ∈ 𝓕(A∖(∂v_j∖{a_i}))`.
pub fn standard_messages(a: &SparseMatrix, budget: u128) -> Result<MessageSet> {
    let g = TannerGraph::new(a);
    let minors = (a.n_rows() + g.n_edges()) as u128;
    let needed = minors * a.n_rows().max(1) as u128 * a.n_cols().max(1) as u128;
    if needed > budget {
        return Err(Error::BudgetExceeded {
            what: "standard messages",
            needed,
            budget,
        });
    }
    let mut msgs = MessageSet::uniform(&g, Msg::U);
    let contains = |set: &[usize], j: usize| set.binary_search(&j).is_ok();
    for i in 0..g.n_checks() {
        if g.check_degree(i) == 0 {
            continue;
        }
        let (minor, _) = a.minor(&[i], &[])?;
        let frozen = frozen_set(&minor);
        for e in g.check_edges(i) {
            if contains(&frozen, g.edge(e).1) {
                msgs.var_to_check[e] = Msg::F;
            }
        }
    }
    let full = frozen_set(a);
    for e in 0..g.n_edges() {
        let (i, j) = g.edge(e);
        let removed: Vec<usize> = g
            .var_edges(j)
            .iter()
            .map(|&e2| g.edge(e2).0)
            .filter(|&r| r != i)
            .collect();
        let hit = if removed.is_empty() {
            contains(&full, j)
        } else {
            let (minor, _) = a.minor(&removed, &[])?;
            contains(&frozen_set(&minor), j)
        };
        if hit {
            msgs.check_to_var[e] = Msg::F;
        }
    }
    Ok(msgs)
}

/// One synchronous WP step. A degree-1 variable sends `𝚞`; a degree-1 check
/// sends `𝚏`.
pub fn wp_update(g: &TannerGraph, msgs: &MessageSet) -> MessageSet {
    let mut f_in = vec![0usize; g.n_vars()];
    for (e, &m) in msgs.check_to_var.iter().enumerate() {
        if m == Msg::F {
            f_in[g.edge_var[e]] += 1;
        }
    }
    let mut u_in = vec![0usize; g.n_checks()];
    for (e, &m) in msgs.var_to_check.iter().enumerate() {
        if m == Msg::U {
            u_in[g.edge_check[e]] += 1;
        }
    }
    let n = g.n_edges();
    let mut out = MessageSet {
        var_to_check: Vec::with_capacity(n),
        check_to_var: Vec::with_capacity(n),
    };
    for e in 0..n {
        let (a, v) = g.edge(e);
        let others_f = f_in[v] - (msgs.check_to_var[e] == Msg::F) as usize;
        out.var_to_check
            .push(if others_f > 0 { Msg::F } else { Msg::U });
        let others_u = u_in[a] - (msgs.var_to_check[e] == Msg::U) as usize;
        out.check_to_var
            .push(if others_u == 0 { Msg::F } else { Msg::U });
    }
    out
}

#[derive(Clone, Debug)]
pub enum Init {
    AllFrozen,
    AllUnfrozen,
    Given(MessageSet),
}

#[derive(Clone, Debug)]
pub struct IterateResult {
    pub messages: MessageSet,
    pub converged: bool,
    pub iterations: usize,
}

/// Repeats [`wp_update`] until nothing changes or `max_iter` rounds have run.
/// From [`Init::AllFrozen`] this reaches the greatest fixed point.
pub fn wp_iterate(g: &TannerGraph, init: Init, max_iter: usize) -> Result<IterateResult> {
    if max_iter == 0 {
        return Err(Error::InvalidParams("max_iter must be >= 1".into()));
    }
    let monotone = matches!(init, Init::AllFrozen);
    let mut cur = match init {
        Init::AllFrozen => MessageSet::uniform(g, Msg::F),
        Init::AllUnfrozen => MessageSet::uniform(g, Msg::U),
        Init::Given(m) => {
            m.check_shape(g)?;
            m
        }
    };
    for round in 1..=max_iter {
        let next = wp_update(g, &cur);
        if monotone {
            debug_assert!(next.frozen_subset_of(&cur), "f-set grew in round {round}");
        }
        if next == cur {
            return Ok(IterateResult {
                messages: cur,
                converged: true,
                iterations: round,
            });
        }
        cur = next;
    }
    Ok(IterateResult {
        messages: cur,
        converged: false,
        iterations: max_iter,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labels {
    pub var: Vec<Label>,
    pub check: Vec<Label>,
}

impl Labels {
    /// Variables not labelled `𝚞`.
    pub fn non_unfrozen_vars(&self) -> Vec<usize> {
        (0..self.var.len())
            .filter(|&j| self.var[j] != Label::U)
            .collect()
    }

    /// CSV rows `node,index,label`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "node,index,label")?;
        for (j, l) in self.var.iter().enumerate() {
            writeln!(w, "var,{j},{}", l.as_char())?;
        }
        for (i, l) in self.check.iter().enumerate() {
            writeln!(w, "check,{i},{}", l.as_char())?;
        }
        Ok(())
    }
}

pub fn labels(g: &TannerGraph, msgs: &MessageSet) -> Labels {
    let var = (0..g.n_vars())
        .map(|v| {
            match g
                .var_edges(v)
                .iter()
                .filter(|&&e| msgs.check_to_var[e] == Msg::F)
                .count()
            {
                0 => Label::U,
                1 => Label::S,
                _ => Label::F,
            }
        })
        .collect();
    let check = (0..g.n_checks())
        .map(|a| {
            match g
                .check_edges(a)
                .filter(|&e| msgs.var_to_check[e] == Msg::U)
                .count()
            {
                0 => Label::F,
                1 => Label::S,
                _ => Label::U,
            }
        })
        .collect();
    Labels { var, check }
}

fn key_of(pairs: impl Iterator<Item = (Msg, Msg)>) -> StatKey {
    let mut k = StatKey::default();
    for (incoming, outgoing) in pairs {
        match (incoming, outgoing) {
            (Msg::U, Msg::U) => k.uu += 1,
            (Msg::U, Msg::F) => k.uf += 1,
            (Msg::F, Msg::U) => k.fu += 1,
            (Msg::F, Msg::F) => k.ff += 1,
        }
    }
    k
}

/// Node counts `Δ_{z,ℓ}` (variables) and `Γ_{z,ℓ}` (checks).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WPStats {
    pub n_vars: usize,
    pub n_checks: usize,
    pub var: BTreeMap<(Label, StatKey), usize>,
    pub check: BTreeMap<(Label, StatKey), usize>,
    /// Variables whose `ℓ` lies outside `𝒟(z)` for their label.
    pub var_out_of_class: usize,
    /// Checks whose `ℓ` lies outside `𝒢(z)` (taken at the check's own degree).
    pub check_out_of_class: usize,
}

fn cell_name(z: Label, l: &StatKey) -> String {
    format!("{}/{}-{}-{}-{}", z.as_char(), l.uu, l.uf, l.fu, l.ff)
}

impl Serialize for WPStats {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let named = |m: &BTreeMap<(Label, StatKey), usize>| -> BTreeMap<String, usize> {
            m.iter().map(|((z, l), &c)| (cell_name(*z, l), c)).collect()
        };
        let mut st = s.serialize_struct("WPStats", 6)?;
        st.serialize_field("n", &self.n_vars)?;
        st.serialize_field("m", &self.n_checks)?;
        st.serialize_field("variables", &named(&self.var))?;
        st.serialize_field("checks", &named(&self.check))?;
        st.serialize_field("variables_out_of_class", &self.var_out_of_class)?;
        st.serialize_field("checks_out_of_class", &self.check_out_of_class)?;
        st.end()
    }
}

impl WPStats {
    /// `(Σ_{z,ℓ} |Δ_{z,ℓ} − nΔ̄_{z,ℓ}| + |Γ_{z,ℓ} − MΓ̄_{z,ℓ}|) / n`, where `M`
    /// counts every row.
    pub fn distance(&self, pred: &PredictedStats) -> f64 {
        self.distance_by_label(pred).iter().sum()
    }

    /// The terms of [`WPStats::distance`] grouped by label. Cells never
    /// observed contribute their full predicted mass, taken as the complement
    /// of the observed mass within each label.
    pub fn distance_by_label(&self, pred: &PredictedStats) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut add = |cells: &BTreeMap<(Label, StatKey), usize>,
                       total: usize,
                       bar: &dyn Fn(Label, &StatKey) -> f64,
                       mass: &[f64; 3]| {
            let scale = total as f64;
            let mut seen = [0.0; 3];
            for ((z, l), &c) in cells {
                let p = bar(*z, l);
                seen[z.index()] += p;
                out[z.index()] += (c as f64 - scale * p).abs();
            }
            for z in 0..3 {
                out[z] += scale * (mass[z] - seen[z]).max(0.0);
            }
        };
        add(
            &self.var,
            self.n_vars,
            &|z, l| pred.delta_bar(z, l),
            &pred.delta,
        );
        add(
            &self.check,
            self.n_checks,
            &|z, l| pred.gamma_bar(z, l),
            &pred.gamma,
        );
        let n = self.n_vars.max(1) as f64;
        out.map(|v| v / n)
    }

    pub fn label_count(&self, z: Label, checks: bool) -> usize {
        let cells = if checks { &self.check } else { &self.var };
        cells
            .iter()
            .filter(|((l, _), _)| *l == z)
            .map(|(_, &c)| c)
            .sum()
    }
}

pub fn stats(g: &TannerGraph, msgs: &MessageSet) -> WPStats {
    let lab = labels(g, msgs);
    let mut out = WPStats {
        n_vars: g.n_vars(),
        n_checks: g.n_checks(),
        ..Default::default()
    };
    for v in 0..g.n_vars() {
        let key = key_of(
            g.var_edges(v)
                .iter()
                .map(|&e| (msgs.check_to_var[e], msgs.var_to_check[e])),
        );
        let z = lab.var[v];
        if !in_var_class(z, &key) {
            out.var_out_of_class += 1;
        }
        *out.var.entry((z, key)).or_default() += 1;
    }
    for a in 0..g.n_checks() {
        let key = key_of(
            g.check_edges(a)
                .map(|e| (msgs.var_to_check[e], msgs.check_to_var[e])),
        );
        let z = lab.check[a];
        if !in_check_class(z, &key, g.check_degree(a) as u32) {
            out.check_out_of_class += 1;
        }
        *out.check.entry((z, key)).or_default() += 1;
    }
    out
}

/// Number of directed-edge messages changed by one [`wp_update`].
pub fn fixed_point_violations(g: &TannerGraph, msgs: &MessageSet) -> usize {
    msgs.differences(&wp_update(g, msgs))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub fp: f64,
    pub stats: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fp: 0.1,
            stats: 0.1,
        }
    }
}

/// `msgs` has at most `tol.fp · n` violations and normalised statistics
/// distance at most `tol.stats` from the prediction at `α`.
pub fn is_alpha_fixed_point(
    g: &TannerGraph,
    msgs: &MessageSet,
    d: f64,
    k: u32,
    alpha: f64,
    tol: Tolerances,
) -> Result<bool> {
    msgs.check_shape(g)?;
    let n = g.n_vars() as f64;
    if fixed_point_violations(g, msgs) as f64 > tol.fp * n {
        return Ok(false);
    }
    let pred = predicted_node_stats(d, k, alpha)?;
    Ok(stats(g, msgs).distance(&pred) <= tol.stats)
}

/// `Σ_s Σ_ℓ |#{i : d(v_i) = ℓ, label 𝚞, σ_i = s} − #{i : d(v_i) = ℓ, label 𝚞}/q|`
/// with `s` over all of `𝔽_q` or over the nonzero elements only.
pub fn degree_imbalance(
    g: &TannerGraph,
    labels: &Labels,
    field: &FieldSpec,
    sigma: &[FieldElement],
    include_zero: bool,
) -> Result<f64> {
    if sigma.len() != g.n_vars() || labels.var.len() != g.n_vars() {
        return Err(Error::InvalidParams(format!(
            "vector of length {} and {} labels for {} variables",
            sigma.len(),
            labels.var.len(),
            g.n_vars()
        )));
    }
    let q = field.q() as usize;
    let mut by_degree: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for j in 0..g.n_vars() {
        if labels.var[j] == Label::U {
            by_degree
                .entry(g.var_degree(j))
                .or_insert_with(|| vec![0; q])[sigma[j].0 as usize] += 1;
        }
    }
    let first = if include_zero { 0 } else { 1 };
    let mut total = 0.0;
    for counts in by_degree.values() {
        let size: usize = counts.iter().sum();
        let expected = size as f64 / q as f64;
        total += counts[first..]
            .iter()
            .map(|&c| (c as f64 - expected).abs())
            .sum::<f64>();
    }
    Ok(total)
}

/// `σ` respects the frozen labels and is balanced on unfrozen variables of
/// every degree, up to `tol · n`. The imbalance runs over `s ∈ 𝔽_q∖{0}`.
pub fn is_extension(
    g: &TannerGraph,
    labels: &Labels,
    field: &FieldSpec,
    sigma: &[FieldElement],
    tol: f64,
) -> Result<bool> {
    let imbalance = degree_imbalance(g, labels, field, sigma, false)?;
    let violating = (0..g.n_vars())
        .filter(|&j| labels.var[j] != Label::U && !sigma[j].is_zero())
        .count();
    Ok(violating as f64 + imbalance <= tol * g.n_vars() as f64)
}
