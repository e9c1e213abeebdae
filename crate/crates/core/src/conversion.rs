//! LOSR conversion between assemblages as semidefinite feasibility.
//!
//! A conversion Σ → Σ′ exists iff there are PSD matrices W_λ on B′⊗B, one per
//! tuple λ of per-Alice deterministic combs, with
//!
//! * tr_{B′} W_λ = q_λ I_B/d, where q_λ = tr W_λ,
//! * Σ_λ tr W_λ = 1,
//! * σ′_{a′|x′} = Σ_λ Σ_{a,x} δ_{a′,f_λ(a,x′)} δ_{x,g_λ(x′)} · d·tr_B[W_λ (I_{B′} ⊗ σ_{a|x}ᵀ)].
//!
//! For several Alices λ ranges over the Cartesian product of the per-Alice
//! comb enumerations, with Alice 1 most significant.

use std::collections::HashSet;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::assemblages::{family_s, validate, Assemblage, Scenario};
use crate::error::{Error, Result};
use crate::freeness::{is_free_bipartite, is_losr_free_multi};
use crate::qcore::{decode, partial_trace, tensor, CMatrix, C64};
use crate::sdp::{decide_feasibility, Constraint, Feasibility, SdpProblem, SdpSettings, Term};
use crate::strategies::{CombSpace, DetComb};

/// Per-Alice comb spaces for a conversion between two scenarios.
#[derive(Clone, Debug)]
pub struct CombProduct {
    pub spaces: Vec<CombSpace>,
}

impl CombProduct {
    pub fn new(src: &Scenario, dst: &Scenario) -> Result<Self> {
        if src.n_alices != dst.n_alices {
            return Err(Error::Scenario(format!(
                "source has {} Alices, target has {}",
                src.n_alices, dst.n_alices
            )));
        }
        let spaces = (0..src.n_alices)
            .map(|i| CombSpace::new((src.n_inputs[i], src.n_outputs[i]), (dst.n_inputs[i], dst.n_outputs[i])))
            .collect();
        Ok(CombProduct { spaces })
    }

    pub fn len(&self) -> usize {
        self.spaces.iter().map(CombSpace::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-Alice comb indices of λ.
    pub fn indices(&self, lambda: usize) -> Vec<usize> {
        let radices: Vec<usize> = self.spaces.iter().map(CombSpace::len).collect();
        decode(lambda, &radices)
    }

    pub fn combs(&self, lambda: usize) -> Vec<DetComb> {
        self.indices(lambda).iter().zip(&self.spaces).map(|(&i, s)| s.comb(i)).collect()
    }
}

/// Σ_{a: f(a,x′)=a′} σ_{a|g(x′)} for every (a′, x′), indexed like target
/// elements.
fn aggregated_sources(src: &Assemblage, dst: &Scenario, combs: &[DetComb]) -> Vec<CMatrix> {
    let s = src.scenario();
    let d = s.bob_dim;
    let n_a_new = dst.num_output_tuples();
    let mut out = vec![CMatrix::zeros(d, d); dst.num_elements()];
    for xni in 0..dst.num_input_tuples() {
        let xn = dst.input_tuple(xni);
        let x: Vec<usize> = combs.iter().zip(&xn).map(|(c, &v)| c.g(v)).collect();
        let xi = s.input_index(&x);
        for ai in 0..s.num_output_tuples() {
            let a = s.output_tuple(ai);
            let an: Vec<usize> = combs.iter().zip(a.iter().zip(&xn)).map(|(c, (&av, &xv))| c.f(av, xv)).collect();
            out[xni * n_a_new + dst.output_index(&an)] += src.element(ai, xi);
        }
    }
    out
}

pub(crate) fn aggregated_sources_for(src: &Assemblage, dst: &Scenario, combs: &CombProduct, lambda: usize) -> Vec<CMatrix> {
    aggregated_sources(src, dst, &combs.combs(lambda))
}

/// A conversion SDP together with the comb bookkeeping needed to read
/// certificates back.
pub struct ConversionSdp {
    pub problem: SdpProblem,
    pub combs: CombProduct,
    pub src_dim: usize,
    pub dst_dim: usize,
}

fn check_valid(a: &Assemblage, what: &str) -> Result<()> {
    let report = validate(a, 1e-7);
    if !report.is_valid() {
        return Err(Error::InvalidAssemblage(format!("{what}: {:?}", report.issues)));
    }
    Ok(())
}

/// Adds the W_λ blocks and their marginal constraints; returns block indices.
pub(crate) fn add_choi_blocks(p: &mut SdpProblem, combs: &CombProduct, d: usize, d_new: usize) -> Result<Vec<usize>> {
    let dim = d * d_new;
    let mut blocks = Vec::with_capacity(combs.len());
    for lambda in 0..combs.len() {
        let b = p.add_block(format!("W[{lambda}]"), dim);
        blocks.push(b);
        // P = tr_{B'} W, P[k][l] = Σ_i W[i·d+k][i·d+l].
        let marginal = |k: usize, l: usize, v: C64| {
            let mut t = Term::new(b);
            for i in 0..d_new {
                t.push(i * d + k, i * d + l, v);
            }
            t
        };
        for k in 0..d {
            for l in (k + 1)..d {
                p.add_constraint(Constraint::new(
                    format!("W[{lambda}] marginal ({k},{l}) re"),
                    vec![marginal(k, l, C64::new(1.0, 0.0))],
                    0.0,
                ))?;
                p.add_constraint(Constraint::new(
                    format!("W[{lambda}] marginal ({k},{l}) im"),
                    vec![marginal(k, l, C64::new(0.0, -1.0))],
                    0.0,
                ))?;
            }
            if k + 1 < d {
                let mut t = marginal(k, k, C64::new(1.0, 0.0));
                t.entries.extend(marginal(k + 1, k + 1, C64::new(-1.0, 0.0)).entries);
                p.add_constraint(Constraint::new(format!("W[{lambda}] marginal diag {k}"), vec![t], 0.0))?;
            }
        }
    }
    let norm = blocks.iter().map(|&b| Term::trace(b, dim)).collect();
    p.add_constraint(Constraint::new("normalization", norm, -1.0))?;
    Ok(blocks)
}

/// Per target element: (i, j, part) slots with their linear terms.
pub(crate) type SlotRows = Vec<((usize, usize, usize), Vec<Term>)>;

/// Linear terms giving (Re, Im) of entry (i, j) of every reconstructed
/// target element, indexed `[element][(i, j, part)]`.
pub(crate) fn reconstruction_terms(
    src: &Assemblage,
    dst: &Scenario,
    combs: &CombProduct,
    blocks: &[usize],
) -> Vec<SlotRows> {
    let d = src.bob_dim();
    let d_new = dst.bob_dim;
    let scale = d as f64;
    let mut slots: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..d_new {
        for j in i..d_new {
            slots.push((i, j, 0));
            if i != j {
                slots.push((i, j, 1));
            }
        }
    }
    let mut rows: Vec<SlotRows> = (0..dst.num_elements())
        .map(|_| slots.iter().map(|&sl| (sl, Vec::new())).collect())
        .collect();
    for (lambda, &b) in blocks.iter().enumerate() {
        let agg = aggregated_sources(src, dst, &combs.combs(lambda));
        for (e, s_mat) in agg.iter().enumerate() {
            if s_mat.max_abs() == 0.0 {
                continue;
            }
            for (slot, terms) in rows[e].iter_mut() {
                let (i, j, part) = *slot;
                let phase = if part == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, -1.0) };
                let mut t = Term::new(b);
                for k in 0..d {
                    for l in 0..d {
                        t.push(i * d + k, j * d + l, phase * s_mat[(k, l)] * scale);
                    }
                }
                if !t.entries.is_empty() {
                    terms.push(t);
                }
            }
        }
    }
    rows
}

fn build(src: &Assemblage, dst: &Assemblage) -> Result<ConversionSdp> {
    check_valid(src, "source")?;
    check_valid(dst, "target")?;
    let combs = CombProduct::new(src.scenario(), dst.scenario())?;
    let d = src.bob_dim();
    let d_new = dst.bob_dim();
    let mut p = SdpProblem::new();
    let blocks = add_choi_blocks(&mut p, &combs, d, d_new)?;
    let rows = reconstruction_terms(src, dst.scenario(), &combs, &blocks);
    let n_a_new = dst.scenario().num_output_tuples();
    for (e, slots) in rows.into_iter().enumerate() {
        let target = dst.element(e % n_a_new, e / n_a_new);
        for ((i, j, part), terms) in slots {
            let value = if part == 0 { target[(i, j)].re } else { target[(i, j)].im };
            let which = if part == 0 { "re" } else { "im" };
            p.add_constraint(Constraint::new(
                format!("target a={} x={} ({i},{j}) {which}", e % n_a_new, e / n_a_new),
                terms,
                -value,
            ))?;
        }
    }
    Ok(ConversionSdp { problem: p, combs, src_dim: d, dst_dim: d_new })
}

/// The bipartite conversion SDP.
pub fn build_conversion_sdp(src: &Assemblage, dst: &Assemblage) -> Result<ConversionSdp> {
    if src.n_alices() != 1 || dst.n_alices() != 1 {
        return Err(Error::Scenario("bipartite conversion needs one Alice on each side".into()));
    }
    build(src, dst)
}

/// The multipartite conversion SDP (any equal number of Alices).
pub fn build_conversion_sdp_multi(src: &Assemblage, dst: &Assemblage) -> Result<ConversionSdp> {
    build(src, dst)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConversionCertificate {
    /// Per-Alice comb indices of every λ.
    pub comb_indices: Vec<Vec<usize>>,
    /// Canonical comb encodings, one list per λ.
    pub combs: Vec<Vec<String>>,
    pub choi_blocks: Vec<CMatrix>,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateAudit {
    pub min_eigenvalue: f64,
    pub proportionality_deviation: f64,
    pub marginal_deviation: f64,
    pub target_deviation: f64,
}

impl CertificateAudit {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_eigenvalue >= -tol
            && self.proportionality_deviation <= tol
            && self.marginal_deviation <= tol
            && self.target_deviation <= tol
    }
}

impl ConversionCertificate {
    /// Applies the certified LOSR map to `src`, evaluating the Choi
    /// contraction with explicit tensor products and partial traces.
    pub fn apply(&self, src: &Assemblage, dst: &Scenario) -> Result<Assemblage> {
        let d = src.bob_dim();
        let d_new = dst.bob_dim;
        let id_new = CMatrix::identity(d_new);
        let mut elements = vec![CMatrix::zeros(d_new, d_new); dst.num_elements()];
        for (lambda, w) in self.choi_blocks.iter().enumerate() {
            let combs: Vec<DetComb> = self.combs[lambda].iter().map(|c| c.parse()).collect::<Result<_>>()?;
            let agg = aggregated_sources(src, dst, &combs);
            for (e, s_mat) in agg.iter().enumerate() {
                let prod = w * &tensor(&id_new, &s_mat.transpose());
                let out = partial_trace(&prod, &[d_new, d], &[0])?.scale(d as f64);
                elements[e] += &out;
            }
        }
        Assemblage::new(dst.clone(), elements)
    }

    pub fn audit(&self, src: &Assemblage, dst: &Assemblage) -> Result<CertificateAudit> {
        let d = src.bob_dim();
        let d_new = dst.bob_dim();
        let mut min_eigenvalue = f64::INFINITY;
        let mut proportionality_deviation = 0.0f64;
        let mut total = CMatrix::zeros(d, d);
        for w in &self.choi_blocks {
            min_eigenvalue = min_eigenvalue.min(w.min_eigenvalue());
            let marg = partial_trace(w, &[d_new, d], &[1])?;
            let q = w.trace().re;
            proportionality_deviation =
                proportionality_deviation.max(marg.max_abs_diff(&CMatrix::identity(d).scale(q / d as f64)));
            total += &marg;
        }
        let marginal_deviation = total.max_abs_diff(&CMatrix::identity(d).scale(1.0 / d as f64));
        let target_deviation = self.apply(src, dst.scenario())?.max_abs_diff(dst)?;
        Ok(CertificateAudit { min_eigenvalue, proportionality_deviation, marginal_deviation, target_deviation })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConversionDecision {
    pub verdict: Feasibility,
    pub slack: f64,
    pub lower_bound: f64,
    pub certificate: Option<ConversionCertificate>,
    pub audit: Option<CertificateAudit>,
}

/// Tolerance of the certificate audit.
pub const AUDIT_TOL: f64 = 1e-6;

fn decide(sdp: ConversionSdp, src: &Assemblage, dst: &Assemblage, settings: &SdpSettings) -> Result<ConversionDecision> {
    let dec = decide_feasibility(&sdp.problem, settings)?;
    if dec.verdict != Feasibility::Feasible {
        return Ok(ConversionDecision {
            verdict: dec.verdict,
            slack: dec.slack,
            lower_bound: dec.lower_bound,
            certificate: None,
            audit: None,
        });
    }
    let n = sdp.combs.len();
    let comb_indices: Vec<Vec<usize>> = (0..n).map(|l| sdp.combs.indices(l)).collect();
    let combs: Vec<Vec<String>> =
        (0..n).map(|l| sdp.combs.combs(l).iter().map(|c| c.to_string()).collect()).collect();
    let cert = ConversionCertificate { comb_indices, combs, choi_blocks: dec.solution.blocks, slack: dec.slack };
    let audit = cert.audit(src, dst)?;
    let verdict = if audit.passes(AUDIT_TOL) { Feasibility::Feasible } else { Feasibility::Indeterminate };
    Ok(ConversionDecision {
        verdict,
        slack: dec.slack,
        lower_bound: dec.lower_bound,
        certificate: Some(cert),
        audit: Some(audit),
    })
}

/// Decides the bipartite conversion `src → dst`.
pub fn decide_conversion(src: &Assemblage, dst: &Assemblage, settings: &SdpSettings) -> Result<ConversionDecision> {
    let sdp = build_conversion_sdp(src, dst)?;
    decide(sdp, src, dst, settings)
}

/// Decides the multipartite conversion `src → dst`.
pub fn decide_conversion_multi(src: &Assemblage, dst: &Assemblage, settings: &SdpSettings) -> Result<ConversionDecision> {
    let sdp = build_conversion_sdp_multi(src, dst)?;
    decide(sdp, src, dst, settings)
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphNode {
    pub name: String,
    pub free: bool,
    pub free_verdict: Feasibility,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphEdge {
    pub src: String,
    pub dst: String,
    /// None for edges inferred from the transitive closure in fast mode.
    pub slack: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairResult {
    pub src: String,
    pub dst: String,
    pub verdict: Feasibility,
    pub slack: f64,
    pub lower_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreorderGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub indeterminate: Vec<PairResult>,
    pub infeasible: Vec<PairResult>,
}

impl PreorderGraph {
    pub fn has_edge(&self, src: &str, dst: &str) -> bool {
        self.edges.iter().any(|e| e.src == src && e.dst == dst)
    }

    pub fn pair(&self, src: &str, dst: &str) -> Option<Feasibility> {
        if self.has_edge(src, dst) {
            return Some(Feasibility::Feasible);
        }
        let find = |v: &[PairResult]| v.iter().find(|p| p.src == src && p.dst == dst).map(|p| p.verdict);
        find(&self.infeasible).or_else(|| find(&self.indeterminate))
    }

    /// Graphviz rendering; free nodes are filled grey.
    pub fn to_dot(&self) -> String {
        let q = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        let mut out = String::from("digraph preorder {\n  node [shape=circle, style=filled, fillcolor=black, fontcolor=white];\n");
        for n in &self.nodes {
            if n.free {
                out.push_str(&format!("  {} [fillcolor=grey, fontcolor=black];\n", q(&n.name)));
            } else {
                out.push_str(&format!("  {};\n", q(&n.name)));
            }
        }
        for e in &self.edges {
            out.push_str(&format!("  {} -> {};\n", q(&e.src), q(&e.dst)));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub workers: usize,
    /// Skip pairs already implied by the transitive closure of found edges.
    pub fast: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { workers: 1, fast: false }
    }
}

fn decide_any(src: &Assemblage, dst: &Assemblage, settings: &SdpSettings) -> Result<ConversionDecision> {
    if src.n_alices() == 1 {
        decide_conversion(src, dst, settings)
    } else {
        decide_conversion_multi(src, dst, settings)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Settings(format!("worker pool: {e}")))
}

/// Decides every ordered pair of distinct family members.
pub fn preorder_graph(
    family: &[(String, Assemblage)],
    settings: &SdpSettings,
    options: &SweepOptions,
) -> Result<PreorderGraph> {
    settings.check()?;
    let names: HashSet<&String> = family.iter().map(|(n, _)| n).collect();
    if names.len() != family.len() {
        return Err(Error::Scenario("family member names must be unique".into()));
    }
    if let Some((_, first)) = family.first() {
        if family.iter().any(|(_, a)| a.n_alices() != first.n_alices()) {
            return Err(Error::Scenario("family members have different numbers of Alices".into()));
        }
    }
    let n = family.len();
    let pool = pool(options.workers)?;
    let frees: Vec<Result<Feasibility>> = pool.install(|| {
        family
            .par_iter()
            .map(|(_, a)| {
                let d = if a.n_alices() == 1 { is_free_bipartite(a, settings) } else { is_losr_free_multi(a, settings) };
                d.map(|d| d.verdict)
            })
            .collect()
    });
    let mut nodes = Vec::with_capacity(n);
    for ((name, _), f) in family.iter().zip(frees) {
        let v = f?;
        nodes.push(GraphNode { name: name.clone(), free: v == Feasibility::Feasible, free_verdict: v });
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();

    // Results per pair: None for pairs inferred by closure.
    let mut results: Vec<Option<ConversionDecision>> = vec![None; pairs.len()];
    let mut implied = vec![false; pairs.len()];
    if options.fast {
        let mut reach = vec![vec![false; n]; n];
        for (pi, &(i, j)) in pairs.iter().enumerate() {
            if (0..n).any(|k| k != i && k != j && reach[i][k] && reach[k][j]) {
                implied[pi] = true;
                reach[i][j] = true;
                continue;
            }
            let dec = decide_any(&family[i].1, &family[j].1, settings)?;
            if dec.verdict == Feasibility::Feasible {
                reach[i][j] = true;
                // Propagate the closure.
                for a in 0..n {
                    for b in 0..n {
                        if (a == i || reach[a][i]) && (b == j || reach[j][b]) && a != b {
                            reach[a][b] = true;
                        }
                    }
                }
            }
            results[pi] = Some(dec);
        }
    } else {
        let decided: Vec<Result<ConversionDecision>> = pool.install(|| {
            pairs.par_iter().map(|&(i, j)| decide_any(&family[i].1, &family[j].1, settings)).collect()
        });
        for (pi, d) in decided.into_iter().enumerate() {
            results[pi] = Some(d?);
        }
    }

    let mut edges = Vec::new();
    let mut indeterminate = Vec::new();
    let mut infeasible = Vec::new();
    for (pi, &(i, j)) in pairs.iter().enumerate() {
        let (src, dst) = (family[i].0.clone(), family[j].0.clone());
        if implied[pi] {
            edges.push(GraphEdge { src, dst, slack: None });
            continue;
        }
        let d = results[pi].as_ref().expect("decided pair");
        let record = PairResult { src: src.clone(), dst: dst.clone(), verdict: d.verdict, slack: d.slack, lower_bound: d.lower_bound };
        match d.verdict {
            Feasibility::Feasible => edges.push(GraphEdge { src, dst, slack: Some(d.slack) }),
            Feasibility::Infeasible => infeasible.push(record),
            Feasibility::Indeterminate => indeterminate.push(record),
        }
    }
    Ok(PreorderGraph { nodes, edges, indeterminate, infeasible })
}

/// Angles and visibilities of the nine-member reference family.
pub const REFERENCE_THETAS: [(&str, f64); 3] = [("pi/12", PI / 12.0), ("pi/6", PI / 6.0), ("pi/4", PI / 4.0)];
pub const REFERENCE_PS: [f64; 3] = [0.8, 0.9, 1.0];

pub fn reference_name(theta_label: &str, p: f64) -> String {
    format!("S({theta_label},{p:.1})")
}

/// family_S(θ, p) for θ ∈ {π/12, π/6, π/4} and p ∈ {0.8, 0.9, 1.0}, θ-major.
pub fn reference_family() -> Result<Vec<(String, Assemblage)>> {
    let mut out = Vec::with_capacity(9);
    for (label, theta) in REFERENCE_THETAS {
        for p in REFERENCE_PS {
            out.push((reference_name(label, p), family_s(theta, p)?));
        }
    }
    Ok(out)
}

/// Conversions known to exist within the reference family, as
/// ((θ index, p index), (θ index, p index)).
pub fn reference_arrows() -> Vec<((usize, usize), (usize, usize))> {
    let mut arrows = vec![
        ((2, 2), (0, 1)),
        ((2, 2), (1, 0)),
        ((1, 2), (2, 1)),
        ((0, 2), (1, 0)),
        ((2, 1), (1, 0)),
        ((1, 1), (0, 1)),
        ((1, 1), (2, 0)),
        ((1, 0), (0, 0)),
        ((2, 0), (0, 0)),
    ];
    for t in 0..3 {
        for hi in 0..3 {
            for lo in 0..hi {
                arrows.push(((t, hi), (t, lo)));
            }
        }
    }
    arrows
}

/// Pairs known to be inconvertible: every ordered pair of p = 1 members
/// and S(π/12,1) → S(π/4,0.9).
pub fn reference_absences() -> Vec<((usize, usize), (usize, usize))> {
    let mut out = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                out.push(((a, 2), (b, 2)));
            }
        }
    }
    out.push(((0, 2), (2, 1)));
    out
}

fn reference_node(n: (usize, usize)) -> String {
    reference_name(REFERENCE_THETAS[n.0].0, REFERENCE_PS[n.1])
}

#[derive(Clone, Debug, Serialize)]
pub struct ReferenceCheck {
    /// Known arrows not certified feasible within `eps_feasible`.
    pub missing_arrows: Vec<(String, String)>,
    /// Known absences not decided infeasible.
    pub unexpected_conversions: Vec<(String, String)>,
    /// Pairs feasible in both directions.
    pub two_way: Vec<(String, String)>,
}

impl ReferenceCheck {
    pub fn passes(&self) -> bool {
        self.missing_arrows.is_empty() && self.unexpected_conversions.is_empty() && self.two_way.is_empty()
    }
}

/// Checks a pre-order graph over the reference family against the known
/// arrows and absences.
pub fn check_reference_graph(g: &PreorderGraph) -> ReferenceCheck {
    let missing_arrows = reference_arrows()
        .into_iter()
        .map(|(a, b)| (reference_node(a), reference_node(b)))
        .filter(|(a, b)| !g.has_edge(a, b))
        .collect();
    let unexpected_conversions = reference_absences()
        .into_iter()
        .map(|(a, b)| (reference_node(a), reference_node(b)))
        .filter(|(a, b)| g.pair(a, b) != Some(Feasibility::Infeasible))
        .collect();
    let two_way = g
        .edges
        .iter()
        .filter(|e| e.src < e.dst && g.has_edge(&e.dst, &e.src))
        .map(|e| (e.src.clone(), e.dst.clone()))
        .collect();
    ReferenceCheck { missing_arrows, unexpected_conversions, two_way }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_counts() {
        let a = family_s(PI / 4.0, 1.0).unwrap();
        let sdp = build_conversion_sdp(&a, &a).unwrap();
        assert_eq!(sdp.problem.blocks().len(), 64);
        assert!(sdp.problem.blocks().iter().all(|b| b.dim == 4));

        let one_input = Assemblage::from_fn(Scenario::bipartite(1, 2, 2), |a, _| CMatrix::diag(&[0.5 * (a[0] as f64), 0.5 * (1.0 - a[0] as f64)])).unwrap();
        assert_eq!(build_conversion_sdp(&a, &one_input).unwrap().problem.blocks().len(), 8);

        let trivial = Assemblage::from_fn(Scenario::bipartite(1, 1, 2), |_, _| CMatrix::identity(2).scale(0.5)).unwrap();
        assert_eq!(build_conversion_sdp(&trivial, &trivial).unwrap().problem.blocks().len(), 1);
    }

    #[test]
    fn reflexive_with_audited_certificate() {
        let a = family_s(PI / 6.0, 0.9).unwrap();
        let d = decide_conversion(&a, &a, &SdpSettings::default()).unwrap();
        assert_eq!(d.verdict, Feasibility::Feasible);
        assert!(d.slack <= 1e-8);
        let audit = d.audit.unwrap();
        assert!(audit.passes(1e-6), "{audit:?}");
    }

    #[test]
    fn identity_certificate_replays() {
        // Hand-built certificate: identity comb with the maximally entangled
        // Choi state reproduces the source exactly.
        let a = family_s(0.4, 0.7).unwrap();
        let space = CombSpace::new((2, 2), (2, 2));
        let id = (0..space.len())
            .find(|&i| {
                let c = space.comb(i);
                (0..2).all(|x| c.g(x) == x) && (0..2).all(|o| (0..2).all(|x| c.f(o, x) == o))
            })
            .unwrap();
        let h = 0.5;
        let mut w = CMatrix::zeros(4, 4);
        for (r, c) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            w[(r, c)] = C64::new(h, 0.0);
        }
        let mut blocks = vec![CMatrix::zeros(4, 4); 64];
        blocks[id] = w;
        let cert = ConversionCertificate {
            comb_indices: (0..64).map(|l| vec![l]).collect(),
            combs: (0..64).map(|l| vec![space.comb(l).to_string()]).collect(),
            choi_blocks: blocks,
            slack: 0.0,
        };
        let audit = cert.audit(&a, &a).unwrap();
        assert!(audit.passes(1e-14), "{audit:?}");
    }

    #[test]
    fn nonfree_source_reaches_free_target() {
        let src = family_s(PI / 4.0, 1.0).unwrap();
        let dst = family_s(PI / 12.0, 0.8).unwrap();
        assert_eq!(decide_conversion(&src, &dst, &SdpSettings::default()).unwrap().verdict, Feasibility::Feasible);
        assert_eq!(decide_conversion(&dst, &src, &SdpSettings::default()).unwrap().verdict, Feasibility::Infeasible);
    }

    #[test]
    fn tripartite_conversion_is_reflexive() {
        let g = crate::assemblages::family_ghz(3, PI / 4.0).unwrap();
        let sdp = build_conversion_sdp_multi(&g, &g).unwrap();
        assert_eq!(sdp.problem.blocks().len(), 4096);
        let d = decide_conversion_multi(&g, &g, &SdpSettings::default()).unwrap();
        assert_eq!(d.verdict, Feasibility::Feasible);
        assert!(d.audit.unwrap().passes(AUDIT_TOL));
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let a = family_s(0.5, 1.0).unwrap();
        let g = crate::assemblages::family_ghz(3, 0.5).unwrap();
        assert!(build_conversion_sdp_multi(&a, &g).is_err());
        assert!(build_conversion_sdp(&g, &g).is_err());
    }

    #[test]
    fn singleton_family() {
        let fam = vec![("only".to_string(), family_s(0.5, 1.0).unwrap())];
        let g = preorder_graph(&fam, &SdpSettings::default(), &SweepOptions::default()).unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
        assert!(g.to_dot().contains("\"only\""));
    }
}
