//! Semidefinite programs over Hermitian PSD blocks with affine equality
//! constraints, solved through a real symmetric-cone backend (Clarabel).
//!
//! A linear functional of a block X is stored as a sparse list of entries
//! `(r, c, v)` and evaluates to `Re Σ v·X[r][c]`. Constraints read
//! `Σ_k ℓ_k(X_k) + constant = 0`.
//!
//! Hermitian blocks of dimension n > 1 are passed to the backend as real
//! symmetric 2n×2n matrices `[[Re X, −Im X], [Im X, Re X]]`; 1×1 blocks become
//! nonnegative scalars. Returned blocks are un-embedded, hermitized and
//! projected onto the PSD cone, and every reported slack is recomputed from
//! those projected blocks.

use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{real_unembed, CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feasibility {
    Feasible,
    Infeasible,
    Indeterminate,
}

impl Feasibility {
    /// Process exit code: 0 feasible, 1 infeasible, 2 indeterminate.
    pub fn exit_code(self) -> i32 {
        match self {
            Feasibility::Feasible => 0,
            Feasibility::Infeasible => 1,
            Feasibility::Indeterminate => 2,
        }
    }
}

impl std::fmt::Display for Feasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Feasibility::Feasible => "feasible",
            Feasibility::Infeasible => "infeasible",
            Feasibility::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpSettings {
    pub eps_feasible: f64,
    pub eps_infeasible: f64,
    pub solver_tol: f64,
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for SdpSettings {
    fn default() -> Self {
        SdpSettings { eps_feasible: 1e-6, eps_infeasible: 1e-4, solver_tol: 1e-8, max_iter: 500, verbose: false }
    }
}

impl SdpSettings {
    pub fn check(&self) -> Result<()> {
        if !(self.eps_feasible > 0.0 && self.eps_feasible < self.eps_infeasible) {
            return Err(Error::Settings(format!(
                "need 0 < eps_feasible < eps_infeasible, got {} and {}",
                self.eps_feasible, self.eps_infeasible
            )));
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1e-2) {
            return Err(Error::Settings(format!("solver tolerance {} out of range", self.solver_tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub dim: usize,
}

/// One block's contribution `Re Σ v·X[r][c]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub block: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl Term {
    pub fn new(block: usize) -> Self {
        Term { block, entries: Vec::new() }
    }

    pub fn push(&mut self, r: usize, c: usize, v: C64) {
        if v != C64::new(0.0, 0.0) {
            self.entries.push((r, c, v));
        }
    }

    /// tr(H X) for a Hermitian H.
    pub fn trace_with(block: usize, h: &CMatrix) -> Self {
        let mut t = Term::new(block);
        for r in 0..h.rows() {
            for c in 0..h.cols() {
                t.push(c, r, h[(r, c)]);
            }
        }
        t
    }

    /// tr X.
    pub fn trace(block: usize, dim: usize) -> Self {
        let mut t = Term::new(block);
        for i in 0..dim {
            t.push(i, i, C64::new(1.0, 0.0));
        }
        t
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for e in &mut self.entries {
            e.2 *= s;
        }
        self
    }

    pub fn eval(&self, x: &CMatrix) -> f64 {
        self.entries.iter().map(|&(r, c, v)| (v * x[(r, c)]).re).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    pub terms: Vec<Term>,
    pub constant: f64,
}

impl Constraint {
    pub fn new(label: impl Into<String>, terms: Vec<Term>, constant: f64) -> Self {
        Constraint { label: label.into(), terms, constant }
    }

    pub fn eval(&self, blocks: &[CMatrix]) -> f64 {
        self.terms.iter().map(|t| t.eval(&blocks[t.block])).sum::<f64>() + self.constant
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub terms: Vec<Term>,
    pub constant: f64,
}

/// PSD blocks, affine equalities and an optional objective to maximize.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    blocks: Vec<Block>,
    constraints: Vec<Constraint>,
    objective: Option<Objective>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize) -> usize {
        assert!(dim > 0, "blocks must have positive dimension");
        self.blocks.push(Block { name: name.into(), dim });
        self.blocks.len() - 1
    }

    pub fn add_constraint(&mut self, c: Constraint) -> Result<()> {
        self.check_terms(&c.terms, &c.label)?;
        self.constraints.push(c);
        Ok(())
    }

    /// Sets the objective to maximize.
    pub fn set_objective(&mut self, terms: Vec<Term>, constant: f64) -> Result<()> {
        self.check_terms(&terms, "objective")?;
        self.objective = Some(Objective { terms, constant });
        Ok(())
    }

    fn check_terms(&self, terms: &[Term], label: &str) -> Result<()> {
        for t in terms {
            let b = self
                .blocks
                .get(t.block)
                .ok_or_else(|| Error::Dimension(format!("{label}: unknown block {}", t.block)))?;
            if t.entries.iter().any(|&(r, c, _)| r >= b.dim || c >= b.dim) {
                return Err(Error::Dimension(format!("{label}: entry outside block {}", b.name)));
            }
        }
        Ok(())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> Option<&Objective> {
        self.objective.as_ref()
    }

    /// Largest absolute constraint violation of the given blocks.
    pub fn max_violation(&self, blocks: &[CMatrix]) -> f64 {
        self.constraints.iter().map(|c| c.eval(blocks).abs()).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, blocks: &[CMatrix]) -> f64 {
        self.objective.as_ref().map_or(0.0, |o| {
            o.terms.iter().map(|t| t.eval(&blocks[t.block])).sum::<f64>() + o.constant
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SdpSolution {
    pub status: Feasibility,
    pub blocks: Vec<CMatrix>,
    pub objective_value: f64,
    /// Maximum constraint violation of the returned blocks.
    pub slack: f64,
    pub diagnostic: String,
    pub iterations: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeasibilityDecision {
    pub verdict: Feasibility,
    /// Maximum constraint violation of the returned point; an upper bound
    /// on the optimal relaxation t*.
    pub slack: f64,
    /// Dual bound on t*.
    pub lower_bound: f64,
    pub solution: SdpSolution,
}

/// Column layout of the real variables.
struct Layout {
    offsets: Vec<usize>,
    n_vars: usize,
}

impl Layout {
    fn new(blocks: &[Block]) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut n = 0;
        for b in blocks {
            offsets.push(n);
            n += svec_len(b.dim);
        }
        Layout { offsets, n_vars: n }
    }
}

fn svec_len(dim: usize) -> usize {
    if dim == 1 {
        1
    } else {
        let m = 2 * dim;
        m * (m + 1) / 2
    }
}

/// Position of Y[i][j] in the upper-triangular column-major svec.
fn svec_index(i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    c * (c + 1) / 2 + r
}

/// Real coefficients on the backend variables of a linear functional.
fn linearize(terms: &[Term], blocks: &[Block], layout: &Layout, out: &mut BTreeMap<usize, f64>) {
    let s2 = std::f64::consts::SQRT_2;
    for t in terms {
        let n = blocks[t.block].dim;
        let off = layout.offsets[t.block];
        let mut add = |i: usize, j: usize, w: f64| {
            let scale = if i == j { 1.0 } else { 1.0 / s2 };
            *out.entry(off + svec_index(i, j)).or_insert(0.0) += w * scale;
        };
        for &(r, c, v) in &t.entries {
            if n == 1 {
                add(0, 0, v.re);
                continue;
            }
            // Re(v X_rc) = Re v · Re X_rc − Im v · Im X_rc, with
            // Re X_rc = (Y[r][c] + Y[n+r][n+c])/2 and Im X_rc = (Y[n+r][c] − Y[r][n+c])/2.
            if v.re != 0.0 {
                add(r, c, 0.5 * v.re);
                add(n + r, n + c, 0.5 * v.re);
            }
            if v.im != 0.0 {
                add(n + r, c, -0.5 * v.im);
                add(r, n + c, 0.5 * v.im);
            }
        }
    }
    out.retain(|_, w| *w != 0.0);
}

fn unpack_block(x: &[f64], dim: usize) -> CMatrix {
    if dim == 1 {
        return CMatrix::from_real(1, 1, &[x[0].max(0.0)]);
    }
    let m = 2 * dim;
    let s2 = std::f64::consts::SQRT_2;
    let mut y = DMatrix::zeros(m, m);
    for c in 0..m {
        for r in 0..=c {
            let v = x[svec_index(r, c)];
            if r == c {
                y[(r, c)] = v;
            } else {
                y[(r, c)] = v / s2;
                y[(c, r)] = v / s2;
            }
        }
    }
    project_psd(&real_unembed(&y))
}

/// Clips negative eigenvalues of a Hermitian matrix to zero.
pub fn project_psd(h: &CMatrix) -> CMatrix {
    let h = h.hermitize();
    if h.min_eigenvalue() >= 0.0 {
        return h;
    }
    let n = h.rows();
    let m = DMatrix::from_row_slice(n, n, h.data());
    let eig = SymmetricEigen::new(m);
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let v: Vec<C64> = (0..n).map(|i| eig.eigenvectors[(i, k)]).collect();
        out += &CMatrix::outer(&v, &v).scale(lam);
    }
    out.hermitize()
}

struct Backend {
    status: SolverStatus,
    x: Vec<f64>,
    obj_val_dual: f64,
    iterations: u32,
}

struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    fn new() -> Self {
        Rows { i: Vec::new(), j: Vec::new(), v: Vec::new(), b: Vec::new() }
    }

    fn push(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        let row = self.b.len();
        for (j, v) in coeffs {
            self.i.push(row);
            self.j.push(j);
            self.v.push(v);
        }
        self.b.push(rhs);
    }
}

fn run_backend(
    n: usize,
    q: Vec<f64>,
    mut rows: Rows,
    mut cones: Vec<SupportedConeT<f64>>,
    blocks: &[Block],
    layout: &Layout,
    settings: &SdpSettings,
) -> Result<Backend> {
    // Cone membership of the block variables: −x + s = 0, s ∈ K.
    let mut scalars = Vec::new();
    for (k, b) in blocks.iter().enumerate() {
        if b.dim == 1 {
            scalars.push(layout.offsets[k]);
        }
    }
    if !scalars.is_empty() {
        for &j in &scalars {
            rows.push([(j, -1.0)], 0.0);
        }
        cones.push(SupportedConeT::NonnegativeConeT(scalars.len()));
    }
    for (k, b) in blocks.iter().enumerate() {
        if b.dim == 1 {
            continue;
        }
        let off = layout.offsets[k];
        for idx in 0..svec_len(b.dim) {
            rows.push([(off + idx, -1.0)], 0.0);
        }
        cones.push(SupportedConeT::PSDTriangleConeT(2 * b.dim));
    }
    let m = rows.b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
    let p = CscMatrix::zeros((n, n));
    let tol = settings.solver_tol;
    let cfg = DefaultSettingsBuilder::default()
        .verbose(settings.verbose)
        .max_iter(settings.max_iter)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .tol_infeas_abs(tol)
        .tol_infeas_rel(tol)
        .max_threads(1)
        .build()
        .map_err(|e| Error::Solver(format!("settings: {e}")))?;
    let mut solver = DefaultSolver::new(&p, &q, &a, &rows.b, &cones, cfg)
        .map_err(|e| Error::Solver(format!("setup: {e}")))?;
    solver.solve();
    let sol = &solver.solution;
    Ok(Backend { status: sol.status, x: sol.x.clone(), obj_val_dual: sol.obj_val_dual, iterations: sol.iterations })
}

fn unpack_all(p: &SdpProblem, layout: &Layout, x: &[f64]) -> Vec<CMatrix> {
    p.blocks
        .iter()
        .enumerate()
        .map(|(k, b)| {
            let off = layout.offsets[k];
            unpack_block(&x[off..off + svec_len(b.dim)], b.dim)
        })
        .collect()
}

fn zero_blocks(p: &SdpProblem) -> Vec<CMatrix> {
    p.blocks.iter().map(|b| CMatrix::zeros(b.dim, b.dim)).collect()
}

/// Solves the problem with hard equality constraints, maximizing the
/// objective when one is set.
///
/// Status mapping: `Solved` is feasible; `AlmostSolved` is feasible only when
/// the replayed slack is within `eps_feasible`; `PrimalInfeasible` is
/// infeasible; everything else is indeterminate.
pub fn solve(p: &SdpProblem, settings: &SdpSettings) -> Result<SdpSolution> {
    settings.check()?;
    let layout = Layout::new(&p.blocks);
    let n = layout.n_vars;
    let mut q = vec![0.0; n];
    if let Some(obj) = &p.objective {
        let mut coeffs = BTreeMap::new();
        linearize(&obj.terms, &p.blocks, &layout, &mut coeffs);
        for (j, w) in coeffs {
            q[j] = -w;
        }
    }
    let mut rows = Rows::new();
    for c in &p.constraints {
        let mut coeffs = BTreeMap::new();
        linearize(&c.terms, &p.blocks, &layout, &mut coeffs);
        rows.push(coeffs, -c.constant);
    }
    let cones = if p.constraints.is_empty() {
        Vec::new()
    } else {
        vec![SupportedConeT::ZeroConeT(p.constraints.len())]
    };
    let out = run_backend(n, q, rows, cones, &p.blocks, &layout, settings)?;
    let blocks = if out.status == SolverStatus::PrimalInfeasible { zero_blocks(p) } else { unpack_all(p, &layout, &out.x) };
    let slack = p.max_violation(&blocks);
    let objective_value = p.objective_value(&blocks);
    let status = match out.status {
        SolverStatus::Solved => Feasibility::Feasible,
        SolverStatus::AlmostSolved if slack <= settings.eps_feasible => Feasibility::Feasible,
        SolverStatus::PrimalInfeasible => Feasibility::Infeasible,
        _ => Feasibility::Indeterminate,
    };
    Ok(SdpSolution {
        status,
        blocks,
        objective_value,
        slack,
        diagnostic: format!("{:?}", out.status),
        iterations: out.iterations,
    })
}

/// Minimizes t subject to |violation| ≤ t on every constraint, with the
/// blocks kept PSD, and classifies the result.
///
/// The verdict is feasible when the replayed violation of the returned point
/// is at most `eps_feasible`, infeasible when the dual bound on t* is at
/// least `eps_infeasible`, and indeterminate otherwise.
pub fn decide_feasibility(p: &SdpProblem, settings: &SdpSettings) -> Result<FeasibilityDecision> {
    settings.check()?;
    if p.objective.is_some() {
        return Err(Error::Settings("feasibility decisions take problems without objective".into()));
    }
    let layout = Layout::new(&p.blocks);
    let t = layout.n_vars;
    let n = t + 1;
    let mut q = vec![0.0; n];
    q[t] = 1.0;
    let mut rows = Rows::new();
    for c in &p.constraints {
        let mut coeffs = BTreeMap::new();
        linearize(&c.terms, &p.blocks, &layout, &mut coeffs);
        // a·x + c ≤ t and −(a·x + c) ≤ t.
        rows.push(coeffs.iter().map(|(&j, &w)| (j, w)).chain([(t, -1.0)]), -c.constant);
        rows.push(coeffs.iter().map(|(&j, &w)| (j, -w)).chain([(t, -1.0)]), c.constant);
    }
    rows.push([(t, -1.0)], 0.0);
    let cones = vec![SupportedConeT::NonnegativeConeT(2 * p.constraints.len() + 1)];
    let out = run_backend(n, q, rows, cones, &p.blocks, &layout, settings)?;
    let blocks = unpack_all(p, &layout, &out.x);
    let slack = p.max_violation(&blocks);
    let trusted = matches!(out.status, SolverStatus::Solved | SolverStatus::AlmostSolved);
    let lower_bound = if trusted { out.obj_val_dual.max(0.0) } else { 0.0 };
    let verdict = if slack <= settings.eps_feasible {
        Feasibility::Feasible
    } else if trusted && lower_bound >= settings.eps_infeasible {
        Feasibility::Infeasible
    } else {
        Feasibility::Indeterminate
    };
    let solution = SdpSolution {
        status: verdict,
        blocks,
        objective_value: slack,
        slack,
        diagnostic: format!("{:?}", out.status),
        iterations: out.iterations,
    };
    Ok(FeasibilityDecision { verdict, slack, lower_bound, solution })
}
