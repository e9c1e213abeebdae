//! Resource monotones: EPR weight, EPR robustness and yield monotones.

use serde::Serialize;

use crate::assemblages::{validate, Assemblage};
use crate::conversion::{add_choi_blocks, CombProduct};
use crate::error::{Error, Result};
use crate::freeness::add_decomposition_constraints;
use crate::functionals::{epr_functional_bipartite, epr_functional_multi, EprFunctional};
use crate::qcore::{CMatrix, C64};
use crate::sdp::{solve, Feasibility, SdpProblem, SdpSettings, SdpSolution, Term};
use crate::strategies::product_response_tables;

#[derive(Clone, Debug, Serialize)]
pub struct MonotoneValue {
    pub value: f64,
    pub status: Feasibility,
    /// Maximum constraint violation of the returned optimizer.
    pub slack: f64,
    pub diagnostic: String,
    #[serde(skip)]
    pub solution: SdpSolution,
}

fn check_valid(a: &Assemblage) -> Result<()> {
    let report = validate(a, 1e-7);
    if !report.is_valid() {
        return Err(Error::InvalidAssemblage(format!("{:?}", report.issues)));
    }
    Ok(())
}

fn finish(p: &SdpProblem, settings: &SdpSettings, map: impl Fn(f64) -> f64) -> Result<MonotoneValue> {
    let sol = solve(p, settings)?;
    if sol.status == Feasibility::Infeasible {
        return Err(Error::Solver(format!("monotone SDP reported infeasible ({})", sol.diagnostic)));
    }
    Ok(MonotoneValue {
        value: map(sol.objective_value),
        status: sol.status,
        slack: sol.slack,
        diagnostic: sol.diagnostic.clone(),
        solution: sol,
    })
}

/// Hidden-state blocks over products of deterministic responses plus one
/// slack block per assemblage element, tied by σ = Σ Dσ̃ + sign·Z.
fn decomposition_with_slack(a: &Assemblage, sign: f64) -> Result<(SdpProblem, Vec<usize>, Vec<usize>)> {
    check_valid(a)?;
    let s = a.scenario();
    let d = s.bob_dim;
    let tables = product_response_tables(s);
    let mut p = SdpProblem::new();
    let hidden: Vec<usize> = (0..tables.len()).map(|l| p.add_block(format!("hidden[{l}]"), d)).collect();
    let slack: Vec<usize> = (0..s.num_elements()).map(|e| p.add_block(format!("slack[{e}]"), d)).collect();
    add_decomposition_constraints(&mut p, a, &tables, &hidden, Some((&slack, sign)), "decomposition")?;
    Ok((p, hidden, slack))
}

/// EPR weight: the least μ with Σ = μΣ′ + (1−μ)Σ^free, computed as one
/// minus the largest total trace of hidden states fitting under Σ.
pub fn epr_weight(a: &Assemblage, settings: &SdpSettings) -> Result<MonotoneValue> {
    let d = a.bob_dim();
    let (mut p, hidden, _) = decomposition_with_slack(a, 1.0)?;
    p.set_objective(hidden.iter().map(|&b| Term::trace(b, d)).collect(), 0.0)?;
    finish(&p, settings, |v| 1.0 - v)
}

/// EPR robustness: the least ν with (Σ + νΣ′)/(1+ν) free, computed as the
/// smallest total trace of hidden states dominating Σ, minus one.
pub fn epr_robustness(a: &Assemblage, settings: &SdpSettings) -> Result<MonotoneValue> {
    let d = a.bob_dim();
    let (mut p, hidden, _) = decomposition_with_slack(a, -1.0)?;
    p.set_objective(hidden.iter().map(|&b| Term::trace(b, d).scaled(-1.0)).collect(), 0.0)?;
    finish(&p, settings, |v| -v - 1.0)
}

/// Largest value of `f` over every LOSR image of `a` in the functional's
/// scenario.
pub fn yield_for_functional(a: &Assemblage, f: &EprFunctional, settings: &SdpSettings) -> Result<MonotoneValue> {
    check_valid(a)?;
    let dst = f.scenario();
    let combs = CombProduct::new(a.scenario(), dst)?;
    let d = a.bob_dim();
    let d_new = dst.bob_dim;
    let mut p = SdpProblem::new();
    let blocks = add_choi_blocks(&mut p, &combs, d, d_new)?;
    // Tr F E with E[i][j] = Σ_{k,l} d·W[(i,k),(j,l)]·S[k][l].
    let mut terms = Vec::with_capacity(blocks.len());
    for (lambda, &b) in blocks.iter().enumerate() {
        let agg = crate::conversion::aggregated_sources_for(a, dst, &combs, lambda);
        let mut t = Term::new(b);
        for (e, s_mat) in agg.iter().enumerate() {
            if s_mat.max_abs() == 0.0 {
                continue;
            }
            let op = &f.operators()[e];
            for i in 0..d_new {
                for j in 0..d_new {
                    let fji = op[(j, i)];
                    if fji == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for k in 0..d {
                        for l in 0..d {
                            t.push(i * d + k, j * d + l, fji * s_mat[(k, l)] * d as f64);
                        }
                    }
                }
            }
        }
        terms.push(t);
    }
    p.set_objective(terms, 0.0)?;
    finish(&p, settings, |v| v)
}

/// M_η: the yield of S_η over LOSR images with two binary inputs and outputs
/// and a qubit Bob.
pub fn yield_monotone(a: &Assemblage, eta: f64, settings: &SdpSettings) -> Result<MonotoneValue> {
    if a.n_alices() != 1 {
        return Err(Error::Scenario("bipartite yield applied to a multipartite assemblage".into()));
    }
    yield_for_functional(a, &epr_functional_bipartite(eta)?, settings)
}

/// M_η^(N) with N − 1 = number of Alices of `a`.
pub fn yield_monotone_multi(a: &Assemblage, eta: f64, settings: &SdpSettings) -> Result<MonotoneValue> {
    yield_for_functional(a, &epr_functional_multi(a.n_alices() + 1, eta)?, settings)
}

/// The free assemblage (Σ + νΣ′)/(1+ν) certified by a robustness solution.
pub fn robustness_free_point(a: &Assemblage, m: &MonotoneValue) -> Result<Assemblage> {
    let s = a.scenario();
    let tables = product_response_tables(s);
    let n_a = s.num_output_tuples();
    let hidden = &m.solution.blocks[..tables.len()];
    let scale = 1.0 / (1.0 + m.value);
    let mut elements = vec![CMatrix::zeros(s.bob_dim, s.bob_dim); s.num_elements()];
    for (table, st) in tables.iter().zip(hidden) {
        for (xi, &ai) in table.iter().enumerate() {
            elements[xi * n_a + ai] += &st.scale(scale);
        }
    }
    Assemblage::new(s.clone(), elements)
}
