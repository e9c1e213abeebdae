//! Membership tests for the classical sets of assemblages.
//!
//! Each test asks whether σ_{a|x} = Σ_λ D(a|x,λ) σ̃_λ with σ̃_λ ⪰ 0, where λ
//! runs over a finite family of deterministic joint strategies:
//!
//! * bipartite LHS and multipartite LOSR-free: products of per-Alice
//!   responses;
//! * general LHS: every function from input tuples to output tuples;
//! * time-ordered LHS (two Alices): one-way signalling strategies, with one
//!   decomposition per ordering solved jointly.
//!
//! Restricting λ to deterministic strategies is the usual vertex reduction of
//! the corresponding convex sets.

use serde::Serialize;

use crate::assemblages::{validate, Assemblage, Scenario};
use crate::error::{Error, Result};
use crate::qcore::{CMatrix, C64};
use crate::sdp::{decide_feasibility, Constraint, Feasibility, SdpProblem, SdpSettings, Term};
use crate::strategies::{joint_response_tables, product_response_tables, signalling_tables, Direction, JointTable};

/// Hidden states σ̃_λ with their deterministic strategies.
#[derive(Clone, Debug, Serialize)]
pub struct HiddenStateModel {
    pub tables: Vec<JointTable>,
    pub states: Vec<CMatrix>,
}

impl HiddenStateModel {
    /// Rebuilds σ_{a|x} = Σ_λ D(a|x,λ) σ̃_λ.
    pub fn reconstruct(&self, s: &Scenario) -> Result<Assemblage> {
        let d = s.bob_dim;
        let n_a = s.num_output_tuples();
        let mut elements = vec![CMatrix::zeros(d, d); s.num_elements()];
        for (table, state) in self.tables.iter().zip(&self.states) {
            for (xi, &ai) in table.iter().enumerate() {
                elements[xi * n_a + ai] += state;
            }
        }
        Assemblage::new(s.clone(), elements)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FreenessDecision {
    pub verdict: Feasibility,
    pub slack: f64,
    pub lower_bound: f64,
    /// One model per decomposition (two for the time-ordered test), present
    /// when the verdict is feasible.
    pub certificates: Vec<HiddenStateModel>,
}

impl FreenessDecision {
    pub fn is_free(&self) -> bool {
        self.verdict == Feasibility::Feasible
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreeModel {
    /// Products of per-Alice responses (bipartite LHS when k = 1).
    LosrFree,
    GeneralLhs,
    TimeOrdered,
}

/// Adds the entrywise constraints σ_{a|x} = Σ_λ D(a|x,λ) X_λ for every
/// (a, x), real and imaginary parts of the upper triangle separately.
/// `sign` multiplies the assemblage side, `extra` adds one more block per
/// element (used by the monotone SDPs for slack matrices).
pub(crate) fn add_decomposition_constraints(
    p: &mut SdpProblem,
    a: &Assemblage,
    tables: &[JointTable],
    hidden: &[usize],
    extra: Option<(&[usize], f64)>,
    label: &str,
) -> Result<()> {
    let s = a.scenario();
    let d = s.bob_dim;
    for xi in 0..s.num_input_tuples() {
        for ai in 0..s.num_output_tuples() {
            let target = a.element(ai, xi);
            let members: Vec<usize> =
                tables.iter().enumerate().filter(|(_, t)| t[xi] == ai).map(|(l, _)| hidden[l]).collect();
            for i in 0..d {
                for j in i..d {
                    let parts: &[(C64, f64)] = if i == j {
                        &[(C64::new(1.0, 0.0), target[(i, j)].re)]
                    } else {
                        &[(C64::new(1.0, 0.0), target[(i, j)].re), (C64::new(0.0, -1.0), target[(i, j)].im)]
                    };
                    for (part, &(coef, value)) in parts.iter().enumerate() {
                        let mut terms: Vec<Term> = members
                            .iter()
                            .map(|&b| {
                                let mut t = Term::new(b);
                                t.push(i, j, coef);
                                t
                            })
                            .collect();
                        if let Some((blocks, sign)) = extra {
                            let mut t = Term::new(blocks[xi * s.num_output_tuples() + ai]);
                            t.push(i, j, coef * sign);
                            terms.push(t);
                        }
                        let which = if part == 0 { "re" } else { "im" };
                        p.add_constraint(Constraint::new(
                            format!("{label} a={ai} x={xi} ({i},{j}) {which}"),
                            terms,
                            -value,
                        ))?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn check_valid(a: &Assemblage) -> Result<()> {
    let report = validate(a, 1e-7);
    if !report.is_valid() {
        return Err(Error::InvalidAssemblage(format!("{:?}", report.issues)));
    }
    Ok(())
}

/// Builds the decomposition SDP for one or more strategy families sharing
/// the assemblage; returns the problem and the block indices per family.
pub fn build_decomposition_sdp(a: &Assemblage, families: &[Vec<JointTable>]) -> Result<(SdpProblem, Vec<Vec<usize>>)> {
    let d = a.bob_dim();
    let mut p = SdpProblem::new();
    let mut all_blocks = Vec::new();
    for (fi, tables) in families.iter().enumerate() {
        let blocks: Vec<usize> = (0..tables.len()).map(|l| p.add_block(format!("hidden[{fi}][{l}]"), d)).collect();
        add_decomposition_constraints(&mut p, a, tables, &blocks, None, &format!("model {fi}"))?;
        let norm = blocks.iter().map(|&b| Term::trace(b, d)).collect();
        p.add_constraint(Constraint::new(format!("model {fi} normalization"), norm, -1.0))?;
        all_blocks.push(blocks);
    }
    Ok((p, all_blocks))
}

fn decide(a: &Assemblage, families: Vec<Vec<JointTable>>, settings: &SdpSettings) -> Result<FreenessDecision> {
    check_valid(a)?;
    let (p, blocks) = build_decomposition_sdp(a, &families)?;
    let dec = decide_feasibility(&p, settings)?;
    let certificates = if dec.verdict == Feasibility::Feasible {
        families
            .into_iter()
            .zip(blocks)
            .map(|(tables, bl)| HiddenStateModel {
                tables,
                states: bl.iter().map(|&b| dec.solution.blocks[b].clone()).collect(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(FreenessDecision { verdict: dec.verdict, slack: dec.slack, lower_bound: dec.lower_bound, certificates })
}

/// Strategy families for a freeness model.
pub fn model_tables(s: &Scenario, model: FreeModel) -> Result<Vec<Vec<JointTable>>> {
    Ok(match model {
        FreeModel::LosrFree => vec![product_response_tables(s)],
        FreeModel::GeneralLhs => vec![joint_response_tables(s)],
        FreeModel::TimeOrdered => vec![
            signalling_tables(s, Direction::FirstToSecond)?,
            signalling_tables(s, Direction::SecondToFirst)?,
        ],
    })
}

/// Bipartite LHS membership.
pub fn is_free_bipartite(a: &Assemblage, settings: &SdpSettings) -> Result<FreenessDecision> {
    if a.n_alices() != 1 {
        return Err(Error::Scenario("bipartite test applied to a multipartite assemblage".into()));
    }
    decide(a, model_tables(a.scenario(), FreeModel::LosrFree)?, settings)
}

/// LOSR-free membership: λ over products of per-Alice responses.
pub fn is_losr_free_multi(a: &Assemblage, settings: &SdpSettings) -> Result<FreenessDecision> {
    decide(a, model_tables(a.scenario(), FreeModel::LosrFree)?, settings)
}

/// General-LHS membership: λ over every joint deterministic strategy.
pub fn is_general_lhs_multi(a: &Assemblage, settings: &SdpSettings) -> Result<FreenessDecision> {
    decide(a, model_tables(a.scenario(), FreeModel::GeneralLhs)?, settings)
}

/// Time-ordered LHS membership for two Alices: simultaneous decompositions
/// over one-way signalling strategies in both orderings.
pub fn is_tolhs_multi(a: &Assemblage, settings: &SdpSettings) -> Result<FreenessDecision> {
    decide(a, model_tables(a.scenario(), FreeModel::TimeOrdered)?, settings)
}
