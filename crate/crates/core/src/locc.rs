//! One-way LOCC maps from Bob to Alice, possibly stochastic.
//!
//! Bob applies an instrument {E_ω}, sends ω to Alice, who picks her input
//! x ~ p(x|x′,ω) and relabels her outcome a′ ~ p(a′|a,x′,ω).

use serde::Serialize;

use crate::assemblages::Assemblage;
use crate::error::{Error, Result};
use crate::qcore::{CMatrix, C64};

const POLICY_TOL: f64 = 1e-12;

/// p(x|x′,ω), indexed `[ω][x′][x]`.
pub type InputPolicy = Vec<Vec<Vec<f64>>>;
/// p(a′|a,x′,ω), indexed `[ω][x′][a][a′]`.
pub type OutputPolicy = Vec<Vec<Vec<Vec<f64>>>>;

#[derive(Clone, Debug, Serialize)]
pub struct OneWayLoccMap {
    /// Kraus operators of E_ω, indexed `[ω][k]`, each d_out × d_in.
    instrument: Vec<Vec<CMatrix>>,
    input_policy: InputPolicy,
    output_policy: OutputPolicy,
    /// Σ_ω Σ_k K†K = I.
    complete: bool,
}

fn check_conditional(rows: &[Vec<f64>], what: &str) -> Result<()> {
    for row in rows {
        let total: f64 = row.iter().sum();
        if row.iter().any(|&p| p < -POLICY_TOL) || (total - 1.0).abs() > POLICY_TOL * row.len().max(1) as f64 {
            return Err(Error::OutOfRange(format!("{what} is not a conditional distribution: {row:?}")));
        }
    }
    Ok(())
}

impl OneWayLoccMap {
    pub fn new(
        instrument: Vec<Vec<CMatrix>>,
        input_policy: InputPolicy,
        output_policy: OutputPolicy,
        tol: f64,
    ) -> Result<Self> {
        let n_omega = instrument.len();
        if n_omega == 0 || input_policy.len() != n_omega || output_policy.len() != n_omega {
            return Err(Error::Dimension("instrument and policies must share the message alphabet".into()));
        }
        let first = instrument[0].first().ok_or_else(|| Error::Dimension("empty Kraus list".into()))?;
        let (d_out, d_in) = (first.rows(), first.cols());
        let mut total = CMatrix::zeros(d_in, d_in);
        for k in instrument.iter().flatten() {
            if k.rows() != d_out || k.cols() != d_in {
                return Err(Error::Dimension("Kraus operators differ in shape".into()));
            }
            total += &(&k.adjoint() * k);
        }
        if (&CMatrix::identity(d_in) - &total).min_eigenvalue() < -tol {
            return Err(Error::Dimension("instrument is trace-increasing".into()));
        }
        let complete = total.max_abs_diff(&CMatrix::identity(d_in)) <= tol;
        let n_x_new = input_policy[0].len();
        let n_x = input_policy[0].first().map_or(0, Vec::len);
        let n_a = output_policy[0].first().map_or(0, Vec::len);
        let n_a_new = output_policy[0].first().and_then(|r| r.first()).map_or(0, Vec::len);
        for w in 0..n_omega {
            if input_policy[w].len() != n_x_new || input_policy[w].iter().any(|r| r.len() != n_x) {
                return Err(Error::Dimension("input policy shape differs between messages".into()));
            }
            check_conditional(&input_policy[w], "input policy")?;
            if output_policy[w].len() != n_x_new {
                return Err(Error::Dimension("output policy shape differs from input policy".into()));
            }
            for per_x in &output_policy[w] {
                if per_x.len() != n_a || per_x.iter().any(|r| r.len() != n_a_new) {
                    return Err(Error::Dimension("output policy shape differs between entries".into()));
                }
                check_conditional(per_x, "output policy")?;
            }
        }
        Ok(OneWayLoccMap { instrument, input_policy, output_policy, complete })
    }

    /// Bob's instrument is the single map ρ ↦ ρ and Alice keeps her labels.
    pub fn identity(n_inputs: usize, n_outputs: usize, bob_dim: usize) -> Self {
        let delta = |n: usize| (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect::<Vec<Vec<f64>>>();
        OneWayLoccMap {
            instrument: vec![vec![CMatrix::identity(bob_dim)]],
            input_policy: vec![delta(n_inputs)],
            output_policy: vec![vec![delta(n_outputs); n_inputs]],
            complete: true,
        }
    }

    pub fn instrument(&self) -> &[Vec<CMatrix>] {
        &self.instrument
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn n_messages(&self) -> usize {
        self.instrument.len()
    }

    fn apply_instrument(&self, omega: usize, rho: &CMatrix) -> CMatrix {
        let d_out = self.instrument[omega][0].rows();
        let mut out = CMatrix::zeros(d_out, d_out);
        for k in &self.instrument[omega] {
            out += &(&(k * rho) * &k.adjoint());
        }
        out
    }
}

/// Applies the map and renormalizes by the success probability, which is
/// returned alongside.
pub fn apply_1wlocc(m: &OneWayLoccMap, a: &Assemblage) -> Result<(Assemblage, f64)> {
    if a.n_alices() != 1 {
        return Err(Error::Scenario("one-way LOCC maps act on bipartite assemblages".into()));
    }
    let s = a.scenario();
    let (n_x, n_a) = (s.n_inputs[0], s.n_outputs[0]);
    let d_in = m.instrument[0][0].cols();
    if d_in != s.bob_dim {
        return Err(Error::Dimension(format!("instrument acts on dimension {d_in}, Bob has {}", s.bob_dim)));
    }
    if m.input_policy[0][0].len() != n_x || m.output_policy[0][0].len() != n_a {
        return Err(Error::Scenario("policies do not match the assemblage's inputs and outputs".into()));
    }
    let n_x_new = m.input_policy[0].len();
    let n_a_new = m.output_policy[0][0][0].len();
    let d_out = m.instrument[0][0].rows();
    let dst = crate::assemblages::Scenario::bipartite(n_x_new, n_a_new, d_out);
    let mut elements = vec![CMatrix::zeros(d_out, d_out); dst.num_elements()];
    for omega in 0..m.n_messages() {
        let mapped: Vec<CMatrix> = a.elements().iter().map(|el| m.apply_instrument(omega, el)).collect();
        for xn in 0..n_x_new {
            for x in 0..n_x {
                let px = m.input_policy[omega][xn][x];
                if px == 0.0 {
                    continue;
                }
                for ai in 0..n_a {
                    for an in 0..n_a_new {
                        let pa = m.output_policy[omega][xn][ai][an];
                        if pa != 0.0 {
                            elements[xn * n_a_new + an] += &mapped[x * n_a + ai].scale(px * pa);
                        }
                    }
                }
            }
        }
    }
    let q: f64 = elements[..n_a_new].iter().map(|e| e.trace().re).sum();
    if q <= 1e-14 {
        return Err(Error::ZeroSuccess);
    }
    let out = Assemblage::new(dst, elements.iter().map(|e| e.scale(1.0 / q)).collect())?;
    Ok((out, q))
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_4 + 1e-12) {
        return Err(Error::OutOfRange(format!("angle {theta} outside (0, π/4]")));
    }
    Ok(())
}

fn binary_identity_policies(n_messages: usize) -> (InputPolicy, OutputPolicy) {
    let delta = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    (vec![delta.clone(); n_messages], vec![vec![delta; 2]; n_messages])
}

/// Single-outcome filter M₀ = cosθ|0⟩⟨0| + sinθ|1⟩⟨1|; from the maximally
/// entangled member it succeeds with probability 1/2.
pub fn appendix_f_stochastic(theta: f64) -> Result<OneWayLoccMap> {
    check_theta(theta)?;
    let m0 = CMatrix::diag(&[theta.cos(), theta.sin()]);
    let (input, output) = binary_identity_policies(1);
    OneWayLoccMap::new(vec![vec![m0]], input, output, 1e-12)
}

/// Two-outcome instrument completing the filter with
/// M₁ = sinθ|1⟩⟨0| + cosθ|0⟩⟨1|; on ω = 1 Alice flips her σ_z outcome,
/// a′ = a ⊕ ω(1 ⊕ x′).
pub fn appendix_f_deterministic(theta: f64) -> Result<OneWayLoccMap> {
    check_theta(theta)?;
    let m0 = CMatrix::diag(&[theta.cos(), theta.sin()]);
    let mut m1 = CMatrix::zeros(2, 2);
    m1[(1, 0)] = C64::new(theta.sin(), 0.0);
    m1[(0, 1)] = C64::new(theta.cos(), 0.0);
    let (input, mut output) = binary_identity_policies(2);
    let flip = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    output[1][0] = flip;
    OneWayLoccMap::new(vec![vec![m0], vec![m1]], input, output, 1e-12)
}
