//! Tilted Bell expressions and the EPR functionals obtained from them by
//! fixing Bob's observables.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use serde::Serialize;

use crate::assemblages::{Assemblage, Scenario};
use crate::error::{Error, Result};
use crate::qcore::CMatrix;
use crate::strategies::product_response_tables;

/// A linear functional S[Σ] = Tr Σ_{a,x} F_{a,x} σ_{a|x}.
#[derive(Clone, Debug, Serialize)]
pub struct EprFunctional {
    scenario: Scenario,
    /// Indexed like assemblage elements: `xi * n_a + ai`.
    operators: Vec<CMatrix>,
    pub eta: f64,
    pub alpha: f64,
    pub mu: f64,
}

impl EprFunctional {
    pub fn new(scenario: Scenario, operators: Vec<CMatrix>) -> Result<Self> {
        scenario.check()?;
        if operators.len() != scenario.num_elements() {
            return Err(Error::Dimension(format!(
                "{} operators for {} assemblage elements",
                operators.len(),
                scenario.num_elements()
            )));
        }
        for f in &operators {
            if f.rows() != scenario.bob_dim || f.cols() != scenario.bob_dim {
                return Err(Error::Dimension(format!("operator is {}×{}, Bob has dimension {}", f.rows(), f.cols(), scenario.bob_dim)));
            }
            let dev = f.hermitian_deviation();
            if dev > 1e-12 {
                return Err(Error::NotHermitian(dev));
            }
        }
        Ok(EprFunctional { scenario, operators, eta: f64::NAN, alpha: f64::NAN, mu: f64::NAN })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    pub fn operator(&self, ai: usize, xi: usize) -> &CMatrix {
        &self.operators[xi * self.scenario.num_output_tuples() + ai]
    }

    pub fn get(&self, a: &[usize], x: &[usize]) -> &CMatrix {
        self.operator(self.scenario.output_index(a), self.scenario.input_index(x))
    }
}

fn check_angle(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= FRAC_PI_4 + 1e-12) {
        return Err(Error::OutOfRange(format!("angle {eta} outside (0, π/4]")));
    }
    Ok(())
}

/// (α, μ) with α = 2/√(1+2tan²2θ) and tan μ = sin 2θ.
pub fn tilted_bell_params(theta: f64) -> Result<(f64, f64)> {
    check_angle(theta)?;
    let alpha = if (theta - FRAC_PI_4).abs() < 1e-12 {
        0.0
    } else {
        let t = (2.0 * theta).tan();
        2.0 / (1.0 + 2.0 * t * t).sqrt()
    };
    Ok((alpha, (2.0 * theta).sin().atan()))
}

/// Bob's observables B₀ = cos μ σ_z + sin μ σ_x and B₁ = cos μ σ_z − sin μ σ_x.
fn bob_observables(mu: f64) -> (CMatrix, CMatrix) {
    let z = CMatrix::pauli_z().scale(mu.cos());
    let x = CMatrix::pauli_x().scale(mu.sin());
    (&z + &x, &z - &x)
}

/// S_η for one Alice with two binary inputs and a qubit Bob.
pub fn epr_functional_bipartite(eta: f64) -> Result<EprFunctional> {
    let (alpha, mu) = tilted_bell_params(eta)?;
    let (b0, b1) = bob_observables(mu);
    let f00 = &CMatrix::identity(2).scale(alpha) + &(&b0 + &b1);
    let f01 = &b0 - &b1;
    // Order: (a=0,x=0), (a=1,x=0), (a=0,x=1), (a=1,x=1).
    let ops = vec![f00.clone(), -&f00, f01.clone(), -&f01];
    let mut f = EprFunctional::new(Scenario::bipartite(2, 2, 2), ops)?;
    f.eta = eta;
    f.alpha = alpha;
    f.mu = mu;
    Ok(f)
}

/// S_η^(N) for N−1 Alices with binary inputs and outputs and a qubit Bob.
///
/// With c = cos 2η, n = √(1+c²), k = N−1 and B₀ = cos μ σ_z + sin μ σ_x,
/// B₁ = −cos μ σ_z + sin μ σ_x where sin μ = sin 2η/√2:
///
/// * x = 1…1: F_a = k(−1)^{Σa}(B₀+B₁) + (k c/n)(B₀−B₁);
/// * x with a single 0 at position i: F_a = ((−1)^{a_i}/n)(B₀−B₁);
/// * every other input tuple: F = 0.
pub fn epr_functional_multi(n_parties: usize, eta: f64) -> Result<EprFunctional> {
    if n_parties < 2 {
        return Err(Error::OutOfRange(format!("{n_parties} parties; at least 2 are required")));
    }
    check_angle(eta)?;
    let k = n_parties - 1;
    let mu = ((2.0 * eta).sin() / SQRT_2).asin();
    let c = (2.0 * eta).cos();
    let norm = (1.0 + c * c).sqrt();
    let z = CMatrix::pauli_z().scale(mu.cos());
    let x = CMatrix::pauli_x().scale(mu.sin());
    let b0 = &z + &x;
    let b1 = &x - &z;
    let sum = &b0 + &b1;
    let diff = &b0 - &b1;
    let s = Scenario::binary(k);
    let mut ops = Vec::with_capacity(s.num_elements());
    for xi in 0..s.num_input_tuples() {
        let xt = s.input_tuple(xi);
        let zeros: Vec<usize> = (0..k).filter(|&i| xt[i] == 0).collect();
        for ai in 0..s.num_output_tuples() {
            let at = s.output_tuple(ai);
            let op = match zeros.len() {
                0 => {
                    let sign = if at.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
                    &sum.scale(k as f64 * sign) + &diff.scale(k as f64 * c / norm)
                }
                1 => {
                    let sign = if at[zeros[0]] == 0 { 1.0 } else { -1.0 };
                    diff.scale(sign / norm)
                }
                _ => CMatrix::zeros(2, 2),
            };
            ops.push(op);
        }
    }
    let mut f = EprFunctional::new(s, ops)?;
    f.eta = eta;
    f.alpha = eta;
    f.mu = mu;
    Ok(f)
}

/// Tr Σ_{a,x} F_{a,x} σ_{a|x}.
pub fn evaluate(f: &EprFunctional, a: &Assemblage) -> Result<f64> {
    if f.scenario != *a.scenario() {
        return Err(Error::Scenario("functional and assemblage scenarios differ".into()));
    }
    Ok(f.operators.iter().zip(a.elements()).map(|(op, el)| op.trace_product(el).re).sum())
}

/// 2√2 √(1 + 1/(1+2tan²2η)), the quantum maximum of S_η.
pub fn quantum_max_bipartite(eta: f64) -> Result<f64> {
    let (alpha, _) = tilted_bell_params(eta)?;
    Ok(tilted_bell_quantum_max(alpha))
}

/// 2√2 (N−1), the quantum maximum of S_η^(N).
pub fn quantum_max_multi(n_parties: usize, eta: f64) -> Result<f64> {
    if n_parties < 2 {
        return Err(Error::OutOfRange(format!("{n_parties} parties; at least 2 are required")));
    }
    check_angle(eta)?;
    Ok(2.0 * SQRT_2 * (n_parties - 1) as f64)
}

/// Maximum of S over assemblages with a local-hidden-state model: the
/// largest eigenvalue of Σ_x F_{λ(x),x} over products of deterministic
/// responses λ.
pub fn lhs_bound(f: &EprFunctional) -> f64 {
    let s = &f.scenario;
    let n_a = s.num_output_tuples();
    product_response_tables(s)
        .iter()
        .map(|table| {
            let mut m = CMatrix::zeros(s.bob_dim, s.bob_dim);
            for (xi, &ai) in table.iter().enumerate() {
                m += &f.operators[xi * n_a + ai];
            }
            m.max_eigenvalue()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Expectation values entering the tilted CHSH expression.
#[derive(Clone, Copy, Debug, Default)]
pub struct TiltedBellCorrelations {
    pub a0: f64,
    pub a0b0: f64,
    pub a0b1: f64,
    pub a1b0: f64,
    pub a1b1: f64,
}

/// α⟨A₀⟩ + ⟨A₀B₀⟩ + ⟨A₀B₁⟩ + ⟨A₁B₀⟩ − ⟨A₁B₁⟩.
pub fn tilted_bell_value(alpha: f64, c: &TiltedBellCorrelations) -> f64 {
    alpha * c.a0 + c.a0b0 + c.a0b1 + c.a1b0 - c.a1b1
}

/// Local bound 2 + α of the tilted CHSH expression.
pub fn classical_bound(alpha: f64) -> f64 {
    2.0 + alpha
}

/// Quantum maximum √(8 + 2α²) of the tilted CHSH expression.
pub fn tilted_bell_quantum_max(alpha: f64) -> f64 {
    (8.0 + 2.0 * alpha * alpha).sqrt()
}

/// The two readings of the multipartite local bound: (N−1)√(1−cos 2α) as
/// printed and (N−1)√(1+cos²2α) with the normalisation √(1+cos²2α). Neither
/// is used as a verified bound.
pub fn classical_bound_multi_candidates(n_parties: usize, alpha: f64) -> (f64, f64) {
    let k = n_parties.saturating_sub(1) as f64;
    let c = (2.0 * alpha).cos();
    (k * (1.0 - c).sqrt(), k * (1.0 + c * c).sqrt())
}
