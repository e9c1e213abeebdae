//! Assemblages: collections of unnormalized conditional states σ_{a|x} of
//! Bob's system, one per outcome tuple a and input tuple x of the Alices.
//!
//! Tuples are stored as mixed-radix integers with Alice 1 as the most
//! significant digit. Elements live in a flat vector indexed by
//! `x_index * n_output_tuples + a_index`.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{decode, encode, partial_trace, tensor_all, CMatrix, C64, ZERO};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub n_alices: usize,
    pub n_inputs: Vec<usize>,
    pub n_outputs: Vec<usize>,
    pub bob_dim: usize,
}

impl Scenario {
    pub fn new(n_inputs: Vec<usize>, n_outputs: Vec<usize>, bob_dim: usize) -> Result<Self> {
        let s = Scenario { n_alices: n_inputs.len(), n_inputs, n_outputs, bob_dim };
        s.check()?;
        Ok(s)
    }

    /// One Alice with `n_inputs` inputs and `n_outputs` outputs.
    pub fn bipartite(n_inputs: usize, n_outputs: usize, bob_dim: usize) -> Self {
        Scenario { n_alices: 1, n_inputs: vec![n_inputs], n_outputs: vec![n_outputs], bob_dim }
    }

    /// `n_alices` Alices with binary inputs and outputs and a qubit Bob.
    pub fn binary(n_alices: usize) -> Self {
        Scenario { n_alices, n_inputs: vec![2; n_alices], n_outputs: vec![2; n_alices], bob_dim: 2 }
    }

    pub fn check(&self) -> Result<()> {
        if self.n_alices == 0 {
            return Err(Error::Scenario("at least one Alice is required".into()));
        }
        if self.n_inputs.len() != self.n_alices || self.n_outputs.len() != self.n_alices {
            return Err(Error::Scenario(format!(
                "{} Alices but {} input and {} output cardinalities",
                self.n_alices,
                self.n_inputs.len(),
                self.n_outputs.len()
            )));
        }
        if self.n_inputs.iter().chain(&self.n_outputs).any(|&n| n == 0) || self.bob_dim == 0 {
            return Err(Error::Scenario("cardinalities and Bob's dimension must be at least 1".into()));
        }
        Ok(())
    }

    pub fn num_input_tuples(&self) -> usize {
        self.n_inputs.iter().product()
    }

    pub fn num_output_tuples(&self) -> usize {
        self.n_outputs.iter().product()
    }

    pub fn num_elements(&self) -> usize {
        self.num_input_tuples() * self.num_output_tuples()
    }

    pub fn input_index(&self, x: &[usize]) -> usize {
        encode(x, &self.n_inputs)
    }

    pub fn output_index(&self, a: &[usize]) -> usize {
        encode(a, &self.n_outputs)
    }

    pub fn input_tuple(&self, xi: usize) -> Vec<usize> {
        decode(xi, &self.n_inputs)
    }

    pub fn output_tuple(&self, ai: usize) -> Vec<usize> {
        decode(ai, &self.n_outputs)
    }

    fn tuple_in_range(t: &[usize], radices: &[usize]) -> bool {
        t.len() == radices.len() && t.iter().zip(radices).all(|(v, r)| v < r)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assemblage {
    scenario: Scenario,
    elements: Vec<CMatrix>,
}

impl Assemblage {
    /// Wraps elements in canonical order. Checks shapes only; use
    /// [`validate`] for the physical invariants.
    pub fn new(scenario: Scenario, elements: Vec<CMatrix>) -> Result<Self> {
        scenario.check()?;
        if elements.len() != scenario.num_elements() {
            return Err(Error::InvalidAssemblage(format!(
                "expected {} elements, got {}",
                scenario.num_elements(),
                elements.len()
            )));
        }
        let d = scenario.bob_dim;
        if let Some(m) = elements.iter().find(|m| m.rows() != d || m.cols() != d) {
            return Err(Error::InvalidAssemblage(format!(
                "element of shape {}x{} in a scenario with Bob dimension {d}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(Assemblage { scenario, elements })
    }

    /// Builds an assemblage from a function of (output tuple, input tuple).
    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(&[usize], &[usize]) -> CMatrix) -> Result<Self> {
        scenario.check()?;
        let mut elements = Vec::with_capacity(scenario.num_elements());
        for xi in 0..scenario.num_input_tuples() {
            let x = scenario.input_tuple(xi);
            for ai in 0..scenario.num_output_tuples() {
                elements.push(f(&scenario.output_tuple(ai), &x));
            }
        }
        Self::new(scenario, elements)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn bob_dim(&self) -> usize {
        self.scenario.bob_dim
    }

    pub fn n_alices(&self) -> usize {
        self.scenario.n_alices
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    /// σ_{a|x} by integer tuple indices.
    pub fn element(&self, ai: usize, xi: usize) -> &CMatrix {
        &self.elements[xi * self.scenario.num_output_tuples() + ai]
    }

    /// σ_{a|x} by tuples.
    pub fn get(&self, a: &[usize], x: &[usize]) -> &CMatrix {
        self.element(self.scenario.output_index(a), self.scenario.input_index(x))
    }

    /// Σ_a σ_{a|x} for the given input tuple index.
    pub fn bob_marginal(&self, xi: usize) -> CMatrix {
        let d = self.bob_dim();
        let mut acc = CMatrix::zeros(d, d);
        for ai in 0..self.scenario.num_output_tuples() {
            acc += self.element(ai, xi);
        }
        acc
    }

    /// Bob's reduced state averaged over all input tuples.
    pub fn reduced_state(&self) -> CMatrix {
        let nx = self.scenario.num_input_tuples();
        let d = self.bob_dim();
        let mut acc = CMatrix::zeros(d, d);
        for xi in 0..nx {
            acc += &self.bob_marginal(xi);
        }
        acc.scale(1.0 / nx as f64)
    }

    /// Largest entrywise deviation between two assemblages of one scenario.
    pub fn max_abs_diff(&self, other: &Assemblage) -> Result<f64> {
        if self.scenario != other.scenario {
            return Err(Error::Scenario("assemblages have different scenarios".into()));
        }
        Ok(self
            .elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }

    /// Convex mixture `p·self + (1−p)·other`.
    pub fn mix(&self, other: &Assemblage, p: f64) -> Result<Assemblage> {
        if self.scenario != other.scenario {
            return Err(Error::Scenario("assemblages have different scenarios".into()));
        }
        let elements =
            self.elements.iter().zip(&other.elements).map(|(a, b)| &a.scale(p) + &b.scale(1.0 - p)).collect();
        Assemblage::new(self.scenario.clone(), elements)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_repr())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: AssemblageRepr = serde_json::from_str(s)?;
        Self::from_repr(repr)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    fn to_repr(&self) -> AssemblageRepr {
        let s = &self.scenario;
        let mut elements = Vec::with_capacity(self.elements.len());
        for xi in 0..s.num_input_tuples() {
            for ai in 0..s.num_output_tuples() {
                elements.push(ElementRepr {
                    a: s.output_tuple(ai),
                    x: s.input_tuple(xi),
                    matrix: self.element(ai, xi).clone(),
                });
            }
        }
        AssemblageRepr { scenario: s.clone(), elements }
    }

    fn from_repr(repr: AssemblageRepr) -> Result<Self> {
        let s = repr.scenario;
        s.check()?;
        let n_a = s.num_output_tuples();
        let mut slots: Vec<Option<CMatrix>> = vec![None; s.num_elements()];
        for e in repr.elements {
            if !Scenario::tuple_in_range(&e.a, &s.n_outputs) || !Scenario::tuple_in_range(&e.x, &s.n_inputs) {
                return Err(Error::InvalidAssemblage(format!("element a={:?} x={:?} out of range", e.a, e.x)));
            }
            let idx = s.input_index(&e.x) * n_a + s.output_index(&e.a);
            if slots[idx].replace(e.matrix).is_some() {
                return Err(Error::InvalidAssemblage(format!("duplicate element a={:?} x={:?}", e.a, e.x)));
            }
        }
        let mut elements = Vec::with_capacity(slots.len());
        for (idx, m) in slots.into_iter().enumerate() {
            match m {
                Some(m) => elements.push(m),
                None => {
                    return Err(Error::InvalidAssemblage(format!(
                        "missing element a={:?} x={:?}",
                        s.output_tuple(idx % n_a),
                        s.input_tuple(idx / n_a)
                    )))
                }
            }
        }
        Assemblage::new(s, elements)
    }
}

#[derive(Serialize, Deserialize)]
struct ElementRepr {
    a: Vec<usize>,
    x: Vec<usize>,
    matrix: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct AssemblageRepr {
    scenario: Scenario,
    elements: Vec<ElementRepr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    effects: Vec<CMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<CMatrix>, tol: f64) -> Result<Self> {
        let first = effects.first().ok_or_else(|| Error::InvalidPovm("no effects".into()))?;
        let n = first.rows();
        let mut sum = CMatrix::zeros(n, n);
        for (i, e) in effects.iter().enumerate() {
            if e.rows() != n || e.cols() != n {
                return Err(Error::InvalidPovm(format!("effect {i} has the wrong shape")));
            }
            if !e.is_psd(tol) {
                return Err(Error::InvalidPovm(format!("effect {i} is not positive semidefinite")));
            }
            sum += e;
        }
        let dev = sum.max_abs_diff(&CMatrix::identity(n));
        if dev > tol {
            return Err(Error::InvalidPovm(format!("effects sum to identity only within {dev:.3e}")));
        }
        Ok(Povm { effects })
    }

    /// Projective measurement of the ±1 eigenspaces of a qubit observable
    /// with eigenvalues ±1; outcome a projects onto eigenvalue (−1)^a.
    pub fn dichotomic(observable: &CMatrix) -> Self {
        let n = observable.rows();
        let id = CMatrix::identity(n);
        Povm {
            effects: vec![(&id + observable).scale(0.5), (&id - observable).scale(0.5)],
        }
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows()
    }

    pub fn n_outcomes(&self) -> usize {
        self.effects.len()
    }
}

fn check_state(rho: &CMatrix, dim: usize, tol: f64) -> Result<()> {
    if rho.rows() != dim || rho.cols() != dim {
        return Err(Error::Dimension(format!("state is {}x{}, expected dimension {dim}", rho.rows(), rho.cols())));
    }
    if !rho.is_psd(tol) {
        return Err(Error::InvalidState("state is not positive semidefinite".into()));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > tol {
        return Err(Error::InvalidState(format!("state has trace {}", tr.re)));
    }
    Ok(())
}

/// σ_{a|x} = tr_A[(M_{a|x} ⊗ I) ρ] for a single Alice.
pub fn realize_bipartite(rho: &CMatrix, alice_povms: &[Povm], bob_dim: usize) -> Result<Assemblage> {
    realize_multipartite(rho, &[alice_povms.to_vec()], bob_dim)
}

/// σ_{a₁…a_k|x₁…x_k} = tr_{A₁…A_k}[(M_{a₁|x₁} ⊗ … ⊗ M_{a_k|x_k} ⊗ I) ρ].
pub fn realize_multipartite(rho: &CMatrix, povms_per_alice: &[Vec<Povm>], bob_dim: usize) -> Result<Assemblage> {
    if povms_per_alice.is_empty() || povms_per_alice.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidPovm("every Alice needs at least one measurement".into()));
    }
    let mut dims = Vec::new();
    let mut n_outputs = Vec::new();
    for (i, povms) in povms_per_alice.iter().enumerate() {
        let d = povms[0].dim();
        let n = povms[0].n_outcomes();
        if povms.iter().any(|p| p.dim() != d || p.n_outcomes() != n) {
            return Err(Error::InvalidPovm(format!("Alice {} has measurements of differing shape", i + 1)));
        }
        dims.push(d);
        n_outputs.push(n);
    }
    let n_inputs: Vec<usize> = povms_per_alice.iter().map(Vec::len).collect();
    let alice_dim: usize = dims.iter().product();
    check_state(rho, alice_dim * bob_dim, 1e-9)?;
    let scenario = Scenario::new(n_inputs, n_outputs, bob_dim)?;
    let mut full_dims = dims.clone();
    full_dims.push(bob_dim);
    let bob = dims.len();
    let id_b = CMatrix::identity(bob_dim);
    Assemblage::from_fn(scenario, |a, x| {
        let mut factors: Vec<CMatrix> =
            (0..a.len()).map(|i| povms_per_alice[i][x[i]].effects()[a[i]].clone()).collect();
        factors.push(id_b.clone());
        let op = tensor_all(&factors);
        partial_trace(&(&op * rho), &full_dims, &[bob]).expect("dimensions checked").hermitize()
    })
}

fn check_angle(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= FRAC_PI_4 + 1e-12) {
        return Err(Error::OutOfRange(format!("angle {theta} outside (0, π/4]")));
    }
    Ok(())
}

/// σ_z measurement for input 0 and σ_x measurement for input 1.
pub fn zx_measurements() -> Vec<Povm> {
    vec![Povm::dichotomic(&CMatrix::pauli_z()), Povm::dichotomic(&CMatrix::pauli_x())]
}

/// cosθ|0…0⟩ + sinθ|1…1⟩ on `n` qubits.
pub fn ghz_state(n: usize, theta: f64) -> CMatrix {
    let dim = 1 << n;
    let mut v = vec![ZERO; dim];
    v[0] = C64::new(theta.cos(), 0.0);
    v[dim - 1] = C64::new(theta.sin(), 0.0);
    CMatrix::outer(&v, &v)
}

/// p·σ^θ_{a|x} + (1−p)·I/4, with σ^θ obtained from cosθ|00⟩ + sinθ|11⟩
/// measured in the σ_z (x=0) and σ_x (x=1) bases.
pub fn family_s(theta: f64, p: f64) -> Result<Assemblage> {
    check_angle(theta)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("mixing weight {p} outside [0, 1]")));
    }
    let pure = realize_bipartite(&ghz_state(2, theta), &zx_measurements(), 2)?;
    let noise = CMatrix::identity(2).scale(0.25);
    Assemblage::from_fn(pure.scenario().clone(), |a, x| &pure.get(a, x).scale(p) + &noise.scale(1.0 - p))
}

/// The N-party GHZ-like family: N−1 Alices measuring σ_z (x=0) or σ_x (x=1)
/// on cosθ|0⟩^⊗N + sinθ|1⟩^⊗N, with Bob holding the last qubit.
pub fn family_ghz(n_parties: usize, theta: f64) -> Result<Assemblage> {
    if n_parties < 2 {
        return Err(Error::OutOfRange(format!("{n_parties} parties; at least 2 are required")));
    }
    check_angle(theta)?;
    let povms = vec![zx_measurements(); n_parties - 1];
    realize_multipartite(&ghz_state(n_parties, theta), &povms, 2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueKind {
    NotHermitian,
    NotPositive,
    Normalization,
    NoSignalling,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub detail: String,
    pub deviation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, kind: IssueKind) -> bool {
        self.issues.iter().any(|i| i.kind == kind)
    }

    pub fn max_deviation(&self, kind: IssueKind) -> Option<f64> {
        self.issues.iter().filter(|i| i.kind == kind).map(|i| i.deviation).reduce(f64::max)
    }
}

/// Checks positivity, normalization and no-signalling. No-signalling is
/// checked one Alice at a time: summing out Alice i's outcome must give a
/// result independent of her input, which implies the same for every subset.
pub fn validate(a: &Assemblage, tol: f64) -> ValidationReport {
    let s = a.scenario();
    let mut issues = Vec::new();
    for xi in 0..s.num_input_tuples() {
        for ai in 0..s.num_output_tuples() {
            let m = a.element(ai, xi);
            let label = format!("a={:?} x={:?}", s.output_tuple(ai), s.input_tuple(xi));
            let dev = m.hermitian_deviation();
            if dev > tol {
                issues.push(Issue { kind: IssueKind::NotHermitian, detail: label, deviation: dev });
                continue;
            }
            let min = m.min_eigenvalue();
            if min < -tol {
                issues.push(Issue { kind: IssueKind::NotPositive, detail: label, deviation: -min });
            }
        }
        let total: f64 = (0..s.num_output_tuples()).map(|ai| a.element(ai, xi).trace().re).sum();
        let dev = (total - 1.0).abs();
        if dev > tol {
            issues.push(Issue {
                kind: IssueKind::Normalization,
                detail: format!("x={:?}: total trace {total}", s.input_tuple(xi)),
                deviation: dev,
            });
        }
    }
    for alice in 0..s.n_alices {
        let mut worst = 0.0f64;
        let mut where_ = String::new();
        for xi in 0..s.num_input_tuples() {
            let x = s.input_tuple(xi);
            if x[alice] != 0 {
                continue;
            }
            for ai in 0..s.num_output_tuples() {
                let a_t = s.output_tuple(ai);
                if a_t[alice] != 0 {
                    continue;
                }
                let marginal = |xa: usize| {
                    let mut xx = x.clone();
                    xx[alice] = xa;
                    let mut acc = CMatrix::zeros(s.bob_dim, s.bob_dim);
                    for o in 0..s.n_outputs[alice] {
                        let mut aa = a_t.clone();
                        aa[alice] = o;
                        acc += a.get(&aa, &xx);
                    }
                    acc
                };
                let base = marginal(0);
                for xa in 1..s.n_inputs[alice] {
                    let dev = marginal(xa).max_abs_diff(&base);
                    if dev > worst {
                        worst = dev;
                        where_ = format!("Alice {} input {xa} vs 0 at a={a_t:?} x={x:?}", alice + 1);
                    }
                }
            }
        }
        if worst > tol {
            issues.push(Issue { kind: IssueKind::NoSignalling, detail: where_, deviation: worst });
        }
    }
    ValidationReport { issues }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ket(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn family_s_pi4_elements() {
        let a = family_s(PI / 4.0, 1.0).unwrap();
        assert!(a.get(&[0], &[0]).max_abs_diff(&CMatrix::diag(&[0.5, 0.0])) < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = CMatrix::outer(&ket(&[h, h]), &ket(&[h, h])).scale(0.5);
        assert!(a.get(&[0], &[1]).max_abs_diff(&plus) < 1e-15);
        assert!(validate(&a, 1e-12).is_valid());
    }

    #[test]
    fn family_s_noise_and_mixture() {
        let a = family_s(0.3, 0.0).unwrap();
        for m in a.elements() {
            assert!(m.max_abs_diff(&CMatrix::identity(2).scale(0.25)) < 1e-15);
        }
        let t = PI / 6.0;
        let a = family_s(t, 0.9).unwrap();
        let want = &CMatrix::diag(&[0.9 * t.cos().powi(2), 0.0]) + &CMatrix::identity(2).scale(0.025);
        assert!(a.get(&[0], &[0]).max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn family_s_rejects_out_of_range() {
        assert!(family_s(0.0, 0.5).is_err());
        assert!(family_s(1.0, 0.5).is_err());
        assert!(family_s(0.5, 1.1).is_err());
        assert!(family_ghz(1, 0.5).is_err());
    }

    #[test]
    fn maximally_mixed_state_factorizes() {
        let rho = CMatrix::identity(4).scale(0.25);
        let povm = Povm::new(vec![CMatrix::diag(&[0.7, 0.2]), CMatrix::diag(&[0.3, 0.8])], 1e-12).unwrap();
        let a = realize_bipartite(&rho, std::slice::from_ref(&povm), 2).unwrap();
        for o in 0..2 {
            let p = povm.effects()[o].trace().re / 2.0;
            assert!(a.get(&[o], &[0]).max_abs_diff(&CMatrix::identity(2).scale(p / 2.0)) < 1e-15);
        }
    }

    #[test]
    fn ghz3_elements() {
        let a = family_ghz(3, PI / 4.0).unwrap();
        assert!(a.get(&[0, 0], &[0, 0]).max_abs_diff(&CMatrix::diag(&[0.5, 0.0])) < 1e-15);
        assert!(a.get(&[1, 1], &[0, 0]).max_abs_diff(&CMatrix::diag(&[0.0, 0.5])) < 1e-15);
        assert!(a.get(&[0, 1], &[0, 0]).max_abs() < 1e-15);
        assert!(a.get(&[1, 0], &[0, 0]).max_abs() < 1e-15);
        for ai in 0..4 {
            assert!((a.element(ai, 3).trace().re - 0.25).abs() < 1e-15);
        }
        assert!(validate(&a, 1e-12).is_valid());
    }

    #[test]
    fn separable_state_gives_maximally_mixed_elements() {
        let rho = CMatrix::identity(8).scale(0.125);
        let a = realize_multipartite(&rho, &[zx_measurements(), zx_measurements()], 2).unwrap();
        for m in a.elements() {
            assert!(m.max_abs_diff(&CMatrix::identity(2).scale(m.trace().re / 2.0)) < 1e-15);
        }
    }

    #[test]
    fn ghz2_equals_family_s() {
        for i in 1..=20 {
            let t = PI / 4.0 * i as f64 / 20.0;
            let g = family_ghz(2, t).unwrap();
            let s = family_s(t, 1.0).unwrap();
            assert!(g.max_abs_diff(&s).unwrap() < 1e-12);
        }
    }

    #[test]
    fn family_grid_validates() {
        for i in 1..=20 {
            let t = PI / 4.0 * i as f64 / 20.0;
            for j in 0..5 {
                let a = family_s(t, j as f64 / 4.0).unwrap();
                assert!(validate(&a, 1e-10).is_valid());
            }
        }
    }

    #[test]
    fn realize_reductions_match_partial_trace() {
        let rho = ghz_state(2, 0.4);
        let a = realize_bipartite(&rho, &zx_measurements(), 2).unwrap();
        let rb = partial_trace(&rho, &[2, 2], &[1]).unwrap();
        for xi in 0..2 {
            assert!(a.bob_marginal(xi).max_abs_diff(&rb) < 1e-10);
        }
    }

    #[test]
    fn realize_rejects_bad_inputs() {
        let rho = ghz_state(2, 0.4);
        assert!(realize_bipartite(&rho, &zx_measurements(), 3).is_err());
        assert!(realize_bipartite(&rho.scale(2.0), &zx_measurements(), 2).is_err());
        assert!(Povm::new(vec![CMatrix::diag(&[1.0, 0.5])], 1e-9).is_err());
        assert!(Povm::new(vec![CMatrix::diag(&[1.5, 1.0]), CMatrix::diag(&[-0.5, 0.0])], 1e-9).is_err());
    }

    #[test]
    fn validate_flags_defects() {
        let a = family_s(PI / 4.0, 1.0).unwrap();
        let mut el = a.elements().to_vec();
        el[0] = el[0].scale(1.1);
        let bad = Assemblage::new(a.scenario().clone(), el).unwrap();
        let rep = validate(&bad, 1e-9);
        let dev = rep.max_deviation(IssueKind::Normalization).unwrap();
        assert!((dev - 0.1 * a.element(0, 0).trace().re).abs() < 1e-12);

        let mut el = a.elements().to_vec();
        el[0] = CMatrix::diag(&[0.6, 0.0]);
        el[1] = CMatrix::diag(&[0.0, 0.4]);
        let bad = Assemblage::new(a.scenario().clone(), el).unwrap();
        let rep = validate(&bad, 1e-9);
        assert!(rep.has(IssueKind::NoSignalling));
        assert!(!rep.has(IssueKind::Normalization));

        let mut el = a.elements().to_vec();
        el[0] = CMatrix::diag(&[0.6, -0.1]);
        let bad = Assemblage::new(a.scenario().clone(), el).unwrap();
        assert!(validate(&bad, 1e-9).has(IssueKind::NotPositive));
    }

    #[test]
    fn json_round_trip() {
        let a = family_ghz(3, 0.37).unwrap();
        let back = Assemblage::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a.scenario(), back.scenario());
        for (x, y) in a.elements().iter().zip(back.elements()) {
            for (p, q) in x.data().iter().zip(y.data()) {
                assert_eq!(p.re.to_bits(), q.re.to_bits());
                assert_eq!(p.im.to_bits(), q.im.to_bits());
            }
        }
    }

    #[test]
    fn json_rejects_incomplete_maps() {
        let a = family_s(0.5, 1.0).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        let els = v["elements"].as_array_mut().unwrap();
        els.pop();
        assert!(Assemblage::from_json(&v.to_string()).is_err());
        let els = v["elements"].as_array_mut().unwrap();
        let dup = els[0].clone();
        els.push(dup);
        assert!(Assemblage::from_json(&v.to_string()).is_err());
    }
}
