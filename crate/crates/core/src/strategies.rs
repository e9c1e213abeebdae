//! Deterministic objects indexing the hidden variable λ: local combs for LOSR
//! transformations, response functions for LHS models, and one-way
//! signalling strategies for time-ordered models.
//!
//! Tables are enumerated lexicographically with the first table entry as the
//! most significant digit; for combs the input table precedes the output
//! table. The output table of a comb is indexed by `a * |X'| + x'`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assemblages::Scenario;
use crate::error::{Error, Result};
use crate::qcore::decode;

/// All functions from a domain of size `domain` into `0..codomain`, in
/// lexicographic order.
fn all_tables(domain: usize, codomain: usize) -> Vec<Vec<usize>> {
    let count = codomain.pow(domain as u32);
    (0..count).map(|i| decode(i, &vec![codomain; domain])).collect()
}

/// g: X′ → X and f: A × X′ → A′ for one Alice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetComb {
    pub input_map: Vec<usize>,
    pub output_map: Vec<usize>,
}

impl DetComb {
    pub fn g(&self, x_new: usize) -> usize {
        self.input_map[x_new]
    }

    pub fn f(&self, a: usize, x_new: usize) -> usize {
        self.output_map[a * self.input_map.len() + x_new]
    }

    /// p′(a′|x′) = Σ_a δ_{a′,f(a,x′)} p(a|g(x′)), with `p[x][a]`.
    pub fn apply(&self, p: &[Vec<f64>], n_out: usize) -> Vec<Vec<f64>> {
        let nx_new = self.input_map.len();
        (0..nx_new)
            .map(|xn| {
                let mut row = vec![0.0; n_out];
                for (a, &pa) in p[self.g(xn)].iter().enumerate() {
                    row[self.f(a, xn)] += pa;
                }
                row
            })
            .collect()
    }
}

impl fmt::Display for DetComb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "g:[{}];f:[{}]", join(&self.input_map), join(&self.output_map))
    }
}

impl FromStr for DetComb {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::OutOfRange(format!("malformed comb encoding {s:?}"));
        let (g, f) = s.split_once(';').ok_or_else(bad)?;
        let table = |part: &str, prefix: &str| -> Result<Vec<usize>> {
            let inner = part
                .strip_prefix(prefix)
                .and_then(|p| p.strip_prefix('['))
                .and_then(|p| p.strip_suffix(']'))
                .ok_or_else(bad)?;
            if inner.is_empty() {
                return Ok(Vec::new());
            }
            inner.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect()
        };
        Ok(DetComb { input_map: table(g, "g:")?, output_map: table(f, "f:")? })
    }
}

/// Cardinalities of a one-Alice comb space (|X|,|A|) → (|X′|,|A′|).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CombSpace {
    pub n_in: usize,
    pub n_out: usize,
    pub n_in_new: usize,
    pub n_out_new: usize,
}

impl CombSpace {
    pub fn new(from: (usize, usize), to: (usize, usize)) -> Self {
        CombSpace { n_in: from.0, n_out: from.1, n_in_new: to.0, n_out_new: to.1 }
    }

    fn n_output_tables(&self) -> usize {
        self.n_out_new.pow((self.n_out * self.n_in_new) as u32)
    }

    pub fn len(&self) -> usize {
        self.n_in.pow(self.n_in_new as u32) * self.n_output_tables()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The comb at position `index` of the enumeration.
    pub fn comb(&self, index: usize) -> DetComb {
        let nf = self.n_output_tables();
        DetComb {
            input_map: decode(index / nf, &vec![self.n_in; self.n_in_new]),
            output_map: decode(index % nf, &vec![self.n_out_new; self.n_out * self.n_in_new]),
        }
    }
}

/// Every deterministic comb (|X|,|A|) → (|X′|,|A′|):
/// |X|^{|X′|} · |A′|^{|A|·|X′|} of them.
pub fn enumerate_combs(from: (usize, usize), to: (usize, usize)) -> Vec<DetComb> {
    let space = CombSpace::new(from, to);
    (0..space.len()).map(|i| space.comb(i)).collect()
}

/// r: X → A.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetResponse {
    pub outputs: Vec<usize>,
}

impl DetResponse {
    pub fn r(&self, x: usize) -> usize {
        self.outputs[x]
    }
}

/// All |A|^{|X|} deterministic responses.
pub fn enumerate_responses(n_inputs: usize, n_outputs: usize) -> Vec<DetResponse> {
    all_tables(n_inputs, n_outputs).into_iter().map(|outputs| DetResponse { outputs }).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Alice 1 acts first: a₁ = f(x₁), a₂ = g(x₁, x₂).
    FirstToSecond,
    /// Alice 2 acts first: a₂ = f(x₂), a₁ = g(x₂, x₁).
    SecondToFirst,
}

/// One-way signalling strategy between two Alices. `leader[x_lead]` gives
/// the leading Alice's output; `follower[x_lead * n_follow + x_follow]` the
/// other's.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetSignalling {
    pub direction: Direction,
    pub leader: Vec<usize>,
    pub follower: Vec<usize>,
}

impl DetSignalling {
    /// (a₁, a₂) for inputs (x₁, x₂).
    pub fn outcome(&self, x1: usize, x2: usize) -> (usize, usize) {
        let n_lead = self.leader.len();
        let n_follow = self.follower.len() / n_lead;
        match self.direction {
            Direction::FirstToSecond => (self.leader[x1], self.follower[x1 * n_follow + x2]),
            Direction::SecondToFirst => (self.follower[x2 * n_follow + x1], self.leader[x2]),
        }
    }
}

/// All one-way signalling strategies in the given direction: for
/// `FirstToSecond` there are |A₁|^{|X₁|} · |A₂|^{|X₁|·|X₂|}.
pub fn enumerate_signalling(
    n_x1: usize,
    n_a1: usize,
    n_x2: usize,
    n_a2: usize,
    direction: Direction,
) -> Vec<DetSignalling> {
    let (nx_lead, na_lead, nx_follow, na_follow) = match direction {
        Direction::FirstToSecond => (n_x1, n_a1, n_x2, n_a2),
        Direction::SecondToFirst => (n_x2, n_a2, n_x1, n_a1),
    };
    let followers = all_tables(nx_lead * nx_follow, na_follow);
    let mut out = Vec::new();
    for leader in all_tables(nx_lead, na_lead) {
        for follower in &followers {
            out.push(DetSignalling { direction, leader: leader.clone(), follower: follower.clone() });
        }
    }
    out
}

/// A deterministic joint strategy of all Alices as a table from input-tuple
/// index to output-tuple index (mixed-radix, Alice 1 most significant).
pub type JointTable = Vec<usize>;

/// Products of independent per-Alice responses.
pub fn product_response_tables(s: &Scenario) -> Vec<JointTable> {
    let per_alice: Vec<Vec<DetResponse>> =
        (0..s.n_alices).map(|i| enumerate_responses(s.n_inputs[i], s.n_outputs[i])).collect();
    let counts: Vec<usize> = per_alice.iter().map(Vec::len).collect();
    let total: usize = counts.iter().product();
    (0..total)
        .map(|li| {
            let choice = decode(li, &counts);
            (0..s.num_input_tuples())
                .map(|xi| {
                    let x = s.input_tuple(xi);
                    let a: Vec<usize> = (0..s.n_alices).map(|i| per_alice[i][choice[i]].r(x[i])).collect();
                    s.output_index(&a)
                })
                .collect()
        })
        .collect()
}

/// Every function from input tuples to output tuples.
pub fn joint_response_tables(s: &Scenario) -> Vec<JointTable> {
    all_tables(s.num_input_tuples(), s.num_output_tuples())
}

/// One-way signalling strategies of two Alices as joint tables.
pub fn signalling_tables(s: &Scenario, direction: Direction) -> Result<Vec<JointTable>> {
    if s.n_alices != 2 {
        return Err(Error::Scenario(format!(
            "time-ordered strategies need exactly two Alices, got {}",
            s.n_alices
        )));
    }
    let strategies = enumerate_signalling(s.n_inputs[0], s.n_outputs[0], s.n_inputs[1], s.n_outputs[1], direction);
    Ok(strategies
        .iter()
        .map(|st| {
            (0..s.num_input_tuples())
                .map(|xi| {
                    let x = s.input_tuple(xi);
                    let (a1, a2) = st.outcome(x[0], x[1]);
                    s.output_index(&[a1, a2])
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn comb_counts() {
        assert_eq!(enumerate_combs((2, 2), (2, 2)).len(), 64);
        assert_eq!(enumerate_combs((1, 1), (1, 1)).len(), 1);
        assert_eq!(enumerate_combs((2, 2), (1, 2)).len(), 8);
        assert_eq!(enumerate_combs((3, 2), (2, 3)).len(), 9 * 81);
    }

    #[test]
    fn comb_order_is_lexicographic() {
        let combs = enumerate_combs((2, 2), (2, 2));
        assert_eq!(combs[0].to_string(), "g:[0,0];f:[0,0,0,0]");
        assert_eq!(combs[1].to_string(), "g:[0,0];f:[0,0,0,1]");
        assert_eq!(combs[16].to_string(), "g:[0,1];f:[0,0,0,0]");
        assert_eq!(combs[63].to_string(), "g:[1,1];f:[1,1,1,1]");
    }

    #[test]
    fn identity_comb_exists() {
        let combs = enumerate_combs((2, 2), (2, 2));
        let id = combs.iter().position(|c| (0..2).all(|x| c.g(x) == x) && (0..2).all(|a| (0..2).all(|x| c.f(a, x) == a)));
        assert_eq!(id, Some(19));
    }

    #[test]
    fn encoding_round_trip() {
        for c in enumerate_combs((2, 2), (2, 3)) {
            assert_eq!(c.to_string().parse::<DetComb>().unwrap(), c);
        }
        assert!("g:[0];x:[1]".parse::<DetComb>().is_err());
        assert!("nonsense".parse::<DetComb>().is_err());
    }

    #[test]
    fn no_duplicates() {
        let combs = enumerate_combs((2, 2), (2, 2));
        let set: HashSet<String> = combs.iter().map(|c| c.to_string()).collect();
        assert_eq!(set.len(), combs.len());
        let resp = enumerate_responses(3, 2);
        let set: HashSet<_> = resp.iter().cloned().collect();
        assert_eq!(set.len(), resp.len());
        let sig = enumerate_signalling(2, 2, 2, 2, Direction::FirstToSecond);
        let set: HashSet<_> = sig.iter().cloned().collect();
        assert_eq!(set.len(), sig.len());
    }

    #[test]
    fn response_counts() {
        assert_eq!(enumerate_responses(2, 2).len(), 4);
        assert_eq!(enumerate_responses(1, 3).len(), 3);
        assert_eq!(enumerate_responses(3, 2).len(), 8);
    }

    #[test]
    fn signalling_counts_and_direction() {
        let fwd = enumerate_signalling(2, 2, 2, 2, Direction::FirstToSecond);
        let bwd = enumerate_signalling(2, 2, 2, 2, Direction::SecondToFirst);
        assert_eq!(fwd.len(), 64);
        assert_eq!(bwd.len(), 64);
        assert_eq!(enumerate_signalling(1, 2, 3, 2, Direction::FirstToSecond).len(), 2 * 8);
        for s in &fwd {
            for x1 in 0..2 {
                assert_eq!(s.outcome(x1, 0).0, s.outcome(x1, 1).0);
            }
        }
        for s in &bwd {
            for x2 in 0..2 {
                assert_eq!(s.outcome(0, x2).1, s.outcome(1, x2).1);
            }
        }
    }

    #[test]
    fn joint_table_counts() {
        let s = Scenario::binary(2);
        assert_eq!(product_response_tables(&s).len(), 16);
        assert_eq!(joint_response_tables(&s).len(), 256);
        assert_eq!(signalling_tables(&s, Direction::FirstToSecond).unwrap().len(), 64);
        assert!(signalling_tables(&Scenario::binary(3), Direction::FirstToSecond).is_err());
        let prod: HashSet<_> = product_response_tables(&s).into_iter().collect();
        let sig: HashSet<_> = signalling_tables(&s, Direction::SecondToFirst).unwrap().into_iter().collect();
        assert!(prod.is_subset(&sig));
    }

    proptest! {
        #[test]
        fn comb_apply_gives_distribution(
            idx in 0usize..64,
            raw in proptest::collection::vec(0.01f64..1.0, 4),
        ) {
            let p: Vec<Vec<f64>> = (0..2).map(|x| {
                let s = raw[2 * x] + raw[2 * x + 1];
                vec![raw[2 * x] / s, raw[2 * x + 1] / s]
            }).collect();
            let comb = CombSpace::new((2, 2), (2, 2)).comb(idx);
            let q = comb.apply(&p, 2);
            for row in q {
                prop_assert!(row.iter().all(|&v| v >= 0.0));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
}
