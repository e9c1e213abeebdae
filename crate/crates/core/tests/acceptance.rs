//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines are printed in order and
//! appear in the test log. Exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};
use std::time::Instant;

use nalgebra::SymmetricEigen;
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

use steerconv::assemblages::{family_ghz, family_s, ghz_state, realize_multipartite, Povm};
use steerconv::conversion::{decide_conversion, decide_conversion_multi, preorder_graph, PreorderGraph, SweepOptions};
use steerconv::freeness::{is_free_bipartite, is_general_lhs_multi, is_losr_free_multi, is_tolhs_multi};
use steerconv::functionals::{epr_functional_bipartite, epr_functional_multi, evaluate};
use steerconv::locc::{appendix_f_deterministic, appendix_f_stochastic, apply_1wlocc};
use steerconv::monotones::{epr_robustness, epr_weight, yield_monotone};
use steerconv::qcore::{real_embed, C64};
use steerconv::{Assemblage, CMatrix, Feasibility, Scenario, SdpSettings};

const SLACK_TOL: f64 = 1e-6;
const VALUE_TOL: f64 = 1e-9;
const GAP_TOL: f64 = 1e-6;
const MONOTONE_TOL: f64 = 1e-5;
const LOCC_TOL: f64 = 1e-10;
const PROB_TOL: f64 = 1e-12;
const REPLAY_TOL: f64 = 1e-6;
const EMBED_TOL: f64 = 1e-10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn settings() -> SdpSettings {
    SdpSettings::default()
}

const THETAS: [(&str, f64); 3] = [("pi/12", PI / 12.0), ("pi/6", PI / 6.0), ("pi/4", PI / 4.0)];
const PS: [f64; 3] = [0.8, 0.9, 1.0];

fn node(t: usize, p: usize) -> String {
    format!("S({},{:.1})", THETAS[t].0, PS[p])
}

fn nine() -> Vec<(String, Assemblage)> {
    let mut out = Vec::new();
    for (t, &(_, theta)) in THETAS.iter().enumerate() {
        for (p, &vis) in PS.iter().enumerate() {
            out.push((node(t, p), family_s(theta, vis).unwrap()));
        }
    }
    out
}

/// Arrows drawn in the reference diagram, as (θ index, p index) pairs.
fn drawn_arrows() -> Vec<(String, String)> {
    let mut v = vec![
        (node(2, 2), node(0, 1)),
        (node(2, 2), node(1, 0)),
        (node(1, 2), node(2, 1)),
        (node(0, 2), node(1, 0)),
        (node(2, 1), node(1, 0)),
        (node(1, 1), node(0, 1)),
        (node(1, 1), node(2, 0)),
        (node(1, 0), node(0, 0)),
        (node(2, 0), node(0, 0)),
    ];
    for t in 0..3 {
        for hi in 0..3 {
            for lo in 0..hi {
                v.push((node(t, hi), node(t, lo)));
            }
        }
    }
    v
}

fn criterion_1(g: &PreorderGraph, sweep_secs: f64) -> Outcome {
    let slack: BTreeMap<(String, String), Option<f64>> =
        g.edges.iter().map(|e| ((e.src.clone(), e.dst.clone()), e.slack)).collect();
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (a, b) in drawn_arrows() {
        match slack.get(&(a.clone(), b.clone())) {
            Some(Some(s)) if *s <= SLACK_TOL => worst = worst.max(*s),
            other => failures.push(format!("{a}->{b} not feasible ({other:?})")),
        }
    }
    let mut absences = Vec::new();
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                absences.push((node(a, 2), node(b, 2)));
            }
        }
    }
    absences.push((node(0, 2), node(2, 1)));
    for (a, b) in &absences {
        if g.pair(a, b) != Some(Feasibility::Infeasible) {
            failures.push(format!("{a}->{b} not infeasible ({:?})", g.pair(a, b)));
        }
    }
    for e in &g.edges {
        if g.has_edge(&e.dst, &e.src) {
            failures.push(format!("two-way pair {} <-> {}", e.src, e.dst));
        }
    }
    if !g.indeterminate.is_empty() {
        failures.push(format!("{} indeterminate pairs", g.indeterminate.len()));
    }
    let min_bound = g.infeasible.iter().map(|p| p.lower_bound).fold(f64::INFINITY, f64::min);
    outcome(
        failures.is_empty(),
        format!(
            "{} drawn arrows feasible (max slack {worst:.1e}), {} absences infeasible (min dual bound {min_bound:.1e}), {} edges total, {} undrawn feasible pairs recorded, 72-pair sweep {sweep_secs:.1}s{}",
            drawn_arrows().len(),
            absences.len(),
            g.edges.len(),
            g.edges.len() - drawn_arrows().len(),
            if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut failures = Vec::new();
    let mut indeterminate = 0;
    let mut check = |label: String, a: Assemblage, expect_free: bool| {
        let d = is_free_bipartite(&a, &settings()).unwrap();
        if d.verdict == Feasibility::Indeterminate {
            indeterminate += 1;
        }
        let want = if expect_free { Feasibility::Feasible } else { Feasibility::Infeasible };
        if d.verdict != want {
            failures.push(format!("{label}: {} (slack {:.1e}, bound {:.1e})", d.verdict, d.slack, d.lower_bound));
        }
    };
    check("S(pi/12,0.8)".into(), family_s(PI / 12.0, 0.8).unwrap(), true);
    for (label, theta) in THETAS {
        check(format!("S({label},1)"), family_s(theta, 1.0).unwrap(), false);
    }
    for theta in [0.05, PI / 12.0, PI / 6.0, 0.6, PI / 4.0] {
        check(format!("S({theta:.4},0)"), family_s(theta, 0.0).unwrap(), true);
    }
    outcome(
        failures.is_empty() && indeterminate == 0,
        format!("9 freeness verdicts, {indeterminate} indeterminate{}", if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }),
    )
}

fn criterion_3() -> Outcome {
    let grid: Vec<f64> = (1..=20).map(|i| FRAC_PI_4 * i as f64 / 20.0).collect();
    let mut max_err = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for &eta in &grid {
        let f = epr_functional_bipartite(eta).unwrap();
        let t = (2.0 * eta).tan();
        let formula = if (eta - FRAC_PI_4).abs() < 1e-12 {
            2.0 * SQRT_2
        } else {
            2.0 * SQRT_2 * (1.0 + 1.0 / (1.0 + 2.0 * t * t)).sqrt()
        };
        max_err = max_err.max((evaluate(&f, &family_s(eta, 1.0).unwrap()).unwrap() - formula).abs());
        for &theta in &grid {
            if theta != eta {
                min_gap = min_gap.min(formula - evaluate(&f, &family_s(theta, 1.0).unwrap()).unwrap());
            }
        }
    }
    let mut multi_err = 0.0f64;
    for &eta in &grid {
        let v = evaluate(&epr_functional_multi(3, eta).unwrap(), &family_ghz(3, eta).unwrap()).unwrap();
        multi_err = multi_err.max((v - 4.0 * SQRT_2).abs());
    }
    outcome(
        max_err <= VALUE_TOL && min_gap >= GAP_TOL && multi_err <= VALUE_TOL,
        format!("bipartite max error {max_err:.1e}, smallest off-member gap {min_gap:.1e}, tripartite max error {multi_err:.1e}"),
    )
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let mut min_bound = f64::INFINITY;
    let grid = [PI / 16.0, PI / 8.0, 3.0 * PI / 16.0, PI / 4.0];
    for &a in &grid {
        for &b in &grid {
            if a == b {
                continue;
            }
            let d = decide_conversion(&family_s(a, 1.0).unwrap(), &family_s(b, 1.0).unwrap(), &settings()).unwrap();
            min_bound = min_bound.min(d.lower_bound);
            if d.verdict != Feasibility::Infeasible {
                failures.push(format!("S({a:.4},1)->S({b:.4},1): {}", d.verdict));
            }
        }
    }
    let start = Instant::now();
    let ghz_grid = [PI / 8.0, 3.0 * PI / 16.0, PI / 4.0];
    let mut min_multi = f64::INFINITY;
    for &a in &ghz_grid {
        for &b in &ghz_grid {
            if a == b {
                continue;
            }
            let d = decide_conversion_multi(&family_ghz(3, a).unwrap(), &family_ghz(3, b).unwrap(), &settings()).unwrap();
            min_multi = min_multi.min(d.lower_bound);
            if d.verdict != Feasibility::Infeasible {
                failures.push(format!("GHZ({a:.4})->GHZ({b:.4}): {}", d.verdict));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "12 bipartite pairs infeasible (min dual bound {min_bound:.1e}), 6 tripartite pairs infeasible (min dual bound {min_multi:.1e}, {:.0}s){}",
            start.elapsed().as_secs_f64(),
            if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }
        ),
    )
}

fn criterion_5(g: &PreorderGraph, fam: &[(String, Assemblage)]) -> Outcome {
    let mut values: BTreeMap<&str, [f64; 3]> = BTreeMap::new();
    let mut failures = Vec::new();
    for (name, a) in fam {
        let w = epr_weight(a, &settings()).unwrap();
        let r = epr_robustness(a, &settings()).unwrap();
        let y = yield_monotone(a, PI / 4.0, &settings()).unwrap();
        for m in [&w, &r, &y] {
            if m.status != Feasibility::Feasible {
                failures.push(format!("{name}: monotone solve {}", m.status));
            }
        }
        values.insert(name, [w.value, r.value, y.value]);
    }
    let labels = ["weight", "robustness", "yield(pi/4)"];
    for e in &g.edges {
        let (a, b) = (values[e.src.as_str()], values[e.dst.as_str()]);
        for k in 0..3 {
            if a[k] < b[k] - MONOTONE_TOL {
                failures.push(format!("{} increases along {}->{}: {} -> {}", labels[k], e.src, e.dst, a[k], b[k]));
            }
        }
    }
    let mut crossings = 0;
    for &(_, t1) in &THETAS {
        for &(_, t2) in &THETAS {
            if t1 == t2 {
                continue;
            }
            let own = yield_monotone(&family_s(t1, 1.0).unwrap(), t1, &settings()).unwrap().value;
            let other = yield_monotone(&family_s(t2, 1.0).unwrap(), t1, &settings()).unwrap().value;
            if own > other {
                crossings += 1;
            } else {
                failures.push(format!("M_{t1:.4}: own {own} not above {other} at {t2:.4}"));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "3 monotones non-increasing along {} edges, {crossings}/6 crossing inequalities{}",
            g.edges.len(),
            if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }
        ),
    )
}

fn criterion_6() -> Outcome {
    let src = family_s(PI / 4.0, 1.0).unwrap();
    let target = family_s(PI / 6.0, 1.0).unwrap();
    let (det, q_det) = apply_1wlocc(&appendix_f_deterministic(PI / 6.0).unwrap(), &src).unwrap();
    let (sto, q_sto) = apply_1wlocc(&appendix_f_stochastic(PI / 6.0).unwrap(), &src).unwrap();
    let e_det = det.max_abs_diff(&target).unwrap();
    let e_sto = sto.max_abs_diff(&target).unwrap();
    let losr = decide_conversion(&src, &target, &settings()).unwrap();
    outcome(
        e_det <= LOCC_TOL
            && (q_det - 1.0).abs() <= PROB_TOL
            && e_sto <= LOCC_TOL
            && (q_sto - 0.5).abs() <= PROB_TOL
            && losr.verdict == Feasibility::Infeasible,
        format!(
            "deterministic map error {e_det:.1e} with probability {q_det}, stochastic map error {e_sto:.1e} with probability {q_sto}, LOSR conversion {} (dual bound {:.1e})",
            losr.verdict, losr.lower_bound
        ),
    )
}

fn two_alice_corpus() -> Vec<(String, Assemblage)> {
    let s = Scenario::binary(2);
    let noise = Assemblage::from_fn(s.clone(), |_, _| CMatrix::identity(2).scale(0.125)).unwrap();
    let pr = Assemblage::from_fn(s.clone(), |a, x| {
        let p = if (a[0] ^ a[1]) == (x[0] & x[1]) { 0.5 } else { 0.0 };
        CMatrix::identity(2).scale(p / 2.0)
    })
    .unwrap();
    let classical = Assemblage::from_fn(s, |a, _| {
        if a[0] == a[1] {
            CMatrix::unit(2, a[0], a[0]).scale(0.5)
        } else {
            CMatrix::zeros(2, 2)
        }
    })
    .unwrap();
    let ghz4 = family_ghz(3, PI / 4.0).unwrap();
    let zy = vec![Povm::dichotomic(&CMatrix::pauli_z()), Povm::dichotomic(&CMatrix::pauli_y())];
    let ghz_zy = realize_multipartite(&ghz_state(3, PI / 4.0), &[zy.clone(), zy], 2).unwrap();
    vec![
        ("GHZ(pi/4)".into(), ghz4.clone()),
        ("GHZ(pi/8)".into(), family_ghz(3, PI / 8.0).unwrap()),
        ("GHZ(pi/4) half noise".into(), ghz4.mix(&noise, 0.5).unwrap()),
        ("GHZ(pi/4) 0.2".into(), ghz4.mix(&noise, 0.2).unwrap()),
        ("PR x I/2".into(), pr.clone()),
        ("PR half noise".into(), pr.mix(&noise, 0.5).unwrap()),
        ("noise".into(), noise),
        ("classical".into(), classical),
        ("GHZ(pi/4) zy".into(), ghz_zy),
        ("PR/GHZ mix".into(), pr.mix(&ghz4, 0.5).unwrap()),
    ]
}

fn criterion_7(g: &PreorderGraph, fam: &[(String, Assemblage)]) -> Outcome {
    let mut failures = Vec::new();
    let by_name: BTreeMap<&str, &Assemblage> = fam.iter().map(|(n, a)| (n.as_str(), a)).collect();

    let mut reflexive = 0;
    for (name, a) in fam {
        if decide_conversion(a, a, &settings()).unwrap().verdict == Feasibility::Feasible {
            reflexive += 1;
        } else {
            failures.push(format!("{name} not reflexive"));
        }
    }

    let mut chains = 0;
    for e1 in &g.edges {
        for e2 in g.edges.iter().filter(|e| e.src == e1.dst) {
            if e2.dst == e1.src {
                continue;
            }
            chains += 1;
            if !g.has_edge(&e1.src, &e2.dst) {
                failures.push(format!("transitivity {} -> {} -> {}", e1.src, e1.dst, e2.dst));
            }
        }
    }

    let mut worst_replay = 0.0f64;
    for e in &g.edges {
        let d = decide_conversion(by_name[e.src.as_str()], by_name[e.dst.as_str()], &settings()).unwrap();
        match (&d.certificate, &d.audit) {
            (Some(_), Some(audit)) => {
                worst_replay = worst_replay.max(audit.target_deviation);
                if !audit.passes(REPLAY_TOL) {
                    failures.push(format!("{}->{} audit {audit:?}", e.src, e.dst));
                }
            }
            _ => failures.push(format!("{}->{} has no certificate", e.src, e.dst)),
        }
    }

    let mut counts = [0usize; 3];
    for (name, a) in two_alice_corpus() {
        let losr = is_losr_free_multi(&a, &settings()).unwrap().verdict;
        let tolhs = is_tolhs_multi(&a, &settings()).unwrap().verdict;
        let general = is_general_lhs_multi(&a, &settings()).unwrap().verdict;
        for (k, v) in [losr, tolhs, general].iter().enumerate() {
            if *v == Feasibility::Feasible {
                counts[k] += 1;
            }
        }
        if (losr == Feasibility::Feasible && tolhs != Feasibility::Feasible)
            || (tolhs == Feasibility::Feasible && general != Feasibility::Feasible)
        {
            failures.push(format!("{name}: inclusion broken ({losr}, {tolhs}, {general})"));
        }
    }

    let mut runner = TestRunner::deterministic();
    let entry = -1.0f64..1.0;
    let strategy = proptest::collection::vec((entry.clone(), entry), 16);
    let mut worst_embed = 0.0f64;
    for _ in 0..50 {
        let raw = strategy.new_tree(&mut runner).unwrap().current();
        let m = CMatrix::from_fn(4, 4, |r, c| C64::new(raw[r * 4 + c].0, raw[r * 4 + c].1));
        let h = m.hermitize();
        let mut complex = h.eigenvalues();
        let mut real: Vec<f64> = SymmetricEigen::new(real_embed(&h, 1e-12).unwrap()).eigenvalues.iter().copied().collect();
        real.sort_by(|a, b| a.partial_cmp(b).unwrap());
        complex = complex.into_iter().flat_map(|v| [v, v]).collect();
        complex.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in real.iter().zip(&complex) {
            worst_embed = worst_embed.max((x - y).abs());
        }
    }
    if worst_embed > EMBED_TOL {
        failures.push(format!("real embedding eigenvalue error {worst_embed:.1e}"));
    }

    outcome(
        failures.is_empty(),
        format!(
            "{reflexive}/{} reflexive, {chains} two-step chains closed, {} certificates replayed (max deviation {worst_replay:.1e}), inclusions hold on 10 assemblages (free counts LOSR {} / TO-LHS {} / general {}), embedding eigenvalue error {worst_embed:.1e}{}",
            fam.len(),
            g.edges.len(),
            counts[0],
            counts[1],
            counts[2],
            if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }
        ),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let fam = nine();
    let start = Instant::now();
    let graph = preorder_graph(&fam, &settings(), &SweepOptions::default()).expect("pre-order sweep");
    let sweep_secs = start.elapsed().as_secs_f64();
    let criteria: Vec<Criterion> = vec![
        ("reference pre-order", Box::new(|| criterion_1(&graph, sweep_secs))),
        ("freeness corpus", Box::new(criterion_2)),
        ("functional maxima", Box::new(criterion_3)),
        ("unordered families", Box::new(criterion_4)),
        ("monotone consistency", Box::new(|| criterion_5(&graph, &fam))),
        ("one-way LOCC versus LOSR", Box::new(criterion_6)),
        ("property suites", Box::new(|| criterion_7(&graph, &fam))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} [{name}]: {} ({}; {:.1}s)",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
