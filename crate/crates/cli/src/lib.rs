//! Command-line front end for `steerconv`.
//!
//! Exit codes: 0 success or feasible, 1 negative result, 2 indeterminate,
//! 64 usage error.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use steerconv::assemblages::{family_ghz, family_s, validate as validate_assemblage};
use steerconv::conversion::{
    check_reference_graph, decide_conversion, decide_conversion_multi, preorder_graph, reference_family, SweepOptions,
};
use steerconv::freeness::{is_free_bipartite, is_general_lhs_multi, is_losr_free_multi, is_tolhs_multi};
use steerconv::functionals::{
    epr_functional_bipartite, epr_functional_multi, evaluate, lhs_bound, quantum_max_bipartite, quantum_max_multi,
};
use steerconv::locc::{appendix_f_deterministic, appendix_f_stochastic, apply_1wlocc};
use steerconv::monotones::{epr_robustness, epr_weight, yield_monotone, yield_monotone_multi};
use steerconv::{Assemblage, Error, Feasibility, SdpSettings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INDETERMINATE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "steerconv", version, about = "LOSR convertibility of EPR assemblages")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalOpts {
    /// Worker threads for pair sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Largest replayed violation accepted as feasible.
    #[arg(long, global = true)]
    eps_feasible: Option<f64>,
    /// Smallest dual bound accepted as infeasible.
    #[arg(long, global = true)]
    eps_infeasible: Option<f64>,
    /// Solver convergence tolerance.
    #[arg(long, global = true)]
    solver_tol: Option<f64>,
    /// Solver iteration limit.
    #[arg(long, global = true)]
    max_iter: Option<u32>,
    /// File of key=value lines setting any of the options above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a member of a named family as JSON.
    BuildFamily {
        #[arg(value_enum)]
        family: FamilyKind,
        #[arg(long)]
        theta: f64,
        /// Visibility for the S family.
        #[arg(long, default_value_t = 1.0)]
        p: f64,
        /// Number of parties (Alices plus Bob) for the GHZ family.
        #[arg(long, default_value_t = 3)]
        parties: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check positivity, normalization and no-signalling.
    Validate {
        input: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Decide membership in a free set.
    CheckFree {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FreeKind::Losr)]
        model: FreeKind,
    },
    /// Decide an LOSR conversion.
    Convert {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        dst: PathBuf,
        /// Use the multipartite program (any number of Alices).
        #[arg(long)]
        multi: bool,
        /// Write the certificate of a feasible conversion here.
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Pre-order digraph over every assemblage JSON file in a directory.
    Preorder {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
        /// Skip pairs implied by the transitive closure of found edges.
        #[arg(long)]
        fast: bool,
    },
    /// Evaluate an EPR functional and report its bounds.
    Functional {
        #[arg(long)]
        eta: f64,
        /// Number of parties; 2 selects the bipartite functional.
        #[arg(long, default_value_t = 2)]
        parties: usize,
        #[arg(long)]
        eval: Option<PathBuf>,
    },
    /// Compute a resource monotone.
    Monotone {
        #[arg(long, value_enum)]
        kind: MonotoneKind,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        input: PathBuf,
    },
    /// Apply an explicit one-way LOCC map.
    LoccApply {
        #[arg(long, value_enum)]
        map: LoccKind,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide all pairs of the nine-member reference family and check the
    /// known arrows and absences.
    ReproduceFig3 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long)]
        fast: bool,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FamilyKind {
    #[value(name = "S")]
    S,
    #[value(name = "GHZ")]
    Ghz,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FreeKind {
    /// Products of per-Alice responses (LHS for one Alice).
    Losr,
    General,
    TimeOrdered,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MonotoneKind {
    Weight,
    Robustness,
    Yield,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum LoccKind {
    #[value(name = "appendixF-stoch")]
    Stochastic,
    #[value(name = "appendixF-det")]
    Deterministic,
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Solver(_) => EXIT_INDETERMINATE,
            _ => EXIT_USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type CmdResult = std::result::Result<i32, Failure>;

fn parse_config(path: &Path) -> std::result::Result<BTreeMap<String, String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::usage(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

fn config_value<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> std::result::Result<Option<T>, Failure> {
    map.get(key)
        .map(|v| v.parse::<T>().map_err(|_| Failure::usage(format!("config: invalid value for {key}: {v}"))))
        .transpose()
}

fn resolve_settings(g: &GlobalOpts) -> std::result::Result<(SdpSettings, usize), Failure> {
    let mut s = SdpSettings::default();
    let mut workers = 1;
    if let Some(path) = &g.config {
        let map = parse_config(path)?;
        let known = ["workers", "eps-feasible", "eps-infeasible", "solver-tol", "max-iter", "verbose"];
        if let Some(k) = map.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Failure::usage(format!("config: unknown key {k}")));
        }
        if let Some(v) = config_value(&map, "workers")? {
            workers = v;
        }
        if let Some(v) = config_value(&map, "eps-feasible")? {
            s.eps_feasible = v;
        }
        if let Some(v) = config_value(&map, "eps-infeasible")? {
            s.eps_infeasible = v;
        }
        if let Some(v) = config_value(&map, "solver-tol")? {
            s.solver_tol = v;
        }
        if let Some(v) = config_value(&map, "max-iter")? {
            s.max_iter = v;
        }
        if let Some(v) = config_value(&map, "verbose")? {
            s.verbose = v;
        }
    }
    if let Some(v) = g.workers {
        workers = v;
    }
    if let Some(v) = g.eps_feasible {
        s.eps_feasible = v;
    }
    if let Some(v) = g.eps_infeasible {
        s.eps_infeasible = v;
    }
    if let Some(v) = g.solver_tol {
        s.solver_tol = v;
    }
    if let Some(v) = g.max_iter {
        s.max_iter = v;
    }
    s.check()?;
    if workers == 0 {
        return Err(Failure::usage("--workers must be at least 1"));
    }
    Ok((s, workers))
}

fn load(path: &Path) -> std::result::Result<Assemblage, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    Assemblage::from_json(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> std::result::Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, value: &serde_json::Value) -> std::result::Result<(), Failure> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("JSON value serializes"))?;
    Ok(())
}

fn load_family(dir: &Path) -> std::result::Result<Vec<(String, Assemblage)>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::usage(format!("{}: no .json assemblages", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            load(p).map(|a| (name, a))
        })
        .collect()
}

fn execute(cli: Cli, out: &mut dyn Write) -> CmdResult {
    let (settings, workers) = resolve_settings(&cli.global)?;
    match cli.command {
        Command::BuildFamily { family, theta, p, parties, out: path } => {
            let a = match family {
                FamilyKind::S => family_s(theta, p)?,
                FamilyKind::Ghz => family_ghz(parties, theta)?,
            };
            a.save(&path)?;
            emit(out, &json!({"written": path.display().to_string(), "scenario": a.scenario()}))?;
            Ok(EXIT_OK)
        }
        Command::Validate { input, tol } => {
            let a = load(&input)?;
            let report = validate_assemblage(&a, tol);
            emit(out, &json!({"valid": report.is_valid(), "issues": report.issues}))?;
            Ok(if report.is_valid() { EXIT_OK } else { EXIT_NEGATIVE })
        }
        Command::CheckFree { input, model } => {
            let a = load(&input)?;
            let d = match model {
                FreeKind::Losr if a.n_alices() == 1 => is_free_bipartite(&a, &settings)?,
                FreeKind::Losr => is_losr_free_multi(&a, &settings)?,
                FreeKind::General => is_general_lhs_multi(&a, &settings)?,
                FreeKind::TimeOrdered => is_tolhs_multi(&a, &settings)?,
            };
            emit(out, &json!({"verdict": d.verdict, "slack": d.slack, "lower_bound": d.lower_bound}))?;
            Ok(d.verdict.exit_code())
        }
        Command::Convert { src, dst, multi, certificate } => {
            let (a, b) = (load(&src)?, load(&dst)?);
            let d = if multi || a.n_alices() > 1 {
                decide_conversion_multi(&a, &b, &settings)?
            } else {
                decide_conversion(&a, &b, &settings)?
            };
            if let (Some(path), Some(cert)) = (&certificate, &d.certificate) {
                write_file(path, &serde_json::to_string_pretty(cert).map_err(Error::from)?)?;
            }
            emit(out, &json!({"verdict": d.verdict, "slack": d.slack, "lower_bound": d.lower_bound, "audit": d.audit}))?;
            Ok(d.verdict.exit_code())
        }
        Command::Preorder { family, out: dot, out_json, fast } => {
            let fam = load_family(&family)?;
            let g = preorder_graph(&fam, &settings, &SweepOptions { workers, fast })?;
            if let Some(path) = dot {
                write_file(&path, &g.to_dot())?;
            }
            let text = g.to_json()?;
            match out_json {
                Some(path) => write_file(&path, &text)?,
                None => writeln!(out, "{text}")?,
            }
            Ok(if g.indeterminate.is_empty() { EXIT_OK } else { EXIT_INDETERMINATE })
        }
        Command::Functional { eta, parties, eval } => {
            let (f, qmax) = if parties == 2 {
                (epr_functional_bipartite(eta)?, quantum_max_bipartite(eta)?)
            } else {
                (epr_functional_multi(parties, eta)?, quantum_max_multi(parties, eta)?)
            };
            let value = eval.as_deref().map(load).transpose()?.map(|a| evaluate(&f, &a)).transpose()?;
            emit(
                out,
                &json!({"eta": eta, "alpha": f.alpha, "mu": f.mu, "value": value, "quantum_max": qmax, "lhs_bound": lhs_bound(&f)}),
            )?;
            Ok(EXIT_OK)
        }
        Command::Monotone { kind, eta, input } => {
            let a = load(&input)?;
            let m = match kind {
                MonotoneKind::Weight => epr_weight(&a, &settings)?,
                MonotoneKind::Robustness => epr_robustness(&a, &settings)?,
                MonotoneKind::Yield => {
                    let eta = eta.ok_or_else(|| Failure::usage("--eta is required for the yield monotone"))?;
                    if a.n_alices() == 1 {
                        yield_monotone(&a, eta, &settings)?
                    } else {
                        yield_monotone_multi(&a, eta, &settings)?
                    }
                }
            };
            emit(out, &json!({"value": m.value, "status": m.status, "slack": m.slack}))?;
            Ok(if m.status == Feasibility::Feasible { EXIT_OK } else { EXIT_INDETERMINATE })
        }
        Command::LoccApply { map, theta, input, out: path } => {
            let a = load(&input)?;
            let m = match map {
                LoccKind::Stochastic => appendix_f_stochastic(theta)?,
                LoccKind::Deterministic => appendix_f_deterministic(theta)?,
            };
            let (b, q) = apply_1wlocc(&m, &a)?;
            if let Some(path) = &path {
                b.save(path)?;
            }
            emit(out, &json!({"success_probability": q, "written": path.map(|p| p.display().to_string())}))?;
            Ok(EXIT_OK)
        }
        Command::ReproduceFig3 { out: dot, out_json, fast } => {
            let fam = reference_family()?;
            let g = preorder_graph(&fam, &settings, &SweepOptions { workers, fast })?;
            write_file(&dot, &g.to_dot())?;
            if let Some(path) = out_json {
                write_file(&path, &g.to_json()?)?;
            }
            let check = check_reference_graph(&g);
            emit(
                out,
                &json!({"passes": check.passes(), "check": check, "edges": g.edges.len(), "indeterminate": g.indeterminate.len()}),
            )?;
            Ok(if !g.indeterminate.is_empty() {
                EXIT_INDETERMINATE
            } else if check.passes() {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            })
        }
    }
}

/// Runs the command line `argv` (program name first), writing results to
/// `out` and diagnostics to `err`; returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = if code == EXIT_OK { write!(out, "{}", e.render()) } else { write!(err, "{}", e.render()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
