//! Batch front end: load matrices, algebras, subspaces, and ternary rings
//! from JSON files, run one check or decision, and emit a machine-readable
//! report on stdout (and optionally to a file).
//!
//! Exit codes: 0 yes, 1 no, 2 unknown, 65 parse failure, 66 precondition
//! failure, 70 internal consistency failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use oat_core::algebra::{AlgebraJson, OperatorAlgebra, SConvention, DEFAULT_SEED};
use oat_core::bimodule::{
    bimodule_from_tripotent, principal_witness, quad, support_tripotent_search,
};
use oat_core::calculus::{in_s, power_t_detailed, satisfies_s_norms, support_projection};
use oat_core::cmatrix::CMatrix;
use oat_core::equivalence::{
    c_verify, embedded_eigenvalues, m1_check, pedersen_decide, pedersen_decide_full,
    pedersen_verify, PedersenWitness, PEDERSEN_SEARCH_BUDGET,
};
use oat_core::error::OatError;
use oat_core::instances;
use oat_core::subspace::{MatSubspace, SubspaceJson};
use oat_core::tol::Tolerance;
use oat_core::tripotent::{pz_decide, pz_verify, Tripotent};
use oat_core::tro::{tro_pz_verify, TroJson, TroSpace};
use oat_core::verdict::Verdict;

use oat_core::equivalence::{blackadar_decide, subequiv_decide};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_PARSE: i32 = 65;
const EXIT_PRECONDITION: i32 = 66;
const EXIT_INTERNAL: i32 = 70;

#[derive(Parser)]
#[command(
    name = "oat",
    version,
    about = "Comparison theory for subalgebras of matrix algebras: membership checks, roots and supports, equivalence decisions, bimodules, and ternary rings",
    after_help = "Exit codes: 0 yes, 1 no, 2 unknown, 65 parse, 66 precondition, 70 internal."
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    /// Equality tolerance (eq_eps); rank and series tolerances keep their
    /// defaults unless overridden.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Numerical-rank cutoff relative to the largest singular value.
    #[arg(long, global = true)]
    rank_eps: Option<f64>,
    /// Power-series term cutoff.
    #[arg(long, global = true)]
    series_eps: Option<f64>,
    /// Membership convention for inputs that do not carry their own
    /// (algebra files declare theirs, which wins).
    #[arg(long, global = true, value_enum, default_value_t = ConventionArg::HalfBall)]
    convention: ConventionArg,
    /// RNG seed; falls back to the OAT_SEED environment variable, then to
    /// the built-in default.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Candidate budget for search-based decisions.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Also write the JSON report to this path.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Reject inputs with any matrix dimension above this bound.
    #[arg(long, global = true, default_value_t = 64)]
    max_dim: usize,
    /// Include wall-clock timings in the report (off by default so reports
    /// are reproducible bit for bit).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    #[value(name = "half-ball")]
    HalfBall,
    #[value(name = "shifted")]
    Shifted,
}

impl From<ConventionArg> for SConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::HalfBall => SConvention::HalfBall,
            ConventionArg::Shifted => SConvention::Shifted,
        }
    }
}

#[derive(Subcommand)]
enum Verb {
    /// Is the element a member of the distinguished set S of the algebra?
    CheckS { algebra: PathBuf, a: PathBuf },
    /// Fractional power a^t of an element of S by the binomial series.
    Root {
        a: PathBuf,
        /// Exponent t in (0, 1].
        #[arg(long, default_value_t = 0.5)]
        exponent: f64,
    },
    /// Support projection of an element of S, with the root-iteration
    /// certificate.
    Support { a: PathBuf },
    /// The corner subspace aAb computed five independent ways; any
    /// disagreement is an internal error.
    Quad {
        algebra: PathBuf,
        a: PathBuf,
        b: PathBuf,
    },
    /// Verify a factorization witness for the equivalence of a and b.
    PedersenVerify {
        algebra: PathBuf,
        a: PathBuf,
        b: PathBuf,
        /// JSON file {"x":…, "y":…, "v":…|null, "variant":"i"|…|"iv'"}.
        witness: PathBuf,
    },
    /// Decide equivalence of a and b: in the full matrix algebra by
    /// default, inside a declared subalgebra when one is given.
    PedersenDecide {
        a: PathBuf,
        b: PathBuf,
        /// Decide inside this algebra by witness search instead of the
        /// full-algebra canonical route.
        #[arg(long)]
        algebra: Option<PathBuf>,
    },
    /// Decide equivalence through support projections: p_a ~ p_b by a
    /// partial isometry moving one support onto the other inside A.
    BlackadarDecide {
        algebra: PathBuf,
        a: PathBuf,
        b: PathBuf,
    },
    /// Decide subequivalence: is a equivalent to some compression of b?
    SubequivDecide {
        algebra: PathBuf,
        a: PathBuf,
        b: PathBuf,
    },
    /// Verify that v implements the open-projection equivalence p ~ q.
    PzVerify {
        algebra: PathBuf,
        p: PathBuf,
        q: PathBuf,
        v: PathBuf,
    },
    /// Search for a partial isometry implementing p ~ q.
    PzDecide {
        algebra: PathBuf,
        p: PathBuf,
        q: PathBuf,
    },
    /// Build the hereditary bimodule of a *-open tripotent and verify all
    /// of its structure.
    BimoduleVerify { algebra: PathBuf, u: PathBuf },
    /// Search a subspace for a support tripotent certifying that it is
    /// the corner of a hereditary pair.
    BimoduleSearch {
        algebra: PathBuf,
        /// JSON file {"basis":[matrix,…]} spanning the subspace.
        space: PathBuf,
    },
    /// The principal equivalence witness carried by a *-open tripotent.
    BimodulePrincipal { algebra: PathBuf, u: PathBuf },
    /// Close a generating set into a ternary ring and report whether the
    /// input was already closed, with the corner and linking dimensions.
    TroVerify { tro: PathBuf },
    /// Verify that v implements the ternary-ring equivalence of its
    /// support projections.
    TroPz { tro: PathBuf, v: PathBuf },
    /// Regenerate a named example from closed-form parameters, run the
    /// relevant checks, and hard-fail on any outcome mismatch.
    Demo {
        #[command(subcommand)]
        which: DemoCmd,
    },
}

#[derive(Subcommand)]
enum DemoCmd {
    /// The 2x2 factorization pair a = xy, b = yx with different norms:
    /// equivalent under the plain factorization, not unitarily.
    Counterexample {
        #[arg(long, default_value_t = 0.05)]
        k: f64,
        /// Sweep k upward in steps of 0.01 and report the threshold where
        /// the pair leaves S.
        #[arg(long)]
        sweep: bool,
    },
    /// Diagonal matrix units: support equivalence fails in the triangular
    /// algebra T2 but holds in M2.
    Triangular,
    /// The weighted span algebra: the ambient factorization check passes
    /// while the in-algebra support equivalence fails.
    M1span {
        /// Off-diagonal weight r (the legs carry diag(r, 1/r)); must
        /// differ from 1.
        #[arg(long, default_value_t = 2.0)]
        weight: f64,
    },
    /// Normal elements: the equivalence decision against the
    /// eigenvalue-multiset oracle, zero disagreements required.
    Identification {
        #[arg(long, default_value_t = 8)]
        pairs: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
    },
}

enum Failure {
    Parse(String),
    Precondition(String),
    Internal(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Parse(_) => EXIT_PARSE,
            Failure::Precondition(_) => EXIT_PRECONDITION,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Precondition(m) | Failure::Internal(m) => m,
        }
    }
}

/// Errors raised by an operation (inputs already loaded). Budget
/// exhaustion is not an error at this level: it becomes an unknown
/// verdict.
fn op_failure(e: OatError) -> Failure {
    match e {
        OatError::Internal(m) => Failure::Internal(m),
        OatError::Dim(m) | OatError::Invalid(m) | OatError::Precondition(m) => {
            Failure::Precondition(m)
        }
        OatError::Budget(m) => Failure::Internal(format!("unhandled budget exhaustion: {m}")),
    }
}

/// Same mapping, but budget exhaustion becomes an unknown verdict.
fn op_verdict(r: oat_core::error::Result<Verdict>) -> Result<Verdict, Failure> {
    match r {
        Ok(v) => Ok(v),
        Err(OatError::Budget(m)) => Ok(Verdict::unknown().note(format!("budget exhausted: {m}"))),
        Err(e) => Err(op_failure(e)),
    }
}

#[derive(Serialize)]
struct Report<'a> {
    verb: String,
    inputs: Vec<String>,
    convention: SConvention,
    seed: u64,
    tolerances: Tolerance,
    verdict: &'a Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<f64>,
}

struct Options {
    tol: Tolerance,
    convention: SConvention,
    seed: u64,
    budget: usize,
    max_dim: usize,
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_PARSE,
            };
            let _ = e.print();
            return code;
        }
    };

    let defaults = Tolerance::default();
    let tol = Tolerance {
        eq_eps: cli.tolerance.unwrap_or(defaults.eq_eps),
        rank_eps: cli.rank_eps.unwrap_or(defaults.rank_eps),
        series_eps: cli.series_eps.unwrap_or(defaults.series_eps),
    };
    if let Err(e) = tol.validate() {
        eprintln!("error: {e}");
        return EXIT_PARSE;
    }
    let seed = match cli.seed {
        Some(s) => s,
        None => match std::env::var("OAT_SEED") {
            Ok(text) => match text.parse::<u64>() {
                Ok(s) => s,
                Err(_) => {
                    eprintln!("error: OAT_SEED is not an unsigned integer: {text:?}");
                    return EXIT_PARSE;
                }
            },
            Err(_) => DEFAULT_SEED,
        },
    };
    let opts = Options {
        tol,
        convention: cli.convention.into(),
        seed,
        budget: cli.budget.unwrap_or(PEDERSEN_SEARCH_BUDGET),
        max_dim: cli.max_dim,
    };

    let started = Instant::now();
    let outcome = run(&cli.verb, &opts);
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    let (verdict, inputs) = match outcome {
        Ok(pair) => pair,
        Err(f) => {
            eprintln!("error: {}", f.message());
            return f.exit_code();
        }
    };

    let report = Report {
        verb: verb_name(&cli.verb),
        inputs,
        convention: opts.convention,
        seed: opts.seed,
        tolerances: opts.tol,
        verdict: &verdict,
        elapsed_ms: cli.timings.then_some(elapsed_ms),
    };
    let text = match serde_json::to_string_pretty(&report) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot serialize report: {e}");
            return EXIT_INTERNAL;
        }
    };
    println!("{text}");
    if let Some(path) = &cli.report {
        if let Err(e) = fs::write(path, format!("{text}\n")) {
            eprintln!("error: cannot write report to {}: {e}", path.display());
            return EXIT_PARSE;
        }
    }
    verdict.answer.exit_code()
}

fn verb_name(verb: &Verb) -> String {
    match verb {
        Verb::CheckS { .. } => "check-s",
        Verb::Root { .. } => "root",
        Verb::Support { .. } => "support",
        Verb::Quad { .. } => "quad",
        Verb::PedersenVerify { .. } => "pedersen-verify",
        Verb::PedersenDecide { .. } => "pedersen-decide",
        Verb::BlackadarDecide { .. } => "blackadar-decide",
        Verb::SubequivDecide { .. } => "subequiv-decide",
        Verb::PzVerify { .. } => "pz-verify",
        Verb::PzDecide { .. } => "pz-decide",
        Verb::BimoduleVerify { .. } => "bimodule-verify",
        Verb::BimoduleSearch { .. } => "bimodule-search",
        Verb::BimodulePrincipal { .. } => "bimodule-principal",
        Verb::TroVerify { .. } => "tro-verify",
        Verb::TroPz { .. } => "tro-pz",
        Verb::Demo { which } => {
            return match which {
                DemoCmd::Counterexample { .. } => "demo counterexample",
                DemoCmd::Triangular => "demo triangular",
                DemoCmd::M1span { .. } => "demo m1span",
                DemoCmd::Identification { .. } => "demo identification",
            }
            .to_string()
        }
    }
    .to_string()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Parse(format!("cannot parse {}: {e}", path.display())))
}

fn check_dim(what: &str, dim: usize, max_dim: usize) -> Result<(), Failure> {
    if dim > max_dim {
        return Err(Failure::Parse(format!(
            "{what} has dimension {dim}, above the limit {max_dim} (raise with --max-dim)"
        )));
    }
    Ok(())
}

fn load_matrix(path: &Path, opts: &Options) -> Result<CMatrix, Failure> {
    let m: CMatrix = read_json(path)?;
    check_dim(&path.display().to_string(), m.rows().max(m.cols()), opts.max_dim)?;
    Ok(m)
}

fn load_algebra(path: &Path, opts: &Options) -> Result<OperatorAlgebra, Failure> {
    let json: AlgebraJson = read_json(path)?;
    check_dim(&path.display().to_string(), json.ambient, opts.max_dim)?;
    OperatorAlgebra::from_json(&json, &opts.tol)
        .map_err(|e| Failure::Parse(format!("invalid algebra in {}: {e}", path.display())))
}

fn load_subspace(
    path: &Path,
    rows: usize,
    cols: usize,
    opts: &Options,
) -> Result<MatSubspace, Failure> {
    let json: SubspaceJson = read_json(path)?;
    MatSubspace::from_json(&json, rows, cols, &opts.tol)
        .map_err(|e| Failure::Parse(format!("invalid subspace in {}: {e}", path.display())))
}

fn load_tro(path: &Path, opts: &Options) -> Result<(TroSpace, TroJson), Failure> {
    let json: TroJson = read_json(path)?;
    check_dim(
        &path.display().to_string(),
        json.rows + json.cols,
        opts.max_dim,
    )?;
    let tro = TroSpace::from_json(&json, &opts.tol)
        .map_err(|e| Failure::Parse(format!("invalid ternary ring in {}: {e}", path.display())))?;
    Ok((tro, json))
}

fn load_tripotent(path: &Path, opts: &Options) -> Result<Tripotent, Failure> {
    let m = load_matrix(path, opts)?;
    Tripotent::new(m, &opts.tol)
        .map_err(|e| Failure::Precondition(format!("{}: {e}", path.display())))
}

fn paths(list: &[&PathBuf]) -> Vec<String> {
    list.iter().map(|p| p.display().to_string()).collect()
}

fn run(verb: &Verb, opts: &Options) -> Result<(Verdict, Vec<String>), Failure> {
    let tol = &opts.tol;
    match verb {
        Verb::CheckS { algebra, a } => {
            let alg = load_algebra(algebra, opts)?;
            let m = load_matrix(a, opts)?;
            let v = op_verdict(in_s(&alg, &m, tol))?;
            Ok((v, paths(&[algebra, a])))
        }
        Verb::Root { a, exponent } => {
            let m = load_matrix(a, opts)?;
            if !(*exponent > 0.0 && *exponent <= 1.0) {
                return Err(Failure::Parse("exponent must lie in (0, 1]".into()));
            }
            let (root, info) =
                power_t_detailed(&m, *exponent, tol).map_err(op_failure)?;
            let in_set = satisfies_s_norms(&root, opts.convention, tol.eq_eps);
            let v = Verdict::yes()
                .with_matrix("root", root)
                .with_scalar("terms", info.terms as f64)
                .with_scalar("truncation", info.truncation)
                .with_scalar("contraction", info.contraction)
                .with_scalar("compressed_rank", info.compressed_rank as f64)
                .note(if in_set {
                    "the root stays in S"
                } else {
                    "the root leaves S under the requested convention"
                });
            Ok((v, paths(&[a])))
        }
        Verb::Support { a } => {
            let m = load_matrix(a, opts)?;
            let sp = support_projection(&m, tol).map_err(op_failure)?;
            let rank = sp.p.rank(tol.rank_eps);
            let v = Verdict::yes()
                .with_matrix("p", sp.p)
                .with_scalar("agreement", sp.agreement)
                .with_scalar("iterations", sp.iterations as f64)
                .with_scalar("rank", rank as f64);
            Ok((v, paths(&[a])))
        }
        Verb::Quad {
            algebra,
            a,
            b,
        } => {
            let alg = load_algebra(algebra, opts)?;
            let ma = load_matrix(a, opts)?;
            let mb = load_matrix(b, opts)?;
            let q = quad(&alg, &ma, &mb, tol).map_err(op_failure)?;
            let v = q
                .verdict
                .with_scalar("corner_dim", q.ab.dim() as f64)
                .with_scalar("left_unit_dim", q.aa.dim() as f64)
                .with_scalar("right_unit_dim", q.bb.dim() as f64)
                .with_scalar("reverse_corner_dim", q.ba.dim() as f64);
            Ok((v, paths(&[algebra, a, b])))
        }
        Verb::PedersenVerify {
            algebra,
            a,
            b,
            witness,
        } => {
            let alg = load_algebra(algebra, opts)?;
            let ma = load_matrix(a, opts)?;
            let mb = load_matrix(b, opts)?;
            let w: PedersenWitness = read_json(witness)?;
            let v = op_verdict(pedersen_verify(&alg, &ma, &mb, &w, tol))?;
            Ok((v, paths(&[algebra, a, b, witness])))
        }
        Verb::PedersenDecide { a, b, algebra } => {
            let ma = load_matrix(a, opts)?;
            let mb = load_matrix(b, opts)?;
            match algebra {
                Some(path) => {
                    let alg = load_algebra(path, opts)?;
                    let v = op_verdict(pedersen_decide(
                        &alg,
                        &ma,
                        &mb,
                        tol,
                        opts.seed,
                        opts.budget,
                    ))?;
                    Ok((v, paths(&[a, b, path])))
                }
                None => {
                    let v = op_verdict(pedersen_decide_full(
                        &ma,
                        &mb,
                        opts.convention,
                        tol,
                        opts.seed,
                    ))?;
                    Ok((v, paths(&[a, b])))
                }
            }
        }
        Verb::BlackadarDecide { algebra, a, b } => {
            let alg = load_algebra(algebra, opts)?;
            let ma = load_matrix(a, opts)?;
            let mb = load_matrix(b, opts)?;
            let v = op_verdict(blackadar_decide(&alg, &ma, &mb, tol, opts.seed))?;
            Ok((v, paths(&[algebra, a, b])))
        }
        Verb::SubequivDecide { algebra, a, b } => {
            let alg = load_algebra(algebra, opts)?;
            let ma = load_matrix(a, opts)?;
            let mb = load_matrix(b, opts)?;
            let v = op_verdict(subequiv_decide(&alg, &ma, &mb, tol, opts.seed))?;
            Ok((v, paths(&[algebra, a, b])))
        }
        Verb::PzVerify { algebra, p, q, v } => {
            let alg = load_algebra(algebra, opts)?;
            let mp = load_matrix(p, opts)?;
            let mq = load_matrix(q, opts)?;
            let mv = load_matrix(v, opts)?;
            let verdict = op_verdict(pz_verify(&alg, &mp, &mq, &mv, tol))?;
            Ok((verdict, paths(&[algebra, p, q, v])))
        }
        Verb::PzDecide { algebra, p, q } => {
            let alg = load_algebra(algebra, opts)?;
            let mp = load_matrix(p, opts)?;
            let mq = load_matrix(q, opts)?;
            let v = op_verdict(pz_decide(&alg, &mp, &mq, tol, opts.seed))?;
            Ok((v, paths(&[algebra, p, q])))
        }
        Verb::BimoduleVerify { algebra, u } => {
            let alg = load_algebra(algebra, opts)?;
            let trip = load_tripotent(u, opts)?;
            let h = bimodule_from_tripotent(&alg, &trip, tol).map_err(op_failure)?;
            let v = op_verdict(h.verify(&alg, tol))?;
            let v = v
                .with_scalar("corner_dim", h.context.x.dim() as f64)
                .with_scalar("left_dim", h.context.d.dim() as f64)
                .with_scalar("right_dim", h.context.e.dim() as f64);
            Ok((v, paths(&[algebra, u])))
        }
        Verb::BimoduleSearch { algebra, space } => {
            let alg = load_algebra(algebra, opts)?;
            let n = alg.ambient();
            let x = load_subspace(space, n, n, opts)?;
            let v = op_verdict(support_tripotent_search(&alg, &x, tol, opts.seed))?;
            Ok((v, paths(&[algebra, space])))
        }
        Verb::BimodulePrincipal { algebra, u } => {
            let alg = load_algebra(algebra, opts)?;
            let trip = load_tripotent(u, opts)?;
            let h = bimodule_from_tripotent(&alg, &trip, tol).map_err(op_failure)?;
            let v = op_verdict(principal_witness(&alg, &h, tol))?;
            Ok((v, paths(&[algebra, u])))
        }
        Verb::TroVerify { tro } => {
            let (space, json) = load_tro(tro, opts)?;
            let input_span =
                MatSubspace::span(json.rows, json.cols, &json.generators, tol)
                    .map_err(|e| Failure::Parse(format!("{}: {e}", tro.display())))?;
            let added = space.z.dim() - input_span.dim();
            let mut v = if added == 0 {
                Verdict::yes().note("generators already span a ternary-closed space")
            } else {
                Verdict::no().note(format!(
                    "generators are not ternary closed; the closure adds {added} dimensions"
                ))
            };
            v = v
                .with_scalar("z_dim", space.z.dim() as f64)
                .with_scalar("input_dim", input_span.dim() as f64)
                .with_scalar("left_dim", space.left_algebra.dim() as f64)
                .with_scalar("right_dim", space.right_algebra.dim() as f64)
                .with_scalar("linking_dim", space.linking.dim() as f64);
            Ok((v, paths(&[tro])))
        }
        Verb::TroPz { tro, v } => {
            let (space, _) = load_tro(tro, opts)?;
            let mv = load_matrix(v, opts)?;
            let verdict = op_verdict(tro_pz_verify(&space, &mv, tol))?;
            Ok((verdict, paths(&[tro, v])))
        }
        Verb::Demo { which } => run_demo(which, opts).map(|v| (v, Vec::new())),
    }
}

/// A demo regenerates a fixed example and asserts the expected outcome;
/// any mismatch is an internal failure, never a quiet verdict.
fn run_demo(which: &DemoCmd, opts: &Options) -> Result<Verdict, Failure> {
    let tol = &opts.tol;
    match which {
        DemoCmd::Counterexample { k, sweep } => {
            if *sweep {
                return counterexample_sweep(opts);
            }
            if !(*k >= 0.0 && k.is_finite()) {
                return Err(Failure::Parse("k must be finite and nonnegative".into()));
            }
            let (a, b, x, y) = instances::counterexample_pair(*k);
            let cv = c_verify(&a, &b, &x, &y, tol);
            if !cv.is_yes() {
                return Err(Failure::Internal(
                    "the factorization a = xy, b = yx failed to verify".into(),
                ));
            }
            let in_a = satisfies_s_norms(&a, SConvention::HalfBall, tol.eq_eps);
            let in_b = satisfies_s_norms(&b, SConvention::HalfBall, tol.eq_eps);
            let gap = (a.opnorm() - b.opnorm()).abs();
            if *k >= 0.01 && gap <= 1e-6 {
                return Err(Failure::Internal(format!(
                    "expected a norm gap at k = {k}, found {gap:.3e}"
                )));
            }
            if !(in_a && in_b) {
                return Err(Failure::Precondition(format!(
                    "k = {k} pushes the pair outside S; use --sweep to find the threshold"
                )));
            }
            let decide =
                pedersen_decide_full(&a, &b, SConvention::HalfBall, tol, opts.seed)
                    .map_err(op_failure)?;
            if *k >= 0.01 && !decide.is_no() {
                return Err(Failure::Internal(
                    "the norm gap must refute equivalence, but the decision did not".into(),
                ));
            }
            let v = Verdict {
                answer: decide.answer,
                witness: decide.witness.clone(),
                notes: decide.notes.clone(),
            }
            .with_scalar("k", *k)
            .with_scalar("norm_xy", a.opnorm())
            .with_scalar("norm_yx", b.opnorm())
            .note("a = xy and b = yx verified; both lie in S")
            .note("equal-norm test refutes unitary equivalence for k > 0");
            Ok(v)
        }
        DemoCmd::Triangular => {
            let t2 = instances::triangular_algebra(2, opts.convention, tol)
                .map_err(op_failure)?;
            let m2 = OperatorAlgebra::full_matrix_algebra(2, opts.convention, tol)
                .map_err(op_failure)?;
            let e11 = CMatrix::from_real_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
            let e22 = CMatrix::from_real_rows(2, 2, &[0.0, 0.0, 0.0, 1.0]).unwrap();
            let in_t2 = pz_decide(&t2, &e11, &e22, tol, opts.seed).map_err(op_failure)?;
            if !in_t2.is_no() {
                return Err(Failure::Internal(
                    "diagonal units must not be equivalent in the triangular algebra".into(),
                ));
            }
            let in_m2 = pz_decide(&m2, &e11, &e22, tol, opts.seed).map_err(op_failure)?;
            if !in_m2.is_yes() {
                return Err(Failure::Internal(
                    "diagonal units must be equivalent in the full algebra".into(),
                ));
            }
            let w = in_m2
                .witness_matrix("v")
                .ok_or_else(|| Failure::Internal("decision returned yes without a witness".into()))?;
            let recheck = pz_verify(&m2, &e11, &e22, w, tol).map_err(op_failure)?;
            if !recheck.is_yes() {
                return Err(Failure::Internal("the returned witness fails re-verification".into()));
            }
            Ok(Verdict::yes()
                .with_matrix("v", w.clone())
                .note("equivalence of the diagonal units fails in T2")
                .note("equivalence of the diagonal units holds in M2, witness re-verified"))
        }
        DemoCmd::M1span { weight } => {
            if !(*weight > 0.0 && weight.is_finite()) || (*weight - 1.0).abs() < 1e-9 {
                return Err(Failure::Parse(
                    "weight must be positive, finite, and different from 1".into(),
                ));
            }
            let (alg, a, b, x, y) =
                instances::weighted_span_algebra(*weight, tol).map_err(op_failure)?;
            let ambient = m1_check(
                &a,
                &b,
                &x.scale_re(1.0 / weight),
                &y.scale_re(*weight),
                SConvention::HalfBall,
                tol,
            )
            .map_err(op_failure)?;
            if !ambient.is_yes() {
                return Err(Failure::Internal(
                    "the ambient factorization check must pass for the span pair".into(),
                ));
            }
            let inside = blackadar_decide(&alg, &a, &b, tol, opts.seed).map_err(op_failure)?;
            if !inside.is_no() {
                return Err(Failure::Internal(
                    "support equivalence inside the span algebra must fail".into(),
                ));
            }
            Ok(Verdict::yes()
                .with_scalar("weight", *weight)
                .with_scalar("algebra_dim", alg.space().dim() as f64)
                .note("ambient factorization holds after rescaling the legs")
                .note("no partial isometry inside the span moves one support to the other"))
        }
        DemoCmd::Identification { pairs, dim } => {
            if *dim < 2 || *dim > 8 {
                return Err(Failure::Parse("dim must lie in 2..=8".into()));
            }
            if *pairs == 0 || *pairs > 500 {
                return Err(Failure::Parse("pairs must lie in 1..=500".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut agreements = 0usize;
            for i in 0..*pairs {
                let equivalent = i % 2 == 0;
                let (a, b) = instances::normal_pair(*dim, equivalent, &mut rng);
                let oracle = eig_multisets_match(&a, &b);
                if oracle != equivalent {
                    return Err(Failure::Internal(format!(
                        "pair {i}: the generator promised equivalent = {equivalent} but the eigenvalue oracle disagrees"
                    )));
                }
                let decide = pedersen_decide_full(
                    &a,
                    &b,
                    SConvention::HalfBall,
                    tol,
                    opts.seed.wrapping_add(i as u64),
                )
                .map_err(op_failure)?;
                if decide.is_yes() != oracle {
                    return Err(Failure::Internal(format!(
                        "pair {i}: decision {:?} disagrees with the eigenvalue oracle ({})",
                        decide.answer,
                        if oracle { "equivalent" } else { "inequivalent" }
                    )));
                }
                agreements += 1;
            }
            Ok(Verdict::yes()
                .with_scalar("pairs", *pairs as f64)
                .with_scalar("agreements", agreements as f64)
                .note("decision matches the eigenvalue-multiset oracle on every pair"))
        }
    }
}

/// Unitary equivalence oracle for normal matrices: equal eigenvalue
/// multisets, compared after the canonical sort.
fn eig_multisets_match(a: &CMatrix, b: &CMatrix) -> bool {
    let ea = embedded_eigenvalues(a);
    let eb = embedded_eigenvalues(b);
    ea.len() == eb.len()
        && ea
            .iter()
            .zip(&eb)
            .all(|(p, q)| (p - q).norm() <= 1e-6 * (1.0 + p.norm()))
}

fn counterexample_sweep(opts: &Options) -> Result<Verdict, Failure> {
    let tol = &opts.tol;
    let mut grid = Vec::new();
    let mut threshold: Option<f64> = None;
    let mut left_s = false;
    for step in 1..=40 {
        let k = step as f64 * 0.01;
        let (a, b, _, _) = instances::counterexample_pair(k);
        let sa = (&CMatrix::identity(2) - &a.scale_re(2.0)).opnorm();
        let sb = (&CMatrix::identity(2) - &b.scale_re(2.0)).opnorm();
        let inside = sa <= 1.0 + tol.eq_eps && sb <= 1.0 + tol.eq_eps;
        if !inside && threshold.is_none() {
            threshold = Some(k);
        }
        if inside && threshold.is_some() {
            return Err(Failure::Internal(format!(
                "membership is not monotone on the grid: k = {k} re-enters S"
            )));
        }
        left_s = !inside;
        let mut line = String::new();
        let _ = write!(
            line,
            "k = {k:.2}: in S = {inside}, |1-2xy| = {sa:.6}, |1-2yx| = {sb:.6}"
        );
        grid.push(line);
    }
    let threshold = threshold.ok_or_else(|| {
        Failure::Internal("the pair never left S on the sweep grid up to k = 0.40".into())
    })?;
    if !left_s {
        return Err(Failure::Internal("sweep ended inside S after crossing the threshold".into()));
    }
    let mut v = Verdict::yes()
        .with_scalar("threshold", threshold)
        .note(format!(
            "both xy and yx stay in S strictly below k = {threshold:.2}, and leave it there"
        ));
    for line in grid {
        v = v.note(line);
    }
    Ok(v)
}
