use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use zdiv_core::algebra::AlgebraError;
use zdiv_core::cancellation::{
    build_pair_sets, extract_cycle_relation, extract_relation_b, extract_relation_m, recover_structure,
    CancellationStructure, RecoverError, Recovered, RecoveredInstance, Which,
};
use zdiv_core::search::{
    enumerate_structures, make_torsion_instance, random_torsion_instance, scan_support,
    search_annihilator_direct, EnumerationPlan, ScanOptions, StructureFilter, Symmetry,
};
use zdiv_core::selftest::run_selftest;
use zdiv_core::{eval_word, AlgebraElement, FieldSpec, FormalWord, Scalar, SupportTriple};

mod config;

use config::{OutputFormat, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "zdiv", version, about = "Three-term zero divisors in group algebras")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct GlobalArgs {
    /// Config file of `key = value` lines; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Group, e.g. `free:2`, `abelian:1`, `cyclic:3`, `heisenberg`, `sym:3`, `product(cyclic:3,abelian:1)`.
    #[arg(long, global = true)]
    group: Option<String>,
    /// `Q` or `GF:p`.
    #[arg(long, global = true)]
    field: Option<String>,
    /// Override the normalized coefficients of `a` as `alpha1,alpha2`.
    #[arg(long, global = true)]
    alphas: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    output: Option<OutputFormat>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Multiply two group-algebra elements.
    Mul { lhs: String, rhs: String },
    /// Check whether `a b = 0`.
    AnnihilateCheck { a: String, b: String },
    /// Read the cancellation structure off `a b = 0`.
    Recover { a: String, b: String },
    /// Recover the structure and extract both relations.
    Extract {
        a: String,
        b: String,
        /// Include the full chain walks.
        #[arg(long)]
        trace: bool,
    },
    /// List valid cancellation structures of support size `n`.
    Enumerate {
        #[arg(long)]
        n: usize,
        /// Enumerate every `f`, not only `f = id`.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        k_c: Option<usize>,
        /// Print only the number of structures.
        #[arg(long)]
        count: bool,
    },
    /// Decide every structure with `2 <= n <= n_max` for a fixed `a`.
    Scan {
        #[arg(long)]
        a: String,
        #[arg(long)]
        n_max: usize,
        /// One line per structure as well as per `n`.
        #[arg(long)]
        verbose: bool,
        /// Report wall time on standard error.
        #[arg(long)]
        timing: bool,
        #[arg(long)]
        full: bool,
        /// Scan each `alpha1,alpha2` pair of a `;`-separated list.
        #[arg(long)]
        alpha_list: Option<String>,
    },
    /// Search for `b` with `a b = 0` on small supports of a ball.
    SearchDirect {
        #[arg(long)]
        a: String,
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = 1)]
        radius: u32,
    },
    /// Build `a = 1 + h + h^2`, `b = (1 - h) c` for an element `h` of order three.
    MakeInstance {
        /// `c`; drawn at random from the seed when omitted.
        #[arg(long)]
        c: Option<String>,
        #[arg(long, default_value_t = 3)]
        terms: usize,
    },
    /// Run the randomized axiom and round-trip suites.
    Selftest,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    NotAnnihilating(String),
    Precondition(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::NotAnnihilating(_) => 3,
            Failure::Precondition(_) => 4,
            Failure::Internal(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::NotAnnihilating(m) | Failure::Precondition(m) | Failure::Internal(m) => m,
        }
    }
}

type Outcome = Result<u8, Failure>;

struct Out {
    format: OutputFormat,
    stdout: std::io::StdoutLock<'static>,
}

impl Out {
    /// One JSON line, or the text rendering.
    fn emit(&mut self, value: &Value, text: impl FnOnce() -> String) {
        let line = match self.format {
            OutputFormat::Json => value.to_string(),
            OutputFormat::Text => text(),
        };
        let _ = writeln!(self.stdout, "{line}");
    }
}

fn parse_element(cfg: &RunConfig, what: &str, text: &str) -> Result<AlgebraElement, Failure> {
    AlgebraElement::parse(&cfg.group, cfg.field, text).map_err(|e| Failure::Input(format!("{what}: {e}")))
}

fn triple(cfg: &RunConfig, a: &AlgebraElement) -> Result<SupportTriple, Failure> {
    let mut t = a.as_support_triple().map_err(|e| match e {
        AlgebraError::SupportNotThree(_) | AlgebraError::IdentityNotInSupport { .. } => {
            Failure::Precondition(format!("a: {e}"))
        }
        other => Failure::Input(format!("a: {other}")),
    })?;
    if let Some((a1, a2)) = &cfg.alphas {
        if a1.is_zero() || a2.is_zero() {
            return Err(Failure::Input("alphas must be nonzero".into()));
        }
        t.alpha1 = a1.clone();
        t.alpha2 = a2.clone();
    }
    Ok(t)
}

fn recover(cfg: &RunConfig, a: &str, b: &str) -> Result<(SupportTriple, AlgebraElement, RecoveredInstance), Failure> {
    let a = parse_element(cfg, "a", a)?;
    let b = parse_element(cfg, "b", b)?;
    if b.is_zero() {
        return Err(Failure::Precondition("b must be nonzero".into()));
    }
    let t = triple(cfg, &a)?;
    let rec = recover_structure(&t, &b).map_err(|e| match e {
        RecoverError::NotAnnihilating => {
            let product = t.to_element().mul(&b).map(|p| p.to_string()).unwrap_or_default();
            Failure::NotAnnihilating(format!("a*b = {product}, not 0"))
        }
        RecoverError::ZeroB => Failure::Precondition("b must be nonzero".into()),
        RecoverError::Mismatch => Failure::Input(e.to_string()),
        RecoverError::InternalInconsistency(m) => Failure::Internal(m),
    })?;
    Ok((t, b, rec))
}

fn structure_json(cs: &CancellationStructure) -> Value {
    serde_json::to_value(cs).expect("serializable")
}

fn recovered_json(cfg: &RunConfig, rec: &RecoveredInstance) -> Value {
    let index_map: Vec<String> = rec.index_map.iter().map(|g| cfg.group.render(g)).collect();
    let betas: Vec<String> = rec.betas.iter().map(Scalar::to_string).collect();
    match &rec.kind {
        Recovered::Structure { structure, blocks } => {
            let blocks: Vec<Value> = blocks
                .iter()
                .map(|e| {
                    let one = |j: Option<usize>| j.map(|j| j + 1);
                    json!({
                        "element": cfg.group.render(&e.element),
                        "block": e.block,
                        "b": one(e.in_b),
                        "g1b": one(e.in_g1b),
                        "g2b": one(e.in_g2b),
                    })
                })
                .collect();
            json!({
                "kind": "structure",
                "structure": structure_json(structure),
                "support": index_map,
                "betas": betas,
                "blocks": blocks,
            })
        }
        Recovered::Cycle { h } => json!({
            "kind": "cycle",
            "h": h,
            "support": index_map,
            "betas": betas,
        }),
    }
}

fn verified(t: &SupportTriple, w: &FormalWord) -> bool {
    eval_word(&t.group, w, &t.g1, &t.g2).is_ok_and(|v| t.group.is_identity(&v))
}

fn cmd_mul(cfg: &RunConfig, out: &mut Out, lhs: &str, rhs: &str) -> Outcome {
    let x = parse_element(cfg, "lhs", lhs)?;
    let y = parse_element(cfg, "rhs", rhs)?;
    let p = x.mul(&y).map_err(|e| Failure::Input(e.to_string()))?;
    out.emit(&json!({"product": p.to_string(), "support_size": p.support_size(), "terms": p.to_json()}), || {
        format!("{p}\nsupp {}", p.support_size())
    });
    Ok(0)
}

fn cmd_annihilate_check(cfg: &RunConfig, out: &mut Out, a: &str, b: &str) -> Outcome {
    let x = parse_element(cfg, "a", a)?;
    let y = parse_element(cfg, "b", b)?;
    let p = x.mul(&y).map_err(|e| Failure::Input(e.to_string()))?;
    let zero = p.is_zero();
    out.emit(&json!({"annihilates": zero, "product": p.to_string()}), || {
        format!("a*b = {p}\nannihilates: {zero}")
    });
    Ok(if zero { 0 } else { 3 })
}

fn cmd_recover(cfg: &RunConfig, out: &mut Out, a: &str, b: &str) -> Outcome {
    let (_, _, rec) = recover(cfg, a, b)?;
    let v = recovered_json(cfg, &rec);
    out.emit(&v, || match &rec.kind {
        Recovered::Structure { structure: s, .. } => format!(
            "n = {}, k_c = {}, k_p = {}\nf = {:?}\nphi = {:?}\ntau = {:?}",
            s.n,
            s.k_c,
            s.k_p,
            s.f.one_based(),
            s.phi.one_based(),
            s.tau.one_based()
        ),
        Recovered::Cycle { h } => format!("no cancellation; h = {:?}", h.one_based()),
    });
    Ok(0)
}

fn cmd_extract(cfg: &RunConfig, out: &mut Out, a: &str, b: &str, trace: bool) -> Outcome {
    let (t, _, rec) = recover(cfg, a, b)?;
    let internal = |e: zdiv_core::cancellation::CancellationError| Failure::Internal(e.to_string());
    let mut v = recovered_json(cfg, &rec);
    let mut lines = Vec::new();
    match &rec.kind {
        Recovered::Structure { structure, .. } => {
            for (key, rel) in [
                ("relation_b", extract_relation_b(structure).map_err(internal)?),
                ("relation_m", extract_relation_m(structure).map_err(internal)?),
            ] {
                let ok = verified(&t, &rel.word);
                v[key] = json!({"raw": rel.raw(), "reduced": rel.word.to_string(), "verified": ok});
                lines.push(format!("{key}: {} = {} (verified: {ok})", rel.raw(), rel.word));
            }
            let ps = build_pair_sets(structure).map_err(internal)?;
            let mut cycles = Vec::new();
            for which in [Which::B, Which::M] {
                for c in ps.cycles(which) {
                    let rel = c.relation();
                    let ok = verified(&t, &rel.word);
                    lines.push(format!("{which:?} cycle: {} (verified: {ok})", rel.word));
                    cycles.push(json!({
                        "which": which,
                        "length": c.cycle_len(),
                        "reduced": rel.word.to_string(),
                        "verified": ok,
                    }));
                }
            }
            v["cycles"] = Value::Array(cycles);
            if trace {
                v["trace"] = json!({"pair_sets": ps, "cycles_b": ps.cycles(Which::B), "cycles_m": ps.cycles(Which::M)});
            }
        }
        Recovered::Cycle { h } => {
            let w = extract_cycle_relation(h).map_err(internal)?;
            let ok = verified(&t, &w);
            v["relation_cycle"] = json!({"reduced": w.to_string(), "verified": ok});
            lines.push(format!("relation: {w} (verified: {ok})"));
        }
    }
    out.emit(&v, || lines.join("\n"));
    Ok(0)
}

fn cmd_enumerate(out: &mut Out, n: usize, full: bool, k_c: Option<usize>, count: bool) -> Outcome {
    let mut plan = EnumerationPlan::new(n, if full { Symmetry::Full } else { Symmetry::FixFIdentity });
    plan.filters.extend(k_c.map(StructureFilter::KC));
    if count {
        let c = enumerate_structures(&plan).count();
        out.emit(&json!({"n": n, "count": c}), || format!("{c}"));
        return Ok(0);
    }
    for cs in enumerate_structures(&plan) {
        out.emit(&structure_json(&cs), || {
            format!(
                "k_c={} k_p={} f={:?} phi={:?} tau={:?}",
                cs.k_c,
                cs.k_p,
                cs.f.one_based(),
                cs.phi.one_based(),
                cs.tau.one_based()
            )
        });
    }
    Ok(0)
}

fn parse_alpha_list(field: FieldSpec, text: &str) -> Result<Vec<(Scalar, Scalar)>, Failure> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| config::parse_alpha_pair(field, pair).map_err(Failure::Input))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_scan(
    cfg: &RunConfig,
    out: &mut Out,
    a: &str,
    n_max: usize,
    verbose: bool,
    timing: bool,
    full: bool,
    alpha_list: Option<&str>,
) -> Outcome {
    let base = triple(cfg, &parse_element(cfg, "a", a)?)?;
    if !cfg.group.is_torsion_free() {
        eprintln!("warning: {} has torsion; feasible structures are expected", cfg.group);
    }
    let alphas = match alpha_list {
        Some(list) => parse_alpha_list(cfg.field, list)?,
        None => vec![(base.alpha1.clone(), base.alpha2.clone())],
    };
    if alphas.iter().any(|(x, y)| x.is_zero() || y.is_zero()) {
        return Err(Failure::Input("alphas must be nonzero".into()));
    }
    let opts = ScanOptions {
        symmetry: if full { Symmetry::Full } else { Symmetry::FixFIdentity },
        workers: cfg.workers,
        keep_verdicts: verbose,
        seed: cfg.seed,
    };
    let mut found = false;
    for (a1, a2) in alphas {
        let t = SupportTriple { alpha1: a1, alpha2: a2, ..base.clone() };
        let a_text = t.to_element().to_string();
        for n in 2..=n_max {
            let mut report = scan_support(&t, n, &opts).map_err(|e| Failure::Internal(e.to_string()))?;
            if timing {
                eprintln!("n = {n}: {:.3} s", report.wall_time.as_secs_f64());
            }
            if let Some(verdicts) = report.verdicts.take() {
                for sv in verdicts {
                    out.emit(&json!({"a": a_text, "n": n, "structure": sv.structure, "verdict": sv.verdict}), || {
                        format!(
                            "n={n} f={:?} phi={:?} tau={:?}: {}",
                            sv.structure.f.one_based(),
                            sv.structure.phi.one_based(),
                            sv.structure.tau.one_based(),
                            sv.verdict.kind()
                        )
                    });
                }
            }
            found |= report.feasible_count > 0;
            let mut v = serde_json::to_value(&report).expect("serializable");
            v["a"] = json!(a_text);
            out.emit(&v, || {
                let mut s = format!(
                    "a = {a_text}, n = {n}: {} valid, {} word, {} distinct, {} coeff, {} feasible",
                    report.structures_valid,
                    report.word_killed,
                    report.distinct_killed,
                    report.coeff_killed,
                    report.feasible_count
                );
                if let Some(w) = &report.witness {
                    if let zdiv_core::Verdict::Feasible { witness, .. } = &w.verdict {
                        s.push_str(&format!("\nwitness b = {witness}"));
                    }
                }
                s
            });
        }
    }
    Ok(if found { 10 } else { 0 })
}

fn cmd_search_direct(cfg: &RunConfig, out: &mut Out, a: &str, n_max: usize, radius: u32) -> Outcome {
    let a = parse_element(cfg, "a", a)?;
    if a.is_zero() {
        return Err(Failure::Precondition("a must be nonzero".into()));
    }
    let report = search_annihilator_direct(&a, n_max, radius);
    let witness = report.witness.as_ref().map(|b| b.to_json());
    out.emit(
        &json!({"supports_checked": report.supports_checked, "found": report.witness.is_some(), "witness": witness}),
        || match &report.witness {
            Some(b) => format!("witness b = {b} ({} supports checked)", report.supports_checked),
            None => format!("none ({} supports checked)", report.supports_checked),
        },
    );
    Ok(if report.witness.is_some() { 10 } else { 0 })
}

fn cmd_make_instance(cfg: &RunConfig, out: &mut Out, c: Option<&str>, terms: usize) -> Outcome {
    use rand::SeedableRng;
    let precondition = |e: zdiv_core::search::SearchError| match e {
        zdiv_core::search::SearchError::DegenerateC => Failure::Precondition(e.to_string()),
        zdiv_core::search::SearchError::NoOrderThree(_) => Failure::Precondition(e.to_string()),
        zdiv_core::search::SearchError::Algebra(e) => Failure::Input(e.to_string()),
    };
    let inst = match c {
        Some(text) => {
            let c = parse_element(cfg, "c", text)?;
            make_torsion_instance(&cfg.group, cfg.field, &c).map_err(precondition)?
        }
        None => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            random_torsion_instance(&cfg.group, cfg.field, &mut rng, terms, 2).map_err(precondition)?
        }
    };
    let h = cfg.group.render(&inst.h);
    out.emit(
        &json!({"h": h, "a": inst.a.to_string(), "b": inst.b.to_string(), "n": inst.b.support_size()}),
        || format!("h = {h}\na = {}\nb = {}", inst.a, inst.b),
    );
    Ok(0)
}

fn cmd_selftest(cfg: &RunConfig, out: &mut Out) -> Outcome {
    let results = run_selftest(cfg.seed, cfg.workers);
    let mut all = true;
    for r in &results {
        all &= r.passed;
        out.emit(&serde_json::to_value(r).expect("serializable"), || {
            let status = if r.passed { "PASS" } else { "FAIL" };
            match &r.failure {
                Some(m) => format!("{status} {} ({} cases): {m}", r.suite, r.cases),
                None => format!("{status} {} ({} cases)", r.suite, r.cases),
            }
        });
    }
    Ok(if all { 0 } else { 1 })
}

fn run(cli: Cli) -> Outcome {
    let cfg = RunConfig::resolve(&cli.global).map_err(Failure::Input)?;
    let mut out = Out { format: cfg.output, stdout: std::io::stdout().lock() };
    match &cli.command {
        Command::Mul { lhs, rhs } => cmd_mul(&cfg, &mut out, lhs, rhs),
        Command::AnnihilateCheck { a, b } => cmd_annihilate_check(&cfg, &mut out, a, b),
        Command::Recover { a, b } => cmd_recover(&cfg, &mut out, a, b),
        Command::Extract { a, b, trace } => cmd_extract(&cfg, &mut out, a, b, *trace),
        Command::Enumerate { n, full, k_c, count } => cmd_enumerate(&mut out, *n, *full, *k_c, *count),
        Command::Scan { a, n_max, verbose, timing, full, alpha_list } => {
            cmd_scan(&cfg, &mut out, a, *n_max, *verbose, *timing, *full, alpha_list.as_deref())
        }
        Command::SearchDirect { a, n_max, radius } => cmd_search_direct(&cfg, &mut out, a, *n_max, *radius),
        Command::MakeInstance { c, terms } => cmd_make_instance(&cfg, &mut out, c.as_deref(), *terms),
        Command::Selftest => cmd_selftest(&cfg, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
