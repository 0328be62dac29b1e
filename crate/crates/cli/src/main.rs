//! `rdes`: calculate, refine and cross-check reactive contracts.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rdes_core::contracts::{Calculus, Contract, Tri};
use rdes_core::dsl::{load, parse_contract_spec, parse_expr, typecheck_expr, ExprScope, TypedProgram};
use rdes_core::gen::{rng, ProgGen};
use rdes_core::kleene::unfold_star;
use rdes_core::laws::{run_all, LawsReport};
use rdes_core::oracle::{cross_check, observations_json, CrossReport, Oracle};
use rdes_core::relalg::RRel;
use rdes_core::state::Env;
use rdes_core::verify::{check_deadlock_free, check_program_invariant, refine, Invariant, Report};
use rdes_core::Bounds;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rdes", version, about = "Reactive contract calculator and bounded verifier")]
struct Cli {
    #[command(flatten)]
    cfg: Config,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Config {
    /// Longest trace explored by ground checks.
    #[arg(long, global = true, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    trace_bound: u64,
    /// Unfolding depth used when displaying iterations with `calc --unfold`.
    #[arg(long, global = true, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    star_bound: u64,
    /// Iteration limit for weakest preconditions of loops.
    #[arg(long, global = true, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    wp_bound: u64,
    /// Iterations of any single loop explored by the oracle.
    #[arg(long, global = true, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    depth: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for random generation.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

impl Config {
    fn bounds(&self) -> Bounds {
        Bounds { trace: self.trace_bound as usize, star: self.star_bound as usize, wp: self.wp_bound as usize }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct InvArgs {
    /// Pericondition invariant over `tt`, the state and acceptances.
    #[arg(long, conflicts_with = "invariant_file")]
    invariant: Option<String>,
    /// Invariant contract with `pre:`, `peri:` and `post:` lines.
    #[arg(long)]
    invariant_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Calculate and print the contract of a program.
    Calc {
        file: PathBuf,
        /// Also print postconditions with iterations unfolded to the star bound.
        #[arg(long)]
        unfold: bool,
    },
    /// Check that an implementation refines a specification (`.rc` or `.rp`).
    Refine {
        spec: PathBuf,
        imp: PathBuf,
        #[command(flatten)]
        inv: InvArgs,
    },
    /// Check deadlock freedom.
    Dlf { file: PathBuf },
    /// Check a loop invariant for `[x := e ;] while b do P`.
    InvCheck {
        file: PathBuf,
        #[command(flatten)]
        inv: InvArgs,
        /// Specification to discharge against the invariant contract.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Enumerate ground observations of a program directly.
    Oracle {
        file: PathBuf,
        /// Write the observations as JSON to this file.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Compare calculated contracts with the oracle.
    Crosscheck {
        file: Option<PathBuf>,
        /// Number of random star-free programs.
        #[arg(long, conflicts_with = "file")]
        random: Option<usize>,
        /// Number of random programs with productive loops.
        #[arg(long, default_value_t = 0)]
        loops: usize,
    },
    /// Run the randomized algebraic law suites.
    Laws {
        #[arg(long, default_value_t = 500)]
        instances: usize,
        #[arg(long, default_value_t = 200)]
        ka_instances: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.cfg.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn program(path: &Path) -> anyhow::Result<TypedProgram> {
    load(&read(path)?).with_context(|| path.display().to_string())
}

fn calculate(cfg: &Config, p: &TypedProgram) -> anyhow::Result<Contract> {
    Ok(Calculus::new(&p.env).with_wp_bound(cfg.wp_bound as usize).calculate(&p.proc)?)
}

fn is_contract_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "rc" || e == "inv")
}

/// A specification read as a contract file or calculated from a program
/// with the same declarations.
fn spec(cfg: &Config, path: &Path, env: &Env) -> anyhow::Result<Contract> {
    if is_contract_file(path) {
        return parse_contract_spec(env, &read(path)?).with_context(|| path.display().to_string());
    }
    let p = program(path)?;
    if &p.env != env {
        bail!("{} declares different variables or channels from the implementation", path.display());
    }
    calculate(cfg, &p)
}

fn invariant(inv: &InvArgs, env: &Env) -> anyhow::Result<Option<Invariant>> {
    if let Some(src) = &inv.invariant {
        let e = typecheck_expr(env, &parse_expr(src)?, ExprScope::Peri)?;
        return Ok(Some(Invariant::peri(RRel::Pred(e.fold()))));
    }
    if let Some(path) = &inv.invariant_file {
        let c = parse_contract_spec(env, &read(path)?).with_context(|| path.display().to_string())?;
        return Ok(Some(Invariant { i1: c.pre, i2: c.peri, i3: c.post }));
    }
    Ok(None)
}

fn tri(t: Tri) -> &'static str {
    match t {
        Tri::Yes => "yes",
        Tri::No => "no",
        Tri::Unknown => "unknown",
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn print_report(cfg: &Config, r: &Report) -> u8 {
    match cfg.format {
        Format::Json => print_json(&serde_json::to_value(r).expect("serializable")),
        Format::Text => {
            println!("{}", r.verdict);
            for d in &r.obligations {
                println!("  [{}] {}", d.verdict.name(), d.obligation);
            }
            for n in &r.notes {
                println!("  note: {n}");
            }
        }
    }
    r.verdict.exit_code() as u8
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let cfg = &cli.cfg;
    let bounds = cfg.bounds();
    match &cli.cmd {
        Cmd::Calc { file, unfold } => {
            let p = program(file)?;
            let c = calculate(cfg, &p)?;
            let unfolded = if *unfold && c.post.contains_star() {
                Some(unfold_star_in(&p.env, &c.post, bounds.star)?)
            } else {
                None
            };
            match cfg.format {
                Format::Json => {
                    let mut v = c.to_json();
                    if let Some(u) = &unfolded {
                        v["post_unfolded"] = json!(u.to_string());
                    }
                    print_json(&v);
                }
                Format::Text => {
                    println!("{c}");
                    println!("productive: {}, instantaneous: {}", tri(c.flags.productive), tri(c.flags.instantaneous));
                    if let Some(u) = unfolded {
                        println!("post unfolded to {}: {u}", bounds.star);
                    }
                }
            }
            Ok(0)
        }
        Cmd::Refine { spec: spec_path, imp, inv } => {
            let p = program(imp)?;
            let s = spec(cfg, spec_path, &p.env)?;
            let report = match invariant(inv, &p.env)? {
                Some(i) => check_program_invariant(&p, &i, Some(&s), bounds)?,
                None => refine(&p.env, &s, &calculate(cfg, &p)?, bounds),
            };
            Ok(print_report(cfg, &report))
        }
        Cmd::Dlf { file } => {
            let p = program(file)?;
            let c = calculate(cfg, &p)?;
            Ok(print_report(cfg, &check_deadlock_free(&p.env, &c, bounds)))
        }
        Cmd::InvCheck { file, inv, spec: spec_path } => {
            let p = program(file)?;
            let Some(i) = invariant(inv, &p.env)? else { bail!("an invariant is required (--invariant or --invariant-file)") };
            let s = spec_path.as_deref().map(|sp| spec(cfg, sp, &p.env)).transpose()?;
            Ok(print_report(cfg, &check_program_invariant(&p, &i, s.as_ref(), bounds)?))
        }
        Cmd::Oracle { file, emit } => {
            let p = program(file)?;
            let o = Oracle::new(&p.env, cfg.depth as usize, bounds.trace);
            let per_state: Vec<_> = p.env.valuations().iter().map(|s| (s.clone(), o.enumerate(&p.proc, s))).collect();
            let v = observations_json(&per_state);
            if let Some(path) = emit {
                std::fs::write(path, serde_json::to_string_pretty(&v)?)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            match cfg.format {
                Format::Json => print_json(&v),
                Format::Text => {
                    for (s, obs) in &per_state {
                        println!("from {s}:");
                        for ob in obs.list() {
                            println!("  {ob}");
                        }
                    }
                }
            }
            Ok(0)
        }
        Cmd::Crosscheck { file, random, loops } => crosscheck(cfg, file.as_deref(), *random, *loops),
        Cmd::Laws { instances, ka_instances } => {
            let rep = run_all(cfg.seed, *instances, *ka_instances, bounds.trace);
            print_laws(cfg, &rep);
            Ok(if rep.passed() { 0 } else { 1 })
        }
    }
}

fn unfold_star_in(env: &Env, r: &RRel, k: usize) -> anyhow::Result<RRel> {
    Ok(match r {
        RRel::Star(body) => unfold_star(env, body, k)?,
        RRel::Or(xs) => RRel::Or(xs.iter().map(|x| unfold_star_in(env, x, k)).collect::<anyhow::Result<_>>()?),
        RRel::Seq(a, b) => RRel::seq(unfold_star_in(env, a, k)?, unfold_star_in(env, b, k)?),
        other => other.clone(),
    })
}

fn print_laws(cfg: &Config, rep: &LawsReport) {
    match cfg.format {
        Format::Json => print_json(&serde_json::to_value(rep).expect("serializable")),
        Format::Text => {
            for r in &rep.results {
                let status = if r.passed() { "PASS" } else { "FAIL" };
                print!("{status} {:<24} {} instances", r.law, r.instances);
                if r.vacuous > 0 {
                    print!(", {} vacuous", r.vacuous);
                }
                if r.failures > 0 {
                    print!(", {} failures", r.failures);
                }
                println!();
                if let Some(f) = &r.first_failure {
                    println!("    {f}");
                }
            }
        }
    }
}

fn crosscheck(cfg: &Config, file: Option<&Path>, random: Option<usize>, loops: usize) -> anyhow::Result<u8> {
    let (depth, trace, wp) = (cfg.depth as usize, cfg.trace_bound as usize, cfg.wp_bound as usize);
    let mut reports: Vec<(String, CrossReport)> = Vec::new();
    if let Some(path) = file {
        let p = program(path)?;
        reports.push((path.display().to_string(), cross_check(&p, depth, trace, wp)?));
    } else {
        let n = random.unwrap_or(0);
        if n == 0 && loops == 0 {
            bail!("give a program file or --random N and/or --loops M");
        }
        let g = ProgGen::new();
        let mut r = rng(cfg.seed);
        let mut bodies: Vec<_> = (0..n).map(|_| g.star_free(&mut r, 4)).collect();
        bodies.extend((0..loops).map(|_| g.with_loop(&mut r, 3)));
        for body in bodies {
            let text = body.to_string();
            let p = g.typed(body)?;
            let rep = cross_check(&p, depth, trace, wp).with_context(|| text.clone())?;
            reports.push((text, rep));
        }
    }
    let failing = reports.iter().filter(|(_, r)| !r.agrees()).count();
    match cfg.format {
        Format::Json => print_json(&json!({
            "programs": reports.len(),
            "failing": failing,
            "reports": reports.iter().map(|(name, r)| json!({"program": name, "report": r})).collect::<Vec<_>>(),
        })),
        Format::Text => {
            for (name, r) in &reports {
                if !r.agrees() || reports.len() == 1 {
                    println!("{name}");
                    println!("  contract: {}", r.contract);
                    println!("  {} states, {} observations, {} cuts, {} diffs", r.states, r.observations, r.cuts, r.diffs.len());
                    for d in &r.diffs {
                        println!("  {d}");
                    }
                }
            }
            println!("{} programs, {} with differences", reports.len(), failing);
        }
    }
    Ok(if failing == 0 { 0 } else { 1 })
}
