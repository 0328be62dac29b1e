//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p rdes-core --test acceptance`.

use rdes_core::contracts::{Calculus, Contract};
use rdes_core::corpus;
use rdes_core::dsl::{load, parse_contract_spec, parse_expr, typecheck_expr, ExprScope, TypedProgram};
use rdes_core::gen::{rng, ProgGen};
use rdes_core::laws::{contract_laws, ka_laws, relation_laws, LawResult};
use rdes_core::oracle::cross_check;
use rdes_core::relalg::RRel;
use rdes_core::state::show_trace;
use rdes_core::verify::{check_deadlock_free, check_program_invariant, Invariant, Verdict};
use rdes_core::{Bounds, Error};
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

const LAW_INSTANCES: usize = 500;
const KA_INSTANCES: usize = 200;
const KA_DEPTH: u32 = 3;
const TRACE_BOUND: usize = 4;
const STAR_FREE_PROGRAMS: usize = 200;
const LOOP_PROGRAMS: usize = 50;
const SEED: u64 = 42;
const ORACLE_DEPTH: usize = 64;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn calc(src: &str) -> Result<(TypedProgram, Contract), String> {
    let p = load(src).map_err(|e| e.to_string())?;
    let c = Calculus::new(&p.env).calculate(&p.proc).map_err(|e| e.to_string())?;
    Ok((p, c))
}

fn disjuncts(r: &RRel) -> BTreeSet<String> {
    r.disjuncts().iter().map(|d| d.to_string()).collect()
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn example_2() -> Outcome {
    let expected = "⦗true_r | E(true | <> | {a.1}) | Phi(true | {x ↦ 3} | <a.1>)⦘";
    let (_, l) = calc(corpus::EX2_LHS)?;
    let (_, r) = calc(corpus::EX2_RHS)?;
    ensure(l == r, || format!("sides differ: {l} vs {r}"))?;
    ensure(l.to_string() == expected, || format!("got {l}"))?;
    Ok(l.to_string())
}

fn choice_pericondition() -> Outcome {
    let (_, c) = calc(corpus::CHOICE)?;
    let want = set(&["E(true | <> | {a, c})", "E(true | <a> | {b})"]);
    ensure(disjuncts(&c.peri) == want, || format!("got {}", c.peri))?;
    Ok(c.peri.to_string())
}

fn buffer_body() -> Outcome {
    let (_, c) = calc(corpus::BUFFER_BODY)?;
    ensure(c.pre.is_true(), || format!("pre is {}", c.pre))?;
    // B2: one quiescent atom, inputs always enabled, output enabled on a non-empty buffer
    let b2 = set(&["E(true | <> | {inp.*} ∪ ({out.head(bf)} ◁ #bf > 0 ▷ ∅))"]);
    ensure(disjuncts(&c.peri) == b2, || format!("peri is {}", c.peri))?;
    // B3: the input disjunct instantiated for each value of the domain, and the guarded output
    let b3 = set(&[
        "Phi(#bf > 0 | {bf ↦ tail(bf)} | <out.head(bf)>)",
        "Phi(true | {bf ↦ bf ^ <0>} | <inp.0>)",
        "Phi(true | {bf ↦ bf ^ <1>} | <inp.1>)",
    ]);
    ensure(disjuncts(&c.post) == b3, || format!("post is {}", c.post))?;
    Ok(c.to_string())
}

fn deadlock_freedom() -> Outcome {
    let bounds = Bounds { trace: TRACE_BOUND, ..Bounds::default() };
    let (p, c) = calc(corpus::BUFFER)?;
    let v = check_deadlock_free(&p.env, &c, bounds).verdict;
    ensure(v.is_verified(), || format!("buffer: {v}"))?;
    let mut out = vec![format!("buffer {}", v.name())];
    for (name, src, trace) in [("stop", corpus::STOP, "<>"), ("a->stop", corpus::A_STOP, "<a>")] {
        let (p, c) = calc(src)?;
        match check_deadlock_free(&p.env, &c, bounds).verdict {
            Verdict::Refuted { witness } => {
                ensure(show_trace(&witness.trace) == trace, || format!("{name}: witness {witness}"))?;
                ensure(witness.accepts.as_ref().is_some_and(|a| a.is_empty()), || format!("{name}: witness {witness}"))?;
                out.push(format!("{name} Refuted after {trace}"));
            }
            v => return Err(format!("{name}: {v}")),
        }
    }
    Ok(out.join(", "))
}

fn buffer_order() -> Outcome {
    let p = load(corpus::BUFFER).map_err(|e| e.to_string())?;
    let spec = parse_contract_spec(&p.env, corpus::ORDER_SPEC).map_err(|e| e.to_string())?;
    let i2 = parse_expr("outps(tt) <= bf ^ inps(tt)").map_err(|e| e.to_string())?;
    let i2 = typecheck_expr(&p.env, &i2, ExprScope::Peri).map_err(|e| e.to_string())?;
    let bounds = Bounds { trace: TRACE_BOUND, ..Bounds::default() };
    let r = check_program_invariant(&p, &Invariant::peri(RRel::Pred(i2)), Some(&spec), bounds).map_err(|e| e.to_string())?;
    let cond2: Vec<_> = r.obligations.iter().filter(|d| d.obligation.starts_with("(2)")).collect();
    let prefix: Vec<_> = r.obligations.iter().filter(|d| d.obligation.starts_with("assign-prefix")).collect();
    ensure(cond2.len() == 2, || format!("{} condition-(2) obligations", cond2.len()))?;
    ensure(!prefix.is_empty(), || "no assign-prefix obligations".into())?;
    for d in cond2.iter().chain(&prefix) {
        ensure(d.verdict.is_verified(), || format!("{}: {}", d.obligation, d.verdict))?;
    }
    ensure(r.verdict.is_verified(), || r.verdict.to_string())?;
    Ok(format!("{} obligations Verified", r.obligations.len()))
}

fn summarize(results: &[LawResult], min_instances: usize) -> Outcome {
    let mut total = 0;
    for r in results {
        ensure(r.instances >= min_instances, || format!("{}: only {} instances", r.law, r.instances))?;
        ensure(r.passed(), || format!("{}: {} failures, e.g. {:?}", r.law, r.failures, r.first_failure))?;
        total += r.instances;
    }
    Ok(format!("{} laws, {total} instances, 0 failures", results.len()))
}

fn law_suites() -> Outcome {
    let mut rs = relation_laws(SEED, LAW_INSTANCES, TRACE_BOUND);
    rs.extend(contract_laws(SEED, LAW_INSTANCES, TRACE_BOUND));
    summarize(&rs, LAW_INSTANCES)
}

fn ka_suite() -> Outcome {
    let rs = ka_laws(SEED, KA_INSTANCES, KA_DEPTH, TRACE_BOUND);
    let names: BTreeSet<&str> = rs.iter().map(|r| r.law.as_str()).collect();
    for law in ["star-star", "star-unfold", "star-denest", "star-slide", "star-unfold-leq", "star-induct-left", "star-induct-right"] {
        ensure(names.contains(law), || format!("missing {law}"))?;
    }
    summarize(&rs, KA_INSTANCES)
}

fn oracle_cross_check() -> Outcome {
    let g = ProgGen::new();
    let mut r = rng(SEED);
    let mut bodies: Vec<_> = (0..STAR_FREE_PROGRAMS).map(|_| g.star_free(&mut r, 4)).collect();
    bodies.extend((0..LOOP_PROGRAMS).map(|_| g.with_loop(&mut r, 3)));
    let mut loops = 0;
    for body in bodies {
        let text = body.to_string();
        let p = g.typed(body).map_err(|e| format!("{text}: {e}"))?;
        loops += p.proc.contains_while() as usize;
        let rep = cross_check(&p, ORACLE_DEPTH, TRACE_BOUND, 16).map_err(|e| format!("{text}: {e}"))?;
        ensure(rep.agrees(), || format!("{text}: {}", rep.diffs[0]))?;
    }
    ensure(loops >= LOOP_PROGRAMS, || format!("only {loops} programs contain loops"))?;
    Ok(format!("{} programs ({loops} with loops), 0 diffs", STAR_FREE_PROGRAMS + LOOP_PROGRAMS))
}

fn negative_controls() -> Outcome {
    for src in [
        "var x : int[0..3]\nwhile x < 3 do x := x + 1",
        "channel a\nwhile true do (a -> skip [] skip)",
        "var x : int[0..1]\nchannel a\nwhile x = 0 do (x := 1 ; a -> skip |~| skip)",
    ] {
        let p = load(src).map_err(|e| e.to_string())?;
        match Calculus::new(&p.env).calculate(&p.proc) {
            Err(Error::NotProductive { .. }) => {}
            other => return Err(format!("{src:?} gave {other:?}")),
        }
    }
    let (p, c) = calc(corpus::SPIN)?;
    let chaos = Calculus::new(&p.env).chaos();
    ensure(c.same_relations(&chaos), || format!("spin is {c}"))?;
    Ok(format!("3 bodies rejected, spin is {c}"))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("worked calculation: both sides agree", Duration::from_secs(1), example_2),
        ("external choice pericondition", Duration::from_secs(1), choice_pericondition),
        ("buffer loop body", Duration::from_secs(2), buffer_body),
        ("buffer deadlock freedom", Duration::from_secs(30), deadlock_freedom),
        ("buffer order by invariant", Duration::from_secs(60), buffer_order),
        ("relation and contract law suites", Duration::from_secs(600), law_suites),
        ("Kleene algebra suite", Duration::from_secs(600), ka_suite),
        ("oracle cross-check", Duration::from_secs(300), oracle_cross_check),
        ("negative controls", Duration::from_secs(10), negative_controls),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let res = f();
        let dt = t.elapsed();
        let res = match res {
            Ok(m) if dt > limit => Err(format!("took {dt:.2?}, limit {limit:?}; {m}")),
            other => other,
        };
        match res {
            Ok(m) => println!("PASS {} {name} ({dt:.2?}): {m}", i + 1),
            Err(m) => {
                failed += 1;
                println!("FAIL {} {name} ({dt:.2?}): {m}", i + 1)
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
