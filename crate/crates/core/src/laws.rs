//! Randomized law suites: each law is instantiated on generated atoms,
//! conditions, substitutions or contracts over small domains and both sides
//! are compared by ground enumeration from every initial state.

use crate::contracts::{Calculus, Contract};
use crate::dsl::Proc;
use crate::error::Result;
use crate::gen::{law_env, rng, ExprGen, GenRng, ProgGen};
use crate::kleene::ka_laws_check;
use crate::oracle::{contract_obs, Oracle};
use crate::relalg::ground::minimize;
use crate::relalg::{
    conj_quiescent, filter_r4, filter_r5, merge_cond, normalize, seq_final_final, seq_final_quiescent,
    seq_test, wp_final,
};
use crate::relalg::{Atom, Ground, PreNf, RRel};
use crate::state::{show_trace, AccSet, Env, EventTerm, Expr};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Aggregate outcome of one law over many random instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LawResult {
    pub law: String,
    pub instances: usize,
    pub failures: usize,
    /// Instances whose premise failed (implications only).
    pub vacuous: usize,
    pub first_failure: Option<String>,
}

impl LawResult {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LawsReport {
    pub seed: u64,
    pub trace_bound: usize,
    pub results: Vec<LawResult>,
}

impl LawsReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(LawResult::passed)
    }
}

/// Relation laws: composition, conditional, conjunction, weakest
/// precondition and trace filtering.
pub const RELATION_LAWS: &[&str] = &[
    "seq-test",
    "seq-final-final",
    "seq-final-quiet",
    "cond-final",
    "cond-quiet",
    "conj-quiet",
    "wp-final",
    "r4-filter",
    "r5-filter",
    "r4-r5-partition",
];

/// Contract laws for assignment, events and deadlock.
pub const CONTRACT_LAWS: &[&str] = &["assign-distributes", "assign-event", "assign-compose", "stop-left-zero"];

type Check = std::result::Result<(), String>;

/// Semantic comparison of relations by enumeration.
struct Sem<'a> {
    env: &'a Env,
    g: Ground<'a>,
    bound: usize,
    acc_sets: Vec<AccSet>,
}

impl<'a> Sem<'a> {
    fn new(env: &'a Env, bound: usize) -> Self {
        let alpha = env.alphabet();
        let acc_sets = (0u32..(1 << alpha.len()))
            .map(|m| alpha.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, e)| e.clone()).collect())
            .collect();
        Sem { env, g: Ground::new(env), bound, acc_sets }
    }

    /// Equal generated observations, and equal truth at every generated trace
    /// for every acceptance set and every generated final state.
    fn rel_eq(&self, what: &str, lhs: &RRel, rhs: &RRel) -> Check {
        for s in self.env.valuations() {
            let fl = self.g.finals(lhs, s, self.bound);
            let fr = self.g.finals(rhs, s, self.bound);
            if fl != fr {
                return Err(format!("{what}: finals differ from {s}: {lhs} vs {rhs}"));
            }
            let ql = minimize(self.g.quiets(lhs, s, self.bound));
            let qr = minimize(self.g.quiets(rhs, s, self.bound));
            if ql != qr {
                return Err(format!("{what}: quiescent observations differ from {s}: {lhs} vs {rhs}"));
            }
            for (t, s2) in &fl {
                if self.g.holds_post(lhs, s, t, s2) != self.g.holds_post(rhs, s, t, s2) {
                    return Err(format!("{what}: post differs at {s}, {}, {s2}", show_trace(t)));
                }
            }
            for (t, _) in &ql {
                for a in &self.acc_sets {
                    if self.g.holds_peri(lhs, s, t, a) != self.g.holds_peri(rhs, s, t, a) {
                        return Err(format!("{what}: peri differs at {s}, {}", show_trace(t)));
                    }
                }
            }
        }
        Ok(())
    }

    /// `lhs` compared with both a rewritten right-hand side and its
    /// normalization.
    fn law(&self, lhs: &RRel, rhs: &RRel) -> Check {
        self.rel_eq("law", lhs, rhs)?;
        let n = normalize(self.env, lhs).map_err(|e| format!("normalizing {lhs}: {e}"))?;
        self.rel_eq("normal form", lhs, &n)
    }
}

fn contract_eq(env: &Env, bound: usize, lhs: &Contract, rhs: &Contract) -> Check {
    for s in env.valuations() {
        let a = contract_obs(env, lhs, s, bound);
        let b = contract_obs(env, rhs, s, bound);
        if a != b {
            return Err(format!("from {s}: {lhs} vs {rhs}"));
        }
    }
    Ok(())
}

fn proc_eq(env: &Env, bound: usize, p: &Proc, c: &Contract) -> Check {
    let o = Oracle::new(env, 8, bound);
    for s in env.valuations() {
        if o.enumerate(p, s) != contract_obs(env, c, s, bound) {
            return Err(format!("oracle disagrees with {c} from {s}"));
        }
    }
    Ok(())
}

fn err(e: crate::Error) -> String {
    e.to_string()
}

fn quiet_with_trace(r: &mut GenRng, g: &ExprGen, t: &crate::relalg::TraceExpr) -> Atom {
    let b = if r.gen_bool(0.4) { Expr::bool(true) } else { g.cond(r, 1) };
    Atom::quiet(b, t.clone(), g.event_set(r, 2))
}

fn subst_event(sigma: &crate::state::Subst, e: &EventTerm) -> EventTerm {
    e.map_expr(&mut |x| sigma.apply(x))
}

/// One instance of a relation law, generated from `r`.
fn relation_instance(env: &Env, s: &Sem, law: &str, r: &mut GenRng) -> Check {
    let g = ExprGen::new(env);
    match law {
        "seq-test" => {
            let b = g.cond(r, 2);
            let p = g.atoms(r);
            let lhs = RRel::seq(RRel::Test(b.clone()), p.clone());
            let rhs = seq_test(env, &b, &p).map_err(err)?;
            s.law(&lhs, &rhs)
        }
        "seq-final-final" => {
            let (f1, f2) = (g.final_atom(r), g.final_atom(r));
            let lhs = RRel::seq(RRel::Atom(f1.clone()), RRel::Atom(f2.clone()));
            s.law(&lhs, &RRel::Atom(seq_final_final(&f1, &f2)))
        }
        "seq-final-quiet" => {
            let f = g.final_atom(r);
            let q = g.quiet_atom(r);
            let lhs = RRel::seq(RRel::Atom(f.clone()), RRel::Atom(q.clone()));
            s.law(&lhs, &RRel::Atom(seq_final_quiescent(&f, &q)))
        }
        "cond-final" | "cond-quiet" => {
            let (a1, a2) = if law == "cond-final" {
                (g.final_atom(r), g.final_atom(r))
            } else {
                (g.quiet_atom(r), g.quiet_atom(r))
            };
            let c = g.cond(r, 2);
            let (r1, r2) = (RRel::Atom(a1), RRel::Atom(a2));
            // (c ∧ r1) ∨ (¬c ∧ r2), with c read in the initial state
            let lhs = RRel::Or(vec![
                RRel::seq(RRel::Test(c.clone()), r1.clone()),
                RRel::seq(RRel::Test(Expr::not(c.clone())), r2.clone()),
            ]);
            let rhs = merge_cond(env, &r1, &c, &r2).map_err(err)?;
            s.rel_eq("law", &lhs, &rhs)
        }
        "conj-quiet" => {
            let t = g.trace(r, 2);
            let n = r.gen_range(1..=3);
            let atoms: Vec<Atom> = (0..n).map(|_| quiet_with_trace(r, &g, &t)).collect();
            let lhs = RRel::And(atoms.iter().cloned().map(RRel::Atom).collect());
            let rhs = RRel::Atom(conj_quiescent(env, &atoms).map_err(err)?);
            s.law(&lhs, &rhs)
        }
        "wp-final" => {
            let f = g.final_atom(r);
            let p = g.pre(r);
            let wp = wp_final(env, &f, &p);
            wp_direct(env, s.bound, &f, &p, &wp)
        }
        "r4-filter" | "r5-filter" => {
            let x = g.atoms(r);
            let (lhs, rhs) = if law == "r4-filter" {
                (RRel::r4(x.clone()), filter_r4(env, &x).map_err(err)?)
            } else {
                (RRel::r5(x.clone()), filter_r5(env, &x).map_err(err)?)
            };
            s.rel_eq("law", &lhs, &rhs)
        }
        "r4-r5-partition" => {
            let x = g.atoms(r);
            let r4 = filter_r4(env, &x).map_err(err)?;
            let r5 = filter_r5(env, &x).map_err(err)?;
            s.rel_eq("law", &x, &RRel::Or(vec![r4.clone(), r5.clone()]))?;
            for st in env.valuations() {
                let f4 = s.g.finals(&r4, st, s.bound);
                let q4 = s.g.quiets(&r4, st, s.bound);
                if s.g.finals(&r5, st, s.bound).iter().any(|o| f4.contains(o))
                    || s.g.quiets(&r5, st, s.bound).iter().any(|o| q4.contains(o))
                {
                    return Err(format!("filters overlap from {st} on {x}"));
                }
            }
            Ok(())
        }
        other => Err(format!("unknown law {other}")),
    }
}

/// Checks `wp` against `(b ∧ t ≤ tt) ⇒ P(σ(s), tt − t)` at every state and
/// every trace up to the bound.
fn wp_direct(env: &Env, bound: usize, f: &Atom, p: &PreNf, wp: &PreNf) -> Check {
    let Atom::Final { b, sigma, t } = f else { return Err("not a final atom".into()) };
    let traces = env.traces_upto(bound);
    for s in env.valuations() {
        let t0 = t.eval(s);
        let s1 = sigma.run(s);
        for tt in &traces {
            let direct = !(b.holds_in(s) && tt.starts_with(&t0)) || p.holds(&s1, &tt[t0.len()..]);
            if wp.holds(s, tt) != direct {
                return Err(format!("{f} wp {p} = {wp} is wrong at {s}, {}", show_trace(tt)));
            }
        }
    }
    Ok(())
}

fn contract_instance(env: &Env, bound: usize, law: &str, r: &mut GenRng) -> Check {
    let g = ExprGen::new(env);
    let calc = Calculus::new(env);
    let random_contract = |r: &mut GenRng| -> Result<Contract> {
        let peri = RRel::Or((0..r.gen_range(0..=2)).map(|_| RRel::Atom(g.quiet_atom(r))).collect());
        let post = RRel::Or((0..r.gen_range(0..=2)).map(|_| RRel::Atom(g.final_atom(r))).collect());
        calc.contract(g.pre(r), &peri, &post)
    };
    match law {
        "assign-distributes" => {
            let sigma = g.subst(r);
            let c = random_contract(r).map_err(err)?;
            let lhs = calc.seq(&calc.assign(&sigma).map_err(err)?, &c).map_err(err)?;
            let rhs = crate::verify::assign_then_contract_reduction(&sigma, &c);
            contract_eq(env, bound, &lhs, &rhs)
        }
        "assign-event" => {
            let sigma = g.subst(r);
            let e = g.event(r);
            let lhs = calc.seq(&calc.assign(&sigma).map_err(err)?, &calc.do_event(&e).map_err(err)?).map_err(err)?;
            let rhs = calc
                .seq(&calc.do_event(&subst_event(&sigma, &e)).map_err(err)?, &calc.assign(&sigma).map_err(err)?)
                .map_err(err)?;
            contract_eq(env, bound, &lhs, &rhs)?;
            proc_eq(env, bound, &Proc::seq(Proc::Assign(sigma), Proc::Do(e)), &rhs)
        }
        "assign-compose" => {
            let (sigma, rho) = (g.subst(r), g.subst(r));
            let lhs = calc.seq(&calc.assign(&sigma).map_err(err)?, &calc.assign(&rho).map_err(err)?).map_err(err)?;
            let composed = sigma.then(&rho);
            for s in env.valuations() {
                if rho.run(&sigma.run(s)) != composed.run(s) {
                    return Err(format!("composition of {sigma} and {rho} is wrong at {s}"));
                }
            }
            let rhs = calc.assign(&composed).map_err(err)?;
            contract_eq(env, bound, &lhs, &rhs)?;
            proc_eq(env, bound, &Proc::seq(Proc::Assign(sigma), Proc::Assign(rho)), &rhs)
        }
        "stop-left-zero" => {
            let c = random_contract(r).map_err(err)?;
            let lhs = calc.seq(&calc.stop(), &c).map_err(err)?;
            contract_eq(env, bound, &lhs, &calc.stop())
        }
        other => Err(format!("unknown law {other}")),
    }
}

/// Deadlock as a left zero for whole generated programs, via both the
/// calculus and the oracle.
fn stop_program_instance(bound: usize, r: &mut GenRng) -> Check {
    let pg = ProgGen::new();
    let body = pg.star_free(r, 3);
    let p = pg.typed(body).map_err(err)?;
    let env = &p.env;
    let calc = Calculus::new(env);
    let seq = Proc::seq(Proc::Stop, p.proc.clone());
    let c = calc.calculate(&seq).map_err(err)?;
    contract_eq(env, bound, &c, &calc.stop())?;
    proc_eq(env, bound, &seq, &calc.stop())
}

fn seed_for(seed: u64, law: &str, i: usize) -> u64 {
    let h = law.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    seed ^ h ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn aggregate(law: &str, outcomes: Vec<(Check, bool)>) -> LawResult {
    let failures: Vec<&String> = outcomes.iter().filter_map(|(c, _)| c.as_ref().err()).collect();
    LawResult {
        law: law.into(),
        instances: outcomes.len(),
        failures: failures.len(),
        vacuous: outcomes.iter().filter(|(_, v)| *v).count(),
        first_failure: failures.first().map(|s| s.to_string()),
    }
}

/// Relation laws over [`law_env`], `instances` each.
pub fn relation_laws(seed: u64, instances: usize, bound: usize) -> Vec<LawResult> {
    let env = law_env();
    let sem = Sem::new(&env, bound);
    RELATION_LAWS
        .iter()
        .map(|law| {
            let out = (0..instances)
                .into_par_iter()
                .map(|i| (relation_instance(&env, &sem, law, &mut rng(seed_for(seed, law, i))), false))
                .collect();
            aggregate(law, out)
        })
        .collect()
}

/// Contract laws over [`law_env`]; deadlock is additionally checked against
/// generated programs.
pub fn contract_laws(seed: u64, instances: usize, bound: usize) -> Vec<LawResult> {
    let env = law_env();
    CONTRACT_LAWS
        .iter()
        .map(|law| {
            let out = (0..instances)
                .into_par_iter()
                .map(|i| {
                    let mut r = rng(seed_for(seed, law, i));
                    let mut c = contract_instance(&env, bound, law, &mut r);
                    if c.is_ok() && *law == "stop-left-zero" {
                        c = stop_program_instance(bound, &mut r);
                    }
                    (c, false)
                })
                .collect();
            aggregate(law, out)
        })
        .collect()
}

/// Star identities and weak Kleene algebra axioms on generated star-free
/// terms of the given depth, one result per law.
pub fn ka_laws(seed: u64, instances: usize, depth: u32, bound: usize) -> Vec<LawResult> {
    let env = law_env();
    let reports: Vec<_> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut r = rng(seed_for(seed, "ka", i));
            let g = ExprGen::new(&env);
            let t: Vec<RRel> = (0..4).map(|_| g.ka_term(&mut r, depth)).collect();
            ka_laws_check(&env, &t[0], &t[1], &t[2], &t[3], bound)
        })
        .collect();
    let Some(first) = reports.first() else { return vec![] };
    first
        .checks
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let out = reports
                .iter()
                .map(|rep| {
                    let ck = &rep.checks[k];
                    let res = if ck.holds { Ok(()) } else { Err(ck.witness.clone().unwrap_or_default()) };
                    (res, ck.vacuous)
                })
                .collect();
            aggregate(&c.law, out)
        })
        .collect()
}

/// Every suite: relation and contract laws with `instances` each, and the
/// algebra laws with `ka_instances` terms of depth 3.
pub fn run_all(seed: u64, instances: usize, ka_instances: usize, bound: usize) -> LawsReport {
    let mut results = relation_laws(seed, instances, bound);
    results.extend(contract_laws(seed, instances, bound));
    results.extend(ka_laws(seed, ka_instances, 3, bound));
    LawsReport { seed, trace_bound: bound, results }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        for res in relation_laws(7, 20, 3).into_iter().chain(contract_laws(7, 10, 3)).chain(ka_laws(7, 5, 2, 3)) {
            assert!(res.passed(), "{}: {:?}", res.law, res.first_failure);
            assert!(res.instances > 0);
        }
    }

    #[test]
    fn wp_direct_catches_a_wrong_answer() {
        let env = law_env();
        let f = Atom::fin(Expr::bool(true), crate::state::Subst::id(), crate::relalg::TraceExpr::one(EventTerm::plain("a")));
        assert!(wp_direct(&env, 3, &f, &PreNf::false_r(), &PreNf::true_r()).is_err());
        assert!(wp_direct(&env, 3, &f, &PreNf::false_r(), &wp_final(&env, &f, &PreNf::false_r())).is_ok());
    }
}
