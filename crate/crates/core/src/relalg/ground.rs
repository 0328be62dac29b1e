//! Ground semantics of relations by bounded enumeration.
//!
//! Quiescent observations are up-closed in the acceptance set, so generators
//! return the minimal acceptance sets only. Relations are required to be
//! monotone in acceptance (checked for predicates by `accepts_positive`).

use super::{Atom, PreNf, RRel};
use crate::state::{AccSet, Env, EvalCtx, Event, GroundTrace, Valuation};
use std::collections::BTreeSet;

pub type Finals = BTreeSet<(GroundTrace, Valuation)>;
pub type Quiets = BTreeSet<(GroundTrace, AccSet)>;

#[derive(Clone, Copy)]
pub struct Ground<'a> {
    pub env: &'a Env,
}


fn cat(a: &[Event], b: &[Event]) -> GroundTrace {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

/// Relations whose truth does not depend on the acceptance set and which are
/// better evaluated as filters than generated.
fn is_filter(r: &RRel) -> bool {
    match r {
        RRel::True | RRel::NegInit(..) | RRel::Atom(Atom::Init { .. }) => true,
        RRel::Pred(e) => !e.mentions_accepts(),
        RRel::And(xs) | RRel::Or(xs) => xs.iter().all(is_filter),
        _ => false,
    }
}

impl<'a> Ground<'a> {
    pub fn new(env: &'a Env) -> Self {
        Ground { env }
    }

    /// Terminating observations `(tt, st')` from `s` with `#tt ≤ budget`.
    pub fn finals(&self, r: &RRel, s: &Valuation, budget: usize) -> Finals {
        match r {
            RRel::False => Finals::new(),
            RRel::Atom(Atom::Final { b, sigma, t }) => {
                let mut out = Finals::new();
                if b.holds_in(s) {
                    let tr = t.eval(s);
                    if tr.len() <= budget {
                        out.insert((tr, sigma.run(s)));
                    }
                }
                out
            }
            RRel::Atom(Atom::Quiet { .. }) => Finals::new(),
            RRel::Test(b) => {
                let mut out = Finals::new();
                if b.holds_in(s) {
                    out.insert((vec![], s.clone()));
                }
                out
            }
            RRel::Or(xs) => xs.iter().flat_map(|x| self.finals(x, s, budget)).collect(),
            RRel::And(xs) => {
                let (filters, gens): (Vec<&RRel>, Vec<&RRel>) = xs.iter().partition(|x| is_filter(x));
                if gens.is_empty() {
                    return self.finals_by_search(r, s, budget);
                }
                let mut acc = self.finals(gens[0], s, budget);
                for g in &gens[1..] {
                    let other = self.finals(g, s, budget);
                    acc.retain(|o| other.contains(o));
                }
                acc.retain(|(t, s2)| filters.iter().all(|f| self.holds_post(f, s, t, s2)));
                acc
            }
            RRel::Seq(a, b) => {
                let mut out = Finals::new();
                for (t1, s1) in self.finals(a, s, budget) {
                    let rest = budget - t1.len();
                    for (t2, s2) in self.finals(b, &s1, rest) {
                        out.insert((cat(&t1, &t2), s2));
                    }
                }
                out
            }
            RRel::Star(body) => {
                let mut out = Finals::new();
                let mut frontier = vec![(Vec::new(), s.clone())];
                out.insert((Vec::new(), s.clone()));
                while let Some((t, st)) = frontier.pop() {
                    let rest = budget - t.len();
                    for (t2, s2) in self.finals(body, &st, rest) {
                        let obs = (cat(&t, &t2), s2);
                        if out.insert(obs.clone()) {
                            frontier.push(obs);
                        }
                    }
                }
                out
            }
            RRel::R4(a) => self.finals(a, s, budget).into_iter().filter(|(t, _)| !t.is_empty()).collect(),
            RRel::R5(a) => self.finals(a, s, 0),
            RRel::True | RRel::Pred(_) | RRel::NegInit(..) | RRel::Atom(Atom::Init { .. }) => {
                self.finals_by_search(r, s, budget)
            }
        }
    }

    fn finals_by_search(&self, r: &RRel, s: &Valuation, budget: usize) -> Finals {
        let mut out = Finals::new();
        for t in self.env.traces_upto(budget) {
            for s2 in self.env.valuations() {
                if self.holds_post(r, s, &t, s2) {
                    out.insert((t.clone(), s2.clone()));
                }
            }
        }
        out
    }

    /// Quiescent observations `(tt, minimal acceptance)` from `s`.
    pub fn quiets(&self, r: &RRel, s: &Valuation, budget: usize) -> Quiets {
        match r {
            RRel::False => Quiets::new(),
            RRel::Atom(Atom::Quiet { b, t, acc }) => {
                let mut out = Quiets::new();
                if b.holds_in(s) {
                    let tr = t.eval(s);
                    if tr.len() <= budget {
                        out.insert((tr, acc.eval(self.env, s)));
                    }
                }
                out
            }
            RRel::Atom(Atom::Final { .. }) | RRel::Test(_) | RRel::Star(_) => Quiets::new(),
            RRel::Or(xs) => minimize(xs.iter().flat_map(|x| self.quiets(x, s, budget)).collect()),
            RRel::And(xs) => {
                let (filters, gens): (Vec<&RRel>, Vec<&RRel>) = xs.iter().partition(|x| is_filter(x));
                if gens.is_empty() {
                    return self.quiets_by_search(r, s, budget);
                }
                let mut acc = self.quiets(gens[0], s, budget);
                for g in &gens[1..] {
                    let other = self.quiets(g, s, budget);
                    let mut next = Quiets::new();
                    for (t1, a1) in &acc {
                        for (t2, a2) in &other {
                            if t1 == t2 {
                                next.insert((t1.clone(), a1.union(a2).cloned().collect()));
                            }
                        }
                    }
                    acc = next;
                }
                acc.retain(|(t, a)| filters.iter().all(|f| self.holds_peri(f, s, t, a)));
                minimize(acc)
            }
            RRel::Seq(a, b) => {
                let mut out = Quiets::new();
                for (t1, s1) in self.finals(a, s, budget) {
                    let rest = budget - t1.len();
                    for (t2, acc) in self.quiets(b, &s1, rest) {
                        out.insert((cat(&t1, &t2), acc));
                    }
                }
                minimize(out)
            }
            RRel::R4(a) => self.quiets(a, s, budget).into_iter().filter(|(t, _)| !t.is_empty()).collect(),
            RRel::R5(a) => self.quiets(a, s, 0),
            RRel::True | RRel::Pred(_) | RRel::NegInit(..) | RRel::Atom(Atom::Init { .. }) => {
                self.quiets_by_search(r, s, budget)
            }
        }
    }

    fn acceptance_candidates(&self, r: &RRel) -> Vec<AccSet> {
        if mentions_accepts(r) {
            let alpha = self.env.alphabet();
            let n = alpha.len().min(16);
            let mut sets: Vec<AccSet> = (0u32..(1u32 << n))
                .map(|mask| {
                    alpha
                        .iter()
                        .take(n)
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, e)| e.clone())
                        .collect()
                })
                .collect();
            sets.sort_by_key(|s| s.len());
            sets
        } else {
            vec![AccSet::new()]
        }
    }

    fn quiets_by_search(&self, r: &RRel, s: &Valuation, budget: usize) -> Quiets {
        let cands = self.acceptance_candidates(r);
        let mut out = Quiets::new();
        for t in self.env.traces_upto(budget) {
            let mut found: Vec<&AccSet> = Vec::new();
            for a in &cands {
                if found.iter().any(|f| f.is_subset(a)) {
                    continue;
                }
                if self.holds_peri(r, s, &t, a) {
                    found.push(a);
                }
            }
            for a in found {
                out.insert((t.clone(), a.clone()));
            }
        }
        out
    }

    pub fn holds_post(&self, r: &RRel, s: &Valuation, t: &[Event], s2: &Valuation) -> bool {
        match r {
            RRel::False => false,
            RRel::True => true,
            RRel::Atom(Atom::Final { b, sigma, t: te }) => {
                b.holds_in(s) && te.eval(s) == t && &sigma.run(s) == s2
            }
            RRel::Atom(Atom::Quiet { .. }) => false,
            RRel::Atom(Atom::Init { b, t: te }) => b.holds_in(s) && t.starts_with(&te.eval(s)),
            RRel::NegInit(b, te) => !(b.holds_in(s) && t.starts_with(&te.eval(s))),
            RRel::Test(b) => b.holds_in(s) && t.is_empty() && s == s2,
            RRel::Or(xs) => xs.iter().any(|x| self.holds_post(x, s, t, s2)),
            RRel::And(xs) => xs.iter().all(|x| self.holds_post(x, s, t, s2)),
            RRel::Seq(a, b) => self.finals(a, s, t.len()).into_iter().any(|(t1, s1)| {
                t.starts_with(&t1) && self.holds_post(b, &s1, &t[t1.len()..], s2)
            }),
            RRel::Star(_) => self.finals(r, s, t.len()).contains(&(t.to_vec(), s2.clone())),
            RRel::R4(a) => !t.is_empty() && self.holds_post(a, s, t, s2),
            RRel::R5(a) => t.is_empty() && self.holds_post(a, s, t, s2),
            RRel::Pred(e) => e.eval_bool(&EvalCtx::state(s).with_trace(t).with_post(s2)),
        }
    }

    pub fn holds_peri(&self, r: &RRel, s: &Valuation, t: &[Event], acc: &AccSet) -> bool {
        match r {
            RRel::False => false,
            RRel::True => true,
            RRel::Atom(Atom::Quiet { b, t: te, acc: e }) => {
                b.holds_in(s) && te.eval(s) == t && e.eval(self.env, s).is_subset(acc)
            }
            RRel::Atom(Atom::Final { .. }) | RRel::Test(_) | RRel::Star(_) => false,
            RRel::Atom(Atom::Init { b, t: te }) => b.holds_in(s) && t.starts_with(&te.eval(s)),
            RRel::NegInit(b, te) => !(b.holds_in(s) && t.starts_with(&te.eval(s))),
            RRel::Or(xs) => xs.iter().any(|x| self.holds_peri(x, s, t, acc)),
            RRel::And(xs) => xs.iter().all(|x| self.holds_peri(x, s, t, acc)),
            RRel::Seq(a, b) => self.finals(a, s, t.len()).into_iter().any(|(t1, s1)| {
                t.starts_with(&t1) && self.holds_peri(b, &s1, &t[t1.len()..], acc)
            }),
            RRel::R4(a) => !t.is_empty() && self.holds_peri(a, s, t, acc),
            RRel::R5(a) => t.is_empty() && self.holds_peri(a, s, t, acc),
            RRel::Pred(e) => e.eval_bool(&EvalCtx::state(s).with_trace(t).with_accepts(acc)),
        }
    }

    /// Truth of a precondition-kind relation at `(s, tt)`.
    pub fn holds_pre(&self, r: &RRel, s: &Valuation, t: &[Event]) -> bool {
        match r {
            RRel::False => false,
            RRel::True => true,
            RRel::NegInit(b, te) => !(b.holds_in(s) && t.starts_with(&te.eval(s))),
            RRel::Atom(Atom::Init { b, t: te }) => b.holds_in(s) && t.starts_with(&te.eval(s)),
            RRel::Or(xs) => xs.iter().any(|x| self.holds_pre(x, s, t)),
            RRel::And(xs) => xs.iter().all(|x| self.holds_pre(x, s, t)),
            RRel::Pred(e) => e.eval_bool(&EvalCtx::state(s).with_trace(t)),
            other => self.holds_peri(other, s, t, &AccSet::new()),
        }
    }

    pub fn pre_holds(&self, p: &PreNf, s: &Valuation, t: &[Event]) -> bool {
        p.holds(s, t)
    }
}

fn mentions_accepts(r: &RRel) -> bool {
    match r {
        RRel::Pred(e) => e.mentions_accepts(),
        RRel::Atom(Atom::Quiet { .. }) => true,
        RRel::Or(xs) | RRel::And(xs) => xs.iter().any(mentions_accepts),
        RRel::Seq(a, b) => mentions_accepts(a) || mentions_accepts(b),
        RRel::R4(a) | RRel::R5(a) | RRel::Star(a) => mentions_accepts(a),
        _ => false,
    }
}

/// Keeps, for every trace, only the inclusion-minimal acceptance sets.
pub fn minimize(q: Quiets) -> Quiets {
    let v: Vec<(GroundTrace, AccSet)> = q.into_iter().collect();
    v.iter()
        .filter(|(t, a)| {
            !v.iter().any(|(t2, a2)| t2 == t && a2 != a && a2.is_subset(a))
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relalg::{EventSet, TraceExpr};
    use crate::state::{EventTerm, Expr, Subst, ValueType};

    #[test]
    fn star_closure_is_bounded_by_trace() {
        let env = Env::new().chan("a", None);
        let g = Ground::new(&env);
        let r = RRel::star(RRel::Atom(Atom::fin(
            Expr::bool(true),
            Subst::id(),
            TraceExpr::one(EventTerm::plain("a")),
        )));
        let s = Valuation::default();
        assert_eq!(g.finals(&r, &s, 3).len(), 4);
    }

    #[test]
    fn quiescent_membership_is_up_closed() {
        let env = Env::new().chan("a", None).chan("c", None).var("x", ValueType::Bool);
        let g = Ground::new(&env);
        let q = RRel::Atom(Atom::quiet(
            Expr::bool(true),
            TraceExpr::empty(),
            EventSet::Single(EventTerm::plain("a")),
        ));
        let s = env.valuations()[0].clone();
        let both: AccSet = [Event::plain("a"), Event::plain("c")].into_iter().collect();
        assert!(g.holds_peri(&q, &s, &[], &both));
        assert!(!g.holds_peri(&q, &s, &[], &AccSet::new()));
    }
}
