//! A direct enumerator of ground observations of core programs.
//!
//! This reads each construct operationally from the state and never goes
//! through relation terms, normal forms or contracts, so agreement with the
//! calculus is evidence rather than tautology.

use crate::contracts::Contract;
use crate::dsl::{Proc, TypedProgram};
use crate::error::Result;
use crate::relalg::ground::minimize;
use crate::relalg::Ground;
use crate::state::{show_events, show_trace, AccSet, Env, EvalCtx, GroundTrace, Valuation};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Ground observations from one initial state. Traces are relative to the
/// start of the program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Observations {
    pub quiets: BTreeSet<(GroundTrace, AccSet)>,
    pub terms: BTreeSet<(GroundTrace, Valuation)>,
    /// Traces after which the program may diverge.
    pub diverges: BTreeSet<GroundTrace>,
    /// Traces at which enumeration stopped because of the depth bound.
    pub cuts: BTreeSet<GroundTrace>,
}

/// One ground observation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    Quiet { trace: GroundTrace, accepts: AccSet },
    Term { trace: GroundTrace, post: Valuation },
    Diverge { trace: GroundTrace },
    BudgetCut { trace: GroundTrace },
}

impl Observation {
    pub fn trace(&self) -> &GroundTrace {
        match self {
            Observation::Quiet { trace, .. }
            | Observation::Term { trace, .. }
            | Observation::Diverge { trace }
            | Observation::BudgetCut { trace } => trace,
        }
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Quiet { trace, accepts } => {
                write!(f, "quiet {} accepting {}", show_trace(trace), show_events(accepts))
            }
            Observation::Term { trace, post } => write!(f, "term {} in {post}", show_trace(trace)),
            Observation::Diverge { trace } => write!(f, "diverge after {}", show_trace(trace)),
            Observation::BudgetCut { trace } => write!(f, "cut after {}", show_trace(trace)),
        }
    }
}

fn shifted(prefix: &[crate::state::Event], t: &[crate::state::Event]) -> GroundTrace {
    let mut v = prefix.to_vec();
    v.extend_from_slice(t);
    v
}

impl Observations {
    pub fn list(&self) -> Vec<Observation> {
        let mut out: Vec<Observation> = Vec::new();
        out.extend(self.quiets.iter().map(|(t, a)| Observation::Quiet { trace: t.clone(), accepts: a.clone() }));
        out.extend(self.terms.iter().map(|(t, s)| Observation::Term { trace: t.clone(), post: s.clone() }));
        out.extend(self.diverges.iter().map(|t| Observation::Diverge { trace: t.clone() }));
        out.extend(self.cuts.iter().map(|t| Observation::BudgetCut { trace: t.clone() }));
        out.sort();
        out
    }

    fn absorb_shifted(&mut self, prefix: &[crate::state::Event], o: Observations) {
        self.quiets.extend(o.quiets.into_iter().map(|(t, a)| (shifted(prefix, &t), a)));
        self.terms.extend(o.terms.into_iter().map(|(t, s)| (shifted(prefix, &t), s)));
        self.diverges.extend(o.diverges.into_iter().map(|t| shifted(prefix, &t)));
        self.cuts.extend(o.cuts.into_iter().map(|t| shifted(prefix, &t)));
    }

    /// Minimal acceptance sets and minimal divergence traces; everything at or
    /// beyond a divergence or a cut is dropped.
    pub fn canonical(mut self) -> Observations {
        self.quiets = minimize(self.quiets);
        let stops: Vec<GroundTrace> = self.diverges.iter().chain(&self.cuts).cloned().collect();
        let shadowed = |t: &GroundTrace| stops.iter().any(|d| t.starts_with(d));
        self.quiets.retain(|(t, _)| !shadowed(t));
        self.terms.retain(|(t, _)| !shadowed(t));
        let div: Vec<GroundTrace> = self.diverges.iter().cloned().collect();
        self.diverges.retain(|t| !div.iter().any(|d| d != t && t.starts_with(d)));
        let cuts: Vec<GroundTrace> = self.cuts.iter().cloned().collect();
        self.cuts.retain(|t| !cuts.iter().any(|d| d != t && t.starts_with(d)));
        self
    }

    /// Drops observations shadowed by the given cut traces.
    fn without_beyond(mut self, cuts: &BTreeSet<GroundTrace>) -> Observations {
        let shadowed = |t: &GroundTrace| cuts.iter().any(|d| t.starts_with(d));
        self.quiets.retain(|(t, _)| !shadowed(t));
        self.terms.retain(|(t, _)| !shadowed(t));
        self.diverges.retain(|t| !shadowed(t));
        self
    }
}

/// Bounded enumerator: traces up to `trace_bound`, at most `depth` iterations
/// of any single loop.
pub struct Oracle<'a> {
    pub env: &'a Env,
    pub depth: usize,
    pub trace_bound: usize,
}

impl<'a> Oracle<'a> {
    pub fn new(env: &'a Env, depth: usize, trace_bound: usize) -> Self {
        Oracle { env, depth, trace_bound }
    }

    pub fn enumerate(&self, p: &Proc, s0: &Valuation) -> Observations {
        self.run(p, s0, self.trace_bound).canonical()
    }

    fn run(&self, p: &Proc, s: &Valuation, budget: usize) -> Observations {
        let mut o = Observations::default();
        match p {
            Proc::Skip => {
                o.terms.insert((vec![], s.clone()));
            }
            Proc::Stop => {
                o.quiets.insert((vec![], AccSet::new()));
            }
            Proc::Chaos => {
                o.diverges.insert(vec![]);
            }
            Proc::Miracle => {}
            Proc::Assign(sigma) => {
                let ctx = EvalCtx::state(s);
                let mut s2 = s.clone();
                for (x, e) in &sigma.0 {
                    s2.set(x.clone(), e.eval(&ctx));
                }
                o.terms.insert((vec![], s2));
            }
            Proc::Do(e) => {
                let ev = e.eval(&EvalCtx::state(s));
                o.quiets.insert((vec![], [ev.clone()].into_iter().collect()));
                if budget >= 1 {
                    o.terms.insert((vec![ev], s.clone()));
                }
            }
            Proc::Seq(a, b) => {
                let oa = self.run(a, s, budget);
                for (t1, s1) in &oa.terms {
                    let ob = self.run(b, s1, budget - t1.len());
                    o.absorb_shifted(t1, ob);
                }
                o.quiets.extend(oa.quiets);
                o.diverges.extend(oa.diverges);
                o.cuts.extend(oa.cuts);
            }
            Proc::Int(xs) => {
                for x in xs {
                    o.absorb_shifted(&[], self.run(x, s, budget));
                }
            }
            Proc::Ext(xs) => {
                let mut waiting: Option<BTreeSet<AccSet>> = None;
                for x in xs {
                    let ox = self.run(x, s, budget);
                    let here: BTreeSet<AccSet> =
                        ox.quiets.iter().filter(|(t, _)| t.is_empty()).map(|(_, a)| a.clone()).collect();
                    waiting = Some(match waiting {
                        None => here,
                        Some(w) => w
                            .iter()
                            .flat_map(|a| here.iter().map(move |b| a.union(b).cloned().collect()))
                            .collect(),
                    });
                    o.quiets.extend(ox.quiets.into_iter().filter(|(t, _)| !t.is_empty()));
                    o.terms.extend(ox.terms);
                    o.diverges.extend(ox.diverges);
                    o.cuts.extend(ox.cuts);
                }
                o.quiets.extend(waiting.unwrap_or_default().into_iter().map(|a| (vec![], a)));
            }
            Proc::Cond(b, x, y) => {
                let branch = if b.eval_bool(&EvalCtx::state(s)) { x } else { y };
                o = self.run(branch, s, budget);
            }
            Proc::While { cond, body, .. } => o = self.run_while(cond, body, s, budget),
        }
        o
    }

    fn run_while(&self, cond: &crate::state::Expr, body: &Proc, s: &Valuation, budget: usize) -> Observations {
        type Node = (GroundTrace, Valuation);
        let mut o = Observations::default();
        let start: Node = (vec![], s.clone());
        let mut seen: BTreeSet<Node> = [start.clone()].into_iter().collect();
        // event-free edges, for divergence detection
        let mut silent: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
        let mut layer = vec![start];
        let mut level = 0;
        while !layer.is_empty() {
            let mut next = Vec::new();
            for node in layer {
                let (t, st) = &node;
                if !cond.eval_bool(&EvalCtx::state(st)) {
                    o.terms.insert((t.clone(), st.clone()));
                    continue;
                }
                if level >= self.depth {
                    o.cuts.insert(t.clone());
                    continue;
                }
                let ob = self.run(body, st, budget - t.len());
                for (t2, s2) in &ob.terms {
                    let child: Node = (shifted(t, t2), s2.clone());
                    if t2.is_empty() {
                        silent.entry(node.clone()).or_default().push(child.clone());
                    }
                    if seen.insert(child.clone()) {
                        next.push(child);
                    }
                }
                o.quiets.extend(ob.quiets.into_iter().map(|(t2, a)| (shifted(t, &t2), a)));
                o.diverges.extend(ob.diverges.into_iter().map(|t2| shifted(t, &t2)));
                o.cuts.extend(ob.cuts.into_iter().map(|t2| shifted(t, &t2)));
            }
            layer = next;
            level += 1;
        }
        for n in on_cycles(&silent) {
            o.diverges.insert(n.0);
        }
        o
    }
}

/// Nodes lying on a cycle of the graph.
fn on_cycles<N: Ord + Clone>(g: &BTreeMap<N, Vec<N>>) -> Vec<N> {
    let reaches = |from: &N, target: &N| -> bool {
        let mut stack: Vec<&N> = g.get(from).map(|v| v.iter().collect()).unwrap_or_default();
        let mut seen: BTreeSet<&N> = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == target {
                return true;
            }
            if seen.insert(n) {
                if let Some(next) = g.get(n) {
                    stack.extend(next.iter());
                }
            }
        }
        false
    };
    g.keys().filter(|n| reaches(n, n)).cloned().collect()
}

/// Ground observations of a contract from `s0`, traces up to `trace_bound`.
/// Stars are evaluated as closures within the bound.
pub fn contract_obs(env: &Env, c: &Contract, s0: &Valuation, trace_bound: usize) -> Observations {
    let g = Ground::new(env);
    let o = Observations {
        quiets: g.quiets(&c.peri, s0, trace_bound),
        terms: g.finals(&c.post, s0, trace_bound),
        diverges: c.pre.violations(s0, trace_bound).into_iter().collect(),
        cuts: BTreeSet::new(),
    };
    o.canonical()
}

/// Observations present on one side only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diff {
    pub state: Valuation,
    pub side: Side,
    pub observation: Observation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    OracleOnly,
    ContractOnly,
}

impl fmt::Display for Diff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::OracleOnly => "oracle only",
            Side::ContractOnly => "contract only",
        };
        write!(f, "from {}: {} ({side})", self.state, self.observation)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossReport {
    pub contract: String,
    pub states: usize,
    pub observations: usize,
    pub cuts: usize,
    pub diffs: Vec<Diff>,
}

impl CrossReport {
    pub fn agrees(&self) -> bool {
        self.diffs.is_empty()
    }
}

/// Calculates the contract of `p` and compares its observations with the
/// oracle's from every initial state.
pub fn cross_check(p: &TypedProgram, depth: usize, trace_bound: usize, wp_bound: usize) -> Result<CrossReport> {
    let env = &p.env;
    let c = crate::contracts::Calculus::new(env).with_wp_bound(wp_bound).calculate(&p.proc)?;
    Ok(compare(env, &p.proc, &c, depth, trace_bound))
}

/// Compares a contract against the oracle for a program.
pub fn compare(env: &Env, p: &Proc, c: &Contract, depth: usize, trace_bound: usize) -> CrossReport {
    let oracle = Oracle::new(env, depth, trace_bound);
    let per_state: Vec<(Vec<Diff>, usize, usize)> = env
        .valuations()
        .par_iter()
        .map(|s| {
            let o = oracle.enumerate(p, s);
            let k = contract_obs(env, c, s, trace_bound).without_beyond(&o.cuts);
            let ol = o.clone().without_beyond(&o.cuts).list();
            let kl = k.list();
            let mut diffs = Vec::new();
            for x in ol.iter().filter(|x| !matches!(x, Observation::BudgetCut { .. })) {
                if !kl.contains(x) {
                    diffs.push(Diff { state: s.clone(), side: Side::OracleOnly, observation: x.clone() });
                }
            }
            for x in &kl {
                if !ol.contains(x) {
                    diffs.push(Diff { state: s.clone(), side: Side::ContractOnly, observation: x.clone() });
                }
            }
            (diffs, ol.len(), o.cuts.len())
        })
        .collect();
    let mut report = CrossReport {
        contract: c.to_string(),
        states: per_state.len(),
        observations: 0,
        cuts: 0,
        diffs: vec![],
    };
    for (d, n, cuts) in per_state {
        report.diffs.extend(d);
        report.observations += n;
        report.cuts += cuts;
    }
    report
}

/// JSON dump of every observation from every initial state.
pub fn observations_json(per_state: &[(Valuation, Observations)]) -> serde_json::Value {
    let mut quiets = Vec::new();
    let mut terms = Vec::new();
    let mut diverges = Vec::new();
    let mut cuts = Vec::new();
    for (s, o) in per_state {
        for (t, a) in &o.quiets {
            quiets.push(serde_json::json!({ "state": s, "trace": t, "accepts": a }));
        }
        for (t, s2) in &o.terms {
            terms.push(serde_json::json!({ "state": s, "trace": t, "state'": s2 }));
        }
        for t in &o.diverges {
            diverges.push(serde_json::json!({ "state": s, "trace": t }));
        }
        for t in &o.cuts {
            cuts.push(serde_json::json!({ "state": s, "trace": t }));
        }
    }
    serde_json::json!({ "quiets": quiets, "terms": terms, "diverges": diverges, "cuts": cuts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::load;
    use crate::state::{Event, Value};

    fn obs(src: &str, bound: usize) -> (TypedProgram, Observations) {
        let p = load(src).unwrap();
        let s = p.env.default_valuation();
        let o = Oracle::new(&p.env, 64, bound).enumerate(&p.proc, &s);
        (p, o)
    }

    #[test]
    fn event_prefix() {
        let (_, o) = obs("channel a\na -> skip", 4);
        let a = Event::plain("a");
        assert_eq!(o.quiets, [(vec![], [a.clone()].into_iter().collect())].into_iter().collect());
        assert_eq!(o.terms.len(), 1);
        assert_eq!(o.terms.iter().next().unwrap().0, vec![a]);
    }

    #[test]
    fn choice_example_quiets() {
        let (_, o) = obs("channel a, b, c\na -> b -> skip [] c -> skip", 4);
        let set = |xs: &[&str]| xs.iter().map(|x| Event::plain(*x)).collect::<AccSet>();
        let expect: BTreeSet<_> =
            [(vec![], set(&["a", "c"])), (vec![Event::plain("a")], set(&["b"]))].into_iter().collect();
        assert_eq!(o.quiets, expect);
    }

    #[test]
    fn buffer_after_one_input() {
        let (p, o) = obs(crate::corpus::BUFFER, 3);
        let t = vec![Event::new("inp", Some(Value::Int(1)))];
        let acc: AccSet = [
            Event::new("inp", Some(Value::Int(0))),
            Event::new("inp", Some(Value::Int(1))),
            Event::new("out", Some(Value::Int(1))),
        ]
        .into_iter()
        .collect();
        assert!(o.quiets.contains(&(t, acc)));
        assert!(o.terms.is_empty());
        assert!(o.cuts.is_empty());
        drop(p);
    }

    #[test]
    fn instantaneous_loop_diverges() {
        let (_, o) = obs(crate::corpus::SPIN, 4);
        assert_eq!(o.diverges, [vec![]].into_iter().collect());
        assert!(o.terms.is_empty() && o.quiets.is_empty());
    }

    #[test]
    fn corpus_agrees_with_calculus() {
        for (name, src) in crate::corpus::PROGRAMS {
            let p = load(src).unwrap();
            let r = cross_check(&p, 64, 3, 16).unwrap();
            assert!(r.agrees(), "{name}: {:?}", r.diffs);
        }
    }
}
