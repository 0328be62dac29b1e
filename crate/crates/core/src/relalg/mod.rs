//! Reactive relations: atoms, the relation term language, the precondition
//! clause form, normalization and ground (enumerative) semantics.

pub mod cond;
pub mod ground;
mod norm;

pub use ground::Ground;
pub use norm::{
    conj_quiescent, filter_r4, filter_r5, merge_cond, normalize, seq_final_final,
    seq_final_quiescent, seq_test, wp_final, Normalizer, SaturationResult,
};
pub(crate) use norm::{nf_to_rrel, Chain, Item, Nf};

use crate::state::{AccSet, Env, EvalCtx, Event, EventTerm, Expr, GroundTrace, Subst, Valuation};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A literal list of symbolic events.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TraceExpr(pub Vec<EventTerm>);

impl TraceExpr {
    pub fn empty() -> Self {
        TraceExpr(vec![])
    }

    pub fn one(e: EventTerm) -> Self {
        TraceExpr(vec![e])
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn concat(&self, other: &TraceExpr) -> TraceExpr {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        TraceExpr(v)
    }

    pub fn subst(&self, sigma: &Subst) -> TraceExpr {
        TraceExpr(self.0.iter().map(|e| e.map_expr(&mut |d| sigma.apply(d))).collect())
    }

    pub fn fold(&self) -> TraceExpr {
        TraceExpr(self.0.iter().map(|e| e.map_expr(&mut |d| d.fold())).collect())
    }

    pub fn eval(&self, s: &Valuation) -> GroundTrace {
        let ctx = EvalCtx::state(s);
        self.0.iter().map(|e| e.eval(&ctx)).collect()
    }

    pub fn ground(t: &[Event]) -> TraceExpr {
        TraceExpr(t.iter().map(EventTerm::ground).collect())
    }
}

impl fmt::Display for TraceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ">")
    }
}

/// A symbolic set of events, possibly depending on the initial state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSet {
    Empty,
    Single(EventTerm),
    /// Every event `c.v` of a channel.
    Chan(String),
    Union(Vec<EventSet>),
    Cond(Expr, Box<EventSet>, Box<EventSet>),
}

impl EventSet {
    pub fn of(events: impl IntoIterator<Item = EventTerm>) -> EventSet {
        EventSet::Union(events.into_iter().map(EventSet::Single).collect())
    }

    pub fn union(a: EventSet, b: EventSet) -> EventSet {
        EventSet::Union(vec![a, b])
    }

    pub fn eval(&self, env: &Env, s: &Valuation) -> AccSet {
        let mut out = AccSet::new();
        self.eval_into(env, s, &mut out);
        out
    }

    fn eval_into(&self, env: &Env, s: &Valuation, out: &mut AccSet) {
        match self {
            EventSet::Empty => {}
            EventSet::Single(e) => {
                out.insert(e.eval(&EvalCtx::state(s)));
            }
            EventSet::Chan(c) => out.extend(env.chan_events(c)),
            EventSet::Union(xs) => xs.iter().for_each(|x| x.eval_into(env, s, out)),
            EventSet::Cond(c, a, b) => {
                if c.holds_in(s) {
                    a.eval_into(env, s, out)
                } else {
                    b.eval_into(env, s, out)
                }
            }
        }
    }

    pub fn map_expr(&self, f: &mut impl FnMut(&Expr) -> Expr) -> EventSet {
        match self {
            EventSet::Empty | EventSet::Chan(_) => self.clone(),
            EventSet::Single(e) => EventSet::Single(e.map_expr(f)),
            EventSet::Union(xs) => EventSet::Union(xs.iter().map(|x| x.map_expr(f)).collect()),
            EventSet::Cond(c, a, b) => {
                EventSet::Cond(f(c), Box::new(a.map_expr(f)), Box::new(b.map_expr(f)))
            }
        }
    }

    pub fn subst(&self, sigma: &Subst) -> EventSet {
        self.map_expr(&mut |e| sigma.apply(e))
    }

    fn flatten_into(self, out: &mut Vec<EventSet>) {
        match self {
            EventSet::Empty => {}
            EventSet::Union(xs) => xs.into_iter().for_each(|x| x.flatten_into(out)),
            other => out.push(other),
        }
    }

    /// Canonical form: flattened, sorted, deduplicated unions; trivial
    /// conditionals removed; complete channel images collapsed to `Chan`.
    pub fn canon(&self, env: &Env) -> EventSet {
        let e = match self {
            EventSet::Cond(c, a, b) => {
                let c = cond::simplify(env, c);
                let (a, b) = (a.canon(env), b.canon(env));
                if c.is_true() || a == b {
                    a
                } else if c.is_false() {
                    b
                } else {
                    EventSet::Cond(c, Box::new(a), Box::new(b))
                }
            }
            EventSet::Single(e) => EventSet::Single(e.map_expr(&mut |d| d.fold())),
            EventSet::Chan(c) if matches!(env.chan_type(c), Some(None)) => {
                EventSet::Single(EventTerm::plain(c.clone()))
            }
            other => other.clone(),
        };
        let mut parts = Vec::new();
        match e {
            EventSet::Union(xs) => {
                for x in xs {
                    x.canon(env).flatten_into(&mut parts);
                }
            }
            other => other.flatten_into(&mut parts),
        }
        // collapse complete channel images
        let chans: Vec<String> = env.chans.keys().cloned().collect();
        for c in chans {
            let all = env.chan_events(&c);
            if matches!(env.chan_type(&c), Some(None)) || all.is_empty() || parts.contains(&EventSet::Chan(c.clone())) {
                continue;
            }
            let covered = all.iter().all(|ev| {
                parts.iter().any(|p| matches!(p, EventSet::Single(t) if t.as_ground().as_ref() == Some(ev)))
            });
            if covered {
                parts.push(EventSet::Chan(c.clone()));
            }
        }
        let full: Vec<String> = parts
            .iter()
            .filter_map(|p| match p {
                EventSet::Chan(c) => Some(c.clone()),
                _ => None,
            })
            .collect();
        parts.retain(|p| match p {
            EventSet::Single(t) => !full.contains(&t.chan),
            _ => true,
        });
        parts.sort();
        parts.dedup();
        match parts.len() {
            0 => EventSet::Empty,
            1 => parts.pop().unwrap(),
            _ => EventSet::Union(parts),
        }
    }

    fn is_plain(&self) -> bool {
        matches!(self, EventSet::Single(_))
    }
}

impl fmt::Display for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventSet::Empty => write!(f, "∅"),
            EventSet::Single(e) => write!(f, "{{{e}}}"),
            EventSet::Chan(c) => write!(f, "{{{c}.*}}"),
            EventSet::Cond(c, a, b) => write!(f, "({a} ◁ {c} ▷ {b})"),
            EventSet::Union(xs) => {
                let singles: Vec<String> = xs
                    .iter()
                    .filter_map(|x| match x {
                        EventSet::Single(e) => Some(e.to_string()),
                        _ => None,
                    })
                    .collect();
                let mut parts: Vec<String> = Vec::new();
                if !singles.is_empty() {
                    parts.push(format!("{{{}}}", singles.join(", ")));
                }
                for x in xs.iter().filter(|x| !x.is_plain()) {
                    parts.push(x.to_string());
                }
                if parts.is_empty() {
                    write!(f, "∅")
                } else {
                    write!(f, "{}", parts.join(" ∪ "))
                }
            }
        }
    }
}

/// The three observation forms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    /// `I(b, t)`: `b` holds initially and `t` is a prefix of the trace.
    Init { b: Expr, t: TraceExpr },
    /// `E(b, t, E)`: quiescent after exactly `t`, accepting every event of `E`.
    Quiet { b: Expr, t: TraceExpr, acc: EventSet },
    /// `Φ(b, σ, t)`: terminated after exactly `t` in state `σ(st)`.
    Final { b: Expr, sigma: Subst, t: TraceExpr },
}

impl Atom {
    pub fn init(b: Expr, t: TraceExpr) -> Atom {
        Atom::Init { b, t }
    }

    pub fn quiet(b: Expr, t: TraceExpr, acc: EventSet) -> Atom {
        Atom::Quiet { b, t, acc }
    }

    pub fn fin(b: Expr, sigma: Subst, t: TraceExpr) -> Atom {
        Atom::Final { b, sigma, t }
    }

    pub fn identity() -> Atom {
        Atom::fin(Expr::bool(true), Subst::id(), TraceExpr::empty())
    }

    pub fn cond(&self) -> &Expr {
        match self {
            Atom::Init { b, .. } | Atom::Quiet { b, .. } | Atom::Final { b, .. } => b,
        }
    }

    pub fn trace(&self) -> &TraceExpr {
        match self {
            Atom::Init { t, .. } | Atom::Quiet { t, .. } | Atom::Final { t, .. } => t,
        }
    }

    pub fn with_cond(&self, b: Expr) -> Atom {
        match self.clone() {
            Atom::Init { t, .. } => Atom::Init { b, t },
            Atom::Quiet { t, acc, .. } => Atom::Quiet { b, t, acc },
            Atom::Final { sigma, t, .. } => Atom::Final { b, sigma, t },
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Atom::Final { b, sigma, t } if b.is_true() && sigma.is_id() && t.is_empty())
    }

    pub fn is_final(&self) -> bool {
        matches!(self, Atom::Final { .. })
    }

    pub fn is_quiet(&self) -> bool {
        matches!(self, Atom::Quiet { .. })
    }

    /// Applies `σ†` to every state-dependent component.
    pub fn subst(&self, sigma: &Subst) -> Atom {
        match self {
            Atom::Init { b, t } => Atom::Init { b: sigma.apply(b), t: t.subst(sigma) },
            Atom::Quiet { b, t, acc } => {
                Atom::Quiet { b: sigma.apply(b), t: t.subst(sigma), acc: acc.subst(sigma) }
            }
            Atom::Final { b, sigma: s2, t } => Atom::Final {
                b: sigma.apply(b),
                sigma: sigma.then(s2),
                t: t.subst(sigma),
            },
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Init { b, t } => write!(f, "I({b} | {t})"),
            Atom::Quiet { b, t, acc } => write!(f, "E({b} | {t} | {acc})"),
            Atom::Final { b, sigma, t } => write!(f, "Phi({b} | {sigma} | {t})"),
        }
    }
}

/// Reactive relation terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RRel {
    False,
    True,
    Atom(Atom),
    Or(Vec<RRel>),
    And(Vec<RRel>),
    Seq(Box<RRel>, Box<RRel>),
    /// Reflexive transitive closure under sequential composition.
    Star(Box<RRel>),
    /// `[b]`: the identity restricted to initial states satisfying `b`.
    Test(Expr),
    NegInit(Expr, TraceExpr),
    R4(Box<RRel>),
    R5(Box<RRel>),
    /// An arbitrary predicate over `st`, `tt`, `st'` and the acceptance set.
    Pred(Expr),
}

impl RRel {
    pub fn atom(a: Atom) -> RRel {
        RRel::Atom(a)
    }

    pub fn seq(a: RRel, b: RRel) -> RRel {
        RRel::Seq(Box::new(a), Box::new(b))
    }

    pub fn star(a: RRel) -> RRel {
        RRel::Star(Box::new(a))
    }

    pub fn or(xs: Vec<RRel>) -> RRel {
        RRel::Or(xs)
    }

    pub fn and(xs: Vec<RRel>) -> RRel {
        RRel::And(xs)
    }

    pub fn r4(a: RRel) -> RRel {
        RRel::R4(Box::new(a))
    }

    pub fn r5(a: RRel) -> RRel {
        RRel::R5(Box::new(a))
    }

    pub fn identity() -> RRel {
        RRel::Atom(Atom::identity())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, RRel::False)
    }

    /// Top-level disjuncts.
    pub fn disjuncts(&self) -> Vec<&RRel> {
        match self {
            RRel::False => vec![],
            RRel::Or(xs) => xs.iter().collect(),
            other => vec![other],
        }
    }

    pub fn contains_star(&self) -> bool {
        match self {
            RRel::Star(_) => true,
            RRel::Or(xs) | RRel::And(xs) => xs.iter().any(|x| x.contains_star()),
            RRel::Seq(a, b) => a.contains_star() || b.contains_star(),
            RRel::R4(a) | RRel::R5(a) => a.contains_star(),
            _ => false,
        }
    }

    pub fn contains_residual(&self) -> bool {
        match self {
            RRel::R4(_) | RRel::R5(_) => true,
            RRel::Or(xs) | RRel::And(xs) => xs.iter().any(|x| x.contains_residual()),
            RRel::Seq(a, b) => a.contains_residual() || b.contains_residual(),
            RRel::Star(a) => a.contains_residual(),
            _ => false,
        }
    }

    /// Applies `σ†` throughout.
    pub fn subst(&self, sigma: &Subst) -> RRel {
        if sigma.is_id() {
            return self.clone();
        }
        match self {
            RRel::False | RRel::True => self.clone(),
            RRel::Atom(a) => RRel::Atom(a.subst(sigma)),
            RRel::Or(xs) => RRel::Or(xs.iter().map(|x| x.subst(sigma)).collect()),
            RRel::And(xs) => RRel::And(xs.iter().map(|x| x.subst(sigma)).collect()),
            // only the initial state of the first relation is affected
            RRel::Seq(a, b) => RRel::seq(a.subst(sigma), (**b).clone()),
            RRel::Star(_) => RRel::seq(RRel::Atom(Atom::fin(Expr::bool(true), sigma.clone(), TraceExpr::empty())), self.clone()),
            RRel::Test(b) => RRel::Atom(Atom::fin(sigma.apply(b), sigma.clone(), TraceExpr::empty())),
            RRel::NegInit(b, t) => RRel::NegInit(sigma.apply(b), t.subst(sigma)),
            RRel::R4(a) => RRel::r4(a.subst(sigma)),
            RRel::R5(a) => RRel::r5(a.subst(sigma)),
            RRel::Pred(e) => RRel::Pred(sigma.apply(e)),
        }
    }

    fn level(&self) -> u8 {
        match self {
            RRel::Or(xs) if xs.len() > 1 => 0,
            RRel::And(xs) if xs.len() > 1 => 1,
            RRel::Seq(..) => 2,
            _ => 4,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.level() < min {
            write!(f, "(")?;
            fmt::Display::fmt(self, f)?;
            write!(f, ")")
        } else {
            fmt::Display::fmt(self, f)
        }
    }
}

impl fmt::Display for RRel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RRel::False => write!(f, "false"),
            RRel::True => write!(f, "true"),
            RRel::Atom(a) => write!(f, "{a}"),
            RRel::Or(xs) | RRel::And(xs) if xs.is_empty() => {
                write!(f, "{}", if matches!(self, RRel::Or(_)) { "false" } else { "true" })
            }
            RRel::Or(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ∨ ")?;
                    }
                    x.fmt_at(f, 1)?;
                }
                Ok(())
            }
            RRel::And(xs) => {
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ∧ ")?;
                    }
                    x.fmt_at(f, 2)?;
                }
                Ok(())
            }
            RRel::Seq(a, b) => {
                a.fmt_at(f, 2)?;
                write!(f, " ; ")?;
                b.fmt_at(f, 2)
            }
            RRel::Star(a) => {
                a.fmt_at(f, 3)?;
                write!(f, "⋆")
            }
            RRel::Test(b) => write!(f, "[{b}]"),
            RRel::NegInit(b, t) => write!(f, "¬I({b} | {t})"),
            RRel::R4(a) => write!(f, "R4({a})"),
            RRel::R5(a) => write!(f, "R5({a})"),
            RRel::Pred(e) => write!(f, "⟪{e}⟫"),
        }
    }
}

/// A negated-init clause `¬I(b, t)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Clause {
    pub b: Expr,
    pub t: TraceExpr,
}

impl Clause {
    pub fn new(b: Expr, t: TraceExpr) -> Clause {
        Clause { b, t }
    }

    /// Does the clause allow the observation `(s, tt)`?
    pub fn holds(&self, s: &Valuation, tt: &[Event]) -> bool {
        !(self.b.holds_in(s) && tt.starts_with(&self.t.eval(s)))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "¬I({} | {})", self.b, self.t)
    }
}

/// Precondition normal form: a conjunction of negated-init clauses.
/// The empty conjunction is `true_r`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreNf(pub Vec<Clause>);

impl PreNf {
    pub fn true_r() -> PreNf {
        PreNf(vec![])
    }

    pub fn false_r() -> PreNf {
        PreNf(vec![Clause::new(Expr::bool(true), TraceExpr::empty())])
    }

    pub fn is_true(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_false(&self) -> bool {
        self.0.len() == 1 && self.0[0].b.is_true() && self.0[0].t.is_empty()
    }

    pub fn holds(&self, s: &Valuation, tt: &[Event]) -> bool {
        self.0.iter().all(|c| c.holds(s, tt))
    }

    pub fn to_rrel(&self) -> RRel {
        match self.0.len() {
            0 => RRel::True,
            1 => RRel::NegInit(self.0[0].b.clone(), self.0[0].t.clone()),
            _ => RRel::And(self.0.iter().map(|c| RRel::NegInit(c.b.clone(), c.t.clone())).collect()),
        }
    }

    pub fn subst(&self, sigma: &Subst) -> PreNf {
        PreNf(self.0.iter().map(|c| Clause::new(sigma.apply(&c.b), c.t.subst(sigma))).collect())
    }

    /// `b ⇒ P`.
    pub fn assuming(&self, b: &Expr) -> PreNf {
        PreNf(
            self.0
                .iter()
                .map(|c| Clause::new(Expr::and_s(b.clone(), c.b.clone()), c.t.clone()))
                .collect(),
        )
    }

    /// Minimal violating traces from `s`, within `bound`.
    pub fn violations(&self, s: &Valuation, bound: usize) -> Vec<GroundTrace> {
        let mut out: Vec<GroundTrace> = self
            .0
            .iter()
            .filter(|c| c.b.holds_in(s))
            .map(|c| c.t.eval(s))
            .filter(|t| t.len() <= bound)
            .collect();
        out.sort();
        out.dedup();
        minimal_traces(out)
    }
}

impl fmt::Display for PreNf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "true_r");
        }
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ∧ ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Removes traces that extend another trace in the set.
pub fn minimal_traces(mut ts: Vec<GroundTrace>) -> Vec<GroundTrace> {
    ts.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    let mut out: Vec<GroundTrace> = Vec::new();
    for t in ts {
        if !out.iter().any(|p| t.starts_with(p)) {
            out.push(t);
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::ValueType;

    #[test]
    fn event_set_collapses_channel_image() {
        let env = Env::new().chan("inp", Some(ValueType::int(0, 1)));
        let s = EventSet::of([
            EventTerm::with("inp", Expr::int(1)),
            EventTerm::with("inp", Expr::int(0)),
        ]);
        assert_eq!(s.canon(&env), EventSet::Chan("inp".into()));
        assert_eq!(s.canon(&env).to_string(), "{inp.*}");
    }

    #[test]
    fn atom_display() {
        let a = Atom::quiet(
            Expr::bool(true),
            TraceExpr::empty(),
            EventSet::of([EventTerm::plain("a"), EventTerm::plain("c")]),
        );
        assert_eq!(a.to_string(), "E(true | <> | {a, c})");
        let f = Atom::fin(Expr::bool(true), Subst::single("x", Expr::int(3)), TraceExpr::one(EventTerm::with("a", Expr::int(1))));
        assert_eq!(f.to_string(), "Phi(true | {x ↦ 3} | <a.1>)");
    }

    #[test]
    fn minimal_traces_drops_extensions() {
        let a = Event::plain("a");
        let b = Event::plain("b");
        let ts = vec![vec![a.clone(), b.clone()], vec![a.clone()], vec![b.clone()]];
        assert_eq!(minimal_traces(ts), vec![vec![a], vec![b]]);
    }
}
