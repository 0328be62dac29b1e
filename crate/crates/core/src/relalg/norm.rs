//! Normal forms for reactive relations.
//!
//! A normalized relation is a disjunction of chains. A chain is a sequential
//! composition of items: atoms, stars of normalized relations, or opaque
//! terms the rewriter does not look into. The empty chain is the identity
//! `Φ(true, id, ⟨⟩)`.

use super::cond::{self, valuations_over};
use super::{Atom, Clause, EventSet, PreNf, RRel, TraceExpr};
use crate::error::{Error, Result};
use crate::state::{Env, EventTerm, Expr, Subst};
use serde::Serialize;
use std::cell::Cell;
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Item {
    Atom(Atom),
    Star(Nf),
    Opaque(RRel),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Chain(pub Vec<Item>);

pub(crate) type Nf = Vec<Chain>;

const DEFAULT_FUEL: usize = 2_000_000;
/// Saturation gives up once a clause set grows beyond this size.
const MAX_CLAUSES: usize = 64;

/// Result of saturating `R⋆ wp P`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SaturationResult {
    pub clauses: PreNf,
    pub converged: bool,
    pub iterations: usize,
}

pub struct Normalizer<'a> {
    pub env: &'a Env,
    pub wp_bound: usize,
    fuel: Cell<usize>,
}

impl Item {
    fn to_rrel(&self) -> RRel {
        match self {
            Item::Atom(a) => RRel::Atom(a.clone()),
            Item::Star(body) => RRel::star(nf_to_rrel(body)),
            Item::Opaque(r) => r.clone(),
        }
    }

    fn nonempty_trace(&self) -> bool {
        matches!(self, Item::Atom(a) if !a.trace().is_empty())
    }
}

impl Chain {
    pub fn identity() -> Chain {
        Chain(vec![])
    }

    pub fn atom(a: Atom) -> Chain {
        Chain(vec![Item::Atom(a)])
    }

    fn single_atom(&self) -> Option<Atom> {
        match self.0.as_slice() {
            [] => Some(Atom::identity()),
            [Item::Atom(a)] => Some(a.clone()),
            _ => None,
        }
    }

    fn is_top(&self) -> bool {
        matches!(self.0.as_slice(), [Item::Opaque(RRel::True)])
    }

    pub fn to_rrel(&self) -> RRel {
        match self.0.as_slice() {
            [] => RRel::identity(),
            [i] => i.to_rrel(),
            items => {
                let mut it = items.iter().rev();
                let mut acc = it.next().unwrap().to_rrel();
                for i in it {
                    acc = RRel::seq(i.to_rrel(), acc);
                }
                acc
            }
        }
    }

    pub fn has_nonempty_atom(&self) -> bool {
        self.0.iter().any(Item::nonempty_trace)
    }

    pub fn has_opaque(&self) -> bool {
        self.0.iter().any(|i| matches!(i, Item::Opaque(_)))
    }

    pub fn has_star(&self) -> bool {
        self.0.iter().any(|i| matches!(i, Item::Star(_)))
    }

    /// Only atoms with empty traces.
    pub fn is_instantaneous(&self) -> bool {
        self.0.iter().all(|i| matches!(i, Item::Atom(a) if a.trace().is_empty()))
    }
}

pub(crate) fn nf_to_rrel(nf: &Nf) -> RRel {
    match nf.len() {
        0 => RRel::False,
        1 => nf[0].to_rrel(),
        _ => RRel::Or(nf.iter().map(Chain::to_rrel).collect()),
    }
}

fn key(c: &Chain) -> String {
    c.to_rrel().to_string()
}

fn trace_eq_cond(t1: &TraceExpr, t2: &TraceExpr) -> Option<Expr> {
    if t1.len() != t2.len() {
        return None;
    }
    let mut c = Expr::bool(true);
    for (a, b) in t1.0.iter().zip(&t2.0) {
        if a.chan != b.chan {
            return Some(Expr::bool(false));
        }
        match (&a.data, &b.data) {
            (None, None) => {}
            (Some(x), Some(y)) => c = Expr::and_s(c, Expr::eq(x.clone(), y.clone()).fold()),
            _ => return Some(Expr::bool(false)),
        }
    }
    Some(c)
}

fn ite_trace(c: &Expr, t1: &TraceExpr, t2: &TraceExpr) -> Option<TraceExpr> {
    if t1.len() != t2.len() {
        return None;
    }
    let mut out = Vec::new();
    for (a, b) in t1.0.iter().zip(&t2.0) {
        if a.chan != b.chan {
            return None;
        }
        match (&a.data, &b.data) {
            (None, None) => out.push(a.clone()),
            (Some(x), Some(y)) => out.push(EventTerm::with(
                a.chan.clone(),
                Expr::ite_s(c.clone(), x.clone(), y.clone()).fold(),
            )),
            _ => return None,
        }
    }
    Some(TraceExpr(out))
}

/// `Φ1 ; Φ2 = Φ(b1 ∧ σ1†b2, σ2 ∘ σ1, t1 ⌢ σ1†t2)`.
pub fn seq_final_final(f1: &Atom, f2: &Atom) -> Atom {
    match (f1, f2) {
        (
            Atom::Final { b: b1, sigma: s1, t: t1 },
            Atom::Final { b: b2, sigma: s2, t: t2 },
        ) => Atom::fin(
            Expr::and_s(b1.clone(), s1.apply(b2)),
            s1.then(s2),
            t1.concat(&t2.subst(s1)).fold(),
        ),
        _ => panic!("seq_final_final expects final atoms"),
    }
}

/// `Φ ; E = E(b1 ∧ σ1†b2, t1 ⌢ σ1†t2, σ1†E)`.
pub fn seq_final_quiescent(f: &Atom, q: &Atom) -> Atom {
    match (f, q) {
        (Atom::Final { b: b1, sigma: s1, t: t1 }, Atom::Quiet { b: b2, t: t2, acc }) => Atom::quiet(
            Expr::and_s(b1.clone(), s1.apply(b2)),
            t1.concat(&t2.subst(s1)).fold(),
            acc.subst(s1),
        ),
        _ => panic!("seq_final_quiescent expects a final then a quiescent atom"),
    }
}

/// `[b] ; P`, rewritten through `Φ(b, id, ⟨⟩) ; P`.
pub fn seq_test(env: &Env, b: &Expr, r: &RRel) -> Result<RRel> {
    normalize(env, &RRel::seq(RRel::Test(b.clone()), r.clone()))
}

/// `r1 ◁ c ▷ r2` for two atoms of the same kind.
pub fn merge_cond(env: &Env, r1: &RRel, c: &Expr, r2: &RRel) -> Result<RRel> {
    let n = Normalizer::new(env);
    let c = cond::simplify(env, c);
    if c.is_true() {
        return n.normalize(r1);
    }
    if c.is_false() {
        return n.normalize(r2);
    }
    match (r1, r2) {
        (RRel::Atom(a1), RRel::Atom(a2)) => match merge_atoms(&c, a1, a2)? {
            Some(a) => n.normalize(&RRel::Atom(a)),
            None => n.normalize(&RRel::Or(vec![
                RRel::Atom(a1.with_cond(Expr::and_s(c.clone(), a1.cond().clone()))),
                RRel::Atom(a2.with_cond(Expr::and_s(Expr::not_s(c.clone()), a2.cond().clone()))),
            ])),
        },
        _ => Err(Error::Invalid("merge_cond expects atoms".into())),
    }
}

fn merge_atoms(c: &Expr, a1: &Atom, a2: &Atom) -> Result<Option<Atom>> {
    match (a1, a2) {
        (Atom::Final { b: b1, sigma: s1, t: t1 }, Atom::Final { b: b2, sigma: s2, t: t2 }) => {
            Ok(ite_trace(c, t1, t2).map(|t| {
                Atom::fin(
                    Expr::ite_s(c.clone(), b1.clone(), b2.clone()).fold(),
                    Subst::ite(c, s1, s2),
                    t,
                )
            }))
        }
        (Atom::Quiet { b: b1, t: t1, acc: e1 }, Atom::Quiet { b: b2, t: t2, acc: e2 }) => {
            Ok(ite_trace(c, t1, t2).map(|t| {
                let acc = if e1 == e2 {
                    e1.clone()
                } else {
                    EventSet::Cond(c.clone(), Box::new(e1.clone()), Box::new(e2.clone()))
                };
                Atom::quiet(Expr::ite_s(c.clone(), b1.clone(), b2.clone()).fold(), t, acc)
            }))
        }
        (Atom::Init { .. }, _) | (_, Atom::Init { .. }) => Ok(None),
        _ => Err(Error::KindMismatch),
    }
}

/// `⋀ E(b_i, t, E_i) = E(⋀ b_i, t, ⋃ E_i)` for a common trace.
pub fn conj_quiescent(env: &Env, atoms: &[Atom]) -> Result<Atom> {
    let first = atoms.first().ok_or_else(|| Error::EmptyIndex("conjunction".into()))?;
    let t0 = first.trace().fold();
    let mut b = Expr::bool(true);
    let mut sets = Vec::new();
    for a in atoms {
        match a {
            Atom::Quiet { b: bi, t, acc } => {
                let t = t.fold();
                if t != t0 {
                    return Err(Error::TraceMismatch(t0.to_string(), t.to_string()));
                }
                b = Expr::and_s(b, bi.clone());
                sets.push(acc.clone());
            }
            _ => return Err(Error::KindMismatch),
        }
    }
    Ok(Atom::quiet(cond::simplify(env, &b), t0, EventSet::Union(sets).canon(env)))
}

/// `Φ(s, σ, t0) wp ¬I(b, t) = ¬I(s ∧ σ†b, t0 ⌢ σ†t)`, clause-wise.
pub fn wp_final(env: &Env, f: &Atom, p: &PreNf) -> PreNf {
    let Atom::Final { b: s, sigma, t: t0 } = f else {
        panic!("wp_final expects a final atom")
    };
    let n = Normalizer::new(env);
    n.pre_canon(PreNf(
        p.0.iter()
            .map(|c| {
                Clause::new(
                    Expr::and_s(s.clone(), sigma.apply(&c.b)),
                    t0.concat(&c.t.subst(sigma)).fold(),
                )
            })
            .collect(),
    ))
}

pub fn normalize(env: &Env, r: &RRel) -> Result<RRel> {
    Normalizer::new(env).normalize(r)
}

pub fn filter_r4(env: &Env, r: &RRel) -> Result<RRel> {
    normalize(env, &RRel::r4(r.clone()))
}

pub fn filter_r5(env: &Env, r: &RRel) -> Result<RRel> {
    normalize(env, &RRel::r5(r.clone()))
}

impl<'a> Normalizer<'a> {
    pub fn new(env: &'a Env) -> Self {
        Normalizer { env, wp_bound: 16, fuel: Cell::new(DEFAULT_FUEL) }
    }

    pub fn with_wp_bound(mut self, bound: usize) -> Self {
        self.wp_bound = bound;
        self
    }

    fn burn(&self, what: &dyn Fn() -> String) -> Result<()> {
        let f = self.fuel.get();
        if f == 0 {
            return Err(Error::NormalizationIncomplete(format!("fuel exhausted at {}", what())));
        }
        self.fuel.set(f - 1);
        Ok(())
    }

    pub fn normalize(&self, r: &RRel) -> Result<RRel> {
        Ok(nf_to_rrel(&self.nf(r)?))
    }

    pub(crate) fn nf(&self, r: &RRel) -> Result<Nf> {
        self.burn(&|| r.to_string())?;
        match r {
            RRel::False => Ok(vec![]),
            RRel::True => Ok(vec![Chain(vec![Item::Opaque(RRel::True)])]),
            RRel::Atom(a) => Ok(self.atom_nf(a)),
            RRel::Test(b) => Ok(self.atom_nf(&Atom::fin(b.clone(), Subst::id(), TraceExpr::empty()))),
            RRel::Or(xs) => {
                let mut out = Vec::new();
                for x in xs {
                    out.extend(self.nf(x)?);
                }
                Ok(self.canon(out))
            }
            RRel::And(xs) => {
                let mut acc: Nf = vec![Chain(vec![Item::Opaque(RRel::True)])];
                for x in xs {
                    let n = self.nf(x)?;
                    acc = self.conj_nf(&acc, &n)?;
                }
                Ok(acc)
            }
            RRel::Seq(a, b) => {
                let na = self.nf(a)?;
                if na.is_empty() {
                    return Ok(vec![]);
                }
                let nb = self.nf(b)?;
                self.seq_nf(&na, &nb)
            }
            RRel::Star(a) => {
                let body = self.nf(a)?;
                Ok(self.star_nf(body))
            }
            RRel::NegInit(b, t) => {
                let b = cond::simplify(self.env, b);
                if b.is_false() {
                    Ok(vec![Chain(vec![Item::Opaque(RRel::True)])])
                } else {
                    Ok(vec![Chain(vec![Item::Opaque(RRel::NegInit(b, t.fold()))])])
                }
            }
            RRel::R4(a) => {
                let n = self.nf(a)?;
                let mut out = Vec::new();
                for c in &n {
                    out.extend(self.r4_chain(c)?);
                }
                Ok(self.canon(out))
            }
            RRel::R5(a) => {
                let n = self.nf(a)?;
                let mut out = Vec::new();
                for c in &n {
                    out.extend(self.r5_chain(c)?);
                }
                Ok(self.canon(out))
            }
            RRel::Pred(e) => {
                let e = cond::simplify(self.env, e);
                if e.is_true() {
                    Ok(vec![Chain(vec![Item::Opaque(RRel::True)])])
                } else if e.is_false() {
                    Ok(vec![])
                } else {
                    Ok(vec![Chain(vec![Item::Opaque(RRel::Pred(e))])])
                }
            }
        }
    }

    /// Simplifies an atom; `None` when its condition is unsatisfiable.
    pub(crate) fn simplify_atom(&self, a: &Atom) -> Option<Atom> {
        let b = cond::simplify(self.env, a.cond());
        if b.is_false() {
            return None;
        }
        Some(match a {
            Atom::Init { t, .. } => Atom::init(b, t.fold()),
            Atom::Quiet { t, acc, .. } => Atom::quiet(b, t.fold(), acc.canon(self.env)),
            Atom::Final { sigma, t, .. } => Atom::fin(b, sigma.clone().normalized(), t.fold()),
        })
    }

    fn atom_nf(&self, a: &Atom) -> Nf {
        match self.simplify_atom(a) {
            None => vec![],
            Some(a) if a.is_identity() => vec![Chain::identity()],
            Some(Atom::Init { b, t }) => vec![Chain(vec![Item::Opaque(RRel::Atom(Atom::init(b, t)))])],
            Some(a) => vec![Chain::atom(a)],
        }
    }

    /// Appends `item` to `chain`, merging with the last item where a rule
    /// applies. Returns `false` when the chain became unsatisfiable.
    fn push(&self, chain: &mut Vec<Item>, item: Item) -> bool {
        match item {
            Item::Atom(a) => {
                if a.is_identity() {
                    return true;
                }
                let merged = match (chain.last(), &a) {
                    (Some(Item::Atom(g @ Atom::Final { .. })), Atom::Final { .. }) => {
                        Some(seq_final_final(g, &a))
                    }
                    (Some(Item::Atom(g @ Atom::Final { .. })), Atom::Quiet { .. }) => {
                        Some(seq_final_quiescent(g, &a))
                    }
                    _ => None,
                };
                match merged {
                    Some(m) => {
                        chain.pop();
                        match self.simplify_atom(&m) {
                            None => false,
                            Some(m) if m.is_identity() => true,
                            Some(m) => {
                                chain.push(Item::Atom(m));
                                true
                            }
                        }
                    }
                    None => match self.simplify_atom(&a) {
                        None => false,
                        Some(a) => {
                            chain.push(Item::Atom(a));
                            true
                        }
                    },
                }
            }
            Item::Star(body) => {
                if let Some(Item::Star(prev)) = chain.last() {
                    if *prev == body {
                        return true;
                    }
                }
                chain.push(Item::Star(body));
                true
            }
            Item::Opaque(RRel::Pred(e)) => {
                if let Some(Item::Atom(Atom::Final { b, sigma, t })) = chain.last() {
                    if t.is_empty() {
                        let e2 = cond::simplify(self.env, &Expr::and_s(b.clone(), sigma.apply(&e)));
                        chain.pop();
                        if e2.is_false() {
                            return false;
                        }
                        let item = if e2.is_true() { RRel::True } else { RRel::Pred(e2) };
                        chain.push(Item::Opaque(item));
                        return true;
                    }
                }
                chain.push(Item::Opaque(RRel::Pred(e)));
                true
            }
            other => {
                chain.push(other);
                true
            }
        }
    }

    fn concat(&self, a: &Chain, b: &Chain) -> Option<Chain> {
        let mut items = a.0.clone();
        for i in &b.0 {
            if !self.push(&mut items, i.clone()) {
                return None;
            }
        }
        Some(Chain(items))
    }

    fn rebuild(&self, items: &[Item]) -> Option<Chain> {
        let mut out = Vec::new();
        for i in items {
            if !self.push(&mut out, i.clone()) {
                return None;
            }
        }
        Some(Chain(out))
    }

    pub(crate) fn seq_nf(&self, a: &Nf, b: &Nf) -> Result<Nf> {
        let mut out = Vec::new();
        for x in a {
            for y in b {
                self.burn(&|| "sequential composition".into())?;
                if let Some(c) = self.concat(x, y) {
                    out.push(c);
                }
            }
        }
        Ok(self.canon(out))
    }

    pub(crate) fn star_nf(&self, body: Nf) -> Nf {
        let body: Nf = body.into_iter().filter(|c| !c.0.is_empty()).collect();
        if body.is_empty() {
            return vec![Chain::identity()];
        }
        if body.iter().any(Chain::is_top) {
            return vec![Chain(vec![Item::Opaque(RRel::True)])];
        }
        if let [c] = body.as_slice() {
            if let [Item::Star(_)] = c.0.as_slice() {
                return body;
            }
        }
        vec![Chain(vec![Item::Star(body)])]
    }

    pub(crate) fn conj_nf(&self, a: &Nf, b: &Nf) -> Result<Nf> {
        let mut out = Vec::new();
        for x in a {
            for y in b {
                self.burn(&|| "conjunction".into())?;
                if let Some(c) = self.conj_chain(x, y) {
                    out.push(c);
                }
            }
        }
        Ok(self.canon(out))
    }

    fn conj_chain(&self, a: &Chain, b: &Chain) -> Option<Chain> {
        if a.is_top() {
            return Some(b.clone());
        }
        if b.is_top() || a == b {
            return Some(a.clone());
        }
        if let (Some(x), Some(y)) = (a.single_atom(), b.single_atom()) {
            match (&x, &y) {
                (Atom::Quiet { b: b1, t: t1, acc: e1 }, Atom::Quiet { b: b2, t: t2, acc: e2 }) => {
                    let eq = trace_eq_cond(t1, t2)?;
                    let cond = Expr::and_s(Expr::and_s(b1.clone(), b2.clone()), eq);
                    let atom = Atom::quiet(cond, t1.clone(), EventSet::union(e1.clone(), e2.clone()));
                    return self.simplify_atom(&atom).map(Chain::atom);
                }
                (Atom::Final { b: b1, sigma: s1, t: t1 }, Atom::Final { b: b2, sigma: s2, t: t2 }) => {
                    let mut cond = Expr::and_s(Expr::and_s(b1.clone(), b2.clone()), trace_eq_cond(t1, t2)?);
                    let vars: BTreeSet<&String> = s1.0.keys().chain(s2.0.keys()).collect();
                    for x in vars {
                        let e1 = s1.get(x).cloned().unwrap_or_else(|| Expr::var(x.clone()));
                        let e2 = s2.get(x).cloned().unwrap_or_else(|| Expr::var(x.clone()));
                        cond = Expr::and_s(cond, Expr::eq(e1, e2).fold());
                    }
                    let atom = Atom::fin(cond, s1.clone(), t1.clone());
                    return match self.simplify_atom(&atom) {
                        None => None,
                        Some(a) if a.is_identity() => Some(Chain::identity()),
                        Some(a) => Some(Chain::atom(a)),
                    };
                }
                _ => {}
            }
        }
        let mut parts = vec![a.to_rrel(), b.to_rrel()];
        parts.sort();
        Some(Chain(vec![Item::Opaque(RRel::And(parts))]))
    }

    /// Canonical disjunction: deduplicated, merged where only conditions
    /// differ, semantically equal atoms removed, sorted by printed form.
    pub(crate) fn canon(&self, chains: Nf) -> Nf {
        if let Some(top) = chains.iter().find(|c| c.is_top()) {
            return vec![top.clone()];
        }
        let mut out: Vec<Chain> = Vec::new();
        for c in chains {
            if out.contains(&c) {
                continue;
            }
            out.push(c);
        }
        // merge single atoms that differ only in their condition
        let mut merged: Vec<Chain> = Vec::new();
        for c in out {
            let Some(a) = c.single_atom() else {
                merged.push(c);
                continue;
            };
            let pos = merged.iter().position(|m| {
                m.single_atom()
                    .map(|ma| ma.with_cond(Expr::bool(true)) == a.with_cond(Expr::bool(true)))
                    .unwrap_or(false)
            });
            match pos {
                Some(i) => {
                    let ma = merged[i].single_atom().unwrap();
                    let b = Expr::or_s(ma.cond().clone(), a.cond().clone());
                    match self.simplify_atom(&ma.with_cond(b)) {
                        Some(n) if n.is_identity() => merged[i] = Chain::identity(),
                        Some(n) => merged[i] = Chain::atom(n),
                        None => {
                            merged.remove(i);
                        }
                    }
                }
                None => merged.push(c),
            }
        }
        // semantic duplicates among single atoms
        let mut result: Vec<Chain> = Vec::new();
        for c in merged {
            let dup = match c.single_atom() {
                Some(a) => result.iter().any(|r| {
                    r.single_atom().map(|ra| self.atoms_equivalent(&ra, &a)).unwrap_or(false)
                }),
                None => false,
            };
            if !dup {
                result.push(c);
            }
        }
        let mut keyed: Vec<(String, Chain)> = result.into_iter().map(|c| (key(&c), c)).collect();
        keyed.sort_by(|x, y| x.0.cmp(&y.0));
        keyed.dedup_by(|x, y| x.0 == y.0);
        keyed.into_iter().map(|(_, c)| c).collect()
    }

    /// Semantic equality of two atoms over the finite state space.
    pub(crate) fn atoms_equivalent(&self, a: &Atom, b: &Atom) -> bool {
        if a == b {
            return true;
        }
        if std::mem::discriminant(a) != std::mem::discriminant(b) || a.trace().len() != b.trace().len() {
            return false;
        }
        let mut vars = a.cond().free_vars();
        vars.extend(b.cond().free_vars());
        let collect_trace = |t: &TraceExpr, vars: &mut BTreeSet<String>| {
            for e in &t.0 {
                if let Some(d) = &e.data {
                    vars.extend(d.free_vars());
                }
            }
        };
        collect_trace(a.trace(), &mut vars);
        collect_trace(b.trace(), &mut vars);
        // state updates and acceptance sets may depend on anything
        if !matches!(a, Atom::Init { .. }) {
            vars.extend(self.env.vars.keys().cloned());
        }
        valuations_over(self.env, &vars).iter().all(|s| {
            let (ba, bb) = (a.cond().holds_in(s), b.cond().holds_in(s));
            if ba != bb {
                return false;
            }
            if !ba {
                return true;
            }
            if a.trace().eval(s) != b.trace().eval(s) {
                return false;
            }
            match (a, b) {
                (Atom::Final { sigma: s1, .. }, Atom::Final { sigma: s2, .. }) => s1.run(s) == s2.run(s),
                (Atom::Quiet { acc: e1, .. }, Atom::Quiet { acc: e2, .. }) => {
                    e1.eval(self.env, s) == e2.eval(self.env, s)
                }
                _ => true,
            }
        })
    }

    fn r4_chain(&self, c: &Chain) -> Result<Nf> {
        if c.has_nonempty_atom() {
            return Ok(vec![c.clone()]);
        }
        if let Some(i) = c.0.iter().position(|it| matches!(it, Item::Star(_))) {
            let Item::Star(body) = &c.0[i] else { unreachable!() };
            if body.iter().all(Chain::has_nonempty_atom) {
                let pre = &c.0[..i];
                let rest = &c.0[i + 1..];
                let mut out = Vec::new();
                let mut skipped = pre.to_vec();
                skipped.extend(rest.iter().cloned());
                if let Some(z) = self.rebuild(&skipped) {
                    out.extend(self.r4_chain(&z)?);
                }
                for r in body {
                    let mut items = pre.to_vec();
                    items.extend(r.0.iter().cloned());
                    items.push(c.0[i].clone());
                    items.extend(rest.iter().cloned());
                    if let Some(z) = self.rebuild(&items) {
                        out.push(z);
                    }
                }
                return Ok(out);
            }
            return Ok(vec![Chain(vec![Item::Opaque(RRel::r4(c.to_rrel()))])]);
        }
        if c.has_opaque() {
            return Ok(vec![Chain(vec![Item::Opaque(RRel::r4(c.to_rrel()))])]);
        }
        Ok(vec![])
    }

    fn r5_chain(&self, c: &Chain) -> Result<Nf> {
        if c.has_nonempty_atom() {
            return Ok(vec![]);
        }
        let productive_star =
            |it: &Item| matches!(it, Item::Star(body) if body.iter().all(Chain::has_nonempty_atom));
        if c.0.iter().any(productive_star) {
            let kept: Vec<Item> = c.0.iter().filter(|it| !productive_star(it)).cloned().collect();
            return match self.rebuild(&kept) {
                Some(z) => self.r5_chain(&z),
                None => Ok(vec![]),
            };
        }
        if c.has_opaque() || c.has_star() {
            return Ok(vec![Chain(vec![Item::Opaque(RRel::r5(c.to_rrel()))])]);
        }
        Ok(vec![c.clone()])
    }

    // ---- preconditions -------------------------------------------------

    /// Canonical clause set: unsatisfiable clauses dropped, subsumed clauses
    /// removed, sorted; an unconditional empty-trace clause absorbs all.
    pub fn pre_canon(&self, p: PreNf) -> PreNf {
        let mut cs: Vec<Clause> = Vec::new();
        for c in p.0 {
            let b = cond::simplify(self.env, &c.b);
            if b.is_false() {
                continue;
            }
            let c = Clause::new(b, c.t.fold());
            if c.b.is_true() && c.t.is_empty() {
                return PreNf::false_r();
            }
            if !cs.contains(&c) {
                cs.push(c);
            }
        }
        cs.sort_by_key(|c| c.to_string());
        let mut out: Vec<Clause> = Vec::new();
        for (i, c) in cs.iter().enumerate() {
            let redundant = cs.iter().enumerate().any(|(j, d)| {
                j != i && self.subsumes(d, c) && (!self.subsumes(c, d) || j < i)
            });
            if !redundant {
                out.push(c.clone());
            }
        }
        PreNf(out)
    }

    /// `¬I(b1,t1)` implies `¬I(b2,t2)`: whenever `b2` holds, so does `b1`, and
    /// `t1` is a prefix of `t2`.
    pub fn subsumes(&self, c1: &Clause, c2: &Clause) -> bool {
        if c1 == c2 {
            return true;
        }
        if c1.t.len() > c2.t.len() {
            return false;
        }
        let mut vars = c1.b.free_vars();
        vars.extend(c2.b.free_vars());
        for t in [&c1.t, &c2.t] {
            for e in &t.0 {
                if let Some(d) = &e.data {
                    vars.extend(d.free_vars());
                }
            }
        }
        valuations_over(self.env, &vars).iter().all(|s| {
            !c2.b.holds_in(s) || (c1.b.holds_in(s) && c2.t.eval(s).starts_with(&c1.t.eval(s)))
        })
    }

    pub fn pre_and(&self, a: &PreNf, b: &PreNf) -> PreNf {
        let mut v = a.0.clone();
        v.extend(b.0.iter().cloned());
        self.pre_canon(PreNf(v))
    }

    /// `R wp P` for a normalized post-relation `R`.
    pub(crate) fn wp_nf(&self, r: &Nf, p: &PreNf) -> Result<PreNf> {
        if p.is_true() {
            return Ok(PreNf::true_r());
        }
        let mut acc = PreNf::true_r();
        for c in r {
            let w = self.wp_chain(c, p)?;
            acc = self.pre_and(&acc, &w);
        }
        Ok(acc)
    }

    fn wp_chain(&self, c: &Chain, p: &PreNf) -> Result<PreNf> {
        let mut acc = p.clone();
        for item in c.0.iter().rev() {
            if acc.is_true() {
                break;
            }
            acc = match item {
                Item::Atom(f @ Atom::Final { .. }) => wp_final(self.env, f, &acc),
                Item::Star(body) => {
                    let sat = self.saturate(body, &acc, self.wp_bound)?;
                    if !sat.converged {
                        return Err(Error::WpNotConverged(self.wp_bound));
                    }
                    sat.clauses
                }
                Item::Opaque(RRel::True) => PreNf::false_r(),
                other => {
                    return Err(Error::NormalizationIncomplete(format!(
                        "weakest precondition through {}",
                        other.to_rrel()
                    )))
                }
            };
        }
        Ok(acc)
    }

    /// Iterates `C_{i+1} = C_i ∧ (R wp C_i)` from `C_0 = P`. Reports no
    /// convergence after `bound` steps or when the clause set explodes.
    pub(crate) fn saturate(&self, r: &Nf, p: &PreNf, bound: usize) -> Result<SaturationResult> {
        let mut c = self.pre_canon(p.clone());
        for i in 0..bound {
            let step = self.wp_nf(r, &c)?;
            let fresh = step.0.iter().any(|k| !c.0.iter().any(|d| self.subsumes(d, k)));
            if !fresh {
                return Ok(SaturationResult { clauses: c, converged: true, iterations: i });
            }
            c = self.pre_and(&c, &step);
            if c.0.len() > MAX_CLAUSES {
                return Ok(SaturationResult { clauses: c, converged: false, iterations: i + 1 });
            }
        }
        Ok(SaturationResult { clauses: c, converged: false, iterations: bound })
    }

    /// Conditional on normalized relations.
    pub(crate) fn cond_nf(&self, b: &Expr, x: &Nf, y: &Nf) -> Result<Nf> {
        let b = cond::simplify(self.env, b);
        if b.is_true() {
            return Ok(x.clone());
        }
        if b.is_false() {
            return Ok(y.clone());
        }
        if let ([cx], [cy]) = (x.as_slice(), y.as_slice()) {
            if let (Some(ax), Some(ay)) = (cx.single_atom(), cy.single_atom()) {
                if let Some(m) = merge_atoms(&b, &ax, &ay)? {
                    return Ok(self.atom_nf(&m));
                }
            }
        }
        let mut out = Vec::new();
        for (cond, side) in [(b.clone(), x), (Expr::not_s(b.clone()), y)] {
            let test = Chain::atom(Atom::fin(cond, Subst::id(), TraceExpr::empty()));
            for c in side {
                if let Some(z) = self.concat(&test, c) {
                    out.push(z);
                }
            }
        }
        Ok(self.canon(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{BinOp, ValueType};

    fn env() -> Env {
        Env::new()
            .var("x", ValueType::int(0, 3))
            .chan("a", Some(ValueType::int(0, 3)))
            .chan("b", None)
    }

    fn fin(b: Expr, s: Subst, t: Vec<EventTerm>) -> Atom {
        Atom::fin(b, s, TraceExpr(t))
    }

    #[test]
    fn final_final_substitutes_into_trace() {
        let f1 = fin(Expr::bool(true), Subst::single("x", Expr::int(1)), vec![]);
        let f2 = fin(Expr::bool(true), Subst::id(), vec![EventTerm::with("a", Expr::var("x"))]);
        let r = seq_final_final(&f1, &f2);
        assert_eq!(r.to_string(), "Phi(true | {x ↦ 1} | <a.1>)");
    }

    #[test]
    fn example_two_normalizes() {
        let env = env();
        let r = RRel::seq(
            RRel::Atom(fin(Expr::bool(true), Subst::single("x", Expr::int(1)), vec![])),
            RRel::seq(
                RRel::Atom(fin(Expr::bool(true), Subst::id(), vec![EventTerm::with("a", Expr::var("x"))])),
                RRel::Atom(fin(
                    Expr::bool(true),
                    Subst::single("x", Expr::bin(BinOp::Add, Expr::var("x"), Expr::int(2))),
                    vec![],
                )),
            ),
        );
        let n = normalize(&env, &r).unwrap();
        assert_eq!(n.to_string(), "Phi(true | {x ↦ 3} | <a.1>)");
    }

    #[test]
    fn or_unit_and_idempotence() {
        let env = env();
        let a = RRel::Atom(fin(Expr::bool(true), Subst::id(), vec![EventTerm::plain("b")]));
        let r = RRel::Or(vec![RRel::False, a.clone()]);
        let n = normalize(&env, &r).unwrap();
        assert_eq!(n, a);
        assert_eq!(normalize(&env, &n).unwrap(), n);
    }

    #[test]
    fn wp_through_event() {
        let env = env();
        let f = fin(Expr::bool(true), Subst::id(), vec![EventTerm::plain("b")]);
        let w = wp_final(&env, &f, &PreNf::false_r());
        assert_eq!(w.to_string(), "¬I(true | <b>)");
        let f = fin(Expr::bool(true), Subst::single("x", Expr::int(1)), vec![]);
        let p = PreNf(vec![Clause::new(Expr::eq(Expr::var("x"), Expr::int(0)), TraceExpr::one(EventTerm::plain("b")))]);
        assert!(wp_final(&env, &f, &p).is_true());
    }

    #[test]
    fn r5_of_choice_example() {
        let env = Env::new().chan("a", None).chan("b", None);
        let q1 = Atom::quiet(Expr::bool(true), TraceExpr::one(EventTerm::plain("a")), EventSet::Single(EventTerm::plain("b")));
        let q2 = Atom::quiet(Expr::bool(true), TraceExpr::empty(), EventSet::Single(EventTerm::plain("a")));
        let r = RRel::Or(vec![RRel::Atom(q1), RRel::Atom(q2.clone())]);
        assert_eq!(filter_r5(&env, &r).unwrap(), RRel::Atom(q2));
    }

    #[test]
    fn conj_quiescent_unions_sets() {
        let env = Env::new().chan("a", None).chan("c", None);
        let q1 = Atom::quiet(Expr::bool(true), TraceExpr::empty(), EventSet::Single(EventTerm::plain("a")));
        let q2 = Atom::quiet(Expr::bool(true), TraceExpr::empty(), EventSet::Single(EventTerm::plain("c")));
        let r = conj_quiescent(&env, &[q1, q2]).unwrap();
        assert_eq!(r.to_string(), "E(true | <> | {a, c})");
        let q3 = Atom::quiet(Expr::bool(true), TraceExpr::one(EventTerm::plain("a")), EventSet::Empty);
        let q4 = Atom::quiet(Expr::bool(true), TraceExpr::empty(), EventSet::Empty);
        assert!(matches!(conj_quiescent(&env, &[q3, q4]), Err(Error::TraceMismatch(..))));
    }

    #[test]
    fn merge_cond_kind_mismatch() {
        let env = env();
        let f = RRel::Atom(Atom::identity());
        let q = RRel::Atom(Atom::quiet(Expr::bool(true), TraceExpr::empty(), EventSet::Empty));
        let c = Expr::eq(Expr::var("x"), Expr::int(0));
        assert_eq!(merge_cond(&env, &f, &c, &q), Err(Error::KindMismatch));
    }

    #[test]
    fn saturation_diverges_on_growing_clauses() {
        let env = Env::new().var("x", ValueType::int(0, 1)).chan("a", None).chan("b", None);
        let n = Normalizer::new(&env);
        let r = vec![Chain::atom(fin(Expr::bool(true), Subst::id(), vec![EventTerm::plain("a")]))];
        let p = PreNf(vec![Clause::new(Expr::eq(Expr::var("x"), Expr::int(0)), TraceExpr::one(EventTerm::plain("b")))]);
        let sat = n.saturate(&r, &p, 16).unwrap();
        assert!(!sat.converged);
        let p2 = PreNf(vec![Clause::new(
            Expr::bool(true),
            TraceExpr(vec![EventTerm::plain("a"), EventTerm::plain("a")]),
        )]);
        let sat = n.saturate(&r, &p2, 16).unwrap();
        assert!(sat.converged);
    }
}
