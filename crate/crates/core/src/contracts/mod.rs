//! The contract calculus.

use crate::dsl::Proc;
use crate::error::{Error, Result};
use crate::relalg::{
    nf_to_rrel, Atom, Chain, EventSet, Item, Nf, Normalizer, PreNf, RRel, TraceExpr,
};
use crate::state::{Env, EventTerm, Expr, Subst};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Three-valued classification flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tri {
    Yes,
    No,
    Unknown,
}

impl Tri {
    fn or(self, other: Tri) -> Tri {
        match (self, other) {
            (Tri::Yes, _) | (_, Tri::Yes) => Tri::Yes,
            (Tri::Unknown, _) | (_, Tri::Unknown) => Tri::Unknown,
            _ => Tri::No,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flags {
    pub productive: Tri,
    pub instantaneous: Tri,
}

/// `⦗pre | peri | post⦘` with normalized components.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Contract {
    pub pre: PreNf,
    pub peri: RRel,
    pub post: RRel,
    pub flags: Flags,
}

impl Contract {
    /// Structural equality of the three relations (flags ignored).
    pub fn same_relations(&self, other: &Contract) -> bool {
        self.pre == other.pre && self.peri == other.peri && self.post == other.post
    }

    pub fn to_json(&self) -> serde_json::Value {
        let show = |r: &RRel| -> Vec<String> { r.disjuncts().iter().map(|d| d.to_string()).collect() };
        serde_json::json!({
            "pre": self.pre.0.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "peri": show(&self.peri),
            "post": show(&self.post),
            "flags": self.flags,
            "text": self.to_string(),
            "terms": { "pre": self.pre, "peri": self.peri, "post": self.post },
        })
    }
}

impl fmt::Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⦗{} | {} | {}⦘", self.pre, self.peri, self.post)
    }
}

/// Contract constructors and combinators over a fixed declaration set.
pub struct Calculus<'a> {
    pub env: &'a Env,
    pub wp_bound: usize,
}

impl<'a> Calculus<'a> {
    pub fn new(env: &'a Env) -> Self {
        Calculus { env, wp_bound: 16 }
    }

    pub fn with_wp_bound(mut self, b: usize) -> Self {
        self.wp_bound = b;
        self
    }

    fn norm(&self) -> Normalizer<'a> {
        Normalizer::new(self.env).with_wp_bound(self.wp_bound)
    }

    pub(crate) fn nf(&self, r: &RRel) -> Result<Nf> {
        self.norm().nf(r)
    }

    /// Assembles a contract from normal forms and classifies it.
    pub(crate) fn build(&self, pre: PreNf, peri: Nf, post: Nf, hint: Tri) -> Contract {
        let n = self.norm();
        let pre = n.pre_canon(pre);
        let flags = classify_nf(&peri, &post, hint);
        Contract { pre, peri: nf_to_rrel(&peri), post: nf_to_rrel(&post), flags }
    }

    /// Normalizes arbitrary components into a contract.
    pub fn contract(&self, pre: PreNf, peri: &RRel, post: &RRel) -> Result<Contract> {
        let peri = self.nf(peri)?;
        let post = self.nf(post)?;
        Ok(self.build(pre, peri, post, Tri::No))
    }

    pub fn skip(&self) -> Contract {
        self.build(PreNf::true_r(), vec![], vec![Chain::identity()], Tri::No)
    }

    pub fn stop(&self) -> Contract {
        let q = Atom::quiet(Expr::bool(true), TraceExpr::empty(), EventSet::Empty);
        self.build(PreNf::true_r(), vec![Chain::atom(q)], vec![], Tri::Yes)
    }

    pub fn chaos(&self) -> Contract {
        self.build(PreNf::false_r(), vec![], vec![], Tri::No)
    }

    pub fn miracle(&self) -> Contract {
        self.build(PreNf::true_r(), vec![], vec![], Tri::Yes)
    }

    pub fn assign(&self, sigma: &Subst) -> Result<Contract> {
        let post = self.nf(&RRel::Atom(Atom::fin(Expr::bool(true), sigma.clone(), TraceExpr::empty())))?;
        Ok(self.build(PreNf::true_r(), vec![], post, Tri::No))
    }

    pub fn do_event(&self, e: &EventTerm) -> Result<Contract> {
        let peri = self.nf(&RRel::Atom(Atom::quiet(
            Expr::bool(true),
            TraceExpr::empty(),
            EventSet::Single(e.clone()),
        )))?;
        let post = self.nf(&RRel::Atom(Atom::fin(Expr::bool(true), Subst::id(), TraceExpr::one(e.clone()))))?;
        Ok(self.build(PreNf::true_r(), peri, post, Tri::Yes))
    }

    /// `⦗P1 ∧ (P3 wp Q1) | P2 ∨ (P3;Q2) | P3;Q3⦘`.
    pub fn seq(&self, c1: &Contract, c2: &Contract) -> Result<Contract> {
        let n = self.norm();
        let p2 = n.nf(&c1.peri)?;
        let p3 = n.nf(&c1.post)?;
        let q2 = n.nf(&c2.peri)?;
        let q3 = n.nf(&c2.post)?;
        let wp = n.wp_nf(&p3, &c2.pre)?;
        let pre = n.pre_and(&c1.pre, &wp);
        let mut peri = p2;
        peri.extend(n.seq_nf(&p3, &q2)?);
        let peri = n.canon(peri);
        let post = n.seq_nf(&p3, &q3)?;
        let hint = if c1.flags.productive == Tri::Yes || c2.flags.productive == Tri::Yes {
            Tri::Yes
        } else {
            Tri::No
        };
        Ok(self.build(pre, peri, post, hint))
    }

    pub fn seq_all(&self, cs: &[Contract]) -> Result<Contract> {
        let mut acc = self.skip();
        for c in cs {
            acc = self.seq(&acc, c)?;
        }
        Ok(acc)
    }

    fn all_productive(cs: &[Contract]) -> Tri {
        if cs.iter().all(|c| c.flags.productive == Tri::Yes) {
            Tri::Yes
        } else {
            Tri::No
        }
    }

    /// Internal choice: conjoined preconditions, disjoined peri and post.
    pub fn int_choice(&self, cs: &[Contract]) -> Result<Contract> {
        if cs.is_empty() {
            return Err(Error::EmptyIndex("internal choice".into()));
        }
        let n = self.norm();
        let mut pre = PreNf::true_r();
        let mut peri = Vec::new();
        let mut post = Vec::new();
        for c in cs {
            pre = n.pre_and(&pre, &c.pre);
            peri.extend(n.nf(&c.peri)?);
            post.extend(n.nf(&c.post)?);
        }
        Ok(self.build(pre, n.canon(peri), n.canon(post), Self::all_productive(cs)))
    }

    /// External choice: `⦗⋀ P_i | (⋀ R5(Q_i)) ∨ (⋁ R4(Q_i)) | ⋁ R_i⦘`.
    pub fn ext_choice(&self, cs: &[Contract]) -> Result<Contract> {
        if cs.is_empty() {
            return Err(Error::EmptyIndex("external choice".into()));
        }
        let n = self.norm();
        let mut pre = PreNf::true_r();
        let mut waiting: Nf = vec![Chain(vec![Item::Opaque(RRel::True)])];
        let mut moved = Vec::new();
        let mut post = Vec::new();
        for c in cs {
            pre = n.pre_and(&pre, &c.pre);
            waiting = n.conj_nf(&waiting, &n.nf(&RRel::r5(c.peri.clone()))?)?;
            moved.extend(n.nf(&RRel::r4(c.peri.clone()))?);
            post.extend(n.nf(&c.post)?);
        }
        let mut peri = waiting;
        peri.extend(moved);
        Ok(self.build(pre, n.canon(peri), n.canon(post), Self::all_productive(cs)))
    }

    /// `P ◁ b ▷ Q`, componentwise.
    pub fn cond(&self, b: &Expr, c1: &Contract, c2: &Contract) -> Result<Contract> {
        let n = self.norm();
        let pre = n.pre_and(&c1.pre.assuming(b), &c2.pre.assuming(&Expr::not_s(b.clone())));
        let peri = n.cond_nf(b, &n.nf(&c1.peri)?, &n.nf(&c2.peri)?)?;
        let post = n.cond_nf(b, &n.nf(&c1.post)?, &n.nf(&c2.post)?)?;
        Ok(self.build(pre, peri, post, Self::all_productive(&[c1.clone(), c2.clone()])))
    }

    /// `⦗R⋆ wp P | R⋆ ; Q | R⋆⦘`.
    pub fn star(&self, c: &Contract) -> Result<Contract> {
        let n = self.norm();
        let r = n.nf(&c.post)?;
        let sat = n.saturate(&r, &c.pre, self.wp_bound)?;
        if !sat.converged {
            return Err(Error::WpNotConverged(self.wp_bound));
        }
        let star = n.star_nf(r);
        let peri = n.seq_nf(&star, &n.nf(&c.peri)?)?;
        Ok(self.build(sat.clauses, peri, star, Tri::No))
    }

    /// `while b do C` for a productive body, with the special cases for a
    /// false guard and for an instantaneous body under a true guard.
    pub fn while_loop(&self, b: &Expr, body: &Contract, at: Option<String>) -> Result<Contract> {
        let n = self.norm();
        let b = crate::relalg::cond::simplify(self.env, b);
        if b.is_false() {
            return Ok(self.skip());
        }
        if body.flags.productive != Tri::Yes {
            if b.is_true() && body.flags.instantaneous == Tri::Yes {
                return Ok(self.chaos());
            }
            return Err(Error::NotProductive { body: body.to_string(), at });
        }
        let test = |c: &Expr| vec![Chain::atom(Atom::fin(c.clone(), Subst::id(), TraceExpr::empty()))];
        let r = n.seq_nf(&test(&b), &n.nf(&body.post)?)?;
        let sat = n.saturate(&r, &body.pre.assuming(&b), self.wp_bound)?;
        if !sat.converged {
            return Err(Error::WpNotConverged(self.wp_bound));
        }
        let star = n.star_nf(r);
        let peri = n.seq_nf(&n.seq_nf(&star, &test(&b))?, &n.nf(&body.peri)?)?;
        let post = n.seq_nf(&star, &test(&Expr::not_s(b.clone())))?;
        Ok(self.build(sat.clauses, peri, post, Tri::No))
    }

    /// Structural fold of the calculus over a core program.
    pub fn calculate(&self, p: &Proc) -> Result<Contract> {
        match p {
            Proc::Skip => Ok(self.skip()),
            Proc::Stop => Ok(self.stop()),
            Proc::Chaos => Ok(self.chaos()),
            Proc::Miracle => Ok(self.miracle()),
            Proc::Assign(s) => self.assign(s),
            Proc::Do(e) => self.do_event(e),
            Proc::Seq(a, b) => {
                let ca = self.calculate(a)?;
                let cb = self.calculate(b)?;
                self.seq(&ca, &cb)
            }
            Proc::Ext(xs) => {
                let cs = xs.iter().map(|x| self.calculate(x)).collect::<Result<Vec<_>>>()?;
                self.ext_choice(&cs)
            }
            Proc::Int(xs) => {
                let cs = xs.iter().map(|x| self.calculate(x)).collect::<Result<Vec<_>>>()?;
                self.int_choice(&cs)
            }
            Proc::Cond(b, x, y) => {
                let cx = self.calculate(x)?;
                let cy = self.calculate(y)?;
                self.cond(b, &cx, &cy)
            }
            Proc::While { cond, body, at } => {
                let cb = self.calculate(body)?;
                self.while_loop(cond, &cb, at.map(|s| s.to_string()))
            }
        }
    }

    /// Recomputes the flags of a contract from its relations.
    pub fn classify(&self, c: &Contract) -> Result<Flags> {
        let n = self.norm();
        Ok(classify_nf(&n.nf(&c.peri)?, &n.nf(&c.post)?, Tri::No))
    }
}

fn classify_nf(peri: &Nf, post: &Nf, hint: Tri) -> Flags {
    let productive = if post.iter().all(Chain::has_nonempty_atom) {
        Tri::Yes
    } else if post.iter().any(|c| !c.has_nonempty_atom() && (c.has_opaque() || c.has_star())) {
        Tri::Unknown
    } else {
        Tri::No
    };
    let instantaneous = if peri.is_empty() && post.iter().all(Chain::is_instantaneous) {
        Tri::Yes
    } else if peri.iter().chain(post).any(|c| c.has_opaque()) {
        Tri::Unknown
    } else {
        Tri::No
    };
    Flags { productive: productive.or(hint), instantaneous }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::ValueType;

    #[test]
    fn basic_contracts_print() {
        let env = Env::new().chan("a", None);
        let k = Calculus::new(&env);
        assert_eq!(k.skip().to_string(), "⦗true_r | false | Phi(true | id | <>)⦘");
        assert_eq!(k.stop().to_string(), "⦗true_r | E(true | <> | ∅) | false⦘");
        assert_eq!(k.chaos().to_string(), "⦗¬I(true | <>) | false | false⦘");
        let d = k.do_event(&EventTerm::plain("a")).unwrap();
        assert_eq!(d.to_string(), "⦗true_r | E(true | <> | {a}) | Phi(true | id | <a>)⦘");
        assert_eq!(d.flags.productive, Tri::Yes);
        assert_eq!(k.skip().flags.productive, Tri::No);
        assert_eq!(k.skip().flags.instantaneous, Tri::Yes);
    }

    #[test]
    fn skip_is_unit() {
        let env = Env::new().chan("a", None).var("x", ValueType::int(0, 2));
        let k = Calculus::new(&env);
        let d = k.do_event(&EventTerm::plain("a")).unwrap();
        assert!(k.seq(&k.skip(), &d).unwrap().same_relations(&d));
        assert!(k.seq(&d, &k.skip()).unwrap().same_relations(&d));
    }

    #[test]
    fn event_then_chaos_precondition() {
        let env = Env::new().chan("a", None);
        let k = Calculus::new(&env);
        let d = k.do_event(&EventTerm::plain("a")).unwrap();
        let c = k.seq(&d, &k.chaos()).unwrap();
        assert_eq!(c.pre.to_string(), "¬I(true | <a>)");
    }

    #[test]
    fn stop_annihilates() {
        let env = Env::new().chan("a", None);
        let k = Calculus::new(&env);
        let d = k.do_event(&EventTerm::plain("a")).unwrap();
        assert!(k.seq(&k.stop(), &d).unwrap().same_relations(&k.stop()));
        assert!(k.seq(&k.chaos(), &d).unwrap().same_relations(&k.chaos()));
        assert!(k.seq(&k.miracle(), &d).unwrap().same_relations(&k.miracle()));
    }

    #[test]
    fn empty_choice_is_rejected() {
        let env = Env::new();
        let k = Calculus::new(&env);
        assert!(matches!(k.ext_choice(&[]), Err(Error::EmptyIndex(_))));
        assert!(matches!(k.int_choice(&[]), Err(Error::EmptyIndex(_))));
    }
}
