//! Star of reactive relations: saturation of `R⋆ wp P`, bounded unfolding,
//! and bounded checks of the weak Kleene algebra laws.

use crate::error::Result;
use crate::relalg::{nf_to_rrel, Chain, Ground, Normalizer, PreNf, RRel, SaturationResult};
use crate::state::{show_trace, Env, Valuation};
use serde::Serialize;

/// `R⋆ wp P` by iterating `C_{i+1} = C_i ∧ (R wp C_i)` from `C_0 = P`,
/// stopping at a subsumption fixpoint or after `bound` steps.
pub fn star_wp(env: &Env, r: &RRel, p: &PreNf, bound: usize) -> Result<SaturationResult> {
    let n = Normalizer::new(env).with_wp_bound(bound);
    let body = n.nf(r)?;
    n.saturate(&body, p, bound)
}

/// `r⁰ ∨ r¹ ∨ … ∨ rᵏ` with `r⁰ = Φ(true, id, ⟨⟩)`, normalized.
pub fn unfold_star(env: &Env, r: &RRel, k: usize) -> Result<RRel> {
    let n = Normalizer::new(env);
    let body = n.nf(r)?;
    let mut power = vec![Chain::identity()];
    let mut acc = power.clone();
    for _ in 0..k {
        power = n.seq_nf(&power, &body)?;
        acc.extend(power.iter().cloned());
    }
    Ok(nf_to_rrel(&n.canon(acc)))
}

/// Outcome of one law instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LawCheck {
    pub law: String,
    pub holds: bool,
    /// True when the law is an implication whose premise failed.
    pub vacuous: bool,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KaReport {
    pub checks: Vec<LawCheck>,
}

impl KaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LawCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

fn plus(a: &RRel, b: &RRel) -> RRel {
    RRel::Or(vec![a.clone(), b.clone()])
}

fn dot(a: &RRel, b: &RRel) -> RRel {
    RRel::seq(a.clone(), b.clone())
}

fn star(a: &RRel) -> RRel {
    RRel::star(a.clone())
}

/// Bounded-unfold comparison of post relations: finals with traces up to
/// `depth` from every initial state.
struct Cmp<'a> {
    env: &'a Env,
    g: Ground<'a>,
    n: Normalizer<'a>,
    depth: usize,
}

impl<'a> Cmp<'a> {
    /// First state at which `lhs ⊆ rhs` fails (as finals), with a sample.
    fn leq_witness(&self, lhs: &RRel, rhs: &RRel) -> Option<String> {
        for s in self.env.valuations() {
            let a = self.g.finals(lhs, s, self.depth);
            let b = self.g.finals(rhs, s, self.depth);
            if let Some((t, s2)) = a.iter().find(|o| !b.contains(o)) {
                return Some(describe(s, &t[..], s2));
            }
        }
        None
    }

    fn eq_witness(&self, lhs: &RRel, rhs: &RRel) -> Option<String> {
        self.leq_witness(lhs, rhs).or_else(|| self.leq_witness(rhs, lhs))
    }

    /// Also checks that normalization preserves both sides.
    fn equation(&self, law: &str, lhs: RRel, rhs: RRel) -> LawCheck {
        let mut witness = self.eq_witness(&lhs, &rhs);
        for side in [&lhs, &rhs] {
            if witness.is_some() {
                break;
            }
            witness = match self.n.normalize(side) {
                Ok(nf) => self.eq_witness(side, &nf).map(|w| format!("normal form of {side}: {w}")),
                Err(e) => Some(format!("normalizing {side}: {e}")),
            };
        }
        LawCheck { law: law.into(), holds: witness.is_none(), vacuous: false, witness }
    }

    fn inequation(&self, law: &str, lhs: RRel, rhs: RRel) -> LawCheck {
        let witness = self.leq_witness(&lhs, &rhs);
        LawCheck { law: law.into(), holds: witness.is_none(), vacuous: false, witness }
    }

    fn implication(&self, law: &str, premise: (RRel, RRel), concl: (RRel, RRel)) -> LawCheck {
        if self.leq_witness(&premise.0, &premise.1).is_some() {
            return LawCheck { law: law.into(), holds: true, vacuous: true, witness: None };
        }
        let witness = self.leq_witness(&concl.0, &concl.1);
        LawCheck { law: law.into(), holds: witness.is_none(), vacuous: false, witness }
    }
}

fn describe(s: &Valuation, t: &[crate::state::Event], s2: &Valuation) -> String {
    format!("from {s}: ({}, {s2}) on one side only", show_trace(t))
}

/// Checks the star identities and the weak Kleene algebra axioms on `x`, `y`,
/// `z`, `w` by comparing terminating observations up to trace length `depth`.
///
/// The induction axioms are checked twice: once with `y` as given (often
/// vacuous) and once with a `y` built to satisfy the premise.
pub fn ka_laws_check(env: &Env, x: &RRel, y: &RRel, z: &RRel, w: &RRel, depth: usize) -> KaReport {
    let c = Cmp { env, g: Ground::new(env), n: Normalizer::new(env), depth };
    let one = RRel::identity();
    let zero = RRel::False;
    let xs = star(x);
    let mut checks = vec![
        // identities
        c.equation("star-star", star(&xs), xs.clone()),
        c.equation("star-unfold", xs.clone(), plus(&one, &dot(x, &xs))),
        c.equation("star-denest", star(&plus(x, y)), star(&dot(&xs, &star(y)))),
        c.equation("star-slide", dot(x, &xs), dot(&xs, x)),
        // weak dioid
        c.equation("plus-assoc", plus(&plus(x, y), z), plus(x, &plus(y, z))),
        c.equation("plus-comm", plus(x, y), plus(y, x)),
        c.equation("plus-idem", plus(x, x), x.clone()),
        c.equation("plus-zero", plus(x, &zero), x.clone()),
        c.equation("dot-assoc", dot(&dot(x, y), z), dot(x, &dot(y, z))),
        c.equation("dot-unit-left", dot(&one, x), x.clone()),
        c.equation("dot-unit-right", dot(x, &one), x.clone()),
        c.equation("dist-left", dot(x, &plus(y, z)), plus(&dot(x, y), &dot(x, z))),
        c.equation("dist-right", dot(&plus(x, y), z), plus(&dot(x, z), &dot(y, z))),
        c.equation("zero-left", dot(&zero, x), zero.clone()),
        // star axioms
        c.inequation("star-unfold-leq", plus(&one, &dot(x, &xs)), xs.clone()),
    ];
    let ind_l = |y: &RRel| ((plus(z, &dot(x, y)), y.clone()), (dot(&xs, z), y.clone()));
    let ind_r = |y: &RRel| ((plus(z, &dot(y, x)), y.clone()), (dot(z, &xs), y.clone()));
    let yl = dot(&xs, &plus(z, w));
    let yr = dot(&plus(z, w), &xs);
    for (name, (p, q)) in [
        ("star-induct-left", ind_l(y)),
        ("star-induct-left-fixed", ind_l(&yl)),
        ("star-induct-right", ind_r(y)),
        ("star-induct-right-fixed", ind_r(&yr)),
    ] {
        checks.push(c.implication(name, p, q));
    }
    KaReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relalg::{Atom, Clause, TraceExpr};
    use crate::state::{EventTerm, Expr, Subst, ValueType};

    fn step(ev: &str) -> RRel {
        RRel::Atom(Atom::fin(Expr::bool(true), Subst::id(), TraceExpr::one(EventTerm::plain(ev))))
    }

    #[test]
    fn star_wp_of_true_is_immediate() {
        let env = Env::new().chan("a", None);
        let r = star_wp(&env, &step("a"), &PreNf::true_r(), 16).unwrap();
        assert!(r.clauses.is_true());
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn star_wp_absorbs_longer_clauses() {
        let env = Env::new().chan("a", None);
        let aa = TraceExpr(vec![EventTerm::plain("a"), EventTerm::plain("a")]);
        let p = PreNf(vec![Clause::new(Expr::bool(true), aa)]);
        let r = star_wp(&env, &step("a"), &p, 16).unwrap();
        assert!(r.converged);
        assert_eq!(r.clauses, p);
    }

    #[test]
    fn unfold_powers() {
        let env = Env::new().chan("a", None);
        let u = unfold_star(&env, &step("a"), 2).unwrap();
        assert_eq!(u.disjuncts().len(), 3);
        assert_eq!(unfold_star(&env, &RRel::False, 3).unwrap(), RRel::identity());
    }

    #[test]
    fn laws_hold_for_single_step() {
        let env = Env::new().chan("a", None).chan("b", None).var("x", ValueType::int(0, 1));
        let inc = RRel::Atom(Atom::fin(
            Expr::bool(true),
            Subst::single("x", Expr::Fit(ValueType::int(0, 1), Box::new(Expr::bin(crate::state::BinOp::Add, Expr::var("x"), Expr::int(1))))),
            TraceExpr::empty(),
        ));
        let rep = ka_laws_check(&env, &step("a"), &inc, &step("b"), &RRel::False, 4);
        assert!(rep.passed(), "{:?}", rep.failures().collect::<Vec<_>>());
        let rep = ka_laws_check(&env, &RRel::False, &RRel::False, &RRel::False, &RRel::False, 4);
        assert!(rep.passed());
    }
}
