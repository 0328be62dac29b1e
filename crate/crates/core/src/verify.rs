//! Refinement obligations and their discharge by bounded enumeration.

use crate::contracts::{Calculus, Contract, Flags, Tri};
use crate::dsl::{Proc, TypedProgram};
use crate::error::{Error, Result};
use crate::kleene::star_wp;
use crate::relalg::{Ground, Normalizer, PreNf, RRel};
use crate::state::{show_events, show_trace, AccSet, Env, Expr, GroundTrace, Subst, Valuation};
use crate::Bounds;
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Pre,
    Peri,
    Post,
}

/// `lhs ⊒ rhs`, read under the assumption `assume`: every observation of
/// `rhs` allowed by `assume` must be an observation of `lhs`. For
/// preconditions the direction is the usual one for assumptions: `rhs`
/// implies `lhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obligation {
    pub name: String,
    pub kind: Kind,
    pub lhs: Side,
    pub rhs: Side,
    pub assume: PreNf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Pre(PreNf),
    Rel(RRel),
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Pre(p) => write!(f, "{p}"),
            Side::Rel(r) => write!(f, "{r}"),
        }
    }
}

impl Side {
    fn rel(&self) -> RRel {
        match self {
            Side::Pre(p) => p.to_rrel(),
            Side::Rel(r) => r.clone(),
        }
    }
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} ⊒ {}", self.name, self.lhs, self.rhs)?;
        if !self.assume.is_true() {
            write!(f, " assuming {}", self.assume)?;
        }
        Ok(())
    }
}

/// A ground observation that satisfies the right-hand side but not the left.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub obligation: String,
    pub state: Valuation,
    pub trace: GroundTrace,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepts: Option<AccSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub post: Option<Valuation>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: from {} after {}", self.obligation, self.state, show_trace(&self.trace))?;
        if let Some(a) = &self.accepts {
            write!(f, " accepting {}", show_events(a))?;
        }
        if let Some(s) = &self.post {
            write!(f, " ending in {s}")?;
        }
        Ok(())
    }
}

impl Witness {
    fn order_key(&self) -> (usize, GroundTrace, Valuation) {
        (self.trace.len(), self.trace.clone(), self.state.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Verified { bounds: Bounds },
    Refuted { witness: Witness },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Verified { .. } => 0,
            Verdict::Refuted { .. } => 1,
            Verdict::Inconclusive { .. } => 2,
        }
    }

    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified { .. })
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Verified { .. } => "Verified",
            Verdict::Refuted { .. } => "Refuted",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Verified { bounds } => write!(f, "Verified (trace bound {})", bounds.trace),
            Verdict::Refuted { witness } => write!(f, "Refuted: {witness}"),
            Verdict::Inconclusive { reason } => write!(f, "Inconclusive: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discharged {
    pub obligation: String,
    pub verdict: Verdict,
}

/// Verdicts of a set of obligations and their combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub verdict: Verdict,
    pub bounds: Bounds,
    pub domain: usize,
    pub obligations: Vec<Discharged>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Report {
    pub fn from_parts(bounds: Bounds, env: &Env, obligations: Vec<Discharged>, notes: Vec<String>) -> Report {
        let verdict = combine(bounds, obligations.iter().map(|d| &d.verdict));
        Report { verdict, bounds, domain: env.valuations().len(), obligations, notes }
    }
}

fn combine<'v>(bounds: Bounds, vs: impl Iterator<Item = &'v Verdict>) -> Verdict {
    let mut inconclusive = None;
    for v in vs {
        match v {
            Verdict::Refuted { .. } => return v.clone(),
            Verdict::Inconclusive { .. } if inconclusive.is_none() => inconclusive = Some(v.clone()),
            _ => {}
        }
    }
    inconclusive.unwrap_or(Verdict::Verified { bounds })
}

/// `Q1 ⊒ P1`, `P2 ⊒ Q2 ∧ P1`, `P3 ⊒ Q3 ∧ P1` for `spec = ⦗P1|P2|P3⦘` and
/// `imp = ⦗Q1|Q2|Q3⦘`.
pub fn refine_obligations(spec: &Contract, imp: &Contract) -> Vec<Obligation> {
    vec![
        Obligation {
            name: "pre".into(),
            kind: Kind::Pre,
            lhs: Side::Pre(imp.pre.clone()),
            rhs: Side::Pre(spec.pre.clone()),
            assume: PreNf::true_r(),
        },
        Obligation {
            name: "peri".into(),
            kind: Kind::Peri,
            lhs: Side::Rel(spec.peri.clone()),
            rhs: Side::Rel(imp.peri.clone()),
            assume: spec.pre.clone(),
        },
        Obligation {
            name: "post".into(),
            kind: Kind::Post,
            lhs: Side::Rel(spec.post.clone()),
            rhs: Side::Rel(imp.post.clone()),
            assume: spec.pre.clone(),
        },
    ]
}

/// Discharges one obligation by enumerating initial states, traces up to
/// `bounds.trace` and minimal acceptance sets. Counterexamples are the
/// shortest, then least in canonical order.
pub fn check_rrel_refine(env: &Env, ob: &Obligation, bounds: Bounds) -> Verdict {
    if matches!(&ob.lhs, Side::Rel(RRel::True)) || matches!(&ob.rhs, Side::Rel(RRel::False)) {
        return Verdict::Verified { bounds };
    }
    let g = Ground::new(env);
    let found: Vec<Witness> = env
        .valuations()
        .par_iter()
        .filter_map(|s| match ob.kind {
            Kind::Pre => pre_witness(ob, s),
            Kind::Peri => peri_witness(&g, ob, s, bounds.trace),
            Kind::Post => post_witness(&g, ob, s, bounds.trace),
        })
        .collect();
    match found.into_iter().min_by_key(Witness::order_key) {
        Some(witness) => Verdict::Refuted { witness },
        None => Verdict::Verified { bounds },
    }
}

fn witness(ob: &Obligation, s: &Valuation, t: GroundTrace) -> Witness {
    Witness { obligation: ob.name.clone(), state: s.clone(), trace: t, accepts: None, post: None }
}

fn pre_witness(ob: &Obligation, s: &Valuation) -> Option<Witness> {
    let (Side::Pre(lhs), Side::Pre(rhs)) = (&ob.lhs, &ob.rhs) else {
        return None;
    };
    // clause traces are literal, so minimal violations are exact
    lhs.violations(s, usize::MAX)
        .into_iter()
        .filter(|t| rhs.holds(s, t) && ob.assume.holds(s, t))
        .min_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)))
        .map(|t| witness(ob, s, t))
}

fn peri_witness(g: &Ground, ob: &Obligation, s: &Valuation, bound: usize) -> Option<Witness> {
    let (lhs, rhs) = (ob.lhs.rel(), ob.rhs.rel());
    g.quiets(&rhs, s, bound)
        .into_iter()
        .filter(|(t, a)| ob.assume.holds(s, t) && !g.holds_peri(&lhs, s, t, a))
        .min_by(|(t1, a1), (t2, a2)| t1.len().cmp(&t2.len()).then(t1.cmp(t2)).then(a1.cmp(a2)))
        .map(|(t, a)| Witness { accepts: Some(a), ..witness(ob, s, t) })
}

fn post_witness(g: &Ground, ob: &Obligation, s: &Valuation, bound: usize) -> Option<Witness> {
    let (lhs, rhs) = (ob.lhs.rel(), ob.rhs.rel());
    g.finals(&rhs, s, bound)
        .into_iter()
        .filter(|(t, s2)| ob.assume.holds(s, t) && !g.holds_post(&lhs, s, t, s2))
        .min_by(|(t1, a1), (t2, a2)| t1.len().cmp(&t2.len()).then(t1.cmp(t2)).then(a1.cmp(a2)))
        .map(|(t, s2)| Witness { post: Some(s2), ..witness(ob, s, t) })
}

fn discharge_all(env: &Env, obs: &[Obligation], bounds: Bounds) -> Vec<Discharged> {
    obs.iter()
        .map(|ob| Discharged { obligation: ob.to_string(), verdict: check_rrel_refine(env, ob, bounds) })
        .collect()
}

/// `spec ⊑ imp`.
pub fn refine(env: &Env, spec: &Contract, imp: &Contract, bounds: Bounds) -> Report {
    let obs = refine_obligations(spec, imp);
    Report::from_parts(bounds, env, discharge_all(env, &obs, bounds), vec![])
}

/// `⦗true_r | some event is accepted | true⦘`.
pub fn deadlock_free_spec() -> Contract {
    Contract {
        pre: PreNf::true_r(),
        peri: RRel::Pred(Expr::AcceptsSome),
        post: RRel::True,
        flags: Flags { productive: Tri::Unknown, instantaneous: Tri::Unknown },
    }
}

/// Every quiescent observation accepts at least one event, checked as a
/// refinement of [`deadlock_free_spec`].
pub fn check_deadlock_free(env: &Env, c: &Contract, bounds: Bounds) -> Report {
    refine(env, &deadlock_free_spec(), c, bounds)
}

/// `⦗I1 | I2 | I3⦘`: an invariant contract for a loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub i1: PreNf,
    pub i2: RRel,
    pub i3: RRel,
}

impl Invariant {
    /// Only a pericondition invariant; the other two are `true_r`.
    pub fn peri(i2: RRel) -> Invariant {
        Invariant { i1: PreNf::true_r(), i2, i3: RRel::True }
    }

    pub fn contract(&self) -> Contract {
        Contract {
            pre: self.i1.clone(),
            peri: self.i2.clone(),
            post: self.i3.clone(),
            flags: Flags { productive: Tri::Unknown, instantaneous: Tri::Unknown },
        }
    }
}

/// The loop rule: `⦗I1|I2|I3⦘ ⊑ while b do ⦗Q1|Q2|Q3⦘` provided
/// (1) `([b];Q3)⋆ wp (b ⇒ Q1) ⊒ I1`,
/// (2) `I2 ⊒ [b];Q2` and `I2 ⊒ [b];Q3;I2`,
/// (3) `I3 ⊒ [¬b]` and `I3 ⊒ [b];Q3;I3`.
pub fn check_invariant_loop(
    env: &Env,
    b: &Expr,
    body: &Contract,
    inv: &Invariant,
    bounds: Bounds,
) -> Report {
    let test = |c: Expr| RRel::Test(c);
    let step = RRel::seq(test(b.clone()), body.post.clone());
    let mut out = Vec::new();
    let mut notes = Vec::new();
    match star_wp(env, &step, &body.pre.assuming(b), bounds.wp) {
        Ok(sat) if sat.converged => {
            let ob = Obligation {
                name: "(1) assumption".into(),
                kind: Kind::Pre,
                lhs: Side::Pre(sat.clauses),
                rhs: Side::Pre(inv.i1.clone()),
                assume: PreNf::true_r(),
            };
            out.push(Discharged { obligation: ob.to_string(), verdict: check_rrel_refine(env, &ob, bounds) });
        }
        Ok(sat) => out.push(Discharged {
            obligation: "(1) assumption".into(),
            verdict: Verdict::Inconclusive {
                reason: format!("weakest precondition of the loop did not converge in {} steps", sat.iterations),
            },
        }),
        Err(e) => out.push(Discharged {
            obligation: "(1) assumption".into(),
            verdict: Verdict::Inconclusive { reason: e.to_string() },
        }),
    }
    let rel_obs = [
        ("(2) peri established", Kind::Peri, &inv.i2, RRel::seq(test(b.clone()), body.peri.clone())),
        ("(2) peri maintained", Kind::Peri, &inv.i2, RRel::seq(step.clone(), inv.i2.clone())),
        ("(3) post established", Kind::Post, &inv.i3, test(Expr::not_s(b.clone()))),
        ("(3) post maintained", Kind::Post, &inv.i3, RRel::seq(step.clone(), inv.i3.clone())),
    ];
    for (name, kind, lhs, rhs) in rel_obs {
        let ob = Obligation {
            name: name.into(),
            kind,
            lhs: Side::Rel(lhs.clone()),
            rhs: Side::Rel(rhs),
            assume: PreNf::true_r(),
        };
        if matches!(lhs, RRel::True) {
            notes.push(format!("{name}: vacuous"));
        }
        out.push(Discharged { obligation: ob.to_string(), verdict: check_rrel_refine(env, &ob, bounds) });
    }
    Report::from_parts(bounds, env, out, notes)
}

/// `⟨σ⟩ ; ⦗P1|P2|P3⦘ = ⦗σ†P1 | σ†P2 | σ†P3⦘`.
pub fn assign_then_contract_reduction(sigma: &Subst, spec: &Contract) -> Contract {
    Contract {
        pre: spec.pre.subst(sigma),
        peri: spec.peri.subst(sigma),
        post: spec.post.subst(sigma),
        flags: spec.flags,
    }
}

/// Splits a program into an optional assignment prefix and a final loop.
pub fn split_loop(p: &Proc) -> Option<(Option<Subst>, &Expr, &Proc)> {
    match p {
        Proc::While { cond, body, .. } => Some((None, cond, body)),
        Proc::Seq(a, b) => match (&**a, &**b) {
            (Proc::Assign(s), Proc::While { cond, body, .. }) => Some((Some(s.clone()), cond, body)),
            (Proc::Skip, Proc::While { cond, body, .. }) => Some((None, cond, body)),
            _ => None,
        },
        _ => None,
    }
}

/// Loop-invariant strategy for `σ ; while b do body`: the loop rule for the
/// invariant, then `spec ⊑ σ†⦗I1|I2|I3⦘` when a specification is given.
pub fn check_program_invariant(
    p: &TypedProgram,
    inv: &Invariant,
    spec: Option<&Contract>,
    bounds: Bounds,
) -> Result<Report> {
    let env = &p.env;
    let (sigma, b, body) = split_loop(&p.proc).ok_or_else(|| {
        Error::Invalid("expected a program of the form `while b do P` or `x := e ; while b do P`".into())
    })?;
    let k = Calculus::new(env).with_wp_bound(bounds.wp);
    let body_c = k.calculate(body)?;
    let mut report = check_invariant_loop(env, b, &body_c, inv, bounds);
    let reduced = assign_then_contract_reduction(&sigma.unwrap_or_default(), &inv.contract());
    let reduced = Contract { peri: fold_rel(&reduced.peri), post: fold_rel(&reduced.post), ..reduced };
    report.notes.push(format!("assignment prefix reduces the invariant contract to {reduced}"));
    if let Some(spec) = spec {
        for mut d in discharge_all(env, &refine_obligations(spec, &reduced), bounds) {
            d.obligation = format!("assign-prefix {}", d.obligation);
            report.obligations.push(d);
        }
    }
    report.verdict = combine(bounds, report.obligations.iter().map(|d| &d.verdict));
    Ok(report)
}

fn fold_rel(r: &RRel) -> RRel {
    match r {
        RRel::Pred(e) => RRel::Pred(e.fold()),
        other => other.clone(),
    }
}

/// Normalizes a relation for obligations that need atom form.
pub fn normalized(env: &Env, r: &RRel) -> Result<RRel> {
    Normalizer::new(env).normalize(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{load, parse_contract_spec};

    fn calc(src: &str) -> (TypedProgram, Contract) {
        let p = load(src).unwrap();
        let c = Calculus::new(&p.env).calculate(&p.proc).unwrap();
        (p, c)
    }

    #[test]
    fn reflexive_obligations() {
        let (p, c) = calc(crate::corpus::CHOICE);
        let r = refine(&p.env, &c, &c, Bounds::default());
        assert!(r.verdict.is_verified(), "{:?}", r);
        assert_eq!(r.obligations.len(), 3);
    }

    #[test]
    fn chaos_is_refined_by_anything() {
        let (p, c) = calc(crate::corpus::CHOICE);
        let chaos = Calculus::new(&p.env).chaos();
        assert!(refine(&p.env, &chaos, &c, Bounds::default()).verdict.is_verified());
        assert!(refine(&p.env, &c, &chaos, Bounds::default()).verdict.is_refuted());
    }

    #[test]
    fn stop_deadlocks_at_start() {
        let (p, c) = calc(crate::corpus::STOP);
        let r = check_deadlock_free(&p.env, &c, Bounds::default());
        let Verdict::Refuted { witness } = r.verdict else { panic!("{r:?}") };
        assert!(witness.trace.is_empty());
        assert_eq!(witness.accepts, Some(AccSet::new()));
    }

    #[test]
    fn event_then_stop_deadlocks_after_event() {
        let (p, c) = calc(crate::corpus::A_STOP);
        let Verdict::Refuted { witness } = check_deadlock_free(&p.env, &c, Bounds::default()).verdict else {
            panic!()
        };
        assert_eq!(show_trace(&witness.trace), "<a>");
    }

    #[test]
    fn buffer_is_deadlock_free() {
        let (p, c) = calc(crate::corpus::BUFFER);
        let r = check_deadlock_free(&p.env, &c, Bounds::default());
        assert!(r.verdict.is_verified(), "{}", r.verdict);
    }

    #[test]
    fn buffer_order_by_invariant() {
        let p = load(crate::corpus::BUFFER).unwrap();
        let spec = parse_contract_spec(&p.env, crate::corpus::ORDER_SPEC).unwrap();
        let inv = crate::dsl::typecheck_expr(
            &p.env,
            &crate::dsl::parse_expr("outps(tt) <= bf ^ inps(tt)").unwrap(),
            crate::dsl::ExprScope::Peri,
        )
        .unwrap();
        let r = check_program_invariant(&p, &Invariant::peri(RRel::Pred(inv)), Some(&spec), Bounds::default()).unwrap();
        assert!(r.verdict.is_verified(), "{r:#?}");
        let bad = crate::dsl::typecheck_expr(
            &p.env,
            &crate::dsl::parse_expr("inps(tt) <= outps(tt)").unwrap(),
            crate::dsl::ExprScope::Peri,
        )
        .unwrap();
        let r = check_program_invariant(&p, &Invariant::peri(RRel::Pred(bad)), None, Bounds::default()).unwrap();
        let Verdict::Refuted { witness } = r.verdict else { panic!("{r:#?}") };
        assert_eq!(witness.trace.len(), 1);
    }

    #[test]
    fn reduction_by_identity_is_unchanged() {
        let (_, c) = calc(crate::corpus::EX2_LHS);
        assert_eq!(assign_then_contract_reduction(&Subst::id(), &c), c);
    }
}
