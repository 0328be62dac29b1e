use super::{Action, DeclKind, Program, Proc, TypeExpr, TypedProgram, ValueSet};
use crate::error::{Error, Result};
use crate::state::{BinOp, Env, EvalCtx, EventTerm, Expr, Subst, Valuation, Value, ValueType};
use std::collections::{BTreeMap, BTreeSet};

/// Which observations an expression may mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExprScope {
    /// Program expressions: current state only.
    State,
    /// State and trace contribution (`tt`).
    Trace,
    /// Pericondition: state, trace and acceptances.
    Peri,
    /// Postcondition: state, trace and primed final state.
    Post,
}

/// Inferred type. Integers carry an interval, sequences a length bound and an
/// element type that is unknown for `<>`.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Ty {
    Bool,
    Int(i64, i64),
    Seq(Option<Box<Ty>>, usize),
}

impl Ty {
    fn of_type(t: &ValueType) -> Ty {
        match t {
            ValueType::Bool => Ty::Bool,
            ValueType::Int { lo, hi } => Ty::Int(*lo, *hi),
            ValueType::Seq { elem, max_len } => Ty::Seq(Some(Box::new(Ty::of_type(elem))), *max_len),
        }
    }

    fn of_value(v: &Value) -> Ty {
        match v {
            Value::Bool(_) => Ty::Bool,
            Value::Int(n) => Ty::Int(*n, *n),
            Value::Seq(xs) => {
                let elem = xs.iter().map(Ty::of_value).reduce(|a, b| a.join(&b).unwrap_or(a));
                Ty::Seq(elem.map(Box::new), xs.len())
            }
        }
    }

    fn join(&self, other: &Ty) -> Option<Ty> {
        match (self, other) {
            (Ty::Bool, Ty::Bool) => Some(Ty::Bool),
            (Ty::Int(a, b), Ty::Int(c, d)) => Some(Ty::Int(*a.min(c), *b.max(d))),
            (Ty::Seq(e1, m1), Ty::Seq(e2, m2)) => {
                let elem = match (e1, e2) {
                    (None, e) | (e, None) => e.clone(),
                    (Some(a), Some(b)) => Some(Box::new(a.join(b)?)),
                };
                Some(Ty::Seq(elem, *m1.max(m2)))
            }
            _ => None,
        }
    }

    fn within(&self, t: &ValueType) -> bool {
        match (self, t) {
            (Ty::Bool, ValueType::Bool) => true,
            (Ty::Int(a, b), ValueType::Int { lo, hi }) => a >= lo && b <= hi,
            (Ty::Seq(e, m), ValueType::Seq { elem, max_len }) => {
                m <= max_len && e.as_ref().map(|e| e.within(elem)).unwrap_or(true)
            }
            _ => false,
        }
    }

    fn compatible(&self, t: &ValueType) -> bool {
        match (self, t) {
            (Ty::Bool, ValueType::Bool) | (Ty::Int(..), ValueType::Int { .. }) => true,
            (Ty::Seq(e, _), ValueType::Seq { elem, .. }) => {
                e.as_ref().map(|e| e.compatible(elem)).unwrap_or(true)
            }
            _ => false,
        }
    }

    fn describe(&self) -> String {
        match self {
            Ty::Bool => "bool".into(),
            Ty::Int(a, b) => format!("int[{a}..{b}]"),
            Ty::Seq(None, _) => "seq".into(),
            Ty::Seq(Some(e), _) => format!("seq {}", e.describe()),
        }
    }
}

fn mismatch(e: &Expr, expected: impl Into<String>, found: &Ty) -> Error {
    Error::TypeMismatch { expr: e.to_string(), expected: expected.into(), found: found.describe() }
}

fn value_type(name: &str, t: &TypeExpr) -> Result<ValueType> {
    match t {
        TypeExpr::Bool => Ok(ValueType::Bool),
        TypeExpr::Int(None) => Err(Error::InfiniteDomain(format!("`{name}` has type int without a range"))),
        TypeExpr::Int(Some((lo, hi))) => {
            if lo > hi {
                Err(Error::Invalid(format!("`{name}` has an empty range {lo}..{hi}")))
            } else {
                Ok(ValueType::int(*lo, *hi))
            }
        }
        TypeExpr::Seq(_, None) => {
            Err(Error::InfiniteDomain(format!("`{name}` has a sequence type without maxlen")))
        }
        TypeExpr::Seq(elem, Some(n)) => Ok(ValueType::seq(value_type(name, elem)?, *n)),
    }
}

fn build_env(p: &Program) -> Result<Env> {
    let mut env = Env::new();
    let mut seen = BTreeSet::new();
    for d in &p.decls {
        if !seen.insert(d.name.clone()) {
            return Err(Error::DuplicateName(d.name.clone()));
        }
        match d.kind {
            DeclKind::Channel => {
                let ty = d.ty.as_ref().map(|t| value_type(&d.name, t)).transpose()?;
                env.add_chan(d.name.clone(), ty);
            }
            DeclKind::Variable => {
                let t = d.ty.as_ref().ok_or_else(|| Error::InfiniteDomain(d.name.clone()))?;
                env.add_var(d.name.clone(), value_type(&d.name, t)?);
            }
        }
    }
    Ok(env)
}

/// Checks declarations for duplicates and every name use against them.
pub(crate) fn check_names(p: &Program) -> Result<()> {
    let mut chans = BTreeSet::new();
    let mut vars = BTreeSet::new();
    for d in &p.decls {
        if chans.contains(&d.name) || vars.contains(&d.name) {
            return Err(Error::DuplicateName(d.name.clone()));
        }
        match d.kind {
            DeclKind::Channel => chans.insert(d.name.clone()),
            DeclKind::Variable => vars.insert(d.name.clone()),
        };
    }
    let mut bound = Vec::new();
    names_in_action(&p.body, &chans, &vars, &mut bound)
}

fn names_in_expr(e: &Expr, chans: &BTreeSet<String>, vars: &BTreeSet<String>, bound: &[String]) -> Result<()> {
    match e {
        Expr::Var(x) | Expr::Primed(x) => {
            if vars.contains(x) || bound.contains(x) {
                Ok(())
            } else {
                Err(Error::UnboundName(x.clone()))
            }
        }
        Expr::Accepts(ev) => names_in_event(ev, chans, vars, bound),
        other => other.children().into_iter().try_for_each(|c| names_in_expr(c, chans, vars, bound)),
    }
}

fn names_in_event(ev: &EventTerm, chans: &BTreeSet<String>, vars: &BTreeSet<String>, bound: &[String]) -> Result<()> {
    if !chans.contains(&ev.chan) {
        return Err(Error::UnboundName(ev.chan.clone()));
    }
    ev.data.as_ref().map_or(Ok(()), |d| names_in_expr(d, chans, vars, bound))
}

fn names_in_action(
    a: &Action,
    chans: &BTreeSet<String>,
    vars: &BTreeSet<String>,
    bound: &mut Vec<String>,
) -> Result<()> {
    match a {
        Action::Skip | Action::Stop | Action::Chaos | Action::Miracle => Ok(()),
        Action::Assign(pairs) => {
            let mut targets = BTreeSet::new();
            for (x, e) in pairs {
                if !vars.contains(x) {
                    return Err(Error::UnboundName(x.clone()));
                }
                if !targets.insert(x) {
                    return Err(Error::DuplicateName(x.clone()));
                }
                names_in_expr(e, chans, vars, bound)?;
            }
            Ok(())
        }
        Action::Prefix(ev, body) => {
            names_in_event(ev, chans, vars, bound)?;
            names_in_action(body, chans, vars, bound)
        }
        Action::Input { chan, var, set, body } => {
            if !chans.contains(chan) {
                return Err(Error::UnboundName(chan.clone()));
            }
            if vars.contains(var) || chans.contains(var) || bound.contains(var) {
                return Err(Error::DuplicateName(var.clone()));
            }
            if let Some(ValueSet::Enum(xs)) = set {
                for x in xs {
                    names_in_expr(x, chans, vars, bound)?;
                }
            }
            bound.push(var.clone());
            let r = names_in_action(body, chans, vars, bound);
            bound.pop();
            r
        }
        Action::Guard(g, body) => {
            names_in_expr(g, chans, vars, bound)?;
            names_in_action(body, chans, vars, bound)
        }
        Action::Seq(x, y) => {
            names_in_action(x, chans, vars, bound)?;
            names_in_action(y, chans, vars, bound)
        }
        Action::Ext(xs) | Action::Int(xs) => {
            xs.iter().try_for_each(|x| names_in_action(x, chans, vars, bound))
        }
        Action::If(c, x, y) => {
            names_in_expr(c, chans, vars, bound)?;
            names_in_action(x, chans, vars, bound)?;
            names_in_action(y, chans, vars, bound)
        }
        Action::While { cond, body, .. } => {
            names_in_expr(cond, chans, vars, bound)?;
            names_in_action(body, chans, vars, bound)
        }
    }
}

struct Checker<'a> {
    env: &'a Env,
    scope: ExprScope,
    locals: BTreeMap<String, ValueType>,
}

impl<'a> Checker<'a> {
    fn var_type(&self, x: &str) -> Result<&ValueType> {
        self.locals
            .get(x)
            .or_else(|| self.env.var_type(x))
            .ok_or_else(|| Error::UnboundName(x.to_string()))
    }

    fn resolve_proj(&self, name: &str) -> Result<String> {
        let candidates = [
            Some(name),
            name.strip_suffix('s'),
            name.strip_suffix("ps"),
        ];
        candidates
            .into_iter()
            .flatten()
            .find(|c| self.env.chan_type(c).is_some())
            .map(str::to_string)
            .ok_or_else(|| Error::UnboundName(name.to_string()))
    }

    fn needs(&self, e: &Expr, ok: bool, what: &str) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("`{e}` observes {what}, which is not available here")))
        }
    }

    fn infer(&self, e: &Expr) -> Result<(Expr, Ty)> {
        use ExprScope::*;
        match e {
            Expr::Lit(v) => Ok((e.clone(), Ty::of_value(v))),
            Expr::Var(x) => Ok((e.clone(), Ty::of_type(self.var_type(x)?))),
            Expr::Primed(x) => {
                self.needs(e, self.scope == Post, "the final state")?;
                let t = self.env.var_type(x).ok_or_else(|| Error::UnboundName(x.clone()))?;
                Ok((e.clone(), Ty::of_type(t)))
            }
            Expr::Proj(c) => {
                self.needs(e, self.scope != State, "the trace")?;
                let c = self.resolve_proj(c)?;
                let elem = self.env.chan_type(&c).cloned().flatten().map(|t| Box::new(Ty::of_type(&t)));
                Ok((Expr::Proj(c), Ty::Seq(elem, usize::MAX)))
            }
            Expr::TraceLen => {
                self.needs(e, self.scope != State, "the trace")?;
                Ok((Expr::TraceLen, Ty::Int(0, i64::MAX)))
            }
            Expr::Accepts(ev) => {
                self.needs(e, self.scope == Peri, "acceptances")?;
                Ok((Expr::Accepts(Box::new(self.event(ev)?)), Ty::Bool))
            }
            Expr::AcceptsSome => {
                self.needs(e, self.scope == Peri, "acceptances")?;
                Ok((Expr::AcceptsSome, Ty::Bool))
            }
            Expr::Not(a) => {
                let a = self.expect_bool(a)?;
                Ok((Expr::not(a), Ty::Bool))
            }
            Expr::Bin(op, a, b) => self.infer_bin(e, *op, a, b),
            Expr::SeqLit(xs) => {
                let mut out = Vec::new();
                let mut elem: Option<Ty> = None;
                for x in xs {
                    let (x2, t) = self.infer(x)?;
                    elem = Some(match elem {
                        None => t,
                        Some(prev) => prev.join(&t).ok_or_else(|| mismatch(x, prev.describe(), &t))?,
                    });
                    out.push(x2);
                }
                Ok((Expr::SeqLit(out), Ty::Seq(elem.map(Box::new), xs.len())))
            }
            Expr::Head(a) => {
                let (a2, t) = self.infer(a)?;
                match t {
                    Ty::Seq(elem, _) => {
                        let et = elem.map(|b| *b).unwrap_or(Ty::Int(0, 0));
                        // head of an empty sequence is the integer default
                        let et = match et {
                            Ty::Int(lo, hi) => Ty::Int(lo.min(0), hi.max(0)),
                            other => other,
                        };
                        Ok((Expr::Head(Box::new(a2)), et))
                    }
                    other => Err(mismatch(a, "a sequence", &other)),
                }
            }
            Expr::Tail(a) => {
                let (a2, t) = self.infer(a)?;
                match t {
                    Ty::Seq(..) => Ok((Expr::Tail(Box::new(a2)), t)),
                    other => Err(mismatch(a, "a sequence", &other)),
                }
            }
            Expr::Len(a) => {
                let (a2, t) = self.infer(a)?;
                match t {
                    Ty::Seq(_, m) => Ok((Expr::Len(Box::new(a2)), Ty::Int(0, m.min(i64::MAX as usize) as i64))),
                    other => Err(mismatch(a, "a sequence", &other)),
                }
            }
            Expr::Ite(c, a, b) => {
                let c2 = self.expect_bool(c)?;
                let (a2, ta) = self.infer(a)?;
                let (b2, tb) = self.infer(b)?;
                let t = ta.join(&tb).ok_or_else(|| mismatch(b, ta.describe(), &tb))?;
                Ok((Expr::ite(c2, a2, b2), t))
            }
            Expr::Fit(t, a) => {
                let (a2, ta) = self.infer(a)?;
                if !ta.compatible(t) {
                    return Err(mismatch(a, t.to_string(), &ta));
                }
                Ok((Expr::Fit(t.clone(), Box::new(a2)), Ty::of_type(t)))
            }
        }
    }

    fn infer_bin(&self, e: &Expr, op: BinOp, a: &Expr, b: &Expr) -> Result<(Expr, Ty)> {
        match op {
            BinOp::And | BinOp::Or | BinOp::Implies => {
                let a2 = self.expect_bool(a)?;
                let b2 = self.expect_bool(b)?;
                return Ok((Expr::bin(op, a2, b2), Ty::Bool));
            }
            _ => {}
        }
        let (a2, ta) = self.infer(a)?;
        let (b2, tb) = self.infer(b)?;
        let out = Expr::bin(op, a2, b2);
        let t = match (op, &ta, &tb) {
            (BinOp::Add, Ty::Int(a0, a1), Ty::Int(b0, b1)) => Ty::Int(a0.saturating_add(*b0), a1.saturating_add(*b1)),
            (BinOp::Sub, Ty::Int(a0, a1), Ty::Int(b0, b1)) => Ty::Int(a0.saturating_sub(*b1), a1.saturating_sub(*b0)),
            (BinOp::Mul, Ty::Int(a0, a1), Ty::Int(b0, b1)) => {
                let ps = [a0.saturating_mul(*b0), a0.saturating_mul(*b1), a1.saturating_mul(*b0), a1.saturating_mul(*b1)];
                Ty::Int(*ps.iter().min().unwrap(), *ps.iter().max().unwrap())
            }
            (BinOp::Concat, Ty::Seq(..), Ty::Seq(..)) => match (ta.join(&tb), &ta, &tb) {
                (Some(Ty::Seq(elem, _)), Ty::Seq(_, m1), Ty::Seq(_, m2)) => Ty::Seq(elem, m1.saturating_add(*m2)),
                _ => return Err(mismatch(e, ta.describe(), &tb)),
            },
            (BinOp::Eq | BinOp::Ne, _, _) => {
                ta.join(&tb).ok_or_else(|| mismatch(e, ta.describe(), &tb))?;
                Ty::Bool
            }
            (BinOp::Lt | BinOp::Le, Ty::Int(..), Ty::Int(..)) => Ty::Bool,
            (BinOp::Lt | BinOp::Le, Ty::Seq(..), Ty::Seq(..)) => {
                ta.join(&tb).ok_or_else(|| mismatch(e, ta.describe(), &tb))?;
                Ty::Bool
            }
            (BinOp::Gt | BinOp::Ge, Ty::Int(..), Ty::Int(..)) => Ty::Bool,
            (BinOp::Concat, _, _) => {
                let bad = if matches!(ta, Ty::Seq(..)) { &tb } else { &ta };
                return Err(mismatch(e, "a sequence", bad));
            }
            (BinOp::Lt | BinOp::Le, Ty::Seq(..), _) => return Err(mismatch(b, "a sequence", &tb)),
            _ => {
                let bad = if matches!(ta, Ty::Int(..)) { &tb } else { &ta };
                return Err(mismatch(e, "int", bad));
            }
        };
        Ok((out, t))
    }

    fn expect_bool(&self, e: &Expr) -> Result<Expr> {
        let (e2, t) = self.infer(e)?;
        if t != Ty::Bool {
            return Err(mismatch(e, "bool", &t));
        }
        Ok(e2)
    }

    /// Typechecks `e` against a declared type, inserting a saturating coercion
    /// when the inferred range may fall outside the carrier.
    fn fit_to(&self, e: &Expr, target: &ValueType) -> Result<Expr> {
        let (e2, t) = self.infer(e)?;
        if !t.compatible(target) {
            return Err(mismatch(e, target.to_string(), &t));
        }
        if t.within(target) {
            Ok(e2)
        } else {
            Ok(Expr::Fit(target.clone(), Box::new(e2)))
        }
    }

    fn event(&self, ev: &EventTerm) -> Result<EventTerm> {
        let ty = self.env.chan_type(&ev.chan).ok_or_else(|| Error::UnboundName(ev.chan.clone()))?;
        match (ty, &ev.data) {
            (None, None) => Ok(ev.clone()),
            (Some(t), Some(d)) => Ok(EventTerm::with(ev.chan.clone(), self.fit_to(d, t)?)),
            (None, Some(d)) => {
                let (_, t) = self.infer(d)?;
                Err(mismatch(d, format!("no payload on `{}`", ev.chan), &t))
            }
            (Some(t), None) => Err(Error::TypeMismatch {
                expr: ev.to_string(),
                expected: format!("a payload of type {t}"),
                found: "no payload".into(),
            }),
        }
    }

    fn action(&mut self, a: &Action) -> Result<Proc> {
        match a {
            Action::Skip => Ok(Proc::Skip),
            Action::Stop => Ok(Proc::Stop),
            Action::Chaos => Ok(Proc::Chaos),
            Action::Miracle => Ok(Proc::Miracle),
            Action::Assign(pairs) => {
                let mut seen = BTreeSet::new();
                let mut out = Vec::new();
                for (x, e) in pairs {
                    if !seen.insert(x.clone()) {
                        return Err(Error::DuplicateName(x.clone()));
                    }
                    if self.locals.contains_key(x) {
                        return Err(Error::Invalid(format!("cannot assign to input variable `{x}`")));
                    }
                    let t = self.env.var_type(x).ok_or_else(|| Error::UnboundName(x.clone()))?;
                    out.push((x.clone(), self.fit_to(e, t)?));
                }
                Ok(Proc::Assign(Subst::from_pairs(out)))
            }
            Action::Prefix(ev, body) => {
                let ev = self.event(ev)?;
                Ok(match self.action(body)? {
                    Proc::Skip => Proc::Do(ev),
                    p => Proc::seq(Proc::Do(ev), p),
                })
            }
            Action::Input { chan, var, set, body } => self.input(chan, var, set.as_ref(), body),
            Action::Guard(g, body) => {
                let g = self.expect_bool(g)?;
                Ok(Proc::cond(g, self.action(body)?, Proc::Stop))
            }
            Action::Seq(x, y) => Ok(Proc::seq(self.action(x)?, self.action(y)?)),
            Action::Ext(xs) => Ok(Proc::Ext(xs.iter().map(|x| self.action(x)).collect::<Result<_>>()?)),
            Action::Int(xs) => Ok(Proc::Int(xs.iter().map(|x| self.action(x)).collect::<Result<_>>()?)),
            Action::If(c, x, y) => {
                let c = self.expect_bool(c)?;
                Ok(Proc::cond(c, self.action(x)?, self.action(y)?))
            }
            Action::While { cond, body, at } => {
                let cond = self.expect_bool(cond)?;
                Ok(Proc::While { cond, body: Box::new(self.action(body)?), at: Some(*at) })
            }
        }
    }

    fn input(&mut self, chan: &str, var: &str, set: Option<&ValueSet>, body: &Action) -> Result<Proc> {
        let ty = match self.env.chan_type(chan) {
            None => return Err(Error::UnboundName(chan.to_string())),
            Some(None) => {
                return Err(Error::TypeMismatch {
                    expr: format!("{chan}?{var}"),
                    expected: "a channel with a payload".into(),
                    found: "no payload".into(),
                })
            }
            Some(Some(t)) => t.clone(),
        };
        if self.env.var_type(var).is_some() || self.env.chan_type(var).is_some() || self.locals.contains_key(var) {
            return Err(Error::DuplicateName(var.to_string()));
        }
        let values: Vec<Value> = match set {
            None => ty.carrier(),
            Some(ValueSet::Range(lo, hi)) => (*lo..=*hi).map(Value::Int).collect(),
            Some(ValueSet::Enum(xs)) => {
                let empty = Valuation::default();
                let mut out = Vec::new();
                for x in xs {
                    let (x2, _) = self.infer(x)?;
                    let x2 = x2.fold();
                    if !x2.is_closed() {
                        return Err(Error::Invalid(format!("input value `{x}` is not a constant")));
                    }
                    out.push(x2.eval(&EvalCtx::state(&empty)));
                }
                out
            }
        };
        for v in &values {
            if !ty.contains(v) {
                return Err(Error::TypeMismatch {
                    expr: format!("{chan}?{var}:{v}"),
                    expected: ty.to_string(),
                    found: v.to_string(),
                });
            }
        }
        let values: Vec<Value> = values.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if values.is_empty() {
            return Err(Error::EmptyIndex(format!("input on `{chan}`")));
        }
        self.locals.insert(var.to_string(), ty);
        let cont = self.action(body);
        self.locals.remove(var);
        let cont = cont?;
        let mut branches: Vec<Proc> = values
            .into_iter()
            .map(|v| {
                let lit = Expr::Lit(v);
                let bodyv = cont.map_exprs(&|e| {
                    e.replace_vars(&|x| if x == var { Some(lit.clone()) } else { None }).fold()
                });
                let ev = Proc::Do(EventTerm::with(chan, lit.clone()));
                match bodyv {
                    Proc::Skip => ev,
                    p => Proc::seq(ev, p),
                }
            })
            .collect();
        Ok(if branches.len() == 1 { branches.pop().unwrap() } else { Proc::Ext(branches) })
    }
}

/// Typechecks a parsed program and desugars it into core forms.
pub fn typecheck(p: &Program) -> Result<TypedProgram> {
    let env = build_env(p)?;
    check_names(p)?;
    let mut ck = Checker { env: &env, scope: ExprScope::State, locals: BTreeMap::new() };
    let proc = ck.action(&p.body)?;
    Ok(TypedProgram { env, proc, source: p.clone() })
}

/// Typechecks a standalone boolean expression such as an invariant.
pub fn typecheck_expr(env: &Env, e: &Expr, scope: ExprScope) -> Result<Expr> {
    let ck = Checker { env, scope, locals: BTreeMap::new() };
    ck.expect_bool(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{load, parse, parse_expr};

    #[test]
    fn infinite_domains_rejected() {
        assert!(matches!(load("var x : int\nskip"), Err(Error::InfiniteDomain(_))));
        assert!(matches!(load("var s : seq int[0..1]\nskip"), Err(Error::InfiniteDomain(_))));
    }

    #[test]
    fn payload_kind_checked() {
        let r = load("channel inp : int[0..1]\ninp!true -> skip");
        assert!(matches!(r, Err(Error::TypeMismatch { .. })));
    }

    #[test]
    fn names_checked_at_parse() {
        assert!(matches!(parse("channel a\nvar a : bool\nskip"), Err(Error::DuplicateName(_))));
        assert!(matches!(parse("b -> skip"), Err(Error::UnboundName(_))));
        assert!(matches!(parse("var x : bool\ny := true"), Err(Error::UnboundName(_))));
        assert!(matches!(parse("var x : bool\nx, x := true, false"), Err(Error::DuplicateName(_))));
    }

    #[test]
    fn out_of_range_assignment_saturates() {
        let p = load("var x : int[0..3]\nx := x + 2").unwrap();
        match p.proc {
            Proc::Assign(s) => assert!(matches!(s.get("x"), Some(Expr::Fit(..)))),
            other => panic!("{other:?}"),
        }
        let p = load("var x : int[0..3]\nx := 1").unwrap();
        assert_eq!(p.proc, Proc::Assign(Subst::single("x", Expr::int(1))));
    }

    #[test]
    fn input_desugars_to_indexed_choice() {
        let p = load("channel c : int[0..2]\nvar x : int[0..2]\nc?v:{0, 2} -> x := v").unwrap();
        match p.proc {
            Proc::Ext(bs) => {
                assert_eq!(bs.len(), 2);
                assert_eq!(
                    bs[1],
                    Proc::seq(
                        Proc::Do(EventTerm::with("c", Expr::int(2))),
                        Proc::Assign(Subst::single("x", Expr::int(2)))
                    )
                );
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(load("channel c : int[0..1]\nc?v:{} -> skip"), Err(Error::EmptyIndex(_))));
        assert!(matches!(load("channel c : int[0..1]\nc?v:{3} -> skip"), Err(Error::TypeMismatch { .. })));
    }

    #[test]
    fn projection_shorthand_resolves() {
        let env = Env::new()
            .chan("inp", Some(ValueType::int(0, 1)))
            .chan("out", Some(ValueType::int(0, 1)))
            .var("bf", ValueType::seq(ValueType::int(0, 1), 2));
        let e = parse_expr("outps(tt) <= bf ^ inps(tt)").unwrap();
        let e = typecheck_expr(&env, &e, ExprScope::Peri).unwrap();
        assert_eq!(e.to_string(), "proj(tt, out) <= bf ^ proj(tt, inp)");
        assert!(typecheck_expr(&env, &parse_expr("#tt > 0").unwrap(), ExprScope::State).is_err());
    }
}
