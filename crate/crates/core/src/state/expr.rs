use super::{AccSet, Event, Valuation, Value, ValueType};
use serde::{Deserialize, Serialize};
use std::cell::Cell;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Concat,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Concat => "^",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Implies => "=>",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn level(self) -> u8 {
        match self {
            BinOp::Implies => 0,
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub | BinOp::Concat => 5,
            BinOp::Mul => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.level() == 4
    }
}

/// A symbolic event `c` or `c.e`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventTerm {
    pub chan: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub data: Option<Expr>,
}

impl EventTerm {
    pub fn plain(chan: impl Into<String>) -> Self {
        EventTerm { chan: chan.into(), data: None }
    }

    pub fn with(chan: impl Into<String>, data: Expr) -> Self {
        EventTerm { chan: chan.into(), data: Some(data) }
    }

    pub fn ground(e: &Event) -> Self {
        EventTerm { chan: e.chan.clone(), data: e.data.clone().map(Expr::Lit) }
    }

    pub fn eval(&self, ctx: &EvalCtx) -> Event {
        Event { chan: self.chan.clone(), data: self.data.as_ref().map(|d| d.eval(ctx)) }
    }

    pub fn as_ground(&self) -> Option<Event> {
        match &self.data {
            None => Some(Event::plain(self.chan.clone())),
            Some(Expr::Lit(v)) => Some(Event::new(self.chan.clone(), Some(v.clone()))),
            Some(_) => None,
        }
    }

    pub fn map_expr(&self, f: &mut impl FnMut(&Expr) -> Expr) -> EventTerm {
        EventTerm { chan: self.chan.clone(), data: self.data.as_ref().map(f) }
    }
}

impl fmt::Display for EventTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.data {
            None => write!(f, "{}", self.chan),
            Some(e) => {
                write!(f, "{}.", self.chan)?;
                e.fmt_at(f, 8)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Lit(Value),
    Var(String),
    /// Post-state value `x'`, only meaningful in relation predicates.
    Primed(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    SeqLit(Vec<Expr>),
    Head(Box<Expr>),
    Tail(Box<Expr>),
    Len(Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Payloads communicated on a channel along the trace.
    Proj(String),
    TraceLen,
    Accepts(Box<EventTerm>),
    AcceptsSome,
    /// Saturating coercion into a declared type.
    Fit(ValueType, Box<Expr>),
}

/// What an expression can observe during evaluation.
#[derive(Clone, Copy)]
pub struct EvalCtx<'a> {
    pub state: &'a Valuation,
    pub post: Option<&'a Valuation>,
    pub trace: Option<&'a [Event]>,
    pub accepts: Option<&'a AccSet>,
    pub saturations: Option<&'a Cell<u64>>,
}

impl<'a> EvalCtx<'a> {
    pub fn state(state: &'a Valuation) -> Self {
        EvalCtx { state, post: None, trace: None, accepts: None, saturations: None }
    }

    pub fn with_post(mut self, post: &'a Valuation) -> Self {
        self.post = Some(post);
        self
    }

    pub fn with_trace(mut self, trace: &'a [Event]) -> Self {
        self.trace = Some(trace);
        self
    }

    pub fn with_accepts(mut self, acc: &'a AccSet) -> Self {
        self.accepts = Some(acc);
        self
    }

    pub fn counting(mut self, c: &'a Cell<u64>) -> Self {
        self.saturations = Some(c);
        self
    }
}

pub fn tt() -> Expr {
    Expr::Lit(Value::Bool(true))
}

impl Expr {
    pub fn bool(b: bool) -> Expr {
        Expr::Lit(Value::Bool(b))
    }

    pub fn int(n: i64) -> Expr {
        Expr::Lit(Value::Int(n))
    }

    pub fn var(x: impl Into<String>) -> Expr {
        Expr::Var(x.into())
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Expr) -> Expr {
        Expr::Not(Box::new(a))
    }

    pub fn and(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::And, a, b)
    }

    pub fn or(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Or, a, b)
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Eq, a, b)
    }

    pub fn ite(c: Expr, a: Expr, b: Expr) -> Expr {
        Expr::Ite(Box::new(c), Box::new(a), Box::new(b))
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Expr::Lit(Value::Bool(true)))
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Expr::Lit(Value::Bool(false)))
    }

    /// Conjunction with trivial cases folded away.
    pub fn and_s(a: Expr, b: Expr) -> Expr {
        if a.is_true() || b.is_false() {
            b
        } else if b.is_true() || a.is_false() || a == b {
            a
        } else {
            Expr::and(a, b)
        }
    }

    pub fn or_s(a: Expr, b: Expr) -> Expr {
        if a.is_false() || b.is_true() {
            b
        } else if b.is_false() || a.is_true() || a == b {
            a
        } else {
            Expr::or(a, b)
        }
    }

    pub fn not_s(a: Expr) -> Expr {
        match a {
            Expr::Lit(Value::Bool(b)) => Expr::bool(!b),
            Expr::Not(inner) => *inner,
            other => Expr::not(other),
        }
    }

    pub fn ite_s(c: Expr, a: Expr, b: Expr) -> Expr {
        if c.is_true() || a == b {
            a
        } else if c.is_false() {
            b
        } else {
            Expr::ite(c, a, b)
        }
    }

    pub fn eval(&self, ctx: &EvalCtx) -> Value {
        match self {
            Expr::Lit(v) => v.clone(),
            Expr::Var(x) => ctx.state.get(x).cloned().unwrap_or(Value::Int(0)),
            Expr::Primed(x) => ctx
                .post
                .and_then(|p| p.get(x).cloned())
                .unwrap_or(Value::Int(0)),
            Expr::Bin(op, a, b) => eval_bin(*op, a, b, ctx),
            Expr::Not(a) => Value::Bool(!a.eval(ctx).as_bool()),
            Expr::SeqLit(xs) => Value::Seq(xs.iter().map(|x| x.eval(ctx)).collect()),
            Expr::Head(a) => match a.eval(ctx) {
                Value::Seq(xs) => xs.first().cloned().unwrap_or(Value::Int(0)),
                _ => Value::Int(0),
            },
            Expr::Tail(a) => match a.eval(ctx) {
                Value::Seq(xs) if !xs.is_empty() => Value::Seq(xs[1..].to_vec()),
                _ => Value::Seq(vec![]),
            },
            Expr::Len(a) => Value::Int(a.eval(ctx).as_seq().len() as i64),
            Expr::Ite(c, a, b) => {
                if c.eval(ctx).as_bool() {
                    a.eval(ctx)
                } else {
                    b.eval(ctx)
                }
            }
            Expr::Proj(c) => Value::Seq(
                ctx.trace
                    .unwrap_or(&[])
                    .iter()
                    .filter(|e| &e.chan == c)
                    .filter_map(|e| e.data.clone())
                    .collect(),
            ),
            Expr::TraceLen => Value::Int(ctx.trace.map(|t| t.len()).unwrap_or(0) as i64),
            Expr::Accepts(ev) => {
                let e = ev.eval(ctx);
                Value::Bool(ctx.accepts.map(|a| a.contains(&e)).unwrap_or(false))
            }
            Expr::AcceptsSome => Value::Bool(ctx.accepts.map(|a| !a.is_empty()).unwrap_or(false)),
            Expr::Fit(ty, a) => {
                let v = a.eval(ctx);
                let w = ty.fit(&v);
                if let Some(c) = ctx.saturations {
                    if w != v {
                        c.set(c.get() + 1);
                    }
                }
                w
            }
        }
    }

    pub fn eval_bool(&self, ctx: &EvalCtx) -> bool {
        self.eval(ctx).as_bool()
    }

    pub fn holds_in(&self, s: &Valuation) -> bool {
        self.eval_bool(&EvalCtx::state(s))
    }

    pub fn eval_in(&self, s: &Valuation) -> Value {
        self.eval(&EvalCtx::state(s))
    }

    /// Rebuilds the expression, applying `f` to each direct child.
    pub fn map_children(&self, f: &mut impl FnMut(&Expr) -> Expr) -> Expr {
        match self {
            Expr::Lit(_)
            | Expr::Var(_)
            | Expr::Primed(_)
            | Expr::Proj(_)
            | Expr::TraceLen
            | Expr::AcceptsSome => self.clone(),
            Expr::Bin(op, a, b) => Expr::bin(*op, f(a), f(b)),
            Expr::Not(a) => Expr::not(f(a)),
            Expr::SeqLit(xs) => Expr::SeqLit(xs.iter().map(&mut *f).collect()),
            Expr::Head(a) => Expr::Head(Box::new(f(a))),
            Expr::Tail(a) => Expr::Tail(Box::new(f(a))),
            Expr::Len(a) => Expr::Len(Box::new(f(a))),
            Expr::Ite(c, a, b) => Expr::ite(f(c), f(a), f(b)),
            Expr::Accepts(ev) => Expr::Accepts(Box::new(ev.map_expr(f))),
            Expr::Fit(t, a) => Expr::Fit(t.clone(), Box::new(f(a))),
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Lit(_)
            | Expr::Var(_)
            | Expr::Primed(_)
            | Expr::Proj(_)
            | Expr::TraceLen
            | Expr::AcceptsSome => vec![],
            Expr::Bin(_, a, b) => vec![a, b],
            Expr::Not(a) | Expr::Head(a) | Expr::Tail(a) | Expr::Len(a) | Expr::Fit(_, a) => {
                vec![a]
            }
            Expr::SeqLit(xs) => xs.iter().collect(),
            Expr::Ite(c, a, b) => vec![c, a, b],
            Expr::Accepts(ev) => ev.data.iter().collect(),
        }
    }

    pub fn any(&self, p: &impl Fn(&Expr) -> bool) -> bool {
        p(self) || self.children().into_iter().any(|c| c.any(p))
    }

    /// Replaces unprimed variables via `f`; other leaves are untouched.
    pub fn replace_vars(&self, f: &impl Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Var(x) => f(x).unwrap_or_else(|| self.clone()),
            _ => self.map_children(&mut |c| c.replace_vars(f)),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        if let Expr::Var(x) = self {
            out.insert(x.clone());
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    pub fn mentions_trace(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Proj(_) | Expr::TraceLen))
    }

    pub fn mentions_accepts(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Accepts(_) | Expr::AcceptsSome))
    }

    pub fn mentions_primed(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Primed(_)))
    }

    pub fn is_closed(&self) -> bool {
        !self.any(&|e| {
            matches!(
                e,
                Expr::Var(_)
                    | Expr::Primed(_)
                    | Expr::Proj(_)
                    | Expr::TraceLen
                    | Expr::Accepts(_)
                    | Expr::AcceptsSome
            )
        })
    }

    /// True when every acceptance observation occurs under an even number of
    /// negations, so the predicate is upward closed in the acceptance set.
    pub fn accepts_positive(&self) -> bool {
        self.polarity_ok(true)
    }

    fn polarity_ok(&self, positive: bool) -> bool {
        match self {
            Expr::Accepts(_) | Expr::AcceptsSome => positive,
            Expr::Not(a) => a.polarity_ok(!positive),
            Expr::Bin(BinOp::And | BinOp::Or, a, b) => {
                a.polarity_ok(positive) && b.polarity_ok(positive)
            }
            Expr::Bin(BinOp::Implies, a, b) => a.polarity_ok(!positive) && b.polarity_ok(positive),
            Expr::Ite(c, a, b) => {
                !c.mentions_accepts() && a.polarity_ok(positive) && b.polarity_ok(positive)
            }
            other => !other.mentions_accepts(),
        }
    }

    /// Bottom-up constant folding and light boolean simplification.
    pub fn fold(&self) -> Expr {
        let e = self.map_children(&mut |c| c.fold());
        if e.is_closed() && !matches!(e, Expr::Lit(_)) {
            let empty = Valuation::default();
            return Expr::Lit(e.eval(&EvalCtx::state(&empty)));
        }
        match e {
            Expr::Bin(BinOp::And, a, b) => Expr::and_s(*a, *b),
            Expr::Bin(BinOp::Or, a, b) => Expr::or_s(*a, *b),
            Expr::Bin(BinOp::Implies, a, b) => {
                if a.is_false() || b.is_true() {
                    tt()
                } else if a.is_true() {
                    *b
                } else if b.is_false() {
                    Expr::not_s(*a)
                } else {
                    Expr::bin(BinOp::Implies, *a, *b)
                }
            }
            Expr::Bin(BinOp::Eq, a, b) if a == b => tt(),
            Expr::Bin(BinOp::Concat, a, b) if is_empty_seq(&a) => *b,
            Expr::Bin(BinOp::Concat, a, b) if is_empty_seq(&b) => *a,
            Expr::Not(a) => Expr::not_s(*a),
            Expr::Ite(c, a, b) => match (*c, *a, *b) {
                (c, a, b) if b.is_false() && !a.is_false() => Expr::and_s(c, a),
                (c, a, b) if a.is_false() => Expr::and_s(Expr::not_s(c), b),
                (c, a, b) if a.is_true() => Expr::or_s(c, b),
                (c, a, b) if b.is_true() => Expr::or_s(Expr::not_s(c), a),
                (c, a, b) => Expr::ite_s(c, a, b),
            },
            Expr::Fit(t, a) => match *a {
                Expr::Fit(t2, inner) if t2.within(&t) => Expr::Fit(t2, inner),
                other => Expr::Fit(t, Box::new(other)),
            },
            Expr::SeqLit(xs) if xs.iter().all(|x| matches!(x, Expr::Lit(_))) => Expr::Lit(
                Value::Seq(
                    xs.into_iter()
                        .map(|x| match x {
                            Expr::Lit(v) => v,
                            _ => unreachable!(),
                        })
                        .collect(),
                ),
            ),
            other => other,
        }
    }

    /// Prints with enough parentheses to be re-parsed at binding level `min`.
    pub fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let lvl = self.level();
        if lvl < min {
            write!(f, "(")?;
            self.fmt_inner(f)?;
            write!(f, ")")
        } else {
            self.fmt_inner(f)
        }
    }

    fn level(&self) -> u8 {
        match self {
            Expr::Bin(op, ..) => op.level(),
            Expr::Not(_) => 3,
            Expr::Ite(..) => 0,
            Expr::Len(_) => 7,
            Expr::Lit(Value::Int(n)) if *n < 0 => 7,
            Expr::Fit(_, a) => a.level(),
            _ => 8,
        }
    }

    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(Value::Seq(xs)) => {
                if xs.is_empty() {
                    return write!(f, "<>");
                }
                write!(f, "<")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    Expr::Lit(x.clone()).fmt_at(f, 5)?;
                }
                write!(f, ">")
            }
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Primed(x) => write!(f, "{x}'"),
            Expr::Bin(op, a, b) => {
                let l = op.level();
                let (lmin, rmin) = match op {
                    BinOp::Implies => (l + 1, l),
                    _ if op.is_comparison() => (l + 1, l + 1),
                    _ => (l, l + 1),
                };
                a.fmt_at(f, lmin)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_at(f, rmin)
            }
            Expr::Not(a) => {
                write!(f, "not ")?;
                a.fmt_at(f, 3)
            }
            Expr::SeqLit(xs) => {
                if xs.is_empty() {
                    return write!(f, "<>");
                }
                write!(f, "<")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    x.fmt_at(f, 5)?;
                }
                write!(f, ">")
            }
            Expr::Head(a) => write!(f, "head({a})"),
            Expr::Tail(a) => write!(f, "tail({a})"),
            Expr::Len(a) => {
                write!(f, "#")?;
                a.fmt_at(f, 7)
            }
            Expr::Ite(c, a, b) => write!(f, "if {c} then {a} else {b}"),
            Expr::Proj(c) => write!(f, "proj(tt, {c})"),
            Expr::TraceLen => write!(f, "#tt"),
            Expr::Accepts(ev) => write!(f, "accepts({ev})"),
            Expr::AcceptsSome => write!(f, "accepts_some"),
            Expr::Fit(_, a) => a.fmt_inner(f),
        }
    }
}

fn is_empty_seq(e: &Expr) -> bool {
    match e {
        Expr::Lit(Value::Seq(xs)) => xs.is_empty(),
        Expr::SeqLit(xs) => xs.is_empty(),
        _ => false,
    }
}

fn eval_bin(op: BinOp, a: &Expr, b: &Expr, ctx: &EvalCtx) -> Value {
    match op {
        BinOp::And => Value::Bool(a.eval_bool(ctx) && b.eval_bool(ctx)),
        BinOp::Or => Value::Bool(a.eval_bool(ctx) || b.eval_bool(ctx)),
        BinOp::Implies => Value::Bool(!a.eval_bool(ctx) || b.eval_bool(ctx)),
        _ => {
            let x = a.eval(ctx);
            let y = b.eval(ctx);
            match op {
                BinOp::Add => Value::Int(x.as_int().saturating_add(y.as_int())),
                BinOp::Sub => Value::Int(x.as_int().saturating_sub(y.as_int())),
                BinOp::Mul => Value::Int(x.as_int().saturating_mul(y.as_int())),
                BinOp::Concat => {
                    let mut v = x.as_seq().to_vec();
                    v.extend_from_slice(y.as_seq());
                    Value::Seq(v)
                }
                BinOp::Eq => Value::Bool(x == y),
                BinOp::Ne => Value::Bool(x != y),
                BinOp::Lt => Value::Bool(match (&x, &y) {
                    (Value::Seq(p), Value::Seq(q)) => p.len() < q.len() && q.starts_with(p),
                    _ => x.as_int() < y.as_int(),
                }),
                BinOp::Le => Value::Bool(match (&x, &y) {
                    (Value::Seq(p), Value::Seq(q)) => q.starts_with(p),
                    _ => x.as_int() <= y.as_int(),
                }),
                BinOp::Gt => Value::Bool(x.as_int() > y.as_int()),
                BinOp::Ge => Value::Bool(x.as_int() >= y.as_int()),
                BinOp::And | BinOp::Or | BinOp::Implies => unreachable!(),
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(pairs: &[(&str, Value)]) -> Valuation {
        Valuation(pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect())
    }

    #[test]
    fn prefix_order_on_sequences() {
        let s = st(&[]);
        let p = Expr::Lit(Value::Seq(vec![Value::Int(1)]));
        let q = Expr::Lit(Value::Seq(vec![Value::Int(1), Value::Int(0)]));
        assert!(Expr::bin(BinOp::Le, p.clone(), q.clone()).holds_in(&s));
        assert!(!Expr::bin(BinOp::Le, q, p).holds_in(&s));
    }

    #[test]
    fn trace_projection() {
        let s = st(&[]);
        let t = vec![
            Event::new("inp", Some(Value::Int(1))),
            Event::plain("a"),
            Event::new("inp", Some(Value::Int(0))),
        ];
        let ctx = EvalCtx::state(&s).with_trace(&t);
        assert_eq!(
            Expr::Proj("inp".into()).eval(&ctx),
            Value::Seq(vec![Value::Int(1), Value::Int(0)])
        );
        assert_eq!(Expr::TraceLen.eval(&ctx), Value::Int(3));
    }

    #[test]
    fn fold_simplifies_constants() {
        let e = Expr::bin(BinOp::Add, Expr::int(1), Expr::int(2));
        assert_eq!(e.fold(), Expr::int(3));
        let e = Expr::and(tt(), Expr::var("b"));
        assert_eq!(e.fold(), Expr::var("b"));
        let e = Expr::bin(BinOp::Concat, Expr::Lit(Value::Seq(vec![])), Expr::var("s"));
        assert_eq!(e.fold(), Expr::var("s"));
    }

    #[test]
    fn display_parenthesises_by_level() {
        let e = Expr::bin(
            BinOp::Mul,
            Expr::bin(BinOp::Add, Expr::var("x"), Expr::int(1)),
            Expr::int(2),
        );
        assert_eq!(e.to_string(), "(x + 1) * 2");
        let e = Expr::bin(BinOp::Sub, Expr::var("x"), Expr::bin(BinOp::Sub, Expr::var("y"), Expr::int(1)));
        assert_eq!(e.to_string(), "x - (y - 1)");
    }

    #[test]
    fn accepts_polarity() {
        let a = Expr::Accepts(Box::new(EventTerm::plain("a")));
        assert!(a.accepts_positive());
        assert!(!Expr::not(a.clone()).accepts_positive());
        assert!(Expr::or(Expr::var("b"), a).accepts_positive());
    }
}
