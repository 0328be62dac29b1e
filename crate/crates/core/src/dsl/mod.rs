//! Concrete syntax of reactive programs: parsing, printing, typechecking and
//! desugaring into the core forms consumed by the calculus and the oracle.

mod lexer;
mod parser;
mod print;
mod typecheck;

pub use parser::{parse_expr, parse_unchecked};
pub use typecheck::{typecheck, typecheck_expr, ExprScope};

use crate::contracts::{Contract, Flags, Tri};
use crate::error::{Error, Result};
use crate::relalg::{PreNf, RRel};
use crate::state::{Env, EventTerm, Expr, Subst};
use serde::Serialize;
use std::fmt;

/// Source position of a construct. Positions never take part in equality.
#[derive(Debug, Clone, Copy, Default, Eq, Serialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A declared type as written; unbounded forms are rejected by the typechecker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeExpr {
    Bool,
    Int(Option<(i64, i64)>),
    Seq(Box<TypeExpr>, Option<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeclKind {
    Channel,
    Variable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declaration {
    pub kind: DeclKind,
    pub name: String,
    pub ty: Option<TypeExpr>,
}

/// Values an input prefix ranges over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueSet {
    Enum(Vec<Expr>),
    Range(i64, i64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Skip,
    Stop,
    Chaos,
    Miracle,
    Assign(Vec<(String, Expr)>),
    Prefix(EventTerm, Box<Action>),
    Input { chan: String, var: String, set: Option<ValueSet>, body: Box<Action> },
    Guard(Expr, Box<Action>),
    Seq(Box<Action>, Box<Action>),
    Ext(Vec<Action>),
    Int(Vec<Action>),
    If(Expr, Box<Action>, Box<Action>),
    While { cond: Expr, body: Box<Action>, at: Span },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub decls: Vec<Declaration>,
    pub body: Action,
}

/// Core process forms after desugaring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Proc {
    Skip,
    Stop,
    Chaos,
    Miracle,
    Assign(Subst),
    Do(EventTerm),
    Seq(Box<Proc>, Box<Proc>),
    Ext(Vec<Proc>),
    Int(Vec<Proc>),
    Cond(Expr, Box<Proc>, Box<Proc>),
    While { cond: Expr, body: Box<Proc>, at: Option<Span> },
}

impl Proc {
    pub fn seq(a: Proc, b: Proc) -> Proc {
        Proc::Seq(Box::new(a), Box::new(b))
    }

    pub fn cond(b: Expr, x: Proc, y: Proc) -> Proc {
        Proc::Cond(b, Box::new(x), Box::new(y))
    }

    pub fn while_loop(b: Expr, body: Proc) -> Proc {
        Proc::While { cond: b, body: Box::new(body), at: None }
    }

    pub fn contains_while(&self) -> bool {
        match self {
            Proc::While { .. } => true,
            Proc::Seq(a, b) | Proc::Cond(_, a, b) => a.contains_while() || b.contains_while(),
            Proc::Ext(xs) | Proc::Int(xs) => xs.iter().any(Proc::contains_while),
            _ => false,
        }
    }

    /// Rewrites every expression in the process.
    pub fn map_exprs(&self, f: &impl Fn(&Expr) -> Expr) -> Proc {
        match self {
            Proc::Skip | Proc::Stop | Proc::Chaos | Proc::Miracle => self.clone(),
            Proc::Assign(s) => Proc::Assign(
                Subst(s.0.iter().map(|(k, e)| (k.clone(), f(e))).collect()).normalized(),
            ),
            Proc::Do(e) => Proc::Do(e.map_expr(&mut |x| f(x))),
            Proc::Seq(a, b) => Proc::seq(a.map_exprs(f), b.map_exprs(f)),
            Proc::Ext(xs) => Proc::Ext(xs.iter().map(|x| x.map_exprs(f)).collect()),
            Proc::Int(xs) => Proc::Int(xs.iter().map(|x| x.map_exprs(f)).collect()),
            Proc::Cond(b, x, y) => Proc::cond(f(b), x.map_exprs(f), y.map_exprs(f)),
            Proc::While { cond, body, at } => {
                Proc::While { cond: f(cond), body: Box::new(body.map_exprs(f)), at: *at }
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Proc::Seq(a, b) | Proc::Cond(_, a, b) => 1 + a.size() + b.size(),
            Proc::Ext(xs) | Proc::Int(xs) => 1 + xs.iter().map(Proc::size).sum::<usize>(),
            Proc::While { body, .. } => 1 + body.size(),
            _ => 1,
        }
    }
}

/// A typechecked program: its declarations and desugared body.
#[derive(Debug, Clone)]
pub struct TypedProgram {
    pub env: Env,
    pub proc: Proc,
    pub source: Program,
}

/// Parses and resolves names. Use [`typecheck`] for full checking.
pub fn parse(src: &str) -> Result<Program> {
    let p = parse_unchecked(src)?;
    typecheck::check_names(&p)?;
    Ok(p)
}

/// Parses and typechecks in one step.
pub fn load(src: &str) -> Result<TypedProgram> {
    typecheck(&parse(src)?)
}

/// Reads a contract written as `pre:`, `peri:` and `post:` lines.
///
/// `pre` is `true` or `false`; `peri` may observe `tt`, `accepts(e)` and
/// `accepts_some`; `post` may observe `tt` and primed variables. Missing lines
/// default to `true`. Lines starting with `#` or `//` are comments.
pub fn parse_contract_spec(env: &Env, src: &str) -> Result<Contract> {
    let mut pre = PreNf::true_r();
    let mut peri = RRel::True;
    let mut post = RRel::True;
    for (n, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("//") {
            continue;
        }
        let Some((key, body)) = line.split_once(':') else {
            return Err(Error::Syntax { line: n + 1, col: 1, expected: "`pre:`, `peri:` or `post:`".into() });
        };
        let body = body.trim();
        let e = parse_expr(body).map_err(|e| shift_line(e, n + 1))?;
        match key.trim() {
            "pre" => {
                pre = match e {
                    Expr::Lit(crate::state::Value::Bool(true)) => PreNf::true_r(),
                    Expr::Lit(crate::state::Value::Bool(false)) => PreNf::false_r(),
                    _ => return Err(Error::Invalid("a specification precondition must be `true` or `false`".into())),
                }
            }
            "peri" => {
                let e = typecheck_expr(env, &e, ExprScope::Peri)?;
                if !e.accepts_positive() {
                    return Err(Error::Invalid(
                        "acceptance observations in a pericondition must occur positively".into(),
                    ));
                }
                peri = pred(e);
            }
            "post" => post = pred(typecheck_expr(env, &e, ExprScope::Post)?),
            other => {
                return Err(Error::Syntax {
                    line: n + 1,
                    col: 1,
                    expected: format!("`pre`, `peri` or `post`, found `{other}`"),
                })
            }
        }
    }
    Ok(Contract { pre, peri, post, flags: Flags { productive: Tri::Unknown, instantaneous: Tri::Unknown } })
}

fn pred(e: Expr) -> RRel {
    let e = e.fold();
    if e.is_true() {
        RRel::True
    } else if e.is_false() {
        RRel::False
    } else {
        RRel::Pred(e)
    }
}

fn shift_line(e: Error, line: usize) -> Error {
    match e {
        Error::Syntax { col, expected, .. } => Error::Syntax { line, col, expected },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_program() {
        assert_eq!(parse("skip").unwrap().body, Action::Skip);
    }

    #[test]
    fn choice_of_identical_branches() {
        let p = parse("channel a\na -> skip [] a -> skip").unwrap();
        let branch = Action::Prefix(EventTerm::plain("a"), Box::new(Action::Skip));
        assert_eq!(p.body, Action::Ext(vec![branch.clone(), branch]));
    }

    #[test]
    fn spec_file_reads_three_components() {
        let env = Env::new().chan("a", None);
        let c = parse_contract_spec(&env, "# deadlock freedom\npre: true\nperi: accepts_some\npost: true\n").unwrap();
        assert!(c.pre.is_true());
        assert_eq!(c.peri, RRel::Pred(Expr::AcceptsSome));
        assert_eq!(c.post, RRel::True);
        assert!(parse_contract_spec(&env, "peri: not accepts(a)").is_err());
    }
}
