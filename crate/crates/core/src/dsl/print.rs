use super::{Action, DeclKind, Declaration, Program, TypeExpr, ValueSet};
use std::fmt;

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Bool => write!(f, "bool"),
            TypeExpr::Int(None) => write!(f, "int"),
            TypeExpr::Int(Some((lo, hi))) => write!(f, "int[{lo}..{hi}]"),
            TypeExpr::Seq(t, None) => write!(f, "seq {t}"),
            TypeExpr::Seq(t, Some(n)) => write!(f, "seq {t} maxlen {n}"),
        }
    }
}

impl fmt::Display for Declaration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kw = match self.kind {
            DeclKind::Channel => "channel",
            DeclKind::Variable => "var",
        };
        match &self.ty {
            Some(t) => write!(f, "{kw} {} : {t}", self.name),
            None => write!(f, "{kw} {}", self.name),
        }
    }
}

impl fmt::Display for ValueSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueSet::Range(lo, hi) => write!(f, "{lo}..{hi}"),
            ValueSet::Enum(xs) => {
                write!(f, "{{")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

impl Action {
    /// Binding level: 0 choice, 1 sequence, 2 prefix forms, 3 atoms.
    fn level(&self) -> u8 {
        match self {
            Action::Ext(_) | Action::Int(_) => 0,
            Action::Seq(..) => 1,
            Action::Prefix(..)
            | Action::Input { .. }
            | Action::Guard(..)
            | Action::If(..)
            | Action::While { .. } => 2,
            _ => 3,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.level() < min {
            write!(f, "(")?;
            self.fmt_inner(f)?;
            write!(f, ")")
        } else {
            self.fmt_inner(f)
        }
    }

    fn fmt_inner(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Skip => write!(f, "skip"),
            Action::Stop => write!(f, "stop"),
            Action::Chaos => write!(f, "chaos"),
            Action::Miracle => write!(f, "miracle"),
            Action::Assign(pairs) => {
                for (i, (x, _)) in pairs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, " := ")?;
                for (i, (_, e)) in pairs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            Action::Prefix(ev, body) => {
                write!(f, "{ev} -> ")?;
                body.fmt_at(f, 2)
            }
            Action::Input { chan, var, set, body } => {
                write!(f, "{chan}?{var}")?;
                if let Some(s) = set {
                    write!(f, ":{s}")?;
                }
                write!(f, " -> ")?;
                body.fmt_at(f, 2)
            }
            Action::Guard(g, body) => {
                g.fmt_at(f, 1)?;
                write!(f, " & ")?;
                body.fmt_at(f, 2)
            }
            Action::Seq(a, b) => {
                a.fmt_at(f, 1)?;
                write!(f, " ; ")?;
                b.fmt_at(f, 2)
            }
            Action::Ext(xs) | Action::Int(xs) => {
                let op = if matches!(self, Action::Ext(_)) { " [] " } else { " |~| " };
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{op}")?;
                    }
                    x.fmt_at(f, 1)?;
                }
                Ok(())
            }
            Action::If(c, a, b) => {
                write!(f, "if {c} then ")?;
                a.fmt_at(f, 0)?;
                write!(f, " else ")?;
                b.fmt_at(f, 2)
            }
            Action::While { cond, body, .. } => {
                write!(f, "while {cond} do ")?;
                body.fmt_at(f, 2)
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(f, "{d}")?;
        }
        write!(f, "{}", self.body)
    }
}
