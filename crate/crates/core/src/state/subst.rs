use super::{Env, EvalCtx, Expr, Valuation};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// A simultaneous substitution `{x ↦ e, ...}`; variables not listed are unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subst(pub BTreeMap<String, Expr>);

impl Subst {
    pub fn id() -> Self {
        Subst::default()
    }

    pub fn single(x: impl Into<String>, e: Expr) -> Self {
        let mut m = BTreeMap::new();
        m.insert(x.into(), e);
        Subst(m).normalized()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Expr)>) -> Self {
        Subst(pairs.into_iter().collect()).normalized()
    }

    pub fn is_id(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, x: &str) -> Option<&Expr> {
        self.0.get(x)
    }

    /// Folds entries and drops trivial `x ↦ x` bindings.
    pub fn normalized(self) -> Self {
        Subst(
            self.0
                .into_iter()
                .map(|(k, e)| {
                    let e = e.fold();
                    (k, e)
                })
                .filter(|(k, e)| !matches!(e, Expr::Var(y) if y == k))
                .collect(),
        )
    }

    /// `σ † e`: replaces free state variables simultaneously.
    pub fn apply(&self, e: &Expr) -> Expr {
        if self.is_id() {
            return e.clone();
        }
        e.replace_vars(&|x| self.0.get(x).cloned()).fold()
    }

    /// `other ∘ self`: first `self`, then `other`.
    pub fn then(&self, other: &Subst) -> Subst {
        let mut m: BTreeMap<String, Expr> = self.0.clone();
        for (x, e) in &other.0 {
            m.insert(x.clone(), self.apply(e));
        }
        Subst(m).normalized()
    }

    /// Runs the substitution on a concrete state.
    pub fn run(&self, s: &Valuation) -> Valuation {
        let ctx = EvalCtx::state(s);
        let mut out = s.clone();
        for (x, e) in &self.0 {
            out.set(x.clone(), e.eval(&ctx));
        }
        out
    }

    /// Runs and saturates into the declared carriers.
    pub fn run_in(&self, env: &Env, s: &Valuation) -> Valuation {
        env.fit_state(&self.run(s))
    }

    /// Conditional merge: `c ? self : other`, entry by entry.
    pub fn ite(c: &Expr, a: &Subst, b: &Subst) -> Subst {
        let mut keys: Vec<&String> = a.0.keys().chain(b.0.keys()).collect();
        keys.sort();
        keys.dedup();
        Subst(
            keys.into_iter()
                .map(|k| {
                    let ea = a.0.get(k).cloned().unwrap_or_else(|| Expr::var(k.clone()));
                    let eb = b.0.get(k).cloned().unwrap_or_else(|| Expr::var(k.clone()));
                    (k.clone(), Expr::ite_s(c.clone(), ea, eb))
                })
                .collect(),
        )
        .normalized()
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_id() {
            return write!(f, "id");
        }
        write!(f, "{{")?;
        for (i, (k, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k} ↦ {e}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{BinOp, Value};

    #[test]
    fn composition_is_sequential() {
        let s1 = Subst::single("x", Expr::bin(BinOp::Add, Expr::var("x"), Expr::int(1)));
        let s2 = Subst::single("y", Expr::var("x"));
        let c = s1.then(&s2);
        let st = Valuation::default().with("x", Value::Int(1)).with("y", Value::Int(0));
        assert_eq!(c.run(&st), s2.run(&s1.run(&st)));
        assert_eq!(c.get("y"), Some(&Expr::bin(BinOp::Add, Expr::var("x"), Expr::int(1))));
    }

    #[test]
    fn display() {
        assert_eq!(Subst::id().to_string(), "id");
        assert_eq!(Subst::single("x", Expr::int(3)).to_string(), "{x ↦ 3}");
    }
}
