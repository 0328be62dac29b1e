//! Finite-domain reasoning about state conditions.

use crate::state::{Env, EvalCtx, Expr, Valuation, Value};
use std::collections::BTreeSet;

/// Valuations of just the given variables (others absent).
pub fn valuations_over(env: &Env, vars: &BTreeSet<String>) -> Vec<Valuation> {
    let mut out = vec![Valuation::default()];
    for x in vars {
        let Some(ty) = env.var_type(x) else { continue };
        let carrier = ty.carrier();
        let mut next = Vec::with_capacity(out.len() * carrier.len());
        for s in &out {
            for v in &carrier {
                next.push(s.clone().with(x.clone(), v.clone()));
            }
        }
        out = next;
    }
    out
}

fn is_state_pred(e: &Expr) -> bool {
    !e.mentions_trace() && !e.mentions_accepts() && !e.mentions_primed()
}

/// Folds `e` and collapses it to a literal when it is constant over the carrier.
pub fn simplify(env: &Env, e: &Expr) -> Expr {
    let e = e.fold();
    if matches!(e, Expr::Lit(_)) || !is_state_pred(&e) {
        return e;
    }
    let vals = valuations_over(env, &e.free_vars());
    let mut seen_t = false;
    let mut seen_f = false;
    for s in &vals {
        if e.eval_bool(&EvalCtx::state(s)) {
            seen_t = true;
        } else {
            seen_f = true;
        }
        if seen_t && seen_f {
            return e;
        }
    }
    Expr::bool(seen_t)
}

/// `a ⇒ b` on every valuation.
pub fn implies(env: &Env, a: &Expr, b: &Expr) -> bool {
    if a.is_false() || b.is_true() || a == b {
        return true;
    }
    let vars: BTreeSet<String> = a.free_vars().union(&b.free_vars()).cloned().collect();
    valuations_over(env, &vars)
        .iter()
        .all(|s| !a.holds_in(s) || b.holds_in(s))
}

pub fn equivalent(env: &Env, a: &Expr, b: &Expr) -> bool {
    a == b || (implies(env, a, b) && implies(env, b, a))
}

/// Values of `e` agree on every valuation where `guard` holds.
pub fn agree_under(env: &Env, guard: &Expr, a: &Expr, b: &Expr) -> bool {
    if a == b {
        return true;
    }
    let vars: BTreeSet<String> = guard
        .free_vars()
        .union(&a.free_vars())
        .cloned()
        .collect::<BTreeSet<_>>()
        .union(&b.free_vars())
        .cloned()
        .collect();
    valuations_over(env, &vars).iter().all(|s| {
        !guard.holds_in(s) || a.eval_in(s) == b.eval_in(s)
    })
}

pub fn is_literal(e: &Expr) -> Option<&Value> {
    match e {
        Expr::Lit(v) => Some(v),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{BinOp, ValueType};

    #[test]
    fn simplify_decides_constant_conditions() {
        let env = Env::new().var("bf", ValueType::seq(ValueType::int(0, 1), 2));
        let e = Expr::bin(BinOp::Ge, Expr::Len(Box::new(Expr::var("bf"))), Expr::int(0));
        assert!(simplify(&env, &e).is_true());
        let e = Expr::bin(BinOp::Lt, Expr::int(0), Expr::Len(Box::new(Expr::var("bf"))));
        assert_eq!(simplify(&env, &e), e);
    }

    #[test]
    fn implication_on_finite_domain() {
        let env = Env::new().var("x", ValueType::int(0, 2));
        let a = Expr::eq(Expr::var("x"), Expr::int(2));
        let b = Expr::bin(BinOp::Gt, Expr::var("x"), Expr::int(0));
        assert!(implies(&env, &a, &b));
        assert!(!implies(&env, &b, &a));
    }
}
