//! Seeded random generation of expressions, atoms, relations and programs
//! over small finite declarations.

use crate::dsl::{typecheck, Action, DeclKind, Declaration, Program, TypeExpr, TypedProgram};
use crate::relalg::{Atom, Clause, EventSet, PreNf, RRel, TraceExpr};
use crate::state::{BinOp, Env, EventTerm, Expr, Subst, ValueType};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type GenRng = ChaCha8Rng;

pub fn rng(seed: u64) -> GenRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `x : int[0..2]`, `y : bool`, channels `a`, `b` and `c : int[0..2]`.
pub fn law_env() -> Env {
    Env::new()
        .var("x", ValueType::int(0, 2))
        .var("y", ValueType::Bool)
        .chan("a", None)
        .chan("b", None)
        .chan("c", Some(ValueType::int(0, 2)))
}

/// Expression generator over the integer variables and boolean variables of
/// an environment. Integer expressions assigned or sent are wrapped in `Fit`
/// so that their values stay inside the declared carriers.
pub struct ExprGen {
    ints: Vec<(String, i64, i64)>,
    bools: Vec<String>,
    /// Channels with their payload range, if any.
    chans: Vec<(String, Option<(i64, i64)>)>,
}

impl ExprGen {
    pub fn new(env: &Env) -> Self {
        let mut ints = Vec::new();
        let mut bools = Vec::new();
        for (x, t) in &env.vars {
            match t {
                ValueType::Int { lo, hi } => ints.push((x.clone(), *lo, *hi)),
                ValueType::Bool => bools.push(x.clone()),
                ValueType::Seq { .. } => {}
            }
        }
        let chans = env
            .chans
            .iter()
            .filter_map(|(c, t)| match t {
                None => Some((c.clone(), None)),
                Some(ValueType::Int { lo, hi }) => Some((c.clone(), Some((*lo, *hi)))),
                _ => None,
            })
            .collect();
        ExprGen { ints, bools, chans }
    }

    fn int_leaf(&self, r: &mut impl Rng, lo: i64, hi: i64) -> Expr {
        if !self.ints.is_empty() && r.gen_bool(0.6) {
            Expr::var(self.ints.choose(r).unwrap().0.clone())
        } else {
            Expr::int(r.gen_range(lo..=hi))
        }
    }

    /// An integer expression fitted into `[lo, hi]`.
    pub fn int(&self, r: &mut impl Rng, lo: i64, hi: i64) -> Expr {
        let e = match r.gen_range(0..6) {
            0 | 1 => return self.int_leaf(r, lo, hi),
            2 => Expr::bin(BinOp::Add, self.int_leaf(r, lo, hi), Expr::int(1)),
            3 => Expr::bin(BinOp::Sub, self.int_leaf(r, lo, hi), Expr::int(1)),
            4 => Expr::bin(BinOp::Add, self.int_leaf(r, lo, hi), self.int_leaf(r, lo, hi)),
            _ => Expr::ite(self.cond(r, 0), self.int_leaf(r, lo, hi), self.int_leaf(r, lo, hi)),
        };
        Expr::Fit(ValueType::int(lo, hi), Box::new(e))
    }

    /// A boolean condition over the state.
    pub fn cond(&self, r: &mut impl Rng, depth: u32) -> Expr {
        let pick = if depth == 0 { r.gen_range(0..4) } else { r.gen_range(0..7) };
        match pick {
            0 if !self.bools.is_empty() => Expr::var(self.bools.choose(r).unwrap().clone()),
            0..=2 if !self.ints.is_empty() => {
                let (x, lo, hi) = self.ints.choose(r).unwrap().clone();
                let op = *[BinOp::Eq, BinOp::Lt, BinOp::Le, BinOp::Ne, BinOp::Gt].choose(r).unwrap();
                Expr::bin(op, Expr::var(x), Expr::int(r.gen_range(lo..=hi)))
            }
            3 => Expr::bool(r.gen_bool(0.7)),
            4 => Expr::not(self.cond(r, depth - 1)),
            5 => Expr::and(self.cond(r, depth - 1), self.cond(r, depth - 1)),
            _ => Expr::or(self.cond(r, depth - 1), self.cond(r, depth - 1)),
        }
    }

    pub fn event(&self, r: &mut impl Rng) -> EventTerm {
        let (c, ty) = self.chans.choose(r).unwrap().clone();
        match ty {
            None => EventTerm::plain(c),
            Some((lo, hi)) => EventTerm::with(c, self.int(r, lo, hi)),
        }
    }

    pub fn trace(&self, r: &mut impl Rng, max: usize) -> TraceExpr {
        let n = r.gen_range(0..=max);
        TraceExpr((0..n).map(|_| self.event(r)).collect())
    }

    pub fn event_set(&self, r: &mut impl Rng, depth: u32) -> EventSet {
        let pick = if depth == 0 { r.gen_range(0..3) } else { r.gen_range(0..6) };
        match pick {
            0 => EventSet::Empty,
            1 | 2 => EventSet::Single(self.event(r)),
            3 => {
                let chans: Vec<&String> = self.chans.iter().filter(|c| c.1.is_some()).map(|c| &c.0).collect();
                match chans.choose(r) {
                    Some(c) => EventSet::Chan((*c).clone()),
                    None => EventSet::Single(self.event(r)),
                }
            }
            4 => EventSet::Union(vec![self.event_set(r, depth - 1), self.event_set(r, depth - 1)]),
            _ => EventSet::Cond(
                self.cond(r, 1),
                Box::new(self.event_set(r, depth - 1)),
                Box::new(self.event_set(r, depth - 1)),
            ),
        }
    }

    /// A substitution whose right-hand sides stay in the declared carriers.
    pub fn subst(&self, r: &mut impl Rng) -> Subst {
        let mut pairs = Vec::new();
        for (x, lo, hi) in &self.ints {
            if r.gen_bool(0.6) {
                pairs.push((x.clone(), self.int(r, *lo, *hi)));
            }
        }
        for y in &self.bools {
            if r.gen_bool(0.4) {
                pairs.push((y.clone(), self.cond(r, 1)));
            }
        }
        Subst::from_pairs(pairs)
    }

    pub fn final_atom(&self, r: &mut impl Rng) -> Atom {
        let b = if r.gen_bool(0.4) { Expr::bool(true) } else { self.cond(r, 1) };
        Atom::fin(b, self.subst(r), self.trace(r, 2))
    }

    pub fn quiet_atom(&self, r: &mut impl Rng) -> Atom {
        let b = if r.gen_bool(0.4) { Expr::bool(true) } else { self.cond(r, 1) };
        Atom::quiet(b, self.trace(r, 2), self.event_set(r, 2))
    }

    pub fn clause(&self, r: &mut impl Rng) -> Clause {
        Clause::new(self.cond(r, 1), self.trace(r, 2))
    }

    pub fn pre(&self, r: &mut impl Rng) -> PreNf {
        let n = *[0usize, 0, 1, 1, 2].choose(r).unwrap();
        PreNf((0..n).map(|_| self.clause(r)).collect())
    }

    /// A disjunction of one to three atoms of either kind.
    pub fn atoms(&self, r: &mut impl Rng) -> RRel {
        let n = r.gen_range(1..=3);
        RRel::Or(
            (0..n)
                .map(|_| {
                    RRel::Atom(if r.gen_bool(0.5) { self.final_atom(r) } else { self.quiet_atom(r) })
                })
                .collect(),
        )
    }

    /// A star-free post relation built from final atoms and tests with
    /// choice and sequencing.
    pub fn ka_term(&self, r: &mut impl Rng, depth: u32) -> RRel {
        let pick = if depth == 0 { r.gen_range(0..4) } else { r.gen_range(0..7) };
        match pick {
            0 => RRel::Test(self.cond(r, 1)),
            1..=3 => {
                let b = if r.gen_bool(0.5) { Expr::bool(true) } else { self.cond(r, 0) };
                RRel::Atom(Atom::fin(b, self.subst(r), self.trace(r, 1)))
            }
            4 | 5 => RRel::Or(vec![self.ka_term(r, depth - 1), self.ka_term(r, depth - 1)]),
            _ => RRel::seq(self.ka_term(r, depth - 1), self.ka_term(r, depth - 1)),
        }
    }
}

/// Declarations for generated programs: `x : int[0..1]`, `y : bool`,
/// channels `a`, `b` and `c : int[0..1]`.
pub fn program_decls() -> Vec<Declaration> {
    let d = |kind, name: &str, ty| Declaration { kind, name: name.into(), ty };
    vec![
        d(DeclKind::Variable, "x", Some(TypeExpr::Int(Some((0, 1))))),
        d(DeclKind::Variable, "y", Some(TypeExpr::Bool)),
        d(DeclKind::Channel, "a", None),
        d(DeclKind::Channel, "b", None),
        d(DeclKind::Channel, "c", Some(TypeExpr::Int(Some((0, 1))))),
    ]
}

/// Surface-syntax program generator.
pub struct ProgGen {
    e: ExprGen,
    /// Allow `chaos` and `miracle` leaves.
    pub extremes: bool,
}

impl Default for ProgGen {
    fn default() -> Self {
        Self::new()
    }
}

impl ProgGen {
    pub fn new() -> Self {
        let env = Env::new()
            .var("x", ValueType::int(0, 1))
            .var("y", ValueType::Bool)
            .chan("a", None)
            .chan("b", None)
            .chan("c", Some(ValueType::int(0, 1)));
        ProgGen { e: ExprGen::new(&env), extremes: true }
    }

    fn raw_int(&self, r: &mut impl Rng) -> Expr {
        match r.gen_range(0..4) {
            0 => Expr::int(r.gen_range(0..=1)),
            1 => Expr::var("x"),
            2 => Expr::bin(BinOp::Add, Expr::var("x"), Expr::int(1)),
            _ => Expr::bin(BinOp::Sub, Expr::int(1), Expr::var("x")),
        }
    }

    fn cond(&self, r: &mut impl Rng) -> Expr {
        self.e.cond(r, 1)
    }

    fn assign(&self, r: &mut impl Rng, bound: &[String]) -> Action {
        if r.gen_bool(0.3) {
            Action::Assign(vec![("y".into(), self.cond(r))])
        } else if !bound.is_empty() && r.gen_bool(0.4) {
            Action::Assign(vec![("x".into(), Expr::var(bound[0].clone()))])
        } else {
            Action::Assign(vec![("x".into(), self.raw_int(r))])
        }
    }

    fn event(&self, r: &mut impl Rng) -> EventTerm {
        match r.gen_range(0..3) {
            0 => EventTerm::plain("a"),
            1 => EventTerm::plain("b"),
            _ => EventTerm::with("c", self.raw_int(r)),
        }
    }

    fn leaf(&self, r: &mut impl Rng, bound: &[String], in_loop: bool) -> Action {
        let w = if self.extremes && !in_loop { 20 } else { 18 };
        match r.gen_range(0..w) {
            0..=3 => Action::Skip,
            4 | 5 => Action::Stop,
            6..=10 => self.assign(r, bound),
            11..=17 => Action::Prefix(self.event(r), Box::new(Action::Skip)),
            18 => Action::Chaos,
            _ => Action::Miracle,
        }
    }

    /// A random program without loops.
    pub fn star_free(&self, r: &mut impl Rng, depth: u32) -> Action {
        self.action(r, depth, &[], false, false)
    }

    fn action(&self, r: &mut impl Rng, depth: u32, bound: &[String], loops: bool, in_loop: bool) -> Action {
        if depth == 0 || r.gen_bool(0.2) {
            return self.leaf(r, bound, in_loop);
        }
        let d = depth - 1;
        let top = if loops { 10 } else { 9 };
        match r.gen_range(0..top) {
            0 | 1 => Action::Prefix(self.event(r), Box::new(self.action(r, d, bound, loops, in_loop))),
            2 | 3 => Action::Seq(
                Box::new(self.action(r, d, bound, loops, in_loop)),
                Box::new(self.action(r, d, bound, loops, in_loop)),
            ),
            4 => Action::Ext(vec![self.action(r, d, bound, loops, in_loop), self.action(r, d, bound, loops, in_loop)]),
            5 => Action::Int(vec![self.action(r, d, bound, loops, in_loop), self.action(r, d, bound, loops, in_loop)]),
            6 => Action::If(
                self.cond(r),
                Box::new(self.action(r, d, bound, loops, in_loop)),
                Box::new(self.action(r, d, bound, loops, in_loop)),
            ),
            7 => Action::Guard(self.cond(r), Box::new(self.action(r, d, bound, loops, in_loop))),
            8 if bound.is_empty() => {
                let v = "v".to_string();
                Action::Input {
                    chan: "c".into(),
                    var: v.clone(),
                    set: None,
                    body: Box::new(self.action(r, d, &[v], loops, in_loop)),
                }
            }
            8 => Action::Prefix(self.event(r), Box::new(self.action(r, d, bound, loops, in_loop))),
            _ => self.while_loop(r, d, bound),
        }
    }

    /// A body that performs an event before it can terminate. Loop bodies
    /// never contain `chaos` or `miracle`.
    fn productive(&self, r: &mut impl Rng, depth: u32, bound: &[String]) -> Action {
        let step = |g: &Self, r: &mut _| {
            Action::Prefix(g.event(r), Box::new(g.action(r, depth, bound, depth > 1, true)))
        };
        match r.gen_range(0..4) {
            0 | 1 => step(self, r),
            2 => Action::Ext(vec![step(self, r), step(self, r)]),
            _ => Action::If(self.cond(r), Box::new(step(self, r)), Box::new(step(self, r))),
        }
    }

    fn while_loop(&self, r: &mut impl Rng, depth: u32, bound: &[String]) -> Action {
        let cond = if r.gen_bool(0.3) { Expr::bool(true) } else { self.cond(r) };
        Action::While { cond, body: Box::new(self.productive(r, depth.min(2), bound)), at: Default::default() }
    }

    /// A random program containing at least one loop with a productive body.
    pub fn with_loop(&self, r: &mut impl Rng, depth: u32) -> Action {
        let lp = self.while_loop(r, depth.saturating_sub(1), &[]);
        match r.gen_range(0..4) {
            0 => lp,
            1 => Action::Seq(Box::new(self.assign(r, &[])), Box::new(lp)),
            2 => Action::Seq(Box::new(lp), Box::new(self.action(r, 1, &[], false, false))),
            _ => Action::Ext(vec![lp, self.action(r, 1, &[], false, false)]),
        }
    }

    pub fn program(&self, body: Action) -> Program {
        Program { decls: program_decls(), body }
    }

    pub fn typed(&self, body: Action) -> crate::Result<TypedProgram> {
        typecheck(&self.program(body))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let g = ProgGen::new();
        let a = g.star_free(&mut rng(7), 4);
        let b = g.star_free(&mut rng(7), 4);
        assert_eq!(a, b);
    }

    #[test]
    fn generated_programs_typecheck() {
        let g = ProgGen::new();
        let mut r = rng(1);
        for _ in 0..100 {
            let p = g.star_free(&mut r, 4);
            g.typed(p.clone()).unwrap_or_else(|e| panic!("{p}: {e}"));
            let w = g.with_loop(&mut r, 3);
            g.typed(w.clone()).unwrap_or_else(|e| panic!("{w}: {e}"));
        }
    }
}
