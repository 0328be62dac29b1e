use rdes_core::contracts::{Calculus, Contract, Tri};
use rdes_core::corpus;
use rdes_core::dsl::{load, parse_expr, typecheck_expr, ExprScope, TypedProgram};
use rdes_core::gen::{rng, ProgGen};
use rdes_core::kleene::{star_wp, unfold_star};
use rdes_core::oracle::{contract_obs, Oracle};
use rdes_core::relalg::{Atom, EventSet, Ground, PreNf, RRel, TraceExpr};
use rdes_core::state::{Env, Event, EventTerm, Expr, Subst, Value};
use rdes_core::verify::{assign_then_contract_reduction, refine};
use rdes_core::{Bounds, Error};
use std::collections::BTreeSet;

fn calc(src: &str) -> (TypedProgram, Contract) {
    let p = load(src).unwrap();
    let c = Calculus::new(&p.env).calculate(&p.proc).unwrap();
    (p, c)
}

fn same_obs(env: &Env, a: &Contract, b: &Contract) -> bool {
    env.valuations().iter().all(|s| contract_obs(env, a, s, 4) == contract_obs(env, b, s, 4))
}

fn ev(c: &str) -> Event {
    Event { chan: c.into(), data: None }
}

#[test]
fn whole_buffer_is_initialisation_iteration_then_offer() {
    let (_, body) = calc(corpus::BUFFER_BODY);
    let (_, buffer) = calc(corpus::BUFFER);
    let want = format!("⦗true_r | Phi(true | {{bf ↦ <>}} | <>) ; ({})⋆ ; {} | false⦘", body.post, body.peri);
    assert_eq!(buffer.to_string(), want);
    assert_eq!(buffer.flags.productive, Tri::Yes);
}

#[test]
fn buffer_iteration_needs_no_precondition() {
    let (p, body) = calc(corpus::BUFFER_BODY);
    let r = star_wp(&p.env, &body.post, &PreNf::true_r(), 16).unwrap();
    assert!(r.converged && r.clauses.is_true());
}

#[test]
fn one_unfolding_of_the_buffer_body_matches_one_oracle_step() {
    let (p, body) = calc(corpus::BUFFER_BODY);
    let once = unfold_star(&p.env, &body.post, 1).unwrap();
    let g = Ground::new(&p.env);
    let o = Oracle::new(&p.env, 8, 4);
    for s in p.env.valuations() {
        let mut want = o.enumerate(&p.proc, s).terms;
        want.insert((vec![], s.clone()));
        assert_eq!(g.finals(&once, s, 4), want, "from {s}");
    }
}

/// Observations of the counter worked out by hand: three ticks, then `done`.
#[test]
fn counter_observations_by_hand() {
    let (p, c) = calc(corpus::COUNTER);
    let tick = ev("tick");
    let done = ev("done");
    let mut quiets = BTreeSet::new();
    for k in 0..=3 {
        let acc = if k < 3 { tick.clone() } else { done.clone() };
        quiets.insert((vec![tick.clone(); k], BTreeSet::from([acc])));
    }
    let mut end = vec![tick.clone(); 3];
    end.push(done.clone());
    let o = Oracle::new(&p.env, 16, 4);
    for s in p.env.valuations() {
        let obs = contract_obs(&p.env, &c, s, 4);
        assert_eq!(obs.quiets, quiets);
        let post = obs.terms.iter().map(|(t, s2)| (t.clone(), s2.get("n").cloned())).collect::<Vec<_>>();
        assert_eq!(post, vec![(end.clone(), Some(Value::Int(3)))]);
        assert!(obs.diverges.is_empty());
        assert_eq!(o.enumerate(&p.proc, s), obs);
    }
}

#[test]
fn lattice_extremes_absorb_on_the_left() {
    for (name, src) in corpus::PROGRAMS {
        let (p, c) = calc(src);
        let k = Calculus::new(&p.env);
        assert!(k.seq(&k.chaos(), &c).unwrap().same_relations(&k.chaos()), "{name}");
        assert!(k.seq(&k.miracle(), &c).unwrap().same_relations(&k.miracle()), "{name}");
        assert!(k.seq(&k.stop(), &c).unwrap().same_relations(&k.stop()), "{name}");
        let b = Bounds::default();
        assert!(refine(&p.env, &k.chaos(), &c, b).verdict.is_verified(), "{name}");
        assert!(refine(&p.env, &c, &k.miracle(), b).verdict.is_verified(), "{name}");
    }
}

#[test]
fn external_choice_algebra_on_generated_programs() {
    let mut g = ProgGen::new();
    g.extremes = false;
    for seed in 0..60 {
        let mut r = rng(seed);
        let ps: Vec<TypedProgram> = (0..3).map(|_| g.typed(g.star_free(&mut r, 3)).unwrap()).collect();
        let env = &ps[0].env;
        let k = Calculus::new(env);
        let cs: Vec<Contract> = ps.iter().map(|p| k.calculate(&p.proc).unwrap()).collect();
        let ext = |xs: &[&Contract]| k.ext_choice(&xs.iter().map(|c| (*c).clone()).collect::<Vec<_>>()).unwrap();
        let (a, b, c) = (&cs[0], &cs[1], &cs[2]);
        assert!(same_obs(env, &ext(&[a, b]), &ext(&[b, a])), "commutative, seed {seed}");
        assert!(same_obs(env, &ext(&[a, a]), a), "idempotent, seed {seed}");
        assert!(same_obs(env, &ext(&[&ext(&[a, b]), c]), &ext(&[a, &ext(&[b, c])])), "associative, seed {seed}");
        assert!(same_obs(env, &ext(&[a, &k.stop()]), a), "unit, seed {seed}");
        if a.flags.productive == Tri::Yes && b.flags.productive == Tri::Yes {
            let lhs = k.seq(&ext(&[a, b]), c).unwrap();
            let rhs = ext(&[&k.seq(a, c).unwrap(), &k.seq(b, c).unwrap()]);
            assert!(same_obs(env, &lhs, &rhs), "distributes over productive branches, seed {seed}");
        }
    }
}

#[test]
fn initial_assignment_reduces_the_order_invariant() {
    let p = load(corpus::BUFFER).unwrap();
    let peri = |src: &str| RRel::Pred(typecheck_expr(&p.env, &parse_expr(src).unwrap(), ExprScope::Peri).unwrap());
    let inv = Contract { pre: PreNf::true_r(), peri: peri("outps(tt) <= bf ^ inps(tt)"), post: RRel::True, ..calc(corpus::SKIP).1 };
    let sigma = Subst::single("bf", parse_expr("<>").unwrap());
    let reduced = assign_then_contract_reduction(&sigma, &inv);
    let want = peri("outps(tt) <= inps(tt)");
    let g = Ground::new(&p.env);
    let acc = BTreeSet::new();
    for s in p.env.valuations() {
        for t in p.env.traces_upto(3) {
            assert_eq!(g.holds_peri(&reduced.peri, s, &t, &acc), g.holds_peri(&want, s, &t, &acc));
        }
    }
}

#[test]
fn substitution_into_a_pericondition() {
    let env = Env::new().var("x", rdes_core::state::ValueType::int(0, 1)).chan("a", Some(rdes_core::state::ValueType::int(0, 1)));
    let k = Calculus::new(&env);
    let q = Atom::quiet(
        Expr::eq(Expr::var("x"), Expr::int(1)),
        TraceExpr::empty(),
        EventSet::Single(EventTerm::with("a", Expr::var("x"))),
    );
    let c = k.contract(PreNf::true_r(), &RRel::Atom(q), &RRel::False).unwrap();
    let r = assign_then_contract_reduction(&Subst::single("x", Expr::int(1)), &c);
    let r = k.contract(r.pre, &r.peri, &r.post).unwrap();
    assert_eq!(r.peri.to_string(), "E(true | <> | {a.1})");
}

#[test]
fn loop_diagnostics() {
    let p = load("var x : int[0..3]\nx := 0 ;\nwhile x < 3 do x := x + 1").unwrap();
    match Calculus::new(&p.env).calculate(&p.proc) {
        Err(e @ Error::NotProductive { .. }) => assert!(e.to_string().contains("3:"), "{e}"),
        other => panic!("{other:?}"),
    }
    let p = load("var x : int[0..3]\nwhile false do x := x + 1").unwrap();
    let k = Calculus::new(&p.env);
    assert!(k.calculate(&p.proc).unwrap().same_relations(&k.skip()));
    assert!(matches!(load("channel a\na -> b -> skip"), Err(Error::UnboundName(_))));
    assert!(matches!(load("var x : int\nskip"), Err(Error::InfiniteDomain(_))));
}

#[test]
fn oracle_marks_divergence_after_events() {
    let p = load("channel a\nvar x : int[0..1]\na -> while true do x := 1 - x").unwrap();
    let o = Oracle::new(&p.env, 16, 4);
    let obs = o.enumerate(&p.proc, &p.env.valuations()[0]);
    assert_eq!(obs.diverges, BTreeSet::from([vec![ev("a")]]));
    let c = Calculus::new(&p.env).calculate(&p.proc).unwrap();
    assert_eq!(contract_obs(&p.env, &c, &p.env.valuations()[0], 4), obs);
}
