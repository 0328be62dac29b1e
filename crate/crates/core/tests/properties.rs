use proptest::prelude::*;
use rdes_core::contracts::Calculus;
use rdes_core::dsl::{load, parse_expr};
use rdes_core::gen::{law_env, rng, ExprGen, ProgGen};
use rdes_core::oracle::cross_check;
use rdes_core::relalg::{filter_r4, filter_r5, normalize, Ground, RRel};
use rdes_core::state::{EvalCtx, Subst};
use rdes_core::verify::refine;
use rdes_core::Bounds;

fn exprs(seed: u64) -> (ExprGen, rand_chacha::ChaCha8Rng) {
    (ExprGen::new(&law_env()), rng(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn substitution_is_evaluation_in_the_updated_state(seed in any::<u64>()) {
        let env = law_env();
        let (g, mut r) = exprs(seed);
        let sigma = g.subst(&mut r);
        let e = if seed % 2 == 0 { g.cond(&mut r, 2) } else { g.int(&mut r, 0, 2) };
        for s in env.valuations() {
            let direct = e.eval(&EvalCtx::state(&sigma.run(s)));
            prop_assert_eq!(sigma.apply(&e).eval(&EvalCtx::state(s)), direct);
        }
    }

    #[test]
    fn substitution_composition_is_associative_and_sequential(seed in any::<u64>()) {
        let env = law_env();
        let (g, mut r) = exprs(seed);
        let (a, b, c) = (g.subst(&mut r), g.subst(&mut r), g.subst(&mut r));
        let left = a.then(&b).then(&c);
        let right = a.then(&b.then(&c));
        for s in env.valuations() {
            let seq = c.run(&b.run(&a.run(s)));
            prop_assert_eq!(left.run(s), seq.clone());
            prop_assert_eq!(right.run(s), seq);
        }
        prop_assert_eq!(Subst::id().then(&a).run(&env.valuations()[0]), a.run(&env.valuations()[0]));
    }

    #[test]
    fn folding_preserves_values(seed in any::<u64>()) {
        let env = law_env();
        let (g, mut r) = exprs(seed);
        let e = if seed % 2 == 0 { g.cond(&mut r, 3) } else { g.int(&mut r, 0, 2) };
        let f = e.fold();
        for s in env.valuations() {
            prop_assert_eq!(f.eval(&EvalCtx::state(s)), e.eval(&EvalCtx::state(s)));
        }
        prop_assert_eq!(f.fold(), f);
    }

    #[test]
    fn conditions_print_and_parse_back(seed in any::<u64>()) {
        let (g, mut r) = exprs(seed);
        let e = g.cond(&mut r, 3);
        prop_assert_eq!(parse_expr(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn programs_print_and_parse_back(seed in any::<u64>()) {
        let pg = ProgGen::new();
        let mut r = rng(seed);
        let body = if seed % 3 == 0 { pg.with_loop(&mut r, 3) } else { pg.star_free(&mut r, 4) };
        let text = pg.program(body.clone()).to_string();
        let p = load(&text).unwrap();
        prop_assert_eq!(p.source.to_string(), text.clone());
        let direct = pg.typed(body).unwrap();
        prop_assert_eq!(p.env.clone(), direct.env.clone());
        let k = Calculus::new(&p.env);
        match (k.calculate(&p.proc), k.calculate(&direct.proc)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }

    #[test]
    fn normalization_is_idempotent(seed in any::<u64>()) {
        let env = law_env();
        let (g, mut r) = exprs(seed);
        let x = match seed % 3 {
            0 => g.atoms(&mut r),
            1 => g.ka_term(&mut r, 3),
            _ => RRel::seq(g.ka_term(&mut r, 2), g.atoms(&mut r)),
        };
        let n = normalize(&env, &x).unwrap();
        prop_assert_eq!(normalize(&env, &n).unwrap(), n);
    }

    #[test]
    fn r4_and_r5_partition_a_relation(seed in any::<u64>()) {
        let env = law_env();
        let (g, mut r) = exprs(seed);
        let x = if seed % 2 == 0 { g.atoms(&mut r) } else { RRel::seq(g.ka_term(&mut r, 2), g.atoms(&mut r)) };
        let (r4, r5) = (filter_r4(&env, &x).unwrap(), filter_r5(&env, &x).unwrap());
        let gr = Ground::new(&env);
        for s in env.valuations() {
            let (f4, f5) = (gr.finals(&r4, s, 4), gr.finals(&r5, s, 4));
            prop_assert!(f4.iter().all(|(t, _)| !t.is_empty()));
            prop_assert!(f5.iter().all(|(t, _)| t.is_empty()));
            let mut both = f4.clone();
            both.extend(f5);
            prop_assert_eq!(both, gr.finals(&x, s, 4));
            let (q4, q5) = (gr.quiets(&r4, s, 4), gr.quiets(&r5, s, 4));
            prop_assert!(q4.iter().all(|(t, _)| !t.is_empty()));
            prop_assert!(q5.iter().all(|(t, _)| t.is_empty()));
            let mut qs = q4.clone();
            qs.extend(q5);
            prop_assert_eq!(qs, gr.quiets(&x, s, 4));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn calculated_contracts_match_the_oracle(seed in any::<u64>()) {
        let pg = ProgGen::new();
        let mut r = rng(seed);
        let body = if seed % 4 == 0 { pg.with_loop(&mut r, 3) } else { pg.star_free(&mut r, 4) };
        let p = pg.typed(body.clone()).unwrap();
        let rep = cross_check(&p, 64, 4, 16).unwrap();
        prop_assert!(rep.agrees(), "{}: {:?}", body, rep.diffs);
    }

    #[test]
    fn refinement_is_reflexive_and_skip_is_a_unit(seed in any::<u64>()) {
        let pg = ProgGen::new();
        let mut r = rng(seed);
        let p = pg.typed(pg.star_free(&mut r, 3)).unwrap();
        let k = Calculus::new(&p.env);
        let c = k.calculate(&p.proc).unwrap();
        prop_assert!(refine(&p.env, &c, &c, Bounds::default()).verdict.is_verified());
        prop_assert!(k.seq(&k.skip(), &c).unwrap().same_relations(&c));
        prop_assert!(k.seq(&c, &k.skip()).unwrap().same_relations(&c));
        prop_assert!(refine(&p.env, &k.chaos(), &c, Bounds::default()).verdict.is_verified());
        prop_assert!(refine(&p.env, &c, &k.miracle(), Bounds::default()).verdict.is_verified());
    }
}
