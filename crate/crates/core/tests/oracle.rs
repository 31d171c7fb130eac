mod common;

use attack_synth::automata::{from_constraint, Dfa};
use attack_synth::constraint::{
    canonical_key, parse_constraint, parse_file, substitute, Constraint, Domain, Level, Signature, Var,
};
use attack_synth::count::{count_models, model_count, DfaCache};
use common::{assignments, brute_count, eval, random_constraint, random_domain};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn case(seed: u64) -> (Domain, Constraint) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = random_domain(&mut rng);
    let c = random_constraint(&mut rng, &d, 3);
    (d, c)
}

fn count(a: &Dfa) -> BigUint {
    count_models(a).count
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(250))]

    #[test]
    fn counts_match_enumeration(seed in any::<u64>()) {
        let (d, c) = case(seed);
        let cache = DfaCache::new();
        let got = model_count(&c, &d, &["h", "l"], &cache).unwrap().count;
        prop_assert_eq!(got, BigUint::from(brute_count(&c, &d, &["h", "l"])), "{} over {:?}", c, d);
    }

    #[test]
    fn membership_matches_evaluation(seed in any::<u64>()) {
        let (d, c) = case(seed);
        let a = from_constraint(&c, &d, &["h", "l"]).unwrap();
        prop_assert!(a.check_well_formed().is_ok());
        let m = a.minimize();
        prop_assert!(m.check_well_formed().is_ok());
        prop_assert!(m.num_states() <= a.num_states());
        for asg in assignments(&d, &["h", "l"]) {
            prop_assert_eq!(a.accepts(&asg).unwrap(), eval(&c, &asg, &d), "{} at {:?}", c, asg);
            prop_assert_eq!(m.accepts(&asg).unwrap(), eval(&c, &asg, &d));
        }
    }

    #[test]
    fn de_morgan(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_domain(&mut rng);
        let x = from_constraint(&random_constraint(&mut rng, &d, 2), &d, &["h", "l"]).unwrap();
        let y = from_constraint(&random_constraint(&mut rng, &d, 2), &d, &["h", "l"]).unwrap();
        let lhs = x.intersect(&y).unwrap().complement().unwrap();
        let rhs = x.complement().unwrap().union(&y.complement().unwrap()).unwrap();
        for asg in assignments(&d, &["h", "l"]) {
            prop_assert_eq!(lhs.accepts(&asg).unwrap(), rhs.accepts(&asg).unwrap());
        }
        prop_assert!(x.intersect(&x.complement().unwrap()).unwrap().is_empty());
        let union = count(&x.union(&y).unwrap());
        prop_assert_eq!(union + count(&x.intersect(&y).unwrap()), count(&x) + count(&y));
    }

    #[test]
    fn projection_is_monotone_and_existential(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_domain(&mut rng);
        let a = from_constraint(&random_constraint(&mut rng, &d, 2), &d, &["h", "l"]).unwrap();
        let b = from_constraint(&random_constraint(&mut rng, &d, 2), &d, &["h", "l"]).unwrap();
        let pa = a.project(&["l"]).unwrap();
        let pab = a.intersect(&b).unwrap().project(&["l"]).unwrap();
        prop_assert!(pa.check_well_formed().is_ok());
        for l in common::strings(&d, "l") {
            let only_l = common::asg(&[("l", &l)]);
            let witness = common::strings(&d, "h")
                .iter()
                .any(|h| a.accepts(&common::asg(&[("h", h), ("l", &l)])).unwrap());
            prop_assert_eq!(pa.accepts(&only_l).unwrap(), witness);
            if pab.accepts(&only_l).unwrap() {
                prop_assert!(pa.accepts(&only_l).unwrap());
            }
        }
    }

    #[test]
    fn dsl_round_trip(seed in any::<u64>()) {
        let (d, c) = case(seed);
        let back = parse_constraint(&c.to_string(), &Signature::high_low(), &d).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(canonical_key(&back), canonical_key(&c));
    }

    #[test]
    fn substitution_agrees_with_eqconst(seed in any::<u64>()) {
        let (d, c) = case(seed);
        let low = Var::string("l", Level::Low);
        let cache = DfaCache::new();
        for l in common::strings(&d, "l").into_iter().take(6) {
            let inst = substitute(&c, &low, &l, &d).unwrap();
            prop_assert!(!inst.free_variables().contains("l"));
            let marked = Constraint::And(vec![c.clone(), Constraint::EqConst("l".into(), l.clone())]);
            let a = model_count(&inst, &d, &["h"], &cache).unwrap().count;
            let b = model_count(&marked, &d, &["h", "l"], &cache).unwrap().count;
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn conjunction_never_adds_models(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = random_domain(&mut rng);
        let x = random_constraint(&mut rng, &d, 2);
        let y = random_constraint(&mut rng, &d, 2);
        let cache = DfaCache::new();
        let both = model_count(&Constraint::And(vec![x.clone(), y]), &d, &["h", "l"], &cache).unwrap().count;
        let first = model_count(&x, &d, &["h", "l"], &cache).unwrap().count;
        cache.reset();
        prop_assert_eq!(model_count(&x, &d, &["h", "l"], &cache).unwrap().count, first.clone());
        prop_assert!(both <= first);
    }
}

#[test]
fn spec_examples() {
    let d = Domain::uppercase(2);
    let sig = Signature::high_low();
    let cache = DfaCache::new();
    let p = |t: &str| parse_constraint(t, &sig, &d).unwrap();
    let n = |c: &Constraint| model_count(c, &d, &["h"], &cache).unwrap().count;
    assert_eq!(n(&p("(<= h \"MZ\")")), BigUint::from(brute_count(&p("(<= h \"MZ\")"), &d, &["h"])));
    assert_eq!(n(&p("(<= h \"MZ\")")), 338u32.into());
    let le = substitute(&p("(<= h l)"), &Var::string("l", Level::Low), "MZ", &d).unwrap();
    assert_eq!(n(&le), 338u32.into());

    let lattice = "(and (<= h \"MZ\") (> h \"GM\") (<= h \"JS\") (> h \"IF\") (> h \"JE\") (<= h \"JL\") (> h \"JI\") (<= h \"JJ\") (> h \"JI\"))";
    let c = p(lattice);
    assert_eq!(n(&c), BigUint::from(brute_count(&c, &d, &["h"])));

    let ll = p("(and (> h \"LK\") (<= h \"LL\"))");
    assert_eq!(n(&ll), 1u32.into());

    let d4 = Domain::digits(2);
    let psi1 = parse_constraint("(!= (charAt l 0) (charAt h 0))", &sig, &d4).unwrap();
    let inst = substitute(&psi1, &Var::string("l", Level::Low), "82", &d4).unwrap();
    assert_eq!(brute_count(&inst, &d4, &["h"]), 90);
    assert_eq!(model_count(&inst, &d4, &["h"], &cache).unwrap().count, 90u32.into());
    let pin = Domain::digits(4);
    let psi1 = parse_constraint("(!= (charAt l 0) (charAt h 0))", &sig, &pin).unwrap();
    let inst = substitute(&psi1, &Var::string("l", Level::Low), "8299", &pin).unwrap();
    assert_eq!(model_count(&inst, &pin, &["h"], &cache).unwrap().count, 9000u32.into());
    let a = from_constraint(&psi1, &pin, &["h", "l"]).unwrap();
    let fixed = a.intersect(&from_constraint(&Constraint::EqConst("l".into(), "8299".into()), &pin, &["l"]).unwrap());
    assert_eq!(count(&fixed.unwrap().project(&["h"]).unwrap()), 9000u32.into());
}

#[test]
fn projection_examples() {
    let d = Domain::uppercase(2);
    let sig = Signature::high_low();
    let c = parse_constraint("(and (eqConst h \"LL\") (or (<= h l) (> h l)))", &sig, &d).unwrap();
    let a = from_constraint(&c, &d, &["h", "l"]).unwrap();
    assert_eq!(count(&a.project(&["l"]).unwrap()), 676u32.into());
    assert!(a.project(&["x"]).is_err());
}

#[test]
fn files_round_trip() {
    let text = "(domain \"AB\" 3 up_to)\n(delta 5)\n(var h string high)\n(var l string low 2)\n(obs 4 (< h (concat l \"A\")))\n(obs 20 (>= h (concat l \"A\")))\n";
    let f = parse_file(text, None).unwrap();
    let again = parse_file(&f.to_dsl(), None).unwrap();
    assert_eq!(f, again);
    assert_eq!(f.domain.track_len("l"), 2);
}
