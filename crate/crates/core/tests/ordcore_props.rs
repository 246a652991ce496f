mod common;

use common::*;
use homperm::ordcore::{IntervalSet, Ordinal, OrderIso};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ordinal() -> impl Strategy<Value = Ordinal> {
    proptest::collection::vec(0u64..4, 0..4).prop_map(|d| from_digits(&d))
}

fn set_from(seed: u64, pieces: usize) -> IntervalSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = rand_lengths(&mut rng, pieces);
    layout(&mut rng, &l)
}

proptest! {
    #[test]
    fn addition_matches_oracle(a in ordinal(), b in ordinal()) {
        prop_assert_eq!(a.add(&b), from_digits(&oracle_add(&digits(&a), &digits(&b))));
    }

    #[test]
    fn addition_is_associative(a in ordinal(), b in ordinal(), c in ordinal()) {
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
    }

    #[test]
    fn left_sub_inverts_addition(a in ordinal(), d in ordinal()) {
        let b = a.add(&d);
        prop_assert_eq!(a.left_sub(&b).unwrap(), d);
    }

    #[test]
    fn left_sub_undefined_above(a in ordinal(), b in ordinal()) {
        prop_assert_eq!(a.left_sub(&b).is_ok(), a <= b);
    }

    #[test]
    fn text_round_trip(a in ordinal()) {
        prop_assert_eq!(a.to_string().parse::<Ordinal>().unwrap(), a);
    }

    #[test]
    fn set_algebra_agrees_with_membership(s1 in 0u64..5000, s2 in 0u64..5000, p in 1usize..4, q in 1usize..4) {
        let (a, b) = (set_from(s1, p), set_from(s2, q));
        let mut rng = ChaCha8Rng::seed_from_u64(s1 ^ s2);
        for _ in 0..40 {
            let x = rand_ordinal(&mut rng, 3, 4);
            let (ia, ib) = (oracle_contains(&a, &x), oracle_contains(&b, &x));
            prop_assert_eq!(a.union(&b).contains(&x), ia || ib);
            prop_assert_eq!(a.intersection(&b).contains(&x), ia && ib);
            prop_assert_eq!(a.difference(&b).contains(&x), ia && !ib);
        }
        prop_assert_eq!(a.is_subset(&b), a.difference(&b).is_empty());
    }

    #[test]
    fn rho_laws(seed in 0u64..10_000, pieces in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = rand_lengths(&mut rng, pieces);
        let (s, t, u) = (layout(&mut rng, &l), layout(&mut rng, &l), layout(&mut rng, &l));
        let st = OrderIso::new(s.clone(), t.clone()).unwrap();
        let tu = OrderIso::new(t.clone(), u.clone()).unwrap();
        let su = OrderIso::new(s.clone(), u.clone()).unwrap();
        let id = OrderIso::identity(s.clone());
        let pts: Vec<Ordinal> = (0..50).map_while(|i| s.enum_element(i)).collect();
        for x in &pts {
            prop_assert_eq!(&id.apply(x).unwrap(), x);
            let y = st.apply(x).unwrap();
            prop_assert!(t.contains(&y));
            prop_assert_eq!(&st.apply_inv(&y).unwrap(), x);
            prop_assert_eq!(tu.apply(&y).unwrap(), su.apply(x).unwrap());
        }
        for w in pts.windows(2) {
            let (a, b) = (st.apply(&w[0]).unwrap(), st.apply(&w[1]).unwrap());
            prop_assert_eq!(w[0] < w[1], a < b);
        }
    }

    #[test]
    fn rho_on_finite_sets_is_rank_matching(xs in proptest::collection::btree_set(0u64..60, 1..12), shift in proptest::collection::vec(0u64..5, 12)) {
        let src: Vec<u64> = xs.iter().copied().collect();
        let mut tgt = Vec::new();
        let mut cur = 0;
        for (i, _) in src.iter().enumerate() {
            cur += shift[i] + 1;
            tgt.push(cur);
        }
        let set = |v: &[u64]| IntervalSet::new(v.iter().map(|&k| (Ordinal::nat(k), Ordinal::nat(k + 1))));
        let r = OrderIso::new(set(&src), set(&tgt)).unwrap();
        for (i, &k) in src.iter().enumerate() {
            prop_assert_eq!(r.apply(&Ordinal::nat(k)).unwrap(), Ordinal::nat(tgt[i]));
        }
    }
}

#[test]
fn compose_is_pointwise_on_the_fused_source() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let l0 = rand_lengths(&mut rng, 2);
        let l1 = rand_lengths(&mut rng, 2);
        let r0 = OrderIso::new(layout(&mut rng, &l0), layout(&mut rng, &l0)).unwrap();
        let r1 = OrderIso::new(layout(&mut rng, &l1), layout(&mut rng, &l1)).unwrap();
        let c = OrderIso::compose(&r1, &r0);
        for x in (0..50).map_while(|i| c.source().enum_element(i)) {
            let mid = r0.apply(&x).unwrap();
            assert_eq!(c.apply(&x).unwrap(), r1.apply(&mid).unwrap());
        }
    }
}
