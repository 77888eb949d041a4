use boxlab::boxes::{Alphabets, DenseBox, Interface};
use boxlab::channels::{
    apply, counterexample_channels, diamond_over_polytope, distinguishability, distinguisher_box,
    statistic_channel, verify_counterexample, verify_counterexample_with,
};
use boxlab::linprog::{lp_solve, ns_polytope, round_ns_polytope, Sense};
use boxlab::numerics::{int, rat, Field, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn delta_is_orthogonal_to_round_ns_statistics() {
    let (n, m) = (3, 2);
    let ce = counterexample_channels(n, m).unwrap();
    let alph = Alphabets::single(2, 2);
    let poly = round_ns_polytope::<Rational>(n, &alph).unwrap();
    let stat = statistic_channel(n, m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut seen = std::collections::HashSet::new();
    for _ in 0..100 {
        let c: Vec<Rational> = (0..poly.nvars())
            .map(|_| rat(rng.gen_range(-50..=50), 11))
            .collect();
        let x = lp_solve(&poly, &c, Sense::Maximize)
            .unwrap()
            .witness
            .unwrap();
        assert!(poly.contains(&x));
        let b = DenseBox::new(n, alph.clone(), x).unwrap();
        b.round_nonsignaling().unwrap();
        let pwt = apply(&stat, &b).unwrap();
        let dot = ce
            .delta
            .iter()
            .zip(&pwt)
            .fold(int(0), |acc, (d, p)| acc + d * p);
        assert_eq!(dot, int(0));
        assert_eq!(distinguishability(&ce.e, &ce.f, &b).unwrap().value, int(0));
        seen.insert(b.entries().to_vec());
    }
    assert!(seen.len() > 10, "only {} distinct vertices", seen.len());
}

#[test]
fn signaling_boxes_tell_the_channels_apart() {
    let ce = counterexample_channels(3, 2).unwrap();
    let poly = ns_polytope::<Rational>(3, &Alphabets::single(2, 2)).unwrap();
    let r = diamond_over_polytope(&ce.e, &ce.f, &poly, None, 1 << 20).unwrap();
    let q = distinguishability(&ce.e, &ce.f, &distinguisher_box(3).unwrap())
        .unwrap()
        .value;
    assert!(q.is_pos());
    assert!(r.value >= q);
    let witness = r.witness.unwrap();
    assert!(poly.contains(witness.entries()));
    assert_eq!(
        distinguishability(&ce.e, &ce.f, &witness).unwrap().value,
        r.value
    );
}

#[test]
fn four_rounds_end_to_end() {
    let r = verify_counterexample(4, 3, 1 << 20).unwrap();
    assert_eq!(r.roundns_value, int(0));
    assert!(r.q_value.is_pos());
    assert_eq!(r.pr_estar, rat(1, 4096 * 24));
    assert_eq!(r.twirled_value, r.estar_term.clone() * int(2));
    assert!(r.twirled_value.is_pos());
}

#[test]
fn eve_gains_nothing_on_round_ns_boxes() {
    let ce = counterexample_channels(3, 2).unwrap();
    let r = verify_counterexample_with(&ce, Some(Interface::new(2, 2)), 1 << 20).unwrap();
    assert_eq!(r.roundns_value, int(0));
    assert_eq!(r.roundns_patterns, 64);
}
