use boxlab::boxes::{dense_from_sym, pr_box, q_box, Alphabets, DenseBox, Interface, Layout};
use boxlab::channels::{
    build_dominated_extension, diamond_over_polytope, distinguishability, dominated_chain, Channel,
};
use boxlab::definetti::tau_chsh;
use boxlab::linprog::extension_polytope;
use boxlab::numerics::{rat, Field, QSqrt2, Rational};
use boxlab::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Eve learns which `Q(p)^{⊗n}` component was drawn on input 0 and gets an
/// independent uniform label on any other input.
fn labelled_mixture(
    n: usize,
    eve_inputs: usize,
    comps: &[(Rational, Rational)],
) -> DenseBox<QSqrt2> {
    let alph = Alphabets::chsh()
        .with_eve(Interface::new(eve_inputs, comps.len()))
        .unwrap();
    let layout = Layout::new(&alph, n).unwrap();
    let iid: Vec<DenseBox<Rational>> = comps
        .iter()
        .map(|(_, p)| q_box(p).unwrap().iid_power(n).unwrap())
        .collect();
    let weights: Vec<Rational> = comps.iter().map(|(w, _)| w.clone()).collect();
    let mix = DenseBox::mix(&iid, &weights).unwrap();
    let tl = mix.layout();
    let labels = rat(1, comps.len() as i64);
    DenseBox::from_fn(n, alph, |x, a| {
        let (xs, z) = (layout.round_inputs(x), layout.eve_input(x));
        let (outs, e) = (layout.round_outputs(a), layout.eve_output(a));
        let (tx, ta) = (tl.encode_inputs(&xs, 0), tl.encode_outputs(&outs, 0));
        let v = if z == 0 {
            iid[e].entry(tx, ta) * &weights[e]
        } else {
            mix.entry(tx, ta) * &labels
        };
        QSqrt2::from(v)
    })
    .unwrap()
}

fn random_channel(n: usize, rng: &mut ChaCha8Rng) -> Channel<QSqrt2> {
    let alph = Alphabets::chsh();
    let layout = Layout::new(&alph, n).unwrap();
    let per_round: Vec<QSqrt2> = (0..4).map(|_| QSqrt2::ratio(1, 4)).collect();
    let px = Channel::iid_inputs(n, &alph, &per_round).unwrap();
    let size = layout.num_inputs * layout.num_outputs;
    let kernel: Vec<(i64, i64)> = (0..size)
        .map(|_| {
            let w0: i64 = rng.gen_range(0..=4);
            (w0, 4 - w0)
        })
        .collect();
    Channel::from_fn(n, alph, px, 2, move |x, a, r| {
        let (w0, w1) = kernel[x * layout.num_outputs + a];
        QSqrt2::ratio(if r == 0 { w0 } else { w1 }, 4)
    })
    .unwrap()
}

fn random_p(rng: &mut ChaCha8Rng) -> Rational {
    rat(rng.gen_range(15..=85), 100)
}

#[test]
fn chain_holds_for_seeded_channel_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 1..=2 {
        let tau = dense_from_sym(&tau_chsh(n).unwrap()).unwrap();
        for _ in 0..4 {
            let comps = [
                (rat(1, 3), random_p(&mut rng)),
                (rat(2, 3), random_p(&mut rng)),
            ];
            let p_abe = labelled_mixture(n, 2, &comps);
            let ext = build_dominated_extension(&p_abe, &tau).unwrap();
            assert!(ext.extension.is_nonsignaling());
            assert_eq!(ext.extension.eve_marginal(1).unwrap(), tau);
            let (e, f) = (random_channel(n, &mut rng), random_channel(n, &mut rng));
            let chain = dominated_chain(&e, &f, &p_abe, &ext).unwrap();
            assert!(chain.holds, "n = {n}: {} > {}", chain.lhs, chain.rhs);
            assert_eq!(
                chain.rhs,
                chain.extension_value.clone() * QSqrt2::from_int(((n + 1) * (n + 1)) as i64)
            );
        }
    }
}

#[test]
fn extension_lp_dominates_the_constructed_extension() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, eve_inputs) in [(1, 2), (1, 2), (2, 1)] {
        let tau = dense_from_sym(&tau_chsh(n).unwrap()).unwrap();
        let polytope = extension_polytope(&tau, 3, eve_inputs).unwrap();
        let comps = [
            (rat(1, 2), random_p(&mut rng)),
            (rat(1, 2), random_p(&mut rng)),
        ];
        let p_abe = labelled_mixture(n, eve_inputs, &comps);
        let ext = build_dominated_extension(&p_abe, &tau).unwrap();
        assert!(polytope.contains(ext.extension.entries()));
        let (e, f) = (random_channel(n, &mut rng), random_channel(n, &mut rng));
        let eve = Interface::new(eve_inputs, 3);
        let diamond = diamond_over_polytope(&e, &f, &polytope, Some(eve), 1 << 12).unwrap();
        assert!(polytope.contains(diamond.witness.as_ref().unwrap().entries()));
        let on_ext = distinguishability(&e, &f, &ext.extension).unwrap().value;
        assert!(on_ext <= diamond.value, "n = {n}");
        let lhs = distinguishability(&e, &f, &p_abe).unwrap().value;
        let factor = QSqrt2::from_int(((n + 1) * (n + 1)) as i64);
        assert!(lhs <= diamond.value * factor, "n = {n}");
    }
}

#[test]
fn trivial_eve_leaves_tau_as_the_remainder() {
    let n = 2;
    let tau = dense_from_sym(&tau_chsh(n).unwrap()).unwrap();
    let alph = Alphabets::chsh().with_eve(Interface::new(1, 1)).unwrap();
    let p_abe = DenseBox::new(n, alph, tau.entries().to_vec()).unwrap();
    let ext = build_dominated_extension(&p_abe, &tau).unwrap();
    assert_eq!(ext.remainder, tau);
    assert_eq!(ext.weight, QSqrt2::ratio(1, 9));
    assert_eq!(ext.e_star, 1);
}

#[test]
fn superquantum_marginals_are_rejected() {
    let pr: DenseBox<QSqrt2> = pr_box();
    let alph = Alphabets::chsh().with_eve(Interface::new(1, 1)).unwrap();
    let p_abe = DenseBox::new(1, alph, pr.entries().to_vec()).unwrap();
    let tau = dense_from_sym(&tau_chsh(1).unwrap()).unwrap();
    assert!(matches!(
        build_dominated_extension(&p_abe, &tau),
        Err(Error::ThresholdPremise { k: 1, .. })
    ));
    let no_eve = DenseBox::new(1, Alphabets::chsh(), pr.entries().to_vec()).unwrap();
    assert!(matches!(
        build_dominated_extension(&no_eve, &tau),
        Err(Error::Shape(_))
    ));
}
