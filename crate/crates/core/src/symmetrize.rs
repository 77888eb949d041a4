//! Twirls that enforce permutation and CHSH symmetry, and the Eve-extended variants.
//!
//! Each round carries three bits `(r1, r2, r3)` selecting the relabelings
//! `T1: a→a⊕1, b→b⊕1`, `T2: x→x⊕1, b→b⊕y` and `T3: y→y⊕1, a→a⊕x`; the
//! element acts as `T3^{r3} ∘ T2^{r2} ∘ T1^{r1}`. All three preserve
//! `a ⊕ b ⊕ xy`, and together they generate a group of order 8 that acts
//! simply transitively on the winning (and on the losing) single-round tuples.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::boxes::{Alphabets, DenseBox, Interface, Layout};
use crate::error::{Error, Result};
use crate::numerics::Field;

/// One single-round tuple `(a, b, x, y)`.
pub type RoundTuple = (usize, usize, usize, usize);

/// Applies the round relabeling selected by the low three bits of `r`.
pub fn twirl_round(r: u8, (mut a, mut b, mut x, mut y): RoundTuple) -> RoundTuple {
    if r & 1 != 0 {
        a ^= 1;
        b ^= 1;
    }
    if r & 2 != 0 {
        x ^= 1;
        b ^= y;
    }
    if r & 4 != 0 {
        y ^= 1;
        a ^= x;
    }
    (a, b, x, y)
}

/// A round permutation together with per-round relabeling bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwirlElement {
    /// Round `i` of the image is round `perm[i]` of the relabeled tuple.
    pub perm: Vec<usize>,
    pub bits: Vec<u8>,
}

impl TwirlElement {
    pub fn identity(n: usize) -> Self {
        Self {
            perm: (0..n).collect(),
            bits: vec![0; n],
        }
    }

    /// Image of the dense index pair `(x, a)` of a CHSH layout (Eve digits untouched).
    pub fn apply(&self, layout: &Layout, x: usize, a: usize) -> (usize, usize) {
        let n = layout.n;
        let read = |i: usize| {
            let (sa, sb) = (layout.site(0, i), layout.site(1, i));
            (
                layout.out_digit(a, sa),
                layout.out_digit(a, sb),
                layout.in_digit(x, sa),
                layout.in_digit(x, sb),
            )
        };
        let relabeled: Vec<RoundTuple> =
            (0..n).map(|i| twirl_round(self.bits[i], read(i))).collect();
        let xs: Vec<usize> = (0..n)
            .map(|i| 2 * relabeled[self.perm[i]].2 + relabeled[self.perm[i]].3)
            .collect();
        let as_: Vec<usize> = (0..n)
            .map(|i| 2 * relabeled[self.perm[i]].0 + relabeled[self.perm[i]].1)
            .collect();
        (
            layout.encode_inputs(&xs, layout.eve_input(x)),
            layout.encode_outputs(&as_, layout.eve_output(a)),
        )
    }
}

fn require_chsh_parties<F>(b: &DenseBox<F>) -> Result<()> {
    if b.alphabets().parties() != [Interface::binary(); 2] {
        return Err(Error::Domain("twirl needs two binary parties".into()));
    }
    Ok(())
}

/// All permutations of `0..n` in lexicographic order (identity first).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(rest: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            rec(rest, prefix, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    out
}

/// Uniform average over all round permutations.
///
/// Computed exactly for every `n` as the mean over each permutation orbit
/// (entries whose multisets of per-round `(x, a)` symbols agree).
pub fn permutation_twirl<F: Field>(b: &DenseBox<F>) -> Result<DenseBox<F>> {
    let l = b.layout();
    let outs = b.num_outputs();
    let key = |i: usize| {
        let (x, a) = (i / outs, i % outs);
        let mut pairs: Vec<(usize, usize)> = (0..l.n)
            .map(|r| (l.round_input(x, r), l.round_output(a, r)))
            .collect();
        pairs.sort_unstable();
        (pairs, l.eve_input(x), l.eve_output(a))
    };
    let keys: Vec<_> = (0..b.entries().len()).into_par_iter().map(key).collect();
    let mut sums: HashMap<&_, (F, usize)> = HashMap::new();
    for (k, v) in keys.iter().zip(b.entries()) {
        let e = sums.entry(k).or_insert_with(|| (F::zero(), 0));
        e.0 += v;
        e.1 += 1;
    }
    let means: HashMap<&_, F> = sums
        .into_iter()
        .map(|(k, (s, c))| (k, s / &F::from_int(c as i64)))
        .collect();
    let entries = keys.iter().map(|k| means[k].clone()).collect();
    DenseBox::new(b.n(), b.alphabets().clone(), entries)
}

/// Average over the 8 relabelings of round `i` only.
fn depolarize_round<F: Field>(b: &DenseBox<F>, i: usize) -> Result<DenseBox<F>> {
    let l = b.layout();
    let (sa, sb) = (l.site(0, i), l.site(1, i));
    let eighth = F::ratio(1, 8);
    DenseBox::from_fn(b.n(), b.alphabets().clone(), |x, a| {
        let t = (
            l.out_digit(a, sa),
            l.out_digit(a, sb),
            l.in_digit(x, sa),
            l.in_digit(x, sb),
        );
        let mut acc = F::zero();
        for r in 0..8u8 {
            let (a2, b2, x2, y2) = twirl_round(r, t);
            let xi = x - t.2 * l.in_stride(sa) - t.3 * l.in_stride(sb)
                + x2 * l.in_stride(sa)
                + y2 * l.in_stride(sb);
            let ai = a - t.0 * l.out_stride(sa) - t.1 * l.out_stride(sb)
                + a2 * l.out_stride(sa)
                + b2 * l.out_stride(sb);
            acc += b.entry(xi, ai);
        }
        acc * &eighth
    })
}

/// Uniform average over all `8ⁿ` per-round relabelings, one round at a time.
pub fn chsh_depolarize<F: Field>(b: &DenseBox<F>) -> Result<DenseBox<F>> {
    require_chsh_parties(b)?;
    let mut out = b.clone();
    for i in 0..b.n() {
        out = depolarize_round(&out, i)?;
    }
    Ok(out)
}

/// Permutation twirl followed by CHSH depolarization.
pub fn full_twirl<F: Field>(b: &DenseBox<F>) -> Result<DenseBox<F>> {
    chsh_depolarize(&permutation_twirl(b)?)
}

/// Order of the twirl group: `8ⁿ`, times `n!` with the permutation layer.
pub fn twirl_group_order(n: usize, include_permutation: bool) -> u128 {
    let perms: u128 = if include_permutation {
        (1..=n as u128).product()
    } else {
        1
    };
    8u128.pow(n as u32) * perms
}

/// Extension whose Eve output is the group element that was applied (index 0 is the identity).
///
/// Eve has a single input. Conditioned on the identity outcome the box is the
/// original one; summed over Eve it is the twirled box.
pub fn depolarize_with_eve<F: Field>(
    b: &DenseBox<F>,
    include_permutation: bool,
) -> Result<DenseBox<F>> {
    require_chsh_parties(b)?;
    if b.alphabets().eve().is_some() {
        return Err(Error::Domain(
            "input box already has an Eve interface".into(),
        ));
    }
    let n = b.n();
    let perms = if include_permutation {
        permutations(n)
    } else {
        vec![(0..n).collect()]
    };
    let order = twirl_group_order(n, include_permutation);
    let bit_count = 8usize.pow(n as u32);
    let alph = b.alphabets().with_eve(Interface::new(1, order as usize))?;
    let ext_layout = Layout::new(&alph, n)?;
    let base = b.layout();
    let weight = F::one() / &F::from_bigint((order as u64).into());
    let elements: Vec<TwirlElement> = (0..order as usize)
        .map(|e| TwirlElement {
            perm: perms[e / bit_count].clone(),
            bits: (0..n)
                .map(|i| ((e % bit_count) >> (3 * i) & 7) as u8)
                .collect(),
        })
        .collect();
    DenseBox::from_fn(n, alph, |x, a| {
        let e = ext_layout.eve_output(a);
        let xs = ext_layout.round_inputs(x);
        let as_ = ext_layout.round_outputs(a);
        let (bx, ba) = (base.encode_inputs(&xs, 0), base.encode_outputs(&as_, 0));
        let (gx, ga) = elements[e].apply(base, bx, ba);
        b.entry(gx, ga).clone() * &weight
    })
}

/// Two-outcome coarse graining of [`depolarize_with_eve`]: outcome 0 is the identity
/// transcript, outcome 1 lumps every other group element.
pub fn depolarize_gated<F: Field>(
    b: &DenseBox<F>,
    include_permutation: bool,
) -> Result<DenseBox<F>> {
    require_chsh_parties(b)?;
    if b.alphabets().eve().is_some() {
        return Err(Error::Domain(
            "input box already has an Eve interface".into(),
        ));
    }
    let twirled = if include_permutation {
        full_twirl(b)?
    } else {
        chsh_depolarize(b)?
    };
    let order = twirl_group_order(b.n(), include_permutation);
    let weight = F::one() / &F::from_bigint((order as u64).into());
    let alph = b.alphabets().with_eve(Interface::new(1, 2))?;
    let l = Layout::new(&alph, b.n())?;
    let base = b.layout();
    DenseBox::from_fn(b.n(), alph, |x, a| {
        let bx = base.encode_inputs(&l.round_inputs(x), 0);
        let ba = base.encode_outputs(&l.round_outputs(a), 0);
        let own = b.entry(bx, ba).clone() * &weight;
        if l.eve_output(a) == 0 {
            own
        } else {
            twirled.entry(bx, ba).clone() - &own
        }
    })
}

/// Conditional box of an extension given Eve input `z` and output `e`, with its probability.
pub fn condition_on_eve<F: Field>(b: &DenseBox<F>, z: usize, e: usize) -> Result<(F, DenseBox<F>)> {
    let eve = b
        .alphabets()
        .eve()
        .ok_or_else(|| Error::Domain("box has no Eve interface".into()))?;
    if z >= eve.inputs || e >= eve.outputs {
        return Err(Error::Domain("Eve symbol out of range".into()));
    }
    let alph: Alphabets = b.alphabets().without_eve();
    let l = Layout::new(&alph, b.n())?;
    let bl = b.layout();
    let joint = |x: usize, a: usize| {
        b.entry(
            bl.encode_inputs(&l.round_inputs(x), z),
            bl.encode_outputs(&l.round_outputs(a), e),
        )
        .clone()
    };
    let pe = (0..l.num_outputs).fold(F::zero(), |acc, a| acc + &joint(0, a));
    if pe.is_zero() {
        return Err(Error::Domain(format!(
            "Eve outcome {e} has probability zero"
        )));
    }
    let cond = DenseBox::from_fn(b.n(), alph, |x, a| joint(x, a) / &pe)?;
    Ok((pe, cond))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::{
        chsh_round_wins, is_chsh_symmetric, q_box, sym_from_dense, zero_output_box, SymBox,
    };
    use crate::numerics::{rat, Rational};

    #[test]
    fn relabelings_preserve_the_win_predicate() {
        for r in 0..8u8 {
            for t in 0..16usize {
                let tup = (t >> 3 & 1, t >> 2 & 1, t >> 1 & 1, t & 1);
                let img = twirl_round(r, tup);
                assert_eq!(
                    chsh_round_wins(tup.0, tup.1, tup.2, tup.3),
                    chsh_round_wins(img.0, img.1, img.2, img.3)
                );
            }
        }
    }

    #[test]
    fn group_acts_simply_transitively_on_wins() {
        let winning: Vec<RoundTuple> = (0..16usize)
            .map(|t| (t >> 3 & 1, t >> 2 & 1, t >> 1 & 1, t & 1))
            .filter(|t| chsh_round_wins(t.0, t.1, t.2, t.3))
            .collect();
        let mut orbit: Vec<RoundTuple> = (0..8).map(|r| twirl_round(r, winning[0])).collect();
        orbit.sort();
        assert_eq!(orbit, winning);
    }

    #[test]
    fn deterministic_box_depolarizes_to_three_quarters() {
        let d = chsh_depolarize(&zero_output_box()).unwrap();
        assert_eq!(
            sym_from_dense(&d).unwrap(),
            SymBox::new(vec![rat(1, 4), rat(3, 4)]).unwrap()
        );
        let ext = depolarize_with_eve(&zero_output_box(), false).unwrap();
        let (pe, cond) = condition_on_eve(&ext, 0, 0).unwrap();
        assert_eq!(pe, rat(1, 8));
        assert_eq!(cond, zero_output_box());
        assert_eq!(ext.eve_marginal(0).unwrap(), d);
    }

    #[test]
    fn iid_box_is_a_fixed_point() {
        let b = q_box(&rat(3, 5)).unwrap().iid_power(2).unwrap();
        assert_eq!(full_twirl(&b).unwrap(), b);
    }

    #[test]
    fn twirled_product_is_symmetric() {
        let b: DenseBox<Rational> = DenseBox::mix(
            &[
                zero_output_box().iid_power(2).unwrap(),
                q_box(&rat(1, 3)).unwrap().iid_power(2).unwrap(),
            ],
            &[rat(1, 3), rat(2, 3)],
        )
        .unwrap();
        assert!(is_chsh_symmetric(&full_twirl(&b).unwrap()));
        let gated = depolarize_gated(&b, true).unwrap();
        assert_eq!(gated.eve_marginal(0).unwrap(), full_twirl(&b).unwrap());
        let (pe, cond) = condition_on_eve(&gated, 0, 0).unwrap();
        assert_eq!((pe, cond), (rat(1, 128), b));
    }
}
