use std::time::{Duration, Instant};

use crate::boxes::{Alphabets, DenseBox, Interface, Layout};
use crate::error::{Error, Result};
use crate::linprog::round_ns_polytope;
use crate::numerics::{binomial, null_space, Field, Rational};
use crate::symmetrize::{condition_on_eve, depolarize_gated, twirl_group_order};

use super::channel::{apply, diamond_over_polytope, distinguishability, Channel};

/// Channels that no round-wise non-signaling box can tell apart, together with
/// the vector they are built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub n: usize,
    pub m: usize,
    /// Channels on Alice's box alone.
    pub e: Channel<Rational>,
    pub f: Channel<Rational>,
    /// Indexed by `w·(m+1) + t`; `max |Δ| = 1`.
    pub delta: Vec<Rational>,
    /// Basis of the `(w, t)` distributions with `P(w,t)/(2^{−m}·binom(m,t))` constant in `t`.
    pub subspace_basis: Vec<Vec<Rational>>,
    /// Basis of the vectors orthogonal to that subspace.
    pub complement_basis: Vec<Vec<Rational>>,
}

fn alice(n: usize) -> Result<(Alphabets, Layout)> {
    let alph = Alphabets::single(2, 2);
    let layout = Layout::new(&alph, n)?;
    Ok((alph, layout))
}

/// `(w, t)` with `t = Σ_{i≤m} x_i` and `w = Σ_{i>m} a_i` for an Alice-only history.
pub fn wt_statistic(layout: &Layout, m: usize, x: usize, a: usize) -> (usize, usize) {
    let t = (0..m).map(|i| layout.round_input(x, i)).sum();
    let w = (m..layout.n).map(|i| layout.round_output(a, i)).sum();
    (w, t)
}

fn wt_len(n: usize, m: usize) -> usize {
    (n - m + 1) * (m + 1)
}

/// Uniform inputs and the deterministic result `(w, t)`, encoded `w·(m+1)+t`.
pub fn statistic_channel(n: usize, m: usize) -> Result<Channel<Rational>> {
    let (alph, layout) = alice(n)?;
    let px = vec![Rational::ratio(1, 1 << n); layout.num_inputs];
    Channel::from_fn(n, alph, px, wt_len(n, m), |x, a, r| {
        let (w, t) = wt_statistic(&layout, m, x, a);
        Rational::from_int(i64::from(r == w * (m + 1) + t))
    })
}

/// Alice outputs all ones when more than half of her inputs are 1, all zeros otherwise.
pub fn distinguisher_box(n: usize) -> Result<DenseBox<Rational>> {
    let (alph, layout) = alice(n)?;
    let ones = (1usize << n) - 1;
    DenseBox::from_fn(n, alph, |x, a| {
        let heavy = 2 * layout.round_inputs(x).iter().sum::<usize>() > n;
        Rational::from_int(i64::from(a == if heavy { ones } else { 0 }))
    })
}

/// [`distinguisher_box`] for Alice with Bob always answering 0.
pub fn distinguisher_box_ab(n: usize) -> Result<DenseBox<Rational>> {
    let qa = distinguisher_box(n)?;
    let alph = Alphabets::chsh();
    let layout = Layout::new(&alph, n)?;
    let la = qa.layout().clone();
    DenseBox::from_fn(n, alph, |x, a| {
        let (xs, as_) = (layout.round_inputs(x), layout.round_outputs(a));
        if as_.iter().any(|s| s & 1 == 1) {
            return Rational::from_int(0);
        }
        let xa: Vec<usize> = xs.iter().map(|s| s >> 1).collect();
        let aa: Vec<usize> = as_.iter().map(|s| s >> 1).collect();
        qa.entry(la.encode_inputs(&xa, 0), la.encode_outputs(&aa, 0))
            .clone()
    })
}

fn check_parameters(n: usize, m: usize) -> Result<()> {
    if n < 2 || 2 * m <= n || m >= n {
        return Err(Error::Precondition(format!(
            "counterexample needs n > 1 and n/2 < m <= n-1 (n = {n}, m = {m})"
        )));
    }
    Ok(())
}

/// Builds `Δ` and the channels `P^E(0|wt) = (1+Δ_wt)/2`, `P^F(0|wt) = (1−Δ_wt)/2`.
///
/// Among the complement basis vectors, rescaled to `max|Δ| = 1`, the one
/// with the largest `|Δ·Q_WT|` for the distinguisher box is used.
pub fn counterexample_channels(n: usize, m: usize) -> Result<Counterexample> {
    check_parameters(n, m)?;
    let len = wt_len(n, m);
    let scale = Rational::from_int(1 << m);
    let subspace_basis: Vec<Vec<Rational>> = (0..=n - m)
        .map(|w| {
            let mut v = vec![Rational::from_int(0); len];
            for t in 0..=m {
                v[w * (m + 1) + t] = Rational::from_bigint(binomial(m as u64, t as u64)?) / &scale;
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let complement_basis = null_space(&subspace_basis, len);
    let q_wt = apply(&statistic_channel(n, m)?, &distinguisher_box(n)?)?;
    let dot = |d: &[Rational]| {
        d.iter()
            .zip(&q_wt)
            .fold(Rational::from_int(0), |acc, (a, b)| acc + a * b)
    };
    let delta = complement_basis
        .iter()
        .map(|v| {
            let peak = v
                .iter()
                .map(Field::magnitude)
                .max()
                .expect("non-empty vector");
            v.iter().map(|c| c.clone() / &peak).collect::<Vec<_>>()
        })
        .map(|d| (dot(&d).magnitude(), d))
        .fold(None::<(Rational, Vec<Rational>)>, |best, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        })
        .filter(|(score, _)| score.is_pos())
        .map(|(_, d)| d)
        .ok_or_else(|| {
            Error::Internal("distinguisher statistics lie in the constrained subspace".into())
        })?;

    let (alph, layout) = alice(n)?;
    let px = vec![Rational::ratio(1, 1 << n); layout.num_inputs];
    let half = Rational::ratio(1, 2);
    let kernel = |sign: i64| {
        let delta = &delta;
        let layout = &layout;
        let half = &half;
        move |x: usize, a: usize, r: usize| {
            let (w, t) = wt_statistic(layout, m, x, a);
            let d = delta[w * (m + 1) + t].clone() * Rational::from_int(sign);
            let v = if r == 0 {
                Rational::from_int(1) + d
            } else {
                Rational::from_int(1) - d
            };
            v * half
        }
    };
    let e = Channel::from_fn(n, alph.clone(), px.clone(), 2, kernel(1))?;
    let f = Channel::from_fn(n, alph, px, 2, kernel(-1))?;
    Ok(Counterexample {
        n,
        m,
        e,
        f,
        delta,
        subspace_basis,
        complement_basis,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleReport {
    pub n: usize,
    pub m: usize,
    /// Maximum distinguishability over round-wise non-signaling boxes.
    pub roundns_value: Rational,
    pub roundns_patterns: u128,
    /// Distinguishability with the distinguisher box and no Eve.
    pub q_value: Rational,
    /// Probability that the twirl applied the identity.
    pub pr_estar: Rational,
    /// `Pr[e*]·q_value`: Eve acts only on `e*` and guesses otherwise.
    pub estar_term: Rational,
    /// Full distinguishability of the gated twirled extension.
    pub twirled_value: Rational,
    pub delta: Vec<Rational>,
    pub elapsed: Duration,
}

/// Runs the three checks for `counterexample_channels(n, m)` with no Eve
/// interface on the round-wise non-signaling polytope.
pub fn verify_counterexample(n: usize, m: usize, pattern_cap: u64) -> Result<CounterexampleReport> {
    verify_counterexample_with(&counterexample_channels(n, m)?, None, pattern_cap)
}

/// The same checks for an arbitrary channel pair on Alice's box.
///
/// The polytope is Alice's: the lifted channels ignore Bob, and any
/// round-wise non-signaling box of both parties has a round-wise
/// non-signaling Alice marginal.
pub fn verify_counterexample_with(
    ce: &Counterexample,
    eve: Option<Interface>,
    pattern_cap: u64,
) -> Result<CounterexampleReport> {
    let start = Instant::now();
    let (n, m) = (ce.n, ce.m);
    let alph = match eve {
        Some(i) => Alphabets::single(2, 2).with_eve(i)?,
        None => Alphabets::single(2, 2),
    };
    let polytope = round_ns_polytope(n, &alph)?;
    let roundns = diamond_over_polytope(&ce.e, &ce.f, &polytope, eve, pattern_cap)?;

    let q_value = distinguishability(&ce.e, &ce.f, &distinguisher_box(n)?)?.value;

    let q_ab = distinguisher_box_ab(n)?;
    let gated = depolarize_gated(&q_ab, true)?;
    let (pr_estar, conditional) = condition_on_eve(&gated, 0, 0)?;
    if conditional != q_ab {
        return Err(Error::Internal(
            "identity transcript does not reproduce the distinguisher box".into(),
        ));
    }
    let order = twirl_group_order(n, true);
    if pr_estar != Rational::from_int(1) / Rational::from_bigint(order.into()) {
        return Err(Error::Internal(format!(
            "Pr[e*] = {pr_estar}, expected 1/{order}"
        )));
    }
    let bob = Interface::binary();
    let (e_ab, f_ab) = (ce.e.with_ignored_party(bob)?, ce.f.with_ignored_party(bob)?);
    let twirled_value = distinguishability(&e_ab, &f_ab, &gated)?.value;
    let estar_term = pr_estar.clone() * &q_value;
    Ok(CounterexampleReport {
        n,
        m,
        roundns_value: roundns.value,
        roundns_patterns: roundns.patterns,
        q_value,
        pr_estar,
        estar_term,
        twirled_value,
        delta: ce.delta.clone(),
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linprog::{lp_solve, Sense};
    use crate::numerics::{int, rat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dimensions_at_three_rounds() {
        let ce = counterexample_channels(3, 2).unwrap();
        assert_eq!(ce.delta.len(), 6);
        assert_eq!(ce.subspace_basis.len(), 2);
        assert_eq!(ce.complement_basis.len(), 4);
        assert_eq!(ce.delta.iter().map(Field::magnitude).max().unwrap(), int(1));
        assert!(counterexample_channels(2, 2).is_err());
        assert!(counterexample_channels(4, 2).is_err());
    }

    #[test]
    fn distinguisher_conditionals() {
        let (n, m) = (3, 2);
        let q = apply(
            &statistic_channel(n, m).unwrap(),
            &distinguisher_box(n).unwrap(),
        )
        .unwrap();
        let p_t = |t: usize| {
            rat(
                binomial(m as u64, t as u64).unwrap().try_into().unwrap(),
                1 << m,
            )
        };
        for t in 0..=m {
            let cond = q[(n - m) * (m + 1) + t].clone() / p_t(t);
            if 2 * t > n {
                assert_eq!(cond, int(1));
            }
            if 2 * t + n < 2 * m {
                assert_eq!(cond, int(0));
            }
        }
    }

    #[test]
    fn round_ns_vertices_make_w_and_t_independent() {
        let (n, m) = (3, 2);
        let ce = counterexample_channels(n, m).unwrap();
        let poly = round_ns_polytope::<Rational>(n, &Alphabets::single(2, 2)).unwrap();
        let stat = statistic_channel(n, m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let c: Vec<Rational> = (0..poly.nvars())
                .map(|_| rat(rng.gen_range(-20..=20), 7))
                .collect();
            let x = lp_solve(&poly, &c, Sense::Maximize)
                .unwrap()
                .witness
                .unwrap();
            let b = DenseBox::new(n, Alphabets::single(2, 2), x).unwrap();
            let pwt = apply(&stat, &b).unwrap();
            let pw = |w: usize| (0..=m).fold(int(0), |acc, t| acc + &pwt[w * (m + 1) + t]);
            let pt = |t: usize| (0..=n - m).fold(int(0), |acc, w| acc + &pwt[w * (m + 1) + t]);
            for w in 0..=n - m {
                for t in 0..=m {
                    assert_eq!(pwt[w * (m + 1) + t], pw(w) * pt(t));
                }
            }
            let dot = ce
                .delta
                .iter()
                .zip(&pwt)
                .fold(int(0), |acc, (d, p)| acc + d * p);
            assert_eq!(dot, int(0));
        }
    }

    #[test]
    fn three_rounds_end_to_end() {
        let r = verify_counterexample(3, 2, 1 << 20).unwrap();
        assert_eq!(r.roundns_value, int(0));
        assert!(r.q_value.is_pos());
        assert_eq!(r.pr_estar, rat(1, 512 * 6));
        assert_eq!(r.estar_term, r.pr_estar.clone() * &r.q_value);
        assert_eq!(r.twirled_value, r.estar_term.clone() * int(2));
        // Without Eve the norm is 2|Δ·Q_WT|.
        let ce = counterexample_channels(3, 2).unwrap();
        let q = apply(
            &statistic_channel(3, 2).unwrap(),
            &distinguisher_box(3).unwrap(),
        )
        .unwrap();
        let dot = ce
            .delta
            .iter()
            .zip(&q)
            .fold(int(0), |acc, (d, p)| acc + d * p);
        assert_eq!(r.q_value, dot.magnitude() * int(2));
    }

    #[test]
    fn identical_channels_give_zeros() {
        let mut ce = counterexample_channels(3, 2).unwrap();
        ce.f = ce.e.clone();
        let r = verify_counterexample_with(&ce, None, 1 << 20).unwrap();
        assert_eq!(
            (r.roundns_value, r.q_value, r.twirled_value),
            (int(0), int(0), int(0))
        );
    }
}
