//! CHSH-specific views of two-party binary boxes.

use super::alphabets::Alphabets;
use super::dense::DenseBox;
use super::predicate::InputDist;
use super::symbox::{win_multiplicity, SymBox};
use crate::error::{Error, Result};
use crate::numerics::{Field, Rational};

/// Rounds won by outputs `a` on inputs `x` of an n-round CHSH table (no Eve).
///
/// Alice's bits form the high half of each index and Bob's the low half.
pub fn chsh_wins(n: usize, x: usize, a: usize) -> usize {
    let mask = (1usize << n) - 1;
    let (xs, ys) = (x >> n, x & mask);
    let (al, bo) = (a >> n, a & mask);
    let lost = (al ^ bo ^ (xs & ys)) & mask;
    n - lost.count_ones() as usize
}

/// Whether single-round outputs `(a, b)` win on inputs `(x, y)`.
pub fn chsh_round_wins(a: usize, b: usize, x: usize, y: usize) -> bool {
    (a ^ b) == (x & y)
}

fn require_chsh<F>(b: &DenseBox<F>) -> Result<()> {
    if !b.alphabets().is_chsh() {
        return Err(Error::Domain(
            "operation needs two binary parties and no Eve".into(),
        ));
    }
    Ok(())
}

/// First pair of entries with equal win count but different value.
pub fn chsh_symmetry_violation<F: Field>(b: &DenseBox<F>) -> Result<Option<(usize, usize)>> {
    require_chsh(b)?;
    let n = b.n();
    let outs = b.num_outputs();
    let mut first: Vec<Option<usize>> = vec![None; n + 1];
    for (i, v) in b.entries().iter().enumerate() {
        let k = chsh_wins(n, i / outs, i % outs);
        match first[k] {
            None => first[k] = Some(i),
            Some(j) if b.entries()[j] != *v => return Ok(Some((j, i))),
            Some(_) => {}
        }
    }
    Ok(None)
}

pub fn is_chsh_symmetric<F: Field>(b: &DenseBox<F>) -> bool {
    matches!(chsh_symmetry_violation(b), Ok(None))
}

/// Compresses a CHSH-symmetric box to its win-count distribution.
pub fn sym_from_dense<F: Field>(b: &DenseBox<F>) -> Result<SymBox<F>> {
    if let Some((first, second)) = chsh_symmetry_violation(b)? {
        return Err(Error::NotChshSymmetric { first, second });
    }
    let n = b.n();
    let outs = b.num_outputs();
    let mut p = vec![F::zero(); n + 1];
    let mut seen = vec![false; n + 1];
    for a in 0..outs {
        let k = chsh_wins(n, 0, a);
        if !seen[k] {
            seen[k] = true;
            p[k] = b.entry(0, a).clone() * &F::from_bigint(win_multiplicity(n, k));
        }
    }
    SymBox::new(p)
}

/// Expands a win-count distribution to the dense CHSH table.
pub fn dense_from_sym<F: Field>(s: &SymBox<F>) -> Result<DenseBox<F>> {
    let n = s.n();
    Alphabets::chsh().dense_size(n)?;
    let per_k: Vec<F> = (0..=n).map(|k| s.entry(k)).collect();
    DenseBox::from_fn(n, Alphabets::chsh(), |x, a| {
        per_k[chsh_wins(n, x, a)].clone()
    })
}

/// Single-round box winning with probability `p`: `p/2` on winning cells, `(1−p)/2` otherwise.
pub fn q_box<F: Field>(p: &F) -> Result<DenseBox<F>> {
    if p.is_neg() || *p > F::one() {
        return Err(Error::Domain(format!("win probability {p} outside [0,1]")));
    }
    let half = F::ratio(1, 2);
    let win = p.clone() * &half;
    let lose = (F::one() - p) * &half;
    DenseBox::from_fn(1, Alphabets::chsh(), |x, a| {
        if chsh_wins(1, x, a) == 1 {
            win.clone()
        } else {
            lose.clone()
        }
    })
}

/// The Popescu–Rohrlich box: `a ⊕ b = xy` with uniform marginals.
pub fn pr_box<F: Field>() -> DenseBox<F> {
    q_box(&F::one()).expect("1 is a valid win probability")
}

/// `Pr[K = k]` for `k = 0..n`, with inputs drawn from `μ^{⊗n}`.
pub fn win_distribution<F: Field>(b: &DenseBox<F>, mu: &InputDist<F>) -> Result<Vec<F>> {
    require_chsh(b)?;
    if mu.round_inputs() != 4 {
        return Err(Error::Shape(
            "CHSH input distribution must have 4 symbols".into(),
        ));
    }
    let n = b.n();
    let layout = b.layout();
    let mut dist = vec![F::zero(); n + 1];
    for x in 0..b.num_inputs() {
        let px = mu.prob(&layout.round_inputs(x));
        if px.is_zero() {
            continue;
        }
        for (a, v) in b.row(x).iter().enumerate() {
            dist[chsh_wins(n, x, a)] += &(px.clone() * v);
        }
    }
    Ok(dist)
}

/// Deterministic single-round box with `a = b = 0`; wins on three of four inputs.
pub fn zero_output_box() -> DenseBox<Rational> {
    DenseBox::from_fn(1, Alphabets::chsh(), |_, a| {
        Rational::from_integer((a == 0).into())
    })
    .expect("deterministic box is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, rat, QSqrt2};

    #[test]
    fn win_counting() {
        // x = y = 1, a = 1, b = 0 wins; a = b = 0 loses
        assert_eq!(chsh_wins(1, 0b11, 0b10), 1);
        assert_eq!(chsh_wins(1, 0b11, 0b00), 0);
        assert_eq!(chsh_wins(3, 0, 0), 3);
    }

    #[test]
    fn q_box_entries() {
        let u: DenseBox<Rational> = DenseBox::uniform(1, Alphabets::chsh()).unwrap();
        assert_eq!(q_box(&rat(1, 2)).unwrap(), u);
        let qw = q_box(&QSqrt2::chsh_value()).unwrap();
        assert_eq!(*qw.entry(0, 0), QSqrt2::new(rat(1, 4), rat(1, 8)));
        assert!(pr_box::<Rational>().is_nonsignaling());
    }

    #[test]
    fn round_trip_single_round() {
        let s = SymBox::new(vec![rat(1, 2), rat(1, 2)]).unwrap();
        let d = dense_from_sym(&s).unwrap();
        assert!(d.entries().iter().all(|v| *v == rat(1, 4)));
        assert_eq!(sym_from_dense(&d).unwrap(), s);
        let pr: SymBox<Rational> =
            sym_from_dense(&pr_box::<Rational>().iid_power(3).unwrap()).unwrap();
        assert_eq!(pr, SymBox::point_mass(3, 3).unwrap());
    }

    #[test]
    fn non_symmetric_box_is_rejected() {
        let z = zero_output_box();
        assert!(matches!(
            sym_from_dense(&z),
            Err(Error::NotChshSymmetric { .. })
        ));
        let d = q_box(&rat(3, 4)).unwrap().iid_power(2).unwrap();
        assert_eq!(*d.entry(0, 0), rat(9, 64));
        assert_eq!(
            win_distribution(&d, &InputDist::uniform(4)).unwrap(),
            vec![rat(1, 16), rat(6, 16), rat(9, 16)]
        );
        assert_eq!(
            int(1),
            win_distribution(&d, &InputDist::uniform(4))
                .unwrap()
                .into_iter()
                .fold(int(0), |a, b| a + b)
        );
    }
}
