use num_bigint::BigInt;

use super::combinatorics::FrequencyVector;
use super::field::Field;
use crate::error::{Error, Result};

const SIMPLEX_SLACK: f64 = 1e-9;

fn check_distribution(v: &[f64], name: &str) -> Result<()> {
    if v.iter()
        .any(|&x| !(-SIMPLEX_SLACK..=1.0 + SIMPLEX_SLACK).contains(&x))
    {
        return Err(Error::Domain(format!("{name} has an entry outside [0,1]")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_SLACK * v.len().max(1) as f64 {
        return Err(Error::Domain(format!("{name} sums to {s}, expected 1")));
    }
    Ok(())
}

/// Relative entropy `D(f‖g) = Σ f_r ln(f_r/g_r)` in nats, with `0·ln(0/g) = 0`.
pub fn rel_entropy(f: &[f64], g: &[f64]) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::Shape(format!(
            "rel_entropy: lengths {} and {}",
            f.len(),
            g.len()
        )));
    }
    check_distribution(f, "f")?;
    check_distribution(g, "g")?;
    let mut d = 0.0;
    for (r, (&fr, &gr)) in f.iter().zip(g).enumerate() {
        if fr <= 0.0 {
            continue;
        }
        if gr <= 0.0 {
            return Err(Error::SupportViolation { index: r });
        }
        d += fr * (fr / gr).ln();
    }
    Ok(d)
}

/// `e^{-n D(k/n ‖ g)} = ∏_r (n g_r / k_r)^{k_r}`, exactly in the field of `g`.
pub fn exact_exp_neg_nd<F: Field>(counts: &FrequencyVector, g: &[F]) -> Result<F> {
    if counts.d() != g.len() {
        return Err(Error::Shape(format!(
            "exp(-nD): {} counts but {} reference probabilities",
            counts.d(),
            g.len()
        )));
    }
    let n = F::from_bigint(BigInt::from(counts.n()));
    let mut acc = F::one();
    for (r, (&k, gr)) in counts.counts().iter().zip(g).enumerate() {
        if k == 0 {
            continue;
        }
        if !gr.is_pos() {
            return Err(Error::SupportViolation { index: r });
        }
        let base = n.clone() * gr / &F::from_bigint(BigInt::from(k));
        acc *= &base.powi(k as u64);
    }
    Ok(acc)
}

/// Pinsker and reverse-Pinsker inequalities for a pair of Bernoulli laws.
#[derive(Debug, Clone, PartialEq)]
pub struct PinskerReport {
    pub l1: f64,
    pub divergence: f64,
    pub pinsker_bound: f64,
    pub reverse_bound: f64,
    pub holds: bool,
}

/// Checks `‖Ber(p)−Ber(q)‖₁ ≤ √(2D)` and `D ≤ ‖Ber(p)−Ber(q)‖₁² / min(q, 1−q)`.
pub fn pinsker_pair_check(p: f64, q: f64, tol: f64) -> Result<PinskerReport> {
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "pinsker check needs p, q in (0,1), got {p}, {q}"
        )));
    }
    let l1 = 2.0 * (p - q).abs();
    let divergence = rel_entropy(&[p, 1.0 - p], &[q, 1.0 - q])?;
    let pinsker_bound = (2.0 * divergence).sqrt();
    let reverse_bound = l1 * l1 / q.min(1.0 - q);
    let holds =
        l1 <= pinsker_bound * (1.0 + tol) + tol && divergence <= reverse_bound * (1.0 + tol) + tol;
    Ok(PinskerReport {
        l1,
        divergence,
        pinsker_bound,
        reverse_bound,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, rat, Rational};

    #[test]
    fn entropy_examples() {
        assert_eq!(rel_entropy(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert!((rel_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        // mpmath, 50 digits: 0.13081203594113695912920180623371771041011778400681
        let d = rel_entropy(&[0.75, 0.25], &[0.5, 0.5]).unwrap();
        assert!((d - 0.130_812_035_941_136_96).abs() < 1e-15);
        assert_eq!(
            rel_entropy(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::SupportViolation { index: 1 })
        );
    }

    #[test]
    fn exact_examples() {
        let two_zero = FrequencyVector::new(vec![2, 0]).unwrap();
        assert_eq!(
            exact_exp_neg_nd(&two_zero, &[rat(3, 4), rat(1, 4)]).unwrap(),
            rat(9, 16)
        );
        let balanced = FrequencyVector::new(vec![1, 1]).unwrap();
        assert_eq!(
            exact_exp_neg_nd(&balanced, &[rat(1, 2), rat(1, 2)]).unwrap(),
            int(1)
        );
        let c = FrequencyVector::new(vec![3, 4]).unwrap();
        assert_eq!(
            exact_exp_neg_nd(&c, &[rat(3, 7), rat(4, 7)]).unwrap(),
            int(1)
        );
        assert!(exact_exp_neg_nd::<Rational>(&balanced, &[int(1), int(0)]).is_err());
    }

    #[test]
    fn pinsker_examples() {
        let r = pinsker_pair_check(0.5, 0.5, 1e-9).unwrap();
        assert_eq!((r.l1, r.divergence), (0.0, 0.0));
        assert!(pinsker_pair_check(0.9, 0.5, 1e-9).unwrap().holds);
        assert!(pinsker_pair_check(0.6, 0.4, 1e-9).unwrap().holds);
    }
}
