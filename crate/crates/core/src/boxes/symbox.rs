use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::numerics::{binomial, binomial_pmf, hypergeometric_pmf, Field, QSqrt2, Rational};

/// A CHSH-symmetric n-round box stored as its win-count distribution `(p_0, …, p_n)`.
///
/// `p_k = binomial(n,k)·2ⁿ·P(ab|xy)` for any `(a,b,x,y)` winning exactly `k` rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymBox<F> {
    p: Vec<F>,
}

impl<F: Field> SymBox<F> {
    pub fn new(p: Vec<F>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Domain("a symmetric box needs p_0..p_n".into()));
        }
        if let Some(index) = p.iter().position(|v| v.is_neg()) {
            return Err(Error::NegativeEntry { index });
        }
        let s = p.iter().fold(F::zero(), |acc, v| acc + v);
        if !s.is_one() {
            return Err(Error::Normalization {
                input: 0,
                sum: s.to_string(),
            });
        }
        Ok(Self { p })
    }

    pub fn n(&self) -> usize {
        self.p.len() - 1
    }

    pub fn p(&self) -> &[F] {
        &self.p
    }

    pub fn into_p(self) -> Vec<F> {
        self.p
    }

    /// `Q(p)^{⊗n}`: binomial win counts.
    pub fn iid(n: usize, win: &F) -> Result<Self> {
        if win.is_neg() || *win > F::one() {
            return Err(Error::Domain(format!(
                "win probability {win} outside [0,1]"
            )));
        }
        Self::new(binomial_pmf(n, win))
    }

    pub fn point_mass(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::Domain(format!("win count {k} exceeds n = {n}")));
        }
        let mut p = vec![F::zero(); n + 1];
        p[k] = F::one();
        Self::new(p)
    }

    pub fn mix(boxes: &[Self], weights: &[F]) -> Result<Self> {
        let first = boxes
            .first()
            .ok_or_else(|| Error::Domain("mix of no boxes".into()))?;
        if boxes.len() != weights.len() || boxes.iter().any(|b| b.n() != first.n()) {
            return Err(Error::Shape(
                "mixture components must share n and have one weight each".into(),
            ));
        }
        if weights.iter().any(|w| w.is_neg()) {
            return Err(Error::Domain("mixture weights must be non-negative".into()));
        }
        let p = (0..=first.n())
            .map(|k| {
                boxes
                    .iter()
                    .zip(weights)
                    .fold(F::zero(), |acc, (b, w)| acc + &(b.p[k].clone() * w))
            })
            .collect();
        Self::new(p)
    }

    /// Probability of a single dense entry winning exactly `k` rounds.
    pub fn entry(&self, k: usize) -> F {
        let n = self.n();
        let mult = binomial(n as u64, k as u64).expect("k <= n") << n;
        self.p[k].clone() / &F::from_bigint(mult)
    }

    /// `‖P_W − Q_W‖₁`.
    pub fn distance(&self, other: &Self) -> Result<F> {
        if self.n() != other.n() {
            return Err(Error::Shape("symmetric boxes have different n".into()));
        }
        Ok(self
            .p
            .iter()
            .zip(&other.p)
            .fold(F::zero(), |acc, (a, b)| acc + &(a.clone() - b).magnitude()))
    }

    /// `p_k → p_{n−k}`.
    pub fn mirrored(&self) -> Self {
        Self {
            p: self.p.iter().rev().cloned().collect(),
        }
    }

    /// Win-count law of the first `k` rounds (hypergeometric mixing).
    pub fn marginal_first_k(&self, k: usize) -> Result<Self> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(Error::Domain(format!(
                "marginal needs 1 <= k <= n, got k = {k}, n = {n}"
            )));
        }
        let mut q = vec![F::zero(); k + 1];
        for (big_n, pn) in self.p.iter().enumerate() {
            if pn.is_zero() {
                continue;
            }
            for (j, h) in hypergeometric_pmf(n, big_n, k)?.into_iter().enumerate() {
                if !h.is_zero() {
                    q[j] += &(pn.clone() * &F::from(h));
                }
            }
        }
        Self::new(q)
    }

    pub fn to_qsqrt2(&self) -> SymBox<QSqrt2> {
        SymBox {
            p: self.p.iter().map(Field::to_qsqrt2).collect(),
        }
    }

    pub fn to_rational(&self) -> Option<SymBox<Rational>> {
        let p = self
            .p
            .iter()
            .map(Field::as_rational)
            .collect::<Option<Vec<_>>>()?;
        Some(SymBox { p })
    }
}

/// `binomial(n,k)·2ⁿ`, the number of dense entries per input winning `k` rounds.
pub fn win_multiplicity(n: usize, k: usize) -> BigInt {
    binomial(n as u64, k as u64).expect("k <= n") << n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, rat};

    #[test]
    fn distances_and_marginals() {
        let a: SymBox<Rational> = SymBox::point_mass(1, 0).unwrap();
        let b = SymBox::point_mass(1, 1).unwrap();
        assert_eq!(a.distance(&b).unwrap(), int(2));
        let mid = SymBox::new(vec![int(0), int(1), int(0)]).unwrap();
        assert_eq!(
            mid.marginal_first_k(1).unwrap().p(),
            &[rat(1, 2), rat(1, 2)]
        );
        let top: SymBox<Rational> = SymBox::point_mass(5, 5).unwrap();
        assert_eq!(
            top.marginal_first_k(3).unwrap(),
            SymBox::point_mass(3, 3).unwrap()
        );
        assert_eq!(top.marginal_first_k(5).unwrap(), top);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SymBox::new(vec![rat(1, 2), rat(1, 3)]).is_err());
        assert!(SymBox::new(vec![rat(3, 2), rat(-1, 2)]).is_err());
        assert!(SymBox::<Rational>::iid(3, &rat(3, 2)).is_err());
    }
}
