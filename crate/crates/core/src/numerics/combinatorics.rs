use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::field::{Field, Rational};
use super::QSqrt2;
use crate::error::{Error, Result};

/// Counts `(k_1, …, k_d)` of how many rounds fall into each predicate class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrequencyVector {
    counts: Vec<usize>,
}

impl FrequencyVector {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Domain("frequency vector needs d >= 1".into()));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn d(&self) -> usize {
        self.counts.len()
    }

    /// The empirical frequencies `k_r / n` (all zero when `n = 0`).
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n().max(1) as f64;
        self.counts.iter().map(|&k| k as f64 / n).collect()
    }
}

/// Binomial coefficient; errors when `k > n`.
pub fn binomial(n: u64, k: u64) -> Result<BigInt> {
    if k > n {
        return Err(Error::Domain(format!("binomial({n}, {k}) needs k <= n")));
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    Ok(acc)
}

/// `n! / (k_1! ⋯ k_d!)`; errors unless the counts sum to `n`.
pub fn multinomial(n: u64, counts: &[usize]) -> Result<BigInt> {
    let total: u64 = counts.iter().map(|&k| k as u64).sum();
    if total != n {
        return Err(Error::Domain(format!(
            "multinomial counts sum to {total}, expected {n}"
        )));
    }
    let mut acc = BigInt::one();
    let mut rest = n;
    for &k in counts {
        acc *= binomial(rest, k as u64)?;
        rest -= k as u64;
    }
    Ok(acc)
}

/// Both sides of the multinomial sandwich together with the exact coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialSandwich {
    pub lower: Rational,
    pub value: BigInt,
    pub upper: Rational,
}

impl MultinomialSandwich {
    pub fn holds(&self) -> bool {
        let v = Rational::from_integer(self.value.clone());
        self.lower <= v && v <= self.upper
    }
}

/// `(n+1)^{-(d-1)} ∏(n/k_r)^{k_r} ≤ multinomial ≤ ∏(n/k_r)^{k_r}`, evaluated exactly.
pub fn multinomial_sandwich(counts: &FrequencyVector) -> Result<MultinomialSandwich> {
    let n = counts.n() as u64;
    let value = multinomial(n, counts.counts())?;
    let mut upper = Rational::one();
    for &k in counts.counts() {
        if k > 0 {
            upper *= Rational::new(BigInt::from(n), BigInt::from(k)).powi(k as u64);
        }
    }
    let lower =
        upper.clone() / Rational::from_integer(BigInt::from(n + 1)).powi(counts.d() as u64 - 1);
    Ok(MultinomialSandwich {
        lower,
        value,
        upper,
    })
}

/// `1 / ((n+1)·binomial(n,k))`, the closed form of `∫₀¹ t^k (1-t)^{n-k} dt`.
pub fn beta_integral_closed(n: u64, k: u64) -> Result<Rational> {
    let b = binomial(n, k)?;
    Ok(Rational::new(BigInt::one(), b * (n + 1)))
}

/// Coefficients `c_j` of the antiderivative `Σ_j c_j p^j` of `p^k (1-p)^{n-k}`.
fn antiderivative(n: u64, k: u64) -> Result<Vec<Rational>> {
    if k > n {
        return Err(Error::Domain(format!(
            "integrand exponent k = {k} exceeds n = {n}"
        )));
    }
    let mut coeffs = vec![Rational::zero(); (n + 2) as usize];
    for j in 0..=(n - k) {
        let mut c = Rational::new(binomial(n - k, j)?, BigInt::from(k + j + 1));
        if j % 2 == 1 {
            c = -c;
        }
        coeffs[(k + j + 1) as usize] = c;
    }
    Ok(coeffs)
}

fn horner<F: Field>(coeffs: &[Rational], x: &F) -> F {
    coeffs
        .iter()
        .rev()
        .fold(F::zero(), |acc, c| acc * x + &F::from(c.clone()))
}

/// `∫₀¹ t^k (1-t)^{n-k} dt` by expanding the polynomial antiderivative.
pub fn beta_integral_expanded(n: u64, k: u64) -> Result<Rational> {
    let coeffs = antiderivative(n, k)?;
    Ok(horner(&coeffs, &Rational::one()) - horner(&coeffs, &Rational::zero()))
}

/// The Beta integral, computed both ways; errors if the two paths disagree.
pub fn beta_identity(n: u64, k: u64) -> Result<Rational> {
    let closed = beta_integral_closed(n, k)?;
    let expanded = beta_integral_expanded(n, k)?;
    if closed != expanded {
        return Err(Error::Internal(format!(
            "beta integral mismatch at n={n}, k={k}: {closed} vs {expanded}"
        )));
    }
    Ok(closed)
}

/// `∫_{1-w}^{w} p^k (1-p)^{n-k} dp` exactly, with `w = (2+√2)/4`.
pub fn incomplete_beta_qsqrt2(n: u64, k: u64) -> Result<QSqrt2> {
    let coeffs = antiderivative(n, k)?;
    let hi = horner(&coeffs, &QSqrt2::chsh_value());
    let lo = horner(&coeffs, &QSqrt2::chsh_value_complement());
    Ok(hi - lo)
}

/// Binomial pmf `(binomial(k,j) p^j (1-p)^{k-j})_{j=0..k}` in any field.
pub fn binomial_pmf<F: Field>(k: usize, p: &F) -> Vec<F> {
    let q = F::one() - p;
    let mut p_pows = Vec::with_capacity(k + 1);
    let mut q_pows = Vec::with_capacity(k + 1);
    p_pows.push(F::one());
    q_pows.push(F::one());
    for i in 0..k {
        p_pows.push(p_pows[i].clone() * p);
        q_pows.push(q_pows[i].clone() * &q);
    }
    (0..=k)
        .map(|j| {
            let c = F::from_bigint(binomial(k as u64, j as u64).expect("j <= k"));
            c * &p_pows[j] * &q_pows[k - j]
        })
        .collect()
}

/// Hypergeometric pmf over `j = 0..=k`: draws of `k` from `n` items of which `big_n` are marked.
pub fn hypergeometric_pmf(n: usize, big_n: usize, k: usize) -> Result<Vec<Rational>> {
    if big_n > n || k > n {
        return Err(Error::Domain(format!(
            "hypergeometric needs N <= n and k <= n (n={n}, N={big_n}, k={k})"
        )));
    }
    let total = binomial(n as u64, k as u64)?;
    (0..=k)
        .map(|j| {
            if j > big_n || k - j > n - big_n {
                return Ok(Rational::zero());
            }
            let num =
                binomial(big_n as u64, j as u64)? * binomial((n - big_n) as u64, (k - j) as u64)?;
            Ok(Rational::new(num, total.clone()))
        })
        .collect()
}

/// All compositions of `n` into `d` non-negative parts, in lexicographic order.
pub fn compositions(n: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(rest);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=rest {
            prefix.push(k);
            rec(rest - k, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if d > 0 {
        rec(n, d, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, rat};

    #[test]
    fn small_coefficients() {
        assert_eq!(binomial(2, 1).unwrap(), BigInt::from(2));
        assert_eq!(binomial(7, 0).unwrap(), BigInt::one());
        assert_eq!(multinomial(4, &[2, 1, 1]).unwrap(), BigInt::from(12));
        assert!(binomial(2, 3).is_err());
        assert!(multinomial(4, &[2, 1]).is_err());
    }

    #[test]
    fn sandwich_examples() {
        let s = multinomial_sandwich(&FrequencyVector::new(vec![1, 1]).unwrap()).unwrap();
        assert_eq!((s.lower.clone(), s.upper.clone()), (rat(4, 3), int(4)));
        assert_eq!(s.value, BigInt::from(2));
        let s = multinomial_sandwich(&FrequencyVector::new(vec![3, 0]).unwrap()).unwrap();
        // the (n+1)^{-(d-1)} factor applies with d = 2 even though one part is empty
        assert_eq!(
            (s.lower, s.value, s.upper),
            (rat(1, 4), BigInt::one(), int(1))
        );
        // (4/2)^2 (4/1)(4/1) = 64, divided by 5^2
        let s = multinomial_sandwich(&FrequencyVector::new(vec![2, 1, 1]).unwrap()).unwrap();
        assert_eq!((s.lower.clone(), s.upper.clone()), (rat(64, 25), int(64)));
        assert!(s.holds());
    }

    #[test]
    fn beta_values() {
        assert_eq!(beta_identity(2, 1).unwrap(), rat(1, 6));
        assert_eq!(beta_identity(0, 0).unwrap(), int(1));
        assert_eq!(beta_identity(5, 0).unwrap(), rat(1, 6));
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        let quarter_root2 = QSqrt2::new(int(0), rat(1, 4));
        assert_eq!(incomplete_beta_qsqrt2(1, 1).unwrap(), quarter_root2);
        assert_eq!(
            incomplete_beta_qsqrt2(0, 0).unwrap(),
            QSqrt2::new(int(0), rat(1, 2))
        );
    }

    #[test]
    fn pmfs_normalize() {
        let b = binomial_pmf(5, &rat(1, 3));
        assert_eq!(b.iter().fold(int(0), |a, x| a + x), int(1));
        let h = hypergeometric_pmf(2, 1, 1).unwrap();
        assert_eq!(h, vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(compositions(2, 2), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
    }
}
