//! de Finetti boxes for CHSH-symmetric boxes and their certificates.

use num_bigint::BigInt;

use crate::boxes::{sym_from_dense, DenseBox, SymBox};
use crate::error::{Error, Result};
use crate::numerics::{
    binomial_pmf, hypergeometric_pmf, incomplete_beta_qsqrt2, rat, Field, QSqrt2, Rational,
};
use crate::threshold::ChshThreshold;

/// `C = 2/√(2−√2)`, the constant of the second de Finetti bound.
pub fn chsh_constant() -> f64 {
    2.0 / (2.0 - std::f64::consts::SQRT_2).sqrt()
}

/// Dense entry `τ(ab|xy)` of a history winning `k` of `n` rounds:
/// `2^{−n} ∫_{1−w}^{w} p^k(1−p)^{n−k} dp / (2w−1)`.
pub fn tau_chsh_entry(n: usize, k: usize) -> Result<QSqrt2> {
    let integral = incomplete_beta_qsqrt2(n as u64, k as u64)?;
    // 1/(2w−1) = √2
    Ok(integral * &QSqrt2::sqrt2() / &QSqrt2::from_bigint(BigInt::from(1) << n))
}

/// The uniform mixture of `Q(p)^{⊗n}` over `p ∈ [1−w, w]`, as a symmetric box.
pub fn tau_chsh(n: usize) -> Result<SymBox<QSqrt2>> {
    if n == 0 {
        return Err(Error::Domain("tau needs n >= 1".into()));
    }
    let p = (0..=n)
        .map(|k| {
            let c = QSqrt2::from_bigint(crate::numerics::binomial(n as u64, k as u64)?);
            Ok(c * &incomplete_beta_qsqrt2(n as u64, k as u64)? * &QSqrt2::sqrt2())
        })
        .collect::<Result<_>>()?;
    SymBox::new(p)
}

/// Clamps a rational into `[1−w, w]`.
pub fn clamp_to_quantum(p: &Rational) -> QSqrt2 {
    let q = QSqrt2::from(p.clone());
    q.clamp(QSqrt2::chsh_value_complement(), QSqrt2::chsh_value())
}

/// `sup_{p∈[1−w,w]} (½ p^{k/n} (1−p)^{1−k/n})ⁿ = 2^{−n} p̂^k (1−p̂)^{n−k}` with `p̂ = clamp(k/n)`.
pub fn score_sup(n: usize, k: usize) -> Result<QSqrt2> {
    if k > n || n == 0 {
        return Err(Error::Domain(format!(
            "score_sup needs 0 <= k <= n, n >= 1 (n = {n}, k = {k})"
        )));
    }
    let p_hat = clamp_to_quantum(&rat(k as i64, n as i64));
    let q_hat = QSqrt2::from_int(1) - &p_hat;
    Ok(p_hat.powi(k as u64) * &q_hat.powi((n - k) as u64)
        / &QSqrt2::from_bigint(BigInt::from(1) << n))
}

/// Outcome of an entrywise (or per-win-count) comparison `P ≤ prefactor·τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub name: &'static str,
    pub prefactor: QSqrt2,
    /// `max P/(prefactor·τ)`; the bound holds iff this is at most 1.
    pub worst_ratio: QSqrt2,
    /// Win count (or frequency index) attaining the worst ratio.
    pub witness: usize,
    pub pass: bool,
}

/// Certifier for `P(ab|xy) ≤ (n+1)² τ(ab|xy)` at fixed `n`, with τ and the tail bounds cached.
#[derive(Debug, Clone)]
pub struct FirstDeFinetti {
    tau: SymBox<QSqrt2>,
    threshold: ChshThreshold,
}

impl FirstDeFinetti {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            tau: tau_chsh(n)?,
            threshold: ChshThreshold::new(n)?,
        })
    }

    pub fn tau(&self) -> &SymBox<QSqrt2> {
        &self.tau
    }

    pub fn threshold(&self) -> &ChshThreshold {
        &self.threshold
    }

    /// Runs the threshold premise, then compares `p_k ≤ (n+1)² τ_k` exactly.
    pub fn certify<F: Field>(&self, p: &SymBox<F>) -> Result<Certificate> {
        let report = self.threshold.check(p)?;
        if let Some(row) = report.first_failure() {
            return Err(Error::ThresholdPremise {
                k: row.k,
                kind: row.kind.to_string(),
            });
        }
        let n = self.tau.n();
        let prefactor = QSqrt2::from_int(((n + 1) * (n + 1)) as i64);
        let mut worst = (QSqrt2::from_int(0), 0);
        for (k, (pk, tk)) in p.p().iter().zip(self.tau.p()).enumerate() {
            let ratio = pk.to_qsqrt2() / &(prefactor.clone() * tk);
            if ratio > worst.0 {
                worst = (ratio, k);
            }
        }
        Ok(Certificate {
            name: "first-de-finetti",
            pass: worst.0 <= QSqrt2::from_int(1),
            prefactor,
            worst_ratio: worst.0,
            witness: worst.1,
        })
    }
}

pub fn certify_first_definetti<F: Field>(p: &SymBox<F>) -> Result<Certificate> {
    FirstDeFinetti::new(p.n())?.certify(p)
}

/// Dense entry point: checks CHSH symmetry, compresses, then certifies.
pub fn certify_first_definetti_dense<F: Field>(p: &DenseBox<F>) -> Result<Certificate> {
    certify_first_definetti(&sym_from_dense(p)?)
}

/// `Σ_N p_N Q(clamp(N/n))^{⊗k}` as a k-round symmetric box.
pub fn tau_second<F: Field>(p: &SymBox<F>, k: usize) -> Result<SymBox<QSqrt2>> {
    let n = p.n();
    if k == 0 || k > n {
        return Err(Error::Domain(format!(
            "tau_second needs 1 <= k <= n (n = {n}, k = {k})"
        )));
    }
    let mut q = vec![QSqrt2::from_int(0); k + 1];
    for (big_n, pn) in p.p().iter().enumerate() {
        if pn.is_zero() {
            continue;
        }
        let pn = pn.to_qsqrt2();
        let win = clamp_to_quantum(&rat(big_n as i64, n as i64));
        for (j, b) in binomial_pmf(k, &win).into_iter().enumerate() {
            q[j] += &(b * &pn);
        }
    }
    SymBox::new(q)
}

/// `(C√ln(n/k) + 4)√(k/n) + 4k/n`.
pub fn second_definetti_rhs(n: usize, k: usize) -> f64 {
    let r = k as f64 / n as f64;
    (chsh_constant() * (n as f64 / k as f64).ln().sqrt() + 4.0) * r.sqrt() + 4.0 * r
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondReport {
    pub k: usize,
    pub lhs: QSqrt2,
    pub rhs: f64,
    pub pass: bool,
}

/// `‖P_k − τ_k‖₁ ≤ (C√ln(n/k)+4)√(k/n) + 4k/n` for the first-k marginal.
pub fn certify_second_definetti<F: Field>(
    p: &SymBox<F>,
    k: usize,
    tol: f64,
) -> Result<SecondReport> {
    let marginal = p.marginal_first_k(k)?.to_qsqrt2();
    let tau = tau_second(p, k)?;
    let lhs = marginal.distance(&tau)?;
    let rhs = second_definetti_rhs(p.n(), k);
    let pass = lhs.as_f64() <= rhs * (1.0 + tol);
    Ok(SecondReport { k, lhs, rhs, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiaconisFreedmanReport<F> {
    pub k: usize,
    pub lhs: F,
    pub rhs: Rational,
    pub pass: bool,
}

/// `‖Σ_N p_N Hyp(n, N, k) − Σ_N p_N Binom(k, N/n)‖₁ ≤ 4k/n`, exactly.
pub fn diaconis_freedman_check<F: Field>(
    p: &SymBox<F>,
    k: usize,
) -> Result<DiaconisFreedmanReport<F>> {
    let n = p.n();
    if k == 0 || k > n {
        return Err(Error::Domain(format!(
            "check needs 1 <= k <= n (n = {n}, k = {k})"
        )));
    }
    let mut diff = vec![F::zero(); k + 1];
    for (big_n, pn) in p.p().iter().enumerate() {
        if pn.is_zero() {
            continue;
        }
        let hyp = hypergeometric_pmf(n, big_n, k)?;
        let bin = binomial_pmf(k, &rat(big_n as i64, n as i64));
        for j in 0..=k {
            diff[j] += &(pn.clone() * &F::from(hyp[j].clone() - &bin[j]));
        }
    }
    let lhs = diff.iter().fold(F::zero(), |acc, d| acc + &d.magnitude());
    let rhs = rat(4 * k as i64, n as i64);
    let pass = lhs <= F::from(rhs.clone());
    Ok(DiaconisFreedmanReport { k, lhs, rhs, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinomialL1Report {
    pub lhs: Rational,
    pub bound: f64,
    pub pass: bool,
}

/// `‖Binom(k,p) − Binom(k,q)‖₁ ≤ 2√(k/min(q,1−q))·|p−q|`, decided exactly by squaring.
pub fn binom_l1_bound_check(k: usize, p: &Rational, q: &Rational) -> Result<BinomialL1Report> {
    let zero = Rational::from_integer(0.into());
    let one = Rational::from_integer(1.into());
    if *p <= zero || *p >= one || *q <= zero || *q >= one {
        return Err(Error::Domain("binomial bound needs p, q in (0,1)".into()));
    }
    let bp = binomial_pmf(k, p);
    let bq = binomial_pmf(k, q);
    let lhs = bp
        .iter()
        .zip(&bq)
        .fold(zero, |acc, (a, b)| acc + (a - b).magnitude());
    let m = q.clone().min(one - q);
    let diff = p - q;
    let rhs_sq = Rational::from_integer((4 * k).into()) * &diff * &diff / &m;
    let pass = lhs.clone() * &lhs <= rhs_sq;
    let bound = 2.0 * (k as f64 / m.as_f64()).sqrt() * diff.magnitude().as_f64();
    Ok(BinomialL1Report { lhs, bound, pass })
}

/// `min_{β≥0} 2Cβ + 4e^{−2β²−2β√L}`: the optimized constant for `L = ln(n/k)`.
/// Returns `(β*, value)`.
pub fn c_prime_diagnostic(l: f64) -> (f64, f64) {
    let c = chsh_constant();
    let g = |b: f64| 2.0 * c * b + 4.0 * (-2.0 * b * b - 2.0 * b * l.sqrt()).exp();
    let hi = 4.0;
    let steps = 4000;
    let best = (0..=steps)
        .map(|i| hi * i as f64 / steps as f64)
        .min_by(|a, b| g(*a).total_cmp(&g(*b)))
        .unwrap_or(0.0);
    let (mut lo, mut up) = (
        (best - hi / steps as f64).max(0.0),
        best + hi / steps as f64,
    );
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = up - phi * (up - lo);
        let m2 = lo + phi * (up - lo);
        if g(m1) <= g(m2) {
            up = m2;
        } else {
            lo = m1;
        }
    }
    let beta = 0.5 * (lo + up);
    [beta, best, 0.0]
        .into_iter()
        .map(|b| (b, g(b)))
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.total_cmp(&y.0)))
        .unwrap_or((0.0, g(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::dense_from_sym;
    use crate::numerics::{int, Rational};

    #[test]
    fn single_round_tau_is_uniform() {
        let t = tau_chsh(1).unwrap();
        assert_eq!(t.p(), &[QSqrt2::from(rat(1, 2)), QSqrt2::from(rat(1, 2))]);
        let d = dense_from_sym(&t).unwrap();
        assert!(d.entries().iter().all(|e| *e == QSqrt2::from(rat(1, 4))));
        assert_eq!(tau_chsh_entry(1, 1).unwrap(), QSqrt2::from(rat(1, 4)));
        // τ(ab|xy) = 1/4 ≥ sup f / (n+1) = w/4
        assert!(tau_chsh_entry(1, 1).unwrap() >= score_sup(1, 1).unwrap() / &QSqrt2::from_int(2));
        assert_eq!(
            score_sup(1, 1).unwrap(),
            QSqrt2::chsh_value() / &QSqrt2::from_int(2)
        );
    }

    #[test]
    fn score_sup_cases() {
        assert_eq!(score_sup(4, 2).unwrap(), QSqrt2::from(rat(1, 256)));
        let w = QSqrt2::chsh_value();
        assert_eq!(score_sup(3, 0).unwrap(), w.powi(3) / &QSqrt2::from_int(8));
        assert_eq!(score_sup(3, 3).unwrap(), score_sup(3, 0).unwrap());
    }

    #[test]
    fn tau_certifies_itself_and_pr_is_rejected() {
        let t = tau_chsh(5).unwrap();
        let c = certify_first_definetti(&t).unwrap();
        assert!(c.pass);
        assert_eq!(c.worst_ratio, QSqrt2::from(rat(1, 36)));
        let pr: SymBox<Rational> = SymBox::point_mass(5, 5).unwrap();
        assert!(matches!(
            certify_first_definetti(&pr),
            Err(Error::ThresholdPremise { k: 5, .. })
        ));
        let q = SymBox::iid(8, &rat(85, 100)).unwrap();
        assert!(certify_first_definetti(&q).unwrap().pass);
    }

    #[test]
    fn tau_second_cases() {
        let top: SymBox<Rational> = SymBox::point_mass(6, 6).unwrap();
        assert_eq!(
            tau_second(&top, 3).unwrap(),
            SymBox::iid(3, &QSqrt2::chsh_value()).unwrap()
        );
        let mid: SymBox<Rational> = SymBox::point_mass(6, 3).unwrap();
        assert_eq!(
            tau_second(&mid, 2).unwrap(),
            SymBox::iid(2, &QSqrt2::from(rat(1, 2))).unwrap()
        );
        let r = certify_second_definetti(&top, 2, 1e-9).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn diaconis_freedman_examples() {
        let p = SymBox::iid(7, &rat(2, 3)).unwrap();
        assert_eq!(diaconis_freedman_check(&p, 1).unwrap().lhs, int(0));
        // hypergeometric (1/6, 2/3, 1/6) against binomial (1/4, 1/2, 1/4)
        let mid: SymBox<Rational> = SymBox::point_mass(4, 2).unwrap();
        let r = diaconis_freedman_check(&mid, 2).unwrap();
        assert_eq!(r.lhs, rat(1, 3));
        assert!(r.pass && r.rhs == int(2));
    }

    #[test]
    fn binomial_bound_cases() {
        let r = binom_l1_bound_check(5, &rat(1, 3), &rat(1, 3)).unwrap();
        assert!(r.pass && r.lhs == int(0));
        let r = binom_l1_bound_check(1, &rat(3, 4), &rat(1, 2)).unwrap();
        assert_eq!(r.lhs, rat(1, 2));
        assert!(r.pass);
        assert!(
            binom_l1_bound_check(20, &rat(8, 10), &rat(7, 10))
                .unwrap()
                .pass
        );
    }

    #[test]
    fn c_prime_values() {
        let (b, v) = c_prime_diagnostic(10.0);
        assert!((v - 2.0327).abs() < 1e-3 && (b - 0.2526).abs() < 1e-3);
        let (_, v) = c_prime_diagnostic(100.0);
        assert!((v - 0.9647).abs() < 1e-3);
        let (b, v) = c_prime_diagnostic(0.0);
        assert!(b == 0.0 && (v - 4.0).abs() < 1e-12);
    }
}
