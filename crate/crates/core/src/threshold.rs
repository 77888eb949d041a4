//! Threshold bounds: exponential tails of the CHSH win count and their general-predicate analogue.

use num_traits::{One, Zero};

use crate::boxes::{SymBox, SymmetricProfile};
use crate::error::{Error, Result};
use crate::numerics::{exact_exp_neg_nd, rel_entropy, Field, FrequencyVector, QSqrt2, Rational};

/// Which tail a threshold row constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    /// `Σ_{l≥k} p_l` for `k > wn`.
    Upper,
    /// `Σ_{l≤k} p_l` for `k < (1−w)n`.
    Lower,
    /// `p_k ≤ 1` in between.
    Middle,
}

impl std::fmt::Display for TailKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TailKind::Upper => "upper",
            TailKind::Lower => "lower",
            TailKind::Middle => "middle",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub k: usize,
    pub kind: TailKind,
    pub observed: QSqrt2,
    pub bound: QSqrt2,
}

impl ThresholdRow {
    pub fn slack(&self) -> QSqrt2 {
        self.bound.clone() - &self.observed
    }

    pub fn holds(&self) -> bool {
        self.observed <= self.bound
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub rows: Vec<ThresholdRow>,
    pub pass: bool,
    /// Row index with the smallest slack.
    pub worst: usize,
}

impl ThresholdReport {
    fn from_rows(rows: Vec<ThresholdRow>) -> Self {
        let pass = rows.iter().all(ThresholdRow::holds);
        let worst = (0..rows.len())
            .min_by(|&i, &j| rows[i].slack().cmp(&rows[j].slack()))
            .unwrap_or(0);
        Self { rows, pass, worst }
    }

    pub fn first_failure(&self) -> Option<&ThresholdRow> {
        self.rows.iter().find(|r| !r.holds())
    }
}

fn w_times(n: usize) -> QSqrt2 {
    QSqrt2::chsh_value() * &QSqrt2::from_int(n as i64)
}

/// Region of the win count `k`: above `wn`, below `(1−w)n`, or in between.
pub fn tail_kind(n: usize, k: usize) -> TailKind {
    let kq = QSqrt2::from_int(k as i64);
    if kq > w_times(n) {
        TailKind::Upper
    } else if kq < QSqrt2::from_int(n as i64) - &w_times(n) {
        TailKind::Lower
    } else {
        TailKind::Middle
    }
}

/// `e^{−nD(k/n ‖ w)} = (nw/k)^k (n(1−w)/(n−k))^{n−k}`, exactly.
pub fn chsh_tail_bound_exact(n: usize, k: usize) -> Result<QSqrt2> {
    if k > n {
        return Err(Error::Domain(format!("win count {k} exceeds n = {n}")));
    }
    let counts = FrequencyVector::new(vec![k, n - k])?;
    exact_exp_neg_nd(
        &counts,
        &[QSqrt2::chsh_value(), QSqrt2::chsh_value_complement()],
    )
}

/// Float value of the tail bound, via logarithms; requires `wn < k ≤ n`.
pub fn chsh_tail_bound(n: usize, k: usize) -> Result<f64> {
    if k > n || tail_kind(n, k) != TailKind::Upper {
        return Err(Error::Domain(format!(
            "tail bound needs wn < k <= n (n = {n}, k = {k})"
        )));
    }
    let w = QSqrt2::chsh_value().as_f64();
    let f = k as f64 / n as f64;
    let d = rel_entropy(&[f, 1.0 - f], &[w, 1.0 - w])?;
    Ok((-(n as f64) * d).exp())
}

/// The per-k bounds of the threshold check for a fixed `n`, computed once.
#[derive(Debug, Clone)]
pub struct ChshThreshold {
    n: usize,
    bounds: Vec<(TailKind, QSqrt2)>,
}

impl ChshThreshold {
    pub fn new(n: usize) -> Result<Self> {
        let bounds = (0..=n)
            .map(|k| {
                let kind = tail_kind(n, k);
                let bound = match kind {
                    TailKind::Upper => chsh_tail_bound_exact(n, k)?,
                    TailKind::Lower => chsh_tail_bound_exact(n, n - k)?,
                    TailKind::Middle => QSqrt2::from_int(1),
                };
                Ok((kind, bound))
            })
            .collect::<Result<_>>()?;
        Ok(Self { n, bounds })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bound(&self, k: usize) -> &(TailKind, QSqrt2) {
        &self.bounds[k]
    }

    pub fn check<F: Field>(&self, p: &SymBox<F>) -> Result<ThresholdReport> {
        if p.n() != self.n {
            return Err(Error::Shape(format!(
                "threshold table is for n = {}, box has n = {}",
                self.n,
                p.n()
            )));
        }
        let p: Vec<QSqrt2> = p.p().iter().map(Field::to_qsqrt2).collect();
        let n = self.n;
        let mut upper = vec![QSqrt2::from_int(0); n + 2];
        for k in (0..=n).rev() {
            upper[k] = upper[k + 1].clone() + &p[k];
        }
        let mut lower = QSqrt2::from_int(0);
        let mut rows = Vec::with_capacity(n + 1);
        for k in 0..=n {
            lower += &p[k];
            let (kind, bound) = self.bounds[k].clone();
            let observed = match kind {
                TailKind::Upper => upper[k].clone(),
                TailKind::Lower => lower.clone(),
                TailKind::Middle => p[k].clone(),
            };
            rows.push(ThresholdRow {
                k,
                kind,
                observed,
                bound,
            });
        }
        Ok(ThresholdReport::from_rows(rows))
    }

    /// Box saturating every tail bound: upper tails filled from `k = n` down,
    /// lower tails from `k = 0` up, each capped by the remaining mass; the rest
    /// sits at the middle win count closest to `n/2`.
    pub fn adversarial(&self) -> Result<SymBox<QSqrt2>> {
        let n = self.n;
        let zero = QSqrt2::from_int(0);
        let mut p = vec![zero.clone(); n + 1];
        let mut remaining = QSqrt2::from_int(1);
        let mut tail = zero.clone();
        for k in (0..=n)
            .rev()
            .take_while(|&k| self.bounds[k].0 == TailKind::Upper)
        {
            let room = self.bounds[k].1.clone() - &tail;
            p[k] = room.min(remaining.clone());
            tail += &p[k];
            remaining -= &p[k];
        }
        let mut tail = zero.clone();
        for k in (0..=n).take_while(|&k| self.bounds[k].0 == TailKind::Lower) {
            let room = self.bounds[k].1.clone() - &tail;
            p[k] = room.min(remaining.clone());
            tail += &p[k];
            remaining -= &p[k];
        }
        if !remaining.is_zero() {
            let mid = (0..=n)
                .filter(|&k| self.bounds[k].0 == TailKind::Middle)
                .min_by_key(|&k| (2 * k).abs_diff(n))
                .ok_or_else(|| Error::Internal(format!("no middle win count at n = {n}")))?;
            p[mid] = remaining;
        }
        SymBox::new(p)
    }
}

/// Checks every tail of a symmetric box against the threshold bound.
pub fn check_chsh_threshold<F: Field>(p: &SymBox<F>) -> Result<ThresholdReport> {
    ChshThreshold::new(p.n())?.check(p)
}

/// The greedy tail-saturating box for `n` rounds.
pub fn adversarial_symbox(n: usize) -> Result<SymBox<QSqrt2>> {
    ChshThreshold::new(n)?.adversarial()
}

/// The set of expected class frequencies of a family: the convex hull of
/// finitely many points of the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedFreqSet {
    vertices: Vec<Vec<QSqrt2>>,
    floats: Vec<Vec<f64>>,
}

const MIN_ITERS: usize = 50;
const MAX_ITERS: usize = 20_000;
const D_TOL: f64 = 1e-10;

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        acc += ui;
        let t = (acc - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

impl ExpectedFreqSet {
    /// Every vertex must be a probability vector of the same length; they are
    /// kept sorted and without repeats.
    pub fn new(mut vertices: Vec<Vec<QSqrt2>>) -> Result<Self> {
        let d = vertices
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Domain("expected-frequency set is empty".into()))?;
        for (i, v) in vertices.iter().enumerate() {
            if v.len() != d {
                return Err(Error::Shape(format!(
                    "vertex {i} has {} classes, expected {d}",
                    v.len()
                )));
            }
            if v.iter().any(Field::is_neg) {
                return Err(Error::NegativeEntry { index: i });
            }
            let s = v.iter().fold(QSqrt2::from_int(0), |acc, x| acc + x);
            if !s.is_one() {
                return Err(Error::Normalization {
                    input: i,
                    sum: s.to_string(),
                });
            }
        }
        vertices.sort();
        vertices.dedup();
        let floats = vertices
            .iter()
            .map(|v| v.iter().map(Field::as_f64).collect())
            .collect();
        Ok(Self { vertices, floats })
    }

    /// `{(p, 1−p) : p ∈ [1−w, w]}`.
    pub fn chsh() -> Self {
        let (w, v) = (QSqrt2::chsh_value(), QSqrt2::chsh_value_complement());
        Self::new(vec![vec![w.clone(), v.clone()], vec![v, w]]).expect("static vertices")
    }

    pub fn vertices(&self) -> &[Vec<QSqrt2>] {
        &self.vertices
    }

    pub fn d(&self) -> usize {
        self.floats[0].len()
    }

    /// `inf_{f'} D(f‖f')` and a minimizer; `None` when every point of the set
    /// vanishes on a class that `f` charges.
    pub fn inf_rel_entropy(&self, f: &[f64]) -> Result<Option<(f64, Vec<f64>)>> {
        if f.len() != self.d() {
            return Err(Error::Shape(format!(
                "frequency has {} classes, set has {}",
                f.len(),
                self.d()
            )));
        }
        Ok(min_divergence(f, &self.floats))
    }
}

/// `min Σ_r f_r ln(f_r / q_r)` over `q` in the convex hull of `vertices`
/// (which need not be normalized), by projected gradient with backtracking
/// over the vertex weights.
pub(crate) fn min_divergence(f: &[f64], vertices: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let support: Vec<usize> = (0..f.len()).filter(|&r| f[r] > 0.0).collect();
    if support
        .iter()
        .any(|&r| vertices.iter().all(|v| v[r] <= 0.0))
    {
        return None;
    }
    let m = vertices.len();
    let point = |lam: &[f64]| -> Vec<f64> {
        (0..f.len())
            .map(|r| lam.iter().zip(vertices).map(|(l, v)| l * v[r]).sum())
            .collect()
    };
    let value = |q: &[f64]| -> f64 {
        support
            .iter()
            .map(|&r| {
                if q[r] > 0.0 {
                    f[r] * (f[r] / q[r]).ln()
                } else {
                    f64::INFINITY
                }
            })
            .sum()
    };
    let mut lam = vec![1.0 / m as f64; m];
    let mut q = point(&lam);
    let mut g = value(&q);
    let mut step: f64 = 1.0;
    for iter in 0..MAX_ITERS {
        let grad: Vec<f64> = vertices
            .iter()
            .map(|v| -support.iter().map(|&r| f[r] * v[r] / q[r]).sum::<f64>())
            .collect();
        let mut accepted = None;
        let mut t = (step * 2.0).min(1e6);
        while t > 1e-18 {
            let cand = project_simplex(
                &lam.iter()
                    .zip(&grad)
                    .map(|(l, gr)| l - t * gr)
                    .collect::<Vec<_>>(),
            );
            let cq = point(&cand);
            let cg = value(&cq);
            let decrease: f64 = grad
                .iter()
                .zip(cand.iter().zip(&lam))
                .map(|(gr, (c, l))| gr * (c - l))
                .sum();
            if cg.is_finite() && cg <= g + 1e-4 * decrease {
                accepted = Some((cand, cq, cg, t));
                break;
            }
            t /= 2.0;
        }
        let Some((cand, cq, cg, t)) = accepted else {
            break;
        };
        let moved: f64 = cand.iter().zip(&lam).map(|(a, b)| (a - b).abs()).sum();
        let improved = g - cg;
        (lam, q, g, step) = (cand, cq, cg, t);
        if iter >= MIN_ITERS && moved < 1e-15 && improved <= D_TOL * 1e-6 {
            break;
        }
    }
    Some((g, q))
}

/// `exp(−n·inf_{f'∈F_μ} D(f‖f'))` for the empirical frequency of `counts`;
/// 0 when the set cannot produce `f` at all.
pub fn general_threshold_bound(counts: &FrequencyVector, set: &ExpectedFreqSet) -> Result<f64> {
    Ok(match set.inf_rel_entropy(&counts.frequencies())? {
        None => 0.0,
        Some((d, _)) => (-(counts.n() as f64) * d.max(0.0)).exp(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyRow {
    pub freq: FrequencyVector,
    pub observed: f64,
    pub bound: f64,
    pub holds: bool,
}

impl FrequencyRow {
    pub fn slack(&self) -> f64 {
        self.bound - self.observed
    }
}

/// Per-frequency comparison `Pr[freq = f] ≤ bound(f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyReport {
    pub rows: Vec<FrequencyRow>,
    pub pass: bool,
    /// Row index with the smallest relative slack.
    pub worst: usize,
}

impl FrequencyReport {
    pub(crate) fn from_rows(rows: Vec<FrequencyRow>) -> Self {
        let pass = rows.iter().all(|r| r.holds);
        let rel = |r: &FrequencyRow| {
            if r.bound > 0.0 {
                r.slack() / r.bound
            } else {
                f64::NEG_INFINITY
            }
        };
        let worst = (0..rows.len())
            .min_by(|&i, &j| rel(&rows[i]).total_cmp(&rel(&rows[j])))
            .unwrap_or(0);
        Self { rows, pass, worst }
    }

    pub fn first_failure(&self) -> Option<&FrequencyRow> {
        self.rows.iter().find(|r| !r.holds)
    }
}

/// Compares a frequency law against `c·exp(−n·inf D)`; floats with relative
/// tolerance `tol` on the bound side.
pub fn check_general_threshold<F: Field>(
    law: &[(FrequencyVector, F)],
    set: &ExpectedFreqSet,
    c: &Rational,
    tol: f64,
) -> Result<FrequencyReport> {
    let c = c.as_f64();
    let rows = law
        .iter()
        .map(|(f, pr)| {
            let bound = c * general_threshold_bound(f, set)?;
            let observed = pr.as_f64();
            Ok(FrequencyRow {
                freq: f.clone(),
                observed,
                bound,
                holds: observed <= bound * (1.0 + tol),
            })
        })
        .collect::<Result<_>>()?;
    Ok(FrequencyReport::from_rows(rows))
}

/// From `P ≤ c̃·τ` (checked exactly first) to the threshold statement
/// `Pr[freq = f] ≤ c̃·exp(−n·inf D)` at every realized frequency.
pub fn definetti_implies_threshold<F: Field, G: Field>(
    p: &SymmetricProfile<F>,
    tau: &SymmetricProfile<G>,
    c_tilde: &Rational,
    set: &ExpectedFreqSet,
    masses: &[F],
    tol: f64,
) -> Result<FrequencyReport> {
    if p.n() != tau.n() || p.d() != tau.d() {
        return Err(Error::Shape(
            "box and de Finetti box profiles differ in shape".into(),
        ));
    }
    let scale = QSqrt2::from(c_tilde.clone());
    for ((f, pv), tv) in p.frequencies().iter().zip(p.values()).zip(tau.values()) {
        if pv.to_qsqrt2() > scale.clone() * &tv.to_qsqrt2() {
            return Err(Error::Precondition(format!(
                "P exceeds {c_tilde}·tau at frequency {:?}",
                f.counts()
            )));
        }
    }
    check_general_threshold(&p.freq_law(masses)?, set, c_tilde, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{rat, Rational};

    #[test]
    fn tail_bound_values() {
        let w = QSqrt2::chsh_value();
        assert_eq!(chsh_tail_bound_exact(10, 10).unwrap(), w.powi(10));
        // mpmath, 50 digits: 0.0082550518742889218839681451753544795816738584624386
        let oracle = 0.008_255_051_874_288_922;
        assert!((chsh_tail_bound(100, 95).unwrap() / oracle - 1.0).abs() < 1e-12);
        assert!((chsh_tail_bound_exact(100, 95).unwrap().as_f64() / oracle - 1.0).abs() < 1e-14);
        assert!(chsh_tail_bound(10, 8).is_err());
        assert!(chsh_tail_bound(10, 9).unwrap() > 0.9);
    }

    #[test]
    fn pr_box_fails_at_full_wins() {
        let pr: SymBox<Rational> = SymBox::point_mass(4, 4).unwrap();
        let r = check_chsh_threshold(&pr).unwrap();
        assert!(!r.pass);
        assert_eq!(r.first_failure().unwrap().k, 4);
    }

    #[test]
    fn uniform_and_adversarial_pass() {
        let u = SymBox::iid(9, &rat(1, 2)).unwrap();
        assert!(check_chsh_threshold(&u).unwrap().pass);
        for n in 1..=8 {
            let adv = adversarial_symbox(n).unwrap();
            let r = check_chsh_threshold(&adv).unwrap();
            assert!(r.pass, "n = {n}");
            assert!(check_chsh_threshold(&adv.mirrored()).unwrap().pass);
        }
        let adv = adversarial_symbox(1).unwrap();
        assert_eq!(
            adv.p(),
            &[QSqrt2::chsh_value_complement(), QSqrt2::chsh_value()]
        );
    }

    #[test]
    fn general_bound_specializes_to_chsh() {
        let set = ExpectedFreqSet::chsh();
        for (n, k) in [(100, 95), (10, 10), (10, 9), (40, 35)] {
            let f = FrequencyVector::new(vec![k, n - k]).unwrap();
            let general = general_threshold_bound(&f, &set).unwrap();
            let direct = chsh_tail_bound(n, k).unwrap();
            assert!(
                (general / direct - 1.0).abs() < 1e-9,
                "n = {n}, k = {k}: {general} vs {direct}"
            );
            let mirrored = FrequencyVector::new(vec![n - k, k]).unwrap();
            assert!(
                (general_threshold_bound(&mirrored, &set).unwrap() / direct - 1.0).abs() < 1e-9
            );
        }
        let mid = FrequencyVector::new(vec![5, 5]).unwrap();
        assert_eq!(general_threshold_bound(&mid, &set).unwrap(), 1.0);
    }

    #[test]
    fn general_bound_closed_forms() {
        let third = QSqrt2::from(rat(1, 3));
        let center = ExpectedFreqSet::new(vec![vec![third.clone(), third.clone(), third]]).unwrap();
        let f = FrequencyVector::new(vec![4, 0, 0]).unwrap();
        let b = general_threshold_bound(&f, &center).unwrap();
        assert!((b / (-4.0 * 3f64.ln()).exp() - 1.0).abs() < 1e-12);
        let one = QSqrt2::from_int(1);
        let zero = QSqrt2::from_int(0);
        let edge =
            ExpectedFreqSet::new(vec![vec![one.clone(), zero.clone()], vec![zero, one]]).unwrap();
        assert_eq!(
            general_threshold_bound(&FrequencyVector::new(vec![2, 1]).unwrap(), &edge).unwrap(),
            1.0
        );
        let corner =
            ExpectedFreqSet::new(vec![vec![QSqrt2::from_int(1), QSqrt2::from_int(0)]]).unwrap();
        assert_eq!(
            general_threshold_bound(&FrequencyVector::new(vec![1, 1]).unwrap(), &corner).unwrap(),
            0.0
        );
    }

    #[test]
    fn definetti_premise_gives_threshold() {
        use crate::boxes::{InputDist, Predicate};
        use crate::definetti::tau_chsh;
        let pred = Predicate::chsh();
        let masses = pred.class_masses(&InputDist::<Rational>::uniform(4));
        for n in 1..=6 {
            let tau = SymmetricProfile::from_chsh(&tau_chsh(n).unwrap());
            let c_tilde = Rational::from_integer(((n + 1) * (n + 1)).into());
            let tau_masses = pred.class_masses(&InputDist::<QSqrt2>::uniform(4));
            let r = definetti_implies_threshold(
                &tau,
                &tau,
                &c_tilde,
                &ExpectedFreqSet::chsh(),
                &tau_masses,
                1e-9,
            )
            .unwrap();
            assert!(r.pass, "n = {n}");
            let q = SymmetricProfile::from_chsh(&SymBox::iid(n, &rat(4, 5)).unwrap());
            let r = definetti_implies_threshold(
                &q,
                &tau,
                &c_tilde,
                &ExpectedFreqSet::chsh(),
                &masses,
                1e-9,
            )
            .unwrap();
            assert!(r.pass, "n = {n}");
        }
        let pr = SymmetricProfile::from_chsh(&SymBox::<Rational>::point_mass(3, 3).unwrap());
        let tau = SymmetricProfile::from_chsh(&tau_chsh(3).unwrap());
        let err = definetti_implies_threshold(
            &pr,
            &tau,
            &rat(1, 1),
            &ExpectedFreqSet::chsh(),
            &masses,
            1e-9,
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
    }
}
