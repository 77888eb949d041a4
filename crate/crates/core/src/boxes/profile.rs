use super::dense::DenseBox;
use super::predicate::{InputDist, Predicate};
use super::symbox::SymBox;
use crate::error::{Error, Result};
use crate::numerics::{binomial, compositions, multinomial, Field, FrequencyVector, QSqrt2};

/// A `w`-symmetric n-round box stored as one entry `P(a|x)` per class
/// frequency vector, in the lexicographic order of [`compositions`].
///
/// Frequencies no entry realizes carry 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetricProfile<F> {
    n: usize,
    d: usize,
    values: Vec<F>,
}

/// Position of `counts` among the compositions of `n` into `counts.len()` parts.
fn composition_index(counts: &[usize]) -> usize {
    let d = counts.len();
    let mut rest: usize = counts.iter().sum();
    let mut idx = 0usize;
    for (i, &k) in counts.iter().enumerate().take(d.saturating_sub(1)) {
        let slots = d - i - 1;
        // Compositions with a smaller entry at position i come first.
        for smaller in 0..k {
            idx += count_compositions(rest - smaller, slots);
        }
        rest -= k;
    }
    idx
}

fn count_compositions(n: usize, d: usize) -> usize {
    if d == 0 {
        return usize::from(n == 0);
    }
    let c = binomial((n + d - 1) as u64, (d - 1) as u64).expect("k <= n");
    usize::try_from(c).expect("composition count fits in usize")
}

impl<F: Field> SymmetricProfile<F> {
    /// Checks non-negativity and that the uniform-input frequency law sums to 1.
    pub fn new(pred: &Predicate, n: usize, values: Vec<F>) -> Result<Self> {
        let d = pred.d();
        let expected = count_compositions(n, d);
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "profile has {} values, expected {expected}",
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(Field::is_neg) {
            return Err(Error::NegativeEntry { index });
        }
        let p = Self { n, d, values };
        let masses = pred.class_masses(&InputDist::uniform(pred.round_inputs()));
        let total = p
            .freq_law(&masses)?
            .into_iter()
            .fold(F::zero(), |acc, (_, v)| acc + &v);
        if !total.is_one() {
            return Err(Error::Normalization {
                input: 0,
                sum: total.to_string(),
            });
        }
        Ok(p)
    }

    /// Compresses a dense box without Eve; errors unless it is `w`-symmetric.
    pub fn from_dense(b: &DenseBox<F>, pred: &Predicate) -> Result<Self> {
        if b.alphabets().eve().is_some() {
            return Err(Error::Shape(
                "profiles are defined for boxes without Eve".into(),
            ));
        }
        if let Some((i, j)) = pred.symmetry_violation(b)? {
            return Err(Error::Precondition(format!(
                "box is not w-symmetric: entries {i} and {j} share a class frequency but differ"
            )));
        }
        let (n, d) = (b.n(), pred.d());
        let mut values = vec![F::zero(); count_compositions(n, d)];
        let outs = b.num_outputs();
        let l = b.layout();
        for (i, v) in b.entries().iter().enumerate() {
            let f = pred.freq(&l.round_inputs(i / outs), &l.round_outputs(i % outs));
            values[composition_index(f.counts())] = v.clone();
        }
        Ok(Self { n, d, values })
    }

    /// The CHSH-symmetric box as a profile of [`Predicate::chsh`] (class 0 wins).
    pub fn from_chsh(p: &SymBox<F>) -> Self {
        let n = p.n();
        let values = p
            .p()
            .iter()
            .enumerate()
            .map(|(k, pk)| {
                let mult = binomial(n as u64, k as u64).expect("k <= n") << n;
                pk.clone() / &F::from_bigint(mult)
            })
            .collect();
        Self { n, d: 2, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn to_qsqrt2(&self) -> SymmetricProfile<QSqrt2> {
        SymmetricProfile {
            n: self.n,
            d: self.d,
            values: self.values.iter().map(Field::to_qsqrt2).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn frequencies(&self) -> Vec<FrequencyVector> {
        compositions(self.n, self.d)
            .into_iter()
            .map(|c| FrequencyVector::new(c).expect("d >= 1"))
            .collect()
    }

    pub fn value(&self, f: &FrequencyVector) -> Result<&F> {
        if f.d() != self.d || f.n() != self.n {
            return Err(Error::Shape(format!(
                "frequency {:?} does not fit n = {}, d = {}",
                f.counts(),
                self.n,
                self.d
            )));
        }
        Ok(&self.values[composition_index(f.counts())])
    }

    /// `Pr[freq = f] = P_f · multinomial(n; f) · ∏ m_r^{k_r}` for the class
    /// masses `m` of the input law; zero-probability frequencies are skipped.
    pub fn freq_law(&self, masses: &[F]) -> Result<Vec<(FrequencyVector, F)>> {
        if masses.len() != self.d {
            return Err(Error::Shape(format!(
                "{} class masses for d = {}",
                masses.len(),
                self.d
            )));
        }
        let mut out = Vec::new();
        for (f, v) in self.frequencies().into_iter().zip(&self.values) {
            if v.is_zero() {
                continue;
            }
            let mut pr = v.clone() * &F::from_bigint(multinomial(self.n as u64, f.counts())?);
            for (m, &k) in masses.iter().zip(f.counts()) {
                pr *= &m.powi(k as u64);
            }
            if !pr.is_zero() {
                out.push((f, pr));
            }
        }
        Ok(out)
    }
}
