use std::collections::HashMap;

use super::dense::DenseBox;
use crate::error::{Error, Result};
use crate::numerics::{Field, FrequencyVector};

/// A class label `w(a, x) ∈ {0, …, d−1}` for every single-round symbol pair.
///
/// Files use the labels `1..=d`; in memory they are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    d: usize,
    round_inputs: usize,
    round_outputs: usize,
    table: Vec<usize>,
}

impl Predicate {
    /// `table[x * round_outputs + a]` is the class of `(a, x)`.
    pub fn new(
        d: usize,
        round_inputs: usize,
        round_outputs: usize,
        table: Vec<usize>,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("predicate needs d >= 1".into()));
        }
        if table.len() != round_inputs * round_outputs {
            return Err(Error::Shape(format!(
                "predicate table has {} cells, expected {}",
                table.len(),
                round_inputs * round_outputs
            )));
        }
        if let Some(i) = table.iter().position(|&c| c >= d) {
            return Err(Error::Domain(format!(
                "predicate cell {i} has class {} >= d = {d}",
                table[i]
            )));
        }
        Ok(Self {
            d,
            round_inputs,
            round_outputs,
            table,
        })
    }

    /// CHSH: class 0 when `a ⊕ b = xy`, class 1 otherwise (symbols `2x+y`, `2a+b`).
    pub fn chsh() -> Self {
        let table = (0..16)
            .map(|i| {
                let (xs, as_) = (i / 4, i % 4);
                usize::from((as_ >> 1) ^ (as_ & 1) != (xs >> 1) & (xs & 1))
            })
            .collect();
        Self::new(2, 4, 4, table).expect("static table")
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn round_inputs(&self) -> usize {
        self.round_inputs
    }

    pub fn round_outputs(&self) -> usize {
        self.round_outputs
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn class(&self, x: usize, a: usize) -> usize {
        self.table[x * self.round_outputs + a]
    }

    /// `m_r = Σ_x μ(x)·|{a : w(a, x) = r}|`, the per-round weight of class `r`.
    pub fn class_masses<F: Field>(&self, mu: &InputDist<F>) -> Vec<F> {
        let mut m = vec![F::zero(); self.d];
        for (x, px) in mu.per_round().iter().enumerate().take(self.round_inputs) {
            for a in 0..self.round_outputs {
                m[self.class(x, a)] += px;
            }
        }
        m
    }

    /// Class counts of a sequence of per-round `(x, a)` symbols.
    pub fn freq(&self, xs: &[usize], as_: &[usize]) -> FrequencyVector {
        let mut counts = vec![0; self.d];
        for (&x, &a) in xs.iter().zip(as_) {
            counts[self.class(x, a)] += 1;
        }
        FrequencyVector::new(counts).expect("d >= 1")
    }

    fn check_box<F>(&self, b: &DenseBox<F>) -> Result<()> {
        let alph = b.alphabets();
        if alph.round_inputs() != self.round_inputs || alph.round_outputs() != self.round_outputs {
            return Err(Error::Shape("predicate and box alphabets differ".into()));
        }
        Ok(())
    }

    /// `freq^w(a, x)` of a dense-table entry.
    pub fn freq_of_entry<F>(&self, b: &DenseBox<F>, x: usize, a: usize) -> Result<FrequencyVector> {
        self.check_box(b)?;
        let l = b.layout();
        Ok(self.freq(&l.round_inputs(x), &l.round_outputs(a)))
    }

    /// First pair of entries with the same class frequencies but different values.
    pub fn symmetry_violation<F: Field>(&self, b: &DenseBox<F>) -> Result<Option<(usize, usize)>> {
        self.check_box(b)?;
        let l = b.layout();
        let outs = b.num_outputs();
        let mut first: HashMap<(FrequencyVector, usize, usize), usize> = HashMap::new();
        for (i, v) in b.entries().iter().enumerate() {
            let (x, a) = (i / outs, i % outs);
            let key = (
                self.freq(&l.round_inputs(x), &l.round_outputs(a)),
                l.eve_input(x),
                l.eve_output(a),
            );
            match first.get(&key) {
                None => {
                    first.insert(key, i);
                }
                Some(&j) if b.entries()[j] != *v => return Ok(Some((j, i))),
                Some(_) => {}
            }
        }
        Ok(None)
    }

    /// `w`-symmetry: `P(a|x) = P(a'|x')` whenever the class frequencies agree.
    pub fn is_symmetric<F: Field>(&self, b: &DenseBox<F>) -> Result<bool> {
        Ok(self.symmetry_violation(b)?.is_none())
    }

    /// `Pr[freq^w(A, X) = f]` for every realized `f`, with inputs drawn from `μ^{⊗n}` (no Eve).
    pub fn freq_distribution<F: Field>(
        &self,
        b: &DenseBox<F>,
        mu: &InputDist<F>,
    ) -> Result<Vec<(FrequencyVector, F)>> {
        self.check_box(b)?;
        if b.alphabets().eve().is_some() {
            return Err(Error::Domain(
                "frequency law is defined for boxes without Eve".into(),
            ));
        }
        if mu.round_inputs() != self.round_inputs {
            return Err(Error::Shape(
                "input distribution and predicate alphabets differ".into(),
            ));
        }
        let l = b.layout();
        let mut acc: HashMap<FrequencyVector, F> = HashMap::new();
        for x in 0..b.num_inputs() {
            let xs = l.round_inputs(x);
            let px = mu.prob(&xs);
            if px.is_zero() {
                continue;
            }
            for (a, v) in b.row(x).iter().enumerate() {
                if v.is_zero() {
                    continue;
                }
                let f = self.freq(&xs, &l.round_outputs(a));
                *acc.entry(f).or_insert_with(F::zero) += &(px.clone() * v);
            }
        }
        let mut out: Vec<_> = acc.into_iter().collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

/// An iid input law `μ^{⊗n}` given by its single-round distribution over lumped symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputDist<F> {
    per_round: Vec<F>,
}

impl<F: Field> InputDist<F> {
    pub fn new(per_round: Vec<F>) -> Result<Self> {
        if per_round.is_empty() || per_round.iter().any(|v| v.is_neg()) {
            return Err(Error::Domain(
                "input distribution must be non-empty and non-negative".into(),
            ));
        }
        let s = per_round.iter().fold(F::zero(), |a, v| a + v);
        if !s.is_one() {
            return Err(Error::Normalization {
                input: 0,
                sum: s.to_string(),
            });
        }
        Ok(Self { per_round })
    }

    pub fn uniform(symbols: usize) -> Self {
        let v = F::one() / &F::from_int(symbols as i64);
        Self::new(vec![v; symbols]).expect("uniform law is valid")
    }

    pub fn round_inputs(&self) -> usize {
        self.per_round.len()
    }

    pub fn per_round(&self) -> &[F] {
        &self.per_round
    }

    pub fn prob(&self, syms: &[usize]) -> F {
        syms.iter()
            .fold(F::one(), |acc, &s| acc * &self.per_round[s])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::alphabets::Alphabets;
    use crate::numerics::{rat, Rational};

    #[test]
    fn chsh_freq_all_zero_wins() {
        let p = Predicate::chsh();
        assert_eq!(p.freq(&[0, 0, 0], &[0, 0, 0]).counts(), &[3, 0]);
        // x = y = 1 with a = b = 0 loses
        assert_eq!(p.class(3, 0), 1);
        assert_eq!(p.class(3, 2), 0);
    }

    #[test]
    fn constant_predicate_needs_constant_box() {
        let p = Predicate::new(1, 2, 2, vec![0; 4]).unwrap();
        let u: DenseBox<Rational> = DenseBox::uniform(2, Alphabets::single(2, 2)).unwrap();
        assert!(p.is_symmetric(&u).unwrap());
        let skew = DenseBox::new(
            1,
            Alphabets::single(2, 2),
            vec![rat(1, 3), rat(2, 3), rat(1, 2), rat(1, 2)],
        )
        .unwrap();
        assert!(!p.is_symmetric(&skew).unwrap());
    }

    #[test]
    fn bad_tables_are_rejected() {
        assert!(Predicate::new(2, 2, 2, vec![0, 1, 2, 0]).is_err());
        assert!(Predicate::new(2, 2, 2, vec![0, 1]).is_err());
    }
}
