use std::collections::HashMap;

use rayon::prelude::*;

use super::alphabets::{Alphabets, Layout};
use crate::error::{Error, Result};
use crate::numerics::{Field, QSqrt2, Rational};

/// An n-round conditional distribution `P(a|x)` stored as a dense table.
///
/// Entry `(x, a)` lives at `x * num_outputs + a`, so outputs vary fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseBox<F> {
    n: usize,
    alphabets: Alphabets,
    layout: Layout,
    entries: Vec<F>,
}

/// Evidence that the marginal of some interfaces depends on another interface's input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignalingWitness {
    /// Sites whose input was varied (party rounds, or Eve).
    pub sites: Vec<usize>,
    pub input: usize,
    pub input_prime: usize,
    /// Index of the outputs of the remaining sites, in the table with those sites summed out.
    pub rest_output: usize,
}

impl<F> DenseBox<F> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn num_inputs(&self) -> usize {
        self.layout.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.layout.num_outputs
    }

    pub fn entries(&self) -> &[F] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<F> {
        self.entries
    }

    pub fn entry(&self, x: usize, a: usize) -> &F {
        &self.entries[x * self.layout.num_outputs + a]
    }

    pub fn row(&self, x: usize) -> &[F] {
        let o = self.layout.num_outputs;
        &self.entries[x * o..(x + 1) * o]
    }
}

impl<F: Field> DenseBox<F> {
    pub fn new(n: usize, alphabets: Alphabets, entries: Vec<F>) -> Result<Self> {
        let layout = Layout::new(&alphabets, n)?;
        let expected = layout.num_inputs * layout.num_outputs;
        if entries.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} entries for n = {n}, got {}",
                entries.len()
            )));
        }
        if let Some(index) = entries.iter().position(|e| e.is_neg()) {
            return Err(Error::NegativeEntry { index });
        }
        for (input, row) in entries.chunks(layout.num_outputs).enumerate() {
            let s = row.iter().fold(F::zero(), |acc, v| acc + v);
            if !s.is_one() {
                return Err(Error::Normalization {
                    input,
                    sum: s.to_string(),
                });
            }
        }
        Ok(Self {
            n,
            alphabets,
            layout,
            entries,
        })
    }

    /// Builds the table from a function of `(input index, output index)`.
    pub fn from_fn(
        n: usize,
        alphabets: Alphabets,
        f: impl Fn(usize, usize) -> F + Sync,
    ) -> Result<Self> {
        let layout = Layout::new(&alphabets, n)?;
        let outs = layout.num_outputs;
        let entries = (0..layout.num_inputs * outs)
            .into_par_iter()
            .map(|i| f(i / outs, i % outs))
            .collect();
        Self::new(n, alphabets, entries)
    }

    pub fn uniform(n: usize, alphabets: Alphabets) -> Result<Self> {
        let layout = Layout::new(&alphabets, n)?;
        let v = F::one() / &F::from_int(layout.num_outputs as i64);
        Self::new(
            n,
            alphabets,
            vec![v; layout.num_inputs * layout.num_outputs],
        )
    }

    pub fn to_qsqrt2(&self) -> DenseBox<QSqrt2> {
        DenseBox {
            n: self.n,
            alphabets: self.alphabets.clone(),
            layout: self.layout.clone(),
            entries: self.entries.iter().map(Field::to_qsqrt2).collect(),
        }
    }

    /// Rational copy of the table; `None` if some entry involves √2.
    pub fn to_rational(&self) -> Option<DenseBox<Rational>> {
        let entries = self
            .entries
            .iter()
            .map(Field::as_rational)
            .collect::<Option<Vec<_>>>()?;
        Some(DenseBox {
            n: self.n,
            alphabets: self.alphabets.clone(),
            layout: self.layout.clone(),
            entries,
        })
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.alphabets != other.alphabets {
            return Err(Error::Shape(
                "boxes have different rounds or alphabets".into(),
            ));
        }
        Ok(())
    }

    /// `max_x Σ_a |P(a|x) − Q(a|x)|`.
    pub fn distance(&self, other: &Self) -> Result<F> {
        self.check_same_shape(other)?;
        let o = self.layout.num_outputs;
        Ok((0..self.layout.num_inputs)
            .map(|x| {
                (0..o).fold(F::zero(), |acc, a| {
                    acc + &(self.entries[x * o + a].clone() - &other.entries[x * o + a]).magnitude()
                })
            })
            .max()
            .unwrap_or_else(F::zero))
    }

    /// Convex combination `Σ_j λ_j P_j`.
    pub fn mix(boxes: &[Self], weights: &[F]) -> Result<Self> {
        let first = boxes
            .first()
            .ok_or_else(|| Error::Domain("mix of no boxes".into()))?;
        if boxes.len() != weights.len() {
            return Err(Error::Shape("one weight per box is required".into()));
        }
        if weights.iter().any(|w| w.is_neg()) {
            return Err(Error::Domain("mixture weights must be non-negative".into()));
        }
        for b in boxes {
            first.check_same_shape(b)?;
        }
        let entries = (0..first.entries.len())
            .into_par_iter()
            .map(|i| {
                boxes
                    .iter()
                    .zip(weights)
                    .fold(F::zero(), |acc, (b, w)| acc + &(b.entries[i].clone() * w))
            })
            .collect();
        Self::new(first.n, first.alphabets.clone(), entries)
    }

    /// `P^{⊗n}` of a single-round box without Eve.
    pub fn iid_power(&self, n: usize) -> Result<Self> {
        if self.n != 1 || self.alphabets.eve().is_some() {
            return Err(Error::Domain(
                "iid_power needs a single-round box without Eve".into(),
            ));
        }
        let layout = Layout::new(&self.alphabets, n)?;
        let single = self;
        Self::from_fn(n, self.alphabets.clone(), |x, a| {
            (0..n).fold(F::one(), |acc, i| {
                acc * single.entry(layout.round_input(x, i), layout.round_output(a, i))
            })
        })
    }

    /// Box with Eve's outputs summed out at Eve input `z`.
    pub fn eve_marginal(&self, z: usize) -> Result<Self> {
        let Some(eve) = self.alphabets.eve() else {
            return Ok(self.clone());
        };
        if z >= eve.inputs {
            return Err(Error::Domain(format!("Eve input {z} out of range")));
        }
        let alph = self.alphabets.without_eve();
        let l = Layout::new(&alph, self.n)?;
        Self::from_fn(self.n, alph, |x, a| {
            let xs = l.round_inputs(x);
            let ax = l.round_outputs(a);
            let xe = self.layout.encode_inputs(&xs, z);
            (0..eve.outputs).fold(F::zero(), |acc, e| {
                acc + self.entry(xe, self.layout.encode_outputs(&ax, e))
            })
        })
    }

    /// Marginal over rounds `k+1..n`, with the inputs of those rounds set to symbol 0.
    pub fn marginal_first_rounds(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n {
            return Err(Error::Domain(format!(
                "marginal needs 1 <= k <= n, got k = {k}"
            )));
        }
        let target = Layout::new(&self.alphabets, k)?;
        let mut entries = vec![F::zero(); target.num_inputs * target.num_outputs];
        for x in 0..self.layout.num_inputs {
            let xs = self.layout.round_inputs(x);
            if xs[k..].iter().any(|&s| s != 0) {
                continue;
            }
            let tx = target.encode_inputs(&xs[..k], self.layout.eve_input(x));
            for a in 0..self.layout.num_outputs {
                let ta = target.encode_outputs(
                    &self.layout.round_outputs(a)[..k],
                    self.layout.eve_output(a),
                );
                entries[tx * target.num_outputs + ta] += self.entry(x, a);
            }
        }
        Self::new(k, self.alphabets.clone(), entries)
    }

    /// First input on which the given sites can signal to the rest, if any.
    pub fn signaling_witness(&self, sites: &[usize]) -> Option<SignalingWitness> {
        let l = &self.layout;
        let mut rest_index = vec![0usize; l.num_outputs];
        let mut rest_size = 1usize;
        for s in (0..l.site_count()).rev() {
            if sites.contains(&s) {
                continue;
            }
            for (a, idx) in rest_index.iter_mut().enumerate() {
                *idx += l.out_digit(a, s) * rest_size;
            }
            rest_size *= l.out_radix(s);
        }
        let zeroed = |x: usize| {
            sites
                .iter()
                .fold(x, |acc, &s| acc - l.in_digit(x, s) * l.in_stride(s))
        };
        let marginal = |x: usize| {
            let mut m = vec![F::zero(); rest_size];
            for (a, &r) in rest_index.iter().enumerate() {
                m[r] += self.entry(x, a);
            }
            m
        };
        let mut cache: HashMap<usize, Vec<F>> = HashMap::new();
        for x in 0..l.num_inputs {
            let x0 = zeroed(x);
            if x0 == x {
                continue;
            }
            let base = cache.entry(x0).or_insert_with(|| marginal(x0));
            let here = marginal(x);
            if let Some(r) = (0..rest_size).find(|&r| here[r] != base[r]) {
                return Some(SignalingWitness {
                    sites: sites.to_vec(),
                    input: x0,
                    input_prime: x,
                    rest_output: r,
                });
            }
        }
        None
    }

    /// Sites of each interface: one group per party (all its rounds), plus Eve.
    pub fn interface_groups(&self) -> Vec<Vec<usize>> {
        let l = &self.layout;
        let mut groups: Vec<Vec<usize>> = (0..l.parties)
            .map(|p| (0..self.n).map(|i| l.site(p, i)).collect())
            .collect();
        groups.extend(l.eve_site().map(|s| vec![s]));
        groups
    }

    /// Non-signaling between interfaces; `Err` carries the violation.
    pub fn nonsignaling(&self) -> std::result::Result<(), SignalingWitness> {
        if self.alphabets.interface_count() < 2 {
            return Ok(());
        }
        self.interface_groups()
            .iter()
            .find_map(|g| self.signaling_witness(g))
            .map_or(Ok(()), Err)
    }

    pub fn is_nonsignaling(&self) -> bool {
        self.nonsignaling().is_ok()
    }

    /// Non-signaling between every pair of sites, including rounds of the same party.
    pub fn round_nonsignaling(&self) -> std::result::Result<(), SignalingWitness> {
        (0..self.layout.site_count())
            .find_map(|s| self.signaling_witness(&[s]))
            .map_or(Ok(()), Err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::alphabets::Interface;
    use crate::numerics::{int, rat};

    fn signaling_box() -> DenseBox<Rational> {
        // Bob outputs Alice's input
        DenseBox::from_fn(1, Alphabets::chsh(), |x, a| {
            let (xa, b) = (x >> 1, a & 1);
            if b == xa && a >> 1 == 0 {
                int(1)
            } else {
                int(0)
            }
        })
        .unwrap()
    }

    #[test]
    fn validation_errors() {
        let alph = Alphabets::single(1, 2);
        assert!(DenseBox::new(1, alph.clone(), vec![rat(1, 2), rat(1, 2)]).is_ok());
        assert!(matches!(
            DenseBox::new(1, alph.clone(), vec![rat(1, 2), rat(2, 5)]),
            Err(Error::Normalization { input: 0, .. })
        ));
        assert!(matches!(
            DenseBox::new(1, alph.clone(), vec![rat(3, 2), rat(-1, 2)]),
            Err(Error::NegativeEntry { index: 1 })
        ));
        assert!(matches!(
            DenseBox::new(1, alph, vec![int(1)]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn signaling_is_detected() {
        let w = signaling_box().nonsignaling().unwrap_err();
        assert_eq!(w.sites, vec![0]);
        let u: DenseBox<Rational> = DenseBox::uniform(2, Alphabets::chsh()).unwrap();
        assert!(u.is_nonsignaling() && u.round_nonsignaling().is_ok());
    }

    #[test]
    fn iid_power_and_mix() {
        let u: DenseBox<Rational> = DenseBox::uniform(1, Alphabets::chsh()).unwrap();
        assert_eq!(
            u.iid_power(2).unwrap(),
            DenseBox::uniform(2, Alphabets::chsh()).unwrap()
        );
        assert_eq!(DenseBox::mix(&[u.clone()], &[int(1)]).unwrap(), u);
    }

    #[test]
    fn eve_marginal_sums_out_eve() {
        let alph = Alphabets::chsh().with_eve(Interface::new(2, 3)).unwrap();
        let b: DenseBox<Rational> = DenseBox::uniform(1, alph).unwrap();
        assert_eq!(
            b.eve_marginal(1).unwrap(),
            DenseBox::uniform(1, Alphabets::chsh()).unwrap()
        );
        assert!(b.is_nonsignaling());
    }
}
