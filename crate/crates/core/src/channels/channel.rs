use std::collections::HashMap;

use rayon::prelude::*;

use crate::boxes::{Alphabets, DenseBox, Interface, Layout};
use crate::error::{Error, Result};
use crate::linprog::{Polytope, PreparedLp, Sense, WarmStart};
use crate::numerics::Field;

/// Patterns solved in sequence off one warm start.
const WARM_CHUNK: usize = 64;

/// A channel on n-round boxes: an input distribution `P_X` and a result kernel `P_{R|AX}`.
///
/// The kernel is stored with `r` fastest, then `a`, then `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<F> {
    n: usize,
    alphabets: Alphabets,
    layout: Layout,
    px: Vec<F>,
    results: usize,
    kernel: Vec<F>,
}

impl<F: Field> Channel<F> {
    pub fn new(
        n: usize,
        alphabets: Alphabets,
        px: Vec<F>,
        results: usize,
        kernel: Vec<F>,
    ) -> Result<Self> {
        if alphabets.eve().is_some() {
            return Err(Error::Shape(
                "channels act on the parties' interfaces only".into(),
            ));
        }
        let layout = Layout::new(&alphabets, n)?;
        let (ni, no) = (layout.num_inputs, layout.num_outputs);
        if results == 0 || px.len() != ni || kernel.len() != ni * no * results {
            return Err(Error::Shape(format!(
                "channel needs {ni} input weights and {} kernel entries with at least one result",
                ni * no * results
            )));
        }
        if let Some(index) = px.iter().chain(&kernel).position(Field::is_neg) {
            return Err(Error::NegativeEntry { index });
        }
        let total = px.iter().fold(F::zero(), |acc, v| acc + v);
        if !total.is_one() {
            return Err(Error::Normalization {
                input: 0,
                sum: total.to_string(),
            });
        }
        for (row, chunk) in kernel.chunks(results).enumerate() {
            let s = chunk.iter().fold(F::zero(), |acc, v| acc + v);
            if !s.is_one() {
                return Err(Error::Normalization {
                    input: row,
                    sum: s.to_string(),
                });
            }
        }
        Ok(Self {
            n,
            alphabets,
            layout,
            px,
            results,
            kernel,
        })
    }

    /// Builds the kernel from `f(x, a, r)`.
    pub fn from_fn(
        n: usize,
        alphabets: Alphabets,
        px: Vec<F>,
        results: usize,
        f: impl Fn(usize, usize, usize) -> F,
    ) -> Result<Self> {
        let layout = Layout::new(&alphabets, n)?;
        let kernel = (0..layout.num_inputs)
            .flat_map(|x| {
                (0..layout.num_outputs).flat_map(move |a| (0..results).map(move |r| (x, a, r)))
            })
            .map(|(x, a, r)| f(x, a, r))
            .collect();
        Self::new(n, alphabets, px, results, kernel)
    }

    /// `P_X` from an iid per-round distribution over lumped round inputs.
    pub fn iid_inputs(n: usize, alphabets: &Alphabets, per_round: &[F]) -> Result<Vec<F>> {
        let layout = Layout::new(alphabets, n)?;
        if per_round.len() != alphabets.round_inputs() {
            return Err(Error::Shape(
                "per-round input distribution has the wrong length".into(),
            ));
        }
        Ok((0..layout.num_inputs)
            .map(|x| {
                layout
                    .round_inputs(x)
                    .iter()
                    .fold(F::one(), |acc, &s| acc * &per_round[s])
            })
            .collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn px(&self) -> &[F] {
        &self.px
    }

    pub fn results(&self) -> usize {
        self.results
    }

    pub fn kernel(&self) -> &[F] {
        &self.kernel
    }

    pub fn kernel_entry(&self, x: usize, a: usize, r: usize) -> &F {
        &self.kernel[(x * self.layout.num_outputs + a) * self.results + r]
    }

    /// `P_X(x)·P_{R|AX}(r|ax)`.
    pub fn weight(&self, x: usize, a: usize, r: usize) -> F {
        self.px[x].clone() * self.kernel_entry(x, a, r)
    }

    /// The same channel on boxes with one more party, whose inputs are uniform
    /// and whose outputs are ignored.
    pub fn with_ignored_party(&self, extra: Interface) -> Result<Self> {
        let mut parties = self.alphabets.parties().to_vec();
        parties.push(extra);
        let alph = Alphabets::new(parties, None)?;
        let big = Layout::new(&alph, self.n)?;
        let per_party = (extra.inputs as u64).pow(self.n as u32);
        let scale = F::one() / &F::from_bigint(per_party.into());
        // The appended party is the least significant digit of each round symbol.
        let project = |x: usize, a: usize| {
            let xs: Vec<usize> = big
                .round_inputs(x)
                .iter()
                .map(|s| s / extra.inputs)
                .collect();
            let as_: Vec<usize> = big
                .round_outputs(a)
                .iter()
                .map(|s| s / extra.outputs)
                .collect();
            (
                self.layout.encode_inputs(&xs, 0),
                self.layout.encode_outputs(&as_, 0),
            )
        };
        let px = (0..big.num_inputs)
            .map(|x| self.px[project(x, 0).0].clone() * &scale)
            .collect();
        Self::from_fn(self.n, alph, px, self.results, |x, a, r| {
            let (bx, ba) = project(x, a);
            self.kernel_entry(bx, ba, r).clone()
        })
    }
}

fn check_box_shape<F: Field>(ch: &Channel<F>, b: &DenseBox<F>) -> Result<()> {
    if b.n() != ch.n || b.alphabets().without_eve() != ch.alphabets {
        return Err(Error::Shape(
            "box and channel act on different interfaces".into(),
        ));
    }
    Ok(())
}

/// `E(P)(r) = Σ_{x,a} P_X(x) P(a|x) P_{R|AX}(r|ax)` for a box without Eve.
pub fn apply<F: Field>(ch: &Channel<F>, b: &DenseBox<F>) -> Result<Vec<F>> {
    check_box_shape(ch, b)?;
    if b.alphabets().eve().is_some() {
        return Err(Error::Shape(
            "apply takes a box without an Eve interface".into(),
        ));
    }
    let mut out = vec![F::zero(); ch.results];
    for x in 0..b.num_inputs() {
        if ch.px[x].is_zero() {
            continue;
        }
        for a in 0..b.num_outputs() {
            let p = b.entry(x, a);
            if p.is_zero() {
                continue;
            }
            let pa = p.clone() * &ch.px[x];
            for (r, o) in out.iter_mut().enumerate() {
                *o += &(pa.clone() * ch.kernel_entry(x, a, r));
            }
        }
    }
    Ok(out)
}

fn check_pair<F: Field>(e: &Channel<F>, f: &Channel<F>) -> Result<()> {
    if e.n != f.n || e.alphabets != f.alphabets || e.results != f.results {
        return Err(Error::Shape(
            "channels differ in rounds, interfaces or result alphabet".into(),
        ));
    }
    Ok(())
}

/// `D_r(x, a) = P^E_X(x)P^E(r|ax) − P^F_X(x)P^F(r|ax)`, one vector per result.
fn difference_weights<F: Field>(e: &Channel<F>, f: &Channel<F>) -> Vec<Vec<F>> {
    let (ni, no) = (e.layout.num_inputs, e.layout.num_outputs);
    (0..e.results)
        .map(|r| {
            (0..ni * no)
                .map(|i| e.weight(i / no, i % no, r) - f.weight(i / no, i % no, r))
                .collect()
        })
        .collect()
}

/// Value of the distinguishability norm with its optimizing choices.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinguishReport<F> {
    pub value: F,
    /// Eve input chosen for each result.
    pub z_per_r: Vec<usize>,
    /// `signs[r][e]`: whether the inner sum for `(r, e)` is non-negative at the chosen `z`.
    pub signs: Vec<Vec<bool>>,
    /// Box attaining the value, for optimizations over a polytope.
    pub witness: Option<DenseBox<F>>,
    /// Number of sign/input patterns examined (1 for a direct evaluation).
    pub patterns: u128,
}

fn eve_sizes(b: &Alphabets) -> (usize, usize) {
    b.eve().map_or((1, 1), |i| (i.inputs, i.outputs))
}

/// `Σ_r max_z Σ_e |Σ_{a,x} P(ae|xz)(P^E_X P^E_{R|AX} − P^F_X P^F_{R|AX})|`.
///
/// Eve may pick her input after seeing the result, so `z` is chosen per `r`.
pub fn distinguishability<F: Field>(
    e: &Channel<F>,
    f: &Channel<F>,
    b: &DenseBox<F>,
) -> Result<DistinguishReport<F>> {
    check_pair(e, f)?;
    check_box_shape(e, b)?;
    let (zn, en) = eve_sizes(b.alphabets());
    let no = e.layout.num_outputs;
    let diff = difference_weights(e, f);
    let mut value = F::zero();
    let mut z_per_r = Vec::with_capacity(e.results);
    let mut signs = Vec::with_capacity(e.results);
    for d in &diff {
        let mut best: Option<(F, usize, Vec<bool>)> = None;
        for z in 0..zn {
            let mut inner = vec![F::zero(); en];
            for (i, w) in d.iter().enumerate() {
                if w.is_zero() {
                    continue;
                }
                let (x, a) = (i / no, i % no);
                for (eo, acc) in inner.iter_mut().enumerate() {
                    let p = b.entry(x * zn + z, a * en + eo);
                    if !p.is_zero() {
                        *acc += &(p.clone() * w);
                    }
                }
            }
            let total = inner.iter().fold(F::zero(), |acc, v| acc + &v.magnitude());
            if best.as_ref().is_none_or(|(v, _, _)| total > *v) {
                best = Some((total, z, inner.iter().map(|v| !v.is_neg()).collect()));
            }
        }
        let (v, z, s) = best.expect("Eve has at least one input");
        value += &v;
        z_per_r.push(z);
        signs.push(s);
    }
    Ok(DistinguishReport {
        value,
        z_per_r,
        signs,
        witness: None,
        patterns: 1,
    })
}

/// Number of `(z per r, sign per (e, r))` patterns.
pub fn pattern_count(results: usize, eve: Option<Interface>) -> u128 {
    let (zn, en) = eve.map_or((1, 1), |i| (i.inputs, i.outputs));
    (zn as u128)
        .checked_pow(results as u32)
        .and_then(|zp| {
            2u128
                .checked_pow((en * results) as u32)
                .and_then(|sp| zp.checked_mul(sp))
        })
        .unwrap_or(u128::MAX)
}

/// Maximum of the distinguishability norm over a polytope of extended boxes.
///
/// For a fixed choice of `z` per result and sign per `(e, r)` the norm is a
/// linear function, so the maximum is the best of one exact LP per pattern.
/// Variables of `polytope` are the entries of a box with the channels'
/// parties and the given Eve interface, in dense order.
pub fn diamond_over_polytope<F: Field>(
    e: &Channel<F>,
    f: &Channel<F>,
    polytope: &Polytope<F>,
    eve: Option<Interface>,
    pattern_cap: u64,
) -> Result<DistinguishReport<F>> {
    check_pair(e, f)?;
    let alph = match eve {
        Some(i) => e.alphabets.with_eve(i)?,
        None => e.alphabets.clone(),
    };
    let (zn, en) = eve_sizes(&alph);
    let layout = Layout::new(&alph, e.n)?;
    let nvars = layout.num_inputs * layout.num_outputs;
    if polytope.nvars() != nvars {
        return Err(Error::Shape(format!(
            "polytope has {} variables, extended box has {nvars} entries",
            polytope.nvars()
        )));
    }
    let results = e.results;
    let patterns = pattern_count(results, eve);
    if patterns > pattern_cap as u128 {
        return Err(Error::PatternCap {
            patterns,
            cap: pattern_cap,
        });
    }
    let diff = difference_weights(e, f);
    let no = e.layout.num_outputs;
    let z_patterns = (zn as u128).pow(results as u32);
    let decode = |p: u128| {
        let mut zp = p % z_patterns;
        let z_per_r: Vec<usize> = (0..results)
            .map(|_| {
                let z = (zp % zn as u128) as usize;
                zp /= zn as u128;
                z
            })
            .collect();
        let bits = p / z_patterns;
        let signs: Vec<Vec<bool>> = (0..results)
            .map(|r| (0..en).map(|eo| (bits >> (r * en + eo)) & 1 == 0).collect())
            .collect();
        (z_per_r, signs)
    };
    let objective = |p: u128| -> Vec<F> {
        let (z_per_r, signs) = decode(p);
        let mut c = vec![F::zero(); nvars];
        for (r, d) in diff.iter().enumerate() {
            let z = z_per_r[r];
            for (i, w) in d.iter().enumerate() {
                if w.is_zero() {
                    continue;
                }
                let (x, a) = (i / no, i % no);
                for (eo, &pos) in signs[r].iter().enumerate() {
                    let idx = (x * zn + z) * layout.num_outputs + a * en + eo;
                    if pos {
                        c[idx] += w;
                    } else {
                        c[idx] -= w;
                    }
                }
            }
        }
        c
    };
    // The LP of a pattern splits over the independent blocks of the polytope
    // (for extension polytopes, one per Eve input), and patterns repeat block
    // objectives, so each distinct block objective is solved once.
    let blocks = polytope.blocks();
    let prepared: Vec<PreparedLp<F>> = blocks.iter().map(|(_, p)| PreparedLp::new(p)).collect();
    let restrict =
        |c: &[F], b: usize| -> Vec<F> { blocks[b].0.iter().map(|&j| c[j].clone()).collect() };
    let mut keys: Vec<HashMap<Vec<F>, usize>> = vec![HashMap::new(); blocks.len()];
    let mut ordered: Vec<Vec<Vec<F>>> = vec![Vec::new(); blocks.len()];
    let mut pattern_keys: Vec<Vec<usize>> = Vec::with_capacity(patterns as usize);
    for p in 0..patterns {
        let c = objective(p);
        let ids = (0..blocks.len())
            .map(|b| {
                let cb = restrict(&c, b);
                let next = keys[b].len();
                *keys[b].entry(cb.clone()).or_insert_with(|| {
                    ordered[b].push(cb);
                    next
                })
            })
            .collect();
        pattern_keys.push(ids);
    }
    let solve = |b: usize, c: &[F], warm: &mut WarmStart| -> Result<(F, Vec<F>)> {
        let sol = prepared[b].solve_warm(c, Sense::Maximize, warm)?;
        match (sol.value, sol.witness) {
            (Some(v), Some(w)) => Ok((v, w)),
            _ => Err(Error::Lp(format!(
                "block {b}: polytope is {:?}",
                sol.status
            ))),
        }
    };
    // Neighbouring objectives share a warm-started float tableau.
    let jobs: Vec<(usize, usize)> = ordered
        .iter()
        .enumerate()
        .flat_map(|(b, objs)| (0..objs.len()).step_by(WARM_CHUNK).map(move |k| (b, k)))
        .collect();
    let solved: Vec<Vec<(usize, usize, F, Vec<F>)>> = jobs
        .into_par_iter()
        .map(|(b, k)| {
            let mut warm = WarmStart::default();
            (k..(k + WARM_CHUNK).min(ordered[b].len()))
                .map(|i| solve(b, &ordered[b][i], &mut warm).map(|(v, w)| (b, i, v, w)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut block_values: Vec<Vec<Option<(F, Vec<F>)>>> =
        ordered.iter().map(|o| vec![None; o.len()]).collect();
    for (b, i, v, w) in solved.into_iter().flatten() {
        block_values[b][i] = Some((v, w));
    }
    let value_of = |p: usize| -> F {
        pattern_keys[p]
            .iter()
            .enumerate()
            .fold(F::zero(), |acc, (b, &i)| {
                acc + &block_values[b][i].as_ref().expect("every key is solved").0
            })
    };
    let (best, value) = (1..pattern_keys.len()).fold((0, value_of(0)), |(bp, bv), p| {
        let v = value_of(p);
        if v > bv {
            (p, v)
        } else {
            (bp, bv)
        }
    });
    let mut point = vec![F::zero(); nvars];
    for (b, &i) in pattern_keys[best].iter().enumerate() {
        let w = &block_values[b][i].as_ref().expect("every key is solved").1;
        for (&j, x) in blocks[b].0.iter().zip(w) {
            point[j] = x.clone();
        }
    }
    let p = best as u128;
    let witness = DenseBox::new(e.n, alph, point)?;
    let check = distinguishability(e, f, &witness)?;
    if check.value != value {
        return Err(Error::Internal(format!(
            "norm at the LP witness ({}) differs from the LP optimum ({value})",
            check.value
        )));
    }
    let (z_per_r, signs) = decode(p);
    Ok(DistinguishReport {
        value,
        z_per_r,
        signs,
        witness: Some(witness),
        patterns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::{q_box, zero_output_box};
    use crate::linprog::{extension_polytope, ns_polytope};
    use crate::numerics::{int, rat, Rational};

    /// Result = parity a⊕b of a single CHSH round, uniform inputs.
    fn parity_channel() -> Channel<Rational> {
        Channel::from_fn(1, Alphabets::chsh(), vec![rat(1, 4); 4], 2, |_, a, r| {
            int(i64::from(((a >> 1) ^ (a & 1)) == r))
        })
        .unwrap()
    }

    fn constant_channel(r0: Rational) -> Channel<Rational> {
        let r1 = int(1) - &r0;
        Channel::from_fn(
            1,
            Alphabets::chsh(),
            vec![rat(1, 4); 4],
            2,
            move |_, _, r| {
                if r == 0 {
                    r0.clone()
                } else {
                    r1.clone()
                }
            },
        )
        .unwrap()
    }

    #[test]
    fn apply_examples() {
        let c = constant_channel(rat(1, 3));
        assert_eq!(
            apply(&c, &q_box(&rat(3, 4)).unwrap()).unwrap(),
            vec![rat(1, 3), rat(2, 3)]
        );
        assert_eq!(
            apply(&parity_channel(), &zero_output_box()).unwrap(),
            vec![int(1), int(0)]
        );
        // a⊕b = 0 on half the cells of the uniform box
        let u = DenseBox::uniform(1, Alphabets::chsh()).unwrap();
        assert_eq!(
            apply(&parity_channel(), &u).unwrap(),
            vec![rat(1, 2), rat(1, 2)]
        );
    }

    #[test]
    fn trivial_eve_reduces_to_l1_distance() {
        let (e, f) = (parity_channel(), constant_channel(rat(1, 4)));
        let b = q_box(&rat(3, 4)).unwrap();
        let d = distinguishability(&e, &f, &b).unwrap().value;
        let (pe, pf) = (apply(&e, &b).unwrap(), apply(&f, &b).unwrap());
        let l1 = pe
            .iter()
            .zip(&pf)
            .fold(int(0), |acc, (x, y)| acc + (x - y).magnitude());
        assert_eq!(d, l1);
        assert_eq!(distinguishability(&e, &e, &b).unwrap().value, int(0));
    }

    #[test]
    fn diamond_dominates_every_member() {
        let (e, f) = (parity_channel(), constant_channel(rat(1, 2)));
        let eve = Interface::new(1, 2);
        let alph = Alphabets::chsh().with_eve(eve).unwrap();
        let poly = ns_polytope::<Rational>(1, &alph).unwrap();
        let rep = diamond_over_polytope(&e, &f, &poly, Some(eve), 1 << 20).unwrap();
        assert_eq!(rep.patterns, 4 * 4);
        let w = rep.witness.clone().unwrap();
        assert!(poly.contains(w.entries()));
        // The parity of a PR box is deterministic given the inputs; the best
        // distinguisher makes the result deterministic.
        assert_eq!(rep.value, int(1));
        let same = diamond_over_polytope(&e, &e, &poly, Some(eve), 1 << 20).unwrap();
        assert_eq!(same.value, int(0));
        assert!(matches!(
            diamond_over_polytope(&e, &f, &poly, Some(eve), 8),
            Err(Error::PatternCap { .. })
        ));
    }

    #[test]
    fn block_split_keeps_the_extension_maximum() {
        let (e, f) = (parity_channel(), constant_channel(rat(1, 3)));
        let tau = q_box(&rat(3, 4)).unwrap();
        let eve = Interface::new(2, 2);
        let ext = extension_polytope(&tau, eve.outputs, eve.inputs).unwrap();
        assert_eq!(ext.blocks().len(), 2);
        // Eve's no-signaling rows are implied; adding them links the blocks.
        let mut linked = ext.clone();
        let ns = ns_polytope::<Rational>(1, &Alphabets::chsh().with_eve(eve).unwrap()).unwrap();
        for row in ns.eq_rows() {
            linked.add_eq(row.coeffs.clone(), row.rhs.clone()).unwrap();
        }
        assert_eq!(linked.blocks().len(), 1);
        let split = diamond_over_polytope(&e, &f, &ext, Some(eve), 1 << 20).unwrap();
        let whole = diamond_over_polytope(&e, &f, &linked, Some(eve), 1 << 20).unwrap();
        assert_eq!(split.value, whole.value);
        assert!(linked.contains(split.witness.unwrap().entries()));
    }

    #[test]
    fn ignoring_a_party_keeps_the_result_law() {
        let a_only = Channel::from_fn(
            1,
            Alphabets::single(2, 2),
            vec![rat(1, 2); 2],
            2,
            |x, a, r| int(i64::from((x ^ a) == r)),
        )
        .unwrap();
        let lifted = a_only.with_ignored_party(Interface::binary()).unwrap();
        let b = q_box(&rat(3, 4)).unwrap();
        // Alice's marginal of Q(p) is uniform, so x⊕a is uniform.
        assert_eq!(apply(&lifted, &b).unwrap(), vec![rat(1, 2), rat(1, 2)]);
        assert_eq!(lifted.px(), &[rat(1, 4), rat(1, 4), rat(1, 4), rat(1, 4)]);
    }
}
