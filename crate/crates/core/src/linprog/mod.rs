//! Polytopes over box coordinates and an exact simplex solver.

use std::collections::HashMap;

use crate::boxes::{Alphabets, DenseBox, Layout};
use crate::error::{Error, Result};
use crate::numerics::{rat, solve_sparse, Field, QSqrt2, Rational};
use num_traits::Zero;

mod guide;

/// `Σ coeffs·x (=|≤) rhs`, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow<F> {
    pub coeffs: Vec<(usize, F)>,
    pub rhs: F,
}

impl<F: Field> LinearRow<F> {
    pub fn new(coeffs: Vec<(usize, F)>, rhs: F) -> Self {
        Self { coeffs, rhs }
    }

    pub fn eval(&self, x: &[F]) -> F {
        self.coeffs
            .iter()
            .fold(F::zero(), |acc, (j, c)| acc + &(c.clone() * &x[*j]))
    }
}

/// `{x ≥ 0 : eq rows hold with equality, le rows hold with ≤}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope<F> {
    nvars: usize,
    eq: Vec<LinearRow<F>>,
    le: Vec<LinearRow<F>>,
}

impl<F: Field> Polytope<F> {
    pub fn new(nvars: usize) -> Self {
        Self {
            nvars,
            eq: Vec::new(),
            le: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eq_rows(&self) -> &[LinearRow<F>] {
        &self.eq
    }

    pub fn le_rows(&self) -> &[LinearRow<F>] {
        &self.le
    }

    fn check_row(&self, coeffs: &[(usize, F)]) -> Result<()> {
        match coeffs.iter().find(|(j, _)| *j >= self.nvars) {
            Some((j, _)) => Err(Error::Shape(format!(
                "variable {j} out of range (nvars = {})",
                self.nvars
            ))),
            None => Ok(()),
        }
    }

    pub fn add_eq(&mut self, coeffs: Vec<(usize, F)>, rhs: F) -> Result<()> {
        self.check_row(&coeffs)?;
        self.eq.push(LinearRow::new(coeffs, rhs));
        Ok(())
    }

    pub fn add_le(&mut self, coeffs: Vec<(usize, F)>, rhs: F) -> Result<()> {
        self.check_row(&coeffs)?;
        self.le.push(LinearRow::new(coeffs, rhs));
        Ok(())
    }

    pub fn add_ge(&mut self, coeffs: Vec<(usize, F)>, rhs: F) -> Result<()> {
        let neg = coeffs.into_iter().map(|(j, c)| (j, -c)).collect();
        self.add_le(neg, -rhs)
    }

    /// First violated constraint, described, or `None` if `x` is feasible.
    pub fn violation(&self, x: &[F]) -> Option<String> {
        if x.len() != self.nvars {
            return Some(format!(
                "point has {} coordinates, polytope has {}",
                x.len(),
                self.nvars
            ));
        }
        if let Some(j) = x.iter().position(Field::is_neg) {
            return Some(format!("x[{j}] = {} is negative", x[j]));
        }
        if let Some(i) = self.eq.iter().position(|r| r.eval(x) != r.rhs) {
            return Some(format!(
                "equality row {i}: {} != {}",
                self.eq[i].eval(x),
                self.eq[i].rhs
            ));
        }
        if let Some(i) = self.le.iter().position(|r| r.eval(x) > r.rhs) {
            return Some(format!(
                "inequality row {i}: {} > {}",
                self.le[i].eval(x),
                self.le[i].rhs
            ));
        }
        None
    }

    /// Exact membership test by substitution.
    pub fn contains(&self, x: &[F]) -> bool {
        self.violation(x).is_none()
    }

    /// Splits into independent blocks: the connected components of the
    /// variables, two variables being linked when a row uses both. Each block
    /// is its own variable list and the polytope of its rows, renumbered.
    /// The polytope is the product of the blocks. Rows without variables go
    /// to the first block.
    pub fn blocks(&self) -> Vec<(Vec<usize>, Polytope<F>)> {
        let mut parent: Vec<usize> = (0..self.nvars).collect();
        fn root(parent: &mut [usize], mut v: usize) -> usize {
            while parent[v] != v {
                parent[v] = parent[parent[v]];
                v = parent[v];
            }
            v
        }
        for row in self.eq.iter().chain(&self.le) {
            if let Some(&(first, _)) = row.coeffs.first() {
                for &(j, _) in &row.coeffs[1..] {
                    let (a, b) = (root(&mut parent, first), root(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut block_of = vec![usize::MAX; self.nvars];
        let mut local = vec![0; self.nvars];
        let mut vars: Vec<Vec<usize>> = Vec::new();
        for v in 0..self.nvars {
            let r = root(&mut parent, v);
            if block_of[r] == usize::MAX {
                block_of[r] = vars.len();
                vars.push(Vec::new());
            }
            let b = block_of[r];
            block_of[v] = b;
            local[v] = vars[b].len();
            vars[b].push(v);
        }
        if vars.is_empty() {
            return vec![(Vec::new(), self.clone())];
        }
        let mut polys: Vec<Polytope<F>> = vars.iter().map(|v| Polytope::new(v.len())).collect();
        let place = |row: &LinearRow<F>| {
            let b = row.coeffs.first().map_or(0, |(j, _)| block_of[*j]);
            let coeffs = row
                .coeffs
                .iter()
                .map(|(j, c)| (local[*j], c.clone()))
                .collect();
            (b, LinearRow::new(coeffs, row.rhs.clone()))
        };
        for row in &self.eq {
            let (b, r) = place(row);
            polys[b].eq.push(r);
        }
        for row in &self.le {
            let (b, r) = place(row);
            polys[b].le.push(r);
        }
        vars.into_iter().zip(polys).collect()
    }

    /// Same polytope with every row multiplied by a positive scalar.
    pub fn scaled(&self, factor: &F) -> Result<Self> {
        if !factor.is_pos() {
            return Err(Error::Domain("row scaling needs a positive factor".into()));
        }
        let scale = |r: &LinearRow<F>| {
            LinearRow::new(
                r.coeffs
                    .iter()
                    .map(|(j, c)| (*j, c.clone() * factor))
                    .collect(),
                r.rhs.clone() * factor,
            )
        };
        Ok(Self {
            nvars: self.nvars,
            eq: self.eq.iter().map(scale).collect(),
            le: self.le.iter().map(scale).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// How an optimum was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpMethod {
    /// A floating-point primal/dual pair, rounded to exact values and
    /// certified by feasibility of both and equal objective values.
    RoundedDual,
    /// The float solve's final basis, with its primal and dual solutions
    /// recomputed exactly and certified the same way.
    ExactBasis,
    /// The exact two-phase simplex.
    Simplex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<F> {
    pub status: LpStatus,
    pub method: LpMethod,
    /// Present iff optimal.
    pub value: Option<F>,
    /// Present iff optimal; satisfies every constraint exactly.
    pub witness: Option<Vec<F>>,
    pub pivots: usize,
}

impl<F> LpSolution<F> {
    fn without_point(status: LpStatus, pivots: usize) -> Self {
        Self {
            status,
            method: LpMethod::Simplex,
            value: None,
            witness: None,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Degenerate pivots tolerated under the largest-coefficient rule before
/// switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

/// Dense tableau `[A | b]` with basis bookkeeping and a reduced-cost row.
struct Tableau<F> {
    rows: Vec<Vec<F>>,
    rhs: Vec<F>,
    basis: Vec<usize>,
    cost: Vec<F>,
    cost_value: F,
    pivots: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl<F: Field> Tableau<F> {
    fn ncols(&self) -> usize {
        self.cost.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        if !inv.is_one() {
            for v in self.rows[r].iter_mut().filter(|v| !v.is_zero()) {
                *v *= &inv;
            }
            self.rhs[r] *= &inv;
        }
        let support: Vec<usize> = (0..self.ncols())
            .filter(|&j| !self.rows[r][j].is_zero())
            .collect();
        let (prow, prhs) = (self.rows[r].clone(), self.rhs[r].clone());
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for &j in &support {
                let d = f.clone() * &prow[j];
                self.rows[i][j] -= &d;
            }
            let d = f * &prhs;
            self.rhs[i] -= &d;
        }
        if !self.cost[c].is_zero() {
            let f = self.cost[c].clone();
            for &j in &support {
                let d = f.clone() * &prow[j];
                self.cost[j] -= &d;
            }
            self.cost_value += &(f * &prhs);
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Sets the reduced costs for maximizing `c·x` under the current basis.
    fn price(&mut self, c: &[F]) {
        self.cost = c.to_vec();
        self.cost_value = F::zero();
        for (r, &b) in self.basis.clone().iter().enumerate() {
            let cb = c[b].clone();
            if cb.is_zero() {
                continue;
            }
            for j in 0..self.ncols() {
                if !self.rows[r][j].is_zero() {
                    let d = cb.clone() * &self.rows[r][j];
                    self.cost[j] -= &d;
                }
            }
            self.cost_value += &(cb * &self.rhs[r]);
        }
    }

    /// Primal simplex on the columns `< active`, maximizing.
    fn run(&mut self, active: usize) -> Outcome {
        let mut streak = 0usize;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let entering = if bland {
                (0..active).find(|&j| self.cost[j].is_pos())
            } else {
                (0..active)
                    .filter(|&j| self.cost[j].is_pos())
                    .max_by(|&a, &b| self.cost[a].cmp(&self.cost[b]).then(b.cmp(&a)))
            };
            let Some(c) = entering else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, F)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][c];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.rhs[r].clone() / a;
                let better = match &leave {
                    None => true,
                    Some((lr, lv)) => {
                        ratio < *lv || (ratio == *lv && self.basis[r] < self.basis[*lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((r, ratio)) = leave else {
                return Outcome::Unbounded;
            };
            streak = if ratio.is_zero() { streak + 1 } else { 0 };
            self.pivot(r, c);
        }
    }
}

fn check_objective<F>(polytope: &Polytope<F>, objective: &[F]) -> Result<()> {
    if objective.len() != polytope.nvars {
        return Err(Error::Shape(format!(
            "objective has {} coefficients, polytope has {} variables",
            objective.len(),
            polytope.nvars
        )));
    }
    Ok(())
}

fn signed<F: Field>(objective: &[F], sense: Sense) -> Vec<F> {
    match sense {
        Sense::Maximize => objective.to_vec(),
        Sense::Minimize => objective.iter().map(|v| -v.clone()).collect(),
    }
}

fn round_part(v: f64) -> Option<Rational> {
    if v.abs() < 1e-10 {
        return Some(Rational::zero());
    }
    let (num, den) = guide::approx_rational(v, 1e-10 * v.abs().max(1.0), 100_000_000)?;
    Some(rat(num, den))
}

fn round_to<F: Field>(parts: [f64; 2]) -> Option<F> {
    let q = QSqrt2::new(round_part(parts[0])?, round_part(parts[1])?);
    F::from_qsqrt2(&q)
}

/// Exact optimality check for `max c·x`: `x` feasible, `y` dual feasible,
/// and `c·x = b·y`.
fn is_certificate<F: Field>(polytope: &Polytope<F>, c: &[F], x: &[F], y: &[F]) -> bool {
    let n_eq = polytope.eq.len();
    if y[n_eq..].iter().any(Field::is_neg) || !polytope.contains(x) {
        return false;
    }
    let mut reduced = vec![F::zero(); polytope.nvars];
    let mut bound = F::zero();
    for (row, yi) in polytope.eq.iter().chain(&polytope.le).zip(y) {
        if yi.is_zero() {
            continue;
        }
        for (j, a) in &row.coeffs {
            reduced[*j] += &(a.clone() * yi);
        }
        bound += &(row.rhs.clone() * yi);
    }
    if reduced.iter().zip(c).any(|(r, cj)| r < cj) {
        return false;
    }
    let value = c
        .iter()
        .zip(x)
        .fold(F::zero(), |acc, (a, b)| acc + &(a.clone() * b));
    value == bound
}

/// Rounds the float pair to exact values and checks it.
fn certify_rounded<F: Field>(
    polytope: &Polytope<F>,
    c: &[F],
    point: &guide::FloatPoint,
) -> Option<Vec<F>> {
    let round = |parts: &[Vec<f64>; 2]| -> Option<Vec<F>> {
        (0..parts[0].len())
            .map(|i| round_to::<F>([parts[0][i], parts[1][i]]))
            .collect()
    };
    let x = round(&point.x)?;
    let y = round(&point.y)?;
    is_certificate(polytope, c, &x, &y).then_some(x)
}

/// Recomputes the primal and dual solutions of the float's final basis
/// exactly, then checks them.
fn certify_basis<F: Field>(
    polytope: &Polytope<F>,
    c: &[F],
    point: &guide::FloatPoint,
) -> Option<Vec<F>> {
    let nv = polytope.nvars;
    let n_eq = polytope.eq.len();
    let all: Vec<&LinearRow<F>> = polytope.eq.iter().chain(&polytope.le).collect();
    let basis: Vec<usize> = point.basis.iter().copied().collect::<Option<_>>()?;
    let m = point.rows.len();
    let mut local = vec![None; all.len()];
    for (i, &r) in point.rows.iter().enumerate() {
        local[r] = Some(i);
    }
    let mut position = vec![None; nv];
    for (p, &b) in basis.iter().enumerate() {
        if b < nv {
            position[b] = Some(p);
        }
    }
    // B as rows over basic positions, and its transpose.
    let mut b_rows: Vec<Vec<(usize, F)>> = point
        .rows
        .iter()
        .map(|&r| {
            all[r]
                .coeffs
                .iter()
                .filter_map(|(j, a)| position[*j].map(|p| (p, a.clone())))
                .collect()
        })
        .collect();
    for (p, &b) in basis.iter().enumerate() {
        if b >= nv {
            b_rows[local[n_eq + b - nv]?].push((p, F::one()));
        }
    }
    let mut bt_rows: Vec<Vec<(usize, F)>> = vec![Vec::new(); m];
    for (i, row) in b_rows.iter().enumerate() {
        for (p, a) in row {
            bt_rows[*p].push((i, a.clone()));
        }
    }
    let rhs: Vec<F> = point.rows.iter().map(|&r| all[r].rhs.clone()).collect();
    let xb = solve_sparse(&b_rows, &rhs)?;
    let cb: Vec<F> = basis
        .iter()
        .map(|&b| if b < nv { c[b].clone() } else { F::zero() })
        .collect();
    let yb = solve_sparse(&bt_rows, &cb)?;
    let mut x = vec![F::zero(); nv];
    for (p, &b) in basis.iter().enumerate() {
        if b < nv {
            x[b] = xb[p].clone();
        }
    }
    let mut y = vec![F::zero(); all.len()];
    for (i, &r) in point.rows.iter().enumerate() {
        y[r] = yb[i].clone();
    }
    is_certificate(polytope, c, &x, &y).then_some(x)
}

/// A polytope with a floating-point phase I done once, for optimizing many
/// objectives over it.
#[derive(Debug, Clone)]
pub struct PreparedLp<'a, F> {
    polytope: &'a Polytope<F>,
    guide: Option<guide::FloatLp>,
}

impl<'a, F: Field> PreparedLp<'a, F> {
    pub fn new(polytope: &'a Polytope<F>) -> Self {
        Self {
            polytope,
            guide: guide::FloatLp::prepare(polytope),
        }
    }

    pub fn polytope(&self) -> &Polytope<F> {
        self.polytope
    }

    /// Exact optimum. Tries a certified rounding of the float optimum, then
    /// an exact solve on the float's optimal basis, and falls back to [`lp_solve_simplex`] whenever certification fails.
    pub fn solve(&self, objective: &[F], sense: Sense) -> Result<LpSolution<F>> {
        self.solve_warm(objective, sense, &mut WarmStart::default())
    }

    /// [`PreparedLp::solve`] with the float phase II started from the optimal
    /// basis of the previous objective solved through `warm`. Objectives that
    /// differ little then take few pivots. The result is certified the same way.
    pub fn solve_warm(
        &self,
        objective: &[F],
        sense: Sense,
        warm: &mut WarmStart,
    ) -> Result<LpSolution<F>> {
        check_objective(self.polytope, objective)?;
        if let Some(guide) = &self.guide {
            let c = signed(objective, sense);
            let parts: Vec<[f64; 2]> = c.iter().map(guide::split).collect();
            if warm.uses >= WARM_CHAIN {
                *warm = WarmStart::default();
            }
            let mut starts = vec![warm.tableau.take()];
            if starts[0].is_some() {
                starts.push(None);
            }
            for start in starts {
                let Some((point, tableau)) = guide.solve_from(start.as_ref(), &parts) else {
                    continue;
                };
                let certified = certify_rounded(self.polytope, &c, &point)
                    .map(|x| (x, LpMethod::RoundedDual))
                    .or_else(|| {
                        certify_basis(self.polytope, &c, &point).map(|x| (x, LpMethod::ExactBasis))
                    });
                if let Some((x, method)) = certified {
                    warm.uses = if start.is_some() { warm.uses + 1 } else { 1 };
                    warm.tableau = Some(tableau);
                    let value = objective
                        .iter()
                        .zip(&x)
                        .fold(F::zero(), |acc, (a, b)| acc + &(a.clone() * b));
                    return Ok(LpSolution {
                        status: LpStatus::Optimal,
                        method,
                        value: Some(value),
                        witness: Some(x),
                        pivots: guide.pivots + point.pivots,
                    });
                }
            }
            *warm = WarmStart::default();
        }
        lp_solve_simplex(self.polytope, objective, sense)
    }
}

/// Solves chained off one warm tableau before it is rebuilt from phase I,
/// bounding the float drift.
const WARM_CHAIN: usize = 64;

/// The float optimal tableau of the last solve, for [`PreparedLp::solve_warm`].
/// Only meaningful with the [`PreparedLp`] that produced it.
#[derive(Debug, Clone, Default)]
pub struct WarmStart {
    tableau: Option<guide::FloatLp>,
    uses: usize,
}

/// Optimizes `objective·x` over the polytope, exactly.
///
/// Optimal witnesses satisfy every constraint exactly; see [`PreparedLp::solve`].
pub fn lp_solve<F: Field>(
    polytope: &Polytope<F>,
    objective: &[F],
    sense: Sense,
) -> Result<LpSolution<F>> {
    PreparedLp::new(polytope).solve(objective, sense)
}

/// Optimizes `objective·x` over the polytope with an exact two-phase simplex.
///
/// Entering columns follow the largest reduced cost; long runs of degenerate
/// pivots fall back to Bland's rule, which guarantees termination. Optimal
/// witnesses are re-checked by substitution before being returned.
pub fn lp_solve_simplex<F: Field>(
    polytope: &Polytope<F>,
    objective: &[F],
    sense: Sense,
) -> Result<LpSolution<F>> {
    let nv = polytope.nvars;
    check_objective(polytope, objective)?;
    let m_le = polytope.le.len();
    let m = polytope.eq.len() + m_le;
    // Columns: structural, then one slack per ≤ row, then artificials.
    let n_struct = nv + m_le;
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut needs_artificial = Vec::with_capacity(m);
    let all_rows = polytope.eq.iter().map(|r| (r, None)).chain(
        polytope
            .le
            .iter()
            .enumerate()
            .map(|(i, r)| (r, Some(nv + i))),
    );
    for (row, slack) in all_rows {
        let mut dense = vec![F::zero(); n_struct];
        for (j, c) in &row.coeffs {
            dense[*j] += c;
        }
        if let Some(s) = slack {
            dense[s] = F::one();
        }
        let mut b = row.rhs.clone();
        let flip = b.is_neg();
        if flip {
            dense.iter_mut().for_each(|v| *v = -v.clone());
            b = -b;
        }
        needs_artificial.push(slack.is_none() || flip);
        rows.push(dense);
        rhs.push(b);
    }
    let n_art = needs_artificial.iter().filter(|&&a| a).count();
    let ncols = n_struct + n_art;
    let mut basis = vec![0; m];
    let mut next_art = n_struct;
    for (r, row) in rows.iter_mut().enumerate() {
        row.resize(ncols, F::zero());
        if needs_artificial[r] {
            row[next_art] = F::one();
            basis[r] = next_art;
            next_art += 1;
        } else {
            basis[r] = nv + (r - polytope.eq.len());
        }
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis,
        cost: vec![F::zero(); ncols],
        cost_value: F::zero(),
        pivots: 0,
    };

    if n_art > 0 {
        let mut phase1 = vec![F::zero(); ncols];
        phase1[n_struct..].iter_mut().for_each(|v| *v = -F::one());
        t.price(&phase1);
        t.run(ncols);
        if t.cost_value.is_neg() {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, t.pivots));
        }
        // Drive zero-level artificials out of the basis; rows that cannot be
        // cleared are linear combinations of the others.
        let mut r = 0;
        while r < t.rows.len() {
            if t.basis[r] < n_struct {
                r += 1;
                continue;
            }
            match (0..n_struct).find(|&j| !t.rows[r][j].is_zero()) {
                Some(c) => {
                    t.pivot(r, c);
                    r += 1;
                }
                None => {
                    t.rows.swap_remove(r);
                    t.rhs.swap_remove(r);
                    t.basis.swap_remove(r);
                }
            }
        }
        for row in &mut t.rows {
            row.truncate(n_struct);
        }
    }

    let mut c = vec![F::zero(); n_struct];
    for (j, v) in objective.iter().enumerate() {
        c[j] = match sense {
            Sense::Maximize => v.clone(),
            Sense::Minimize => -v.clone(),
        };
    }
    t.price(&c);
    if let Outcome::Unbounded = t.run(n_struct) {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, t.pivots));
    }

    let mut x = vec![F::zero(); nv];
    for (r, &b) in t.basis.iter().enumerate() {
        if b < nv {
            x[b] = t.rhs[r].clone();
        }
    }
    if let Some(v) = polytope.violation(&x) {
        return Err(Error::Lp(format!(
            "optimal witness fails substitution: {v}"
        )));
    }
    let value = objective
        .iter()
        .zip(&x)
        .fold(F::zero(), |acc, (c, v)| acc + &(c.clone() * v));
    let expected = match sense {
        Sense::Maximize => t.cost_value.clone(),
        Sense::Minimize => -t.cost_value.clone(),
    };
    if value != expected {
        return Err(Error::Lp(format!(
            "objective {value} disagrees with tableau value {expected}"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        method: LpMethod::Simplex,
        value: Some(value),
        witness: Some(x),
        pivots: t.pivots,
    })
}

/// Feasibility query: some point of the polytope, or `None`.
pub fn feasible_point<F: Field>(polytope: &Polytope<F>) -> Result<Option<Vec<F>>> {
    let zero = vec![F::zero(); polytope.nvars()];
    Ok(lp_solve(polytope, &zero, Sense::Maximize)?.witness)
}

fn normalization_rows<F: Field>(p: &mut Polytope<F>, layout: &Layout) -> Result<()> {
    for x in 0..layout.num_inputs {
        let row = (0..layout.num_outputs)
            .map(|a| (x * layout.num_outputs + a, F::one()))
            .collect();
        p.add_eq(row, F::one())?;
    }
    Ok(())
}

/// For every input that differs from its zero-projection on `sites`, the
/// marginal on the remaining sites must match that of the projection.
fn no_signaling_rows<F: Field>(
    p: &mut Polytope<F>,
    layout: &Layout,
    sites: &[usize],
) -> Result<()> {
    let mut rest_index = vec![0usize; layout.num_outputs];
    let mut rest_size = 1usize;
    for s in (0..layout.site_count()).rev() {
        if sites.contains(&s) {
            continue;
        }
        for (a, idx) in rest_index.iter_mut().enumerate() {
            *idx += layout.out_digit(a, s) * rest_size;
        }
        rest_size *= layout.out_radix(s);
    }
    let mut by_rest: Vec<Vec<usize>> = vec![Vec::new(); rest_size];
    for (a, &r) in rest_index.iter().enumerate() {
        by_rest[r].push(a);
    }
    let no = layout.num_outputs;
    for x in 0..layout.num_inputs {
        let x0 = sites.iter().fold(x, |acc, &s| {
            acc - layout.in_digit(x, s) * layout.in_stride(s)
        });
        if x0 == x {
            continue;
        }
        for outs in &by_rest {
            let mut row: Vec<(usize, F)> = outs.iter().map(|&a| (x * no + a, F::one())).collect();
            row.extend(outs.iter().map(|&a| (x0 * no + a, -F::one())));
            p.add_eq(row, F::zero())?;
        }
    }
    Ok(())
}

fn interface_sites(layout: &Layout) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = (0..layout.parties)
        .map(|p| (0..layout.n).map(|i| layout.site(p, i)).collect())
        .collect();
    groups.extend(layout.eve_site().map(|s| vec![s]));
    groups
}

/// Normalized boxes that are non-signaling between interfaces.
pub fn ns_polytope<F: Field>(n: usize, alphabets: &Alphabets) -> Result<Polytope<F>> {
    alphabets.dense_size(n)?;
    let layout = Layout::new(alphabets, n)?;
    let mut p = Polytope::new(layout.num_inputs * layout.num_outputs);
    normalization_rows(&mut p, &layout)?;
    if alphabets.interface_count() > 1 {
        for g in interface_sites(&layout) {
            no_signaling_rows(&mut p, &layout, &g)?;
        }
    }
    Ok(p)
}

/// Normalized boxes that are non-signaling between every round of every party
/// (and Eve).
pub fn round_ns_polytope<F: Field>(n: usize, alphabets: &Alphabets) -> Result<Polytope<F>> {
    alphabets.dense_size(n)?;
    let layout = Layout::new(alphabets, n)?;
    let mut p = Polytope::new(layout.num_inputs * layout.num_outputs);
    normalization_rows(&mut p, &layout)?;
    if layout.site_count() > 1 {
        for s in 0..layout.site_count() {
            no_signaling_rows(&mut p, &layout, &[s])?;
        }
    }
    Ok(p)
}

/// Non-signaling boxes with an Eve interface of the given size whose
/// AB-marginal equals `tau` for every Eve input. The polytope is a product
/// over Eve's inputs; see [`Polytope::blocks`].
pub fn extension_polytope<F: Field>(
    tau: &DenseBox<F>,
    eve_out: usize,
    eve_in: usize,
) -> Result<Polytope<F>> {
    if tau.alphabets().eve().is_some() {
        return Err(Error::Shape(
            "the marginal to extend must not have an Eve interface".into(),
        ));
    }
    let alph = tau
        .alphabets()
        .with_eve(crate::boxes::Interface::new(eve_in, eve_out))?;
    let n = tau.n();
    let layout = Layout::new(&alph, n)?;
    // Eve's own no-signaling rows follow from the marginal rows below and are
    // left out, so the Eve inputs stay independent blocks.
    let mut p = Polytope::new(layout.num_inputs * layout.num_outputs);
    normalization_rows(&mut p, &layout)?;
    for g in &interface_sites(&layout)[..layout.parties] {
        no_signaling_rows(&mut p, &layout, g)?;
    }
    let no = layout.num_outputs;
    let mut rows: HashMap<(usize, usize), Vec<(usize, F)>> = HashMap::new();
    for x in 0..layout.num_inputs {
        let (xs, z) = (layout.round_inputs(x), layout.eve_input(x));
        let tx = tau.layout().encode_inputs(&xs, 0);
        for a in 0..no {
            let ta = tau.layout().encode_outputs(&layout.round_outputs(a), 0);
            rows.entry((z * tau.num_inputs() + tx, ta))
                .or_default()
                .push((x * no + a, F::one()));
        }
    }
    let mut keys: Vec<_> = rows.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let (zx, ta) = key;
        let tx = zx % tau.num_inputs();
        let row = rows.remove(&key).expect("key taken from map");
        p.add_eq(row, tau.entry(tx, ta).clone())?;
    }
    Ok(p)
}
