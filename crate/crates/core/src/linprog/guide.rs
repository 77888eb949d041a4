//! Floating-point simplex used only to propose a primal/dual pair, which the
//! exact layer then rounds and certifies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Polytope;
use crate::numerics::Field;

const EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;
/// Scale of the lower-bound shift `x ≥ −ε` that breaks degeneracy.
const SHIFT: f64 = 1e-8;
const REFINE_STEPS: usize = 2;
const DEGENERATE_STREAK: usize = 50;

/// Phase-I-feasible tableau over `f64`, reusable for many objectives.
#[derive(Debug, Clone)]
pub(super) struct FloatLp {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    nv: usize,
    n_struct: usize,
    /// Per original row: its artificial column and the sign applied to the row.
    artificial: Vec<Option<usize>>,
    sign: Vec<f64>,
    /// Per original row: its slack column, for ≤ rows.
    slack: Vec<Option<usize>>,
    /// Right-hand sides split as `b₀ + √2·b₁`, in the polytope's own signs.
    rhs_parts: [Vec<f64>; 2],
    /// Sparse structural columns of the sign-adjusted rows.
    cols: Vec<Vec<(usize, f64)>>,
    /// Polytope row of each tableau row; dependent equalities are left out.
    orig: Vec<usize>,
    total_rows: usize,
    pub(super) pivots: usize,
}

/// An approximate optimal pair for `max c·x`, each coordinate split as
/// `u₀ + √2·u₁` so both parts can be rounded to rationals.
#[derive(Debug, Clone)]
pub(super) struct FloatPoint {
    pub x: [Vec<f64>; 2],
    /// One multiplier per eq row, then per le row, in the polytope's own signs.
    pub y: [Vec<f64>; 2],
    pub pivots: usize,
    /// Basic column per kept row: a variable `j < nv`, the slack `nv + l` of
    /// le row `l`, or `None` for an artificial.
    pub basis: Vec<Option<usize>>,
    /// Polytope row (eq then le) of each kept row.
    pub rows: Vec<usize>,
}

/// `(u₀, u₁)` with `v = u₀ + √2·u₁`.
pub(super) fn split<F: Field>(v: &F) -> [f64; 2] {
    let q = v.to_qsqrt2();
    [q.rational_part().as_f64(), q.sqrt2_part().as_f64()]
}

impl FloatLp {
    /// Phase I; `None` when the float solve reports infeasibility or stalls.
    pub(super) fn prepare<F: Field>(polytope: &Polytope<F>) -> Option<Self> {
        let nv = polytope.nvars();
        let (eq, le) = (polytope.eq_rows(), polytope.le_rows());
        let n_struct = nv + le.len();
        let keep = independent_rows(eq.iter().map(|r| &r.coeffs[..]), n_struct);
        let orig: Vec<usize> = (0..eq.len() + le.len())
            .filter(|&i| i >= eq.len() || keep[i])
            .collect();
        let m = orig.len();
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut sign = Vec::with_capacity(m);
        let mut slack = Vec::with_capacity(m);
        let mut needs_art = Vec::with_capacity(m);
        let mut rhs_parts = [Vec::with_capacity(m), Vec::with_capacity(m)];
        // Deterministic shifts in [ε, 2ε); the pivoting runs on the shifted
        // right-hand side `b + Aε`, the reported point on `b` itself.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let shift: Vec<f64> = (0..n_struct)
            .map(|_| SHIFT * (1.0 + rng.gen::<f64>()))
            .collect();
        let all = eq
            .iter()
            .map(|r| (r, None))
            .chain(le.iter().enumerate().map(|(i, r)| (r, Some(nv + i))));
        let all = all
            .enumerate()
            .filter(|(i, _)| i >= &eq.len() || keep[*i])
            .map(|(_, r)| r);
        for (row, s) in all {
            let mut dense = vec![0.0; n_struct];
            for (j, c) in &row.coeffs {
                dense[*j] += c.as_f64();
            }
            if let Some(s) = s {
                dense[s] = 1.0;
            }
            let [b0, b1] = split(&row.rhs);
            rhs_parts[0].push(b0);
            rhs_parts[1].push(b1);
            let mut b =
                row.rhs.as_f64() + dense.iter().zip(&shift).map(|(a, e)| a * e).sum::<f64>();
            let sg = if b < 0.0 { -1.0 } else { 1.0 };
            if sg < 0.0 {
                dense.iter_mut().for_each(|v| *v = -*v);
                b = -b;
            }
            needs_art.push(s.is_none() || sg < 0.0);
            sign.push(sg);
            slack.push(s);
            rows.push(dense);
            rhs.push(b);
        }
        let mut cols = vec![Vec::new(); n_struct];
        for (i, row) in rows.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        let n_art = needs_art.iter().filter(|&&a| a).count();
        let ncols = n_struct + n_art;
        let mut basis = vec![0; m];
        let mut artificial = vec![None; m];
        let mut next = n_struct;
        for (r, row) in rows.iter_mut().enumerate() {
            row.resize(ncols, 0.0);
            if needs_art[r] {
                row[next] = 1.0;
                basis[r] = next;
                artificial[r] = Some(next);
                next += 1;
            } else {
                basis[r] = slack[r]?;
            }
        }
        let mut lp = Self {
            rows,
            rhs,
            basis,
            nv,
            n_struct,
            artificial,
            sign,
            slack,
            rhs_parts,
            cols,
            orig,
            total_rows: eq.len() + le.len(),
            pivots: 0,
        };
        if n_art > 0 {
            let mut c = vec![0.0; ncols];
            c[n_struct..].iter_mut().for_each(|v| *v = -1.0);
            let mut cost = lp.price(&c);
            let value = lp.run(&mut cost, ncols)?;
            if value < -EPS * (1.0 + lp.rhs.iter().map(|v| v.abs()).sum::<f64>()) {
                return None;
            }
            for r in 0..lp.rows.len() {
                if lp.basis[r] < n_struct {
                    continue;
                }
                let best = (0..n_struct)
                    .filter(|&j| lp.rows[r][j].abs() > EPS)
                    .max_by(|&a, &b| lp.rows[r][a].abs().total_cmp(&lp.rows[r][b].abs()));
                match best {
                    Some(c) => lp.pivot(r, c, &mut cost),
                    None => {
                        // Redundant row; keep it so every dual multiplier stays readable.
                        lp.rows[r][..n_struct].iter_mut().for_each(|v| *v = 0.0);
                        lp.rhs[r] = 0.0;
                    }
                }
            }
        }
        Some(lp)
    }

    fn ncols(&self) -> usize {
        self.rows.first().map_or(self.n_struct, Vec::len)
    }

    fn pivot(&mut self, r: usize, c: usize, cost: &mut [f64]) {
        let inv = 1.0 / self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v *= inv);
        self.rhs[r] *= inv;
        self.rows[r][c] = 1.0;
        let support: Vec<usize> = (0..self.ncols())
            .filter(|&j| self.rows[r][j] != 0.0)
            .collect();
        let (prow, prhs) = (self.rows[r].clone(), self.rhs[r]);
        for i in 0..self.rows.len() {
            let f = self.rows[i][c];
            if i == r || f == 0.0 {
                continue;
            }
            let row = &mut self.rows[i];
            for &j in &support {
                row[j] -= f * prow[j];
            }
            row[c] = 0.0;
            self.rhs[i] -= f * prhs;
        }
        let f = cost[c];
        if f != 0.0 {
            for &j in &support {
                cost[j] -= f * prow[j];
            }
            cost[c] = 0.0;
            let last = cost.len() - 1;
            cost[last] += f * prhs;
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Reduced costs for `c`, with the objective value in the final slot.
    fn price(&self, c: &[f64]) -> Vec<f64> {
        let mut cost = c.to_vec();
        cost.resize(self.ncols(), 0.0);
        let mut value = 0.0;
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = c.get(b).copied().unwrap_or(0.0);
            if cb == 0.0 {
                continue;
            }
            for (j, v) in self.rows[r].iter().enumerate() {
                if *v != 0.0 {
                    cost[j] -= cb * v;
                }
            }
            value += cb * self.rhs[r];
        }
        cost.push(value);
        cost
    }

    /// Maximizes over columns `< active`; returns the objective value, or
    /// `None` if unbounded or stalled.
    fn run(&mut self, cost: &mut [f64], active: usize) -> Option<f64> {
        let mut streak = 0usize;
        loop {
            if self.pivots > MAX_PIVOTS {
                return None;
            }
            let entering = if streak >= DEGENERATE_STREAK {
                (0..active).find(|&j| cost[j] > EPS)
            } else {
                (0..active)
                    .filter(|&j| cost[j] > EPS)
                    .max_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(b.cmp(&a)))
            };
            let Some(c) = entering else {
                return cost.last().copied();
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][c];
                if a <= EPS {
                    continue;
                }
                let ratio = self.rhs[r].max(0.0) / a;
                let better = match leave {
                    None => true,
                    Some((lr, lv)) => {
                        ratio < lv - 1e-12
                            || (ratio <= lv + 1e-12 && self.basis[r] < self.basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let (r, ratio) = leave?;
            streak = if ratio <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(r, c, cost);
        }
    }

    /// Phase II for `max (c₀ + √2·c₁)·x` from a copy of the phase-I tableau,
    /// or of `warm`.
    ///
    /// The returned parts are recomputed from the final basis inverse, which
    /// the tableau holds in the columns that started as the identity.
    ///
    /// A warm start is the optimal tableau of an earlier objective, which is
    /// still primal feasible. The final tableau is returned for the next call.
    pub(super) fn solve_from(
        &self,
        warm: Option<&FloatLp>,
        c: &[[f64; 2]],
    ) -> Option<(FloatPoint, FloatLp)> {
        let cf: Vec<f64> = c
            .iter()
            .map(|[a, b]| a + std::f64::consts::SQRT_2 * b)
            .collect();
        let optimize = |start: &FloatLp| {
            let mut lp = start.clone();
            lp.pivots = 0;
            let mut cost = lp.price(&cf);
            lp.run(&mut cost, lp.n_struct).map(|_| lp)
        };
        let lp = warm.and_then(optimize).or_else(|| optimize(self))?;
        let point = lp.extract(c)?;
        Some((point, lp))
    }

    fn extract(&self, c: &[[f64; 2]]) -> Option<FloatPoint> {
        let lp = self;
        let m = lp.rows.len();
        let unit: Vec<usize> = (0..m)
            .map(|i| lp.artificial[i].or(lp.slack[i]))
            .collect::<Option<_>>()?;
        let mut art_row = vec![0; lp.ncols() - lp.n_struct];
        for (i, a) in lp.artificial.iter().enumerate() {
            if let Some(a) = a {
                art_row[a - lp.n_struct] = i;
            }
        }
        let column = |b: usize| -> Vec<(usize, f64)> {
            if b < lp.n_struct {
                lp.cols[b].clone()
            } else {
                vec![(art_row[b - lp.n_struct], 1.0)]
            }
        };
        let basic_cols: Vec<Vec<(usize, f64)>> = lp.basis.iter().map(|&b| column(b)).collect();
        let binv = |v: &[f64]| -> Vec<f64> {
            (0..m)
                .map(|r| (0..m).map(|i| lp.rows[r][unit[i]] * v[i]).sum())
                .collect()
        };
        let binv_t = |v: &[f64]| -> Vec<f64> {
            (0..m)
                .map(|i| (0..m).map(|r| v[r] * lp.rows[r][unit[i]]).sum())
                .collect()
        };

        let mut x = [vec![0.0; lp.nv], vec![0.0; lp.nv]];
        let mut y = [vec![0.0; lp.total_rows], vec![0.0; lp.total_rows]];
        for part in 0..2 {
            // B·x_B = b, refined against the sparse columns.
            let b: Vec<f64> = (0..m).map(|i| lp.sign[i] * lp.rhs_parts[part][i]).collect();
            let mut xb = binv(&b);
            for _ in 0..REFINE_STEPS {
                let mut res = b.clone();
                for (r, col) in basic_cols.iter().enumerate() {
                    for &(i, a) in col {
                        res[i] -= a * xb[r];
                    }
                }
                xb.iter_mut().zip(binv(&res)).for_each(|(v, d)| *v += d);
            }
            for (r, &bcol) in lp.basis.iter().enumerate() {
                if bcol < lp.nv {
                    x[part][bcol] = xb[r];
                }
            }
            // yᵀB = c_B, refined the same way.
            let cb: Vec<f64> = lp
                .basis
                .iter()
                .map(|&b| c.get(b).map_or(0.0, |v| v[part]))
                .collect();
            let mut yb = binv_t(&cb);
            for _ in 0..REFINE_STEPS {
                let res: Vec<f64> = basic_cols
                    .iter()
                    .zip(&cb)
                    .map(|(col, cr)| cr - col.iter().map(|&(i, a)| a * yb[i]).sum::<f64>())
                    .collect();
                yb.iter_mut().zip(binv_t(&res)).for_each(|(v, d)| *v += d);
            }
            for i in 0..m {
                y[part][lp.orig[i]] = lp.sign[i] * yb[i];
            }
        }
        let basis = lp
            .basis
            .iter()
            .map(|&b| (b < lp.n_struct).then_some(b))
            .collect();
        Some(FloatPoint {
            x,
            y,
            pivots: lp.pivots,
            basis,
            rows: lp.orig.clone(),
        })
    }
}

/// Flags a maximal linearly independent subset of the rows, scanning in order.
fn independent_rows<'a, F: Field + 'a>(
    rows: impl Iterator<Item = &'a [(usize, F)]>,
    ncols: usize,
) -> Vec<bool> {
    let mut pivots: Vec<(usize, Vec<f64>)> = Vec::new();
    rows.map(|coeffs| {
        let mut v = vec![0.0; ncols];
        for (j, c) in coeffs {
            v[*j] += c.as_f64();
        }
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (col, p) in &pivots {
            let f = v[*col];
            if f != 0.0 {
                v.iter_mut().zip(p).for_each(|(a, b)| *a -= f * b);
                v[*col] = 0.0;
            }
        }
        let (col, big) = v.iter().enumerate().fold((0, 0.0f64), |best, (j, x)| {
            if x.abs() > best.1 {
                (j, x.abs())
            } else {
                best
            }
        });
        if big <= EPS * scale.max(1.0) {
            return false;
        }
        let inv = 1.0 / v[col];
        v.iter_mut().for_each(|a| *a *= inv);
        pivots.push((col, v));
        true
    })
    .collect()
}

/// Best rational approximation `p/q` with `|v − p/q| ≤ tol` and `q ≤ max_den`,
/// by continued fractions.
pub(super) fn approx_rational(v: f64, tol: f64, max_den: i64) -> Option<(i64, i64)> {
    if !v.is_finite() || v.abs() > 1e12 {
        return None;
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut rest = v;
    for _ in 0..64 {
        let a = rest.floor();
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (v - h1 as f64 / k1 as f64).abs() <= tol {
            return Some((h1, k1));
        }
        let frac = rest - a;
        if frac == 0.0 {
            return None;
        }
        rest = 1.0 / frac;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_approximation() {
        assert_eq!(approx_rational(0.75, 1e-12, 1000), Some((3, 4)));
        assert_eq!(approx_rational(-1.0 / 3.0, 1e-12, 1000), Some((-1, 3)));
        assert_eq!(approx_rational(0.0, 1e-12, 1000), Some((0, 1)));
        assert_eq!(approx_rational(std::f64::consts::SQRT_2, 1e-12, 1000), None);
    }
}
