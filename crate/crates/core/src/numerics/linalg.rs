use std::collections::BTreeSet;

use super::Field;

/// Reduced row echelon form in place; returns the pivot columns.
pub fn row_reduce<F: Field>(rows: &mut Vec<Vec<F>>, ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= &(f.clone() * pv);
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

pub fn rank<F: Field>(rows: &[Vec<F>], ncols: usize) -> usize {
    row_reduce(&mut rows.to_vec(), ncols).len()
}

/// Basis of `{v : rows·v = 0}`, one vector per free column, with a 1 in that column.
pub fn null_space<F: Field>(rows: &[Vec<F>], ncols: usize) -> Vec<Vec<F>> {
    let mut m = rows.to_vec();
    let pivots = row_reduce(&mut m, ncols);
    (0..ncols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![F::zero(); ncols];
            v[free] = F::one();
            for (row, &pc) in m.iter().zip(&pivots) {
                v[pc] = -row[free].clone();
            }
            v
        })
        .collect()
}

/// `row − f·pivot`, both sorted by column; exact zeros are dropped.
fn sub_scaled<F: Field>(row: Vec<(usize, F)>, pivot: &[(usize, F)], f: &F) -> Vec<(usize, F)> {
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let mut it = row.into_iter().peekable();
    let mut pt = pivot.iter().peekable();
    loop {
        let take_row = match (it.peek(), pt.peek()) {
            (None, None) => break,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (Some(a), Some(b)) if a.0 < b.0 => true,
            (Some(a), Some(b)) if a.0 > b.0 => false,
            _ => {
                let (j, v) = it.next().expect("peeked");
                let (_, p) = pt.next().expect("peeked");
                let d = v - &(f.clone() * p);
                if !d.is_zero() {
                    out.push((j, d));
                }
                continue;
            }
        };
        if take_row {
            out.push(it.next().expect("peeked"));
        } else {
            let (j, p) = pt.next().expect("peeked");
            out.push((*j, -(f.clone() * p)));
        }
    }
    out
}

/// Solves the square system `rows·x = rhs` exactly by sparse elimination,
/// pivoting on short rows and sparse columns. `None` if singular.
pub fn solve_sparse<F: Field>(rows: &[Vec<(usize, F)>], rhs: &[F]) -> Option<Vec<F>> {
    let n = rows.len();
    if rhs.len() != n {
        return None;
    }
    let mut a: Vec<Vec<(usize, F)>> = Vec::with_capacity(n);
    for r in rows {
        let mut v: Vec<(usize, F)> = Vec::with_capacity(r.len());
        let mut sorted = r.clone();
        sorted.sort_by_key(|e| e.0);
        for (j, c) in sorted {
            if j >= n {
                return None;
            }
            match v.last_mut() {
                Some(last) if last.0 == j => last.1 += &c,
                _ => v.push((j, c)),
            }
        }
        v.retain(|e| !e.1.is_zero());
        a.push(v);
    }
    let mut b = rhs.to_vec();
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, r) in a.iter().enumerate() {
        for (j, _) in r {
            col_rows[*j].insert(i);
        }
    }
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let r = (0..n).filter(|&i| !done[i]).min_by_key(|&i| a[i].len())?;
        let &(c, ref piv) = a[r].iter().min_by_key(|(j, _)| col_rows[*j].len())?;
        let piv = piv.clone();
        done[r] = true;
        for (j, _) in &a[r] {
            col_rows[*j].remove(&r);
        }
        let prow = a[r].clone();
        let pb = b[r].clone();
        let targets: Vec<usize> = col_rows[c].iter().copied().collect();
        for k in targets {
            let f = a[k]
                .iter()
                .find(|e| e.0 == c)
                .expect("column index is current")
                .1
                .clone()
                / &piv;
            let old = std::mem::take(&mut a[k]);
            for (j, _) in &old {
                col_rows[*j].remove(&k);
            }
            let merged = sub_scaled(old, &prow, &f);
            for (j, _) in &merged {
                col_rows[*j].insert(k);
            }
            a[k] = merged;
            let d = f * &pb;
            b[k] -= &d;
        }
        order.push((r, c));
    }
    let mut x = vec![F::zero(); n];
    for &(r, c) in order.iter().rev() {
        let mut s = b[r].clone();
        let mut piv = None;
        for (j, v) in &a[r] {
            if *j == c {
                piv = Some(v);
            } else {
                s -= &(v.clone() * &x[*j]);
            }
        }
        x[c] = s / piv?;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, Rational};

    #[test]
    fn null_space_is_orthogonal_to_rows() {
        let rows = vec![
            vec![int(1), int(2), int(3)],
            vec![int(2), int(4), int(6)],
            vec![int(0), int(1), int(1)],
        ];
        assert_eq!(rank(&rows, 3), 2);
        let ns: Vec<Vec<Rational>> = null_space(&rows, 3);
        assert_eq!(ns.len(), 1);
        for r in &rows {
            let dot = r.iter().zip(&ns[0]).fold(int(0), |acc, (a, b)| acc + a * b);
            assert_eq!(dot, int(0));
        }
    }

    #[test]
    fn sparse_solve_matches_substitution() {
        let rows = vec![
            vec![(0, int(2)), (2, int(1))],
            vec![(1, int(1)), (2, int(-1)), (1, int(2))],
            vec![(0, int(1)), (1, int(1)), (2, int(1))],
        ];
        let rhs = vec![int(3), int(1), int(4)];
        let x: Vec<Rational> = solve_sparse(&rows, &rhs).unwrap();
        for (row, b) in rows.iter().zip(&rhs) {
            let lhs = row.iter().fold(int(0), |acc, (j, c)| acc + c * &x[*j]);
            assert_eq!(&lhs, b);
        }
        let singular = vec![
            vec![(0, int(1)), (1, int(1))],
            vec![(0, int(2)), (1, int(2))],
        ];
        assert!(solve_sparse(&singular, &[int(1), int(2)]).is_none());
    }
}
