//! de Finetti boxes for a convex family of single-round boxes and a general predicate.

use num_bigint::BigInt;
use num_traits::Zero;

use super::chsh::Certificate;
use crate::boxes::{q_box, Alphabets, DenseBox, InputDist, Predicate, SymmetricProfile};
use crate::error::{Error, Result};
use crate::linprog::{feasible_point, Polytope};
use crate::numerics::{binomial, rank, Field, FrequencyVector, QSqrt2, Rational};
use crate::threshold::{
    check_general_threshold, general_threshold_bound, min_divergence, ExpectedFreqSet,
};

/// Single-round boxes `Q_φ = offset + Σ_i φ_i·directions[i]` for `φ` in the
/// convex hull of `vertices ⊂ F^{d'}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFamily<F> {
    alphabets: Alphabets,
    vertices: Vec<Vec<F>>,
    offset: Vec<F>,
    directions: Vec<Vec<F>>,
}

impl<F: Field> ConvexFamily<F> {
    /// Requires the vertices to span a `d'`-dimensional affine hull, the
    /// directions to be independent, and every vertex to map to a valid box.
    pub fn new(
        alphabets: Alphabets,
        vertices: Vec<Vec<F>>,
        offset: Vec<F>,
        directions: Vec<Vec<F>>,
    ) -> Result<Self> {
        let dim = directions.len();
        let (ins, outs) = alphabets.dense_size(1)?;
        if offset.len() != ins * outs || directions.iter().any(|d| d.len() != offset.len()) {
            return Err(Error::Shape(format!(
                "family tables need {} entries",
                ins * outs
            )));
        }
        if vertices.is_empty() || vertices.iter().any(|v| v.len() != dim) {
            return Err(Error::Shape(format!(
                "family needs at least one vertex with {dim} coordinates"
            )));
        }
        let spread: Vec<Vec<F>> = vertices[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&vertices[0])
                    .map(|(a, b)| a.clone() - b)
                    .collect()
            })
            .collect();
        if rank(&spread, dim) != dim {
            return Err(Error::Domain(format!(
                "vertices do not span a {dim}-dimensional parameter domain"
            )));
        }
        if rank(&directions, offset.len()) != dim {
            return Err(Error::Domain("parameter map is not injective".into()));
        }
        let family = Self {
            alphabets,
            vertices,
            offset,
            directions,
        };
        for v in &family.vertices {
            family.member(v)?;
        }
        Ok(family)
    }

    /// The one-box family `{Q}`.
    pub fn singleton(q: &DenseBox<F>) -> Result<Self> {
        if q.n() != 1 {
            return Err(Error::Shape("family members are single-round boxes".into()));
        }
        Self::new(
            q.alphabets().clone(),
            vec![vec![]],
            q.entries().to_vec(),
            vec![],
        )
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn vertices(&self) -> &[Vec<F>] {
        &self.vertices
    }

    pub fn offset(&self) -> &[F] {
        &self.offset
    }

    pub fn directions(&self) -> &[Vec<F>] {
        &self.directions
    }

    fn table(&self, phi: &[F]) -> Vec<F> {
        let mut t = self.offset.clone();
        for (c, d) in phi.iter().zip(&self.directions) {
            for (e, v) in t.iter_mut().zip(d) {
                *e += &(c.clone() * v);
            }
        }
        t
    }

    /// `Q_φ` as a validated single-round box.
    pub fn member(&self, phi: &[F]) -> Result<DenseBox<F>> {
        if phi.len() != self.dim() {
            return Err(Error::Shape(format!(
                "parameter has {} coordinates, expected {}",
                phi.len(),
                self.dim()
            )));
        }
        DenseBox::new(1, self.alphabets.clone(), self.table(phi))
    }

    /// Errors unless every member is `w`-symmetric (checked on the vertices).
    pub fn check_symmetric(&self, pred: &Predicate) -> Result<()> {
        for (i, v) in self.vertices.iter().enumerate() {
            if !pred.is_symmetric(&self.member(v)?)? {
                return Err(Error::Precondition(format!(
                    "family vertex {i} is not w-symmetric"
                )));
            }
        }
        Ok(())
    }

    /// The common value of `Q_φ` on each class (0 for classes without cells).
    fn class_values(&self, pred: &Predicate, phi: &[F]) -> Vec<F> {
        let t = self.table(phi);
        let mut q = vec![F::zero(); pred.d()];
        for (cell, &c) in pred.table().iter().enumerate().rev() {
            q[c] = t[cell].clone();
        }
        q
    }

    fn contains(&self, phi: &[F], hull: &Option<Vec<Vec<F>>>) -> Result<bool> {
        Ok(match self.dim() {
            0 => true,
            1 => {
                let lo = self
                    .vertices
                    .iter()
                    .map(|v| &v[0])
                    .min()
                    .expect("non-empty");
                let hi = self
                    .vertices
                    .iter()
                    .map(|v| &v[0])
                    .max()
                    .expect("non-empty");
                *lo <= phi[0] && phi[0] <= *hi
            }
            2 => {
                let h = hull.as_ref().expect("planar hull");
                (0..h.len()).all(|i| !cross(&h[i], &h[(i + 1) % h.len()], phi).is_neg())
            }
            _ => {
                let m = self.vertices.len();
                let mut p = Polytope::new(m);
                p.add_eq((0..m).map(|i| (i, F::one())).collect(), F::one())?;
                for (j, target) in phi.iter().enumerate() {
                    p.add_eq(
                        (0..m).map(|i| (i, self.vertices[i][j].clone())).collect(),
                        target.clone(),
                    )?;
                }
                feasible_point(&p)?.is_some()
            }
        })
    }

    /// Midpoints of a `resolution^{d'}` grid over the bounding box of the
    /// parameter domain that fall inside it.
    pub fn grid(&self, resolution: usize) -> Result<Vec<Vec<F>>> {
        if resolution < 1 {
            return Err(Error::Domain("grid resolution must be at least 1".into()));
        }
        let dim = self.dim();
        let hull = (dim == 2).then(|| planar_hull(&self.vertices));
        let bounds: Vec<(F, F)> = (0..dim)
            .map(|j| {
                let lo = self
                    .vertices
                    .iter()
                    .map(|v| v[j].clone())
                    .min()
                    .expect("non-empty");
                let hi = self
                    .vertices
                    .iter()
                    .map(|v| v[j].clone())
                    .max()
                    .expect("non-empty");
                (lo, hi)
            })
            .collect();
        let two_res = F::from_int(2 * resolution as i64);
        let total = resolution
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Domain("grid too large".into()))?;
        let mut out = Vec::new();
        for cell in 0..total {
            let mut rest = cell;
            let phi: Vec<F> = bounds
                .iter()
                .map(|(lo, hi)| {
                    let i = rest % resolution;
                    rest /= resolution;
                    lo.clone() + &((hi.clone() - lo) * &F::from_int(2 * i as i64 + 1) / &two_res)
                })
                .collect();
            if self.contains(&phi, &hull)? {
                out.push(phi);
            }
        }
        if out.is_empty() {
            return Err(Error::Domain(format!(
                "no grid midpoint of resolution {resolution} lies in the domain"
            )));
        }
        Ok(out)
    }
}

impl ConvexFamily<QSqrt2> {
    /// `{Q(p) : p ∈ [1−w, w]}`, parameterized by the winning probability.
    pub fn chsh() -> Self {
        let zero = q_box(&QSqrt2::from_int(0)).expect("valid box");
        let one = q_box(&QSqrt2::from_int(1)).expect("valid box");
        let direction = one
            .entries()
            .iter()
            .zip(zero.entries())
            .map(|(a, b)| a.clone() - b)
            .collect();
        Self::new(
            Alphabets::chsh(),
            vec![
                vec![QSqrt2::chsh_value_complement()],
                vec![QSqrt2::chsh_value()],
            ],
            zero.entries().to_vec(),
            vec![direction],
        )
        .expect("static family")
    }
}

fn cross<F: Field>(o: &[F], a: &[F], b: &[F]) -> F {
    (a[0].clone() - &o[0]) * &(b[1].clone() - &o[1])
        - (a[1].clone() - &o[1]) * &(b[0].clone() - &o[0])
}

/// Counter-clockwise convex hull of planar points (monotone chain).
fn planar_hull<F: Field>(points: &[Vec<F>]) -> Vec<Vec<F>> {
    let mut pts = points.to_vec();
    pts.sort();
    pts.dedup();
    let mut lower: Vec<Vec<F>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p).is_pos()
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Vec<F>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p).is_pos()
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// `F_μ`: the images `(Σ_{w(a,x)=r} μ(x) Q_v(a|x))_r` of the family's vertices.
pub fn expected_freq_set<F: Field>(
    family: &ConvexFamily<F>,
    mu: &InputDist<F>,
    pred: &Predicate,
) -> Result<ExpectedFreqSet> {
    let outs = family.alphabets.round_outputs();
    if pred.round_inputs() != family.alphabets.round_inputs() || pred.round_outputs() != outs {
        return Err(Error::Shape("predicate and family alphabets differ".into()));
    }
    if mu.round_inputs() != pred.round_inputs() {
        return Err(Error::Shape(
            "input distribution and family alphabets differ".into(),
        ));
    }
    let mut points: Vec<Vec<QSqrt2>> = Vec::new();
    for v in &family.vertices {
        let t = family.table(v);
        let mut f = vec![F::zero(); pred.d()];
        for (x, px) in mu.per_round().iter().enumerate() {
            for a in 0..outs {
                f[pred.class(x, a)] += &(px.clone() * &t[x * outs + a]);
            }
        }
        let f: Vec<QSqrt2> = f.iter().map(Field::to_qsqrt2).collect();
        if !points.contains(&f) {
            points.push(f);
        }
    }
    ExpectedFreqSet::new(points)
}

/// The grid de Finetti box and the diagnostics of its continuum guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralTau<F> {
    pub tau: SymmetricProfile<F>,
    pub resolution: usize,
    pub points: usize,
    /// Largest relative change of any entry against the half-resolution grid.
    pub grid_error: f64,
    /// `min_f τ_f·binomial(n+d', d') / sup_φ Q_φ^{⊗n}`; at least 1 for the
    /// continuum mixture.
    pub dominance_ratio: f64,
}

fn grid_tau<F: Field>(
    family: &ConvexFamily<F>,
    pred: &Predicate,
    n: usize,
    resolution: usize,
) -> Result<(SymmetricProfile<F>, usize)> {
    let points = family.grid(resolution)?;
    let freqs = crate::numerics::compositions(n, pred.d());
    let mut acc = vec![F::zero(); freqs.len()];
    for phi in &points {
        let q = family.class_values(pred, phi);
        let powers: Vec<Vec<F>> = q
            .iter()
            .map(|qr| {
                let mut row = Vec::with_capacity(n + 1);
                row.push(F::one());
                for k in 1..=n {
                    row.push(row[k - 1].clone() * qr);
                }
                row
            })
            .collect();
        for (slot, f) in acc.iter_mut().zip(&freqs) {
            let term = f
                .iter()
                .enumerate()
                .fold(F::one(), |t, (r, &k)| t * &powers[r][k]);
            *slot += &term;
        }
    }
    let count = F::from_int(points.len() as i64);
    let values = acc.into_iter().map(|v| v / &count).collect();
    Ok((SymmetricProfile::new(pred, n, values)?, points.len()))
}

/// Uniform mixture of `Q_φ^{⊗n}` over the grid midpoints, as a profile, with
/// the grid-error and continuum-guarantee diagnostics.
pub fn general_tau<F: Field>(
    family: &ConvexFamily<F>,
    pred: &Predicate,
    n: usize,
    resolution: usize,
) -> Result<GeneralTau<F>> {
    if n == 0 {
        return Err(Error::Domain("general tau needs n >= 1".into()));
    }
    family.check_symmetric(pred)?;
    let (tau, points) = grid_tau(family, pred, n, resolution)?;
    let grid_error = if family.dim() > 0 && resolution >= 4 {
        let (coarse, _) = grid_tau(family, pred, n, resolution / 2)?;
        tau.values()
            .iter()
            .zip(coarse.values())
            .filter(|(t, _)| t.is_pos())
            .map(|(t, c)| ((t.as_f64() - c.as_f64()) / t.as_f64()).abs())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let d_prime = family.dim();
    let scale = binomial((n + d_prime) as u64, d_prime as u64)?;
    let class_floats: Vec<Vec<f64>> = family
        .vertices
        .iter()
        .map(|v| {
            family
                .class_values(pred, v)
                .iter()
                .map(Field::as_f64)
                .collect()
        })
        .collect();
    let mut has_cells = vec![false; pred.d()];
    pred.table().iter().for_each(|&c| has_cells[c] = true);
    let mut dominance_ratio = f64::INFINITY;
    for (f, t) in tau.frequencies().iter().zip(tau.values()) {
        if f.counts()
            .iter()
            .zip(&has_cells)
            .any(|(&k, &cells)| k > 0 && !cells)
        {
            continue;
        }
        let freqs = f.frequencies();
        let Some((div, _)) = min_divergence(&freqs, &class_floats) else {
            continue;
        };
        let entropy: f64 = freqs.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum();
        let log_sup = n as f64 * (entropy - div);
        let ratio = (t.as_f64().ln() + big_ln(&scale) - log_sup).exp();
        dominance_ratio = dominance_ratio.min(ratio);
    }
    Ok(GeneralTau {
        tau,
        resolution,
        points,
        grid_error,
        dominance_ratio,
    })
}

fn big_ln(b: &BigInt) -> f64 {
    let bits = b.bits();
    let shift = bits.saturating_sub(60);
    let top: BigInt = b >> shift;
    let top: f64 = top.to_string().parse().expect("integer");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Both parts of the general de Finetti statement for one family, predicate,
/// input law and `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralCertificate {
    /// `Pr_P[freq = f] ≤ prefactor·Pr_τ[freq = f]`.
    pub frequency: Certificate,
    /// `P(a|x) ≤ prefactor·τ(a|x)`, when the box is `w`-symmetric.
    pub entry: Option<Certificate>,
    /// The realized frequency of the frequency-level witness.
    pub witness: FrequencyVector,
    pub grid_error: f64,
    /// Pass with the worst ratio inflated by the grid error.
    pub robust: bool,
}

/// Certifier for `P ≤ C·binomial(n+d', d')·(n+1)^{d−1}·τ` with τ, the bounds
/// and the prefactor computed once.
#[derive(Debug, Clone)]
pub struct GeneralDeFinetti {
    n: usize,
    c: Rational,
    tol: f64,
    tau: GeneralTau<QSqrt2>,
    tau_law: Vec<(FrequencyVector, QSqrt2)>,
    set: ExpectedFreqSet,
    masses: Vec<QSqrt2>,
    prefactor: QSqrt2,
}

impl GeneralDeFinetti {
    pub fn new<F: Field>(
        family: &ConvexFamily<F>,
        pred: &Predicate,
        mu: &InputDist<F>,
        n: usize,
        c: Rational,
        resolution: usize,
        tol: f64,
    ) -> Result<Self> {
        if !c.is_pos() {
            return Err(Error::Domain(
                "the threshold constant must be positive".into(),
            ));
        }
        let set = expected_freq_set(family, mu, pred)?;
        let GeneralTau {
            tau,
            resolution,
            points,
            grid_error,
            dominance_ratio,
        } = general_tau(family, pred, n, resolution)?;
        let tau = GeneralTau {
            tau: tau.to_qsqrt2(),
            resolution,
            points,
            grid_error,
            dominance_ratio,
        };
        let masses: Vec<QSqrt2> = pred.class_masses(mu).iter().map(Field::to_qsqrt2).collect();
        let tau_law = tau.tau.freq_law(&masses)?;
        let d_prime = family.dim() as u64;
        let prefactor = QSqrt2::from(c.clone())
            * &QSqrt2::from_bigint(binomial(n as u64 + d_prime, d_prime)?)
            * &QSqrt2::from_int((n + 1) as i64).powi(pred.d() as u64 - 1);
        Ok(Self {
            n,
            c,
            tol,
            tau,
            tau_law,
            set,
            masses,
            prefactor,
        })
    }

    /// The CHSH family, predicate and uniform inputs.
    pub fn chsh(n: usize, resolution: usize, tol: f64) -> Result<Self> {
        Self::new(
            &ConvexFamily::chsh(),
            &Predicate::chsh(),
            &InputDist::uniform(4),
            n,
            Rational::from_integer(1.into()),
            resolution,
            tol,
        )
    }

    pub fn tau(&self) -> &GeneralTau<QSqrt2> {
        &self.tau
    }

    pub fn prefactor(&self) -> &QSqrt2 {
        &self.prefactor
    }

    pub fn expected_freq_set(&self) -> &ExpectedFreqSet {
        &self.set
    }

    /// `Pr_τ[freq = f]` for every frequency vector of `n` rounds.
    pub fn tau_law(&self) -> &[(FrequencyVector, QSqrt2)] {
        &self.tau_law
    }

    /// Per-class input-weighted output counts used by the frequency laws.
    pub fn masses(&self) -> &[QSqrt2] {
        &self.masses
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The frequency-level statement for an arbitrary box given by its
    /// frequency law; runs the threshold premise first.
    pub fn certify_frequencies<F: Field>(
        &self,
        law: &[(FrequencyVector, F)],
    ) -> Result<(Certificate, FrequencyVector)> {
        if let Some((f, _)) = law.iter().find(|(f, _)| f.n() != self.n) {
            return Err(Error::Shape(format!(
                "frequency {:?} is not for n = {}",
                f.counts(),
                self.n
            )));
        }
        let report = check_general_threshold(law, &self.set, &self.c, self.tol)?;
        if let Some(i) = report.rows.iter().position(|r| !r.holds) {
            return Err(Error::ThresholdPremise {
                k: i,
                kind: format!("frequency {:?}", report.rows[i].freq.counts()),
            });
        }
        let mut worst = (
            QSqrt2::from_int(0),
            0usize,
            law.first().map(|(f, _)| f.clone()),
        );
        for (f, pr) in law {
            if pr.is_zero() {
                continue;
            }
            let i = self.tau_law.iter().position(|(g, _)| g == f);
            let denom = i
                .map(|i| self.prefactor.clone() * &self.tau_law[i].1)
                .filter(QSqrt2::is_pos);
            let Some(denom) = denom else {
                return Err(Error::Internal(format!(
                    "frequency {:?} passes the premise but tau gives it no mass",
                    f.counts()
                )));
            };
            let ratio = pr.to_qsqrt2() / &denom;
            if ratio > worst.0 {
                worst = (ratio, i.expect("found above"), Some(f.clone()));
            }
        }
        let witness = worst
            .2
            .ok_or_else(|| Error::Domain("empty frequency law".into()))?;
        Ok((
            Certificate {
                name: "general-frequency",
                pass: worst.0 <= QSqrt2::from_int(1),
                prefactor: self.prefactor.clone(),
                worst_ratio: worst.0,
                witness: worst.1,
            },
            witness,
        ))
    }

    /// Both statements for a `w`-symmetric box.
    pub fn certify<F: Field>(&self, p: &SymmetricProfile<F>) -> Result<GeneralCertificate> {
        let p = p.to_qsqrt2();
        if p.n() != self.n || p.d() != self.tau.tau.d() {
            return Err(Error::Shape(
                "box profile does not match the certifier".into(),
            ));
        }
        let (frequency, witness) = self.certify_frequencies(&p.freq_law(&self.masses)?)?;
        let mut worst = (QSqrt2::from_int(0), 0usize);
        for (i, (pv, tv)) in p.values().iter().zip(self.tau.tau.values()).enumerate() {
            if pv.is_zero() {
                continue;
            }
            let denom = self.prefactor.clone() * tv;
            if !denom.is_pos() {
                return Err(Error::Internal(format!(
                    "entry class {i} passes the premise but tau vanishes there"
                )));
            }
            let ratio = pv.clone() / &denom;
            if ratio > worst.0 {
                worst = (ratio, i);
            }
        }
        let entry = Certificate {
            name: "general-entry",
            pass: worst.0 <= QSqrt2::from_int(1),
            prefactor: self.prefactor.clone(),
            worst_ratio: worst.0,
            witness: worst.1,
        };
        Ok(self.finish(frequency, Some(entry), witness))
    }

    /// Frequency-level statement only, for a box that need not be `w`-symmetric.
    pub fn certify_dense<F: Field>(
        &self,
        p: &DenseBox<F>,
        pred: &Predicate,
        mu: &InputDist<F>,
    ) -> Result<GeneralCertificate> {
        let law = pred.freq_distribution(p, mu)?;
        let (frequency, witness) = self.certify_frequencies(&law)?;
        let entry = match SymmetricProfile::from_dense(p, pred) {
            Ok(profile) => self.certify(&profile)?.entry,
            Err(Error::Precondition(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(self.finish(frequency, entry, witness))
    }

    fn finish(
        &self,
        frequency: Certificate,
        entry: Option<Certificate>,
        witness: FrequencyVector,
    ) -> GeneralCertificate {
        let inflate = 1.0 + self.tau.grid_error;
        let robust = frequency.worst_ratio.as_f64() * inflate <= 1.0
            && entry
                .as_ref()
                .is_none_or(|e| e.worst_ratio.as_f64() * inflate <= 1.0);
        GeneralCertificate {
            frequency,
            entry,
            witness,
            grid_error: self.tau.grid_error,
            robust,
        }
    }
}

/// `exp(−n·inf D)` at every frequency of `n` rounds, for reporting.
pub fn general_bounds(set: &ExpectedFreqSet, n: usize) -> Result<Vec<(FrequencyVector, f64)>> {
    crate::numerics::compositions(n, set.d())
        .into_iter()
        .map(|c| {
            let f = FrequencyVector::new(c)?;
            let b = general_threshold_bound(&f, set)?;
            Ok((f, b))
        })
        .collect()
}

/// Certifies a box against the general statement in one call.
pub fn certify_general_definetti<F: Field>(
    p: &SymmetricProfile<F>,
    pred: &Predicate,
    family: &ConvexFamily<F>,
    mu: &InputDist<F>,
    c: Rational,
    resolution: usize,
) -> Result<GeneralCertificate> {
    GeneralDeFinetti::new(
        family,
        pred,
        mu,
        p.n(),
        c,
        resolution,
        crate::numerics::Config::default().tol,
    )?
    .certify(p)
}
