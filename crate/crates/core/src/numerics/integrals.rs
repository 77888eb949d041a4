use crate::error::{Error, Result};

const GRID_POINTS: usize = 1024;
const GOLDEN_ITERS: usize = 200;

/// Composite Simpson rule with `intervals` rounded up to an even count.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let m = (intervals.max(2) + 1) & !1;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Outcome of comparing `∫_a^b f(x)^n dx` with `(b−a) f(x*)^n / (n+1)` and `(b−a) f(x*)^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSandwich {
    pub lower: f64,
    pub integral: f64,
    pub upper: f64,
    pub x_star: f64,
    pub holds: bool,
    /// Largest positive second difference seen on the grid, when it exceeds the tolerance.
    pub concavity_warning: Option<f64>,
}

/// Numerical check of the integral sandwich for a concave non-negative `f` on `[a, b]`.
pub fn integral_sandwich_check(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    n: u32,
    quadrature_points: usize,
    tol: f64,
) -> Result<IntegralSandwich> {
    if !(a < b) || n == 0 {
        return Err(Error::Domain(format!(
            "sandwich needs a < b and n >= 1 (a={a}, b={b}, n={n})"
        )));
    }
    let h = (b - a) / GRID_POINTS as f64;
    let samples: Vec<f64> = (0..=GRID_POINTS).map(|i| f(a + i as f64 * h)).collect();

    let mut worst_convexity = 0.0f64;
    for w in samples.windows(3) {
        worst_convexity = worst_convexity.max(w[0] - 2.0 * w[1] + w[2]);
    }
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let concavity_warning = (worst_convexity > tol * scale).then_some(worst_convexity);

    let best = samples
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut lo = a + best.saturating_sub(1) as f64 * h;
    let mut hi = (a + (best + 1) as f64 * h).min(b);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..GOLDEN_ITERS {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let refined = 0.5 * (lo + hi);
    let (x_star, f_max) = if f(refined) >= samples[best] {
        (refined, f(refined))
    } else {
        (a + best as f64 * h, samples[best])
    };

    let integral = simpson(|x| f(x).powi(n as i32), a, b, quadrature_points);
    let upper = (b - a) * f_max.powi(n as i32);
    let lower = upper / (n as f64 + 1.0);
    let slack = tol * upper.abs().max(1e-300);
    let holds = lower - slack <= integral && integral <= upper + slack;
    Ok(IntegralSandwich {
        lower,
        integral,
        upper,
        x_star,
        holds,
        concavity_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_linear() {
        let r = integral_sandwich_check(|_| 1.0, 0.0, 1.0, 3, 64, 1e-9).unwrap();
        assert!((r.lower - 0.25).abs() < 1e-12 && (r.integral - 1.0).abs() < 1e-12);
        assert!((r.upper - 1.0).abs() < 1e-12 && r.holds);
        let r = integral_sandwich_check(|x| x, 0.0, 1.0, 1, 64, 1e-9).unwrap();
        assert!((r.integral - 0.5).abs() < 1e-12 && (r.lower - 0.5).abs() < 1e-9);
        assert!(r.holds && r.concavity_warning.is_none());
    }

    #[test]
    fn convex_function_is_flagged() {
        let r = integral_sandwich_check(|x| x * x, -1.0, 1.0, 1, 64, 1e-9).unwrap();
        assert!(r.concavity_warning.is_some());
    }

    #[test]
    fn rejects_bad_interval() {
        assert!(integral_sandwich_check(|x| x, 1.0, 0.0, 1, 8, 1e-9).is_err());
    }
}
