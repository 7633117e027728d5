//! Formal asymptotic solutions at infinity.
//!
//! For `y'' + P(x)y' + R(x)y = 0` with polynomial `P` of degree `D ≥ 1` and
//! `deg R ≤ D − 1`, the logarithmic derivative of the slowly varying solution
//! admits a formal expansion `h = y'/y = Σ_{k≥1} a_k x^{−k}`. Matching powers
//! in the Riccati equation `h' + h² + Ph + R = 0` gives `a_{m+D}` from lower
//! coefficients. Working with `ln y` rather than `y` keeps the expansion free
//! of the cancellations that plague the plain power series when `|η|` is
//! large.

use num_complex::Complex64;

/// Coefficients `a_1, a_2, …` of `y'/y = Σ a_k x^{−k}`.
#[derive(Debug, Clone)]
pub struct LogSeries {
    a: Vec<Complex64>,
}

/// Value of `ln y` and `y'/y` at a point together with a truncation estimate.
#[derive(Debug, Clone, Copy)]
pub struct LogSeriesEval {
    pub ln_y: Complex64,
    pub h: Complex64,
    /// Modulus of the first omitted term of `ln y`.
    pub truncation: f64,
}

impl LogSeries {
    /// Builds `terms` coefficients for `y'' + P y' + R y = 0`, coefficients ascending.
    pub fn new(p: &[f64], r: &[Complex64], terms: usize) -> Self {
        let dd = p.len() - 1;
        let pd = p[dd];
        let d = dd as i64;
        let mut a = vec![Complex64::new(0.0, 0.0); terms + 1];
        let get = |a: &Vec<Complex64>, j: i64| if j >= 1 && (j as usize) < a.len() { a[j as usize] } else { Complex64::new(0.0, 0.0) };
        for m in (1 - d)..=(terms as i64 - d) {
            let mut s = Complex64::new(0.0, 0.0);
            for (i, &pi) in p.iter().enumerate().take(dd) {
                s += pi * get(&a, m + i as i64);
            }
            if m - 1 >= 1 {
                s -= (m - 1) as f64 * get(&a, m - 1);
            }
            for i in 1..m {
                s += get(&a, i) * get(&a, m - i);
            }
            if m <= 0 {
                if let Some(&rj) = r.get((-m) as usize) {
                    s += rj;
                }
            }
            a[(m + d) as usize] = -s / pd;
        }
        Self { a }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.a[1..]
    }

    /// Evaluates at `x` with optimal truncation. `x < 0` is only meaningful
    /// when `a_1 = 0`.
    pub fn eval(&self, x: f64) -> LogSeriesEval {
        let a1 = self.a[1];
        let mut ln_y = if a1 == Complex64::new(0.0, 0.0) { a1 } else { a1 * x.ln() };
        let mut h = a1 / x;
        let mut prev = f64::INFINITY;
        let mut truncation = 0.0;
        let inv = 1.0 / x;
        let mut xp = inv; // x^{1−k} for k = 2
        for k in 2..self.a.len() {
            let term = self.a[k] * xp / (1.0 - k as f64);
            let mag = term.norm();
            if mag > prev && k > 8 {
                truncation = mag;
                break;
            }
            ln_y += term;
            h += self.a[k] * xp * inv;
            if mag != 0.0 {
                prev = mag;
            }
            truncation = mag;
            xp *= inv;
        }
        LogSeriesEval { ln_y, h, truncation }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn cubic_damping_coefficients() {
        // g'' + (x² − μ)g' + ηg = 0: ln g = η/x + μη/(3x³) + η/(2x⁴) + ...
        let (mu, eta) = (0.7, -1.3);
        let s = LogSeries::new(&[-mu, 0.0, 1.0], &[c(eta)], 12);
        let a = s.coeffs();
        assert!((a[1] - c(-eta)).norm() < 1e-15);
        assert!(a[2].norm() < 1e-15);
        assert!((a[3] - c(-mu * eta)).norm() < 1e-15);
        assert!((a[4] - c(-2.0 * eta)).norm() < 1e-15);
    }

    #[test]
    fn power_law_prefactor_is_recovered() {
        // k'' − x²k' + (η − 2x)k = 0 has k ~ x^{−2}(1 − η/x + ...), so h = −2/x + η/x² + ...
        let eta = 0.4;
        let s = LogSeries::new(&[0.0, 0.0, -1.0], &[c(eta), c(-2.0)], 12);
        let a = s.coeffs();
        assert!((a[0] - c(-2.0)).norm() < 1e-15);
        assert!((a[1] - c(eta)).norm() < 1e-15);
    }

    #[test]
    fn residual_of_the_truncated_solution_is_small() {
        // Plug y = exp(ln y) into the quartic damping ODE by finite differences.
        let eta = Complex64::new(-3.0, 2.0);
        let p = [0.0, 1.0, 0.0, 2.0];
        let s = LogSeries::new(&p, &[eta], 30);
        let x: f64 = 6.0;
        let y = |x: f64| s.eval(x).ln_y.exp();
        let hh = 1e-3;
        let d1 = (y(x + hh) - y(x - hh)) / (2.0 * hh);
        let d2 = (y(x + hh) - 2.0 * y(x) + y(x - hh)) / (hh * hh);
        let damp = (2.0 * x.powi(3) + x) * d1;
        let res = d2 + damp + eta * y(x);
        assert!(res.norm() < 1e-6 * (damp.norm() + (eta * y(x)).norm()));
        assert!((s.eval(x).h * y(x) - d1).norm() < 1e-6);
    }
}
