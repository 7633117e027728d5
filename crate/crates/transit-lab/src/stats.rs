//! Summary statistics, Kolmogorov–Smirnov tests, percentile bootstrap and
//! exponential tail fits used by the validation harness.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Result};
use crate::rng;

/// Mean and sample standard deviation.
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// `Σ e^{λx}/n`.
pub fn empirical_mgf(x: &[f64], lambda: f64) -> f64 {
    x.iter().map(|v| (lambda * v).exp()).sum::<f64>() / x.len() as f64
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.3 {
        // The alternating series converges slowly here; the lower tail is ~1.
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Result of a Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// One-sample KS distance against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(x: &[f64], cdf: F) -> KsResult {
    let v = sorted(x);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &t) in v.iter().enumerate() {
        let f = cdf(t);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    KsResult { statistic: d, p_value: kolmogorov_sf(d * n.sqrt()) }
}

/// Two-sample KS test with the asymptotic Kolmogorov p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let t = a[i].min(b[j]);
        while i < na && a[i] <= t {
            i += 1;
        }
        while j < nb && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    KsResult { statistic: d, p_value: kolmogorov_sf(d * ne.sqrt()) }
}

/// Percentile bootstrap interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BootstrapCi {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Standard deviation of the bootstrap replicates.
    pub std_error: f64,
}

/// Percentile bootstrap of the mean of `x` (B resamples, stream per replicate).
pub fn bootstrap_mean(x: &[f64], replicates: usize, level: f64, seed: u64) -> Result<BootstrapCi> {
    if x.len() < 2 || replicates < 10 {
        return Err(param("bootstrap", "need at least 2 samples and 10 replicates"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(param("level", "must lie in (0, 1)"));
    }
    let n = x.len();
    let mut reps: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(seed, r as u64);
            let mut s = 0.0;
            for _ in 0..n {
                s += x[g.gen_range(0..n)];
            }
            s / n as f64
        })
        .collect();
    reps.sort_by(|a, b| a.total_cmp(b));
    let q = |p: f64| reps[((p * (replicates - 1) as f64).round() as usize).min(replicates - 1)];
    let alpha = 1.0 - level;
    let (_, sd) = mean_sd(&reps);
    Ok(BootstrapCi {
        estimate: x.iter().sum::<f64>() / n as f64,
        lo: q(alpha / 2.0),
        hi: q(1.0 - alpha / 2.0),
        level,
        replicates,
        seed,
        std_error: sd,
    })
}

/// Exponential tail fit `P(T > t) ≈ (C/λ)e^{−λt}` on a quantile window.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailFit {
    pub lambda_hat: f64,
    pub c_hat: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// RMS residual of `ln S` about the fitted line.
    pub residual: f64,
}

/// Least-squares fit of `ln Ŝ(t)` against `t` at equally spaced points of the
/// quantile window `[q_lo, q_hi]`.
pub fn tail_fit(x: &[f64], q_lo: f64, q_hi: f64) -> Result<TailFit> {
    if !(0.0 < q_lo && q_lo < q_hi && q_hi < 1.0) {
        return Err(param("window", "need 0 < q_lo < q_hi < 1"));
    }
    let v = sorted(x);
    let n = v.len();
    if ((1.0 - q_hi) * n as f64) < 50.0 {
        return Err(param("window", "fewer than 50 samples beyond the upper quantile"));
    }
    let t_lo = v[(q_lo * n as f64) as usize];
    let t_hi = v[(q_hi * n as f64) as usize];
    let m = 60;
    let mut pts = Vec::with_capacity(m);
    for k in 0..m {
        let t = t_lo + (t_hi - t_lo) * k as f64 / (m - 1) as f64;
        let above = n - v.partition_point(|&s| s <= t);
        pts.push((t, (above as f64 / n as f64).ln()));
    }
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m as f64;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / m as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let slope = sxy / sxx;
    let intercept = ml - slope * mt;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m as f64).sqrt();
    let lambda_hat = -slope;
    Ok(TailFit { lambda_hat, c_hat: lambda_hat * intercept.exp(), t_lo, t_hi, residual })
}

/// Empirical quantile by the nearest-rank rule.
pub fn quantile(sorted_x: &[f64], p: f64) -> f64 {
    let n = sorted_x.len();
    sorted_x[((p * n as f64).ceil() as usize).clamp(1, n) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Exp};

    #[test]
    fn kolmogorov_reference_values() {
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn exponential_samples_pass_and_fit() {
        let mut g = rng::stream(1, 0);
        let e = Exp::new(0.5).unwrap();
        let x: Vec<f64> = (0..200_000).map(|_| 2.0 + e.sample(&mut g)).collect();
        let ks = ks_one_sample(&x, |t| if t < 2.0 { 0.0 } else { 1.0 - (-0.5 * (t - 2.0)).exp() });
        assert!(ks.p_value > 0.001);
        let fit = tail_fit(&x, 0.5, 0.999).unwrap();
        assert!((fit.lambda_hat - 0.5).abs() < 0.02);
        // S(t) = e^{−(t−2)/2} = (C/λ)e^{−λt} with C = λe^{2λ}.
        assert!((fit.c_hat / (0.5 * 1f64.exp()) - 1.0).abs() < 0.05);
        let y: Vec<f64> = (0..50_000).map(|_| 2.0 + e.sample(&mut g)).collect();
        assert!(ks_two_sample(&x, &y).p_value > 0.001);
        let z: Vec<f64> = y.iter().map(|v| v * 1.1).collect();
        assert!(ks_two_sample(&x, &z).p_value < 1e-6);
    }

    #[test]
    fn bootstrap_covers_the_mean() {
        let x: Vec<f64> = (0..1000).map(|i| (i % 10) as f64).collect();
        let ci = bootstrap_mean(&x, 1000, 0.99, 3).unwrap();
        assert!(ci.lo < 4.5 && ci.hi > 4.5);
        assert!((ci.std_error - (8.25f64 / 1000.0).sqrt()).abs() < 0.02);
        assert_eq!(bootstrap_mean(&x, 1000, 0.99, 3).unwrap().lo, ci.lo);
    }
}
