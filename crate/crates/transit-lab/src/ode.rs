//! Dormand–Prince 5(4) integrator for small complex systems.
//!
//! The state is a fixed-size array of complex numbers. For linear problems
//! whose solution spans hundreds of orders of magnitude the first `scaled`
//! components can be renormalised after every accepted step; the discarded
//! factor is accumulated in [`OdeOutcome::log_scale`].

use num_complex::Complex64;

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Tolerances and limits of one integration.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Number of leading components that are rescaled jointly (0 disables).
    pub scaled: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-300, max_steps: 2_000_000, scaled: 0 }
    }
}

/// Final state of an integration: the true solution is `y · e^{log_scale}`
/// on the rescaled components.
#[derive(Debug, Clone, Copy)]
pub struct OdeOutcome<const N: usize> {
    pub y: [Complex64; N],
    pub log_scale: f64,
    pub steps: usize,
    pub rejected: usize,
}

fn axpy<const N: usize>(y: &[Complex64; N], h: f64, ks: &[[Complex64; N]; 7], coef: &[f64], upto: usize) -> [Complex64; N] {
    let mut out = *y;
    for (j, &c) in coef.iter().enumerate().take(upto) {
        if c != 0.0 {
            for i in 0..N {
                out[i] += ks[j][i] * (h * c);
            }
        }
    }
    out
}

/// Integrates `y' = f(x, y)` from `x0` to `x1`. `observe` is called after each
/// accepted step with `(x, y, log_scale)`.
pub fn integrate<const N: usize, F, O>(
    mut f: F,
    x0: f64,
    x1: f64,
    y0: [Complex64; N],
    opts: OdeOptions,
    mut observe: O,
) -> Result<OdeOutcome<N>>
where
    F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
    O: FnMut(f64, &[Complex64; N], f64),
{
    let dir = if x1 >= x0 { 1.0 } else { -1.0 };
    let span = (x1 - x0).abs();
    let mut x = x0;
    let mut y = y0;
    let mut log_scale = 0.0;
    let mut ks = [[Complex64::new(0.0, 0.0); N]; 7];
    ks[0] = f(x, &y);
    let mut h = dir * (1e-3 * span).min(1e-2).max(1e-12);
    let (mut steps, mut rejected) = (0usize, 0usize);
    if span == 0.0 {
        return Ok(OdeOutcome { y, log_scale, steps, rejected });
    }
    loop {
        if steps + rejected >= opts.max_steps {
            return Err(Error::Integration { x, reason: format!("step budget {} exhausted", opts.max_steps) });
        }
        let last = (x + h - x1) * dir >= 0.0;
        if last {
            h = x1 - x;
        }
        for s in 1..7 {
            let ys = axpy(&y, h, &ks, &A[s], s);
            ks[s] = f(x + C[s] * h, &ys);
        }
        let ynew = axpy(&y, h, &ks, &A[6], 6);
        let mut err: f64 = 0.0;
        for i in 0..N {
            let mut e = Complex64::new(0.0, 0.0);
            for j in 0..7 {
                e += ks[j][i] * E[j];
            }
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            err = err.max((e * h).norm() / sc);
        }
        if !err.is_finite() {
            h *= 0.2;
            rejected += 1;
            if h.abs() < 1e-14 * span {
                return Err(Error::Integration { x, reason: "non-finite state".into() });
            }
            continue;
        }
        if err <= 1.0 {
            x = if last { x1 } else { x + h };
            y = ynew;
            // FSAL: the last stage is the derivative at the new point.
            ks[0] = ks[6];
            steps += 1;
            if opts.scaled > 0 {
                let m = y[..opts.scaled].iter().map(|c| c.norm()).fold(0.0, f64::max);
                if m > 1e50 || (m < 1e-50 && m > 0.0) {
                    for c in y[..opts.scaled].iter_mut() {
                        *c /= m;
                    }
                    for c in ks[0][..opts.scaled].iter_mut() {
                        *c /= m;
                    }
                    log_scale += m.ln();
                }
            }
            observe(x, &y, log_scale);
            if last {
                return Ok(OdeOutcome { y, log_scale, steps, rejected });
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            if h.abs() < 1e-14 * span.max(1.0) {
                return Err(Error::Integration { x, reason: "step size underflow".into() });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn harmonic_oscillator() {
        let out = integrate(
            |_, y: &[Complex64; 2]| [y[1], -y[0]],
            0.0,
            10.0,
            [c(1.0), c(0.0)],
            OdeOptions { rtol: 1e-11, atol: 1e-14, ..Default::default() },
            |_, _, _| {},
        )
        .unwrap();
        assert!((out.y[0].re - 10f64.cos()).abs() < 1e-8);
        assert!((out.y[1].re + 10f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn complex_rotation_backwards() {
        let i = Complex64::new(0.0, 1.0);
        let out = integrate(|_, y: &[Complex64; 1]| [i * y[0]], 2.0, 0.0, [c(1.0)], OdeOptions::default(), |_, _, _| {}).unwrap();
        assert!((out.y[0] - (-2.0 * i).exp()).norm() < 1e-8);
    }

    #[test]
    fn rescaling_tracks_huge_growth() {
        let opts = OdeOptions { scaled: 1, ..Default::default() };
        let out = integrate(|_, y: &[Complex64; 1]| [y[0] * 10.0], 0.0, 100.0, [c(1.0)], opts, |_, _, _| {}).unwrap();
        let ln = out.y[0].norm().ln() + out.log_scale;
        assert!((ln - 1000.0).abs() < 1e-6);
    }
}
