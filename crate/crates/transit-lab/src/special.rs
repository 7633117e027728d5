//! Gamma function and incomplete elliptic integrals.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function: Lanczos core for `x >= 1/2`, reflection below.
pub fn gamma(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Domain { what: "gamma", value: x });
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma_unchecked(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = LANCZOS[0];
        let t = x + LANCZOS_G + 0.5;
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Which incomplete elliptic integral `∫₀^φ (1 − m sin²θ)^{±1/2} dθ` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipticKind {
    /// Exponent +1/2: the integral of the second kind.
    Plus,
    /// Exponent −1/2: the integral of the first kind.
    Minus,
}

/// Incomplete elliptic integral `E_±(φ | m)` by adaptive quadrature.
///
/// Any finite `φ` is accepted as long as `m < 1`, since the integrand then
/// stays smooth and positive.
pub fn elliptic(phi: f64, m: f64, kind: EllipticKind) -> Result<f64> {
    if !phi.is_finite() {
        return Err(Error::Domain { what: "elliptic amplitude", value: phi });
    }
    if !(m < 1.0) {
        return Err(Error::Domain { what: "elliptic parameter", value: m });
    }
    let f = |t: f64| {
        let s = t.sin();
        let r = (1.0 - m * s * s).sqrt();
        match kind {
            EllipticKind::Plus => r,
            EllipticKind::Minus => 1.0 / r,
        }
    };
    Ok(quad::integrate(f, 0.0, phi, 1e-14, 1e-14)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_identities() {
        assert!((gamma(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma(0.5).unwrap() - PI.sqrt()).abs() < 1e-14);
        assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
        // Reflection branch: Γ(−1/2) = −2√π.
        assert!((gamma(-0.5).unwrap() + 2.0 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn gamma_duplication_formula() {
        for &z in &[0.3, 0.75, 1.25, 2.6, 4.1] {
            let lhs = gamma(z).unwrap() * gamma(z + 0.5).unwrap();
            let rhs = 2f64.powf(1.0 - 2.0 * z) * PI.sqrt() * gamma(2.0 * z).unwrap();
            assert!((lhs / rhs - 1.0).abs() < 1e-13, "z = {z}");
        }
    }

    #[test]
    fn gamma_poles_are_errors() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-3.0).is_err());
    }

    #[test]
    fn gamma_three_quarters_matches_known_constant() {
        let f1 = (2.0 / PI).sqrt() * gamma(0.75).unwrap().powi(2);
        assert!((f1 - 1.198_140_234_735_592_2).abs() < 1e-13);
    }

    #[test]
    fn elliptic_trivial_cases() {
        assert_eq!(elliptic(0.0, 0.4, EllipticKind::Plus).unwrap(), 0.0);
        for kind in [EllipticKind::Plus, EllipticKind::Minus] {
            assert!((elliptic(1.1, 0.0, kind).unwrap() - 1.1).abs() < 1e-14);
        }
    }

    #[test]
    fn complete_integrals_at_half() {
        // K(1/2) and E(1/2) from the arithmetic-geometric mean.
        let k = elliptic(PI / 2.0, 0.5, EllipticKind::Minus).unwrap();
        let e = elliptic(PI / 2.0, 0.5, EllipticKind::Plus).unwrap();
        assert!((k - 1.854_074_677_301_372).abs() < 1e-13);
        assert!((e - 1.350_643_881_047_675_5).abs() < 1e-13);
    }

    #[test]
    fn elliptic_rejects_bad_parameter() {
        assert!(elliptic(1.0, 1.0, EllipticKind::Plus).is_err());
        assert!(elliptic(f64::NAN, 0.2, EllipticKind::Plus).is_err());
    }
}
