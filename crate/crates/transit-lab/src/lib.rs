//! Numerical laboratory for the universal laws of noise-induced transit and
//! exit times at non-hyperbolic unstable fixed points.
//!
//! For `dX = −U'(X)dt + ε dW` with `U ≈ −x^d` near a degenerate fixed point,
//! the rescaled transit time `ε^{2(d−2)/d}·τ` converges to a law `T_{d,μ}`
//! that only depends on the degree `d` and a tilt `μ`. The crate samples that
//! law, evaluates its moment generating function by ODE shooting, locates the
//! spectral tail rate and residue, evaluates the asymptotic constants and
//! inverts the transform to a density.

pub mod asymptotics;
pub mod density;
pub mod error;
pub mod finite_eps_sim;
pub mod laplace_ode;
pub mod limit_sampler;
pub mod potentials;
pub mod ode;
pub mod quad;
pub mod rng;
pub mod series;
pub mod special;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use potentials::{ModelSpec, ScaleTable};

/// Guide chapters compiled as doc-tests so their snippets stay current.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/potentials.md")]
    mod potentials {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/transform.md")]
    mod transform {}
    #[doc = include_str!("../../../book/src/spectrum.md")]
    mod spectrum {}
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    mod asymptotics {}
    #[doc = include_str!("../../../book/src/density.md")]
    mod density {}
    #[doc = include_str!("../../../book/src/finite_eps.md")]
    mod finite_eps {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
}
