//! Chart-based numeric differential geometry used to verify the expansion
//! coefficients of the symbol calculus against direct integration.
//!
//! Everything works in a single coordinate chart per manifold. Geodesics and
//! parallel transport come from an adaptive Runge-Kutta integrator, inverse
//! exponential maps from a Newton iteration on the shooting map, and the van
//! Vleck-Morette determinant from the mixed second derivative of the world
//! function. No atlas handling, no cut-locus logic: every operation reports
//! an error as soon as a trajectory leaves its chart box.

mod geodesic;
mod hderiv;
mod holonomy;
mod manifold;
mod maps;
mod vanvleck;

pub use geodesic::{geodesic_shoot, GeodesicResult, OdeOptions};
pub use hderiv::{check_hderiv_lemma, HderivReport};
pub use holonomy::{holonomy_quad, triangle_vectors, HolonomyQuad, TriangleVectors};
pub use manifold::{
    manifold, BundleConnection, BundleKind, Manifold, MetricSignature, Riemann, MANIFOLD_NAMES,
};
pub use maps::{log_map, midpoint, synge, LogResult};
pub use vanvleck::{coincidence_limits, van_vleck, van_vleck_jacobi, CoincidenceReport};

/// Determinant floor below which a chart metric counts as degenerate.
pub const NONDEGENERATE_DET: f64 = 1e-10;

/// Default step for finite differences of the metric and connection.
pub const H_FD: f64 = 1e-5;

/// Default base step for the van Vleck mixed derivative (one Richardson
/// level halves it).
pub const H_VV: f64 = 1e-3;

/// Default adaptive integrator tolerance.
pub const TOL_ODE: f64 = 1e-10;

/// Default boundary-value (inverse exponential map) tolerance.
pub const TOL_BVP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("unknown manifold `{0}`")]
    UnknownManifold(String),
    #[error("trajectory left the chart domain at t = {t:.6}")]
    LeftChart { t: f64 },
    #[error("step size underflow at t = {t:.6} (h = {h:.3e})")]
    StepFailure { t: f64, h: f64 },
    #[error("shooting solve stalled after {iters} iterations (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("ill-conditioned van Vleck system (det = {det:.3e})")]
    IllConditioned { det: f64 },
    #[error("metric degenerate in chart (det = {det:.3e})")]
    DegenerateMetric { det: f64 },
    #[error("{0}")]
    BadInput(String),
}

/// Least-squares slope of ln(y) against ln(x); the standard log-log rate
/// estimate used by the expansion-order checks.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(ly.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}
