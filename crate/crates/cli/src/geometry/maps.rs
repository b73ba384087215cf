//! Inverse exponential map, world function, and geodesic midpoints.

use nalgebra::{DMatrix, DVector};

use super::geodesic::{geodesic_shoot, OdeOptions};
use super::manifold::{BundleConnection, Manifold};
use super::{GeoError, TOL_BVP};

#[derive(Clone, Debug)]
pub struct LogResult {
    /// Initial velocity: the unit-time geodesic from x with this velocity
    /// ends at y.
    pub v: Vec<f64>,
    /// Final velocity of that geodesic, i.e. the tangent at y.
    pub end_v: Vec<f64>,
    pub iters: usize,
}

/// Integrator options for the shots inside the boundary-value solve. Tighter
/// than the public default so that downstream finite differences of end_v
/// sit well below their tolerance.
fn shot_opts() -> OdeOptions {
    OdeOptions { tol: 1e-12, ..OdeOptions::default() }
}

/// Solve exp_x(v) = y for v by damped Newton iteration on the shooting map,
/// starting from `guess` (chart difference y - x when absent).
pub fn log_map(
    man: &Manifold,
    x: &[f64],
    y: &[f64],
    guess: Option<&[f64]>,
) -> Result<LogResult, GeoError> {
    let d = man.dim;
    if x.len() != d || y.len() != d {
        return Err(GeoError::BadInput("point dimension mismatch".into()));
    }
    let opts = shot_opts();
    let mut v: Vec<f64> = match guess {
        Some(g) => g.to_vec(),
        None => x.iter().zip(y).map(|(a, b)| b - a).collect(),
    };

    let shoot = |v: &[f64]| -> Result<(Vec<f64>, Vec<f64>), GeoError> {
        let res = geodesic_shoot(man, None, x, v, 1.0, &opts)?;
        let r: Vec<f64> = res.x.iter().zip(y).map(|(a, b)| a - b).collect();
        Ok((r, res.v))
    };

    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, e| m.max(e.abs()));

    let (mut resid, mut end_v) = shoot(&v)?;
    let mut best = norm(&resid);
    let mut best_v = v.clone();
    let mut best_end = end_v.clone();
    let mut since_improvement = 0usize;
    let mut iters = 0usize;

    while best > 1e-13 && iters < 60 && since_improvement < 3 {
        iters += 1;
        // Forward-difference Jacobian of the shooting residual.
        let hj = 1e-6 * norm(&v).max(1.0);
        let mut jac = DMatrix::zeros(d, d);
        let mut ok = true;
        for j in 0..d {
            let mut vp = v.clone();
            vp[j] += hj;
            match shoot(&vp) {
                Ok((rp, _)) => {
                    for i in 0..d {
                        jac[(i, j)] = (rp[i] - resid[i]) / hj;
                    }
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        let lu = jac.lu();
        let dv = match lu.solve(&DVector::from_column_slice(&resid)) {
            Some(s) => s,
            None => break,
        };

        // Damped update: halve until the shot stays in chart and the residual
        // does not blow up.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..8 {
            let vt: Vec<f64> = (0..d).map(|i| v[i] - lambda * dv[i]).collect();
            if let Ok((rt, et)) = shoot(&vt) {
                let nt = norm(&rt);
                if nt < 10.0 * best {
                    v = vt;
                    resid = rt;
                    end_v = et;
                    if nt < best {
                        best = nt;
                        best_v = v.clone();
                        best_end = end_v.clone();
                        since_improvement = 0;
                    } else {
                        since_improvement += 1;
                    }
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    if best <= TOL_BVP {
        Ok(LogResult { v: best_v, end_v: best_end, iters })
    } else {
        Err(GeoError::NoConvergence { iters, residual: best })
    }
}

/// World function sigma(x, y) = half the squared geodesic distance, signed by
/// the metric: g_x(v, v) / 2 for v the inverse exponential map at x.
pub fn synge(man: &Manifold, x: &[f64], y: &[f64]) -> Result<f64, GeoError> {
    let lr = log_map(man, x, y, None)?;
    Ok(0.5 * man.inner(x, &lr.v, &lr.v)?)
}

/// Geodesic midpoint of x and y.
pub fn midpoint(man: &Manifold, x: &[f64], y: &[f64]) -> Result<Vec<f64>, GeoError> {
    let lr = log_map(man, x, y, None)?;
    let res = geodesic_shoot(man, None, x, &lr.v, 0.5, &shot_opts())?;
    Ok(res.x)
}

/// Fiber transport along the geodesic from x to y, together with the
/// boundary-value data of that geodesic.
pub(super) fn transport_between(
    man: &Manifold,
    bundle: &BundleConnection,
    x: &[f64],
    y: &[f64],
    guess: Option<&[f64]>,
) -> Result<(DMatrix<f64>, LogResult), GeoError> {
    let lr = log_map(man, x, y, guess)?;
    let res = geodesic_shoot(man, Some(bundle), x, &lr.v, 1.0, &shot_opts())?;
    let t = res.transport.expect("bundle transport requested");
    Ok((t, lr))
}
