//! Adaptive geodesic and parallel-transport integration.
//!
//! One Dormand-Prince 5(4) integrator drives the joint system
//!   xdot^a = v^a
//!   vdot^a = -Gamma^a_{bc} v^b v^c
//!   Tdot   = -(omega_mu v^mu) T
//! where T is the fiber transport matrix along the curve (optional). Step
//! control is the usual accept/reject on the embedded 4th-order error
//! estimate.

use nalgebra::DMatrix;

use super::manifold::{BundleConnection, Manifold};
use super::{GeoError, TOL_ODE};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { tol: TOL_ODE, max_steps: 200_000 }
    }
}

#[derive(Clone, Debug)]
pub struct GeodesicResult {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Transport matrix from the start fiber to the end fiber.
    pub transport: Option<DMatrix<f64>>,
    pub steps: usize,
    /// Largest drift of g(v, v) from its initial value along the curve.
    pub gvv_drift: f64,
}

const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] =
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate the geodesic from (x0, v0) for parameter time t. When a bundle
/// is given, the fiber transport matrix is carried along and returned.
pub fn geodesic_shoot(
    man: &Manifold,
    bundle: Option<&BundleConnection>,
    x0: &[f64],
    v0: &[f64],
    t: f64,
    opts: &OdeOptions,
) -> Result<GeodesicResult, GeoError> {
    let d = man.dim;
    if x0.len() != d || v0.len() != d {
        return Err(GeoError::BadInput(format!(
            "state dimension mismatch: manifold is {}-dimensional",
            d
        )));
    }
    if !man.contains(x0) {
        return Err(GeoError::LeftChart { t: 0.0 });
    }
    let r = bundle.map(|b| b.rank()).unwrap_or(0);

    // State layout: [x | v | T column-major].
    let n = 2 * d + r * r;
    let mut y = vec![0.0; n];
    y[..d].copy_from_slice(x0);
    y[d..2 * d].copy_from_slice(v0);
    for i in 0..r {
        y[2 * d + i * r + i] = 1.0;
    }

    // Derivative closure; returns false (without touching dy fully) when the
    // evaluation point is outside the chart box.
    let deriv = |y: &[f64], dy: &mut [f64]| -> Result<bool, GeoError> {
        let x = &y[..d];
        let v = &y[d..2 * d];
        if !man.contains(x) {
            return Ok(false);
        }
        let chris = man.christoffel(x)?;
        dy[..d].copy_from_slice(v);
        for a in 0..d {
            let mut s = 0.0;
            for b in 0..d {
                for c in 0..d {
                    s += chris[a][(b, c)] * v[b] * v[c];
                }
            }
            dy[d + a] = -s;
        }
        if let Some(bun) = bundle {
            let om = bun.omega(x)?;
            let mut m = DMatrix::zeros(r, r);
            for mu in 0..d {
                m += &om[mu] * v[mu];
            }
            for col in 0..r {
                for row in 0..r {
                    let mut s = 0.0;
                    for kk in 0..r {
                        s += m[(row, kk)] * y[2 * d + col * r + kk];
                    }
                    dy[2 * d + col * r + row] = -s;
                }
            }
        }
        Ok(true)
    };

    let gvv0 = man.inner(x0, v0, v0)?;
    let mut gvv_drift = 0.0f64;
    let mut time = 0.0;
    let dir = if t >= 0.0 { 1.0 } else { -1.0 };
    let t_end = t.abs();
    let t_eps = 1e-13 * t_end.max(1.0);
    let mut h = (t_end / 16.0).max(1e-6).min(0.1);
    let mut steps = 0usize;

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut knew = vec![0.0; n];

    if !deriv(&y, &mut k[0])? {
        return Err(GeoError::LeftChart { t: 0.0 });
    }

    while t_end - time > t_eps {
        if steps >= opts.max_steps || h < 1e-14 {
            return Err(GeoError::StepFailure { t: time * dir, h });
        }
        let hs = h.min(t_end - time) * dir;

        let mut in_chart = true;
        for (idx, coeffs) in
            [&A2[..], &A3[..], &A4[..], &A5[..], &A6[..], &B5[..6]].iter().enumerate()
        {
            for i in 0..n {
                let mut s = 0.0;
                for (j, c) in coeffs.iter().enumerate() {
                    s += c * k[j][i];
                }
                ytmp[i] = y[i] + hs * s;
            }
            if !deriv(&ytmp, &mut knew)? {
                in_chart = false;
                break;
            }
            core::mem::swap(&mut k[idx + 1], &mut knew);
        }
        if !in_chart {
            // A stage evaluation poked outside the chart box. Shrink; if the
            // step has already collapsed the trajectory is leaving for good.
            if h < 1e-10 {
                return Err(GeoError::LeftChart { t: time * dir });
            }
            h *= 0.5;
            continue;
        }

        // After the loop ytmp holds the 5th-order solution (the B5 stage) and
        // k[6] its derivative: DP5 is FSAL.
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for j in 0..7 {
                e += (B5[j] - B4[j]) * k[j][i];
            }
            e *= hs;
            let sc = opts.tol + opts.tol * y[i].abs().max(ytmp[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / n as f64).sqrt();

        if err <= 1.0 {
            time += hs.abs();
            core::mem::swap(&mut y, &mut ytmp);
            k.swap(0, 6);
            steps += 1;
            let x = &y[..d];
            let v = &y[d..2 * d];
            if !man.contains(x) {
                return Err(GeoError::LeftChart { t: time * dir });
            }
            let gvv = man.inner(x, v, v)?;
            gvv_drift = gvv_drift.max((gvv - gvv0).abs());
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h = (h * fac).min(t_end.max(1.0));
    }

    let transport = if r > 0 {
        Some(DMatrix::from_fn(r, r, |row, col| y[2 * d + col * r + row]))
    } else {
        None
    };
    Ok(GeodesicResult {
        x: y[..d].to_vec(),
        v: y[d..2 * d].to_vec(),
        transport,
        steps,
        gvv_drift,
    })
}
