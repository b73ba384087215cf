//! Van Vleck-Morette determinant and its short-distance expansion.
//!
//! The mixed second derivative of the world function is taken with only one
//! finite-difference layer: the y-gradient of sigma equals the lowered final
//! velocity of the x-to-y geodesic (a standard first-variation identity), so
//! the boundary-value solver supplies d_y sigma directly and only the x
//! derivative is differenced numerically.

use nalgebra::DMatrix;

use super::geodesic::{geodesic_shoot, OdeOptions};
use super::manifold::{Manifold, MetricSignature};
use super::maps::log_map;
use super::GeoError;

/// q_b(x, y) = d sigma / d y^b = g_{bc}(y) * (final velocity)^c.
fn sigma_grad_y(
    man: &Manifold,
    x: &[f64],
    y: &[f64],
    guess: Option<&[f64]>,
) -> Result<Vec<f64>, GeoError> {
    let lr = log_map(man, x, y, guess)?;
    let gy = man.metric(y)?;
    let d = man.dim;
    let mut q = vec![0.0; d];
    for b in 0..d {
        for c in 0..d {
            q[b] += gy[(b, c)] * lr.end_v[c];
        }
    }
    Ok(q)
}

fn mixed_matrix(
    man: &Manifold,
    x: &[f64],
    y: &[f64],
    h: f64,
    guess: &[f64],
) -> Result<DMatrix<f64>, GeoError> {
    let d = man.dim;
    let mut m = DMatrix::zeros(d, d);
    let mut xs = x.to_vec();
    for a in 0..d {
        xs[a] = x[a] + h;
        let qp = sigma_grad_y(man, &xs, y, Some(guess))?;
        xs[a] = x[a] - h;
        let qm = sigma_grad_y(man, &xs, y, Some(guess))?;
        xs[a] = x[a];
        for b in 0..d {
            m[(a, b)] = -(qp[b] - qm[b]) / (2.0 * h);
        }
    }
    Ok(m)
}

/// Van Vleck-Morette determinant
///   Delta(x, y) = det(-d_x d_y sigma) / sqrt(|g(x)| |g(y)|),
/// with one Richardson level on the base step h.
pub fn van_vleck(man: &Manifold, x: &[f64], y: &[f64], h: f64) -> Result<f64, GeoError> {
    let central = log_map(man, x, y, None)?;
    let m1 = mixed_matrix(man, x, y, h, &central.v)?;
    let m2 = mixed_matrix(man, x, y, h / 2.0, &central.v)?;
    let m = (m2 * 4.0 - m1) / 3.0;
    let det = m.determinant();
    if det.abs() < 1e-10 {
        return Err(GeoError::IllConditioned { det });
    }
    let gx = man.metric(x)?.determinant().abs();
    let gy = man.metric(y)?.determinant().abs();
    Ok(det / (gx * gy).sqrt())
}

/// Independent route for two-dimensional Riemannian charts: integrate the
/// normal Jacobi equation j'' = -K j along the unit-speed geodesic, then
/// Delta = rho / j(rho).
pub fn van_vleck_jacobi(man: &Manifold, x: &[f64], y: &[f64]) -> Result<f64, GeoError> {
    if man.dim != 2 || man.signature != MetricSignature::Riemannian {
        return Err(GeoError::BadInput(
            "Jacobi route needs a 2d Riemannian chart".into(),
        ));
    }
    let lr = log_map(man, x, y, None)?;
    let vv = man.inner(x, &lr.v, &lr.v)?;
    if vv <= 0.0 {
        return Err(GeoError::BadInput("degenerate separation".into()));
    }
    let rho = vv.sqrt();
    let u: Vec<f64> = lr.v.iter().map(|c| c / rho).collect();

    let gauss = |p: &[f64]| -> Result<f64, GeoError> {
        let g = man.metric(p)?;
        let r = man.riemann(p)?;
        let mut r0101 = 0.0;
        for e in 0..2 {
            r0101 += g[(0, e)] * r.get(e, 1, 0, 1);
        }
        Ok(r0101 / g.determinant())
    };

    // Fixed-step RK4 on (position, velocity, j, j') in arc length.
    let steps = 2000usize;
    let hs = rho / steps as f64;
    let mut state = [x[0], x[1], u[0], u[1], 0.0, 1.0];
    let deriv = |s: &[f64; 6]| -> Result<[f64; 6], GeoError> {
        let p = [s[0], s[1]];
        let v = [s[2], s[3]];
        let chris = man.christoffel(&p)?;
        let mut acc = [0.0; 2];
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    acc[a] -= chris[a][(b, c)] * v[b] * v[c];
                }
            }
        }
        let k = gauss(&p)?;
        Ok([v[0], v[1], acc[0], acc[1], s[5], -k * s[4]])
    };
    for _ in 0..steps {
        let k1 = deriv(&state)?;
        let mut s2 = state;
        for i in 0..6 {
            s2[i] += 0.5 * hs * k1[i];
        }
        let k2 = deriv(&s2)?;
        let mut s3 = state;
        for i in 0..6 {
            s3[i] += 0.5 * hs * k2[i];
        }
        let k3 = deriv(&s3)?;
        let mut s4 = state;
        for i in 0..6 {
            s4[i] += hs * k3[i];
        }
        let k4 = deriv(&s4)?;
        for i in 0..6 {
            state[i] += hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let j = state[4];
    if j.abs() < 1e-12 {
        return Err(GeoError::IllConditioned { det: j });
    }
    Ok(rho / j)
}

#[derive(Clone, Debug)]
pub struct CoincidenceReport {
    pub gamma: f64,
    /// Second u-derivative matrix of Delta^{-gamma}(exp_z(-u/2), exp_z(u/2))
    /// at u = 0.
    pub second: DMatrix<f64>,
    /// The curvature prediction -(gamma/3) Ricci(z).
    pub expected: DMatrix<f64>,
    /// Largest first central difference; zero up to noise by symmetry.
    pub first_max: f64,
}

/// Short-distance expansion of the symmetrized determinant factor. Central
/// differences in the tangent vector u with one Richardson level on h.
pub fn coincidence_limits(
    man: &Manifold,
    z: &[f64],
    gamma: f64,
    h: f64,
    h_vv: f64,
) -> Result<CoincidenceReport, GeoError> {
    let d = man.dim;
    let opts = OdeOptions { tol: 1e-12, ..OdeOptions::default() };
    let f = |u: &[f64]| -> Result<f64, GeoError> {
        let half_m: Vec<f64> = u.iter().map(|c| -0.5 * c).collect();
        let half_p: Vec<f64> = u.iter().map(|c| 0.5 * c).collect();
        let xm = geodesic_shoot(man, None, z, &half_m, 1.0, &opts)?.x;
        let xp = geodesic_shoot(man, None, z, &half_p, 1.0, &opts)?.x;
        let delta = van_vleck(man, &xm, &xp, h_vv)?;
        Ok(delta.powf(-gamma))
    };

    let second_at = |h: f64| -> Result<(DMatrix<f64>, f64), GeoError> {
        let f0 = f(&vec![0.0; d])?;
        let mut s = DMatrix::zeros(d, d);
        let mut first_max = 0.0f64;
        let mut u = vec![0.0; d];
        for a in 0..d {
            u[a] = h;
            let fp = f(&u)?;
            u[a] = -h;
            let fm = f(&u)?;
            u[a] = 0.0;
            s[(a, a)] = (fp - 2.0 * f0 + fm) / (h * h);
            first_max = first_max.max(((fp - fm) / (2.0 * h)).abs());
        }
        for a in 0..d {
            for b in (a + 1)..d {
                u[a] = h;
                u[b] = h;
                let fpp = f(&u)?;
                u[b] = -h;
                let fpm = f(&u)?;
                u[a] = -h;
                let fmm = f(&u)?;
                u[b] = h;
                let fmp = f(&u)?;
                u[a] = 0.0;
                u[b] = 0.0;
                let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
                s[(a, b)] = v;
                s[(b, a)] = v;
            }
        }
        Ok((s, first_max))
    };

    let (s1, fm1) = second_at(h)?;
    let (s2, fm2) = second_at(h / 2.0)?;
    let second = (s2 * 4.0 - s1) / 3.0;
    let expected = man.ricci(z)? * (-gamma / 3.0);
    Ok(CoincidenceReport { gamma, second, expected, first_max: fm1.max(fm2) })
}
