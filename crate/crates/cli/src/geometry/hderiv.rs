//! Numeric check of the horizontal-derivative formula on phase space.
//!
//! The symbol calculus defines the horizontal derivative of u(x, p) through
//! the geodesic flow: move the base point along exp_x(t e_mu), drag the
//! momentum covector by parallel transport, and differentiate at t = 0. In
//! coordinates this equals (d_mu + Gamma^la_{mu nu} p_la d/d p_nu) u, and on
//! the linear symbol psi = p_mu X^mu it reduces to p_la (nabla_mu X)^la. The
//! vertical derivative is the plain momentum gradient.

use super::geodesic::{geodesic_shoot, OdeOptions};
use super::manifold::{BundleConnection, Manifold};
use super::GeoError;

#[derive(Clone, Debug)]
pub struct HderivReport {
    /// Horizontal derivative of psi along each coordinate direction, from the
    /// transported geodesic flow.
    pub flow: Vec<f64>,
    /// The same from the coordinate formula with Christoffel symbols.
    pub coord: Vec<f64>,
    /// The covariant-derivative prediction p_la (nabla_mu X)^la.
    pub oracle: Vec<f64>,
    /// Vertical derivative of psi, which must equal X at the base point.
    pub vertical: Vec<f64>,
    pub vertical_expected: Vec<f64>,
    /// Largest deviation of `flow` from `oracle`.
    pub max_err: f64,
}

/// Vector field used as the probe: generic, analytic, with analytic partials.
fn probe_x(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|a| (x[(a + 1) % d]).sin() + 0.5 * (x[a]).cos())
        .collect()
}

fn probe_dx(x: &[f64]) -> Vec<Vec<f64>> {
    // dx[mu][a] = d_mu X^a.
    let d = x.len();
    let mut out = vec![vec![0.0; d]; d];
    for a in 0..d {
        out[(a + 1) % d][a] += (x[(a + 1) % d]).cos();
        out[a][a] -= 0.5 * (x[a]).sin();
    }
    out
}

/// Run the comparison at phase point (x, p).
pub fn check_hderiv_lemma(
    man: &Manifold,
    x: &[f64],
    p: &[f64],
) -> Result<HderivReport, GeoError> {
    let d = man.dim;
    if x.len() != d || p.len() != d {
        return Err(GeoError::BadInput("phase point dimension mismatch".into()));
    }
    let bundle = BundleConnection::tangent(man);
    let opts = OdeOptions { tol: 1e-12, ..OdeOptions::default() };

    // psi evaluated after flowing for parameter t along direction mu, with p
    // dragged by covector transport (the inverse transpose of the vector
    // transport, so that the pairing with transported vectors is constant).
    let flow_psi = |mu: usize, t: f64| -> Result<f64, GeoError> {
        let mut v0 = vec![0.0; d];
        v0[mu] = t;
        let res = geodesic_shoot(man, Some(&bundle), x, &v0, 1.0, &opts)?;
        let tr = res.transport.expect("tangent transport requested");
        let tinv = tr
            .clone()
            .try_inverse()
            .ok_or(GeoError::IllConditioned { det: tr.determinant() })?;
        // p_end = T^{-T} p, i.e. p_end[b] = sum_a tinv[(a, b)] p[a].
        let xv = probe_x(&res.x);
        let mut val = 0.0;
        for b in 0..d {
            let mut pb = 0.0;
            for a in 0..d {
                pb += tinv[(a, b)] * p[a];
            }
            val += pb * xv[b];
        }
        Ok(val)
    };

    let h = 2e-3;
    let mut flow = vec![0.0; d];
    for mu in 0..d {
        let dfull = (flow_psi(mu, h)? - flow_psi(mu, -h)?) / (2.0 * h);
        let dhalf = (flow_psi(mu, h / 2.0)? - flow_psi(mu, -h / 2.0)?) / h;
        flow[mu] = (4.0 * dhalf - dfull) / 3.0;
    }

    let chris = man.christoffel(x)?;
    let xv = probe_x(x);
    let dxv = probe_dx(x);
    let mut coord = vec![0.0; d];
    let mut oracle = vec![0.0; d];
    for mu in 0..d {
        // d_mu psi at fixed p plus the Christoffel shift of the fiber.
        let mut c = 0.0;
        for nu in 0..d {
            c += p[nu] * dxv[mu][nu];
            for la in 0..d {
                c += chris[la][(mu, nu)] * p[la] * xv[nu];
            }
        }
        coord[mu] = c;
        // p_la (nabla_mu X)^la written out is the same contraction; kept as a
        // separately coded route so an index slip in either one shows up.
        let mut o = 0.0;
        for la in 0..d {
            let mut cov = dxv[mu][la];
            for nu in 0..d {
                cov += chris[la][(mu, nu)] * xv[nu];
            }
            o += p[la] * cov;
        }
        oracle[mu] = o;
    }

    // Vertical derivative of p . X(x) in p is X(x) exactly; difference the
    // symbol anyway so the route matches how a general symbol would be probed.
    let psi_at = |pp: &[f64]| -> f64 { pp.iter().zip(xv.iter()).map(|(a, b)| a * b).sum() };
    let mut vertical = vec![0.0; d];
    let mut pp = p.to_vec();
    for nu in 0..d {
        pp[nu] = p[nu] + h;
        let fp = psi_at(&pp);
        pp[nu] = p[nu] - h;
        let fm = psi_at(&pp);
        pp[nu] = p[nu];
        vertical[nu] = (fp - fm) / (2.0 * h);
    }

    let max_err = flow
        .iter()
        .zip(oracle.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    Ok(HderivReport {
        flow,
        coord,
        oracle,
        vertical,
        vertical_expected: xv,
        max_err,
    })
}
