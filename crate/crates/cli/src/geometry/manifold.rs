//! Chart descriptions of the benchmark manifolds and their bundles.
//!
//! Curvature conventions match the symbolic engine: R^a_{bcd} is defined by
//! [nabla_c, nabla_d] v^a = R^a_{bcd} v^b, the Ricci tensor contracts the
//! first and third slots, and a bundle curvature F^A_{Bcd} acts the same way
//! on fiber vectors. On the unit sphere these give Ricci = +g and R = 2.

use nalgebra::DMatrix;

use super::{GeoError, H_FD, NONDEGENERATE_DET};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricSignature {
    Riemannian,
    Lorentzian,
}

/// Rank-4 curvature values R^a_{bcd} at one point, stored dense.
#[derive(Clone, Debug)]
pub struct Riemann {
    dim: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn zero(dim: usize) -> Self {
        Riemann { dim, data: vec![0.0; dim * dim * dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.data[((a * self.dim + b) * self.dim + c) * self.dim + d]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, d: usize, v: f64) {
        self.data[((a * self.dim + b) * self.dim + c) * self.dim + d] = v;
    }

    /// Ricci contraction R_{bd} = R^a_{bad}.
    pub fn ricci(&self) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |b, e| (0..d).map(|a| self.get(a, b, a, e)).sum())
    }
}

/// One manifold in one chart. The metric closure is total on the chart box;
/// Christoffel symbols and curvature fall back to central finite differences
/// when no analytic closure is supplied.
#[derive(Clone)]
pub struct Manifold {
    pub name: &'static str,
    pub dim: usize,
    pub signature: MetricSignature,
    pub chart_lo: Vec<f64>,
    pub chart_hi: Vec<f64>,
    pub h_fd: f64,
    metric: fn(&[f64]) -> DMatrix<f64>,
    christoffel: Option<fn(&[f64]) -> Vec<DMatrix<f64>>>,
    riemann: Option<fn(&[f64]) -> Riemann>,
}

pub const MANIFOLD_NAMES: [&str; 4] = ["flat2", "flat4_lorentz", "sphere2", "schwarzschild_like"];

pub fn manifold(name: &str) -> Result<Manifold, GeoError> {
    match name {
        "flat2" => Ok(Manifold {
            name: "flat2",
            dim: 2,
            signature: MetricSignature::Riemannian,
            chart_lo: vec![-5.0, -5.0],
            chart_hi: vec![5.0, 5.0],
            h_fd: H_FD,
            metric: |_| DMatrix::identity(2, 2),
            christoffel: Some(|_| vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)]),
            riemann: Some(|_| Riemann::zero(2)),
        }),
        "flat4_lorentz" => Ok(Manifold {
            name: "flat4_lorentz",
            dim: 4,
            signature: MetricSignature::Lorentzian,
            chart_lo: vec![-5.0; 4],
            chart_hi: vec![5.0; 4],
            h_fd: H_FD,
            metric: |_| DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0, 1.0, 1.0])),
            christoffel: Some(|_| (0..4).map(|_| DMatrix::zeros(4, 4)).collect()),
            riemann: Some(|_| Riemann::zero(4)),
        }),
        "sphere2" => Ok(Manifold {
            name: "sphere2",
            dim: 2,
            signature: MetricSignature::Riemannian,
            chart_lo: vec![0.12, -3.2],
            chart_hi: vec![core::f64::consts::PI - 0.12, 3.2],
            h_fd: H_FD,
            metric: sphere_metric,
            christoffel: Some(sphere_christoffel),
            riemann: Some(sphere_riemann),
        }),
        // Static Lorentzian surface ds^2 = -f dt^2 + dr^2/f with f = 1 - 2/r.
        // Curvature 2/r^3 varies with r, so third-derivative expansion terms
        // are exercised; connection and curvature run through the finite
        // difference path on purpose.
        "schwarzschild_like" => Ok(Manifold {
            name: "schwarzschild_like",
            dim: 2,
            signature: MetricSignature::Lorentzian,
            chart_lo: vec![-10.0, 3.2],
            chart_hi: vec![10.0, 12.0],
            h_fd: H_FD,
            metric: |x| {
                let f = 1.0 - 2.0 / x[1];
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-f, 1.0 / f]))
            },
            christoffel: None,
            riemann: None,
        }),
        other => Err(GeoError::UnknownManifold(other.to_string())),
    }
}

fn sphere_metric(x: &[f64]) -> DMatrix<f64> {
    let s = x[0].sin();
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, s * s]))
}

fn sphere_christoffel(x: &[f64]) -> Vec<DMatrix<f64>> {
    let (s, c) = (x[0].sin(), x[0].cos());
    let mut th = DMatrix::zeros(2, 2);
    th[(1, 1)] = -s * c;
    let mut ph = DMatrix::zeros(2, 2);
    ph[(0, 1)] = c / s;
    ph[(1, 0)] = c / s;
    vec![th, ph]
}

fn sphere_riemann(x: &[f64]) -> Riemann {
    // Constant sectional curvature 1: R^a_{bcd} = delta^a_c g_{db} - delta^a_d g_{cb}.
    let g = sphere_metric(x);
    let mut r = Riemann::zero(2);
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    let mut v = 0.0;
                    if a == c {
                        v += g[(d, b)];
                    }
                    if a == d {
                        v -= g[(c, b)];
                    }
                    r.set(a, b, c, d, v);
                }
            }
        }
    }
    r
}

impl Manifold {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.chart_lo.iter().zip(self.chart_hi.iter()))
            .all(|(xi, (lo, hi))| xi >= lo && xi <= hi)
    }

    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>, GeoError> {
        let g = (self.metric)(x);
        let det = g.determinant();
        if det.abs() < NONDEGENERATE_DET {
            return Err(GeoError::DegenerateMetric { det });
        }
        Ok(g)
    }

    pub fn metric_inv(&self, x: &[f64]) -> Result<DMatrix<f64>, GeoError> {
        let g = self.metric(x)?;
        g.clone()
            .try_inverse()
            .ok_or(GeoError::DegenerateMetric { det: g.determinant() })
    }

    /// g_x(u, v).
    pub fn inner(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64, GeoError> {
        let g = self.metric(x)?;
        let mut s = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                s += g[(a, b)] * u[a] * v[b];
            }
        }
        Ok(s)
    }

    /// Christoffel symbols as matrices per upper index: chris[a][(b, c)] = Gamma^a_{bc}.
    pub fn christoffel(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>, GeoError> {
        if let Some(f) = self.christoffel {
            return Ok(f(x));
        }
        let d = self.dim;
        let h = self.h_fd;
        let ginv = self.metric_inv(x)?;
        // dg[m] = partial_m g, central differences.
        let mut dg = Vec::with_capacity(d);
        let mut xp = x.to_vec();
        for m in 0..d {
            xp[m] = x[m] + h;
            let gp = self.metric(&xp)?;
            xp[m] = x[m] - h;
            let gm = self.metric(&xp)?;
            xp[m] = x[m];
            dg.push((gp - gm) / (2.0 * h));
        }
        let mut out = vec![DMatrix::zeros(d, d); d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let mut s = 0.0;
                    for e in 0..d {
                        s += ginv[(a, e)] * (dg[b][(e, c)] + dg[c][(e, b)] - dg[e][(b, c)]);
                    }
                    out[a][(b, c)] = 0.5 * s;
                }
            }
        }
        Ok(out)
    }

    /// R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb}
    ///           + Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb}.
    pub fn riemann(&self, x: &[f64]) -> Result<Riemann, GeoError> {
        if let Some(f) = self.riemann {
            return Ok(f(x));
        }
        let d = self.dim;
        let h = self.h_fd;
        let mut dchris = Vec::with_capacity(d);
        let mut xp = x.to_vec();
        for m in 0..d {
            xp[m] = x[m] + h;
            let cp = self.christoffel(&xp)?;
            xp[m] = x[m] - h;
            let cm = self.christoffel(&xp)?;
            xp[m] = x[m];
            let diff: Vec<DMatrix<f64>> =
                cp.into_iter().zip(cm).map(|(p, q)| (p - q) / (2.0 * h)).collect();
            dchris.push(diff);
        }
        let chris = self.christoffel(x)?;
        let mut r = Riemann::zero(d);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut v = dchris[c][a][(e, b)] - dchris[e][a][(c, b)];
                        for f in 0..d {
                            v += chris[a][(c, f)] * chris[f][(e, b)]
                                - chris[a][(e, f)] * chris[f][(c, b)];
                        }
                        r.set(a, b, c, e, v);
                    }
                }
            }
        }
        Ok(r)
    }

    pub fn ricci(&self, x: &[f64]) -> Result<DMatrix<f64>, GeoError> {
        Ok(self.riemann(x)?.ricci())
    }

    pub fn scalar_curvature(&self, x: &[f64]) -> Result<f64, GeoError> {
        let ric = self.ricci(x)?;
        let ginv = self.metric_inv(x)?;
        Ok((ginv * ric).trace())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BundleKind {
    /// Tangent bundle with the Levi-Civita connection; curvature is the
    /// Riemann tensor.
    TangentFrame,
    /// Trivial bundle with the flat connection.
    Trivial(usize),
}

/// A vector bundle with connection over one of the chart manifolds.
pub struct BundleConnection<'m> {
    pub man: &'m Manifold,
    pub kind: BundleKind,
}

impl<'m> BundleConnection<'m> {
    pub fn tangent(man: &'m Manifold) -> Self {
        BundleConnection { man, kind: BundleKind::TangentFrame }
    }

    pub fn trivial(man: &'m Manifold, rank: usize) -> Self {
        BundleConnection { man, kind: BundleKind::Trivial(rank) }
    }

    pub fn rank(&self) -> usize {
        match self.kind {
            BundleKind::TangentFrame => self.man.dim,
            BundleKind::Trivial(r) => r,
        }
    }

    /// Connection matrices per direction: omega[mu](a, b) = omega^a_{b mu},
    /// entering transport as sdot^a = -omega^a_{b mu} xdot^mu s^b.
    pub fn omega(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>, GeoError> {
        match self.kind {
            BundleKind::TangentFrame => {
                let chris = self.man.christoffel(x)?;
                let d = self.man.dim;
                Ok((0..d)
                    .map(|mu| DMatrix::from_fn(d, d, |a, b| chris[a][(mu, b)]))
                    .collect())
            }
            BundleKind::Trivial(r) => Ok(vec![DMatrix::zeros(r, r); self.man.dim]),
        }
    }

    /// Curvature fiber map F_{mu nu} = d_mu omega_nu - d_nu omega_mu
    /// + [omega_mu, omega_nu], so that [nabla_mu, nabla_nu] s = F_{mu nu} s.
    pub fn curvature(&self, x: &[f64], mu: usize, nu: usize) -> Result<DMatrix<f64>, GeoError> {
        match self.kind {
            BundleKind::TangentFrame => {
                let riem = self.man.riemann(x)?;
                let d = self.man.dim;
                Ok(DMatrix::from_fn(d, d, |a, b| riem.get(a, b, mu, nu)))
            }
            BundleKind::Trivial(r) => Ok(DMatrix::zeros(r, r)),
        }
    }

    /// Covariant derivative nabla_ga F_{mu nu}, combining the finite
    /// difference of the fiber part with the connection commutator and the
    /// base-index Christoffel corrections.
    pub fn curvature_cov_deriv(
        &self,
        x: &[f64],
        mu: usize,
        nu: usize,
        ga: usize,
    ) -> Result<DMatrix<f64>, GeoError> {
        if let BundleKind::Trivial(r) = self.kind {
            return Ok(DMatrix::zeros(r, r));
        }
        // Coarser than h_fd: the curvature being differenced may itself come
        // from finite differences, so the step must dominate its noise floor.
        let h = 1e-3;
        let mut xp = x.to_vec();
        xp[ga] = x[ga] + h;
        let fp = self.curvature(&xp, mu, nu)?;
        xp[ga] = x[ga] - h;
        let fm = self.curvature(&xp, mu, nu)?;
        let mut out = (fp - fm) / (2.0 * h);
        let om = self.omega(x)?;
        let f0 = self.curvature(x, mu, nu)?;
        out += &om[ga] * &f0 - &f0 * &om[ga];
        let chris = self.man.christoffel(x)?;
        for la in 0..self.man.dim {
            out -= chris[la][(ga, mu)] * self.curvature(x, la, nu)?;
            out -= chris[la][(ga, nu)] * self.curvature(x, mu, la)?;
        }
        Ok(out)
    }

    /// Fiber inner product preserved by transport.
    pub fn fiber_metric(&self, x: &[f64]) -> Result<DMatrix<f64>, GeoError> {
        match self.kind {
            BundleKind::TangentFrame => self.man.metric(x),
            BundleKind::Trivial(r) => Ok(DMatrix::identity(r, r)),
        }
    }
}
