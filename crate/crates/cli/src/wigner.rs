//! Flat-chart Wigner transform on periodic grids and the numeric residual of
//! the phase-space transport equation.
//!
//! Discretization: the separation lattice is u = 2 m dx, so z - u/2 and
//! z + u/2 both land on grid points and the transform is one FFT per base
//! point. The momentum lattice is the discrete Fourier dual of the u-lattice,
//! p_k = pi eps k / L with k a signed bin index. With this pairing the
//! discrete momentum marginal of W equals the pointwise density exactly, and
//! the adjoint symmetry W[psi, phi](z, p) = W[phi, psi](z, p)^dagger is an
//! exact lattice identity.
//!
//! Boundary handling: sections are taken as exactly L-periodic and the
//! separation sum wraps around the box; the effective window is rectangular
//! over one period and no taper is applied. States built by the constructors
//! here (commensurate plane waves, well-contained Gaussians) are compatible
//! with that window at machine precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use num_traits::ToPrimitive;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use weyl_core::{Head, TensorExpr};

pub const MIN_POINTS_PER_WAVELENGTH: f64 = 8.0;

/// Spectral bins below this fraction of total power are ignored by the
/// resolution check.
pub const POWER_FLOOR: f64 = 1e-8;

pub const WINDOW: &str = "rectangular (one period, wrapped)";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WignerError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("axis {axis} under-resolved: {points:.2} points per wavelength (need {MIN_POINTS_PER_WAVELENGTH})")]
    UnderResolved { axis: usize, points: f64 },
    #[error("momentum degree {degree} exceeds the exact flat expansion range")]
    DegreeTooHigh { degree: usize },
    #[error("unsupported symbol for numeric evaluation: {0}")]
    Unsupported(String),
    #[error("{0}")]
    BadInput(String),
}

fn check_dims(shape: &[usize], lens: &[f64]) -> Result<(), WignerError> {
    let d = shape.len();
    if d == 0 || d > 2 {
        return Err(WignerError::BadInput(format!(
            "{d} axes given; the grid transform supports one or two"
        )));
    }
    if lens.len() != d {
        return Err(WignerError::BadInput("shape and lens length differ".into()));
    }
    if shape.iter().any(|&n| n < 8 || n % 2 != 0) {
        return Err(WignerError::BadInput(
            "each axis needs an even point count of at least 8".into(),
        ));
    }
    if lens.iter().any(|&l| !(l > 0.0)) {
        return Err(WignerError::BadInput("box lengths must be positive".into()));
    }
    Ok(())
}

/// A fiber-valued section sampled on a periodic box [0, L_i) per axis.
#[derive(Clone, Debug)]
pub struct GridSection {
    pub shape: Vec<usize>,
    pub lens: Vec<f64>,
    pub eps: f64,
    pub rank: usize,
    /// Row-major over the grid, fiber components contiguous per point.
    pub values: Vec<Complex64>,
}

impl GridSection {
    pub fn from_fn(
        shape: &[usize],
        lens: &[f64],
        eps: f64,
        rank: usize,
        f: impl Fn(&[f64], usize) -> Complex64,
    ) -> Result<Self, WignerError> {
        check_dims(shape, lens)?;
        if eps <= 0.0 {
            return Err(WignerError::BadInput("eps must be positive".into()));
        }
        if rank == 0 {
            return Err(WignerError::BadInput("fiber rank must be at least 1".into()));
        }
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total * rank);
        let d = shape.len();
        let mut x = vec![0.0; d];
        for j in 0..total {
            let mut rem = j;
            for (ax, &n) in shape.iter().enumerate().rev() {
                x[ax] = (rem % n) as f64 * lens[ax] / n as f64;
                rem /= n;
            }
            for a in 0..rank {
                values.push(f(&x, a));
            }
        }
        Ok(GridSection { shape: shape.to_vec(), lens: lens.to_vec(), eps, rank, values })
    }

    /// Scalar plane wave with integer mode numbers n: momentum k_i =
    /// 2 pi eps n_i / L_i, exactly commensurate with the box.
    pub fn plane_wave(
        shape: &[usize],
        lens: &[f64],
        eps: f64,
        modes: &[i64],
    ) -> Result<Self, WignerError> {
        if modes.len() != shape.len() {
            return Err(WignerError::BadInput("one mode number per axis required".into()));
        }
        let modes = modes.to_vec();
        let lens_c = lens.to_vec();
        GridSection::from_fn(shape, lens, eps, 1, move |x, _| {
            let phase: f64 = x
                .iter()
                .zip(modes.iter().zip(lens_c.iter()))
                .map(|(xi, (n, l))| 2.0 * std::f64::consts::PI * (*n as f64) * xi / l)
                .sum();
            Complex64::new(phase.cos(), phase.sin())
        })
    }

    /// Normalized scalar Gaussian packet centered at `center` with spatial
    /// widths `sigma`, riding on the commensurate plane wave of `modes`.
    pub fn gaussian_packet(
        shape: &[usize],
        lens: &[f64],
        eps: f64,
        center: &[f64],
        sigma: &[f64],
        modes: &[i64],
    ) -> Result<Self, WignerError> {
        let d = shape.len();
        if center.len() != d || sigma.len() != d || modes.len() != d {
            return Err(WignerError::BadInput(
                "center, sigma, and modes must match the axis count".into(),
            ));
        }
        if sigma.iter().zip(lens).any(|(s, l)| !(*s > 0.0) || *s > l / 8.0) {
            return Err(WignerError::BadInput(
                "packet widths must be positive and at most an eighth of the box".into(),
            ));
        }
        let amp: f64 = sigma
            .iter()
            .map(|s| (2.0 * std::f64::consts::PI * s * s).powf(-0.25))
            .product();
        let center = center.to_vec();
        let sigma = sigma.to_vec();
        let modes = modes.to_vec();
        let lens_c = lens.to_vec();
        GridSection::from_fn(shape, lens, eps, 1, move |x, _| {
            let mut expo = 0.0;
            let mut phase = 0.0;
            for i in 0..x.len() {
                // Nearest periodic image keeps the envelope smooth across the
                // wrap seam.
                let mut dxi = x[i] - center[i];
                dxi -= (dxi / lens_c[i]).round() * lens_c[i];
                expo -= dxi * dxi / (4.0 * sigma[i] * sigma[i]);
                phase += 2.0 * std::f64::consts::PI * (modes[i] as f64) * x[i] / lens_c[i];
            }
            Complex64::new(phase.cos(), phase.sin()) * amp * expo.exp()
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn dx(&self, axis: usize) -> f64 {
        self.lens[axis] / self.shape[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|ax| self.dx(ax)).product()
    }

    /// Momentum carried by integer mode n along an axis.
    pub fn mode_momentum(&self, axis: usize, n: i64) -> f64 {
        2.0 * std::f64::consts::PI * self.eps * n as f64 / self.lens[axis]
    }

    pub fn at(&self, flat: usize, a: usize) -> Complex64 {
        self.values[flat * self.rank + a]
    }

    /// Pointwise density summed over the fiber.
    pub fn density(&self, flat: usize) -> f64 {
        (0..self.rank).map(|a| self.at(flat, a).norm_sqr()).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        let cell = self.cell_volume();
        (0..self.points()).map(|j| self.density(j) * cell).sum()
    }

    fn same_grid(&self, other: &GridSection) -> Result<(), WignerError> {
        if self.shape != other.shape {
            return Err(WignerError::GridMismatch("point counts differ".into()));
        }
        if self
            .lens
            .iter()
            .zip(&other.lens)
            .any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
        {
            return Err(WignerError::GridMismatch("box lengths differ".into()));
        }
        if (self.eps - other.eps).abs() > 1e-15 * self.eps.max(other.eps) {
            return Err(WignerError::GridMismatch("semiclassical parameters differ".into()));
        }
        Ok(())
    }

    /// Largest spectrally significant mode per axis; bins carrying less than
    /// POWER_FLOOR of total power are ignored.
    fn max_significant_mode(&self) -> Result<Vec<usize>, WignerError> {
        let d = self.dim();
        let total = self.points();
        let mut planner = Planner::new();
        let mut out = vec![0usize; d];
        for a in 0..self.rank {
            let mut data: Vec<Complex64> = (0..total).map(|j| self.at(j, a)).collect();
            fft_nd(&mut data, &self.shape, &mut planner);
            let total_power: f64 = data.iter().map(|c| c.norm_sqr()).sum();
            if total_power == 0.0 {
                continue;
            }
            for (j, c) in data.iter().enumerate() {
                if c.norm_sqr() < POWER_FLOOR * total_power {
                    continue;
                }
                let mut rem = j;
                for (ax, &n) in self.shape.iter().enumerate().rev() {
                    let bin = rem % n;
                    rem /= n;
                    let signed = if bin <= n / 2 { bin } else { n - bin };
                    out[ax] = out[ax].max(signed);
                }
            }
        }
        Ok(out)
    }
}

struct Planner {
    planner: FftPlanner<f64>,
    cache: BTreeMap<usize, Arc<dyn Fft<f64>>>,
}

impl Planner {
    fn new() -> Self {
        Planner { planner: FftPlanner::new(), cache: BTreeMap::new() }
    }

    fn get(&mut self, n: usize) -> Arc<dyn Fft<f64>> {
        self.cache
            .entry(n)
            .or_insert_with(|| self.planner.plan_fft_forward(n))
            .clone()
    }
}

/// In-place forward DFT along every axis of a row-major array.
fn fft_nd(data: &mut [Complex64], shape: &[usize], planner: &mut Planner) {
    let total: usize = shape.iter().product();
    for axis in 0..shape.len() {
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        let block = stride * n;
        let fft = planner.get(n);
        let mut scratch = vec![Complex64::default(); n];
        let mut base = 0;
        while base < total {
            for off in 0..stride {
                for m in 0..n {
                    scratch[m] = data[base + off + m * stride];
                }
                fft.process(&mut scratch);
                for m in 0..n {
                    data[base + off + m * stride] = scratch[m];
                }
            }
            base += block;
        }
    }
}

/// The Wigner matrix W[psi, phi] sampled on the z-grid times its dual
/// momentum lattice. Fiber layout: conjugated psi component first.
#[derive(Clone, Debug)]
pub struct PhaseSpaceGrid {
    pub shape: Vec<usize>,
    pub lens: Vec<f64>,
    pub eps: f64,
    pub rank_psi: usize,
    pub rank_phi: usize,
    pub window: &'static str,
    /// Index layout: ((z_flat * points + p_flat) * rank_psi + a) * rank_phi + b.
    pub values: Vec<Complex64>,
}

impl PhaseSpaceGrid {
    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn points(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn dx(&self, axis: usize) -> f64 {
        self.lens[axis] / self.shape[axis] as f64
    }

    /// Momentum lattice spacing per axis.
    pub fn dp(&self, axis: usize) -> f64 {
        std::f64::consts::PI * self.eps / self.lens[axis]
    }

    /// Physical momentum of a bin index along an axis (signed wrap).
    pub fn momentum(&self, axis: usize, bin: usize) -> f64 {
        let n = self.shape[axis];
        let signed = if bin < n / 2 { bin as i64 } else { bin as i64 - n as i64 };
        self.dp(axis) * signed as f64
    }

    pub fn at(&self, z_flat: usize, p_flat: usize, a: usize, b: usize) -> Complex64 {
        let points = self.points();
        self.values[((z_flat * points + p_flat) * self.rank_psi + a) * self.rank_phi + b]
    }

    /// The momentum vector of a flat p-index.
    pub fn momentum_of(&self, p_flat: usize) -> Vec<f64> {
        let mut rem = p_flat;
        let d = self.dim();
        let mut out = vec![0.0; d];
        for ax in (0..d).rev() {
            let n = self.shape[ax];
            out[ax] = self.momentum(ax, rem % n);
            rem /= n;
        }
        out
    }

    /// Integral of W over momentum at a base point: a fiber matrix. Equals
    /// conj(psi) tensor phi at the same grid point exactly.
    pub fn p_marginal(&self, z_flat: usize) -> Vec<Complex64> {
        let points = self.points();
        let dp: f64 = (0..self.dim()).map(|ax| self.dp(ax)).product();
        let mut out = vec![Complex64::default(); self.rank_psi * self.rank_phi];
        for p in 0..points {
            for a in 0..self.rank_psi {
                for b in 0..self.rank_phi {
                    out[a * self.rank_phi + b] += self.at(z_flat, p, a, b) * dp;
                }
            }
        }
        out
    }

    /// Integral of W over the base: the momentum distribution.
    pub fn z_marginal(&self, p_flat: usize) -> Vec<Complex64> {
        let points = self.points();
        let cell: f64 = (0..self.dim()).map(|ax| self.dx(ax)).product();
        let mut out = vec![Complex64::default(); self.rank_psi * self.rank_phi];
        for z in 0..points {
            for a in 0..self.rank_psi {
                for b in 0..self.rank_phi {
                    out[a * self.rank_phi + b] += self.at(z, p_flat, a, b) * cell;
                }
            }
        }
        out
    }

    /// Full phase-space trace integral.
    pub fn mass(&self) -> Complex64 {
        let points = self.points();
        let cell: f64 = (0..self.dim()).map(|ax| self.dx(ax)).product();
        let mut m = Complex64::default();
        let r = self.rank_psi.min(self.rank_phi);
        for z in 0..points {
            let marg = self.p_marginal(z);
            for a in 0..r {
                m += marg[a * self.rank_phi + a] * cell;
            }
        }
        m
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, c| m.max(c.im.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, c| m.max(c.norm()))
    }

    pub fn norm_l2(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry-wise deviation from the adjoint relation against the
    /// transform with the two sections swapped.
    pub fn hermiticity_defect(&self, swapped: &PhaseSpaceGrid) -> Result<f64, WignerError> {
        if self.shape != swapped.shape
            || self.rank_psi != swapped.rank_phi
            || self.rank_phi != swapped.rank_psi
        {
            return Err(WignerError::GridMismatch(
                "swapped transform has incompatible layout".into(),
            ));
        }
        let points = self.points();
        let mut defect = 0.0f64;
        for z in 0..points {
            for p in 0..points {
                for a in 0..self.rank_psi {
                    for b in 0..self.rank_phi {
                        let lhs = self.at(z, p, a, b);
                        let rhs = swapped.at(z, p, b, a).conj();
                        defect = defect.max((lhs - rhs).norm());
                    }
                }
            }
        }
        Ok(defect)
    }

    /// Momentum vector of the bin with the largest base-summed magnitude.
    pub fn peak_momentum(&self) -> Vec<f64> {
        let points = self.points();
        let mut best = (0usize, -1.0f64);
        for p in 0..points {
            let mut s = 0.0;
            for z in 0..points {
                for a in 0..self.rank_psi {
                    for b in 0..self.rank_phi {
                        s += self.at(z, p, a, b).norm_sqr();
                    }
                }
            }
            if s > best.1 {
                best = (p, s);
            }
        }
        self.momentum_of(best.0)
    }

    /// CSV dump: one row per (z, p) lattice pair and fiber entry.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut s = String::new();
        for ax in 0..d {
            let _ = write!(s, "z{ax},");
        }
        for ax in 0..d {
            let _ = write!(s, "p{ax},");
        }
        s.push_str("a,b,re,im\n");
        let points = self.points();
        for z in 0..points {
            let mut zc = vec![0.0; d];
            let mut rem = z;
            for ax in (0..d).rev() {
                zc[ax] = (rem % self.shape[ax]) as f64 * self.dx(ax);
                rem /= self.shape[ax];
            }
            for p in 0..points {
                let pc = self.momentum_of(p);
                for a in 0..self.rank_psi {
                    for b in 0..self.rank_phi {
                        let v = self.at(z, p, a, b);
                        for c in &zc {
                            let _ = write!(s, "{c:.9e},");
                        }
                        for c in &pc {
                            let _ = write!(s, "{c:.9e},");
                        }
                        let _ = write!(s, "{a},{b},{:.12e},{:.12e}\n", v.re, v.im);
                    }
                }
            }
        }
        s
    }
}

/// Wigner transform of two sections on the same flat periodic grid.
pub fn wigner_flat(psi: &GridSection, phi: &GridSection) -> Result<PhaseSpaceGrid, WignerError> {
    psi.same_grid(phi)?;
    for sec in [psi, phi] {
        let modes = sec.max_significant_mode()?;
        for (axis, &m) in modes.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let ppw = sec.shape[axis] as f64 / m as f64;
            if ppw < MIN_POINTS_PER_WAVELENGTH {
                return Err(WignerError::UnderResolved { axis, points: ppw });
            }
        }
    }

    let d = psi.dim();
    let points = psi.points();
    let shape = psi.shape.clone();
    let norm: f64 = (0..d)
        .map(|ax| 2.0 * psi.dx(ax) / (2.0 * std::f64::consts::PI * psi.eps))
        .product();

    let mut planner = Planner::new();
    let mut values =
        vec![Complex64::default(); points * points * psi.rank * phi.rank];
    let mut buf = vec![Complex64::default(); points];

    // Multi-index helpers over the row-major layout.
    let unflatten = |mut j: usize, out: &mut [usize]| {
        for ax in (0..d).rev() {
            out[ax] = j % shape[ax];
            j /= shape[ax];
        }
    };
    let flatten = |idx: &[usize]| -> usize {
        let mut j = 0;
        for ax in 0..d {
            j = j * shape[ax] + idx[ax];
        }
        j
    };

    let mut zi = vec![0usize; d];
    let mut mi = vec![0usize; d];
    let mut minus = vec![0usize; d];
    let mut plus = vec![0usize; d];
    for z in 0..points {
        unflatten(z, &mut zi);
        for a in 0..psi.rank {
            for b in 0..phi.rank {
                for m in 0..points {
                    unflatten(m, &mut mi);
                    for ax in 0..d {
                        let n = shape[ax];
                        minus[ax] = (zi[ax] + n - mi[ax] % n) % n;
                        plus[ax] = (zi[ax] + mi[ax]) % n;
                    }
                    buf[m] = psi.at(flatten(&minus), a).conj() * phi.at(flatten(&plus), b);
                }
                fft_nd(&mut buf, &shape, &mut planner);
                for p in 0..points {
                    values[((z * points + p) * psi.rank + a) * phi.rank + b] = buf[p] * norm;
                }
            }
        }
    }

    Ok(PhaseSpaceGrid {
        shape,
        lens: psi.lens.clone(),
        eps: psi.eps,
        rank_psi: psi.rank,
        rank_phi: phi.rank,
        window: WINDOW,
        values,
    })
}

/// A scalar momentum polynomial of degree at most two with complex
/// coefficients: d(p) = sum c2[mu][nu] p_mu p_nu + sum c1[mu] p_mu + c0.
#[derive(Clone, Debug)]
pub struct QuadSymbol {
    pub dim: usize,
    pub c2: Vec<Complex64>,
    pub c1: Vec<Complex64>,
    pub c0: Complex64,
}

impl QuadSymbol {
    pub fn eval(&self, p: &[f64]) -> Complex64 {
        let d = self.dim;
        let mut v = self.c0;
        for mu in 0..d {
            v += self.c1[mu] * p[mu];
            for nu in 0..d {
                v += self.c2[mu * d + nu] * p[mu] * p[nu];
            }
        }
        v
    }

    /// d/dp_mu of the polynomial.
    pub fn grad(&self, p: &[f64], mu: usize) -> Complex64 {
        let d = self.dim;
        let mut v = self.c1[mu];
        for nu in 0..d {
            v += (self.c2[mu * d + nu] + self.c2[nu * d + mu]) * p[nu];
        }
        v
    }

    pub fn hess(&self, mu: usize, nu: usize) -> Complex64 {
        let d = self.dim;
        self.c2[mu * d + nu] + self.c2[nu * d + mu]
    }
}

/// Evaluate a scalar symbol on a flat chart with diagonal metric entries
/// `eta` and a concrete semiclassical parameter. Curvature heads count as
/// zero; generic heads, bundle indices, derivative slots, free indices, and
/// non-constant quantization-weight coefficients are rejected.
pub fn eval_symbol_flat(
    e: &TensorExpr,
    eta: &[f64],
    eps: f64,
) -> Result<QuadSymbol, WignerError> {
    let dim = eta.len();
    let mut sym = QuadSymbol {
        dim,
        c2: vec![Complex64::default(); dim * dim],
        c1: vec![Complex64::default(); dim],
        c0: Complex64::default(),
    };
    'term: for term in &e.terms {
        let deg = term.p_degree();
        if deg > 2 {
            return Err(WignerError::DegreeTooHigh { degree: deg });
        }
        let poly = term.coeff.gamma_poly();
        if poly.degree() > 0 {
            return Err(WignerError::Unsupported(
                "coefficient depends on the quantization weight; fix gamma first".into(),
            ));
        }
        let mag = term.coeff.rational().to_f64().ok_or_else(|| {
            WignerError::Unsupported("coefficient overflows f64".into())
        })? * poly.coeff(0).to_f64().unwrap_or(0.0)
            * eps.powi(term.coeff.eps_power());
        let mut val0 = if term.coeff.i_power() % 2 == 1 {
            Complex64::new(0.0, mag)
        } else {
            Complex64::new(mag, 0.0)
        };

        // Collect labels; every slot must be a plain coordinate slot.
        let mut labels: Vec<weyl_core::Label> = Vec::new();
        for f in &term.factors {
            if !f.cov.is_empty() || !f.h.is_empty() || !f.v.is_empty() {
                return Err(WignerError::Unsupported(
                    "derivative slots have no numeric value on a grid".into(),
                ));
            }
            match &f.head {
                Head::Momentum | Head::Metric | Head::MetricInv | Head::Delta | Head::Dim => {}
                Head::Riemann | Head::Ricci | Head::RicciScalar | Head::BundleCurv(_) => {
                    // Flat chart: the whole term vanishes.
                    continue 'term;
                }
                other => {
                    return Err(WignerError::Unsupported(format!(
                        "head {other:?} has no numeric value on a flat grid"
                    )));
                }
            }
            for s in &f.slots {
                if !s.is_coord() {
                    return Err(WignerError::Unsupported(
                        "bundle indices have no numeric value here".into(),
                    ));
                }
                if !labels.contains(&s.label) {
                    labels.push(s.label.clone());
                }
            }
            if f.head == Head::Dim {
                val0 *= dim as f64;
            }
        }
        // Scalar symbols only: every label must appear exactly twice.
        let mut counts = BTreeMap::new();
        for f in &term.factors {
            for s in &f.slots {
                *counts.entry(s.label.clone()).or_insert(0usize) += 1;
            }
        }
        if counts.values().any(|&c| c != 2) {
            return Err(WignerError::Unsupported(
                "free indices: the evaluated symbol must be a scalar".into(),
            ));
        }

        // Brute-force contraction: enumerate every index assignment.
        let k = labels.len();
        let combos = dim.pow(k as u32);
        for combo in 0..combos {
            let mut assign = BTreeMap::new();
            let mut rem = combo;
            for l in &labels {
                assign.insert(l.clone(), rem % dim);
                rem /= dim;
            }
            let mut val = val0;
            let mut momenta: Vec<usize> = Vec::new();
            let mut nonzero = true;
            for f in &term.factors {
                let idx: Vec<usize> = f.slots.iter().map(|s| assign[&s.label]).collect();
                match &f.head {
                    Head::Momentum => momenta.push(idx[0]),
                    Head::Metric => {
                        if idx[0] == idx[1] {
                            val *= eta[idx[0]];
                        } else {
                            nonzero = false;
                            break;
                        }
                    }
                    Head::MetricInv => {
                        // Diagonal entries are +-1, self-inverse.
                        if idx[0] == idx[1] {
                            val *= 1.0 / eta[idx[0]];
                        } else {
                            nonzero = false;
                            break;
                        }
                    }
                    Head::Delta => {
                        if idx[0] != idx[1] {
                            nonzero = false;
                            break;
                        }
                    }
                    Head::Dim => {}
                    _ => unreachable!("filtered above"),
                }
            }
            if !nonzero {
                continue;
            }
            match momenta.len() {
                0 => sym.c0 += val,
                1 => sym.c1[momenta[0]] += val,
                2 => sym.c2[momenta[0] * dim + momenta[1]] += val,
                _ => unreachable!("degree checked above"),
            }
        }
    }
    Ok(sym)
}

#[derive(Clone, Debug)]
pub struct MoyalReport {
    /// l2 norm of the full phase-space residual over the l2 norm of W.
    pub residual_rel: f64,
    pub residual_abs: f64,
    /// l2 norm over z of the momentum-integrated residual, relative to the
    /// pointwise density norm.
    pub marginal_rel: f64,
    pub marginal_abs: f64,
}

/// Residual of the exact flat transport equation
///   d star W = d W - (i eps / 2) grad_p d . grad_z W
///            - (eps^2 / 8) hess_p d : hess_z W
/// for a base-independent symbol of momentum degree at most two; the series
/// terminates, so a transform of a solution state is annihilated up to grid
/// truncation. Base derivatives are second-order periodic central
/// differences.
pub fn moyal_residual_flat(
    sym: &QuadSymbol,
    w: &PhaseSpaceGrid,
) -> Result<MoyalReport, WignerError> {
    let d = w.dim();
    if sym.dim != d {
        return Err(WignerError::GridMismatch(
            "symbol dimension differs from the grid".into(),
        ));
    }
    if w.rank_psi != 1 || w.rank_phi != 1 {
        return Err(WignerError::Unsupported(
            "transport residual is implemented for scalar sections".into(),
        ));
    }
    let points = w.points();
    let shape = w.shape.clone();
    let eps = w.eps;

    let unflatten = |mut j: usize, out: &mut [usize]| {
        for ax in (0..d).rev() {
            out[ax] = j % shape[ax];
            j /= shape[ax];
        }
    };
    let flatten = |idx: &[usize]| -> usize {
        let mut j = 0;
        for ax in 0..d {
            j = j * shape[ax] + idx[ax];
        }
        j
    };
    let wz = |z: usize, p: usize| w.at(z, p, 0, 0);
    let shift2 = |zi: &[usize], ax1: usize, by1: i64, ax2: usize, by2: i64| -> usize {
        let mut idx = zi.to_vec();
        for (ax, by) in [(ax1, by1), (ax2, by2)] {
            let n = shape[ax] as i64;
            idx[ax] = ((idx[ax] as i64 + by).rem_euclid(n)) as usize;
        }
        flatten(&idx)
    };
    let shift = |zi: &[usize], ax: usize, by: i64| -> usize { shift2(zi, ax, by, ax, 0) };

    let mut res_sq = 0.0f64;
    let mut w_sq = 0.0f64;
    let mut marg_sq = 0.0f64;
    let mut dens_sq = 0.0f64;
    let dp_cell: f64 = (0..d).map(|ax| w.dp(ax)).product();

    let mut zi = vec![0usize; d];
    for z in 0..points {
        unflatten(z, &mut zi);
        let mut marg = Complex64::default();
        let mut dens = Complex64::default();
        for p in 0..points {
            let pv = w.momentum_of(p);
            let w0 = wz(z, p);
            let mut r = sym.eval(&pv) * w0;
            for mu in 0..d {
                let hx = w.dx(mu);
                let dzw = (wz(shift(&zi, mu, 1), p) - wz(shift(&zi, mu, -1), p))
                    / (2.0 * hx);
                r -= Complex64::new(0.0, 0.5 * eps) * sym.grad(&pv, mu) * dzw;
                for nu in 0..d {
                    let hy = w.dx(nu);
                    let d2 = if mu == nu {
                        (wz(shift(&zi, mu, 1), p) - w0 * 2.0 + wz(shift(&zi, mu, -1), p))
                            / (hx * hx)
                    } else {
                        (wz(shift2(&zi, mu, 1, nu, 1), p) - wz(shift2(&zi, mu, 1, nu, -1), p)
                            - wz(shift2(&zi, mu, -1, nu, 1), p)
                            + wz(shift2(&zi, mu, -1, nu, -1), p))
                            / (4.0 * hx * hy)
                    };
                    r -= sym.hess(mu, nu) * d2 * (eps * eps / 8.0);
                }
            }
            res_sq += r.norm_sqr();
            w_sq += w0.norm_sqr();
            marg += r * dp_cell;
            dens += w0 * dp_cell;
        }
        marg_sq += marg.norm_sqr();
        dens_sq += dens.norm_sqr();
    }

    let residual_abs = res_sq.sqrt();
    let marginal_abs = marg_sq.sqrt();
    Ok(MoyalReport {
        residual_rel: if w_sq > 0.0 { residual_abs / w_sq.sqrt() } else { residual_abs },
        residual_abs,
        marginal_rel: if dens_sq > 0.0 {
            marginal_abs / dens_sq.sqrt()
        } else {
            marginal_abs
        },
        marginal_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use weyl_core::parse_expr;

    #[test]
    fn plane_wave_marginal_is_unit_density() {
        let psi = GridSection::plane_wave(&[32], &[4.0], 0.05, &[2]).unwrap();
        let w = wigner_flat(&psi, &psi).unwrap();
        for z in 0..32 {
            let m = w.p_marginal(z)[0];
            assert!((m.re - 1.0).abs() < 1e-10 && m.im.abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_symbol_evaluates_with_signature() {
        // g^{ab} p_a p_b on a Lorentzian diagonal gives -p_0^2 + p_1^2.
        let e = parse_expr("g_inv[^a ^b] p[_a] p[_b]").unwrap();
        let q = eval_symbol_flat(&e, &[-1.0, 1.0], 0.1).unwrap();
        let v = q.eval(&[0.3, 0.4]);
        assert!((v.re - (-0.09 + 0.16)).abs() < 1e-14 && v.im.abs() < 1e-15);
    }

    #[test]
    fn degree_three_is_rejected() {
        let e = parse_expr("g_inv[^a ^b] g_inv[^c ^d] g_inv[^e ^f] p[_a] p[_c] p[_e] g[_b _d] p[_f]")
            .unwrap();
        match eval_symbol_flat(&e, &[1.0, 1.0], 0.1) {
            Err(WignerError::DegreeTooHigh { degree }) => assert_eq!(degree, 4),
            other => panic!("expected degree rejection, got {other:?}"),
        }
    }
}
