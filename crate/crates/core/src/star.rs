//! The star-product expansion through third order, the Moyal bracket, and
//! quantization-scheme shifts.
//!
//! Conventions used throughout: `a_{a1..an}` denotes the horizontal string
//! with the first-listed index applied innermost and is transcribed with the
//! string symmetrized (every such string is contracted against commuting
//! vertical slots, so only its symmetric part contributes); upper indices
//! are vertical derivatives. Bundle ordering of a term is `a` before middle
//! curvature before `b`, realized through explicit wiring labels. Order k
//! terms carry no eps factor here; they are installed at grade
//! `grade(a) + grade(b) + k`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::coeff::{rat, Coefficient, GammaPoly, Rational};
use crate::expr::{fresh_label, hderiv, permutations, vderiv, ExprError, TensorExpr};
use crate::factor::TensorFactor;
use crate::head::Head;
use crate::index::{BundleId, IndexSlot, Label, COTANGENT};
use crate::symbol::{GradedSymbol, Signature};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StarError {
    /// Domain/codomain wiring of the operands does not compose.
    WiringMismatch(String),
    /// The requested expansion order exceeds what the expansion provides.
    TruncationOverflow { requested: u32, max: u32 },
    Expr(ExprError),
}

impl From<ExprError> for StarError {
    fn from(e: ExprError) -> Self {
        StarError::Expr(e)
    }
}

impl core::fmt::Display for StarError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StarError::WiringMismatch(msg) => write!(f, "wiring mismatch: {msg}"),
            StarError::TruncationOverflow { requested, max } => {
                write!(f, "expansion order {requested} exceeds the available order {max}")
            }
            StarError::Expr(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GammaValue {
    Symbolic,
    Fixed(Rational),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StarOptions {
    /// Highest order to keep relative to the product of leading grades.
    pub max_order: u32,
    /// Drop every base and bundle curvature insertion.
    pub flat: bool,
    pub gamma: GammaValue,
}

impl Default for StarOptions {
    fn default() -> Self {
        StarOptions { max_order: 3, flat: false, gamma: GammaValue::Symbolic }
    }
}

#[derive(Clone, Debug)]
enum LegKind {
    Bundle(BundleId),
    Coord,
}

/// One contracted leg between a's domain and b's codomain. Direct rows join
/// both sides on `shared`; curvature rows split the leg across the inserted
/// middle curvature factor.
#[derive(Clone, Debug)]
struct MiddleLeg {
    kind: LegKind,
    a_label: Label,
    b_label: Label,
    shared: Label,
    a_split: Label,
    b_split: Label,
}

struct StarCtx<'x> {
    legs: &'x [MiddleLeg],
    /// Contraction labels alpha_1..alpha_4 shared between the parts.
    al: [Label; 4],
    beta: Label,
    flat: bool,
}

fn rename_frees(e: &TensorExpr, map: &BTreeMap<Label, Label>) -> TensorExpr {
    let mut out = e.clone();
    for t in &mut out.terms {
        t.map_labels(&mut |l| map.get(l).cloned().unwrap_or_else(|| l.clone()));
    }
    out
}

/// Applies a symmetrized horizontal string followed by vertical slots.
fn apply_derivs(e: &TensorExpr, h: &[&Label], v: &[&Label]) -> TensorExpr {
    let n = h.len();
    let mut out = if n <= 1 {
        let mut cur = e.clone();
        for l in h {
            cur = hderiv(&cur, l);
        }
        cur
    } else {
        let mut acc = TensorExpr::zero();
        for perm in permutations(n) {
            let mut cur = e.clone();
            for &i in &perm {
                cur = hderiv(&cur, h[i]);
            }
            acc = acc.add(&cur);
        }
        let mut fact = 1i64;
        for i in 2..=n as i64 {
            fact *= i;
        }
        acc.scale_rational(&rat(1, fact))
    };
    for l in v {
        out = vderiv(&out, l);
    }
    out
}

impl<'x> StarCtx<'x> {
    fn a_map(&self, split_leg: Option<usize>) -> BTreeMap<Label, Label> {
        let mut m = BTreeMap::new();
        for (i, leg) in self.legs.iter().enumerate() {
            let to = if Some(i) == split_leg { &leg.a_split } else { &leg.shared };
            m.insert(leg.a_label.clone(), to.clone());
        }
        m
    }

    fn b_map(&self, split_leg: Option<usize>) -> BTreeMap<Label, Label> {
        let mut m = BTreeMap::new();
        for (i, leg) in self.legs.iter().enumerate() {
            let to = if Some(i) == split_leg { &leg.b_split } else { &leg.shared };
            m.insert(leg.b_label.clone(), to.clone());
        }
        m
    }

    /// coeff * [D_a ea] * extra * [D_b eb] with the middle legs joined
    /// directly.
    fn row(
        &self,
        ea: &TensorExpr,
        eb: &TensorExpr,
        coeff: Coefficient,
        a_h: &[&Label],
        a_v: &[&Label],
        b_h: &[&Label],
        b_v: &[&Label],
        extra: &[TensorFactor],
    ) -> TensorExpr {
        let ad = rename_frees(&apply_derivs(ea, a_h, a_v), &self.a_map(None));
        let bd = rename_frees(&apply_derivs(eb, b_h, b_v), &self.b_map(None));
        let mut prod = ad;
        if !extra.is_empty() {
            prod = prod.mul(&TensorExpr::from_factors(extra.to_vec()));
        }
        prod.mul(&bd).scale(&coeff)
    }

    /// coeff * [D_a ea] F_{alpha beta(;cov)} [D_b eb] with the middle
    /// curvature acting on each leg in turn; the untouched legs stay joined
    /// directly. Trivial wiring has no legs and contributes nothing.
    fn f_row(
        &self,
        ea: &TensorExpr,
        eb: &TensorExpr,
        coeff: Coefficient,
        a_h: &[&Label],
        a_v: &[&Label],
        b_h: &[&Label],
        b_v: &[&Label],
        alpha: &Label,
        beta: &Label,
        cov: Option<&Label>,
    ) -> TensorExpr {
        let ad0 = apply_derivs(ea, a_h, a_v);
        let bd0 = apply_derivs(eb, b_h, b_v);
        let mut out = TensorExpr::zero();
        for (i, leg) in self.legs.iter().enumerate() {
            let ad = rename_frees(&ad0, &self.a_map(Some(i)));
            let bd = rename_frees(&bd0, &self.b_map(Some(i)));
            let mut f = match &leg.kind {
                LegKind::Bundle(id) => TensorFactor::new(
                    Head::BundleCurv(id.clone()),
                    vec![
                        IndexSlot::bundle_up(id.clone(), leg.a_split.clone()),
                        IndexSlot::bundle_down(id.clone(), leg.b_split.clone()),
                        IndexSlot::down(alpha.clone()),
                        IndexSlot::down(beta.clone()),
                    ],
                ),
                LegKind::Coord => TensorFactor::new(
                    Head::BundleCurv(COTANGENT.to_string()),
                    vec![
                        IndexSlot::down(leg.a_split.clone()),
                        IndexSlot::up(leg.b_split.clone()),
                        IndexSlot::down(alpha.clone()),
                        IndexSlot::down(beta.clone()),
                    ],
                ),
            };
            if let Some(c) = cov {
                f.cov.push(IndexSlot::down(c.clone()));
            }
            out = out.add(&ad.mul(&TensorExpr::from_factor(f)).mul(&bd));
        }
        out.scale(&coeff)
    }

    /// Order-k term of the expansion, eps-free.
    fn order(&self, ea: &TensorExpr, eb: &TensorExpr, k: u32) -> TensorExpr {
        let c = |n: i64, d: i64, ip: u32| Coefficient::from_parts(rat(n, d), ip, 0, GammaPoly::one());
        let cpoly =
            |c0: i64, c1: i64, den: i64, ip: u32| {
                Coefficient::from_parts(Rational::from_integer(1.into()), ip, 0, GammaPoly::linear(c0, c1, den))
            };
        let [a1, a2, a3, a4] = [&self.al[0], &self.al[1], &self.al[2], &self.al[3]];
        let beta = &self.beta;
        let riemann_b = || {
            TensorFactor::riemann(vec![
                IndexSlot::up(beta.clone()),
                IndexSlot::down(a1.clone()),
                IndexSlot::down(a2.clone()),
                IndexSlot::down(a3.clone()),
            ])
        };

        match k {
            0 => self.row(ea, eb, Coefficient::one(), &[], &[], &[], &[], &[]),
            1 => {
                let t1 = self.row(ea, eb, c(1, 2, 1), &[a1], &[], &[], &[a1], &[]);
                let t2 = self.row(ea, eb, c(-1, 2, 1), &[], &[a1], &[a1], &[], &[]);
                t1.add(&t2)
            }
            2 => {
                let mut out = TensorExpr::zero();
                out = out.add(&self.row(ea, eb, c(-1, 8, 0), &[a1, a2], &[], &[], &[a1, a2], &[]));
                out = out.add(&self.row(ea, eb, c(1, 4, 0), &[a1], &[a2], &[a2], &[a1], &[]));
                out = out.add(&self.row(ea, eb, c(-1, 8, 0), &[], &[a1, a2], &[a1, a2], &[], &[]));
                if self.flat {
                    return out;
                }
                out = out.add(&self.row(
                    ea,
                    eb,
                    cpoly(3, -4, 12, 0),
                    &[],
                    &[a1],
                    &[],
                    &[a2],
                    &[TensorFactor::ricci(a1.clone(), a2.clone())],
                ));
                let rp = [riemann_b(), TensorFactor::momentum(beta.clone())];
                out = out.add(&self.row(ea, eb, c(-1, 24, 0), &[], &[a2], &[], &[a1, a3], &rp));
                out = out.add(&self.row(ea, eb, c(-1, 24, 0), &[], &[a1, a3], &[], &[a2], &rp));
                out = out.add(&self.f_row(ea, eb, c(-1, 4, 0), &[], &[a1], &[], &[a2], a1, a2, None));
                out
            }
            3 => {
                let mut out = TensorExpr::zero();
                out = out
                    .add(&self.row(ea, eb, c(-1, 48, 1), &[a1, a2, a3], &[], &[], &[a1, a2, a3], &[]));
                out =
                    out.add(&self.row(ea, eb, c(1, 16, 1), &[a1, a2], &[a3], &[a3], &[a1, a2], &[]));
                out =
                    out.add(&self.row(ea, eb, c(-1, 16, 1), &[a1], &[a2, a3], &[a2, a3], &[a1], &[]));
                out = out
                    .add(&self.row(ea, eb, c(1, 48, 1), &[], &[a1, a2, a3], &[a1, a2, a3], &[], &[]));
                if self.flat {
                    return out;
                }
                let ric = [TensorFactor::ricci(a1.clone(), a2.clone())];
                out = out
                    .add(&self.row(ea, eb, cpoly(3, -4, 24, 1), &[a3], &[a2], &[], &[a1, a3], &ric));
                out = out
                    .add(&self.row(ea, eb, cpoly(-3, 4, 24, 1), &[], &[a2, a3], &[a3], &[a1], &ric));
                let r = [riemann_b()];
                out = out.add(&self.row(ea, eb, c(-1, 16, 1), &[beta], &[a1, a3], &[], &[a2], &r));
                out = out.add(&self.row(ea, eb, c(1, 16, 1), &[], &[a2], &[beta], &[a1, a3], &r));
                let rp = [riemann_b(), TensorFactor::momentum(beta.clone())];
                out = out.add(&self.row(ea, eb, c(-1, 48, 1), &[a4], &[a1, a3], &[], &[a2, a4], &rp));
                out = out.add(&self.row(ea, eb, c(-1, 48, 1), &[a4], &[a2], &[], &[a1, a3, a4], &rp));
                out = out.add(&self.row(ea, eb, c(1, 48, 1), &[], &[a1, a3, a4], &[a4], &[a2], &rp));
                out = out.add(&self.row(ea, eb, c(1, 48, 1), &[], &[a2, a4], &[a4], &[a1, a3], &rp));
                let mut ric_cov = TensorFactor::ricci(a1.clone(), a2.clone());
                ric_cov.cov.push(IndexSlot::down(a3.clone()));
                let rc = [ric_cov];
                out = out.add(&self.row(ea, eb, cpoly(3, -4, 48, 1), &[], &[a3], &[], &[a1, a2], &rc));
                out = out.add(&self.row(ea, eb, cpoly(-3, 4, 48, 1), &[], &[a1, a2], &[], &[a3], &rc));
                let mut riem_cov = riemann_b();
                riem_cov.cov.push(IndexSlot::down(a4.clone()));
                let rcp = [riem_cov, TensorFactor::momentum(beta.clone())];
                out = out.add(&self.row(ea, eb, c(1, 48, 1), &[], &[a1, a3, a4], &[], &[a2], &rcp));
                out = out.add(&self.row(ea, eb, c(-1, 48, 1), &[], &[a2], &[], &[a1, a3, a4], &rcp));
                out = out
                    .add(&self.f_row(ea, eb, c(-1, 8, 1), &[a3], &[a1], &[], &[a2, a3], a1, a2, None));
                out = out
                    .add(&self.f_row(ea, eb, c(-1, 8, 1), &[], &[a2, a3], &[a3], &[a1], a1, a2, None));
                out = out
                    .add(&self.f_row(ea, eb, c(-1, 16, 1), &[], &[a1], &[], &[a2, a3], a1, a2, Some(a3)));
                out = out
                    .add(&self.f_row(ea, eb, c(-1, 16, 1), &[], &[a2, a3], &[], &[a1], a1, a2, Some(a3)));
                out
            }
            _ => TensorExpr::zero(),
        }
    }
}

fn wiring_labels(sig: &Signature) -> BTreeSet<Label> {
    sig.expected_free().map(|m| m.keys().cloned().collect()).unwrap_or_default()
}

fn build_legs(
    a_sig: &Signature,
    b_sig: &Signature,
    avoid: &BTreeSet<Label>,
    counter: &mut usize,
) -> Result<Vec<MiddleLeg>, StarError> {
    let adom = &a_sig.dom;
    let bcod = &b_sig.cod;
    let mut legs = Vec::new();
    match (&adom.bundle, &bcod.bundle) {
        (None, None) => {}
        (Some((ia, la)), Some((ib, lb))) if ia == ib => legs.push(MiddleLeg {
            kind: LegKind::Bundle(ia.clone()),
            a_label: la.clone(),
            b_label: lb.clone(),
            shared: fresh_label(avoid, counter),
            a_split: fresh_label(avoid, counter),
            b_split: fresh_label(avoid, counter),
        }),
        _ => {
            return Err(StarError::WiringMismatch(
                "bundle legs of the operands do not compose".to_string(),
            ))
        }
    }
    if adom.coords.len() != bcod.coords.len() {
        return Err(StarError::WiringMismatch(
            "coordinate legs of the operands do not compose".to_string(),
        ));
    }
    for (la, lb) in adom.coords.iter().zip(bcod.coords.iter()) {
        legs.push(MiddleLeg {
            kind: LegKind::Coord,
            a_label: la.clone(),
            b_label: lb.clone(),
            shared: fresh_label(avoid, counter),
            a_split: fresh_label(avoid, counter),
            b_split: fresh_label(avoid, counter),
        });
    }
    Ok(legs)
}

fn composition_setup(
    a: &GradedSymbol,
    b: &GradedSymbol,
) -> Result<(Signature, Vec<MiddleLeg>, [Label; 4], Label), StarError> {
    let out_sig = Signature { dom: b.sig().dom.clone(), cod: a.sig().cod.clone() };
    out_sig
        .expected_free()
        .map_err(|_| StarError::WiringMismatch("result wiring labels collide".to_string()))?;

    let mut avoid: BTreeSet<Label> = a.to_expr().all_labels();
    avoid.extend(b.to_expr().all_labels());
    avoid.extend(wiring_labels(a.sig()));
    avoid.extend(wiring_labels(b.sig()));
    let mut counter = 0usize;
    let legs = build_legs(a.sig(), b.sig(), &avoid, &mut counter)?;
    let al = [
        fresh_label(&avoid, &mut counter),
        fresh_label(&avoid, &mut counter),
        fresh_label(&avoid, &mut counter),
        fresh_label(&avoid, &mut counter),
    ];
    let beta = fresh_label(&avoid, &mut counter);
    Ok((out_sig, legs, al, beta))
}

/// The order-k expansion coefficient, summed over the operand grades with
/// each contribution keeping its operands' eps powers. The full composition
/// is the sum over k of eps^k star_order(a, b, k). `opts.max_order` is
/// ignored here; `flat` and `gamma` apply.
pub fn star_order(
    a: &GradedSymbol,
    b: &GradedSymbol,
    k: u32,
    opts: &StarOptions,
) -> Result<TensorExpr, StarError> {
    if k > 3 {
        return Err(StarError::TruncationOverflow { requested: k, max: 3 });
    }
    let (_, legs, al, beta) = composition_setup(a, b)?;
    let ctx = StarCtx { legs: &legs, al, beta, flat: opts.flat };
    let mut acc = TensorExpr::zero();
    for ga in a.grades() {
        for gb in b.grades() {
            let t = ctx.order(&a.component(ga), &b.component(gb), k);
            if !t.is_zero() {
                acc = acc.add(&t.map_coeff(|c| c.times_eps(ga + gb)));
            }
        }
    }
    if let GammaValue::Fixed(q) = &opts.gamma {
        acc = acc.eval_gamma(q);
    }
    Ok(acc)
}

pub fn star(a: &GradedSymbol, b: &GradedSymbol, opts: &StarOptions) -> Result<GradedSymbol, StarError> {
    if opts.max_order > 3 {
        return Err(StarError::TruncationOverflow { requested: opts.max_order, max: 3 });
    }
    let (out_sig, legs, al, beta) = composition_setup(a, b)?;
    let ctx = StarCtx { legs: &legs, al, beta, flat: opts.flat };

    let (Some(la), Some(lb)) = (a.leading_grade(), b.leading_grade()) else {
        return Ok(GradedSymbol::new(out_sig));
    };
    let cutoff = la + lb + opts.max_order as i32;

    let mut acc: BTreeMap<i32, TensorExpr> = BTreeMap::new();
    for ga in a.grades() {
        for gb in b.grades() {
            let ea = a.component(ga);
            let eb = b.component(gb);
            for k in 0..=3u32 {
                let g = ga + gb + k as i32;
                if g > cutoff {
                    break;
                }
                let t = ctx.order(&ea, &eb, k);
                if !t.is_zero() {
                    let slot = acc.entry(g).or_default();
                    *slot = slot.add(&t);
                }
            }
        }
    }

    let mut out = GradedSymbol::new(out_sig);
    for (g, e) in acc {
        out.insert_component(g, &e)?;
    }
    if let GammaValue::Fixed(q) = &opts.gamma {
        out = out.eval_gamma(q);
    }
    Ok(out)
}

/// star(a, b) - star(b, a); both compositions must be wiring-compatible.
pub fn moyal_bracket(
    a: &GradedSymbol,
    b: &GradedSymbol,
    opts: &StarOptions,
) -> Result<GradedSymbol, StarError> {
    let ab = star(a, b, opts)?;
    let ba = star(b, a, opts)?;
    ab.sub(&ba).map_err(StarError::Expr)
}

/// Re-expands a symbol of the sigma-quantization (van Vleck power
/// gamma_source) in the tau-quantization (power gamma_target), keeping
/// grades up to the leading grade plus `max_order`:
///
///   a_tau = a_sigma - i eps (sigma - tau) v.h a_sigma
///         + eps^2 [ -(sigma - tau)^2/2 (v.h)^2
///                   - (gamma_target - gamma_source)/6 R_{mu nu} v^mu v^nu ] a_sigma
pub fn tau_shift(
    a: &GradedSymbol,
    sigma: &Rational,
    tau: &Rational,
    gamma_target: &Rational,
    gamma_source: &Rational,
    max_order: u32,
) -> Result<GradedSymbol, StarError> {
    if max_order > 2 {
        return Err(StarError::TruncationOverflow { requested: max_order, max: 2 });
    }
    let Some(la) = a.leading_grade() else { return Ok(a.clone()) };
    let cutoff = la + max_order as i32;
    let s = sigma - tau;
    let gdiff = gamma_target - gamma_source;

    let mut avoid: BTreeSet<Label> = a.to_expr().all_labels();
    avoid.extend(wiring_labels(a.sig()));
    let mut counter = 0usize;
    let m = fresh_label(&avoid, &mut counter);
    let n = fresh_label(&avoid, &mut counter);

    let mut out = GradedSymbol::new(a.sig().clone());
    for g in a.grades() {
        let comp = a.component(g);
        out.insert_component(g, &comp)?;
        if g + 1 <= cutoff {
            let vh = vderiv(&hderiv(&comp, &m), &m);
            let c1 = Coefficient::from_parts(-s.clone(), 1, 0, GammaPoly::one());
            out.insert_component(g + 1, &vh.scale(&c1))?;
        }
        if g + 2 <= cutoff {
            let hh = hderiv(&hderiv(&comp, &m), &n);
            let vvhh = vderiv(&vderiv(&hh, &m), &n);
            let c2 = Coefficient::from_parts(-(&s * &s) / rat(2, 1), 0, 0, GammaPoly::one());
            out.insert_component(g + 2, &vvhh.scale(&c2))?;

            let vv = vderiv(&vderiv(&comp, &m), &n);
            let ric = TensorExpr::from_factor(TensorFactor::ricci(m.clone(), n.clone()));
            let c3 = Coefficient::from_parts(-gdiff.clone() / rat(6, 1), 0, 0, GammaPoly::one());
            out.insert_component(g + 2, &ric.mul(&vv).scale(&c3))?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use crate::head::{GenericHead, SlotSig};
    use crate::index::Variance;
    use crate::symbol::{normal_order_h, Wiring};

    fn phase_scalar(name: &str) -> TensorExpr {
        TensorExpr::from_factor(TensorFactor::new(
            Head::Generic(GenericHead::phase(name, vec![])),
            vec![],
        ))
    }

    fn scalar_symbol(name: &str) -> GradedSymbol {
        GradedSymbol::from_expr(Signature::scalar(), &phase_scalar(name)).unwrap()
    }

    /// Flat reference expansion computed without symmetrization: the order-k
    /// term is (i/2)^k/k! sum_j C(k,j) (-1)^(k-j) [v^(k-j) h^j a][h^(k-j) v^j b]
    /// with a's h labels contracted against b's v labels and vice versa.
    fn flat_oracle_order(ea: &TensorExpr, eb: &TensorExpr, k: u32) -> TensorExpr {
        let labels: Vec<Label> = (0..k).map(|i| format!("fo{i}")).collect();
        let mut out = TensorExpr::zero();
        let mut binom = 1i64;
        for j in 0..=k {
            let (ha, vb) = labels.split_at(j as usize);
            let mut ta = ea.clone();
            for l in ha {
                ta = hderiv(&ta, l);
            }
            for l in vb {
                ta = vderiv(&ta, l);
            }
            let mut tb = eb.clone();
            for l in ha {
                tb = vderiv(&tb, l);
            }
            for l in vb {
                tb = hderiv(&tb, l);
            }
            let sign = if (k - j) % 2 == 1 { -1 } else { 1 };
            out = out.add(&ta.mul(&tb).scale_rational(&rat(sign * binom, 1)));
            binom = binom * (k - j) as i64 / (j + 1) as i64;
        }
        let mut fact = 1i64;
        for i in 2..=k as i64 {
            fact *= i;
        }
        let pow2 = 1i64 << k;
        out.scale(&Coefficient::from_parts(rat(1, pow2 * fact), k, 0, GammaPoly::one()))
    }

    #[test]
    fn flat_star_matches_unsymmetrized_oracle() {
        let a = scalar_symbol("u");
        let b = scalar_symbol("w");
        let opts = StarOptions { flat: true, ..Default::default() };
        let got = star(&a, &b, &opts).unwrap();
        for k in 0..=3u32 {
            let want = normal_order_h(&flat_oracle_order(&a.component(0), &b.component(0), k), true)
                .unwrap();
            let have = normal_order_h(&got.component(k as i32), true).unwrap();
            assert_eq!(have, want, "order {k} disagrees with the oracle");
        }
    }

    #[test]
    fn position_symbol_star_momentum_truncates_at_first_order() {
        // f(x) star (p.t) with t covariantly constant: only the pointwise
        // product and the single transport term survive.
        let f = GradedSymbol::from_expr(
            Signature::scalar(),
            &TensorExpr::from_factor(TensorFactor::new(
                Head::Generic(GenericHead::position("f", vec![])),
                vec![],
            )),
        )
        .unwrap();
        let t_head = Head::Generic(
            GenericHead::position("t", vec![SlotSig::coord(Variance::Up)]).constant(),
        );
        let pt = TensorExpr::from_factors(vec![
            TensorFactor::new(t_head.clone(), vec![IndexSlot::up("q")]),
            TensorFactor::momentum("q"),
        ]);
        let b = GradedSymbol::from_expr(Signature::scalar(), &pt).unwrap();

        let got = star(&f, &b, &StarOptions::default()).unwrap();
        assert_eq!(got.grades(), vec![0, 1]);
        assert_eq!(got.component(0), f.component(0).mul(&pt).canonicalize().unwrap());

        let mut fc = TensorFactor::new(Head::Generic(GenericHead::position("f", vec![])), vec![]);
        fc.cov.push(IndexSlot::down("q"));
        let want1 = TensorExpr::from_factors(vec![fc, TensorFactor::new(t_head, vec![IndexSlot::up("q")])])
            .scale(&Coefficient::from_parts(rat(1, 2), 1, 0, GammaPoly::one()));
        assert_eq!(got.component(1), want1.canonicalize().unwrap());
    }

    #[test]
    fn codifferential_star_differential_gives_wave_symbol() {
        // delta after d on scalars: the middle is one cotangent leg. The
        // product must collapse to -eps^-2 p.p + (gamma/3) R exactly, with
        // the third order vanishing identically.
        let d_sym = GradedSymbol::from_expr(
            Signature { dom: Wiring::trivial(), cod: Wiring::coords(vec!["al".to_string()]) },
            &TensorExpr::from_factor(TensorFactor::momentum("al"))
                .scale(&Coefficient::from_parts(rat(1, 1), 1, -1, GammaPoly::one())),
        )
        .unwrap();
        let delta_sym = GradedSymbol::from_expr(
            Signature { dom: Wiring::coords(vec!["al".to_string()]), cod: Wiring::trivial() },
            &TensorExpr::from_factors(vec![
                TensorFactor::metric_inv("al", "s"),
                TensorFactor::momentum("s"),
            ])
            .scale(&Coefficient::from_parts(rat(1, 1), 1, -1, GammaPoly::one())),
        )
        .unwrap();

        let got = star(&delta_sym, &d_sym, &StarOptions::default()).unwrap();
        assert_eq!(got.grades(), vec![-2, 0], "only the principal part and the curvature term");

        let pp = TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("m", "n"),
            TensorFactor::momentum("m"),
            TensorFactor::momentum("n"),
        ]);
        assert_eq!(got.component(-2), pp.neg().canonicalize().unwrap());

        let curv = crate::expr::substitute_cotangent_curvature(&got.component(0)).unwrap();
        let want = TensorExpr::from_factor(TensorFactor::ricci_scalar())
            .scale(&Coefficient::from_parts(rat(1, 3), 0, 0, GammaPoly::gamma()));
        assert_eq!(curv.canonicalize().unwrap(), want.canonicalize().unwrap());
    }

    #[test]
    fn star_rejects_incompatible_wiring_and_deep_truncation() {
        let a = scalar_symbol("u");
        let e = GradedSymbol::from_expr(
            Signature::endo("E", "A", "B"),
            &TensorExpr::from_factor(TensorFactor::new(Head::BundleDelta("E".to_string()), vec![
                IndexSlot::bundle_up("E", "A"),
                IndexSlot::bundle_down("E", "B"),
            ])),
        )
        .unwrap();
        assert!(matches!(star(&a, &e, &StarOptions::default()), Err(StarError::WiringMismatch(_))));
        let opts = StarOptions { max_order: 4, ..Default::default() };
        assert!(matches!(star(&a, &a, &opts), Err(StarError::TruncationOverflow { .. })));
    }

    #[test]
    fn tau_round_trip_is_exact_through_second_order() {
        let a = scalar_symbol("u");
        let sigma = rat(1, 2);
        let tau = rat(1, 1);
        let g_tau = rat(3, 4);
        let g_sigma = rat(1, 2);
        let shifted = tau_shift(&a, &sigma, &tau, &g_tau, &g_sigma, 2).unwrap();
        assert_eq!(shifted.grades(), vec![0, 1, 2]);
        let back = tau_shift(&shifted, &tau, &sigma, &g_sigma, &g_tau, 2).unwrap();
        assert_eq!(back, a, "scheme change must invert exactly within the kept orders");
    }

    #[test]
    fn tau_shift_first_order_is_contracted_mixed_derivative() {
        let a = scalar_symbol("u");
        let sigma = rat(0, 1);
        let tau = rat(1, 2);
        let shifted = tau_shift(&a, &sigma, &tau, &rat(1, 2), &rat(1, 2), 1).unwrap();
        let want = vderiv(&hderiv(&a.component(0), &"m".to_string()), &"m".to_string())
            .scale(&Coefficient::from_parts(rat(1, 2), 1, 0, GammaPoly::one()));
        assert_eq!(shifted.component(1), want.canonicalize().unwrap());
        assert!(shifted.grades() == vec![0, 1]);
    }
}
