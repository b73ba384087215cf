//! Graded symbols and the two operations that make symbol comparison
//! meaningful on a curved base: normal ordering of horizontal derivative
//! strings and the formal adjoint.
//!
//! A symbol is stored per semiclassical grade, with the grade equal to the
//! net eps power of a term and the stored component stripped of eps.
//! Wiring labels are the component expressions' free slots: the codomain
//! bundle leg is upper, the domain leg lower, codomain coordinate legs are
//! lower, domain coordinate legs upper, so that composing a after b
//! contracts a's domain legs against b's codomain legs directly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::coeff::{Coefficient, Rational};
use crate::expr::{fresh_label, hderiv, vderiv, ExprError, TensorExpr, Term};
use crate::factor::{SlotPos, TensorFactor};
use crate::head::Head;
use crate::index::{BundleId, IndexKind, IndexSlot, Label, Variance, COTANGENT};

fn find_inversion(list: &[IndexSlot]) -> Option<usize> {
    (0..list.len().saturating_sub(1)).find(|&j| list[j].label > list[j + 1].label)
}

/// Where a derivative slot's label connects inside its term. Canonical
/// dummy names follow scan order, so comparing labels cannot see when two
/// h strings differ only by which factors they contract into; the partner
/// position can.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
enum SlotKey {
    Free(Label),
    Paired(usize, u8, usize),
}

fn h_slot_key(term: &Term, fi: usize, hj: usize) -> SlotKey {
    let l = &term.factors[fi].h[hj].label;
    for (gi, g) in term.factors.iter().enumerate() {
        let regions: [(u8, &[IndexSlot]); 4] =
            [(0, &g.slots), (1, &g.cov), (2, &g.h), (3, &g.v)];
        for (region, list) in regions {
            for (si, s) in list.iter().enumerate() {
                if s.label == *l && !(gi == fi && region == 2 && si == hj) {
                    return SlotKey::Paired(gi, region, si);
                }
            }
        }
    }
    SlotKey::Free(l.clone())
}

fn find_h_inversion(term: &Term, fi: usize) -> Option<usize> {
    let len = term.factors[fi].h.len();
    (0..len.saturating_sub(1))
        .find(|&j| h_slot_key(term, fi, j) > h_slot_key(term, fi, j + 1))
}

/// Correction for swapping the adjacent h slots (j, j+1) on factor `fi`:
/// with the list reading [.., first, second, ..] the original operator is
/// suffix . h_second . h_first . prefix, so the swapped term must be
/// accompanied by suffix . [h_second, h_first] . prefix applied to the bare
/// factor, all multiplied back into the rest of the term.
fn commutator_correction(term: &Term, fi: usize, j: usize) -> TensorExpr {
    let f = &term.factors[fi];
    let first = f.h[j].clone();
    let second = f.h[j + 1].clone();
    let suffix: Vec<IndexSlot> = f.h[j + 2..].to_vec();
    let mut x0 = f.clone();
    x0.h.truncate(j);
    let v_list = core::mem::take(&mut x0.v);

    let avoid: BTreeSet<Label> = term.labels();
    let mut counter = 0usize;
    let mut parts = TensorExpr::zero();

    // action through the momentum argument: R^x_{y mu nu} p_x v^y
    {
        let x = fresh_label(&avoid, &mut counter);
        let y = fresh_label(&avoid, &mut counter);
        let mut xf = x0.clone();
        xf.v.push(IndexSlot::up(y.clone()));
        let r = TensorFactor::riemann(vec![
            IndexSlot::up(x.clone()),
            IndexSlot::down(y),
            second.clone(),
            first.clone(),
        ]);
        parts = parts.add(&TensorExpr::from_factors(vec![r, TensorFactor::momentum(x), xf]));
    }

    // action on each coordinate index the bare factor carries: its base
    // coordinate slots and the prefix h slots
    let mut coord_positions: Vec<SlotPos> = Vec::new();
    for (i, s) in x0.slots.iter().enumerate() {
        if s.is_coord() {
            coord_positions.push(SlotPos::Base(i));
        }
    }
    for i in 0..x0.h.len() {
        coord_positions.push(SlotPos::H(i));
    }
    for pos in coord_positions {
        let t = fresh_label(&avoid, &mut counter);
        let s = x0.slot_at(pos).clone();
        let mut xf = x0.clone();
        xf.slot_at_mut(pos).label = t.clone();
        let r = match s.variance {
            Variance::Down => TensorFactor::riemann(vec![
                IndexSlot::down(s.label.clone()),
                IndexSlot::up(t),
                second.clone(),
                first.clone(),
            ]),
            Variance::Up => TensorFactor::riemann(vec![
                IndexSlot::up(s.label.clone()),
                IndexSlot::down(t),
                second.clone(),
                first.clone(),
            ]),
        };
        parts = parts.add(&TensorExpr::from_factors(vec![r, xf]));
    }

    // bundle legs: F_cod X - X F_dom
    for i in 0..x0.slots.len() {
        let s = x0.slots[i].clone();
        let IndexKind::Bundle(id) = &s.kind else { continue };
        let t = fresh_label(&avoid, &mut counter);
        let mut xf = x0.clone();
        xf.slots[i].label = t.clone();
        let (wiring, negate) = match s.variance {
            Variance::Up => (
                vec![
                    IndexSlot::bundle_up(id.clone(), s.label.clone()),
                    IndexSlot::bundle_down(id.clone(), t),
                ],
                false,
            ),
            Variance::Down => (
                vec![
                    IndexSlot::bundle_up(id.clone(), t),
                    IndexSlot::bundle_down(id.clone(), s.label.clone()),
                ],
                true,
            ),
        };
        let mut slots = wiring;
        slots.push(second.clone());
        slots.push(first.clone());
        let fcurv = TensorFactor::new(Head::BundleCurv(id.clone()), slots);
        let e = TensorExpr::from_factors(vec![fcurv, xf]);
        parts = parts.add(&if negate { e.neg() } else { e });
    }

    // outer decorations distribute by the product rule
    let mut out = parts;
    for s in &suffix {
        out = hderiv(&out, &s.label);
    }
    for sv in &v_list {
        out = vderiv(&out, &sv.label);
    }

    let mut rest = term.clone();
    rest.factors.remove(fi);
    TensorExpr::from_term(rest).mul(&out)
}

/// Rewrites every h list into ascending contraction-partner order under
/// canonical naming. On a curved base each adjacent swap inserts the
/// curvature commutator terms; with `flat` set the h slots commute exactly
/// and covariant slots on position tensors are sorted as well.
pub fn normal_order_h(e: &TensorExpr, flat: bool) -> Result<TensorExpr, ExprError> {
    let mut expr = e.canonicalize()?;
    let mut steps = 0usize;
    'outer: loop {
        steps += 1;
        if steps > 20_000 {
            return Err(ExprError::MalformedIndex(
                "horizontal normal ordering exceeded its iteration bound".to_string(),
            ));
        }
        for (ti, term) in expr.terms.iter().enumerate() {
            for (fi, f) in term.factors.iter().enumerate() {
                if flat {
                    if let Some(j) = find_inversion(&f.cov) {
                        let mut terms = expr.terms.clone();
                        terms[ti].factors[fi].cov.swap(j, j + 1);
                        expr = TensorExpr { terms }.canonicalize()?;
                        continue 'outer;
                    }
                }
                if let Some(j) = find_h_inversion(term, fi) {
                    let mut swapped = term.clone();
                    swapped.factors[fi].h.swap(j, j + 1);
                    let mut terms = expr.terms.clone();
                    terms.remove(ti);
                    let mut next = TensorExpr { terms }.add(&TensorExpr::from_term(swapped));
                    if !flat {
                        next = next.add(&commutator_correction(term, fi, j));
                    }
                    expr = next.canonicalize()?;
                    continue 'outer;
                }
            }
        }
        return Ok(expr);
    }
}

/// Formal adjoint of a symbol-valued expression: coefficients conjugate,
/// bundle legs transpose. Bundle curvature is skew-adjoint under the fibre
/// metric; gamma and generic heads record the transpose as a dagger mark.
/// Horizontal and vertical decorations commute with the adjoint and stay.
pub fn adjoint_expr(e: &TensorExpr) -> Result<TensorExpr, ExprError> {
    let mut out = Vec::new();
    for term in &e.terms {
        let mut t = term.clone();
        t.coeff = t.coeff.conj();
        let mut negations = 0u32;
        for f in &mut t.factors {
            match &mut f.head {
                Head::BundleCurv(id) => {
                    if id == COTANGENT {
                        return Err(ExprError::SignatureMismatch(
                            "adjoint of cotangent-realized bundle curvature is not supported"
                                .to_string(),
                        ));
                    }
                    f.slots.swap(0, 1);
                    f.slots[0].variance = Variance::Up;
                    f.slots[1].variance = Variance::Down;
                    negations += 1;
                }
                Head::BundleDelta(_) => {
                    f.slots.swap(0, 1);
                    f.slots[0].variance = Variance::Up;
                    f.slots[1].variance = Variance::Down;
                }
                Head::Gamma { dagger, .. } => {
                    f.slots.swap(0, 1);
                    f.slots[0].variance = Variance::Up;
                    f.slots[1].variance = Variance::Down;
                    *dagger = !*dagger;
                }
                Head::Generic(g) => {
                    for (sl, sg) in f.slots.iter_mut().zip(g.sig.iter_mut()) {
                        if matches!(sl.kind, IndexKind::Bundle(_)) {
                            sl.variance = sl.variance.flipped();
                            sg.variance = sg.variance.flipped();
                        }
                    }
                    g.dagger = !g.dagger;
                }
                _ => {}
            }
        }
        if negations % 2 == 1 {
            t.coeff = t.coeff.neg();
        }
        out.push(t);
    }
    Ok(TensorExpr { terms: out })
}

/// One side of a symbol's operator wiring: at most one bundle leg plus any
/// number of coordinate legs, each owning a reserved free label.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Wiring {
    pub bundle: Option<(BundleId, Label)>,
    pub coords: Vec<Label>,
}

impl Wiring {
    pub fn trivial() -> Self {
        Wiring::default()
    }

    pub fn bundle(id: impl Into<BundleId>, label: impl Into<Label>) -> Self {
        Wiring { bundle: Some((id.into(), label.into())), coords: Vec::new() }
    }

    pub fn coords(labels: Vec<Label>) -> Self {
        Wiring { bundle: None, coords: labels }
    }

    pub fn is_trivial(&self) -> bool {
        self.bundle.is_none() && self.coords.is_empty()
    }

    /// Coordinate labels followed by the bundle label, when present.
    pub fn labels(&self) -> Vec<Label> {
        let mut out: Vec<Label> = self.coords.clone();
        if let Some((_, l)) = &self.bundle {
            out.push(l.clone());
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub dom: Wiring,
    pub cod: Wiring,
}

impl Signature {
    pub fn scalar() -> Self {
        Signature::default()
    }

    pub fn endo(
        id: impl Into<BundleId>,
        cod_label: impl Into<Label>,
        dom_label: impl Into<Label>,
    ) -> Self {
        let id = id.into();
        Signature { dom: Wiring::bundle(id.clone(), dom_label), cod: Wiring::bundle(id, cod_label) }
    }

    pub fn transpose(&self) -> Signature {
        Signature { dom: self.cod.clone(), cod: self.dom.clone() }
    }

    pub fn has_coords(&self) -> bool {
        !self.dom.coords.is_empty() || !self.cod.coords.is_empty()
    }

    /// Free slots every nonzero component must expose, keyed by label.
    pub fn expected_free(&self) -> Result<BTreeMap<Label, (IndexKind, Variance)>, ExprError> {
        let mut out = BTreeMap::new();
        let mut put = |label: &Label, sig: (IndexKind, Variance)| {
            if out.insert(label.clone(), sig).is_some() {
                return Err(ExprError::IndexCollision(label.clone()));
            }
            Ok(())
        };
        if let Some((id, l)) = &self.cod.bundle {
            put(l, (IndexKind::Bundle(id.clone()), Variance::Up))?;
        }
        if let Some((id, l)) = &self.dom.bundle {
            put(l, (IndexKind::Bundle(id.clone()), Variance::Down))?;
        }
        for l in &self.cod.coords {
            put(l, (IndexKind::Coord, Variance::Down))?;
        }
        for l in &self.dom.coords {
            put(l, (IndexKind::Coord, Variance::Up))?;
        }
        Ok(out)
    }
}

/// A symbol split by net semiclassical grade. Component expressions are
/// canonical and eps-free; the map key carries the grade and every nonzero
/// component's free slots equal the wiring's expected set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GradedSymbol {
    sig: Signature,
    comps: BTreeMap<i32, TensorExpr>,
}

impl GradedSymbol {
    pub fn new(sig: Signature) -> Self {
        GradedSymbol { sig, comps: BTreeMap::new() }
    }

    pub fn from_expr(sig: Signature, e: &TensorExpr) -> Result<Self, ExprError> {
        let canon = e.canonicalize()?;
        let expected = sig.expected_free()?;
        if !canon.is_zero() && canon.free_signature()? != expected {
            return Err(ExprError::SignatureMismatch(format!(
                "component free slots do not match the declared wiring {:?}",
                expected.keys().collect::<Vec<_>>()
            )));
        }
        let mut sym = GradedSymbol::new(sig);
        for t in &canon.terms {
            let g = t.coeff.eps_power();
            let mut nt = t.clone();
            nt.coeff = nt.coeff.times_eps(-g);
            sym.comps.entry(g).or_default().terms.push(nt);
        }
        for e in sym.comps.values_mut() {
            *e = e.canonicalize()?;
        }
        sym.comps.retain(|_, e| !e.is_zero());
        Ok(sym)
    }

    /// Installs an eps-free component at an explicit grade.
    pub fn insert_component(&mut self, grade: i32, e: &TensorExpr) -> Result<(), ExprError> {
        let canon = e.canonicalize()?;
        if canon.terms.iter().any(|t| t.coeff.eps_power() != 0) {
            return Err(ExprError::SignatureMismatch(
                "graded component must not carry eps powers".to_string(),
            ));
        }
        if !canon.is_zero() && canon.free_signature()? != self.sig.expected_free()? {
            return Err(ExprError::SignatureMismatch(
                "component free slots do not match the declared wiring".to_string(),
            ));
        }
        let merged = self.component(grade).add(&canon).canonicalize()?;
        if merged.is_zero() {
            self.comps.remove(&grade);
        } else {
            self.comps.insert(grade, merged);
        }
        Ok(())
    }

    pub fn sig(&self) -> &Signature {
        &self.sig
    }

    pub fn grades(&self) -> Vec<i32> {
        self.comps.keys().copied().collect()
    }

    pub fn leading_grade(&self) -> Option<i32> {
        self.comps.keys().next().copied()
    }

    pub fn component(&self, grade: i32) -> TensorExpr {
        self.comps.get(&grade).cloned().unwrap_or_else(TensorExpr::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn to_expr(&self) -> TensorExpr {
        let mut out = TensorExpr::zero();
        for (g, e) in &self.comps {
            out = out.add(&e.scale(&Coefficient::eps_pow(*g)));
        }
        out
    }

    pub fn add(&self, other: &GradedSymbol) -> Result<GradedSymbol, ExprError> {
        if self.sig != other.sig {
            return Err(ExprError::SignatureMismatch(
                "cannot add symbols with different wiring".to_string(),
            ));
        }
        let mut out = GradedSymbol::new(self.sig.clone());
        let grades: BTreeSet<i32> =
            self.comps.keys().chain(other.comps.keys()).copied().collect();
        for g in grades {
            let sum = self.component(g).add(&other.component(g)).canonicalize()?;
            if !sum.is_zero() {
                out.comps.insert(g, sum);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &GradedSymbol) -> Result<GradedSymbol, ExprError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> GradedSymbol {
        GradedSymbol {
            sig: self.sig.clone(),
            comps: self.comps.iter().map(|(g, e)| (*g, e.neg())).collect(),
        }
    }

    /// Multiplies by a scalar coefficient; its eps power shifts the grades.
    pub fn scale(&self, c: &Coefficient) -> GradedSymbol {
        if c.is_zero() {
            return GradedSymbol::new(self.sig.clone());
        }
        let shift = c.eps_power();
        let flat = c.times_eps(-shift);
        GradedSymbol {
            sig: self.sig.clone(),
            comps: self.comps.iter().map(|(g, e)| (g + shift, e.scale(&flat))).collect(),
        }
    }

    pub fn eval_gamma(&self, g: &Rational) -> GradedSymbol {
        let mut comps = BTreeMap::new();
        for (k, e) in &self.comps {
            let ev = e.eval_gamma(g);
            if !ev.is_zero() {
                comps.insert(*k, ev);
            }
        }
        GradedSymbol { sig: self.sig.clone(), comps }
    }

    pub fn normal_order(&self, flat: bool) -> Result<GradedSymbol, ExprError> {
        let mut out = GradedSymbol::new(self.sig.clone());
        for (g, e) in &self.comps {
            let ordered = normal_order_h(e, flat)?;
            if !ordered.is_zero() {
                out.comps.insert(*g, ordered);
            }
        }
        Ok(out)
    }

    /// Formal adjoint: transposed wiring, conjugated components. Coordinate
    /// wiring would need explicit metric transposition and is not supported.
    pub fn adjoint(&self) -> Result<GradedSymbol, ExprError> {
        if self.sig.has_coords() {
            return Err(ExprError::SignatureMismatch(
                "adjoint of coordinate-wired symbols is not supported".to_string(),
            ));
        }
        let mut out = GradedSymbol::new(self.sig.transpose());
        for (g, e) in &self.comps {
            let adj = adjoint_expr(e)?.canonicalize()?;
            if !adj.is_zero() {
                out.comps.insert(*g, adj);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::rat;
    use crate::head::{GenericHead, SlotSig};

    fn phase_scalar(name: &str) -> TensorFactor {
        TensorFactor::new(Head::Generic(GenericHead::phase(name, vec![])), vec![])
    }

    fn with_h(mut f: TensorFactor, labels: &[&str]) -> TensorFactor {
        f.h = labels.iter().map(|l| IndexSlot::down(*l)).collect();
        f
    }

    #[test]
    fn flat_ordering_sorts_h_without_corrections() {
        let a = with_h(phase_scalar("a"), &["n", "m"]);
        let got = normal_order_h(&TensorExpr::from_factor(a), true).unwrap();
        let want = TensorExpr::from_factor(with_h(phase_scalar("a"), &["m", "n"]))
            .canonicalize()
            .unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn curved_swap_inserts_momentum_curvature_term() {
        let a = with_h(phase_scalar("a"), &["n", "m"]);
        let got = normal_order_h(&TensorExpr::from_factor(a), false).unwrap();

        let sorted = TensorExpr::from_factor(with_h(phase_scalar("a"), &["m", "n"]));
        let mut av = phase_scalar("a");
        av.v.push(IndexSlot::up("y"));
        let correction = TensorExpr::from_factors(vec![
            TensorFactor::riemann(vec![
                IndexSlot::up("x"),
                IndexSlot::down("y"),
                IndexSlot::down("m"),
                IndexSlot::down("n"),
            ]),
            TensorFactor::momentum("x"),
            av,
        ]);
        let want = sorted.add(&correction).canonicalize().unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn curved_swap_acts_on_prefix_derivative_slot() {
        // list [a, c, b]: swapping the last pair commutes h_b past h_c in
        // front of the inner h_a, so the prefix slot picks up a curvature
        // action of its own.
        let f = with_h(phase_scalar("u"), &["a", "c", "b"]);
        let got = normal_order_h(&TensorExpr::from_factor(f), false).unwrap();

        let sorted = TensorExpr::from_factor(with_h(phase_scalar("u"), &["a", "b", "c"]));
        let mut uv = with_h(phase_scalar("u"), &["a"]);
        uv.v.push(IndexSlot::up("y"));
        let momentum = TensorExpr::from_factors(vec![
            TensorFactor::riemann(vec![
                IndexSlot::up("x"),
                IndexSlot::down("y"),
                IndexSlot::down("b"),
                IndexSlot::down("c"),
            ]),
            TensorFactor::momentum("x"),
            uv,
        ]);
        let prefix = TensorExpr::from_factors(vec![
            TensorFactor::riemann(vec![
                IndexSlot::down("a"),
                IndexSlot::up("t"),
                IndexSlot::down("b"),
                IndexSlot::down("c"),
            ]),
            with_h(phase_scalar("u"), &["t"]),
        ]);
        let want = sorted.add(&momentum).add(&prefix).canonicalize().unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn curved_swap_commutes_with_outer_vertical_slot() {
        // v derivatives commute with h, so ordering before or after applying
        // v^c must agree; the p factor in the correction differentiates into
        // a delta.
        let base = with_h(phase_scalar("a"), &["n", "m"]);
        let mut decorated = base.clone();
        decorated.v.push(IndexSlot::up("c"));
        let got = normal_order_h(&TensorExpr::from_factor(decorated), false).unwrap();

        let ordered_then_v =
            vderiv(&normal_order_h(&TensorExpr::from_factor(base), false).unwrap(), &"c".to_string());
        let want = ordered_then_v.canonicalize().unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn curved_swap_sandwiches_bundle_curvature() {
        let head = Head::Generic(GenericHead::phase(
            "a",
            vec![SlotSig::bundle(Variance::Up, "E"), SlotSig::bundle(Variance::Down, "E")],
        ));
        let f = with_h(
            TensorFactor::new(head.clone(), vec![
                IndexSlot::bundle_up("E", "A"),
                IndexSlot::bundle_down("E", "B"),
            ]),
            &["n", "m"],
        );
        let got = normal_order_h(&TensorExpr::from_factor(f.clone()), false).unwrap();

        let sorted = TensorExpr::from_factor(with_h(f.clone(), &["m", "n"]));
        let mut av = f.clone();
        av.h.clear();
        av.v.push(IndexSlot::up("y"));
        let momentum = TensorExpr::from_factors(vec![
            TensorFactor::riemann(vec![
                IndexSlot::up("x"),
                IndexSlot::down("y"),
                IndexSlot::down("m"),
                IndexSlot::down("n"),
            ]),
            TensorFactor::momentum("x"),
            av,
        ]);
        let mut a_cod = f.clone();
        a_cod.h.clear();
        a_cod.slots[0].label = "t".to_string();
        let f_cod = TensorExpr::from_factors(vec![
            TensorFactor::new(Head::BundleCurv("E".to_string()), vec![
                IndexSlot::bundle_up("E", "A"),
                IndexSlot::bundle_down("E", "t"),
                IndexSlot::down("m"),
                IndexSlot::down("n"),
            ]),
            a_cod,
        ]);
        let mut a_dom = f.clone();
        a_dom.h.clear();
        a_dom.slots[1].label = "t".to_string();
        let f_dom = TensorExpr::from_factors(vec![
            TensorFactor::new(Head::BundleCurv("E".to_string()), vec![
                IndexSlot::bundle_up("E", "t"),
                IndexSlot::bundle_down("E", "B"),
                IndexSlot::down("m"),
                IndexSlot::down("n"),
            ]),
            a_dom,
        ]);
        let want = sorted.add(&momentum).add(&f_cod).sub(&f_dom).canonicalize().unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn adjoint_expr_is_involutive_and_skews_bundle_curvature() {
        let head = Head::Generic(GenericHead::phase(
            "a",
            vec![SlotSig::bundle(Variance::Up, "E"), SlotSig::bundle(Variance::Down, "E")],
        ));
        let term = TensorExpr::from_factors(vec![
            TensorFactor::new(head, vec![
                IndexSlot::bundle_up("E", "A"),
                IndexSlot::bundle_down("E", "s"),
            ]),
            TensorFactor::new(Head::BundleCurv("E".to_string()), vec![
                IndexSlot::bundle_up("E", "s"),
                IndexSlot::bundle_down("E", "B"),
                IndexSlot::down("m"),
                IndexSlot::down("n"),
            ]),
        ])
        .scale(&Coefficient::i());

        let adj = adjoint_expr(&term).unwrap();
        // i conjugates to -i and the curvature contributes another sign
        let twice = adjoint_expr(&adj).unwrap().canonicalize().unwrap();
        assert_eq!(twice, term.canonicalize().unwrap());
        let back = adj.canonicalize().unwrap();
        assert_ne!(back, term.canonicalize().unwrap());
        for t in &back.terms {
            assert_eq!(t.coeff.i_power(), 1);
        }
    }

    #[test]
    fn graded_symbol_splits_and_rebuilds_by_eps_power() {
        let pp = TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("m", "n"),
            TensorFactor::momentum("m"),
            TensorFactor::momentum("n"),
        ])
        .scale(&Coefficient::eps_pow(-2))
        .neg();
        let curv = TensorExpr::from_factor(TensorFactor::ricci_scalar())
            .scale(&Coefficient::from_poly(crate::coeff::GammaPoly::linear(0, 1, 3)));
        let total = pp.add(&curv);

        let sym = GradedSymbol::from_expr(Signature::scalar(), &total).unwrap();
        assert_eq!(sym.grades(), vec![-2, 0]);
        assert_eq!(sym.leading_grade(), Some(-2));
        for t in &sym.component(-2).terms {
            assert_eq!(t.coeff.eps_power(), 0);
        }
        assert_eq!(sym.to_expr().canonicalize().unwrap(), total.canonicalize().unwrap());
    }

    #[test]
    fn from_expr_rejects_components_missing_wiring_labels() {
        let sig = Signature::endo("E", "A", "B");
        let bad = TensorExpr::from_factor(TensorFactor::ricci_scalar());
        assert!(GradedSymbol::from_expr(sig, &bad).is_err());
    }

    #[test]
    fn symbol_adjoint_transposes_wiring_and_conjugates() {
        let sig = Signature::endo("S", "A", "B");
        let gamma = TensorFactor::new(
            Head::Gamma { bundle: "S".to_string(), dagger: false },
            vec![
                IndexSlot::bundle_up("S", "A"),
                IndexSlot::bundle_down("S", "B"),
                IndexSlot::up("m"),
            ],
        );
        let slash = TensorExpr::from_factors(vec![gamma, TensorFactor::momentum("m")])
            .scale(&Coefficient::from_rational(rat(-1, 1)));
        let sym = GradedSymbol::from_expr(sig.clone(), &slash).unwrap();

        let adj = sym.adjoint().unwrap();
        assert_eq!(adj.sig(), &sig.transpose());
        let gamma_dag = TensorFactor::new(
            Head::Gamma { bundle: "S".to_string(), dagger: true },
            vec![
                IndexSlot::bundle_up("S", "B"),
                IndexSlot::bundle_down("S", "A"),
                IndexSlot::up("m"),
            ],
        );
        let want = TensorExpr::from_factors(vec![gamma_dag, TensorFactor::momentum("m")])
            .scale(&Coefficient::from_rational(rat(-1, 1)));
        assert_eq!(adj.component(0), want.canonicalize().unwrap());
        assert_eq!(adj.adjoint().unwrap(), sym);
    }
}
