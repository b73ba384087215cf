//! Tensor expressions and structural canonicalization.
//!
//! A term is an exact coefficient times a product of factors joined by
//! repeated labels; a label appearing twice (once up, once down, same kind)
//! is a contraction, a label appearing once is free. Canonicalization:
//!
//! 1. validates slot balance and that all terms share one free signature,
//! 2. absorbs metric and delta factors and reduces curvature self-traces,
//! 3. minimizes each term's rendered string over head symmetry orbits,
//!    orderings of identical factors, contraction orientation flips, and
//!    vertical slot orderings, renaming dummies by first occurrence,
//! 4. merges terms with equal factor strings and drops exact zeros.
//!
//! A term whose symmetry orbit contains its own negation is zero; the
//! minimization detects this because step 3 revisits the same rendered
//! string with both signs. The search is exhaustive over small per-term
//! choice sets, which keeps equality decisions exact rather than heuristic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::One;

use crate::coeff::{Coefficient, GammaPoly, Rational};
use crate::factor::{SlotPos, TensorFactor};
use crate::head::Head;
use crate::index::{IndexKind, IndexSlot, Label, Variance};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprError {
    MalformedIndex(String),
    Arity { head: String, expected: usize, got: usize },
    IndexCollision(Label),
    SignatureMismatch(String),
    IndexNotFree(Label),
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprError::MalformedIndex(m) => write!(f, "malformed index: {m}"),
            ExprError::Arity { head, expected, got } => {
                write!(f, "arity mismatch on {head}: expected {expected} slots, got {got}")
            }
            ExprError::IndexCollision(l) => write!(f, "label {l} used more than twice"),
            ExprError::SignatureMismatch(m) => write!(f, "free index signature mismatch: {m}"),
            ExprError::IndexNotFree(l) => write!(f, "label {l} is not a free index"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub coeff: Coefficient,
    pub factors: Vec<TensorFactor>,
}

impl Term {
    pub fn scalar(coeff: Coefficient) -> Self {
        Term { coeff, factors: Vec::new() }
    }

    pub fn labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        for f in &self.factors {
            f.for_each_slot(|s| {
                out.insert(s.label.clone());
            });
        }
        out
    }

    pub fn map_labels(&mut self, f: &mut impl FnMut(&Label) -> Label) {
        for fac in &mut self.factors {
            fac.map_labels(f);
        }
    }

    /// Number of momentum factors; vertical slots carry no momentum.
    pub fn p_degree(&self) -> usize {
        self.factors.iter().filter(|f| f.head == Head::Momentum).count()
    }
}

/// Label -> occurrences as (factor index, slot position).
fn occurrences(factors: &[TensorFactor]) -> BTreeMap<Label, Vec<(usize, SlotPos)>> {
    let mut occ: BTreeMap<Label, Vec<(usize, SlotPos)>> = BTreeMap::new();
    for (i, f) in factors.iter().enumerate() {
        for pos in f.positions() {
            let s = f.slot_at(pos);
            occ.entry(s.label.clone()).or_default().push((i, pos));
        }
    }
    occ
}

/// Validates slot balance and returns the free signature of one term.
fn validate_term(factors: &[TensorFactor]) -> Result<BTreeMap<Label, (IndexKind, Variance)>, ExprError> {
    for f in factors {
        f.validate()?;
    }
    let occ = occurrences(factors);
    let mut free = BTreeMap::new();
    for (label, list) in &occ {
        match list.len() {
            1 => {
                let (i, pos) = list[0];
                let s = factors[i].slot_at(pos);
                free.insert(label.clone(), (s.kind.clone(), s.variance));
            }
            2 => {
                let a = factors[list[0].0].slot_at(list[0].1);
                let b = factors[list[1].0].slot_at(list[1].1);
                if a.kind != b.kind {
                    return Err(ExprError::MalformedIndex(format!(
                        "label {label} contracts mismatched index kinds"
                    )));
                }
                if a.variance == b.variance {
                    return Err(ExprError::MalformedIndex(format!(
                        "label {label} repeats with equal variance"
                    )));
                }
            }
            _ => return Err(ExprError::IndexCollision(label.clone())),
        }
    }
    Ok(free)
}

pub(crate) fn fresh_label(avoid: &BTreeSet<Label>, counter: &mut usize) -> Label {
    loop {
        let cand = format!("~{}", *counter);
        *counter += 1;
        if !avoid.contains(&cand) {
            return cand;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TensorExpr {
    pub terms: Vec<Term>,
}

impl TensorExpr {
    pub fn zero() -> Self {
        TensorExpr { terms: Vec::new() }
    }

    pub fn one() -> Self {
        TensorExpr::scalar(Coefficient::one())
    }

    pub fn scalar(c: Coefficient) -> Self {
        if c.is_zero() {
            TensorExpr::zero()
        } else {
            TensorExpr { terms: vec![Term::scalar(c)] }
        }
    }

    pub fn from_term(t: Term) -> Self {
        TensorExpr { terms: vec![t] }
    }

    pub fn from_factor(f: TensorFactor) -> Self {
        TensorExpr::from_term(Term { coeff: Coefficient::one(), factors: vec![f] })
    }

    pub fn from_factors(fs: Vec<TensorFactor>) -> Self {
        TensorExpr::from_term(Term { coeff: Coefficient::one(), factors: fs })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &TensorExpr) -> TensorExpr {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        TensorExpr { terms }
    }

    pub fn sub(&self, other: &TensorExpr) -> TensorExpr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> TensorExpr {
        self.map_coeff(|c| c.neg())
    }

    pub fn scale(&self, c: &Coefficient) -> TensorExpr {
        self.map_coeff(|x| x.mul(c))
    }

    pub fn scale_rational(&self, q: &Rational) -> TensorExpr {
        self.map_coeff(|x| x.scale(q))
    }

    pub fn map_coeff(&self, f: impl Fn(&Coefficient) -> Coefficient) -> TensorExpr {
        TensorExpr {
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: f(&t.coeff), factors: t.factors.clone() })
                .filter(|t| !t.coeff.is_zero())
                .collect(),
        }
    }

    /// Substitute a rational value for gamma in every coefficient.
    pub fn eval_gamma(&self, g: &Rational) -> TensorExpr {
        self.map_coeff(|c| c.eval_gamma(g))
    }

    pub fn all_labels(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        for t in &self.terms {
            out.extend(t.labels());
        }
        out
    }

    /// Product with both sides' dummy labels freshened apart; shared free
    /// labels become contractions.
    pub fn mul(&self, other: &TensorExpr) -> TensorExpr {
        let mut out = Vec::new();
        for t1 in &self.terms {
            for t2 in &other.terms {
                let mut avoid: BTreeSet<Label> = t1.labels();
                avoid.extend(t2.labels());
                let mut counter = 0usize;
                let mut a = t1.clone();
                freshen_dummies(&mut a, &mut avoid, &mut counter);
                let mut b = t2.clone();
                freshen_dummies(&mut b, &mut avoid, &mut counter);
                let mut factors = a.factors;
                factors.extend(b.factors);
                out.push(Term { coeff: a.coeff.mul(&b.coeff), factors });
            }
        }
        TensorExpr { terms: out }
    }

    /// The shared free-slot signature, validating every term.
    pub fn free_signature(&self) -> Result<BTreeMap<Label, (IndexKind, Variance)>, ExprError> {
        let mut sig: Option<BTreeMap<Label, (IndexKind, Variance)>> = None;
        for t in &self.terms {
            let free = validate_term(&t.factors)?;
            match &sig {
                None => sig = Some(free),
                Some(s) => {
                    if *s != free {
                        return Err(ExprError::SignatureMismatch(format!(
                            "{:?} vs {:?}",
                            s.keys().collect::<Vec<_>>(),
                            free.keys().collect::<Vec<_>>()
                        )));
                    }
                }
            }
        }
        Ok(sig.unwrap_or_default())
    }

    pub fn canonicalize(&self) -> Result<TensorExpr, ExprError> {
        self.free_signature()?;
        // key: (factor string, i_power, eps_power) -> accumulated gamma poly
        let mut acc: BTreeMap<(String, u8, i32), (Vec<TensorFactor>, GammaPoly)> = BTreeMap::new();
        for term in &self.terms {
            if term.coeff.is_zero() {
                continue;
            }
            let Some(t) = absorb(term.clone())? else { continue };
            if t.coeff.is_zero() {
                continue;
            }
            let Some((factors, sign, key)) = canonical_search(&t) else { continue };
            let coeff = if sign < 0 { t.coeff.neg() } else { t.coeff };
            let slot = acc
                .entry((key, coeff.i_power(), coeff.eps_power()))
                .or_insert_with(|| (factors, GammaPoly::zero()));
            slot.1 = slot.1.add(&coeff.raw_poly());
        }
        let mut rows: Vec<(i32, String, u8, Term)> = Vec::new();
        for ((key, i_pow, eps), (factors, poly)) in acc {
            let coeff = Coefficient::from_parts(Rational::one(), i_pow as u32, eps, poly);
            if coeff.is_zero() {
                continue;
            }
            rows.push((eps, key, i_pow, Term { coeff, factors }));
        }
        rows.sort_by(|a, b| (a.0, &a.1, a.2).cmp(&(b.0, &b.1, b.2)));
        Ok(TensorExpr { terms: rows.into_iter().map(|r| r.3).collect() })
    }

    pub fn max_p_degree(&self) -> usize {
        self.terms.iter().map(|t| t.p_degree()).max().unwrap_or(0)
    }
}

fn freshen_dummies(term: &mut Term, avoid: &mut BTreeSet<Label>, counter: &mut usize) {
    let occ = occurrences(&term.factors);
    let mut map: BTreeMap<Label, Label> = BTreeMap::new();
    for (label, list) in occ {
        if list.len() >= 2 {
            let fresh = fresh_label(avoid, counter);
            avoid.insert(fresh.clone());
            map.insert(label, fresh);
        }
    }
    if map.is_empty() {
        return;
    }
    term.map_labels(&mut |l| map.get(l).cloned().unwrap_or_else(|| l.clone()));
}

/// Rewrites mixed-variance metric family heads into their true head and
/// orders delta slots [upper, lower].
fn normalize_metric_heads(f: &mut TensorFactor) {
    if !matches!(f.head, Head::Metric | Head::MetricInv | Head::Delta) {
        return;
    }
    let v0 = f.slots[0].variance;
    let v1 = f.slots[1].variance;
    f.head = match (v0, v1) {
        (Variance::Up, Variance::Up) => Head::MetricInv,
        (Variance::Down, Variance::Down) => Head::Metric,
        _ => Head::Delta,
    };
    if f.head == Head::Delta && v0 == Variance::Down {
        f.slots.swap(0, 1);
    }
}

/// Absorbs metric and delta contractions and reduces curvature self-traces.
/// Returns None when the term is identically zero.
fn absorb(mut term: Term) -> Result<Option<Term>, ExprError> {
    'outer: loop {
        for f in &mut term.factors {
            normalize_metric_heads(f);
        }
        let occ = occurrences(&term.factors);
        let partner = |label: &Label, me: (usize, SlotPos)| -> Option<(usize, SlotPos)> {
            let list = occ.get(label)?;
            if list.len() != 2 {
                return None;
            }
            list.iter().copied().find(|&(i, p)| (i, p) != me)
        };

        // coordinate delta self-trace -> dimension scalar
        for (i, f) in term.factors.iter().enumerate() {
            if f.head == Head::Delta && f.slots[0].label == f.slots[1].label {
                term.factors[i] = TensorFactor::new(Head::Dim, Vec::new());
                continue 'outer;
            }
        }

        // delta absorption: relabel the partner slot, never moving variance
        for (i, f) in term.factors.iter().enumerate() {
            if !matches!(f.head, Head::Delta | Head::BundleDelta(_)) {
                continue;
            }
            for k in 0..2 {
                let label = f.slots[k].label.clone();
                let Some((pi, ppos)) = partner(&label, (i, SlotPos::Base(k))) else { continue };
                if pi == i {
                    // bundle delta self-trace stays as a rank scalar
                    continue;
                }
                let new_label = f.slots[1 - k].label.clone();
                term.factors[pi].slot_at_mut(ppos).label = new_label;
                term.factors.remove(i);
                continue 'outer;
            }
        }

        // metric absorption: re-variance the partner slot where allowed
        for (i, f) in term.factors.iter().enumerate() {
            if !matches!(f.head, Head::Metric | Head::MetricInv) {
                continue;
            }
            for k in 0..2 {
                let label = f.slots[k].label.clone();
                let Some((pi, ppos)) = partner(&label, (i, SlotPos::Base(k))) else { continue };
                if pi == i {
                    continue;
                }
                let target = &term.factors[pi];
                let allowed = target.variance_flexible(ppos)
                    || matches!(target.head, Head::Metric | Head::MetricInv | Head::Delta);
                if !allowed {
                    continue;
                }
                let repl = f.slots[1 - k].clone();
                let slot = term.factors[pi].slot_at_mut(ppos);
                slot.variance = repl.variance;
                slot.label = repl.label;
                term.factors.remove(i);
                continue 'outer;
            }
        }

        // curvature self-traces
        for (i, f) in term.factors.iter().enumerate() {
            match &f.head {
                Head::Riemann => {
                    let paired = (0..4).find(|&a| {
                        (a + 1..4).any(|b| f.slots[a].label == f.slots[b].label)
                    });
                    if paired.is_none() {
                        continue;
                    }
                    let mut reduced = None;
                    for (perm, sign) in f.head.sym_group() {
                        let ns: Vec<IndexSlot> = perm.iter().map(|&j| f.slots[j].clone()).collect();
                        if ns[0].label == ns[2].label {
                            reduced = Some((ns, sign));
                            break;
                        }
                    }
                    match reduced {
                        Some((ns, sign)) => {
                            let mut g = TensorFactor::new(
                                Head::Ricci,
                                vec![ns[1].clone(), ns[3].clone()],
                            );
                            g.cov = f.cov.clone();
                            term.factors[i] = g;
                            if sign < 0 {
                                term.coeff = term.coeff.neg();
                            }
                        }
                        // the pair sits inside one antisymmetric block
                        None => return Ok(None),
                    }
                    continue 'outer;
                }
                Head::Ricci if f.slots[0].label == f.slots[1].label => {
                    let mut g = TensorFactor::new(Head::RicciScalar, Vec::new());
                    g.cov = f.cov.clone();
                    term.factors[i] = g;
                    continue 'outer;
                }
                Head::BundleCurv(_) if f.slots[2].label == f.slots[3].label => {
                    return Ok(None);
                }
                _ => {}
            }
        }

        break;
    }
    Ok(Some(term))
}

/// One per-factor arrangement choice: a symmetry image of the base slots
/// plus an ordering of the vertical slots.
struct Variant {
    slots: Vec<IndexSlot>,
    v: Vec<IndexSlot>,
    sign: i8,
}

pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for k in 0..n {
            let mut p = rest.clone();
            p.insert(k, n - 1);
            out.push(p);
        }
    }
    out
}

/// Exhaustive minimization of the rendered term string. Returns the
/// arrangement achieving the minimum together with its sign, or None when
/// the term is zero by antisymmetry.
fn canonical_search(term: &Term) -> Option<(Vec<TensorFactor>, i8, String)> {
    let occ = occurrences(&term.factors);
    let dummies: BTreeSet<Label> =
        occ.iter().filter(|(_, v)| v.len() == 2).map(|(l, _)| l.clone()).collect();

    let mut flippable: Vec<Label> = Vec::new();
    for (label, list) in &occ {
        if list.len() == 2
            && list.iter().all(|&(i, p)| {
                term.factors[i].variance_flexible(p) && term.factors[i].slot_at(p).is_coord()
            })
        {
            flippable.push(label.clone());
        }
    }

    // per-factor variants, deduped by content with sign conflicts -> zero
    let mut variants: Vec<Vec<Variant>> = Vec::new();
    for f in &term.factors {
        let mut images: Vec<(Vec<IndexSlot>, i8)> = Vec::new();
        for (perm, sign) in f.head.sym_group() {
            let ns: Vec<IndexSlot> = perm.iter().map(|&j| f.slots[j].clone()).collect();
            match images.iter().find(|(s, _)| s == &ns) {
                Some((_, s0)) if *s0 != sign => return None,
                Some(_) => {}
                None => images.push((ns, sign)),
            }
        }
        let v_orders: Vec<Vec<IndexSlot>> = if f.v.len() >= 2 {
            permutations(f.v.len())
                .into_iter()
                .map(|p| p.iter().map(|&j| f.v[j].clone()).collect())
                .collect()
        } else {
            vec![f.v.clone()]
        };
        let mut vs = Vec::new();
        for (slots, sign) in &images {
            for vo in &v_orders {
                vs.push(Variant { slots: slots.clone(), v: vo.clone(), sign: *sign });
            }
        }
        variants.push(vs);
    }

    let nf = term.factors.len();
    let mut choice = vec![0usize; nf];
    let mut seen: BTreeMap<String, i8> = BTreeMap::new();
    let mut best: Option<(String, i8, Vec<TensorFactor>)> = None;
    let mut zero = false;

    loop {
        let mut arranged: Vec<TensorFactor> = Vec::with_capacity(nf);
        let mut sign: i8 = 1;
        for (i, f) in term.factors.iter().enumerate() {
            let var = &variants[i][choice[i]];
            let mut g = f.clone();
            g.slots = var.slots.clone();
            g.v = var.v.clone();
            sign *= var.sign;
            arranged.push(g);
        }

        for mask in 0..(1u32 << flippable.len()) {
            let mut fs = arranged.clone();
            for (bit, label) in flippable.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    for f in &mut fs {
                        for pos in f.positions() {
                            let s = f.slot_at_mut(pos);
                            if &s.label == label {
                                s.variance = s.variance.flipped();
                            }
                        }
                    }
                }
            }

            // order factors by dummy-anonymized keys; explore ties
            let keys: Vec<String> = fs
                .iter()
                .map(|f| {
                    f.clone().render(&mut |l: &Label| {
                        if dummies.contains(l) {
                            String::from("?")
                        } else {
                            l.clone()
                        }
                    })
                })
                .collect();
            let mut order: Vec<usize> = (0..nf).collect();
            order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));

            let mut groups: Vec<(usize, usize)> = Vec::new();
            let mut start = 0;
            for i in 1..=nf {
                if i == nf || keys[order[i]] != keys[order[start]] {
                    groups.push((start, i));
                    start = i;
                }
            }

            explore_tie_orders(&fs, &order, &groups, 0, &dummies, sign, &mut seen, &mut best, &mut zero);
            if zero {
                return None;
            }
        }

        // odometer over per-factor variants
        let mut i = 0;
        loop {
            if i == nf {
                let (s, sign, factors) = best.expect("nonempty candidate set");
                return Some((factors, sign, s));
            }
            choice[i] += 1;
            if choice[i] < variants[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn explore_tie_orders(
    fs: &[TensorFactor],
    order: &[usize],
    groups: &[(usize, usize)],
    gi: usize,
    dummies: &BTreeSet<Label>,
    sign: i8,
    seen: &mut BTreeMap<String, i8>,
    best: &mut Option<(String, i8, Vec<TensorFactor>)>,
    zero: &mut bool,
) {
    if *zero {
        return;
    }
    if gi == groups.len() {
        scan_candidate(fs, order, dummies, sign, seen, best, zero);
        return;
    }
    let (lo, hi) = groups[gi];
    if hi - lo <= 1 {
        explore_tie_orders(fs, order, groups, gi + 1, dummies, sign, seen, best, zero);
        return;
    }
    for p in permutations(hi - lo) {
        let mut o = order.to_vec();
        let block: Vec<usize> = (lo..hi).map(|k| order[lo + p[k - lo]]).collect();
        o[lo..hi].copy_from_slice(&block);
        explore_tie_orders(fs, &o, groups, gi + 1, dummies, sign, seen, best, zero);
    }
}

fn scan_candidate(
    fs: &[TensorFactor],
    order: &[usize],
    dummies: &BTreeSet<Label>,
    sign: i8,
    seen: &mut BTreeMap<String, i8>,
    best: &mut Option<(String, i8, Vec<TensorFactor>)>,
    zero: &mut bool,
) {
    let mut names: BTreeMap<Label, String> = BTreeMap::new();
    let mut next = 0usize;
    let mut rendered = String::new();
    for &i in order {
        let s = fs[i].clone().render(&mut |l: &Label| {
            if dummies.contains(l) {
                names
                    .entry(l.clone())
                    .or_insert_with(|| {
                        // zero-padded so label order equals scan order
                        let name = format!("!{next:02}");
                        next += 1;
                        name
                    })
                    .clone()
            } else {
                l.clone()
            }
        });
        rendered.push_str(&s);
        rendered.push('*');
    }
    match seen.get(&rendered) {
        Some(&s0) if s0 != sign => {
            *zero = true;
            return;
        }
        Some(_) => {}
        None => {
            seen.insert(rendered.clone(), sign);
        }
    }
    let better = match best {
        None => true,
        Some((b, _, _)) => rendered < *b,
    };
    if better {
        let mut factors: Vec<TensorFactor> = order.iter().map(|&i| fs[i].clone()).collect();
        for f in &mut factors {
            f.map_labels(&mut |l| names.get(l).cloned().unwrap_or_else(|| l.clone()));
        }
        *best = Some((rendered, sign, factors));
    }
}

/// Vertical derivative in an upper coordinate direction.
pub fn vderiv(e: &TensorExpr, label: &Label) -> TensorExpr {
    use crate::head::VRule;
    let mut out = Vec::new();
    for t in &e.terms {
        for (i, f) in t.factors.iter().enumerate() {
            match f.head.v_rule() {
                VRule::Zero => {}
                VRule::MomentumDelta => {
                    let mut nt = t.clone();
                    nt.factors[i] = TensorFactor::delta(label.clone(), f.slots[0].label.clone());
                    out.push(nt);
                }
                VRule::AppendV => {
                    let mut nt = t.clone();
                    nt.factors[i].v.push(IndexSlot::up(label.clone()));
                    out.push(nt);
                }
            }
        }
    }
    TensorExpr { terms: out }
}

/// Horizontal derivative in a lower coordinate direction; appends a
/// covariant slot on position tensors.
pub fn hderiv(e: &TensorExpr, label: &Label) -> TensorExpr {
    use crate::head::HRule;
    let mut out = Vec::new();
    for t in &e.terms {
        for (i, f) in t.factors.iter().enumerate() {
            match f.head.h_rule() {
                HRule::Zero => {}
                HRule::AppendCov => {
                    let mut nt = t.clone();
                    nt.factors[i].cov.push(IndexSlot::down(label.clone()));
                    out.push(nt);
                }
                HRule::AppendH => {
                    let mut nt = t.clone();
                    nt.factors[i].h.push(IndexSlot::down(label.clone()));
                    out.push(nt);
                }
            }
        }
    }
    TensorExpr { terms: out }
}

/// Exposes the free lower coordinate slot `label` as upper by inserting an
/// explicit inverse metric.
pub fn raise(e: &TensorExpr, label: &Label) -> Result<TensorExpr, ExprError> {
    flip_free(e, label, Variance::Down)
}

/// Exposes the free upper coordinate slot `label` as lower.
pub fn lower(e: &TensorExpr, label: &Label) -> Result<TensorExpr, ExprError> {
    flip_free(e, label, Variance::Up)
}

fn flip_free(e: &TensorExpr, label: &Label, expect: Variance) -> Result<TensorExpr, ExprError> {
    let mut out = Vec::new();
    for t in &e.terms {
        let occ = occurrences(&t.factors);
        let Some(list) = occ.get(label) else {
            return Err(ExprError::IndexNotFree(label.clone()));
        };
        if list.len() != 1 {
            return Err(ExprError::IndexNotFree(label.clone()));
        }
        let (fi, pos) = list[0];
        let slot = t.factors[fi].slot_at(pos);
        if !slot.is_coord() || slot.variance != expect {
            return Err(ExprError::MalformedIndex(format!(
                "cannot change variance of slot {label}"
            )));
        }
        let mut avoid = t.labels();
        avoid.insert(label.clone());
        let mut counter = 0usize;
        let fresh = fresh_label(&avoid, &mut counter);
        let mut nt = t.clone();
        nt.factors[fi].slot_at_mut(pos).label = fresh.clone();
        let metric = match expect {
            Variance::Down => TensorFactor::metric_inv(label.clone(), fresh),
            Variance::Up => TensorFactor::metric(label.clone(), fresh),
        };
        nt.factors.push(metric);
        out.push(nt);
    }
    Ok(TensorExpr { terms: out })
}

/// Averages over permutations of the named free labels; with `antisym` the
/// parity signs are applied. All named slots must share kind and variance.
pub fn symmetrize(e: &TensorExpr, labels: &[Label], antisym: bool) -> Result<TensorExpr, ExprError> {
    let n = labels.len();
    if n < 2 {
        return e.canonicalize();
    }
    for t in &e.terms {
        let occ = occurrences(&t.factors);
        let mut sig: Option<(IndexKind, Variance)> = None;
        for l in labels {
            let Some(list) = occ.get(l) else { return Err(ExprError::IndexNotFree(l.clone())) };
            if list.len() != 1 {
                return Err(ExprError::IndexNotFree(l.clone()));
            }
            let s = t.factors[list[0].0].slot_at(list[0].1);
            let this = (s.kind.clone(), s.variance);
            match &sig {
                None => sig = Some(this),
                Some(prev) if *prev != this => {
                    return Err(ExprError::MalformedIndex(format!(
                        "symmetrized slots disagree in kind or variance at {l}"
                    )))
                }
                _ => {}
            }
        }
    }
    let perms = permutations(n);
    let weight = Rational::new(1.into(), (perms.len() as i64).into());
    let mut out = TensorExpr::zero();
    for p in &perms {
        let parity = perm_parity(p);
        let map: BTreeMap<Label, Label> =
            labels.iter().enumerate().map(|(i, l)| (l.clone(), labels[p[i]].clone())).collect();
        let mut copy = e.clone();
        for t in &mut copy.terms {
            t.map_labels(&mut |l| map.get(l).cloned().unwrap_or_else(|| l.clone()));
        }
        let mut w = weight.clone();
        if antisym && parity < 0 {
            w = -w;
        }
        out = out.add(&copy.scale_rational(&w));
    }
    out.canonicalize()
}

fn perm_parity(p: &[usize]) -> i8 {
    let mut seen = vec![false; p.len()];
    let mut parity = 1i8;
    for i in 0..p.len() {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            parity = -parity;
        }
    }
    parity
}

/// Heads a substitution can target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubstTarget {
    Riemann,
    Ricci,
    RicciScalar,
    Dim,
    BundleCurv(String),
    Generic(String),
}

fn target_matches(target: &SubstTarget, head: &Head) -> bool {
    match (target, head) {
        (SubstTarget::Riemann, Head::Riemann) => true,
        (SubstTarget::Ricci, Head::Ricci) => true,
        (SubstTarget::RicciScalar, Head::RicciScalar) => true,
        (SubstTarget::Dim, Head::Dim) => true,
        (SubstTarget::BundleCurv(id), Head::BundleCurv(b)) => id == b,
        (SubstTarget::Generic(name), Head::Generic(g)) => *name == g.name,
        _ => false,
    }
}

/// Replaces every factor with the targeted head by `replacement`, whose free
/// placeholder labels "@0", "@1", ... bind positionally to the factor's base
/// slots. Variance mismatches on coordinate placeholders are bridged with
/// explicit metrics, and derivative decorations on the matched factor are
/// applied to the replacement by the product rule.
pub fn substitute_head(
    e: &TensorExpr,
    target: &SubstTarget,
    replacement: &TensorExpr,
) -> Result<TensorExpr, ExprError> {
    let mut expr = e.clone();
    for _round in 0..64 {
        let mut changed = false;
        let mut out = Vec::new();
        for term in &expr.terms {
            let hit = term.factors.iter().position(|f| target_matches(target, &f.head));
            let Some(fi) = hit else {
                out.push(term.clone());
                continue;
            };
            changed = true;
            let expanded = expand_one(term, fi, replacement)?;
            out.extend(expanded.terms);
        }
        expr = TensorExpr { terms: out };
        if !changed {
            return Ok(expr);
        }
    }
    Err(ExprError::MalformedIndex(String::from(
        "substitution did not terminate; replacement reintroduces its target",
    )))
}

fn expand_one(term: &Term, fi: usize, replacement: &TensorExpr) -> Result<TensorExpr, ExprError> {
    let f = &term.factors[fi];
    let mut rest = term.clone();
    rest.factors.remove(fi);

    if replacement.is_zero() {
        return Ok(TensorExpr::zero());
    }

    // placeholder signature from the replacement's free slots
    let rep_sig = replacement.free_signature()?;
    let mut rep = replacement.clone();

    let mut avoid: BTreeSet<Label> = term.labels();
    avoid.extend(rep.all_labels());
    let mut counter = 0usize;

    for (k, slot) in f.slots.iter().enumerate() {
        let ph: Label = format!("@{k}");
        let Some((kind, variance)) = rep_sig.get(&ph) else {
            return Err(ExprError::MalformedIndex(format!(
                "replacement lacks placeholder {ph}"
            )));
        };
        if *kind != slot.kind {
            return Err(ExprError::MalformedIndex(format!(
                "placeholder {ph} kind mismatch"
            )));
        }
        if *variance == slot.variance {
            let target_label = slot.label.clone();
            for t in &mut rep.terms {
                t.map_labels(&mut |l| if *l == ph { target_label.clone() } else { l.clone() });
            }
        } else {
            if !slot.is_coord() {
                return Err(ExprError::MalformedIndex(format!(
                    "bundle placeholder {ph} variance mismatch"
                )));
            }
            let fresh = fresh_label(&avoid, &mut counter);
            avoid.insert(fresh.clone());
            for t in &mut rep.terms {
                t.map_labels(&mut |l| if *l == ph { fresh.clone() } else { l.clone() });
                let bridge = match slot.variance {
                    Variance::Up => TensorFactor::metric_inv(slot.label.clone(), fresh.clone()),
                    Variance::Down => TensorFactor::metric(slot.label.clone(), fresh.clone()),
                };
                t.factors.push(bridge);
            }
        }
    }

    // derivative decorations carry over by the product rule
    for s in &f.cov {
        rep = apply_deriv_slot(rep, s, &mut avoid, &mut counter, false)?;
    }
    for s in &f.h {
        rep = apply_deriv_slot(rep, s, &mut avoid, &mut counter, false)?;
    }
    for s in &f.v {
        rep = apply_deriv_slot(rep, s, &mut avoid, &mut counter, true)?;
    }

    Ok(TensorExpr::from_term(rest).mul(&rep))
}

fn apply_deriv_slot(
    e: TensorExpr,
    slot: &IndexSlot,
    avoid: &mut BTreeSet<Label>,
    counter: &mut usize,
    vertical: bool,
) -> Result<TensorExpr, ExprError> {
    let natural = if vertical { Variance::Up } else { Variance::Down };
    if slot.variance == natural {
        Ok(if vertical { vderiv(&e, &slot.label) } else { hderiv(&e, &slot.label) })
    } else {
        let fresh = fresh_label(avoid, counter);
        avoid.insert(fresh.clone());
        let d = if vertical { vderiv(&e, &fresh) } else { hderiv(&e, &fresh) };
        let bridge = match natural {
            Variance::Down => TensorFactor::metric_inv(slot.label.clone(), fresh),
            Variance::Up => TensorFactor::metric(slot.label.clone(), fresh),
        };
        Ok(d.mul(&TensorExpr::from_factor(bridge)))
    }
}

/// Sets every curvature head to zero: the flat-background specialization.
pub fn substitute_flat(e: &TensorExpr) -> Result<TensorExpr, ExprError> {
    let ids: BTreeSet<String> = e
        .terms
        .iter()
        .flat_map(|t| t.factors.iter())
        .filter_map(|f| match &f.head {
            Head::BundleCurv(id) => Some(id.clone()),
            _ => None,
        })
        .collect();
    let mut out = substitute_head(e, &SubstTarget::Riemann, &TensorExpr::zero())?;
    out = substitute_head(&out, &SubstTarget::Ricci, &TensorExpr::zero())?;
    out = substitute_head(&out, &SubstTarget::RicciScalar, &TensorExpr::zero())?;
    for id in ids {
        out = substitute_head(&out, &SubstTarget::BundleCurv(id), &TensorExpr::zero())?;
    }
    Ok(out)
}

/// Replaces the opaque dimension scalar by a concrete value.
pub fn substitute_dim(e: &TensorExpr, dim: u32) -> Result<TensorExpr, ExprError> {
    let d = TensorExpr::scalar(Coefficient::from_int(dim as i64, 1));
    substitute_head(e, &SubstTarget::Dim, &d)
}

/// Rewrites the cotangent-bundle curvature in terms of Riemann:
/// F[_s ^r _a _b] = Riemann[_s ^r _a _b], the action on covector slots.
pub fn substitute_cotangent_curvature(e: &TensorExpr) -> Result<TensorExpr, ExprError> {
    let rep = TensorExpr::from_factor(TensorFactor::riemann(vec![
        IndexSlot::down("@0"),
        IndexSlot::up("@1"),
        IndexSlot::down("@2"),
        IndexSlot::down("@3"),
    ]));
    substitute_head(e, &SubstTarget::BundleCurv(crate::index::COTANGENT.to_string()), &rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::{GenericHead, SlotSig};

    fn canon(e: &TensorExpr) -> TensorExpr {
        e.canonicalize().expect("canonicalize")
    }

    #[test]
    fn metric_times_inverse_gives_dimension() {
        // g^{ab} g_{ab} = Dim
        let e = TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("a", "b"),
            TensorFactor::metric("a", "b"),
        ]);
        let expect = TensorExpr::from_factor(TensorFactor::new(Head::Dim, Vec::new()));
        assert_eq!(canon(&e), canon(&expect));
    }

    #[test]
    fn metric_chain_collapses_to_delta() {
        // g^{ab} g_{bc} = delta^a_c
        let e = TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("a", "b"),
            TensorFactor::metric("b", "c"),
        ]);
        let expect = TensorExpr::from_factor(TensorFactor::delta("a", "c"));
        assert_eq!(canon(&e), canon(&expect));
    }

    #[test]
    fn momentum_keeps_metric_explicit() {
        // g^{ab} p_a p_b must not raise a momentum slot
        let e = TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("a", "b"),
            TensorFactor::momentum("a"),
            TensorFactor::momentum("b"),
        ]);
        let c = canon(&e);
        assert_eq!(c.terms.len(), 1);
        assert_eq!(c.terms[0].factors.len(), 3);
        assert!(c.terms[0].factors.iter().any(|f| f.head == Head::MetricInv));
    }

    #[test]
    fn riemann_trace_is_ricci() {
        // g^{xt} R_{t b x d} = R_{bd}
        let e = TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("x", "t"),
            TensorFactor::riemann(vec![
                IndexSlot::down("t"),
                IndexSlot::down("b"),
                IndexSlot::down("x"),
                IndexSlot::down("d"),
            ]),
        ]);
        let expect = TensorExpr::from_factor(TensorFactor::ricci("b", "d"));
        assert_eq!(canon(&e), canon(&expect));
    }

    #[test]
    fn riemann_antisymmetric_block_trace_vanishes() {
        // g^{ab} R_{abcd} = 0
        let e = TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("a", "b"),
            TensorFactor::riemann(vec![
                IndexSlot::down("a"),
                IndexSlot::down("b"),
                IndexSlot::down("c"),
                IndexSlot::down("d"),
            ]),
        ]);
        assert!(canon(&e).is_zero());
    }

    #[test]
    fn symmetric_head_against_riemann_block_vanishes() {
        // T^{ab} R_{abcd} = 0 for symmetric T
        let t = Head::Generic(
            GenericHead::position("T", vec![SlotSig::coord(Variance::Up); 2]).with_sym(0, 1, 1),
        );
        let e = TensorExpr::from_factors(vec![
            TensorFactor::new(t, vec![IndexSlot::up("a"), IndexSlot::up("b")]),
            TensorFactor::riemann(vec![
                IndexSlot::down("a"),
                IndexSlot::down("b"),
                IndexSlot::down("c"),
                IndexSlot::down("d"),
            ]),
        ]);
        assert!(canon(&e).is_zero());
    }

    #[test]
    fn contraction_orientation_is_normalized() {
        // R^a{}_m X_a and R_a{}_m X^a canonicalize identically
        let x = Head::Generic(GenericHead::position("X", vec![SlotSig::coord(Variance::Down)]));
        let e1 = TensorExpr::from_factors(vec![
            TensorFactor::new(Head::Ricci, vec![IndexSlot::up("a"), IndexSlot::down("m")]),
            TensorFactor::new(x.clone(), vec![IndexSlot::down("a")]),
        ]);
        let e2 = TensorExpr::from_factors(vec![
            TensorFactor::ricci("a", "m"),
            TensorFactor::new(x, vec![IndexSlot::up("a")]),
        ]);
        assert_eq!(canon(&e1), canon(&e2));
    }

    #[test]
    fn equal_terms_merge_and_cancel() {
        let e = TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("a", "b"),
            TensorFactor::ricci("a", "b"),
        ]);
        let sum = e.add(&TensorExpr::from_factor(TensorFactor::ricci_scalar()).neg());
        // g^{ab} R_{ab} - R = 0
        assert!(canon(&sum).is_zero());
    }

    #[test]
    fn dummy_relabeling_is_invisible() {
        let mk = |d1: &str, d2: &str| {
            TensorExpr::from_factors(vec![
                TensorFactor::metric_inv(d1, d2),
                TensorFactor::momentum(d1),
                TensorFactor::momentum(d2),
            ])
        };
        assert_eq!(canon(&mk("a", "b")), canon(&mk("q", "z")));
    }

    #[test]
    fn mul_freshens_dummies() {
        let psq = TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("a", "b"),
            TensorFactor::momentum("a"),
            TensorFactor::momentum("b"),
        ]);
        let prod = canon(&psq.mul(&psq));
        assert_eq!(prod.terms.len(), 1);
        assert_eq!(prod.terms[0].p_degree(), 4);
    }

    #[test]
    fn signature_mismatch_rejected() {
        let bad = TensorExpr::from_factor(TensorFactor::momentum("m"))
            .add(&TensorExpr::from_factor(TensorFactor::ricci_scalar()));
        assert!(matches!(bad.canonicalize(), Err(ExprError::SignatureMismatch(_))));
    }

    #[test]
    fn vderiv_of_momentum_is_delta() {
        let e = TensorExpr::from_factor(TensorFactor::momentum("m"));
        let d = canon(&vderiv(&e, &"a".to_string()));
        let expect = canon(&TensorExpr::from_factor(TensorFactor::delta("a", "m")));
        assert_eq!(d, expect);
    }

    #[test]
    fn hderiv_product_rule() {
        let x = Head::Generic(GenericHead::phase("X", Vec::new()));
        let e = TensorExpr::from_factors(vec![
            TensorFactor::new(x.clone(), Vec::new()),
            TensorFactor::new(x, Vec::new()),
        ]);
        let d = hderiv(&e, &"a".to_string());
        assert_eq!(d.terms.len(), 2);
    }

    #[test]
    fn symmetrize_kills_antisymmetric_part() {
        let t = Head::Generic(
            GenericHead::position("A", vec![SlotSig::coord(Variance::Down); 2]).with_sym(0, 1, -1),
        );
        let e = TensorExpr::from_factor(TensorFactor::new(
            t,
            vec![IndexSlot::down("a"), IndexSlot::down("b")],
        ));
        let s = symmetrize(&e, &["a".to_string(), "b".to_string()], false).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn raise_then_contract() {
        // raising p's slot keeps the metric explicit
        let p = TensorExpr::from_factor(TensorFactor::momentum("m"));
        let up = raise(&p, &"m".to_string()).unwrap();
        let sig = up.free_signature().unwrap();
        assert_eq!(sig.get("m").unwrap().1, Variance::Up);
    }

    #[test]
    fn flat_substitution_erases_curvature() {
        let e = TensorExpr::from_factors(vec![
            TensorFactor::ricci("a", "b"),
            TensorFactor::metric_inv("a", "b"),
        ]);
        assert!(canon(&substitute_flat(&e).unwrap()).is_zero());
    }

    #[test]
    fn cotangent_curvature_substitutes_to_riemann() {
        use crate::index::COTANGENT;
        let f = TensorFactor::new(
            Head::BundleCurv(COTANGENT.into()),
            vec![
                IndexSlot::down("s"),
                IndexSlot::up("r"),
                IndexSlot::down("a"),
                IndexSlot::down("b"),
            ],
        );
        let e = TensorExpr::from_factor(f);
        let r = canon(&substitute_cotangent_curvature(&e).unwrap());
        assert_eq!(r.terms.len(), 1);
        assert_eq!(r.terms[0].factors[0].head, Head::Riemann);
    }

    #[test]
    fn substitution_applies_derivatives_to_replacement() {
        // X -> R with a covariant slot: X[;a] -> RicciScalar[;a]
        let x = Head::Generic(GenericHead::position("X", Vec::new()));
        let mut f = TensorFactor::new(x, Vec::new());
        f.cov.push(IndexSlot::down("a"));
        let e = TensorExpr::from_factor(f);
        let rep = TensorExpr::from_factor(TensorFactor::ricci_scalar());
        let out = canon(&substitute_head(&e, &SubstTarget::Generic("X".into()), &rep).unwrap());
        assert_eq!(out.terms.len(), 1);
        assert_eq!(out.terms[0].factors[0].head, Head::RicciScalar);
        assert_eq!(out.terms[0].factors[0].cov.len(), 1);
    }
}
