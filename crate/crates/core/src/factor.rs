//! A single tensor factor: a head, its base slots, and derivative
//! decorations.
//!
//! Decoration lists are ordered first-applied-first: `cov` holds covariant
//! slots on position tensors, `h` and `v` hold horizontal and vertical
//! slots on phase symbols. Horizontal slots are always lower coordinate,
//! vertical slots always upper coordinate; only `normal_order_h` may
//! reorder `h`, while `v` slots commute exactly.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::ExprError;
use crate::head::{HRule, Head, VRule};
use crate::index::{IndexKind, IndexSlot, Label, Variance};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct TensorFactor {
    pub head: Head,
    pub slots: Vec<IndexSlot>,
    pub cov: Vec<IndexSlot>,
    pub h: Vec<IndexSlot>,
    pub v: Vec<IndexSlot>,
}

/// Which list a slot lives in; used by absorption to address slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotPos {
    Base(usize),
    Cov(usize),
    H(usize),
    V(usize),
}

impl TensorFactor {
    pub fn new(head: Head, slots: Vec<IndexSlot>) -> Self {
        TensorFactor { head, slots, cov: Vec::new(), h: Vec::new(), v: Vec::new() }
    }

    pub fn metric(a: impl Into<Label>, b: impl Into<Label>) -> Self {
        TensorFactor::new(Head::Metric, alloc::vec![IndexSlot::down(a), IndexSlot::down(b)])
    }

    pub fn metric_inv(a: impl Into<Label>, b: impl Into<Label>) -> Self {
        TensorFactor::new(Head::MetricInv, alloc::vec![IndexSlot::up(a), IndexSlot::up(b)])
    }

    pub fn delta(up: impl Into<Label>, down: impl Into<Label>) -> Self {
        TensorFactor::new(Head::Delta, alloc::vec![IndexSlot::up(up), IndexSlot::down(down)])
    }

    pub fn momentum(a: impl Into<Label>) -> Self {
        TensorFactor::new(Head::Momentum, alloc::vec![IndexSlot::down(a)])
    }

    pub fn ricci(a: impl Into<Label>, b: impl Into<Label>) -> Self {
        TensorFactor::new(Head::Ricci, alloc::vec![IndexSlot::down(a), IndexSlot::down(b)])
    }

    pub fn ricci_scalar() -> Self {
        TensorFactor::new(Head::RicciScalar, Vec::new())
    }

    pub fn riemann(slots: Vec<IndexSlot>) -> Self {
        TensorFactor::new(Head::Riemann, slots)
    }

    pub fn validate(&self) -> Result<(), ExprError> {
        let sig = self.head.signature();
        if sig.len() != self.slots.len() {
            return Err(ExprError::Arity {
                head: self.head.key(),
                expected: sig.len(),
                got: self.slots.len(),
            });
        }
        for (slot, want) in self.slots.iter().zip(sig.iter()) {
            if slot.kind != want.kind {
                return Err(ExprError::MalformedIndex(format!(
                    "slot {} on {} has wrong kind",
                    slot.label,
                    self.head.key()
                )));
            }
            // p is the only coordinate head with a pinned variance; metric
            // family variances are handled by absorption normalization.
            let variance_fixed = match slot.kind {
                IndexKind::Bundle(_) => true,
                IndexKind::Coord => matches!(self.head, Head::Momentum),
            };
            if variance_fixed && slot.variance != want.variance {
                return Err(ExprError::MalformedIndex(format!(
                    "slot {} on {} must be {}",
                    slot.label,
                    self.head.key(),
                    want.variance.mark()
                )));
            }
        }
        let h_ok = matches!(self.head.h_rule(), HRule::AppendH);
        let cov_ok = matches!(self.head.h_rule(), HRule::AppendCov);
        let v_ok = matches!(self.head.v_rule(), VRule::AppendV);
        if !self.cov.is_empty() && !cov_ok {
            return Err(ExprError::MalformedIndex(format!(
                "{} takes no covariant derivative slots",
                self.head.key()
            )));
        }
        if (!self.h.is_empty() && !h_ok) || (!self.v.is_empty() && !v_ok) {
            return Err(ExprError::MalformedIndex(format!(
                "{} takes no phase derivative slots",
                self.head.key()
            )));
        }
        for s in &self.cov {
            if !s.is_coord() {
                return Err(ExprError::MalformedIndex(String::from("covariant slot must be coordinate")));
            }
        }
        for s in &self.h {
            if !s.is_coord() || s.variance != Variance::Down {
                return Err(ExprError::MalformedIndex(String::from("horizontal slot must be lower coordinate")));
            }
        }
        for s in &self.v {
            if !s.is_coord() || s.variance != Variance::Up {
                return Err(ExprError::MalformedIndex(String::from("vertical slot must be upper coordinate")));
            }
        }
        Ok(())
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len() + self.cov.len() + self.h.len() + self.v.len()
    }

    pub fn slot_at(&self, pos: SlotPos) -> &IndexSlot {
        match pos {
            SlotPos::Base(i) => &self.slots[i],
            SlotPos::Cov(i) => &self.cov[i],
            SlotPos::H(i) => &self.h[i],
            SlotPos::V(i) => &self.v[i],
        }
    }

    pub fn slot_at_mut(&mut self, pos: SlotPos) -> &mut IndexSlot {
        match pos {
            SlotPos::Base(i) => &mut self.slots[i],
            SlotPos::Cov(i) => &mut self.cov[i],
            SlotPos::H(i) => &mut self.h[i],
            SlotPos::V(i) => &mut self.v[i],
        }
    }

    pub fn positions(&self) -> Vec<SlotPos> {
        let mut out = Vec::with_capacity(self.slot_count());
        out.extend((0..self.slots.len()).map(SlotPos::Base));
        out.extend((0..self.cov.len()).map(SlotPos::Cov));
        out.extend((0..self.h.len()).map(SlotPos::H));
        out.extend((0..self.v.len()).map(SlotPos::V));
        out
    }

    pub fn for_each_slot(&self, mut f: impl FnMut(&IndexSlot)) {
        self.slots.iter().chain(&self.cov).chain(&self.h).chain(&self.v).for_each(|s| f(s));
    }

    pub fn map_labels(&mut self, f: &mut impl FnMut(&Label) -> Label) {
        for s in self.slots.iter_mut().chain(&mut self.cov).chain(&mut self.h).chain(&mut self.v) {
            s.label = f(&s.label);
        }
    }

    /// True when the slot may be raised or lowered by metric absorption.
    pub fn variance_flexible(&self, pos: SlotPos) -> bool {
        match pos {
            SlotPos::Base(i) => self.slot_at(pos).is_coord() && self.head.slot_flexible(i),
            SlotPos::Cov(_) => true,
            SlotPos::H(_) | SlotPos::V(_) => false,
        }
    }

    /// Render with labels passed through `rename`; the canonical term string
    /// is built from these.
    pub fn render(&self, rename: &mut impl FnMut(&Label) -> String) -> String {
        let mut s = self.head.key();
        s.push('[');
        let mut write_slot = |s: &mut String, sl: &IndexSlot| {
            s.push(sl.variance.mark());
            if let IndexKind::Bundle(id) = &sl.kind {
                s.push('{');
                s.push_str(id);
                s.push('}');
            }
            s.push_str(&rename(&sl.label));
            s.push(' ');
        };
        for sl in &self.slots {
            write_slot(&mut s, sl);
        }
        if !self.cov.is_empty() {
            s.push(';');
            for sl in &self.cov {
                write_slot(&mut s, sl);
            }
        }
        if !self.h.is_empty() {
            s.push_str("|h");
            for sl in &self.h {
                write_slot(&mut s, sl);
            }
        }
        if !self.v.is_empty() {
            s.push_str("|v");
            for sl in &self.v {
                write_slot(&mut s, sl);
            }
        }
        s.push(']');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentum_slot_must_be_lower() {
        let bad = TensorFactor::new(Head::Momentum, alloc::vec![IndexSlot::up("m")]);
        assert!(bad.validate().is_err());
        assert!(TensorFactor::momentum("m").validate().is_ok());
    }

    #[test]
    fn momentum_takes_no_derivative_slots() {
        let mut p = TensorFactor::momentum("m");
        p.v.push(IndexSlot::up("a"));
        assert!(p.validate().is_err());
    }

    #[test]
    fn ricci_arity_checked() {
        let bad = TensorFactor::new(Head::Ricci, alloc::vec![IndexSlot::down("a")]);
        assert!(matches!(bad.validate(), Err(ExprError::Arity { .. })));
    }
}
