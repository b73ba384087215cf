//! Index slots: labelled coordinate or bundle indices with a variance.
//!
//! Labels are plain strings. Canonicalization renames dummy labels to "!00",
//! "!01", ... in structural scan order (zero-padded so that string order
//! matches scan order); operation-local fresh dummies use a
//! "~" prefix so they can never collide with user labels.

use alloc::string::String;

pub type Label = String;
pub type BundleId = String;

/// Bundle id for the cotangent realization of a symbol's bundle leg. Symbols
/// wired through T*M or its antisymmetric square carry coordinate wiring
/// slots, and middle-curvature insertions for them use this id.
pub const COTANGENT: &str = "coT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variance {
    Up,
    Down,
}

impl Variance {
    pub fn flipped(self) -> Variance {
        match self {
            Variance::Up => Variance::Down,
            Variance::Down => Variance::Up,
        }
    }

    pub fn mark(self) -> char {
        match self {
            Variance::Up => '^',
            Variance::Down => '_',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum IndexKind {
    Coord,
    Bundle(BundleId),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct IndexSlot {
    pub variance: Variance,
    pub kind: IndexKind,
    pub label: Label,
}

impl IndexSlot {
    pub fn coord(variance: Variance, label: impl Into<Label>) -> Self {
        IndexSlot { variance, kind: IndexKind::Coord, label: label.into() }
    }

    pub fn up(label: impl Into<Label>) -> Self {
        IndexSlot::coord(Variance::Up, label)
    }

    pub fn down(label: impl Into<Label>) -> Self {
        IndexSlot::coord(Variance::Down, label)
    }

    pub fn bundle(variance: Variance, id: impl Into<BundleId>, label: impl Into<Label>) -> Self {
        IndexSlot { variance, kind: IndexKind::Bundle(id.into()), label: label.into() }
    }

    pub fn bundle_up(id: impl Into<BundleId>, label: impl Into<Label>) -> Self {
        IndexSlot::bundle(Variance::Up, id, label)
    }

    pub fn bundle_down(id: impl Into<BundleId>, label: impl Into<Label>) -> Self {
        IndexSlot::bundle(Variance::Down, id, label)
    }

    pub fn is_coord(&self) -> bool {
        self.kind == IndexKind::Coord
    }
}
