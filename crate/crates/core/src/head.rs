//! Tensor heads: the fixed geometric vocabulary plus user-declared generic
//! symbols.
//!
//! Built-in heads carry their slot signature, slot symmetry group, and
//! derivative behaviour here; generic heads declare theirs. Slot symmetries
//! are stored as generators and closed into the full signed permutation
//! group on demand (groups stay tiny: Riemann's has eight elements).

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::index::{BundleId, IndexKind, Variance, COTANGENT};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SlotSig {
    pub kind: IndexKind,
    pub variance: Variance,
}

impl SlotSig {
    pub fn coord(variance: Variance) -> Self {
        SlotSig { kind: IndexKind::Coord, variance }
    }

    pub fn bundle(variance: Variance, id: impl Into<BundleId>) -> Self {
        SlotSig { kind: IndexKind::Bundle(id.into()), variance }
    }
}

/// Signed transposition generator on base slot positions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SlotSym {
    pub a: usize,
    pub b: usize,
    pub sign: i8,
}

/// User-declared symbol head.
///
/// `phase` symbols depend on the fibre momentum and take horizontal and
/// vertical derivative decorations; position symbols take covariant slots
/// only. `constant` marks covariantly constant heads whose horizontal
/// derivative vanishes.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct GenericHead {
    pub name: String,
    pub sig: Vec<SlotSig>,
    pub phase: bool,
    pub constant: bool,
    pub dagger: bool,
    pub syms: Vec<SlotSym>,
}

impl GenericHead {
    pub fn position(name: impl Into<String>, sig: Vec<SlotSig>) -> Self {
        GenericHead { name: name.into(), sig, phase: false, constant: false, dagger: false, syms: Vec::new() }
    }

    pub fn phase(name: impl Into<String>, sig: Vec<SlotSig>) -> Self {
        GenericHead { name: name.into(), sig, phase: true, constant: false, dagger: false, syms: Vec::new() }
    }

    pub fn with_sym(mut self, a: usize, b: usize, sign: i8) -> Self {
        self.syms.push(SlotSym { a, b, sign });
        self
    }

    pub fn constant(mut self) -> Self {
        self.constant = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Head {
    /// g with two lower coordinate slots.
    Metric,
    /// Inverse metric with two upper coordinate slots.
    MetricInv,
    /// Kronecker delta, canonical slot order [upper, lower].
    Delta,
    /// Fibre momentum p with one lower coordinate slot.
    Momentum,
    /// Curvature R[_a _b _c _d] up to slot variance; [nabla_c, nabla_d] acting
    /// through the first slot pair.
    Riemann,
    /// Ricci contraction on Riemann slots one and three.
    Ricci,
    RicciScalar,
    /// Base dimension as an opaque scalar, produced by delta self-traces.
    Dim,
    /// Bundle curvature F[^^cod __dom _a _b]; for the cotangent realization
    /// the wiring slots are coordinate [_dom ^cod _a _b].
    BundleCurv(BundleId),
    BundleDelta(BundleId),
    /// Clifford generator gamma[^^A __B ^mu], covariantly constant.
    Gamma { bundle: BundleId, dagger: bool },
    Generic(GenericHead),
}

/// How a head responds to the horizontal derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HRule {
    Zero,
    AppendCov,
    AppendH,
}

/// How a head responds to the vertical derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VRule {
    Zero,
    AppendV,
    /// p turns into a Kronecker delta.
    MomentumDelta,
}

impl Head {
    pub fn signature(&self) -> Vec<SlotSig> {
        use Variance::{Down, Up};
        match self {
            Head::Metric => vec![SlotSig::coord(Down), SlotSig::coord(Down)],
            Head::MetricInv => vec![SlotSig::coord(Up), SlotSig::coord(Up)],
            Head::Delta => vec![SlotSig::coord(Up), SlotSig::coord(Down)],
            Head::Momentum => vec![SlotSig::coord(Down)],
            Head::Riemann => vec![SlotSig::coord(Down); 4],
            Head::Ricci => vec![SlotSig::coord(Down), SlotSig::coord(Down)],
            Head::RicciScalar | Head::Dim => Vec::new(),
            Head::BundleCurv(id) if id == COTANGENT => vec![
                SlotSig::coord(Down),
                SlotSig::coord(Up),
                SlotSig::coord(Down),
                SlotSig::coord(Down),
            ],
            Head::BundleCurv(id) => vec![
                SlotSig::bundle(Up, id.clone()),
                SlotSig::bundle(Down, id.clone()),
                SlotSig::coord(Down),
                SlotSig::coord(Down),
            ],
            Head::BundleDelta(id) => vec![SlotSig::bundle(Up, id.clone()), SlotSig::bundle(Down, id.clone())],
            Head::Gamma { bundle, .. } => vec![
                SlotSig::bundle(Up, bundle.clone()),
                SlotSig::bundle(Down, bundle.clone()),
                SlotSig::coord(Up),
            ],
            Head::Generic(g) => g.sig.clone(),
        }
    }

    /// Stable sort and merge key. Distinct heads must map to distinct keys.
    pub fn key(&self) -> String {
        match self {
            Head::Metric => String::from("g"),
            Head::MetricInv => String::from("ginv"),
            Head::Delta => String::from("delta"),
            Head::Momentum => String::from("p"),
            Head::Riemann => String::from("Riemann"),
            Head::Ricci => String::from("Ricci"),
            Head::RicciScalar => String::from("RicciScalar"),
            Head::Dim => String::from("Dim"),
            Head::BundleCurv(id) => format!("F({id})"),
            Head::BundleDelta(id) => format!("id({id})"),
            Head::Gamma { bundle, dagger } => {
                format!("gamma({bundle}){}", if *dagger { "+" } else { "" })
            }
            Head::Generic(g) => {
                let mut s = format!("sym:{}{}", g.name, if g.dagger { "+" } else { "" });
                for sl in &g.sig {
                    s.push(sl.variance.mark());
                    match &sl.kind {
                        IndexKind::Coord => s.push('c'),
                        IndexKind::Bundle(id) => {
                            s.push('B');
                            s.push_str(id);
                        }
                    }
                }
                s
            }
        }
    }

    fn sym_generators(&self) -> Vec<SlotSym> {
        match self {
            Head::Metric | Head::MetricInv | Head::Ricci => vec![SlotSym { a: 0, b: 1, sign: 1 }],
            Head::Riemann => Vec::new(), // full group built in sym_group
            Head::BundleCurv(_) => vec![SlotSym { a: 2, b: 3, sign: -1 }],
            Head::Generic(g) => g.syms.clone(),
            _ => Vec::new(),
        }
    }

    /// Full signed permutation group on base slots. Permutations map new
    /// position i to old position perm[i].
    pub fn sym_group(&self) -> Vec<(Vec<usize>, i8)> {
        let n = self.signature().len();
        let identity: Vec<usize> = (0..n).collect();
        let mut gens: Vec<(Vec<usize>, i8)> = Vec::new();
        for s in self.sym_generators() {
            let mut p = identity.clone();
            p.swap(s.a, s.b);
            gens.push((p, s.sign));
        }
        if let Head::Riemann = self {
            gens.push((vec![1, 0, 2, 3], -1));
            gens.push((vec![0, 1, 3, 2], -1));
            gens.push((vec![2, 3, 0, 1], 1));
        }
        let mut group: Vec<(Vec<usize>, i8)> = vec![(identity, 1)];
        let mut frontier = group.clone();
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for (p, sp) in &frontier {
                for (q, sq) in &gens {
                    // compose: first apply p, then q
                    let comp: Vec<usize> = q.iter().map(|&i| p[i]).collect();
                    let sign = sp * sq;
                    if !group.iter().any(|(r, _)| r == &comp) {
                        group.push((comp.clone(), sign));
                        next.push((comp, sign));
                    }
                }
            }
            frontier = next;
            debug_assert!(group.len() <= 48, "symmetry group unexpectedly large");
        }
        group.sort();
        group
    }

    pub fn h_rule(&self) -> HRule {
        match self {
            Head::Metric
            | Head::MetricInv
            | Head::Delta
            | Head::Momentum
            | Head::Dim
            | Head::BundleDelta(_)
            | Head::Gamma { .. } => HRule::Zero,
            Head::Riemann | Head::Ricci | Head::RicciScalar | Head::BundleCurv(_) => HRule::AppendCov,
            Head::Generic(g) => {
                if g.constant {
                    HRule::Zero
                } else if g.phase {
                    HRule::AppendH
                } else {
                    HRule::AppendCov
                }
            }
        }
    }

    pub fn v_rule(&self) -> VRule {
        match self {
            Head::Momentum => VRule::MomentumDelta,
            Head::Generic(g) if g.phase => VRule::AppendV,
            _ => VRule::Zero,
        }
    }

    /// Whether a coordinate base slot at `pos` may change variance under
    /// metric absorption and contraction-orientation flips.
    pub fn slot_flexible(&self, _pos: usize) -> bool {
        match self {
            Head::Momentum => false,
            Head::Metric | Head::MetricInv | Head::Delta => false,
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn riemann_group_has_eight_elements() {
        let g = Head::Riemann.sym_group();
        assert_eq!(g.len(), 8);
        // pair swap is even, single-block swaps are odd
        assert!(g.contains(&(vec![2, 3, 0, 1], 1)));
        assert!(g.contains(&(vec![1, 0, 2, 3], -1)));
        assert!(g.contains(&(vec![1, 0, 3, 2], 1)));
    }

    #[test]
    fn generic_antisymmetric_pair_closes() {
        let h = Head::Generic(
            GenericHead::position("T", vec![SlotSig::coord(Variance::Down); 2]).with_sym(0, 1, -1),
        );
        let g = h.sym_group();
        assert_eq!(g.len(), 2);
        assert!(g.contains(&(vec![1, 0], -1)));
    }

    #[test]
    fn cotangent_curvature_uses_coordinate_wiring() {
        let sig = Head::BundleCurv(COTANGENT.into()).signature();
        assert_eq!(sig[0], SlotSig::coord(Variance::Down));
        assert_eq!(sig[1], SlotSig::coord(Variance::Up));
    }
}
