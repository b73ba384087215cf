//! Equality modulo differential curvature identities.
//!
//! Structural canonicalization cannot see the Bianchi family, so expressions
//! are compared by exact linear algebra: slice an expression by imaginary
//! power, eps power, and gamma degree into rational vectors over canonical
//! monomials, generate identity instances from the monomials that occur
//! (closing the monomial set under the generators), and Gauss-eliminate over
//! the rationals. The reduction returns a canonical remainder, which doubles
//! as the witness when two expressions differ.
//!
//! Generator families:
//! - first Bianchi: cyclic sum over Riemann slots two, three, four,
//! - second Bianchi: cyclic sum over Riemann slots three, four and the
//!   innermost covariant slot,
//! - bundle Bianchi: the same cyclic sum on bundle curvature,
//! - contracted second Bianchi: divergence rewrites for Ricci-with-derivative
//!   and scalar-curvature-with-derivative monomials.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Zero;

use crate::coeff::{Coefficient, GammaPoly, Rational};
use crate::expr::{fresh_label, ExprError, TensorExpr, Term};
use crate::factor::TensorFactor;
use crate::head::Head;
use crate::index::{IndexSlot, Label};

#[derive(Clone, Debug)]
pub struct IdentityOptions {
    pub first_bianchi: bool,
    pub second_bianchi: bool,
    pub bundle_bianchi: bool,
    pub contracted: bool,
    pub closure_rounds: u32,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        IdentityOptions {
            first_bianchi: true,
            second_bianchi: true,
            bundle_bianchi: true,
            contracted: true,
            closure_rounds: 3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Equivalence {
    pub equal: bool,
    /// Canonical remainder of the difference after reduction.
    pub witness: TensorExpr,
}

fn monomial_key(factors: &[TensorFactor]) -> String {
    let mut out = String::new();
    for f in factors {
        out.push_str(&f.render(&mut |l: &Label| l.clone()));
        out.push('*');
    }
    out
}

fn replace_at(factors: &[TensorFactor], i: usize, g: TensorFactor) -> TensorExpr {
    let mut fs = factors.to_vec();
    fs[i] = g;
    TensorExpr::from_term(Term { coeff: Coefficient::one(), factors: fs })
}

/// Identity instances touching factor `i` of the monomial.
fn instances_for(factors: &[TensorFactor], opts: &IdentityOptions) -> Vec<TensorExpr> {
    let mut out = Vec::new();
    let all_labels: BTreeSet<Label> =
        Term { coeff: Coefficient::one(), factors: factors.to_vec() }.labels();
    for (i, f) in factors.iter().enumerate() {
        match &f.head {
            Head::Riemann => {
                if opts.first_bianchi {
                    let mut e = TensorExpr::zero();
                    for arr in [[0usize, 1, 2, 3], [0, 2, 3, 1], [0, 3, 1, 2]] {
                        let mut g = f.clone();
                        g.slots = arr.iter().map(|&j| f.slots[j].clone()).collect();
                        e = e.add(&replace_at(factors, i, g));
                    }
                    out.push(e);
                }
                if opts.second_bianchi && !f.cov.is_empty() {
                    let s2 = f.slots[2].clone();
                    let s3 = f.slots[3].clone();
                    let c = f.cov[0].clone();
                    let mut e = TensorExpr::zero();
                    for (a, b, d) in [
                        (s2.clone(), s3.clone(), c.clone()),
                        (s3.clone(), c.clone(), s2.clone()),
                        (c, s2, s3),
                    ] {
                        let mut g = f.clone();
                        g.slots[2] = a;
                        g.slots[3] = b;
                        g.cov[0] = d;
                        e = e.add(&replace_at(factors, i, g));
                    }
                    out.push(e);
                }
            }
            Head::BundleCurv(_) if opts.bundle_bianchi && !f.cov.is_empty() => {
                let s2 = f.slots[2].clone();
                let s3 = f.slots[3].clone();
                let c = f.cov[0].clone();
                let mut e = TensorExpr::zero();
                for (a, b, d) in [
                    (s2.clone(), s3.clone(), c.clone()),
                    (s3.clone(), c.clone(), s2.clone()),
                    (c, s2, s3),
                ] {
                    let mut g = f.clone();
                    g.slots[2] = a;
                    g.slots[3] = b;
                    g.cov[0] = d;
                    e = e.add(&replace_at(factors, i, g));
                }
                out.push(e);
            }
            Head::Ricci if opts.contracted && !f.cov.is_empty() => {
                // nabla_c R_{bd} - nabla_d R_{bc} - nabla^x R_{xbcd} = 0
                let b = f.slots[0].clone();
                let d = f.slots[1].clone();
                let c = f.cov[0].clone();
                let mut counter = 0usize;
                let x = fresh_label(&all_labels, &mut counter);
                let t1 = replace_at(factors, i, f.clone());
                let mut g2 = f.clone();
                g2.slots[1] = c.clone();
                g2.cov[0] = d.clone();
                let t2 = replace_at(factors, i, g2);
                let mut g3 = TensorFactor::riemann(alloc::vec![
                    IndexSlot::up(x.clone()),
                    b,
                    c,
                    d,
                ]);
                g3.cov = f.cov.clone();
                g3.cov[0] = IndexSlot::down(x);
                let t3 = replace_at(factors, i, g3);
                out.push(t1.sub(&t2).sub(&t3));
            }
            Head::RicciScalar if opts.contracted && !f.cov.is_empty() => {
                // nabla_c R - 2 nabla^x R_{xc} = 0
                let c = f.cov[0].clone();
                let mut counter = 0usize;
                let x = fresh_label(&all_labels, &mut counter);
                let t1 = replace_at(factors, i, f.clone());
                let mut g2 = TensorFactor::new(
                    Head::Ricci,
                    alloc::vec![IndexSlot::up(x.clone()), c],
                );
                g2.cov = f.cov.clone();
                g2.cov[0] = IndexSlot::down(x);
                let t2 = replace_at(factors, i, g2);
                out.push(t1.sub(&t2.scale_rational(&Rational::from_integer(2.into()))));
            }
            _ => {}
        }
    }
    out
}

type Vector = BTreeMap<String, Rational>;

fn expr_to_rows(
    e: &TensorExpr,
    registry: &mut BTreeMap<String, Vec<TensorFactor>>,
) -> BTreeMap<(u8, i32, usize), Vector> {
    let mut slices: BTreeMap<(u8, i32, usize), Vector> = BTreeMap::new();
    for t in &e.terms {
        let key = monomial_key(&t.factors);
        registry.entry(key.clone()).or_insert_with(|| t.factors.clone());
        for (deg, q) in t.coeff.gamma_monomials() {
            let slot = slices
                .entry((t.coeff.i_power(), t.coeff.eps_power(), deg))
                .or_default()
                .entry(key.clone())
                .or_insert_with(Rational::zero);
            *slot += q;
        }
    }
    slices
}

fn sub_scaled(v: &mut Vector, row: &Vector, c: &Rational) {
    for (k, rv) in row {
        let entry = v.entry(k.clone()).or_insert_with(Rational::zero);
        *entry -= c * rv;
        if entry.is_zero() {
            v.remove(k);
        }
    }
}

fn reduce_by_pivots(v: &mut Vector, pivots: &[(String, Vector)]) {
    for (pk, row) in pivots {
        if let Some(c) = v.get(pk).cloned() {
            sub_scaled(v, row, &c);
        }
    }
}

/// Reduces an expression to a canonical remainder modulo the identity span.
pub fn reduce_mod_identities(
    e: &TensorExpr,
    opts: &IdentityOptions,
) -> Result<TensorExpr, ExprError> {
    let canon = e.canonicalize()?;
    if canon.is_zero() {
        return Ok(canon);
    }
    let mut registry: BTreeMap<String, Vec<TensorFactor>> = BTreeMap::new();
    let slices = expr_to_rows(&canon, &mut registry);

    // close the monomial set under identity generation
    let mut rows: Vec<(String, Vector)> = Vec::new();
    let mut seen_rows: BTreeSet<String> = BTreeSet::new();
    let mut pending: Vec<String> = registry.keys().cloned().collect();
    let mut generated_from: BTreeSet<String> = BTreeSet::new();
    for _ in 0..opts.closure_rounds {
        if pending.is_empty() {
            break;
        }
        let batch = core::mem::take(&mut pending);
        for key in batch {
            if !generated_from.insert(key.clone()) {
                continue;
            }
            let factors = registry.get(&key).expect("registered monomial").clone();
            for inst in instances_for(&factors, opts) {
                let ic = inst.canonicalize()?;
                if ic.is_zero() {
                    continue;
                }
                let mut vec: Vector = BTreeMap::new();
                for t in &ic.terms {
                    let mk = monomial_key(&t.factors);
                    if registry.insert(mk.clone(), t.factors.clone()).is_none() {
                        pending.push(mk.clone());
                    }
                    let monos = t.coeff.gamma_monomials();
                    debug_assert!(t.coeff.i_power() == 0 && t.coeff.eps_power() == 0);
                    debug_assert!(monos.len() == 1 && monos[0].0 == 0);
                    let entry = vec.entry(mk).or_insert_with(Rational::zero);
                    *entry += monos[0].1.clone();
                }
                if vec.is_empty() {
                    continue;
                }
                let fingerprint = {
                    let mut s = String::new();
                    for (k, q) in &vec {
                        s.push_str(k);
                        s.push('#');
                        s.push_str(&alloc::format!("{q}"));
                        s.push('#');
                    }
                    s
                };
                if seen_rows.insert(fingerprint.clone()) {
                    rows.push((fingerprint, vec));
                }
            }
        }
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));

    // exact Gaussian elimination
    let mut pivots: Vec<(String, Vector)> = Vec::new();
    for (_, mut row) in rows {
        reduce_by_pivots(&mut row, &pivots);
        if row.is_empty() {
            continue;
        }
        let pk = row.keys().next().expect("nonempty row").clone();
        let lead = row.get(&pk).expect("pivot entry").clone();
        for v in row.values_mut() {
            *v /= &lead;
        }
        pivots.push((pk, row));
    }

    // reduce each slice and reassemble
    let mut remainder = TensorExpr::zero();
    for ((i_pow, eps, deg), mut vec) in slices {
        reduce_by_pivots(&mut vec, &pivots);
        for (key, q) in vec {
            let factors = registry.get(&key).expect("registered monomial").clone();
            let coeff = Coefficient::from_parts(q, i_pow as u32, eps, GammaPoly::gamma_pow(deg as u32));
            remainder = remainder.add(&TensorExpr::from_term(Term { coeff, factors }));
        }
    }
    remainder.canonicalize()
}

/// Compares two expressions modulo the identity span.
pub fn equal_mod_identities(
    a: &TensorExpr,
    b: &TensorExpr,
    opts: &IdentityOptions,
) -> Result<Equivalence, ExprError> {
    let diff = a.sub(b);
    let witness = reduce_mod_identities(&diff, opts)?;
    Ok(Equivalence { equal: witness.is_zero(), witness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::Variance;

    fn opts() -> IdentityOptions {
        IdentityOptions::default()
    }

    fn riemann(l: [&str; 4]) -> TensorExpr {
        TensorExpr::from_factor(TensorFactor::riemann(alloc::vec![
            IndexSlot::down(l[0]),
            IndexSlot::down(l[1]),
            IndexSlot::down(l[2]),
            IndexSlot::down(l[3]),
        ]))
    }

    #[test]
    fn first_bianchi_reduces_to_zero() {
        let e = riemann(["a", "b", "c", "d"])
            .add(&riemann(["a", "c", "d", "b"]))
            .add(&riemann(["a", "d", "b", "c"]));
        // not structurally zero, but zero modulo identities
        assert!(!e.canonicalize().unwrap().is_zero());
        let r = reduce_mod_identities(&e, &opts()).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn second_bianchi_reduces_to_zero() {
        let mk = |c: &str, d: &str, e: &str| {
            let mut f = TensorFactor::riemann(alloc::vec![
                IndexSlot::down("a"),
                IndexSlot::down("b"),
                IndexSlot::down(c),
                IndexSlot::down(d),
            ]);
            f.cov.push(IndexSlot::down(e));
            TensorExpr::from_factor(f)
        };
        let e = mk("c", "d", "e").add(&mk("d", "e", "c")).add(&mk("e", "c", "d"));
        let r = reduce_mod_identities(&e, &opts()).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn contracted_bianchi_relates_divergences() {
        // nabla^x R_{xb} = (1/2) nabla_b R
        let mut div_ric = TensorFactor::ricci("x", "b");
        div_ric.slots[0].variance = Variance::Up;
        div_ric.cov.push(IndexSlot::down("x"));
        let lhs = TensorExpr::from_factor(div_ric);
        let mut half_dr = TensorFactor::ricci_scalar();
        half_dr.cov.push(IndexSlot::down("b"));
        let rhs = TensorExpr::from_factor(half_dr).scale_rational(&crate::coeff::rat(1, 2));
        let eqv = equal_mod_identities(&lhs, &rhs, &opts()).unwrap();
        assert!(eqv.equal, "witness: {:?}", eqv.witness);
    }

    #[test]
    fn unequal_expressions_produce_witness() {
        let lhs = TensorExpr::from_factor(TensorFactor::ricci("a", "b"));
        let rhs = TensorExpr::from_factors(alloc::vec![
            TensorFactor::ricci_scalar(),
            TensorFactor::metric("a", "b"),
        ]);
        let eqv = equal_mod_identities(&lhs, &rhs, &opts()).unwrap();
        assert!(!eqv.equal);
        assert!(!eqv.witness.is_zero());
    }

    #[test]
    fn riemann_divergence_rewrites_into_ricci_gradients() {
        // nabla^x R_{xacd} = nabla_c R_{ad} - nabla_d R_{ac}
        let mut div_riem = TensorFactor::riemann(alloc::vec![
            IndexSlot::up("x"),
            IndexSlot::down("a"),
            IndexSlot::down("c"),
            IndexSlot::down("d"),
        ]);
        div_riem.cov.push(IndexSlot::down("x"));
        let lhs = TensorExpr::from_factor(div_riem);
        let mut r1 = TensorFactor::ricci("a", "d");
        r1.cov.push(IndexSlot::down("c"));
        let mut r2 = TensorFactor::ricci("a", "c");
        r2.cov.push(IndexSlot::down("d"));
        let rhs = TensorExpr::from_factor(r1).sub(&TensorExpr::from_factor(r2));
        let eqv = equal_mod_identities(&lhs, &rhs, &opts()).unwrap();
        assert!(eqv.equal, "witness: {:?}", eqv.witness);
    }
}
