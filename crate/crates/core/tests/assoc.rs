//! Associativity of the truncated composition, order by order. For
//! scalar symbols the expansion table is order-consistent, so the
//! regrouped triple products must cancel at every retained order; each
//! check reduces the difference over the curvature-identity span and
//! prints the surviving combination when one exists.
//!
//! For bundle-valued symbols the table carries only the shared middle
//! bundle's curvature, while regrouping shuffles which bundle is in the
//! middle. The leftover is not arbitrary: at second order it is exactly
//! the pair of end commutators
//!   (1/8)[F, u] w^alpha y^beta + (1/8) u^alpha w^beta [F, y]
//! (curvature slots contracted with the vertical derivatives of the two
//! factors that stayed adjacent). The bundle test pins that combination
//! instead of asserting zero.

use weyl_core::coeff::Coefficient;
use weyl_core::expr::TensorExpr;
use weyl_core::factor::TensorFactor;
use weyl_core::head::{GenericHead, Head, SlotSig};
use weyl_core::identities::{reduce_mod_identities, IdentityOptions};
use weyl_core::index::{IndexSlot, Variance};
use weyl_core::star::{star, StarOptions};
use weyl_core::symbol::{normal_order_h, GradedSymbol, Signature};

fn scalar_phase(name: &str) -> GradedSymbol {
    let e = TensorExpr::from_factor(TensorFactor::new(
        Head::Generic(GenericHead::phase(name, vec![])),
        vec![],
    ));
    GradedSymbol::from_expr(Signature::scalar(), &e).unwrap()
}

fn endo_phase(name: &str) -> GradedSymbol {
    let e = TensorExpr::from_factor(TensorFactor::new(
        Head::Generic(GenericHead::phase(
            name,
            vec![
                SlotSig::bundle(Variance::Up, "E"),
                SlotSig::bundle(Variance::Down, "E"),
            ],
        )),
        vec![IndexSlot::bundle_up("E", "A"), IndexSlot::bundle_down("E", "B")],
    ));
    GradedSymbol::from_expr(Signature::endo("E", "A", "B"), &e).unwrap()
}

fn regrouping_residuals(a: &GradedSymbol, b: &GradedSymbol, c: &GradedSymbol) -> Vec<TensorExpr> {
    let opts = StarOptions::default();
    let lhs = star(&star(a, b, &opts).unwrap(), c, &opts).unwrap();
    let rhs = star(a, &star(b, c, &opts).unwrap(), &opts).unwrap();
    let id_opts = IdentityOptions::default();
    (0..=3i32)
        .map(|g| {
            let diff = lhs.component(g).sub(&rhs.component(g));
            let ordered = normal_order_h(&diff, false).unwrap();
            reduce_mod_identities(&ordered, &id_opts).unwrap()
        })
        .collect()
}

#[test]
fn scalar_triple_product_associates_through_second_order() {
    let residuals =
        regrouping_residuals(&scalar_phase("u"), &scalar_phase("w"), &scalar_phase("y"));
    for (g, r) in residuals.iter().enumerate().take(3) {
        assert!(r.is_zero(), "order {g} regrouping residual: {r:?}");
    }
}

#[test]
fn scalar_triple_product_associates_at_third_order() {
    let residuals =
        regrouping_residuals(&scalar_phase("u"), &scalar_phase("w"), &scalar_phase("y"));
    let r = &residuals[3];
    assert!(r.is_zero(), "third-order regrouping residual survives identity reduction: {r:?}");
}

fn endo_factor(name: &str, up: &str, down: &str, v: Option<&str>) -> TensorFactor {
    let mut f = TensorFactor::new(
        Head::Generic(GenericHead::phase(
            name,
            vec![
                SlotSig::bundle(Variance::Up, "E"),
                SlotSig::bundle(Variance::Down, "E"),
            ],
        )),
        vec![IndexSlot::bundle_up("E", up), IndexSlot::bundle_down("E", down)],
    );
    if let Some(l) = v {
        f.v.push(IndexSlot::up(l));
    }
    f
}

fn curv(up: &str, down: &str, c1: &str, c2: &str) -> TensorFactor {
    TensorFactor::new(
        Head::BundleCurv("E".into()),
        vec![
            IndexSlot::bundle_up("E", up),
            IndexSlot::bundle_down("E", down),
            IndexSlot::down(c1),
            IndexSlot::down(c2),
        ],
    )
}

/// (1/8)[F, u] w^c y^d + (1/8) u^c w^d [F, y], chain wired A -> B.
fn end_commutator_combination() -> TensorExpr {
    let terms = [
        (
            1i64,
            vec![
                curv("A", "m", "c", "d"),
                endo_factor("u", "m", "n", None),
                endo_factor("w", "n", "r", Some("c")),
                endo_factor("y", "r", "B", Some("d")),
            ],
        ),
        (
            -1,
            vec![
                endo_factor("u", "A", "m", None),
                curv("m", "n", "c", "d"),
                endo_factor("w", "n", "r", Some("c")),
                endo_factor("y", "r", "B", Some("d")),
            ],
        ),
        (
            1,
            vec![
                endo_factor("u", "A", "m", Some("c")),
                endo_factor("w", "m", "n", Some("d")),
                curv("n", "r", "c", "d"),
                endo_factor("y", "r", "B", None),
            ],
        ),
        (
            -1,
            vec![
                endo_factor("u", "A", "m", Some("c")),
                endo_factor("w", "m", "n", Some("d")),
                endo_factor("y", "n", "r", None),
                curv("r", "B", "c", "d"),
            ],
        ),
    ];
    let mut out = TensorExpr::zero();
    for (sign, factors) in terms {
        let t = TensorExpr::from_factors(factors).scale(&Coefficient::from_int(sign, 8));
        out = out.add(&t);
    }
    out
}

#[test]
fn bundle_triple_regroups_to_end_commutators_at_second_order() {
    let residuals = regrouping_residuals(&endo_phase("u"), &endo_phase("w"), &endo_phase("y"));
    for (g, r) in residuals.iter().enumerate().take(2) {
        assert!(r.is_zero(), "order {g} regrouping residual: {r:?}");
    }
    let diff = residuals[2].sub(&end_commutator_combination());
    let ordered = normal_order_h(&diff, false).unwrap();
    let reduced = reduce_mod_identities(&ordered, &IdentityOptions::default()).unwrap();
    assert!(
        reduced.is_zero(),
        "second-order bundle residual differs from the end commutators: {reduced:?}"
    );
}
