//! The operator catalog against its reference symbols, both routes.

use weyl_core::coeff::{rat, Coefficient, GammaPoly};
use weyl_core::expr::TensorExpr;
use weyl_core::factor::TensorFactor;
use weyl_core::head::Head;
use weyl_core::index::IndexSlot;
use weyl_core::quantize::{
    catalog, dequantize, verify_catalog, verify_catalog_entry, CatalogParams, CATALOG_NAMES,
    YM_BUNDLE,
};
use weyl_core::symbol::GradedSymbol;

fn full_params() -> CatalogParams {
    CatalogParams {
        mass: Some(rat(1, 1)),
        lambda: Some(rat(1, 1)),
        dim: Some(4),
        abelian: Some(false),
    }
}

#[test]
fn every_catalog_entry_passes_all_routes() {
    let params = full_params();
    for name in CATALOG_NAMES {
        let report = verify_catalog(name, &params).unwrap();
        assert!(
            report.all_pass(),
            "{name} failed: {:?}",
            report.routes.iter().find(|r| !r.pass)
        );
        if name == "wave" {
            assert_eq!(report.routes.len(), 2, "wave must be checked along both routes");
        }
    }
}

#[test]
fn tampered_reference_symbol_fails_with_witness() {
    let mut entry = catalog("wave", &CatalogParams::default()).unwrap();
    let flipped = entry
        .symbol
        .component(0)
        .add(&TensorExpr::from_factor(TensorFactor::ricci_scalar()).scale(&Coefficient::from_parts(
            rat(-2, 3),
            0,
            0,
            GammaPoly::gamma(),
        )));
    let mut tampered = GradedSymbol::new(entry.symbol.sig().clone());
    tampered.insert_component(-2, &entry.symbol.component(-2)).unwrap();
    tampered.insert_component(0, &flipped).unwrap();
    entry.symbol = tampered;
    let report = verify_catalog_entry(&entry).unwrap();
    assert!(!report.all_pass());
    let failing = report.routes.iter().find(|r| !r.pass).unwrap();
    let (grade, witness) = failing.witness.as_ref().unwrap();
    assert_eq!(*grade, 0);
    assert!(!witness.is_zero(), "the witness must expose the curvature-block discrepancy");
}

#[test]
fn abelian_yang_mills_collapses_to_one_form_wave() {
    let params = CatalogParams { abelian: Some(true), ..Default::default() };
    let ym = catalog("yang_mills", &params).unwrap();
    let report = verify_catalog_entry(&ym).unwrap();
    assert!(report.all_pass());

    let maxwell = catalog("maxwell", &CatalogParams::default()).unwrap();
    let ym_symbol = dequantize(&ym.operator).unwrap();
    let mx_symbol = dequantize(&maxwell.operator).unwrap();
    let id = TensorExpr::from_factor(TensorFactor::new(
        Head::BundleDelta(YM_BUNDLE.into()),
        vec![
            IndexSlot::bundle_up(YM_BUNDLE, "A"),
            IndexSlot::bundle_down(YM_BUNDLE, "B"),
        ],
    ));
    assert_eq!(ym_symbol.grades(), mx_symbol.grades());
    for g in ym_symbol.grades() {
        let mut expect = mx_symbol.component(g).mul(&id);
        for t in &mut expect.terms {
            t.map_labels(&mut |l| match l.as_str() {
                "al" => "mu".into(),
                "be" => "nu".into(),
                other => other.into(),
            });
        }
        assert_eq!(
            ym_symbol.component(g).canonicalize().unwrap(),
            expect.canonicalize().unwrap(),
            "grade {g} must be the bundle-diagonal one-form block"
        );
    }
}

#[test]
fn dirac_square_symbol_matches_lichnerowicz_principal_part() {
    // gamma^(m gamma^n) = g^{mn} id collapses the squared principal symbol
    // onto the wave symbol; checked at the quadratic grade only, since the
    // full square needs the Clifford commutator beyond the catalog scope.
    let params = CatalogParams { mass: Some(rat(0, 1)), ..Default::default() };
    let entry = catalog("dirac", &params).unwrap();
    let s = dequantize(&entry.operator).unwrap();
    assert_eq!(s.grades(), vec![0]);
    let principal = s.component(0);
    for t in &principal.terms {
        let has_gamma = t.factors.iter().any(|f| matches!(f.head, Head::Gamma { .. }));
        assert!(has_gamma, "massless Dirac symbol is purely the Clifford-linear momentum term");
        assert_eq!(t.p_degree(), 1);
    }
}
