//! Structural laws of the truncated composition: the adjoint identity,
//! self-adjointness closure, momentum-degree bounds, the flat reduction
//! against an independent expander, and composition of re-quantization
//! shifts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weyl_core::coeff::{rat, Coefficient, GammaPoly};
use weyl_core::expr::{hderiv, vderiv, TensorExpr};
use weyl_core::factor::TensorFactor;
use weyl_core::head::{GenericHead, Head, SlotSig};
use weyl_core::identities::{reduce_mod_identities, IdentityOptions};
use weyl_core::index::{IndexSlot, Label, Variance};
use weyl_core::quantize::swap_labels;
use weyl_core::star::{moyal_bracket, star, star_order, tau_shift, StarOptions};
use weyl_core::symbol::{adjoint_expr, normal_order_h, GradedSymbol, Signature};

const BUNDLE: &str = "E";

fn endo_sig() -> Signature {
    Signature::endo(BUNDLE, "A", "B")
}

fn endo_phase(name: &str) -> TensorExpr {
    TensorExpr::from_factor(TensorFactor::new(
        Head::Generic(GenericHead::phase(
            name,
            vec![
                SlotSig::bundle(Variance::Up, BUNDLE),
                SlotSig::bundle(Variance::Down, BUNDLE),
            ],
        )),
        vec![IndexSlot::bundle_up(BUNDLE, "A"), IndexSlot::bundle_down(BUNDLE, "B")],
    ))
}

fn graded(sig: Signature, e: &TensorExpr) -> GradedSymbol {
    GradedSymbol::from_expr(sig, e).unwrap()
}

fn assert_zero_mod_identities(e: &TensorExpr, what: &str) {
    let ordered = normal_order_h(e, false).unwrap();
    let reduced = reduce_mod_identities(&ordered, &IdentityOptions::default()).unwrap();
    assert!(reduced.is_zero(), "{what}: remainder {reduced:?}");
}

#[test]
fn adjoint_of_composition_reverses_operands_at_every_order() {
    let a = graded(endo_sig(), &endo_phase("u"));
    let b = graded(endo_sig(), &endo_phase("w"));
    let a_adj = a.adjoint().unwrap();
    let b_adj = b.adjoint().unwrap();
    let opts = StarOptions::default();
    for k in 0..=3u32 {
        let lhs = adjoint_expr(&star_order(&a, &b, k, &opts).unwrap()).unwrap();
        let rhs = star_order(&b_adj, &a_adj, k, &opts).unwrap();
        assert_zero_mod_identities(&lhs.sub(&rhs), &format!("adjoint law at order {k}"));
    }
}

fn adjoint_back(s: &GradedSymbol) -> GradedSymbol {
    let adj = s.adjoint().unwrap();
    let mut out = GradedSymbol::new(s.sig().clone());
    for g in adj.grades() {
        out.insert_component(g, &swap_labels(&adj.component(g), "A", "B")).unwrap();
    }
    out
}

#[test]
fn hermitian_operands_close_under_symmetrized_composition() {
    let herm = |e: &TensorExpr| {
        e.add(&swap_labels(&adjoint_expr(e).unwrap(), "A", "B")).canonicalize().unwrap()
    };
    let a = graded(endo_sig(), &herm(&endo_phase("u")));
    let b = graded(endo_sig(), &herm(&endo_phase("w")));
    assert_eq!(adjoint_back(&a), a, "hermitization must be self-adjoint");

    let opts = StarOptions::default();
    let sym = star(&a, &b, &opts).unwrap().add(&star(&b, &a, &opts).unwrap()).unwrap();
    let sym_adj = adjoint_back(&sym);
    for g in sym.grades() {
        assert_zero_mod_identities(
            &sym_adj.component(g).sub(&sym.component(g)),
            &format!("symmetrized composition self-adjointness, grade {g}"),
        );
    }

    let br = moyal_bracket(&a, &b, &opts).unwrap();
    let br_adj = adjoint_back(&br);
    for g in br.grades() {
        assert_zero_mod_identities(
            &br_adj.component(g).add(&br.component(g)),
            &format!("bracket anti-self-adjointness, grade {g}"),
        );
    }
}

/// Random momentum-polynomial scalar symbol: each term contracts a position
/// coefficient tensor against explicit momenta.
fn random_poly(rng: &mut ChaCha8Rng, tag: &str) -> TensorExpr {
    let nterms = rng.gen_range(1..=2usize);
    let mut e = TensorExpr::zero();
    for t in 0..nterms {
        let d = rng.gen_range(0..=3usize);
        let mut sig = Vec::new();
        let mut slots = Vec::new();
        let mut moms = Vec::new();
        for i in 0..d {
            sig.push(SlotSig::coord(Variance::Up));
            let l: Label = format!("q{i}");
            slots.push(IndexSlot::up(l.clone()));
            moms.push(TensorFactor::momentum(l));
        }
        let name = format!("{tag}{t}");
        let mut factors =
            vec![TensorFactor::new(Head::Generic(GenericHead::position(name, sig)), slots)];
        factors.extend(moms);
        let num = rng.gen_range(1..=3i64) * if rng.gen_bool(0.5) { 1 } else { -1 };
        let den = rng.gen_range(1..=2i64);
        e = e.add(&TensorExpr::from_factors(factors).scale_rational(&rat(num, den)));
    }
    e
}

#[test]
fn composition_order_lowers_momentum_degree_by_at_least_its_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let opts = StarOptions::default();
    let mut checked = 0usize;
    for case in 0..50 {
        let ea = random_poly(&mut rng, &format!("a{case}t"));
        let eb = random_poly(&mut rng, &format!("b{case}t"));
        let d1 = ea.max_p_degree() as i64;
        let d2 = eb.max_p_degree() as i64;
        let a = graded(Signature::scalar(), &ea);
        let b = graded(Signature::scalar(), &eb);
        for k in 0..=3u32 {
            let got = star_order(&a, &b, k, &opts).unwrap();
            if !got.is_zero() {
                assert!(
                    (got.max_p_degree() as i64) <= d1 + d2 - k as i64,
                    "case {case} order {k}: degree {} exceeds {}",
                    got.max_p_degree(),
                    d1 + d2 - k as i64
                );
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 200);
}

fn binom(k: u32, j: u32) -> i64 {
    let mut acc = 1i64;
    for i in 0..j {
        acc = acc * (k - i) as i64 / (i + 1) as i64;
    }
    acc
}

/// The reference side expands exp((i eps/2)(h_a.v_b - v_a.h_b)) directly
/// from the exponential series, term by term.
#[test]
fn flat_composition_matches_exponential_series_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf1a7);
    let opts = StarOptions { flat: true, ..Default::default() };
    for case in 0..50 {
        let ea = random_poly(&mut rng, &format!("a{case}f"));
        let eb = random_poly(&mut rng, &format!("b{case}f"));
        let a = graded(Signature::scalar(), &ea);
        let b = graded(Signature::scalar(), &eb);
        let got = star(&a, &b, &opts).unwrap();
        for k in 0..=3u32 {
            let labels: Vec<Label> = (0..k).map(|i| format!("z{i}")).collect();
            let mut want = TensorExpr::zero();
            for j in 0..=k {
                let mut da = ea.clone();
                let mut db = eb.clone();
                for (i, l) in labels.iter().enumerate() {
                    if (i as u32) < k - j {
                        da = hderiv(&da, l);
                        db = vderiv(&db, l);
                    } else {
                        da = vderiv(&da, l);
                        db = hderiv(&db, l);
                    }
                }
                let sign = if j % 2 == 0 { 1 } else { -1 };
                want = want.add(&da.mul(&db).scale_rational(&rat(sign * binom(k, j), 1)));
            }
            let mut fact = 1i64;
            for i in 2..=k as i64 {
                fact *= i;
            }
            want = want.scale(&Coefficient::from_parts(
                rat(1, (1i64 << k) * fact),
                k,
                0,
                GammaPoly::one(),
            ));
            let got_k = normal_order_h(&got.component(k as i32), true).unwrap();
            let want_k = normal_order_h(&want, true).unwrap();
            assert_eq!(got_k, want_k, "case {case} order {k}");
        }
    }
}

#[test]
fn identity_symbol_is_neutral_and_momenta_compose_freely_when_flat() {
    let a = graded(endo_sig(), &endo_phase("u"));
    let id = graded(
        endo_sig(),
        &TensorExpr::from_factor(TensorFactor::new(
            Head::BundleDelta(BUNDLE.to_string()),
            vec![IndexSlot::bundle_up(BUNDLE, "A"), IndexSlot::bundle_down(BUNDLE, "B")],
        )),
    );
    let opts = StarOptions::default();
    assert_eq!(star(&a, &id, &opts).unwrap(), a);
    assert_eq!(star(&id, &a, &opts).unwrap(), a);

    let pm = graded(
        Signature {
            dom: weyl_core::symbol::Wiring::trivial(),
            cod: weyl_core::symbol::Wiring::coords(vec!["m".to_string()]),
        },
        &TensorExpr::from_factor(TensorFactor::momentum("m")),
    );
    let pn = graded(
        Signature {
            dom: weyl_core::symbol::Wiring::coords(vec!["n".to_string()]),
            cod: weyl_core::symbol::Wiring::trivial(),
        },
        &TensorExpr::from_factors(vec![
            TensorFactor::metric_inv("n", "s"),
            TensorFactor::momentum("s"),
        ]),
    );
    let flat = StarOptions { flat: true, ..Default::default() };
    let got = star(&pm, &pn, &flat).unwrap();
    assert_eq!(got.grades(), vec![0]);
    assert_eq!(
        got.component(0),
        TensorExpr::from_factors(vec![
            TensorFactor::momentum("m"),
            TensorFactor::metric_inv("n", "s"),
            TensorFactor::momentum("s"),
        ])
        .canonicalize()
        .unwrap()
    );
}

#[test]
fn requantization_shifts_compose_and_fix_points_are_identities() {
    let content = endo_phase("u");
    let a = graded(endo_sig(), &content);
    let (sg, tu, rh) = (rat(1, 2), rat(1, 3), rat(1, 1));
    let (g_s, g_t, g_u) = (rat(1, 2), rat(1, 4), rat(0, 1));

    let inner = tau_shift(&a, &sg, &tu, &g_t, &g_s, 2).unwrap();
    let outer = tau_shift(&inner, &tu, &rh, &g_u, &g_t, 2).unwrap();
    let direct = tau_shift(&a, &sg, &rh, &g_u, &g_s, 2).unwrap();
    assert_eq!(outer, direct, "shift composition must telescope through second order");

    let fixed = tau_shift(&a, &sg, &sg, &g_s, &g_s, 2).unwrap();
    assert_eq!(fixed, a);
}
