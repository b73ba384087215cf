//! Round-trip properties of the text grammar: parse after print is the
//! identity on canonicalized expressions, and printing is a byte fixed
//! point on already canonical text.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use weyl_core::coeff::{rat, Coefficient, GammaPoly, Rational};
use weyl_core::lang::{parse_expr, parse_symbol, print_expr, print_symbol, Format};
use weyl_core::quantize::{catalog, CatalogParams, CATALOG_NAMES};
use weyl_core::{GenericHead, Head, IndexSlot, SlotSig, TensorExpr, TensorFactor, Term, Variance};

struct LabGen(u32);

impl LabGen {
    fn next(&mut self) -> String {
        self.0 += 1;
        format!("x{}", self.0)
    }
}

fn phase_scalar(name: &str) -> GenericHead {
    GenericHead::phase(name, Vec::new())
}

/// Balanced scalar factor groups drawn from the full head vocabulary.
fn pattern(k: usize, lg: &mut LabGen) -> Vec<TensorFactor> {
    match k {
        0 => {
            let (a, b) = (lg.next(), lg.next());
            vec![TensorFactor::ricci(a.clone(), b.clone()), TensorFactor::metric_inv(a, b)]
        }
        1 => {
            let (a, b, c, d) = (lg.next(), lg.next(), lg.next(), lg.next());
            vec![
                TensorFactor::riemann(vec![
                    IndexSlot::down(a.clone()),
                    IndexSlot::down(b.clone()),
                    IndexSlot::down(c.clone()),
                    IndexSlot::down(d.clone()),
                ]),
                TensorFactor::metric_inv(a, c),
                TensorFactor::metric_inv(b, d),
            ]
        }
        2 => {
            let e = lg.next();
            let mut f = TensorFactor::new(Head::Generic(phase_scalar("u")), Vec::new());
            f.h.push(IndexSlot::down(e.clone()));
            f.v.push(IndexSlot::up(e));
            vec![f]
        }
        3 => {
            let (fa, fb) = (lg.next(), lg.next());
            let y = GenericHead::position(
                "y",
                vec![
                    SlotSig::bundle(Variance::Down, "E"),
                    SlotSig::bundle(Variance::Up, "E"),
                ],
            )
            .constant();
            vec![
                TensorFactor::new(
                    Head::BundleDelta("E".into()),
                    vec![
                        IndexSlot::bundle_up("E", fa.clone()),
                        IndexSlot::bundle_down("E", fb.clone()),
                    ],
                ),
                TensorFactor::new(
                    Head::Generic(y),
                    vec![IndexSlot::bundle_down("E", fa), IndexSlot::bundle_up("E", fb)],
                ),
            ]
        }
        4 => {
            let (fa, fm, a, b) = (lg.next(), lg.next(), lg.next(), lg.next());
            vec![
                TensorFactor::new(
                    Head::Gamma { bundle: "S".into(), dagger: false },
                    vec![
                        IndexSlot::bundle_up("S", fa.clone()),
                        IndexSlot::bundle_down("S", fm.clone()),
                        IndexSlot::up(a.clone()),
                    ],
                ),
                TensorFactor::new(
                    Head::Gamma { bundle: "S".into(), dagger: true },
                    vec![
                        IndexSlot::bundle_up("S", fm),
                        IndexSlot::bundle_down("S", fa),
                        IndexSlot::up(b.clone()),
                    ],
                ),
                TensorFactor::metric(a, b),
            ]
        }
        5 => {
            let (a, b, c) = (lg.next(), lg.next(), lg.next());
            let (d, e, f) = (lg.next(), lg.next(), lg.next());
            let mut r1 = TensorFactor::ricci(a.clone(), b.clone());
            r1.cov.push(IndexSlot::down(c.clone()));
            let mut r2 = TensorFactor::ricci(d.clone(), e.clone());
            r2.cov.push(IndexSlot::down(f.clone()));
            vec![
                r1,
                r2,
                TensorFactor::metric_inv(a, d),
                TensorFactor::metric_inv(b, e),
                TensorFactor::metric_inv(c, f),
            ]
        }
        6 => vec![TensorFactor::new(Head::Dim, Vec::new()), TensorFactor::ricci_scalar()],
        7 => {
            let (a, b) = (lg.next(), lg.next());
            vec![
                TensorFactor::metric_inv(a.clone(), b.clone()),
                TensorFactor::momentum(a),
                TensorFactor::momentum(b),
            ]
        }
        _ => {
            let (a, b) = (lg.next(), lg.next());
            let s2 = GenericHead::position(
                "s2",
                vec![SlotSig::coord(Variance::Down), SlotSig::coord(Variance::Down)],
            )
            .with_sym(0, 1, 1);
            vec![
                TensorFactor::new(
                    Head::Generic(s2),
                    vec![IndexSlot::down(a.clone()), IndexSlot::down(b.clone())],
                ),
                TensorFactor::metric_inv(a, b),
            ]
        }
    }
}

fn random_coeff(rng: &mut ChaCha8Rng) -> Coefficient {
    let n = loop {
        let n = rng.gen_range(-6i64..=6);
        if n != 0 {
            break n;
        }
    };
    let d = rng.gen_range(1i64..=4);
    let i_pow = rng.gen_range(0u32..=1);
    let eps = rng.gen_range(-2i32..=2);
    let deg = rng.gen_range(0usize..=2);
    let coeffs: Vec<Rational> = (0..=deg).map(|_| rat(rng.gen_range(-3..=3), 1)).collect();
    Coefficient::from_parts(rat(n, d), i_pow, eps, GammaPoly::from_coeffs(coeffs))
}

fn random_expr(rng: &mut ChaCha8Rng, lg: &mut LabGen) -> TensorExpr {
    let nterms = rng.gen_range(1..=3);
    let mut e = TensorExpr::zero();
    for _ in 0..nterms {
        let mut factors = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            factors.extend(pattern(rng.gen_range(0..=8), lg));
        }
        e = e.add(&TensorExpr::from_term(Term { coeff: random_coeff(rng), factors }));
    }
    e
}

#[test]
fn random_expressions_round_trip_through_canonical_text() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a27);
    let mut lg = LabGen(0);
    for case in 0..40 {
        let e = random_expr(&mut rng, &mut lg).canonicalize().unwrap();
        let text = print_expr(&e, Format::CanonicalText);
        let back = parse_expr(&text)
            .unwrap_or_else(|err| panic!("case {case}: reparse failed: {err}\n{text}"))
            .canonicalize()
            .unwrap();
        assert_eq!(back, e, "case {case} round trip mismatch:\n{text}");
        let again = print_expr(&back, Format::CanonicalText);
        assert_eq!(again, text, "case {case}: canonical text is not a fixed point");
        assert!(print_expr(&e, Format::Json).starts_with("{\"version\":1,"));
        let _ = print_expr(&e, Format::Latex);
    }
}

#[test]
fn catalog_symbols_round_trip_and_reprint_identically() {
    let params = CatalogParams {
        mass: Some(rat(1, 1)),
        lambda: Some(rat(1, 1)),
        dim: Some(4),
        abelian: Some(false),
    };
    for name in CATALOG_NAMES {
        let entry = catalog(name, &params).unwrap();
        let text = print_symbol(name, &entry.symbol, Format::CanonicalText);
        let (back_name, back) = parse_symbol(&text)
            .unwrap_or_else(|err| panic!("{name}: reparse failed: {err}\n{text}"));
        assert_eq!(back_name, name);
        assert_eq!(back, entry.symbol, "{name} symbol changed across the text round trip");
        assert_eq!(
            print_symbol(&back_name, &back, Format::CanonicalText),
            text,
            "{name}: canonical text is not a fixed point"
        );
        assert!(print_symbol(name, &entry.symbol, Format::Json).starts_with("{\"version\":1,"));
        assert!(!print_symbol(name, &entry.symbol, Format::Latex).is_empty());
    }
}
