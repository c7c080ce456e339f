use std::sync::Arc;

use pi_engine::algebra::{make_b1, make_b2, TruncationPolicy};
use pi_engine::interaction::bind;
use pi_engine::interaction::conv::{build_conv2d, read_image, ConvConfig, ConvConstraint};
use pi_engine::autodiff::ParamStore;
use pi_engine::oracles;
use pi_engine::repr::make_so2_algebra;
use pi_engine::tensor::{embed_image2d, multiply, tensor_space, Space};
use pi_engine::{Role, TensorElement, C64};
use proptest::prelude::*;

fn space() -> Space {
    tensor_space(
        vec![
            Arc::new(make_b1(2).unwrap()),
            Arc::new(make_b2(2).unwrap()),
            Arc::new(make_so2_algebra(1, TruncationPolicy::Drop)),
        ],
        vec![Role::Positional, Role::Positional, Role::Feature],
    )
    .unwrap()
}

fn element(space: &Space, re: &[f64], im: &[f64]) -> TensorElement {
    let v = re.iter().zip(im).map(|(a, b)| C64::new(*a, *b)).collect();
    TensorElement::from_dense(space, v).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    // B1(2) * B2(2) * SO2(1) has 3 * 2 * 3 coefficients.
    prop::collection::vec(prop_oneof![Just(0.0), -2.0..2.0f64], 18)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn multiply_matches_bruteforce(a in coeffs(), b in coeffs(), c in coeffs(), d in coeffs()) {
        let s = space();
        let (x, y) = (element(&s, &a, &b), element(&s, &c, &d));
        let fast = multiply(&x, &y).unwrap();
        let slow = oracles::multiply_bruteforce(&x, &y).unwrap();
        prop_assert!(fast.max_abs_diff(&slow) < 1e-12);
    }

    #[test]
    fn multiply_is_bilinear(a in coeffs(), b in coeffs(), c in coeffs(), k in -3.0..3.0f64) {
        let s = space();
        let zero = vec![0.0; 18];
        let (x, y, z) = (element(&s, &a, &zero), element(&s, &b, &zero), element(&s, &c, &zero));
        let lhs = multiply(&x.add(&y.scale(C64::new(k, 0.0))).unwrap(), &z).unwrap();
        let rhs = multiply(&x, &z).unwrap().add(&multiply(&y, &z).unwrap().scale(C64::new(k, 0.0))).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn conv_builder_matches_oracle(h in 3usize..7, w in 3usize..7, kh in 1usize..4, kw in 1usize..4, seed in 0u64..1000) {
        let mut r = pi_engine::rng::seeded(seed);
        let x = pi_engine::rng::mat(&mut r, h, w, 1.0);
        let k = pi_engine::rng::mat(&mut r, kh, kw, 1.0);
        let mut s = ParamStore::new(seed);
        s.insert("kernel", vec![kh, kw], k.iter().flatten().copied().collect()).unwrap();
        let b = build_conv2d::<C64>(&ConvConfig::new(h, w, kh, kw, ConvConstraint::Symmetric), &s.to_params()).unwrap();
        let out = read_image(&b.expr.eval(&bind("X", embed_image2d(&x, b.expr.space()).unwrap())).unwrap()).unwrap();
        let want = oracles::xcorr2d(&x, &k);
        for (ro, rw) in out.iter().zip(&want) {
            for (u, v) in ro.iter().zip(rw) {
                prop_assert!((u.re - v).abs() < 1e-12 && u.im.abs() < 1e-12);
            }
        }
    }
}
