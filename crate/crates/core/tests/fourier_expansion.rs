//! Fourier expansion over simplices versus direct integration.

use solidsum::bases::{classify_frequency, BasisFamily};
use solidsum::field::parse;
use solidsum::fourier::{expand_general, expand_standard, oracle_ft};
use solidsum::geometry::{exact_point, IntegerSimplex};

/// Remainder of the truncated expansion along a generic ray, scaled by
/// `t^{w+1}`.  This is a pointwise proxy for the remainder bound, which
/// concerns Fourier coefficients of a periodic function.
#[test]
fn pointwise_remainder_decay_along_a_ray() {
    let g = parse("exp(x1 + x2)", 2).unwrap();
    let tri = IntegerSimplex::standard(2);
    let family = BasisFamily::build(2).unwrap();
    let dir = [1.0, 7071.0 / 5000.0];
    for w in 1..=3u32 {
        let mut scaled = Vec::new();
        for t in [4.0, 8.0, 16.0, 32.0] {
            let xi = [t * dir[0], t * dir[1]];
            let theta = classify_frequency(&family, &exact_point(&xi));
            assert_eq!(theta.bits(), 0);
            let e = expand_standard(&g, theta, w).unwrap();
            let exact = oracle_ft(&tri, &g, 1.0, &xi, 1e-14).unwrap();
            let rem = (e.eval(&xi).unwrap() - exact).norm();
            scaled.push(rem * t.powi(w as i32 + 1));
        }
        let first = scaled[0];
        assert!(
            scaled.iter().all(|s| *s <= 2.0 * first),
            "w={w}: {scaled:?}"
        );
        // Remainder actually decays like t^{−(w+3)}.
        assert!(scaled[3] < scaled[0] / 8.0, "w={w}: {scaled:?}");
    }
}

#[test]
fn polynomials_are_reproduced_exactly_in_one_dimension() {
    let family = BasisFamily::build(1).unwrap();
    let seg = IntegerSimplex::standard(1);
    for (src, w) in [("1 + x1", 1), ("3*x1^3 - x1 + 2", 3), ("x1^5", 5)] {
        let g = parse(src, 1).unwrap();
        for k in [1.0, -2.0, 5.0] {
            let theta = classify_frequency(&family, &exact_point(&[k]));
            let e = expand_standard(&g, theta, w).unwrap();
            let exact = oracle_ft(&seg, &g, 1.0, &[k], 1e-14).unwrap();
            assert!(
                (e.eval(&[k]).unwrap() - exact).norm() < 1e-12,
                "{src} at {k}"
            );
        }
    }
}

#[test]
fn general_simplex_matches_oracle_on_every_cone() {
    let s = IntegerSimplex::from_columns(vec![1, -1], &[vec![2, 1], vec![0, 1]]).unwrap();
    let q = parse("exp(x1/5) * cos(x2/3)", 2).unwrap();
    let family = BasisFamily::build(2).unwrap();
    // Mᵗξ zero, on (e_1 − e_2)^⊥, e_1^⊥, e_2^⊥, and generic.
    for xi in [[0.0, 0.0], [0.0, 1.5], [1.25, -2.5], [0.8, 0.0], [0.9, 1.7]] {
        let theta = solidsum::bases::classify_pullback(&family, s.m(), &exact_point(&xi));
        let e = expand_general(&s, &q, 1.5, theta, 12).unwrap();
        let exact = oracle_ft(&s, &q, 1.5, &xi, 1e-14).unwrap();
        let got = e.eval(&xi).unwrap();
        assert!(
            (got - exact).norm() < 1e-12 * exact.norm().max(1.0),
            "ξ={xi:?}: {got} vs {exact}"
        );
    }
}

#[test]
fn three_dimensional_expansion_matches_oracle() {
    let s = IntegerSimplex::from_columns(
        vec![0, 0, 0],
        &[vec![1, 0, 0], vec![1, 1, 0], vec![0, 1, 2]],
    )
    .unwrap();
    let q = parse("exp((x1 - x2 + x3)/4)", 3).unwrap();
    let family = BasisFamily::build(3).unwrap();
    for xi in [
        [0.0, 0.0, 0.0],
        [1.0, -1.0, 0.0],
        [0.7, 1.3, -0.4],
        [0.0, 0.0, 1.1],
    ] {
        let theta = solidsum::bases::classify_pullback(&family, s.m(), &exact_point(&xi));
        let e = expand_general(&s, &q, 2.0, theta, 6).unwrap();
        let exact = oracle_ft(&s, &q, 2.0, &xi, 1e-12).unwrap();
        let got = e.eval(&xi).unwrap();
        assert!(
            (got - exact).norm() < 1e-8 * exact.norm().max(1.0),
            "ξ={xi:?}: {got} vs {exact}"
        );
    }
}
