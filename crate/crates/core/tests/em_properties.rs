mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solidsum::em::expand_main;
use solidsum::field::parse;
use solidsum::geometry::IntegerSimplex;
use solidsum::linalg;

/// With `q(x) = f(x/N)` on `τ = N`, the normalized residual `residual/N^d`
/// decays like `N^{−w−1}`.
#[test]
fn normalized_residual_decays_at_the_expansion_order() {
    let tri = IntegerSimplex::standard(2);
    let ns = [8.0, 16.0, 32.0, 64.0];
    for w in 1..=3u32 {
        let residuals: Vec<f64> = ns
            .iter()
            .map(|&n| {
                let q = parse(&format!("exp((x1 + x2)/{n})"), 2).unwrap();
                expand_main(&tri, &q, n, &[0.3, 0.1], w)
                    .unwrap()
                    .residual
                    .abs()
                    / (n * n)
            })
            .collect();
        let slope = common::log_slope(&ns, &residuals);
        assert!(
            slope <= -(w as f64 + 1.0) + 0.3,
            "w={w}: slope {slope:.2}, residuals {residuals:?}"
        );
    }
}

/// For a slowly varying exponential the truncated series converges
/// uniformly: the worst residual over random shifts decreases with `w`.
#[test]
fn truncations_converge_uniformly_for_slow_exponentials() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let tri = IntegerSimplex::standard(2);
    let q = parse("exp((3*x1 + 2*x2)/10)", 2).unwrap();
    let xs: Vec<[f64; 2]> = (0..50)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let mut envelope = Vec::new();
    for w in 1..=8u32 {
        let worst = xs
            .iter()
            .map(|x| expand_main(&tri, &q, 3.0, x, w).unwrap().residual.abs())
            .fold(0.0, f64::max);
        envelope.push(worst);
    }
    for pair in envelope.windows(2) {
        assert!(
            pair[1] <= pair[0] || pair[1] < 1e-11,
            "envelope {envelope:?}"
        );
    }
    assert!(envelope[7] < 1e-6 * envelope[0], "envelope {envelope:?}");
}

/// Expanding on `p + P` with `q` equals expanding on `P` with `q(· + τp)`.
#[test]
fn expansion_is_translation_covariant() {
    let m = vec![vec![2, 1], vec![0, 1]];
    let p = vec![1, -2];
    let shifted = IntegerSimplex::new(p.clone(), m.clone()).unwrap();
    let base = IntegerSimplex::new(vec![0, 0], m).unwrap();
    let q = parse("exp((x1 - x2)/5) + x1*x2/7", 2).unwrap();
    for tau in [1.0, 2.0, 3.0] {
        let offset: Vec<_> = p
            .iter()
            .map(|v| linalg::rational_from_f64(tau * *v as f64))
            .collect();
        let ident = vec![
            vec![linalg::rational_from_i64(1), linalg::rational_from_i64(0)],
            vec![linalg::rational_from_i64(0), linalg::rational_from_i64(1)],
        ];
        let moved = q.compose_affine(&ident, &offset).unwrap();
        for x in [[0.0, 0.0], [0.25, -0.5]] {
            let a = expand_main(&shifted, &q, tau, &x, 3).unwrap();
            let b = expand_main(&base, &moved, tau, &x, 3).unwrap();
            let scale = 1.0 + a.total.abs();
            assert!(
                (a.total - b.total).abs() < 1e-11 * scale,
                "τ={tau} x={x:?}: {} vs {}",
                a.total,
                b.total
            );
            assert!((a.lhs_bruteforce - b.lhs_bruteforce).abs() < 1e-11 * scale);
        }
    }
}
