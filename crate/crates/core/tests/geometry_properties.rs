mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solidsum::geometry::{
    solid_angle, weighted_lattice_count, IntegerSimplex, SimplicialComplex, SolidAngleMethod,
};

const EXACT: SolidAngleMethod = SolidAngleMethod::ExactLowDim;

fn bounding_points(s: &IntegerSimplex) -> Vec<Vec<f64>> {
    let verts = s.vertices();
    let mut pts = vec![Vec::new()];
    for i in 0..s.dim() {
        let lo = verts.iter().map(|v| v[i]).min().unwrap();
        let hi = verts.iter().map(|v| v[i]).max().unwrap();
        pts = pts
            .into_iter()
            .flat_map(|p: Vec<f64>| (lo..=hi).map(move |v| [p.clone(), vec![v as f64]].concat()))
            .collect();
    }
    pts
}

fn point_with_barycentrics(s: &IntegerSimplex, weights: &[f64]) -> Vec<f64> {
    let verts = s.vertices();
    (0..s.dim())
        .map(|i| {
            verts
                .iter()
                .zip(weights)
                .map(|(v, w)| v[i] as f64 * w)
                .sum()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solid_angles_add_over_a_bisection(seed in any::<u64>(), d in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let whole = common::random_even_simplex(&mut rng, d);
        let a = rng.gen_range(0..=d);
        let b = (a + rng.gen_range(1..=d)) % (d + 1);
        let (p1, p2) = common::split_at_midpoint(&whole, a, b).expect("even vertices");
        let c = SimplicialComplex::single(whole.clone());
        let c1 = SimplicialComplex::single(p1);
        let c2 = SimplicialComplex::single(p2);
        let mut boundary = 0;
        for x in bounding_points(&whole) {
            let w1 = solid_angle(&c1, &x, EXACT).unwrap();
            let w2 = solid_angle(&c2, &x, EXACT).unwrap();
            let w = solid_angle(&c, &x, EXACT).unwrap();
            if (w1 > 0.0 && w1 < 1.0) || (w2 > 0.0 && w2 < 1.0) {
                boundary += 1;
            }
            prop_assert!((w - w1 - w2).abs() < 1e-10, "x={:?}: {} vs {} + {}", x, w, w1, w2);
            if boundary >= 100 {
                break;
            }
        }
        prop_assert!(boundary > 0);
    }

    #[test]
    fn solid_angles_are_fractions_and_indicators(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_even_simplex(&mut rng, d);
        let c = SimplicialComplex::single(s.clone());
        for _ in 0..20 {
            // Interior: all barycentric weights at least 0.05.
            let mut w: Vec<f64> = (0..=d).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x = 0.05 + (1.0 - 0.05 * (d + 1) as f64) * *x / total);
            let x = point_with_barycentrics(&s, &w);
            prop_assert_eq!(solid_angle(&c, &x, EXACT).unwrap(), 1.0);
            // Exterior: one weight pushed below zero.
            let k = rng.gen_range(0..=d);
            let mut e = w.clone();
            e[k] = -0.1;
            let rest = 1.1 / (1.0 - w[k]);
            for (i, v) in e.iter_mut().enumerate() {
                if i != k {
                    *v = w[i] * rest;
                }
            }
            let y = point_with_barycentrics(&s, &e);
            prop_assert_eq!(solid_angle(&c, &y, EXACT).unwrap(), 0.0);
        }
        for x in bounding_points(&s) {
            let w = solid_angle(&c, &x, EXACT).unwrap();
            prop_assert!((0.0..=1.0).contains(&w));
        }
    }
}

#[test]
fn monte_carlo_angles_add_within_three_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let samples = 10_000u64;
    let sigma = |p: f64| (p * (1.0 - p) / samples as f64).sqrt();
    for d in [2usize, 3] {
        let whole = common::random_even_simplex(&mut rng, d);
        let (p1, p2) = common::split_at_midpoint(&whole, 0, 1).unwrap();
        let parts = [
            SimplicialComplex::single(whole.clone()),
            SimplicialComplex::single(p1),
            SimplicialComplex::single(p2),
        ];
        let mut checked = 0;
        for (k, x) in bounding_points(&whole).into_iter().enumerate() {
            let exact: Vec<f64> = parts
                .iter()
                .map(|c| solid_angle(c, &x, EXACT).unwrap())
                .collect();
            if exact.iter().all(|w| *w == 0.0 || *w == 1.0) {
                continue;
            }
            let mc: Vec<f64> = parts
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let method = SolidAngleMethod::MonteCarlo {
                        samples,
                        seed: (k * 3 + i) as u64,
                    };
                    solid_angle(c, &x, method).unwrap()
                })
                .collect();
            let s = (sigma(exact[0]).powi(2) + sigma(exact[1]).powi(2) + sigma(exact[2]).powi(2))
                .sqrt();
            assert!(
                (mc[0] - mc[1] - mc[2]).abs() <= 3.0 * s + 1e-12,
                "d={d} x={x:?}: {mc:?}, σ={s:e}"
            );
            checked += 1;
            if checked == 5 {
                break;
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn lattice_counts_have_no_subleading_term_in_three_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let m = common::random_unimodular(&mut rng, 3);
    for s in [
        IntegerSimplex::standard(3),
        IntegerSimplex::new(vec![1, 0, -1], m).unwrap(),
    ] {
        let c = SimplicialComplex::single(s.clone());
        let taus: Vec<f64> = (1..=6).map(|t| t as f64).collect();
        let counts: Vec<f64> = (1..=6u64)
            .map(|t| weighted_lattice_count(&c, t, EXACT).unwrap())
            .collect();
        let fit = common::least_squares(&taus, &counts, &[0, 1, 2, 3]);
        assert!(fit[2].abs() < 1e-8, "τ² coefficient {:e}", fit[2]);
        assert!(
            (fit[3] - s.volume()).abs() < 1e-8,
            "leading {} vs {}",
            fit[3],
            s.volume()
        );
    }
}
