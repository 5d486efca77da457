mod oracles;

use std::f64::consts::PI;

use gensim::quad::{
    apply_transform, extract_features, feature_sq_distance, make_oddball_trial, rasterize_quad, raw_features,
    shape_log_gen_sim_general, shape_log_gen_sim_limit, BetaBernoulliParams, ExtractionTolerances, Point,
    QuadCategory, Quadrilateral, TransformRanges,
};
use gensim::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Pairwise predicates computed straight from coordinates, in the documented
/// bit order, for the vertex labelling as given.
fn predicate_oracle(v: &[(f64, f64); 4], tol: f64) -> Vec<bool> {
    let edge = |i: usize| (v[(i + 1) % 4].0 - v[i].0, v[(i + 1) % 4].1 - v[i].1);
    let len = |i: usize| edge(i).0.hypot(edge(i).1);
    let angle = |i: usize| {
        let (ax, ay) = edge((i + 3) % 4);
        let (bx, by) = edge(i);
        // Interior angle at vertex i between the reversed incoming edge and the outgoing edge.
        let turn = (ax * by - ay * bx).atan2(ax * bx + ay * by);
        PI - turn
    };
    let mut bits = Vec::with_capacity(22);
    bits.extend(PAIRS.iter().map(|&(i, j)| (len(i) - len(j)).abs() <= tol * len(i).max(len(j))));
    bits.extend(PAIRS.iter().map(|&(i, j)| (angle(i) - angle(j)).abs() <= tol));
    bits.extend(PAIRS.iter().map(|&(i, j)| {
        let (a, b) = (edge(i), edge(j));
        (a.0 * b.1 - a.1 * b.0).abs() <= tol.sin() * len(i) * len(j)
    }));
    bits.extend((0..4).map(|i| (angle(i) - PI / 2.0).abs() <= tol));
    bits
}

fn quad(v: [(f64, f64); 4]) -> Quadrilateral {
    Quadrilateral::new(v.map(|(x, y)| Point::new(x, y))).unwrap()
}

#[test]
fn rectangle_two_by_one() {
    let v = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (0.0, 1.0)];
    let raw = raw_features(&quad(v), ExtractionTolerances::EXACT);
    assert_eq!(raw.to_vec(), predicate_oracle(&v, 1e-6));
    let f = extract_features(&quad(v), ExtractionTolerances::EXACT);
    assert_eq!(f.equal_lengths().iter().filter(|b| **b).count(), 2);
    assert!(f.equal_angles().iter().all(|b| *b));
    assert_eq!(f.parallel_edges().iter().filter(|b| **b).count(), 2);
    assert!(f.right_angles().iter().all(|b| *b));
}

#[test]
fn raw_features_match_oracle_on_random_convex_quads() {
    let mut rng = seeded(1);
    for _ in 0..500 {
        let mut angles: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        angles.sort_by(f64::total_cmp);
        let v: [(f64, f64); 4] = std::array::from_fn(|i| {
            let r = rng.random_range(0.5..1.5);
            (r * angles[i].cos(), r * angles[i].sin())
        });
        let Ok(q) = Quadrilateral::new(v.map(|(x, y)| Point::new(x, y))) else { continue };
        let stored = q.vertices().map(|p| (p.x, p.y));
        for tol in [1e-6, 0.05, 0.3] {
            let t = ExtractionTolerances { length_rel: tol, angle_rad: tol };
            assert_eq!(raw_features(&q, t).to_vec(), predicate_oracle(&stored, tol));
        }
    }
}

#[test]
fn exemplars_realize_their_signature() {
    let mut rng = seeded(2);
    for c in QuadCategory::ALL {
        for _ in 0..100 {
            let q = c.generate_exemplar(&mut rng).unwrap();
            assert_eq!(extract_features(&q, ExtractionTolerances::EXACT), c.signature(), "{c}");
        }
    }
    let sig = |c: QuadCategory| c.signature().to_u8();
    assert!(QuadCategory::Random.signature().bits().iter().all(|b| !*b));
    assert_eq!(feature_sq_distance(&sig(QuadCategory::Square), &sig(QuadCategory::Rectangle)).unwrap(), 4);
    let trapezoid = QuadCategory::Trapezoid.signature();
    assert_eq!(trapezoid.parallel_edges().iter().filter(|b| **b).count(), 1);
    assert_eq!(trapezoid.count_ones(), 1);
}

#[test]
fn square_oddballs_lose_a_right_angle() {
    let mut rng = seeded(3);
    for _ in 0..50 {
        let t = make_oddball_trial(QuadCategory::Square, &TransformRanges::default(), &mut rng).unwrap();
        assert_eq!(t.items.len(), 6);
        let odd = extract_features(&t.items[t.oddball_index], ExtractionTolerances::EXACT);
        assert!(odd.right_angles().iter().filter(|b| **b).count() < 4);
        for (i, q) in t.items.iter().enumerate() {
            if i != t.oddball_index {
                assert_eq!(extract_features(q, ExtractionTolerances::EXACT), QuadCategory::Square.signature());
            }
        }
    }
    for _ in 0..50 {
        let t = make_oddball_trial(QuadCategory::Random, &TransformRanges::default(), &mut rng).unwrap();
        assert!(t.items.iter().all(|q| q.signed_area() > 0.0));
    }
}

#[test]
fn rasters_have_ink_and_stay_in_range() {
    let mut rng = seeded(4);
    for c in QuadCategory::ALL {
        let q = c.generate_exemplar(&mut rng).unwrap();
        let q = apply_transform(&q, 0.6, rng.random_range(0.0..2.0 * PI)).unwrap();
        for size in [16, 64] {
            let r = rasterize_quad(&q, size);
            assert!(r.count_nonzero() as f64 >= 4.0 * size as f64 * 0.1, "{c} {size}");
            assert!(r.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn general_form_matches_quadrature() {
    let mut rng = seeded(5);
    for _ in 0..20 {
        let n = rng.random_range(1..23);
        let f1: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let f2: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let (a, b) = (rng.random_range(0.2..5.0), rng.random_range(0.2..5.0));
        let ours = shape_log_gen_sim_general(&f1, &f2, BetaBernoulliParams::new(a, b).unwrap()).unwrap();
        let oracle = oracles::beta_bernoulli_log_gen_sim(&f1, &f2, a, b, 2000);
        assert!((ours - oracle).abs() <= 1e-6 * oracle.abs().max(1e-3), "{ours} vs {oracle} (a={a}, b={b})");
    }
}

#[test]
fn limit_agrees_with_general_form_near_zero() {
    let mut rng = seeded(6);
    for _ in 0..20 {
        let f1: Vec<u8> = (0..22).map(|_| rng.random_range(0..2)).collect();
        let f2: Vec<u8> = (0..22).map(|_| rng.random_range(0..2)).collect();
        let beta = 1e-6;
        let limit = shape_log_gen_sim_limit(&f1, &f2, beta).unwrap();
        let general = shape_log_gen_sim_general(&f1, &f2, BetaBernoulliParams::new(beta, beta).unwrap()).unwrap();
        assert!((limit - general).abs() <= 1e-3 * general.abs().max(1.0), "{limit} vs {general}");
    }
}

fn bits22() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..2, 22)
}

proptest! {
    #[test]
    fn features_survive_similarity_transforms(
        cat in 0usize..11, seed in any::<u64>(), scale in 0.1f64..10.0, rot in -10.0f64..10.0,
    ) {
        let c = QuadCategory::from_index(cat).unwrap();
        let q = c.generate_exemplar(&mut seeded(seed)).unwrap();
        let t = apply_transform(&q, scale, rot).unwrap();
        prop_assert_eq!(extract_features(&t, ExtractionTolerances::EXACT), extract_features(&q, ExtractionTolerances::EXACT));
    }

    #[test]
    fn features_ignore_starting_vertex(cat in 0usize..11, seed in any::<u64>(), shift in 1usize..4) {
        let c = QuadCategory::from_index(cat).unwrap();
        let q = c.generate_exemplar(&mut seeded(seed)).unwrap();
        let relabelled = Quadrilateral::new(std::array::from_fn(|i| q.vertex(i + shift))).unwrap();
        prop_assert_eq!(extract_features(&relabelled, ExtractionTolerances::EXACT), extract_features(&q, ExtractionTolerances::EXACT));
    }

    #[test]
    fn general_form_is_symmetric(f1 in bits22(), f2 in bits22(), a in 0.05f64..10.0, b in 0.05f64..10.0) {
        let p = BetaBernoulliParams::new(a, b).unwrap();
        let x = shape_log_gen_sim_general(&f1, &f2, p).unwrap();
        let y = shape_log_gen_sim_general(&f2, &f1, p).unwrap();
        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn limit_is_decreasing_affine_in_distance(f1 in bits22(), f2 in bits22(), beta in 1e-6f64..10.0) {
        let d = feature_sq_distance(&f1, &f2).unwrap() as f64;
        let v = shape_log_gen_sim_limit(&f1, &f2, beta).unwrap();
        let slope = ((beta + 1.0) / beta).ln();
        prop_assert!(slope > 0.0);
        prop_assert!((v - (22.0 * std::f64::consts::LN_2 - slope * d)).abs() <= 1e-9 * v.abs().max(1.0));
    }
}
