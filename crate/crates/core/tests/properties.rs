use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use varilet::field::{classic_tv_1d, linear_combination, DomainGraph, EdgePoint};
use varilet::generate::{
    random_field, random_field_of, random_lens, random_threshold_lens, subdivide_collinear, GraphKind,
};
use varilet::io::{field_from_json, field_to_json, parse_series, write_series, BasisDoc};
use varilet::lens::{supports, validate_lens};
use varilet::mlf::{count_contours, regular_levels, verify_factorization};
use varilet::transform::transform_factored;
use varilet::ttv::{check_decomposition, ttv_restricted, PIPELINE_RTOL};
use varilet::{
    factorize, filter, load_series, ttv, ttv_of, varilet_transform, FilterCoefficients, Lens, ScalarField,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        prop::collection::vec(-100.0..100.0f64, 2..120),
        prop::collection::vec((0..4i32).prop_map(f64::from), 2..60),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn evaluation_is_affine(seed in any::<u64>(), t in 0.0..1.0f64) {
        let mut r = rng(seed);
        let f = random_field(&mut r, 30);
        let g = f.graph();
        for e in 0..g.edge_count() {
            let [a, b] = g.endpoints(e);
            let expected = f.value(a) + t * (f.value(b) - f.value(a));
            let got = f.evaluate(EdgePoint::on_edge(g, e, t));
            prop_assert!((got - expected).abs() <= 1e-12 * (1.0 + f.sup_norm()));
        }
    }

    #[test]
    fn combination_commutes_with_evaluation(seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64, t in 0.0..1.0f64) {
        let mut r = rng(seed);
        let f = random_field(&mut r, 30);
        let values = varilet::generate::random_values(&mut r, f.graph());
        let g = ScalarField::new(f.shared_graph().clone(), values).unwrap();
        let h = linear_combination(&[&f, &g], &[a, b]).unwrap();
        for e in 0..f.graph().edge_count() {
            let p = EdgePoint::on_edge(f.graph(), e, t);
            let direct = a * f.evaluate(p) + b * g.evaluate(p);
            prop_assert!((h.evaluate(p) - direct).abs() <= 1e-12 * (1.0 + h.sup_norm()));
        }
    }

    #[test]
    fn series_ttv_is_classic_tv(values in series()) {
        let f = load_series(&values).unwrap();
        let (ms, _) = factorize(&f);
        let classic = classic_tv_1d(&f).unwrap();
        let scale = values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        prop_assert!((ttv(&ms) - classic).abs() <= 1e-12 * scale * values.len() as f64);
        prop_assert!(ms.is_acyclic());
    }

    #[test]
    fn classic_tv_ignores_collinear_midpoints(values in series()) {
        let mut dense = Vec::with_capacity(2 * values.len());
        for w in values.windows(2) {
            dense.push(w[0]);
            dense.push(0.5 * (w[0] + w[1]));
        }
        dense.push(*values.last().unwrap());
        let a = classic_tv_1d(&load_series(&values).unwrap()).unwrap();
        let b = classic_tv_1d(&load_series(&dense).unwrap()).unwrap();
        prop_assert!(rel(a, b) <= 1e-12);
    }

    #[test]
    fn series_text_round_trips(values in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 2..40)) {
        let back = parse_series(&write_series(&values)).unwrap();
        prop_assert_eq!(back.len(), values.len());
        for (a, b) in values.iter().zip(&back) {
            prop_assert_eq!((a + 0.0).to_bits(), b.to_bits());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn factorization_is_exact_and_counts_contours(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_field(&mut r, 60);
        let (ms, mf) = factorize(&f);
        let report = verify_factorization(&f, &ms, &mf);
        prop_assert!(report.passed(), "{:?}", report.violations);
        for v in 0..f.graph().vertex_count() {
            if let Some(p) = mf.location(v) {
                prop_assert_eq!(ms.point_level(p), f.value(v));
            }
        }
        for y in regular_levels(&f, 100) {
            prop_assert_eq!(ms.points_at_level(y), count_contours(&f, y));
        }
        prop_assert!(ms.suppressible_vertices().is_empty());
    }

    #[test]
    fn simply_connected_domains_give_trees(seed in any::<u64>(), tree in any::<bool>()) {
        let kind = if tree { GraphKind::Tree } else { GraphKind::Chain };
        let f = random_field_of(&mut rng(seed), kind, 80);
        prop_assert!(factorize(&f).0.is_acyclic());
    }

    #[test]
    fn field_documents_round_trip(seed in any::<u64>()) {
        let f = random_field(&mut rng(seed), 40);
        let text = field_to_json(&f);
        let g = field_from_json(&text).unwrap();
        for (a, b) in f.values().iter().zip(g.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(field_to_json(&g), text);
    }

    #[test]
    fn collinear_subdivision_changes_nothing(seed in any::<u64>(), count in 1usize..8) {
        let mut r = rng(seed);
        let f = random_field(&mut r, 40);
        let g = subdivide_collinear(&mut r, &f, count);
        let (mf, mg) = (factorize(&f).0, factorize(&g).0);
        prop_assert_eq!(ttv(&mf), ttv(&mg));
        prop_assert_eq!(mf.signature(), mg.signature());
        for lens in [Lens::trivial(&mf), varilet::build_branch_lens(&mf, 0.0)] {
            let a = varilet_transform(&f, &lens).unwrap();
            let b = varilet_transform(&g, &lens).unwrap();
            prop_assert_eq!(a.amplitudes(), b.amplitudes());
        }
    }

    #[test]
    fn ttv_adds_over_disjoint_unions(s1 in any::<u64>(), s2 in any::<u64>()) {
        let f = random_field_of(&mut rng(s1), GraphKind::Cyclic, 25);
        let g = random_field_of(&mut rng(s2), GraphKind::Tree, 25);
        let (fg, gg) = (f.graph(), g.graph());
        let mut ids: Vec<String> = fg.vertex_ids().iter().map(|v| format!("f{v}")).collect();
        ids.extend(gg.vertex_ids().iter().map(|v| format!("g{v}")));
        let n = fg.vertex_count();
        let mut edges: Vec<(String, usize, usize)> =
            (0..fg.edge_count()).map(|e| { let [a, b] = fg.endpoints(e); (format!("f{e}"), a, b) }).collect();
        edges.extend((0..gg.edge_count()).map(|e| { let [a, b] = gg.endpoints(e); (format!("g{e}"), a + n, b + n) }));
        let mut values = f.values().to_vec();
        values.extend_from_slice(g.values());
        let union = ScalarField::new(Arc::new(DomainGraph::new(ids, edges).unwrap()), values).unwrap();
        let sum = ttv_of(&f) + ttv_of(&g);
        prop_assert!(rel(ttv_of(&union), sum) <= 1e-12);
    }

    #[test]
    fn lenses_tile_the_middle_space(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_field(&mut r, 60);
        let ms = factorize(&f).0;
        let lens = if seed % 2 == 0 { random_lens(&mut r, &ms) } else { random_threshold_lens(&mut r, &ms, 5) };
        prop_assert!(validate_lens(&ms, &lens).is_valid());
        let parts = supports(&ms, &lens).unwrap();
        let report = check_decomposition(&ms, &parts);
        prop_assert!(report.passed(), "{:?}", report);
        let sum: f64 = parts.iter().map(|s| ttv_restricted(&ms, &s.fragments).unwrap()).sum();
        prop_assert!(rel(sum, ttv(&ms)) <= PIPELINE_RTOL);
        for region in lens.regions() {
            let levels: Vec<f64> = region.boundary(&ms).into_iter().map(|p| ms.point_level(p)).collect();
            prop_assert!(levels.windows(2).all(|w| w[0] == w[1]), "{:?}", levels);
        }
    }

    #[test]
    fn basis_reconstructs_and_filters(seed in any::<u64>(), coeffs in prop::collection::vec(prop_oneof![Just(0.0), -2.0..2.0f64], 1..200)) {
        let mut r = rng(seed);
        let f = random_field(&mut r, 60);
        let ms = factorize(&f).0;
        let lens = random_lens(&mut r, &ms);
        let basis = varilet_transform(&f, &lens).unwrap();
        let n = basis.len();
        prop_assert!(basis.reconstruction_error().unwrap() <= 1e-9 * (1.0 + f.sup_norm()));
        for g in basis.varilets() {
            prop_assert!(rel(ttv_of(g), 1.0) <= PIPELINE_RTOL);
        }
        let a: Vec<f64> = (0..n).map(|i| coeffs[i % coeffs.len()]).collect();
        let refs: Vec<&ScalarField> = basis.varilets().iter().collect();
        let combined = linear_combination(&refs, &a).unwrap();
        let expected: f64 = a.iter().map(|x| x.abs()).sum();
        let observed = ttv_of(&combined);
        prop_assert!(rel(observed, expected) <= PIPELINE_RTOL || (expected == 0.0 && observed == 0.0));

        let c = FilterCoefficients::new(a, n).unwrap();
        let filtered = filter(&basis, &c, true).unwrap();
        prop_assert!(filtered.path_deviation.unwrap() <= PIPELINE_RTOL * (1.0 + filtered.field.sup_norm()));

        let identity = filter(&basis, &FilterCoefficients::identity(&basis), false).unwrap();
        prop_assert_eq!(identity.canonical(&basis).unwrap(), f);
    }

    #[test]
    fn transform_is_schedule_independent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_field(&mut r, 80);
        let (ms, mf) = factorize(&f);
        let lens = random_lens(&mut r, &ms);
        let (ms, mf) = (Arc::new(ms), Arc::new(mf));
        let docs: Vec<String> = [1, 3, 8]
            .into_iter()
            .map(|threads| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
                pool.install(|| {
                    let basis = transform_factored(&f, ms.clone(), mf.clone(), &lens).unwrap();
                    BasisDoc::new(&basis).to_json()
                })
            })
            .collect();
        prop_assert_eq!(&docs[0], &docs[1]);
        prop_assert_eq!(&docs[0], &docs[2]);
    }
}
