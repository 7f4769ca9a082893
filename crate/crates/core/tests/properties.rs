//! Property tests. Each checks a library routine against an independent
//! brute-force oracle or an algebraic identity over random inputs.

use approx::assert_abs_diff_eq;
use proptest::collection::vec;
use proptest::prelude::*;

use ciu_core::ciu::{explain_sets, linear_joint_importance, CiuConfig};
use ciu_core::coalition::{all_coalitions, Coalition};
use ciu_core::data::{Feature, FeatureSchema, Instance};
use ciu_core::game::{
    game_properties, harsanyi_dividends, in_core, is_imputation, reconstruct_from_dividends, Game, PayoffVector,
};
use ciu_core::model::{LinearModel, Predictor};
use ciu_core::report::{render_barplot, ExplanationDocument, Method, OutputRef};
use ciu_core::sampling::{perturbation_points, SamplerConfig, SamplingMode};
use ciu_core::shapley::{exact_model_shapley, exact_shapley_game, linear_shapley, BackgroundSet};
use ciu_core::vocabulary::{IndexSet, NamedSet, Vocabulary};

const TOL: f64 = 1e-9;

fn game_of(n: usize) -> impl Strategy<Value = Game> {
    vec(-10.0..10.0f64, (1usize << n) - 1).prop_map(move |w| {
        let mut worths = vec![0.0];
        worths.extend(w);
        Game::new(n, worths).unwrap()
    })
}

fn game(max_n: usize) -> impl Strategy<Value = Game> {
    (1..=max_n).prop_flat_map(game_of)
}

/// Games with non-negative dividends; these are always convex.
fn convex_game(max_n: usize) -> impl Strategy<Value = Game> {
    (1..=max_n).prop_flat_map(|n| {
        vec(0.0..5.0f64, (1usize << n) - 1).prop_map(move |d| {
            Game::from_fn(n, |s| {
                s.subsets()
                    .filter(|t| !t.is_empty())
                    .map(|t| d[t.index() - 1])
                    .sum()
            })
            .unwrap()
        })
    })
}

fn mobius_oracle(g: &Game, t: Coalition) -> f64 {
    t.subsets()
        .map(|s| {
            let sign = if (t.len() - s.len()).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * g.worth(s)
        })
        .sum()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, first);
            out.push(p);
        }
    }
    out
}

/// Average marginal contribution over every player ordering.
fn shapley_oracle(g: &Game) -> Vec<f64> {
    let n = g.n_players();
    let players: Vec<usize> = (0..n).collect();
    let mut phi = vec![0.0; n];
    for order in permutations(&players) {
        let mut s = Coalition::default();
        for &i in &order {
            let with = s.with(i);
            phi[i] += g.worth(with) - g.worth(s);
            s = with;
        }
    }
    phi.iter().map(|v| v / factorial(n)).collect()
}

fn unit_weights(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(0.05..1.0f64, 1..=max_n)
}

fn unit_instance(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(0.0..=1.0f64, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dividends_round_trip(g in game(8)) {
        let back = reconstruct_from_dividends(&harsanyi_dividends(&g)).unwrap();
        for s in all_coalitions(g.n_players()) {
            prop_assert!((back.worth(s) - g.worth(s)).abs() <= TOL);
        }
    }

    #[test]
    fn dividends_match_alternating_sum(g in game(6)) {
        let d = harsanyi_dividends(&g);
        for t in all_coalitions(g.n_players()).skip(1) {
            prop_assert!((d.get(t).unwrap() - mobius_oracle(&g, t)).abs() <= TOL);
        }
    }

    #[test]
    fn dividends_are_linear(
        (a, b) in (2usize..=6).prop_flat_map(|n| (game_of(n), game_of(n))),
        alpha in -3.0..3.0f64,
        beta in -3.0..3.0f64,
    ) {
        let mixed = harsanyi_dividends(&a.combine(alpha, &b, beta).unwrap());
        let (da, db) = (harsanyi_dividends(&a), harsanyi_dividends(&b));
        for t in all_coalitions(a.n_players()).skip(1) {
            let expected = alpha * da.get(t).unwrap() + beta * db.get(t).unwrap();
            prop_assert!((mixed.get(t).unwrap() - expected).abs() <= 1e-8);
        }
    }

    #[test]
    fn property_implications_hold(g in prop_oneof![game(5), convex_game(5)]) {
        let r = game_properties(&g);
        prop_assert!(!r.convex || r.superadditive);
        prop_assert!(!r.superadditive || r.zero_monotonic);
    }

    #[test]
    fn positive_dividend_games_are_convex(g in convex_game(6)) {
        let r = game_properties(&g);
        prop_assert!(r.convex && r.superadditive && r.monotonic);
    }

    #[test]
    fn core_lies_within_imputations(g in prop_oneof![game(5), convex_game(5)], raw in vec(-5.0..5.0f64, 5)) {
        let n = g.n_players();
        let grand = g.worth(Coalition::grand(n));
        // Rescale to efficiency so the core test is not trivially false.
        let mut x: Vec<f64> = raw[..n].to_vec();
        let shift = (grand - x.iter().sum::<f64>()) / n as f64;
        x.iter_mut().for_each(|v| *v += shift);
        for candidate in [PayoffVector::new(x), exact_shapley_game(&g).unwrap()] {
            if in_core(&g, &candidate).unwrap() {
                prop_assert!(is_imputation(&g, &candidate).unwrap());
            }
        }
    }

    #[test]
    fn shapley_of_convex_games_is_in_core(g in convex_game(6)) {
        prop_assert!(in_core(&g, &exact_shapley_game(&g).unwrap()).unwrap());
    }

    #[test]
    fn exact_shapley_matches_permutation_average(g in game(6)) {
        let phi = exact_shapley_game(&g).unwrap();
        for (a, b) in phi.as_slice().iter().zip(shapley_oracle(&g)) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn shapley_is_efficient_and_linear(
        (a, b) in (1usize..=7).prop_flat_map(|n| (game_of(n), game_of(n))),
        alpha in -2.0..2.0f64,
    ) {
        let n = a.n_players();
        let pa = exact_shapley_game(&a).unwrap();
        prop_assert!((pa.total() - a.worth(Coalition::grand(n))).abs() <= TOL);
        let mixed = exact_shapley_game(&a.combine(alpha, &b, 1.0).unwrap()).unwrap();
        let pb = exact_shapley_game(&b).unwrap();
        for i in 0..n {
            let expected = alpha * pa.as_slice()[i] + pb.as_slice()[i];
            prop_assert!((mixed.as_slice()[i] - expected).abs() <= 1e-8);
        }
    }

    #[test]
    fn linear_shapley_matches_replacement_game(
        (w, x, rows) in unit_weights(5).prop_flat_map(|w| {
            let n = w.len();
            (Just(w), unit_instance(n), vec(unit_instance(n), 1..5))
        })
    ) {
        let m = LinearModel::unit(w.clone()).unwrap();
        let inst = Instance::new(m.schema(), x.clone()).unwrap();
        let bg = BackgroundSet::new(m.schema(), rows).unwrap();
        let exact = exact_model_shapley(&m, &inst, &bg, 0).unwrap();
        let closed = linear_shapley(&w, &x, &bg).unwrap();
        for (a, b) in exact.attributions.iter().zip(&closed) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        // The explanation model reproduces the prediction with every feature present.
        let all = vec![true; w.len()];
        prop_assert!((exact.evaluate(&all) - m.predict_values(&x)[0]).abs() <= 1e-9);
    }

    #[test]
    fn ciu_values_stay_in_range_and_repeat(
        (w, x) in unit_weights(6).prop_flat_map(|w| { let n = w.len(); (Just(w), unit_instance(n)) }),
        baseline in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let m = LinearModel::unit(w.clone()).unwrap();
        let inst = Instance::new(m.schema(), x).unwrap();
        let cfg = CiuConfig {
            sampler: SamplerConfig::default().with_budget(300).with_seed(seed),
            baseline,
            utility: None,
        };
        let sets = Vocabulary::singletons(m.schema()).select(Default::default(), m.schema()).unwrap();
        let all = IndexSet::all(w.len());
        let first = explain_sets(&m, &inst, &sets, &all, 0, &cfg).unwrap();
        for r in &first {
            prop_assert!((0.0..=1.0).contains(&r.ci) && (0.0..=1.0).contains(&r.cu));
            prop_assert_eq!(r.influence, r.ci * (r.cu - r.baseline));
        }
        prop_assert_eq!(&first, &explain_sets(&m, &inst, &sets, &all, 0, &cfg).unwrap());
    }

    #[test]
    fn linear_ci_matches_weight_share(
        (w, x, mask) in unit_weights(6).prop_flat_map(|w| {
            let n = w.len();
            (Just(w), unit_instance(n), 1u32..(1u32 << n))
        })
    ) {
        let m = LinearModel::unit(w.clone()).unwrap();
        let inst = Instance::new(m.schema(), x).unwrap();
        let s = IndexSet::new(Coalition::from_bits(mask).members()).unwrap();
        let all = IndexSet::all(w.len());
        let set = NamedSet { name: "S".into(), features: s.clone() };
        let r = explain_sets(&m, &inst, &[set], &all, 0, &CiuConfig::default()).unwrap();
        let share: f64 = s.indices().iter().map(|&i| w[i]).sum::<f64>() / w.iter().sum::<f64>();
        prop_assert!((r[0].ci - share).abs() <= 1e-9);
        prop_assert!((linear_joint_importance(&w, &s, &all).unwrap() - share).abs() <= 1e-12);
    }

    #[test]
    fn influence_equals_linear_shapley_at_neutral_background(
        (raw, x) in unit_weights(6).prop_flat_map(|w| { let n = w.len(); (Just(w), unit_instance(n)) })
    ) {
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let n = w.len();
        let m = LinearModel::unit(w.clone()).unwrap();
        let inst = Instance::new(m.schema(), x.clone()).unwrap();
        let bg = BackgroundSet::new(m.schema(), vec![vec![0.0; n], vec![1.0; n]]).unwrap();
        let shap = linear_shapley(&w, &x, &bg).unwrap();
        let sets = Vocabulary::singletons(m.schema()).select(Default::default(), m.schema()).unwrap();
        let results = explain_sets(&m, &inst, &sets, &IndexSet::all(n), 0, &CiuConfig::default()).unwrap();
        for r in results {
            let i = r.features.indices()[0];
            prop_assert!((r.influence - shap[i]).abs() <= 1e-9, "{} vs {}", r.influence, shap[i]);
        }
    }

    #[test]
    fn larger_budgets_extend_the_sample(seed in any::<u64>(), small in 1usize..400, extra in 0usize..400, x in unit_instance(5)) {
        let schema = FeatureSchema::new((0..5).map(|i| Feature::numeric(format!("f{i}"), 0.0, 1.0)).collect()).unwrap();
        let s = IndexSet::all(5);
        let cfg = SamplerConfig::default().with_seed(seed);
        let a = perturbation_points(&schema, &x, &s, &cfg.with_budget(small)).unwrap();
        let b = perturbation_points(&schema, &x, &s, &cfg.with_budget(small + extra)).unwrap();
        prop_assert_eq!(a.mode, SamplingMode::Sampled);
        prop_assert_eq!(a.points.len(), small);
        prop_assert_eq!(&b.points[..small], &a.points[..]);
        prop_assert_eq!(&a.points[0], &x);
    }

    #[test]
    fn documents_round_trip_and_bars_scale_with_utility(
        (w, x) in unit_weights(6).prop_flat_map(|w| { let n = w.len(); (Just(w), unit_instance(n)) }),
        baseline in 0.0..=1.0f64,
    ) {
        let m = LinearModel::unit(w.clone()).unwrap();
        let inst = Instance::new(m.schema(), x.clone()).unwrap();
        let cfg = CiuConfig { baseline, ..CiuConfig::default() };
        let sets = Vocabulary::singletons(m.schema()).select(Default::default(), m.schema()).unwrap();
        let results = explain_sets(&m, &inst, &sets, &IndexSet::all(w.len()), 0, &cfg).unwrap();
        let doc = ExplanationDocument::new(
            "x", "linear", OutputRef { index: 0, name: "y".into() }, Method::Ciu, baseline, m.predict_values(&x)[0],
        )
        .with_instance(inst.describe(m.schema()))
        .with_ciu(results.clone());
        prop_assert_eq!(&ExplanationDocument::from_json(&doc.to_json()).unwrap(), &doc);

        let svg = render_barplot(&doc).svg;
        let widths = |class: &str| -> Vec<f64> {
            svg.split("<rect")
                .filter(|r| r.contains(&format!("class=\"{class}\"")))
                .map(|r| {
                    let at = r.find("width=\"").unwrap() + 7;
                    r[at..at + r[at..].find('"').unwrap()].parse().unwrap()
                })
                .collect()
        };
        let (outer, inner) = (widths("outer"), widths("inner"));
        prop_assert_eq!(outer.len(), results.len());
        for ((o, i), r) in outer.iter().zip(&inner).zip(&results) {
            if *o >= 1.0 {
                // Both widths are rounded to 3 decimals.
                prop_assert!((i / o - r.cu).abs() <= 0.001 / o + 1e-9, "{} / {} vs {}", i, o, r.cu);
            }
        }
    }
}

#[test]
fn unanimity_dividends_are_indicators() {
    for n in 1..=6 {
        for t in all_coalitions(n).skip(1) {
            let d = harsanyi_dividends(&ciu_core::game::unanimity_game(t, n).unwrap());
            for s in all_coalitions(n).skip(1) {
                assert_eq!(d.get(s).unwrap(), if s == t { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn shapley_weights_sum_to_one() {
    // The unanimity game on N splits one unit equally.
    let g = ciu_core::game::unanimity_game(Coalition::grand(5), 5).unwrap();
    for v in exact_shapley_game(&g).unwrap().as_slice() {
        assert_abs_diff_eq!(*v, 0.2, epsilon = 1e-12);
    }
}

#[test]
fn monte_carlo_errors_are_calibrated() {
    use ciu_core::shapley::monte_carlo_shapley;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut r = ChaCha8Rng::seed_from_u64(99);
    let mut zs = Vec::new();
    for seed in 0..300u64 {
        let m = LinearModel::unit((0..3).map(|_| r.random_range(0.05..1.0)).collect()).unwrap();
        let x: Vec<f64> = (0..3).map(|_| r.random_range(0.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| r.random_range(0.0..1.0)).collect()).collect();
        let bg = BackgroundSet::new(m.schema(), rows).unwrap();
        let exact = linear_shapley(m.weights(), &x, &bg).unwrap();
        let mc = monte_carlo_shapley(&m, &Instance::new(m.schema(), x).unwrap(), &bg, 2000, seed, 0).unwrap();
        zs.extend((0..3).map(|i| (mc.values[i] - exact[i]) / mc.stderr[i]));
    }
    // Standardised errors should look like draws from N(0, 1).
    let n = zs.len() as f64;
    let mean = zs.iter().sum::<f64>() / n;
    let var = zs.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 0.15, "mean {mean}");
    assert!((0.8..1.2).contains(&var), "variance {var}");
}
