use nalgebra::DMatrix;
use proptest::prelude::*;

use teachsim::agents::optimal_choice;
use teachsim::analysis::{
    category_proportions, chi_square_sf, ngram_counts, ols_fit, t_two_sided_p, tokenize,
    CategoryLexicon, Design,
};
use teachsim::choicemodel::{
    log_sum_exp, object_pick_probability, sigmoid, softmax, trial_log_likelihood, ChoiceRecord,
    UtilityWeights,
};
use teachsim::env::{
    generate_trial, score_choice, GeneratorConfig, TrialBoard, ValueMap, NUM_FEATURES,
};

fn theta_strategy() -> impl Strategy<Value = UtilityWeights> {
    prop::collection::vec(-8.0f64..8.0, NUM_FEATURES)
        .prop_map(|v| UtilityWeights::from_slice(&v).unwrap())
}

fn board(seed: u64, counterbalanced: bool) -> TrialBoard {
    generate_trial(
        seed,
        (seed % 10) as u32,
        &ValueMap::build(counterbalanced),
        &GeneratorConfig::default(),
    )
    .unwrap()
}

fn outcome(board: &TrialBoard, cluster: usize, mask: u32) -> ChoiceRecord {
    ChoiceRecord {
        trial_index: board.trial_index,
        chosen_cluster: cluster as u8,
        picks: board
            .cluster(cluster)
            .enumerate()
            .map(|(k, o)| (o.id, mask >> k & 1 == 1))
            .collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn likelihood_sums_to_one(theta in theta_strategy(), seed in any::<u64>(), cb in any::<bool>()) {
        let b = board(seed, cb);
        let mut total = 0.0;
        for c in 0..4 {
            for m in 0..32 {
                total += trial_log_likelihood(&theta, &b, &outcome(&b, c, m)).unwrap().exp();
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_is_shift_invariant(v in prop::collection::vec(-50.0f64..50.0, 1..8), c in -500.0f64..500.0) {
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        for (a, b) in softmax(&v).iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((log_sum_exp(&shifted) - log_sum_exp(&v) - c).abs() < 1e-9);
    }

    #[test]
    fn pick_probability_is_a_sigmoid(theta in theta_strategy(), seed in any::<u64>()) {
        let b = board(seed, false);
        for o in &b.objects {
            let p = object_pick_probability(&theta, o);
            prop_assert!((0.0..=1.0).contains(&p));
            let u = theta.object_utility(o);
            prop_assert!((p + sigmoid(-u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_choice_dominates(seed in any::<u64>(), cb in any::<bool>()) {
        let b = board(seed, cb);
        let best = score_choice(&b, &optimal_choice(&b)).unwrap();
        for c in 0..4 {
            for m in 0..32 {
                prop_assert!(score_choice(&b, &outcome(&b, c, m)).unwrap() <= best);
            }
        }
    }

    #[test]
    fn recoloring_is_an_involution(seed in any::<u64>()) {
        let b = board(seed, true);
        prop_assert_eq!(b.recolored().recolored(), b);
    }

    #[test]
    fn board_json_round_trips(seed in any::<u64>()) {
        let b = board(seed, false);
        let back: TrialBoard = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        prop_assert_eq!(back, b);
    }

    #[test]
    fn ols_residuals_are_orthogonal(
        rows in 8usize..30,
        cols in 1usize..5,
        seed in prop::collection::vec(-10.0f64..10.0, 150),
        y_seed in prop::collection::vec(-20.0f64..20.0, 30),
    ) {
        let x = DMatrix::from_fn(rows, cols, |i, j| if j == 0 { 1.0 } else { seed[(i * 5 + j) % seed.len()] + (i * j) as f64 * 0.01 });
        let y = &y_seed[..rows];
        let names = (0..cols).map(|j| format!("x{j}")).collect();
        if let Ok(fit) = ols_fit(&Design::new(names, x.clone()).unwrap(), y) {
            let r = nalgebra::DVector::from_vec(fit.residuals.clone());
            let xtr = x.transpose() * r;
            let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
            prop_assert!(xtr.iter().all(|v| v.abs() < 1e-8 * scale * rows as f64), "{xtr}");
            prop_assert_eq!(fit.residual_df, rows - cols);
            prop_assert!(fit.p_values.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn t_p_value_decreases_in_t(df in 1.0f64..200.0, t in 0.0f64..6.0, dt in 0.01f64..2.0) {
        let a = t_two_sided_p(t, df).unwrap();
        let b = t_two_sided_p(t + dt, df).unwrap();
        prop_assert!(b < a);
        prop_assert_eq!(t_two_sided_p(-t, df).unwrap(), a);
    }

    #[test]
    fn chi_square_p_decreases_in_statistic(df in 1u32..30, x in 0.0f64..60.0, dx in 0.01f64..5.0) {
        let a = chi_square_sf(x, df as f64).unwrap();
        let b = chi_square_sf(x + dx, df as f64).unwrap();
        prop_assert!(b < a, "{a} {b}");
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn ngram_totals(words in prop::collection::vec("[a-e]{1,3}", 0..40), n in 1usize..4) {
        let tokens: Vec<String> = words;
        let total: usize = ngram_counts(&tokens, n).iter().map(|t| t.count).sum();
        prop_assert_eq!(total, tokens.len().saturating_sub(n - 1));
    }

    #[test]
    fn category_proportions_are_bounded(text in "[a-z0-9 ,.!-]{0,120}") {
        let lex = CategoryLexicon::default();
        let props = category_proportions(&tokenize(&text), &lex);
        let sum: f64 = props.values().sum();
        prop_assert!(props.values().all(|p| (0.0..=1.0).contains(p)));
        prop_assert!(sum <= 1.0 + 1e-12);
    }
}
