mod support;

use proptest::prelude::*;
use rand::Rng;
use support::{brute_force_viterbi, path_score, random_model, random_observations, rng};
use vircis_core::hmm::{
    best_path_logprob, emission_logprob, sequence_logprob, viterbi, viterbi_with_emissions, DiagonalGaussian,
    HmmModel,
};
use vircis_core::mfcc::FeatureMatrix;

#[test]
fn matches_exhaustive_enumeration() {
    let mut r = rng(11);
    for case in 0..300 {
        let n = r.random_range(1..=4);
        let t = r.random_range(1..=6);
        let dim = r.random_range(1..=2);
        let model = random_model(&mut r, n, dim);
        let obs = FeatureMatrix::from_rows(random_observations(&mut r, t, dim)).unwrap();
        let em = model.emission_matrix(&obs).unwrap();
        let (best, paths) = brute_force_viterbi(&model, &em);
        let (res, _) = viterbi(&obs, &model).unwrap();
        if best == f64::NEG_INFINITY {
            assert_eq!(res.log_prob, best, "case {case}");
            continue;
        }
        assert!(
            (res.log_prob - best).abs() < 1e-9,
            "case {case}: {} vs {best}",
            res.log_prob
        );
        let zero_based: Vec<usize> = res.state_path.iter().map(|s| s - 1).collect();
        let attained = path_score(&model, &em, &zero_based);
        assert!(
            (attained - best).abs() < 1e-9,
            "case {case}: returned path scores {attained}"
        );
        assert_eq!(res.state_path.len(), t);
        assert!(res.state_path.iter().all(|s| (1..=n).contains(s)));
        // exact score ties are vanishingly rare with continuous parameters
        if paths.len() == 1 {
            assert_eq!(res.state_path, paths[0], "case {case}");
        }
    }
}

#[test]
fn three_state_five_frame_sharp_model() {
    // discrete-like: three well-separated narrow Gaussians
    let ln = f64::ln;
    let g = |m: f64| DiagonalGaussian::new(vec![m], vec![0.01]).unwrap();
    let model = HmmModel::new(
        "sharp",
        vec![ln(0.5), ln(0.3), ln(0.2)],
        vec![
            vec![ln(0.6), ln(0.2), ln(0.1)],
            vec![ln(0.1), ln(0.5), ln(0.3)],
            vec![ln(0.2), ln(0.2), ln(0.4)],
        ],
        vec![ln(0.1), ln(0.1), ln(0.2)],
        vec![g(0.0), g(1.0), g(2.0)],
    )
    .unwrap();
    let obs = FeatureMatrix::from_rows(vec![vec![0.1], vec![0.9], vec![1.1], vec![2.05], vec![1.9]]).unwrap();
    let em = model.emission_matrix(&obs).unwrap();
    let (best, paths) = brute_force_viterbi(&model, &em);
    let (res, _) = viterbi(&obs, &model).unwrap();
    assert_eq!(paths, vec![vec![1, 2, 2, 3, 3]]);
    assert_eq!(res.state_path, vec![1, 2, 2, 3, 3]);
    assert!((res.log_prob - best).abs() < 1e-9);
}

#[test]
fn trellis_follows_the_recurrence() {
    let mut r = rng(5);
    for _ in 0..100 {
        let n = r.random_range(1..=4);
        let t = r.random_range(1..=8);
        let model = random_model(&mut r, n, 2);
        let obs = FeatureMatrix::from_rows(random_observations(&mut r, t, 2)).unwrap();
        let (res, trellis) = viterbi(&obs, &model).unwrap();

        assert_eq!(trellis.scores.len(), n + 2);
        assert!(trellis.scores.iter().all(|row| row.len() == t));
        assert_eq!(trellis.backpointers.len(), n);
        for s in 1..=n {
            let o1 = obs.row(0);
            let expected = model.entry_logprob()[s - 1] + emission_logprob(&model, s, o1).unwrap();
            assert_eq!(trellis.score(s, 0), expected);
            assert_eq!(trellis.backpointers[s - 1][0], 0);
        }
        for t_i in 1..t {
            for s in 1..=n {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 1;
                for p in 1..=n {
                    let v = trellis.score(p, t_i - 1) + model.trans_logprob()[p - 1][s - 1];
                    if v > best {
                        best = v;
                        arg = p;
                    }
                }
                let b = emission_logprob(&model, s, obs.row(t_i)).unwrap();
                assert_eq!(trellis.score(s, t_i), best + b);
                assert_eq!(trellis.backpointers[s - 1][t_i], arg);
            }
        }
        assert!(trellis.backpointers.iter().flatten().all(|&b| b <= n));
        assert_eq!(trellis.final_score, res.log_prob);
        assert_eq!(trellis.score(n + 1, t - 1), res.log_prob);
        assert!(trellis.scores[0].iter().all(|v| *v == f64::NEG_INFINITY));
    }
}

#[test]
fn sequence_logprob_is_viterbi_score() {
    let mut r = rng(77);
    for _ in 0..100 {
        let n = r.random_range(1..=5);
        let t = r.random_range(1..=20);
        let model = random_model(&mut r, n, 3);
        let obs = FeatureMatrix::from_rows(random_observations(&mut r, t, 3)).unwrap();
        assert_eq!(
            sequence_logprob(&obs, &model).unwrap().to_bits(),
            viterbi(&obs, &model).unwrap().0.log_prob.to_bits()
        );
    }
}

#[test]
fn single_state_score_grows_with_exit_probability() {
    // T = 1: no self-loop is taken, so only the exit term moves
    let obs = FeatureMatrix::from_rows(vec![vec![0.2]]).unwrap();
    let mut prev = f64::NEG_INFINITY;
    for exit in [0.05, 0.2, 0.5, 0.8, 0.95] {
        let m = HmmModel::new(
            "w",
            vec![0.0],
            vec![vec![(1.0f64 - exit).ln()]],
            vec![exit.ln()],
            vec![DiagonalGaussian::new(vec![0.0], vec![1.0]).unwrap()],
        )
        .unwrap();
        let lp = sequence_logprob(&obs, &m).unwrap();
        assert!(lp > prev);
        prev = lp;
    }
}

#[test]
fn forced_start_state() {
    let mut r = rng(3);
    for _ in 0..20 {
        let base = random_model(&mut r, 3, 1);
        let ninf = f64::NEG_INFINITY;
        let forced = HmmModel::new(
            "forced",
            vec![ninf, 0.0, ninf],
            base.trans_logprob().to_vec(),
            base.exit_logprob().to_vec(),
            base.emissions().to_vec(),
        )
        .unwrap();
        let obs = FeatureMatrix::from_rows(random_observations(&mut r, 4, 1)).unwrap();
        let (res, _) = viterbi(&obs, &forced).unwrap();
        if res.log_prob > ninf {
            assert_eq!(res.state_path[0], 2);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn emission_shift_invariance(seed in 0u64..10_000, shift in -50.0f64..50.0) {
        let mut r = rng(seed);
        let n = r.random_range(1..=4);
        let t = r.random_range(1..=10);
        let model = random_model(&mut r, n, 2);
        let obs = FeatureMatrix::from_rows(random_observations(&mut r, t, 2)).unwrap();
        let em = model.emission_matrix(&obs).unwrap();
        let shifted: Vec<Vec<f64>> = em.iter().map(|row| row.iter().map(|x| x + shift).collect()).collect();
        let (a, _) = viterbi_with_emissions(&model, &em).unwrap();
        let (b, _) = viterbi_with_emissions(&model, &shifted).unwrap();
        prop_assume!(a.log_prob.is_finite());
        prop_assert!((b.log_prob - (a.log_prob + shift * t as f64)).abs() < 1e-8);
        prop_assert_eq!(a.state_path, b.state_path);
        prop_assert_eq!(best_path_logprob(&model, &shifted).unwrap(), b.log_prob);
    }
}
