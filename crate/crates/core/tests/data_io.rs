use gnr_core::autodiff::Tensor2D;
use gnr_core::baselines;
use gnr_core::eval::{self, Method};
use gnr_core::gnr::{GnrConfig, GnrParams, MaskPathway};
use gnr_core::io::{self, Checkpoint, CheckpointModel, FlatConfig, RatingMode, RunConfig};
use gnr_core::missing::{compose_missing, compose_observed, recombine, zero_impute, CompleteMatrix, FeatureStats, IncompleteMatrix, Mask};
use gnr_core::rng::SeededRng;
use gnr_core::synth::{self, GaussianSpec, MissingSpec};
use gnr_core::Error;
use proptest::prelude::*;

fn matrix_and_mask() -> impl Strategy<Value = (CompleteMatrix, Mask)> {
    (1usize..8, 1usize..6).prop_flat_map(|(r, c)| {
        (
            prop::collection::vec(-1e6f64..1e6, r * c),
            prop::collection::vec(any::<bool>(), r * c),
        )
            .prop_map(move |(v, b)| (CompleteMatrix::from_vec(r, c, v).unwrap(), Mask::new(r, c, b).unwrap()))
    })
}

proptest! {
    #[test]
    fn observed_and_missing_parts_recombine((x, m) in matrix_and_mask()) {
        let obs = compose_observed(&x, &m).unwrap();
        let mis = compose_missing(&x, &m).unwrap();
        let back = recombine(&obs, &mis).unwrap();
        prop_assert_eq!(back.values().as_slice(), x.values().as_slice());
        prop_assert_eq!(mis.mask(), &m.complement());
        prop_assert!(recombine(&obs, &obs).is_err());
    }

    #[test]
    fn zero_imputation_zeroes_exactly_the_missing_entries((x, m) in matrix_and_mask()) {
        let z = zero_impute(&compose_observed(&x, &m).unwrap());
        for (k, &obs) in m.bits().iter().enumerate() {
            let expect = if obs { x.values().as_slice()[k] } else { 0.0 };
            prop_assert_eq!(z.values().as_slice()[k].to_bits(), expect.to_bits());
        }
    }

    #[test]
    fn matrix_csv_round_trips((x, m) in matrix_and_mask()) {
        let obs = compose_observed(&x, &m).unwrap();
        let names = io::default_names(x.cols());
        let text = io::incomplete_to_csv(&names, &obs);
        let table = io::parse_matrix_csv(&text, "memory").unwrap();
        prop_assert_eq!(&table.names, &names);
        prop_assert_eq!(&table.data, &obs);
    }

    #[test]
    fn standardization_round_trips((x, _m) in matrix_and_mask()) {
        if let Ok(stats) = FeatureStats::from_complete(&x) {
            let s = stats.standardize_complete(&x).unwrap();
            let back = stats.destandardize_complete(&s).unwrap();
            for (a, b) in back.values().as_slice().iter().zip(x.values().as_slice()) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn non_finite_placeholders_never_leak() {
    let mut v = Tensor2D::from_array(ndarray::arr2(&[[1.0, f64::NAN], [f64::INFINITY, 4.0]]));
    let m = Mask::new(2, 2, vec![true, false, false, true]).unwrap();
    let x = IncompleteMatrix::new(v.clone(), m.clone()).unwrap();
    assert!(zero_impute(&x).values().is_finite());
    assert_eq!(x.get(0, 1), None);
    v.set(0, 0, f64::NAN);
    assert!(IncompleteMatrix::new(v, m).is_err());
}

#[test]
fn csv_errors_carry_a_location() {
    let err = io::parse_matrix_csv("a,b\n1,2\n3,oops\n", "t.csv").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("row 3") && msg.contains("column 2"), "{msg}");
    assert!(io::parse_matrix_csv("a,b\n1,2,3\n", "t.csv").is_err());
    assert!(io::parse_matrix_csv("", "t.csv").is_err());
    let t = io::parse_matrix_csv("a,b\nNA,2\n,nan\n", "t.csv").unwrap();
    assert_eq!(t.data.mask().count_missing(), 3);
}

#[test]
fn triplets_follow_the_rating_transform() {
    let text = "user,item,rating\n0,0,1\n0,1,3\n1,2,5\n";
    let m = io::parse_triplets(text, "r", 2, 3, 5, RatingMode::Test).unwrap();
    assert_eq!(m.get(0, 0), Some(1.0 / 31.0));
    assert_eq!(m.get(0, 1), Some(7.0 / 31.0));
    assert_eq!(m.get(1, 2), Some(1.0));
    assert_eq!(m.get(1, 0), None);
    assert!(io::parse_triplets("0,0,1\n0,0,2\n", "r", 1, 1, 5, RatingMode::Test).is_err());
    assert!(io::parse_triplets("0,0,6\n", "r", 1, 1, 5, RatingMode::Test).is_err());
    assert!(io::parse_triplets("3,0,1\n", "r", 1, 1, 5, RatingMode::Test).is_err());

    let a = io::parse_triplets(text, "r", 2, 3, 5, RatingMode::Train { seed: 9 }).unwrap();
    let b = io::parse_triplets(text, "r", 2, 3, 5, RatingMode::Train { seed: 9 }).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.get(0, 0), Some(1.0 / 31.0));
}

#[test]
fn config_round_trips_and_rejects_unknown_keys() {
    let mut flat = FlatConfig::parse("seed = 7\ngnr.alpha = 0.5\nmissing.probability = 0.8\n", "c").unwrap();
    flat.set_pair("gnr.hidden_sizes=16,16").unwrap();
    let cfg = RunConfig::from_flat(&flat).unwrap();
    assert_eq!(cfg.gnr.seed, 7);
    assert_eq!(cfg.gnr.alpha, 0.5);
    assert_eq!(cfg.gnr.hidden_sizes, vec![16, 16]);
    let again = RunConfig::from_flat(&FlatConfig::parse(&cfg.to_flat().to_text(), "echo").unwrap()).unwrap();
    assert_eq!(again, cfg);

    assert!(RunConfig::from_flat(&FlatConfig::parse("gnr.alpah = 1\n", "c").unwrap()).is_err());
    assert!(FlatConfig::parse("seed = 1\nseed = 2\n", "c").is_err());
    assert!(FlatConfig::parse("just words\n", "c").is_err());
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let cfg = GnrConfig { hidden_sizes: vec![5, 3], seed: 11, alpha: 0.25, ..GnrConfig::synthetic() };
    let params = GnrParams::new(4, &cfg, MaskPathway::Serial, &mut SeededRng::new(3));
    let stats = FeatureStats::new(vec![0.1, -2.0, 3.5, 1e-9], vec![1.0, 0.3, 7.25, 2.0]).unwrap();
    let ck = Checkpoint {
        method: Method::Baseline(baselines::BaselineKind::SerialSelection),
        stats: stats.clone(),
        model: CheckpointModel::Network { config: cfg, params },
    };
    assert_eq!(Checkpoint::parse(&ck.to_text(), "ck").unwrap(), ck);

    let means = Checkpoint { method: Method::Baseline(baselines::BaselineKind::Mean), stats, model: CheckpointModel::Means(vec![0.5, -1.0, 1.0 / 3.0, 0.0]) };
    assert_eq!(Checkpoint::parse(&means.to_text(), "ck").unwrap(), means);

    let truncated: String = ck.to_text().lines().take(8).collect::<Vec<_>>().join("\n");
    assert!(Checkpoint::parse(&truncated, "ck").is_err());
    assert!(Checkpoint::parse("not-a-checkpoint 1\n", "ck").is_err());
}

#[test]
fn output_dir_precedence() {
    let flag = std::path::Path::new("from_flag");
    let conf = std::path::Path::new("from_config");
    assert_eq!(io::resolve_output_dir(Some(flag), conf), flag);
    // without the variable the config wins
    if std::env::var_os(io::OUT_DIR_ENV).is_none() {
        assert_eq!(io::resolve_output_dir(None, conf), conf);
    }
}

#[test]
fn mean_imputation_on_mcar_scores_about_one() {
    // standardized features: the observed mean is near 0, so the error at
    // missing entries is the feature's unit variance
    let x = GaussianSpec::equicorrelated(5000, 4, 0.5).sample(&mut SeededRng::new(1)).unwrap();
    let stats = FeatureStats::from_complete(&x).unwrap();
    let xs = stats.standardize_complete(&x).unwrap();
    let m = MissingSpec::mcar(0.3).apply(&xs, &mut SeededRng::new(2)).unwrap();
    let imputed = baselines::mean_impute(&compose_observed(&xs, &m).unwrap()).unwrap();
    let rmse = eval::rmse_missing(&xs, &imputed, &m).unwrap();
    assert!((rmse - 1.0).abs() < 0.03, "rmse {rmse}");
}

#[test]
fn metrics_against_hand_computed_values() {
    let t = CompleteMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let i = CompleteMatrix::from_vec(2, 2, vec![1.0, 0.0, 3.0, 7.0]).unwrap();
    let m = Mask::new(2, 2, vec![true, false, true, false]).unwrap();
    assert_eq!(eval::mse_missing(&t, &i, &m).unwrap(), (4.0 + 9.0) / 2.0);
    assert!(matches!(eval::rmse_missing(&t, &i, &Mask::all_observed(2, 2)), Err(Error::UndefinedMetric(_))));

    let prob = Tensor2D::from_vec(2, 2, vec![0.9, 0.2, 0.4, 0.6]).unwrap();
    assert_eq!(eval::mask_accuracy(&m, &prob, 0.5, &[0, 1]).unwrap(), 0.5);
    assert_eq!(eval::mask_accuracy(&m, &prob, 0.5, &[1]).unwrap(), 0.5);
    assert_eq!(eval::mask_accuracy(&m, &prob, 0.5, &[0]).unwrap(), 0.5);
}

#[test]
fn self_masking_hides_large_values() {
    let x = GaussianSpec::equicorrelated(4000, 4, 0.5).sample(&mut SeededRng::new(5)).unwrap();
    let m = synth::self_mask(&x, &[0, 1, 2, 3], 1.0, &mut SeededRng::new(6)).unwrap();
    let means = x.column_means();
    for i in 0..x.rows() {
        for (j, mean) in means.iter().enumerate() {
            assert_eq!(m.is_observed(i, j), x.get(i, j) <= *mean);
        }
    }
}
