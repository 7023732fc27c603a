mod common;

use common::oracles::{dense_macro, mann_whitney_auc};
use fedleak::data::{LabeledImage, Partition};
use fedleak::metrics::{confusion, macro_scores, reconstruction_distance, roc_auc};
use fedleak::Tensor;
use proptest::prelude::*;

#[test]
fn hand_tallied_macro_scores() {
    let s = macro_scores(&confusion(&[0, 0, 1, 1, 2, 2], &[0, 1, 1, 1, 2, 0], 3).unwrap());
    assert!((s.precision - 0.7222).abs() < 1e-4, "{}", s.precision);
    assert!((s.recall - 0.6667).abs() < 1e-4, "{}", s.recall);
    assert!((s.f1 - 0.6933).abs() < 1e-4, "{}", s.f1);
    assert!((s.accuracy - 0.6667).abs() < 1e-4, "{}", s.accuracy);
}

fn labelled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    // Coarse grid so ties are common.
    prop::collection::vec((0u8..12, any::<bool>()), 2..50)
        .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
        .prop_map(|v| v.into_iter().map(|(s, p)| (s as f64 / 11.0, p)).unzip())
}

fn dyadic_image(len: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec((-8i32..=8).prop_map(|k| k as f32 / 8.0), len)
}

fn partition(images: &[Vec<f32>]) -> Partition {
    Partition {
        owner_class: 0,
        samples: images
            .iter()
            .map(|p| LabeledImage {
                pixels: Tensor::vector(p.clone()),
                label: 0,
            })
            .collect(),
        source_indices: (0..images.len()).collect(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn auc_matches_pair_counting((scores, positives) in labelled_scores()) {
        let auc = roc_auc(&scores, &positives).unwrap().auc;
        prop_assert!((auc - mann_whitney_auc(&scores, &positives)).abs() <= 1e-9);
    }

    #[test]
    fn auc_complement((scores, positives) in labelled_scores()) {
        let neg: Vec<bool> = positives.iter().map(|p| !p).collect();
        let a = roc_auc(&scores, &positives).unwrap().auc + roc_auc(&scores, &neg).unwrap().auc;
        prop_assert!((a - 1.0).abs() <= 1e-9);
    }
}

proptest! {
    #[test]
    fn macro_scores_match_dense_matrix(pairs in prop::collection::vec((0usize..10, 0usize..11), 0..80)) {
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let s = macro_scores(&confusion(&t, &p, 10).unwrap());
        let (mp, mr, f1, acc) = dense_macro(&t, &p, 10);
        prop_assert!((s.precision - mp).abs() < 1e-12);
        prop_assert!((s.recall - mr).abs() < 1e-12);
        prop_assert!((s.f1 - f1).abs() < 1e-12);
        prop_assert!((s.accuracy - acc).abs() < 1e-12);
        for v in [s.precision, s.recall, s.f1, s.accuracy] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn macro_scores_ignore_sample_order(
        pairs in prop::collection::vec((0usize..10, 0usize..11), 1..60),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let (ts, ps): (Vec<usize>, Vec<usize>) = shuffled.into_iter().unzip();
        prop_assert_eq!(
            macro_scores(&confusion(&t, &p, 10).unwrap()),
            macro_scores(&confusion(&ts, &ps, 10).unwrap())
        );
    }

    #[test]
    fn distance_translation_exact(
        fakes in prop::collection::vec(dyadic_image(6), 1..5),
        // Power-of-two counts keep the class mean exact in 32 bits.
        reals in prop::collection::vec(dyadic_image(6), 1..5).prop_map(|mut v| {
            v.truncate(1 << v.len().ilog2());
            v
        }),
        shift in (-4i32..=4).prop_map(|k| k as f32 / 4.0),
    ) {
        let before = reconstruction_distance(
            &fakes.iter().map(|f| Tensor::vector(f.clone())).collect::<Vec<_>>(),
            &partition(&reals),
        ).unwrap();
        let moved = |v: &Vec<f32>| v.iter().map(|x| x + shift).collect::<Vec<f32>>();
        let after = reconstruction_distance(
            &fakes.iter().map(|f| Tensor::vector(moved(f))).collect::<Vec<_>>(),
            &partition(&reals.iter().map(moved).collect::<Vec<_>>()),
        ).unwrap();
        prop_assert!(before >= 0.0);
        prop_assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn distance_zero_for_mean(reals in prop::collection::vec(dyadic_image(5), 1..4)) {
        let part = partition(&reals);
        let mean = fedleak::data::mean_image(&part.samples).unwrap();
        prop_assert_eq!(reconstruction_distance(&[mean], &part).unwrap(), 0.0);
    }
}
