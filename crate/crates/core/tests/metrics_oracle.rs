mod common;

use common::oracle;
use pianojudge::metrics::{self, ClassBatch, MultiLabelBatch};
use pianojudge::rng::substream;
use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;

const TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

#[test]
fn class_metrics_match_oracle() {
    let mut rng = substream(11, "metric-oracle");
    for _ in 0..300 {
        let (scores, labels) = oracle::random_class_batch(&mut rng);
        let batch = ClassBatch::new(scores.clone(), labels.clone()).unwrap();
        for n in 0..3 {
            assert!(close(
                metrics::acc_within_n(&batch, n).unwrap(),
                oracle::acc_within_n(&scores, &labels, n)
            ));
        }
        assert!(close(metrics::macro_f1(&batch).unwrap(), oracle::macro_f1(&scores, &labels)));
    }
}

#[test]
fn multilabel_metrics_match_oracle() {
    let mut rng = substream(12, "metric-oracle");
    for _ in 0..300 {
        let (scores, labels) = oracle::random_multilabel_batch(&mut rng);
        let batch = MultiLabelBatch::new(scores.clone(), labels.clone()).unwrap();
        match (metrics::mean_average_precision(&batch).ok(), oracle::mean_average_precision(&scores, &labels)) {
            (Some(a), Some(b)) => assert!(close(a, b)),
            (a, b) => assert_eq!(a, b),
        }
        match (metrics::auc(&batch).ok(), oracle::auc(&scores, &labels)) {
            (Some(a), Some(b)) => assert!(close(a, b)),
            (a, b) => assert_eq!(a, b),
        }
        assert!(close(
            metrics::multilabel_accuracy(&batch, 0.5).unwrap(),
            oracle::multilabel_accuracy(&scores, &labels, 0.5)
        ));
        assert!(close(
            metrics::single_label_accuracy(&batch).unwrap(),
            oracle::single_label_accuracy(&scores, &labels)
        ));
    }
}

#[test]
fn per_class_ap_matches_oracle() {
    let mut rng = substream(13, "metric-oracle");
    for _ in 0..300 {
        let (scores, labels) = oracle::random_multilabel_batch(&mut rng);
        let batch = MultiLabelBatch::new(scores.clone(), labels.clone()).unwrap();
        let got = metrics::average_precision_per_class(&batch).unwrap();
        for (c, ap) in got.iter().enumerate() {
            let s: Vec<f64> = scores.iter().map(|r| r[c]).collect();
            let l: Vec<bool> = labels.iter().map(|r| r[c]).collect();
            match (ap, oracle::average_precision(&s, &l)) {
                (Some(a), Some(b)) => assert!(close(*a, b), "{a} vs {b}"),
                (a, b) => assert_eq!(*a, b),
            }
        }
    }
}

fn class_batch() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..6, 1usize..15).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..5, k), n)
                .prop_map(|v| v.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect()),
            prop::collection::vec(0..k, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_failure_persistence(FileFailurePersistence::WithSource("regressions")))]

    #[test]
    fn class_metrics_bounded_and_order_invariant((scores, labels) in class_batch(), rot in 0usize..15) {
        let a = ClassBatch::new(scores.clone(), labels.clone()).unwrap();
        let r = rot % labels.len();
        let mut s2 = scores.clone();
        let mut l2 = labels.clone();
        s2.rotate_left(r);
        l2.rotate_left(r);
        let b = ClassBatch::new(s2, l2).unwrap();
        for f in [metrics::accuracy, metrics::macro_f1] {
            let (x, y) = (f(&a).unwrap(), f(&b).unwrap());
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert!(close(x, y));
        }
        let mut prev = 0.0;
        for n in 0..6 {
            let v = metrics::acc_within_n(&a, n).unwrap();
            prop_assert!(v + TOL >= prev);
            prev = v;
        }
    }

    #[test]
    fn ap_order_invariant(scores in prop::collection::vec(0u8..4, 1..20), seed in any::<u64>()) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let relevant: Vec<bool> = (0..scores.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let a = metrics::average_precision(&scores, &relevant);
        let mut idx: Vec<usize> = (0..scores.len()).collect();
        idx.reverse();
        let s2: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let r2: Vec<bool> = idx.iter().map(|&i| relevant[i]).collect();
        let b = metrics::average_precision(&s2, &r2);
        match (a, b) {
            (Some(x), Some(y)) => {
                prop_assert!(close(x, y));
                prop_assert!(x > 0.0 && x <= 1.0);
            }
            (x, y) => prop_assert_eq!(x, y),
        }
    }
}
