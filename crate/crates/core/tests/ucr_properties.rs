mod common;

use proptest::prelude::*;
use rptsc_core::ucr::{
    load_ucr_file, parse_ucr_file, split_validation, to_ucr_string, validation_count, znormalize,
};

fn ucr_text() -> impl Strategy<Value = String> {
    (2usize..40, 1usize..20, 2usize..5).prop_flat_map(|(rows, len, classes)| {
        prop::collection::vec(
            (0..classes, prop::collection::vec(-1e3f64..1e3, len..=len)),
            rows..=rows,
        )
        .prop_filter("needs two classes", |rows| {
            rows.iter().any(|r| r.0 != rows[0].0)
        })
        .prop_map(|rows| {
            rows.iter()
                .map(|(label, values)| {
                    let mut line = format!("{}", *label as i64 * 3 - 2);
                    for v in values {
                        line.push_str(&format!(",{v:e}"));
                    }
                    line
                })
                .collect::<Vec<_>>()
                .join("\n")
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn write_then_parse_is_identity(text in ucr_text()) {
        let ds = parse_ucr_file(&text, "p").unwrap();
        let again = parse_ucr_file(&to_ucr_string(&ds), "p").unwrap();
        prop_assert_eq!(ds, again);
    }

    #[test]
    fn label_indices_follow_raw_label_order(text in ucr_text()) {
        let ds = parse_ucr_file(&text, "p").unwrap();
        prop_assert!(ds.class_values.windows(2).all(|w| w[0] < w[1]));
        for s in &ds.series {
            let raw: f64 = s.raw_label.parse().unwrap();
            prop_assert_eq!(ds.class_values[s.label], raw);
        }
        for a in &ds.series {
            for b in &ds.series {
                let (ra, rb): (f64, f64) = (a.raw_label.parse().unwrap(), b.raw_label.parse().unwrap());
                prop_assert_eq!(ra < rb, a.label < b.label);
            }
        }
    }

    #[test]
    fn split_partitions_each_class(text in ucr_text(), fraction in 0.05f64..0.49, seed in any::<u64>()) {
        let ds = parse_ucr_file(&text, "p").unwrap();
        let split = split_validation(&ds, fraction, seed).unwrap();
        prop_assert_eq!(split.train.len() + split.validation.len(), ds.len());
        let counts = ds.class_counts();
        let val_counts = split.validation.class_counts();
        let train_counts = split.train.class_counts();
        for c in 0..ds.num_classes {
            prop_assert_eq!(val_counts[c], validation_count(fraction, counts[c]));
            prop_assert_eq!(val_counts[c] + train_counts[c], counts[c]);
            if counts[c] > 0 {
                prop_assert!(train_counts[c] >= 1);
            }
        }
        let again = split_validation(&ds, fraction, seed).unwrap();
        prop_assert_eq!(&split.validation, &again.validation);
    }

    #[test]
    fn znormalized_series_have_zero_mean_unit_variance(values in prop::collection::vec(-100.0f64..100.0, 2..60)) {
        let text = format!(
            "1,{}\n2,{}",
            values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            values.iter().map(|v| (v * 2.0).to_string()).collect::<Vec<_>>().join(","),
        );
        let ds = parse_ucr_file(&text, "z").unwrap();
        let z = znormalize(&ds.series[0]);
        let n = z.values.len() as f64;
        let mean = z.values.iter().sum::<f64>() / n;
        let var = z.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-9);
        prop_assert!(var < 1e-9 || (var - 1.0).abs() < 1e-9);
    }
}

#[test]
fn bundled_archives_have_documented_shapes() {
    for (name, classes, train_n, test_n, len) in [
        ("Coffee", 2, 28, 28, 286),
        ("GunPoint", 2, 50, 150, 150),
        ("Trace", 4, 100, 100, 275),
    ] {
        let Some((train, test)) = common::load_archive(name) else {
            panic!("{name} missing from {}", common::data_dir().display());
        };
        assert_eq!(train.num_classes, classes, "{name}");
        assert_eq!((train.len(), test.len()), (train_n, test_n), "{name}");
        assert_eq!(
            (train.series_length, test.series_length),
            (len, len),
            "{name}"
        );
        assert_eq!(train.name, name);
    }
}

#[test]
fn file_loading_strips_split_suffix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("Toy_TRAIN.tsv");
    std::fs::write(&path, "1\t0.5\t1.5\n2\t2.5\t3.5\n").unwrap();
    let ds = load_ucr_file(&path).unwrap();
    assert_eq!(ds.name, "Toy");
    assert_eq!(ds.series_length, 2);
    assert!(load_ucr_file(&dir.path().join("absent.txt")).is_err());
}
