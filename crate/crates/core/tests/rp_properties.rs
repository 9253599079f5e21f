mod common;

use common::{max_abs_diff, resize_oracle, rp_oracle};
use proptest::prelude::*;
use rptsc_core::rp::{
    embed, encode_series, recurrence_matrix, resize, threshold, to_gray_image, EmbeddingParams,
    EncodeConfig, GrayImage, Norm, Scaling,
};

fn series_and_params() -> impl Strategy<Value = (Vec<f64>, usize, usize)> {
    (1usize..=5, 1usize..=6).prop_flat_map(|(m, tau)| {
        let min_len = (m - 1) * tau + 2;
        (
            prop::collection::vec(-10.0f64..10.0, min_len..min_len + 40),
            Just(m),
            Just(tau),
        )
    })
}

fn any_norm() -> impl Strategy<Value = Norm> {
    prop_oneof![Just(Norm::L1), Just(Norm::L2), Just(Norm::Linf)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matrix_is_symmetric_with_zero_diagonal((x, m, tau) in series_and_params(), norm in any_norm()) {
        let params = EmbeddingParams::new(m, tau).unwrap();
        let traj = embed(&x, params).unwrap();
        prop_assert_eq!(traj.num_states(), x.len() - (m - 1) * tau);
        let r = recurrence_matrix(&traj, norm).unwrap();
        prop_assert_eq!(r.size(), traj.num_states());
        for i in 0..r.size() {
            prop_assert_eq!(r.get(i, i), 0.0);
            for j in 0..r.size() {
                prop_assert_eq!(r.get(i, j), r.get(j, i));
                prop_assert!(r.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn l2_matrix_matches_direct_indexing((x, m, tau) in series_and_params()) {
        let traj = embed(&x, EmbeddingParams::new(m, tau).unwrap()).unwrap();
        let r = recurrence_matrix(&traj, Norm::L2).unwrap();
        let (k, expected) = rp_oracle(&x, m, tau);
        prop_assert_eq!(r.size(), k);
        prop_assert!(max_abs_diff(r.values(), &expected) < 1e-12);
    }

    #[test]
    fn norms_are_ordered((x, m, tau) in series_and_params()) {
        let traj = embed(&x, EmbeddingParams::new(m, tau).unwrap()).unwrap();
        let l1 = recurrence_matrix(&traj, Norm::L1).unwrap();
        let l2 = recurrence_matrix(&traj, Norm::L2).unwrap();
        let linf = recurrence_matrix(&traj, Norm::Linf).unwrap();
        for ((a, b), c) in l1.values().iter().zip(l2.values()).zip(linf.values()) {
            prop_assert!(*c <= *b + 1e-12 && *b <= *a + 1e-12);
        }
    }

    #[test]
    fn threshold_is_binary_and_monotone(
        (x, m, tau) in series_and_params(),
        e1 in 0.0f64..20.0,
        e2 in 0.0f64..20.0,
    ) {
        let traj = embed(&x, EmbeddingParams::new(m, tau).unwrap()).unwrap();
        let r = recurrence_matrix(&traj, Norm::L2).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let small = threshold(&r, lo).unwrap();
        let large = threshold(&r, hi).unwrap();
        for (s, l) in small.values().iter().zip(large.values()) {
            prop_assert!(*s == 0.0 || *s == 1.0);
            prop_assert!(*l == 0.0 || *l == 1.0);
            prop_assert!(s <= l);
        }
        for i in 0..r.size() {
            prop_assert_eq!(small.get(i, i), 1.0);
        }
    }

    #[test]
    fn gray_image_ignores_positive_scaling((x, m, tau) in series_and_params(), alpha in 0.01f64..100.0) {
        let traj = embed(&x, EmbeddingParams::new(m, tau).unwrap()).unwrap();
        let r = recurrence_matrix(&traj, Norm::L2).unwrap();
        let a = to_gray_image(&r);
        let b = to_gray_image(&r.scaled(alpha));
        prop_assert!(max_abs_diff(&a.pixels, &b.pixels) < 1e-12);
        prop_assert!(a.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn resize_matches_pointwise_bilinear(
        h in 1usize..20,
        w in 1usize..20,
        t in 1usize..30,
        seed in any::<u64>(),
    ) {
        let mut rng = common::rng(seed);
        let pixels = common::uniform_vec(&mut rng, h * w, 0.0, 1.0);
        let img = GrayImage::new(h, w, pixels.clone()).unwrap();
        let out = resize(&img, t).unwrap();
        prop_assert_eq!((out.height, out.width), (t, t));
        prop_assert!(max_abs_diff(&out.pixels, &resize_oracle(&pixels, h, w, t)) < 1e-12);
    }

    #[test]
    fn resize_preserves_constant_images(h in 1usize..30, t in 1usize..64, v in 0.0f64..1.0) {
        let out = resize(&GrayImage::filled(h, h, v), t).unwrap();
        prop_assert!(out.pixels.iter().all(|p| (p - v).abs() < 1e-12));
    }

    #[test]
    fn encoded_images_stay_in_unit_range(
        x in prop::collection::vec(-5.0f64..5.0, 10..80),
        invert in any::<bool>(),
        size in prop_oneof![Just(28usize), Just(56), Just(64)],
    ) {
        let cfg = EncodeConfig { size: Some(size), invert, ..EncodeConfig::default() };
        let img = encode_series(&x, &cfg).unwrap();
        prop_assert_eq!((img.height, img.width), (size, size));
        prop_assert!(img.pixels.iter().all(|p| (0.0..=1.0).contains(p)));
    }
}

#[test]
fn twelve_samples_give_an_eleven_square_plot() {
    let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
    let traj = embed(&x, EmbeddingParams::new(2, 1).unwrap()).unwrap();
    let r = recurrence_matrix(&traj, Norm::L2).unwrap();
    assert_eq!(r.size(), 11);
}

#[test]
fn too_short_series_is_rejected() {
    let params = EmbeddingParams::default();
    assert_eq!(params.min_length(), 10);
    assert!(embed(&[0.0; 9], params).is_err());
    assert!(embed(&[0.0; 10], params).is_ok());
}

#[test]
fn invert_complements_pixels() {
    let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).cos()).collect();
    let plain = encode_series(&x, &EncodeConfig::default()).unwrap();
    let inverted = encode_series(
        &x,
        &EncodeConfig {
            invert: true,
            ..EncodeConfig::default()
        },
    )
    .unwrap();
    for (a, b) in plain.pixels.iter().zip(&inverted.pixels) {
        assert!((a + b - 1.0).abs() < 1e-12);
    }
}

#[test]
fn scaling_names_roundtrip() {
    for s in [Scaling::PerPlot, Scaling::Global] {
        assert_eq!(s.to_string().parse::<Scaling>().unwrap(), s);
    }
    for n in [Norm::L1, Norm::L2, Norm::Linf] {
        assert_eq!(n.to_string().parse::<Norm>().unwrap(), n);
    }
}
