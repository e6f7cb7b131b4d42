use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srtta::adapt::{MetricsReport, MetricsRow};
use srtta::classifier::{label_from_probabilities, DegradationLabel};
use srtta::degrade::jpeg_codec;
use srtta::imaging::{bicubic_resize, Image, Scale};
use srtta::nn::{charbonnier, Grads, SrArch, SrModel};
use srtta::preserve::{freeze_count, select_frozen, AugmentOp, FisherScores, FrozenMask};
use srtta::rng;

fn image(channels: usize, h: usize, w: usize, seed: u64) -> Image {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(channels, h, w, |_, _, _| rand::Rng::random::<f32>(&mut r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn augment_ops_compose_like_functions(a in 0usize..8, b in 0usize..8, h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
        let (a, b) = (AugmentOp::all()[a], AugmentOp::all()[b]);
        let x = image(3, h, w, seed);
        prop_assert_eq!(a.then(b).apply(&x), b.apply(&a.apply(&x)));
        prop_assert_eq!(a.inverse().apply(&a.apply(&x)), x);
    }

    #[test]
    fn freeze_count_is_integer_ceiling(num in 0usize..=100, p in 0usize..5000) {
        // rho = num / 100 exactly representable or not, the count is ceil(num * p / 100).
        let rho = num as f64 / 100.0;
        prop_assert_eq!(freeze_count(rho, p), (num * p).div_ceil(100));
    }

    #[test]
    fn selection_freezes_the_top_scores(scores in prop::collection::vec(0.0f64..1.0, 1..200), num in 0usize..=10) {
        let rho = num as f64 / 10.0;
        let split = scores.len() / 2;
        let fisher = FisherScores::from_entries(
            vec![("body.0.conv1.bias".into(), scores[..split].to_vec()), ("body.0.conv1.weight".into(), scores[split..].to_vec())],
            1,
        ).unwrap();
        let mask = select_frozen(&fisher, rho).unwrap();
        prop_assert_eq!(mask.frozen_count(), (num * scores.len()).div_ceil(10));
        let mut frozen_min = f64::INFINITY;
        let mut free_max = f64::NEG_INFINITY;
        for (name, s) in fisher.entries() {
            for (v, &f) in s.iter().zip(mask.get(name).unwrap()) {
                if f { frozen_min = frozen_min.min(*v) } else { free_max = free_max.max(*v) }
            }
        }
        prop_assert!(frozen_min >= free_max);
    }

    #[test]
    fn mask_files_round_trip(bits in prop::collection::vec(prop::collection::vec(any::<bool>(), 0..70), 1..5)) {
        let masks: BTreeMap<String, Vec<bool>> = bits.into_iter().enumerate().map(|(i, m)| (format!("body.{i}.conv1.weight"), m)).collect();
        let mask = FrozenMask::from_masks(masks);
        prop_assert_eq!(FrozenMask::from_bytes(&mask.to_bytes()).unwrap(), mask);
    }

    #[test]
    fn adam_never_moves_frozen_scalars(seed in any::<u64>(), lr in 1e-4f64..1e-1) {
        let mut model = SrModel::<f32>::new(SrArch::new(1, 4, 2).unwrap(), seed).unwrap();
        let before = model.clone();
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mask = FrozenMask::from_masks(
            model.adaptable_names().into_iter().map(|n| {
                let len = model.params().get(&n).unwrap().len();
                (n, (0..len).map(|_| rand::Rng::random_bool(&mut r, 0.5)).collect())
            }).collect(),
        );
        mask.install(&mut model).unwrap();
        let mut g = Grads::zeros_like(model.params());
        let names: Vec<String> = model.params().names().map(String::from).collect();
        for n in &names {
            g.get_mut(n).unwrap().iter_mut().for_each(|v| *v = rand::Rng::random_range(&mut r, -1.0..1.0));
        }
        for _ in 0..3 {
            model.params_mut().adam_step(&g, lr).unwrap();
        }
        prop_assert!(mask.frozen_values_equal(model.params(), before.params()));
        for n in names.iter().filter(|n| !SrModel::<f32>::is_adaptable(n)) {
            prop_assert_eq!(&model.params().get(n).unwrap().value, &before.params().get(n).unwrap().value);
        }
    }

    #[test]
    fn charbonnier_is_bounded_and_symmetric(pairs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..64)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (sum, g) = charbonnier(&a, &b, 1e-3);
        let (sum_rev, g_rev) = charbonnier(&b, &a, 1e-3);
        prop_assert!(sum >= a.len() as f64 * 1e-3f64.sqrt() - 1e-12);
        prop_assert!((sum - sum_rev).abs() < 1e-12);
        for (x, y) in g.iter().zip(&g_rev) {
            prop_assert!(x.abs() < 1.0);
            prop_assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn bicubic_keeps_constants(v in 0.0f32..1.0, h in 2usize..20, w in 2usize..20, up in any::<bool>()) {
        let img = Image::filled(3, h * 2, w * 2, v);
        let out = bicubic_resize(&img, if up { Scale::up(2) } else { Scale::down(2) }).unwrap();
        let want = if up { (3, h * 4, w * 4) } else { (3, h, w) };
        prop_assert_eq!(out.dims(), want);
        prop_assert!(out.data().iter().all(|&x| (x - v).abs() < 1e-5));
    }

    #[test]
    fn jpeg_output_is_quantized_and_sized(q in 1u8..=100, h in 1usize..30, w in 1usize..30, seed in any::<u64>()) {
        let x = image(3, h, w, seed);
        let y = jpeg_codec(&x, q).unwrap();
        prop_assert_eq!(y.dims(), x.dims());
        prop_assert_eq!(y.quantize_u8(), y);
    }

    #[test]
    fn labels_are_monotone_in_probability(p in prop::array::uniform3(0.0f64..1.0), bump in 0.0f64..0.5) {
        let a = label_from_probabilities(p).as_array();
        let b = label_from_probabilities(p.map(|v| (v + bump).min(1.0))).as_array();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }

    #[test]
    fn seed_streams_are_reproducible(master in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(rng::derive_seed(master, &[a, b]), rng::derive_seed(master, &[a, b]));
        if a != b {
            prop_assert_ne!(rng::derive_seed(master, &[a]), rng::derive_seed(master, &[b]));
        }
    }

    #[test]
    fn metrics_csv_is_a_fixed_point(values in prop::collection::vec((0.0f64..60.0, 0.0f64..1.0, 0.0f64..10.0, any::<bool>()), 1..12)) {
        let mut report = MetricsReport::default();
        for (i, (p, s, t, failed)) in values.into_iter().enumerate() {
            if failed {
                report.push(MetricsRow::error("jpeg", "srtta", "diverged, retried"));
            } else {
                report.push(MetricsRow {
                    domain: "gaussian_noise".into(),
                    method: "srtta".into(),
                    image: format!("img_{i}"),
                    psnr_db: Some(p),
                    ssim: Some(s),
                    seconds: t,
                    error: None,
                });
            }
        }
        let bytes = report.to_csv(true).unwrap();
        prop_assert_eq!(MetricsReport::from_csv(&bytes).unwrap().to_csv(true).unwrap(), bytes);
    }
}

#[test]
fn clean_label_has_no_bits() {
    assert!(DegradationLabel::CLEAN.is_clean());
    assert_eq!(label_from_probabilities([0.5; 3]), DegradationLabel::CLEAN);
}
