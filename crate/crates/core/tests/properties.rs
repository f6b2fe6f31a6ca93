use proptest::prelude::*;

use spckd::data::{
    encode_idx, encode_mstn, extract_patches, from_band_major, parse_idx, parse_mstn, resize_bilinear, to_band_major,
};
use spckd::distill::{rbf_correlation, FeatureKind, FeatureMatrix};
use spckd::eval::{psnr, ssim_band_major};
use spckd::numerics::{band_matvec, soft, Tensor};
use spckd::sensing::{build_sensing, ApertureMode, NoiseSpec};
use spckd::system::{system_config, ImagingSystem};
use spckd::training::Checkpoint;

fn image(max_side: usize, max_bands: usize) -> impl Strategy<Value = Tensor<f32>> {
    (1..=max_side, 1..=max_side, 1..=max_bands).prop_flat_map(|(h, w, j)| {
        prop::collection::vec(0f32..=1.0, h * w * j).prop_map(move |d| Tensor::new([h, w, j], d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(m in 1usize..10, n in 1usize..10, j in 1usize..4, ratio in 0.05f64..1.0, seed: u64, binary: bool) {
        let mode = if binary { ApertureMode::Binary } else { ApertureMode::RealValued };
        let bank = build_sensing::<f64>(ratio, m, n, j, mode, seed).unwrap();
        let (k, p) = (bank.shape.snapshots, m * n);
        let x: Vec<f64> = (0..p * j).map(|i| ((i as f64 + seed as f64 % 7.0) * 0.61).sin()).collect();
        let w: Vec<f64> = (0..k * j).map(|i| (i as f64 * 1.7).cos()).collect();
        let h = bank.realized();
        let hx = band_matvec(h.data(), k, p, &x, false, 1.0).unwrap();
        let htw = band_matvec(h.data(), k, p, &w, true, 1.0).unwrap();
        let lhs: f64 = hx.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&htw).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-10);
    }

    #[test]
    fn binary_apertures_are_signs(ratio in 0.05f64..1.0, seed: u64) {
        let bank = build_sensing::<f32>(ratio, 6, 5, 1, ApertureMode::Binary, seed).unwrap();
        prop_assert!(bank.realized().data().iter().all(|v| *v == 1.0 || *v == -1.0));
    }

    #[test]
    fn noiseless_measurement_is_linear(seed: u64, a in -2.0f64..2.0) {
        let bank = build_sensing::<f64>(0.4, 5, 5, 2, ApertureMode::RealValued, seed).unwrap();
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
        let y = bank.measure(&x, &NoiseSpec::none(), 0).unwrap();
        let ay = bank.measure(&ax, &NoiseSpec::none(), 0).unwrap();
        for (p, q) in y.iter().zip(&ay) {
            prop_assert!((a * p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn soft_threshold_shrinks(v in -10.0f64..10.0, beta in -3.0f64..3.0) {
        let s = soft(v, beta);
        prop_assert!(s.abs() <= v.abs());
        prop_assert!(s == 0.0 || s.signum() == v.signum());
        prop_assert_eq!(s, soft(v, -beta));
        prop_assert!((s.abs() - (v.abs() - beta.abs()).max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn psnr_is_symmetric_and_orders_by_error(base in prop::collection::vec(0.1f32..0.9, 16..64), e in 0.001f32..0.05) {
        let near: Vec<f32> = base.iter().map(|v| v + e).collect();
        let far: Vec<f32> = base.iter().map(|v| v + 2.0 * e).collect();
        let p = psnr(&near, &base).unwrap();
        prop_assert_eq!(p, psnr(&base, &near).unwrap());
        prop_assert!(psnr(&far, &base).unwrap() < p);
    }

    #[test]
    fn ssim_symmetric_and_maximal_on_identity(img in prop::collection::vec(0f32..=1.0, 144), shift in 0.01f32..0.3) {
        let other: Vec<f32> = img.iter().map(|v| (v + shift).min(1.0)).collect();
        let s = ssim_band_major(&img, &other, 12, 12, 1).unwrap();
        prop_assert!((s - ssim_band_major(&other, &img, 12, 12, 1).unwrap()).abs() < 1e-12);
        prop_assert!((ssim_band_major(&img, &img, 12, 12, 1).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!(s <= 1.0 + 1e-12);
    }

    #[test]
    fn band_major_round_trip(img in image(6, 4)) {
        let (h, w, j) = (img.shape()[0], img.shape()[1], img.shape()[2]);
        let flat = to_band_major(&img).unwrap();
        prop_assert_eq!(from_band_major(&flat, h, w, j).unwrap(), img);
    }

    #[test]
    fn patches_tile_the_image(img in image(12, 2), size in 1usize..6) {
        let (h, w, j) = (img.shape()[0], img.shape()[1], img.shape()[2]);
        prop_assume!(size <= h && size <= w);
        let patches = extract_patches(&img, size).unwrap();
        let (rows, cols) = (h / size, w / size);
        prop_assert_eq!(patches.len(), rows * cols);
        for (i, p) in patches.iter().enumerate() {
            let (r0, c0) = ((i / cols) * size, (i % cols) * size);
            for y in 0..size {
                for x in 0..size {
                    for b in 0..j {
                        prop_assert_eq!(p.data()[(y * size + x) * j + b], img.data()[((r0 + y) * w + c0 + x) * j + b]);
                    }
                }
            }
        }
    }

    #[test]
    fn resize_commutes_with_band_order(img in image(6, 3), th in 1usize..9, tw in 1usize..9) {
        let (h, w, j) = (img.shape()[0], img.shape()[1], img.shape()[2]);
        let reversed = |t: &Tensor<f32>, h: usize, w: usize| {
            let mut d = t.data().to_vec();
            d.chunks_mut(j).for_each(|c| c.reverse());
            Tensor::new([h, w, j], d).unwrap()
        };
        let a = resize_bilinear(&reversed(&img, h, w), th, tw).unwrap();
        let b = reversed(&resize_bilinear(&img, th, tw).unwrap(), th, tw);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn resize_keeps_values_in_range(img in image(6, 2), th in 1usize..12, tw in 1usize..12) {
        let out = resize_bilinear(&img, th, tw).unwrap();
        let (lo, hi) = img.data().iter().fold((f32::MAX, f32::MIN), |(l, h), &v| (l.min(v), h.max(v)));
        prop_assert!(out.data().iter().all(|&v| v >= lo - 1e-6 && v <= hi + 1e-6));
    }

    #[test]
    fn idx_round_trip(dims in prop::collection::vec(1usize..5, 1..4), seed: u8) {
        let count: usize = dims.iter().product();
        let payload: Vec<u8> = (0..count).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
        let t = parse_idx(&encode_idx(&dims, &payload).unwrap()).unwrap();
        prop_assert_eq!(t.shape(), dims.as_slice());
        for (v, b) in t.data().iter().zip(&payload) {
            prop_assert_eq!(*v, *b as f32 / 255.0);
        }
    }

    #[test]
    fn mstn_round_trip_is_bit_exact(data in prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 24)) {
        let t = Tensor::new([2, 3, 2, 2], data).unwrap();
        let back = parse_mstn(&encode_mstn(&t).unwrap()).unwrap();
        let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&t));
    }

    #[test]
    fn rbf_gram_is_symmetric_in_unit_interval(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 6), 2..6)) {
        let f = FeatureMatrix { rows: rows.into_iter().map(Tensor::vector).collect(), kind: FeatureKind::NonSparse };
        let l = f.rows.len();
        let eta = rbf_correlation(&f, 1e-3).unwrap();
        for i in 0..l {
            prop_assert_eq!(eta.data()[i * l + i], 1.0);
            for j in 0..l {
                let v = eta.data()[i * l + j];
                prop_assert_eq!(v, eta.data()[j * l + i]);
                prop_assert!(v > 0.0 && v <= 1.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn checkpoint_round_trip(ratio in 0.1f64..1.0, size in 4usize..9, stages in 1usize..4, channels in 1usize..5, seed: u64, binary: bool) {
        let mode = if binary { ApertureMode::Binary } else { ApertureMode::RealValued };
        let mut cfg = system_config(ratio, mode, size, stages, channels);
        cfg.seed = seed;
        let system = ImagingSystem::<f32>::new(cfg).unwrap();
        let bytes = Checkpoint::from_system(&system).to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        let scene: Vec<f32> = (0..size * size).map(|i| (i % 5) as f32 / 4.0).collect();
        let a = system.reconstruct(&scene, &NoiseSpec::none(), 0).unwrap();
        let b = back.to_system().unwrap().reconstruct(&scene, &NoiseSpec::none(), 0).unwrap();
        prop_assert_eq!(a, b);
    }
}
