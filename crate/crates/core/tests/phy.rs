mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mimo_switch::channel::{perturb_channel, draw_fading, ChannelParams, Topology};
use mimo_switch::phy::{interference_covariance, mmse_ppsnr, mmse_ppsnr_estimated};
use mimo_switch::{ComplexMatrix, ComplexMatrix32};

const NOISE: f64 = 5.011_872_336_272_714e-12; // -113 dBm in mW

#[test]
fn matches_exact_closed_form_for_every_allocation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let var = NOISE * 10f64.powf(rng.random_range(-0.5..6.0));
        let h = common::random_matrix(&mut rng, 4, var);
        let var_g = NOISE * 10f64.powf(rng.random_range(-0.5..8.0));
        let g = common::random_matrix(&mut rng, 4, var_g);
        for m1 in 1..=4 {
            for m2 in 0..=4 - m1 {
                let interferer = (m2 > 0).then_some(std::slice::from_ref(&g));
                let grid = mmse_ppsnr(std::slice::from_ref(&h), interferer, m1, m2, NOISE).unwrap();
                for m in 0..m1 {
                    let want = common::exact_ppsnr(&h, (m2 > 0).then_some(&g), m1, m2, m, NOISE);
                    worst = worst.max((grid.get(0, m) - want).abs() / want);
                }
            }
        }
    }
    assert!(worst < 1e-11, "worst relative error {worst:e}");
}

#[test]
fn single_precision_agrees_with_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let h = common::random_matrix(&mut rng, 4, 1.0);
    let g = common::random_matrix(&mut rng, 4, 1.0);
    let to32 = |a: &ComplexMatrix| {
        let data = a
            .as_column_major()
            .iter()
            .map(|z| num_complex::Complex::new(z.re as f32, z.im as f32))
            .collect();
        ComplexMatrix32::from_column_major(4, 4, data).unwrap()
    };
    let g64 = mmse_ppsnr(std::slice::from_ref(&h), Some(std::slice::from_ref(&g)), 2, 2, 0.01).unwrap();
    let g32 = mmse_ppsnr(&[to32(&h)], Some(&[to32(&g)][..]), 2, 2, 0.01f32).unwrap();
    for m in 0..2 {
        let rel = (f64::from(g32.get(0, m)) - g64.get(0, m)).abs() / g64.get(0, m);
        assert!(rel < 1e-3, "stream {m}: {rel}");
    }
}

fn frame() -> mimo_switch::channel::FadingRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    draw_fading(&Topology::parallel_same_direction(), 0, &ChannelParams::default(), &mut rng).unwrap()
}

#[test]
fn zero_estimation_error_is_bit_identical() {
    let truth = frame();
    let est = perturb_channel(&truth, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let a = mmse_ppsnr(truth.pair(0, 0), Some(truth.pair(0, 1)), 2, 2, NOISE).unwrap();
    let b = mmse_ppsnr_estimated(est.pair(0, 0), Some(est.pair(0, 1)), 2, 2, NOISE).unwrap();
    assert_eq!(a, b);
}

#[test]
fn estimated_ppsnr_converges_as_error_shrinks() {
    let truth = frame();
    let exact = mmse_ppsnr(truth.pair(0, 0), Some(truth.pair(0, 1)), 2, 2, NOISE).unwrap();
    let mut previous = f64::INFINITY;
    for scale in [1e-2, 1e-4, 1e-6] {
        let est = perturb_channel(&truth, NOISE * scale, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let grid = mmse_ppsnr_estimated(est.pair(0, 0), Some(est.pair(0, 1)), 2, 2, NOISE).unwrap();
        let worst = (0..64)
            .flat_map(|i| (0..2).map(move |m| (i, m)))
            .map(|(i, m)| (grid.get(i, m) - exact.get(i, m)).abs() / exact.get(i, m))
            .fold(0.0, f64::max);
        assert!(worst < previous, "error did not shrink at scale {scale}: {worst}");
        previous = worst;
    }
    assert!(previous < 1e-2);
}

#[test]
fn estimation_error_biases_ppsnr() {
    // mean deviation of estimated from true PPSNR at four training symbols
    let truth = frame();
    let exact = mmse_ppsnr(truth.pair(0, 0), Some(truth.pair(0, 1)), 2, 2, NOISE).unwrap();
    let variance = 8.0 * NOISE / (64.0 * 4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut dev_db = 0.0;
    let draws = 200;
    for _ in 0..draws {
        let est = perturb_channel(&truth, variance, &mut rng).unwrap();
        let grid = mmse_ppsnr_estimated(est.pair(0, 0), Some(est.pair(0, 1)), 2, 2, NOISE).unwrap();
        for i in 0..64 {
            for m in 0..2 {
                dev_db += 10.0 * (grid.get(i, m) / exact.get(i, m)).log10();
            }
        }
    }
    let mean = dev_db / f64::from(draws * 128);
    assert!(mean.is_finite() && mean.abs() > 1e-4, "no measurable deviation: {mean} dB");
}

fn matrix(entries: &[(f64, f64)]) -> ComplexMatrix {
    let data = entries.iter().map(|&(re, im)| num_complex::Complex::new(re, im)).collect();
    ComplexMatrix::from_column_major(4, 4, data).unwrap()
}

fn entries() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn removing_interference_never_hurts(h in entries(), g in entries(), m1 in 1usize..4, noise in 1e-4f64..1.0) {
        let (h, g) = (matrix(&h), matrix(&g));
        prop_assume!(h.column(0).iter().any(|z| z.norm() > 1e-3));
        let m2 = 4 - m1;
        let with = mmse_ppsnr(std::slice::from_ref(&h), Some(std::slice::from_ref(&g)), m1, m2, noise).unwrap();
        let without = mmse_ppsnr(std::slice::from_ref(&h), None, m1, 0, noise).unwrap();
        for m in 0..m1 {
            prop_assert!(without.get(0, m) >= with.get(0, m) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn more_noise_lowers_every_ppsnr(h in entries(), g in entries(), noise in 1e-3f64..1.0, k in 1.01f64..100.0) {
        let (h, g) = (matrix(&h), matrix(&g));
        prop_assume!((0..2).all(|c| h.column(c).iter().any(|z| z.norm() > 1e-3)));
        let a = mmse_ppsnr(std::slice::from_ref(&h), Some(std::slice::from_ref(&g)), 2, 2, noise).unwrap();
        let b = mmse_ppsnr(std::slice::from_ref(&h), Some(std::slice::from_ref(&g)), 2, 2, noise * k).unwrap();
        for m in 0..2 {
            prop_assert!(b.get(0, m) < a.get(0, m));
        }
    }

    #[test]
    fn covariance_is_hermitian(h in entries(), g in entries(), m1 in 1usize..=4, stream in 0usize..4, noise in 1e-6f64..1.0) {
        let (h, g) = (matrix(&h), matrix(&g));
        let stream = stream % m1;
        let c = interference_covariance(&h, Some(&g), m1, 4 - m1, stream, noise);
        prop_assert!(c.hermitian_defect() <= 1e-12);
    }
}
