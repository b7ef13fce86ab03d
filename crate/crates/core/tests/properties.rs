use num_complex::Complex64;
use proptest::prelude::*;

use mdm_fso::channel::{esn0_to_osnr_db, osnr_to_esn0_db, propagate, IsiConfig};
use mdm_fso::dsp::{hard_decision, mmse_decode, mmse_error_covariance, sic_decode, sic_order};
use mdm_fso::framing::{prbs15, qpsk_bits, qpsk_map, PRBS15_PERIOD, QPSK};
use mdm_fso::linalg::{unitary_submatrix, CMatrix};
use mdm_fso::rng::{complex_normal, rng_for, Stream};
use mdm_fso::screen_file::{decode, encode, ScreenHeader};
use mdm_fso::screens::PhaseScreen;
use mdm_fso::signal::Samples;
use rand::Rng;

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = rng_for(seed, Stream::Scratch);
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(&mut rng, 1.0))
}

fn symbols(width: usize, len: usize, seed: u64) -> Samples {
    let mut rng = rng_for(seed, Stream::Scratch);
    Samples { width, data: (0..width * len).map(|_| QPSK[rng.random_range(0..4)]).collect() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noiseless_propagation_is_linear(n_t in 1usize..5, extra in 0usize..3, seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let n_r = n_t + extra;
        let h = gaussian_matrix(n_r, n_t, seed);
        let len = 16;
        let s1 = symbols(n_t, len, seed ^ 1);
        let s2 = symbols(n_t, len, seed ^ 2);
        let c = Complex64::new(a, b);
        let mix = Samples { width: n_t, data: s1.data.iter().zip(&s2.data).map(|(x, y)| c * x + y).collect() };
        let phase: Vec<Vec<f64>> = (0..n_r).map(|k| (0..len).map(|t| 0.1 * (k * t) as f64).collect()).collect();
        let isi = IsiConfig::three_tap();
        let y1 = propagate(&s1, &h, &phase, 0.0, 0, &isi).unwrap();
        let y2 = propagate(&s2, &h, &phase, 0.0, 0, &isi).unwrap();
        let y = propagate(&mix, &h, &phase, 0.0, 0, &isi).unwrap();
        for i in 0..y.data.len() {
            prop_assert!((y.data[i] - (c * y1.data[i] + y2.data[i])).norm() < 1e-9);
        }
    }

    #[test]
    fn decisions_ignore_positive_scale(re in -10.0f64..10.0, im in -10.0f64..10.0, k in 1e-3f64..1e3) {
        let z = Complex64::new(re, im);
        prop_assert_eq!(hard_decision(z), hard_decision(z * k));
    }

    #[test]
    fn orthogonal_columns_make_sic_equal_mmse(n_t in 1usize..7, extra in 0usize..4, seed in any::<u64>(), esn0_db in 0.0f64..15.0) {
        let n_r = n_t + extra;
        let mut rng = rng_for(seed, Stream::Unitary);
        let h = unitary_submatrix(n_r, n_t, &mut rng);
        let n0 = 10f64.powf(-esn0_db / 10.0);
        let len = 200;
        let s = symbols(n_t, len, seed);
        let y = propagate(&s, &h, &vec![vec![0.0; len]; n_r], n0, seed, &IsiConfig::new(vec![Complex64::new(1.0, 0.0)]).unwrap()).unwrap();
        let m = mmse_decode(&y, &h, n0).unwrap();
        let d = sic_decode(&y, &h, n0, &sic_order(&h, n0).unwrap()).unwrap();
        prop_assert_eq!(m.hard.data, d.hard.data);
    }

    #[test]
    fn extra_receive_rows_never_raise_mmse_error(n_t in 1usize..6, seed in any::<u64>(), n0 in 1e-3f64..1.0) {
        let big = gaussian_matrix(n_t + 2, n_t, seed);
        let small = big.rows(0, n_t).into_owned();
        let e_small = mmse_error_covariance(&small, n0);
        let e_big = mmse_error_covariance(&big, n0);
        for k in 0..n_t {
            prop_assert!(e_big[(k, k)].re <= e_small[(k, k)].re * (1.0 + 1e-9));
        }
    }

    #[test]
    fn prbs_has_period_32767(state in 1u16..0x8000) {
        let bits = prbs15(state, PRBS15_PERIOD + 64).unwrap();
        prop_assert_eq!(&bits[..64], &bits[PRBS15_PERIOD..]);
    }

    #[test]
    fn qpsk_round_trip(bits in proptest::collection::vec(0u8..2, 0..64)) {
        let even = &bits[..bits.len() / 2 * 2];
        let syms = qpsk_map(even).unwrap();
        let back: Vec<u8> = syms.iter().flat_map(|&s| qpsk_bits(s)).collect();
        prop_assert_eq!(back, even.to_vec());
    }

    #[test]
    fn osnr_conversion_round_trip(osnr in -10.0f64..50.0, baud in 1e9f64..1e11) {
        prop_assert!((esn0_to_osnr_db(osnr_to_esn0_db(osnr, baud), baud) - osnr).abs() < 1e-9);
    }

    #[test]
    fn screen_file_round_trip(n in 1usize..12, seed in any::<u64>(), pitch in 1e-7f64..1e-3) {
        let mut rng = rng_for(seed, Stream::Scratch);
        let screen = PhaseScreen { grid_size: n, pitch, raster: (0..n * n).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect() };
        let header = ScreenHeader { grid_size: n as u32, pitch, fried: 8e-4, outer_scale: 10.0, inner_scale: 1e-4, seed };
        let (h, s) = decode(&encode(&header, &screen).unwrap()).unwrap();
        prop_assert_eq!(h, header);
        prop_assert_eq!(s, screen);
    }
}
