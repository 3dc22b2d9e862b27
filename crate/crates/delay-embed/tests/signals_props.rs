use delay_embed::signals::{add_noise, gen_five_mode, gen_quasi_periodic, subsample, NoiseSpec, TimeSeries};
use ndarray::Array2;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generators_produce_valid_series(m in 26usize..300, periods in 1usize..4, dt in 0.01f64..1.0, n in 1usize..400) {
        let a = gen_five_mode(m, periods).unwrap();
        prop_assert!(a.validate().is_ok());
        prop_assert_eq!(a.len(), m * periods);
        prop_assert_eq!(a.period_samples(), Some(m));
        let q = gen_quasi_periodic(dt, n).unwrap();
        prop_assert!(q.validate().is_ok());
        prop_assert_eq!(q.len(), n);
    }

    #[test]
    fn generators_are_pure(m in 26usize..200, dt in 0.01f64..1.0, n in 1usize..300) {
        prop_assert_eq!(gen_five_mode(m, 2).unwrap(), gen_five_mode(m, 2).unwrap());
        prop_assert_eq!(gen_quasi_periodic(dt, n).unwrap(), gen_quasi_periodic(dt, n).unwrap());
    }

    #[test]
    fn subsample_composes(a in 1usize..5, b in 1usize..5, n in 1usize..120, seed in any::<u64>()) {
        let data = Array2::from_shape_fn((2, n), |(j, k)| ((seed % 97) as f64 + j as f64 * 0.3 + k as f64 * 0.7).sin());
        let ts = TimeSeries::new(data, 0.1, None).unwrap();
        let twice = subsample(&subsample(&ts, a).unwrap(), b).unwrap();
        let once = subsample(&ts, a * b).unwrap();
        prop_assert_eq!(twice.data(), once.data());
        prop_assert!((twice.dt() - once.dt()).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_is_identity(seed in any::<u64>(), m in 26usize..120) {
        let ts = gen_five_mode(m, 1).unwrap();
        let out = add_noise(&ts, &NoiseSpec { snr_fraction: 0.0, seed }).unwrap();
        prop_assert_eq!(out, ts);
    }
}
