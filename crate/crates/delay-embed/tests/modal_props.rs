mod common;

use common::{sparse_signal, spectrum, stacked};
use delay_embed::delay_solver::{exact_k, predict_rollout, DelayModel, Solver};
use delay_embed::modal::{companion, eigendecompose, hodmd, pseudospectrum, GridSpec};
use delay_embed::signals::TimeSeries;
use delay_embed::spectral::SparsityPattern;
use ndarray::Array2;
use proptest::prelude::*;
use std::f64::consts::PI;

fn small_model() -> impl Strategy<Value = DelayModel> {
    (1usize..=3, 0usize..5).prop_flat_map(|(j, l)| {
        proptest::collection::vec(-0.4f64..0.4, j * j * (l + 1)).prop_map(move |w| {
            let w = Array2::from_shape_vec((j * (l + 1), j), w).unwrap();
            DelayModel::new(w, l, Solver::Given, 0.0, None).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn companion_rollout_equals_recurrence(model in small_model(), seed in proptest::collection::vec(-1.0f64..1.0, 15)) {
        let (j, l) = (model.j(), model.l());
        let window = Array2::from_shape_fn((j, l + 1), |(a, b)| seed[(a * (l + 1) + b) % seed.len()]);
        let a = predict_rollout(&model, window.view(), 40).unwrap();
        let b = companion(&model).rollout(window.view(), 40).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn eigenvalues_are_the_pattern_frequencies((m, half) in sparse_signal(12..60, 4)) {
        let idx: Vec<usize> = half.iter().map(|h| h.0).collect();
        let pattern = SparsityPattern::from_half(m, &idx).unwrap();
        let md = eigendecompose(&companion(&exact_k(&pattern).unwrap())).unwrap();
        let mut got: Vec<f64> = md.eigenvalues.iter().map(|l| l.arg()).collect();
        got.sort_by(f64::total_cmp);
        let mut want: Vec<f64> = idx.iter().flat_map(|&i| {
            let th = 2.0 * PI * i as f64 / m as f64;
            [th, -th]
        }).collect();
        want.sort_by(f64::total_cmp);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-8);
        }
        prop_assert!(md.eigenvalues.iter().all(|l| (l.norm() - 1.0).abs() < 1e-8));
    }

    #[test]
    fn hodmd_rank_law(j in 1usize..6, n in 4usize..30, r_frac in 0.0f64..1.0, l_frac in 0.0f64..1.0, s in any::<u32>()) {
        let data = Array2::from_shape_fn((j, n), |(a, b)| ((a * 7 + b * 3) as f64 * 0.37 + s as f64 * 1e-3).sin());
        let ts = TimeSeries::new(data, 1.0, None).unwrap();
        let r = 1 + ((j.min(n) - 1) as f64 * r_frac) as usize;
        let l = ((n - 2) as f64 * l_frac) as usize;
        let h = hodmd(&ts, r, l, 1e-10).unwrap();
        prop_assert!(h.r_prime() <= (r * (l + 1)).min(n - 1 - l));
        prop_assert!(h.r_prime() >= 1);
    }

    #[test]
    fn hodmd_reconstructs_training_data((m, half) in sparse_signal(16..40, 3)) {
        let spec = spectrum(m, &half);
        let rotated: Vec<_> = half.iter().map(|&(i, a)| (i, a * delay_embed::C64::new(0.0, 1.0))).collect();
        let ts = stacked(&[spec, spectrum(m, &rotated)], 2 * m);
        let p = 2 * half.len();
        let l = p;
        let h = hodmd(&ts, 2, l, 1e-10).unwrap();
        let n = ts.len() - l;
        let rec = h.reconstruct(n).unwrap();
        let x = ts.data();
        let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for c in 0..2 {
            for t in 0..n {
                prop_assert!((rec[[c, t]] - x[[c, t + l]]).abs() < 1e-7 * scale);
            }
        }
    }

    #[test]
    fn pseudospectra_nest(model in small_model(), e1 in 1e-3f64..0.5, e2 in 1e-3f64..0.5) {
        let grid = GridSpec { n_re: 15, n_im: 15, ..GridSpec::default() };
        let ps = pseudospectrum(&companion(&model), &grid).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let (a, b) = (ps.level_set(lo), ps.level_set(hi));
        prop_assert!(a.iter().zip(b.iter()).all(|(x, y)| !*x || *y));
    }
}
