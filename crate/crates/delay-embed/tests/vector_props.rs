mod common;

use common::{amplitude, stacked};
use delay_embed::delay_solver::{build_hankel, solve_time_domain, RowSelection, DEFAULT_SVD_CUTOFF};
use delay_embed::vector_analysis::{
    containment_residual, oc_index, rank_test_vector, row_eliminate, spectra_from_half, StackedSpectra,
    DEFAULT_RANK_TOL,
};
use delay_embed::C64;
use proptest::prelude::*;

type Components = Vec<Vec<(usize, C64)>>;

fn vector_signal() -> impl Strategy<Value = (usize, Components)> {
    (12usize..40, 2usize..=3).prop_flat_map(|(m, j)| {
        let top = (m - 1) / 2;
        let comp =
            proptest::sample::subsequence((1..=top).collect::<Vec<_>>(), 1..=3usize.min(top)).prop_flat_map(|idx| {
                let n = idx.len();
                (Just(idx), proptest::collection::vec(amplitude(), n))
                    .prop_map(|(idx, a)| idx.into_iter().zip(a).collect::<Vec<_>>())
            });
        (Just(m), proptest::collection::vec(comp, j))
    })
}

fn spectra_of(m: usize, comps: &Components) -> StackedSpectra {
    spectra_from_half(m, comps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn oc_index_bounds_minimal_delay((m, comps) in vector_signal()) {
        let sp = spectra_of(m, &comps);
        let mu = oc_index(&row_eliminate(&sp, 1e-12).unwrap(), DEFAULT_RANK_TOL).unwrap();
        prop_assert!(mu <= sp.p_union());
        prop_assert!(rank_test_vector(&sp, mu - 1, DEFAULT_RANK_TOL).unwrap());
    }

    #[test]
    fn rank_test_is_monotone((m, comps) in vector_signal()) {
        let sp = spectra_of(m, &comps);
        let mut passed = false;
        for l in 0..=sp.p_union() + 1 {
            let now = rank_test_vector(&sp, l, DEFAULT_RANK_TOL).unwrap();
            prop_assert!(!passed || now, "passed before L={} but failed at it", l);
            passed |= now;
        }
        prop_assert!(passed);
    }

    #[test]
    fn rank_test_matches_solver_and_geometry((m, comps) in vector_signal()) {
        let sp = spectra_of(m, &comps);
        let specs = sp.spectra().to_vec();
        let ts = stacked(&specs, m);
        for l in 0..=sp.p_union() {
            let pass = rank_test_vector(&sp, l, DEFAULT_RANK_TOL).unwrap();
            let sys = build_hankel(&ts, l, &RowSelection::AllPeriodic).unwrap();
            let model = solve_time_domain(&sys, DEFAULT_SVD_CUTOFF).unwrap();
            let res = sys.residual(&model);
            let contain = containment_residual(&sp, l, DEFAULT_RANK_TOL).unwrap();
            if pass {
                prop_assert!(res < 1e-8, "L={} residual {}", l, res);
                prop_assert!(contain < 1e-8, "L={} containment {}", l, contain);
            } else {
                prop_assert!(res > 1e-6, "L={} residual {}", l, res);
                prop_assert!(contain > 1e-6, "L={} containment {}", l, contain);
            }
        }
    }
}
