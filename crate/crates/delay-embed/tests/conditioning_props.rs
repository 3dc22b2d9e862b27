use delay_embed::conditioning::min_norm_bound;
use delay_embed::conditioning::{cond2, prop3_upper, ConditionReport};
use delay_embed::delay_solver::{build_spectral_system, spectral_solution, SpectralMethod};
use delay_embed::spectral::SparsityPattern;
use proptest::prelude::*;

fn pattern_strategy() -> impl Strategy<Value = (usize, Vec<usize>)> {
    (50usize..800, 1usize..=6).prop_flat_map(|(m, half_p)| {
        let top = (m - 1) / 2;
        (Just(m), proptest::sample::subsequence((1..=top).collect::<Vec<_>>(), half_p))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sandwich_and_norm_bound((m, half) in pattern_strategy(), l_frac in 0.0f64..1.0) {
        let pattern = SparsityPattern::from_half(m, &half).unwrap();
        let p = pattern.p();
        let l = p - 1 + ((4 * m - (p - 1)) as f64 * l_frac) as usize;
        let rep = ConditionReport::new(&pattern, l, 1e-15).unwrap();
        prop_assume!(!rep.qualitative);
        prop_assert!(rep.sandwich_holds(1e-10), "{:?}", rep);
        let sys = build_spectral_system(&pattern, l).unwrap();
        let k = spectral_solution(&sys, SpectralMethod::Svd, 1e-15).unwrap();
        let n: f64 = k.iter().map(|z| z.norm_sqr()).sum();
        prop_assert!(n <= min_norm_bound(&pattern, l).unwrap() * (1.0 + 1e-10));
    }

    #[test]
    fn prop3_nonincreasing_at_jumps((m, half) in pattern_strategy()) {
        let pattern = SparsityPattern::from_half(m, &half).unwrap();
        let p = pattern.p();
        let mut last = f64::INFINITY;
        for q in 0..4 {
            for l in [p - 1 + q * m, p + q * m - 2 + m] {
                if l + 1 < p {
                    continue;
                }
                let b = prop3_upper(&pattern, l).unwrap();
                prop_assert!(b <= last * (1.0 + 1e-12));
                last = b;
            }
        }
    }
}

#[test]
fn square_kappa_grows_with_m() {
    let mut last = 0.0;
    for m in [26usize, 50, 100, 200, 400] {
        let p = SparsityPattern::from_half(m, &[1, 2, 4, 8, 12]).unwrap();
        let k = cond2(&build_spectral_system(&p, 9).unwrap().matrix).unwrap();
        assert!(k >= last, "M={m}: {k} < {last}");
        last = k;
    }
}
