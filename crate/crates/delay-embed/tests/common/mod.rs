#![allow(dead_code)]

use delay_embed::signals::TimeSeries;
use delay_embed::spectral::{synthesize, FourierSpectrum};
use delay_embed::C64;
use ndarray::Array2;
use proptest::prelude::*;

/// Real signal spectrum with the given first-half indices and amplitudes.
pub fn spectrum(m: usize, half: &[(usize, C64)]) -> FourierSpectrum {
    let mut c = vec![C64::new(0.0, 0.0); m];
    for &(i, a) in half {
        c[i] = a;
        c[m - i] = a.conj();
    }
    FourierSpectrum::new(c).unwrap()
}

/// One period (or more) of a multi-component signal, one spectrum per row.
pub fn stacked(specs: &[FourierSpectrum], n: usize) -> TimeSeries {
    let m = specs[0].m();
    let mut data = Array2::<f64>::zeros((specs.len(), n));
    for (j, s) in specs.iter().enumerate() {
        let ts = synthesize(s, n, 1.0).unwrap();
        data.row_mut(j).assign(&ts.component(0));
    }
    TimeSeries::new(data, 1.0, (n >= m).then_some(m)).unwrap()
}

/// Amplitude with modulus in [0.5, 2] and any phase.
pub fn amplitude() -> impl Strategy<Value = C64> {
    (0.5f64..2.0, -std::f64::consts::PI..std::f64::consts::PI).prop_map(|(r, th)| C64::from_polar(r, th))
}

/// `M` and a sorted set of distinct first-half indices `0 < i < M/2`.
pub fn half_pattern(m_range: std::ops::Range<usize>, max_p: usize) -> impl Strategy<Value = (usize, Vec<usize>)> {
    m_range.prop_flat_map(move |m| {
        let top = (m - 1) / 2;
        (Just(m), proptest::sample::subsequence((1..=top).collect::<Vec<_>>(), 1..=max_p.min(top)))
    })
}

/// As `half_pattern` with an amplitude per index.
pub fn sparse_signal(
    m_range: std::ops::Range<usize>,
    max_p: usize,
) -> impl Strategy<Value = (usize, Vec<(usize, C64)>)> {
    half_pattern(m_range, max_p).prop_flat_map(|(m, idx)| {
        let n = idx.len();
        (Just(m), Just(idx), proptest::collection::vec(amplitude(), n))
            .prop_map(|(m, idx, a)| (m, idx.into_iter().zip(a).collect()))
    })
}
