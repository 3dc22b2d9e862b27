//! One function per subcommand computing its results, and a writer for
//! each result type. Sweep points run on the rayon pool and are gathered
//! in input order.

use std::fs;
use std::path::{Path, PathBuf};

use delay_embed::conditioning::{cond2, cond_effective, sweep, write_sweep_csv, ConditionReport, SweepRow};
use delay_embed::delay_solver::{
    build_hankel, build_spectral_system, exact_k, nmse, predict_rollout, rollout_from_start, solve_spectral,
    solve_time_domain, DelayModel, DelayModelJson, RowSelection, SpectralMethod,
};
use delay_embed::modal::{
    companion, eigendecompose, hodmd, optimal_delay, pseudospectrum, unit_circle_min_sigma, ModalReport,
    PseudospectrumGrid, RankLimit,
};
use delay_embed::signals::{add_noise, gen_five_mode, write_csv, NoiseSpec, TimeSeries};
use delay_embed::spectral::{detect_sparsity, dft, min_subsample, SparsityPattern, SpectrumReport};
use delay_embed::vector_analysis::{vector_report, StackedSpectra, VectorReport};
use delay_embed::C64;
use ndarray::{s, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SignalConfig, SolverChoice};
use crate::error::{CliError, CliResult};
use crate::signal;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a trajectory in the series CSV format. Finite trajectories get a
/// sidecar and read back with `read_csv`; diverged ones are written as-is.
fn write_trajectory(path: &Path, data: &Array2<f64>, dt: f64) -> CliResult<Vec<PathBuf>> {
    if let Ok(ts) = TimeSeries::new(data.clone(), dt, None) {
        write_csv(&ts, path)?;
        return Ok(vec![path.to_path_buf(), delay_embed::signals::sidecar_path(path)]);
    }
    let header: Vec<String> =
        std::iter::once("t".to_string()).chain((1..=data.nrows()).map(|j| format!("x{j}"))).collect();
    let rows = (0..data.ncols())
        .map(|k| std::iter::once(fmt(k as f64 * dt)).chain(data.column(k).iter().map(|v| fmt(*v))).collect());
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(path, &h, rows)?;
    Ok(vec![path.to_path_buf()])
}

/// One period of the series (the whole series when no period is declared),
/// optionally mean-subtracted.
fn one_period(ts: &TimeSeries, mean_subtract: bool) -> CliResult<TimeSeries> {
    let m = ts.period_samples().unwrap_or(ts.len());
    let one = ts.window(0, m)?.with_period(m)?;
    Ok(if mean_subtract { one.mean_subtracted() } else { one })
}

fn scalar_pattern(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<SparsityPattern> {
    if ts.n_components() != 1 {
        return Err(CliError::Validation(format!(
            "spectral solvers handle scalar signals only, got J={}",
            ts.n_components()
        )));
    }
    let one = one_period(ts, cfg.spectrum.mean_subtract)?;
    Ok(detect_sparsity(&dft(&one, 0)?, cfg.spectrum.threshold)?)
}

fn stacked_spectra(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<StackedSpectra> {
    let one = one_period(ts, cfg.spectrum.mean_subtract)?;
    Ok(StackedSpectra::from_series(&one, cfg.spectrum.threshold)?)
}

/// Minimal delay of the series: `P−1` for scalars, the rank test otherwise.
pub fn minimal_delay(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<usize> {
    if ts.n_components() == 1 {
        let p = scalar_pattern(cfg, ts)?;
        if p.is_empty() {
            return Err(CliError::Validation("signal has no coefficient above the threshold".into()));
        }
        Ok(p.p() - 1)
    } else {
        let sp = stacked_spectra(cfg, ts)?;
        Ok(delay_embed::vector_analysis::minimal_delay_vector(&sp, cfg.spectrum.rank_tol)?)
    }
}

fn train_rows(cfg: &ExperimentConfig, ts: &TimeSeries, l: usize) -> CliResult<RowSelection> {
    match cfg.model.train_samples {
        Some(n) => {
            if n > ts.len() || n < l + 2 {
                return Err(CliError::Validation(format!(
                    "train_samples={n} must lie in L+2={}..={} for L={l}",
                    l + 2,
                    ts.len()
                )));
            }
            Ok(RowSelection::Contiguous { start: l, count: n - 1 - l })
        }
        None => Ok(RowSelection::AllPeriodic),
    }
}

/// Fits a model with `l` delays using the configured solver.
pub fn fit_model(cfg: &ExperimentConfig, ts: &TimeSeries, l: usize) -> CliResult<(DelayModel, f64)> {
    let rows = train_rows(cfg, ts, l)?;
    let sys = build_hankel(ts, l, &rows)?;
    let model = match cfg.model.solver {
        SolverChoice::TimeDomain => solve_time_domain(&sys, cfg.model.svd_cutoff)?,
        SolverChoice::Bp | SolverChoice::Svd => {
            let method = if cfg.model.solver == SolverChoice::Bp { SpectralMethod::Bp } else { SpectralMethod::Svd };
            solve_spectral(&build_spectral_system(&scalar_pattern(cfg, ts)?, l)?, method)?
        }
        SolverChoice::Exact => {
            let model = exact_k(&scalar_pattern(cfg, ts)?)?;
            if model.l() != l {
                return Err(CliError::Validation(format!("the exact solver needs L = P-1 = {}, got {l}", model.l())));
            }
            model
        }
    };
    let res = sys.residual(&model);
    Ok((model, res))
}

fn horizon(cfg: &ExperimentConfig, truth: &TimeSeries) -> CliResult<usize> {
    let h = cfg.model.horizon.unwrap_or(truth.len());
    if h > truth.len() {
        return Err(CliError::Validation(format!("horizon {h} exceeds the {} available truth samples", truth.len())));
    }
    Ok(h)
}

/// Rollout seeded from `seed_src` and its NMSE against `truth` over the
/// predicted samples `L+1 … horizon−1`.
fn evaluate(model: &DelayModel, seed_src: &TimeSeries, truth: &TimeSeries, h: usize) -> CliResult<(Array2<f64>, f64)> {
    let l = model.l();
    if h < l + 2 {
        return Err(CliError::Validation(format!("horizon {h} leaves nothing to predict for L={l}")));
    }
    let pred = rollout_from_start(model, seed_src, h)?;
    let e = nmse(pred.slice(s![.., l + 1..]), truth.data().slice(s![.., l + 1..h]))?;
    Ok((pred, e))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentSpectrum {
    pub component: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub first_half: Vec<usize>,
    pub minimal_l: Option<usize>,
    pub m_star: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumOutcome {
    pub components: Vec<ComponentSpectrum>,
    /// Van der Pol only: how far the raw trajectory is from repeating
    /// after the declared period.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periodicity_defect: Option<f64>,
    #[serde(skip)]
    pub reports: Vec<SpectrumReport>,
}

pub fn spectrum(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<SpectrumOutcome> {
    let one = one_period(ts, cfg.spectrum.mean_subtract)?;
    let mut components = Vec::new();
    let mut reports = Vec::new();
    for j in 0..one.n_components() {
        let spec = dft(&one, j)?;
        let pattern = detect_sparsity(&spec, cfg.spectrum.threshold)?;
        components.push(ComponentSpectrum {
            component: j,
            m: pattern.m(),
            p: pattern.p(),
            first_half: pattern.first_half(),
            minimal_l: pattern.p().checked_sub(1),
            m_star: min_subsample(&pattern).ok(),
        });
        reports.push(SpectrumReport::new(&spec, &pattern));
    }
    Ok(SpectrumOutcome { components, periodicity_defect: signal::periodicity_defect(&cfg.signal)?, reports })
}

impl SpectrumOutcome {
    pub fn write(&self, out: &Path) -> CliResult<Vec<PathBuf>> {
        let mut files = Vec::new();
        for (j, r) in self.reports.iter().enumerate() {
            let p = out.join(format!("spectrum_x{}.json", j + 1));
            write_json(&p, r)?;
            files.push(p);
        }
        let p = out.join("spectrum_summary.json");
        write_json(&p, self)?;
        files.push(p);
        Ok(files)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinDelayOutcome {
    #[serde(rename = "J")]
    pub j: usize,
    pub minimal_l: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<VectorReport>,
}

pub fn mindelay(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<MinDelayOutcome> {
    if ts.n_components() == 1 {
        return Ok(MinDelayOutcome { j: 1, minimal_l: minimal_delay(cfg, ts)?, vector: None });
    }
    let sp = stacked_spectra(cfg, ts)?;
    let rep = vector_report(&sp, cfg.spectrum.threshold, cfg.spectrum.rank_tol)?;
    Ok(MinDelayOutcome { j: ts.n_components(), minimal_l: rep.minimal_l, vector: Some(rep) })
}

impl MinDelayOutcome {
    pub fn write(&self, out: &Path) -> CliResult<Vec<PathBuf>> {
        let p = out.join("mindelay.json");
        write_json(&p, self)?;
        Ok(vec![p])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitRow {
    #[serde(rename = "L")]
    pub l: usize,
    pub nmse: f64,
    pub train_residual: f64,
    pub imag_residue: f64,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub rows: Vec<FitRow>,
    pub models: Vec<DelayModel>,
    pub predictions: Vec<Array2<f64>>,
    pub dt: f64,
}

impl FitOutcome {
    pub fn nmse_at(&self, l: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.l == l).map(|r| r.nmse)
    }

    pub fn write(&self, out: &Path) -> CliResult<Vec<PathBuf>> {
        let mut files = Vec::new();
        for ((row, model), pred) in self.rows.iter().zip(&self.models).zip(&self.predictions) {
            let p = out.join(format!("model_L{}.json", row.l));
            write_json(&p, &model.to_json())?;
            files.push(p);
            files.extend(write_trajectory(&out.join(format!("prediction_L{}.csv", row.l)), pred, self.dt)?);
        }
        let p = out.join("nmse_by_L.csv");
        write_rows(
            &p,
            &["L", "nmse", "train_residual", "imag_residue"],
            self.rows.iter().map(|r| vec![r.l.to_string(), fmt(r.nmse), fmt(r.train_residual), fmt(r.imag_residue)]),
        )?;
        files.push(p);
        Ok(files)
    }
}

fn delay_list(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<Vec<usize>> {
    if !cfg.model.l_sweep.is_empty() {
        return Ok(cfg.model.l_sweep.clone());
    }
    Ok(vec![match cfg.model.l {
        Some(l) => l,
        None => minimal_delay(cfg, ts)?,
    }])
}

pub fn fit(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<FitOutcome> {
    let ls = delay_list(cfg, ts)?;
    let h = horizon(cfg, ts)?;
    let runs = ls
        .par_iter()
        .map(|&l| {
            let (model, res) = fit_model(cfg, ts, l)?;
            let (pred, e) = evaluate(&model, ts, ts, h)?;
            Ok((FitRow { l, nmse: e, train_residual: res, imag_residue: model.imag_residue() }, model, pred))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut out = FitOutcome { rows: Vec::new(), models: Vec::new(), predictions: Vec::new(), dt: ts.dt() };
    for (r, m, p) in runs {
        out.rows.push(r);
        out.models.push(m);
        out.predictions.push(p);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct PredictOutcome {
    pub prediction: Array2<f64>,
    pub nmse: Option<f64>,
    pub dt: f64,
}

/// Rolls a saved model out from the first `L+1` samples of the series.
pub fn predict(cfg: &ExperimentConfig, ts: &TimeSeries, model_path: &Path) -> CliResult<PredictOutcome> {
    let text = fs::read_to_string(model_path)
        .map_err(|e| CliError::Validation(format!("cannot read model {}: {e}", model_path.display())))?;
    let js: DelayModelJson = serde_json::from_str(&text)?;
    let model = DelayModel::try_from(js)?;
    if model.j() != ts.n_components() {
        return Err(CliError::Validation(format!(
            "model has J={} but the signal has {} components",
            model.j(),
            ts.n_components()
        )));
    }
    let l = model.l();
    let h = cfg.model.horizon.unwrap_or(ts.len());
    if ts.len() < l + 1 || h < l + 2 {
        return Err(CliError::Validation(format!("need at least L+2={} samples to predict", l + 2)));
    }
    let seed = ts.data().slice(s![.., ..l + 1]).to_owned();
    let tail = predict_rollout(&model, seed.view(), h - l - 1)?;
    let mut prediction = Array2::<f64>::zeros((model.j(), h));
    prediction.slice_mut(s![.., ..l + 1]).assign(&seed);
    prediction.slice_mut(s![.., l + 1..]).assign(&tail);
    let nmse = if h <= ts.len() {
        Some(nmse(prediction.slice(s![.., l + 1..]), ts.data().slice(s![.., l + 1..h]))?)
    } else {
        None
    };
    Ok(PredictOutcome { prediction, nmse, dt: ts.dt() })
}

impl PredictOutcome {
    pub fn write(&self, out: &Path) -> CliResult<Vec<PathBuf>> {
        let mut files = write_trajectory(&out.join("prediction.csv"), &self.prediction, self.dt)?;
        let q = out.join("predict_summary.json");
        write_json(&q, &serde_json::json!({ "nmse": self.nmse, "horizon": self.prediction.ncols() }))?;
        files.push(q);
        Ok(files)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeDomainRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub kappa2: f64,
    pub kappa_eff: f64,
    pub residual: f64,
    pub nmse: f64,
}

#[derive(Clone, Debug)]
pub struct CondOutcome {
    pub spectral: Vec<ConditionReport>,
    pub time_domain: Vec<TimeDomainRow>,
}

pub fn cond(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<CondOutcome> {
    let c = cfg.cond()?;
    let first_half = if c.first_half.is_empty() { scalar_pattern(cfg, ts)?.first_half() } else { c.first_half.clone() };
    let spectral = sweep(&first_half, &c.m, &c.l, c.rel_cutoff)?;
    let mut time_domain = Vec::new();
    if c.time_domain {
        let SignalConfig::FiveMode { periods, .. } = cfg.signal else {
            return Err(CliError::Validation("cond.time_domain needs a five_mode signal".into()));
        };
        let points: Vec<(usize, usize)> = c.m.iter().flat_map(|&m| c.l.iter().map(move |&l| (m, l))).collect();
        time_domain = points
            .par_iter()
            .filter(|&&(m, l)| l + m < m * periods)
            .map(|&(m, l)| {
                // One full period of rows, never wrapped.
                let ts = gen_five_mode(m, periods)?;
                let sys = build_hankel(&ts, l, &RowSelection::Contiguous { start: l, count: m })?;
                let model = solve_time_domain(&sys, cfg.model.svd_cutoff)?;
                let (_, e) = evaluate(&model, &ts, &ts, ts.len())?;
                Ok(TimeDomainRow {
                    m,
                    l,
                    kappa2: cond2(&sys.regressor)?,
                    kappa_eff: cond_effective(&sys.regressor, c.rel_cutoff)?,
                    residual: sys.residual(&model),
                    nmse: e,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
    }
    Ok(CondOutcome { spectral, time_domain })
}

impl CondOutcome {
    pub fn write(&self, out: &Path) -> CliResult<Vec<PathBuf>> {
        let p = out.join("cond.csv");
        let rows: Vec<SweepRow> = self.spectral.iter().map(|r| r.sweep_row()).collect();
        write_sweep_csv(&p, &rows)?;
        let mut files = vec![p];
        if !self.time_domain.is_empty() {
            let p = out.join("time_domain.csv");
            write_rows(
                &p,
                &["M", "L", "kappa2", "kappa_eff", "residual", "nmse"],
                self.time_domain.iter().map(|r| {
                    vec![
                        r.m.to_string(),
                        r.l.to_string(),
                        fmt(r.kappa2),
                        fmt(r.kappa_eff),
                        fmt(r.residual),
                        fmt(r.nmse),
                    ]
                }),
            )?;
            files.push(p);
        }
        Ok(files)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoSummary {
    #[serde(rename = "L")]
    pub l: usize,
    pub spectral_radius: f64,
    pub unit_circle_min_sigma: f64,
    /// `(ε, fraction of grid nodes inside Λ_ε)`.
    pub area_fraction: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct PseudoOutcome {
    pub summaries: Vec<PseudoSummary>,
    pub grids: Vec<PseudospectrumGrid>,
    pub eigenvalues: Vec<Vec<C64>>,
}

pub fn pseudospec(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<PseudoOutcome> {
    let pc = cfg.pseudospec()?;
    let mut out = PseudoOutcome { summaries: Vec::new(), grids: Vec::new(), eigenvalues: Vec::new() };
    for &l in &pc.l {
        let (model, _) = fit_model(cfg, ts, l)?;
        let cm = companion(&model);
        let modal = eigendecompose(&cm)?;
        let grid = pseudospectrum(&cm, &pc.grid)?;
        out.summaries.push(PseudoSummary {
            l,
            spectral_radius: modal.spectral_radius(),
            unit_circle_min_sigma: unit_circle_min_sigma(&cm, 720)?,
            area_fraction: pc.eps.iter().map(|&e| (e, grid.area_fraction(e))).collect(),
        });
        out.grids.push(grid);
        out.eigenvalues.push(modal.eigenvalues);
    }
    Ok(out)
}

fn eig_rows(vals: &[C64]) -> impl Iterator<Item = Vec<String>> + '_ {
    vals.iter().enumerate().map(|(i, z)| vec![i.to_string(), fmt(z.re), fmt(z.im), fmt(z.norm())])
}

impl PseudoOutcome {
    pub fn write(&self, out: &Path) -> CliResult<Vec<PathBuf>> {
        let mut files = Vec::new();
        for ((s, g), e) in self.summaries.iter().zip(&self.grids).zip(&self.eigenvalues) {
            let p = out.join(format!("pseudospectrum_L{}.csv", s.l));
            g.write_csv(&p)?;
            files.push(p);
            let p = out.join(format!("eigenvalues_L{}.csv", s.l));
            write_rows(&p, &["index", "re", "im", "modulus"], eig_rows(e))?;
            files.push(p);
        }
        let p = out.join("pseudospec_summary.json");
        write_json(&p, &self.summaries)?;
        files.push(p);
        Ok(files)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleSummary {
    #[serde(rename = "L")]
    pub l: usize,
    pub members: usize,
    pub stable_fraction: f64,
    pub median_nmse: f64,
}

#[derive(Clone, Debug)]
pub struct EnsembleRun {
    pub l: usize,
    pub nmse: Vec<f64>,
    pub eigenvalues: Vec<Vec<C64>>,
    pub predictions: Vec<Array2<f64>>,
}

#[derive(Clone, Debug)]
pub struct EnsembleOutcome {
    pub summaries: Vec<EnsembleSummary>,
    pub runs: Vec<EnsembleRun>,
    pub dt: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let w = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Member `m` adds noise drawn with seed `seed + m`, trains and seeds the
/// rollout on the noisy data, and is scored against the clean series.
pub fn ensemble(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<EnsembleOutcome> {
    let ec = cfg.ensemble()?;
    let h = horizon(cfg, ts)?;
    let mut out = EnsembleOutcome { summaries: Vec::new(), runs: Vec::new(), dt: ts.dt() };
    for &l in &ec.l {
        let members = (0..ec.members)
            .into_par_iter()
            .map(|m| {
                let noisy =
                    add_noise(ts, &NoiseSpec { snr_fraction: ec.snr_fraction, seed: ec.seed.wrapping_add(m as u64) })?;
                let (model, _) = fit_model(cfg, &noisy, l)?;
                let (pred, e) = evaluate(&model, &noisy, ts, h)?;
                let eig = eigendecompose(&companion(&model))?.eigenvalues;
                Ok((e, eig, pred))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let mut run = EnsembleRun { l, nmse: Vec::new(), eigenvalues: Vec::new(), predictions: Vec::new() };
        for (e, eig, pred) in members {
            run.nmse.push(e);
            run.eigenvalues.push(eig);
            run.predictions.push(pred);
        }
        let mut sorted = run.nmse.clone();
        sorted.sort_by(f64::total_cmp);
        out.summaries.push(EnsembleSummary {
            l,
            members: ec.members,
            stable_fraction: run.nmse.iter().filter(|&&e| e < ec.stable_nmse).count() as f64 / ec.members as f64,
            median_nmse: quantile(&sorted, 0.5),
        });
        out.runs.push(run);
    }
    Ok(out)
}

impl EnsembleOutcome {
    pub fn stable_fraction(&self, l: usize) -> Option<f64> {
        self.summaries.iter().find(|s| s.l == l).map(|s| s.stable_fraction)
    }

    pub fn write(&self, out: &Path) -> CliResult<Vec<PathBuf>> {
        let mut files = Vec::new();
        for run in &self.runs {
            let p = out.join(format!("ensemble_eigs_L{}.csv", run.l));
            let rows = run.eigenvalues.iter().enumerate().flat_map(|(m, e)| {
                e.iter().enumerate().map(move |(i, z)| vec![m.to_string(), i.to_string(), fmt(z.re), fmt(z.im)])
            });
            write_rows(&p, &["member", "index", "re", "im"], rows)?;
            files.push(p);
            let p = out.join(format!("ensemble_bands_L{}.csv", run.l));
            let (j, n) = run.predictions[0].dim();
            let mut rows = Vec::with_capacity(j * n);
            for c in 0..j {
                for t in 0..n {
                    let mut v: Vec<f64> = run.predictions.iter().map(|p| p[[c, t]]).collect();
                    v.sort_by(f64::total_cmp);
                    let mean = v.iter().sum::<f64>() / v.len() as f64;
                    rows.push(vec![
                        (c + 1).to_string(),
                        fmt(t as f64 * self.dt),
                        fmt(mean),
                        fmt(quantile(&v, 0.05)),
                        fmt(quantile(&v, 0.5)),
                        fmt(quantile(&v, 0.95)),
                    ]);
                }
            }
            write_rows(&p, &["component", "t", "mean", "p05", "p50", "p95"], rows)?;
            files.push(p);
            let p = out.join(format!("ensemble_nmse_L{}.csv", run.l));
            write_rows(
                &p,
                &["member", "nmse"],
                run.nmse.iter().enumerate().map(|(m, e)| vec![m.to_string(), fmt(*e)]),
            )?;
            files.push(p);
        }
        let p = out.join("ensemble_summary.csv");
        write_rows(
            &p,
            &["L", "members", "stable_fraction", "median_nmse"],
            self.summaries
                .iter()
                .map(|s| vec![s.l.to_string(), s.members.to_string(), fmt(s.stable_fraction), fmt(s.median_nmse)]),
        )?;
        files.push(p);
        Ok(files)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HodmdRow {
    pub r: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub r_prime: usize,
    pub r_prime_cap: usize,
    pub binding: RankLimit,
    pub spectral_radius: f64,
    /// Reconstruction error over the snapshots `L … M−1`.
    pub nmse: f64,
}

#[derive(Clone, Debug)]
pub struct HodmdOutcome {
    pub rows: Vec<HodmdRow>,
    pub delay_advice: Vec<DelayAdvice>,
    pub reports: Vec<ModalReport>,
    pub eigenvalues: Vec<Vec<C64>>,
}

/// Delay count at which the snapshot-pair limit meets the embedded
/// dimension. `L_opt − 1` is listed too: the ceiling overshoots by one
/// whenever `M/(r+1)` is just above an integer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DelayAdvice {
    pub r: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L_opt")]
    pub l_opt: usize,
    #[serde(rename = "L_opt_minus_1")]
    pub l_opt_minus_1: usize,
    pub r_prime_crossing: f64,
}

pub fn hodmd_sweep(cfg: &ExperimentConfig, ts: &TimeSeries) -> CliResult<HodmdOutcome> {
    let hc = cfg.hodmd()?;
    let points: Vec<(usize, usize)> = hc.r.iter().flat_map(|&r| hc.l.iter().map(move |&l| (r, l))).collect();
    let res = points
        .par_iter()
        .map(|&(r, l)| {
            let h = hodmd(ts, r, l, hc.cutoff)?;
            let n = ts.len() - l;
            let rec = h.reconstruct(n)?;
            let e = nmse(rec.view(), ts.data().slice(s![.., l..]))?;
            let row = HodmdRow {
                r,
                l,
                r_prime: h.r_prime(),
                r_prime_cap: h.r_prime_cap,
                binding: h.binding,
                spectral_radius: h.modal.spectral_radius(),
                nmse: e,
            };
            Ok((row, h.modal.report(), h.modal.eigenvalues.clone()))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut delay_advice = Vec::new();
    for &r in &hc.r {
        let (l_opt, crossing) = optimal_delay(ts.len(), r)?;
        delay_advice.push(DelayAdvice {
            r,
            m: ts.len(),
            l_opt,
            l_opt_minus_1: l_opt.saturating_sub(1),
            r_prime_crossing: crossing,
        });
    }
    let mut out = HodmdOutcome { rows: Vec::new(), delay_advice, reports: Vec::new(), eigenvalues: Vec::new() };
    for (row, rep, eig) in res {
        out.rows.push(row);
        out.reports.push(rep);
        out.eigenvalues.push(eig);
    }
    Ok(out)
}

impl HodmdOutcome {
    pub fn write(&self, out: &Path) -> CliResult<Vec<PathBuf>> {
        let mut files = Vec::new();
        for (row, rep) in self.rows.iter().zip(&self.reports) {
            let p = out.join(format!("modal_r{}_L{}.json", row.r, row.l));
            write_json(&p, rep)?;
            files.push(p);
        }
        let p = out.join("hodmd.csv");
        write_rows(
            &p,
            &["r", "L", "r_prime", "r_prime_cap", "binding", "spectral_radius", "nmse"],
            self.rows.iter().map(|r| {
                vec![
                    r.r.to_string(),
                    r.l.to_string(),
                    r.r_prime.to_string(),
                    r.r_prime_cap.to_string(),
                    serde_json::to_value(r.binding).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                    fmt(r.spectral_radius),
                    fmt(r.nmse),
                ]
            }),
        )?;
        files.push(p);
        let p = out.join("hodmd_delay.json");
        write_json(&p, &self.delay_advice)?;
        files.push(p);
        Ok(files)
    }
}

pub fn gen_write(ts: &TimeSeries, out: &Path) -> CliResult<Vec<PathBuf>> {
    let p = out.join("signal.csv");
    write_csv(ts, &p)?;
    Ok(vec![p.clone(), delay_embed::signals::sidecar_path(&p)])
}

/// Loads the analysis series, failing on an unusable signal section.
pub fn load_signal(cfg: &ExperimentConfig) -> CliResult<TimeSeries> {
    signal::load(cfg)
}
