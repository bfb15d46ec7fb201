//! Log-log scaling fits `log y = c + alpha log(1/eps)` with bootstrap
//! percentile intervals, and the per-(family, n) exponent table.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BenchError, Result};
use crate::records::ExperimentRecord;
use crate::seeds::hash_words;

pub const BOOTSTRAP_RESAMPLES: usize = 100;
/// Distinct accuracy values required before an exponent is reported.
pub const MIN_DISTINCT_EPS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLogFit {
    pub alpha: f64,
    pub intercept: f64,
    pub used: usize,
    /// Points with `y <= 0`.
    pub dropped: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub alpha: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub used: usize,
    pub dropped: usize,
    pub censored: usize,
    pub distinct_eps: usize,
}

fn distinct(xs: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn ols(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in xy {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn to_log(points: &[(f64, f64)]) -> Result<(Vec<(f64, f64)>, usize)> {
    let mut xy = Vec::with_capacity(points.len());
    let mut dropped = 0;
    for &(eps, y) in points {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(BenchError::Fit(format!("bad epsilon {eps}")));
        }
        if y > 0.0 && y.is_finite() {
            xy.push(((1.0 / eps).ln(), y.ln()));
        } else {
            dropped += 1;
        }
    }
    Ok((xy, dropped))
}

/// Ordinary least squares of `log y` on `log(1/eps)`; non-positive `y` are dropped.
pub fn loglog_fit(points: &[(f64, f64)]) -> Result<LogLogFit> {
    let (xy, dropped) = to_log(points)?;
    if distinct(xy.iter().map(|p| p.0)) < 2 {
        return Err(BenchError::Fit("need at least two distinct epsilon values".into()));
    }
    let (alpha, intercept) = ols(&xy);
    Ok(LogLogFit {
        alpha,
        intercept,
        used: xy.len(),
        dropped,
    })
}

/// Percentile of sorted data, interpolating linearly between order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 2.5 and 97.5 percentiles of the slope over `b` resamples with
/// replacement. Resamples with a single distinct epsilon are redrawn, up to
/// `10 b` draws in total.
pub fn bootstrap_ci(points: &[(f64, f64)], b: usize, seed: u64) -> Result<(f64, f64)> {
    let (xy, _) = to_log(points)?;
    if distinct(xy.iter().map(|p| p.0)) < 2 {
        return Err(BenchError::Fit("need at least two distinct epsilon values".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slopes = Vec::with_capacity(b);
    let mut sample = vec![(0.0, 0.0); xy.len()];
    let mut attempts = 0;
    while slopes.len() < b {
        if attempts == 10 * b {
            return Err(BenchError::Fit(format!("only {} of {b} usable resamples", slopes.len())));
        }
        attempts += 1;
        for s in sample.iter_mut() {
            *s = xy[rng.random_range(0..xy.len())];
        }
        if distinct(sample.iter().map(|p| p.0)) < 2 {
            continue;
        }
        slopes.push(ols(&sample).0);
    }
    slopes.sort_by(f64::total_cmp);
    Ok((percentile(&slopes, 0.025), percentile(&slopes, 0.975)))
}

/// Fit plus interval over `(eps, y, censored)` triples.
pub fn fit_with_ci(points: &[(f64, f64, bool)], b: usize, seed: u64) -> Result<FitResult> {
    let censored = points.iter().filter(|p| p.2).count();
    let clean: Vec<(f64, f64)> = points.iter().filter(|p| !p.2).map(|p| (p.0, p.1)).collect();
    let fit = loglog_fit(&clean)?;
    let distinct_eps = distinct(clean.iter().filter(|p| p.1 > 0.0).map(|p| p.0));
    let (ci_low, ci_high) = bootstrap_ci(&clean, b, seed)?;
    Ok(FitResult {
        alpha: fit.alpha,
        intercept: fit.intercept,
        ci_low,
        ci_high,
        used: fit.used,
        dropped: fit.dropped,
        censored,
        distinct_eps,
    })
}

/// The four exponents of the summary table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quantity {
    /// Stage-1 samples `M_1`.
    Stage1Samples,
    /// v1 update steps.
    V1Steps,
    /// v2 update steps including step-size adaptations.
    V2Steps,
    /// Stage-3 samples `M_3`.
    Stage3Samples,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [
        Quantity::Stage1Samples,
        Quantity::V1Steps,
        Quantity::V2Steps,
        Quantity::Stage3Samples,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Quantity::Stage1Samples => "alpha1",
            Quantity::V1Steps => "alpha2",
            Quantity::V2Steps => "alpha3",
            Quantity::Stage3Samples => "alpha4",
        }
    }

    /// `(eps, y, censored)` for a record that belongs to this quantity.
    pub fn point(&self, r: &ExperimentRecord) -> Option<(f64, f64, bool)> {
        let steps = |r: &ExperimentRecord| (r.iterations.unwrap_or(0) + r.substeps.unwrap_or(0)) as f64;
        let y = match (self, r.stage, r.variant.as_str()) {
            (Quantity::Stage1Samples, 1, _) => r.samples_used.unwrap_or(0) as f64,
            (Quantity::V1Steps, 2, "v1") | (Quantity::V2Steps, 2, "v2") => steps(r),
            (Quantity::Stage3Samples, 3, _) => r.samples_used.unwrap_or(0) as f64,
            _ => return None,
        };
        Some((r.epsilon, y, !r.is_clean()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMode {
    /// One regression over every point of the (family, n) group.
    Pooled,
    /// One regression per input state; the cell reports the median slope
    /// and the 2.5/97.5 percentiles across states.
    PerState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table1Row {
    pub family: String,
    pub n: usize,
    pub cells: BTreeMap<Quantity, std::result::Result<FitResult, String>>,
}

impl Table1Row {
    pub fn alpha(&self, q: Quantity) -> Option<f64> {
        self.cells.get(&q).and_then(|c| c.as_ref().ok()).map(|f| f.alpha)
    }
}

fn fit_cell(points: &[(f64, f64, bool)], seed: u64) -> std::result::Result<FitResult, String> {
    let fit = fit_with_ci(points, BOOTSTRAP_RESAMPLES, seed).map_err(|e| e.to_string())?;
    if fit.distinct_eps < MIN_DISTINCT_EPS {
        return Err(format!("{} distinct epsilon values", fit.distinct_eps));
    }
    Ok(fit)
}

fn per_state_cell(
    groups: &BTreeMap<(u64, u64), Vec<(f64, f64, bool)>>,
    seed: u64,
) -> std::result::Result<FitResult, String> {
    let mut fits = Vec::new();
    let (mut used, mut dropped, mut censored) = (0, 0, 0);
    for (i, pts) in groups.values().enumerate() {
        if let Ok(f) = fit_cell(pts, hash_words(&[seed, i as u64])) {
            used += f.used;
            dropped += f.dropped;
            censored += f.censored;
            fits.push(f);
        }
    }
    if fits.is_empty() {
        return Err("no state has enough epsilon values".into());
    }
    let mut alphas: Vec<f64> = fits.iter().map(|f| f.alpha).collect();
    let mut intercepts: Vec<f64> = fits.iter().map(|f| f.intercept).collect();
    alphas.sort_by(f64::total_cmp);
    intercepts.sort_by(f64::total_cmp);
    Ok(FitResult {
        alpha: percentile(&alphas, 0.5),
        intercept: percentile(&intercepts, 0.5),
        ci_low: percentile(&alphas, 0.025),
        ci_high: percentile(&alphas, 0.975),
        used,
        dropped,
        censored,
        distinct_eps: fits.iter().map(|f| f.distinct_eps).max().unwrap_or(0),
    })
}

/// Exponents per (family, n). Cells without enough data hold the reason.
pub fn table1(records: &[ExperimentRecord], mode: FitMode, seed: u64) -> Vec<Table1Row> {
    let mut groups: BTreeMap<(String, usize), Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.state_family.clone(), r.n)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((family, n), rs)| {
            let mut cells = BTreeMap::new();
            for (qi, q) in Quantity::ALL.iter().enumerate() {
                let cell_seed = hash_words(&[seed, n as u64, qi as u64]);
                let cell = match mode {
                    FitMode::Pooled => {
                        let pts: Vec<_> = rs.iter().filter_map(|r| q.point(r)).collect();
                        if pts.is_empty() {
                            Err("absent".to_string())
                        } else {
                            fit_cell(&pts, cell_seed)
                        }
                    }
                    FitMode::PerState => {
                        let mut by_state: BTreeMap<(u64, u64), Vec<_>> = BTreeMap::new();
                        for r in &rs {
                            if let Some(p) = q.point(r) {
                                by_state.entry((r.k, r.state_seed)).or_default().push(p);
                            }
                        }
                        per_state_cell(&by_state, cell_seed)
                    }
                };
                cells.insert(*q, cell);
            }
            Table1Row { family, n, cells }
        })
        .collect()
}
