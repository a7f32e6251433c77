//! Tail statistics of return series.
//!
//! Exponent convention: a density `p(r) ~ r^-alpha` has cumulative tail
//! `P(|r| >= r) ~ r^-(alpha - 1)`. Fits report both numbers. Zero returns
//! (steps without a trade) carry no tail information and are dropped
//! everywhere in this module.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::ReturnSeries;
use crate::error::{Error, Result};

/// Empirical `P(|r| >= value)` at every distinct nonzero `|r|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    pub points: Vec<(u64, f64)>,
    pub sample_size: usize,
}

impl CcdfCurve {
    /// `P(|r| >= value)`, exact for any threshold.
    pub fn tail_mass(&self, value: u64) -> f64 {
        let i = self.points.partition_point(|p| p.0 < value);
        self.points.get(i).map_or(0.0, |p| p.1)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "value,probability")?;
        for (v, p) in &self.points {
            writeln!(w, "{v},{p:.17e}")?;
        }
        Ok(())
    }
}

pub fn ccdf(returns: &ReturnSeries) -> Result<CcdfCurve> {
    ccdf_of_sizes(&returns.trade_sizes())
}

pub fn ccdf_of_sizes(sizes: &[u64]) -> Result<CcdfCurve> {
    let mut v: Vec<u64> = sizes.iter().copied().filter(|&s| s > 0).collect();
    if v.is_empty() {
        return Err(Error::NoTrades);
    }
    v.sort_unstable();
    let n = v.len();
    let mut points = Vec::new();
    let mut i = 0;
    while i < n {
        let value = v[i];
        points.push((value, (n - i) as f64 / n as f64));
        while i < n && v[i] == value {
            i += 1;
        }
    }
    Ok(CcdfCurve { points, sample_size: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityPoint {
    pub lo: f64,
    pub hi: f64,
    /// Geometric bin center.
    pub center: f64,
    pub density: f64,
    pub count: usize,
}

/// Histogram on geometric bins starting at the smallest value. Empty bins
/// are left out; densities integrate to one over the reported bins.
pub fn log_binned_pdf(values: &[f64], bins_per_decade: usize) -> Result<Vec<DensityPoint>> {
    if bins_per_decade == 0 {
        return Err(Error::InvalidArgument("bins_per_decade must be positive".into()));
    }
    let mut v: Vec<f64> = values.iter().copied().filter(|x| *x > 0.0 && x.is_finite()).collect();
    if v.is_empty() {
        return Err(Error::NoTrades);
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let lo0 = v[0];
    let ratio = 10f64.powf(1.0 / bins_per_decade as f64);
    let edge = |i: i32| lo0 * ratio.powi(i);

    let mut out = Vec::new();
    let mut i = 0;
    let mut bin = 0;
    while i < v.len() {
        let (lo, hi) = (edge(bin), edge(bin + 1));
        let start = i;
        while i < v.len() && v[i] < hi {
            i += 1;
        }
        let count = i - start;
        if count > 0 {
            out.push(DensityPoint { lo, hi, center: (lo * hi).sqrt(), density: count as f64 / (n * (hi - lo)), count });
        }
        bin += 1;
    }
    Ok(out)
}

pub fn write_pdf_csv<W: Write>(points: &[DensityPoint], mut w: W) -> Result<()> {
    writeln!(w, "bin_center,density")?;
    for p in points {
        writeln!(w, "{:.17e},{:.17e}", p.center, p.density)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Exponent of the density.
    pub alpha_density: f64,
    /// Exponent of the cumulative tail; always `alpha_density - 1`.
    pub alpha_cumulative: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub stderr: f64,
    pub n_tail: usize,
}

pub const MIN_TAIL_POINTS: usize = 100;

/// Continuous maximum-likelihood (Hill-type) fit over points `>= r_min`.
pub fn fit_power_law(sample: &[f64], r_min: f64) -> Result<TailFit> {
    if !(r_min > 0.0) {
        return Err(Error::InvalidArgument("r_min must be positive".into()));
    }
    let mut n = 0usize;
    let mut log_sum = 0.0;
    let mut r_max = r_min;
    for &r in sample.iter().filter(|&&r| r >= r_min) {
        n += 1;
        log_sum += (r / r_min).ln();
        r_max = r_max.max(r);
    }
    if n < MIN_TAIL_POINTS {
        return Err(Error::TooFewTailPoints { got: n, need: MIN_TAIL_POINTS });
    }
    if log_sum <= 0.0 {
        return Err(Error::DegenerateTail);
    }
    let alpha = 1.0 + n as f64 / log_sum;
    Ok(TailFit {
        alpha_density: alpha,
        alpha_cumulative: alpha - 1.0,
        r_min,
        r_max,
        stderr: (alpha - 1.0) / (n as f64).sqrt(),
        n_tail: n,
    })
}

/// Kolmogorov-Smirnov distance between the empirical tail above `fit.r_min`
/// and the fitted Pareto tail. `sorted` must be ascending.
fn ks_distance(sorted: &[f64], fit: &TailFit) -> f64 {
    let start = sorted.partition_point(|&r| r < fit.r_min);
    let tail = &sorted[start..];
    let n = tail.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < tail.len() {
        let r = tail[i];
        let model = (r / fit.r_min).powf(-fit.alpha_cumulative);
        // empirical P(R >= r) just at r, and just above it
        let at = (tail.len() - i) as f64 / n;
        while i < tail.len() && tail[i] == r {
            i += 1;
        }
        let above = (tail.len() - i) as f64 / n;
        d = d.max((at - model).abs()).max((above - model).abs());
    }
    d
}

/// Fit with `r_min` chosen to minimise the KS distance over the distinct
/// sample values that leave at least [`MIN_TAIL_POINTS`] points in the tail.
pub fn fit_power_law_auto(sample: &[f64]) -> Result<(TailFit, f64)> {
    let mut sorted: Vec<f64> = sample.iter().copied().filter(|r| *r > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    if sorted.len() < MIN_TAIL_POINTS {
        return Err(Error::TooFewTailPoints { got: sorted.len(), need: MIN_TAIL_POINTS });
    }
    let last_allowed = sorted[sorted.len() - MIN_TAIL_POINTS];
    let mut candidates: Vec<f64> = sorted.iter().copied().filter(|&r| r <= last_allowed).collect();
    candidates.dedup();
    // keep the scan affordable on continuous samples
    if candidates.len() > 400 {
        let step = candidates.len() as f64 / 400.0;
        candidates = (0..400).map(|i| candidates[(i as f64 * step) as usize]).collect();
    }
    let mut best: Option<(TailFit, f64)> = None;
    for r_min in candidates {
        let fit = match fit_power_law(&sorted, r_min) {
            Ok(f) => f,
            Err(Error::DegenerateTail) => continue,
            Err(e) => return Err(e),
        };
        let d = ks_distance(&sorted, &fit);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((fit, d));
        }
    }
    best.ok_or(Error::DegenerateTail)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub x: f64,
    pub fit: Option<TailFit>,
    /// `P(|r| >= tail_threshold)` over nonzero returns.
    pub tail_mass: f64,
    pub n_trades: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Common lower fit cutoff; chosen by KS on the first series when `None`.
    pub r_min: Option<f64>,
    pub tail_threshold: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { r_min: None, tail_threshold: 50 }
    }
}

/// Fit every series over one common range so that exponents and tail masses
/// are comparable across consensus parameters.
pub fn cutoff_scan(samples: &[(f64, ReturnSeries)], opts: ScanOptions) -> Result<(f64, Vec<ScanRow>)> {
    let abs: Vec<Vec<f64>> =
        samples.iter().map(|(_, s)| s.trade_sizes().into_iter().map(|v| v as f64).collect()).collect();
    let r_min = match opts.r_min {
        Some(r) => r,
        None => match abs.first() {
            Some(first) => fit_power_law_auto(first)?.0.r_min,
            None => return Ok((f64::NAN, Vec::new())),
        },
    };
    let rows = samples
        .iter()
        .zip(&abs)
        .map(|((x, series), a)| {
            let fit = fit_power_law(a, r_min).ok();
            let tail_mass = ccdf(series).map(|c| c.tail_mass(opts.tail_threshold)).unwrap_or(0.0);
            ScanRow { x: *x, fit, tail_mass, n_trades: a.len() }
        })
        .collect();
    Ok((r_min, rows))
}

pub fn write_fits_csv<W: Write>(rows: &[ScanRow], mut w: W) -> Result<()> {
    writeln!(w, "x,alpha_density,alpha_cumulative,r_min,stderr,n_tail,tail_mass")?;
    for row in rows {
        match row.fit {
            Some(f) => writeln!(
                w,
                "{},{:.10},{:.10},{},{:.10},{},{:.10e}",
                row.x, f.alpha_density, f.alpha_cumulative, f.r_min, f.stderr, f.n_tail, row.tail_mass
            )?,
            None => writeln!(w, "{},,,,,0,{:.10e}", row.x, row.tail_mass)?,
        }
    }
    Ok(())
}

/// Least-squares fits of the log-CCDF beyond a threshold: linear in `r`
/// (exponential tail) against linear in `ln r` (power-law tail).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailShape {
    pub n_points: usize,
    /// Residual sum of squares of `ln P` against `r`.
    pub exponential_rss: f64,
    /// Residual sum of squares of `ln P` against `ln r`.
    pub power_law_rss: f64,
    pub exponential_rate: f64,
    pub power_law_exponent: f64,
}

impl TailShape {
    pub fn prefers_exponential(&self) -> bool {
        self.exponential_rss < self.power_law_rss
    }
}

pub fn compare_tail_shape(curve: &CcdfCurve, from: u64) -> Result<TailShape> {
    let pts: Vec<(f64, f64)> =
        curve.points.iter().filter(|p| p.0 >= from).map(|&(v, p)| (v as f64, p.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::TooFewTailPoints { got: pts.len(), need: 3 });
    }
    let (exp_rss, exp_slope) = linear_rss(pts.iter().map(|&(r, lp)| (r, lp)));
    let (pow_rss, pow_slope) = linear_rss(pts.iter().map(|&(r, lp)| (r.ln(), lp)));
    Ok(TailShape {
        n_points: pts.len(),
        exponential_rss: exp_rss,
        power_law_rss: pow_rss,
        exponential_rate: -exp_slope,
        power_law_exponent: -pow_slope,
    })
}

fn linear_rss(pts: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let n = pts.clone().count() as f64;
    let (mx, my) = pts.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxx: f64 = pts.clone().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = pts.clone().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rss = pts.map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    (rss, slope)
}

/// Draw `n` values with density `~ r^-alpha_density` above `r_min`.
pub fn pareto_sample<R: rand::Rng + ?Sized>(alpha_density: f64, r_min: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    use rand_distr::Distribution;
    let d = rand_distr::Pareto::new(r_min, alpha_density - 1.0)
        .map_err(|e| Error::InvalidArgument(format!("pareto({alpha_density}, {r_min}): {e}")))?;
    Ok((0..n).map(|_| d.sample(rng)).collect())
}

/// Fraction of `trials` synthetic samples (size `n`, known `r_min`) whose
/// fitted exponent lies within three standard errors of `alpha_density`.
pub fn calibration_coverage(alpha_density: f64, n: usize, trials: usize, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..trials {
        let sample = pareto_sample(alpha_density, 1.0, n, &mut rng)?;
        let fit = fit_power_law(&sample, 1.0)?;
        if (fit.alpha_density - alpha_density).abs() <= 3.0 * fit.stderr {
            hits += 1;
        }
    }
    Ok(hits as f64 / trials.max(1) as f64)
}
