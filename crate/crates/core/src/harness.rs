//! Experiment plumbing: configuration files, reference series, error
//! metrics, regression slopes, cost/accuracy envelopes and CSV output.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fs::File;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive_mesh::MeshPolicy;
use crate::error::{Result, SolverError};
use crate::frontier::SellValueTime;
use crate::model::{critical_quantities, ModelParams, PolarDomain};
use crate::solver::{
    crossing_from_series, onset_from_series, solve, Backend, CrossingReport, OnsetReport,
    SolutionPath, SolveOptions,
};

fn default_delta() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

/// Solver configuration as read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub sigma: f64,
    pub r: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub mu: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub n_theta: usize,
    pub n_t: usize,
    #[serde(default)]
    pub method: Backend,
    /// Take the value term of the selling obstacle at the new time level.
    #[serde(default = "default_true")]
    pub consistent_time: bool,
    /// Resolutions visited by the sweep experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

/// Per-method resolution lists; a sweep runs their cartesian product.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chebyshev: Option<SweepGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd: Option<SweepGrid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n_theta: Vec<usize>,
    pub n_t: Vec<usize>,
}

impl Config {
    /// Baseline market with the given discretization.
    pub fn baseline(horizon: f64, method: Backend, n_theta: usize, n_t: usize) -> Self {
        let p = ModelParams::baseline(horizon);
        Self {
            sigma: p.sigma,
            r: p.r,
            alpha: p.alpha,
            gamma: p.gamma,
            lambda: p.lambda,
            mu: p.mu,
            horizon,
            delta: default_delta(),
            n_theta,
            n_t,
            method,
            consistent_time: true,
            sweep: None,
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SolverError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.params()?;
        Ok(cfg)
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.r,
            self.alpha,
            self.sigma,
            self.gamma,
            self.lambda,
            self.mu,
            self.horizon,
        )
    }

    pub fn policy(&self) -> Result<MeshPolicy> {
        let p = self.params()?;
        MeshPolicy::build(&p, &critical_quantities(&p), self.delta, self.n_theta)
    }

    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            sell_value_time: if self.consistent_time {
                SellValueTime::Consistent
            } else {
                SellValueTime::Lagged
            },
            ..SolveOptions::default()
        }
    }

    /// Same configuration at another resolution.
    pub fn with_resolution(&self, method: Backend, n_theta: usize, n_t: usize) -> Self {
        Self {
            method,
            n_theta,
            n_t,
            sweep: None,
            ..self.clone()
        }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_t as f64
    }

    pub fn solve(&self) -> Result<SolutionPath> {
        solve(&self.params()?, &self.policy()?, self.n_t, self.method, &self.options())
    }

    /// Configurations of the sweep section, spectral first.
    pub fn sweep_configs(&self) -> Vec<Config> {
        let Some(sweep) = &self.sweep else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for (method, grid) in [(Backend::Spectral, &sweep.chebyshev), (Backend::FiniteDifference, &sweep.fd)] {
            if let Some(grid) = grid {
                for &n in &grid.n_theta {
                    for &nt in &grid.n_t {
                        out.push(self.with_resolution(method, n, nt));
                    }
                }
            }
        }
        out
    }
}

/// `v(0, t_l)` on a time mesh, ordered by decreasing `t` as solved.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl Series {
    pub fn from_path(path: &SolutionPath) -> Result<Self> {
        Ok(Self {
            t: path.times(),
            v: path.v_at_zero()?,
        })
    }

    /// Linear interpolation; `None` outside the covered times.
    pub fn at(&self, t: f64) -> Option<f64> {
        // Times are stored in decreasing order.
        let n = self.t.len();
        let (lo, hi) = (self.t[n - 1], self.t[0]);
        let slack = 1e-9 * (hi - lo).abs().max(1.0);
        if !(t >= lo - slack && t <= hi + slack) {
            return None;
        }
        let k = self.t.partition_point(|&x| x > t);
        if k == 0 {
            return Some(self.v[0]);
        }
        if k == n {
            return Some(self.v[n - 1]);
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        if t0 == t1 {
            return Some(self.v[k]);
        }
        let w = (t - t0) / (t1 - t0);
        Some(self.v[k - 1] + w * (self.v[k] - self.v[k - 1]))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h.trim() == name).ok_or_else(|| {
                SolverError::Input(format!("{} has no `{name}` column", path.display()))
            })
        };
        let (ct, cv) = (col("t")?, col("v0")?);
        let (mut t, mut v) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            t.push(parse_field(&rec[ct])?);
            v.push(parse_field(&rec[cv])?);
        }
        if t.len() < 2 {
            return Err(SolverError::Input(format!(
                "{} holds fewer than two samples",
                path.display()
            )));
        }
        if t.windows(2).all(|w| w[0] < w[1]) {
            t.reverse();
            v.reverse();
        } else if !t.windows(2).all(|w| w[0] > w[1]) {
            return Err(SolverError::Input(format!("{} times are not monotone", path.display())));
        }
        Ok(Self { t, v })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "v0"])?;
        for (t, v) in self.t.iter().zip(&self.v) {
            w.write_record([fmt(*t), fmt(*v)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 17 significant digits: parsing the text back gives the same `f64`.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_field(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| SolverError::Input(format!("`{s}` is not a number")))
}

/// Root mean square deviation of `series` from `reference` over the times
/// of `series`.
pub fn rmse(series: &Series, reference: &Series) -> Result<f64> {
    let mut acc = 0.0;
    for (&t, &v) in series.t.iter().zip(&series.v) {
        let r = reference.at(t).ok_or_else(|| {
            SolverError::Input(format!("reference does not cover t = {t}"))
        })?;
        acc += (v - r).powi(2);
    }
    Ok((acc / series.t.len() as f64).sqrt())
}

pub fn rmse_v0(path: &SolutionPath, reference: &Series) -> Result<f64> {
    rmse(&Series::from_path(path)?, reference)
}

/// Least-squares slope of `log10(metric)` against `log10(n)`.
pub fn convergence_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(SolverError::Input(format!(
            "a slope needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(n, m)| !(n > 0.0 && m > 0.0)) {
        return Err(SolverError::Input("slope points must be positive".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return Err(SolverError::Input("resolutions do not spread".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Keeps points up to the first refinement that fails to reduce the metric by
/// at least `min_change` (relative); a refinement that increases it counts as
/// saturated too. Points are sorted by `n` first.
pub fn drop_saturated(points: &[(f64, f64)], min_change: f64) -> Vec<(f64, f64)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for p in sorted {
        if let Some(prev) = out.last() {
            if prev.1 - p.1 < min_change * prev.1 {
                break;
            }
        }
        out.push(p);
    }
    out
}

/// One solve, reduced to a scalar metric and its cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub method: Backend,
    pub n_theta: usize,
    pub n_t: usize,
    pub metric_name: String,
    pub metric_value: f64,
    pub runtime_ms: f64,
}

/// Records on the lower-left convex hull in log-log (runtime, metric)
/// space, sorted by runtime.
pub fn perf_envelope(records: &[ExperimentRecord]) -> Vec<ExperimentRecord> {
    let mut pts: Vec<&ExperimentRecord> = records
        .iter()
        .filter(|r| r.runtime_ms > 0.0 && r.metric_value > 0.0)
        .collect();
    pts.sort_by(|a, b| {
        a.runtime_ms
            .total_cmp(&b.runtime_ms)
            .then(a.metric_value.total_cmp(&b.metric_value))
    });
    // Pareto front first: each kept point is more accurate than all cheaper ones.
    let mut front: Vec<&ExperimentRecord> = Vec::new();
    for r in pts {
        if front.last().map_or(true, |l| r.metric_value < l.metric_value) {
            if front.last().is_some_and(|l| l.runtime_ms == r.runtime_ms) {
                front.pop();
            }
            front.push(r);
        }
    }
    let xy = |r: &ExperimentRecord| (r.runtime_ms.log10(), r.metric_value.log10());
    let mut hull: Vec<&ExperimentRecord> = Vec::new();
    for r in front {
        while hull.len() >= 2 {
            let (ax, ay) = xy(hull[hull.len() - 2]);
            let (bx, by) = xy(hull[hull.len() - 1]);
            let (cx, cy) = xy(r);
            // Drop the middle point unless it lies strictly below the chord.
            if (bx - ax) * (cy - ay) - (by - ay) * (cx - ax) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(r);
    }
    hull.into_iter().cloned().collect()
}

/// Cheapest runtime among `records` reaching `metric ≤ tolerance`.
pub fn cost_to_reach(records: &[ExperimentRecord], tolerance: f64) -> Option<f64> {
    records
        .iter()
        .filter(|r| r.metric_value <= tolerance)
        .map(|r| r.runtime_ms)
        .min_by(f64::total_cmp)
}

/// Which method is cheaper at the loosest and tightest tolerance decades.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossover {
    pub loose_tolerance: f64,
    pub tight_tolerance: f64,
    pub loose_cost: (Option<f64>, Option<f64>),
    pub tight_cost: (Option<f64>, Option<f64>),
    /// Finite differences strictly cheaper at the loose tolerance.
    pub fd_wins_loose: bool,
    /// Spectral strictly cheaper (or the only method) at the tight tolerance.
    pub spectral_wins_tight: bool,
}

/// Decade tolerances `10^k` bracket the data: the loosest is the decade
/// just above the worst error, the tightest the decade just above the best.
/// Costs are `(spectral, fd)`.
pub fn crossover(records: &[ExperimentRecord]) -> Option<Crossover> {
    let (spec, fd): (Vec<_>, Vec<_>) = records
        .iter()
        .cloned()
        .partition(|r| r.method == Backend::Spectral);
    if spec.is_empty() || fd.is_empty() {
        return None;
    }
    let errors = records.iter().map(|r| r.metric_value).filter(|m| *m > 0.0);
    let worst = errors.clone().fold(f64::MIN, f64::max);
    let best = errors.fold(f64::MAX, f64::min);
    let loose = 10f64.powf(worst.log10().ceil());
    let tight = 10f64.powf(best.log10().ceil());
    let cheaper = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    let loose_cost = (cost_to_reach(&spec, loose), cost_to_reach(&fd, loose));
    let tight_cost = (cost_to_reach(&spec, tight), cost_to_reach(&fd, tight));
    Some(Crossover {
        loose_tolerance: loose,
        tight_tolerance: tight,
        loose_cost,
        tight_cost,
        fd_wins_loose: cheaper(loose_cost.1, loose_cost.0),
        spectral_wins_tight: cheaper(tight_cost.0, tight_cost.1),
    })
}

/// What the experiments need from a solve, without the nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub method: Backend,
    pub n_theta: usize,
    pub n_t: usize,
    pub dt: f64,
    pub domain: PolarDomain,
    pub t: Vec<f64>,
    pub br: Vec<f64>,
    pub sr: Vec<f64>,
    pub v0: Series,
    pub runtime_ms: f64,
    pub max_residual: f64,
    pub retries: usize,
    pub min_value: f64,
}

impl PathSummary {
    pub fn from_path(path: &SolutionPath) -> Result<Self> {
        Ok(Self {
            method: path.backend,
            n_theta: path.n_theta,
            n_t: path.n_t,
            dt: path.dt,
            domain: path.domain,
            t: path.times(),
            br: path.slices.iter().map(|s| s.br).collect(),
            sr: path.slices.iter().map(|s| s.sr).collect(),
            v0: Series::from_path(path)?,
            runtime_ms: path.diagnostics.runtime_ms,
            max_residual: path.diagnostics.max_residual(),
            retries: path.diagnostics.retries.len(),
            min_value: path
                .slices
                .iter()
                .flat_map(|s| s.v.iter().copied())
                .fold(f64::INFINITY, f64::min),
        })
    }

    pub fn onset(&self) -> Option<OnsetReport> {
        onset_from_series(&self.t, &self.br, self.domain.t_hat0)
    }

    pub fn crossing(&self) -> Option<CrossingReport> {
        crossing_from_series(&self.t, &self.br, self.domain.t_hat1?)
    }

    pub fn record(&self, metric_name: &str, metric_value: f64) -> ExperimentRecord {
        ExperimentRecord {
            method: self.method,
            n_theta: self.n_theta,
            n_t: self.n_t,
            metric_name: metric_name.to_owned(),
            metric_value,
            runtime_ms: self.runtime_ms,
        }
    }

    /// Frontiers at the slice nearest to `t`.
    pub fn frontiers_at(&self, t: f64) -> (f64, f64) {
        let k = ((self.t[0] - t) / self.dt).round().clamp(0.0, self.n_t as f64) as usize;
        (self.br[k], self.sr[k])
    }
}

/// Solves every configuration on the rayon pool. Results keep input order.
pub fn run_sweep(configs: &[Config]) -> Vec<Result<PathSummary>> {
    configs
        .par_iter()
        .map(|c| PathSummary::from_path(&c.solve()?))
        .collect()
}

/// Frontiers at `t = 0` and one year later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryReport {
    pub br0: f64,
    pub sr0: f64,
    pub br1: f64,
    pub sr1: f64,
}

pub fn stationary_report(summary: &PathSummary) -> StationaryReport {
    let (br0, sr0) = summary.frontiers_at(0.0);
    let (br1, sr1) = summary.frontiers_at(1.0);
    StationaryReport { br0, sr0, br1, sr1 }
}

pub fn write_frontiers(path: &SolutionPath, out: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["t", "br_theta", "sr_theta", "br_z", "sr_z"])?;
    for s in &path.slices {
        w.write_record([
            fmt(s.t),
            fmt(s.br),
            fmt(s.sr),
            fmt(cot(s.br)),
            fmt(cot(s.sr)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `cot θ`, infinite at `θ = 0`.
fn cot(theta: f64) -> f64 {
    theta.cos() / theta.sin()
}

/// Nodal values of at most `max_slices` evenly strided slices (the first
/// and last always included).
pub fn write_value(path: &SolutionPath, out: impl AsRef<Path>, max_slices: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["t", "theta", "v"])?;
    let count = path.slices.len();
    let stride = count.div_ceil(max_slices.max(2) - 1).max(1);
    let picks = (0..count)
        .step_by(stride)
        .chain(std::iter::once(count - 1))
        .collect::<std::collections::BTreeSet<_>>();
    for l in picks {
        let s = &path.slices[l];
        for (theta, v) in s.grid.nodes().iter().zip(&s.v) {
            w.write_record([fmt(s.t), fmt(*theta), fmt(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A row of `converge.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub method: Backend,
    pub n_theta: usize,
    pub n_t: usize,
    pub rmse: f64,
    pub runtime_ms: f64,
    pub slope_annotation: String,
}

pub fn write_converge(rows: &[ConvergeRow], out: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["method", "n_theta", "n_t", "rmse", "runtime_ms", "slope_annotation"])?;
    for r in rows {
        w.write_record([
            r.method.to_string(),
            r.n_theta.to_string(),
            r.n_t.to_string(),
            fmt(r.rmse),
            fmt(r.runtime_ms),
            r.slope_annotation.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_converge(path: impl AsRef<Path>) -> Result<Vec<ConvergeRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let method = match rec[0].trim() {
            "chebyshev" => Backend::Spectral,
            "fd" => Backend::FiniteDifference,
            other => return Err(SolverError::Input(format!("unknown method `{other}`"))),
        };
        let int = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| SolverError::Input(format!("`{s}` is not an integer")))
        };
        rows.push(ConvergeRow {
            method,
            n_theta: int(&rec[1])?,
            n_t: int(&rec[2])?,
            rmse: parse_field(&rec[3])?,
            runtime_ms: parse_field(&rec[4])?,
            slope_annotation: rec[5].to_owned(),
        });
    }
    Ok(rows)
}

/// Which resolution a convergence sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

/// RMSE rows of a sweep, annotated with the per-method regression slope.
/// For the time axis, points past the spatial-error floor are excluded from
/// the fit.
pub fn convergence_rows(
    summaries: &[PathSummary],
    reference: &Series,
    axis: Axis,
) -> Result<Vec<ConvergeRow>> {
    let mut by_method: BTreeMap<String, Vec<(usize, f64, &PathSummary)>> = BTreeMap::new();
    for s in summaries {
        let e = rmse(&s.v0, reference)?;
        by_method.entry(s.method.to_string()).or_default().push((
            match axis {
                Axis::Space => s.n_theta,
                Axis::Time => s.n_t,
            },
            e,
            s,
        ));
    }
    let mut rows = Vec::new();
    for (_, mut pts) in by_method {
        pts.sort_by_key(|p| p.0);
        let raw: Vec<(f64, f64)> = pts.iter().map(|p| (p.0 as f64, p.1)).collect();
        let fitted = match axis {
            Axis::Space => raw.clone(),
            Axis::Time => drop_saturated(&raw, SATURATION_CHANGE),
        };
        let annotation = match convergence_slope(&fitted) {
            Ok(slope) => format!("slope={slope:.3} over {} points", fitted.len()),
            Err(e) => format!("no slope: {e}"),
        };
        for (n, e, s) in pts {
            let used = fitted.iter().any(|f| f.0 == n as f64);
            rows.push(ConvergeRow {
                method: s.method,
                n_theta: s.n_theta,
                n_t: s.n_t,
                rmse: e,
                runtime_ms: s.runtime_ms,
                slope_annotation: if used { annotation.clone() } else { "saturated".into() },
            });
        }
    }
    Ok(rows)
}

/// Relative RMSE reduction below which a time refinement counts as saturated.
pub const SATURATION_CHANGE: f64 = 0.10;

/// Slope stored in an annotation written by [`convergence_rows`].
pub fn annotated_slope(annotation: &str) -> Option<f64> {
    annotation
        .strip_prefix("slope=")?
        .split_whitespace()
        .next()?
        .parse()
        .ok()
}

/// `v(0, t)` and the buying frontier relative to `π/2` at `t`, for quick
/// inspection.
pub fn describe(summary: &PathSummary, t: f64) -> String {
    let (br, sr) = summary.frontiers_at(t);
    format!(
        "t={t:.4} br={br:.6} (π/2{:+.2e}) sr={sr:.6} br_z={:.6} sr_z={:.6} v0={:.8}",
        br - FRAC_PI_2,
        cot(br),
        cot(sr),
        summary.v0.at(t).unwrap_or(f64::NAN)
    )
}

/// Writes `value` as pretty JSON.
pub fn write_json<T: Serialize>(value: &T, out: impl AsRef<Path>) -> Result<()> {
    let f = File::create(out)?;
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(t: Vec<f64>, v: Vec<f64>) -> Series {
        Series { t, v }
    }

    fn record(method: Backend, error: f64, runtime: f64) -> ExperimentRecord {
        ExperimentRecord {
            method,
            n_theta: 1,
            n_t: 1,
            metric_name: "rmse".into(),
            metric_value: error,
            runtime_ms: runtime,
        }
    }

    #[test]
    fn rmse_basics() {
        let s = series(vec![1.0, 0.5, 0.0], vec![2.0, 3.0, 4.0]);
        assert_eq!(rmse(&s, &s).unwrap(), 0.0);
        let shifted = series(s.t.clone(), s.v.iter().map(|v| v + 0.25).collect());
        assert!((rmse(&shifted, &s).unwrap() - 0.25).abs() < 1e-15);
        let short = series(vec![0.5, 0.0], vec![3.0, 4.0]);
        assert!(rmse(&s, &short).is_err());
    }

    #[test]
    fn finer_reference_is_interpolated() {
        let fine = series(vec![1.0, 0.75, 0.5, 0.25, 0.0], vec![4.0, 3.0, 2.0, 1.0, 0.0]);
        assert_eq!(fine.at(0.6), Some(2.4));
        assert_eq!(fine.at(1.5), None);
        let coarse = series(vec![1.0, 0.5, 0.0], vec![4.0, 2.0, 0.0]);
        assert_eq!(rmse(&coarse, &fine).unwrap(), 0.0);
    }

    #[test]
    fn slopes() {
        let quad: Vec<(f64, f64)> = [16.0, 32.0, 64.0].iter().map(|&n| (n, 3.0 / (n * n))).collect();
        assert!((convergence_slope(&quad).unwrap() + 2.0).abs() < 1e-12);
        let flat = [(10.0, 1.0), (20.0, 1.0), (40.0, 1.0)];
        assert!(convergence_slope(&flat).unwrap().abs() < 1e-15);
        assert!(convergence_slope(&flat[..2]).is_err());
        assert!(convergence_slope(&[(10.0, 1.0), (10.0, 2.0), (10.0, 3.0)]).is_err());
        assert!(convergence_slope(&[(10.0, 1.0), (20.0, 0.0), (40.0, 3.0)]).is_err());
    }

    #[test]
    fn saturated_tail_is_dropped() {
        let pts = [(4.0, 1.0), (1.0, 16.0), (2.0, 4.0), (8.0, 0.95), (16.0, 0.94)];
        assert_eq!(drop_saturated(&pts, 0.1), vec![(1.0, 16.0), (2.0, 4.0), (4.0, 1.0)]);
        let rising = [(1.0, 16.0), (2.0, 4.0), (4.0, 1.0), (8.0, 1.5), (16.0, 0.1)];
        assert_eq!(drop_saturated(&rising, 0.1), vec![(1.0, 16.0), (2.0, 4.0), (4.0, 1.0)]);
    }

    #[test]
    fn envelope_of_one_and_of_a_dominated_pair() {
        let one = [record(Backend::Spectral, 1e-3, 10.0)];
        assert_eq!(perf_envelope(&one), one.to_vec());
        let pair = [record(Backend::Spectral, 1e-3, 10.0), record(Backend::FiniteDifference, 1e-2, 20.0)];
        assert_eq!(perf_envelope(&pair), vec![pair[0].clone()]);
    }

    #[test]
    fn envelope_drops_points_above_the_chord() {
        let recs = [
            record(Backend::FiniteDifference, 1e-1, 1.0),
            record(Backend::FiniteDifference, 5e-2, 10.0),
            record(Backend::Spectral, 1e-3, 100.0),
        ];
        let env = perf_envelope(&recs);
        assert_eq!(env.len(), 2);
        assert_eq!(env[1].method, Backend::Spectral);
    }

    #[test]
    fn crossover_detection() {
        let recs = [
            record(Backend::FiniteDifference, 3e-2, 1.0),
            record(Backend::FiniteDifference, 2e-3, 50.0),
            record(Backend::Spectral, 4e-2, 5.0),
            record(Backend::Spectral, 3e-5, 40.0),
        ];
        let c = crossover(&recs).unwrap();
        assert_eq!(c.loose_tolerance, 0.1);
        assert_eq!(c.tight_tolerance, 1e-4);
        assert!(c.fd_wins_loose && c.spectral_wins_tight);
        assert!(crossover(&recs[..2]).is_none());
    }

    #[test]
    fn config_keys() {
        let text = r#"{"sigma":0.25,"r":0.03,"alpha":0.1,"gamma":0.5,"lambda":0.08,
            "mu":0.02,"T":4.0,"n_theta":64,"n_t":100,"method":"fd"}"#;
        let c = Config::from_json(text).unwrap();
        assert_eq!(c.method, Backend::FiniteDifference);
        assert_eq!((c.horizon, c.delta), (4.0, 0.1));
        assert!(c.consistent_time);
        assert!((c.dt() - 0.04).abs() < 1e-15);
        assert!(c.sweep_configs().is_empty());
        let back: Config = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(Config::from_json(&text.replace("0.08", "-0.08")).is_err());
    }

    #[test]
    fn sweep_expands_per_method() {
        let mut c = Config::baseline(4.0, Backend::Spectral, 64, 100);
        c.sweep = Some(Sweep {
            chebyshev: Some(SweepGrid { n_theta: vec![16, 32], n_t: vec![10] }),
            fd: Some(SweepGrid { n_theta: vec![100], n_t: vec![10, 20] }),
        });
        let all = c.sweep_configs();
        assert_eq!(all.len(), 4);
        assert_eq!(all[0].method, Backend::Spectral);
        assert_eq!((all[3].method, all[3].n_t), (Backend::FiniteDifference, 20));
    }

    #[test]
    fn annotations_round_trip() {
        assert_eq!(annotated_slope("slope=-1.850 over 4 points"), Some(-1.85));
        assert_eq!(annotated_slope("saturated"), None);
    }

    fn scratch(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("polarinvest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    proptest! {
        #[test]
        fn series_csv_round_trip_is_exact(v in prop::collection::vec(-1e6f64..1e6, 2..20)) {
            let t: Vec<f64> = (0..v.len()).rev().map(|k| k as f64 * 0.1).collect();
            let s = series(t, v);
            let path = scratch("series.csv");
            s.write_csv(&path).unwrap();
            prop_assert_eq!(Series::read_csv(&path).unwrap(), s);
        }

        #[test]
        fn converge_csv_round_trip_is_exact(
            rmse in 1e-12f64..1.0,
            runtime in 0.0f64..1e7,
            n in 2usize..5000,
        ) {
            let rows = vec![ConvergeRow {
                method: Backend::FiniteDifference,
                n_theta: n,
                n_t: 2 * n,
                rmse,
                runtime_ms: runtime,
                slope_annotation: "slope=-2.000 over 3 points".into(),
            }];
            let path = scratch("converge.csv");
            write_converge(&rows, &path).unwrap();
            prop_assert_eq!(read_converge(&path).unwrap(), rows);
        }
    }
}
