//! Backward time loop: terminal setup, then repeatedly step, locate the
//! frontiers, rebuild the interval and project onto it.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adaptive_mesh::MeshPolicy;
use crate::chebyshev::{Interpolant, MappedGrid, ReferenceGrid};
use crate::error::{Result, SolverError};
use crate::fd_baseline::{fd_locate_frontiers, fd_step, UniformGrid};
use crate::frontier::{locate_frontiers, project, SellValueTime, TimeSlice};
use crate::model::{critical_quantities, terminal_value, ModelOperator, ModelParams, PolarDomain, ZeroEnd};
use crate::spectral_stepper::{assemble, StepOutput, StepSystem};

/// Spatial discretization of the step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    #[default]
    #[serde(rename = "chebyshev")]
    Spectral,
    #[serde(rename = "fd")]
    FiniteDifference,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Spectral => "chebyshev",
            Backend::FiniteDifference => "fd",
        })
    }
}

/// Grid of a time slice.
#[derive(Debug, Clone)]
pub enum SliceGrid {
    Chebyshev(MappedGrid),
    Uniform(UniformGrid),
}

impl SliceGrid {
    pub fn a1(&self) -> f64 {
        match self {
            SliceGrid::Chebyshev(g) => g.a1(),
            SliceGrid::Uniform(g) => g.a1(),
        }
    }

    pub fn a2(&self) -> f64 {
        match self {
            SliceGrid::Chebyshev(g) => g.a2(),
            SliceGrid::Uniform(g) => g.a2(),
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        match self {
            SliceGrid::Chebyshev(g) => g.thetas(),
            SliceGrid::Uniform(g) => g.nodes(),
        }
    }

    pub fn value(&self, values: &[f64], x: f64) -> Result<f64> {
        match self {
            SliceGrid::Chebyshev(g) => crate::chebyshev::interpolate(g, values, x),
            SliceGrid::Uniform(g) => Ok(g.value_and_derivative(values, x)?.0),
        }
    }

    pub fn value_and_derivative(&self, values: &[f64], x: f64) -> Result<(f64, f64)> {
        match self {
            SliceGrid::Chebyshev(g) => Interpolant::new(g, values)?.value_and_derivative(x),
            SliceGrid::Uniform(g) => g.value_and_derivative(values, x),
        }
    }
}

/// Tunables of a solve beyond the discretization sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct SolveOptions {
    pub sell_value_time: SellValueTime,
    pub zero_end: ZeroEnd,
}

/// A containment retry performed during the solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryEvent {
    pub step: usize,
    pub t: f64,
    pub lower: bool,
    pub upper: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    /// Backward error of every step, in solve order (from `T` down).
    pub residuals: Vec<f64>,
    pub retries: Vec<RetryEvent>,
    /// Wall-clock of the backward loop, in milliseconds.
    pub runtime_ms: f64,
}

impl Diagnostics {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Output of a solve: slices ordered from `t = T` down to `t = 0`.
#[derive(Debug, Clone)]
pub struct SolutionPath {
    pub params: ModelParams,
    pub domain: PolarDomain,
    pub policy: MeshPolicy,
    pub backend: Backend,
    /// Chebyshev degree or number of finite-difference subintervals.
    pub n_theta: usize,
    pub n_t: usize,
    pub dt: f64,
    pub slices: Vec<TimeSlice>,
    pub diagnostics: Diagnostics,
}

impl SolutionPath {
    /// Slice times, from `T` down to 0.
    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.t).collect()
    }

    /// `v(0, t_l)` for every slice, from `T` down to 0.
    pub fn v_at_zero(&self) -> Result<Vec<f64>> {
        self.slices
            .iter()
            .map(|s| s.cartesian_v(FRAC_PI_2, &self.params))
            .collect()
    }

    /// Slice nearest to time `t`.
    pub fn slice_at(&self, t: f64) -> &TimeSlice {
        let l = ((self.params.horizon - t) / self.dt).round().clamp(0.0, self.n_t as f64) as usize;
        &self.slices[l]
    }

    /// `φ(x, y, t)` at the slice nearest to `t`.
    pub fn phi(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let slice = self.slice_at(t);
        let theta = y.atan2(x);
        let value = slice.value(theta, &self.params)?;
        Ok(x.hypot(y).powf(self.params.gamma) * value)
    }
}

/// Onset of positive stock holdings, read off the buying frontier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnsetReport {
    /// Latest slice time of the run of positive `br` that reaches `t = 0`.
    pub t_detect: f64,
    /// Largest of `|min br|` over the path and the largest positive `br`
    /// at times after the exact onset.
    pub amplitude: f64,
    /// Times between the detected onset and the latest slice with `br ≠ 0`.
    pub window: (f64, f64),
}

/// Detects when the buying frontier leaves 0. `None` when `br(0) ≤ 0`.
pub fn first_positive_frontier_time(path: &SolutionPath) -> Option<OnsetReport> {
    let (t, br): (Vec<f64>, Vec<f64>) = path.slices.iter().map(|s| (s.t, s.br)).unzip();
    onset_from_series(&t, &br, path.domain.t_hat0)
}

/// [`first_positive_frontier_time`] on a frontier series ordered from `T`
/// down to 0.
pub fn onset_from_series(t: &[f64], br: &[f64], t_hat0: f64) -> Option<OnsetReport> {
    if !(*br.last()? > 0.0) {
        return None;
    }
    let mut idx = br.len() - 1;
    while idx > 0 && br[idx - 1] > 0.0 {
        idx -= 1;
    }
    let t_detect = t[idx];
    let most_negative = br.iter().copied().fold(0.0, f64::min);
    let early_positive = t
        .iter()
        .zip(br)
        .filter(|(&tl, _)| tl > t_hat0)
        .map(|(_, &b)| b)
        .fold(0.0, f64::max);
    let window_end = t
        .iter()
        .zip(br)
        .find(|(_, &b)| b != 0.0)
        .map_or(t_detect, |(&tl, _)| tl);
    Some(OnsetReport {
        t_detect,
        amplitude: (-most_negative).max(early_positive),
        window: (t_detect, window_end),
    })
}

/// Passage of the buying frontier through `π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingReport {
    /// Crossing time, linear between the bracketing slices.
    pub t_cross: f64,
    /// Slice time nearest to the exact crossing time.
    pub t_nearest: f64,
    /// `|br(t_nearest) − π/2|`.
    pub frontier_error: f64,
}

/// `None` when the frontier never reaches `π/2` or the exact crossing time
/// is undefined.
pub fn crossing_report(path: &SolutionPath) -> Option<CrossingReport> {
    let (t, br): (Vec<f64>, Vec<f64>) = path.slices.iter().map(|s| (s.t, s.br)).unzip();
    crossing_from_series(&t, &br, path.domain.t_hat1?)
}

/// [`crossing_report`] on a frontier series ordered from `T` down to 0.
pub fn crossing_from_series(t: &[f64], br: &[f64], t_hat1: f64) -> Option<CrossingReport> {
    let above = |k: usize| br[k] >= FRAC_PI_2;
    let k = (1..br.len()).find(|&k| above(k) && !above(k - 1))?;
    let w = (FRAC_PI_2 - br[k - 1]) / (br[k] - br[k - 1]);
    let t_cross = t[k - 1] + w * (t[k] - t[k - 1]);
    let nearest = (0..t.len()).min_by(|&a, &b| (t[a] - t_hat1).abs().total_cmp(&(t[b] - t_hat1).abs()))?;
    Some(CrossingReport {
        t_cross,
        t_nearest: t[nearest],
        frontier_error: (br[nearest] - FRAC_PI_2).abs(),
    })
}

/// Discretization-specific half of a backward step.
trait Scheme {
    fn grid(&self, a1: f64, a2: f64) -> Result<SliceGrid>;
    fn step(&mut self, grid: &SliceGrid, v_old: &[f64], op: &ModelOperator<'_>, dt: f64) -> Result<StepOutput>;
    fn locate(
        &self,
        grid: &SliceGrid,
        v_hat: &[f64],
        v_old: &[f64],
        p: &ModelParams,
        opts: &SolveOptions,
    ) -> Result<(f64, f64)>;
}

struct Spectral {
    reference: Arc<ReferenceGrid>,
    workspace: Option<StepSystem>,
}

struct FiniteDifference {
    n: usize,
}

impl Scheme for Spectral {
    fn grid(&self, a1: f64, a2: f64) -> Result<SliceGrid> {
        Ok(SliceGrid::Chebyshev(MappedGrid::new(self.reference.clone(), a1, a2)?))
    }

    fn step(&mut self, grid: &SliceGrid, v_old: &[f64], op: &ModelOperator<'_>, dt: f64) -> Result<StepOutput> {
        let SliceGrid::Chebyshev(g) = grid else {
            unreachable!("spectral scheme on a uniform grid")
        };
        match &mut self.workspace {
            Some(sys) => sys.reassemble(g, op, dt)?,
            None => self.workspace = Some(assemble(g, op, dt)?),
        }
        self.workspace.as_ref().expect("assembled above").step(v_old)
    }

    fn locate(
        &self,
        grid: &SliceGrid,
        v_hat: &[f64],
        v_old: &[f64],
        p: &ModelParams,
        opts: &SolveOptions,
    ) -> Result<(f64, f64)> {
        let SliceGrid::Chebyshev(g) = grid else {
            unreachable!("spectral scheme on a uniform grid")
        };
        locate_frontiers(g, v_hat, v_old, p, opts.sell_value_time)
    }
}

impl Scheme for FiniteDifference {
    fn grid(&self, a1: f64, a2: f64) -> Result<SliceGrid> {
        Ok(SliceGrid::Uniform(UniformGrid::new(a1, a2, self.n)?))
    }

    fn step(&mut self, grid: &SliceGrid, v_old: &[f64], op: &ModelOperator<'_>, dt: f64) -> Result<StepOutput> {
        let SliceGrid::Uniform(g) = grid else {
            unreachable!("finite-difference scheme on a Chebyshev grid")
        };
        fd_step(g, v_old, op, dt)
    }

    fn locate(
        &self,
        grid: &SliceGrid,
        v_hat: &[f64],
        v_old: &[f64],
        p: &ModelParams,
        opts: &SolveOptions,
    ) -> Result<(f64, f64)> {
        let SliceGrid::Uniform(g) = grid else {
            unreachable!("finite-difference scheme on a Chebyshev grid")
        };
        fd_locate_frontiers(g, v_hat, v_old, p, opts.sell_value_time)
    }
}

/// Runs the backward algorithm with `n_t` uniform time steps.
///
/// `policy.n_theta` is the Chebyshev degree for [`Backend::Spectral`] and
/// the number of grid subintervals for [`Backend::FiniteDifference`].
pub fn solve(
    p: &ModelParams,
    policy: &MeshPolicy,
    n_t: usize,
    backend: Backend,
    opts: &SolveOptions,
) -> Result<SolutionPath> {
    p.validate()?;
    if n_t < 1 {
        return Err(SolverError::Config("at least one time step is required".into()));
    }
    match backend {
        Backend::Spectral => {
            let reference = Arc::new(ReferenceGrid::new(policy.n_theta)?);
            run(p, policy, n_t, backend, opts, &mut Spectral { reference, workspace: None })
        }
        Backend::FiniteDifference => run(
            p,
            policy,
            n_t,
            backend,
            opts,
            &mut FiniteDifference { n: policy.n_theta },
        ),
    }
}

fn run(
    p: &ModelParams,
    policy: &MeshPolicy,
    n_t: usize,
    backend: Backend,
    opts: &SolveOptions,
    scheme: &mut impl Scheme,
) -> Result<SolutionPath> {
    let started = std::time::Instant::now();
    let domain = critical_quantities(p);
    let dt = p.horizon / n_t as f64;
    let op = ModelOperator {
        params: p,
        zero_end: opts.zero_end,
    };

    let (a1, a2) = policy.interval(0.0, domain.sr_terminal)?;
    let grid = scheme.grid(a1, a2)?;
    let v = grid
        .nodes()
        .iter()
        .map(|&theta| terminal_value(theta, p))
        .collect::<Result<Vec<_>>>()?;
    let mut slices = Vec::with_capacity(n_t + 1);
    slices.push(TimeSlice {
        t: p.horizon,
        grid,
        v,
        br: 0.0,
        sr: domain.sr_terminal,
    });
    let mut diagnostics = Diagnostics::default();

    for l in (1..=n_t).rev() {
        let step_index = n_t - l;
        let t_new = (l - 1) as f64 * dt;
        let current = slices.last().expect("terminal slice present");
        let annotate = |e: SolverError, grid: &SliceGrid| SolverError::Step {
            step: step_index,
            t: t_new,
            a1: grid.a1(),
            a2: grid.a2(),
            backend,
            source: Box::new(e),
        };

        let mut grid = current.grid.clone();
        let mut v_old = current.v.clone();
        let mut attempt = 0;
        let (out, br, sr) = loop {
            let out = scheme
                .step(&grid, &v_old, &op, dt)
                .map_err(|e| annotate(e, &grid))?;
            let (br, sr) = scheme
                .locate(&grid, &out.values, &v_old, p, opts)
                .map_err(|e| annotate(e, &grid))?;
            let (lower, upper) = containment_failure(&grid, br, sr);
            if !(lower || upper) {
                break (out, br, sr);
            }
            if attempt == 1 {
                return Err(annotate(
                    SolverError::Mesh(format!(
                        "frontier reached the interval end after a retry (br = {br}, sr = {sr}); \
                         increase n_t or n_theta"
                    )),
                    &grid,
                ));
            }
            attempt += 1;
            diagnostics.retries.push(RetryEvent {
                step: step_index,
                t: t_new,
                lower,
                upper,
            });
            let (b1, b2) = policy.inflate(grid.a1(), grid.a2(), lower, upper);
            grid = scheme.grid(b1, b2)?;
            v_old = grid
                .nodes()
                .iter()
                .map(|&theta| current.value(theta, p))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| annotate(e, &grid))?;
        };
        diagnostics.residuals.push(out.residual);

        let (b1, b2) = policy.interval(br, sr).map_err(|e| annotate(e, &grid))?;
        let new_grid = scheme.grid(b1, b2)?;
        let v_hat = out.values;
        let v_new = match &grid {
            SliceGrid::Chebyshev(g) => {
                let interp = Interpolant::new(g, &v_hat)?;
                project(&new_grid.nodes(), |x| interp.value(x), br, sr, p)
            }
            SliceGrid::Uniform(g) => project(
                &new_grid.nodes(),
                |x| g.value_and_derivative(&v_hat, x).map(|v| v.0),
                br,
                sr,
                p,
            ),
        }
        .map_err(|e| annotate(e, &grid))?;

        slices.push(TimeSlice {
            t: t_new,
            grid: new_grid,
            v: v_new,
            br,
            sr,
        });
    }
    diagnostics.runtime_ms = started.elapsed().as_secs_f64() * 1e3;

    Ok(SolutionPath {
        params: *p,
        domain,
        policy: policy.clone(),
        backend,
        n_theta: policy.n_theta,
        n_t,
        dt,
        slices,
        diagnostics,
    })
}

/// A located frontier sitting on an interval end may lie beyond it. The
/// lower end only counts in the two-sided layout (`a1 > 0`); with `a1 = 0`
/// the frontier at the end is the expected buying frontier at 0.
fn containment_failure(grid: &SliceGrid, br: f64, sr: f64) -> (bool, bool) {
    let (a1, a2) = (grid.a1(), grid.a2());
    let tol = 1e-12 * (a2 - a1);
    let lower = a1 > 0.0 && br <= a1 + tol;
    let upper = sr >= a2 - tol;
    (lower, upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::critical_quantities;

    fn times(n: usize, horizon: f64) -> Vec<f64> {
        (0..=n).map(|l| horizon * (n - l) as f64 / n as f64).collect()
    }

    #[test]
    fn onset_absent_without_positive_frontier() {
        let t = times(10, 1.0);
        assert!(onset_from_series(&t, &[0.0; 11], 0.5).is_none());
    }

    #[test]
    fn onset_skips_early_excursions() {
        let t = times(10, 1.0);
        // Spurious blip at t = 0.8, persistent positive values from t = 0.4.
        let br = [0.0, 0.0, 0.01, 0.0, -0.02, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        let r = onset_from_series(&t, &br, 0.45).unwrap();
        assert!((r.t_detect - 0.4).abs() < 1e-12);
        assert!((r.amplitude - 0.02).abs() < 1e-15);
        assert!((r.window.1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn crossing_interpolates_between_slices() {
        let t = times(4, 2.0);
        let br = [1.0, 1.2, 1.5, 1.7, 1.9];
        let r = crossing_from_series(&t, &br, 0.9).unwrap();
        let w = (FRAC_PI_2 - 1.5) / 0.2;
        assert!((r.t_cross - (1.0 - 0.5 * w)).abs() < 1e-12);
        assert!((r.t_nearest - 1.0).abs() < 1e-12);
        assert!((r.frontier_error - (FRAC_PI_2 - 1.5)).abs() < 1e-12);
        assert!(crossing_from_series(&t, &[0.0; 5], 0.9).is_none());
    }

    fn short_solve(backend: Backend, n: usize) -> SolutionPath {
        let p = ModelParams::baseline(0.5);
        let policy = MeshPolicy::build(&p, &critical_quantities(&p), 0.1, n).unwrap();
        solve(&p, &policy, 50, backend, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn short_solves_keep_their_invariants() {
        for (backend, n) in [(Backend::Spectral, 48), (Backend::FiniteDifference, 200)] {
            let path = short_solve(backend, n);
            assert_eq!(path.slices.len(), 51);
            let (b1, b2) = (path.domain.beta1, path.domain.beta2);
            for s in &path.slices {
                assert!(s.v.iter().all(|&v| v > 0.0));
                assert!(b1 < s.br && s.br <= s.sr && s.sr < b2, "{backend}: {} {}", s.br, s.sr);
            }
            // The onset lies about 1.39 years before the horizon, outside this run.
            assert!(path.slices.iter().all(|s| s.br.abs() < 1e-3));
            assert!(path.diagnostics.max_residual() < 1e-10);
        }
    }

    #[test]
    fn homothetic_reconstruction() {
        let path = short_solve(Backend::Spectral, 32);
        for (x, y) in [(1.0, 0.3), (0.4, 0.9), (2.0, -0.1)] {
            let base = path.phi(x, y, 0.0).unwrap();
            let scaled = path.phi(3.0 * x, 3.0 * y, 0.0).unwrap();
            assert!((scaled / base - 3f64.powf(path.params.gamma)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_zero_steps() {
        let p = ModelParams::baseline(0.5);
        let policy = MeshPolicy::build(&p, &critical_quantities(&p), 0.1, 16).unwrap();
        assert!(solve(&p, &policy, 0, Backend::Spectral, &SolveOptions::default()).is_err());
    }
}
