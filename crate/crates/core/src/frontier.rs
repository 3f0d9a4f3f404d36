//! Obstacle polynomials, frontier extraction and projection onto the next
//! grid.
//!
//! After a step the candidate `V̂` is compared with both gradient
//! constraints through
//!
//! ```text
//! P1(θ) = V̂_θ(θ) − ρ_buy(θ)  V̂(θ)
//! P2(θ) = V̂_θ(θ) − ρ_sell(θ) V(θ, t_l)
//! ```
//!
//! In the no-transaction region the gradient constraints read
//! `ρ_sell V ≤ V_θ ≤ ρ_buy V`, so holding beats buying where `P1 ≤ 0` and
//! holding beats selling where `P2 ≥ 0`. The buying frontier is the lowest
//! point above which `P1` stays non-positive; the selling frontier the
//! highest point below which `P2` stays non-negative.

use std::f64::consts::PI;

use crate::chebyshev::{Interpolant, MappedGrid};
use crate::error::{Result, SolverError};
use crate::model::{extension_unchecked, gradient_ratio, ModelParams, Side};

/// Width at which frontier bisection stops.
pub const BISECTION_WIDTH: f64 = 1e-10;

/// Probe points per Chebyshev node when scanning the obstacle polynomials.
pub const PROBE_FACTOR: usize = 8;

/// Where `P2` takes its value term from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SellValueTime {
    /// Old time level `V(θ, t_l)`. Right after the horizon this places the
    /// selling frontier at the maximum of `L V(·, T)` instead of at the
    /// Merton-line image, whatever the step size.
    Lagged,
    /// New time level `V̂(θ, t_{l-1})`.
    #[default]
    Consistent,
}

/// Solution snapshot at one time level.
#[derive(Debug, Clone)]
pub struct TimeSlice {
    pub t: f64,
    pub grid: crate::solver::SliceGrid,
    pub v: Vec<f64>,
    pub br: f64,
    pub sr: f64,
}

impl TimeSlice {
    /// `(V, V_θ)` of the piecewise value function: the nodal interpolant on
    /// `[br, sr]` and the closed-form extensions outside it.
    pub fn value_and_derivative(&self, theta: f64, p: &ModelParams) -> Result<(f64, f64)> {
        if theta < self.br {
            let anchor = self.grid.value(&self.v, self.br)?;
            let v = extension_unchecked(theta, self.br, anchor, Side::Buy, p);
            Ok((v, v * gradient_ratio(theta, Side::Buy, p)))
        } else if theta > self.sr {
            let anchor = self.grid.value(&self.v, self.sr)?;
            let v = extension_unchecked(theta, self.sr, anchor, Side::Sell, p);
            Ok((v, v * gradient_ratio(theta, Side::Sell, p)))
        } else {
            self.grid.value_and_derivative(&self.v, theta)
        }
    }

    pub fn value(&self, theta: f64, p: &ModelParams) -> Result<f64> {
        if theta < self.br || theta > self.sr {
            Ok(self.value_and_derivative(theta, p)?.0)
        } else {
            self.grid.value(&self.v, theta)
        }
    }

    /// `v(z, t)` at `z = cot θ`.
    pub fn cartesian_v(&self, theta: f64, p: &ModelParams) -> Result<f64> {
        let (v, dv) = self.value_and_derivative(theta, p)?;
        Ok(crate::model::to_cartesian(theta, v, dv, p.gamma)?.1)
    }
}

/// `(P1, P2)` at `theta`.
pub fn obstacle_values(
    v_hat: &Interpolant<'_>,
    v_old: &[f64],
    theta: f64,
    p: &ModelParams,
    sell_time: SellValueTime,
) -> Result<(f64, f64)> {
    let (vh, dvh, vo) = v_hat.with_companion(v_old, theta)?;
    Ok(obstacles_from(vh, dvh, vo, theta, p, sell_time))
}

pub(crate) fn obstacles_from(
    v_hat: f64,
    dv_hat: f64,
    v_old: f64,
    theta: f64,
    p: &ModelParams,
    sell_time: SellValueTime,
) -> (f64, f64) {
    let p1 = dv_hat - v_hat * gradient_ratio(theta, Side::Buy, p);
    let sell_value = match sell_time {
        SellValueTime::Lagged => v_old,
        SellValueTime::Consistent => v_hat,
    };
    let p2 = dv_hat - sell_value * gradient_ratio(theta, Side::Sell, p);
    (p1, p2)
}

/// Ascending Chebyshev-spaced probe points covering `[a1, a2]`.
fn probe_points(a1: f64, a2: f64, count: usize) -> Vec<f64> {
    let m = (count - 1) as f64;
    let mid = 0.5 * (a1 + a2);
    let hw = 0.5 * (a2 - a1);
    let mut pts: Vec<f64> = (0..count)
        .map(|k| mid - hw * (PI * k as f64 / m).cos())
        .collect();
    pts[0] = a1;
    pts[count - 1] = a2;
    pts
}

/// Lowest `β` with `f ≥ 0` on `[β, top)`, given a scan of `f` on ascending
/// probe points. Returns `None` when `f` is non-negative everywhere.
pub(crate) fn lowest_nonnegative_start(
    pts: &[f64],
    vals: &[f64],
    f: impl Fn(f64) -> Result<f64>,
) -> Result<Option<f64>> {
    let last = pts.len() - 1;
    // The top end itself is excluded from the set.
    let Some(k) = (0..last).rev().find(|&k| vals[k] < 0.0) else {
        return Ok(None);
    };
    if k + 1 == last {
        return Ok(Some(pts[last]));
    }
    let (mut lo, mut hi) = (pts[k], pts[k + 1]);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Highest `β` with `f ≥ 0` on `(bottom, β]`. Returns `None` when `f` is
/// non-negative everywhere.
pub(crate) fn highest_nonnegative_end(
    pts: &[f64],
    vals: &[f64],
    f: impl Fn(f64) -> Result<f64>,
) -> Result<Option<f64>> {
    let Some(k) = (1..pts.len()).find(|&k| vals[k] < 0.0) else {
        return Ok(None);
    };
    if k == 1 {
        return Ok(Some(pts[0]));
    }
    let (mut lo, mut hi) = (pts[k - 1], pts[k]);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Buying and selling frontiers of the step output `v_hat` on `grid`.
pub fn locate_frontiers(
    grid: &MappedGrid,
    v_hat: &[f64],
    v_old: &[f64],
    p: &ModelParams,
    sell_time: SellValueTime,
) -> Result<(f64, f64)> {
    let interp = Interpolant::new(grid, v_hat)?;
    let count = PROBE_FACTOR * (grid.degree() + 1);
    let pts = probe_points(grid.a1(), grid.a2(), count);
    let mut p1 = Vec::with_capacity(count);
    let mut p2 = Vec::with_capacity(count);
    for &x in &pts {
        let (a, b) = obstacle_values(&interp, v_old, x, p, sell_time)?;
        p1.push(a);
        p2.push(b);
    }
    let neg_p1: Vec<f64> = p1.iter().map(|v| -v).collect();
    let neg_p1_at = |x: f64| obstacle_values(&interp, v_old, x, p, sell_time).map(|v| -v.0);
    let p2_at = |x: f64| obstacle_values(&interp, v_old, x, p, sell_time).map(|v| v.1);
    let br = lowest_nonnegative_start(&pts, &neg_p1, neg_p1_at)?.unwrap_or(grid.a1());
    let sr = highest_nonnegative_end(&pts, &p2, p2_at)?.unwrap_or(grid.a2());
    check_frontiers(grid.a1(), grid.a2(), br, sr, &pts, &p1, &p2)
}

pub(crate) fn check_frontiers(
    a1: f64,
    a2: f64,
    br: f64,
    sr: f64,
    pts: &[f64],
    p1: &[f64],
    p2: &[f64],
) -> Result<(f64, f64)> {
    let last = pts.len() - 1;
    let no_buy_structure = br >= a2;
    let no_sell_structure = sr <= a1;
    if no_buy_structure || no_sell_structure || br > sr {
        let sample = |v: &[f64]| {
            let step = (pts.len() / 6).max(1);
            (0..pts.len())
                .step_by(step)
                .chain(std::iter::once(last))
                .map(|k| format!("{:.4}:{:+.3e}", pts[k], v[k]))
                .collect::<Vec<_>>()
                .join(" ")
        };
        return Err(SolverError::FrontierDetection(format!(
            "br = {br}, sr = {sr} on [{a1}, {a2}]; P1 samples [{}]; P2 samples [{}]",
            sample(p1),
            sample(p2)
        )));
    }
    Ok((br, sr))
}

/// Value function at the next level on `new_nodes`: the step output inside
/// `[br, sr]`, closed-form extensions anchored at the frontiers outside.
pub fn project(
    new_nodes: &[f64],
    value_at: impl Fn(f64) -> Result<f64>,
    br: f64,
    sr: f64,
    p: &ModelParams,
) -> Result<Vec<f64>> {
    let anchor_br = value_at(br)?;
    let anchor_sr = value_at(sr)?;
    if !(anchor_br > 0.0 && anchor_sr > 0.0) {
        return Err(SolverError::Contract(format!(
            "non-positive frontier values V(br) = {anchor_br}, V(sr) = {anchor_sr}"
        )));
    }
    new_nodes
        .iter()
        .map(|&theta| {
            if theta < br {
                Ok(extension_unchecked(theta, br, anchor_br, Side::Buy, p))
            } else if theta > sr {
                Ok(extension_unchecked(theta, sr, anchor_sr, Side::Sell, p))
            } else {
                value_at(theta)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::extend;
    use proptest::prelude::*;

    fn scan(a: f64, b: f64, f: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
        let pts = probe_points(a, b, 41);
        let vals = pts.iter().map(|&x| f(x)).collect();
        (pts, vals)
    }

    #[test]
    fn bisection_finds_sign_changes() {
        let f = |x: f64| x - 1.0;
        let (pts, vals) = scan(0.0, 3.0, f);
        let lo = lowest_nonnegative_start(&pts, &vals, |x| Ok(f(x))).unwrap().unwrap();
        assert!((lo - 1.0).abs() <= BISECTION_WIDTH);

        let g = |x: f64| 2.0 - x;
        let (pts, vals) = scan(0.0, 3.0, g);
        let hi = highest_nonnegative_end(&pts, &vals, |x| Ok(g(x))).unwrap().unwrap();
        assert!((hi - 2.0).abs() <= BISECTION_WIDTH);

        let (pts, vals) = scan(0.0, 3.0, |_| 1.0);
        assert!(lowest_nonnegative_start(&pts, &vals, |_| Ok(1.0)).unwrap().is_none());
        assert!(highest_nonnegative_end(&pts, &vals, |_| Ok(1.0)).unwrap().is_none());
    }

    #[test]
    fn extensions_lie_on_their_obstacle() {
        let p = ModelParams::baseline(4.0);
        for theta in [-0.5, 0.0, 0.7, 1.9] {
            let v = 1.3;
            let dv = v * gradient_ratio(theta, Side::Buy, &p);
            let (p1, _) = obstacles_from(v, dv, v, theta, &p, SellValueTime::Consistent);
            assert!(p1.abs() < 1e-14);
            let dv = v * gradient_ratio(theta, Side::Sell, &p);
            let (_, p2) = obstacles_from(v, dv, 2.0 * v, theta, &p, SellValueTime::Consistent);
            assert!(p2.abs() < 1e-14);
        }
    }

    #[test]
    fn lagged_selling_obstacle_reads_the_old_value() {
        let p = ModelParams::baseline(4.0);
        let theta = 1.0;
        let (_, lagged) = obstacles_from(1.0, 0.0, 2.0, theta, &p, SellValueTime::Lagged);
        assert!((lagged + 2.0 * gradient_ratio(theta, Side::Sell, &p)).abs() < 1e-15);
    }

    #[test]
    fn inverted_frontiers_are_rejected() {
        let pts = [0.0, 1.0, 2.0];
        let z = [0.0; 3];
        assert!(check_frontiers(0.0, 2.0, 1.5, 1.0, &pts, &z, &z).is_err());
        assert!(check_frontiers(0.0, 2.0, 2.0, 2.0, &pts, &z, &z).is_err());
        assert!(check_frontiers(0.0, 2.0, 0.5, 1.5, &pts, &z, &z).is_ok());
    }

    #[test]
    fn projection_rejects_non_positive_anchors() {
        let p = ModelParams::baseline(4.0);
        assert!(project(&[0.5], |_| Ok(-1.0), 0.2, 1.0, &p).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_continuous_at_the_frontiers(
            br in 0.0f64..1.2,
            width in 0.2f64..0.9,
            slope in -0.3f64..0.3,
        ) {
            let p = ModelParams::baseline(4.0);
            let sr = br + width;
            let inside = |x: f64| Ok(1.0 + slope * x);
            let eps = 1e-9;
            let nodes = [br - eps, br, br + eps, sr - eps, sr, sr + eps];
            let v = project(&nodes, inside, br, sr, &p).unwrap();
            prop_assert!((v[0] - v[1]).abs() < 1e-8 && (v[2] - v[1]).abs() < 1e-8);
            prop_assert!((v[3] - v[4]).abs() < 1e-8 && (v[5] - v[4]).abs() < 1e-8);
            let outside = extend(br - 0.1, br, 1.0 + slope * br, Side::Buy, &p).unwrap();
            let projected = project(&[br - 0.1], inside, br, sr, &p).unwrap()[0];
            prop_assert!((outside - projected).abs() < 1e-14);
        }
    }
}
