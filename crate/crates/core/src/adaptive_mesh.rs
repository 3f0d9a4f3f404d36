//! Time-dependent computational interval.
//!
//! At every time level the interval `I(t)` is rebuilt from the current
//! frontier estimates so that both frontiers land exactly on Chebyshev nodes
//! (indices `N − j_K` and `j_K`) and at most a fraction `K ≤ δ` of the
//! interval lies in each trading region.

use std::f64::consts::PI;

use crate::error::{Result, SolverError};
use crate::model::{ModelParams, PolarDomain};

/// Fraction of `β2 − β1` by which the stationary selling frontier is assumed
/// to stay below `β2` when no better estimate is supplied.
pub const STATIONARY_SELL_MARGIN: f64 = 0.05;

/// Inflation applied to one side of an interval on a containment retry.
pub const RETRY_INFLATION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct MeshPolicy {
    pub delta: f64,
    pub n_theta: usize,
    pub k_cap: f64,
    pub j_k: usize,
    pub beta1: f64,
    pub beta2: f64,
    /// Stationary selling frontier used for `k1`.
    pub sr_stationary: f64,
}

impl MeshPolicy {
    /// Policy with the conservative stationary-frontier estimate
    /// `SR_s ≈ β2 − 0.05 (β2 − β1)`.
    pub fn build(p: &ModelParams, dom: &PolarDomain, delta: f64, n_theta: usize) -> Result<Self> {
        let sr_s = dom.beta2 - STATIONARY_SELL_MARGIN * (dom.beta2 - dom.beta1);
        Self::build_with_stationary(p, dom, delta, n_theta, sr_s)
    }

    /// Policy with a caller-supplied stationary selling frontier, e.g. one
    /// refined from a long-horizon solve.
    pub fn build_with_stationary(
        _p: &ModelParams,
        dom: &PolarDomain,
        delta: f64,
        n_theta: usize,
        sr_stationary: f64,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(SolverError::Config(format!(
                "control parameter delta = {delta} must lie in (0, 1/2)"
            )));
        }
        if !(sr_stationary > 0.0 && sr_stationary < dom.beta2) {
            return Err(SolverError::Config(format!(
                "stationary selling frontier {sr_stationary} outside (0, {})",
                dom.beta2
            )));
        }
        // The buying frontier sits at 0 at maturity.
        let br_terminal = 0.0;
        let k1 = (dom.beta2 - sr_stationary) / (dom.beta2 - br_terminal);
        let k_cap = delta.min(k1).min(br_terminal - dom.beta1);
        let mut policy = Self::from_cap(k_cap, n_theta, dom.beta1, dom.beta2)?;
        policy.delta = delta;
        policy.sr_stationary = sr_stationary;
        Ok(policy)
    }

    /// Policy from an explicit cap `K`.
    pub fn from_cap(k_cap: f64, n_theta: usize, beta1: f64, beta2: f64) -> Result<Self> {
        if !(k_cap > 0.0 && k_cap < 0.5) {
            return Err(SolverError::Config(format!("cap K = {k_cap} must lie in (0, 1/2)")));
        }
        if n_theta < 2 {
            return Err(SolverError::Config(format!("n_theta = {n_theta} is below 2")));
        }
        let j_k = node_index_for_cap(k_cap, n_theta);
        if j_k == 0 {
            return Err(SolverError::Config(format!(
                "n_theta = {n_theta} is too small for K = {k_cap:.5}: no Chebyshev node lies \
                 within 2K of the endpoint; increase n_theta"
            )));
        }
        Ok(Self {
            delta: k_cap,
            n_theta,
            k_cap,
            j_k,
            beta1,
            beta2,
            sr_stationary: f64::NAN,
        })
    }

    /// `θ̃_{j_K}`, the reference node that receives the selling frontier.
    pub fn upper_ref(&self) -> f64 {
        (PI * self.j_k as f64 / self.n_theta as f64).cos()
    }

    /// `θ̃_{N − j_K}`, the reference node that receives the buying frontier.
    pub fn lower_ref(&self) -> f64 {
        (PI * (self.n_theta - self.j_k) as f64 / self.n_theta as f64).cos()
    }

    /// Interval `I(t)` for frontier estimates `(br, sr)`.
    ///
    /// A non-positive `br` selects the one-sided form `[0, a2]` whose lower
    /// end is the frontier at 0.
    pub fn interval(&self, br: f64, sr: f64) -> Result<(f64, f64)> {
        if !(br.is_finite() && sr.is_finite()) {
            return Err(SolverError::Mesh(format!("non-finite frontiers ({br}, {sr})")));
        }
        let up = self.upper_ref();
        let (a1, a2) = if br <= 0.0 {
            if sr <= 0.0 {
                return Err(SolverError::Mesh(format!(
                    "selling frontier {sr} must be positive"
                )));
            }
            (0.0, 2.0 * sr / (up + 1.0))
        } else {
            let m = sr - br;
            if m <= 0.0 {
                return Err(SolverError::Mesh(format!(
                    "frontiers coincide or cross (br = {br}, sr = {sr}); the no-transaction \
                     region collapsed, resolution is probably too low"
                )));
            }
            let low = self.lower_ref();
            let span = up - low;
            (br - m * (low + 1.0) / span, sr + m * (1.0 - up) / span)
        };
        if a1 < self.beta1 || a2 > self.beta2 {
            return Err(SolverError::Mesh(format!(
                "interval [{a1}, {a2}] escapes the solvency region [{}, {}]",
                self.beta1, self.beta2
            )));
        }
        Ok((a1, a2))
    }

    /// Widens one end of `[a1, a2]` by [`RETRY_INFLATION`] of its width,
    /// staying strictly inside the solvency region.
    pub fn inflate(&self, a1: f64, a2: f64, lower: bool, upper: bool) -> (f64, f64) {
        let w = RETRY_INFLATION * (a2 - a1);
        let pad = 1e-9 * (self.beta2 - self.beta1);
        let lo = if lower { (a1 - w).max(self.beta1 + pad) } else { a1 };
        let hi = if upper { (a2 + w).min(self.beta2 - pad) } else { a2 };
        (lo, hi)
    }
}

/// Largest `j` with `|θ̃_{N−j} − θ̃_N| ≤ 2K`.
pub fn node_index_for_cap(k_cap: f64, n: usize) -> usize {
    let nf = n as f64;
    let mut j = 0;
    while j < n && 1.0 - (PI * (j + 1) as f64 / nf).cos() <= 2.0 * k_cap {
        j += 1;
    }
    j
}
