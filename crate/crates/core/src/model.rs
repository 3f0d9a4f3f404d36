//! Closed-form pieces of the polar formulation.
//!
//! Writing the bank/stock holdings as `x = b cos θ`, `y = b sin θ` and the
//! value function as `φ(b, θ, t) = b^γ V(θ, t)` removes the radial variable.
//! What is left is a one-dimensional double obstacle problem for `V` on the
//! bounded angular domain `(β1, β2)`:
//!
//! ```text
//! min{ -V_t - g2 V_θθ - g1 V_θ - g0 V,
//!      -V_θ + ρ_buy(θ) V,
//!       V_θ - ρ_sell(θ) V } = 0
//! ```
//!
//! where `ρ_buy`, `ρ_sell` are the gradient ratios returned by
//! [`gradient_ratio`]. Everything in this module is a pure function of
//! [`ModelParams`].

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SolverError};

/// Market and utility constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Risk-free rate.
    pub r: f64,
    /// Expected stock return.
    pub alpha: f64,
    /// Stock volatility.
    pub sigma: f64,
    /// CRRA exponent, `U(w) = w^γ / γ`.
    pub gamma: f64,
    /// Proportional cost paid on purchases.
    pub lambda: f64,
    /// Proportional cost paid on sales.
    pub mu: f64,
    /// Investment horizon in years.
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(
        r: f64,
        alpha: f64,
        sigma: f64,
        gamma: f64,
        lambda: f64,
        mu: f64,
        horizon: f64,
    ) -> Result<Self> {
        let p = Self {
            r,
            alpha,
            sigma,
            gamma,
            lambda,
            mu,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    /// The market used throughout the numerical experiments
    /// (σ = 0.25, r = 0.03, α = 0.10, γ = 0.5, λ = 0.08, μ = 0.02).
    pub fn baseline(horizon: f64) -> Self {
        Self {
            r: 0.03,
            alpha: 0.10,
            sigma: 0.25,
            gamma: 0.5,
            lambda: 0.08,
            mu: 0.02,
            horizon,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.r,
            self.alpha,
            self.sigma,
            self.gamma,
            self.lambda,
            self.mu,
            self.horizon,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidParams("non-finite parameter".into()));
        }
        if self.alpha <= self.r {
            return Err(SolverError::InvalidParams(format!(
                "stock drift {} must exceed the risk-free rate {}",
                self.alpha, self.r
            )));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(SolverError::InvalidParams(format!(
                "gamma = {} must lie in (0, 1)",
                self.gamma
            )));
        }
        if self.sigma <= 0.0 {
            return Err(SolverError::InvalidParams("sigma must be positive".into()));
        }
        if self.lambda < 0.0 {
            return Err(SolverError::InvalidParams("lambda must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return Err(SolverError::InvalidParams("mu must lie in [0, 1)".into()));
        }
        if self.lambda + self.mu <= 0.0 {
            return Err(SolverError::InvalidParams(
                "at least one transaction cost must be positive".into(),
            ));
        }
        if self.horizon <= 0.0 {
            return Err(SolverError::InvalidParams("horizon must be positive".into()));
        }
        Ok(())
    }

    /// Cost factor of a trade: `1 + λ` for purchases, `1 − μ` for sales.
    pub fn cost_factor(&self, side: Side) -> f64 {
        match side {
            Side::Buy => 1.0 + self.lambda,
            Side::Sell => 1.0 - self.mu,
        }
    }

    /// `α − r − (1 − γ)σ²`; its sign decides whether the buying frontier
    /// ever crosses θ = π/2.
    pub fn merton_excess(&self) -> f64 {
        self.alpha - self.r - (1.0 - self.gamma) * self.sigma * self.sigma
    }
}

/// Which gradient constraint is active: buying (lower angles) or selling
/// (upper angles).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Buy,
    Sell,
}

/// Angular domain and the closed-form landmarks of the free boundaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarDomain {
    pub beta1: f64,
    pub beta2: f64,
    /// Latest time at which the buying frontier can be positive. May fall
    /// outside `[0, T]`; it is reported as computed.
    pub t_hat0: f64,
    /// Time at which the buying frontier crosses π/2, when it does.
    pub t_hat1: Option<f64>,
    /// Merton line `x_M` in `z = x / y` coordinates.
    pub merton_z: f64,
    /// Selling frontier angle at `t → T⁻`.
    pub sr_terminal: f64,
}

/// Endpoints `(β1, β2)` of the solvency region in polar coordinates.
pub fn domain_angles(p: &ModelParams) -> (f64, f64) {
    let beta1 = (-1.0 / (1.0 + p.lambda)).atan();
    let beta2 = (-1.0 / (1.0 - p.mu)).atan() + PI;
    (beta1, beta2)
}

pub fn critical_quantities(p: &ModelParams) -> PolarDomain {
    let (beta1, beta2) = domain_angles(p);
    let log_cost = ((1.0 + p.lambda) / (1.0 - p.mu)).ln();
    let excess = p.alpha - p.r;
    let t_hat0 = p.horizon - log_cost / excess;
    let merton_excess = p.merton_excess();
    let t_hat1 = (merton_excess > 0.0).then(|| p.horizon - log_cost / merton_excess);
    let merton_z = -merton_excess / excess;
    let sr_terminal = arccot((1.0 - p.mu) * merton_z);
    PolarDomain {
        beta1,
        beta2,
        t_hat0,
        t_hat1,
        merton_z,
        sr_terminal,
    }
}

/// Inverse cotangent with range `(0, π)`.
pub fn arccot(z: f64) -> f64 {
    FRAC_PI_2 - z.atan()
}

/// PDE coefficients `(g0, g1, g2)` of the no-transaction operator at `θ`.
pub fn coefficients(theta: f64, p: &ModelParams) -> (f64, f64, f64) {
    let (s, c) = theta.sin_cos();
    let s2 = s * s;
    let c2 = c * c;
    let sig2 = p.sigma * p.sigma;
    let g0 = p.gamma
        * (0.5 * sig2 * s2 * ((p.gamma - 1.0) * s2 + c2) + p.alpha * s2 + p.r * c2);
    let g1 = (p.gamma - 1.0) * sig2 * c * s2 * s + (p.alpha - p.r) * s * c;
    let g2 = 0.5 * sig2 * s2 * c2;
    (g0, g1, g2)
}

/// Terminal utility in polar form, `V(θ, T)`.
pub fn terminal_value(theta: f64, p: &ModelParams) -> Result<f64> {
    let (beta1, beta2) = domain_angles(p);
    if !(theta > beta1 && theta < beta2) {
        return Err(SolverError::Domain {
            theta,
            lo: beta1,
            hi: beta2,
        });
    }
    let side = if theta > 0.0 { Side::Sell } else { Side::Buy };
    let (s, c) = theta.sin_cos();
    let base = c + p.cost_factor(side) * s;
    Ok(base.powf(p.gamma) / p.gamma)
}

/// `V_θ / V` inside the buying (`Side::Buy`) or selling (`Side::Sell`)
/// region. The factor γ is included.
pub fn gradient_ratio(theta: f64, side: Side, p: &ModelParams) -> f64 {
    let k = p.cost_factor(side);
    let (s, c) = theta.sin_cos();
    p.gamma * (k * c - s) / (k * s + c)
}

/// Closed-form value inside a trading region, integrated from a frontier.
///
/// For `Side::Buy` the point must lie at or below the frontier, for
/// `Side::Sell` at or above it.
pub fn extend(
    theta: f64,
    frontier_theta: f64,
    frontier_value: f64,
    side: Side,
    p: &ModelParams,
) -> Result<f64> {
    let ordered = match side {
        Side::Buy => theta <= frontier_theta,
        Side::Sell => theta >= frontier_theta,
    };
    if !ordered {
        return Err(SolverError::Contract(format!(
            "{side:?} extension requested at θ = {theta} on the wrong side of the frontier {frontier_theta}"
        )));
    }
    if !(frontier_value > 0.0) {
        return Err(SolverError::Contract(format!(
            "extension anchor value {frontier_value} is not positive"
        )));
    }
    Ok(extension_unchecked(theta, frontier_theta, frontier_value, side, p))
}

pub(crate) fn extension_unchecked(
    theta: f64,
    frontier_theta: f64,
    frontier_value: f64,
    side: Side,
    p: &ModelParams,
) -> f64 {
    let k = p.cost_factor(side);
    let (s, c) = theta.sin_cos();
    let (sf, cf) = frontier_theta.sin_cos();
    frontier_value * ((k * s + c) / (k * sf + cf)).powf(p.gamma)
}

/// Maps `(θ, V, V_θ)` to the cartesian-ratio quantities `(z, v)` with
/// `z = x / y = cot θ` and `v = ∂_z (log(γ G) / γ)`.
pub fn to_cartesian(theta: f64, value: f64, value_theta: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(value > 0.0) {
        return Err(SolverError::Contract(format!(
            "value {value} must be positive for the cartesian map"
        )));
    }
    let (s, c) = theta.sin_cos();
    let v = -(value_theta * s * s - gamma * s * c * value) / (gamma * value);
    Ok((c / s, v))
}

/// `φ(x, y, t) = b^γ V(θ, t)` with `(b, θ)` the polar coordinates of `(x, y)`.
pub fn reconstruct_phi(x: f64, y: f64, value_at_theta: impl Fn(f64) -> f64, gamma: f64) -> f64 {
    let b = x.hypot(y);
    let theta = y.atan2(x);
    b.powf(gamma) * value_at_theta(theta)
}

/// Boundary row of a backward step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryRow {
    /// `V̂_θ(end, t_{l-1}) = ratio · V(end, t_l)`: the gradient constraint with
    /// the value lagged to the previous time level.
    LaggedGradient(f64),
    /// `V̂(end, t_{l-1}) = V(end, t_l)`.
    Fixed,
    /// The interior equation collocated at the end. Only meaningful where
    /// the operator degenerates (`g1 = g2 = 0`) and admits no boundary
    /// condition, as at `θ = 0`.
    Equation,
}

/// Row used at the degenerate end `θ = 0` when it bounds the interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroEnd {
    /// Collocate the equation, which reduces to `V_t + γ r V = 0` there.
    #[default]
    Equation,
    /// Impose the buying gradient ratio, lagged like the other end.
    Neumann,
}

/// The model operator with a choice of row at `θ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOperator<'a> {
    pub params: &'a ModelParams,
    pub zero_end: ZeroEnd,
}

/// A linear operator `L V = g2 V_θθ + g1 V_θ + g0 V` with boundary rows.
pub trait Operator {
    fn coefficients(&self, theta: f64) -> (f64, f64, f64);

    /// Row imposed at the lower (`Side::Buy`) or upper (`Side::Sell`) end.
    fn boundary(&self, theta: f64, side: Side) -> BoundaryRow;
}

impl Operator for ModelParams {
    fn coefficients(&self, theta: f64) -> (f64, f64, f64) {
        coefficients(theta, self)
    }

    fn boundary(&self, theta: f64, side: Side) -> BoundaryRow {
        ModelOperator {
            params: self,
            zero_end: ZeroEnd::default(),
        }
        .boundary(theta, side)
    }
}

impl Operator for ModelOperator<'_> {
    fn coefficients(&self, theta: f64) -> (f64, f64, f64) {
        coefficients(theta, self.params)
    }

    fn boundary(&self, theta: f64, side: Side) -> BoundaryRow {
        if theta == 0.0 && self.zero_end == ZeroEnd::Equation {
            BoundaryRow::Equation
        } else {
            BoundaryRow::LaggedGradient(gradient_ratio(theta, side, self.params))
        }
    }
}
