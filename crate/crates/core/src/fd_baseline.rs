//! Central-difference baseline for the backward step.
//!
//! Same adaptive algorithm as the spectral solver, with the PDE discretized
//! by three-point stencils on a uniform grid over `I(t)`. Nodes ascend from
//! `a1` (index 0) to `a2` (index n). The gradient rows at both ends use
//! second-order one-sided differences and are folded into the tridiagonal
//! system by eliminating the third unknown with the neighbouring interior
//! row.

use crate::error::{Result, SolverError};
use crate::frontier::{check_frontiers, obstacles_from, SellValueTime};
use crate::model::{BoundaryRow, ModelParams, Operator, Side};
use crate::spectral_stepper::{backward_error, StepOutput, RESIDUAL_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    a1: f64,
    a2: f64,
    n: usize,
}

impl UniformGrid {
    pub fn new(a1: f64, a2: f64, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(SolverError::Config(format!(
                "finite-difference grid needs at least 4 subintervals, got {n}"
            )));
        }
        if !(a1.is_finite() && a2.is_finite() && a1 < a2) {
            return Err(SolverError::Mesh(format!("degenerate interval [{a1}, {a2}]")));
        }
        Ok(Self { a1, a2, n })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        (self.a2 - self.a1) / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.a2
        } else {
            self.a1 + i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// Value and slope of the local cubic through the four nodes around `x`.
    pub fn value_and_derivative(&self, values: &[f64], x: f64) -> Result<(f64, f64)> {
        let h = self.h();
        let slack = 1e-12 * (self.a2 - self.a1);
        if !(x >= self.a1 - slack && x <= self.a2 + slack) {
            return Err(SolverError::Extrapolation {
                x,
                a1: self.a1,
                a2: self.a2,
            });
        }
        let s = (x - self.a1) / h;
        let i0 = (s.floor() as isize - 1).clamp(0, self.n as isize - 3) as usize;
        let u = s - i0 as f64;
        // Lagrange basis on the local nodes 0, 1, 2, 3.
        let l = [
            -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0,
            u * (u - 2.0) * (u - 3.0) / 2.0,
            -u * (u - 1.0) * (u - 3.0) / 2.0,
            u * (u - 1.0) * (u - 2.0) / 6.0,
        ];
        let dl = [
            -((u - 2.0) * (u - 3.0) + (u - 1.0) * (u - 3.0) + (u - 1.0) * (u - 2.0)) / 6.0,
            ((u - 2.0) * (u - 3.0) + u * (u - 3.0) + u * (u - 2.0)) / 2.0,
            -((u - 1.0) * (u - 3.0) + u * (u - 3.0) + u * (u - 1.0)) / 2.0,
            ((u - 1.0) * (u - 2.0) + u * (u - 2.0) + u * (u - 1.0)) / 6.0,
        ];
        let mut v = 0.0;
        let mut dv = 0.0;
        for k in 0..4 {
            v += l[k] * values[i0 + k];
            dv += dl[k] * values[i0 + k];
        }
        Ok((v, dv / h))
    }

    /// Second-order nodal first derivatives.
    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        let n = self.n;
        let h = self.h();
        let mut d = vec![0.0; n + 1];
        d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
        d[n] = (3.0 * values[n] - 4.0 * values[n - 1] + values[n - 2]) / (2.0 * h);
        for i in 1..n {
            d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
        }
        d
    }
}

/// Solves `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]` by
/// elimination without pivoting.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(singular(0));
    }
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(singular(i));
        }
        c[i] = if i + 1 < n { sup[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

fn singular(row: usize) -> SolverError {
    SolverError::Numerical {
        n: 0,
        dt: f64::NAN,
        a1: f64::NAN,
        a2: f64::NAN,
        reason: format!("zero pivot in tridiagonal elimination at row {row}"),
    }
}

/// One Crank–Nicolson step on a uniform grid.
pub fn fd_step(grid: &UniformGrid, v_old: &[f64], op: &impl Operator, dt: f64) -> Result<StepOutput> {
    let n = grid.n;
    if v_old.len() != n + 1 {
        return Err(SolverError::Contract(format!(
            "expected {} nodal values, got {}",
            n + 1,
            v_old.len()
        )));
    }
    if v_old.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::Contract("non-finite values handed to a step".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SolverError::Config(format!("time step {dt} must be positive")));
    }
    let h = grid.h();
    let inv_dt = 1.0 / dt;
    let mut sub = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut sup = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    for i in 1..n {
        let (g0, g1, g2) = op.coefficients(grid.node(i));
        let lo = g2 / (h * h) - g1 / (2.0 * h);
        let mid = -2.0 * g2 / (h * h) + g0;
        let up = g2 / (h * h) + g1 / (2.0 * h);
        sub[i] = -0.5 * lo;
        diag[i] = inv_dt - 0.5 * mid;
        sup[i] = -0.5 * up;
        let lv = lo * v_old[i - 1] + mid * v_old[i] + up * v_old[i + 1];
        rhs[i] = inv_dt * v_old[i] + 0.5 * lv;
    }

    // Lower end: (-3 v0 + 4 v1 - v2) / 2h = ratio · v_old[0].
    match op.boundary(grid.a1, Side::Buy) {
        BoundaryRow::Fixed => {
            diag[0] = 1.0;
            rhs[0] = v_old[0];
        }
        BoundaryRow::Equation => {
            let (g0, g1, g2) = op.coefficients(grid.a1);
            degenerate_end(g1, g2)?;
            diag[0] = inv_dt - 0.5 * g0;
            rhs[0] = (inv_dt + 0.5 * g0) * v_old[0];
        }
        BoundaryRow::LaggedGradient(ratio) => {
            let (a, b, c) = (-3.0 / (2.0 * h), 4.0 / (2.0 * h), -1.0 / (2.0 * h));
            let r0 = ratio * v_old[0];
            if sup[1] == 0.0 {
                return Err(singular(1));
            }
            let f = c / sup[1];
            diag[0] = a - f * sub[1];
            sup[0] = b - f * diag[1];
            rhs[0] = r0 - f * rhs[1];
        }
    }
    // Upper end: (3 vn - 4 v_{n-1} + v_{n-2}) / 2h = ratio · v_old[n].
    match op.boundary(grid.a2, Side::Sell) {
        BoundaryRow::Fixed => {
            diag[n] = 1.0;
            rhs[n] = v_old[n];
        }
        BoundaryRow::Equation => {
            let (g0, g1, g2) = op.coefficients(grid.a2);
            degenerate_end(g1, g2)?;
            diag[n] = inv_dt - 0.5 * g0;
            rhs[n] = (inv_dt + 0.5 * g0) * v_old[n];
        }
        BoundaryRow::LaggedGradient(ratio) => {
            let (a, b, c) = (3.0 / (2.0 * h), -4.0 / (2.0 * h), 1.0 / (2.0 * h));
            let rn = ratio * v_old[n];
            if sub[n - 1] == 0.0 {
                return Err(singular(n - 1));
            }
            let f = c / sub[n - 1];
            diag[n] = a - f * sup[n - 1];
            sub[n] = b - f * diag[n - 1];
            rhs[n] = rn - f * rhs[n - 1];
        }
    }

    let values = solve_tridiagonal(&sub, &diag, &sup, &rhs).map_err(|e| match e {
        SolverError::Numerical { reason, .. } => SolverError::Numerical {
            n,
            dt,
            a1: grid.a1,
            a2: grid.a2,
            reason,
        },
        other => other,
    })?;

    let mut ax = vec![0.0; n + 1];
    let mut lhs_norm = 0.0f64;
    for i in 0..=n {
        ax[i] = diag[i] * values[i];
        let mut row = diag[i].abs();
        if i > 0 {
            ax[i] += sub[i] * values[i - 1];
            row += sub[i].abs();
        }
        if i < n {
            ax[i] += sup[i] * values[i + 1];
            row += sup[i].abs();
        }
        lhs_norm = lhs_norm.max(row);
    }
    let residual = backward_error(&ax, &rhs, lhs_norm, &values);
    if !residual.is_finite() || residual > RESIDUAL_TOLERANCE {
        return Err(SolverError::Numerical {
            n,
            dt,
            a1: grid.a1,
            a2: grid.a2,
            reason: format!("backward error {residual:e}"),
        });
    }
    Ok(StepOutput { values, residual })
}

/// A collocated end row needs no neighbours only where the operator
/// degenerates to a pointwise ODE.
fn degenerate_end(g1: f64, g2: f64) -> Result<()> {
    if g1 != 0.0 || g2 != 0.0 {
        return Err(SolverError::Contract(format!(
            "equation row at a non-degenerate end (g1 = {g1}, g2 = {g2})"
        )));
    }
    Ok(())
}

/// Frontiers from nodal obstacle values, refined by linear interpolation of
/// the extreme sign change.
pub fn fd_locate_frontiers(
    grid: &UniformGrid,
    v_hat: &[f64],
    v_old: &[f64],
    p: &ModelParams,
    sell_time: SellValueTime,
) -> Result<(f64, f64)> {
    let nodes = grid.nodes();
    let dv = grid.differentiate(v_hat);
    let mut p1 = Vec::with_capacity(nodes.len());
    let mut p2 = Vec::with_capacity(nodes.len());
    for (i, &theta) in nodes.iter().enumerate() {
        let (a, b) = obstacles_from(v_hat[i], dv[i], v_old[i], theta, p, sell_time);
        p1.push(a);
        p2.push(b);
    }
    let (br, sr) = locate_from_nodal(&nodes, &p1, &p2);
    check_frontiers(grid.a1, grid.a2, br, sr, &nodes, &p1, &p2)
}

/// Extreme sign changes of nodal `P1`, `P2` with linear interpolation.
pub fn locate_from_nodal(nodes: &[f64], p1: &[f64], p2: &[f64]) -> (f64, f64) {
    let last = nodes.len() - 1;
    let br = match (0..last).rev().find(|&k| p1[k] > 0.0) {
        None => nodes[0],
        Some(k) if k + 1 == last => nodes[last],
        Some(k) => linear_root(nodes[k], nodes[k + 1], p1[k], p1[k + 1]),
    };
    let sr = match (1..=last).find(|&k| p2[k] < 0.0) {
        None => nodes[last],
        Some(1) => nodes[0],
        Some(k) => linear_root(nodes[k - 1], nodes[k], p2[k - 1], p2[k]),
    };
    (br, sr)
}

fn linear_root(x0: f64, x1: f64, f0: f64, f1: f64) -> f64 {
    if f0 == f1 {
        return 0.5 * (x0 + x1);
    }
    x0 + (x1 - x0) * f0 / (f0 - f1)
}
