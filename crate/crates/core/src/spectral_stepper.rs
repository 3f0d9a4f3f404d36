//! One backward Crank–Nicolson step of the collocation scheme.
//!
//! Interior rows `j = 1..n-1` read
//! `(V̂_j − V_j)/Δt = ½ L(V̂ + V)_j` and the two end rows fix the new-time
//! slope to the gradient ratio times the *old-time* end value.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::perm::PermRef;
use faer::{Mat, Par};

use crate::chebyshev::{apply, MappedGrid};
use crate::error::{Result, SolverError};
use crate::model::{BoundaryRow, Operator, Side};

/// Bound on the normwise backward error `‖A x − b‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)`
/// of a step.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Assembled and factored step matrix. Reassembling in place keeps the dense
/// buffers alive across steps, which avoids heap fragmentation on long runs.
pub struct StepSystem {
    grid: MappedGrid,
    dt: f64,
    lhs: Mat<f64>,
    lhs_norm: f64,
    /// Unit-lower `L` and `U` packed together.
    factors: Mat<f64>,
    perm: Vec<usize>,
    perm_inv: Vec<usize>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    g2: Vec<f64>,
    /// Row 0 (upper end) and row n (lower end).
    upper: BoundaryRow,
    lower: BoundaryRow,
}

/// Result of one step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub values: Vec<f64>,
    /// Normwise backward error of the solve.
    pub residual: f64,
}

pub fn assemble(grid: &MappedGrid, op: &impl Operator, dt: f64) -> Result<StepSystem> {
    let len = grid.degree() + 1;
    let mut sys = StepSystem {
        grid: grid.clone(),
        dt,
        lhs: Mat::zeros(len, len),
        lhs_norm: 0.0,
        factors: Mat::zeros(len, len),
        perm: vec![0; len],
        perm_inv: vec![0; len],
        g0: vec![0.0; len],
        g1: vec![0.0; len],
        g2: vec![0.0; len],
        upper: BoundaryRow::Fixed,
        lower: BoundaryRow::Fixed,
    };
    sys.reassemble(grid, op, dt)?;
    Ok(sys)
}

impl StepSystem {
    /// Rebuilds and refactors the system for a new grid or step size.
    pub fn reassemble(&mut self, grid: &MappedGrid, op: &impl Operator, dt: f64) -> Result<()> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::Config(format!("time step {dt} must be positive")));
        }
        let n = grid.degree();
        let len = n + 1;
        if self.lhs.nrows() != len {
            *self = assemble(grid, op, dt)?;
            return Ok(());
        }
        self.grid = grid.clone();
        self.dt = dt;

        let s = grid.scale();
        let s2 = s * s;
        let reference = grid.reference().clone();
        let d1 = reference.d1();
        let d2 = reference.d2();
        for j in 0..len {
            let (a, b, c) = op.coefficients(grid.theta(j));
            self.g0[j] = a;
            self.g1[j] = b * s;
            self.g2[j] = c * s2;
        }
        self.upper = op.boundary(grid.theta(0), Side::Sell);
        self.lower = op.boundary(grid.theta(n), Side::Buy);

        let inv_dt = 1.0 / dt;
        let equation = |row: usize| match row {
            0 => self.upper == BoundaryRow::Equation,
            r if r == n => self.lower == BoundaryRow::Equation,
            _ => true,
        };
        let rows: Vec<usize> = (0..len).filter(|&r| equation(r)).collect();
        let (g0, g1, g2) = (&self.g0, &self.g1, &self.g2);
        let lhs = &mut self.lhs;
        for col in 0..len {
            for &row in &rows {
                lhs[(row, col)] = -0.5 * (g2[row] * d2[(row, col)] + g1[row] * d1[(row, col)]);
            }
        }
        for &row in &rows {
            lhs[(row, row)] += inv_dt - 0.5 * g0[row];
        }
        for (row, kind) in [(0, self.upper), (n, self.lower)] {
            match kind {
                BoundaryRow::LaggedGradient(_) => {
                    for col in 0..len {
                        lhs[(row, col)] = s * d1[(row, col)];
                    }
                }
                BoundaryRow::Fixed => {
                    for col in 0..len {
                        lhs[(row, col)] = 0.0;
                    }
                    lhs[(row, row)] = 1.0;
                }
                BoundaryRow::Equation => {}
            }
        }

        self.lhs_norm = (0..len)
            .map(|i| (0..len).map(|j| self.lhs[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        self.factors.copy_from(&self.lhs);
        let mut buf = MemBuffer::new(factor::lu_in_place_scratch::<usize, f64>(
            len,
            len,
            Par::Seq,
            Default::default(),
        ));
        factor::lu_in_place(
            self.factors.as_mut(),
            &mut self.perm,
            &mut self.perm_inv,
            Par::Seq,
            MemStack::new(&mut buf),
            Default::default(),
        );
        Ok(())
    }

    pub fn grid(&self) -> &MappedGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lhs(&self) -> &Mat<f64> {
        &self.lhs
    }

    /// Right-hand side for old-time nodal values `v_old`.
    pub fn rhs(&self, v_old: &[f64]) -> Vec<f64> {
        let n = self.grid.degree();
        let reference = self.grid.reference();
        let dv = apply(reference.d1(), v_old);
        let ddv = apply(reference.d2(), v_old);
        let inv_dt = 1.0 / self.dt;
        let interior = |j: usize| {
            let lv = self.g2[j] * ddv[j] + self.g1[j] * dv[j] + self.g0[j] * v_old[j];
            inv_dt * v_old[j] + 0.5 * lv
        };
        let mut rhs: Vec<f64> = (0..=n).map(interior).collect();
        for (j, kind) in [(0, self.upper), (n, self.lower)] {
            match kind {
                BoundaryRow::LaggedGradient(ratio) => rhs[j] = ratio * v_old[j],
                BoundaryRow::Fixed => rhs[j] = v_old[j],
                BoundaryRow::Equation => {}
            }
        }
        rhs
    }

    pub fn step(&self, v_old: &[f64]) -> Result<StepOutput> {
        let n = self.grid.degree();
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
        let rhs = self.rhs(v_old);
        let mut x = Mat::<f64>::from_fn(n + 1, 1, |i, _| rhs[i]);
        // SAFETY: both arrays come from the factorization and are inverse
        // permutations of 0..=n.
        let perm = unsafe { PermRef::new_unchecked(&self.perm, &self.perm_inv, n + 1) };
        let mut buf = MemBuffer::new(solve::solve_in_place_scratch::<usize, f64>(n + 1, 1, Par::Seq));
        solve::solve_in_place(
            self.factors.as_ref(),
            self.factors.as_ref(),
            perm,
            x.as_mut(),
            Par::Seq,
            MemStack::new(&mut buf),
        );
        let values: Vec<f64> = (0..=n).map(|i| x[(i, 0)]).collect();
        let residual = backward_error(&apply(&self.lhs, &values), &rhs, self.lhs_norm, &values);
        if !residual.is_finite() || residual > RESIDUAL_TOLERANCE {
            return Err(SolverError::Numerical {
                n,
                dt: self.dt,
                a1: self.grid.a1(),
                a2: self.grid.a2(),
                reason: format!("backward error {residual:e}"),
            });
        }
        Ok(StepOutput { values, residual })
    }
}

/// `‖ax − b‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)` given the product `ax = A x`.
pub(crate) fn backward_error(ax: &[f64], rhs: &[f64], lhs_norm: f64, x: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let num = ax
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let den = lhs_norm * inf(x) + inf(rhs);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Convenience wrapper: assemble and take one step.
pub fn step(grid: &MappedGrid, op: &impl Operator, dt: f64, v_old: &[f64]) -> Result<StepOutput> {
    assemble(grid, op, dt)?.step(v_old)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::ReferenceGrid;
    use std::f64::consts::PI;
    use std::sync::Arc;

    /// `V_t + c V_θθ = 0` with configurable end rows.
    struct Heat {
        c: f64,
        ends: BoundaryRow,
    }

    impl Operator for Heat {
        fn coefficients(&self, _theta: f64) -> (f64, f64, f64) {
            (0.0, 0.0, self.c)
        }
        fn boundary(&self, _theta: f64, _side: Side) -> BoundaryRow {
            self.ends
        }
    }

    fn grid(n: usize, a1: f64, a2: f64) -> MappedGrid {
        MappedGrid::new(Arc::new(ReferenceGrid::new(n).unwrap()), a1, a2).unwrap()
    }

    fn sine_mode(g: &MappedGrid) -> Vec<f64> {
        g.thetas().iter().map(|x| (PI * x).sin()).collect()
    }

    #[test]
    fn heat_mode_decays_by_the_crank_nicolson_factor() {
        let g = grid(32, 0.0, 1.0);
        let op = Heat { c: 1.0, ends: BoundaryRow::Fixed };
        let dt = 0.01;
        let v0 = sine_mode(&g);
        let out = step(&g, &op, dt, &v0).unwrap();
        let k2 = PI * PI;
        let factor = (1.0 - 0.5 * dt * k2) / (1.0 + 0.5 * dt * k2);
        for (a, b) in out.values.iter().zip(&v0) {
            assert!((a - factor * b).abs() < 1e-11, "{a} vs {}", factor * b);
        }
        assert!(out.residual < 1e-15);
    }

    #[test]
    fn second_order_in_time() {
        let g = grid(24, 0.0, 1.0);
        let op = Heat { c: 0.5, ends: BoundaryRow::Fixed };
        let horizon = 0.4;
        let exact = (-0.5 * PI * PI * horizon).exp();
        let error = |steps: usize| {
            let sys = assemble(&g, &op, horizon / steps as f64).unwrap();
            let mut v = sine_mode(&g);
            for _ in 0..steps {
                v = sys.step(&v).unwrap().values;
            }
            let mid = g.degree() / 2;
            (v[mid] / (PI * g.theta(mid)).sin() - exact).abs()
        };
        let ratio = error(10) / error(20);
        assert!((ratio - 4.0).abs() < 0.1, "error ratio {ratio}");
    }

    #[test]
    fn step_is_linear() {
        let g = grid(16, -0.3, 1.2);
        let p = crate::model::ModelParams::baseline(1.0);
        let sys = assemble(&g, &p, 1e-3).unwrap();
        let u: Vec<f64> = g.thetas().iter().map(|x| 1.0 + x.cos()).collect();
        let w: Vec<f64> = g.thetas().iter().map(|x| 2.0 + x * x).collect();
        let mix: Vec<f64> = u.iter().zip(&w).map(|(a, b)| 0.7 * a - 1.3 * b).collect();
        let (su, sw, sm) = (
            sys.step(&u).unwrap().values,
            sys.step(&w).unwrap().values,
            sys.step(&mix).unwrap().values,
        );
        for k in 0..su.len() {
            assert!((sm[k] - (0.7 * su[k] - 1.3 * sw[k])).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_rows_use_the_old_end_values() {
        let g = grid(20, 0.2, 1.1);
        let ratio = -0.4;
        let op = Heat { c: 0.3, ends: BoundaryRow::LaggedGradient(ratio) };
        let v0: Vec<f64> = g.thetas().iter().map(|x| 1.0 + 0.2 * x).collect();
        let out = step(&g, &op, 1e-2, &v0).unwrap();
        let d = g.differentiate(&out.values);
        let n = g.degree();
        assert!((d[0] - ratio * v0[0]).abs() < 1e-9);
        assert!((d[n] - ratio * v0[n]).abs() < 1e-9);
    }

    #[test]
    fn reassembly_matches_a_fresh_system() {
        let p = crate::model::ModelParams::baseline(4.0);
        let reference = Arc::new(ReferenceGrid::new(24).unwrap());
        let g1 = MappedGrid::new(reference.clone(), 0.0, 2.2).unwrap();
        let g2 = MappedGrid::new(reference, 0.3, 2.0).unwrap();
        let mut sys = assemble(&g1, &p, 1e-3).unwrap();
        sys.reassemble(&g2, &p, 2e-3).unwrap();
        let fresh = assemble(&g2, &p, 2e-3).unwrap();
        let v: Vec<f64> = g2.thetas().iter().map(|x| 1.0 + 0.1 * x).collect();
        assert_eq!(sys.step(&v).unwrap().values, fresh.step(&v).unwrap().values);
        assert_eq!(sys.lhs(), fresh.lhs());
    }

    #[test]
    fn rejects_bad_input() {
        let g = grid(8, 0.0, 1.0);
        let op = Heat { c: 1.0, ends: BoundaryRow::Fixed };
        assert!(assemble(&g, &op, 0.0).is_err());
        assert!(step(&g, &op, 0.1, &[1.0; 3]).is_err());
        let mut v = vec![1.0; 9];
        v[4] = f64::NAN;
        assert!(step(&g, &op, 0.1, &v).is_err());
    }
}
