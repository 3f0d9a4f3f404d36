//! Chebyshev–Gauss–Lobatto grids, differentiation matrices and barycentric
//! evaluation.
//!
//! Nodes are stored in descending order, `x_j = cos(πj/n)`, so index 0 is the
//! upper endpoint and index `n` the lower one.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;

use crate::error::{Result, SolverError};

/// Relative slack allowed when a query point sits on an interval end.
const ENDPOINT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ReferenceGrid {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    d1: Mat<f64>,
    d2: Mat<f64>,
}

impl ReferenceGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(SolverError::Config(format!(
                "Chebyshev degree must be at least 2, got {n}"
            )));
        }
        let nf = n as f64;
        let nodes: Vec<f64> = (0..=n).map(|j| (PI * j as f64 / nf).cos()).collect();
        let weights: Vec<f64> = (0..=n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();

        // x_i - x_j through the product formula avoids cancellation near the
        // clustered endpoints.
        let diff = |i: usize, j: usize| {
            2.0 * (PI * (i + j) as f64 / (2.0 * nf)).sin()
                * (PI * (j as f64 - i as f64) / (2.0 * nf)).sin()
        };
        let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
        let mut d1 = Mat::<f64>::zeros(n + 1, n + 1);
        for i in 0..=n {
            let mut row_sum = 0.0;
            for j in 0..=n {
                if i == j {
                    continue;
                }
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                let entry = c(i) / c(j) * sign / diff(i, j);
                d1[(i, j)] = entry;
                row_sum += entry;
            }
            d1[(i, i)] = -row_sum;
        }
        let d2 = &d1 * &d1;

        Ok(Self {
            n,
            nodes,
            weights,
            d1,
            d2,
        })
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// First-derivative matrix on `[-1, 1]`.
    pub fn d1(&self) -> &Mat<f64> {
        &self.d1
    }

    /// Second-derivative matrix on `[-1, 1]`.
    pub fn d2(&self) -> &Mat<f64> {
        &self.d2
    }

    /// `D1 · values`, on the reference interval.
    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        apply(&self.d1, values)
    }
}

pub(crate) fn apply(m: &Mat<f64>, values: &[f64]) -> Vec<f64> {
    let n = values.len();
    debug_assert_eq!(m.ncols(), n);
    let mut out = vec![0.0; m.nrows()];
    // Column-major storage: accumulate column by column.
    for (j, &vj) in values.iter().enumerate() {
        if vj == 0.0 {
            continue;
        }
        let col = m.col(j);
        for (o, &mij) in out.iter_mut().zip(col.iter()) {
            *o += mij * vj;
        }
    }
    out
}

/// Chebyshev grid affinely mapped onto `[a1, a2]`.
#[derive(Debug, Clone)]
pub struct MappedGrid {
    reference: Arc<ReferenceGrid>,
    a1: f64,
    a2: f64,
}

impl MappedGrid {
    pub fn new(reference: Arc<ReferenceGrid>, a1: f64, a2: f64) -> Result<Self> {
        if !(a1.is_finite() && a2.is_finite() && a1 < a2) {
            return Err(SolverError::Mesh(format!("degenerate interval [{a1}, {a2}]")));
        }
        Ok(Self { reference, a1, a2 })
    }

    pub fn reference(&self) -> &Arc<ReferenceGrid> {
        &self.reference
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn a2(&self) -> f64 {
        self.a2
    }

    pub fn degree(&self) -> usize {
        self.reference.n
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.a2 - self.a1)
    }

    /// `d/dθ = scale · d/dx` on the reference interval.
    pub fn scale(&self) -> f64 {
        2.0 / (self.a2 - self.a1)
    }

    /// Node `j`; the end nodes are the interval ends exactly.
    pub fn theta(&self, j: usize) -> f64 {
        let n = self.degree();
        if j == 0 {
            self.a2
        } else if j == n {
            self.a1
        } else {
            self.half_width() * self.reference.nodes[j] + 0.5 * (self.a2 + self.a1)
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..=self.degree()).map(|j| self.theta(j)).collect()
    }

    fn to_reference(&self, x: f64) -> Result<f64> {
        let slack = ENDPOINT_SLACK * (self.a2 - self.a1);
        if !(x >= self.a1 - slack && x <= self.a2 + slack) {
            return Err(SolverError::Extrapolation {
                x,
                a1: self.a1,
                a2: self.a2,
            });
        }
        Ok(((2.0 * x - (self.a1 + self.a2)) / (self.a2 - self.a1)).clamp(-1.0, 1.0))
    }

    /// Nodal values of the θ-derivative of the interpolant.
    pub fn differentiate(&self, values: &[f64]) -> Vec<f64> {
        let s = self.scale();
        self.reference
            .differentiate(values)
            .into_iter()
            .map(|d| d * s)
            .collect()
    }
}

/// Barycentric evaluation of several nodal vectors at one reference point.
fn barycentric<const K: usize>(grid: &ReferenceGrid, data: [&[f64]; K], xi: f64) -> [f64; K] {
    let mut num = [0.0; K];
    let mut den = 0.0;
    for (j, (&xj, &wj)) in grid.nodes.iter().zip(grid.weights.iter()).enumerate() {
        let d = xi - xj;
        if d == 0.0 {
            return std::array::from_fn(|k| data[k][j]);
        }
        let t = wj / d;
        den += t;
        for k in 0..K {
            num[k] += t * data[k][j];
        }
    }
    std::array::from_fn(|k| num[k] / den)
}

/// Value of the interpolant of `values` at `x`.
pub fn interpolate(grid: &MappedGrid, values: &[f64], x: f64) -> Result<f64> {
    check_len(grid, values)?;
    let xi = grid.to_reference(x)?;
    Ok(barycentric(&grid.reference, [values], xi)[0])
}

/// θ-derivative of the interpolant of `values` at `x`.
///
/// The derivative of a degree-`n` polynomial is itself reproduced exactly by
/// interpolating its nodal derivatives, which keeps this stable at and near
/// the nodes.
pub fn derivative_at(grid: &MappedGrid, values: &[f64], x: f64) -> Result<f64> {
    check_len(grid, values)?;
    let xi = grid.to_reference(x)?;
    let dv = grid.differentiate(values);
    Ok(barycentric(&grid.reference, [&dv[..]], xi)[0])
}

fn check_len(grid: &MappedGrid, values: &[f64]) -> Result<()> {
    if values.len() != grid.degree() + 1 {
        return Err(SolverError::Contract(format!(
            "expected {} nodal values, got {}",
            grid.degree() + 1,
            values.len()
        )));
    }
    Ok(())
}

/// An interpolant together with its nodal derivative, for repeated
/// evaluation of value and slope.
#[derive(Debug, Clone)]
pub struct Interpolant<'a> {
    grid: &'a MappedGrid,
    values: &'a [f64],
    derivs: Vec<f64>,
}

impl<'a> Interpolant<'a> {
    pub fn new(grid: &'a MappedGrid, values: &'a [f64]) -> Result<Self> {
        check_len(grid, values)?;
        let derivs = grid.differentiate(values);
        Ok(Self {
            grid,
            values,
            derivs,
        })
    }

    pub fn grid(&self) -> &MappedGrid {
        self.grid
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        let xi = self.grid.to_reference(x)?;
        Ok(barycentric(&self.grid.reference, [self.values], xi)[0])
    }

    pub fn value_and_derivative(&self, x: f64) -> Result<(f64, f64)> {
        let xi = self.grid.to_reference(x)?;
        let [v, d] = barycentric(&self.grid.reference, [self.values, &self.derivs[..]], xi);
        Ok((v, d))
    }

    /// Value and slope of this interpolant plus the value of a second nodal
    /// vector on the same grid, in one sweep.
    pub fn with_companion(&self, other: &[f64], x: f64) -> Result<(f64, f64, f64)> {
        let xi = self.grid.to_reference(x)?;
        let [v, d, o] = barycentric(
            &self.grid.reference,
            [self.values, &self.derivs[..], other],
            xi,
        );
        Ok((v, d, o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn small_grids() {
        let g = ReferenceGrid::new(2).unwrap();
        assert_abs_diff_eq!(g.nodes()[0], 1.0);
        assert_abs_diff_eq!(g.nodes()[1], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(g.nodes()[2], -1.0);
        assert!(ReferenceGrid::new(1).is_err());
        assert!(ReferenceGrid::new(0).is_err());
    }

    #[test]
    fn differentiates_low_degree_polynomials() {
        let g = ReferenceGrid::new(8).unwrap();
        let sq: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        let d = g.differentiate(&sq);
        let expected: Vec<f64> = g.nodes().iter().map(|x| 2.0 * x).collect();
        assert!(max_err(&d, &expected) <= 1e-12);

        let cube: Vec<f64> = g.nodes().iter().map(|x| x * x * x).collect();
        let d2 = apply(g.d2(), &cube);
        let expected: Vec<f64> = g.nodes().iter().map(|x| 6.0 * x).collect();
        assert!(max_err(&d2, &expected) <= 1e-10);
    }

    #[test]
    fn monomial_exactness_up_to_degree() {
        for &n in &[16usize, 64, 256] {
            let g = ReferenceGrid::new(n).unwrap();
            let bound = 1e-10 * (n * n) as f64;
            for k in 1..=n.min(40) {
                let f: Vec<f64> = g.nodes().iter().map(|x| x.powi(k as i32)).collect();
                let df: Vec<f64> = g
                    .nodes()
                    .iter()
                    .map(|x| k as f64 * x.powi(k as i32 - 1))
                    .collect();
                let err = max_err(&g.differentiate(&f), &df);
                assert!(err <= bound, "n={n} k={k} err={err:e}");
            }
            for i in 0..=n {
                let s: f64 = g.d1().row(i).iter().sum();
                assert!(s.abs() <= 1e-12 * n as f64);
            }
        }
    }

    #[test]
    fn mapped_sine_derivative() {
        let r = Arc::new(ReferenceGrid::new(32).unwrap());
        let g = MappedGrid::new(r, 0.0, 2.0).unwrap();
        let v: Vec<f64> = g.thetas().iter().map(|t| t.sin()).collect();
        for k in 0..50 {
            let x = 2.0 * k as f64 / 49.0;
            assert_abs_diff_eq!(derivative_at(&g, &v, x).unwrap(), x.cos(), epsilon = 1e-10);
        }
    }

    #[test]
    fn interpolation_reproduces_nodes_and_quadratics() {
        let r = Arc::new(ReferenceGrid::new(8).unwrap());
        let g = MappedGrid::new(r, -0.3, 1.7).unwrap();
        let v: Vec<f64> = g.thetas().iter().map(|t| t * t).collect();
        for j in 0..=8 {
            assert_abs_diff_eq!(interpolate(&g, &v, g.theta(j)).unwrap(), v[j], epsilon = 4e-15);
        }
        for k in 0..100 {
            let x = -0.3 + 2.0 * ((k * 37 % 100) as f64 + 0.5) / 100.0;
            assert_abs_diff_eq!(interpolate(&g, &v, x).unwrap(), x * x, epsilon = 1e-12);
            assert_abs_diff_eq!(derivative_at(&g, &v, x).unwrap(), 2.0 * x, epsilon = 1e-10);
        }
        let c = vec![3.25; 9];
        assert_abs_diff_eq!(interpolate(&g, &c, 0.77).unwrap(), 3.25, epsilon = 1e-14);
        assert_abs_diff_eq!(derivative_at(&g, &c, 0.77).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn extrapolation_is_refused() {
        let r = Arc::new(ReferenceGrid::new(8).unwrap());
        let g = MappedGrid::new(r, 0.0, 1.0).unwrap();
        let v = vec![1.0; 9];
        assert!(matches!(
            interpolate(&g, &v, 1.01),
            Err(SolverError::Extrapolation { .. })
        ));
        assert!(derivative_at(&g, &v, -0.5).is_err());
        assert!(interpolate(&g, &v[..5], 0.5).is_err());
    }

    #[test]
    fn mapped_nodes_follow_the_affine_map() {
        let r = Arc::new(ReferenceGrid::new(10).unwrap());
        let g = MappedGrid::new(r.clone(), 0.5, 2.5).unwrap();
        for j in 0..=10 {
            assert_abs_diff_eq!(g.theta(j), 1.0 * r.nodes()[j] + 1.5, epsilon = 1e-15);
        }
        assert_eq!(g.theta(0), 2.5);
        assert_eq!(g.theta(10), 0.5);
        assert!(MappedGrid::new(r, 1.0, 1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn differentiation_is_exact_for_polynomials(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 1..12),
            a1 in -1.0f64..1.0,
            width in 0.2f64..3.0,
        ) {
            let n = 12;
            let grid = MappedGrid::new(Arc::new(ReferenceGrid::new(n).unwrap()), a1, a1 + width).unwrap();
            let eval = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
            let deriv = |x: f64| {
                coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * x + k as f64 * c)
            };
            let v: Vec<f64> = grid.thetas().iter().map(|&x| eval(x)).collect();
            let d = grid.differentiate(&v);
            let scale = 1.0 + v.iter().map(|x| x.abs()).fold(0.0, f64::max);
            for (x, dx) in grid.thetas().iter().zip(&d) {
                proptest::prop_assert!((dx - deriv(*x)).abs() <= 1e-9 * scale / width.min(1.0));
            }
        }
    }
}
