//! Chebyshev building blocks: spectral differentiation on a mapped interval
//! and barycentric evaluation between nodes.
//!
//! ```text
//! cargo run --example collocation
//! ```

use std::sync::Arc;

use polarinvest::chebyshev::{derivative_at, interpolate, MappedGrid, ReferenceGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for n in [8, 16, 32] {
        let grid = MappedGrid::new(Arc::new(ReferenceGrid::new(n)?), 0.0, 2.0)?;
        let v: Vec<f64> = grid.thetas().iter().map(|x| x.exp() * x.sin()).collect();
        let d = grid.differentiate(&v);
        let nodal = grid
            .thetas()
            .iter()
            .zip(&d)
            .map(|(x, dv)| (dv - x.exp() * (x.sin() + x.cos())).abs())
            .fold(0.0, f64::max);
        let x = 0.731;
        let value = (interpolate(&grid, &v, x)? - x.exp() * x.sin()).abs();
        let slope = (derivative_at(&grid, &v, x)? - x.exp() * (x.sin() + x.cos())).abs();
        println!("n={n:3}: nodal derivative error {nodal:.1e}, off-node value {value:.1e}, slope {slope:.1e}");
    }
    Ok(())
}
