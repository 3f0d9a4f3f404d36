//! Long-horizon run: the frontiers settle well before `t = 0`.
//!
//! ```text
//! cargo run --example stationary -- [horizon] [n_theta] [dt]
//! ```

use polarinvest::harness::{stationary_report, Config, PathSummary};
use polarinvest::Backend;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let horizon: f64 = args.next().map_or(Ok(30.0), |s| s.parse())?;
    let n_theta = args.next().map_or(Ok(128), |s| s.parse())?;
    let dt: f64 = args.next().map_or(Ok(2e-3), |s| s.parse())?;
    let n_t = (horizon / dt).round() as usize;

    let summary = PathSummary::from_path(&Config::baseline(horizon, Backend::Spectral, n_theta, n_t).solve()?)?;
    let r = stationary_report(&summary);
    println!("br(0) = {:.6}  br(1) = {:.6}", r.br0, r.br1);
    println!("sr(0) = {:.6}  sr(1) = {:.6}", r.sr0, r.sr1);
    println!("cash/stock ratios: buy below z = {:.5}, sell above z = {:.5}", 1.0 / r.br0.tan(), 1.0 / r.sr0.tan());
    Ok(())
}
