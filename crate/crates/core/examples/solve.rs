//! Backward solve of the baseline market with either backend, printing the
//! frontiers along the way.
//!
//! ```text
//! cargo run --example solve -- [chebyshev|fd] [n_theta] [n_t]
//! ```

use polarinvest::harness::{describe, Config, PathSummary};
use polarinvest::Backend;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let method = match args.next().as_deref() {
        Some("fd") => Backend::FiniteDifference,
        _ => Backend::Spectral,
    };
    let default_n = if method == Backend::Spectral { 128 } else { 800 };
    let n_theta = args.next().map_or(Ok(default_n), |s| s.parse())?;
    let n_t = args.next().map_or(Ok(2000), |s| s.parse())?;

    let path = Config::baseline(4.0, method, n_theta, n_t).solve()?;
    let summary = PathSummary::from_path(&path)?;
    for t in [4.0, 3.0, 2.611946, 2.0, 1.492548, 1.0, 0.0] {
        println!("{}", describe(&summary, t));
    }
    println!(
        "{method} n_theta={n_theta} n_t={n_t}: {:.0} ms, max residual {:.1e}, {} retries",
        summary.runtime_ms, summary.max_residual, summary.retries
    );
    Ok(())
}
