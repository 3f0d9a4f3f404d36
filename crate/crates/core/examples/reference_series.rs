//! Regenerates a reference `v(0, t)` series.
//!
//! ```text
//! cargo run --example reference_series -- [fd|chebyshev] [n_theta] [n_t] [out.csv]
//! ```
//!
//! The defaults (fd, 19200, 10240) reproduce `data/reference_v0.csv` in about
//! a minute. `chebyshev 2048 10240` reproduces `data/spectral_2048_v0.csv`;
//! expect well over an hour, since each step factorizes a dense 2049×2049
//! system.

use polarinvest::harness::{Config, Series};
use polarinvest::Backend;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let method = match args.next().as_deref() {
        Some("chebyshev") => Backend::Spectral,
        _ => Backend::FiniteDifference,
    };
    let n_theta = args.next().map_or(Ok(19200), |s| s.parse())?;
    let n_t = args.next().map_or(Ok(10240), |s| s.parse())?;
    let out = args.next().unwrap_or_else(|| "data/reference_v0.csv".into());

    let path = Config::baseline(4.0, method, n_theta, n_t).solve()?;
    Series::from_path(&path)?.write_csv(&out)?;
    println!(
        "wrote {out}: {method} n_theta={n_theta} n_t={n_t} runtime={:.1} s max residual={:.2e}",
        path.diagnostics.runtime_ms / 1e3,
        path.diagnostics.max_residual()
    );
    Ok(())
}
