//! Spatial self-convergence of `v(0, t)` for both backends. Each sweep is
//! compared with a finer run of the same backend, so no reference file is
//! needed.
//!
//! ```text
//! cargo run --example convergence
//! ```

use polarinvest::harness::{convergence_rows, run_sweep, Axis, Config, PathSummary};
use polarinvest::Backend;

fn sweep(method: Backend, sizes: &[usize], reference_n: usize, n_t: usize) -> Result<(), Box<dyn std::error::Error>> {
    let reference = PathSummary::from_path(&Config::baseline(4.0, method, reference_n, n_t).solve()?)?.v0;
    let configs: Vec<Config> = sizes.iter().map(|&n| Config::baseline(4.0, method, n, n_t)).collect();
    let summaries = run_sweep(&configs).into_iter().collect::<Result<Vec<_>, _>>()?;
    for r in convergence_rows(&summaries, &reference, Axis::Space)? {
        println!("{:9} n_theta={:5} rmse={:.3e}  {}", r.method.to_string(), r.n_theta, r.rmse, r.slope_annotation);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    sweep(Backend::Spectral, &[32, 64, 128], 512, 1000)?;
    sweep(Backend::FiniteDifference, &[100, 200, 400], 3200, 1000)?;
    Ok(())
}
