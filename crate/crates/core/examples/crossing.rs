//! The buying frontier reaches `θ = π/2` (an all-stock position) at a time
//! known in closed form. Measures the crossing per resolution.
//!
//! ```text
//! cargo run --example crossing -- [n_t] [n_theta...]
//! ```

use polarinvest::harness::{run_sweep, Config};
use polarinvest::Backend;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n_t = args.next().map_or(Ok(4000), |s| s.parse())?;
    let mut sizes: Vec<usize> = args.map(|s| s.parse()).collect::<Result<_, _>>()?;
    if sizes.is_empty() {
        sizes = vec![64, 128, 256];
    }
    let configs: Vec<Config> = sizes
        .iter()
        .map(|&n| Config::baseline(4.0, Backend::Spectral, n, n_t))
        .collect();
    for summary in run_sweep(&configs) {
        let s = summary?;
        let exact = s.domain.t_hat1.expect("baseline market has a crossing");
        match s.crossing() {
            Some(c) => println!(
                "n_theta={:5}: crossing at {:.5} (exact {exact:.5}), |br - π/2| at nearest slice {:.2e}",
                s.n_theta, c.t_cross, c.frontier_error
            ),
            None => println!("n_theta={:5}: frontier never reaches π/2", s.n_theta),
        }
    }
    Ok(())
}
