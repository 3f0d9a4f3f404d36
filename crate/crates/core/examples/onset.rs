//! When does holding stock first become optimal? Compares the detected
//! onset of the buying frontier with the closed-form time, per resolution.
//!
//! ```text
//! cargo run --example onset -- [n_t] [n_theta...]
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
        match s.onset() {
            Some(o) => println!(
                "n_theta={:5}: onset {:.5} (exact {:.5}), oscillation amplitude {:.2e}",
                s.n_theta, o.t_detect, s.domain.t_hat0, o.amplitude
            ),
            None => println!("n_theta={:5}: no onset", s.n_theta),
        }
    }
    Ok(())
}
