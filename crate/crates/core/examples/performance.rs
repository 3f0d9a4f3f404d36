//! Cost against accuracy for both backends, with the lower envelopes and the
//! tolerance decades at which each method is cheaper. Errors are measured
//! against the committed reference series.
//!
//! ```text
//! cargo run --example performance
//! ```

use polarinvest::harness::{crossover, perf_envelope, rmse, run_sweep, Config, Series};
use polarinvest::Backend;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let reference = Series::read_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/data/reference_v0.csv"))?;
    let mut configs = Vec::new();
    for n in [32, 64, 128] {
        for n_t in [200, 640, 1280] {
            configs.push(Config::baseline(4.0, Backend::Spectral, n, n_t));
        }
    }
    for n in [100, 200, 400, 800] {
        for n_t in [200, 640, 1280] {
            configs.push(Config::baseline(4.0, Backend::FiniteDifference, n, n_t));
        }
    }
    let mut records = Vec::new();
    for s in run_sweep(&configs) {
        let s = s?;
        records.push(s.record("rmse_v0", rmse(&s.v0, &reference)?));
    }
    for r in perf_envelope(&records) {
        println!(
            "envelope: {:9} n_theta={:4} n_t={:5} rmse={:.2e} {:.0} ms",
            r.method.to_string(), r.n_theta, r.n_t, r.metric_value, r.runtime_ms
        );
    }
    if let Some(c) = crossover(&records) {
        println!(
            "tolerance {:.0e}: fd cheaper = {}; tolerance {:.0e}: spectral cheaper = {}",
            c.loose_tolerance, c.fd_wins_loose, c.tight_tolerance, c.spectral_wins_tight
        );
    }
    Ok(())
}
