//! The two discretizations of the same problem agree, and the closed-form
//! facts about the baseline market show up in both.

use approx::assert_abs_diff_eq;
use polarinvest::harness::{rmse, Config, PathSummary};
use polarinvest::{critical_quantities, Backend, ModelParams};

fn summary(method: Backend, n: usize, n_t: usize) -> PathSummary {
    PathSummary::from_path(&Config::baseline(4.0, method, n, n_t).solve().unwrap()).unwrap()
}

#[test]
fn spectral_and_finite_differences_agree() {
    let spectral = summary(Backend::Spectral, 96, 1000);
    let fd = summary(Backend::FiniteDifference, 1200, 1000);
    assert!(rmse(&spectral.v0, &fd.v0).unwrap() < 2e-4);
    let (br_s, sr_s) = spectral.frontiers_at(0.0);
    let (br_f, sr_f) = fd.frontiers_at(0.0);
    assert_abs_diff_eq!(br_s, br_f, epsilon = 5e-3);
    assert_abs_diff_eq!(sr_s, sr_f, epsilon = 5e-3);
}

#[test]
fn terminal_slice_and_buy_region_values() {
    let p = ModelParams::baseline(4.0);
    let dom = critical_quantities(&p);
    let s = summary(Backend::Spectral, 64, 400);
    // At maturity the all-stock position is worth its liquidation value.
    assert_abs_diff_eq!(s.v0.v[0], 1.0 / (1.0 - p.mu), epsilon = 1e-12);
    assert_abs_diff_eq!(s.sr[0], dom.sr_terminal, epsilon = 1e-3);
    // Once π/2 lies in the buying region, v(0, t) = 1 / (1 + λ).
    assert_abs_diff_eq!(*s.v0.v.last().unwrap(), 1.0 / (1.0 + p.lambda), epsilon = 1e-9);
}

#[test]
fn one_step_solve_matches_the_finite_difference_oracle() {
    // A single Crank–Nicolson step over the whole horizon is far from the
    // continuous solution, but both discretizations of that step agree.
    let spectral = summary(Backend::Spectral, 64, 1);
    let fd = summary(Backend::FiniteDifference, 2000, 1);
    assert_eq!(spectral.t.len(), 2);
    assert_abs_diff_eq!(spectral.br[1], fd.br[1], epsilon = 1e-2);
    assert_abs_diff_eq!(spectral.sr[1], fd.sr[1], epsilon = 1e-2);
    assert_abs_diff_eq!(spectral.v0.v[1], fd.v0.v[1], epsilon = 1e-6);
}

#[test]
fn lagged_selling_obstacle_misplaces_the_first_frontier() {
    let mut cfg = Config::baseline(4.0, Backend::FiniteDifference, 2000, 400);
    cfg.consistent_time = false;
    let lagged = cfg.solve().map(|p| p.slices[1].sr);
    let consistent = summary(Backend::FiniteDifference, 2000, 400).sr[1];
    let dom = critical_quantities(&ModelParams::baseline(4.0));
    assert_abs_diff_eq!(consistent, dom.sr_terminal, epsilon = 5e-3);
    // The verbatim scheme either fails outright or lands far below.
    if let Ok(sr) = lagged {
        assert!(sr < dom.sr_terminal - 0.3, "lagged first frontier {sr}");
    }
}
