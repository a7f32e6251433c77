//! Fast self-checks against independent reference computations.

use herding_core::analysis::calibration_coverage;
use herding_core::meanfield::{balance_residual, solve_stationary, stationary_oracle, SolverOptions};
use herding_core::voting::{decision_probabilities, p_frg_exact, p_frg_oracle, ConsensusParameter};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// `value <= tolerance` passes when set, `value >= tolerance` otherwise.
    pub upper_bound: bool,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, upper_bound: true, passed: value <= tolerance }
    }

    fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, upper_bound: false, passed: value >= tolerance }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidateOptions {
    pub perturb_p_frg: f64,
}

pub const X_GRID: [f64; 7] = [0.34, 0.35, 0.37, 0.41, 0.45, 0.47, 0.499];

fn x(v: f64) -> ConsensusParameter {
    ConsensusParameter::new(v).expect("grid value in range")
}

pub fn run_checks(opts: &ValidateOptions) -> Vec<Check> {
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for &xv in &X_GRID {
        for s in 1..=12 {
            let exact = p_frg_exact(s, x(xv)) + opts.perturb_p_frg;
            let brute = p_frg_oracle(s, x(xv)).expect("small size");
            worst = worst.max((exact - brute).abs());
        }
    }
    checks.push(Check::at_most("fragmentation probability vs enumeration (s <= 12)", worst, 1e-12));

    let mut worst = 0.0f64;
    for &xv in &X_GRID {
        for s in (1..=2000).step_by(7) {
            let p = decision_probabilities(s, x(xv));
            worst = worst.max((p.fragment + p.buy + p.sell + p.merge - 1.0).abs());
        }
    }
    checks.push(Check::at_most("decision probabilities sum to one (s <= 2000)", worst, 1e-12));

    let mut worst = 0.0f64;
    for n in 2..=6 {
        for xv in [0.37, 0.41, 0.47] {
            let exact = stationary_oracle(n, x(xv)).expect("small population");
            match solve_stationary(n, x(xv), SolverOptions::default()) {
                Ok((d, _)) => {
                    worst = (1..=n).map(|s| (d.get(s) - exact.get(s)).abs()).fold(worst, f64::max);
                }
                Err(_) => worst = f64::INFINITY,
            }
        }
    }
    checks.push(Check::at_most("mean-field vs exact partition chain (N <= 6)", worst, 1e-6));

    let residual = match solve_stationary(100, x(0.41), SolverOptions::default()) {
        Ok((d, _)) => balance_residual(&d, x(0.41)).into_iter().map(f64::abs).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    };
    checks.push(Check::at_most("mean-field balance residual (N = 100)", residual, 1e-10));

    for (i, alpha) in [1.2, 1.5, 2.0, 2.5].into_iter().enumerate() {
        let coverage = calibration_coverage(alpha, 1000, 1000, 100 + i as u64).unwrap_or(0.0);
        checks.push(Check::at_least(format!("tail estimator 3-SE coverage, alpha = {alpha}"), coverage, 0.95));
    }
    checks
}
