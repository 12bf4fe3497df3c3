//! Self-check suite: algebraic identities, closed forms against brute-force
//! balancing, the Kronecker machinery and the non-existence arguments.
//!
//! The closed forms under test are injectable through [`Candidates`] so a
//! deliberately broken implementation can be shown to fail.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::balance::{balance_brute, modified_alignment_strength_product_form};
use crate::error::{Error, Result};
use crate::experiment::SPEC_VERSION;
use crate::linsys::{
    check_no_unbiased_estimator_rho_e, check_no_unbiased_estimator_rho_h, class_probability_expansion,
    polynomial_fit_residual, random_probes, sigma2_of, verify_completeness, RHO_H_RESIDUAL_THRESHOLD,
};
use crate::model::{all_points, GraphPair, ModelParams};
use crate::oracle::{class_point_probability, exact_moments};
use crate::statistic::{Builtin, Statistic};
use crate::stats::{alignment_strength, alignment_strength_ratio_form, DisagreementVector, PointCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyLevel {
    Fast,
    Full,
}

impl VerifyLevel {
    fn max_n(self) -> usize {
        match self {
            Self::Fast => 5,
            Self::Full => 6,
        }
    }
}

impl fmt::Display for VerifyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fast => "fast",
            Self::Full => "full",
        })
    }
}

impl FromStr for VerifyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Self::Fast),
            "full" => Ok(Self::Full),
            _ => Err(Error::domain(format!("unknown level {s:?}; expected fast or full"))),
        }
    }
}

/// Implementations checked against brute-force balancing.
#[derive(Clone)]
pub struct Candidates {
    pub strbar: Arc<dyn Statistic>,
    pub strprime: Arc<dyn Statistic>,
    pub dxdy_bar: Arc<dyn Statistic>,
}

impl Default for Candidates {
    fn default() -> Self {
        Self {
            strbar: Arc::new(Builtin::BalancedAlignmentStrength),
            strprime: Arc::new(Builtin::ModifiedAlignmentStrength),
            dxdy_bar: Arc::new(Builtin::BalancedProductDensity),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub spec_version: String,
    pub level: VerifyLevel,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Largest deviation seen, and where.
struct Worst {
    err: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self {
            err: 0.0,
            at: String::new(),
        }
    }

    fn update(&mut self, err: f64, at: impl FnOnce() -> String) {
        // NaN counts as a failure.
        if err.is_nan() || err > self.err {
            self.err = if err.is_nan() { f64::INFINITY } else { err };
            self.at = at();
        }
    }

    fn verdict(&self, tol: f64) -> (bool, String) {
        let detail = if self.at.is_empty() {
            format!("max error {:.3e}", self.err)
        } else {
            format!("max error {:.3e} at {}", self.err, self.at)
        };
        (self.err <= tol, detail)
    }
}

fn label(p: &GraphPair) -> String {
    format!("x={} y={}", p.x_string(), p.y_string())
}

fn exhaustive(max_n: usize, tol: f64, mut f: impl FnMut(&GraphPair) -> f64) -> (bool, String) {
    let mut worst = Worst::new();
    for n in 1..=max_n {
        for p in all_points(n) {
            worst.update(f(&p), || label(&p));
        }
    }
    worst.verdict(tol)
}

fn brute(stat: Builtin, p: &GraphPair) -> f64 {
    balance_brute(&stat, p).expect("small class")
}

fn check_identities(max_n: usize) -> (bool, String) {
    exhaustive(max_n, 1e-12, |p| {
        let c = PointCounts::of(p);
        let d = c.densities();
        let n = c.n as f64;
        let delta = c.delta as f64;
        [
            (d.dx + d.dy) - (d.dcap + d.dcup),
            d.dxy - (d.dcap + d.dcup) / 2.0,
            n * d.dcap + delta - n * d.dcup,
            d.dcap - (d.dxy - delta / (2.0 * n)),
            d.dcup - (d.dxy + delta / (2.0 * n)),
        ]
        .iter()
        .fold(0.0, |a, e| a.max(e.abs()))
    })
}

fn check_str_forms(max_n: usize) -> (bool, String) {
    exhaustive(max_n, 1e-12, |p| match alignment_strength_ratio_form(p) {
        Some(r) => (r - alignment_strength(p)).abs(),
        None => 0.0,
    })
}

fn check_strbar(c: &Candidates, max_n: usize) -> (bool, String) {
    exhaustive(max_n, 1e-10, |p| (c.strbar.eval(p) - brute(Builtin::AlignmentStrength, p)).abs())
}

fn check_strprime(c: &Candidates, max_n: usize) -> (bool, String) {
    exhaustive(max_n, 1e-10, |p| {
        let candidate = c.strprime.eval(p);
        let reference = if PointCounts::of(p).is_degenerate() {
            crate::stats::STR_CONVENTION
        } else {
            brute(Builtin::StrNumerator, p) / brute(Builtin::StrDenominator, p)
        };
        (candidate - reference)
            .abs()
            .max((candidate - modified_alignment_strength_product_form(p)).abs())
    })
}

fn check_dxdy_bar(c: &Candidates, max_n: usize) -> (bool, String) {
    exhaustive(max_n, 1e-10, |p| (c.dxdy_bar.eval(p) - brute(Builtin::ProductDensity, p)).abs())
}

fn check_kronecker_expansion(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = Worst::new();
    for _ in 0..50 {
        let n = rng.gen_range(1..=4);
        let h = DisagreementVector::from_index(n, rng.gen_range(0..3u64.pow(n as u32)));
        let p: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let params = ModelParams::new(p.clone(), vec![0.0; n]).expect("p in [0, 1)");
        let err = (class_probability_expansion(&h, &p) - class_point_probability(&params, &h)).abs();
        worst.update(err, || format!("h={h} p={p:?}"));
    }
    worst.verdict(1e-12)
}

fn check_completeness(max_n: usize) -> (bool, String) {
    for n in 1..=max_n {
        match verify_completeness(n) {
            Ok(true) => {}
            Ok(false) => return (false, format!("nontrivial nullspace at n={n}")),
            Err(e) => return (false, e.to_string()),
        }
    }
    (true, format!("trivial nullspace for n=1..={max_n}"))
}

fn check_rho_h() -> (bool, String) {
    let axes = [0.3, 0.5, 0.7];
    let probes = random_probes(2, 50, 0.05, 0.95, 13);
    let ev = match check_no_unbiased_estimator_rho_h(2, axes, &probes) {
        Ok(ev) => ev,
        Err(e) => return (false, e.to_string()),
    };
    let control = polynomial_fit_residual(2, axes, &probes, sigma2_of).unwrap_or(f64::INFINITY);
    (
        ev.conclusive && ev.residual > RHO_H_RESIDUAL_THRESHOLD && control <= 1e-12,
        format!(
            "residual {:.4e} (threshold {RHO_H_RESIDUAL_THRESHOLD:e}); sigma2 control {control:.3e}",
            ev.residual
        ),
    )
}

fn check_rho_e() -> (bool, String) {
    for n in 1..=5 {
        match check_no_unbiased_estimator_rho_e(n) {
            Ok(true) => {}
            Ok(false) => return (false, format!("argument failed at n={n}")),
            Err(e) => return (false, e.to_string()),
        }
    }
    (true, "n=1..=5".into())
}

fn check_sigma2_umvue(rng: &mut ChaCha8Rng, max_n: usize) -> (bool, String) {
    let mut worst = Worst::new();
    for _ in 0..20 {
        let n = rng.gen_range(1..=max_n);
        let p: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let params = ModelParams::new(p.clone(), vec![0.0; n]).expect("p in [0, 1)");
        let mean = exact_moments(&Builtin::Sigma2Umvue, &params).map_or(f64::INFINITY, |m| m.mean);
        worst.update((mean - sigma2_of(&p)).abs(), || format!("p={p:?}"));
    }
    worst.verdict(1e-12)
}

/// Runs the suite on the crate's own implementations.
pub fn run_verify(level: VerifyLevel) -> VerifyReport {
    run_verify_with(level, &Candidates::default())
}

pub fn run_verify_with(level: VerifyLevel, candidates: &Candidates) -> VerifyReport {
    let max_n = level.max_n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checks = Vec::new();
    let mut run = |name: &str, f: &mut dyn FnMut() -> (bool, String)| {
        let start = Instant::now();
        let (passed, detail) = f();
        checks.push(CheckResult {
            name: name.to_owned(),
            passed,
            detail,
            seconds: start.elapsed().as_secs_f64(),
        });
    };
    run("density identities", &mut || check_identities(max_n));
    run("alignment strength forms agree", &mut || check_str_forms(max_n));
    run("strbar matches brute-force balancing", &mut || check_strbar(candidates, max_n));
    run("strprime matches balanced quotient", &mut || check_strprime(candidates, max_n));
    run("balanced dx*dy closed form", &mut || check_dxdy_bar(candidates, max_n));
    run("class probability expansion", &mut || check_kronecker_expansion(&mut rng));
    run("completeness", &mut || check_completeness(6));
    run("no unbiased estimator of rho_H", &mut check_rho_h);
    run("no unbiased estimator of rho_E", &mut check_rho_e);
    run("sigma2 estimator unbiased", &mut || check_sigma2_umvue(&mut rng, max_n));
    if level == VerifyLevel::Full {
        run("strbar brute-force sweep n=8", &mut || {
            let mut worst = Worst::new();
            for p in all_points(8) {
                worst.update((candidates.strbar.eval(&p) - brute(Builtin::AlignmentStrength, &p)).abs(), || {
                    label(&p)
                });
            }
            worst.verdict(1e-10)
        });
    }
    VerifyReport {
        spec_version: SPEC_VERSION.to_owned(),
        level,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistic::FnStatistic;
    use crate::stats::STR_CONVENTION;

    #[test]
    fn fast_suite_passes() {
        let report = run_verify(VerifyLevel::Fast);
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    // The linear-time sum with every binomial weight shifted by one index.
    fn shifted_weight_strbar(p: &GraphPair) -> f64 {
        let c = PointCounts::of(p);
        if c.is_degenerate() {
            return STR_CONVENTION;
        }
        let n = c.n as f64;
        let dcap = c.ones_both as f64 / n;
        let dxy = (2 * c.ones_both + c.delta) as f64 / (2.0 * n);
        let binom = |k: usize, i: usize| -> f64 {
            if i > k {
                return 0.0;
            }
            (0..i).fold(1.0, |acc, j| acc * (k - j) as f64 / (j + 1) as f64)
        };
        let (mut acc, mut total) = (0.0, 0.0);
        for i in 0..=c.delta {
            let w = binom(c.delta, i + 1).max(if i == c.delta { 1.0 } else { 0.0 });
            let dx = (c.ones_both + i) as f64 / n;
            let dy = (c.ones_both + c.delta - i) as f64 / n;
            acc += w * (dcap - dx * dy) / (dxy - dx * dy);
            total += w;
        }
        acc / total
    }

    #[test]
    fn mutated_strbar_is_caught() {
        let candidates = Candidates {
            strbar: Arc::new(FnStatistic::new("mutant", shifted_weight_strbar)),
            ..Candidates::default()
        };
        let report = run_verify_with(VerifyLevel::Fast, &candidates);
        let failed: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, ["strbar matches brute-force balancing"]);
    }

    #[test]
    fn level_parsing() {
        assert_eq!("full".parse::<VerifyLevel>().unwrap(), VerifyLevel::Full);
        assert!("slow".parse::<VerifyLevel>().is_err());
    }
}
