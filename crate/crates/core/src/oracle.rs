//! Exact moments by enumerating the sample space.
//!
//! Enumeration runs class by class: the `2^delta` points of a class share one
//! probability, so a balanced statistic needs a single evaluation per class
//! and any other statistic is evaluated on every member.

use serde::{Deserialize, Serialize};

use crate::balance::{ensure_enumerable_n, for_each_class_member};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::KahanSum;
use crate::statistic::{Builtin, Statistic};
use crate::stats::{param_functionals, DisagreementVector, Ternary, STR_CONVENTION};

/// Largest `n` for exact moments (`4^n` points).
pub const MAX_EXACT_N: usize = 10;

/// Largest `n` for the class probability table (`3^n` entries).
pub const MAX_CLASS_TABLE_N: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub mean: f64,
    /// Mean-centred, clamped at zero.
    pub variance: f64,
    pub second_moment: f64,
}

fn ensure_exact_n(n: usize) -> Result<()> {
    if n > MAX_EXACT_N {
        return Err(Error::Capacity {
            what: "exact enumeration",
            n,
            limit: MAX_EXACT_N,
            hint: "; use Monte Carlo sampling for larger n",
        });
    }
    Ok(())
}

/// Probability of any single point of class `h`.
pub fn class_point_probability(params: &ModelParams, h: &DisagreementVector) -> f64 {
    h.components()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let q = params.cell_probs(i);
            match t {
                Ternary::One => q.q1,
                Ternary::Zero => q.q0,
                Ternary::Star => q.qstar,
            }
        })
        .product()
}

/// `(probability, value)` for every point, or for every class when the
/// statistic is balanced (probability then covers the whole class).
fn weighted_values<S: Statistic + ?Sized>(stat: &S, params: &ModelParams) -> Vec<(f64, f64)> {
    let n = params.n_components();
    let classes = 3u64.pow(n as u32);
    let balanced = stat.is_balanced_hint();
    let mut out = Vec::with_capacity(if balanced { classes as usize } else { 1 << (2 * n) });
    for idx in 0..classes {
        let h = DisagreementVector::from_index(n, idx);
        let prob = class_point_probability(params, &h);
        if balanced {
            out.push((prob * h.class_size(), stat.eval(&h.representative())));
        } else {
            for_each_class_member(&h, |member| out.push((prob, stat.eval(member))));
        }
    }
    out
}

pub fn exact_moments<S: Statistic + ?Sized>(stat: &S, params: &ModelParams) -> Result<ExactMoments> {
    ensure_exact_n(params.n_components())?;
    let values = weighted_values(stat, params);
    let mean: KahanSum = values.iter().map(|&(w, v)| w * v).collect();
    let mean = mean.value();
    let second: KahanSum = values.iter().map(|&(w, v)| w * v * v).collect();
    let centred: KahanSum = values.iter().map(|&(w, v)| w * (v - mean) * (v - mean)).collect();
    Ok(ExactMoments {
        mean,
        variance: centred.value().max(0.0),
        second_moment: second.value(),
    })
}

/// `E[(stat - target)^2]`.
pub fn mse_against<S: Statistic + ?Sized>(stat: &S, target: f64, params: &ModelParams) -> Result<f64> {
    let m = exact_moments(stat, params)?;
    Ok(m.variance + (m.mean - target).powi(2))
}

/// Class probabilities `P(H = h)` in lexicographic class order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilityTable {
    n: usize,
    probs: Vec<f64>,
}

impl ClassProbabilityTable {
    pub fn n_components(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, h: &DisagreementVector) -> f64 {
        self.probs[h.index() as usize]
    }
}

/// Builds the table one component at a time: every entry splits into the
/// three cells `(q0, 2 qstar, q1)` of the next component.
pub fn class_probabilities(params: &ModelParams) -> Result<ClassProbabilityTable> {
    let n = params.n_components();
    if n > MAX_CLASS_TABLE_N {
        return Err(Error::Capacity {
            what: "class probability table",
            n,
            limit: MAX_CLASS_TABLE_N,
            hint: "",
        });
    }
    let mut probs = vec![1.0];
    for i in 0..n {
        let q = params.cell_probs(i);
        let cells = [q.q0, 2.0 * q.qstar, q.q1];
        probs = probs
            .iter()
            .flat_map(|&w| cells.iter().map(move |&c| w * c))
            .collect();
    }
    Ok(ClassProbabilityTable { n, probs })
}

/// Per-class sums of `stat` in lexicographic class order.
pub fn class_sum_vector<S: Statistic + ?Sized>(stat: &S, n: usize) -> Result<Vec<f64>> {
    ensure_enumerable_n("class_sum_vector", n)?;
    Ok((0..3u64.pow(n as u32))
        .map(|idx| {
            let h = DisagreementVector::from_index(n, idx);
            let mut sum = KahanSum::new();
            for_each_class_member(&h, |member| sum.add(stat.eval(member)));
            sum.value()
        })
        .collect())
}

/// Exact summary of the alignment-strength family at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub mu: f64,
    pub sigma2: f64,
    pub rho_h: f64,
    pub rho_t: f64,
    pub e_delta: f64,
    pub e_str: f64,
    pub e_strbar: f64,
    pub e_strprime: f64,
    pub var_str: f64,
    pub var_strbar: f64,
    pub var_strprime: f64,
    pub mse_str_vs_rho_t: f64,
    pub mse_strbar_vs_rho_t: f64,
    pub mse_strprime_vs_rho_t: f64,
    /// Probability of the two degenerate points, where every variant takes
    /// the convention value.
    pub degenerate_probability: f64,
    pub convention_value: f64,
}

pub fn alignment_report(params: &ModelParams) -> Result<AlignmentReport> {
    let f = param_functionals(params);
    let e_delta = exact_moments(&Builtin::Delta, params)?.mean;
    let s = exact_moments(&Builtin::AlignmentStrength, params)?;
    let sb = exact_moments(&Builtin::BalancedAlignmentStrength, params)?;
    let sp = exact_moments(&Builtin::ModifiedAlignmentStrength, params)?;
    let mse = |m: &ExactMoments| m.variance + (m.mean - f.rho_t).powi(2);
    let n = params.n_components();
    let all_zero = (0..n).map(|i| params.cell_probs(i).q0).product::<f64>();
    let all_one = (0..n).map(|i| params.cell_probs(i).q1).product::<f64>();
    Ok(AlignmentReport {
        mu: f.mu,
        sigma2: f.sigma2,
        rho_h: f.rho_h,
        rho_t: f.rho_t,
        e_delta,
        e_str: s.mean,
        e_strbar: sb.mean,
        e_strprime: sp.mean,
        var_str: s.variance,
        var_strbar: sb.variance,
        var_strprime: sp.variance,
        mse_str_vs_rho_t: mse(&s),
        mse_strbar_vs_rho_t: mse(&sb),
        mse_strprime_vs_rho_t: mse(&sp),
        degenerate_probability: all_zero + all_one,
        convention_value: STR_CONVENTION,
    })
}
