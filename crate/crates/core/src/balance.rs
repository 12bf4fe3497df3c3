//! Balancing: replacing a statistic by its mean over the disagreement class
//! of the observed point, plus the closed forms that avoid the `2^delta`
//! enumeration for the alignment-strength family.

use crate::error::{Error, Result};
use crate::model::GraphPair;
use crate::numeric::KahanSum;
use crate::statistic::Statistic;
use crate::stats::{disagreement_vector, DisagreementVector, PointCounts, Ternary, STR_CONVENTION};

/// Largest class (`2^delta` members) that brute-force balancing enumerates.
pub const MAX_BRUTE_DELTA: usize = 25;

/// Largest `n` for exhaustive class sweeps (`4^n` points).
pub const MAX_SWEEP_N: usize = 8;

/// Absolute tolerance for class constancy.
pub const BALANCE_TOLERANCE: f64 = 1e-12;

pub(crate) fn ensure_enumerable_n(what: &'static str, n: usize) -> Result<()> {
    if n == 0 || n > MAX_SWEEP_N {
        return Err(Error::Capacity {
            what,
            n,
            limit: MAX_SWEEP_N,
            hint: "",
        });
    }
    Ok(())
}

/// Calls `f` on each of the `2^delta` members of class `h`. The starred
/// components run through `(x, y) = (1, 0)` and `(0, 1)` by a delta-bit counter.
pub fn for_each_class_member(h: &DisagreementVector, mut f: impl FnMut(&GraphPair)) {
    let mut point = h.representative();
    let stars: Vec<usize> = h
        .components()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t == Ternary::Star)
        .map(|(i, _)| i)
        .collect();
    for mask in 0u64..1 << stars.len() {
        for (bit, &i) in stars.iter().enumerate() {
            let flip = (mask >> bit) & 1 == 1;
            point.set(i, !flip, flip);
        }
        f(&point);
    }
}

/// Mean of `stat` over the disagreement class of `point`.
pub fn balance_brute<S: Statistic + ?Sized>(stat: &S, point: &GraphPair) -> Result<f64> {
    let h = disagreement_vector(point);
    if h.delta() > MAX_BRUTE_DELTA {
        return Err(Error::ClassTooLarge {
            delta: h.delta(),
            limit: MAX_BRUTE_DELTA,
        });
    }
    let mut sum = KahanSum::new();
    for_each_class_member(&h, |member| sum.add(stat.eval(member)));
    Ok(sum.value() / h.class_size())
}

/// Whether `stat` is constant on every class of the `n`-component sample space.
pub fn is_balanced<S: Statistic + ?Sized>(stat: &S, n: usize) -> Result<bool> {
    ensure_enumerable_n("is_balanced", n)?;
    for idx in 0..3u64.pow(n as u32) {
        let h = DisagreementVector::from_index(n, idx);
        let mut first = None;
        let mut constant = true;
        for_each_class_member(&h, |member| {
            let v = stat.eval(member);
            match first {
                None => first = Some(v),
                Some(f) => constant &= (v - f).abs() <= BALANCE_TOLERANCE,
            }
        });
        if !constant {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Balanced `dx * dy`, which equals `dxy^2 - delta / (4 n^2)`.
pub fn balanced_dxdy(point: &GraphPair) -> f64 {
    let c = PointCounts::of(point);
    let d = c.densities();
    let n = c.n as f64;
    d.dxy * d.dxy - c.delta as f64 / (4.0 * n * n)
}

fn quarter_correction(c: &PointCounts) -> f64 {
    let n = c.n as f64;
    c.delta as f64 / (4.0 * n * n)
}

/// Balanced numerator of alignment strength, `dcap - dxy^2 + delta/(4n^2)`.
pub fn balanced_str_numerator(point: &GraphPair) -> f64 {
    let c = PointCounts::of(point);
    let d = c.densities();
    d.dcap - d.dxy * d.dxy + quarter_correction(&c)
}

/// Balanced denominator of alignment strength, `dxy(1 - dxy) + delta/(4n^2)`.
pub fn balanced_str_denominator(point: &GraphPair) -> f64 {
    let c = PointCounts::of(point);
    let d = c.densities();
    d.dxy * (1.0 - d.dxy) + quarter_correction(&c)
}

/// Modified alignment strength: the balanced numerator over the balanced
/// denominator, with [`STR_CONVENTION`] at the degenerate points.
pub fn modified_alignment_strength(point: &GraphPair) -> f64 {
    let c = PointCounts::of(point);
    if c.is_degenerate() {
        return STR_CONVENTION;
    }
    let d = c.densities();
    let k = quarter_correction(&c);
    (d.dcap - d.dxy * d.dxy + k) / (d.dxy * (1.0 - d.dxy) + k)
}

/// The same quotient written around `dx * dy`:
/// `(dcap - dx dy + e) / (dxy - dx dy + e)` with `e = (delta/n^2 - (dx - dy)^2) / 4`.
pub fn modified_alignment_strength_product_form(point: &GraphPair) -> f64 {
    let c = PointCounts::of(point);
    if c.is_degenerate() {
        return STR_CONVENTION;
    }
    let d = c.densities();
    let n = c.n as f64;
    let e = (c.delta as f64 / (n * n) - (d.dx - d.dy).powi(2)) / 4.0;
    let prod = d.dx * d.dy;
    (d.dcap - prod + e) / (d.dxy - prod + e)
}

/// Balanced alignment strength in `O(delta)` operations.
///
/// Members of a class share `dcap` and `delta`; the one with `i` of its
/// starred components in `x` has `dx = dcap + i/n` and `dy = dcap + (delta - i)/n`,
/// and there are `C(delta, i)` of them.
pub fn balanced_alignment_strength(point: &GraphPair) -> f64 {
    let c = PointCounts::of(point);
    balanced_alignment_strength_from_counts(c.n, c.ones_both, c.delta)
}

pub fn balanced_alignment_strength_from_counts(n: usize, ones_both: usize, delta: usize) -> f64 {
    if delta == 0 && (ones_both == 0 || ones_both == n) {
        return STR_CONVENTION;
    }
    let nf = n as f64;
    let dcap = ones_both as f64 / nf;
    let dxy = (2 * ones_both + delta) as f64 / (2.0 * nf);

    // Weights C(delta, i) built by the ratio (delta - i)/(i + 1); the running
    // sums are rescaled together so nothing overflows for large delta.
    const RESCALE_AT: f64 = 1e250;
    let mut weight = 1.0f64;
    let mut total = 0.0f64;
    let mut acc = 0.0f64;
    for i in 0..=delta {
        let dx = (ones_both + i) as f64 / nf;
        let dy = (ones_both + delta - i) as f64 / nf;
        let prod = dx * dy;
        acc += weight * (dcap - prod) / (dxy - prod);
        total += weight;
        if i < delta {
            weight *= (delta - i) as f64 / (i + 1) as f64;
            if weight > RESCALE_AT {
                weight /= RESCALE_AT;
                total /= RESCALE_AT;
                acc /= RESCALE_AT;
            }
        }
    }
    acc / total
}

/// `dxy (1 - dxy) - (1/(2n)) (1 - 1/(2n)) delta`, unbiased for the variance of
/// the `p_i` when every `rho_i` is zero. May be negative.
pub fn sigma2_umvue(point: &GraphPair) -> f64 {
    let c = PointCounts::of(point);
    let d = c.densities();
    let half_inv = 1.0 / (2.0 * c.n as f64);
    d.dxy * (1.0 - d.dxy) - half_inv * (1.0 - half_inv) * c.delta as f64
}
