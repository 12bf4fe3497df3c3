//! Statistics evaluated at a sample point and functionals of the parameters.

use std::fmt;

use crate::model::{GraphPair, ModelParams};

/// Value every alignment-strength variant takes at the two degenerate points
/// (both vectors all zeros, or both all ones), where the defining quotient is 0/0.
pub const STR_CONVENTION: f64 = 0.0;

/// One entry of a disagreement vector. Ordered `Zero < Star < One`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ternary {
    Zero,
    Star,
    One,
}

impl Ternary {
    /// Base-3 digit used for lexicographic indexing.
    pub fn digit(self) -> u64 {
        match self {
            Ternary::Zero => 0,
            Ternary::Star => 1,
            Ternary::One => 2,
        }
    }

    pub fn from_digit(d: u64) -> Self {
        match d {
            0 => Ternary::Zero,
            1 => Ternary::Star,
            2 => Ternary::One,
            _ => panic!("ternary digit out of range: {d}"),
        }
    }
}

/// Componentwise summary `h` of a sample point: `One` where both entries are 1,
/// `Zero` where both are 0, `Star` where they differ.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DisagreementVector {
    h: Vec<Ternary>,
    delta: usize,
}

impl DisagreementVector {
    pub fn new(h: Vec<Ternary>) -> Self {
        let delta = h.iter().filter(|&&t| t == Ternary::Star).count();
        Self { h, delta }
    }

    /// Class number `index` among the `3^n` classes in lexicographic order,
    /// leftmost component most significant.
    pub fn from_index(n: usize, mut index: u64) -> Self {
        let mut h = vec![Ternary::Zero; n];
        for slot in h.iter_mut().rev() {
            *slot = Ternary::from_digit(index % 3);
            index /= 3;
        }
        Self::new(h)
    }

    pub fn index(&self) -> u64 {
        self.h.iter().fold(0, |acc, t| acc * 3 + t.digit())
    }

    pub fn components(&self) -> &[Ternary] {
        &self.h
    }

    pub fn n_components(&self) -> usize {
        self.h.len()
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    /// Number of sample points in the class, `2^delta`.
    pub fn class_size(&self) -> f64 {
        (self.delta as f64).exp2()
    }

    /// The member of the class whose starred components all read `x = 1, y = 0`.
    pub fn representative(&self) -> GraphPair {
        let x: Vec<u8> = self.h.iter().map(|&t| (t != Ternary::Zero) as u8).collect();
        let y: Vec<u8> = self.h.iter().map(|&t| (t == Ternary::One) as u8).collect();
        GraphPair::from_bits(&x, &y)
    }
}

impl fmt::Display for DisagreementVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.h {
            let c = match t {
                Ternary::Zero => '0',
                Ternary::Star => '*',
                Ternary::One => '1',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

pub fn disagreement_vector(point: &GraphPair) -> DisagreementVector {
    let h = point
        .x()
        .iter()
        .zip(point.y())
        .map(|(&x, &y)| match (x, y) {
            (true, true) => Ternary::One,
            (false, false) => Ternary::Zero,
            _ => Ternary::Star,
        })
        .collect();
    DisagreementVector::new(h)
}

/// Integer tallies of a sample point; every statistic here is a function of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointCounts {
    pub n: usize,
    pub ones_x: usize,
    pub ones_y: usize,
    pub ones_both: usize,
    pub delta: usize,
}

impl PointCounts {
    pub fn of(point: &GraphPair) -> Self {
        let mut c = PointCounts {
            n: point.n_components(),
            ones_x: 0,
            ones_y: 0,
            ones_both: 0,
            delta: 0,
        };
        for (&x, &y) in point.x().iter().zip(point.y()) {
            c.ones_x += x as usize;
            c.ones_y += y as usize;
            c.ones_both += (x && y) as usize;
            c.delta += (x != y) as usize;
        }
        c
    }

    pub fn is_degenerate(&self) -> bool {
        (self.ones_x == 0 && self.ones_y == 0) || (self.ones_x == self.n && self.ones_y == self.n)
    }

    pub fn densities(&self) -> Densities {
        let n = self.n as f64;
        let dx = self.ones_x as f64 / n;
        let dy = self.ones_y as f64 / n;
        let dcap = self.ones_both as f64 / n;
        Densities {
            dx,
            dy,
            dxy: (dx + dy) / 2.0,
            dcap,
            dcup: dx + dy - dcap,
        }
    }
}

/// Empirical densities of a sample point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Densities {
    /// Fraction of ones in `x`.
    pub dx: f64,
    /// Fraction of ones in `y`.
    pub dy: f64,
    /// Combined density `(dx + dy) / 2`.
    pub dxy: f64,
    /// Fraction of components with `x_i = y_i = 1`.
    pub dcap: f64,
    /// Fraction of components with `x_i = 1` or `y_i = 1`.
    pub dcup: f64,
}

pub fn densities(point: &GraphPair) -> Densities {
    PointCounts::of(point).densities()
}

/// Number of components where `x` and `y` disagree.
pub fn delta_stat(point: &GraphPair) -> usize {
    point.x().iter().zip(point.y()).filter(|(x, y)| x != y).count()
}

/// Alignment strength `1 - (delta/n) / (dx(1-dy) + (1-dx)dy)`, with
/// [`STR_CONVENTION`] at the degenerate points.
pub fn alignment_strength(point: &GraphPair) -> f64 {
    alignment_strength_with_convention(point, STR_CONVENTION)
}

pub fn alignment_strength_with_convention(point: &GraphPair, convention: f64) -> f64 {
    alignment_strength_from_counts(&PointCounts::of(point), convention)
}

pub(crate) fn alignment_strength_from_counts(c: &PointCounts, convention: f64) -> f64 {
    if c.is_degenerate() {
        return convention;
    }
    let d = c.densities();
    let expected = d.dx * (1.0 - d.dy) + (1.0 - d.dx) * d.dy;
    1.0 - (c.delta as f64 / c.n as f64) / expected
}

/// The covariance-ratio form `(dcap - dx dy) / (dxy - dx dy)`; `None` at the
/// degenerate points where it is 0/0.
pub fn alignment_strength_ratio_form(point: &GraphPair) -> Option<f64> {
    let c = PointCounts::of(point);
    if c.is_degenerate() {
        return None;
    }
    let d = c.densities();
    let prod = d.dx * d.dy;
    Some((d.dcap - prod) / (d.dxy - prod))
}

/// Functionals of the parameter tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamFunctionals {
    /// Mean of the `p_i`.
    pub mu: f64,
    /// Population variance of the `p_i`.
    pub sigma2: f64,
    /// Heterogeneity correlation `sigma2 / (mu (1 - mu))`.
    pub rho_h: f64,
    /// Total correlation.
    pub rho_t: f64,
    /// `E(delta) = 2 sum (1 - rho_i) p_i (1 - p_i)`.
    pub expected_delta: f64,
}

/// Computes the parameter functionals. When `mu` is 0 or 1 the two
/// correlations are reported as 0.
pub fn param_functionals(params: &ModelParams) -> ParamFunctionals {
    let n = params.n_components() as f64;
    let p = params.p();
    let mu = p.iter().sum::<f64>() / n;
    let sigma2 = p.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / n;
    let disagree: f64 = p
        .iter()
        .zip(params.rho())
        .map(|(&pi, &ri)| (1.0 - ri) * pi * (1.0 - pi))
        .sum();
    let spread = mu * (1.0 - mu);
    let (rho_h, rho_t) = if spread > 0.0 {
        (sigma2 / spread, 1.0 - disagree / (n * spread))
    } else {
        (0.0, 0.0)
    };
    ParamFunctionals {
        mu,
        sigma2,
        rho_h,
        rho_t,
        expected_delta: 2.0 * disagree,
    }
}
