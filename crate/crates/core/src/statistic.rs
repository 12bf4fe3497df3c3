//! Statistics as values: the [`Statistic`] trait, the named statistics used
//! throughout the crate, and closure-preserving combinators.

use std::str::FromStr;
use std::sync::Arc;

use crate::balance::{
    balance_brute, balanced_alignment_strength, balanced_dxdy, modified_alignment_strength,
    sigma2_umvue,
};
use crate::error::{Error, Result};
use crate::model::GraphPair;
use crate::stats::{alignment_strength, DisagreementVector, PointCounts};

/// A real-valued function on the sample space.
pub trait Statistic: Send + Sync {
    fn name(&self) -> String;

    fn eval(&self, point: &GraphPair) -> f64;

    /// `true` only when the statistic is known to be constant on every
    /// disagreement class. Exact enumeration uses this to evaluate one
    /// representative per class.
    fn is_balanced_hint(&self) -> bool {
        false
    }
}

impl<S: Statistic + ?Sized> Statistic for &S {
    fn name(&self) -> String {
        (**self).name()
    }
    fn eval(&self, point: &GraphPair) -> f64 {
        (**self).eval(point)
    }
    fn is_balanced_hint(&self) -> bool {
        (**self).is_balanced_hint()
    }
}

impl<S: Statistic + ?Sized> Statistic for Box<S> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn eval(&self, point: &GraphPair) -> f64 {
        (**self).eval(point)
    }
    fn is_balanced_hint(&self) -> bool {
        (**self).is_balanced_hint()
    }
}

impl<S: Statistic + ?Sized> Statistic for Arc<S> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn eval(&self, point: &GraphPair) -> f64 {
        (**self).eval(point)
    }
    fn is_balanced_hint(&self) -> bool {
        (**self).is_balanced_hint()
    }
}

/// Wraps a closure as a statistic.
pub struct FnStatistic<F> {
    name: String,
    f: F,
    balanced: bool,
}

impl<F> FnStatistic<F>
where
    F: Fn(&GraphPair) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, f: F) -> Self {
        Self {
            name: name.into(),
            f,
            balanced: false,
        }
    }

    /// Marks the closure as class-constant. Only use this when it is.
    pub fn balanced(mut self) -> Self {
        self.balanced = true;
        self
    }
}

impl<F> Statistic for FnStatistic<F>
where
    F: Fn(&GraphPair) -> f64 + Send + Sync,
{
    fn name(&self) -> String {
        self.name.clone()
    }
    fn eval(&self, point: &GraphPair) -> f64 {
        (self.f)(point)
    }
    fn is_balanced_hint(&self) -> bool {
        self.balanced
    }
}

/// The named statistics of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// Number of disagreeing components.
    Delta,
    DensityX,
    DensityY,
    /// `(dx + dy) / 2`.
    CombinedDensity,
    IntersectionDensity,
    UnionDensity,
    /// `dx * dy`.
    ProductDensity,
    /// `dx (1 - dy) + (1 - dx) dy`, the denominator of alignment strength.
    CrossDisagreement,
    /// `dcap - dx dy`.
    StrNumerator,
    /// `dxy - dx dy`.
    StrDenominator,
    AlignmentStrength,
    BalancedAlignmentStrength,
    ModifiedAlignmentStrength,
    /// Closed form of the balanced `dx * dy`.
    BalancedProductDensity,
    Sigma2Umvue,
}

impl Builtin {
    pub const ALL: [Builtin; 15] = [
        Builtin::Delta,
        Builtin::DensityX,
        Builtin::DensityY,
        Builtin::CombinedDensity,
        Builtin::IntersectionDensity,
        Builtin::UnionDensity,
        Builtin::ProductDensity,
        Builtin::CrossDisagreement,
        Builtin::StrNumerator,
        Builtin::StrDenominator,
        Builtin::AlignmentStrength,
        Builtin::BalancedAlignmentStrength,
        Builtin::ModifiedAlignmentStrength,
        Builtin::BalancedProductDensity,
        Builtin::Sigma2Umvue,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Builtin::Delta => "delta",
            Builtin::DensityX => "dx",
            Builtin::DensityY => "dy",
            Builtin::CombinedDensity => "dxy",
            Builtin::IntersectionDensity => "dcap",
            Builtin::UnionDensity => "dcup",
            Builtin::ProductDensity => "dxdy",
            Builtin::CrossDisagreement => "cross",
            Builtin::StrNumerator => "str_num",
            Builtin::StrDenominator => "str_den",
            Builtin::AlignmentStrength => "str",
            Builtin::BalancedAlignmentStrength => "strbar",
            Builtin::ModifiedAlignmentStrength => "strprime",
            Builtin::BalancedProductDensity => "dxdy_bar",
            Builtin::Sigma2Umvue => "sigma2_umvue",
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Builtin::ALL.iter().map(|b| b.as_str()).collect();
                Error::domain(format!("unknown statistic {s:?}; expected one of {names:?}"))
            })
    }
}

impl Statistic for Builtin {
    fn name(&self) -> String {
        self.as_str().to_owned()
    }

    fn eval(&self, point: &GraphPair) -> f64 {
        let c = PointCounts::of(point);
        let d = c.densities();
        match self {
            Builtin::Delta => c.delta as f64,
            Builtin::DensityX => d.dx,
            Builtin::DensityY => d.dy,
            Builtin::CombinedDensity => d.dxy,
            Builtin::IntersectionDensity => d.dcap,
            Builtin::UnionDensity => d.dcup,
            Builtin::ProductDensity => d.dx * d.dy,
            Builtin::CrossDisagreement => d.dx * (1.0 - d.dy) + (1.0 - d.dx) * d.dy,
            Builtin::StrNumerator => d.dcap - d.dx * d.dy,
            Builtin::StrDenominator => d.dxy - d.dx * d.dy,
            Builtin::AlignmentStrength => alignment_strength(point),
            Builtin::BalancedAlignmentStrength => balanced_alignment_strength(point),
            Builtin::ModifiedAlignmentStrength => modified_alignment_strength(point),
            Builtin::BalancedProductDensity => balanced_dxdy(point),
            Builtin::Sigma2Umvue => sigma2_umvue(point),
        }
    }

    fn is_balanced_hint(&self) -> bool {
        matches!(
            self,
            Builtin::Delta
                | Builtin::CombinedDensity
                | Builtin::IntersectionDensity
                | Builtin::UnionDensity
                | Builtin::BalancedAlignmentStrength
                | Builtin::ModifiedAlignmentStrength
                | Builtin::BalancedProductDensity
                | Builtin::Sigma2Umvue
        )
    }
}

/// A constant statistic.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl Statistic for Constant {
    fn name(&self) -> String {
        format!("const({})", self.0)
    }
    fn eval(&self, _point: &GraphPair) -> f64 {
        self.0
    }
    fn is_balanced_hint(&self) -> bool {
        true
    }
}

/// The balanced variant of a statistic, computed by brute-force class averaging.
///
/// Evaluation panics if a point's class is too large to enumerate; see
/// [`balance_brute`].
pub struct Balanced<S>(pub S);

impl<S: Statistic> Statistic for Balanced<S> {
    fn name(&self) -> String {
        format!("bal({})", self.0.name())
    }
    fn eval(&self, point: &GraphPair) -> f64 {
        balance_brute(&self.0, point).expect("class small enough to enumerate")
    }
    fn is_balanced_hint(&self) -> bool {
        true
    }
}

/// `a * A + b * B`.
pub struct LinearCombination<A, B> {
    a: f64,
    first: A,
    b: f64,
    second: B,
}

impl<A: Statistic, B: Statistic> Statistic for LinearCombination<A, B> {
    fn name(&self) -> String {
        format!("{}*{} + {}*{}", self.a, self.first.name(), self.b, self.second.name())
    }
    fn eval(&self, point: &GraphPair) -> f64 {
        self.a * self.first.eval(point) + self.b * self.second.eval(point)
    }
    fn is_balanced_hint(&self) -> bool {
        self.first.is_balanced_hint() && self.second.is_balanced_hint()
    }
}

/// `a * A + b * B`; balanced whenever both inputs are.
pub fn balanced_sum<A: Statistic, B: Statistic>(
    first: A,
    second: B,
    a: f64,
    b: f64,
) -> LinearCombination<A, B> {
    LinearCombination {
        a,
        first,
        b,
        second,
    }
}

pub struct ProductStatistic<A, B>(A, B);

impl<A: Statistic, B: Statistic> Statistic for ProductStatistic<A, B> {
    fn name(&self) -> String {
        format!("({})*({})", self.0.name(), self.1.name())
    }
    fn eval(&self, point: &GraphPair) -> f64 {
        self.0.eval(point) * self.1.eval(point)
    }
    fn is_balanced_hint(&self) -> bool {
        self.0.is_balanced_hint() && self.1.is_balanced_hint()
    }
}

pub fn balanced_product<A: Statistic, B: Statistic>(first: A, second: B) -> ProductStatistic<A, B> {
    ProductStatistic(first, second)
}

pub struct QuotientStatistic<A, B> {
    numerator: A,
    denominator: B,
}

impl<A: Statistic, B: Statistic> Statistic for QuotientStatistic<A, B> {
    fn name(&self) -> String {
        format!("({})/({})", self.numerator.name(), self.denominator.name())
    }
    fn eval(&self, point: &GraphPair) -> f64 {
        self.numerator.eval(point) / self.denominator.eval(point)
    }
    fn is_balanced_hint(&self) -> bool {
        self.numerator.is_balanced_hint() && self.denominator.is_balanced_hint()
    }
}

/// `A / B` over the `n`-component sample space. The denominator is checked on
/// a representative of every class and must be nonzero there.
pub fn balanced_quotient<A: Statistic, B: Statistic>(
    numerator: A,
    denominator: B,
    n: usize,
) -> Result<QuotientStatistic<A, B>> {
    crate::balance::ensure_enumerable_n("balanced quotient check", n)?;
    for idx in 0..3u64.pow(n as u32) {
        let h = DisagreementVector::from_index(n, idx);
        if denominator.eval(&h.representative()) == 0.0 {
            return Err(Error::domain(format!(
                "denominator {} vanishes on class {h}",
                denominator.name()
            )));
        }
    }
    Ok(QuotientStatistic {
        numerator,
        denominator,
    })
}
