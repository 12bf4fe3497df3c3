//! The correlated Bernoulli model: parameters, per-component cell
//! probabilities, sample points, and exact sampling.
//!
//! Components are stored in a fixed but arbitrary order `0..n`; no graph
//! structure is imposed, so `n` is any positive count of vertex pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter tuple `(p_1..p_n, rho_1..rho_n)`.
///
/// `rho_i` is kept even when `p_i` is 0 or 1, where it has no effect on the
/// distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    p: Vec<f64>,
    rho: Vec<f64>,
}

#[derive(Deserialize)]
struct RawParams {
    p: Vec<f64>,
    rho: Vec<f64>,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.p, raw.rho)
    }
}

fn check_unit(name: &str, i: usize, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name}[{i}] = {v} is not in [0, 1]")))
    }
}

impl ModelParams {
    pub fn new(p: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::domain("at least one component is required"));
        }
        if p.len() != rho.len() {
            return Err(Error::domain(format!(
                "p has {} entries but rho has {}",
                p.len(),
                rho.len()
            )));
        }
        for (i, &v) in p.iter().enumerate() {
            check_unit("p", i, v)?;
        }
        for (i, &v) in rho.iter().enumerate() {
            check_unit("rho", i, v)?;
        }
        Ok(Self { p, rho })
    }

    /// Same `p` and `rho` for every one of `n` components.
    pub fn homogeneous(n: usize, p: f64, rho: f64) -> Result<Self> {
        Self::new(vec![p; n], vec![rho; n])
    }

    pub fn n_components(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn cell_probs(&self, i: usize) -> EdgeCellProbs {
        cell_probs_unchecked(self.p[i], self.rho[i])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }
}

/// Joint probabilities of one component.
///
/// `q1 = P(X=Y=1)`, `q0 = P(X=Y=0)`, and `qstar` is the probability of
/// each of the two ordered disagreements, so `q1 + q0 + 2 qstar = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCellProbs {
    pub q1: f64,
    pub q0: f64,
    pub qstar: f64,
}

impl EdgeCellProbs {
    pub fn total(&self) -> f64 {
        self.q1 + self.q0 + 2.0 * self.qstar
    }
}

pub fn cell_probs(p: f64, rho: f64) -> Result<EdgeCellProbs> {
    check_unit("p", 0, p)?;
    check_unit("rho", 0, rho)?;
    Ok(cell_probs_unchecked(p, rho))
}

fn cell_probs_unchecked(p: f64, rho: f64) -> EdgeCellProbs {
    let v = p * (1.0 - p);
    EdgeCellProbs {
        q1: p * p + rho * v,
        q0: (1.0 - p) * (1.0 - p) + rho * v,
        qstar: (1.0 - rho) * v,
    }
}

/// A sample point `(x, y)`: two edge-indicator vectors of equal length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraphPair {
    x: Vec<bool>,
    y: Vec<bool>,
}

impl GraphPair {
    pub fn new(x: Vec<bool>, y: Vec<bool>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::domain(format!(
                "x has {} components but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::domain("a sample point needs at least one component"));
        }
        Ok(Self { x, y })
    }

    /// Builds a point from 0/1 slices; panics on mismatched lengths.
    pub fn from_bits(x: &[u8], y: &[u8]) -> Self {
        assert_eq!(x.len(), y.len(), "x and y must have equal length");
        Self {
            x: x.iter().map(|&b| b != 0).collect(),
            y: y.iter().map(|&b| b != 0).collect(),
        }
    }

    /// Point number `index` of the `4^n` sample space: the high `n` bits
    /// encode `x` and the low `n` bits encode `y`, leftmost component most
    /// significant.
    pub fn from_index(n: usize, index: u64) -> Self {
        let bit = |word: u64, i: usize| (word >> (n - 1 - i)) & 1 == 1;
        let xs = index >> n;
        let ys = index & ((1u64 << n) - 1);
        Self {
            x: (0..n).map(|i| bit(xs, i)).collect(),
            y: (0..n).map(|i| bit(ys, i)).collect(),
        }
    }

    pub fn n_components(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[bool] {
        &self.x
    }

    pub fn y(&self) -> &[bool] {
        &self.y
    }

    pub(crate) fn set(&mut self, i: usize, x: bool, y: bool) {
        self.x[i] = x;
        self.y[i] = y;
    }

    pub fn x_string(&self) -> String {
        bit_string(&self.x)
    }

    pub fn y_string(&self) -> String {
        bit_string(&self.y)
    }

    /// Parses two strings of `0`/`1` characters.
    pub fn parse(x: &str, y: &str) -> Result<Self> {
        Self::new(parse_bit_string(x)?, parse_bit_string(y)?)
    }

    /// Both vectors all zeros or both all ones.
    pub fn is_degenerate(&self) -> bool {
        let all = |v: &[bool], b: bool| v.iter().all(|&e| e == b);
        (all(&self.x, false) && all(&self.y, false)) || (all(&self.x, true) && all(&self.y, true))
    }
}

fn bit_string(v: &[bool]) -> String {
    v.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bit_string(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::domain(format!("invalid bit character {other:?}"))),
        })
        .collect()
}

/// Iterator over all `4^n` sample points in index order.
pub fn all_points(n: usize) -> impl Iterator<Item = GraphPair> {
    assert!(n >= 1 && n <= 16, "sample space enumeration supports 1 <= n <= 16");
    (0..1u64 << (2 * n)).map(move |i| GraphPair::from_index(n, i))
}

/// Draws one sample point: `X_i ~ Bernoulli(p_i)`, then
/// `Y_i ~ Bernoulli(rho_i x_i + (1 - rho_i) p_i)`, independently per component.
pub fn sample_pair<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> GraphPair {
    let n = params.n_components();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for (&p, &rho) in params.p.iter().zip(&params.rho) {
        let xi = rng.gen::<f64>() < p;
        let cond = if p == 0.0 || p == 1.0 {
            p
        } else {
            let xf = if xi { 1.0 } else { 0.0 };
            rho * xf + (1.0 - rho) * p
        };
        let yi = rng.gen::<f64>() < cond;
        x.push(xi);
        y.push(yi);
    }
    GraphPair { x, y }
}

/// `P(X = x, Y = y)` as the product of per-component cell probabilities.
pub fn point_probability(params: &ModelParams, point: &GraphPair) -> Result<f64> {
    if point.n_components() != params.n_components() {
        return Err(Error::domain(format!(
            "point has {} components, params have {}",
            point.n_components(),
            params.n_components()
        )));
    }
    Ok(point
        .x
        .iter()
        .zip(&point.y)
        .enumerate()
        .map(|(i, (&x, &y))| {
            let q = params.cell_probs(i);
            match (x, y) {
                (true, true) => q.q1,
                (false, false) => q.q0,
                _ => q.qstar,
            }
        })
        .product())
}
