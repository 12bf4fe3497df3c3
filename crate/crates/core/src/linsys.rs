//! Linear-algebra side of the model on the independence slice (all `rho_i = 0`).
//!
//! There the expectation of any statistic is a polynomial of per-variable
//! degree at most two in `p_1..p_n`. With coefficients ordered
//! lexicographically by exponent tuple, the map from per-class sums to
//! coefficients is the `n`-fold Kronecker power of [`BASE_A`]. Classes and
//! exponent tuples share the same base-3 ordering (`0 < * < 1`, leftmost
//! component most significant).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GraphPair, ModelParams};
use crate::oracle::{class_sum_vector, exact_moments};
use crate::statistic::{Builtin, FnStatistic, Statistic};
use crate::stats::{disagreement_vector, DisagreementVector};

/// Columns are the coefficient vectors of `(1-p)^2`, `p(1-p)`, `p^2`.
pub const BASE_A: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [-2.0, 1.0, 0.0], [1.0, -1.0, 1.0]];

/// Inverse of [`BASE_A`].
const BASE_A_INV: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [2.0, 1.0, 0.0], [1.0, 1.0, 1.0]];

/// Largest `n` for a dense `3^n x 3^n` Kronecker power.
pub const MAX_DENSE_KRON_N: usize = 8;

/// Largest `n` for polynomial and completeness checks.
pub const MAX_POLY_N: usize = 6;

/// Pass threshold for the non-polynomial residual of the heterogeneity
/// correlation; see [`check_no_unbiased_estimator_rho_h`].
pub const RHO_H_RESIDUAL_THRESHOLD: f64 = 1e-2;

fn capacity(what: &'static str, n: usize, limit: usize) -> Result<()> {
    if n == 0 || n > limit {
        return Err(Error::Capacity {
            what,
            n,
            limit,
            hint: "",
        });
    }
    Ok(())
}

fn pow3(n: usize) -> usize {
    3usize.pow(n as u32)
}

pub fn base_matrix_a() -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| BASE_A[i][j])
}

/// Dense `A ⊗ A ⊗ ... ⊗ A` (`n` factors).
pub fn kron_power_a(n: usize) -> Result<DMatrix<f64>> {
    capacity("dense Kronecker power", n, MAX_DENSE_KRON_N)?;
    let a = base_matrix_a();
    let mut out = a.clone();
    for _ in 1..n {
        out = out.kronecker(&a);
    }
    Ok(out)
}

/// Applies `⊗^n M` for a 3x3 `M` without forming it: one mode product per axis.
fn apply_kron_power(m: &[[f64; 3]; 3], v: &[f64]) -> Vec<f64> {
    let len = v.len();
    let mut cur = v.to_vec();
    let mut stride = 1;
    while stride < len {
        let block = stride * 3;
        let mut next = vec![0.0; len];
        for base in (0..len).step_by(block) {
            for off in 0..stride {
                let idx = |d: usize| base + d * stride + off;
                let src = [cur[idx(0)], cur[idx(1)], cur[idx(2)]];
                for (row, coeffs) in m.iter().enumerate() {
                    next[idx(row)] = coeffs[0] * src[0] + coeffs[1] * src[1] + coeffs[2] * src[2];
                }
            }
        }
        cur = next;
        stride = block;
    }
    cur
}

fn check_len(v: &[f64]) -> Result<usize> {
    let mut n = 0;
    let mut len = 1;
    while len < v.len() {
        len *= 3;
        n += 1;
    }
    if len != v.len() || n == 0 {
        return Err(Error::domain(format!("length {} is not a positive power of 3", v.len())));
    }
    Ok(n)
}

/// `[⊗^n A] v` for a length-`3^n` vector.
pub fn apply_kron_power_a(v: &[f64]) -> Result<Vec<f64>> {
    check_len(v)?;
    Ok(apply_kron_power(&BASE_A, v))
}

/// Solves `[⊗^n A] x = b`.
pub fn solve_kron_power_a(b: &[f64]) -> Result<Vec<f64>> {
    check_len(b)?;
    Ok(apply_kron_power(&BASE_A_INV, b))
}

/// Forward substitution for a lower-triangular system. Fails on a zero pivot.
pub fn forward_substitute(mat: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = mat.nrows();
    if mat.ncols() != n || rhs.len() != n {
        return Err(Error::domain("forward substitution needs a square system"));
    }
    let mut x = vec![0.0; n];
    for i in 0..n {
        let pivot = mat[(i, i)];
        if pivot == 0.0 {
            return Err(Error::domain(format!("zero pivot at row {i}")));
        }
        let s: f64 = (0..i).map(|j| mat[(i, j)] * x[j]).sum();
        x[i] = (rhs[i] - s) / pivot;
    }
    Ok(x)
}

/// Product of the diagonal, which is the determinant of a triangular matrix.
pub fn triangular_determinant(mat: &DMatrix<f64>) -> f64 {
    mat.diagonal().iter().product()
}

fn is_lower_triangular(mat: &DMatrix<f64>) -> bool {
    mat.is_square() && (0..mat.nrows()).all(|i| (i + 1..mat.ncols()).all(|j| mat[(i, j)] == 0.0))
}

/// Coefficient vector of a polynomial with per-variable degree at most two,
/// indexed lexicographically by exponent tuple `(k_1, ..., k_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyCoeffVec {
    n: usize,
    coeffs: Vec<f64>,
}

impl PolyCoeffVec {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let n = check_len(&coeffs)?;
        Ok(Self { n, coeffs })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `prod p_j^{k_j}`.
    pub fn coeff(&self, exponents: &[u8]) -> f64 {
        let idx = exponents.iter().fold(0usize, |acc, &k| acc * 3 + k as usize);
        self.coeffs[idx]
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        assert_eq!(p.len(), self.n, "wrong number of variables");
        // Contract the last axis first: each pass folds triples with Horner.
        let mut cur = self.coeffs.clone();
        for &pj in p.iter().rev() {
            cur = cur
                .chunks_exact(3)
                .map(|c| c[0] + pj * (c[1] + pj * c[2]))
                .collect();
        }
        cur[0]
    }
}

/// `[⊗^n A]` times the class-sum vector of `stat`: the coefficients of
/// `E(stat)` as a polynomial in `p` when every `rho_i` is zero.
pub fn expectation_polynomial<S: Statistic + ?Sized>(stat: &S, n: usize) -> Result<PolyCoeffVec> {
    capacity("expectation polynomial", n, MAX_POLY_N)?;
    let sums = class_sum_vector(stat, n)?;
    PolyCoeffVec::new(apply_kron_power(&BASE_A, &sums))
}

/// Right-hand side of the class-probability expansion: the sum over exponent
/// tuples of `prod_j A[k_j][h_j] * prod_j p_j^{k_j}`.
pub fn class_probability_expansion(h: &DisagreementVector, p: &[f64]) -> f64 {
    let n = h.n_components();
    assert_eq!(p.len(), n);
    let mut total = 0.0;
    for idx in 0..pow3(n) {
        let mut rest = idx;
        let mut term = 1.0;
        for j in (0..n).rev() {
            let k = rest % 3;
            rest /= 3;
            term *= BASE_A[k][h.components()[j].digit() as usize] * p[j].powi(k as i32);
        }
        total += term;
    }
    total
}

fn random_interior_params(rng: &mut impl Rng, n: usize) -> ModelParams {
    let p = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
    ModelParams::new(p, vec![0.0; n]).expect("interior params")
}

/// Outcome of comparing two statistics through the unbiasedness characterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnbiasednessCheck {
    /// Class-sum vectors agree entrywise.
    pub class_sums_equal: bool,
    /// Largest `|E(S) - E(T)|` over the random independence-slice probes.
    pub max_expectation_gap: f64,
    /// The two expectation polynomials agree coefficientwise.
    pub polynomials_equal: bool,
}

impl UnbiasednessCheck {
    /// Equal class sums exactly when the expectations coincide.
    pub fn is_consistent(&self) -> bool {
        self.class_sums_equal == (self.max_expectation_gap <= 1e-10) && self.class_sums_equal == self.polynomials_equal
    }
}

/// Decides whether `s` and `t` have identical expectations on a
/// nondegenerate parameter set by comparing class sums, and cross-checks the
/// answer at `probes` random points of the independence slice.
pub fn verify_unbiasedness_characterization<S, T>(
    s: &S,
    t: &T,
    n: usize,
    probes: usize,
    seed: u64,
) -> Result<UnbiasednessCheck>
where
    S: Statistic + ?Sized,
    T: Statistic + ?Sized,
{
    capacity("unbiasedness characterization", n, MAX_POLY_N)?;
    let cs = class_sum_vector(s, n)?;
    let ct = class_sum_vector(t, n)?;
    let class_sums_equal = cs.iter().zip(&ct).all(|(a, b)| (a - b).abs() <= 1e-12);
    let ps = apply_kron_power(&BASE_A, &cs);
    let pt = apply_kron_power(&BASE_A, &ct);
    let polynomials_equal = ps.iter().zip(&pt).all(|(a, b)| (a - b).abs() <= 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap = 0.0f64;
    for _ in 0..probes {
        let params = random_interior_params(&mut rng, n);
        let es = exact_moments(s, &params)?.mean;
        let et = exact_moments(t, &params)?.mean;
        gap = gap.max((es - et).abs());
    }
    Ok(UnbiasednessCheck {
        class_sums_equal,
        max_expectation_gap: gap,
        polynomials_equal,
    })
}

/// Certifies that `mat` has a trivial nullspace: lower triangular with a
/// nonzero diagonal, `mat x = 0` forces `x = 0`, and random systems solve
/// with small residual.
pub fn has_trivial_nullspace(mat: &DMatrix<f64>, seed: u64) -> bool {
    if !is_lower_triangular(mat) || mat.diagonal().iter().any(|&d| d.abs() < 1e-12) {
        return false;
    }
    let n = mat.nrows();
    match forward_substitute(mat, &vec![0.0; n]) {
        Ok(x) if x.iter().all(|&v| v == 0.0) => {}
        _ => return false,
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..3 {
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let Ok(x) = forward_substitute(mat, &b) else {
            return false;
        };
        let r = mat * DVector::from_vec(x) - DVector::from_vec(b);
        if r.amax() > 1e-8 {
            return false;
        }
    }
    true
}

/// The disagreement vector is complete on a nondegenerate parameter set iff
/// `⊗^n A` has a trivial nullspace.
pub fn verify_completeness(n: usize) -> Result<bool> {
    capacity("completeness check", n, MAX_POLY_N)?;
    Ok(has_trivial_nullspace(&kron_power_a(n)?, n as u64))
}

/// Evidence that a target function is not a polynomial of per-variable degree
/// at most two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonPolynomialEvidence {
    /// Largest `|interpolant - target|` over the probe points.
    pub residual: f64,
    /// `false` when `n < 2`, where the argument does not apply.
    pub conclusive: bool,
}

/// Interpolates `target` on the `3^n` tensor grid over `axes` by the unique
/// polynomial of per-variable degree at most two and returns the largest
/// deviation at `probes`.
pub fn polynomial_fit_residual(
    n: usize,
    axes: [f64; 3],
    probes: &[Vec<f64>],
    target: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    capacity("polynomial fit", n, MAX_POLY_N)?;
    let vander = DMatrix::from_fn(3, 3, |i, k| axes[i].powi(k as i32));
    let inv = vander
        .try_inverse()
        .filter(|_| axes[0] != axes[1] && axes[1] != axes[2] && axes[0] != axes[2])
        .ok_or_else(|| Error::domain(format!("grid axes {axes:?} must be distinct")))?;
    let inv3: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| inv[(i, j)]));

    let values: Vec<f64> = (0..pow3(n))
        .map(|idx| {
            let mut rest = idx;
            let mut point = vec![0.0; n];
            for j in (0..n).rev() {
                point[j] = axes[rest % 3];
                rest /= 3;
            }
            target(&point)
        })
        .collect();
    let poly = PolyCoeffVec::new(apply_kron_power(&inv3, &values))?;
    let mut worst = 0.0f64;
    for q in probes {
        if q.len() != n {
            return Err(Error::domain("probe dimension does not match n"));
        }
        worst = worst.max((poly.eval(q) - target(q)).abs());
    }
    Ok(worst)
}

/// Heterogeneity correlation with every `rho_i = 0`.
pub fn rho_h_of(p: &[f64]) -> f64 {
    let params = ModelParams::new(p.to_vec(), vec![0.0; p.len()]).expect("p in [0,1]");
    crate::stats::param_functionals(&params).rho_h
}

/// Variance of the `p_i`.
pub fn sigma2_of(p: &[f64]) -> f64 {
    let n = p.len() as f64;
    let mu = p.iter().sum::<f64>() / n;
    p.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n
}

/// A positive residual shows the heterogeneity correlation is not a
/// polynomial of the admissible form, so no statistic is unbiased for it.
pub fn check_no_unbiased_estimator_rho_h(
    n: usize,
    axes: [f64; 3],
    probes: &[Vec<f64>],
) -> Result<NonPolynomialEvidence> {
    let residual = polynomial_fit_residual(n, axes, probes, rho_h_of)?;
    Ok(NonPolynomialEvidence {
        residual,
        conclusive: n >= 2,
    })
}

/// `n`-dimensional probe points drawn uniformly from `[lo, hi)`.
pub fn random_probes(n: usize, count: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..n).map(|_| rng.gen_range(lo..hi)).collect())
        .collect()
}

/// No statistic is unbiased for a common edge correlation `rho_E`: on the
/// independence slice it would have to be unbiased for 0, hence (trivial
/// nullspace) have all class sums zero, hence mean zero everywhere, which a
/// witness point with `rho_E = 0.5` contradicts.
pub fn check_no_unbiased_estimator_rho_e(n: usize) -> Result<bool> {
    capacity("edge-correlation check", n, 5)?;
    check_no_unbiased_estimator_rho_e_with(&kron_power_a(n)?, n)
}

/// As [`check_no_unbiased_estimator_rho_e`] with a caller-supplied system matrix.
pub fn check_no_unbiased_estimator_rho_e_with(mat: &DMatrix<f64>, n: usize) -> Result<bool> {
    if mat.nrows() != pow3(n) {
        return Err(Error::domain("matrix size does not match 3^n"));
    }
    if !has_trivial_nullspace(mat, 17) {
        return Ok(false);
    }
    // dx - dy is nonzero but has zero class sums: its mean vanishes at every
    // parameter point, including the witness.
    let antisym = FnStatistic::new("dx-dy", |p: &GraphPair| {
        Builtin::DensityX.eval(p) - Builtin::DensityY.eval(p)
    });
    let sums = class_sum_vector(&antisym, n)?;
    if sums.iter().any(|s| s.abs() > 1e-12) {
        return Ok(false);
    }
    let rho_e = 0.5;
    let witness = ModelParams::homogeneous(n, 0.4, rho_e)?;
    let mean = exact_moments(&antisym, &witness)?.mean;
    Ok(mean.abs() < 1e-12 && rho_e != 0.0)
}

// ---------------------------------------------------------------------------
// Fixed-mean (degenerate) parameter space
// ---------------------------------------------------------------------------

/// Polynomial in `(mu, p)` with integer coefficients; `c[i][j]` multiplies `mu^i p^j`.
#[derive(Clone, Copy, PartialEq, Debug)]
struct MuPPoly {
    c: [[i64; 5]; 5],
}

impl MuPPoly {
    fn linear(constant: i64, mu: i64, p: i64) -> Self {
        let mut c = [[0; 5]; 5];
        c[0][0] = constant;
        c[1][0] = mu;
        c[0][1] = p;
        Self { c }
    }

    fn one() -> Self {
        Self::linear(1, 0, 0)
    }

    fn mul(&self, other: &Self) -> Self {
        let mut c = [[0i64; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                if self.c[i][j] == 0 {
                    continue;
                }
                for k in 0..5 - i {
                    for l in 0..5 - j {
                        if other.c[k][l] != 0 {
                            c[i + k][j + l] += self.c[i][j] * other.c[k][l];
                        }
                    }
                }
            }
        }
        Self { c }
    }

    /// Coefficients of `p^0..p^4` at a fixed `mu`.
    fn at_mu(&self, mu: f64) -> [f64; 5] {
        std::array::from_fn(|j| (0..5).map(|i| self.c[i][j] as f64 * mu.powi(i as i32)).sum())
    }
}

/// The `n = 2`, `rho = 0` model with known mean `mu`: `p_1 = p`,
/// `p_2 = 2 mu - p`, and `p` ranges over `(mu - delta, mu + delta)` with
/// `delta = min(mu, 1 - mu)`.
#[derive(Debug, Clone)]
pub struct DegenerateSystem {
    mu: f64,
    delta_radius: f64,
    /// Column `j` holds the coefficients of `p^0..p^4` in the probability of
    /// sample point `j` (index order of [`GraphPair::from_index`] with `n = 2`).
    m: DMatrix<f64>,
}

impl DegenerateSystem {
    pub const POINTS: usize = 16;

    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::domain(format!("mu = {mu} must lie in (0, 1)")));
        }
        let first = [MuPPoly::linear(1, 0, -1), MuPPoly::linear(0, 0, 1)]; // 1-p, p
        let second = [MuPPoly::linear(1, -2, 1), MuPPoly::linear(0, 2, -1)]; // 1-2mu+p, 2mu-p
        let mut m = DMatrix::zeros(5, Self::POINTS);
        for j in 0..Self::POINTS {
            let z = GraphPair::from_index(2, j as u64);
            let phi = [
                first[z.x()[0] as usize],
                first[z.y()[0] as usize],
                second[z.x()[1] as usize],
                second[z.y()[1] as usize],
            ]
            .iter()
            .fold(MuPPoly::one(), |acc, f| acc.mul(f));
            for (i, c) in phi.at_mu(mu).into_iter().enumerate() {
                m[(i, j)] = c;
            }
        }
        Ok(Self {
            mu,
            delta_radius: mu.min(1.0 - mu),
            m,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn delta_radius(&self) -> f64 {
        self.delta_radius
    }

    /// The 5x16 coefficient matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn contains(&self, p: f64) -> bool {
        p > self.mu - self.delta_radius && p < self.mu + self.delta_radius
    }

    /// Sample-point probabilities at `p`: `[1, p, p^2, p^3, p^4] M`.
    pub fn point_probabilities(&self, p: f64) -> Vec<f64> {
        let powers = DVector::from_fn(5, |i, _| p.powi(i as i32));
        (self.m.transpose() * powers).iter().copied().collect()
    }

    /// Values of a statistic at the 16 sample points.
    pub fn statistic_vector<S: Statistic + ?Sized>(&self, stat: &S) -> Vec<f64> {
        (0..Self::POINTS as u64).map(|j| stat.eval(&GraphPair::from_index(2, j))).collect()
    }

    /// Coefficients of `E(stat)` as a polynomial of degree at most four in `p`.
    pub fn expectation_coeffs(&self, s: &[f64]) -> Vec<f64> {
        (&self.m * DVector::from_column_slice(s)).iter().copied().collect()
    }

    /// `max |M s - g|`.
    pub fn residual(&self, s: &[f64], g: &[f64]) -> f64 {
        self.expectation_coeffs(s)
            .iter()
            .zip(g)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// A nonzero `v` with `M v = 0` whose class sums are not all zero: adding
    /// it to any unbiased statistic gives another unbiased statistic with
    /// different class sums.
    pub fn nullspace_witness(&self) -> Option<Vec<f64>> {
        let pinv = pseudo_inverse(&self.m, PINV_RELATIVE_TOLERANCE);
        let proj = DMatrix::identity(Self::POINTS, Self::POINTS) - &pinv * &self.m;
        (0..Self::POINTS)
            .map(|j| proj.column(j).iter().copied().collect::<Vec<f64>>())
            .find(|v| {
                let mut sums = [0.0; 9];
                for (j, val) in v.iter().enumerate() {
                    let h = disagreement_vector(&GraphPair::from_index(2, j as u64));
                    sums[h.index() as usize] += val;
                }
                sums.iter().any(|s| s.abs() > 1e-8)
            })
    }
}

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RELATIVE_TOLERANCE: f64 = 1e-10;

/// Moore-Penrose pseudoinverse via the SVD.
pub fn pseudo_inverse(m: &DMatrix<f64>, relative_tolerance: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let largest = svd.singular_values.max();
    svd.pseudo_inverse(largest * relative_tolerance)
        .expect("u and v were computed")
}

/// Minimum-variance unbiased statistic at one value of `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateSolution {
    pub p: f64,
    /// Statistic values at the 16 sample points.
    pub values: Vec<f64>,
    /// `max |M S - g|`.
    pub residual: f64,
    pub variance: f64,
}

/// Among statistics `S` with `M S = g` (unbiased for the polynomial with
/// coefficients `g`), the one with least variance at `p`.
///
/// Scaling column `j` of `M` by `1/sqrt(w_j)` turns the weighted objective
/// `sum w_j S_j^2` into a plain norm, whose minimiser is the pseudoinverse
/// solution; mapping back divides by `sqrt(w_j)`.
pub fn degenerate_min_variance(system: &DegenerateSystem, g: &[f64], p: f64) -> Result<DegenerateSolution> {
    if g.len() > 5 {
        return Err(Error::domain("g must have degree at most 4 in p"));
    }
    if !system.contains(p) {
        return Err(Error::domain(format!(
            "p = {p} must lie strictly inside ({}, {})",
            system.mu - system.delta_radius,
            system.mu + system.delta_radius
        )));
    }
    let mut g5 = [0.0; 5];
    g5[..g.len()].copy_from_slice(g);
    let w = system.point_probabilities(p);
    let root_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let scaled = DMatrix::from_fn(5, DegenerateSystem::POINTS, |i, j| system.m[(i, j)] / root_w[j]);
    let s_scaled = pseudo_inverse(&scaled, PINV_RELATIVE_TOLERANCE) * DVector::from_column_slice(&g5);
    let values: Vec<f64> = s_scaled.iter().zip(&root_w).map(|(s, r)| s / r).collect();
    let residual = system.residual(&values, &g5);
    let scale = g5.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    if residual > 1e-9 * scale {
        return Err(Error::NoUnbiasedEstimator { residual });
    }
    let mean: f64 = w.iter().zip(&values).map(|(a, b)| a * b).sum();
    let second: f64 = w.iter().zip(&values).map(|(a, b)| a * b * b).sum();
    Ok(DegenerateSolution {
        p,
        values,
        residual,
        variance: (second - mean * mean).max(0.0),
    })
}

/// Variance at `p` of an arbitrary statistic vector.
pub fn degenerate_variance(system: &DegenerateSystem, s: &[f64], p: f64) -> f64 {
    let w = system.point_probabilities(p);
    let mean: f64 = w.iter().zip(s).map(|(a, b)| a * b).sum();
    let second: f64 = w.iter().zip(s).map(|(a, b)| a * b * b).sum();
    second - mean * mean
}

/// Smallest max-componentwise gap between the minimum-variance solutions at
/// two distinct `p` that counts as a demonstration that no UMVUE exists.
pub const DEGENERATE_DIFF_THRESHOLD: f64 = 0.25;

/// Minimum-variance unbiased solutions for `E(delta)` at several `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegenerateReport {
    pub mu: f64,
    pub p_values: Vec<f64>,
    /// Coefficients of `E(delta)` in `p`.
    pub g: Vec<f64>,
    pub solutions: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
    /// Variance of `delta` itself at each `p`.
    pub delta_variances: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `max_abs_diff[i][j]`: largest componentwise gap between solutions `i` and `j`.
    pub max_abs_diff: Vec<Vec<f64>>,
}

impl DegenerateReport {
    /// Largest pairwise gap, 0 with fewer than two solutions.
    pub fn largest_difference(&self) -> f64 {
        self.max_abs_diff.iter().flatten().copied().fold(0.0, f64::max)
    }
}

pub fn degenerate_delta_report(mu: f64, p_values: &[f64]) -> Result<DegenerateReport> {
    let system = DegenerateSystem::new(mu)?;
    let delta = system.statistic_vector(&Builtin::Delta);
    let g = system.expectation_coeffs(&delta);
    let solutions = p_values
        .iter()
        .map(|&p| degenerate_min_variance(&system, &g, p))
        .collect::<Result<Vec<_>>>()?;
    let max_abs_diff = solutions
        .iter()
        .map(|a| {
            solutions
                .iter()
                .map(|b| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
                .collect()
        })
        .collect();
    Ok(DegenerateReport {
        mu,
        p_values: p_values.to_vec(),
        delta_variances: p_values.iter().map(|&p| degenerate_variance(&system, &delta, p)).collect(),
        g,
        variances: solutions.iter().map(|s| s.variance).collect(),
        residuals: solutions.iter().map(|s| s.residual).collect(),
        solutions: solutions.into_iter().map(|s| s.values).collect(),
        max_abs_diff,
    })
}

/// Writes a matrix as CSV, one row per line.
pub fn write_matrix_csv<W: Write>(mat: &DMatrix<f64>, mut out: W) -> std::io::Result<()> {
    for i in 0..mat.nrows() {
        let row: Vec<String> = mat.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes a coefficient vector as `index,exponents,value` CSV.
pub fn write_poly_csv<W: Write>(poly: &PolyCoeffVec, mut out: W) -> std::io::Result<()> {
    writeln!(out, "index,exponents,coefficient")?;
    for (idx, c) in poly.coeffs.iter().enumerate() {
        let h = DisagreementVector::from_index(poly.n, idx as u64);
        let exps: String = h.components().iter().map(|t| char::from(b'0' + t.digit() as u8)).collect();
        writeln!(out, "{idx},{exps},{c}")?;
    }
    Ok(())
}
