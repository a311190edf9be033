//! Domain types shared by every algorithm: problem instances, utility
//! families, Fenchel conjugates, and the dual-to-primal assignment rule.
//!
//! An instance is a multiset of `n` items `(f_t, A_t)` together with a
//! budget vector `b`. Each item consumes resources `A_t x_t` when its
//! variable is set to `x_t`, and yields utility `f_t(x_t)`. The offline
//! objective is `Σ f_t(x_t)` subject to `Σ A_t x_t ≤ b`, with infeasible
//! allocations scored as minus infinity. That score is carried everywhere
//! as an explicit flag (`None`, or `feasible = false` on [`RunResult`]) so
//! that a floating sentinel can never leak into arithmetic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for domain-membership checks on decisions.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Reduced costs must beat this threshold before an option is accepted;
/// numerically-zero-value options are rejected.
pub const REJECT_TOL: f64 = -1e-12;

/// Relative slack allowed on budget feasibility checks.
pub const BUDGET_REL_TOL: f64 = 1e-9;

/// Errors from constructing or evaluating model types.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },
    #[error("offline optimum must be positive, got {0}")]
    NonPositiveOptimum(f64),
}

// ---------------------------------------------------------------------------
// Dense matrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix. Serializes as a list of rows, which is also the
/// on-disk layout of an item's consumption matrix `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if data.len() != rows * cols {
            return Err(ModelError::DimensionMismatch {
                what: "matrix data",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(ModelError::DimensionMismatch {
                    what: "matrix row",
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { rows: r, cols: c, data })
    }

    /// Column vector from a slice.
    pub fn column(v: &[f64]) -> Self {
        Matrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }

    /// `A x`, accumulated into `out` (which must have `rows` entries).
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let row = self.row(i);
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut out);
        out
    }

    /// `Aᵀ y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                *o += yi * self.get(i, j);
            }
        }
        out
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = ModelError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.rows).map(|i| m.row(i).to_vec()).collect()
    }
}

// ---------------------------------------------------------------------------
// Utility families
// ---------------------------------------------------------------------------

/// A concave utility function with `f(0) = 0` (where 0 is in the domain).
///
/// Four families are supported:
///
/// - `LinearSimplex`: `f(x) = cᵀx` on `{x ∈ [0,1]ᵏ : 𝟙ᵀx ≤ 1}` — the
///   online-LP utility where each coordinate is one option.
/// - `LinearSimplexEq`: same objective on the probability simplex
///   `Δ = {x ≥ 0 : 𝟙ᵀx = 1}` (one option must be chosen); used by the
///   feasibility-problem greedy, typically with `c = 0`.
/// - `ConcavePower`: scalar `f(x) = a·xᵖ` on `[0,1]`, `p ∈ (0,1]`.
/// - `ConcaveLog`: scalar `f(x) = a·ln(1 + s·x)/s` on `[0,1]`, `s > 0`.
///
/// The scalar families carry a nonincreasing derivative together with its
/// generalized inverse `l(v) = min{x : v ≥ f′(x)}` in closed form; a new
/// scalar family that lacks a closed form can fall back on
/// [`bisect_inverse`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityFunction {
    LinearSimplex { c: Vec<f64> },
    LinearSimplexEq { c: Vec<f64> },
    ConcavePower { a: f64, p: f64 },
    ConcaveLog { a: f64, s: f64 },
}

/// Generalized inverse of a nonincreasing derivative by bisection on
/// `[0,1]`: returns `min{x : v ≥ df(x)}` to machine precision.
///
/// 80 halvings of the unit interval land well below `f64` resolution, so
/// the result is as exact as the oracle itself. Extension point for scalar
/// concave families without a closed-form inverse.
pub fn bisect_inverse(df: impl Fn(f64) -> f64, v: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // Invariant: df(hi) <= v < df(lo) (callers check the boundary cases).
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if v >= df(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

impl UtilityFunction {
    /// Number of coordinates of the decision variable.
    pub fn k(&self) -> usize {
        match self {
            UtilityFunction::LinearSimplex { c } | UtilityFunction::LinearSimplexEq { c } => {
                c.len()
            }
            UtilityFunction::ConcavePower { .. } | UtilityFunction::ConcaveLog { .. } => 1,
        }
    }

    /// Whether this is one of the scalar concave families.
    pub fn is_scalar_concave(&self) -> bool {
        matches!(
            self,
            UtilityFunction::ConcavePower { .. } | UtilityFunction::ConcaveLog { .. }
        )
    }

    /// Validates parameter ranges; for scalar families also samples the
    /// derivative on a grid and checks it is nonincreasing.
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |why: String| ModelError::Invalid {
            what: "utility",
            why,
        };
        match self {
            UtilityFunction::LinearSimplex { c } | UtilityFunction::LinearSimplexEq { c } => {
                if c.is_empty() {
                    return Err(bad("empty coefficient vector".into()));
                }
                if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(bad(format!("coefficients must be finite and >= 0: {c:?}")));
                }
            }
            UtilityFunction::ConcavePower { a, p } => {
                if !a.is_finite() || *a < 0.0 {
                    return Err(bad(format!("power scale a = {a} must be finite and >= 0")));
                }
                if !p.is_finite() || *p <= 0.0 || *p > 1.0 {
                    return Err(bad(format!("power exponent p = {p} must lie in (0, 1]")));
                }
            }
            UtilityFunction::ConcaveLog { a, s } => {
                if !a.is_finite() || *a < 0.0 {
                    return Err(bad(format!("log scale a = {a} must be finite and >= 0")));
                }
                if !s.is_finite() || *s <= 0.0 {
                    return Err(bad(format!("log curvature s = {s} must be finite and > 0")));
                }
            }
        }
        if self.is_scalar_concave() {
            // Sampled monotonicity check of the derivative oracle.
            let grid = 33;
            let mut prev = self.scalar_derivative(0.0);
            for g in 1..=grid {
                let x = g as f64 / grid as f64;
                let d = self.scalar_derivative(x);
                if d > prev + 1e-9 {
                    return Err(bad(format!(
                        "derivative increases near x = {x} ({prev} -> {d})"
                    )));
                }
                prev = d;
            }
            let at_zero = self.eval(&[0.0]).expect("dim").expect("0 in domain");
            if at_zero.abs() > 1e-12 {
                return Err(bad(format!("f(0) = {at_zero} != 0")));
            }
        }
        Ok(())
    }

    /// Evaluates the utility. `Ok(None)` marks minus infinity: `x` violates
    /// the domain by more than [`DOMAIN_TOL`].
    pub fn eval(&self, x: &[f64]) -> Result<Option<f64>, ModelError> {
        if x.len() != self.k() {
            return Err(ModelError::DimensionMismatch {
                what: "decision",
                expected: self.k(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Invalid {
                what: "decision",
                why: "non-finite entry".into(),
            });
        }
        Ok(match self {
            UtilityFunction::LinearSimplex { c } => {
                let sum: f64 = x.iter().sum();
                let inside = x.iter().all(|&v| (-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&v))
                    && sum <= 1.0 + DOMAIN_TOL;
                inside.then(|| dot(c, x))
            }
            UtilityFunction::LinearSimplexEq { c } => {
                let sum: f64 = x.iter().sum();
                let inside =
                    x.iter().all(|&v| v >= -DOMAIN_TOL) && (sum - 1.0).abs() <= DOMAIN_TOL;
                inside.then(|| dot(c, x))
            }
            UtilityFunction::ConcavePower { a, p } => {
                self.in_unit_interval(x[0]).then(|| {
                    let t = x[0].clamp(0.0, 1.0);
                    a * t.powf(*p)
                })
            }
            UtilityFunction::ConcaveLog { a, s } => {
                self.in_unit_interval(x[0]).then(|| {
                    let t = x[0].clamp(0.0, 1.0);
                    a * (1.0 + s * t).ln() / s
                })
            }
        })
    }

    fn in_unit_interval(&self, v: f64) -> bool {
        (-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&v)
    }

    /// Derivative of a scalar family at `x ∈ [0,1]`. Panics on the linear
    /// simplex families.
    pub fn scalar_derivative(&self, x: f64) -> f64 {
        match self {
            UtilityFunction::ConcavePower { a, p } => {
                if *a == 0.0 {
                    0.0
                } else {
                    a * p * x.powf(p - 1.0)
                }
            }
            UtilityFunction::ConcaveLog { a, s } => a / (1.0 + s * x),
            _ => panic!("scalar_derivative on a non-scalar utility"),
        }
    }

    /// Closed-form generalized inverse `l(v) = min{x : v ≥ f′(x)}` for the
    /// scalar families; callers guarantee `f′(1) ≤ v < f′(0)`.
    fn scalar_inverse(&self, v: f64) -> f64 {
        match self {
            UtilityFunction::ConcavePower { a, p } => {
                if *p >= 1.0 {
                    0.0
                } else {
                    (a * p / v).powf(1.0 / (1.0 - p))
                }
            }
            UtilityFunction::ConcaveLog { a, s } => (a / v - 1.0) / s,
            _ => panic!("scalar_inverse on a non-scalar utility"),
        }
    }

    /// Supergradient inversion: returns `x ∈ ∂f*(v)`, a minimizer of
    /// `vᵀz − f(z)` over the domain.
    ///
    /// For the linear families the minimizer is the vertex with the most
    /// negative reduced cost `v_j − c_j` (lowest index on ties); the
    /// inequality simplex also admits `0`, taken whenever no reduced cost
    /// beats [`REJECT_TOL`]. For the scalar families this is the
    /// first-order rule: `0` when `f′(0) ≤ v`, `1` when `f′(1) > v`, else
    /// `l(v)`.
    pub fn assign_from_dual(&self, v: &[f64]) -> Result<Decision, ModelError> {
        if v.len() != self.k() {
            return Err(ModelError::DimensionMismatch {
                what: "dual vector",
                expected: self.k(),
                got: v.len(),
            });
        }
        let x = match self {
            UtilityFunction::LinearSimplex { c } => {
                let (j, r) = argmin_reduced_cost(v, c);
                let mut x = vec![0.0; c.len()];
                if r < REJECT_TOL {
                    x[j] = 1.0;
                }
                x
            }
            UtilityFunction::LinearSimplexEq { c } => {
                let (j, _) = argmin_reduced_cost(v, c);
                let mut x = vec![0.0; c.len()];
                x[j] = 1.0;
                x
            }
            UtilityFunction::ConcavePower { .. } | UtilityFunction::ConcaveLog { .. } => {
                let v = v[0];
                let x = if self.scalar_derivative(0.0) <= v {
                    0.0
                } else if self.scalar_derivative(1.0) > v {
                    1.0
                } else {
                    self.scalar_inverse(v).clamp(0.0, 1.0)
                };
                vec![x]
            }
        };
        Ok(Decision { x })
    }

    /// Concave conjugate `f*(v) = inf_x vᵀx − f(x)`, evaluated at the
    /// minimizer produced by [`assign_from_dual`].
    pub fn conjugate_value(&self, v: &[f64]) -> Result<f64, ModelError> {
        let x = self.assign_from_dual(v)?;
        let f = self
            .eval(&x.x)?
            .expect("assign_from_dual returns a domain point");
        Ok(dot(v, &x.x) - f)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lowest-index argmin of the reduced costs `v_j − c_j`.
fn argmin_reduced_cost(v: &[f64], c: &[f64]) -> (usize, f64) {
    let mut best = (0usize, v[0] - c[0]);
    for j in 1..c.len() {
        let r = v[j] - c[j];
        if r < best.1 {
            best = (j, r);
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Items and instances
// ---------------------------------------------------------------------------

/// One arriving request: a utility and the resources each unit consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    #[serde(rename = "utility")]
    pub f: UtilityFunction,
    #[serde(rename = "A")]
    pub a: Matrix,
}

impl Item {
    pub fn new(f: UtilityFunction, a: Matrix) -> Result<Self, ModelError> {
        f.validate()?;
        if a.cols() != f.k() {
            return Err(ModelError::DimensionMismatch {
                what: "consumption matrix columns",
                expected: f.k(),
                got: a.cols(),
            });
        }
        if a.iter().any(|v| !v.is_finite() || v < 0.0) {
            return Err(ModelError::Invalid {
                what: "consumption matrix",
                why: "entries must be finite and >= 0".into(),
            });
        }
        Ok(Item { f, a })
    }
}

/// A full problem: `n` items, `m` resources with budgets `b > 0`, `k`
/// options per item.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "RawInstance")]
pub struct Instance {
    n: usize,
    m: usize,
    k: usize,
    b: Vec<f64>,
    items: Vec<Item>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawInstance {
    n: usize,
    m: usize,
    k: usize,
    b: Vec<f64>,
    items: Vec<Item>,
}

impl From<Instance> for RawInstance {
    fn from(i: Instance) -> Self {
        RawInstance {
            n: i.n,
            m: i.m,
            k: i.k,
            b: i.b,
            items: i.items,
        }
    }
}

impl TryFrom<RawInstance> for Instance {
    type Error = ModelError;
    fn try_from(r: RawInstance) -> Result<Self, Self::Error> {
        if r.items.len() != r.n {
            return Err(ModelError::DimensionMismatch {
                what: "items",
                expected: r.n,
                got: r.items.len(),
            });
        }
        Instance::new(r.m, r.k, r.b, r.items)
    }
}

impl<'de> Deserialize<'de> for Instance {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawInstance::deserialize(d)?;
        Instance::try_from(raw).map_err(serde::de::Error::custom)
    }
}

impl Instance {
    pub fn new(m: usize, k: usize, b: Vec<f64>, items: Vec<Item>) -> Result<Self, ModelError> {
        if b.len() != m {
            return Err(ModelError::DimensionMismatch {
                what: "budget",
                expected: m,
                got: b.len(),
            });
        }
        if b.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(ModelError::Invalid {
                what: "budget",
                why: "entries must be finite and > 0".into(),
            });
        }
        for (t, item) in items.iter().enumerate() {
            item.f.validate()?;
            if item.a.rows() != m || item.a.cols() != k || item.f.k() != k {
                return Err(ModelError::Invalid {
                    what: "item",
                    why: format!(
                        "item {t} has shape {}x{} (k = {}), instance wants {m}x{k}",
                        item.a.rows(),
                        item.a.cols(),
                        item.f.k()
                    ),
                });
            }
        }
        Ok(Instance {
            n: items.len(),
            m,
            k,
            b,
            items,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    #[inline]
    pub fn items(&self) -> &[Item] {
        &self.items
    }

    #[inline]
    pub fn item(&self, t: usize) -> &Item {
        &self.items[t]
    }

    /// Total consumption `Σ A_t x_t` of a decision sequence.
    pub fn consumption(&self, decisions: &[Decision]) -> Result<Vec<f64>, ModelError> {
        if decisions.len() != self.n {
            return Err(ModelError::DimensionMismatch {
                what: "decisions",
                expected: self.n,
                got: decisions.len(),
            });
        }
        let mut total = vec![0.0; self.m];
        let mut load = vec![0.0; self.m];
        for (item, d) in self.items.iter().zip(decisions) {
            item.a.mul_vec_into(&d.x, &mut load);
            for (t, l) in total.iter_mut().zip(&load) {
                *t += l;
            }
        }
        Ok(total)
    }

    /// Whether a consumption vector respects the budget up to
    /// [`BUDGET_REL_TOL`].
    pub fn within_budget(&self, consumption: &[f64]) -> bool {
        consumption
            .iter()
            .zip(&self.b)
            .all(|(u, b)| *u <= b * (1.0 + BUDGET_REL_TOL))
    }

    /// Offline objective `Σ f_t(x_t) + ψ(Σ A_t x_t)`: `Ok(None)` marks
    /// minus infinity (a domain or budget violation).
    pub fn objective(&self, decisions: &[Decision]) -> Result<Option<f64>, ModelError> {
        if decisions.len() != self.n {
            return Err(ModelError::DimensionMismatch {
                what: "decisions",
                expected: self.n,
                got: decisions.len(),
            });
        }
        let mut sum = 0.0;
        for (item, d) in self.items.iter().zip(decisions) {
            match item.f.eval(&d.x)? {
                Some(v) => sum += v,
                None => return Ok(None),
            }
        }
        let consumption = self.consumption(decisions)?;
        if !self.within_budget(&consumption) {
            return Ok(None);
        }
        Ok(Some(sum))
    }

    /// Largest single-item footprint: the bound `γ` on both the
    /// bid-to-budget ratio and the utility-to-optimum ratio.
    ///
    /// Maximized over domain extremes with nonnegative utility — all
    /// vertices for the linear families, `x ∈ {0,1}` for the scalar ones.
    pub fn gamma_bound(&self, p_star: f64) -> Result<GammaBound, ModelError> {
        if !(p_star > 0.0) {
            return Err(ModelError::NonPositiveOptimum(p_star));
        }
        let mut gamma: f64 = 0.0;
        for item in &self.items {
            match &item.f {
                UtilityFunction::LinearSimplex { c } | UtilityFunction::LinearSimplexEq { c } => {
                    for i in 0..self.m {
                        for j in 0..self.k {
                            gamma = gamma.max(item.a.get(i, j) / self.b[i]);
                        }
                    }
                    for &cj in c {
                        gamma = gamma.max(cj / p_star);
                    }
                }
                f => {
                    for i in 0..self.m {
                        gamma = gamma.max(item.a.get(i, 0) / self.b[i]);
                    }
                    let at_one = f.eval(&[1.0])?.expect("1 in domain");
                    gamma = gamma.max(at_one / p_star);
                }
            }
        }
        Ok(GammaBound { gamma })
    }
}

/// A valid bid-to-budget / utility-to-optimum bound for an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBound {
    pub gamma: f64,
}

/// The value assigned to one item's variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub x: Vec<f64>,
}

impl Decision {
    pub fn zero(k: usize) -> Self {
        Decision { x: vec![0.0; k] }
    }

    pub fn is_zero(&self) -> bool {
        self.x.iter().all(|&v| v == 0.0)
    }
}

/// Outcome of one online run over a fixed permutation: the guarded
/// decisions, their total utility, and the realized consumption.
///
/// `decisions[i]` belongs to `instance.item(i)` (original item order, not
/// arrival order), so [`Instance::objective`] recomputes the score
/// directly. `feasible == false` encodes an objective of minus infinity;
/// `objective` always holds the plain utility sum `Σ f_t(x̌_t)`.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub decisions: Vec<Decision>,
    pub objective: f64,
    pub consumption: Vec<f64>,
    pub feasible: bool,
    /// Wall-clock seconds spent in the online loop.
    pub elapsed: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(c: &[f64]) -> UtilityFunction {
        UtilityFunction::LinearSimplex { c: c.to_vec() }
    }

    fn power(a: f64, p: f64) -> UtilityFunction {
        UtilityFunction::ConcavePower { a, p }
    }

    #[test]
    fn eval_linear_simplex() {
        let f = lin(&[3.0, 1.0]);
        assert_eq!(f.eval(&[1.0, 0.0]).unwrap(), Some(3.0));
        // 1ᵀx = 1.2 > 1 is outside the domain.
        assert_eq!(f.eval(&[0.6, 0.6]).unwrap(), None);
        assert!(f.eval(&[0.6]).is_err());
    }

    #[test]
    fn eval_power() {
        let f = power(1.0, 0.5);
        let v = f.eval(&[0.25]).unwrap().unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(f.eval(&[0.0]).unwrap(), Some(0.0));
        assert_eq!(f.eval(&[1.5]).unwrap(), None);
    }

    #[test]
    fn eval_log_is_zero_at_origin() {
        let f = UtilityFunction::ConcaveLog { a: 2.0, s: 3.0 };
        assert_eq!(f.eval(&[0.0]).unwrap(), Some(0.0));
        let v = f.eval(&[1.0]).unwrap().unwrap();
        assert!((v - 2.0 * 4.0_f64.ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn assign_linear_picks_most_negative_reduced_cost() {
        let f = lin(&[3.0, 1.0]);
        let d = f.assign_from_dual(&[2.0, 2.0]).unwrap();
        assert_eq!(d.x, vec![1.0, 0.0]);
        // All reduced costs nonnegative -> reject.
        let f = lin(&[1.0, 1.0]);
        let d = f.assign_from_dual(&[2.0, 2.0]).unwrap();
        assert_eq!(d.x, vec![0.0, 0.0]);
    }

    #[test]
    fn assign_eq_always_picks_a_vertex() {
        let f = UtilityFunction::LinearSimplexEq { c: vec![0.0, 0.0] };
        let d = f.assign_from_dual(&[5.0, 4.0]).unwrap();
        assert_eq!(d.x, vec![0.0, 1.0]);
        // Ties break to the lowest index.
        let d = f.assign_from_dual(&[4.0, 4.0]).unwrap();
        assert_eq!(d.x, vec![1.0, 0.0]);
    }

    #[test]
    fn assign_power_matches_grid_minimizer() {
        // l(1) = 0.25 for f(x) = sqrt(x).
        let f = power(1.0, 0.5);
        let d = f.assign_from_dual(&[1.0]).unwrap();
        assert!((d.x[0] - 0.25).abs() < 1e-12);

        // Independent oracle: v·x − f(x) minimized over a 1e-4 grid.
        let v = 1.0;
        let obj = |z: f64| v * z - f.eval(&[z]).unwrap().unwrap();
        let at_argmin = obj(d.x[0]);
        for g in 0..=10_000 {
            let z = g as f64 * 1e-4;
            assert!(at_argmin <= obj(z) + 1e-9, "beaten at z = {z}");
        }
    }

    #[test]
    fn conjugate_examples() {
        assert!((lin(&[3.0, 1.0]).conjugate_value(&[2.0, 2.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(lin(&[1.0, 1.0]).conjugate_value(&[2.0, 2.0]).unwrap(), 0.0);
        let got = power(1.0, 0.5).conjugate_value(&[1.0]).unwrap();
        assert!((got + 0.25).abs() < 1e-12);
    }

    #[test]
    fn conjugate_is_a_lower_bound_on_random_points() {
        // Fenchel equality at the argmin; every other domain point is no
        // better. Deterministic low-discrepancy sweep over domain and duals.
        let fs = [
            lin(&[0.5, 2.0, 1.0]),
            UtilityFunction::LinearSimplexEq { c: vec![0.5, 2.0, 1.0] },
            power(1.3, 0.7),
            UtilityFunction::ConcaveLog { a: 0.8, s: 2.5 },
        ];
        for f in &fs {
            let k = f.k();
            for step in 0..1000 {
                let v: Vec<f64> = (0..k)
                    .map(|j| 3.0 * fract(0.37 + 0.61 * step as f64 + 0.29 * j as f64))
                    .collect();
                let fstar = f.conjugate_value(&v).unwrap();
                // Random domain point.
                let z: Vec<f64> = match f {
                    UtilityFunction::LinearSimplexEq { .. } => {
                        let mut z: Vec<f64> =
                            (0..k).map(|j| fract(0.11 + 0.53 * step as f64 + 0.71 * j as f64)).collect();
                        let sum: f64 = z.iter().sum();
                        z.iter_mut().for_each(|w| *w /= sum);
                        z
                    }
                    _ => {
                        let mut z: Vec<f64> =
                            (0..k).map(|j| fract(0.11 + 0.53 * step as f64 + 0.71 * j as f64)).collect();
                        let sum: f64 = z.iter().sum();
                        if sum > 1.0 {
                            z.iter_mut().for_each(|w| *w /= sum);
                        }
                        z
                    }
                };
                let fz = f.eval(&z).unwrap().expect("in domain");
                let vz: f64 = v.iter().zip(&z).map(|(a, b)| a * b).sum();
                assert!(vz - fz >= fstar - 1e-9);
            }
        }
    }

    fn fract(x: f64) -> f64 {
        x - x.floor()
    }

    #[test]
    fn assign_scale_covariance() {
        let f = lin(&[3.0, 1.0, 2.0]);
        let v = [2.0, 1.5, 0.5];
        let base = f.assign_from_dual(&v).unwrap();
        for lambda in [0.25, 1.0, 7.5, 1000.0] {
            let fs = lin(&[3.0 * lambda, 1.0 * lambda, 2.0 * lambda]);
            let vs: Vec<f64> = v.iter().map(|x| x * lambda).collect();
            assert_eq!(fs.assign_from_dual(&vs).unwrap().x, base.x);
        }
    }

    #[test]
    fn scalar_assignment_is_monotone() {
        for f in [power(1.0, 0.5), UtilityFunction::ConcaveLog { a: 2.0, s: 4.0 }] {
            let mut prev = f64::INFINITY;
            for g in 0..200 {
                let v = 0.01 + g as f64 * 0.02;
                let x = f.assign_from_dual(&[v]).unwrap().x[0];
                assert!(x <= prev + 1e-12, "assignment not monotone at v = {v}");
                prev = x;
            }
        }
    }

    #[test]
    fn bisect_inverse_matches_closed_forms() {
        let pw = power(1.0, 0.5);
        let lg = UtilityFunction::ConcaveLog { a: 2.0, s: 4.0 };
        for v in [0.55, 0.8, 0.95] {
            let closed = pw.scalar_inverse(v);
            let num = bisect_inverse(|x| pw.scalar_derivative(x), v);
            assert!((closed - num).abs() < 1e-12);
        }
        for v in [0.5, 1.0, 1.8] {
            let closed = lg.scalar_inverse(v);
            let num = bisect_inverse(|x| lg.scalar_derivative(x), v);
            assert!((closed - num).abs() < 1e-12);
        }
    }

    fn tiny_instance() -> Instance {
        let items = vec![
            Item::new(lin(&[4.0]), Matrix::column(&[1.0])).unwrap(),
            Item::new(lin(&[1.0]), Matrix::column(&[1.0])).unwrap(),
        ];
        Instance::new(1, 1, vec![1.0], items).unwrap()
    }

    #[test]
    fn objective_flags_budget_violation() {
        let inst = tiny_instance();
        let zeros = vec![Decision::zero(1), Decision::zero(1)];
        assert_eq!(inst.objective(&zeros).unwrap(), Some(0.0));
        let first = vec![Decision { x: vec![1.0] }, Decision::zero(1)];
        assert_eq!(inst.objective(&first).unwrap(), Some(4.0));
        let both = vec![Decision { x: vec![1.0] }, Decision { x: vec![1.0] }];
        assert_eq!(inst.objective(&both).unwrap(), None);
    }

    #[test]
    fn objective_is_pairing_invariant() {
        let items = vec![
            Item::new(lin(&[4.0]), Matrix::column(&[0.2])).unwrap(),
            Item::new(lin(&[1.0]), Matrix::column(&[0.3])).unwrap(),
            Item::new(power(1.0, 0.5), Matrix::column(&[0.1])).unwrap(),
        ];
        let inst = Instance::new(1, 1, vec![1.0], items.clone()).unwrap();
        let ds = vec![
            Decision { x: vec![1.0] },
            Decision { x: vec![0.5] },
            Decision { x: vec![0.25] },
        ];
        let base = inst.objective(&ds).unwrap().unwrap();
        // Shuffle (item, decision) pairs together.
        let perm = [2usize, 0, 1];
        let shuffled_items: Vec<Item> = perm.iter().map(|&i| items[i].clone()).collect();
        let shuffled_ds: Vec<Decision> = perm.iter().map(|&i| ds[i].clone()).collect();
        let inst2 = Instance::new(1, 1, vec![1.0], shuffled_items).unwrap();
        let v2 = inst2.objective(&shuffled_ds).unwrap().unwrap();
        assert!((base - v2).abs() < 1e-12);
    }

    #[test]
    fn gamma_bound_examples() {
        let item = Item::new(lin(&[4.0]), Matrix::column(&[0.5])).unwrap();
        let inst = Instance::new(1, 1, vec![1.0], vec![item]).unwrap();
        let g = inst.gamma_bound(4.0).unwrap();
        assert!((g.gamma - 1.0).abs() < 1e-15);
        assert!(inst.gamma_bound(0.0).is_err());

        // All-zero consumption: only the utility term remains.
        let item = Item::new(lin(&[2.0]), Matrix::column(&[0.0])).unwrap();
        let inst = Instance::new(1, 1, vec![1.0], vec![item]).unwrap();
        let g = inst.gamma_bound(8.0).unwrap();
        assert!((g.gamma - 0.25).abs() < 1e-15);
    }

    #[test]
    fn instance_json_round_trip() {
        let items = vec![
            Item::new(lin(&[3.0, 1.0]), Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap())
                .unwrap(),
            Item::new(
                UtilityFunction::LinearSimplex { c: vec![0.5, 0.25] },
                Matrix::from_rows(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap(),
            )
            .unwrap(),
        ];
        let inst = Instance::new(2, 2, vec![1.0, 2.0], items).unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        assert!(json.contains("\"kind\":\"linear_simplex\""));
        let back: Instance = serde_json::from_str(&json).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn instance_rejects_bad_budget() {
        let item = Item::new(lin(&[1.0]), Matrix::column(&[1.0])).unwrap();
        assert!(Instance::new(1, 1, vec![0.0], vec![item]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn coeffs() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0..5.0f64, 1..5)
        }

        proptest! {
            // The conjugate value never exceeds v'z - f(z) at any domain z.
            #[test]
            fn fenchel_inequality_linear(c in coeffs(), raw in proptest::collection::vec(0.0..3.0f64, 5)) {
                let k = c.len();
                let f = lin(&c);
                let v: Vec<f64> = raw.iter().take(k).cloned().chain(std::iter::repeat(0.5)).take(k).collect();
                let fstar = f.conjugate_value(&v).unwrap();
                // Candidate domain points: 0 and every vertex.
                let mut candidates = vec![vec![0.0; k]];
                for j in 0..k {
                    let mut e = vec![0.0; k];
                    e[j] = 1.0;
                    candidates.push(e);
                }
                for z in candidates {
                    let fz = f.eval(&z).unwrap().unwrap();
                    let vz: f64 = v.iter().zip(&z).map(|(a, b)| a * b).sum();
                    prop_assert!(vz - fz >= fstar - 1e-9);
                }
            }

            // Joint positive scaling of (v, c) never changes the decision.
            #[test]
            fn scale_covariance(c in coeffs(), lambda in 0.01..100.0f64, shift in 0.0..4.0f64) {
                let k = c.len();
                let f = lin(&c);
                let v: Vec<f64> = c.iter().map(|x| (x + shift) * 0.7).collect();
                let base = f.assign_from_dual(&v).unwrap();
                let fs = lin(&c.iter().map(|x| x * lambda).collect::<Vec<_>>());
                let vs: Vec<f64> = v.iter().map(|x| x * lambda).collect();
                let scaled = fs.assign_from_dual(&vs).unwrap();
                prop_assert_eq!(base.x.iter().position(|&x| x > 0.0),
                                scaled.x.iter().position(|&x| x > 0.0));
                let _ = k;
            }

            // Scalar assignment lands in [0,1] and satisfies first-order
            // optimality against a fine grid.
            #[test]
            fn scalar_assignment_is_a_minimizer(a in 0.1..3.0f64, p in 0.05..1.0f64, v in 0.0..4.0f64) {
                let f = power(a, p);
                let x = f.assign_from_dual(&[v]).unwrap().x[0];
                prop_assert!((0.0..=1.0).contains(&x));
                let obj = |z: f64| v * z - f.eval(&[z]).unwrap().unwrap();
                let at = obj(x);
                for g in 0..=200 {
                    let z = g as f64 / 200.0;
                    prop_assert!(at <= obj(z) + 1e-9, "beaten at {z}");
                }
            }
        }
    }
}
