//! Self-contained dense linear-programming solver.
//!
//! Solves `maximize cᵀx subject to Gx ≤ g, 0 ≤ x ≤ u` with a
//! bounded-variable primal simplex. Variable bounds are handled natively
//! (nonbasic variables may sit at either bound), which keeps the basis at
//! `M × M` — the per-item "pick at most one unit" constraints of an
//! allocation instance become plain upper bounds instead of rows whenever
//! `k = 1`, so the basis stays at the number of resources.
//!
//! Phase 1 (artificial variables on rows with negative right-hand side)
//! certifies infeasibility; phase 2 optimizes the real objective. Pricing
//! is largest-violation, switching permanently to Bland's smallest-index
//! rule after a run of degenerate pivots so cycling cannot occur. Pivots
//! are refused below [`PIVOT_TOL`].
//!
//! [`offline_optimum`] assembles the block LP of a whole instance
//! (budget rows plus per-item structure) and returns the optimum, an
//! optimal assignment, and the budget-row dual vector. [`vertex_oracle`]
//! is the brute-force reference: it enumerates every candidate basic
//! point of the same polytope.

use crate::model::{Decision, Instance, Matrix, UtilityFunction};
use thiserror::Error;

/// Reduced-cost optimality tolerance.
pub const DUAL_TOL: f64 = 1e-10;

/// Smallest pivot element the simplex will accept.
pub const PIVOT_TOL: f64 = 1e-10;

/// Number of chords in the piecewise-linear upper approximation used for
/// scalar concave utilities inside [`offline_optimum`]. The approximation
/// error per item is at most `max|f″| / (2 · CONCAVE_CHORDS²)`.
pub const CONCAVE_CHORDS: usize = 64;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

/// Basis reinversions happen every this many pivots.
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("iteration limit {0} exceeded (tolerance failure?)")]
    IterationLimit(usize),
    #[error("vertex oracle limited to M+N <= {limit}, got {got}")]
    OracleTooLarge { limit: usize, got: usize },
    #[error("singular basis during refactorization")]
    SingularBasis,
}

/// `maximize cᵀx  s.t.  Gx ≤ g,  0 ≤ x ≤ u` (entries of `u` may be infinite).
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Matrix,
    pub rhs: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn new(
        objective: Vec<f64>,
        constraints: Matrix,
        rhs: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, LpError> {
        let n = objective.len();
        let m = rhs.len();
        if constraints.rows() != m || constraints.cols() != n {
            return Err(LpError::Dimension(format!(
                "constraints are {}x{}, want {m}x{n}",
                constraints.rows(),
                constraints.cols()
            )));
        }
        if upper.len() != n {
            return Err(LpError::Dimension(format!(
                "upper bounds have {} entries, want {n}",
                upper.len()
            )));
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Invalid("rhs must be finite".into()));
        }
        if upper.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(LpError::Invalid("upper bounds must be >= 0".into()));
        }
        Ok(LpProblem {
            objective,
            constraints,
            rhs,
            upper,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver outcome. `x`, `y` and `value` are meaningful only when `status`
/// is [`LpStatus::Optimal`]; `y` holds the duals of the `≤` rows.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

impl LpSolution {
    /// Certifies an optimal solution against its problem: primal and dual
    /// feasibility, complementary slackness per row, and the duality gap.
    pub fn verify(&self, p: &LpProblem) -> Result<(), String> {
        if self.status != LpStatus::Optimal {
            return Err("not optimal".into());
        }
        let gx = p.constraints.mul_vec(&self.x);
        for i in 0..p.num_rows() {
            if gx[i] > p.rhs[i] + 1e-8 {
                return Err(format!("row {i} violated: {} > {}", gx[i], p.rhs[i]));
            }
            if self.y[i] < -1e-8 {
                return Err(format!("dual {i} negative: {}", self.y[i]));
            }
            let slack = p.rhs[i] - gx[i];
            if self.y[i] * slack > 1e-6 {
                return Err(format!(
                    "complementary slackness broken on row {i}: y = {}, slack = {slack}",
                    self.y[i]
                ));
            }
        }
        let mut dual_value = dot(&self.y, &p.rhs);
        for j in 0..p.num_vars() {
            let xj = self.x[j];
            if xj < -1e-8 || xj > p.upper[j] + 1e-8 {
                return Err(format!("x[{j}] = {xj} outside [0, {}]", p.upper[j]));
            }
            let mut d = p.objective[j];
            for i in 0..p.num_rows() {
                d -= self.y[i] * p.constraints.get(i, j);
            }
            if d > 1e-8 {
                if p.upper[j].is_infinite() {
                    return Err(format!("dual infeasible on unbounded column {j}: d = {d}"));
                }
                dual_value += d * p.upper[j];
            }
        }
        let gap = (self.value - dual_value).abs();
        if gap > 1e-6 * (1.0 + self.value.abs()) {
            return Err(format!(
                "duality gap {gap}: primal {} vs dual {dual_value}",
                self.value
            ));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Bounded-variable primal simplex
// ---------------------------------------------------------------------------

struct Simplex {
    m: usize,
    /// Columns of the equality system [G | I | -I_art], each of length m.
    cols: Vec<Vec<f64>>,
    upper: Vec<f64>,
    obj: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    at_upper: Vec<bool>,
    /// Row-major m x m basis inverse.
    binv: Vec<f64>,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
    iteration_cap: usize,
    bland: bool,
    degenerate_streak: usize,
    artificials: Vec<usize>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Simplex {
    fn new(p: &LpProblem) -> Self {
        let m = p.num_rows();
        let n = p.num_vars();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n + m);
        for j in 0..n {
            cols.push((0..m).map(|i| p.constraints.get(i, j)).collect());
        }
        let mut upper = p.upper.clone();
        // Slack columns.
        for i in 0..m {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            cols.push(e);
            upper.push(f64::INFINITY);
        }
        // Artificial columns (-e_i) for rows the slack basis cannot satisfy.
        let mut artificials = Vec::new();
        let mut basis: Vec<usize> = (n..n + m).collect();
        for i in 0..m {
            if p.rhs[i] < 0.0 {
                let mut e = vec![0.0; m];
                e[i] = -1.0;
                cols.push(e);
                upper.push(f64::INFINITY);
                let idx = cols.len() - 1;
                artificials.push(idx);
                basis[i] = idx;
            }
        }
        let ncols = cols.len();
        let mut in_basis = vec![false; ncols];
        for &j in &basis {
            in_basis[j] = true;
        }
        let iteration_cap = 1000 + 10 * (m + n) * (m + n);
        let mut s = Simplex {
            m,

            cols,
            upper,
            obj: vec![0.0; ncols],
            rhs: p.rhs.clone(),
            basis,
            in_basis,
            at_upper: vec![false; ncols],
            binv: vec![0.0; m * m],
            xb: vec![0.0; m],
            pivots_since_refactor: 0,
            iterations: 0,
            iteration_cap,
            bland: false,
            degenerate_streak: 0,
            artificials,
        };
        s.refactor().expect("initial diagonal basis is invertible");
        s.compute_xb();
        s
    }

    /// Rebuilds `binv` from the basis columns by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        let mut a = vec![0.0; m * m];
        for (col, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                a[i * m + col] = self.cols[j][i];
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            // Partial pivoting.
            let mut piv = col;
            for r in col + 1..m {
                if a[r * m + col].abs() > a[piv * m + col].abs() {
                    piv = r;
                }
            }
            if a[piv * m + col].abs() < 1e-12 {
                return Err(LpError::SingularBasis);
            }
            if piv != col {
                for c in 0..m {
                    a.swap(col * m + c, piv * m + c);
                    inv.swap(col * m + c, piv * m + c);
                }
            }
            let d = a[col * m + col];
            for c in 0..m {
                a[col * m + c] /= d;
                inv[col * m + c] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = a[r * m + col];
                    if f != 0.0 {
                        for c in 0..m {
                            a[r * m + c] -= f * a[col * m + c];
                            inv[r * m + c] -= f * inv[col * m + c];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.pivots_since_refactor = 0;
        Ok(())
    }

    /// Basic values given the nonbasic variables parked at their bounds.
    fn compute_xb(&mut self) {
        let m = self.m;
        let mut eff = self.rhs.clone();
        for j in 0..self.cols.len() {
            if !self.in_basis[j] && self.at_upper[j] {
                let u = self.upper[j];
                if u != 0.0 {
                    for i in 0..m {
                        eff[i] -= self.cols[j][i] * u;
                    }
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = dot(row, &eff);
        }
    }

    /// Row prices `y = c_Bᵀ B⁻¹` for an arbitrary objective.
    fn prices(&self, obj: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &j) in self.basis.iter().enumerate() {
            let cb = obj[j];
            if cb != 0.0 {
                for r in 0..m {
                    y[r] += cb * self.binv[i * m + r];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.obj[j] - dot(y, &self.cols[j])
    }

    fn run_phase(&mut self) -> Result<PhaseEnd, LpError> {
        loop {
            self.iterations += 1;
            if self.iterations > self.iteration_cap {
                return Err(LpError::IterationLimit(self.iteration_cap));
            }
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                self.compute_xb();
            }
            let y = self.prices(&self.obj);

            // Entering column: a nonbasic variable whose reduced cost says
            // the objective improves by moving off its bound.
            let mut entering: Option<(usize, f64, bool)> = None; // (col, score, from_upper)
            for j in 0..self.cols.len() {
                if self.in_basis[j] || self.upper[j] == 0.0 {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let (eligible, score) = if self.at_upper[j] {
                    (d < -DUAL_TOL, -d)
                } else {
                    (d > DUAL_TOL, d)
                };
                if !eligible {
                    continue;
                }
                match (self.bland, &entering) {
                    (true, _) => {
                        entering = Some((j, score, self.at_upper[j]));
                        break; // smallest index
                    }
                    (false, Some((_, best, _))) if score <= *best => {}
                    (false, _) => entering = Some((j, score, self.at_upper[j])),
                }
            }
            let Some((q, _, from_upper)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            // Direction of basic change: increasing x_q from its lower
            // bound moves x_B by -w per unit; decreasing from the upper
            // bound moves it by +w.
            let m = self.m;
            let mut w = vec![0.0; m];
            for i in 0..m {
                w[i] = dot(&self.binv[i * m..(i + 1) * m], &self.cols[q]);
            }
            let sign = if from_upper { -1.0 } else { 1.0 };

            let mut theta = self.upper[q]; // own-bound flip
            let mut leave: Option<(usize, bool)> = None; // (row, leaving_to_upper)
            for i in 0..m {
                let wi = sign * w[i];
                let jb = self.basis[i];
                let (limit, to_upper) = if wi > PIVOT_TOL {
                    (self.xb[i].max(0.0) / wi, false)
                } else if wi < -PIVOT_TOL && self.upper[jb].is_finite() {
                    ((self.upper[jb] - self.xb[i]).max(0.0) / -wi, true)
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < theta - 1e-12,
                    Some((r, _)) => {
                        limit < theta - 1e-12
                            || (limit < theta + 1e-12
                                && if self.bland {
                                    self.basis[i] < self.basis[r]
                                } else {
                                    (sign * w[i]).abs() > (sign * w[r]).abs()
                                })
                    }
                };
                if better || (leave.is_none() && limit <= theta) {
                    theta = limit.min(theta);
                    leave = Some((i, to_upper));
                }
            }

            if theta.is_infinite() {
                return Ok(PhaseEnd::Unbounded);
            }
            if theta <= 1e-11 {
                self.degenerate_streak += 1;
                if self.degenerate_streak >= DEGENERATE_STREAK {
                    self.bland = true;
                }
            } else {
                self.degenerate_streak = 0;
            }

            match leave {
                // The entering variable runs to its opposite bound: no
                // basis change, just flip its status.
                None => {
                    self.at_upper[q] = !from_upper;
                    self.compute_xb();
                }
                Some((r, to_upper)) => {
                    let jl = self.basis[r];
                    // Pivot binv on row r with direction w.
                    let wr = w[r];
                    debug_assert!(wr.abs() > PIVOT_TOL / 10.0);
                    for c in 0..m {
                        self.binv[r * m + c] /= wr;
                    }
                    for i in 0..m {
                        if i != r {
                            let f = w[i];
                            if f != 0.0 {
                                for c in 0..m {
                                    self.binv[i * m + c] -= f * self.binv[r * m + c];
                                }
                            }
                        }
                    }
                    self.basis[r] = q;
                    self.in_basis[q] = true;
                    self.in_basis[jl] = false;
                    self.at_upper[jl] = to_upper && self.upper[jl].is_finite();
                    self.at_upper[q] = false;
                    self.pivots_since_refactor += 1;
                    self.compute_xb();
                }
            }
        }
    }

    fn full_solution(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.cols.len()];
        for j in 0..self.cols.len() {
            if !self.in_basis[j] && self.at_upper[j] && self.upper[j].is_finite() {
                x[j] = self.upper[j];
            }
        }
        for (i, &j) in self.basis.iter().enumerate() {
            x[j] = self.xb[i];
        }
        x
    }
}

/// Solves the LP. Returns an optimal basic solution with row duals, or a
/// certified infeasible/unbounded status.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    let mut s = Simplex::new(p);

    if !s.artificials.is_empty() {
        for &a in &s.artificials {
            s.obj[a] = -1.0;
        }
        match s.run_phase()? {
            PhaseEnd::Unbounded => unreachable!("phase-1 objective is bounded above by zero"),
            PhaseEnd::Optimal => {}
        }
        let x = s.full_solution();
        let infeasibility: f64 = s.artificials.iter().map(|&a| x[a]).sum();
        let scale = 1.0 + p.rhs.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if infeasibility > 1e-7 * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                y: Vec::new(),
                value: f64::NEG_INFINITY,
            });
        }
        // Lock artificials at zero for phase 2.
        for &a in s.artificials.clone().iter() {
            s.obj[a] = 0.0;
            s.upper[a] = 0.0;
            s.at_upper[a] = false;
        }
    }

    for j in 0..p.num_vars() {
        s.obj[j] = p.objective[j];
    }
    for j in p.num_vars()..s.cols.len() {
        s.obj[j] = 0.0;
    }
    s.bland = false;
    s.degenerate_streak = 0;
    match s.run_phase()? {
        PhaseEnd::Unbounded => Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            y: Vec::new(),
            value: f64::INFINITY,
        }),
        PhaseEnd::Optimal => {
            s.refactor()?;
            s.compute_xb();
            let full = s.full_solution();
            let x: Vec<f64> = full[..p.num_vars()].to_vec();
            let y = s.prices(&s.obj);
            // Duals of <= rows are nonnegative at optimality; clamp the
            // residual negative round-off.
            let y = y.into_iter().map(|v| v.max(0.0)).collect();
            let value = dot(&p.objective, &x);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                x,
                y,
                value,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Brute-force vertex oracle
// ---------------------------------------------------------------------------

const ORACLE_LIMIT: usize = 14;

/// Exact optimum by enumerating every candidate basic point of
/// `{0 ≤ x ≤ u, Gx ≤ g}`: all choices of `N` active constraints among the
/// bound and row constraints. Exponential; only for `M + N ≤ 14`.
pub fn vertex_oracle(p: &LpProblem) -> Result<LpSolution, LpError> {
    let n = p.num_vars();
    let m = p.num_rows();
    if m + n > ORACLE_LIMIT {
        return Err(LpError::OracleTooLarge {
            limit: ORACLE_LIMIT,
            got: m + n,
        });
    }
    // Candidate active constraints as (normal, rhs) pairs.
    let mut normals: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        normals.push(e.clone());
        rhs.push(0.0);
        if p.upper[j].is_finite() {
            normals.push(e);
            rhs.push(p.upper[j]);
        }
    }
    for i in 0..m {
        normals.push((0..n).map(|j| p.constraints.get(i, j)).collect());
        rhs.push(p.rhs[i]);
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    let total = normals.len();
    if total < n {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            y: Vec::new(),
            value: f64::NEG_INFINITY,
        });
    }
    loop {
        // Solve the n x n active system.
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n];
        for (r, &ci) in subset.iter().enumerate() {
            a[r * n..(r + 1) * n].copy_from_slice(&normals[ci]);
            b[r] = rhs[ci];
        }
        if let Some(x) = solve_dense(&mut a, &mut b, n) {
            if is_feasible(p, &x) {
                let v = dot(&p.objective, &x);
                if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
                    best = Some((v, x));
                }
            }
        }
        // Next n-combination of [0, total).
        let mut i = n;
        loop {
            if i == 0 {
                match best {
                    Some((value, x)) => {
                        return Ok(LpSolution {
                            status: LpStatus::Optimal,
                            x,
                            y: Vec::new(),
                            value,
                        })
                    }
                    None => {
                        return Ok(LpSolution {
                            status: LpStatus::Infeasible,
                            x: Vec::new(),
                            y: Vec::new(),
                            value: f64::NEG_INFINITY,
                        })
                    }
                }
            }
            i -= 1;
            if subset[i] != i + total - n {
                subset[i] += 1;
                for r in i + 1..n {
                    subset[r] = subset[r - 1] + 1;
                }
                break;
            }
        }
    }
}

fn is_feasible(p: &LpProblem, x: &[f64]) -> bool {
    let tol = 1e-8;
    for j in 0..p.num_vars() {
        if x[j] < -tol || x[j] > p.upper[j] + tol {
            return false;
        }
    }
    let gx = p.constraints.mul_vec(x);
    gx.iter().zip(&p.rhs).all(|(v, g)| *v <= g + tol)
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[piv * n + col].abs() {
                piv = r;
            }
        }
        if a[piv * n + col].abs() < 1e-11 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f != 0.0 {
                for c in col..n {
                    a[r * n + c] -= f * a[col * n + c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut v = b[r];
        for c in r + 1..n {
            v -= a[r * n + c] * x[c];
        }
        x[r] = v / a[r * n + r];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// Offline optimum of an allocation instance
// ---------------------------------------------------------------------------

/// Offline optimum `P*` with an optimal assignment and the budget duals.
#[derive(Debug, Clone)]
pub struct OfflineSolution {
    pub p_star: f64,
    pub decisions: Vec<Decision>,
    /// Duals of the `m` budget rows.
    pub duals: Vec<f64>,
}

/// Assembles and solves the block LP of an instance.
///
/// Layout: the `m` budget rows come first. Linear items contribute `k`
/// variables in `[0,1]`; for `k > 1` a per-item row caps their sum at one
/// (the equality-domain family gets the matching `≥` row as well). Scalar
/// concave items are replaced by their [`CONCAVE_CHORDS`]-piece
/// piecewise-linear upper approximation: one `[0, 1/chords]` variable per
/// chord, sharing the item's consumption column. Since chord slopes are
/// nonincreasing, the LP fills them in order and the sum reassembles the
/// item's decision.
pub fn offline_optimum(instance: &Instance) -> Result<OfflineSolution, LpError> {
    solve_block(instance.items(), instance.m(), instance.b())
}

/// [`offline_optimum`] over a raw item slice with an explicit budget; lets
/// prefix estimators solve sub-problems without materializing an instance.
pub(crate) fn solve_block(
    items: &[crate::model::Item],
    m: usize,
    b: &[f64],
) -> Result<OfflineSolution, LpError> {
    let n = items.len();
    if n == 0 {
        return Ok(OfflineSolution {
            p_star: 0.0,
            decisions: Vec::new(),
            duals: vec![0.0; m],
        });
    }

    // First pass: count variables and extra rows.
    let mut num_vars = 0usize;
    let mut extra_rows = 0usize;
    for item in items {
        match &item.f {
            UtilityFunction::LinearSimplex { c } => {
                num_vars += c.len();
                if c.len() > 1 {
                    extra_rows += 1;
                }
            }
            UtilityFunction::LinearSimplexEq { c } => {
                num_vars += c.len();
                extra_rows += 2;
            }
            _ => num_vars += CONCAVE_CHORDS,
        }
    }

    let rows = m + extra_rows;
    let mut g = Matrix::zeros(rows, num_vars);
    let mut rhs = vec![0.0; rows];
    rhs[..m].copy_from_slice(b);
    let mut objective = vec![0.0; num_vars];
    let mut upper = vec![0.0; num_vars];

    // (start column, width) per item for decision recovery.
    let mut spans = Vec::with_capacity(n);
    let mut col = 0usize;
    let mut row = m;
    for item in items {
        let start = col;
        match &item.f {
            UtilityFunction::LinearSimplex { c } | UtilityFunction::LinearSimplexEq { c } => {
                let eq = matches!(item.f, UtilityFunction::LinearSimplexEq { .. });
                for (j, &cj) in c.iter().enumerate() {
                    objective[col] = cj;
                    upper[col] = 1.0;
                    for i in 0..m {
                        g.set(i, col, item.a.get(i, j));
                    }
                    if c.len() > 1 || eq {
                        g.set(row, col, 1.0);
                        if eq {
                            g.set(row + 1, col, -1.0);
                        }
                    }
                    col += 1;
                }
                if c.len() > 1 || eq {
                    rhs[row] = 1.0;
                    row += 1;
                    if eq {
                        rhs[row] = -1.0;
                        row += 1;
                    }
                }
            }
            f => {
                // Chord slopes of the scalar concave utility.
                let pieces = CONCAVE_CHORDS as f64;
                let mut prev = 0.0;
                for s in 0..CONCAVE_CHORDS {
                    let xr = (s + 1) as f64 / pieces;
                    let fr = f.eval(&[xr]).expect("scalar").expect("unit domain");
                    objective[col] = (fr - prev) * pieces;
                    prev = fr;
                    upper[col] = 1.0 / pieces;
                    for i in 0..m {
                        g.set(i, col, item.a.get(i, 0));
                    }
                    col += 1;
                }
            }
        }
        spans.push((start, col - start));
    }

    let p = LpProblem::new(objective, g, rhs, upper)?;
    let sol = solve_lp(&p)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(LpError::Invalid(
                "offline block LP reported infeasible".into(),
            ))
        }
        LpStatus::Unbounded => {
            return Err(LpError::Invalid(
                "offline block LP reported unbounded".into(),
            ))
        }
    }

    let mut decisions = Vec::with_capacity(n);
    for (item, &(start, width)) in items.iter().zip(&spans) {
        let x = if item.f.is_scalar_concave() {
            vec![sol.x[start..start + width].iter().sum::<f64>().clamp(0.0, 1.0)]
        } else {
            sol.x[start..start + width].to_vec()
        };
        decisions.push(Decision { x });
    }

    Ok(OfflineSolution {
        p_star: sol.value,
        decisions,
        duals: sol.y[..m].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Item, Matrix};

    fn lp(c: &[f64], rows: &[Vec<f64>], g: &[f64], u: &[f64]) -> LpProblem {
        LpProblem::new(
            c.to_vec(),
            Matrix::from_rows(rows).unwrap(),
            g.to_vec(),
            u.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn single_variable() {
        let p = lp(&[1.0], &[vec![1.0]], &[1.0], &[f64::INFINITY]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.y[0] - 1.0).abs() < 1e-9);
        s.verify(&p).unwrap();
    }

    #[test]
    fn two_variables_one_row() {
        let p = lp(
            &[3.0, 1.0],
            &[vec![1.0, 1.0]],
            &[1.0],
            &[1.0, 1.0],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 3.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert!(s.x[1].abs() < 1e-12);
        s.verify(&p).unwrap();
    }

    #[test]
    fn unbounded_detected() {
        let p = lp(&[1.0], &[vec![-1.0]], &[1.0], &[f64::INFINITY]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_detected() {
        // x <= 1 and -x <= -3 cannot both hold with x in [0, 2].
        let p = lp(&[1.0], &[vec![1.0], vec![-1.0]], &[1.0, -3.0], &[2.0]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn phase_one_handles_negative_rhs() {
        // -x1 - x2 <= -1 forces x1 + x2 >= 1.
        let p = lp(
            &[-2.0, -3.0],
            &[vec![-1.0, -1.0]],
            &[-1.0],
            &[1.0, 1.0],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value + 2.0).abs() < 1e-9, "value {}", s.value);
        s.verify(&p).unwrap();
    }

    #[test]
    fn equality_via_row_pair() {
        // x1 + x2 = 1 exactly, maximize 2x1 + x2.
        let p = lp(
            &[2.0, 1.0],
            &[vec![1.0, 1.0], vec![-1.0, -1.0]],
            &[1.0, -1.0],
            &[1.0, 1.0],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn matches_oracle_on_small_problems() {
        let mut rng = crate::generators::Rng::new(0x5EED);
        for trial in 0..60 {
            let n = 2 + (rng.next_u64() % 4) as usize;
            let m = 1 + (rng.next_u64() % 4) as usize;
            let p = random_problem(&mut rng, n, m);
            let s = solve_lp(&p).unwrap();
            let o = vertex_oracle(&p).unwrap();
            assert_eq!(s.status, LpStatus::Optimal, "trial {trial}");
            assert_eq!(o.status, LpStatus::Optimal, "trial {trial}");
            assert!(
                (s.value - o.value).abs() <= 1e-6 * (1.0 + o.value.abs()),
                "trial {trial}: simplex {} vs oracle {}",
                s.value,
                o.value
            );
            s.verify(&p).unwrap();
        }
    }

    pub(crate) fn random_problem(rng: &mut crate::generators::Rng, n: usize, m: usize) -> LpProblem {
        let c: Vec<f64> = (0..n).map(|_| rng.next_f64() * 2.0 - 0.3).collect();
        let mut rows = Vec::with_capacity(m);
        let mut g = Vec::with_capacity(m);
        for _ in 0..m {
            rows.push(
                (0..n)
                    .map(|_| if rng.next_f64() < 0.7 { rng.next_f64() } else { 0.0 })
                    .collect::<Vec<f64>>(),
            );
            g.push(0.2 + rng.next_f64());
        }
        let u: Vec<f64> = (0..n).map(|_| 0.3 + 1.5 * rng.next_f64()).collect();
        LpProblem::new(c, Matrix::from_rows(&rows).unwrap(), g, u).unwrap()
    }

    #[test]
    fn offline_single_item() {
        let item = Item::new(
            UtilityFunction::LinearSimplex { c: vec![4.0] },
            Matrix::column(&[1.0]),
        )
        .unwrap();
        let inst = Instance::new(1, 1, vec![1.0], vec![item]).unwrap();
        let off = offline_optimum(&inst).unwrap();
        assert!((off.p_star - 4.0).abs() < 1e-9);
        assert!(off.duals[0] >= -1e-9 && off.duals[0] <= 4.0 + 1e-9);
    }

    #[test]
    fn offline_budget_binds() {
        let mk = || {
            Item::new(
                UtilityFunction::LinearSimplex { c: vec![1.0] },
                Matrix::column(&[1.0]),
            )
            .unwrap()
        };
        let inst = Instance::new(1, 1, vec![1.0], vec![mk(), mk()]).unwrap();
        let off = offline_optimum(&inst).unwrap();
        assert!((off.p_star - 1.0).abs() < 1e-9);
        // The returned assignment respects the budget and reproduces P*.
        let cons = inst.consumption(&off.decisions).unwrap();
        assert!(cons[0] <= 1.0 + 1e-9);
        let obj = inst.objective(&off.decisions).unwrap().unwrap();
        assert!((obj - off.p_star).abs() < 1e-9);
    }

    #[test]
    fn offline_concave_chords_track_true_value() {
        // One sqrt item, budget 0.25: optimum is sqrt(0.25) = 0.5 exactly,
        // reached at the budget; the chord approximation is exact at grid
        // points (0.25 = 16/64).
        let item = Item::new(
            UtilityFunction::ConcavePower { a: 1.0, p: 0.5 },
            Matrix::column(&[1.0]),
        )
        .unwrap();
        let inst = Instance::new(1, 1, vec![0.25], vec![item]).unwrap();
        let off = offline_optimum(&inst).unwrap();
        assert!((off.p_star - 0.5).abs() < 1e-9, "got {}", off.p_star);
        assert!((off.decisions[0].x[0] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn offline_equality_domain_forces_choice() {
        // Two equality items with zero utility: P* = 0 but a feasible
        // assignment must still pick a vertex of each simplex.
        let mk = || {
            Item::new(
                UtilityFunction::LinearSimplexEq { c: vec![0.0, 0.0] },
                Matrix::from_rows(&[vec![0.6, 0.2]]).unwrap(),
            )
            .unwrap()
        };
        let inst = Instance::new(1, 2, vec![1.0], vec![mk(), mk()]).unwrap();
        let off = offline_optimum(&inst).unwrap();
        assert!(off.p_star.abs() < 1e-9);
        for d in &off.decisions {
            let sum: f64 = d.x.iter().sum();
            assert!((sum - 1.0).abs() < 1e-8, "not on the simplex: {:?}", d.x);
        }
    }

    #[test]
    fn offline_single_item_matches_vertex_formula() {
        // For one linear item the optimum is the best option at its
        // budget-limited level: max_j c_j * min(1, min_i b_i / A_ij).
        let mut rng = crate::generators::Rng::new(41);
        for _ in 0..30 {
            let inst = crate::generators::random_linear_instance(1, 3, 3, 0.8, rng.next_u64());
            let item = &inst.items()[0];
            let UtilityFunction::LinearSimplex { c } = &item.f else {
                unreachable!()
            };
            let mut best = 0.0_f64;
            for (j, &cj) in c.iter().enumerate() {
                let mut level = 1.0_f64;
                for i in 0..inst.m() {
                    let a = item.a.get(i, j);
                    if a > 0.0 {
                        level = level.min(inst.b()[i] / a);
                    }
                }
                best = best.max(cj * level);
            }
            let off = offline_optimum(&inst).unwrap();
            assert!(
                (off.p_star - best).abs() <= 1e-8 * (1.0 + best),
                "lp {} vs vertex formula {best}",
                off.p_star
            );
        }
    }

    #[test]
    fn offline_monotone_in_budget() {
        let mut rng = crate::generators::Rng::new(77);
        for _ in 0..20 {
            let inst = crate::generators::random_linear_instance(8, 2, 2, 0.8, rng.next_u64());
            let off1 = offline_optimum(&inst).unwrap();
            let bigger: Vec<f64> = inst.b().iter().map(|v| v * 1.5).collect();
            let inst2 = Instance::new(
                inst.m(),
                inst.k(),
                bigger,
                inst.items().to_vec(),
            )
            .unwrap();
            let off2 = offline_optimum(&inst2).unwrap();
            assert!(off2.p_star >= off1.p_star - 1e-9);
        }
    }
}
