//! The online algorithms: the exponentiated-subgradient method (with its
//! prefix-based optimum estimator), the feasibility-problem greedy, and
//! the dual-estimate baselines it is benchmarked against.
//!
//! Every runner consumes a fixed instance plus an arrival permutation and
//! produces a [`RunResult`] over the *guarded* decisions: a decision is
//! kept only while the cumulative raw consumption still fits the budget,
//! so every reported objective is feasible by construction. The guard uses
//! the raw cumulative sum exactly as specified — before the first
//! violation raw and kept consumption coincide, and afterwards all
//! acceptances freeze. The alternative guard over kept consumption only is
//! available behind [`GuardRule::CheckedCumulative`] for experiments.
//!
//! Runs are deterministic: identical `(instance, permutation, parameters)`
//! produce bit-identical decision sequences.

use crate::lp::{self, LpError, OfflineSolution};
use crate::model::{Decision, Instance, Item, ModelError, RunResult};
use crate::schedule::{self, Schedule, ScheduleError};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgoError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Which cumulative sum the acceptance guard compares against the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuardRule {
    /// Literal rule: `Σ A_{σ(s)} x_s ≤ b` over the raw decisions. Once
    /// violated, every later decision is zeroed.
    #[default]
    RawCumulative,
    /// Experimental alternative: compare against the kept decisions only,
    /// so rejected steps do not consume guard headroom.
    CheckedCumulative,
}

/// Relative magnitude of the utility perturbation applied to the
/// dual-estimate LPs of the baseline runners (see [`RunOptions::noise`]).
pub const DUAL_NOISE_REL: f64 = 1e-7;

/// Nondegeneracy noise for the baselines' prefix LPs.
///
/// On adversarially degenerate instances whole item classes sit at exactly
/// zero reduced cost against every optimal dual, so a fixed-basis solver
/// makes the entire class's accept/reject fate flip on the last bit of the
/// dual. Floating-point LP solvers resolve that fate effectively at
/// random; a seeded relative perturbation of the prefix utilities
/// (`DUAL_NOISE_REL`) reproduces that generic behavior deterministically.
/// The solver itself and the assignment rule stay exact. The
/// exponentiated-subgradient runner needs no noise: its dual weights are
/// never degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualNoise {
    Seeded(u64),
    Off,
}

impl Default for DualNoise {
    fn default() -> Self {
        DualNoise::Seeded(0)
    }
}

/// Knobs shared by all runners.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub guard: GuardRule,
    /// Nondegeneracy noise for baseline dual estimates.
    pub noise: DualNoise,
}

impl RunOptions {
    pub fn with_noise_seed(seed: u64) -> Self {
        RunOptions {
            guard: GuardRule::default(),
            noise: DualNoise::Seeded(seed),
        }
    }
}

/// Copies a prefix into `buf`, perturbing each utility coefficient by a
/// relative `DUAL_NOISE_REL` draw when noise is on.
fn fill_prefix(buf: &mut Vec<Item>, prefix: &[&Item], rng: Option<&mut crate::generators::Rng>) {
    buf.clear();
    buf.extend(prefix.iter().map(|&it| it.clone()));
    let Some(rng) = rng else { return };
    let mut wiggle = |v: &mut f64| *v *= 1.0 + DUAL_NOISE_REL * (2.0 * rng.next_f64() - 1.0);
    for item in buf.iter_mut() {
        match &mut item.f {
            crate::model::UtilityFunction::LinearSimplex { c }
            | crate::model::UtilityFunction::LinearSimplexEq { c } => {
                c.iter_mut().for_each(&mut wiggle)
            }
            crate::model::UtilityFunction::ConcavePower { a, .. }
            | crate::model::UtilityFunction::ConcaveLog { a, .. } => wiggle(a),
        }
    }
}

/// Guard slack: accepts loads up to `b·(1 + 1e−12)` so that an item
/// exactly filling the budget is not lost to rounding.
const GUARD_REL_TOL: f64 = 1e-12;

/// Acceptance bookkeeping shared by every algorithm: raw and kept
/// consumption, kept utility, and the guarded decision sequence.
#[derive(Debug, Clone)]
struct GuardedLedger {
    raw: Vec<f64>,
    checked: Vec<f64>,
    utility: f64,
    decisions: Vec<Decision>,
    rule: GuardRule,
    load_buf: Vec<f64>,
}

impl GuardedLedger {
    fn new(m: usize, n: usize, rule: GuardRule) -> Self {
        GuardedLedger {
            raw: vec![0.0; m],
            checked: vec![0.0; m],
            utility: 0.0,
            decisions: Vec::with_capacity(n),
            rule,
            load_buf: vec![0.0; m],
        }
    }

    fn skip(&mut self, k: usize) {
        self.decisions.push(Decision::zero(k));
    }

    /// Applies the guard to a raw decision; records the kept decision and
    /// returns whether it was accepted.
    fn admit(&mut self, item: &Item, x: Decision, b: &[f64]) -> bool {
        item.a.mul_vec_into(&x.x, &mut self.load_buf);
        let basis = match self.rule {
            GuardRule::RawCumulative => &self.raw,
            GuardRule::CheckedCumulative => &self.checked,
        };
        let fits = basis
            .iter()
            .zip(&self.load_buf)
            .zip(b)
            .all(|((cur, load), bi)| cur + load <= bi * (1.0 + GUARD_REL_TOL));
        for (r, load) in self.raw.iter_mut().zip(&self.load_buf) {
            *r += load;
        }
        if fits {
            for (c, load) in self.checked.iter_mut().zip(&self.load_buf) {
                *c += load;
            }
            self.utility += item
                .f
                .eval(&x.x)
                .expect("dims validated")
                .expect("assignment stays in the domain");
            self.decisions.push(x);
        } else {
            self.decisions.push(Decision::zero(x.x.len()));
        }
        fits
    }

    /// Finalizes the run, mapping the arrival-ordered decisions back to
    /// original item order so `decisions[i]` belongs to `instance.item(i)`.
    fn finish(self, instance: &Instance, perm: &[usize], started: Instant) -> RunResult {
        let feasible = instance.within_budget(&self.checked);
        let mut decisions = vec![Decision::zero(0); self.decisions.len()];
        for (pos, d) in self.decisions.into_iter().enumerate() {
            decisions[perm[pos]] = d;
        }
        RunResult {
            decisions,
            objective: self.utility,
            consumption: self.checked,
            feasible,
            elapsed: started.elapsed().as_secs_f64(),
        }
    }
}

fn check_permutation(instance: &Instance, perm: &[usize]) -> Result<(), AlgoError> {
    if perm.len() != instance.n() {
        return Err(AlgoError::Invalid(format!(
            "permutation has {} entries for {} items",
            perm.len(),
            instance.n()
        )));
    }
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(AlgoError::Invalid("not a permutation".into()));
        }
        seen[p] = true;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Prefix estimators
// ---------------------------------------------------------------------------

/// Horizon fraction of estimate level `h`: `2ʰ·ε`, capped at one half to
/// mirror the breakpoint cap at `⌊n/2⌋`.
fn level_fraction(h: usize, eps: f64) -> f64 {
    (2f64.powi(h as i32) * eps).min(0.5)
}

/// Prefix-based estimate of the offline optimum from the first
/// `round(nε)·2ʰ` arrivals: solves the prefix allocation with the budget
/// scaled to `2ʰε(1+θ_h)·b` and divides the value by `2ʰε(1−θ_h)`.
pub fn estimate_prefix_value(
    prefix_items: &[Item],
    h: usize,
    eps: f64,
    m: usize,
    b: &[f64],
) -> Result<f64, LpError> {
    let th = schedule::theta(h, eps);
    let frac = level_fraction(h, eps);
    let scaled: Vec<f64> = b.iter().map(|v| v * frac * (1.0 + th)).collect();
    let sol = lp::solve_block(prefix_items, m, &scaled)?;
    Ok(sol.p_star.max(0.0) / (frac * (1.0 - th)))
}

/// Dual estimate from the first `round(nε)·2ʰ` arrivals: budget duals of
/// the prefix allocation with budget scaled by `2ʰε(1 − 2^{−h/2}√ε)`.
pub fn dual_estimate(
    prefix_items: &[Item],
    h: usize,
    eps: f64,
    m: usize,
    b: &[f64],
) -> Result<DualVector, LpError> {
    let shrink = 1.0 - 2f64.powf(-(h as f64) / 2.0) * eps.sqrt();
    let frac = level_fraction(h, eps);
    let scaled: Vec<f64> = b.iter().map(|v| v * frac * shrink).collect();
    let sol = lp::solve_block(prefix_items, m, &scaled)?;
    Ok(DualVector { y: sol.duals })
}

/// A fixed estimate of the optimal budget duals, used between recomputes.
#[derive(Debug, Clone)]
pub struct DualVector {
    pub y: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Exponentiated subgradient
// ---------------------------------------------------------------------------

/// Exponent differences are clamped here before exponentiation; beyond
/// this point the decision is forced regardless, and the clamp keeps
/// `0 · exp(·)` from producing NaN.
const EXP_CLAMP: f64 = 600.0;

/// The evolving dual pair `(y, y′)` plus the current optimum estimate and
/// acceptance ledger. The duals are kept in log space; only ratios are
/// ever exponentiated, so the multiplicative updates cannot overflow.
#[derive(Debug, Clone)]
pub struct EsaState {
    /// Next step index to process (1-based position in the arrival order).
    pub t: usize,
    log_y: Vec<f64>,
    log_y_prime: f64,
    /// Current estimate of the offline optimum.
    pub q: f64,
    ledger: GuardedLedger,
}

impl EsaState {
    /// Initial state per the update rule: `y′ = exp(β′_{nε+1})`,
    /// `y_i = exp(−β_{nε+1})/m`.
    fn init(sched: &Schedule, m: usize, n: usize, rule: GuardRule) -> Self {
        let t0 = sched.n_eps + 1;
        EsaState {
            t: t0,
            log_y: vec![-sched.beta(t0) - (m as f64).ln(); m],
            log_y_prime: sched.beta_prime(t0),
            q: sched.eps,
            ledger: GuardedLedger::new(m, n, rule),
        }
    }

    /// Builds a state with explicit duals; the entry point for composing
    /// the assignment rule outside a full run (tests, diagnostics).
    pub fn from_duals(y: &[f64], y_prime: f64, q: f64) -> Self {
        assert!(y.iter().all(|&v| v > 0.0) && y_prime > 0.0 && q > 0.0);
        EsaState {
            t: 1,
            log_y: y.iter().map(|v| v.ln()).collect(),
            log_y_prime: y_prime.ln(),
            q,
            ledger: GuardedLedger::new(y.len(), 0, GuardRule::RawCumulative),
        }
    }

    /// Current dual weights `y` (exponentiated).
    pub fn y(&self) -> Vec<f64> {
        self.log_y.iter().map(|v| v.exp()).collect()
    }

    pub fn y_prime(&self) -> f64 {
        self.log_y_prime.exp()
    }

    pub fn raw_consumption(&self) -> &[f64] {
        &self.ledger.raw
    }

    pub fn checked_consumption(&self) -> &[f64] {
        &self.ledger.checked
    }

    pub fn utility(&self) -> f64 {
        self.ledger.utility
    }

    /// The rescaled dual vector `y″ = (q/y′)·[y_i/b_i]` fed to the
    /// conjugate assignment.
    fn rescaled_duals(&self, b: &[f64]) -> Vec<f64> {
        self.log_y
            .iter()
            .zip(b)
            .map(|(ly, bi)| self.q * (ly - self.log_y_prime).min(EXP_CLAMP).exp() / bi)
            .collect()
    }

    /// Chooses `x_t` as the minimizer of
    /// `Σ_i (y_i/b_i)(A z)_i − (y′/q)·f(z)`: dividing through by
    /// `y′/q > 0` leaves `argmin y″ᵀA z − f(z)`, i.e. a supergradient
    /// inversion of the conjugate at `Aᵀy″`.
    pub fn assign(&self, item: &Item, b: &[f64]) -> Decision {
        let y_dd = self.rescaled_duals(b);
        let v = item.a.tr_mul_vec(&y_dd);
        item.f.assign_from_dual(&v).expect("dims validated")
    }

    /// Multiplicative dual update with the step sizes and normalizers of
    /// step `t`: `y_i ← y_i·exp(ν(Ax)_i/b_i − β_{t+1})`,
    /// `y′ ← y′·exp(−ν′f(x)/q + β′_{t+1})`. Advances `t`.
    pub fn update(&mut self, item: &Item, x: &Decision, sched: &Schedule, b: &[f64]) {
        let beta_next = sched.beta(self.t + 1);
        let beta_prime_next = sched.beta_prime(self.t + 1);
        self.update_raw(item, x, sched.nu, sched.nu_prime, beta_next, beta_prime_next, b);
    }

    fn update_raw(
        &mut self,
        item: &Item,
        x: &Decision,
        nu: f64,
        nu_prime: f64,
        beta_next: f64,
        beta_prime_next: f64,
        b: &[f64],
    ) {
        let load = item.a.mul_vec(&x.x);
        for ((ly, l), bi) in self.log_y.iter_mut().zip(&load).zip(b) {
            *ly += nu * l / bi - beta_next;
        }
        let fx = item
            .f
            .eval(&x.x)
            .expect("dims validated")
            .expect("assignment stays in the domain");
        self.log_y_prime += -nu_prime * fx / self.q + beta_prime_next;
        self.t += 1;
    }
}

/// Everything a run produces beyond its [`RunResult`]: the raw (unguarded)
/// decisions, the optimum estimate in force at each step, and the number
/// of LP solves, for diagnostics and counting invariants.
#[derive(Debug, Clone)]
pub struct RunTrace {
    /// Raw decision `x_t` per arrival position (zero during warmup).
    pub raw_decisions: Vec<Decision>,
    /// Estimate `q_t` per arrival position (NaN during warmup).
    pub q_values: Vec<f64>,
    pub lp_solves: usize,
}

/// The exponentiated-subgradient run: warmup rejections for the first
/// `round(nε)` arrivals, then per-step conjugate assignment and
/// multiplicative dual updates, with the optimum estimate refreshed from
/// the revealed prefix at each doubling breakpoint.
pub fn esa_run(
    instance: &Instance,
    perm: &[usize],
    eps: f64,
    gamma: f64,
) -> Result<RunResult, AlgoError> {
    esa_run_opts(instance, perm, eps, gamma, RunOptions::default()).map(|(r, _)| r)
}

/// [`esa_run`] with explicit options and the full trace.
pub fn esa_run_opts(
    instance: &Instance,
    perm: &[usize],
    eps: f64,
    gamma: f64,
    opts: RunOptions,
) -> Result<(RunResult, RunTrace), AlgoError> {
    check_permutation(instance, perm)?;
    let started = Instant::now();
    let n = instance.n();
    let m = instance.m();
    let b = instance.b();
    let sched = schedule::build_schedule(n, eps, gamma)?;
    let mut state = EsaState::init(&sched, m, n, opts.guard);
    let mut trace = RunTrace {
        raw_decisions: Vec::with_capacity(n),
        q_values: vec![f64::NAN; sched.n_eps],
        lp_solves: 0,
    };

    // Warmup: the first nε arrivals are observed but rejected.
    for _ in 0..sched.n_eps.min(n) {
        state.ledger.skip(instance.k());
        trace.raw_decisions.push(Decision::zero(instance.k()));
    }

    let ordered: Vec<&Item> = perm.iter().map(|&i| instance.item(i)).collect();
    let mut prefix_buf: Vec<Item> = Vec::with_capacity(n / 2 + 1);
    let mut next_bp = 0usize;

    for t in sched.n_eps + 1..=n {
        // Crossing breakpoint t_h refreshes q from the first t_h arrivals.
        while next_bp < sched.breakpoints.len() && sched.breakpoints[next_bp] < t {
            let len = sched.breakpoints[next_bp];
            fill_prefix(&mut prefix_buf, &ordered[..len], None);
            let p_h = estimate_prefix_value(&prefix_buf, next_bp, eps, m, b)?;
            trace.lp_solves += 1;
            state.q = if p_h == 0.0 { eps } else { p_h };
            next_bp += 1;
        }

        let item = ordered[t - 1];
        let x = state.assign(item, b);
        trace.raw_decisions.push(x.clone());
        trace.q_values.push(state.q);
        state.update(item, &x, &sched, b);
        state.ledger.admit(item, x, b);
    }

    let result = state.ledger.finish(instance, perm, started);
    Ok((result, trace))
}

// ---------------------------------------------------------------------------
// Feasibility greedy
// ---------------------------------------------------------------------------

/// Largest consumption entry across all items; the step-size scale of the
/// feasibility greedy.
pub fn max_entry_gamma(instance: &Instance) -> f64 {
    instance
        .items()
        .iter()
        .flat_map(|it| it.a.iter())
        .fold(0.0, f64::max)
}

/// The multiplicative-potential greedy for the unit-budget feasibility
/// problem: each arrival picks the simplex vertex minimizing
/// `Σ_i exp(ν·S_i)·(A z)_i` over the current cumulative loads `S`.
/// Returns the cumulative consumption path (one `m`-vector per step).
pub fn algorithm1_run(
    instance: &Instance,
    perm: &[usize],
    eps: f64,
    gamma: f64,
) -> Result<Vec<Vec<f64>>, AlgoError> {
    check_permutation(instance, perm)?;
    if instance.b().iter().any(|&v| v != 1.0) {
        return Err(AlgoError::Invalid("feasibility greedy needs b = 1".into()));
    }
    if !instance
        .items()
        .iter()
        .all(|it| matches!(it.f, crate::model::UtilityFunction::LinearSimplexEq { .. }))
    {
        return Err(AlgoError::Invalid(
            "feasibility greedy needs equality-simplex domains".into(),
        ));
    }
    if !(eps > 0.0 && eps < 1.0 && gamma > 0.0) {
        return Err(AlgoError::Invalid(format!(
            "need eps in (0,1) and gamma > 0, got {eps}, {gamma}"
        )));
    }
    let nu = (1.0 + eps).ln() / gamma;
    let m = instance.m();
    let mut loads = vec![0.0; m];
    let mut path = Vec::with_capacity(instance.n());
    let mut weights = vec![0.0; m];
    for &idx in perm {
        let item = instance.item(idx);
        // The argmin is invariant under positive scaling of the weights;
        // normalizing by the max exponent keeps them finite.
        let peak = loads.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(nu * v));
        for (w, &l) in weights.iter_mut().zip(&loads) {
            *w = (nu * l - peak).exp();
        }
        let v = item.a.tr_mul_vec(&weights);
        let x = item.f.assign_from_dual(&v).expect("dims validated");
        let step = item.a.mul_vec(&x.x);
        for (l, s) in loads.iter_mut().zip(&step) {
            *l += s;
        }
        path.push(loads.clone());
    }
    Ok(path)
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// One-time-learning baseline: a single dual estimate from the warmup
/// prefix (level 0), then fixed-dual assignment for the rest of the
/// horizon, guarded like every other runner.
pub fn ola_run(instance: &Instance, perm: &[usize], eps: f64) -> Result<RunResult, AlgoError> {
    ola_run_opts(instance, perm, eps, RunOptions::default()).map(|(r, _)| r)
}

pub fn ola_run_opts(
    instance: &Instance,
    perm: &[usize],
    eps: f64,
    opts: RunOptions,
) -> Result<(RunResult, RunTrace), AlgoError> {
    dual_baseline(instance, perm, eps, opts, false)
}

/// Dynamic-learning baseline: the dual estimate is recomputed from the
/// revealed prefix at every doubling breakpoint.
pub fn dla_run(instance: &Instance, perm: &[usize], eps: f64) -> Result<RunResult, AlgoError> {
    dla_run_opts(instance, perm, eps, RunOptions::default()).map(|(r, _)| r)
}

pub fn dla_run_opts(
    instance: &Instance,
    perm: &[usize],
    eps: f64,
    opts: RunOptions,
) -> Result<(RunResult, RunTrace), AlgoError> {
    dual_baseline(instance, perm, eps, opts, true)
}

fn dual_baseline(
    instance: &Instance,
    perm: &[usize],
    eps: f64,
    opts: RunOptions,
    dynamic: bool,
) -> Result<(RunResult, RunTrace), AlgoError> {
    check_permutation(instance, perm)?;
    let started = Instant::now();
    let n = instance.n();
    let m = instance.m();
    let b = instance.b();
    let n_eps = schedule::rounded_n_eps(n, eps)?;
    let breakpoints = schedule::refresh_breakpoints(n, eps)?;
    let mut ledger = GuardedLedger::new(m, n, opts.guard);
    let mut trace = RunTrace {
        raw_decisions: Vec::with_capacity(n),
        q_values: vec![f64::NAN; n],
        lp_solves: 0,
    };

    for _ in 0..n_eps.min(n) {
        ledger.skip(instance.k());
        trace.raw_decisions.push(Decision::zero(instance.k()));
    }

    let ordered: Vec<&Item> = perm.iter().map(|&i| instance.item(i)).collect();
    let mut prefix_buf: Vec<Item> = Vec::with_capacity(n);
    let mut dual: Option<DualVector> = None;
    let mut next_bp = 0usize;
    let mut noise_rng = match opts.noise {
        DualNoise::Seeded(seed) => Some(crate::generators::Rng::new(seed)),
        DualNoise::Off => None,
    };

    for t in n_eps + 1..=n {
        let refresh = match (&dual, dynamic) {
            (None, _) => true,
            (_, true) => next_bp < breakpoints.len() && breakpoints[next_bp] < t,
            _ => false,
        };
        if refresh {
            let len = breakpoints[next_bp];
            fill_prefix(&mut prefix_buf, &ordered[..len], noise_rng.as_mut());
            dual = Some(dual_estimate(&prefix_buf, next_bp, eps, m, b)?);
            trace.lp_solves += 1;
            next_bp += 1;
            // OLA stops after the single level-0 estimate.
        }
        let y = &dual.as_ref().expect("estimated before first assignment").y;
        let item = ordered[t - 1];
        let v = item.a.tr_mul_vec(y);
        let x = item.f.assign_from_dual(&v).expect("dims validated");
        trace.raw_decisions.push(x.clone());
        ledger.admit(item, x, b);
    }

    Ok((ledger.finish(instance, perm, started), trace))
}

/// Prefix-LP baseline: every `period` steps, re-solves the allocation over
/// all revealed items with the budget prorated to `t/n`, and assigns from
/// the fresh budget duals. `period = 1` recomputes at every arrival.
pub fn krtv_run(
    instance: &Instance,
    perm: &[usize],
    period: usize,
) -> Result<RunResult, AlgoError> {
    krtv_run_opts(instance, perm, period, RunOptions::default()).map(|(r, _)| r)
}

pub fn krtv_run_opts(
    instance: &Instance,
    perm: &[usize],
    period: usize,
    opts: RunOptions,
) -> Result<(RunResult, RunTrace), AlgoError> {
    check_permutation(instance, perm)?;
    if period == 0 {
        return Err(AlgoError::Invalid("period must be at least 1".into()));
    }
    let started = Instant::now();
    let n = instance.n();
    let m = instance.m();
    let b = instance.b();
    let mut ledger = GuardedLedger::new(m, n, opts.guard);
    let mut trace = RunTrace {
        raw_decisions: Vec::with_capacity(n),
        q_values: vec![f64::NAN; n],
        lp_solves: 0,
    };

    let ordered: Vec<&Item> = perm.iter().map(|&i| instance.item(i)).collect();
    let mut prefix_buf: Vec<Item> = Vec::with_capacity(n);
    let mut dual: Vec<f64> = vec![0.0; m];
    let mut noise_rng = match opts.noise {
        DualNoise::Seeded(seed) => Some(crate::generators::Rng::new(seed)),
        DualNoise::Off => None,
    };

    for t in 1..=n {
        if (t - 1) % period == 0 {
            let frac = t as f64 / n as f64;
            let scaled: Vec<f64> = b.iter().map(|v| v * frac).collect();
            fill_prefix(&mut prefix_buf, &ordered[..t], noise_rng.as_mut());
            let sol: OfflineSolution = lp::solve_block(&prefix_buf, m, &scaled)?;
            trace.lp_solves += 1;
            dual = sol.duals;
        }
        let item = ordered[t - 1];
        let v = item.a.tr_mul_vec(&dual);
        let x = item.f.assign_from_dual(&v).expect("dims validated");
        trace.raw_decisions.push(x.clone());
        ledger.admit(item, x, b);
    }

    Ok((ledger.finish(instance, perm, started), trace))
}
