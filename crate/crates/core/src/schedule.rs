//! Step-size and normalization schedules for the exponentiated-subgradient
//! run.
//!
//! Every quantity here is a pure function of `(n, ε, γ)`. The level maps
//! split the horizon into doubling buckets: `kappa` counts levels from the
//! *end* of the horizon (it drives the per-step normalizers `β_t`, `β′_t`),
//! while `eta` counts them from the *start* (it drives the optimum-estimate
//! level and the acceptance factor `α_t`).
//!
//! The closed forms assume `nε` and `log₂(1/ε)` are integers; arbitrary
//! `n` is handled by rounding `nε` to the nearest positive integer and
//! taking `L = ⌈log₂(1/ε)⌉`, then using those rounded values consistently:
//! breakpoints sit at `round(nε)·2ʰ`, capped at `⌊n/2⌋`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("gamma must be positive, got {0}")]
    BadGamma(f64),
    #[error("n*eps = {0} rounds below one; the schedule is undefined")]
    HorizonTooShort(f64),
    #[error("step {t} outside the domain [{lo}, {hi}]")]
    OutOfRange { t: usize, lo: usize, hi: usize },
}

/// Level of step `t` counted from the end: `kappa = h` iff
/// `n(1 − 2ʰε) < t ≤ n(1 − 2^{h−1}ε)`, computed as
/// `⌊log₂((n−t)/nε)⌋ + 1` and clamped to `[1, L]`.
pub fn kappa(t: usize, n: usize, eps: f64) -> Result<usize, ScheduleError> {
    let n_eps = rounded_n_eps(n, eps)?;
    let hi = n - n_eps;
    if t < 1 || t > hi {
        return Err(ScheduleError::OutOfRange { t, lo: 1, hi });
    }
    let levels = num_levels(eps);
    let q = (n - t) / n_eps;
    let level = q.ilog2() as usize + 1;
    Ok(level.min(levels))
}

/// Level of step `t` counted from the start: `eta = h` iff
/// `n·2^{h−1}ε < t ≤ n·2ʰε`, clamped to `L` beyond the last boundary.
/// Identically `kappa(n − t + 1)` on the shared domain.
pub fn eta(t: usize, n: usize, eps: f64) -> Result<usize, ScheduleError> {
    let n_eps = rounded_n_eps(n, eps)?;
    if t <= n_eps || t > n {
        return Err(ScheduleError::OutOfRange {
            t,
            lo: n_eps + 1,
            hi: n,
        });
    }
    let levels = num_levels(eps);
    let q = (t - 1) / n_eps;
    let level = q.ilog2() as usize + 1;
    Ok(level.min(levels))
}

/// Concentration margin of level `h`: `θ_h = 2^{−(h+1)/2}·√ε`.
pub fn theta(h: usize, eps: f64) -> f64 {
    2f64.powf(-((h as f64) + 1.0) / 2.0) * eps.sqrt()
}

/// `L = ⌈log₂(1/ε)⌉`, at least one level.
pub fn num_levels(eps: f64) -> usize {
    ((1.0 / eps).log2().ceil() as usize).max(1)
}

/// `round(nε)` clamped to at least one; errors when `nε < 1`.
pub fn rounded_n_eps(n: usize, eps: f64) -> Result<usize, ScheduleError> {
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(ScheduleError::BadEpsilon(eps));
    }
    let raw = n as f64 * eps;
    if raw < 1.0 {
        return Err(ScheduleError::HorizonTooShort(raw));
    }
    Ok((raw.round() as usize).max(1))
}

/// Estimate-refresh breakpoints `t_h = round(nε)·2ʰ` for
/// `h ∈ {0, …, L−1}`, capped at `⌊n/2⌋` and deduplicated. Because the
/// sequence is nondecreasing and duplicates only appear consecutively at
/// the cap, `breakpoints[h]` always belongs to level `h`.
pub fn refresh_breakpoints(n: usize, eps: f64) -> Result<Vec<usize>, ScheduleError> {
    let n_eps = rounded_n_eps(n, eps)?;
    let levels = num_levels(eps);
    let cap = (n / 2).max(n_eps);
    let mut breakpoints = Vec::with_capacity(levels);
    for h in 0..levels {
        let t_h = n_eps.saturating_mul(1usize << h).min(cap);
        if breakpoints.last() != Some(&t_h) {
            breakpoints.push(t_h);
        }
    }
    Ok(breakpoints)
}

/// Precomputed parameter tables for one `(n, ε, γ)` configuration.
///
/// `beta`/`beta_prime` cover `t ∈ {nε+1, …, n+1}` (the `n+1` entry exists
/// so the update at `t = n` is well defined, frozen at the
/// `t = n(1−ε)` value like the rest of the tail). `alpha` covers
/// `t ∈ {nε+1, …, n(1−ε)}` and clamps to its last value beyond that.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub n: usize,
    pub eps: f64,
    pub gamma: f64,
    /// Rounded `nε`.
    pub n_eps: usize,
    /// Number of doubling levels `L`.
    pub levels: usize,
    /// Dual step size `ν = ln(1+ε)/γ`.
    pub nu: f64,
    /// Utility step size `ν′ = −ln(1−ε)/γ`.
    pub nu_prime: f64,
    /// Estimate-refresh breakpoints `t_h = round(nε)·2ʰ`, capped at
    /// `⌊n/2⌋` and deduplicated; `breakpoints[h]` is the prefix length
    /// whose optimum estimate becomes current once step `t_h` has passed.
    pub breakpoints: Vec<usize>,
    beta: Vec<f64>,
    beta_prime: Vec<f64>,
    alpha: Vec<f64>,
}

/// Builds the full schedule. Requires `ε ∈ (0,1)`, `γ > 0`, and `nε ≥ 1`
/// after rounding.
pub fn build_schedule(n: usize, eps: f64, gamma: f64) -> Result<Schedule, ScheduleError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ScheduleError::BadGamma(gamma));
    }
    let n_eps = rounded_n_eps(n, eps)?;
    let levels = num_levels(eps);
    let nu = (1.0 + eps).ln() / gamma;
    let nu_prime = -(1.0 - eps).ln() / gamma;
    let breakpoints = refresh_breakpoints(n, eps)?;

    let t_freeze = n - n_eps; // n(1-eps): tables freeze past this step
    let base = eps / (gamma * n as f64);
    let sqrt_eps = eps.sqrt();

    let mut beta = Vec::with_capacity(n + 1 - n_eps);
    let mut beta_prime = Vec::with_capacity(n + 1 - n_eps);
    let mut alpha = Vec::with_capacity(t_freeze.saturating_sub(n_eps));
    for t in n_eps + 1..=t_freeze {
        let k = kappa(t, n, eps)?;
        let h = eta(t, n, eps)?;
        let a = (1.0 - 2f64.powf(-(h as f64) / 2.0) * sqrt_eps)
            / (1.0 + 2f64.powf(-(h as f64) / 2.0 + 1.0) * sqrt_eps);
        let b = base * (1.0 + 2f64.powf(-(k as f64) / 2.0) * sqrt_eps);
        let bp = base * (1.0 - 2f64.powf(-(k as f64) / 2.0) * sqrt_eps) * a;
        alpha.push(a);
        beta.push(b);
        beta_prime.push(bp);
    }
    // Frozen tail: beta_t = beta_{n(1-eps)} for t in (n(1-eps), n+1].
    let last_b = *beta.last().expect("nonempty: t_freeze > n_eps");
    let last_bp = *beta_prime.last().expect("nonempty");
    for _ in t_freeze + 1..=n + 1 {
        beta.push(last_b);
        beta_prime.push(last_bp);
    }

    Ok(Schedule {
        n,
        eps,
        gamma,
        n_eps,
        levels,
        nu,
        nu_prime,
        breakpoints,
        beta,
        beta_prime,
        alpha,
    })
}

impl Schedule {
    /// `β_t` for `t ∈ {nε+1, …, n+1}`.
    pub fn beta(&self, t: usize) -> f64 {
        debug_assert!(t > self.n_eps && t <= self.n + 1, "beta({t})");
        self.beta[t - self.n_eps - 1]
    }

    /// `β′_t` for `t ∈ {nε+1, …, n+1}`.
    pub fn beta_prime(&self, t: usize) -> f64 {
        debug_assert!(t > self.n_eps && t <= self.n + 1, "beta_prime({t})");
        self.beta_prime[t - self.n_eps - 1]
    }

    /// `α_t` for `t ∈ {nε+1, …, n(1−ε)}`; clamps to the last defined value
    /// beyond that range (only diagnostics ever look there).
    pub fn alpha(&self, t: usize) -> f64 {
        debug_assert!(t > self.n_eps, "alpha({t})");
        let idx = (t - self.n_eps - 1).min(self.alpha.len() - 1);
        self.alpha[idx]
    }

    /// Last step before the tables freeze, `n(1−ε)` in rounded form.
    pub fn freeze_step(&self) -> usize {
        self.n - self.n_eps
    }
}
