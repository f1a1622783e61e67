//! Constant ledger and doubling schedule: pure arithmetic with the exact
//! recursion as ground truth. Dimensional constants from cited results enter
//! as named parameters (default 1); the module's value is the dependency
//! structure, not guessed magnitudes.

use crate::error::{KrfError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerPrimitives {
    /// Equivalence factor lambda >= 1 of the initial metric.
    pub lambda: f64,
    /// C0 >= 1 and c1 >= 1 from the local Lipschitz bound.
    pub c0: f64,
    pub c1: f64,
    /// alpha(n) in (0, 1] from the short-time existence input.
    pub alpha: f64,
    /// beta_n > 0 multiplying Lambda^4 b in mu.
    pub beta_n: f64,
    /// Measured cutoff bound b(kappa) > 0.
    pub b: f64,
    /// C1 > 0 from the curvature estimate.
    pub c1_curv: f64,
    /// B > 0 from the persistence-of-curvature bound.
    pub big_b: f64,
    /// Curvature bound K >= 0 of the reference metric.
    pub k_bound: f64,
    /// Opaque positive horizons entering sigma.
    pub t_tilde: f64,
    pub t_hat: f64,
}

impl Default for LedgerPrimitives {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            c0: 1.0,
            c1: 1.0,
            alpha: 1.0,
            beta_n: 1.0,
            b: 1.0,
            c1_curv: 1.0,
            big_b: 1.0,
            k_bound: 0.0,
            t_tilde: 1.0,
            t_hat: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstantsLedger {
    pub primitives: LedgerPrimitives,
    /// n enters only through a(n, lambda) = max{2B(1+mu)^2, n log(Lambda/alpha)}.
    pub n: u32,
    /// Lambda = max{lambda, 2 C0 lambda^{c1}}.
    pub big_lambda: f64,
    /// mu = sqrt(1 + alpha/(C1 + beta_n Lambda^4 b)) - 1 > 0.
    pub mu: f64,
    /// a = max{2B(1+mu)^2, n log(Lambda/alpha)}.
    pub a: f64,
    /// sigma = max{1, T_tilde^{-1/2}, T_hat^{-1/2}}.
    pub sigma: f64,
    /// Topological evaluation order of the derived formulas.
    pub dependency_order: Vec<&'static str>,
}

pub fn derive(n: u32, p: LedgerPrimitives) -> Result<ConstantsLedger> {
    if n == 0 {
        return Err(KrfError::RangeError("n must be >= 1".into()));
    }
    if !(p.lambda >= 1.0) {
        return Err(KrfError::RangeError(format!("lambda = {} < 1", p.lambda)));
    }
    for (name, v, lo) in [
        ("C0", p.c0, 1.0),
        ("c1", p.c1, 1.0),
        ("beta_n", p.beta_n, f64::MIN_POSITIVE),
        ("b", p.b, f64::MIN_POSITIVE),
        ("C1", p.c1_curv, f64::MIN_POSITIVE),
        ("B", p.big_b, f64::MIN_POSITIVE),
        ("T_tilde", p.t_tilde, f64::MIN_POSITIVE),
        ("T_hat", p.t_hat, f64::MIN_POSITIVE),
    ] {
        if !(v >= lo) {
            return Err(KrfError::RangeError(format!("{name} = {v} out of range")));
        }
    }
    if !(p.alpha > 0.0 && p.alpha <= 1.0) {
        return Err(KrfError::RangeError(format!("alpha = {} not in (0, 1]", p.alpha)));
    }
    if !(p.k_bound >= 0.0) {
        return Err(KrfError::RangeError(format!("K = {} < 0", p.k_bound)));
    }

    let big_lambda = p.lambda.max(2.0 * p.c0 * p.lambda.powf(p.c1));
    // sqrt(1+x)-1 evaluated stably as x/(sqrt(1+x)+1)
    let x = p.alpha / (p.c1_curv + p.beta_n * big_lambda.powi(4) * p.b);
    let mu = x / ((1.0 + x).sqrt() + 1.0);
    let a = (2.0 * p.big_b * (1.0 + mu) * (1.0 + mu))
        .max(n as f64 * (big_lambda / p.alpha).ln());
    let sigma = 1.0f64
        .max(p.t_tilde.powf(-0.5))
        .max(p.t_hat.powf(-0.5));
    Ok(ConstantsLedger {
        primitives: p,
        n,
        big_lambda,
        mu,
        a,
        sigma,
        dependency_order: vec!["Lambda(lambda, C0, c1)", "mu(alpha, C1, beta_n, Lambda, b)", "a(B, mu, n, Lambda, alpha)", "sigma(T_tilde, T_hat)"],
    })
}

impl ConstantsLedger {
    /// sigma^{-2} (1+mu)^{-2}, the guaranteed time horizon; independent of t0, R.
    pub fn terminal_time(&self) -> f64 {
        1.0 / (self.sigma * self.sigma * (1.0 + self.mu) * (1.0 + self.mu))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScheduleRow {
    pub k: usize,
    pub t_k: f64,
    pub r_k: f64,
}

#[derive(Debug, Clone)]
pub struct Schedule {
    pub t0: f64,
    pub r0: f64,
    pub mu: f64,
    pub sigma: f64,
    pub big_lambda: f64,
    pub rows: Vec<ScheduleRow>,
    pub k_max: usize,
    pub terminal_time: f64,
    /// inf_k R_k from the recursion (ground truth).
    pub inf_r: f64,
    /// R - 4 Lambda sigma (1+mu) mu^{-1} sqrt(t_k) [1 - (1+mu)^{-k}] at k_max,
    /// the closed form as printed in the source derivation. It differs from
    /// the recursion by a factor (1+mu); both are reported, neither patched.
    pub printed_closed_form_r: f64,
    /// Recursion-consistent closed form (no (1+mu) factor).
    pub recursion_closed_form_r: f64,
    /// R - 4 Lambda mu / (1+mu), the stated Case-1 lower bound.
    pub case1_bound: f64,
    /// R_k dropped to <= 0 before the time trigger fired.
    pub infeasible_radius: bool,
}

/// Iterate t_k = t_{k-1}(1+mu)^2, R_k = R_{k-1} - 4 Lambda sigma sqrt(t_{k-1})
/// until t_k >= sigma^{-2}.
pub fn build_schedule(
    big_lambda: f64,
    mu: f64,
    sigma: f64,
    t0: f64,
    r: f64,
) -> Result<Schedule> {
    if !(mu > 0.0) || !(sigma >= 1.0) || !(big_lambda >= 1.0) {
        return Err(KrfError::RangeError(format!(
            "need mu > 0, sigma >= 1, Lambda >= 1 (got {mu}, {sigma}, {big_lambda})"
        )));
    }
    let terminal_time = 1.0 / (sigma * sigma * (1.0 + mu) * (1.0 + mu));
    if !(t0 > 0.0 && t0 < terminal_time) {
        return Err(KrfError::RangeError(format!(
            "t0 = {t0} outside (0, terminal time = {terminal_time})"
        )));
    }
    if !(r > 0.0) {
        return Err(KrfError::RangeError(format!("R = {r} must be positive")));
    }
    let trigger = 1.0 / (sigma * sigma);
    let growth = (1.0 + mu) * (1.0 + mu);
    let mut rows = vec![ScheduleRow { k: 0, t_k: t0, r_k: r }];
    let mut infeasible = false;
    let mut k = 0usize;
    const MAX_ITERS: usize = 20_000_000;
    while rows[k].t_k < trigger {
        let prev = rows[k];
        k += 1;
        if k > MAX_ITERS {
            return Err(KrfError::RangeError(
                "schedule exceeded iteration cap (mu too small)".into(),
            ));
        }
        let t_k = prev.t_k * growth;
        let r_k = prev.r_k - 4.0 * big_lambda * sigma * prev.t_k.sqrt();
        if r_k <= 0.0 && rows[k - 1].t_k < trigger {
            infeasible = true;
        }
        rows.push(ScheduleRow { k, t_k, r_k });
    }
    let k_max = k;
    let t_kmax = rows[k_max].t_k;
    let decay = 1.0 - (1.0 + mu).powi(-(k_max as i32));
    let printed_closed_form_r =
        r - 4.0 * big_lambda * sigma * (1.0 + mu) / mu * t_kmax.sqrt() * decay;
    let recursion_closed_form_r = r - 4.0 * big_lambda * sigma / mu * t_kmax.sqrt() * decay;
    let case1_bound = r - 4.0 * big_lambda * mu / (1.0 + mu);
    let inf_r = rows.iter().map(|row| row.r_k).fold(f64::INFINITY, f64::min);
    Ok(Schedule {
        t0,
        r0: r,
        mu,
        sigma,
        big_lambda,
        rows,
        k_max,
        terminal_time,
        inf_r,
        printed_closed_form_r,
        recursion_closed_form_r,
        case1_bound,
        infeasible_radius: infeasible,
    })
}
