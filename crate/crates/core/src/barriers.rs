//! Cutoff and exhaustion constructions used to conformally stretch a metric
//! into a complete one near the truncation boundary, together with numeric
//! certification of their bounds.

use crate::error::{KrfError, Result};
use crate::geometry::{curvature, Background, MetricState, RadialGrid};

/// f(s) = -log[1 - ((s-1+kappa)/kappa)^2] on (1-kappa, 1), zero below.
pub fn eval_f(kappa: f64, s: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(KrfError::RangeError(format!("kappa = {kappa} out of (0,1)")));
    }
    if s >= 1.0 {
        return Err(KrfError::DomainError(format!("f is defined on s < 1, got {s}")));
    }
    if s <= 1.0 - kappa {
        return Ok(0.0);
    }
    let x = (s - 1.0 + kappa) / kappa;
    // 1 - x^2 underflows to 0 only in the last ulps before s = 1; the log
    // then returns the +infinity sentinel.
    Ok(-(1.0 - x * x).ln())
}

fn eval_f_prime(kappa: f64, s: f64) -> f64 {
    if s <= 1.0 - kappa {
        return 0.0;
    }
    let x = (s - 1.0 + kappa) / kappa;
    2.0 * x / (kappa * (1.0 - x * x))
}

fn eval_f_second(kappa: f64, s: f64) -> f64 {
    if s <= 1.0 - kappa {
        return 0.0;
    }
    let x = (s - 1.0 + kappa) / kappa;
    let d = 1.0 - x * x;
    2.0 * (1.0 + x * x) / (kappa * kappa * d * d)
}

/// Smooth transition with support and slope bound as prescribed: 0 up to
/// 1-kappa+kappa^2, 1 from 1-kappa+2kappa^2, realized by the quintic
/// smoothstep (max slope 15/8 per unit width < 2/kappa^2).
#[derive(Debug, Clone)]
pub struct CutoffFamily {
    pub kappa: f64,
    j1: f64,
    j2: f64,
    /// Integral of bump * f' over the transition window [j1, j2].
    transition_integral: f64,
    f_at_j2: f64,
}

impl CutoffFamily {
    pub fn f(&self, s: f64) -> Result<f64> {
        eval_f(self.kappa, s)
    }

    pub fn bump(&self, s: f64) -> f64 {
        if s <= self.j1 {
            0.0
        } else if s >= self.j2 {
            1.0
        } else {
            let x = (s - self.j1) / (self.j2 - self.j1);
            x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
        }
    }

    pub fn bump_deriv(&self, s: f64) -> f64 {
        if s <= self.j1 || s >= self.j2 {
            0.0
        } else {
            let w = self.j2 - self.j1;
            let x = (s - self.j1) / w;
            30.0 * x * x * (1.0 - x) * (1.0 - x) / w
        }
    }

    /// frakF(s) = Integral_0^s bump(tau) f'(tau) dtau, closed form outside the
    /// transition window, adaptive quadrature inside it.
    pub fn frak_f(&self, s: f64) -> Result<f64> {
        if s >= 1.0 {
            return Err(KrfError::DomainError(format!(
                "frakF is defined on s < 1, got {s}"
            )));
        }
        if s <= self.j1 {
            return Ok(0.0);
        }
        if s < self.j2 {
            let kappa = self.kappa;
            return Ok(adaptive_simpson(
                &|t| self.bump(t) * eval_f_prime(kappa, t),
                self.j1,
                s,
                1e-10,
            ));
        }
        Ok(self.transition_integral + eval_f(self.kappa, s)? - self.f_at_j2)
    }

    pub fn frak_f_prime(&self, s: f64) -> f64 {
        self.bump(s) * eval_f_prime(self.kappa, s)
    }

    pub fn frak_f_second(&self, s: f64) -> f64 {
        self.bump_deriv(s) * eval_f_prime(self.kappa, s)
            + self.bump(s) * eval_f_second(self.kappa, s)
    }

    /// Sum_{k=1,2} exp(-k frakF) |frakF^{(k)}| at one point.
    pub fn weighted_derivative_sum(&self, s: f64) -> Result<f64> {
        let ff = self.frak_f(s)?;
        Ok((-ff).exp() * self.frak_f_prime(s).abs()
            + (-2.0 * ff).exp() * self.frak_f_second(s).abs())
    }

    /// Constant C with e^{frakF(s)} = C / (1 - x^2) past the transition
    /// window (x = (s-1+kappa)/kappa), i.e. C = exp(I - f(j2)).
    pub fn tail_constant(&self) -> f64 {
        (self.transition_integral - self.f_at_j2).exp()
    }

    /// Integral of e^{frakF(1-v)} dv over [v_lo, v_hi] in closed form, valid
    /// for v_hi <= kappa - 2 kappa^2 (past the transition window). Stable for
    /// v down to the smallest positive doubles: 1 - x^2 = (v/k)(2 - v/k).
    pub fn tail_exp_integral(&self, v_lo: f64, v_hi: f64) -> f64 {
        debug_assert!(v_lo <= v_hi && v_hi <= self.kappa - 2.0 * self.kappa * self.kappa);
        let k = self.kappa;
        let t = |v: f64| 0.5 * k * ((2.0 * k - v) / v).ln();
        self.tail_constant() * (t(v_lo) - t(v_hi))
    }
}

pub fn build_cutoff(kappa: f64) -> Result<CutoffFamily> {
    if !(kappa > 0.0 && kappa < 0.125) {
        return Err(KrfError::RangeError(format!(
            "kappa must lie in (0, 1/8), got {kappa}"
        )));
    }
    let j1 = 1.0 - kappa + kappa * kappa;
    let j2 = 1.0 - kappa + 2.0 * kappa * kappa;
    let mut family = CutoffFamily {
        kappa,
        j1,
        j2,
        transition_integral: 0.0,
        f_at_j2: eval_f(kappa, j2)?,
    };
    family.transition_integral = adaptive_simpson(
        &|t| family.bump(t) * eval_f_prime(kappa, t),
        j1,
        j2,
        1e-10,
    );

    // slope bound 2/kappa^2 (quintic max is 1.875/kappa^2; kept as a guard)
    let limit = 2.0 / (kappa * kappa);
    let mut max_slope = 0.0f64;
    for i in 0..=1000 {
        let s = j1 + (j2 - j1) * i as f64 / 1000.0;
        max_slope = max_slope.max(family.bump_deriv(s));
    }
    if max_slope > limit {
        return Err(KrfError::BumpBoundViolation { max_slope, limit });
    }

    // re-verify the stated invariants on a dense sample
    let m = 10_000;
    let mut prev = 0.0f64;
    for i in 0..=m {
        let s = (1.0 - 1e-8) * i as f64 / m as f64;
        let ff = family.frak_f(s)?;
        if !(ff >= 0.0) || ff < prev - 1e-12 {
            return Err(KrfError::CertificationFailure(format!(
                "frakF not nonnegative/monotone at s = {s}"
            )));
        }
        if s <= 1.0 - kappa && ff != 0.0 {
            return Err(KrfError::CertificationFailure(format!(
                "frakF nonzero at s = {s} <= 1 - kappa"
            )));
        }
        if family.frak_f_prime(s) < 0.0 {
            return Err(KrfError::CertificationFailure(format!(
                "frakF' negative at s = {s}"
            )));
        }
        prev = ff;
    }
    Ok(family)
}

/// Measured sup of the weighted derivative sum, stratified so the
/// kappa^2-wide transition window is resolved at any kappa: `samples` points
/// on [0, 1-kappa], on the transition window, and on the blow-up region up
/// to 1 - 1e-8, plus a geometric tail (finite because the exp(-k frakF)
/// weights absorb the blow-up of f).
pub fn b_of_kappa(family: &CutoffFamily, samples: usize) -> f64 {
    let kappa = family.kappa;
    let mut sup = 0.0f64;
    let strata = [
        (0.0, 1.0 - kappa),
        (family.j1, family.j2),
        (family.j2, 1.0 - 1e-8),
    ];
    for (lo, hi) in strata {
        for i in 0..=samples {
            let s = lo + (hi - lo) * i as f64 / samples as f64;
            sup = sup.max(family.weighted_derivative_sum(s).expect("s < 1"));
        }
    }
    let mut delta = 1e-2;
    while delta > 1e-8 {
        sup = sup.max(family.weighted_derivative_sum(1.0 - delta).expect("s < 1"));
        delta *= 0.5;
    }
    sup
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, fa, m, fm, flm);
        let right = simpson(m, fm, b, fb, frm);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(a, fa, b, fb, fm);
    recurse(f, a, fa, b, fb, fm, whole, tol, 40)
}

// ---------------------------------------------------------------------------
// exhaustion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum ExhaustionForm {
    /// rho = shift + c0 sqrt(1 + e^s) on a flat background.
    FlatSqrt { c0: f64, shift: f64 },
    /// rho = shift + c0 sqrt(1 + d_h(s_min, s)^2) from the smoothed distance.
    SmoothedDistance { s: Vec<f64>, raw: Vec<f64>, c0: f64, shift: f64 },
}

/// Exhaustion function rho >= 1 with certified |d rho|^2 + |Hess rho|_h <= 1.
#[derive(Debug, Clone)]
pub struct Exhaustion {
    rho: Vec<f64>,
    form: ExhaustionForm,
    pub certified_bound: f64,
}

impl Exhaustion {
    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho_at(&self, s: f64) -> f64 {
        match &self.form {
            ExhaustionForm::FlatSqrt { c0, shift } => shift + c0 * (1.0 + s.exp()).sqrt(),
            ExhaustionForm::SmoothedDistance { s: xs, raw, c0, shift } => {
                let raw_v = interp_monotone(xs, raw, s);
                shift + c0 * raw_v
            }
        }
    }

    /// Bisection inverse of the (strictly increasing) exhaustion.
    pub fn s_of_rho(&self, target: f64, s_lo: f64, s_hi: f64) -> Result<f64> {
        let mut lo = s_lo;
        let mut hi = s_hi;
        if self.rho_at(lo) > target || self.rho_at(hi) < target {
            return Err(KrfError::OutOfRange(format!(
                "rho = {target} not bracketed on [{s_lo}, {s_hi}]"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.rho_at(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

fn interp_monotone(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        // linear continuation with the final slope
        let slope = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
        return ys[n - 1] + slope * (x - xs[n - 1]);
    }
    let idx = xs.partition_point(|&v| v <= x).min(n - 1);
    let i = idx - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] * (1.0 - w) + ys[i + 1] * w
}

/// Build and certify an exhaustion for the background: closed form on flat,
/// smoothed radial distance otherwise. Rescaling (and an affine shift keeping
/// rho >= 1) enforces the unit bound.
pub fn build_exhaustion(bg: &Background) -> Result<Exhaustion> {
    let grid = bg.grid();
    let raw: Vec<f64> = match bg.kind() {
        crate::geometry::BackgroundKind::Flat => grid.sample(|s| (1.0 + s.exp()).sqrt()),
        _ => {
            // cumulative h-distance from s_min, smoothed through sqrt(1 + d^2)
            let integrand: Vec<f64> = bg.xi_h_prime().iter().map(|v| 0.5 * v.sqrt()).collect();
            let mut dist = vec![0.0; grid.len()];
            for i in 1..grid.len() {
                dist[i] = grid.integrate_nodes(&integrand, 0, i);
            }
            dist.iter().map(|d| (1.0 + d * d).sqrt()).collect()
        }
    };
    let bound_of = |table: &[f64]| -> f64 {
        let dp = grid.deriv(table);
        let dpp = grid.deriv2(table);
        let nf = bg.n() as f64;
        let mut sup = 0.0f64;
        for i in 0..grid.len() {
            let grad_sq = dp[i] * dp[i] / bg.xi_h_prime()[i];
            let h_rad = dpp[i] / bg.xi_h_prime()[i];
            let h_sph = dp[i] / bg.xi_h()[i];
            let hess = (h_rad * h_rad + (nf - 1.0) * h_sph * h_sph).sqrt();
            sup = sup.max(grad_sq + hess);
        }
        sup
    };
    let raw_bound = bound_of(&raw);
    let c0 = if raw_bound > 1.0 { 1.0 / raw_bound } else { 1.0 };
    // shift keeps rho >= 1 without touching derivatives
    let raw_min = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = (1.0 - c0 * raw_min).max(0.0);
    let rho: Vec<f64> = raw.iter().map(|v| shift + c0 * v).collect();
    let certified: Vec<f64> = rho.clone();
    let certified_bound = bound_of(&certified);
    if certified_bound > 1.0 + 1e-9 {
        return Err(KrfError::CertificationFailure(format!(
            "bound {certified_bound} > 1 after rescale"
        )));
    }
    let form = match bg.kind() {
        crate::geometry::BackgroundKind::Flat => ExhaustionForm::FlatSqrt { c0, shift },
        _ => ExhaustionForm::SmoothedDistance {
            s: grid.nodes().to_vec(),
            raw,
            c0,
            shift,
        },
    };
    Ok(Exhaustion {
        rho,
        form,
        certified_bound,
    })
}

// ---------------------------------------------------------------------------
// conformal stretch
// ---------------------------------------------------------------------------

/// e^{2F} g restricted to the sub-level set {rho < R + 1}; not a potential
/// state (the stretch is Hermitian, not Kähler, for n >= 2), so it is carried
/// by its eigenvalue profiles.
#[derive(Debug, Clone)]
pub struct StretchedMetric {
    pub s: Vec<f64>,
    pub lambda_rad: Vec<f64>,
    pub lambda_sph: Vec<f64>,
    pub stretch: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StretchReport {
    /// Nodes where rho/(R+1) <= 1-kappa (stretch exactly 1 there).
    pub equal_region_nodes: usize,
    /// Max |stretched - original| over the equal region (must be 0.0).
    pub equal_region_drift: f64,
    /// (delta, arc length from rho = R+1-delta toward the boundary).
    pub distance_probe: Vec<(f64, f64)>,
    /// Probe exceeded the divergence threshold.
    pub diverged: bool,
    /// sup |Rm(g)| over the unstretched region (where the stretch is Kähler).
    pub sup_rm_equal_region: f64,
    /// (C1 + C'(n) Lambda^4 b) / t_k when ledger parameters were supplied.
    pub ledger_bound: Option<f64>,
}

pub struct StretchBoundParams {
    pub c1_curv: f64,
    pub c_prime_n: f64,
    pub lambda_cap: f64,
    pub b_kappa: f64,
    pub t_k: f64,
}

pub fn conformal_stretch(
    state: &MetricState,
    r_param: f64,
    family: &CutoffFamily,
    exhaustion: &Exhaustion,
    divergence_threshold: f64,
    ledger: Option<&StretchBoundParams>,
) -> Result<(StretchedMetric, StretchReport)> {
    state.ensure_positive()?;
    let grid = state.grid();
    let rho0 = exhaustion.rho_at(grid.s_min());
    if r_param < rho0 + 1.0 {
        return Err(KrfError::DomainError(format!(
            "R = {r_param} < rho(s_min) + 1 = {}",
            rho0 + 1.0
        )));
    }
    let edge = r_param + 1.0;
    if exhaustion.rho_at(grid.s_max()) <= edge {
        return Err(KrfError::DomainError(format!(
            "rho(s_max) = {} never reaches R + 1 = {edge}",
            exhaustion.rho_at(grid.s_max())
        )));
    }

    let (rad, sph) = state.eigenvalues()?;
    let mut out = StretchedMetric {
        s: Vec::new(),
        lambda_rad: Vec::new(),
        lambda_sph: Vec::new(),
        stretch: Vec::new(),
    };
    let mut equal_nodes = 0usize;
    let mut drift = 0.0f64;
    for i in 0..grid.len() {
        let tau = exhaustion.rho_at(grid.node(i)) / edge;
        if tau >= 1.0 {
            break;
        }
        let factor = if tau <= 1.0 - family.kappa {
            equal_nodes += 1;
            1.0
        } else {
            (2.0 * family.frak_f(tau)?).exp()
        };
        let sr = rad[i] * factor;
        let ss = sph[i] * factor;
        if factor == 1.0 {
            drift = drift.max((sr - rad[i]).abs()).max((ss - sph[i]).abs());
        }
        out.s.push(grid.node(i));
        out.lambda_rad.push(sr);
        out.lambda_sph.push(ss);
        out.stretch.push(factor);
    }

    // completeness probe: arc length (1/2) e^F sqrt(Q'') from rho = edge-delta
    // toward the rho = edge boundary. The integrand behaves like C/(1-tau)
    // with tau = rho/edge, so the s-variable cannot resolve the tail; it is
    // integrated in tau, numerically down to 1 - tau = 1e-6 and in closed
    // form from there to the smallest resolvable 1 - tau = 1e-300.
    let s_star = exhaustion.s_of_rho(edge, grid.s_min(), grid.s_max())?;
    let qpp = state.q_second();
    let integrand = |s: f64| -> f64 {
        let tau = (exhaustion.rho_at(s) / edge).min(1.0 - 1e-16);
        let f_val = family.frak_f(tau).unwrap_or(f64::INFINITY);
        let q = interp_monotone(grid.nodes(), qpp, s);
        0.5 * f_val.exp() * q.max(0.0).sqrt()
    };
    let v_mid = 1e-6; // 1 - tau at the numeric/closed-form junction
    let s_mid = exhaustion.s_of_rho(edge * (1.0 - v_mid), grid.s_min(), grid.s_max())?;
    // slowly varying factor S = (1/2) sqrt(Q'') ds/dtau frozen at the junction
    let h = 1e-7 * (1.0 + s_mid.abs());
    let rho_prime_mid =
        (exhaustion.rho_at(s_mid + h) - exhaustion.rho_at(s_mid - h)) / (2.0 * h);
    let q_mid = interp_monotone(grid.nodes(), qpp, s_mid).max(0.0);
    let tail_factor = 0.5 * q_mid.sqrt() * edge / rho_prime_mid;
    let mut probe = Vec::new();
    let mut diverged = false;
    for &delta in &[1e-4f64, 1e-6] {
        let v_start = delta / edge;
        let mut total = 0.0f64;
        if v_start > v_mid {
            // numeric part in s on geometrically shrinking subintervals
            let s_start = exhaustion.s_of_rho(edge - delta, grid.s_min(), grid.s_max())?;
            let mut w_hi = s_star - s_start;
            let w_end = s_star - s_mid;
            while w_hi > w_end && total < divergence_threshold {
                let w_lo = (0.5 * w_hi).max(w_end);
                let g = |w: f64| integrand(s_star - w) * w; // dw = w dv, v = ln w
                let v_l = w_lo.ln();
                let v_h = w_hi.ln();
                total +=
                    (v_h - v_l) / 6.0 * (g(w_lo) + 4.0 * g((0.5 * (v_l + v_h)).exp()) + g(w_hi));
                w_hi = w_lo;
            }
        }
        let v_hi_tail = v_start.min(v_mid);
        total += tail_factor * family.tail_exp_integral(1e-300, v_hi_tail);
        if total >= divergence_threshold {
            diverged = true;
        }
        probe.push((delta, total));
    }

    // trim the boundary collar whose low-order stencils pollute |Rm|
    let curv = curvature(state)?;
    let collar = 10.min(equal_nodes / 2);
    let hi = equal_nodes.max(1).min(curv.norm.len());
    let sup_rm_equal = curv.norm[collar..hi].iter().cloned().fold(0.0, f64::max);
    let ledger_bound = ledger.map(|p| {
        (p.c1_curv + p.c_prime_n * p.lambda_cap.powi(4) * p.b_kappa) / p.t_k
    });

    Ok((
        out,
        StretchReport {
            equal_region_nodes: equal_nodes,
            equal_region_drift: drift,
            distance_probe: probe,
            diverged,
            sup_rm_equal_region: sup_rm_equal,
            ledger_bound,
        },
    ))
}

/// Grid profiles Phi (support clipped at the outer end) and PhiTilde (clipped
/// at half scale) derived from the cutoff transition, used by the claim
/// functionals.
pub fn cutoff_profiles(family: &CutoffFamily, grid: &RadialGrid) -> (Vec<f64>, Vec<f64>) {
    let span = grid.s_max() - grid.s_min();
    let phi = grid.sample(|s| 1.0 - family.bump((s - grid.s_min()) / span));
    let phi_tilde = grid.sample(|s| 1.0 - family.bump(2.0 * (s - grid.s_min()) / span));
    (phi, phi_tilde)
}
