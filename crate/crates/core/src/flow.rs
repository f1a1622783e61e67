//! Time integration of the potential flow phidot = log(omega^n / omega_h^n)
//! in the radial reduction, with explicit RK4 and implicit backward-Euler
//! steppers, model-branch or extrapolated boundary closures, and regularized
//! families g_0 + eps h run from a degenerate start.

use std::sync::Arc;

use crate::error::{KrfError, Result};
use crate::geometry::{curvature, Background, EquivalenceBand, MetricState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    ExplicitRk4,
    ImplicitBe,
}

/// The explicit stepper and all diagnostics use the 4th-order stencils; the
/// implicit stepper solves the 2nd-order semidiscretization so the
/// tridiagonal system is the exact Newton linearization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SpatialOrder {
    Fourth,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Boundary potential follows the ambient homothety branch
    /// a(t) = c_b + m t of the background, advanced by the same time
    /// discretization as the interior so the branch is a fixed manifold of
    /// the discrete scheme.
    PinnedModel,
    /// Linear (second-order accurate) extrapolation from the two nearest
    /// interior nodes, imposed implicitly; for degenerate scenarios without
    /// an ambient branch. Introduces an O(ds^2) boundary flux.
    Extrapolated,
}

#[derive(Debug, Clone)]
pub struct FlowConfig {
    pub stepper: Stepper,
    pub cfl_theta: f64,
    pub t_end: f64,
    /// Fixed step for the implicit stepper.
    pub dt: Option<f64>,
    pub snapshot_times: Vec<f64>,
    pub newton_tol: f64,
    pub newton_max_iters: u32,
    pub boundary: BoundaryCondition,
    /// Strictly decreasing regularization weights; when present, `run`
    /// integrates the whole family g_0 + eps h.
    pub epsilon_list: Option<Vec<f64>>,
    /// Record sup |Rm| in the per-step diagnostics (snapshots always have it).
    pub record_curvature: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            stepper: Stepper::ImplicitBe,
            cfl_theta: 0.5,
            t_end: 1.0,
            dt: None,
            snapshot_times: Vec::new(),
            newton_tol: 1e-12,
            newton_max_iters: 50,
            boundary: BoundaryCondition::PinnedModel,
            epsilon_list: None,
            record_curvature: false,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) {
            return Err(KrfError::RangeError(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.cfl_theta > 0.0 && self.cfl_theta <= 1.0) {
            return Err(KrfError::RangeError(format!(
                "cfl_theta must lie in (0, 1], got {}",
                self.cfl_theta
            )));
        }
        for w in self.snapshot_times.windows(2) {
            if w[1] <= w[0] {
                return Err(KrfError::RangeError(
                    "snapshot times must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = self.snapshot_times.last() {
            if last > self.t_end * (1.0 + 1e-12) {
                return Err(KrfError::RangeError(format!(
                    "snapshot time {last} exceeds t_end {}",
                    self.t_end
                )));
            }
        }
        if let Some(first) = self.snapshot_times.first() {
            if *first < 0.0 {
                return Err(KrfError::RangeError("snapshot times must be >= 0".into()));
            }
        }
        if self.stepper == Stepper::ImplicitBe {
            match self.dt {
                Some(dt) if dt > 0.0 => {}
                _ => {
                    return Err(KrfError::RangeError(
                        "implicit stepper needs a positive fixed dt".into(),
                    ))
                }
            }
        }
        if let Some(eps) = &self.epsilon_list {
            if eps.is_empty() {
                return Err(KrfError::RangeError("epsilon_list is empty".into()));
            }
            for w in eps.windows(2) {
                if !(w[1] < w[0]) {
                    return Err(KrfError::RangeError(
                        "epsilon_list must be strictly decreasing".into(),
                    ));
                }
            }
            if !(eps[eps.len() - 1] > 0.0) {
                return Err(KrfError::RangeError("epsilon values must be > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    /// Time reached at the end of the step.
    pub t: f64,
    pub dt: f64,
    pub newton_iters: u32,
    pub sup_phidot: f64,
    pub band: (f64, f64),
    pub sup_rm: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Snapshot states; the first one is the initial state at t = 0.
    pub states: Vec<MetricState>,
    pub steps: Vec<StepDiagnostics>,
}

impl Trajectory {
    pub fn snapshot_times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t()).collect()
    }

    pub fn initial(&self) -> &MetricState {
        &self.states[0]
    }

    pub fn last(&self) -> &MetricState {
        self.states.last().expect("trajectory has states")
    }

    pub fn state_at(&self, t: f64) -> Option<&MetricState> {
        self.states
            .iter()
            .find(|s| (s.t() - t).abs() <= 1e-12 * (1.0 + t.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct RunMember {
    pub label: String,
    pub epsilon: Option<f64>,
    pub trajectory: Trajectory,
}

/// C0 distances between consecutive regularized members at matched times.
#[derive(Debug, Clone)]
pub struct PairwiseC0 {
    pub eps_hi: f64,
    pub eps_lo: f64,
    pub per_time: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub members: Vec<RunMember>,
    pub pairwise_c0: Vec<PairwiseC0>,
}

impl RunResult {
    /// The single trajectory of a plain (non-family) run.
    pub fn primary(&self) -> &Trajectory {
        &self.members[0].trajectory
    }
}

/// Flow right-hand side; identical to the log-determinant ratio.
pub fn rhs(state: &MetricState) -> Result<Vec<f64>> {
    state.log_det_ratio()
}

/// Relative C0 distance sup |lambda_a / lambda_b - 1| over nodes and both
/// eigendirections, trimmed by a boundary collar.
pub fn relative_c0_distance(a: &MetricState, b: &MetricState, collar: usize) -> Result<f64> {
    if !a.grid().same_as(b.grid()) {
        return Err(KrfError::GridMismatch(
            "C0 distance needs matching grids".into(),
        ));
    }
    a.ensure_positive()?;
    b.ensure_positive()?;
    let range = crate::geometry::interior_range(a.grid(), collar);
    let mut sup = 0.0f64;
    for i in range {
        sup = sup.max((a.q_second()[i] / b.q_second()[i] - 1.0).abs());
        sup = sup.max((a.q_prime()[i] / b.q_prime()[i] - 1.0).abs());
    }
    Ok(sup)
}

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

struct Engine {
    bg: Arc<Background>,
    xi0: Vec<f64>,
    dxi0: Vec<f64>,
    nf: f64,
    boundary: BoundaryCondition,
    /// (c_left, c_right, slope) of the ambient branch for PinnedModel.
    pinned: Option<(f64, f64, f64)>,
    cfl_theta: f64,
}

struct QBuffers {
    qp: Vec<f64>,
    qpp: Vec<f64>,
    dphi: Vec<f64>,
    d2phi: Vec<f64>,
}

impl QBuffers {
    fn new(n: usize) -> Self {
        Self {
            qp: vec![0.0; n],
            qpp: vec![0.0; n],
            dphi: vec![0.0; n],
            d2phi: vec![0.0; n],
        }
    }
}

impl Engine {
    fn new(state: &MetricState, config: &FlowConfig) -> Result<Self> {
        let bg = state.background().clone();
        let xi0 = state.xi0().to_vec();
        let dxi0 = bg.d_table(&xi0);
        let pinned = match config.boundary {
            BoundaryCondition::Extrapolated => None,
            BoundaryCondition::PinnedModel => {
                let m = bg.einstein_slope().ok_or_else(|| {
                    KrfError::DomainError(
                        "pinned_model boundary needs a flat or space-form background; \
                         use the extrapolated closure"
                            .into(),
                    )
                })?;
                let last = bg.grid().len() - 1;
                let c_left = xi0[0] / bg.xi_h()[0];
                let c_right = xi0[last] / bg.xi_h()[last];
                Some((c_left, c_right, m))
            }
        };
        Ok(Self {
            bg,
            xi0,
            dxi0,
            nf: state.n() as f64,
            boundary: config.boundary,
            pinned,
            cfl_theta: config.cfl_theta,
        })
    }

    fn len(&self) -> usize {
        self.bg.grid().len()
    }

    fn build_q(&self, phi: &[f64], t: f64, buf: &mut QBuffers) {
        self.build_q_order(phi, t, buf, SpatialOrder::Fourth)
    }

    fn build_q_order(&self, phi: &[f64], t: f64, buf: &mut QBuffers, order: SpatialOrder) {
        let grid = self.bg.grid();
        match order {
            SpatialOrder::Fourth => {
                grid.deriv_into(phi, &mut buf.dphi);
                grid.deriv2_into(phi, &mut buf.d2phi);
            }
            SpatialOrder::Second => {
                grid.deriv_3pt_into(phi, &mut buf.dphi);
                grid.deriv2_3pt_into(phi, &mut buf.d2phi);
            }
        }
        let rp = self.bg.rho_h_prime();
        let rpp = self.bg.rho_h_second();
        for i in 0..self.len() {
            buf.qp[i] = self.xi0[i] - t * rp[i] + buf.dphi[i];
            buf.qpp[i] = self.dxi0[i] - t * rpp[i] + buf.d2phi[i];
        }
    }

    fn positivity(&self, buf: &QBuffers) -> Result<()> {
        let grid = self.bg.grid();
        for i in 0..self.len() {
            if !(buf.qp[i] > 0.0) {
                return Err(KrfError::PositivityLoss {
                    node: i,
                    s: grid.node(i),
                    quantity: "Q'",
                    value: buf.qp[i],
                });
            }
            if !(buf.qpp[i] > 0.0) {
                return Err(KrfError::PositivityLoss {
                    node: i,
                    s: grid.node(i),
                    quantity: "Q''",
                    value: buf.qpp[i],
                });
            }
        }
        Ok(())
    }

    /// rhs on interior nodes, boundary nodes closed per the configured rule.
    fn rhs_from_q(&self, buf: &QBuffers, t: f64, out: &mut [f64]) {
        let n = self.len();
        let lxh = self.bg.log_xi_h();
        let lxhp = self.bg.log_xi_h_prime();
        for i in 0..n {
            out[i] =
                buf.qpp[i].ln() - lxhp[i] + (self.nf - 1.0) * (buf.qp[i].ln() - lxh[i]);
        }
        match self.boundary {
            BoundaryCondition::PinnedModel => {
                let (cl, cr, m) = self.pinned.expect("pinned params");
                out[0] = self.nf * (cl + m * t).ln();
                out[n - 1] = self.nf * (cr + m * t).ln();
            }
            BoundaryCondition::Extrapolated => {
                out[0] = 2.0 * out[1] - out[2];
                out[n - 1] = 2.0 * out[n - 2] - out[n - 3];
            }
        }
    }

    fn rhs_into(&self, phi: &[f64], t: f64, buf: &mut QBuffers, out: &mut [f64]) -> Result<()> {
        self.rhs_into_order(phi, t, buf, out, SpatialOrder::Fourth)
    }

    fn rhs_into_order(
        &self,
        phi: &[f64],
        t: f64,
        buf: &mut QBuffers,
        out: &mut [f64],
        order: SpatialOrder,
    ) -> Result<()> {
        self.build_q_order(phi, t, buf, order);
        self.positivity(buf)?;
        self.rhs_from_q(buf, t, out);
        Ok(())
    }

    /// Largest stable explicit step: theta ds^2 min(Q'')/2 (the linearized
    /// radial diffusivity is 1/Q'').
    fn cfl_dt(&self, buf: &QBuffers) -> f64 {
        let min_qpp = buf.qpp.iter().cloned().fold(f64::INFINITY, f64::min);
        let ds = self.bg.grid().ds();
        self.cfl_theta * ds * ds * min_qpp / 2.0
    }

    fn band_from_q(&self, buf: &QBuffers) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let xh = self.bg.xi_h();
        let xhp = self.bg.xi_h_prime();
        for i in 0..self.len() {
            let r1 = buf.qpp[i] / xhp[i];
            let r2 = buf.qp[i] / xh[i];
            lo = lo.min(r1.min(r2));
            hi = hi.max(r1.max(r2));
        }
        (lo, hi)
    }

    fn step_rk4(&self, phi: &[f64], t: f64, dt: f64, buf: &mut QBuffers) -> Result<Vec<f64>> {
        let n = self.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut stage = vec![0.0; n];
        self.rhs_into(phi, t, buf, &mut k1)?;
        for i in 0..n {
            stage[i] = phi[i] + 0.5 * dt * k1[i];
        }
        self.rhs_into(&stage, t + 0.5 * dt, buf, &mut k2)?;
        for i in 0..n {
            stage[i] = phi[i] + 0.5 * dt * k2[i];
        }
        self.rhs_into(&stage, t + 0.5 * dt, buf, &mut k3)?;
        for i in 0..n {
            stage[i] = phi[i] + dt * k3[i];
        }
        self.rhs_into(&stage, t + dt, buf, &mut k4)?;
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] = phi[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(out)
    }

    /// Backward Euler by damped Newton on the 2nd-order semidiscretization,
    /// so the tridiagonal system is the exact linearization. The pinned
    /// closure advances the boundary ODE implicitly; the extrapolated closure
    /// treats the boundary values as dependent unknowns (x_0 = 2x_1 - x_2),
    /// eliminated from the linear system.
    fn step_be(
        &self,
        phi_old: &[f64],
        t_old: f64,
        dt: f64,
        tol: f64,
        max_iters: u32,
        warm: Option<&[f64]>,
        buf: &mut QBuffers,
    ) -> Result<(Vec<f64>, u32)> {
        let n = self.len();
        let t_new = t_old + dt;
        let extrapolated = self.boundary == BoundaryCondition::Extrapolated;
        let project = |x: &mut Vec<f64>| {
            if extrapolated {
                x[0] = 2.0 * x[1] - x[2];
                x[n - 1] = 2.0 * x[n - 2] - x[n - 3];
            }
        };
        let mut cur: Vec<f64> = warm.unwrap_or(phi_old).to_vec();
        project(&mut cur);
        let mut rhs_buf = vec![0.0; n];
        let mut resid = vec![0.0; n];

        let eval_residual = |x: &[f64],
                             buf: &mut QBuffers,
                             rhs_buf: &mut Vec<f64>,
                             resid: &mut Vec<f64>|
         -> Result<f64> {
            self.rhs_into_order(x, t_new, buf, rhs_buf, SpatialOrder::Second)?;
            let mut sup = 0.0f64;
            for i in 0..n {
                resid[i] = x[i] - phi_old[i] - dt * rhs_buf[i];
            }
            if extrapolated {
                // boundary values are dependent on the interior
                resid[0] = 0.0;
                resid[n - 1] = 0.0;
            }
            for r in resid.iter() {
                sup = sup.max(r.abs());
            }
            Ok(sup)
        };

        let mut sup_resid = match eval_residual(&cur, buf, &mut rhs_buf, &mut resid) {
            Ok(v) => v,
            Err(_) if warm.is_some() => {
                // fall back to the previous time level if the warm start left
                // the cone
                cur = phi_old.to_vec();
                eval_residual(&cur, buf, &mut rhs_buf, &mut resid)?
            }
            Err(e) => return Err(e),
        };

        let ds = self.bg.grid().ds();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs_lin = vec![0.0; n];
        let mut cand = vec![0.0; n];

        // the residual cannot drop below the roundoff of its own evaluation:
        // eps |phi| amplified by dt times the stencil/diffusivity factor
        let floor = |x: &[f64], buf: &QBuffers| -> f64 {
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let min_qpp = buf.qpp.iter().cloned().fold(f64::INFINITY, f64::min);
            let min_qp = buf.qp.iter().cloned().fold(f64::INFINITY, f64::min);
            let amp = dt / (ds * ds * min_qpp.max(f64::MIN_POSITIVE))
                + dt * (self.nf - 1.0).abs() / (2.0 * ds * min_qp.max(f64::MIN_POSITIVE));
            32.0 * f64::EPSILON * scale * (1.0 + amp)
        };

        for iter in 0..max_iters {
            if sup_resid <= tol.max(floor(&cur, buf)) {
                return Ok((cur, iter));
            }
            // assemble I - dt * L at the current iterate (buf holds its Q)
            for i in 0..n {
                if i == 0 || i == n - 1 {
                    lower[i] = 0.0;
                    diag[i] = 1.0;
                    upper[i] = 0.0;
                } else {
                    let a = 1.0 / (buf.qpp[i] * ds * ds);
                    let b = (self.nf - 1.0) / (2.0 * ds * buf.qp[i]);
                    lower[i] = -dt * (a - b);
                    diag[i] = 1.0 + 2.0 * dt * a;
                    upper[i] = -dt * (a + b);
                }
                rhs_lin[i] = -resid[i];
            }
            if extrapolated {
                // delta_0 = 2 delta_1 - delta_2 and mirrored: eliminate the
                // dependent boundary columns into rows 1 and n-2
                diag[1] += 2.0 * lower[1];
                upper[1] -= lower[1];
                lower[1] = 0.0;
                diag[n - 2] += 2.0 * upper[n - 2];
                lower[n - 2] -= upper[n - 2];
                upper[n - 2] = 0.0;
            }
            let mut delta = solve_tridiagonal(&lower, &diag, &upper, &rhs_lin);
            if extrapolated {
                delta[0] = 2.0 * delta[1] - delta[2];
                delta[n - 1] = 2.0 * delta[n - 2] - delta[n - 3];
            }

            let mut lam = 1.0f64;
            loop {
                for i in 0..n {
                    cand[i] = cur[i] + lam * delta[i];
                }
                match eval_residual(&cand, buf, &mut rhs_buf, &mut resid) {
                    Ok(sup) if sup < sup_resid || sup <= tol => {
                        cur.copy_from_slice(&cand);
                        sup_resid = sup;
                        break;
                    }
                    _ => {
                        lam *= 0.5;
                        if lam < 2.0f64.powi(-20) {
                            if sup_resid <= floor(&cur, buf) {
                                return Ok((cur, iter));
                            }
                            return Err(KrfError::NewtonDivergence {
                                t: t_new,
                                iters: iter,
                                residual: sup_resid,
                            });
                        }
                    }
                }
            }
        }
        if sup_resid <= tol.max(floor(&cur, buf)) {
            return Ok((cur, max_iters));
        }
        Err(KrfError::NewtonDivergence {
            t: t_new,
            iters: max_iters,
            residual: sup_resid,
        })
    }
}

fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

// ---------------------------------------------------------------------------
// public stepping and orchestration
// ---------------------------------------------------------------------------

/// One explicit RK4 step. Refuses dt beyond the CFL limit.
pub fn step_explicit(state: &MetricState, dt: f64, config: &FlowConfig) -> Result<MetricState> {
    if dt < 0.0 {
        return Err(KrfError::RangeError("dt must be >= 0".into()));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    state.ensure_positive()?;
    let engine = Engine::new(state, config)?;
    let mut buf = QBuffers::new(engine.len());
    engine.build_q(state.phi(), state.t(), &mut buf);
    engine.positivity(&buf)?;
    let dt_max = engine.cfl_dt(&buf);
    if dt > dt_max * (1.0 + 1e-9) {
        return Err(KrfError::CflViolation { dt, dt_max });
    }
    let phi = engine.step_rk4(state.phi(), state.t(), dt, &mut buf)?;
    MetricState::new(
        state.background().clone(),
        state.xi0().to_vec(),
        state.t() + dt,
        phi,
    )
}

/// One implicit backward-Euler step; returns the new state and the Newton
/// iteration count.
pub fn step_implicit(
    state: &MetricState,
    dt: f64,
    config: &FlowConfig,
) -> Result<(MetricState, u32)> {
    if dt < 0.0 {
        return Err(KrfError::RangeError("dt must be >= 0".into()));
    }
    if dt == 0.0 {
        return Ok((state.clone(), 0));
    }
    state.ensure_positive()?;
    let engine = Engine::new(state, config)?;
    let mut buf = QBuffers::new(engine.len());
    let (phi, iters) = engine.step_be(
        state.phi(),
        state.t(),
        dt,
        config.newton_tol,
        config.newton_max_iters,
        None,
        &mut buf,
    )?;
    let new = MetricState::new(
        state.background().clone(),
        state.xi0().to_vec(),
        state.t() + dt,
        phi,
    )?;
    Ok((new, iters))
}

/// Integrate to t_end with snapshots at the requested times (steps land on
/// them exactly). With an epsilon family configured, the initial state may be
/// degenerate and every member g_0 + eps h is integrated, warm-starting each
/// Newton solve from the previous member.
pub fn run(initial: &MetricState, config: &FlowConfig) -> Result<RunResult> {
    config.validate()?;
    if initial.t() != 0.0 {
        return Err(KrfError::RangeError(
            "trajectories must start at t = 0".into(),
        ));
    }
    match &config.epsilon_list {
        None => {
            if initial.is_degenerate() {
                return Err(KrfError::DomainError(
                    "degenerate initial data needs an epsilon regularization family".into(),
                ));
            }
            let (trajectory, _) = run_single(initial, config, None)?;
            Ok(RunResult {
                members: vec![RunMember {
                    label: "primary".into(),
                    epsilon: None,
                    trajectory,
                }],
                pairwise_c0: Vec::new(),
            })
        }
        Some(eps_list) => {
            let bg = initial.background().clone();
            let mut members: Vec<RunMember> = Vec::new();
            let mut prev_log: Option<Vec<Vec<f64>>> = None;
            for &eps in eps_list {
                let xi0: Vec<f64> = initial
                    .xi0()
                    .iter()
                    .zip(bg.xi_h())
                    .map(|(x, xh)| x + eps * xh)
                    .collect();
                let member_initial =
                    MetricState::new(bg.clone(), xi0, 0.0, vec![0.0; bg.grid().len()])?;
                let (trajectory, log) =
                    run_single(&member_initial, config, prev_log.as_deref())?;
                prev_log = Some(log);
                members.push(RunMember {
                    label: format!("eps_{eps:.3e}"),
                    epsilon: Some(eps),
                    trajectory,
                });
            }
            let mut pairwise = Vec::new();
            for pair in members.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                let mut per_time = Vec::new();
                for (sa, sb) in a.trajectory.states.iter().zip(&b.trajectory.states) {
                    per_time.push((sa.t(), relative_c0_distance(sa, sb, 10)?));
                }
                pairwise.push(PairwiseC0 {
                    eps_hi: a.epsilon.unwrap(),
                    eps_lo: b.epsilon.unwrap(),
                    per_time,
                });
            }
            Ok(RunResult {
                members,
                pairwise_c0: pairwise,
            })
        }
    }
}

fn run_single(
    initial: &MetricState,
    config: &FlowConfig,
    warm_log: Option<&[Vec<f64>]>,
) -> Result<(Trajectory, Vec<Vec<f64>>)> {
    initial.ensure_positive()?;
    let engine = Engine::new(initial, config)?;
    let n = engine.len();
    let mut buf = QBuffers::new(n);
    let mut rhs_buf = vec![0.0; n];

    // snapshot schedule: requested times plus t_end, initial state first
    let mut targets: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0)
        .collect();
    if targets.last().map_or(true, |&l| l < config.t_end * (1.0 - 1e-12)) {
        targets.push(config.t_end);
    }

    let mut states = vec![initial.clone()];
    let mut steps: Vec<StepDiagnostics> = Vec::new();
    let mut log: Vec<Vec<f64>> = Vec::new();
    let mut phi = initial.phi().to_vec();
    let mut t = 0.0f64;
    let mut step_index = 0usize;

    for &target in &targets {
        while t < target {
            let dt_nominal = match config.stepper {
                Stepper::ExplicitRk4 => {
                    engine.build_q(&phi, t, &mut buf);
                    engine.positivity(&buf).map_err(|e| at_time(e, t))?;
                    engine.cfl_dt(&buf)
                }
                Stepper::ImplicitBe => config.dt.expect("validated"),
            };
            let remaining = target - t;
            let (dt_step, lands) = if dt_nominal >= remaining {
                (remaining, true)
            } else {
                (dt_nominal, false)
            };

            let mut newton_iters = 0;
            phi = match config.stepper {
                Stepper::ExplicitRk4 => engine
                    .step_rk4(&phi, t, dt_step, &mut buf)
                    .map_err(|e| at_time(e, t))?,
                Stepper::ImplicitBe => {
                    let warm = warm_log.and_then(|l| l.get(step_index)).map(|v| v.as_slice());
                    let (next, iters) = engine
                        .step_be(
                            &phi,
                            t,
                            dt_step,
                            config.newton_tol,
                            config.newton_max_iters,
                            warm,
                            &mut buf,
                        )
                        .map_err(|e| at_time(e, t))?;
                    newton_iters = iters;
                    next
                }
            };
            t = if lands { target } else { t + dt_step };
            step_index += 1;
            log.push(phi.clone());

            engine.build_q(&phi, t, &mut buf);
            engine.positivity(&buf).map_err(|e| at_time(e, t))?;
            engine.rhs_from_q(&buf, t, &mut rhs_buf);
            let sup_phidot = rhs_buf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let band = engine.band_from_q(&buf);
            let sup_rm = if config.record_curvature && t > 0.0 {
                let state = MetricState::new(
                    initial.background().clone(),
                    initial.xi0().to_vec(),
                    t,
                    phi.clone(),
                )?;
                Some(curvature(&state)?.sup_norm)
            } else {
                None
            };
            steps.push(StepDiagnostics {
                t,
                dt: dt_step,
                newton_iters,
                sup_phidot,
                band,
                sup_rm,
            });
        }
        let snap = MetricState::new(
            initial.background().clone(),
            initial.xi0().to_vec(),
            target,
            phi.clone(),
        )?;
        // snapshot steps always carry sup |Rm|
        if let Some(last) = steps.last_mut() {
            if last.sup_rm.is_none() {
                last.sup_rm = Some(curvature(&snap)?.sup_norm);
            }
        }
        states.push(snap);
    }

    Ok((Trajectory { states, steps }, log))
}

fn at_time(e: KrfError, t: f64) -> KrfError {
    match e {
        KrfError::PositivityLoss {
            node,
            s,
            quantity,
            value,
        } => KrfError::DomainError(format!(
            "positivity loss at t = {t:.6e}, node {node} (s = {s:.6}): {quantity} = {value:.6e}"
        )),
        other => other,
    }
}

/// Per-step band floor over the whole trajectory (used as the a-priori c_1).
pub fn min_band_low(traj: &Trajectory) -> f64 {
    traj.steps
        .iter()
        .map(|d| d.band.0)
        .fold(f64::INFINITY, f64::min)
}

/// Equivalence band of a trajectory snapshot against the background.
pub fn snapshot_band(state: &MetricState) -> Result<EquivalenceBand> {
    state.equivalence_band()
}
