//! Curvature of U(n)-invariant Kähler metrics in the radial reduction.
//!
//! At an axis point, unitary-frame components of the curvature tensor reduce
//! to three scalars (radial, mixed, spherical) and the covariant derivative
//! to three more. With x0..x4 = (Q', Q'', Q''', Q'''', Q''''') at a node:
//!
//!   Ahat = (x2^2 - x1 x3) / x1^3                      R_{1 1b 1 1b}
//!   Chat = x1/x0^2 - x2/(x0 x1)                       R_{1 1b a ab}
//!   Xhat = (x0 - x1) / x0^2                           R_{a ab b bb}, a != b
//!   (R_{a ab a ab} = 2 Xhat; holomorphic sectional curvature is Ahat
//!   radially and 2 Xhat spherically; on a space form both equal 2k.)
//!
//!   G1hat = (4 x1 x2 x3 - x1^2 x4 - 3 x2^3) / x1^{9/2}
//!   G2hat = (x0^2 x2^2 - x0^2 x1 x3 + 2 x0 x1^2 x2 - 2 x1^4) / (x0^3 x1^{5/2})
//!   D3hat = (2 x1^2 - x0 x1 - x0 x2) / (x0^3 sqrt(x1))
//!
//! Norms sum squared frame components with their multiplicities:
//!   |Rm|^2  = Ahat^2 + 4(n-1) Chat^2 + 2n(n-1) Xhat^2
//!   |DRm|^2 = 2 [ G1hat^2 + 6(n-1) G2hat^2 + 6n(n-1) D3hat^2 ]
//! (the factor 2 counts the conjugate derivative).

use super::grid::RadialGrid;
use super::state::MetricState;
use crate::error::{KrfError, Result};

#[derive(Debug, Clone)]
pub struct CurvatureReport {
    /// Frame component R_{1 1b 1 1b} per node (radial holomorphic sectional).
    pub rad: Vec<f64>,
    /// Frame component R_{1 1b a ab} per node.
    pub mix: Vec<f64>,
    /// Frame component R_{a ab b bb} (a != b) per node.
    pub sph: Vec<f64>,
    /// |Rm|_g per node.
    pub norm: Vec<f64>,
    /// |grad Rm|_g per node.
    pub grad_norm: Vec<f64>,
    pub sup_norm: f64,
    pub sup_grad_norm: f64,
}

impl CurvatureReport {
    /// Holomorphic sectional curvature in the radial direction.
    pub fn hol_sectional_rad(&self) -> &[f64] {
        &self.rad
    }

    /// Holomorphic sectional curvature of spherical complex lines (n >= 2).
    pub fn hol_sectional_sph(&self) -> Vec<f64> {
        self.sph.iter().map(|v| 2.0 * v).collect()
    }

    pub fn sup_norm_in(&self, range: std::ops::Range<usize>) -> f64 {
        self.norm[range].iter().cloned().fold(0.0, f64::max)
    }

    pub fn sup_grad_norm_in(&self, range: std::ops::Range<usize>) -> f64 {
        self.grad_norm[range].iter().cloned().fold(0.0, f64::max)
    }
}

/// Curvature from raw derivative tables of the total potential.
pub fn curvature_tables(
    n: u32,
    x0: &[f64],
    x1: &[f64],
    x2: &[f64],
    x3: &[f64],
    x4: &[f64],
) -> CurvatureReport {
    let nf = n as f64;
    let len = x0.len();
    let mut rad = Vec::with_capacity(len);
    let mut mix = Vec::with_capacity(len);
    let mut sph = Vec::with_capacity(len);
    let mut norm = Vec::with_capacity(len);
    let mut grad_norm = Vec::with_capacity(len);
    for i in 0..len {
        let (a0, a1, a2, a3, a4) = (x0[i], x1[i], x2[i], x3[i], x4[i]);
        let ahat = (a2 * a2 - a1 * a3) / (a1 * a1 * a1);
        let chat = a1 / (a0 * a0) - a2 / (a0 * a1);
        let xhat = (a0 - a1) / (a0 * a0);
        let g1 = (4.0 * a1 * a2 * a3 - a1 * a1 * a4 - 3.0 * a2 * a2 * a2) / a1.powf(4.5);
        let g2 = (a0 * a0 * a2 * a2 - a0 * a0 * a1 * a3 + 2.0 * a0 * a1 * a1 * a2
            - 2.0 * a1.powi(4))
            / (a0.powi(3) * a1.powf(2.5));
        let d3 = (2.0 * a1 * a1 - a0 * a1 - a0 * a2) / (a0.powi(3) * a1.sqrt());
        let rm2 = ahat * ahat
            + 4.0 * (nf - 1.0) * chat * chat
            + 2.0 * nf * (nf - 1.0) * xhat * xhat;
        let drm2 = 2.0
            * (g1 * g1 + 6.0 * (nf - 1.0) * g2 * g2 + 6.0 * nf * (nf - 1.0) * d3 * d3);
        rad.push(ahat);
        mix.push(chat);
        sph.push(xhat);
        norm.push(rm2.sqrt());
        grad_norm.push(drm2.sqrt());
    }
    let sup_norm = norm.iter().cloned().fold(0.0, f64::max);
    let sup_grad_norm = grad_norm.iter().cloned().fold(0.0, f64::max);
    CurvatureReport {
        rad,
        mix,
        sph,
        norm,
        grad_norm,
        sup_norm,
        sup_grad_norm,
    }
}

/// Curvature of a metric state; higher derivatives of Q come from finite
/// differences of the cached Q' and Q'' tables.
pub fn curvature(state: &MetricState) -> Result<CurvatureReport> {
    let grid = state.grid();
    if grid.len() < 5 {
        return Err(KrfError::StencilUnderflow(grid.len()));
    }
    if state.is_degenerate() {
        return Err(KrfError::DomainError(
            "curvature undefined on a degenerate t = 0 state".into(),
        ));
    }
    state.ensure_positive()?;
    let x0 = state.q_prime();
    let x1 = state.q_second();
    let x2 = grid.deriv(x1);
    let x3 = grid.deriv2(x1);
    let x4 = grid.deriv(&x3);
    Ok(curvature_tables(state.n(), x0, x1, &x2, &x3, &x4))
}

/// Norm of the Christoffel difference Psi = Gamma(g) - Gamma(h):
///   |Psi|^2 = [ (Q'''/Q'' - xi_h''/xi_h')^2 + 2(n-1)(Q''/Q' - xi_h'/xi_h)^2 ] / Q''
pub fn christoffel_difference_sq(state: &MetricState) -> Result<Vec<f64>> {
    state.ensure_positive()?;
    let grid = state.grid();
    let bg = state.background();
    let nf = state.n() as f64;
    let qp = state.q_prime();
    let qpp = state.q_second();
    let qppp = grid.deriv(qpp);
    let xi_h = bg.xi_h();
    let xi_hp = bg.xi_h_prime();
    let xi_hpp = grid.deriv(xi_hp);
    Ok((0..grid.len())
        .map(|i| {
            let rad = qppp[i] / qpp[i] - xi_hpp[i] / xi_hp[i];
            let sph = qpp[i] / qp[i] - xi_hp[i] / xi_h[i];
            (rad * rad + 2.0 * (nf - 1.0) * sph * sph) / qpp[i]
        })
        .collect())
}

/// Collar-trimmed interior node range used by sup/inf measurements.
pub fn interior_range(grid: &RadialGrid, collar: usize) -> std::ops::Range<usize> {
    let c = collar.min(grid.len() / 2 - 1);
    c..grid.len() - c
}
