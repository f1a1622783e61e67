use std::sync::Arc;

use super::background::Background;
use super::grid::RadialGrid;
use crate::error::{KrfError, Result};

/// Evolving metric at time t, encoded by the potential increment phi over the
/// background family omega_0 - t Ric(h). The cached tables are
///   Q'  = xi0 - t rho_h' + phi'
///   Q'' = xi0' - t rho_h'' + phi''
/// and the Euclidean-frame eigenvalues are Q'' e^{-s} (radial, multiplicity 1)
/// and Q' e^{-s} (spherical, multiplicity n-1).
#[derive(Debug, Clone)]
pub struct MetricState {
    background: Arc<Background>,
    xi0: Vec<f64>,
    t: f64,
    phi: Vec<f64>,
    degenerate: bool,
    qp: Vec<f64>,
    qpp: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenDirection {
    Radial,
    Spherical,
}

/// Uniform equivalence band c_lo h <= g <= c_hi h with attaining nodes.
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceBand {
    pub c_lo: f64,
    pub c_hi: f64,
    pub arg_lo: (usize, EigenDirection),
    pub arg_hi: (usize, EigenDirection),
}

impl MetricState {
    pub fn new(
        background: Arc<Background>,
        xi0: Vec<f64>,
        t: f64,
        phi: Vec<f64>,
    ) -> Result<Self> {
        let state = Self::assemble(background, xi0, t, phi, false)?;
        state.ensure_positive()?;
        Ok(state)
    }

    /// Degenerate t = 0 state: the initial (1,1)-form only needs to be
    /// nonnegative. Curvature and flow right-hand sides are refused on it.
    /// Stencil noise around exact plateau zeros (below the ds^2 error scale)
    /// is clamped to the cone boundary; anything beyond it is rejected.
    pub fn new_degenerate(background: Arc<Background>, xi0: Vec<f64>) -> Result<Self> {
        let n = xi0.len();
        let mut state = Self::assemble(background, xi0, 0.0, vec![0.0; n], true)?;
        let ds = state.grid().ds();
        for which in 0..2 {
            let (name, sup) = {
                let table = if which == 0 { &state.qp } else { &state.qpp };
                let sup = table.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                (if which == 0 { "Q'" } else { "Q''" }, sup)
            };
            let tol = ds * ds * (1.0 + sup);
            for i in 0..n {
                let v = if which == 0 { state.qp[i] } else { state.qpp[i] };
                if v < -tol {
                    return Err(KrfError::PositivityLoss {
                        node: i,
                        s: state.grid().node(i),
                        quantity: name,
                        value: v,
                    });
                }
                if v < 0.0 {
                    if which == 0 {
                        state.qp[i] = 0.0;
                    } else {
                        state.qpp[i] = 0.0;
                    }
                }
            }
        }
        Ok(state)
    }

    fn assemble(
        background: Arc<Background>,
        xi0: Vec<f64>,
        t: f64,
        phi: Vec<f64>,
        degenerate: bool,
    ) -> Result<Self> {
        let grid = background.grid();
        if xi0.len() != grid.len() || phi.len() != grid.len() {
            return Err(KrfError::GridMismatch(format!(
                "tables ({}, {}) do not match grid ({} nodes)",
                xi0.len(),
                phi.len(),
                grid.len()
            )));
        }
        if !(t >= 0.0) {
            return Err(KrfError::RangeError(format!("time must be >= 0, got {t}")));
        }
        let dxi0 = background.d_table(&xi0);
        let dphi = grid.deriv(&phi);
        let d2phi = grid.deriv2(&phi);
        let rp = background.rho_h_prime();
        let rpp = background.rho_h_second();
        let qp: Vec<f64> = (0..grid.len())
            .map(|i| xi0[i] - t * rp[i] + dphi[i])
            .collect();
        let qpp: Vec<f64> = (0..grid.len())
            .map(|i| dxi0[i] - t * rpp[i] + d2phi[i])
            .collect();
        Ok(Self {
            background,
            xi0,
            t,
            phi,
            degenerate,
            qp,
            qpp,
        })
    }

    pub fn ensure_positive(&self) -> Result<()> {
        let grid = self.grid();
        for i in 0..grid.len() {
            for (table, name) in [(&self.qp, "Q'"), (&self.qpp, "Q''")] {
                if !(table[i] > 0.0) {
                    return Err(KrfError::PositivityLoss {
                        node: i,
                        s: grid.node(i),
                        quantity: name,
                        value: table[i],
                    });
                }
            }
        }
        Ok(())
    }

    pub fn background(&self) -> &Arc<Background> {
        &self.background
    }

    pub fn grid(&self) -> &RadialGrid {
        self.background.grid()
    }

    pub fn n(&self) -> u32 {
        self.background.n()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn xi0(&self) -> &[f64] {
        &self.xi0
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn q_prime(&self) -> &[f64] {
        &self.qp
    }

    pub fn q_second(&self) -> &[f64] {
        &self.qpp
    }

    /// Metric eigenvalues relative to Euclidean coordinates:
    /// (lambda_rad, lambda_sph) = (Q'' e^{-s}, Q' e^{-s}).
    pub fn eigenvalues(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.ensure_positive()?;
        Ok(self.eigenvalues_unchecked())
    }

    pub(crate) fn eigenvalues_unchecked(&self) -> (Vec<f64>, Vec<f64>) {
        let ens = self.grid().exp_neg_s();
        let rad = self.qpp.iter().zip(ens).map(|(q, e)| q * e).collect();
        let sph = self.qp.iter().zip(ens).map(|(q, e)| q * e).collect();
        (rad, sph)
    }

    /// Eigenvalues without the positivity gate, for serialization of
    /// degenerate t = 0 states.
    pub fn eigenvalues_for_io(&self) -> (Vec<f64>, Vec<f64>) {
        self.eigenvalues_unchecked()
    }

    /// log-det ratio without the positivity gate; degenerate nodes yield -inf.
    pub fn log_det_ratio_for_io(&self) -> Vec<f64> {
        let bg = &self.background;
        let nf = self.n() as f64;
        (0..self.grid().len())
            .map(|i| {
                self.qpp[i].ln() - bg.log_xi_h_prime()[i]
                    + (nf - 1.0) * (self.qp[i].ln() - bg.log_xi_h()[i])
            })
            .collect()
    }

    /// phidot = log(omega^n / omega_h^n) = log(Q''/xi_h') + (n-1) log(Q'/xi_h).
    pub fn log_det_ratio(&self) -> Result<Vec<f64>> {
        self.ensure_positive()?;
        let bg = &self.background;
        let nf = self.n() as f64;
        Ok((0..self.grid().len())
            .map(|i| {
                self.qpp[i].ln() - bg.log_xi_h_prime()[i]
                    + (nf - 1.0) * (self.qp[i].ln() - bg.log_xi_h()[i])
            })
            .collect())
    }

    /// tr_g h = (n-1) xi_h/Q' + xi_h'/Q''.
    pub fn trace_g_h(&self) -> Result<Vec<f64>> {
        self.ensure_positive()?;
        let bg = &self.background;
        let nf = self.n() as f64;
        Ok((0..self.grid().len())
            .map(|i| (nf - 1.0) * bg.xi_h()[i] / self.qp[i] + bg.xi_h_prime()[i] / self.qpp[i])
            .collect())
    }

    /// tr_h g = (n-1) Q'/xi_h + Q''/xi_h'.
    pub fn trace_h_g(&self) -> Result<Vec<f64>> {
        self.ensure_positive()?;
        let bg = &self.background;
        let nf = self.n() as f64;
        Ok((0..self.grid().len())
            .map(|i| (nf - 1.0) * self.qp[i] / bg.xi_h()[i] + self.qpp[i] / bg.xi_h_prime()[i])
            .collect())
    }

    /// Tight eigenvalue-ratio band of g against the background h.
    pub fn equivalence_band(&self) -> Result<EquivalenceBand> {
        self.ensure_positive()?;
        Ok(self.equivalence_band_unchecked())
    }

    pub(crate) fn equivalence_band_unchecked(&self) -> EquivalenceBand {
        let bg = &self.background;
        let mut band = BandAccumulator::new();
        for i in 0..self.grid().len() {
            band.push(i, EigenDirection::Radial, self.qpp[i] / bg.xi_h_prime()[i]);
            band.push(i, EigenDirection::Spherical, self.qp[i] / bg.xi_h()[i]);
        }
        band.finish()
    }

    /// Band of this metric against another state on the same grid.
    pub fn equivalence_band_vs(&self, other: &MetricState) -> Result<EquivalenceBand> {
        if !self.grid().same_as(other.grid()) {
            return Err(KrfError::GridMismatch(
                "equivalence band needs matching grids".into(),
            ));
        }
        self.ensure_positive()?;
        other.ensure_positive()?;
        let mut band = BandAccumulator::new();
        for i in 0..self.grid().len() {
            band.push(i, EigenDirection::Radial, self.qpp[i] / other.qpp[i]);
            band.push(i, EigenDirection::Spherical, self.qp[i] / other.qp[i]);
        }
        Ok(band.finish())
    }

    /// Radial Laplacian of a nodal table: Delta_g v = (n-1) v'/Q' + v''/Q''.
    pub fn laplacian(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.ensure_positive()?;
        let grid = self.grid();
        let dv = grid.deriv(v);
        let d2v = grid.deriv2(v);
        let nf = self.n() as f64;
        Ok((0..grid.len())
            .map(|i| (nf - 1.0) * dv[i] / self.qp[i] + d2v[i] / self.qpp[i])
            .collect())
    }

    /// Trace with respect to g of a radial (1,1)-form given by its potential
    /// derivative data (fp, fpp): (n-1) fp/Q' + fpp/Q''.
    pub fn trace_of_radial_form(&self, fp: &[f64], fpp: &[f64]) -> Result<Vec<f64>> {
        self.ensure_positive()?;
        let nf = self.n() as f64;
        Ok((0..self.grid().len())
            .map(|i| (nf - 1.0) * fp[i] / self.qp[i] + fpp[i] / self.qpp[i])
            .collect())
    }

    /// Arc length of the radial ray between log-radii s1 and s2:
    /// (1/2) Integral sqrt(Q''(s)) ds.
    pub fn radial_distance(&self, s1: f64, s2: f64) -> Result<f64> {
        self.ensure_positive()?;
        let sqrt_qpp: Vec<f64> = self.qpp.iter().map(|q| q.sqrt()).collect();
        Ok(0.5 * self.grid().integrate(&sqrt_qpp, s1, s2)?)
    }

    /// Same state with the potential data scaled by c (the homothety c g).
    pub fn scaled(&self, c: f64) -> Result<MetricState> {
        if !(c > 0.0) {
            return Err(KrfError::RangeError(format!("homothety factor {c} <= 0")));
        }
        // scaling both xi0 and phi scales Q' and Q''; the -t rho_h' term must
        // also scale, so fold it into xi0 at fixed t.
        let grid = self.grid();
        let rp = self.background.rho_h_prime();
        let xi0: Vec<f64> = (0..grid.len())
            .map(|i| c * (self.xi0[i] - self.t * rp[i]) + self.t * rp[i])
            .collect();
        let phi: Vec<f64> = self.phi.iter().map(|p| c * p).collect();
        MetricState::new(self.background.clone(), xi0, self.t, phi)
    }
}

struct BandAccumulator {
    lo: f64,
    hi: f64,
    arg_lo: (usize, EigenDirection),
    arg_hi: (usize, EigenDirection),
}

impl BandAccumulator {
    fn new() -> Self {
        Self {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
            arg_lo: (0, EigenDirection::Radial),
            arg_hi: (0, EigenDirection::Radial),
        }
    }

    fn push(&mut self, node: usize, dir: EigenDirection, ratio: f64) {
        if ratio < self.lo {
            self.lo = ratio;
            self.arg_lo = (node, dir);
        }
        if ratio > self.hi {
            self.hi = ratio;
            self.arg_hi = (node, dir);
        }
    }

    fn finish(self) -> EquivalenceBand {
        EquivalenceBand {
            c_lo: self.lo,
            c_hi: self.hi,
            arg_lo: self.arg_lo,
            arg_hi: self.arg_hi,
        }
    }
}
