use std::sync::Arc;

use super::curvature::curvature_tables;
use super::grid::RadialGrid;
use crate::error::{KrfError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BackgroundKind {
    Flat,
    /// Constant holomorphic sectional curvature 2k with k < 0.
    ComplexHyperbolic {
        k: f64,
    },
    Tabulated,
}

impl BackgroundKind {
    pub fn label(&self) -> &'static str {
        match self {
            BackgroundKind::Flat => "flat",
            BackgroundKind::ComplexHyperbolic { .. } => "complex_hyperbolic",
            BackgroundKind::Tabulated => "tabulated",
        }
    }
}

/// Reference metric h in radial form. Everything downstream consumes the
/// sampled tables; closed-form kinds also know their exact Ricci data.
#[derive(Debug, Clone)]
pub struct Background {
    n: u32,
    kind: BackgroundKind,
    grid: RadialGrid,
    xi_h: Vec<f64>,
    xi_h_prime: Vec<f64>,
    /// First-derivative data of the radial Ricci potential rho_h.
    rho_h_prime: Vec<f64>,
    rho_h_second: Vec<f64>,
    log_xi_h: Vec<f64>,
    log_xi_h_prime: Vec<f64>,
    curvature_bound: f64,
}

impl Background {
    pub fn flat(n: u32, grid: RadialGrid) -> Result<Arc<Self>> {
        check_dim(n)?;
        let xi_h = grid.sample(f64::exp);
        let xi_h_prime = xi_h.clone();
        let zeros = vec![0.0; grid.len()];
        let log_xi_h: Vec<f64> = grid.nodes().to_vec();
        Ok(Arc::new(Self {
            n,
            kind: BackgroundKind::Flat,
            xi_h,
            xi_h_prime,
            rho_h_prime: zeros.clone(),
            rho_h_second: zeros,
            log_xi_h_prime: log_xi_h.clone(),
            log_xi_h,
            curvature_bound: 0.0,
            grid,
        }))
    }

    /// Complex hyperbolic space with holomorphic sectional curvature 2k < 0,
    /// realized on the ball |z|^2 < 1 by the potential -a log(1 - |z|^2) with
    /// a = -1/k. Requires s_max < 0. Ric(h) = (n+1)k h.
    pub fn complex_hyperbolic(n: u32, grid: RadialGrid, k: f64) -> Result<Arc<Self>> {
        check_dim(n)?;
        if !(k < 0.0) {
            return Err(KrfError::RangeError(format!(
                "complex hyperbolic requires k < 0, got {k}"
            )));
        }
        if grid.s_max() >= 0.0 {
            return Err(KrfError::RangeError(format!(
                "complex hyperbolic lives on s < 0 (|z| < 1); grid reaches {}",
                grid.s_max()
            )));
        }
        let a = -1.0 / k;
        let einstein = (n as f64 + 1.0) * k;
        let xi_h = grid.sample(|s| {
            let u = s.exp();
            a * u / (1.0 - u)
        });
        let xi_h_prime = grid.sample(|s| {
            let u = s.exp();
            a * u / ((1.0 - u) * (1.0 - u))
        });
        let rho_h_prime: Vec<f64> = xi_h.iter().map(|&v| einstein * v).collect();
        let rho_h_second: Vec<f64> = xi_h_prime.iter().map(|&v| einstein * v).collect();
        let log_xi_h = xi_h.iter().map(|&v| v.ln()).collect();
        let log_xi_h_prime = xi_h_prime.iter().map(|&v| v.ln()).collect();
        let nf = n as f64;
        let curvature_bound = k.abs() * (2.0 * nf * (nf + 1.0)).sqrt();
        Ok(Arc::new(Self {
            n,
            kind: BackgroundKind::ComplexHyperbolic { k },
            grid,
            xi_h,
            xi_h_prime,
            rho_h_prime,
            rho_h_second,
            log_xi_h,
            log_xi_h_prime,
            curvature_bound,
        }))
    }

    /// Background from a sampled xi_h table; derivatives and the Ricci
    /// potential come from finite differences of the table.
    pub fn tabulated(n: u32, grid: RadialGrid, xi_h: Vec<f64>) -> Result<Arc<Self>> {
        check_dim(n)?;
        if xi_h.len() != grid.len() {
            return Err(KrfError::GridMismatch(format!(
                "xi_h table has {} rows, grid has {} nodes",
                xi_h.len(),
                grid.len()
            )));
        }
        let xi_h_prime = grid.deriv(&xi_h);
        validate_positive(&grid, &xi_h, "xi_h")?;
        validate_positive(&grid, &xi_h_prime, "xi_h'")?;
        let nf = n as f64;
        let rho: Vec<f64> = (0..grid.len())
            .map(|i| nf * grid.node(i) - xi_h_prime[i].ln() - (nf - 1.0) * xi_h[i].ln())
            .collect();
        let rho_h_prime = grid.deriv(&rho);
        let rho_h_second = grid.deriv2(&rho);
        let log_xi_h = xi_h.iter().map(|&v| v.ln()).collect();
        let log_xi_h_prime = xi_h_prime.iter().map(|&v| v.ln()).collect();
        // sup |Rm(h)| measured from the tables; the collar hides the
        // low-order boundary stencils whose high derivatives are unreliable
        let x2 = grid.deriv(&xi_h_prime);
        let x3 = grid.deriv2(&xi_h_prime);
        let x4 = grid.deriv(&x3);
        let curv = curvature_tables(n, &xi_h, &xi_h_prime, &x2, &x3, &x4);
        let range = super::curvature::interior_range(&grid, 10);
        let curvature_bound = curv.norm[range].iter().cloned().fold(0.0f64, f64::max);
        Ok(Arc::new(Self {
            n,
            kind: BackgroundKind::Tabulated,
            grid,
            xi_h,
            xi_h_prime,
            rho_h_prime,
            rho_h_second,
            log_xi_h,
            log_xi_h_prime,
            curvature_bound,
        }))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn kind(&self) -> BackgroundKind {
        self.kind
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn xi_h(&self) -> &[f64] {
        &self.xi_h
    }

    pub fn xi_h_prime(&self) -> &[f64] {
        &self.xi_h_prime
    }

    pub fn rho_h_prime(&self) -> &[f64] {
        &self.rho_h_prime
    }

    pub fn rho_h_second(&self) -> &[f64] {
        &self.rho_h_second
    }

    pub fn log_xi_h(&self) -> &[f64] {
        &self.log_xi_h
    }

    pub fn log_xi_h_prime(&self) -> &[f64] {
        &self.log_xi_h_prime
    }

    /// sup |Rm(h)| in the orthonormal-frame convention.
    pub fn curvature_bound(&self) -> f64 {
        self.curvature_bound
    }

    /// Slope m of the exact homothety branch a(t) = c + m t (Ric(h) = -m h).
    /// None when h is not a known Einstein model.
    pub fn einstein_slope(&self) -> Option<f64> {
        match self.kind {
            BackgroundKind::Flat => Some(0.0),
            BackgroundKind::ComplexHyperbolic { k } => Some(-(self.n as f64 + 1.0) * k),
            BackgroundKind::Tabulated => None,
        }
    }

    /// s-derivative of a potential-derivative table, taken through the ratio
    /// to xi_h: d(table) = xi_h' r + xi_h r' with r = table/xi_h. The finite
    /// difference only touches r, so ambient (homothety-like) data picks up
    /// no boundary-stencil error from the background's own growth.
    pub fn d_table(&self, table: &[f64]) -> Vec<f64> {
        let grid = self.grid();
        let ratio: Vec<f64> = table
            .iter()
            .zip(&self.xi_h)
            .map(|(v, xh)| v / xh)
            .collect();
        let dr = grid.deriv(&ratio);
        (0..grid.len())
            .map(|i| self.xi_h_prime[i] * ratio[i] + self.xi_h[i] * dr[i])
            .collect()
    }

    /// Metric eigenvalues of h relative to Euclidean coordinates.
    pub fn eigenvalues(&self) -> (Vec<f64>, Vec<f64>) {
        let ens = self.grid.exp_neg_s();
        let rad = self
            .xi_h_prime
            .iter()
            .zip(ens)
            .map(|(v, e)| v * e)
            .collect();
        let sph = self.xi_h.iter().zip(ens).map(|(v, e)| v * e).collect();
        (rad, sph)
    }
}

fn check_dim(n: u32) -> Result<()> {
    if n == 0 {
        return Err(KrfError::RangeError("complex dimension must be >= 1".into()));
    }
    Ok(())
}

fn validate_positive(grid: &RadialGrid, table: &[f64], name: &'static str) -> Result<()> {
    for (i, &v) in table.iter().enumerate() {
        if !(v > 0.0) {
            return Err(KrfError::PositivityLoss {
                node: i,
                s: grid.node(i),
                quantity: name,
                value: v,
            });
        }
    }
    Ok(())
}
