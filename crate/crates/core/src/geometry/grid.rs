use crate::error::{KrfError, Result};

/// Uniform 1-D grid in the log-radius variable s = log|z|^2.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    s_min: f64,
    s_max: f64,
    n: usize,
    ds: f64,
    nodes: Vec<f64>,
    /// e^{-s} at each node, used by every eigenvalue computation.
    exp_neg_s: Vec<f64>,
}

pub const MIN_NODES: usize = 16;

impl RadialGrid {
    pub fn new(s_min: f64, s_max: f64, n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(KrfError::RangeError(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if !(s_max > s_min) || !s_min.is_finite() || !s_max.is_finite() {
            return Err(KrfError::RangeError(format!(
                "invalid grid range [{s_min}, {s_max}]"
            )));
        }
        let ds = (s_max - s_min) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| s_min + i as f64 * ds).collect();
        let exp_neg_s = nodes.iter().map(|s| (-s).exp()).collect();
        Ok(Self {
            s_min,
            s_max,
            n,
            ds,
            nodes,
            exp_neg_s,
        })
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ds(&self) -> f64 {
        self.ds
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn exp_neg_s(&self) -> &[f64] {
        &self.exp_neg_s
    }

    /// Evaluate a closed-form profile on every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&s| f(s)).collect()
    }

    pub fn same_as(&self, other: &RadialGrid) -> bool {
        self.n == other.n
            && (self.s_min - other.s_min).abs() <= 1e-12 * (1.0 + self.s_min.abs())
            && (self.s_max - other.s_max).abs() <= 1e-12 * (1.0 + self.s_max.abs())
    }

    /// First derivative of a nodal table: centered 4th order in the interior,
    /// skewed 4th order one node in from each end, one-sided 2nd order at the
    /// boundary nodes themselves.
    pub fn deriv(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.deriv_into(f, &mut out);
        out
    }

    pub fn deriv_into(&self, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), self.n, "table length must match grid");
        let n = self.n;
        let h = self.ds;
        out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
        for i in 2..n - 2 {
            out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
        }
        out[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4]
            - f[n - 5])
            / (12.0 * h);
        out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    }

    /// Second derivative, same order layout as `deriv`.
    pub fn deriv2(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.deriv2_into(f, &mut out);
        out
    }

    pub fn deriv2_into(&self, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), self.n, "table length must match grid");
        let n = self.n;
        let h2 = self.ds * self.ds;
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
        out[1] = (10.0 * f[0] - 15.0 * f[1] - 4.0 * f[2] + 14.0 * f[3] - 6.0 * f[4] + f[5])
            / (12.0 * h2);
        for i in 2..n - 2 {
            out[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2])
                / (12.0 * h2);
        }
        out[n - 2] = (10.0 * f[n - 1] - 15.0 * f[n - 2] - 4.0 * f[n - 3] + 14.0 * f[n - 4]
            - 6.0 * f[n - 5]
            + f[n - 6])
            / (12.0 * h2);
        out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    }

    /// 3-point (2nd order) first derivative; the implicit stepper uses this
    /// so its tridiagonal Jacobian is the exact linearization.
    pub fn deriv_3pt_into(&self, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), self.n, "table length must match grid");
        let n = self.n;
        let h = self.ds;
        out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
        for i in 1..n - 1 {
            out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
        }
        out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    }

    /// 3-point (2nd order) second derivative, matching `deriv_3pt_into`.
    pub fn deriv2_3pt_into(&self, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), self.n, "table length must match grid");
        let n = self.n;
        let h2 = self.ds * self.ds;
        out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
        for i in 1..n - 1 {
            out[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) / h2;
        }
        out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    }

    /// Composite Simpson over whole cells [i0, i1]; falls back to the 3/8 rule
    /// on the last three cells when the cell count is odd.
    pub fn integrate_nodes(&self, f: &[f64], i0: usize, i1: usize) -> f64 {
        assert!(i1 >= i0 && i1 < self.n && f.len() == self.n);
        let h = self.ds;
        let m = i1 - i0;
        match m {
            0 => 0.0,
            1 => 0.5 * h * (f[i0] + f[i0 + 1]),
            2 => h / 3.0 * (f[i0] + 4.0 * f[i0 + 1] + f[i0 + 2]),
            3 => 3.0 * h / 8.0 * (f[i0] + 3.0 * f[i0 + 1] + 3.0 * f[i0 + 2] + f[i0 + 3]),
            _ => {
                if m % 2 == 0 {
                    simpson_even(f, i0, i1, h)
                } else {
                    simpson_even(f, i0, i1 - 3, h)
                        + 3.0 * h / 8.0
                            * (f[i1 - 3] + 3.0 * f[i1 - 2] + 3.0 * f[i1 - 1] + f[i1])
                }
            }
        }
    }

    /// Integral of a sampled table over an arbitrary sub-interval. Whole cells
    /// use the Simpson rule above; partial end cells use trapezoids on
    /// linearly interpolated values.
    pub fn integrate(&self, f: &[f64], s1: f64, s2: f64) -> Result<f64> {
        if s1 > s2 {
            return Err(KrfError::OutOfRange(format!("s1 = {s1} > s2 = {s2}")));
        }
        let tol = 1e-9 * self.ds;
        if s1 < self.s_min - tol || s2 > self.s_max + tol {
            return Err(KrfError::OutOfRange(format!(
                "[{s1}, {s2}] outside grid [{}, {}]",
                self.s_min, self.s_max
            )));
        }
        let pos = |s: f64| ((s - self.s_min) / self.ds).clamp(0.0, (self.n - 1) as f64);
        let interp = |s: f64| {
            let x = pos(s);
            let i = (x.floor() as usize).min(self.n - 2);
            let w = x - i as f64;
            f[i] * (1.0 - w) + f[i + 1] * w
        };
        let x1 = pos(s1);
        let x2 = pos(s2);
        let j1 = x1.ceil() as usize;
        let j2 = x2.floor() as usize;
        if j1 > j2 {
            // both endpoints inside one cell
            return Ok(0.5 * (s2 - s1) * (interp(s1) + interp(s2)));
        }
        let mut total = self.integrate_nodes(f, j1, j2);
        let left = self.node(j1) - s1;
        if left > tol {
            total += 0.5 * left * (interp(s1) + f[j1]);
        }
        let right = s2 - self.node(j2);
        if right > tol {
            total += 0.5 * right * (f[j2] + interp(s2));
        }
        Ok(total)
    }
}

fn simpson_even(f: &[f64], i0: usize, i1: usize, h: f64) -> f64 {
    debug_assert!((i1 - i0) % 2 == 0 && i1 > i0);
    let mut acc = f[i0] + f[i1];
    let mut i = i0 + 1;
    while i < i1 {
        acc += 4.0 * f[i];
        if i + 1 < i1 {
            acc += 2.0 * f[i + 1];
        }
        i += 2;
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_ranges() {
        assert!(RadialGrid::new(0.0, 1.0, 8).is_err());
        assert!(RadialGrid::new(1.0, 1.0, 32).is_err());
        assert!(RadialGrid::new(2.0, 1.0, 32).is_err());
    }

    #[test]
    fn nodes_are_exact_affine() {
        let g = RadialGrid::new(-1.0, 3.0, 33).unwrap();
        assert_eq!(g.ds(), 4.0 / 32.0);
        for i in 0..33 {
            assert_eq!(g.node(i), -1.0 + i as f64 * g.ds());
        }
    }

    #[test]
    fn deriv_is_fourth_order_in_the_interior() {
        let mut errs = Vec::new();
        for &n in &[65usize, 129] {
            let g = RadialGrid::new(-1.0, 1.0, n).unwrap();
            let f = g.sample(|s| (1.3 * s).sin());
            let d = g.deriv(&f);
            let err = (4..n - 4)
                .map(|i| (d[i] - 1.3 * (1.3 * g.node(i)).cos()).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 3.7 && rate < 4.3, "rate {rate}");
    }

    #[test]
    fn deriv2_is_fourth_order_in_the_interior() {
        let mut errs = Vec::new();
        for &n in &[65usize, 129] {
            let g = RadialGrid::new(-1.0, 1.0, n).unwrap();
            let f = g.sample(|s| (1.3 * s).sin());
            let d = g.deriv2(&f);
            let err = (4..n - 4)
                .map(|i| (d[i] + 1.69 * (1.3 * g.node(i)).sin()).abs())
                .fold(0.0f64, f64::max);
            errs.push(err);
        }
        let rate = (errs[0] / errs[1]).log2();
        assert!(rate > 3.6 && rate < 4.4, "rate {rate}");
    }

    #[test]
    fn derivative_of_constant_table_is_exactly_zero() {
        let g = RadialGrid::new(0.0, 2.0, 21).unwrap();
        let f = vec![5.25; 21];
        assert!(g.deriv(&f).iter().all(|&v| v == 0.0));
        assert!(g.deriv2(&f).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let g = RadialGrid::new(0.0, 1.0, 17).unwrap();
        let f = g.sample(|s| s * s * s - 2.0 * s + 1.0);
        // odd cell count path
        let odd = g.integrate_nodes(&f, 0, 13);
        let b = g.node(13);
        let exact = b.powi(4) / 4.0 - b * b + b;
        assert_relative_eq!(odd, exact, max_relative = 1e-13);
        let even = g.integrate_nodes(&f, 0, 16);
        assert_relative_eq!(even, 0.25 - 1.0 + 1.0, max_relative = 1e-13);
    }

    #[test]
    fn integrate_handles_partial_cells() {
        let g = RadialGrid::new(0.0, 1.0, 101).unwrap();
        let f = g.sample(|s| s.exp());
        let v = g.integrate(&f, 0.1234, 0.8766).unwrap();
        let exact = 0.8766f64.exp() - 0.1234f64.exp();
        assert_relative_eq!(v, exact, max_relative = 1e-5);
        assert!(g.integrate(&f, -0.2, 0.5).is_err());
        assert_eq!(g.integrate(&f, 0.5, 0.5).unwrap(), 0.0);
    }
}
