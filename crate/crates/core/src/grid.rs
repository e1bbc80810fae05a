//! The shared storage grid and cubic-Hermite grid functions.
//!
//! Every dense function of the pipeline lives on one uniform grid over
//! [0, T(ε₀)] and stores value and first derivative at each node. Piecewise
//! cubic Hermite interpolation from exact nodal derivatives is fourth-order
//! accurate, and the nodal integration rule below is exact for the interpolant,
//! so nested quadratures stay consistent across the whole hierarchy.

use std::sync::Arc;

/// Uniform grid with nodes t_i = i·t_end/n, i = 0..=n.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub t_end: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(t_end: f64, n: usize) -> Arc<Self> {
        assert!(t_end > 0.0 && n >= 2);
        Arc::new(Self { t_end, n })
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        // exact endpoint
        if i == self.n {
            self.t_end
        } else {
            i as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }
}

/// A function on the shared grid: nodal values and first derivatives.
#[derive(Debug, Clone)]
pub struct GridFn {
    pub grid: Arc<Grid>,
    pub vals: Vec<f64>,
    pub ders: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: Arc<Grid>, vals: Vec<f64>, ders: Vec<f64>) -> Self {
        assert_eq!(vals.len(), grid.n + 1);
        assert_eq!(ders.len(), grid.n + 1);
        Self { grid, vals, ders }
    }

    /// Build from closures evaluated at the nodes.
    pub fn tabulate(
        grid: &Arc<Grid>,
        mut v: impl FnMut(f64) -> f64,
        mut d: impl FnMut(f64) -> f64,
    ) -> Self {
        let vals: Vec<f64> = grid.nodes().iter().map(|&t| v(t)).collect();
        let ders: Vec<f64> = grid.nodes().iter().map(|&t| d(t)).collect();
        Self::new(grid.clone(), vals, ders)
    }

    pub fn end_val(&self) -> f64 {
        *self.vals.last().unwrap()
    }

    /// Cubic Hermite evaluation; t is clamped to [0, t_end].
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.grid.n;
        let h = self.grid.h();
        let t = t.clamp(0.0, self.grid.t_end);
        let mut k = (t / h) as usize;
        if k >= n {
            k = n - 1;
        }
        let th = (t - self.grid.node(k)) / h;
        let th2 = th * th;
        let th3 = th2 * th;
        let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        let h10 = th3 - 2.0 * th2 + th;
        let h01 = -2.0 * th3 + 3.0 * th2;
        let h11 = th3 - th2;
        h00 * self.vals[k]
            + h10 * h * self.ders[k]
            + h01 * self.vals[k + 1]
            + h11 * h * self.ders[k + 1]
    }

    /// Derivative of the interpolant; t is clamped to [0, t_end].
    pub fn eval_deriv(&self, t: f64) -> f64 {
        let n = self.grid.n;
        let h = self.grid.h();
        let t = t.clamp(0.0, self.grid.t_end);
        let mut k = (t / h) as usize;
        if k >= n {
            k = n - 1;
        }
        let th = (t - self.grid.node(k)) / h;
        let th2 = th * th;
        let d00 = (6.0 * th2 - 6.0 * th) / h;
        let d10 = 3.0 * th2 - 4.0 * th + 1.0;
        let d01 = (-6.0 * th2 + 6.0 * th) / h;
        let d11 = 3.0 * th2 - 2.0 * th;
        d00 * self.vals[k] + d10 * self.ders[k] + d01 * self.vals[k + 1] + d11 * self.ders[k + 1]
    }

    /// Antiderivative with F(0) = 0, exact for the cubic interpolant.
    ///
    /// Per interval: ∫ = h/2·(v₀+v₁) + h²/12·(d₀−d₁).
    pub fn cumulative_integral(&self) -> GridFn {
        let n = self.grid.n;
        let h = self.grid.h();
        let mut acc = vec![0.0; n + 1];
        for k in 0..n {
            let seg = 0.5 * h * (self.vals[k] + self.vals[k + 1])
                + h * h / 12.0 * (self.ders[k] - self.ders[k + 1]);
            acc[k + 1] = acc[k] + seg;
        }
        GridFn::new(self.grid.clone(), acc, self.vals.clone())
    }

    /// Largest |value| over the nodes.
    pub fn sup_norm(&self) -> f64 {
        self.vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_interpolation_is_fourth_order() {
        let g = Grid::new(std::f64::consts::TAU, 512);
        let f = GridFn::tabulate(&g, |t| t.sin(), |t| t.cos());
        let mut worst = 0.0_f64;
        for k in 0..5000 {
            let t = g.t_end * (k as f64 + 0.37) / 5000.0;
            worst = worst.max((f.eval(t) - t.sin()).abs());
        }
        // h^4/384 * max|f''''| with h ~ 0.0123 gives ~6e-11
        assert!(worst < 1e-10, "interpolation error {worst}");
    }

    #[test]
    fn cumulative_integral_matches_closed_form() {
        let g = Grid::new(std::f64::consts::TAU, 2048);
        let f = GridFn::tabulate(&g, |t| t.cos(), |t| -t.sin());
        let int = f.cumulative_integral();
        for k in [100, 500, 2048] {
            let t = g.node(k);
            assert_abs_diff_eq!(int.vals[k], t.sin(), epsilon = 1e-12);
        }
    }
}
