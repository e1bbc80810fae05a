//! Numerical prerequisites: the turning point y_max(ε₀), the libration orbit
//! y(t) with its period T(ε₀), and the two fundamental systems (ξ₁,ξ₂) and
//! (η₁,η₂) of the linearized equations along the orbit,
//!
//! ```text
//! ξ̈ + V_xx(0, y(t)) ξ = 0,    η̈ + V_yy(0, y(t)) η = 0,
//! ```
//!
//! both with identity initial data. Everything is stored as grid functions on
//! the shared grid over [0, T] and treated as known functions downstream.

use crate::config::NumericsConfig;
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::ode::{integrate_fixed, integrate_until_downcross};
use crate::symexpr::{SymbolicField, Var};
use std::sync::Arc;

/// Orbit and fundamental systems on the shared grid.
#[derive(Debug, Clone)]
pub struct OrbitPrerequisites {
    pub y_max: f64,
    pub period: f64,
    pub energy: f64,
    pub grid: Arc<Grid>,
    pub y: GridFn,
    pub ydot: GridFn,
    pub xi1: GridFn,
    pub xi1dot: GridFn,
    pub xi2: GridFn,
    pub xi2dot: GridFn,
    pub eta1: GridFn,
    pub eta1dot: GridFn,
    pub eta2: GridFn,
    pub eta2dot: GridFn,
}

impl OrbitPrerequisites {
    /// Monodromy trace of the transverse linearization, ξ₁(T) + ξ̇₂(T).
    pub fn transverse_trace(&self) -> f64 {
        self.xi1.end_val() + self.xi2dot.end_val()
    }

    /// Debug dump of all prerequisite functions on the shared grid.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,y,ydot,xi1,xi1dot,xi2,xi2dot,eta1,eta1dot,eta2,eta2dot\n");
        for k in 0..=self.grid.n {
            out.push_str(&format!(
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                self.grid.node(k),
                self.y.vals[k],
                self.ydot.vals[k],
                self.xi1.vals[k],
                self.xi1dot.vals[k],
                self.xi2.vals[k],
                self.xi2dot.vals[k],
                self.eta1.vals[k],
                self.eta1dot.vals[k],
                self.eta2.vals[k],
                self.eta2dot.vals[k],
            ));
        }
        out
    }
}

fn v_on_axis(v: &SymbolicField, index: &[Var], y: f64) -> f64 {
    v.partial(index)
        .expect("order within potential contract")
        .eval(0.0, y, 0.0, 0.0)
}

/// Largest root of V(0,y) = energy in the scanned range, polished to
/// |V(0,y_max) − energy| ≤ 1e-12·(1+|energy|). The turning point must be
/// regular (V_y(0,y_max) ≠ 0).
pub fn solve_ymax(
    v: &SymbolicField,
    energy: f64,
    bracket_hint: Option<(f64, f64)>,
    cfg: &NumericsConfig,
) -> Result<f64> {
    let f = |yy: f64| v.eval(0.0, yy, 0.0, 0.0) - energy;
    let (lo, hi, samples) = match bracket_hint {
        Some((a, b)) => (a, b, cfg.ymax_scan_samples.min(4096)),
        None => (cfg.ymax_scan_lo, cfg.ymax_scan_hi, cfg.ymax_scan_samples),
    };
    // scan for the bracket with the largest y
    let mut bracket = None;
    let mut prev_y = lo;
    let mut prev_f = f(lo);
    for k in 1..=samples {
        let yy = lo + (hi - lo) * k as f64 / samples as f64;
        let fy = f(yy);
        if prev_f == 0.0 {
            bracket = Some((prev_y, prev_y));
        } else if prev_f * fy < 0.0 {
            bracket = Some((prev_y, yy));
        } else if fy == 0.0 {
            bracket = Some((yy, yy));
        }
        prev_y = yy;
        prev_f = fy;
    }
    let (mut a, mut b) = bracket.ok_or(Error::NoTurningPoint { lo, hi, energy })?;
    // bisection
    if a < b {
        let mut fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fa * fm <= 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
            if b - a < 1e-15 * (1.0 + b.abs()) {
                break;
            }
        }
    }
    let mut root = 0.5 * (a + b);
    // Newton polish
    for _ in 0..8 {
        let d = v_on_axis(v, &[Var::Y], root);
        if d == 0.0 {
            break;
        }
        let step = f(root) / d;
        root -= step;
        if step.abs() < 1e-16 * (1.0 + root.abs()) {
            break;
        }
    }
    if f(root).abs() > 1e-12 * (1.0 + energy.abs()) {
        return Err(Error::Newton(format!(
            "y_max polish stalled at residual {:.3e}",
            f(root)
        )));
    }
    let v2 = v_on_axis(v, &[Var::Y], root);
    if v2.abs() < 1e-10 * (1.0 + energy.abs()) {
        return Err(Error::DegenerateTurningPoint { ymax: root, v2 });
    }
    Ok(root)
}

/// Integrate the orbit from (y, ẏ) = (y_max, 0), locate the period as the
/// first downward crossing of ẏ = 0, and resample onto the shared grid.
pub fn integrate_orbit(
    v: &SymbolicField,
    y_max: f64,
    energy: f64,
    cfg: &NumericsConfig,
) -> Result<OrbitPrerequisites> {
    let v2_at_start = v_on_axis(v, &[Var::Y], y_max);
    if v2_at_start <= 0.0 {
        return Err(Error::WrongTurningPoint {
            ymax: y_max,
            v2: v2_at_start,
        });
    }
    let vy = v.partial(&[Var::Y]).expect("first-order potential partial");
    let rhs = |_t: f64, s: &[f64], ds: &mut [f64]| {
        ds[0] = s[1];
        ds[1] = -vy.eval(0.0, s[0], 0.0, 0.0);
    };
    // coarse pre-pass for a period estimate, then a dead-band of T_est/100
    let (coarse, _) =
        integrate_until_downcross(&rhs, 0.0, cfg.max_time, &[y_max, 0.0], 1e-6, 1e-8, 1, 0.0)?;
    let t_est = coarse.t;
    let (hit, sol) = integrate_until_downcross(
        &rhs,
        0.0,
        cfg.max_time,
        &[y_max, 0.0],
        cfg.rtol,
        cfg.atol,
        1,
        t_est / 100.0,
    )?;
    let period = hit.t;
    let grid = Grid::new(period, cfg.grid_intervals);
    let nodes = grid.nodes();
    let mut yv = Vec::with_capacity(nodes.len());
    let mut pv = Vec::with_capacity(nodes.len());
    let mut buf = [0.0_f64; 2];
    for &t in &nodes {
        sol.eval(t, &mut buf);
        yv.push(buf[0]);
        pv.push(buf[1]);
    }
    // periodicity guard: the resampled endpoint is the event state
    *yv.last_mut().unwrap() = hit.state[0];
    *pv.last_mut().unwrap() = hit.state[1];
    let pdots: Vec<f64> = yv.iter().map(|&yy| -v_on_axis(v, &[Var::Y], yy)).collect();
    let y_fn = GridFn::new(grid.clone(), yv.clone(), pv.clone());
    let ydot_fn = GridFn::new(grid.clone(), pv.clone(), pdots);
    // energy conservation check on the nodes
    let mut drift = 0.0_f64;
    for k in 0..yv.len() {
        let e = 0.5 * pv[k] * pv[k] + v.eval(0.0, yv[k], 0.0, 0.0);
        drift = drift.max((e - energy).abs());
    }
    if drift > cfg.tol_energy {
        return Err(Error::EnergyDrift {
            drift,
            tol: cfg.tol_energy,
        });
    }
    let (xi, eta) = fundamental_systems_impl(v, &y_fn, &grid, cfg);
    Ok(OrbitPrerequisites {
        y_max,
        period,
        energy,
        grid,
        y: y_fn,
        ydot: ydot_fn,
        xi1: xi[0].clone(),
        xi1dot: xi[1].clone(),
        xi2: xi[2].clone(),
        xi2dot: xi[3].clone(),
        eta1: eta[0].clone(),
        eta1dot: eta[1].clone(),
        eta2: eta[2].clone(),
        eta2dot: eta[3].clone(),
    })
}

/// Both fundamental systems with identity initial data, solved fixed-step on
/// the shared grid with the coefficient functions read from the orbit.
fn fundamental_systems_impl(
    v: &SymbolicField,
    y_fn: &GridFn,
    grid: &Arc<Grid>,
    cfg: &NumericsConfig,
) -> ([GridFn; 4], [GridFn; 4]) {
    let vxx = v.partial(&[Var::X, Var::X]).unwrap();
    let vyy = v.partial(&[Var::Y, Var::Y]).unwrap();
    let rhs = |t: f64, s: &[f64], ds: &mut [f64]| {
        let yy = y_fn.eval(t);
        let cx = vxx.eval(0.0, yy, 0.0, 0.0);
        let cy = vyy.eval(0.0, yy, 0.0, 0.0);
        // (ξ1, ξ1', ξ2, ξ2', η1, η1', η2, η2')
        ds[0] = s[1];
        ds[1] = -cx * s[0];
        ds[2] = s[3];
        ds[3] = -cx * s[2];
        ds[4] = s[5];
        ds[5] = -cy * s[4];
        ds[6] = s[7];
        ds[7] = -cy * s[6];
    };
    let y0 = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
    let states = integrate_fixed(&rhs, &grid.nodes(), &y0, cfg.substeps);
    let n = grid.n;
    let col = |j: usize| -> Vec<f64> { (0..=n).map(|k| states[k][j]).collect() };
    let coeff_x: Vec<f64> = (0..=n)
        .map(|k| vxx.eval(0.0, y_fn.vals[k], 0.0, 0.0))
        .collect();
    let coeff_y: Vec<f64> = (0..=n)
        .map(|k| vyy.eval(0.0, y_fn.vals[k], 0.0, 0.0))
        .collect();
    let second =
        |val: &[f64], c: &[f64]| -> Vec<f64> { val.iter().zip(c).map(|(v, c)| -c * v).collect() };
    let build = |vi: usize, c: &[f64]| -> [GridFn; 4] {
        let v1 = col(vi);
        let d1 = col(vi + 1);
        let v2 = col(vi + 2);
        let d2 = col(vi + 3);
        [
            GridFn::new(grid.clone(), v1.clone(), d1.clone()),
            GridFn::new(grid.clone(), d1, second(&v1, c)),
            GridFn::new(grid.clone(), v2.clone(), d2.clone()),
            GridFn::new(grid.clone(), d2, second(&v2, c)),
        ]
    };
    (build(0, &coeff_x), build(4, &coeff_y))
}

/// Compute y_max, the orbit and both fundamental systems for one energy.
pub fn prerequisites(
    v: &SymbolicField,
    e0: f64,
    eps0: f64,
    cfg: &NumericsConfig,
) -> Result<OrbitPrerequisites> {
    if cfg.grid_intervals < 16 {
        return Err(Error::Config("grid_intervals must be at least 16".into()));
    }
    if cfg.substeps == 0 {
        return Err(Error::Config("substeps must be positive".into()));
    }
    let energy = e0 + eps0;
    let y_max = solve_ymax(v, energy, None, cfg)?;
    integrate_orbit(v, y_max, energy, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::FieldKind;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::TAU;

    fn harmonic() -> SymbolicField {
        SymbolicField::parse_field("0.5*(x^2+y^2)", FieldKind::Potential).unwrap()
    }

    #[test]
    fn ymax_of_harmonic_well() {
        let cfg = NumericsConfig::default();
        let v = harmonic();
        assert_abs_diff_eq!(
            solve_ymax(&v, 0.5, None, &cfg).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            solve_ymax(&v, 2.0, None, &cfg).unwrap(),
            2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn ymax_of_cubic_well_matches_brute_scan() {
        // independent oracle: dense sign scan plus plain bisection
        let cfg = NumericsConfig::default();
        let v = SymbolicField::parse_field("0.5*y^2 - y^3/3", FieldKind::Potential).unwrap();
        let energy = 0.1;
        let f = |yy: f64| v.eval(0.0, yy, 0.0, 0.0) - energy;
        let mut bra = None;
        let mut prev = 0.0;
        for k in 1..=1_000_000 {
            let yy = k as f64 * 1e-6;
            if f(prev) * f(yy) < 0.0 {
                bra = Some((prev, yy));
            }
            prev = yy;
        }
        let (mut a, mut b) = bra.unwrap();
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a) * f(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        let oracle = 0.5 * (a + b);
        let got = solve_ymax(&v, energy, Some((0.0, 1.0)), &cfg).unwrap();
        assert_abs_diff_eq!(got, oracle, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_turning_point_is_rejected() {
        // V(0,y) = y^2(1-y)^2/... pick E at the local max of a double well:
        // V = y^2/2 - y^4/4 has a maximum V = 1/4 at y = 1 with V_y(1) = 0.
        let cfg = NumericsConfig::default();
        let v = SymbolicField::parse_field("y^2/2 - y^4/4", FieldKind::Potential).unwrap();
        let err = solve_ymax(&v, 0.25, Some((0.5, 1.5)), &cfg).unwrap_err();
        assert!(matches!(err, Error::DegenerateTurningPoint { .. }));
    }

    #[test]
    fn harmonic_orbit_period_and_trajectory() {
        let cfg = NumericsConfig::default();
        let v = harmonic();
        let pre = prerequisites(&v, 0.0, 0.5, &cfg).unwrap();
        assert_abs_diff_eq!(pre.period, TAU, epsilon = 1e-9);
        assert_abs_diff_eq!(pre.y_max, 1.0, epsilon = 1e-12);
        for k in [0, 1000, 2345, 4096] {
            let t = pre.grid.node(k);
            assert_abs_diff_eq!(pre.y.vals[k], t.cos(), epsilon = 1e-9);
            assert_abs_diff_eq!(pre.ydot.vals[k], -t.sin(), epsilon = 1e-9);
        }
    }

    #[test]
    fn isochrony_of_the_harmonic_family() {
        let cfg = NumericsConfig::default();
        let v = harmonic();
        for eps in [0.1, 0.5, 2.0] {
            let pre = prerequisites(&v, 0.0, eps, &cfg).unwrap();
            assert_abs_diff_eq!(pre.period, TAU, epsilon = 1e-9);
        }
    }

    #[test]
    fn fundamental_systems_closed_forms() {
        let cfg = NumericsConfig::default();
        // V = (omega^2 x^2 + y^2)/2: xi1 = cos(omega t), xi2 = sin(omega t)/omega
        let omega = 0.7_f64;
        let v = SymbolicField::parse_field(
            &format!("0.5*({}*x^2+y^2)", omega * omega),
            FieldKind::Potential,
        )
        .unwrap();
        let pre = prerequisites(&v, 0.0, 0.5, &cfg).unwrap();
        for k in [512, 1777, 4096] {
            let t = pre.grid.node(k);
            assert_abs_diff_eq!(pre.xi1.vals[k], (omega * t).cos(), epsilon = 1e-10);
            assert_abs_diff_eq!(pre.xi2.vals[k], (omega * t).sin() / omega, epsilon = 1e-10);
            assert_abs_diff_eq!(pre.eta1.vals[k], t.cos(), epsilon = 1e-10);
            assert_abs_diff_eq!(pre.eta2.vals[k], t.sin(), epsilon = 1e-10);
        }
    }

    #[test]
    fn orbit_is_periodic_at_the_event() {
        let cfg = NumericsConfig::default();
        let v = SymbolicField::parse_field(
            "0.5*y^2 + 0.1*y^3 + 0.125*y^4 + 0.5*x^2*y",
            FieldKind::Potential,
        )
        .unwrap();
        let pre = prerequisites(&v, 0.0, 0.4, &cfg).unwrap();
        assert!((pre.y.end_val() - pre.y_max).abs() <= 1e-9);
        assert!(pre.ydot.end_val().abs() <= 1e-9);
        // debug dump smoke check
        let csv = pre.to_csv();
        assert!(csv.starts_with("t,y,ydot,"));
        assert_eq!(csv.lines().count(), pre.grid.n + 2);
    }

    #[test]
    fn wronskians_stay_unit() {
        let cfg = NumericsConfig::default();
        let v =
            SymbolicField::parse_field("0.5*y^2 + 0.2*y^3 + 0.5*(1+y)*x^2", FieldKind::Potential)
                .unwrap();
        let pre = prerequisites(&v, 0.0, 0.4, &cfg).unwrap();
        let mut worst = 0.0_f64;
        for k in 0..=pre.grid.n {
            let wx = pre.xi1.vals[k] * pre.xi2dot.vals[k] - pre.xi2.vals[k] * pre.xi1dot.vals[k];
            let wy =
                pre.eta1.vals[k] * pre.eta2dot.vals[k] - pre.eta2.vals[k] * pre.eta1dot.vals[k];
            worst = worst.max((wx - 1.0).abs()).max((wy - 1.0).abs());
        }
        assert!(worst < 1e-9, "wronskian drift {worst}");
    }

    #[test]
    fn eta_system_matches_orbit_variation() {
        // (η1, η1') is the derivative of the orbit with respect to its initial
        // y, checkable by differencing perturbed orbits.
        let cfg = NumericsConfig::default();
        let v = SymbolicField::parse_field("0.5*y^2 + 0.25*y^4", FieldKind::Potential).unwrap();
        let pre = prerequisites(&v, 0.0, 0.75, &cfg).unwrap();
        let h = 1e-6;
        let rhs = |_t: f64, s: &[f64], ds: &mut [f64]| {
            ds[0] = s[1];
            ds[1] = -(s[0] + s[0] * s[0] * s[0]);
        };
        let ts = pre.grid.nodes();
        let plus = integrate_fixed(&rhs, &ts, &[pre.y_max + h, 0.0], 2);
        let minus = integrate_fixed(&rhs, &ts, &[pre.y_max - h, 0.0], 2);
        for k in [777, 2048, 3555] {
            let fd = (plus[k][0] - minus[k][0]) / (2.0 * h);
            let fd_dot = (plus[k][1] - minus[k][1]) / (2.0 * h);
            assert!((fd - pre.eta1.vals[k]).abs() <= 1e-5 * (1.0 + fd.abs()));
            assert!((fd_dot - pre.eta1dot.vals[k]).abs() <= 1e-5 * (1.0 + fd_dot.abs()));
        }
    }

    #[test]
    fn quartic_period_matches_period_integral() {
        // independent oracle: T = 4 ∫ dy / sqrt(2(E - V(0,y))) over [0, y_max],
        // regularized by y = y_max·sin(θ) and integrated by Gauss–Legendre.
        let cfg = NumericsConfig::default();
        let v = SymbolicField::parse_field("0.5*y^2 + 0.25*y^4", FieldKind::Potential).unwrap();
        let energy = 0.75; // y_max = 1
        let pre = prerequisites(&v, 0.0, energy, &cfg).unwrap();
        assert_abs_diff_eq!(pre.y_max, 1.0, epsilon = 1e-12);
        let vy = |yy: f64| 0.5 * yy * yy + 0.25 * yy.powi(4);
        let ymx = pre.y_max;
        let integrand = |theta: f64| {
            let yy = ymx * theta.sin();
            ymx * theta.cos() / (2.0 * (energy - vy(yy))).sqrt()
        };
        // 64-point Gauss–Legendre on [0, pi/2] via composite 8-panel 16-point
        let t_oracle = 4.0 * gauss(&integrand, 0.0, std::f64::consts::FRAC_PI_2, 16);
        assert_abs_diff_eq!(pre.period, t_oracle, epsilon = 1e-9);
        // frozen value from an independent quadrature of the same integral
        assert_abs_diff_eq!(pre.period, 4.768_022_029_102_461, epsilon = 1e-8);
    }

    fn gauss(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        // 10-point Gauss–Legendre nodes/weights on [-1,1]
        const XS: [f64; 5] = [
            0.148_874_338_981_631_22,
            0.433_395_394_129_247_2,
            0.679_409_568_299_024_4,
            0.865_063_366_688_984_5,
            0.973_906_528_517_171_7,
        ];
        const WS: [f64; 5] = [
            0.295_524_224_714_752_87,
            0.269_266_719_309_996_35,
            0.219_086_362_515_982_04,
            0.149_451_349_150_580_6,
            0.066_671_344_308_688_14,
        ];
        let mut total = 0.0;
        let hp = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * hp;
            let mid = lo + 0.5 * hp;
            let half = 0.5 * hp;
            for k in 0..5 {
                total += WS[k] * half * (f(mid + half * XS[k]) + f(mid - half * XS[k]));
            }
        }
        total
    }
}
