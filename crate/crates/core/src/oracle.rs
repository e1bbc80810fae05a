//! Independent ground truth: the return map by direct numerical integration of
//! the full (possibly deformed) flow, differentiated by Richardson-extrapolated
//! finite differences.
//!
//! The flow is integrated with a *frozen* fixed-step sequence (step size and
//! section dead-band taken from the session's center point), so the numerical
//! map is a smooth function of (q, p, ε, δ) down to machine precision and
//! high-order differencing is limited by truncation only. Differencing uses
//! three step levels h, h/2, h/4 with two Richardson stages and reports a
//! per-value error estimate from the disagreement of the last two stages.

use crate::chain::{PoincareDerivatives, DERIVATIVE_NAMES};
use crate::config::{NumericsConfig, OracleConfig};
use crate::error::{Error, Result};
use crate::ode::{
    integrate_fixed_visit, integrate_until_downcross, polish_downcross, DenseStep, Solution,
};
use crate::prereq::solve_ymax;
use crate::symexpr::{SymbolicField, Var};
use rayon::prelude::*;
use std::collections::HashMap;

/// Direct-integration view of one problem (V, F, E₀).
pub struct Oracle<'a> {
    v: &'a SymbolicField,
    f: Option<&'a SymbolicField>,
    e0: f64,
    num: NumericsConfig,
    cfg: OracleConfig,
}

/// Frozen per-session quantities: everything that must not vary across a
/// finite-difference stencil.
#[derive(Debug, Clone, Copy)]
pub struct SectionReference {
    pub eps: f64,
    pub y_max: f64,
    pub period: f64,
    pub step: f64,
    pub dead_band: f64,
}

/// One polished crossing of the section p_y = 0.
#[derive(Debug, Clone)]
pub struct SectionEvent {
    pub t: f64,
    pub state: [f64; 4],
    /// sign of ṗ_y at the crossing (returned crossings have it negative)
    pub direction: f64,
}

impl<'a> Oracle<'a> {
    pub fn new(
        v: &'a SymbolicField,
        f: Option<&'a SymbolicField>,
        e0: f64,
        num: NumericsConfig,
        cfg: OracleConfig,
    ) -> Self {
        Self { v, f, e0, num, cfg }
    }

    fn deformed_rhs(&self, delta: f64) -> impl Fn(f64, &[f64], &mut [f64]) + Sync + '_ {
        // hoist the partial lookups out of the per-evaluation path
        let vx = self.v.partial(&[Var::X]).unwrap();
        let vy = self.v.partial(&[Var::Y]).unwrap();
        let fgrad = self.f.map(|f| {
            (
                f.partial(&[Var::X]).unwrap(),
                f.partial(&[Var::Y]).unwrap(),
                f.partial(&[Var::Px]).unwrap(),
                f.partial(&[Var::Py]).unwrap(),
            )
        });
        move |_t: f64, s: &[f64], ds: &mut [f64]| {
            let (x, y, px, py) = (s[0], s[1], s[2], s[3]);
            let mut dx = px;
            let mut dy = py;
            let mut dpx = -vx.eval(x, y, px, py);
            let mut dpy = -vy.eval(x, y, px, py);
            if delta != 0.0 {
                if let Some((fx, fy, fpx, fpy)) = &fgrad {
                    dx += delta * fpx.eval(x, y, px, py);
                    dy += delta * fpy.eval(x, y, px, py);
                    dpx -= delta * fx.eval(x, y, px, py);
                    dpy -= delta * fy.eval(x, y, px, py);
                }
            }
            ds[0] = dx;
            ds[1] = dy;
            ds[2] = dpx;
            ds[3] = dpy;
        }
    }

    /// Undeformed reference at energy offset `eps`: turning point, period (by
    /// adaptive integration with event polishing), frozen step and dead-band.
    pub fn reference(&self, eps: f64) -> Result<SectionReference> {
        let energy = self.e0 + eps;
        let y_max = solve_ymax(self.v, energy, None, &self.num)?;
        let vy = self.v.partial(&[Var::Y]).unwrap();
        let rhs = |_t: f64, s: &[f64], ds: &mut [f64]| {
            ds[0] = s[1];
            ds[1] = -vy.eval(0.0, s[0], 0.0, 0.0);
        };
        let (coarse, _) = integrate_until_downcross(
            &rhs,
            0.0,
            self.num.max_time,
            &[y_max, 0.0],
            1e-6,
            1e-8,
            1,
            0.0,
        )?;
        let (hit, _) = integrate_until_downcross(
            &rhs,
            0.0,
            self.num.max_time,
            &[y_max, 0.0],
            self.num.rtol,
            self.num.atol,
            1,
            coarse.t / 100.0,
        )?;
        let period = hit.t;
        Ok(SectionReference {
            eps,
            y_max,
            period,
            step: period / self.cfg.steps_per_period as f64,
            dead_band: period / 4.0,
        })
    }

    /// Solve the starting-height equation
    /// ½p² + V(q,y) + δ·F(q,y,p,0) = E₀ + ε by damped Newton seeded at the
    /// reference turning point.
    pub fn starting_height(
        &self,
        r: &SectionReference,
        q: f64,
        p: f64,
        eps: f64,
        delta: f64,
    ) -> Result<f64> {
        let target = self.e0 + eps;
        let g = |y: f64| -> f64 {
            let mut e = 0.5 * p * p + self.v.eval(q, y, 0.0, 0.0);
            if delta != 0.0 {
                if let Some(f) = self.f {
                    e += delta * f.eval(q, y, p, 0.0);
                }
            }
            e - target
        };
        let gp = |y: f64| -> f64 {
            let mut d = self.v.partial(&[Var::Y]).unwrap().eval(q, y, 0.0, 0.0);
            if delta != 0.0 {
                if let Some(f) = self.f {
                    d += delta * f.partial(&[Var::Y]).unwrap().eval(q, y, p, 0.0);
                }
            }
            d
        };
        let mut y = r.y_max;
        let mut res = g(y);
        for _ in 0..self.cfg.newton_max {
            let d = gp(y);
            if d == 0.0 {
                return Err(Error::Newton(
                    "flat energy surface in the height solve".into(),
                ));
            }
            let mut step = res / d;
            let mut y_new = y - step;
            let mut res_new = g(y_new);
            let mut damping = 0;
            while res_new.abs() > res.abs() && damping < 30 {
                step *= 0.5;
                y_new = y - step;
                res_new = g(y_new);
                damping += 1;
            }
            y = y_new;
            res = res_new;
            if step.abs() <= 1e-15 * (1.0 + y.abs()) {
                break;
            }
        }
        if res.abs() > 1e-11 * (1.0 + target.abs()) {
            return Err(Error::Newton(format!(
                "starting-height residual {res:.3e} at (q,p,eps,delta)=({q},{p},{eps},{delta})"
            )));
        }
        if gp(y).abs() < 1e-10 {
            return Err(Error::DegenerateTurningPoint { ymax: y, v2: gp(y) });
        }
        Ok(y)
    }

    /// First downward crossing of p_y = 0 after the dead-band, by fixed-step
    /// integration from the section point of (q,p) at parameters (ε,δ).
    pub fn section_return(
        &self,
        r: &SectionReference,
        q: f64,
        p: f64,
        eps: f64,
        delta: f64,
    ) -> Result<SectionEvent> {
        let y0 = self.starting_height(r, q, p, eps, delta)?;
        let rhs = self.deformed_rhs(delta);
        let max_steps = 3 * self.cfg.steps_per_period;
        let mut hit: Option<(f64, Vec<f64>)> = None;
        let mut prev_py = 0.0_f64;
        integrate_fixed_visit(
            &rhs,
            0.0,
            r.step,
            max_steps,
            &[q, y0, p, 0.0],
            |step: &DenseStep| {
                let end = step.eval_component(3, step.t0 + step.h);
                let mut stop = false;
                if prev_py > 0.0 && end <= 0.0 {
                    let lo = step.t0.max(r.dead_band);
                    if step.t0 + step.h > r.dead_band && step.eval_component(3, lo) > 0.0 {
                        let ev = polish_downcross(step, 3, lo, step.t0 + step.h);
                        hit = Some((ev.t, ev.state));
                        stop = true;
                    }
                }
                prev_py = end;
                stop
            },
        );
        let (t, state) = hit.ok_or(Error::NoReturn {
            max_time: 3.0 * r.period,
        })?;
        let mut ds = [0.0; 4];
        rhs(t, &state, &mut ds);
        Ok(SectionEvent {
            t,
            state: [state[0], state[1], state[2], state[3]],
            direction: ds[3].signum(),
        })
    }

    /// The return map (Q, P) and the return time, with a self-contained
    /// reference at ε (for stencil work build the reference once instead).
    pub fn poincare_map(&self, q: f64, p: f64, eps: f64, delta: f64) -> Result<(f64, f64, f64)> {
        let r = self.reference(eps)?;
        let ev = self.section_return(&r, q, p, eps, delta)?;
        Ok((ev.state[0], ev.state[2], ev.t))
    }

    /// Dense fixed-step solution of the deformed flow from an arbitrary start,
    /// covering [0, t_span]; used for differencing the flow itself.
    pub fn flow_dense(&self, start: [f64; 4], delta: f64, t_span: f64, steps: usize) -> Solution {
        let rhs = self.deformed_rhs(delta);
        let h = t_span / steps as f64;
        let mut collected: Vec<DenseStep> = Vec::with_capacity(steps);
        let y_end = integrate_fixed_visit(&rhs, 0.0, h, steps, &start, |s| {
            collected.push(s.clone());
            false
        });
        Solution {
            t_end: t_span,
            y_end,
            steps: collected,
        }
    }

    /// Finite-difference derivative of flow component `r` (1..=4) at the fixed
    /// time `t_end`, with respect to the initial-condition/deformation
    /// directions in `dirs` (entries 1..=5, repetition means higher order),
    /// around the libration start (0, y_start, 0, 0) at δ = 0. Uses the same
    /// frozen step count for every stencil point and one Richardson stage.
    pub fn flow_derivative_fd(
        &self,
        y_start: f64,
        t_end: f64,
        steps: usize,
        r: usize,
        dirs: &[u8],
        h: f64,
    ) -> f64 {
        let mut orders = [0u32; 5];
        for &d in dirs {
            orders[(d - 1) as usize] += 1;
        }
        let eval = |level: i32| -> f64 {
            let hh = h * 0.5_f64.powi(level);
            let mut pts: Vec<([i32; 5], f64)> = vec![([0; 5], 1.0)];
            let mut denom = 1.0;
            for (axis, &ord) in orders.iter().enumerate() {
                if ord == 0 {
                    continue;
                }
                denom *= hh.powi(ord as i32);
                let one = one_dim_stencil(ord);
                let mut next = Vec::with_capacity(pts.len() * one.len());
                for (off, w) in &pts {
                    for (o, wo) in &one {
                        let mut nn = *off;
                        nn[axis] = *o;
                        next.push((nn, w * wo));
                    }
                }
                pts = next;
            }
            let mut acc = 0.0;
            for (off, w) in &pts {
                let start = [
                    off[0] as f64 * hh,
                    y_start + off[1] as f64 * hh,
                    off[2] as f64 * hh,
                    off[3] as f64 * hh,
                ];
                let delta = off[4] as f64 * hh;
                let sol = self.flow_dense(start, delta, t_end, steps);
                acc += w * sol.y_end[r - 1];
            }
            acc / denom
        };
        let d0 = eval(0);
        let d1 = eval(1);
        (4.0 * d1 - d0) / 3.0
    }

    /// All 38 derivatives of the numeric map at (0,0,ε₀,0) by Richardson
    /// differencing. The section reference is frozen at the center point.
    pub fn fd_derivatives(&self, eps0: f64) -> Result<FdDerivatives> {
        let r = self.reference(eps0)?;
        let scale = r.y_max.abs().max(1.0);
        let steps = [
            self.cfg.h_q * scale,
            self.cfg.h_q * scale,
            self.cfg.h_eps,
            self.cfg.h_delta,
        ];
        let map = |q: f64, p: f64, eps: f64, delta: f64| -> Result<(f64, f64)> {
            let ev = self.section_return(&r, q, p, eps, delta)?;
            Ok((ev.state[0], ev.state[2]))
        };
        fd_derivatives_of_map(&map, eps0, steps)
    }
}

/// Finite-difference values for the full derivative list, with estimates.
#[derive(Debug, Clone)]
pub struct FdDerivatives {
    pub eps0: f64,
    /// (name, value, error estimate), in report order
    pub entries: Vec<(&'static str, f64, f64)>,
}

impl FdDerivatives {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        self.entries
            .iter()
            .find(|(n, _, _)| *n == name)
            .map(|&(_, v, e)| (v, e))
    }
}

fn axis_orders(name: &str) -> [u32; 4] {
    let mut order = [0u32; 4];
    for c in name.split('_').nth(1).unwrap().chars() {
        match c {
            'q' => order[0] += 1,
            'p' => order[1] += 1,
            'e' => order[2] += 1,
            'd' => order[3] += 1,
            _ => unreachable!(),
        }
    }
    order
}

fn one_dim_stencil(order: u32) -> Vec<(i32, f64)> {
    match order {
        0 => vec![(0, 1.0)],
        1 => vec![(-1, -0.5), (1, 0.5)],
        2 => vec![(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => vec![(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => unreachable!(),
    }
}

fn tensor_stencil(orders: [u32; 4], h: [f64; 4]) -> Vec<([f64; 4], f64)> {
    let mut pts: Vec<([i32; 4], f64)> = vec![([0; 4], 1.0)];
    let mut denom = 1.0;
    for (axis, &ord) in orders.iter().enumerate() {
        if ord == 0 {
            continue;
        }
        denom *= h[axis].powi(ord as i32);
        let one = one_dim_stencil(ord);
        let mut next = Vec::with_capacity(pts.len() * one.len());
        for (off, w) in &pts {
            for (o, wo) in &one {
                let mut n = *off;
                n[axis] = *o;
                next.push((n, w * wo));
            }
        }
        pts = next;
    }
    pts.into_iter()
        .map(|(off, w)| {
            (
                [
                    off[0] as f64 * h[0],
                    off[1] as f64 * h[1],
                    off[2] as f64 * h[2],
                    off[3] as f64 * h[3],
                ],
                w / denom,
            )
        })
        .collect()
}

fn point_key(p: [f64; 4]) -> [u64; 4] {
    [
        p[0].to_bits(),
        p[1].to_bits(),
        p[2].to_bits(),
        p[3].to_bits(),
    ]
}

/// Richardson differencing of an arbitrary (q,p,ε,δ) → (Q,P) map around
/// (0, 0, eps0, 0). The base steps per axis are given; three levels are used
/// with two extrapolation stages.
pub fn fd_derivatives_of_map<M>(map: &M, eps0: f64, base_steps: [f64; 4]) -> Result<FdDerivatives>
where
    M: Fn(f64, f64, f64, f64) -> Result<(f64, f64)> + Sync,
{
    // gather all stencils per level
    let mut stencils: HashMap<(&'static str, usize), Vec<([f64; 4], f64)>> = HashMap::new();
    for name in DERIVATIVE_NAMES {
        let orders = axis_orders(name);
        for level in 0..3usize {
            let f = 0.5_f64.powi(level as i32);
            let h = [
                base_steps[0] * f,
                base_steps[1] * f,
                base_steps[2] * f,
                base_steps[3] * f,
            ];
            stencils.insert((name, level), tensor_stencil(orders, h));
        }
    }
    // evaluate every distinct point once, in parallel
    let mut points: Vec<[f64; 4]> = Vec::new();
    let mut seen: HashMap<[u64; 4], usize> = HashMap::new();
    for st in stencils.values() {
        for (off, _) in st {
            let p = [off[0], off[1], eps0 + off[2], off[3]];
            seen.entry(point_key(p)).or_insert_with(|| {
                points.push(p);
                points.len() - 1
            });
        }
    }
    let evals: Vec<Result<(f64, f64)>> = points
        .par_iter()
        .map(|p| map(p[0], p[1], p[2], p[3]))
        .collect();
    let mut table: HashMap<[u64; 4], (f64, f64)> = HashMap::with_capacity(points.len());
    for (p, e) in points.iter().zip(evals) {
        table.insert(point_key(*p), e?);
    }
    // combine
    let mut entries = Vec::with_capacity(38);
    for name in DERIVATIVE_NAMES {
        let comp = if name.starts_with('Q') { 0 } else { 1 };
        let mut level_vals = [0.0_f64; 3];
        let mut floor = 0.0_f64;
        for level in 0..3usize {
            let st = &stencils[&(name, level)];
            let mut acc = 0.0;
            let mut mag = 0.0;
            for (off, w) in st {
                let p = [off[0], off[1], eps0 + off[2], off[3]];
                let qp = table[&point_key(p)];
                let v = if comp == 0 { qp.0 } else { qp.1 };
                acc += w * v;
                mag += (w * v).abs();
            }
            level_vals[level] = acc;
            if level == 2 {
                // rounding floor of the finest level: weighted magnitudes
                // carry both summation rounding and the residual (smooth but
                // nonzero) integration error of the frozen-step flow
                floor = 2e-14 * mag;
            }
        }
        let r1 = (4.0 * level_vals[1] - level_vals[0]) / 3.0;
        let r2 = (4.0 * level_vals[2] - level_vals[1]) / 3.0;
        let rr = (16.0 * r2 - r1) / 15.0;
        let estimate = 1.5 * (rr - r2).abs() + floor;
        entries.push((name, rr, estimate));
    }
    Ok(FdDerivatives { eps0, entries })
}

/// Comparison verdict for one derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareStatus {
    Pass,
    Fail,
    /// The finite-difference error estimate exceeds the tolerance, so the
    /// comparison cannot decide either way.
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct ComparisonEntry {
    pub name: &'static str,
    pub analytic: f64,
    pub numeric: f64,
    pub estimate: f64,
    pub discrepancy: f64,
    pub rel_discrepancy: f64,
    pub tol: f64,
    pub status: CompareStatus,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub entries: Vec<ComparisonEntry>,
    pub n_pass: usize,
    pub n_fail: usize,
    pub n_inconclusive: usize,
}

impl ComparisonReport {
    pub fn all_ok(&self) -> bool {
        self.n_fail == 0
    }

    pub fn failed_names(&self) -> Vec<&'static str> {
        self.entries
            .iter()
            .filter(|e| e.status == CompareStatus::Fail)
            .map(|e| e.name)
            .collect()
    }
}

/// Tolerance schedule per total derivative order.
#[derive(Debug, Clone, Copy)]
pub struct TolSchedule {
    pub order1: f64,
    pub order2: f64,
    pub order3: f64,
}

impl Default for TolSchedule {
    fn default() -> Self {
        Self {
            order1: 1e-5,
            order2: 1e-4,
            order3: 1e-3,
        }
    }
}

impl TolSchedule {
    pub fn for_name(&self, name: &str) -> f64 {
        let order: u32 = axis_orders(name).iter().sum();
        match order {
            1 => self.order1,
            2 => self.order2,
            _ => self.order3,
        }
    }
}

/// Compare analytic derivatives against finite differences, entry by entry.
///
/// The relative discrepancy uses max(1, |analytic|, |numeric|) as the scale;
/// entries whose finite-difference estimate exceeds the tolerance budget are
/// inconclusive rather than failed.
pub fn compare(
    analytic: &PoincareDerivatives,
    numeric: &FdDerivatives,
    schedule: TolSchedule,
) -> ComparisonReport {
    let mut entries = Vec::with_capacity(38);
    let mut n_pass = 0;
    let mut n_fail = 0;
    let mut n_inconclusive = 0;
    for (name, a) in analytic.named() {
        let (n, est) = numeric.get(name).expect("aligned name sets");
        let tol = schedule.for_name(name);
        let scale = a.abs().max(n.abs()).max(1.0);
        let disc = (a - n).abs();
        let rel = disc / scale;
        let status = if est > tol * scale {
            n_inconclusive += 1;
            CompareStatus::Inconclusive
        } else if rel <= tol {
            n_pass += 1;
            CompareStatus::Pass
        } else {
            n_fail += 1;
            CompareStatus::Fail
        };
        entries.push(ComparisonEntry {
            name,
            analytic: a,
            numeric: n,
            estimate: est,
            discrepancy: disc,
            rel_discrepancy: rel,
            tol,
            status,
        });
    }
    ComparisonReport {
        entries,
        n_pass,
        n_fail,
        n_inconclusive,
    }
}

/// One point of the continued fixed-point branch: at transverse coordinate
/// q̃ = s, the energy ε(s) and section momentum p̃(s) solving map = id.
#[derive(Debug, Clone, Copy)]
pub struct BranchPoint {
    pub s: f64,
    pub eps: f64,
    pub p_tilde: f64,
}

/// Fit of a parabola ε(s) = a + ½c·s² to continued branch points.
#[derive(Debug, Clone)]
pub struct ForkFit {
    pub points: Vec<BranchPoint>,
    pub eps_at_zero: f64,
    pub curvature: f64,
}

fn solve_2x2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 {
        return None;
    }
    Some([
        (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

/// Continue the bifurcating fixed-point branch of the *numeric* map near a
/// singular energy, parametrized by the adapted transverse coordinate, and
/// fit its parabola.
///
/// `frame` columns are the adapted basis vectors expressed in (q,p).
pub fn fork_branch_fit(
    oracle: &Oracle,
    eps_star: f64,
    frame: [[f64; 2]; 2],
    s_values: &[f64],
) -> Result<ForkFit> {
    let mut points = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let mut p_t = 0.0_f64;
        let mut eps = eps_star;
        let residual = |p_t: f64, eps: f64| -> Result<[f64; 2]> {
            let q = frame[0][0] * s + frame[0][1] * p_t;
            let p = frame[1][0] * s + frame[1][1] * p_t;
            let (qq, pp, _) = oracle.poincare_map(q, p, eps, 0.0)?;
            Ok([qq - q, pp - p])
        };
        let mut converged = false;
        for _ in 0..60 {
            let r0 = residual(p_t, eps)?;
            if r0[0].abs().max(r0[1].abs()) < 1e-12 {
                converged = true;
                break;
            }
            let hp = 1e-7 * (1.0 + p_t.abs());
            let he = 1e-7 * (1.0 + eps.abs());
            let rp = residual(p_t + hp, eps)?;
            let re = residual(p_t, eps + he)?;
            let jac = [
                [(rp[0] - r0[0]) / hp, (re[0] - r0[0]) / he],
                [(rp[1] - r0[1]) / hp, (re[1] - r0[1]) / he],
            ];
            let step = solve_2x2(jac, r0)
                .ok_or_else(|| Error::Newton("singular branch continuation Jacobian".into()))?;
            p_t -= step[0];
            eps -= step[1];
            if step[0].abs().max(step[1].abs()) < 1e-13 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Newton(format!(
                "fixed-point continuation failed at s = {s}"
            )));
        }
        points.push(BranchPoint {
            s,
            eps,
            p_tilde: p_t,
        });
    }
    // least squares for eps(s) = a + b s²  (branch of a symmetric fork)
    let n = points.len() as f64;
    let (mut s2, mut s4, mut se, mut s2e) = (0.0, 0.0, 0.0, 0.0);
    for p in &points {
        let x2 = p.s * p.s;
        s2 += x2;
        s4 += x2 * x2;
        se += p.eps;
        s2e += x2 * p.eps;
    }
    let det = n * s4 - s2 * s2;
    if det.abs() < 1e-300 {
        return Err(Error::Newton("degenerate parabola fit".into()));
    }
    let a = (se * s4 - s2e * s2) / det;
    let b = (n * s2e - s2 * se) / det;
    Ok(ForkFit {
        points,
        eps_at_zero: a,
        curvature: 2.0 * b,
    })
}
