//! Dormand–Prince 5(4) integration.
//!
//! Two drivers share the tableau:
//! - [`integrate_adaptive`]: classic embedded step control with the standard
//!   fourth-order continuous extension, used for the nonlinear orbit where the
//!   period must be located by an event on the dense output;
//! - [`integrate_fixed`]: the fifth-order advance on a prescribed step
//!   sequence. All linear hierarchy solves and the finite-difference oracle use
//!   this driver. A frozen step sequence makes the numerical solution a smooth
//!   function of the initial data, which is what keeps high-order differencing
//!   of the oracle map clean.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// b − b̂: weights of the embedded error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
/// Dense-output weights of the fourth-order continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step together with its continuous extension.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    /// rcont[0..5]: coefficients of the quartic in θ (Hairer's layout).
    rcont: [Vec<f64>; 5],
}

impl DenseStep {
    fn build(t0: f64, h: f64, y0: &[f64], y1: &[f64], ks: &[Vec<f64>; 7]) -> Self {
        let n = y0.len();
        let mut r1 = vec![0.0; n];
        let mut r2 = vec![0.0; n];
        let mut r3 = vec![0.0; n];
        let mut r4 = vec![0.0; n];
        let mut r5 = vec![0.0; n];
        for i in 0..n {
            let ydiff = y1[i] - y0[i];
            let bspl = h * ks[0][i] - ydiff;
            r1[i] = y0[i];
            r2[i] = ydiff;
            r3[i] = bspl;
            r4[i] = ydiff - h * ks[6][i] - bspl;
            let mut acc = 0.0;
            for (s, dk) in D.iter().enumerate() {
                acc += dk * ks[s][i];
            }
            r5[i] = h * acc;
        }
        Self {
            t0,
            h,
            rcont: [r1, r2, r3, r4, r5],
        }
    }

    /// Evaluate component `i` at time `t` inside [t0, t0+h].
    pub fn eval_component(&self, i: usize, t: f64) -> f64 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [r1, r2, r3, r4, r5] = &self.rcont;
        r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])))
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval_component(i, t);
        }
    }
}

/// Dense solution of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Solution {
    pub t_end: f64,
    pub y_end: Vec<f64>,
    pub steps: Vec<DenseStep>,
}

impl Solution {
    /// Evaluate the solution at `t` (clamped to the covered span).
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let step = self.locate(t);
        step.eval(t, out);
    }

    pub fn eval_component(&self, i: usize, t: f64) -> f64 {
        self.locate(t).eval_component(i, t)
    }

    fn locate(&self, t: f64) -> &DenseStep {
        let mut lo = 0usize;
        let mut hi = self.steps.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let s = &self.steps[mid];
            if t < s.t0 {
                hi = mid.saturating_sub(1).max(lo);
                if hi == mid {
                    break;
                }
            } else if t > s.t0 + s.h {
                lo = mid + 1;
            } else {
                return s;
            }
        }
        &self.steps[lo.min(self.steps.len() - 1)]
    }
}

fn rk_stages<F>(f: &F, t: f64, h: f64, y: &[f64], k1: &[f64]) -> ([Vec<f64>; 7], Vec<f64>)
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let mut ks: [Vec<f64>; 7] = [
        k1.to_vec(),
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    ];
    let mut work = vec![0.0; n];
    let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
    for (s, row) in rows.iter().enumerate() {
        for i in 0..n {
            let mut acc = 0.0;
            for (j, a) in row.iter().enumerate() {
                acc += a * ks[j][i];
            }
            work[i] = y[i] + h * acc;
        }
        f(t + C[s + 1] * h, &work, &mut ks[s + 1]);
    }
    // fifth-order solution, which is also stage 7 input (FSAL)
    let mut y1 = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for (j, a) in A7.iter().enumerate() {
            acc += a * ks[j][i];
        }
        y1[i] = y[i] + h * acc;
    }
    f(t + h, &y1, &mut ks[6]);
    (ks, y1)
}

/// Adaptive integration of y' = f(t, y) from `t0` to `t1` with dense output.
pub fn integrate_adaptive<F>(
    f: &F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Solution>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let span = t1 - t0;
    if span <= 0.0 {
        return Err(Error::Integration("nonpositive span".into()));
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1);
    // conservative initial step
    let f_norm = k1.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let mut h = (1e-3 * span).min(0.1 / (1.0 + f_norm)).max(1e-10);
    let mut steps = Vec::new();
    let mut rejected = false;
    let max_steps = 40_000_000usize / n.max(1);
    for _ in 0..max_steps {
        if t + h >= t1 {
            h = t1 - t;
        }
        let (ks, y1) = rk_stages(f, t, h, &y, &k1);
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, w) in E.iter().enumerate() {
                e += w * ks[j][i];
            }
            e *= h;
            let sc = atol + rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / n as f64).sqrt();
        if err <= 1.0 {
            steps.push(DenseStep::build(t, h, &y, &y1, &ks));
            t += h;
            y = y1;
            k1 = ks[6].clone();
            if t >= t1 {
                return Ok(Solution {
                    t_end: t,
                    y_end: y,
                    steps,
                });
            }
            let fac = (0.9 * err.powf(-0.2)).min(if rejected { 1.0 } else { 5.0 });
            h *= fac.max(0.2);
            rejected = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            rejected = true;
            if h < 1e-14 * span {
                return Err(Error::Integration("step size underflow".into()));
            }
        }
    }
    Err(Error::Integration("step limit exceeded".into()))
}

/// Outcome of an event search on a dense solution segment stream.
#[derive(Debug, Clone)]
pub struct EventHit {
    pub t: f64,
    pub state: Vec<f64>,
}

/// Integrate adaptively until component `comp` crosses zero downward
/// (value goes from positive to nonpositive) at some t > `t_min`.
///
/// The crossing is polished on the continuous extension by bisection, so the
/// event time is exact to the precision of the interpolant.
pub fn integrate_until_downcross<F>(
    f: &F,
    t0: f64,
    t_max: f64,
    y0: &[f64],
    rtol: f64,
    atol: f64,
    comp: usize,
    t_min: f64,
) -> Result<(EventHit, Solution)>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1);
    let f_norm = k1.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let mut h = (1e-3 * (t_max - t0)).min(0.1 / (1.0 + f_norm)).max(1e-10);
    let mut steps: Vec<DenseStep> = Vec::new();
    let mut rejected = false;
    for _ in 0..4_000_000 {
        if t + h > t_max {
            h = t_max - t;
            if h <= 0.0 {
                break;
            }
        }
        let (ks, y1) = rk_stages(f, t, h, &y, &k1);
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, w) in E.iter().enumerate() {
                e += w * ks[j][i];
            }
            e *= h;
            let sc = atol + rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / n as f64).sqrt();
        if err <= 1.0 {
            let step = DenseStep::build(t, h, &y, &y1, &ks);
            // check for a downward crossing inside this step
            if t + h > t_min && y[comp] > 0.0 && y1[comp] <= 0.0 {
                let a = t.max(t_min);
                if step.eval_component(comp, a) > 0.0 {
                    let hit = polish_downcross(&step, comp, a, t + h);
                    steps.push(step);
                    let sol = Solution {
                        t_end: t + h,
                        y_end: y1,
                        steps,
                    };
                    return Ok((hit, sol));
                }
            }
            steps.push(step);
            t += h;
            y = y1;
            k1 = ks[6].clone();
            let fac = (0.9 * err.powf(-0.2)).min(if rejected { 1.0 } else { 5.0 });
            h *= fac.max(0.2);
            rejected = false;
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            rejected = true;
            if h < 1e-14 * (t_max - t0) {
                return Err(Error::Integration("step size underflow".into()));
            }
        }
    }
    Err(Error::NoReturn { max_time: t_max })
}

pub(crate) fn polish_downcross(step: &DenseStep, comp: usize, mut a: f64, mut b: f64) -> EventHit {
    // bisection on the quartic interpolant; 90 iterations put the root at ulp level
    for _ in 0..90 {
        let m = 0.5 * (a + b);
        if step.eval_component(comp, m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
        if b - a < f64::EPSILON * b.abs().max(1.0) {
            break;
        }
    }
    let t = 0.5 * (a + b);
    let mut state = vec![0.0; step.rcont[0].len()];
    step.eval(t, &mut state);
    EventHit { t, state }
}

/// Fixed-step fifth-order advance over the node sequence `ts`.
///
/// Returns the state at every node (including the initial one). `substeps`
/// subdivides each interval; only node states are stored.
pub fn integrate_fixed<F>(f: &F, ts: &[f64], y0: &[f64], substeps: usize) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut out = Vec::with_capacity(ts.len());
    let mut y = y0.to_vec();
    out.push(y.clone());
    let mut k1 = vec![0.0; n];
    for w in ts.windows(2) {
        let h = (w[1] - w[0]) / substeps as f64;
        for s in 0..substeps {
            let t = w[0] + s as f64 * h;
            f(t, &y, &mut k1);
            let (_, y1) = rk_stages(f, t, h, &y, &k1);
            y = y1;
        }
        out.push(y.clone());
    }
    out
}

/// Fixed-step driver that also hands every accepted step's dense output to a
/// visitor, so events can be located without changing the step sequence.
///
/// The visitor returns `true` to stop the integration after that step.
pub fn integrate_fixed_visit<F, Vi>(
    f: &F,
    t0: f64,
    h: f64,
    max_steps: usize,
    y0: &[f64],
    mut visit: Vi,
) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
    Vi: FnMut(&DenseStep) -> bool,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![0.0; n];
    for _ in 0..max_steps {
        f(t, &y, &mut k1);
        let (ks, y1) = rk_stages(f, t, h, &y, &k1);
        let step = DenseStep::build(t, h, &y, &y1, &ks);
        let stop = visit(&step);
        t += h;
        y = y1;
        if stop {
            break;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn harmonic(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn adaptive_matches_closed_form() {
        let sol = integrate_adaptive(&harmonic, 0.0, 10.0, &[1.0, 0.0], 1e-11, 1e-12).unwrap();
        assert_abs_diff_eq!(sol.y_end[0], 10.0_f64.cos(), epsilon = 1e-9);
        assert_abs_diff_eq!(sol.y_end[1], -(10.0_f64.sin()), epsilon = 1e-9);
    }

    #[test]
    fn dense_output_is_accurate_between_steps() {
        let sol = integrate_adaptive(&harmonic, 0.0, 10.0, &[1.0, 0.0], 1e-11, 1e-12).unwrap();
        let mut worst = 0.0_f64;
        let mut buf = [0.0; 2];
        for k in 0..1000 {
            let t = 10.0 * (k as f64 + 0.5) / 1000.0;
            sol.eval(t, &mut buf);
            worst = worst.max((buf[0] - t.cos()).abs());
        }
        assert!(worst < 1e-9, "dense output error {worst}");
    }

    #[test]
    fn downcross_event_finds_the_period() {
        // start at (1, 0): y1 = -sin t is <= 0 on (0, pi), crosses upward at pi,
        // and crosses downward at 2*pi, which is the full period.
        let (hit, _) =
            integrate_until_downcross(&harmonic, 0.0, 50.0, &[1.0, 0.0], 1e-12, 1e-13, 1, 0.5)
                .unwrap();
        assert_abs_diff_eq!(hit.t, std::f64::consts::TAU, epsilon = 1e-11);
        assert!(hit.state[1].abs() < 1e-12);
    }

    #[test]
    fn fixed_step_is_fifth_order_accurate() {
        let n = 4096;
        let ts: Vec<f64> = (0..=n).map(|i| 10.0 * i as f64 / n as f64).collect();
        let states = integrate_fixed(&harmonic, &ts, &[1.0, 0.0], 2);
        let err = (states[n][0] - 10.0_f64.cos()).abs();
        assert!(err < 1e-12, "fixed-step error {err}");
    }
}
