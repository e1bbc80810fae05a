//! Classification of the fixed-point branch at ε₀: regular / transcritical /
//! fork, with the fork curvature, plus the ε-sweep that locates singular
//! energies.
//!
//! At a singular point (trace = 2, M ≠ id) the Jacobian is brought to the
//! unipotent form [[1, b], [0, 1]] by a symplectic frame with the new q̃-axis
//! along the kernel of M − id. In that frame a transcritical crossing shows
//! P̃_q̃q̃ ≠ 0; otherwise the branch curvature
//!
//! ```text
//! ε_B″(0) = (3·Q̃_q̃q̃·P̃_q̃p̃ − Q̃_p̃·P̃_q̃q̃q̃) / (3·Q̃_p̃·P̃_q̃ε)
//! ```
//!
//! decides fork (≠ 0) against degenerate. The sign convention of the
//! curvature follows this frame choice; the frame-invariance test in
//! tests/invariants.rs checks that verdict and curvature do not depend on the
//! chart the map is presented in.

use crate::chain::PoincareDerivatives;
use crate::config::{ClassifyTols, NumericsConfig};
use crate::error::{Error, Result};
use crate::flowderiv::{self, solve_inhomogeneous, CoeffSet, GVariants, Pair};
use crate::prereq::prerequisites;
use crate::symexpr::SymbolicField;
use rayon::prelude::*;

type Mat2 = [[f64; 2]; 2];

fn mat_mul(a: Mat2, b: Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

/// Symplectic frame adapted to a singular Jacobian, with the transformed
/// derivative set needed by the decision formulas.
///
/// The q̃-axis lies along the kernel of M − id; the rotation frame determines
/// the reported shear `b`. The unipotent form leaves a residual symplectic
/// rescaling q̃ → q̃/k, p̃ → k·p̃ free, under which the branch curvature picks
/// up k², so the stored tilde quantities come from the *canonical* frame with
/// |Q̃_p̃| = 1. That normalization depends only on the map germ, which is what
/// makes verdict and curvature independent of the chart the map arrives in.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    /// canonical frame: columns are the adapted basis vectors in (q,p)
    pub s: Mat2,
    pub s_inv: Mat2,
    /// Q̃_p̃ of the rotation-normalized frame (carries the kernel shear)
    pub b: f64,
    /// Q̃_p̃ of the canonical frame, ±1
    pub q_tilde_p: f64,
    pub q_tilde_qq: f64,
    pub p_tilde_qq: f64,
    pub p_tilde_qp: f64,
    pub p_tilde_qqq: f64,
    pub p_tilde_qe: f64,
    /// the conjugated Jacobian in the canonical frame, for diagnostics
    pub normal_form: Mat2,
}

/// Build the adapted frame. Fails with a frame error when M is numerically
/// the identity (every direction is then a kernel direction and the decision
/// formulas divide by Q̃_p̃ = 0).
pub fn adapted_frame(d: &PoincareDerivatives, tol_identity: f64) -> Result<AdaptedFrame> {
    let m: Mat2 = [[d.q_q, d.q_p], [d.p_q, d.p_p]];
    let a = [[m[0][0] - 1.0, m[0][1]], [m[1][0], m[1][1] - 1.0]];
    let row0 = (a[0][0] * a[0][0] + a[0][1] * a[0][1]).sqrt();
    let row1 = (a[1][0] * a[1][0] + a[1][1] * a[1][1]).sqrt();
    if row0.max(row1) <= tol_identity {
        return Err(Error::Hypothesis(
            "Jacobian is numerically the identity; no adapted frame exists".into(),
        ));
    }
    // kernel direction of the stronger row
    let (ra, rb) = if row0 >= row1 {
        (a[0][0], a[0][1])
    } else {
        (a[1][0], a[1][1])
    };
    let (mut u, mut v) = (rb, -ra);
    let norm = (u * u + v * v).sqrt();
    u /= norm;
    v /= norm;
    // orient: positive q̃-component when possible, else positive p̃-component
    if u < 0.0 || (u == 0.0 && v < 0.0) {
        u = -u;
        v = -v;
    }
    // rotation frame fixes the reported shear
    let s_rot: Mat2 = [[u, -v], [v, u]];
    let s_rot_inv: Mat2 = [[u, v], [-v, u]];
    let b = mat_mul(mat_mul(s_rot_inv, m), s_rot)[0][1];
    if b.abs() <= tol_identity {
        return Err(Error::Hypothesis(
            "adapted frame is degenerate: the kernel shear vanishes".into(),
        ));
    }
    // canonical rescale: ê₁ = k·e₁, ê₂ = e₂/k with k² = |b|
    let k = b.abs().sqrt();
    let s: Mat2 = [[k * u, -v / k], [k * v, u / k]];
    let s_inv: Mat2 = [[u / k, v / k], [-k * v, k * u]];
    let nf = mat_mul(mat_mul(s_inv, m), s);

    // transform second derivatives: D̃²[i][a][b] = S⁻¹[i][j] D²[j][c][d] S[c][a] S[d][b]
    let d2 = [
        [[d.q_qq, d.q_qp], [d.q_qp, d.q_pp]],
        [[d.p_qq, d.p_qp], [d.p_qp, d.p_pp]],
    ];
    let tr2 = |i: usize, aa: usize, bb: usize| -> f64 {
        let mut acc = 0.0;
        for j in 0..2 {
            for c in 0..2 {
                for dd in 0..2 {
                    acc += s_inv[i][j] * d2[j][c][dd] * s[c][aa] * s[dd][bb];
                }
            }
        }
        acc
    };
    // third derivatives of P (only P̃_q̃q̃q̃ is needed)
    let d3p = |c: usize, dd: usize, e: usize| -> f64 {
        match (c, dd, e) {
            (0, 0, 0) => d.p_qqq,
            (1, 1, 1) => d.p_ppp,
            (0, 0, 1) | (0, 1, 0) | (1, 0, 0) => d.p_qqp,
            _ => d.p_qpp,
        }
    };
    let d3q = |c: usize, dd: usize, e: usize| -> f64 {
        match (c, dd, e) {
            (0, 0, 0) => d.q_qqq,
            (1, 1, 1) => d.q_ppp,
            (0, 0, 1) | (0, 1, 0) | (1, 0, 0) => d.q_qqp,
            _ => d.q_qpp,
        }
    };
    let mut p_tilde_qqq = 0.0;
    for j in 0..2 {
        for c in 0..2 {
            for dd in 0..2 {
                for e in 0..2 {
                    let third = if j == 0 { d3q(c, dd, e) } else { d3p(c, dd, e) };
                    p_tilde_qqq += s_inv[1][j] * third * s[c][0] * s[dd][0] * s[e][0];
                }
            }
        }
    }
    // ε-mixed Jacobian
    let de = [[d.q_qe, d.q_pe], [d.p_qe, d.p_pe]];
    let de_t = mat_mul(mat_mul(s_inv, de), s);

    Ok(AdaptedFrame {
        s,
        s_inv,
        b,
        q_tilde_p: nf[0][1],
        q_tilde_qq: tr2(0, 0, 0),
        p_tilde_qq: tr2(1, 0, 0),
        p_tilde_qp: tr2(1, 0, 1),
        p_tilde_qqq,
        p_tilde_qe: de_t[1][0],
        normal_form: nf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Regular,
    CrossTranscritical,
    CrossFork,
    CrossDegenerate,
    SingularNontransversal,
    DegenerateFrame,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Regular => "regular",
            Verdict::CrossTranscritical => "cross_transcritical",
            Verdict::CrossFork => "cross_fork",
            Verdict::CrossDegenerate => "cross_degenerate",
            Verdict::SingularNontransversal => "singular_nontransversal",
            Verdict::DegenerateFrame => "degenerate_frame",
        }
    }
}

/// Diagnostics behind a verdict: the tilde quantities, the frame, and the
/// tolerances that were applied.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub frame_degenerate: bool,
    pub s_matrix: Option<Mat2>,
    pub q_tilde_p: Option<f64>,
    pub q_tilde_qq: Option<f64>,
    pub p_tilde_qq: Option<f64>,
    pub p_tilde_qp: Option<f64>,
    pub p_tilde_qqq: Option<f64>,
    pub p_tilde_qe: Option<f64>,
    pub curvature_denominator: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BifurcationReport {
    pub epsilon0: f64,
    pub trace: f64,
    pub trace_prime: f64,
    pub verdict: Verdict,
    /// ε_B″(0), present exactly for fork verdicts
    pub fork_curvature: Option<f64>,
    pub tols: ClassifyTols,
    pub diagnostics: Diagnostics,
    /// the ten δ-mixed derivatives, echoed for downstream interpretation
    pub deformation_sensitivities: Vec<(&'static str, f64)>,
}

/// The decision cascade over the assembled derivatives.
pub fn classify(d: &PoincareDerivatives, tols: &ClassifyTols) -> BifurcationReport {
    let trace = d.trace();
    let trace_prime = d.trace_prime();
    let deformation_sensitivities: Vec<(&'static str, f64)> = d
        .named()
        .into_iter()
        .filter(|(n, _)| n.ends_with('d'))
        .collect();
    let mut diagnostics = Diagnostics::default();
    let base =
        |verdict: Verdict, curvature: Option<f64>, diagnostics: Diagnostics| BifurcationReport {
            epsilon0: d.epsilon0,
            trace,
            trace_prime,
            verdict,
            fork_curvature: curvature,
            tols: tols.clone(),
            diagnostics,
            deformation_sensitivities: deformation_sensitivities.clone(),
        };
    if (trace - 2.0).abs() > tols.tol_singular {
        return base(Verdict::Regular, None, diagnostics);
    }
    // singular: check whether a frame even exists, for the diagnostics
    let frame = adapted_frame(d, tols.tol_singular);
    diagnostics.frame_degenerate = frame.is_err();
    if trace_prime.abs() <= tols.tol_prime {
        return base(Verdict::SingularNontransversal, None, diagnostics);
    }
    let frame = match frame {
        Ok(f) => f,
        Err(_) => return base(Verdict::DegenerateFrame, None, diagnostics),
    };
    diagnostics.s_matrix = Some(frame.s);
    diagnostics.q_tilde_p = Some(frame.q_tilde_p);
    diagnostics.q_tilde_qq = Some(frame.q_tilde_qq);
    diagnostics.p_tilde_qq = Some(frame.p_tilde_qq);
    diagnostics.p_tilde_qp = Some(frame.p_tilde_qp);
    diagnostics.p_tilde_qqq = Some(frame.p_tilde_qqq);
    diagnostics.p_tilde_qe = Some(frame.p_tilde_qe);
    if frame.p_tilde_qq.abs() > tols.tol_2 {
        return base(Verdict::CrossTranscritical, None, diagnostics);
    }
    let denom = 3.0 * frame.q_tilde_p * frame.p_tilde_qe;
    diagnostics.curvature_denominator = Some(denom);
    if denom.abs() < tols.tol_guard {
        return base(Verdict::CrossDegenerate, None, diagnostics);
    }
    let curvature =
        (3.0 * frame.q_tilde_qq * frame.p_tilde_qp - frame.q_tilde_p * frame.p_tilde_qqq) / denom;
    if curvature.abs() > tols.tol_3 {
        base(Verdict::CrossFork, Some(curvature), diagnostics)
    } else {
        base(Verdict::CrossDegenerate, None, diagnostics)
    }
}

/// Fast-path sample of the ε-sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepSample {
    pub eps: f64,
    pub trace: f64,
    pub trace_prime: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub samples: Vec<SweepSample>,
    /// refined energies where the trace crosses 2
    pub singular_eps: Vec<f64>,
    /// per-sample failures (energy, message); not fatal for the sweep
    pub failures: Vec<(f64, String)>,
}

/// Trace of the monodromy matrix only: the cheapest possible evaluation
/// (orbit plus the fundamental systems, no table work).
pub fn trace_at(v: &SymbolicField, e0: f64, eps: f64, cfg: &NumericsConfig) -> Result<f64> {
    let pre = prerequisites(v, e0, eps, cfg)?;
    Ok(pre.transverse_trace())
}

/// Trace and its ε-derivative; needs exactly two mixed second-order pair
/// solves beyond the fundamental systems.
pub fn trace_and_prime(
    v: &SymbolicField,
    e0: f64,
    eps: f64,
    cfg: &NumericsConfig,
) -> Result<(f64, f64)> {
    let pre = prerequisites(v, e0, eps, cfg)?;
    let coeffs = CoeffSet::build(v, None, &pre)?;
    let tables = flowderiv::build_first_order(&pre, &coeffs, cfg.substeps);
    let g = |r: u8, l: u8, m: u8| {
        flowderiv::inhomog::second_order(&tables, &coeffs, GVariants::default(), r, l, m)
    };
    let (x1_12, x3_12) = solve_inhomogeneous(
        Pair::Transverse,
        &g(1, 1, 2)?,
        &g(3, 1, 2)?,
        &pre,
        &coeffs,
        cfg.substeps,
    );
    let (_, x3_23) = solve_inhomogeneous(
        Pair::Transverse,
        &g(1, 2, 3)?,
        &g(3, 2, 3)?,
        &pre,
        &coeffs,
        cfg.substeps,
    );
    let _ = x3_12;
    let v2 = coeffs.vc(&[2]).end();
    let v11 = coeffs.vc(&[1, 1]).end();
    let x42 = pre.eta1dot.end_val();
    let trace = pre.transverse_trace();
    let trace_prime = (x1_12.end() + x3_23.end()) / v2
        + (pre.xi1dot.end_val() - v11 * pre.xi2.end_val()) * x42 / (v2 * v2);
    Ok((trace, trace_prime))
}

/// Sample trace(ε) over a range, bracket crossings of 2, and refine each by a
/// bisection-safeguarded secant to |trace − 2| ≤ 1e-9.
pub fn sweep(
    v: &SymbolicField,
    e0: f64,
    eps_lo: f64,
    eps_hi: f64,
    n: usize,
    cfg: &NumericsConfig,
) -> Result<SweepResult> {
    if n < 2 {
        return Err(Error::Config("a sweep needs at least two samples".into()));
    }
    let eps_list: Vec<f64> = (0..n)
        .map(|k| eps_lo + (eps_hi - eps_lo) * k as f64 / (n - 1) as f64)
        .collect();
    let results: Vec<(f64, Result<(f64, f64)>)> = eps_list
        .par_iter()
        .map(|&eps| (eps, trace_and_prime(v, e0, eps, cfg)))
        .collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (eps, r) in results {
        match r {
            Ok((trace, trace_prime)) => samples.push(SweepSample {
                eps,
                trace,
                trace_prime,
            }),
            Err(e) => failures.push((eps, e.to_string())),
        }
    }
    let mut singular_eps = Vec::new();
    for w in samples.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fa = a.trace - 2.0;
        let fb = b.trace - 2.0;
        if fa == 0.0 {
            singular_eps.push(a.eps);
        } else if fa * fb < 0.0 {
            if let Ok(root) = refine_crossing(v, e0, a.eps, fa, b.eps, fb, cfg) {
                singular_eps.push(root);
            } else {
                failures.push((a.eps, "crossing refinement failed".into()));
            }
        }
    }
    Ok(SweepResult {
        samples,
        singular_eps,
        failures,
    })
}

fn refine_crossing(
    v: &SymbolicField,
    e0: f64,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    cfg: &NumericsConfig,
) -> Result<f64> {
    for _ in 0..80 {
        // secant proposal, bisection fallback when it leaves the bracket
        let mut m = b - fb * (b - a) / (fb - fa);
        if !(m > a.min(b) && m < a.max(b)) {
            m = 0.5 * (a + b);
        }
        let fm = trace_at(v, e0, m, cfg)? - 2.0;
        if fm.abs() <= 1e-9 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
        if (b - a).abs() < 1e-14 * (1.0 + b.abs()) {
            return Ok(0.5 * (a + b));
        }
    }
    Err(Error::Newton("trace crossing refinement stalled".into()))
}
