//! Report serialization: the JSON schema, the CSV layouts and the text
//! summaries.
//!
//! The JSON layout is stable: every derivative key is always present (also the
//! structurally-zero ones), field order is fixed by declaration, and the only
//! run-dependent value (the timestamp) lives in `meta` so that everything else
//! is byte-reproducible.

use libration_core::bifurcate::{BifurcationReport, SweepResult};
use libration_core::chain::{PoincareDerivatives, ZTables};
use libration_core::oracle::{CompareStatus, ComparisonReport};
use libration_core::pipeline::Analysis;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub unix_time: u64,
    pub config_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub potential: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deformation: Option<String>,
    pub e0: f64,
    pub epsilon0: f64,
}

#[derive(Serialize)]
pub struct PrereqBlock {
    pub y_max: f64,
    pub period: f64,
    pub energy: f64,
}

#[derive(Serialize)]
pub struct ZBlock {
    #[serde(rename = "Z2_3")]
    pub z2_3: f64,
    #[serde(rename = "Z2_4")]
    pub z2_4: f64,
    #[serde(rename = "Z2_11")]
    pub z2_11: f64,
    #[serde(rename = "Z2_22")]
    pub z2_22: f64,
    #[serde(rename = "Z0_1")]
    pub z0_1: f64,
    #[serde(rename = "Z0_2")]
    pub z0_2: f64,
    #[serde(rename = "Z0_3")]
    pub z0_3: f64,
    #[serde(rename = "Z0_4")]
    pub z0_4: f64,
    #[serde(rename = "Z0_11")]
    pub z0_11: f64,
    #[serde(rename = "Z0_12")]
    pub z0_12: f64,
    #[serde(rename = "Z0_22")]
    pub z0_22: f64,
    #[serde(rename = "Z0_14")]
    pub z0_14: f64,
    #[serde(rename = "Z0_24")]
    pub z0_24: f64,
    #[serde(rename = "V_y")]
    pub v2: f64,
    #[serde(rename = "V_xx")]
    pub v11: f64,
    #[serde(rename = "F_value")]
    pub f_val: f64,
}

#[derive(Serialize)]
pub struct DiagnosticsBlock {
    pub frame_degenerate: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adapted_frame: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_tilde_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_tilde_qq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_tilde_qq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_tilde_qp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_tilde_qqq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_tilde_qe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature_denominator: Option<f64>,
    pub tol_singular: f64,
    pub tol_prime: f64,
    pub tol_2: f64,
    pub tol_3: f64,
    pub tol_guard: f64,
}

#[derive(Serialize)]
pub struct BifurcationBlock {
    pub verdict: &'static str,
    pub trace: f64,
    pub trace_prime: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fork_curvature: Option<f64>,
    pub diagnostics: DiagnosticsBlock,
}

#[derive(Serialize)]
pub struct VerificationEntry {
    pub analytic: f64,
    pub numeric: f64,
    pub estimate: f64,
    pub status: &'static str,
}

#[derive(Serialize)]
pub struct Report {
    pub meta: Meta,
    pub prerequisites: PrereqBlock,
    pub derivatives: BTreeMap<&'static str, f64>,
    pub z_tables: ZBlock,
    pub bifurcation: BifurcationBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<BTreeMap<&'static str, VerificationEntry>>,
}

fn derivative_block(d: &PoincareDerivatives) -> BTreeMap<&'static str, f64> {
    d.named().into_iter().collect()
}

fn z_block(z: &ZTables) -> ZBlock {
    ZBlock {
        z2_3: z.z2_3,
        z2_4: z.z2_4,
        z2_11: z.z2_11,
        z2_22: z.z2_22,
        z0_1: z.z0_1,
        z0_2: z.z0_2,
        z0_3: z.z0_3,
        z0_4: z.z0_4,
        z0_11: z.z0_11,
        z0_12: z.z0_12,
        z0_22: z.z0_22,
        z0_14: z.z0_14,
        z0_24: z.z0_24,
        v2: z.v2,
        v11: z.v11,
        f_val: z.f_val,
    }
}

fn bifurcation_block(r: &BifurcationReport) -> BifurcationBlock {
    BifurcationBlock {
        verdict: r.verdict.as_str(),
        trace: r.trace,
        trace_prime: r.trace_prime,
        fork_curvature: r.fork_curvature,
        diagnostics: DiagnosticsBlock {
            frame_degenerate: r.diagnostics.frame_degenerate,
            adapted_frame: r.diagnostics.s_matrix,
            q_tilde_p: r.diagnostics.q_tilde_p,
            q_tilde_qq: r.diagnostics.q_tilde_qq,
            p_tilde_qq: r.diagnostics.p_tilde_qq,
            p_tilde_qp: r.diagnostics.p_tilde_qp,
            p_tilde_qqq: r.diagnostics.p_tilde_qqq,
            p_tilde_qe: r.diagnostics.p_tilde_qe,
            curvature_denominator: r.diagnostics.curvature_denominator,
            tol_singular: r.tols.tol_singular,
            tol_prime: r.tols.tol_prime,
            tol_2: r.tols.tol_2,
            tol_3: r.tols.tol_3,
            tol_guard: r.tols.tol_guard,
        },
    }
}

fn status_str(s: CompareStatus) -> &'static str {
    match s {
        CompareStatus::Pass => "pass",
        CompareStatus::Fail => "fail",
        CompareStatus::Inconclusive => "inconclusive",
    }
}

pub fn build_report(
    meta: Meta,
    analysis: &Analysis,
    verification: Option<&ComparisonReport>,
) -> Report {
    Report {
        meta,
        prerequisites: PrereqBlock {
            y_max: analysis.derivs.y_max,
            period: analysis.derivs.period,
            energy: analysis.derivs.energy,
        },
        derivatives: derivative_block(&analysis.derivs),
        z_tables: z_block(&analysis.z),
        bifurcation: bifurcation_block(&analysis.report),
        verification: verification.map(|rep| {
            rep.entries
                .iter()
                .map(|e| {
                    (
                        e.name,
                        VerificationEntry {
                            analytic: e.analytic,
                            numeric: e.numeric,
                            estimate: e.estimate,
                            status: status_str(e.status),
                        },
                    )
                })
                .collect()
        }),
    }
}

pub fn analysis_csv(analysis: &Analysis) -> String {
    let mut out = String::from("key,value\n");
    out.push_str(&format!("y_max,{:?}\n", analysis.derivs.y_max));
    out.push_str(&format!("period,{:?}\n", analysis.derivs.period));
    out.push_str(&format!("energy,{:?}\n", analysis.derivs.energy));
    for (name, value) in analysis.derivs.named() {
        out.push_str(&format!("{name},{value:?}\n"));
    }
    out.push_str(&format!("trace,{:?}\n", analysis.report.trace));
    out.push_str(&format!("trace_prime,{:?}\n", analysis.report.trace_prime));
    out.push_str(&format!("verdict,{}\n", analysis.report.verdict.as_str()));
    if let Some(c) = analysis.report.fork_curvature {
        out.push_str(&format!("fork_curvature,{c:?}\n"));
    }
    out
}

pub fn analysis_text(analysis: &Analysis) -> String {
    let d = &analysis.derivs;
    let mut out = String::new();
    out.push_str(&format!(
        "libration analysis at epsilon0 = {:?}\n  y_max = {:?}\n  period = {:?}\n  energy = {:?}\n",
        d.epsilon0, d.y_max, d.period, d.energy
    ));
    out.push_str(&format!(
        "  trace = {:?}\n  trace_prime = {:?}\n  verdict = {}\n",
        analysis.report.trace,
        analysis.report.trace_prime,
        analysis.report.verdict.as_str()
    ));
    if let Some(c) = analysis.report.fork_curvature {
        out.push_str(&format!("  fork_curvature = {c:?}\n"));
    }
    out.push_str("  derivatives:\n");
    for (name, value) in d.named() {
        out.push_str(&format!("    {name:7} = {value:+.12e}\n"));
    }
    out
}

pub fn verify_text(report: &ComparisonReport) -> String {
    let mut out = String::from("verification against the finite-difference oracle:\n");
    for e in &report.entries {
        out.push_str(&format!(
            "  {:7} analytic {:+.9e}  numeric {:+.9e}  est {:.1e}  {}\n",
            e.name,
            e.analytic,
            e.numeric,
            e.estimate,
            status_str(e.status)
        ));
    }
    out.push_str(&format!(
        "summary: {} pass, {} fail, {} inconclusive\n",
        report.n_pass, report.n_fail, report.n_inconclusive
    ));
    out
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("epsilon,trace,trace_prime\n");
    for s in &result.samples {
        out.push_str(&format!("{:?},{:?},{:?}\n", s.eps, s.trace, s.trace_prime));
    }
    for r in &result.singular_eps {
        out.push_str(&format!("# singular_epsilon = {r:?}\n"));
    }
    for (eps, msg) in &result.failures {
        out.push_str(&format!("# failed_sample epsilon = {eps:?}: {msg}\n"));
    }
    out
}

#[derive(Serialize)]
pub struct SweepReport {
    pub meta: Meta,
    pub samples: Vec<SweepRow>,
    pub singular_epsilon: Vec<f64>,
    pub failures: Vec<(f64, String)>,
}

#[derive(Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub trace: f64,
    pub trace_prime: f64,
}

pub fn sweep_report(meta: Meta, result: &SweepResult) -> SweepReport {
    SweepReport {
        meta,
        samples: result
            .samples
            .iter()
            .map(|s| SweepRow {
                epsilon: s.eps,
                trace: s.trace,
                trace_prime: s.trace_prime,
            })
            .collect(),
        singular_epsilon: result.singular_eps.clone(),
        failures: result.failures.clone(),
    }
}

pub fn sweep_text(result: &SweepResult) -> String {
    let mut out = String::from("epsilon        trace            trace_prime\n");
    for s in &result.samples {
        out.push_str(&format!(
            "{:<14.8} {:+.9e} {:+.9e}\n",
            s.eps, s.trace, s.trace_prime
        ));
    }
    if result.singular_eps.is_empty() {
        out.push_str("no singular energies bracketed\n");
    }
    for r in &result.singular_eps {
        out.push_str(&format!("singular epsilon: {r:.12}\n"));
    }
    out
}
