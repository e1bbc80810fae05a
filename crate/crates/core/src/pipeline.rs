//! End-to-end orchestration: hypotheses → prerequisites → tables → chain rule
//! → classification, plus the verification run against the oracle.

use crate::bifurcate::{classify, BifurcationReport};
use crate::chain::{self, AssemblyVariants, PoincareDerivatives, ZTables};
use crate::config::{ClassifyTols, NumericsConfig, OracleConfig};
use crate::error::{Error, Result};
use crate::flowderiv::{build_tables, CoeffSet, FlowTables, GVariants};
use crate::oracle::{compare, ComparisonReport, FdDerivatives, Oracle, TolSchedule};
use crate::prereq::{prerequisites, OrbitPrerequisites};
use crate::symexpr::{chebyshev_probes, check_hypotheses, HypothesisReport, SymbolicField};

/// One problem: potential, optional deformation, energy reference.
#[derive(Debug, Clone)]
pub struct Problem {
    pub v: SymbolicField,
    pub f: Option<SymbolicField>,
    pub e0: f64,
}

impl Problem {
    pub fn new(v: SymbolicField, f: Option<SymbolicField>, e0: f64) -> Self {
        Self { v, f, e0 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub num: NumericsConfig,
    pub tols: ClassifyTols,
    pub oracle: OracleConfig,
    pub g_variants: GVariants,
    pub assembly_variants: AssemblyVariants,
}

/// Everything a full analysis produces.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub hypothesis: HypothesisReport,
    pub derivs: PoincareDerivatives,
    pub z: ZTables,
    pub report: BifurcationReport,
}

/// Run the complete analytical pipeline at one energy offset.
///
/// ```
/// use libration_core::pipeline::{analyze, Options, Problem};
/// use libration_core::symexpr::{FieldKind, SymbolicField};
///
/// // transverse frequency 1/2: the monodromy trace is 2·cos(pi) = -2
/// let v = SymbolicField::parse_field("0.5*(0.25*x^2 + y^2)", FieldKind::Potential).unwrap();
/// let analysis = analyze(&Problem::new(v, None, 0.0), 0.5, &Options::default()).unwrap();
/// assert!((analysis.derivs.trace() + 2.0).abs() < 1e-8);
/// ```
pub fn analyze(problem: &Problem, eps0: f64, opts: &Options) -> Result<Analysis> {
    let (analysis, _, _) = analyze_with_tables(problem, eps0, opts)?;
    Ok(analysis)
}

/// As [`analyze`], also handing back the prerequisites and tables for callers
/// that keep working with them (verification, diagnostics dumps).
pub fn analyze_with_tables(
    problem: &Problem,
    eps0: f64,
    opts: &Options,
) -> Result<(Analysis, OrbitPrerequisites, FlowTables)> {
    let pre = prerequisites(&problem.v, problem.e0, eps0, &opts.num)?;
    log::debug!(
        "prerequisites at eps0 = {eps0}: y_max = {}, period = {}",
        pre.y_max,
        pre.period
    );
    let span = pre.y_max.abs() + 10.0;
    let probe_ys = chebyshev_probes(-span, span, 33);
    let p_scale = (2.0 * pre.energy.abs()).sqrt().max(1.0);
    let probe_pys = [0.0, p_scale, -p_scale, 0.5 * p_scale, -0.5 * p_scale];
    let hypothesis = check_hypotheses(&problem.v, problem.f.as_ref(), &probe_ys, &probe_pys)?;
    if !hypothesis.passed {
        return Err(Error::Hypothesis(format!(
            "max violations: V_x {:.3e}, F_x {:.3e}, F_px {:.3e}",
            hypothesis.max_violation_vx, hypothesis.max_violation_fx, hypothesis.max_violation_fpx
        )));
    }
    let coeffs = CoeffSet::build(&problem.v, problem.f.as_ref(), &pre)?;
    let tables = build_tables(&pre, &coeffs, opts.g_variants, opts.num.substeps)?;
    log::debug!("flow-derivative tables complete");
    let z = chain::starting_point_table(&problem.v, problem.f.as_ref(), &pre)?;
    let z = chain::flow_time_table(&tables, z)?;
    let derivs = chain::assemble(&tables, &z, &pre, eps0, opts.assembly_variants)?;
    let report = classify(&derivs, &opts.tols);
    Ok((
        Analysis {
            hypothesis,
            derivs,
            z,
            report,
        },
        pre,
        tables,
    ))
}

/// Full verification: the analytical pipeline plus the finite-difference
/// oracle and the per-derivative comparison.
pub fn verify(
    problem: &Problem,
    eps0: f64,
    opts: &Options,
    schedule: TolSchedule,
) -> Result<(Analysis, FdDerivatives, ComparisonReport)> {
    let analysis = analyze(problem, eps0, opts)?;
    let oracle = Oracle::new(
        &problem.v,
        problem.f.as_ref(),
        problem.e0,
        opts.num.clone(),
        opts.oracle.clone(),
    );
    let fd = oracle.fd_derivatives(eps0)?;
    let report = compare(&analysis.derivs, &fd, schedule);
    log::debug!(
        "oracle comparison: {} pass, {} fail, {} inconclusive",
        report.n_pass,
        report.n_fail,
        report.n_inconclusive
    );
    Ok((analysis, fd, report))
}
