//! Acceptance suite: one test per criterion, each printing a PASS line when it
//! holds. Run with `cargo test --release -p libration-core --test acceptance
//! -- --nocapture` to see the lines.

use libration_core::bifurcate::{self, Verdict};
use libration_core::chain::DERIVATIVE_NAMES;
use libration_core::config::{NumericsConfig, OracleConfig};
use libration_core::fixtures::random_problem;
use libration_core::flowderiv::{self, generic, CoeffSet, GVariants};
use libration_core::oracle::{fork_branch_fit, Oracle, TolSchedule};
use libration_core::pipeline::{analyze, verify, Options, Problem};
use libration_core::prereq::prerequisites;
use libration_core::symexpr::{FieldKind, SymbolicField};
use std::f64::consts::TAU;

fn potential(src: &str) -> SymbolicField {
    SymbolicField::parse_field(src, FieldKind::Potential).unwrap()
}

fn deformation(src: &str) -> SymbolicField {
    SymbolicField::parse_field(src, FieldKind::Deformation).unwrap()
}

fn problem_from_fixture(seed: u64, with_f: bool) -> (Problem, f64) {
    let fx = random_problem(seed, with_f);
    let v = potential(&fx.v_src);
    let f = fx.f_src.as_deref().map(deformation);
    (Problem::new(v, f, fx.e0), fx.eps0)
}

#[test]
fn acceptance_01_harmonic_closed_forms() {
    let opts = Options::default();
    for omega in [0.3_f64, 0.5, 1.7] {
        let v = potential(&format!("0.5*({:?}*x^2+y^2)", omega * omega));
        let problem = Problem::new(v, None, 0.0);
        let a = analyze(&problem, 0.5, &opts).unwrap();
        let d = &a.derivs;
        assert!((d.y_max - 1.0).abs() <= 1e-9, "y_max for omega={omega}");
        assert!((d.period - TAU).abs() <= 1e-9, "period for omega={omega}");
        let angle = TAU * omega;
        for (got, want, what) in [
            (d.q_q, angle.cos(), "Q_q"),
            (d.q_p, angle.sin() / omega, "Q_p"),
            (d.p_q, -omega * angle.sin(), "P_q"),
            (d.p_p, angle.cos(), "P_p"),
        ] {
            assert!(
                (got - want).abs() <= 1e-8,
                "{what} at omega={omega}: {got} vs {want}"
            );
        }
        // all 14 pure second/third order and all 10 energy-mixed vanish
        for (name, value) in d.named() {
            let suffix = name.split('_').nth(1).unwrap();
            let pure2or3 = suffix.len() >= 2 && suffix.chars().all(|c| c == 'q' || c == 'p');
            let eps_mixed = suffix.ends_with('e');
            if pure2or3 || eps_mixed {
                assert!(
                    value.abs() <= 1e-8,
                    "{name} = {value} should vanish at omega={omega}"
                );
            }
        }
    }
    println!("ACCEPTANCE 1 [harmonic closed forms, omega in {{0.3, 0.5, 1.7}}]: PASS");
}

#[test]
fn acceptance_02_structural_zeros_survive_brute_quadrature() {
    let opts = Options::default();
    let mut checked = 0usize;
    let mut worst = 0.0_f64;
    for seed in 1..=5u64 {
        let (problem, eps0) = problem_from_fixture(seed, true);
        let pre = prerequisites(&problem.v, problem.e0, eps0, &opts.num).unwrap();
        let coeffs = CoeffSet::build(&problem.v, problem.f.as_ref(), &pre).unwrap();
        let tables =
            flowderiv::build_tables(&pre, &coeffs, GVariants::default(), opts.num.substeps)
                .unwrap();
        let mut patterns: Vec<Vec<u8>> = Vec::new();
        for l in 1..=5u8 {
            for m in l..=5u8 {
                if !(l == 5 && m == 5) {
                    patterns.push(vec![l, m]);
                }
            }
        }
        for l in 1..=4u8 {
            for m in l..=4u8 {
                for n in m..=4u8 {
                    patterns.push(vec![l, m, n]);
                }
                patterns.push(vec![l, m, 5]);
            }
        }
        for idx in &patterns {
            for r in 1..=4u8 {
                if tables.entry(r, idx).unwrap().is_zero() {
                    let brute = generic::brute_entry(&tables, &coeffs, &pre, r, idx).unwrap();
                    worst = worst.max(brute.sup_norm());
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 100, "only {checked} zero-tagged entries found");
    assert!(
        worst <= 1e-10,
        "a ZERO-tagged entry recomputed by brute quadrature reaches {worst}"
    );
    println!(
        "ACCEPTANCE 2 [structural zeros, {checked} entries on 5 random quartics, sup {worst:.2e}]: PASS"
    );
}

#[test]
fn acceptance_03_symplecticity_identities() {
    let opts = Options::default();
    let mut worst_det = 0.0_f64;
    let mut worst_diff = 0.0_f64;
    for seed in 10..20u64 {
        let with_f = seed % 2 == 0;
        let (problem, eps0) = problem_from_fixture(seed, with_f);
        let d = analyze(&problem, eps0, &opts).unwrap().derivs;
        let det = d.q_q * d.p_p - d.q_p * d.p_q;
        worst_det = worst_det.max((det - 1.0).abs());
        let dq = d.q_qq * d.p_p + d.q_q * d.p_qp - d.q_qp * d.p_q - d.q_p * d.p_qq;
        let dp = d.q_qp * d.p_p + d.q_q * d.p_pp - d.q_pp * d.p_q - d.q_p * d.p_qp;
        worst_diff = worst_diff.max(dq.abs()).max(dp.abs());
    }
    assert!(worst_det <= 1e-8, "det drift {worst_det}");
    assert!(
        worst_diff <= 1e-7,
        "differentiated symplecticity drift {worst_diff}"
    );
    println!(
        "ACCEPTANCE 3 [symplecticity on 10 random potentials, det {worst_det:.2e}, diff {worst_diff:.2e}]: PASS"
    );
}

#[test]
fn acceptance_04_oracle_equivalence() {
    let opts = Options::default();
    let schedule = TolSchedule::default();
    let mut total_inconclusive = 0usize;
    for seed in 20..25u64 {
        let with_f = seed >= 22; // three of the five carry a deformation
        let (problem, eps0) = problem_from_fixture(seed, with_f);
        let (_, _, report) = verify(&problem, eps0, &opts, schedule).unwrap();
        assert_eq!(
            report.n_fail,
            0,
            "seed {seed}: failures {:?}",
            report.failed_names()
        );
        assert!(
            report.n_inconclusive * 10 < 38,
            "seed {seed}: {} of 38 entries inconclusive",
            report.n_inconclusive
        );
        total_inconclusive += report.n_inconclusive;
    }
    println!(
        "ACCEPTANCE 4 [all 38 derivatives vs oracle on 5 random problems (3 deformed), {total_inconclusive} inconclusive total]: PASS"
    );
}

#[test]
fn acceptance_05_fixed_point_branch() {
    let num = NumericsConfig::default();
    let ocfg = OracleConfig::default();
    let cases: Vec<(SymbolicField, SymbolicField, f64)> = vec![
        (potential("0.5*(x^2+y^2)"), deformation("y^2"), 0.5),
        {
            let (p, e) = problem_from_fixture(30, true);
            (p.v, p.f.unwrap(), e)
        },
        {
            let (p, e) = problem_from_fixture(31, true);
            (p.v, p.f.unwrap(), e)
        },
    ];
    let mut worst = 0.0_f64;
    for (v, f, eps0) in &cases {
        let oracle = Oracle::new(v, Some(f), 0.0, num.clone(), ocfg.clone());
        for i in 0..5 {
            for j in 0..5 {
                let eps = eps0 + 0.05 * (i as f64 - 2.0);
                let delta = 0.04 * (j as f64 - 2.0);
                let (q, p, _) = oracle.poincare_map(0.0, 0.0, eps, delta).unwrap();
                worst = worst.max(q.abs()).max(p.abs());
            }
        }
    }
    assert!(worst <= 1e-9, "fixed point drift {worst}");
    println!("ACCEPTANCE 5 [fixed-point branch over 5x5 (eps,delta) grids, max {worst:.2e}]: PASS");
}

#[test]
fn acceptance_06_fork_detection_end_to_end() {
    let opts = Options::default();
    let v = potential("0.5*y^2 + 0.5*(1+y^2)*x^2");
    // sweep brackets the trace = 2 crossing
    let sweep = bifurcate::sweep(&v, 0.0, 0.2, 4.0, 40, &opts.num).unwrap();
    assert!(
        !sweep.singular_eps.is_empty(),
        "sweep found no singular energy"
    );
    let eps_star = sweep.singular_eps[0];
    let trace = bifurcate::trace_at(&v, 0.0, eps_star, &opts.num).unwrap();
    assert!(
        (trace - 2.0).abs() <= 1e-9,
        "|trace-2| = {}",
        (trace - 2.0).abs()
    );
    // classification: fork, with transcritical excluded by reflection symmetry
    let problem = Problem::new(v.clone(), None, 0.0);
    let a = analyze(&problem, eps_star, &opts).unwrap();
    assert_eq!(
        a.report.verdict,
        Verdict::CrossFork,
        "verdict {:?}",
        a.report.verdict
    );
    let p_tilde_qq = a.report.diagnostics.p_tilde_qq.unwrap();
    assert!(
        p_tilde_qq.abs() <= 1e-9,
        "P̃_q̃q̃ = {p_tilde_qq} should vanish by symmetry"
    );
    let analytic_curvature = a.report.fork_curvature.unwrap();
    // oracle-side continuation of the bifurcating branch and parabola fit
    let oracle = Oracle::new(&v, None, 0.0, opts.num.clone(), opts.oracle.clone());
    let frame = a.report.diagnostics.s_matrix.unwrap();
    let s_values = [-0.028, -0.02, -0.012, 0.012, 0.02, 0.028];
    let fit = fork_branch_fit(&oracle, eps_star, frame, &s_values).unwrap();
    assert!(
        fit.curvature.signum() == analytic_curvature.signum(),
        "sign mismatch: fit {} vs analytic {}",
        fit.curvature,
        analytic_curvature
    );
    let rel = (fit.curvature - analytic_curvature).abs() / analytic_curvature.abs();
    assert!(
        rel <= 0.05,
        "curvature: fit {} vs analytic {} (rel {rel})",
        fit.curvature,
        analytic_curvature
    );
    println!(
        "ACCEPTANCE 6 [fork at eps* = {eps_star:.6}, curvature {analytic_curvature:.6} vs fit {:.6}, rel {rel:.2e}]: PASS",
        fit.curvature
    );
}

#[test]
fn acceptance_07_printed_formula_protocol() {
    // The two formula ambiguities each carry a dedicated oracle test; the
    // detailed row-level versions live in tests/protocol.rs, and the build's
    // choice is recorded in docs/formula-notes.md.
    let doc = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../docs/formula-notes.md"
    ))
    .expect("the formula decision record must be tracked in docs/formula-notes.md");
    assert!(
        doc.contains("validated"),
        "decision record looks incomplete"
    );

    let v = potential("0.5*y^2 + 0.2*y^3 + 0.125*y^4 + 0.5*x^2*y + 0.2*x^3 + 0.1*x^2*y^2");
    let f = deformation("0.3*x^2*y + 0.2*x*px*y + 0.1*y^3 + 0.2*y*px^2 + 0.15*x^2*py");
    let problem = Problem::new(v, Some(f), 0.0);
    let eps0 = 0.4;
    let schedule = TolSchedule::default();

    // default build: every derivative matches the oracle
    let opts = Options::default();
    let (a_default, fd, clean) = verify(&problem, eps0, &opts, schedule).unwrap();
    assert_eq!(
        clean.n_fail,
        0,
        "default build fails: {:?}",
        clean.failed_names()
    );

    // ambiguity 1 — the mixed-index deformation inhomogeneity row. Its table
    // entries never reach the 38 map derivatives, so the dedicated oracle test
    // differences the flow itself at t = T.
    let pre = prerequisites(&problem.v, problem.e0, eps0, &opts.num).unwrap();
    let coeffs = CoeffSet::build(&problem.v, problem.f.as_ref(), &pre).unwrap();
    let tables =
        flowderiv::build_tables(&pre, &coeffs, GVariants::default(), opts.num.substeps).unwrap();
    let alt_variants = GVariants {
        alt_g3_transverse_planar_delta: true,
        alt_g1_transverse_planar_delta: true,
    };
    let alt_tables =
        flowderiv::build_tables(&pre, &coeffs, alt_variants, opts.num.substeps).unwrap();
    let oracle = Oracle::new(
        &problem.v,
        problem.f.as_ref(),
        problem.e0,
        opts.num.clone(),
        opts.oracle.clone(),
    );
    let steps = opts.oracle.steps_per_period;
    for (r, idx) in [(3u8, [1u8, 2, 5]), (1, [1, 2, 5])] {
        let fd_val =
            oracle.flow_derivative_fd(pre.y_max, pre.period, steps, r as usize, &idx, 1e-3);
        let validated = tables.value_at_period(r, &idx).unwrap();
        let alternate = alt_tables.value_at_period(r, &idx).unwrap();
        let scale = fd_val.abs().max(1.0);
        assert!(
            (validated - fd_val).abs() <= 1e-3 * scale,
            "x^{r}_{idx:?}: validated {validated} vs fd {fd_val}"
        );
        assert!(
            (alternate - fd_val).abs() > 1e-2 * scale,
            "x^{r}_{idx:?}: alternate {alternate} should disagree with fd {fd_val}"
        );
    }

    // ambiguity 2 — the third-order assembly rows: the alternate qpp and
    // deformation-mixed P rows stop matching the oracle map derivatives
    let mut alt_asm = Options::default();
    alt_asm.assembly_variants.alt_third_order_qpp = true;
    alt_asm.assembly_variants.alt_deformation_rows = true;
    let alt2 = analyze(&problem, eps0, &alt_asm).unwrap();
    let alt2_report = libration_core::oracle::compare(&alt2.derivs, &fd, schedule);
    let failed = alt2_report.failed_names();
    for name in ["Q_qpp", "P_qpp", "P_qqd", "P_ppd"] {
        assert!(
            failed.contains(&name),
            "alternate assembly should fail {name}; failed set {failed:?}"
        );
        let dv = a_default.derivs.get(name).unwrap();
        let av = alt2.derivs.get(name).unwrap();
        assert!(
            (dv - av).abs() > 1e-3 * (1.0 + dv.abs()),
            "{name}: variants are not discriminated ({dv} vs {av})"
        );
    }
    println!("ACCEPTANCE 7 [printed-formula protocol: validated rows match the oracle; alternates fail the flow-level and map-level checks]: PASS");
}

#[test]
fn derivative_name_order_is_stable() {
    assert_eq!(DERIVATIVE_NAMES.len(), 38);
    assert_eq!(DERIVATIVE_NAMES[0], "Q_q");
    assert_eq!(DERIVATIVE_NAMES[37], "P_ppd");
}
