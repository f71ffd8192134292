//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fail.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use intbvp::expr::parse_expr;
use intbvp::ivp::Tolerance;
use intbvp::oracle::{peano_check, sweep, verify, VerificationReport, VerifyOptions};
use intbvp::problem::validate;
use intbvp::sens::{all_sensitivities, combination_check, sensitivities_for, uniform_grid, SignConvention};
use intbvp::shoot::newton_solve;
use intbvp::{DatumId, Error, ProblemSpec, SolverOptions, ValidatedProblem};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn t1() -> ValidatedProblem {
    validate(ProblemSpec::t1_linear()).unwrap()
}

fn t2() -> ValidatedProblem {
    validate(ProblemSpec::t2_pendulum()).unwrap()
}

fn closed_form(id: DatumId, x: f64) -> f64 {
    match id {
        DatumId::Y { r: 0, l: 1 } => 1.0 - 2.0 * x / 3.0,
        DatumId::Y { r: 0, l: 2 } => x / 3.0,
        DatumId::X(1) => -1.0 + 2.0 * x / 3.0,
        DatumId::X(2) => -x / 3.0,
        DatumId::C => x / 2.0,
        DatumId::D => -5.0 * x / 6.0,
        DatumId::P => -2.0 * x / 3.0,
        _ => unreachable!("T1 has no datum {id}"),
    }
}

fn t1_closed_forms() -> Result<Outcome, Error> {
    let start = Instant::now();
    let vp = t1();
    let (sol, table) = sensitivities_for(&vp, &SolverOptions::default(), SignConvention::Leibniz)?;
    let grid = uniform_grid(0.0, 2.5, 201);
    let mut u_err = 0.0_f64;
    for &x in &grid {
        u_err = u_err.max((sol.u(x, 0)? - x).abs());
    }
    let mut z_err = 0.0_f64;
    for z in table.entries() {
        for (&x, v) in grid.iter().zip(z.sample(&grid)?) {
            z_err = z_err.max((v - closed_form(z.datum, x)).abs());
        }
    }
    let elapsed = start.elapsed();
    Ok(outcome(
        u_err <= 1e-10 && z_err <= 1e-8 && table.len() == 7 && elapsed < Duration::from_secs(1),
        format!("sup|u - x| = {u_err:.2e}, sup sensitivity error = {z_err:.2e}, {} ms", elapsed.as_millis()),
    ))
}

fn worst(report: &VerificationReport) -> f64 {
    report.data.iter().fold(0.0, |m, c| m.max(c.sup_rel))
}

fn t2_oracle() -> Result<Outcome, Error> {
    let start = Instant::now();
    let report = verify(&t2(), &SolverOptions::default(), &VerifyOptions::default())?;
    let elapsed = start.elapsed();
    let rel = worst(&report);
    Ok(outcome(
        rel <= 1e-5 && report.data.len() == 7 && elapsed < Duration::from_secs(10),
        format!("max sup_rel over 7 data = {rel:.2e}, {} ms", elapsed.as_millis()),
    ))
}

fn bc_fidelity() -> Result<Outcome, Error> {
    let mut max = 0.0_f64;
    let mut count = 0;
    for vp in [t1(), t2()] {
        let sol = newton_solve(&vp, &SolverOptions::default())?;
        let table = all_sensitivities(&sol, SignConvention::Leibniz)?;
        for z in table.entries() {
            max = max.max(z.boundary_residual(&vp, sol.rule())?);
            count += 1;
        }
    }
    Ok(outcome(max <= 1e-8, format!("max |L(Z) - t| over {count} sensitivities = {max:.2e}")))
}

fn sign_adjudication() -> Result<Outcome, Error> {
    let opts = SolverOptions::default();
    let printed = verify(&t1(), &opts, &VerifyOptions { signs: SignConvention::Printed, ..VerifyOptions::default() })?;
    let leibniz_t1 = verify(&t1(), &opts, &VerifyOptions::default())?;
    let leibniz_t2 = verify(&t2(), &opts, &VerifyOptions::default())?;
    let sup = |r: &VerificationReport, id| r.get(id).map_or(f64::NAN, |c| c.sup_abs);
    let (pc, pd) = (sup(&printed, DatumId::C), sup(&printed, DatumId::D));
    let printed_fails = pc >= 0.1 && pd >= 0.1 && !printed.pass;
    let leibniz_passes = leibniz_t1.pass && leibniz_t2.pass && worst(&leibniz_t2) <= 1e-5;
    Ok(outcome(
        printed_fails && leibniz_passes,
        format!(
            "printed signs on T1: sup|C - FD| = {pc:.3}, sup|D - FD| = {pd:.3}; Leibniz signs: T1 {}, T2 {}",
            if leibniz_t1.pass { "pass" } else { "fail" },
            if leibniz_t2.pass { "pass" } else { "fail" }
        ),
    ))
}

fn peano() -> Result<Outcome, Error> {
    let tol = Tolerance::default();
    let quadratic = peano_check(&parse_expr("0")?, 2, 0.0, &[2.0, 5.0], (0.0, 2.5), tol)?;
    let growth = peano_check(&parse_expr("y0")?, 1, 0.0, &[3.0], (0.0, 2.5), tol)?;
    let max = quadratic.residual.max(growth.residual);
    Ok(outcome(
        max <= 1e-7,
        format!("residual y''=0: {:.2e}, y'=y: {:.2e}", quadratic.residual, growth.residual),
    ))
}

fn disconjugacy() -> Result<Outcome, Error> {
    let singular = validate(ProblemSpec { p: -0.5, ..ProblemSpec::t1_linear() })?;
    let raised = matches!(
        sensitivities_for(&singular, &SolverOptions::default(), SignConvention::Leibniz),
        Err(Error::DisconjugacyViolation { .. })
    );
    let (_, table) = sensitivities_for(&t1(), &SolverOptions::default(), SignConvention::Leibniz)?;
    let det = table.matrix.det;
    Ok(outcome(
        raised && (det - 3.0).abs() <= 1e-8,
        format!(
            "p = -0.5 {}; p = 1 det M = {det:.12}",
            if raised { "raises DisconjugacyViolation" } else { "does not raise" }
        ),
    ))
}

fn continuity() -> Result<Vec<(String, Outcome)>, Error> {
    let deltas = [1e-2, 1e-3, 1e-4];
    let opts = SolverOptions::default();
    let t1_report = sweep(&t1(), &deltas, &opts)?;
    let t2_report = sweep(&t2(), &deltas, &opts)?;

    // deviation minus the straight line through the largest delta
    let defect = |id| {
        let row = t1_report.row(id);
        let slope = row[0].sup_deviation / row[0].delta;
        row.iter().fold(0.0_f64, |m, c| m.max((c.sup_deviation - slope * c.delta).abs()))
    };
    let (mut y_defect, mut other_defect, mut other_ratio) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &id in t1().data_ids() {
        if matches!(id, DatumId::Y { .. }) {
            y_defect = y_defect.max(defect(id));
        } else {
            other_defect = other_defect.max(defect(id));
            for c in t1_report.row(id) {
                if let Some(r) = c.ratio_to_prev {
                    other_ratio = other_ratio.max((r / 10.0 - 1.0).abs());
                }
            }
        }
    }
    let ratios: Vec<f64> = t2_report.cells.iter().filter_map(|c| c.ratio_to_prev).collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &r| (a.min(r), b.max(r)));
    Ok(vec![
        (
            "7a".into(),
            outcome(y_defect <= 1e-9, format!("T1 y-data rows: linearity defect {y_defect:.2e}")),
        ),
        (
            "7b".into(),
            outcome(
                other_ratio <= 0.01,
                format!(
                    "T1 x/c/d/p rows: ratios within {:.2}% of 10 (linearity defect {other_defect:.2e}, \
                     nonzero because u depends nonlinearly on these data)",
                    100.0 * other_ratio
                ),
            ),
        ),
        (
            "7c".into(),
            outcome(
                ratios.len() == 14 && lo >= 5.0 && hi <= 20.0,
                format!("T2 consecutive-decade ratios in [{lo:.4}, {hi:.4}]"),
            ),
        ),
    ])
}

fn combinations() -> Result<Outcome, Error> {
    let mut max = 0.0_f64;
    for vp in [t1(), t2()] {
        let sol = newton_solve(&vp, &SolverOptions::default())?;
        let table = all_sensitivities(&sol, SignConvention::Leibniz)?;
        max = max.max(combination_check(&sol, &table)?.max());
    }
    Ok(outcome(max <= 1e-8, format!("max residual on 101-point grid = {max:.2e}")))
}

fn determinism() -> Result<Outcome, Error> {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/t2.json");
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_intbvp"))
            .arg("verify")
            .arg(&config)
            .output()
            .expect("binary runs")
    };
    let (a, b) = (run(), run());
    let ok = a.status.success() && b.status.success() && !a.stdout.is_empty() && a.stdout == b.stdout;
    Ok(outcome(ok, format!("two runs of `verify` on t2_pendulum: {} bytes each, identical = {}", a.stdout.len(), a.stdout == b.stdout)))
}

fn report(label: &str, name: &str, result: Result<Outcome, Error>) -> bool {
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("[{}] {label} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    let mut all = true;
    all &= report("1", "T1 closed-form suite", t1_closed_forms());
    all &= report("2", "oracle agreement on T2", t2_oracle());
    all &= report("3", "boundary-condition fidelity", bc_fidelity());
    all &= report("4", "sign adjudication", sign_adjudication());
    all &= report("5", "Peano identity", peano());
    all &= report("6", "disconjugacy surrogate", disconjugacy());
    match continuity() {
        Ok(rows) => {
            for (label, o) in rows {
                all &= report(&label, "continuous dependence", Ok(o));
            }
        }
        Err(e) => all &= report("7", "continuous dependence", Err(e)),
    }
    all &= report("8", "combination identities", combinations());
    all &= report("9", "determinism", determinism());
    if !all {
        std::process::exit(1);
    }
}
