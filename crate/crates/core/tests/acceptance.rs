//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

use cogarch_core::aux_ar::{yule_walker, AcvfEstimate};
use cogarch_core::bench::config::StudyConfig;
use cogarch_core::bench::grid::{build_grid, ParameterGrid};
use cogarch_core::bench::io::write_study_outputs;
use cogarch_core::bench::report::{rmse_rb, StudyReport};
use cogarch_core::bench::study::run_study_with_threads;
use cogarch_core::binding::{
    acvf_from_moments, binding, gradient_binding, gradient_binding_with_step, moment_estimate, moment_map,
    recover_k_rho, BindingBackend, MonteCarloConfig,
};
use cogarch_core::cogarch::{pathwise_gradient, simulate_returns, Recording, SimConfig};
use cogarch_core::estimators::{iie_sim, IieConfig, Method, ParameterBox};
use cogarch_core::levy::psi;
use cogarch_core::linalg::numeric_rank;
use cogarch_core::rng::StreamId;
use cogarch_core::{CogarchParams, LevyModel};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

type Outcome = Result<String, String>;

fn vg() -> LevyModel {
    LevyModel::variance_gamma(1.0).unwrap()
}

fn theta(b: f64, e: f64, p: f64) -> CogarchParams {
    CogarchParams::new(b, e, p).unwrap()
}

fn theta0() -> CogarchParams {
    theta(0.04, 0.053, 0.038)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let cases = [
        (theta0(), -0.0261),
        (theta(0.04, 0.051, 0.040), -0.0060),
        (theta(0.04, 0.055, 0.036), -0.0460),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (t, want) in cases {
        let got = psi(&vg(), &t, 4.0).map_err(|e| e.to_string())?;
        ok &= (got - want).abs() <= 1e-4;
        parts.push(format!("{got:.5} (want {want})"));
    }
    check(ok, format!("Psi(4) = {}", parts.join(", ")))
}

fn criterion_2() -> Outcome {
    let (rmse, rb) = rmse_rb(0.04698, 0.02032, 0.04);
    let ok = (rb - 0.17457).abs() <= 5e-5 && (rmse - 0.02148).abs() <= 5e-5;
    check(
        ok,
        format!(
            "RB = {rb:.5} (want 0.17457, gap {:.1e}), RMSE = {rmse:.5} (want 0.02148, gap {:.1e})",
            (rb - 0.17457).abs(),
            (rmse - 0.02148).abs()
        ),
    )
}

fn criterion_3() -> Outcome {
    let cfg = MonteCarloConfig {
        paths: 8,
        n_per_path: 1_000_000,
        ..Default::default()
    };
    let est = moment_estimate(&theta0(), &vg(), 1.0, &BindingBackend::MonteCarlo(cfg)).map_err(|e| e.to_string())?;
    let se = est.errors.ok_or("no standard errors")?;
    let mu = est.summary.mu;
    let target_rho = 1.0 * psi(&vg(), &theta0(), 1.0).map_err(|e| e.to_string())?.abs();
    let mean_ok = (mu / 2.6667 - 1.0).abs() <= 0.03;
    let rho_ok = (est.summary.rho - target_rho).abs() <= 3.0 * se.rho;
    check(
        mean_ok && rho_ok,
        format!(
            "mean G^2 = {mu:.4} (2.6667 +/- 3%), rho = {:.5} vs {target_rho:.5} (3 SE = {:.5})",
            est.summary.rho,
            3.0 * se.rho
        ),
    )
}

/// The desk-scale study shared by criteria 4, 5 and 8.
struct StudyRuns {
    one_thread: StudyReport,
    bytes: (Vec<u8>, Vec<u8>),
    seconds: f64,
}

fn study_runs() -> &'static Result<StudyRuns, String> {
    static RUNS: OnceLock<Result<StudyRuns, String>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let cfg = StudyConfig::default();
        let start = Instant::now();
        let a = run_study_with_threads(&cfg, 1).map_err(|e| e.to_string())?;
        let seconds = start.elapsed().as_secs_f64();
        let b = run_study_with_threads(&cfg, 3).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let read = |rep: &StudyReport, sub: &str| -> Result<Vec<u8>, String> {
            let d = dir.path().join(sub);
            write_study_outputs(rep, &d).map_err(|e| e.to_string())?;
            std::fs::read(d.join("report.json")).map_err(|e| e.to_string())
        };
        let bytes = (read(&a, "one")?, read(&b, "three")?);
        Ok(StudyRuns {
            one_thread: a,
            bytes,
            seconds,
        })
    })
}

fn criterion_4() -> Outcome {
    let runs = study_runs().as_ref().map_err(Clone::clone)?;
    let report = &runs.one_thread;
    let reference = [
        (Method::IieStar, [0.04698, 0.05038, 0.03243], [0.02032, 0.01482, 0.00994]),
        (Method::Mm, [0.05226, 0.05662, 0.03667], [0.01805, 0.01576, 0.01023]),
    ];
    let reps = report.config.reps as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for (method, mean, std) in reference {
        let row = report.row(method).ok_or("method missing from report")?;
        for c in 0..3 {
            let tol = 2.0 * std[c] / reps.sqrt();
            let hit = (row.mean[c] - mean[c]).abs() <= tol;
            ok &= hit;
            parts.push(format!(
                "{method}.{} {:.5} vs {:.5}+/-{tol:.5}{}",
                ["beta", "eta", "phi"][c],
                row.mean[c],
                mean[c],
                if hit { "" } else { " (miss)" }
            ));
        }
    }
    check(
        ok,
        format!("{} of {} replications kept; {}", report.included, report.reps, parts.join("; ")),
    )
}

fn criterion_5() -> Outcome {
    let runs = study_runs().as_ref().map_err(Clone::clone)?;
    let report = &runs.one_thread;
    let sim = report.row(Method::IieSim).ok_or("iie_sim missing")?;
    let star = report.row(Method::IieStar).ok_or("iie_star missing")?;
    let bias_ok = sim.rb[0].abs() < star.rb[0].abs();
    let k = report.config.k as f64;
    let expected = (1.0 + 1.0 / k).sqrt();
    let inflation = sim.std[0] / star.std[0];
    let std_ok = (inflation / expected - 1.0).abs() <= 0.25;
    check(
        bias_ok && std_ok,
        format!(
            "|RB beta| iie_sim {:.4} vs iie_star {:.4}; Std ratio {inflation:.3} vs sqrt(1+1/K) = {expected:.4}",
            sim.rb[0].abs(),
            star.rb[0].abs()
        ),
    )
}

fn criterion_6() -> Outcome {
    let model = vg();
    let mut notes = Vec::new();

    // common-seed self recovery
    let r = 10;
    let mut cfg = IieConfig::new(1, r, 31);
    cfg.burn_in = 100;
    let truth = theta(1.0, 0.054, 0.038);
    let mut sim = SimConfig::new(1.0, 3000, cfg.path_stream(0));
    sim.burn_in = cfg.burn_in;
    sim.substeps = cfg.substeps;
    sim.record = Recording::None;
    let (data, _) = simulate_returns(&truth, &model, &sim).map_err(|e| e.to_string())?;
    let bounds = ParameterBox::new(theta(0.5, 0.050, 0.034), theta(1.5, 0.058, 0.042)).unwrap();
    let small = ParameterGrid::from_axes(
        vec![0.5, 1.0, 1.5],
        &[0.050, 0.052, 0.054, 0.056, 0.058],
        &[0.034, 0.036, 0.038, 0.040, 0.042],
        &model,
        [0.5, 0.002, 0.002],
        bounds,
    )
    .map_err(|e| e.to_string())?;
    let est = iie_sim(&data, &model, r, &small, &cfg).map_err(|e| e.to_string())?;
    let recovered = est.objective == 0.0
        && est
            .theta_hat
            .to_array()
            .iter()
            .zip(truth.to_array())
            .all(|(a, b)| (a - b).abs() < 1e-12);
    notes.push(format!("self-recovery objective {}", est.objective));

    // injectivity over 100 grid pairs
    let wide = ParameterBox::new(theta(0.002, 0.002, 0.002), theta(0.12, 0.159, 0.114)).unwrap();
    let grid = build_grid(&wide, [0.002; 3], &model).map_err(|e| e.to_string())?;
    let points = grid.points();
    let stride = points.len() / 201;
    let mut min_sep = f64::INFINITY;
    for i in 0..100 {
        let (p, q) = (points[2 * i * stride], points[(2 * i + 1) * stride]);
        let a = binding(&p, &model, 1.0, r, &BindingBackend::Analytic).map_err(|e| e.to_string())?;
        let b = binding(&q, &model, 1.0, r, &BindingBackend::Analytic).map_err(|e| e.to_string())?;
        min_sep = min_sep.min((a.to_vector() - b.to_vector()).norm());
    }
    notes.push(format!("min separation {min_sep:.3e}"));

    // Yule-Walker hand case
    let a = yule_walker(
        &AcvfEstimate {
            mean: 0.0,
            gamma: vec![1.0, 0.25, 0.125],
        },
        2,
    )
    .map_err(|e| e.to_string())?;
    let yw_ok = (a[0] - 7.0 / 30.0).abs() <= 1e-12 && (a[1] - 1.0 / 15.0).abs() <= 1e-12;
    notes.push(format!("YW ({:.6}, {:.6})", a[0], a[1]));

    // (k, rho) roundtrip
    let ms = moment_map(&theta0(), &model, 1.0, &BindingBackend::Analytic).map_err(|e| e.to_string())?;
    let kr = recover_k_rho(ms.gamma0, acvf_from_moments(&ms, 1), acvf_from_moments(&ms, 2)).map_err(|e| e.to_string())?;
    let kr_ok = (kr.k - ms.k).abs() <= 1e-12 && (kr.rho - ms.rho).abs() <= 1e-12;
    notes.push(format!("k/rho roundtrip gaps {:.1e}/{:.1e}", (kr.k - ms.k).abs(), (kr.rho - ms.rho).abs()));

    check(recovered && min_sep > 0.0 && yw_ok && kr_ok, notes.join(", "))
}

fn criterion_7() -> Outcome {
    let model = vg();
    let t = theta0();
    let mut cfg = SimConfig::new(1.0, 300, StreamId::observed(11, 0));
    cfg.burn_in = 100;
    let end = |th: &CogarchParams| -> Result<f64, String> {
        let (_, p) = simulate_returns(th, &model, &cfg).map_err(|e| e.to_string())?;
        Ok(*p.sigma2.last().unwrap())
    };
    let g = pathwise_gradient(&t, &model, &cfg).map_err(|e| e.to_string())?;
    let (de, dp) = (*g.d_eta.last().unwrap(), *g.d_phi.last().unwrap());
    let err = |h: f64| -> Result<(f64, f64), String> {
        let fe = (end(&CogarchParams { eta: t.eta + h, ..t })? - end(&CogarchParams { eta: t.eta - h, ..t })?) / (2.0 * h);
        let fp = (end(&CogarchParams { phi: t.phi + h, ..t })? - end(&CogarchParams { phi: t.phi - h, ..t })?) / (2.0 * h);
        Ok(((fe - de).abs(), (fp - dp).abs()))
    };
    let (e1, p1) = err(1e-3)?;
    let (e2, p2) = err(1e-4)?;
    let (order_eta, order_phi) = ((e1 / e2).log10(), (p1 / p2).log10());

    let d = |s: f64| {
        gradient_binding_with_step(&t, &model, 1.0, 10, &BindingBackend::Analytic, s).map(|g| g.jacobian)
    };
    let (d1, d2, d3) = (
        d(4e-4).map_err(|e| e.to_string())?,
        d(2e-4).map_err(|e| e.to_string())?,
        d(1e-4).map_err(|e| e.to_string())?,
    );
    let order_binding = ((&d1 - &d2).norm() / (&d2 - &d3).norm()).log2();

    let grad = gradient_binding(&t, &model, 1.0, 70, &BindingBackend::Analytic).map_err(|e| e.to_string())?;
    let rank = numeric_rank(&grad.jacobian, 1e-10);

    check(
        order_eta >= 1.8 && order_phi >= 1.8 && order_binding >= 1.8 && rank == 3,
        format!(
            "pathwise orders (eta {order_eta:.2}, phi {order_phi:.2}), binding order {order_binding:.2}, rank {rank}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let runs = study_runs().as_ref().map_err(Clone::clone)?;
    let (a, b) = &runs.bytes;
    check(
        a == b,
        format!(
            "report.json {} bytes at 1 thread, {} bytes at 3 threads, identical: {} (study took {:.0} s)",
            a.len(),
            b.len(),
            a == b,
            runs.seconds
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "Laplace exponent at the reference parameters", criterion_1),
        (2, "metric arithmetic", criterion_2),
        (3, "moment identity and decay rate", criterion_3),
        (4, "desk-scale replication means", criterion_4),
        (5, "bias reduction of the simulation-based estimator", criterion_5),
        (6, "oracle and identity suite", criterion_6),
        (7, "gradient checks", criterion_7),
        (8, "determinism across thread counts", criterion_8),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} PASS [{name}] {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id} FAIL [{name}] {detail} ({secs:.1} s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
