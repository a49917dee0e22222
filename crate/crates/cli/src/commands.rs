use pnmtrem_core::data::{export, ingest_path, validate};
use pnmtrem_core::eb::{estimate_effects, probit_r2};
use pnmtrem_core::fit::fit as fit_model;
use pnmtrem_core::sim::{run_monte_carlo, simulate_panel};
use pnmtrem_core::{FitResult, ModelSpec, PanelData, ProbabilitySurface};

use crate::config::{RunConfig, DEFAULT_QUAD_ORDER};
use crate::report::{self, FitSummary, McInfo, MetricRow, RunSummary};
use crate::Fail;

fn load_panel(cfg: &RunConfig) -> Result<(PanelData, usize), Fail> {
    let input = cfg.require_input()?;
    let spec_path = cfg.require_spec()?;
    let spec = ModelSpec::load(spec_path).map_err(|e| Fail::data(format!("{}: {e}", spec_path.display())))?;
    let data = ingest_path(input, &spec).map_err(|e| Fail::data(format!("{}: {e}", input.display())))?;
    for flag in validate(&data).flags {
        eprintln!("warning: {flag}");
    }
    Ok((data, cfg.quad_order.unwrap_or(spec.quadrature_order)))
}

fn fit_and_report(cfg: &RunConfig, data: &PanelData, order: usize, summary: &mut RunSummary) -> Result<FitResult, Fail> {
    let f = fit_model(data, order, &cfg.controls)?;
    let rows = report::fit_rows(&f, &data.baseline_design().names, &data.main_design().names);
    print!("{}", report::fit_table(&f, &rows));
    report::write_csv(&cfg.out_file("fit_report.csv"), &rows)?;
    report::write_trace(&cfg.out_file("fit_trace.csv"), &f)?;
    summary.outputs.extend(["fit_report.csv".to_string(), "fit_trace.csv".to_string()]);
    summary.fit = Some(FitSummary::new(&f));
    Ok(f)
}

fn check_converged(f: &FitResult) -> Result<(), Fail> {
    if f.converged() {
        return Ok(());
    }
    Err(Fail::convergence(format!(
        "fit did not converge (baseline: {} iterations, max |score| {:.3e}; main: {} iterations, max |score| {:.3e}); \
         try raising --max-iter or loosening --tol-score",
        f.stage1.iterations, f.stage1.max_score, f.stage2.iterations, f.stage2.max_score
    )))
}

pub fn fit(cfg: &RunConfig) -> Result<(), Fail> {
    let (data, order) = load_panel(cfg)?;
    cfg.prepare_out()?;
    let mut summary = RunSummary::new("fit", None);
    let f = fit_and_report(cfg, &data, order, &mut summary)?;
    summary.outputs.push("run_summary.toml".into());
    summary.write(&cfg.out_file("run_summary.toml"))?;
    check_converged(&f)
}

pub fn simulate(cfg: &RunConfig) -> Result<(), Fail> {
    cfg.prepare_out()?;
    let data = simulate_panel(&cfg.truth, cfg.seed)?;
    let file = std::fs::File::create(cfg.out_file("panel.csv")).map_err(Fail::io)?;
    export(&data, std::io::BufWriter::new(file)).map_err(Fail::io)?;
    let spec = ModelSpec {
        quadrature_order: cfg.quad_order.unwrap_or(DEFAULT_QUAD_ORDER),
        ..data.spec()
    };
    std::fs::write(cfg.out_file("spec.toml"), spec.to_toml()).map_err(Fail::io)?;
    let mut summary = RunSummary::new("simulate", Some(cfg.seed));
    summary.outputs = vec!["panel.csv".into(), "spec.toml".into(), "run_summary.toml".into()];
    summary.write(&cfg.out_file("run_summary.toml"))?;
    println!(
        "simulated {} subjects x {} times x {} responses -> {}",
        data.n_subjects(),
        data.n_times(),
        data.n_responses(),
        cfg.out_file("panel.csv").display()
    );
    Ok(())
}

pub fn mc(cfg: &RunConfig) -> Result<(), Fail> {
    cfg.prepare_out()?;
    let order = cfg.quad_order.unwrap_or(DEFAULT_QUAD_ORDER);
    let s = run_monte_carlo(&cfg.truth, cfg.reps, cfg.seed, order, &cfg.controls)?;
    print!("{}", s.to_table());
    for (r, why) in &s.failures {
        eprintln!("warning: replication {r} failed: {why}");
    }
    let file = std::fs::File::create(cfg.out_file("mc_summary.csv")).map_err(Fail::io)?;
    s.write_csv(file).map_err(Fail::io)?;
    let mut summary = RunSummary::new("mc", Some(cfg.seed));
    summary.outputs = vec!["mc_summary.csv".into(), "run_summary.toml".into()];
    summary.monte_carlo = Some(McInfo {
        replications: s.n_reps,
        failed: s.failures.len(),
        subjects: cfg.truth.n_subjects,
        exact_delta: cfg.truth.exact_delta,
        shared_effect: cfg.truth.shared_effect,
    });
    summary.write(&cfg.out_file("run_summary.toml"))
}

pub fn predict(cfg: &RunConfig) -> Result<(), Fail> {
    let (data, order) = load_panel(cfg)?;
    cfg.prepare_out()?;
    let mut summary = RunSummary::new("predict", None);
    let f = fit_and_report(cfg, &data, order, &mut summary)?;
    check_converged(&f)?;
    let effects = estimate_effects(&f, &data);
    let stuck = effects.converged.iter().filter(|c| !**c).count();
    if stuck > 0 {
        eprintln!("warning: posterior mode search did not converge for {stuck} subjects");
    }
    let surface = ProbabilitySurface::compute(&f, &data, &effects);
    let file = std::fs::File::create(cfg.out_file("predictions.csv")).map_err(Fail::io)?;
    surface.write_csv(std::io::BufWriter::new(file)).map_err(Fail::io)?;

    let mut metrics = Vec::new();
    println!("\n{:<20} {:>8} {:>8}", "probability", "EPCP", "AUROC");
    for (name, m) in surface.accuracy()? {
        let auroc = m.auroc.map_or("NA".to_string(), |a| format!("{a:.4}"));
        println!("{name:<20} {:>8.4} {auroc:>8}", m.epcp);
        metrics.push(MetricRow {
            metric: "epcp",
            target: name.into(),
            value: Some(m.epcp),
        });
        metrics.push(MetricRow {
            metric: "auroc",
            target: name.into(),
            value: m.auroc,
        });
    }
    println!("\n{:<10} {:<8} {:>8}", "response", "period", "R2");
    for r in probit_r2(&surface, data.n_responses()) {
        let v = r.r2.map_or("NA".to_string(), |x| format!("{x:.4}"));
        println!("{:<10} {:<8} {v:>8}", r.response, r.period);
        metrics.push(MetricRow {
            metric: "r2",
            target: format!("response {} {}", r.response, r.period),
            value: r.r2,
        });
    }
    report::write_csv(&cfg.out_file("prediction_metrics.csv"), &metrics)?;
    summary.outputs.extend([
        "predictions.csv".to_string(),
        "prediction_metrics.csv".to_string(),
        "run_summary.toml".to_string(),
    ]);
    summary.metrics = Some(metrics);
    summary.write(&cfg.out_file("run_summary.toml"))
}
