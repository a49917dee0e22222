use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pnmtrem_core::fit::{fit, FitControls};
use pnmtrem_core::kernels::gauss_hermite;
use pnmtrem_core::likelihood::{loglik_baseline, loglik_main, score_baseline, score_main};
use pnmtrem_core::sim::{simulate_panel, TruthConfig};
use pnmtrem_core::ConstraintSolution;
use pnmtrem_core::{Anchor, PanelData};
use std::hint::black_box;

fn panel(n: usize) -> (TruthConfig, PanelData) {
    let truth = TruthConfig {
        n_subjects: n,
        ..TruthConfig::default()
    };
    let data = simulate_panel(&truth, 1).unwrap();
    (truth, data)
}

fn stages(c: &mut Criterion) {
    let (truth, data) = panel(250);
    let bp = truth.baseline_params();
    let mp = truth.main_params();
    let cs = ConstraintSolution::compute(&data, &Anchor::zero_for(&data), &bp.beta_star).unwrap();
    let mut g = c.benchmark_group("stage");
    for order in [12, 20, 40] {
        let rule = gauss_hermite(order).unwrap();
        g.bench_with_input(BenchmarkId::new("loglik_baseline", order), &rule, |b, r| {
            b.iter(|| loglik_baseline(black_box(&bp), &data, r).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("score_baseline", order), &rule, |b, r| {
            b.iter(|| score_baseline(black_box(&bp), &data, r).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("loglik_main", order), &rule, |b, r| {
            b.iter(|| loglik_main(black_box(&mp), &data, r, &cs).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("score_main", order), &rule, |b, r| {
            b.iter(|| score_main(black_box(&mp), &data, r, &cs).unwrap())
        });
    }
    g.finish();
}

fn constraint(c: &mut Criterion) {
    let (truth, data) = panel(250);
    let bp = truth.baseline_params();
    c.bench_function("constraint_solution_250", |b| {
        b.iter(|| ConstraintSolution::compute(&data, &Anchor::zero_for(&data), black_box(&bp.beta_star)).unwrap())
    });
}

fn full_fit(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit");
    g.sample_size(10);
    for n in [100, 250] {
        let (_, data) = panel(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &data, |b, d| {
            b.iter(|| fit(d, 20, &FitControls::default()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, stages, constraint, full_fit);
criterion_main!(benches);
