use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use fairpath_bench::Fixture;
use fairpath_core::paths::estimate_constraint;
use fairpath_core::sim::{dgp_binary, dgp_main};
use fairpath_core::solver::{path_at, solve_grid};
use fairpath_core::{
    fit_nuisances, solve, ConstraintKind, ConstraintSpec, NuisanceConfig, RiskKind,
};

fn ate_mse(n: usize) -> Fixture {
    Fixture::new(
        ConstraintSpec::new(ConstraintKind::Ate, RiskKind::MeanSquaredError),
        dgp_main(n, 1),
    )
}

fn er_cases_ce(n: usize) -> Fixture {
    Fixture::new(
        ConstraintSpec::new(ConstraintKind::EqualizedRiskCases, RiskKind::CrossEntropy),
        dgp_binary(n, 1),
    )
}

fn nuisances(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_nuisances");
    for (name, f) in [
        ("ate_mse_1600", ate_mse(1600)),
        ("er_cases_ce_1600", er_cases_ce(1600)),
    ] {
        let config = NuisanceConfig::new(f.spec.constraint, f.spec.risk);
        g.bench_function(name, |b| {
            b.iter(|| fit_nuisances(black_box(&f.data), &config).unwrap())
        });
    }
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let mut g = c.benchmark_group("path_evaluation");
    for (name, f) in [
        ("ate_mse_1600", ate_mse(1600)),
        ("er_cases_ce_1600", er_cases_ce(1600)),
    ] {
        let p = path_at(&f.spec, &f.eta, 0.1).unwrap();
        g.bench_function(format!("{name}/predict_rows"), |b| {
            b.iter(|| p.predict_rows(black_box(&f.data)).unwrap())
        });
        g.bench_function(format!("{name}/plug_in"), |b| {
            b.iter(|| estimate_constraint(&f.spec, black_box(&p), &f.eta, &f.data).unwrap())
        });
    }
    g.finish();
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    g.sample_size(10);
    let closed = ate_mse(1600);
    g.bench_function("ate_mse_closed_form", |b| {
        b.iter(|| solve(&closed.spec, &closed.eta, &closed.data).unwrap())
    });
    g.bench_function("ate_mse_grid", |b| {
        b.iter(|| solve_grid(&closed.spec, &closed.eta, &closed.data, 0.0).unwrap())
    });
    let ce = er_cases_ce(1600);
    g.bench_function("er_cases_ce_grid", |b| {
        b.iter(|| solve(&ce.spec, &ce.eta, &ce.data).unwrap())
    });
    g.finish();
}

fn end_to_end(c: &mut Criterion) {
    let mut g = c.benchmark_group("fit_and_solve");
    g.sample_size(20);
    let spec = ConstraintSpec::new(ConstraintKind::Nde, RiskKind::MeanSquaredError);
    g.bench_function("nde_mse_1600", |b| {
        b.iter_batched(
            || dgp_main(1600, 3),
            |d| {
                let f = Fixture::new(spec.clone(), d);
                solve(&f.spec, &f.eta, &f.data).unwrap()
            },
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

criterion_group!(benches, nuisances, evaluation, solvers, end_to_end);
criterion_main!(benches);
