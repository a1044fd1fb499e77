use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hbrisk::domain::make_compound_symmetry;
use hbrisk::mc::{mc_integrated_risk, MuLaw, SimPlan};
use hbrisk::par::map_indexed;
use hbrisk::quad::QuadratureSettings;
use hbrisk::risk::risk_diff_h;
use rayon::ThreadPool;

fn pools() -> Vec<(String, ThreadPool)> {
    let default = rayon::current_num_threads();
    [1, default]
        .into_iter()
        .map(|t| {
            let name = if t == 1 {
                "sequential".to_string()
            } else {
                format!("{t}_threads")
            };
            (
                name,
                rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .unwrap(),
            )
        })
        .collect()
}

fn monte_carlo(c: &mut Criterion) {
    let settings = QuadratureSettings::default();
    let law = MuLaw::CompoundSymmetry(make_compound_symmetry(20, 5, 0.3).unwrap());
    let plan = SimPlan::new(20_000, 1);
    let mut group = c.benchmark_group("mc_rao_blackwell");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| mc_integrated_risk(&law, &plan, &settings).unwrap()))
        });
    }
    group.finish();
}

fn rho_sweep(c: &mut Criterion) {
    let settings = QuadratureSettings::default();
    let mut group = c.benchmark_group("h_sweep");
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                pool.install(|| {
                    map_indexed(101, |i| {
                        let cs =
                            make_compound_symmetry(100, 20, -0.01 + 0.0098 * i as f64).unwrap();
                        risk_diff_h(&cs, &settings).unwrap().value
                    })
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, rho_sweep);
criterion_main!(benches);
