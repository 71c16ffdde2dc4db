use criterion::{black_box, criterion_group, criterion_main, Criterion};
use crouchnav::planner::{plan_local, plan_reactive, PlannerConfig};
use crouchnav::router::{astar, RouteOptions};
use crouchnav::CommandSet;
use crouchnav_bench::{local_case, reactive_case, route_grid};

fn reactive(c: &mut Criterion) {
    let set = CommandSet::default_flat();
    let cfg = PlannerConfig::default();
    let (x0, target, view) = reactive_case(&set);
    c.bench_function("reactive_solve", |b| {
        b.iter(|| plan_reactive(black_box(&x0), &target, &view, &cfg, &set, None).unwrap())
    });
}

fn local(c: &mut Criterion) {
    let set = CommandSet::default_flat();
    let cfg = PlannerConfig::default();
    let (x0, goal, view) = local_case();
    let mut group = c.benchmark_group("local");
    group.sample_size(20);
    group.bench_function("local_solve", |b| {
        b.iter(|| plan_local(black_box(&x0), goal, &view, &cfg, &set, None).unwrap())
    });
    group.finish();
}

fn route(c: &mut Criterion) {
    let g = route_grid();
    let opts = RouteOptions::default();
    c.bench_function("astar_40x40", |b| b.iter(|| astar(black_box(&g), [0.25, 0.25], [19.75, 19.75], &opts).unwrap()));
}

criterion_group!(benches, reactive, local, route);
criterion_main!(benches);
