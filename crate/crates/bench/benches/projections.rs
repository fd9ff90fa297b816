// SPDX-License-Identifier: Apache-2.0

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use conelrt::{estimate_conic_summary, lrs, NullSpec};
use conelrt_bench::{gaussian, sets};

fn projections(c: &mut Criterion) {
    let mut group = c.benchmark_group("project");
    for n in [100usize, 400] {
        let y = gaussian(n, 1);
        for (name, set) in sets(n).expect("sets build") {
            group.bench_with_input(BenchmarkId::new(name, n), &y, |b, y| {
                b.iter(|| set.project(black_box(y)).expect("projection"))
            });
        }
    }
    group.finish();
}

fn statistic(c: &mut Criterion) {
    let n = 400;
    let y = gaussian(n, 2);
    let null = NullSpec::zero(n);
    let mut group = c.benchmark_group("lrs");
    for (name, set) in sets(n).expect("sets build") {
        group.bench_function(name, |b| b.iter(|| lrs(&set, &null, black_box(&y)).expect("statistic")));
    }
    group.finish();
}

fn statdim(c: &mut Criterion) {
    let mut group = c.benchmark_group("statdim");
    group.sample_size(10);
    let set = conelrt::ConstraintSet::monotone(1000).expect("set");
    group.bench_function("monotone-1000x1000", |b| {
        b.iter(|| estimate_conic_summary(&set, 1000, black_box(7)).expect("estimate"))
    });
    group.finish();
}

criterion_group!(benches, projections, statistic, statdim);
criterion_main!(benches);
