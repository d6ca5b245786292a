use std::hint::black_box;

use assoclt::blocking::BlockSums;
use assoclt::exec::pairwise_sum;
use assoclt::generators::map_replicates;
use assoclt::model::{make_block_scheme, BlockRule, FamilySpec};
use assoclt::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn partial_sums(c: &mut Criterion) {
    let mut g = c.benchmark_group("partial_sums");
    g.sample_size(10);
    for (name, fam) in [("iid_normal", FamilySpec::iid_normal()), ("geo_gauss", FamilySpec::geometric_gaussian(0.5))] {
        for (mode, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(format!("{name}/{mode}"), 4096), &exec, |b, &exec| {
                b.iter(|| map_replicates(&fam, 4096, 1000, black_box(7), exec, |_, x| pairwise_sum(x)).unwrap())
            });
        }
    }
    g.finish();
}

fn block_sums(c: &mut Criterion) {
    let mut g = c.benchmark_group("block_sums");
    g.sample_size(10);
    let fam = FamilySpec::markov(0.9, 0.8, true);
    let scheme = make_block_scheme(16384, &BlockRule::Power { alpha: 0.5 }).unwrap();
    for (mode, exec) in MODES {
        g.bench_function(mode, |b| b.iter(|| BlockSums::collect(&fam, &scheme, 500, black_box(3), exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, partial_sums, block_sums);
criterion_main!(benches);
