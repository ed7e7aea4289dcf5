use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dimer_sg::asymptotics::ScalingParams;
use dimer_sg::height_field::{smeared_two_point, SmearedField, TestFunction};
use dimer_sg::kernel_exact::{ia_cache_clear, ia_prefetch, WeightParams};
use dimer_sg::par;
use dimer_sg::sine_gordon::{sg_deriv_two_point, DerivKind, SGParams};

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn ia_batch(c: &mut Criterion) {
    let p = WeightParams::new(0.9).unwrap();
    let indices: Vec<(i64, i64)> = (0..24).flat_map(|k| (0..24).map(move |l| (k, l))).collect();
    let mut group = c.benchmark_group("ia_prefetch_24x24");
    group.sample_size(10);
    for (name, seq) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_sequential(seq);
            b.iter(|| {
                ia_cache_clear(&p);
                ia_prefetch(&indices, &p).unwrap();
            });
        });
    }
    par::set_sequential(false);
    group.finish();
}

fn smeared(c: &mut Criterion) {
    let s = ScalingParams::new(1.0 / 16.0, 1.0).unwrap();
    let p = s.weights();
    let f1 = TestFunction::directional((-1.0, 0.0), 0.5, 0.0, 1.0).unwrap();
    let f2 = TestFunction::directional((1.0, 0.0), 0.5, 0.0, 1.0).unwrap();
    let mut group = c.benchmark_group("smeared_a_height_eps16");
    group.sample_size(10);
    for (name, seq) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_sequential(seq);
            b.iter(|| {
                ia_cache_clear(&p);
                smeared_two_point(&f1, &f2, &s, SmearedField::AHeight).unwrap()
            });
        });
    }
    par::set_sequential(false);
    group.finish();
}

fn sg_pairing(c: &mut Criterion) {
    let sg = SGParams::from_lambda(1.0).unwrap();
    let f1 = TestFunction::bump((-1.0, 0.0), 0.5, 1.0).unwrap();
    let f2 = TestFunction::bump((1.0, 0.0), 0.5, 1.0).unwrap();
    let mut group = c.benchmark_group("sg_ddbar_pairing");
    group.sample_size(10);
    for (name, seq) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            par::set_sequential(seq);
            b.iter(|| sg_deriv_two_point(DerivKind::DDbar, &f1, &f2, &sg, 1e-3).unwrap());
        });
    }
    par::set_sequential(false);
    group.finish();
}

criterion_group!(benches, ia_batch, smeared, sg_pairing);
criterion_main!(benches);
