use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use maskalign::proto::{proto_loss_grad, AlignConfig};
use maskalign::{overlap_filter, refine, seeds_partition, RefineParams, SeedsParams};
use maskalign_bench as fx;

fn filter(c: &mut Criterion) {
    let mut group = c.benchmark_group("overlap_filter");
    for n in [32, 128, 512] {
        let set = fx::rectangle_masks(&mut fx::rng(n as u64), 256, 512, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &set, |b, set| {
            b.iter(|| overlap_filter(set).unwrap())
        });
    }
    group.finish();
}

fn superpixels(c: &mut Criterion) {
    let mut group = c.benchmark_group("seeds");
    group.sample_size(10);
    let img = fx::blocky_image(&mut fx::rng(1), 256, 512);
    for k in [100, 1000] {
        let params = SeedsParams::with_superpixels(k);
        group.bench_with_input(BenchmarkId::from_parameter(k), &params, |b, p| {
            b.iter(|| seeds_partition(&img, p).unwrap())
        });
    }
    group.finish();
}

fn refinement(c: &mut Criterion) {
    let p = fx::probmap(&mut fx::rng(2), 256, 512, 19);
    let ids = fx::striped_ids(256, 512, 100);
    let params = RefineParams::default();
    c.bench_function("refine/256x512x19", |b| {
        b.iter(|| refine(&p, &ids, &params).unwrap())
    });
}

fn loss_gradient(c: &mut Criterion) {
    let f = fx::loss_fixture(&mut fx::rng(3), 64, 128, 64, 19);
    let cfg = AlignConfig::default();
    c.bench_function("proto_loss_grad/64x128x64", |b| {
        b.iter(|| proto_loss_grad(&f.z, &f.bank, &f.labels, &cfg).unwrap())
    });
}

criterion_group!(benches, filter, superpixels, refinement, loss_gradient);
criterion_main!(benches);
