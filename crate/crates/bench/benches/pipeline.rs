use criterion::{criterion_group, criterion_main, Criterion};
use prnu_core::denoise::{residual, DenoiseConfig};
use prnu_core::fingerprint::{estimate_camera_fingerprint, NuaConfig, SaturationRule};
use prnu_core::matching::{cross_correlation_plane, signed_pce, MatchConfig};
use prnu_core::sim::{render, ExposureModel, SceneGenerator, SceneModel, SyntheticCamera};
use prnu_core::Image;
use std::hint::black_box;

const SIDE: usize = 256;

fn images(n: usize) -> Vec<Image> {
    let cam = SyntheticCamera::new((SIDE, SIDE), 0.02, 1);
    (0..n as u64)
        .map(|s| {
            let scene = SceneModel::generate(SceneGenerator::NaturalMix, (SIDE, SIDE), s);
            render(&cam, &scene, &ExposureModel::auto(), s)
        })
        .collect()
}

fn bench_denoise(c: &mut Criterion) {
    let img = images(1).remove(0);
    let cfg = DenoiseConfig::default();
    c.bench_function("residual_256", |b| b.iter(|| residual(black_box(img.pixels()), &cfg).unwrap()));
}

fn bench_pce(c: &mut Criterion) {
    let imgs = images(2);
    let (a, b) = (imgs[0].pixels(), imgs[1].pixels());
    let cfg = MatchConfig::default();
    c.bench_function("correlation_pce_256", |bench| {
        bench.iter(|| {
            let plane = cross_correlation_plane(black_box(a), black_box(b)).unwrap();
            signed_pce(&plane, &cfg).unwrap()
        })
    });
}

fn bench_fingerprint(c: &mut Criterion) {
    let imgs = images(8);
    let (d, n, s) = (DenoiseConfig::default(), NuaConfig::default(), SaturationRule::default());
    let mut group = c.benchmark_group("fingerprint");
    group.sample_size(10);
    group.bench_function("mle_8x256", |b| b.iter(|| estimate_camera_fingerprint(black_box(&imgs), &d, &n, &s).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_denoise, bench_pce, bench_fingerprint);
criterion_main!(benches);
