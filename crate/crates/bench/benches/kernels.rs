use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use deixis_bench::{keypoints, ray_fan, unit_boxes, RAW_OUTPUTS};
use deixis_core::eval::extract_choice;
use deixis_core::hint::{adapter_backward, adapter_forward, AdapterParams, GateConfig};
use deixis_core::ray_aabb_intersect;

fn ray_aabb(c: &mut Criterion) {
    let (rays, boxes) = (ray_fan(256), unit_boxes(16));
    c.bench_function("ray_aabb 256x16", |b| {
        b.iter(|| {
            let mut hits = 0;
            for r in &rays {
                for bx in &boxes {
                    hits += ray_aabb_intersect(black_box(r), black_box(bx)).is_some() as usize;
                }
            }
            hits
        })
    });
}

fn adapter(c: &mut Criterion) {
    let k = keypoints();
    let gate = GateConfig::new(0.5).expect("valid tau");
    let mut g = c.benchmark_group("adapter");
    for (d_h, d) in [(32, 64), (256, 1024)] {
        let params = AdapterParams::init(d_h, d, 1);
        let upstream = vec![1.0; d];
        g.bench_with_input(BenchmarkId::new("forward", format!("{d_h}x{d}")), &params, |b, p| {
            b.iter(|| adapter_forward(p, black_box(&k), 0.9, &gate).expect("valid params"))
        });
        g.bench_with_input(BenchmarkId::new("backward", format!("{d_h}x{d}")), &params, |b, p| {
            b.iter(|| adapter_backward(p, black_box(&k), 0.9, &gate, &upstream).expect("open gate"))
        });
    }
    g.finish();
}

fn extraction(c: &mut Criterion) {
    c.bench_function("extract_choice x6", |b| {
        b.iter(|| RAW_OUTPUTS.iter().filter_map(|r| extract_choice(black_box(r), 5)).count())
    });
}

criterion_group!(benches, ray_aabb, adapter, extraction);
criterion_main!(benches);
