//! Hot kernels: TT sampling and likelihood gradients, spiking forward
//! passes, procedural decoding and a short PROTES run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spikemei::snn::toy;
use spikemei::stimulus::Procedural;
use spikemei::{optimize, Canvas, Generator, LatentGrid, LatentIndex, Method, ObjectiveAdapter, ProtesConfig, TensorTrain, Target};

fn tensor_train(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tt = TensorTrain::random(&[16; 8], 5, 0.0, 1.0, &mut rng).unwrap();
    c.bench_function("tt_sample_100_16x8_r5", |b| b.iter(|| tt.sample(100, &mut rng).unwrap()));
    let batch = tt.sample(10, &mut rng).unwrap();
    c.bench_function("tt_grad_10_16x8_r5", |b| b.iter(|| tt.log_likelihood_grad(black_box(&batch)).unwrap()));
}

fn spiking(c: &mut Criterion) {
    let net = toy::network(0).unwrap();
    let x = toy::pattern(1, 0, 0);
    c.bench_function("toy_forward_t50", |b| b.iter(|| net.counts(black_box(&x)).unwrap()));
    c.bench_function("toy_activation_t50", |b| {
        b.iter(|| net.activation(black_box(&x), Target { layer: 2, neuron: 1 }).unwrap())
    });
}

fn decoding(c: &mut Criterion) {
    let g = Procedural::new(LatentGrid::new(8, 16).unwrap(), Canvas::new(32, 32, 3).unwrap()).unwrap();
    let index = LatentIndex(vec![3, 9, 1, 15, 4, 12, 7, 2]);
    c.bench_function("procedural_decode_32x32x3", |b| b.iter(|| g.decode(black_box(&index)).unwrap()));
}

fn protes(c: &mut Criterion) {
    let peak = [2usize, 7, 1, 5, 0, 6];
    let f = |i: &LatentIndex| -> f64 {
        -i.digits().iter().zip(&peak).map(|(&a, &b)| (a as f64 - b as f64).abs()).sum::<f64>()
    };
    let mut group = c.benchmark_group("protes_500_evals_8x6");
    group.sample_size(20);
    for m in Method::PROTES_PRESETS {
        group.bench_function(m.name(), |b| {
            b.iter_batched(
                || ObjectiveAdapter::new(&f, 500),
                |adapter| optimize(m, &adapter, &[8; 6], &ProtesConfig::default()).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, tensor_train, spiking, decoding, protes);
criterion_main!(benches);
