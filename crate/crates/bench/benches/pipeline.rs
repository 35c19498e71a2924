use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use hyperank::corpus::gold_labels;
use hyperank::eval::evaluate;
use hyperank::negsampler::generate_pairs;
use hyperank::trainer::{contrastive_loss, mnr_loss, train};
use hyperank::{hash_embed, HashEmbedder, ProjectionModel, TrainConfig};
use hyperank_bench::{finsim_taxonomy, ranked, records};

fn bench_hash_embed(c: &mut Criterion) {
    let mut group = c.benchmark_group("hash_embed");
    for dim in [64, 256, 768] {
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, &dim| {
            b.iter(|| hash_embed(black_box("interest rate swap with quarterly resets"), dim, 0))
        });
    }
    group.finish();
}

fn bench_generate_pairs(c: &mut Criterion) {
    let tax = finsim_taxonomy();
    let recs = records(1000, &tax);
    c.bench_function("generate_pairs/1000x11", |b| {
        b.iter(|| generate_pairs(black_box(&recs), &tax, 0.4, 10, 7).unwrap())
    });
}

fn batch(dim: usize, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..n)
        .map(|i| {
            (
                hash_embed(&format!("term {i}"), dim, 0),
                hash_embed(&format!("label {i}"), dim, 0),
            )
        })
        .collect()
}

fn bench_losses(c: &mut Criterion) {
    let dim = 256;
    let model = ProjectionModel::identity_padded(dim, dim).unwrap();
    let data = batch(dim, 20);
    let pairs: Vec<(&[f64], &[f64])> = data.iter().map(|(a, b)| (a.as_slice(), b.as_slice())).collect();
    let labeled: Vec<(&[f64], &[f64], bool)> = pairs
        .iter()
        .enumerate()
        .map(|(i, (a, b))| (*a, *b, i % 3 == 0))
        .collect();
    c.bench_function("mnr_loss/b20_d256", |b| {
        b.iter(|| mnr_loss(&model, black_box(&pairs), 20.0).unwrap())
    });
    c.bench_function("contrastive_loss/b20_d256", |b| {
        b.iter(|| contrastive_loss(&model, black_box(&labeled), 0.5).unwrap())
    });
}

fn bench_train_epoch(c: &mut Criterion) {
    let tax = finsim_taxonomy();
    let recs = records(100, &tax);
    let pairs = generate_pairs(&recs, &tax, 0.4, 10, 1).unwrap();
    let emb = HashEmbedder::new(128, 0).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("epoch/1100_pairs_d128", |b| {
        b.iter(|| train(black_box(&pairs), &emb, &cfg).unwrap())
    });
    group.finish();
}

fn bench_evaluate(c: &mut Criterion) {
    let tax = finsim_taxonomy();
    let recs = records(5000, &tax);
    let lists = ranked(&recs, &tax);
    let gold = gold_labels(&recs);
    c.bench_function("evaluate/5000", |b| {
        b.iter(|| evaluate(black_box(&lists), &gold, 3).unwrap())
    });
}

criterion_group!(
    benches,
    bench_hash_embed,
    bench_generate_pairs,
    bench_losses,
    bench_train_epoch,
    bench_evaluate
);
criterion_main!(benches);
