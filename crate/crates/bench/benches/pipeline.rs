use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lmgen_bench::{distances, genes, profiles, roster};
use lmgen_core::phylo::{nei_similarity, similarity_matrix};
use lmgen_core::population::{collect_profile, CollectOptions};
use lmgen_core::predict::fit_ica;
use lmgen_core::tree::nj_tree;

fn probing(c: &mut Criterion) {
    let models = roster(2, 128);
    let genes = genes(128);
    let mut group = c.benchmark_group("collect_profile");
    for probes in [8u64, 32] {
        group.bench_with_input(BenchmarkId::from_parameter(probes), &probes, |b, &n| {
            b.iter(|| collect_profile("m", &models[0], &genes, 4, &CollectOptions::new(n)).unwrap())
        });
    }
    group.finish();
}

fn similarity(c: &mut Criterion) {
    let genes = genes(128);
    let profs = profiles(&roster(16, 128), &genes, 32);
    c.bench_function("nei_similarity/pair", |b| {
        b.iter(|| nei_similarity(black_box(&profs[0]), black_box(&profs[1])).unwrap())
    });
    c.bench_function("similarity_matrix/16", |b| {
        b.iter(|| similarity_matrix(black_box(&profs)).unwrap())
    });
}

fn trees(c: &mut Criterion) {
    let genes = genes(64);
    let mut group = c.benchmark_group("nj_tree");
    for leaves in [8usize, 32, 64] {
        let d = distances(&profiles(&roster(leaves, 64), &genes, 16));
        group.bench_with_input(BenchmarkId::from_parameter(leaves), &d, |b, d| {
            b.iter(|| nj_tree(d).unwrap())
        });
    }
    group.finish();
}

fn ica(c: &mut Criterion) {
    let genes = genes(64);
    let profs = profiles(&roster(48, 64), &genes, 16);
    let s = similarity_matrix(&profs).unwrap();
    let n = profs.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| s.0.row(i).to_vec()).collect();
    c.bench_function("fit_ica/48x15", |b| {
        b.iter(|| fit_ica(black_box(&rows), 15, 0).unwrap())
    });
}

criterion_group!(benches, probing, similarity, trees, ica);
criterion_main!(benches);
