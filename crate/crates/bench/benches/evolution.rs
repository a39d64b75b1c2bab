use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use passage_bench::{broken_schedule, fock_fixture, integrator};
use passage_core::evolution::evolve_ket;
use passage_core::frames::frame_unitary;
use passage_core::pulses::synthesize_pulses;
use passage_core::spectrum::eigenvalues;
use std::hint::black_box;

fn ket_evolution(c: &mut Criterion) {
    let s = broken_schedule(1.2);
    let mut g = c.benchmark_group("evolve_ket");
    g.sample_size(10);
    for cutoff in [5, 10, 20] {
        let (space, psi) = fock_fixture(cutoff, 5);
        for block in [true, false] {
            let cfg = integrator(50, block);
            let id = BenchmarkId::new(if block { "sector" } else { "full" }, cutoff);
            g.bench_with_input(id, &cutoff, |b, _| b.iter(|| evolve_ket(&space, &s, &psi, &cfg).unwrap()));
        }
    }
    g.finish();
}

fn pulses(c: &mut Criterion) {
    let s = broken_schedule(1.2);
    c.bench_function("synthesize_pulses", |b| b.iter(|| synthesize_pulses(&s, black_box(0.37)).unwrap()));
    c.bench_function("eigenvalues", |b| b.iter(|| eigenvalues(&s, black_box(0.37)).unwrap()));
}

fn frame_expm(c: &mut Criterion) {
    let s = broken_schedule(1.2);
    let mut g = c.benchmark_group("frame_unitary");
    for cutoff in [4, 8] {
        let (space, _) = fock_fixture(cutoff, 0);
        g.bench_with_input(BenchmarkId::from_parameter(cutoff), &cutoff, |b, _| b.iter(|| frame_unitary(&space, &s.frame(), black_box(0.37)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, ket_evolution, pulses, frame_expm);
criterion_main!(benches);
