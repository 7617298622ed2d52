use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use wildskill_bench::Fixture;
use wildskill_core::camera::render_frame;
use wildskill_core::sim;

fn sim_step(c: &mut Criterion) {
    let f = Fixture::new(0);
    let action = f.policy.act_deterministic(&f.obs).unwrap();
    c.bench_function("sim_step", |b| {
        b.iter_batched_ref(
            || f.state.clone(),
            |s| sim::step(s, black_box(&action), &f.robot).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
}

fn render(c: &mut Criterion) {
    let f = Fixture::new(0);
    c.bench_function("render_frame", |b| b.iter(|| render_frame(black_box(&f.state), &f.robot, &f.cam)));
}

fn classifier_forward(c: &mut Criterion) {
    let f = Fixture::new(0);
    c.bench_function("classifier_clip", |b| b.iter(|| f.classifier.probs(black_box(&f.clip)).unwrap()));
}

fn policy_forward(c: &mut Criterion) {
    let f = Fixture::new(0);
    c.bench_function("policy_act", |b| b.iter(|| f.policy.act_deterministic(black_box(&f.obs)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = sim_step, render, classifier_forward, policy_forward
}
criterion_main!(benches);
