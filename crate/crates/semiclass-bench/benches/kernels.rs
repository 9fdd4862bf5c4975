//! Microbenchmarks for the kernels that dominate production runs: sample
//! generation, trajectory steps, correction-ODE steps, and the grid solver.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use semiclass::flow::{CorrectionPropagator, Yoshida6};
use semiclass::normal::inverse_normal_cdf;
use semiclass::prelude::*;
use semiclass::sobol::SobolGenerator;
use std::hint::black_box;

fn torsional_model(eps: f64) -> HamiltonianModel {
    HamiltonianModel::new(TorsionalPotential::new(2).into_shared(), eps).unwrap()
}

fn bench_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sampling");
    let seq = SobolGenerator::new(4).unwrap();
    let mut out = [0.0; 4];
    group.bench_function("sobol_point_4d", |b| {
        let mut index = 1u64;
        b.iter(|| {
            seq.point_into(index, &mut out);
            index += 1;
            black_box(out[3])
        })
    });
    group.bench_function("inverse_normal_cdf", |b| {
        let mut p = 0.000001;
        b.iter(|| {
            // Sweep across the central and tail branches.
            p = if p < 0.999 { p + 0.001 } else { 0.000001 };
            black_box(inverse_normal_cdf(black_box(p)))
        })
    });
    group.finish();
}

fn bench_flow(c: &mut Criterion) {
    let mut group = c.benchmark_group("flow");
    let model = torsional_model(0.01);

    group.bench_function("yoshida6_step_d2", |b| {
        let mut stepper = Yoshida6::new(&model, ForceField::Corrected);
        let mut q = [1.0, 0.0];
        let mut p = [0.0, 0.3];
        b.iter(|| {
            stepper.step(&mut q, &mut p, 1e-3);
            black_box(q[0])
        })
    });

    group.bench_function("strang_correction_step_d2", |b| {
        let z0 = PhasePoint::new(vec![1.0, 0.0], vec![0.0, 0.3]).unwrap();
        b.iter_batched(
            || (CorrectionPropagator::new(&model, ForceField::Corrected), CorrectionState::new(z0.clone())),
            |(mut prop, mut state)| {
                for _ in 0..16 {
                    prop.step(&mut state, 1e-3).unwrap();
                }
                black_box(state.z.q[0])
            },
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn bench_grid(c: &mut Criterion) {
    let mut group = c.benchmark_group("grid");
    group.sample_size(20);
    let model = torsional_model(0.05);
    let z0 = PhasePoint::new(vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
    let psi = GaussianSuperposition::single(z0, 0.05).unwrap();
    let state = GridState::from_state(&psi, 3.0, 256).unwrap();
    let prop = SplitStepPropagator::new(&model, &state, 1e-3).unwrap();
    group.bench_function("split_step_256sq", |b| {
        b.iter_batched(
            || state.clone(),
            |mut s| {
                prop.propagate(&mut s, 4).unwrap();
                black_box(s.norm_sq())
            },
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_sampling, bench_flow, bench_grid);
criterion_main!(benches);
