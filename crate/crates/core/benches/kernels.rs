//! Sequential versus rayon execution of the data-parallel kernels. Without
//! the `parallel` feature both variants run sequentially.

use std::hint::black_box;

use ccbs_core::evolution::{Device, PropagationOptions, DEFAULT_INPUTS, DEFAULT_MAX_POWER};
use ccbs_core::haarstats::{device_ensemble, haar_unitary};
use ccbs_core::interference::{distribution_on, sample, FockPattern, Statistics};
use ccbs_core::validation::{wrong_unitary_slope_histogram, InputModel, TestKind, Validator};
use ccbs_core::Execution;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn propagation(c: &mut Criterion) {
    let dev = Device::random(1, DEFAULT_MAX_POWER).unwrap();
    let mut g = c.benchmark_group("propagate_32_modes");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        let opts = PropagationOptions { execution: exec, ..PropagationOptions::steps(256) };
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| dev.unitary(black_box(&opts)).unwrap()));
    }
    g.finish();
}

fn three_photon_table(c: &mut Criterion) {
    let u = haar_unitary(32, 2).unwrap();
    let input = FockPattern::from_modes(32, &DEFAULT_INPUTS[..3]).unwrap();
    let outputs: Vec<usize> = (0..31).collect();
    let mut g = c.benchmark_group("distribution_3_photons");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| distribution_on(&u, &input, Statistics::Indistinguishable, true, &outputs, exec).unwrap())
        });
    }
    g.finish();
}

fn ensembles(c: &mut Criterion) {
    let dev = Device::reference(0).unwrap();
    let opts = PropagationOptions::steps(128);
    let u = haar_unitary(32, 3).unwrap();
    let input = FockPattern::from_modes(32, &DEFAULT_INPUTS[..3]).unwrap();
    let outputs: Vec<usize> = (0..31).collect();
    let table = distribution_on(&u, &input, Statistics::Indistinguishable, true, &outputs, Execution::default()).unwrap();
    let events = sample(&table, 4, 300).unwrap();
    let validator =
        Validator { kind: TestKind::Distinguishable, input: InputModel::Fixed(DEFAULT_INPUTS[..3].to_vec()), modes: 31 };
    let mut g = c.benchmark_group("ensembles");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::new("device_ensemble_8", name), |b| {
            b.iter(|| device_ensemble(&dev, DEFAULT_MAX_POWER, 8, 5, &opts, exec).unwrap())
        });
        g.bench_function(BenchmarkId::new("wrong_unitary_50", name), |b| {
            b.iter(|| wrong_unitary_slope_histogram(&events, &validator, &u, 50, 6, None, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, propagation, three_photon_table, ensembles);
criterion_main!(benches);
