use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use gridfault::estimator::{build_estimator_bank, default_partition, BankOptions, EstimatorBank};
use gridfault::grid::NetworkModel;
use gridfault::par::Exec;
use gridfault::simulator::{placed_benchmark, BenchmarkGrounding, FrameSource, NoiseSpec, Scenario};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn benchmark_bank(exec: Exec) -> (NetworkModel, EstimatorBank) {
    let net = placed_benchmark(BenchmarkGrounding::Compensated).unwrap().net;
    let opts = BankOptions {
        exec,
        ..BankOptions::default()
    };
    let bank = build_estimator_bank(&net, &default_partition(&net).unwrap(), &opts).unwrap();
    (net, bank)
}

fn evaluate(c: &mut Criterion) {
    let (net, mut bank) = benchmark_bank(Exec::Sequential);
    let frames: Vec<_> = FrameSource::new(&Scenario::no_fault(net, 64, NoiseSpec::with_seed(1)))
        .unwrap()
        .collect();
    let zs: Vec<_> = frames.iter().map(|f| bank.z(f).unwrap()).collect();

    let mut g = c.benchmark_group("bank_evaluate");
    g.sample_size(20);
    for (name, exec) in MODES {
        bank.exec = exec;
        g.bench_function(BenchmarkId::new("members", name), |b| b.iter(|| bank.evaluate(&zs[0])));
    }
    bank.exec = Exec::Sequential;
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("frames_64", name), |b| {
            b.iter(|| exec.map(&zs, |z| bank.evaluate(z)))
        });
    }
    g.finish();
}

fn build(c: &mut Criterion) {
    // 40-bus chain, every other bus metered
    let mut net = NetworkModel::chain(40, Complex64::new(0.2, 0.15), Complex64::new(0.6, 0.4));
    net.monitored = (1..=40).filter(|b| b % 2 == 1 || *b == 40).collect();
    let part = default_partition(&net).unwrap();

    let mut g = c.benchmark_group("bank_build");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = BankOptions {
            exec,
            ..BankOptions::default()
        };
        g.bench_function(BenchmarkId::new("chain_40", name), |b| {
            b.iter(|| build_estimator_bank(&net, &part, &opts).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, evaluate, build);
criterion_main!(benches);
