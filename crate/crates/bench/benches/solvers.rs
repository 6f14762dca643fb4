use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rangereg::rsvd::rsvd_auto;
use rangereg::solvers::{rsvd_tikhonov_projected, rsvd_tikhonov_range, tikhonov_solve_direct};
use rangereg::{InverseProblem, NoiseSpec, ProblemName, RsvdConfig};

const SIZES: [usize; 3] = [250, 500, 1000];

fn problem(n: usize) -> InverseProblem {
    InverseProblem::generate(ProblemName::Deriv2, n, &NoiseSpec::new(0.01, 1)).unwrap()
}

fn sketch(c: &mut Criterion) {
    let mut group = c.benchmark_group("rsvd");
    for n in SIZES {
        let p = problem(n);
        let cfg = RsvdConfig::new(20, 1).with_oversampling(5);
        group.bench_with_input(BenchmarkId::from_parameter(n), &p, |bch, p| {
            bch.iter(|| rsvd_auto(&p.a, &cfg).unwrap())
        });
    }
    group.finish();
}

fn tikhonov(c: &mut Criterion) {
    let mut group = c.benchmark_group("tikhonov");
    group.sample_size(10);
    for n in SIZES {
        let p = problem(n);
        let alpha = 1e-6 * rangereg::linalg::spectral_norm(&p.a).unwrap().powi(2);
        let cfg = RsvdConfig::new(20, 1).with_oversampling(5);
        group.bench_with_input(BenchmarkId::new("direct", n), &p, |bch, p| {
            bch.iter(|| tikhonov_solve_direct(&p.a, &p.b, alpha).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("projected", n), &p, |bch, p| {
            bch.iter(|| {
                let f = rsvd_auto(&p.a, &cfg).unwrap();
                rsvd_tikhonov_projected(&f, &p.b, alpha).unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("range", n), &p, |bch, p| {
            bch.iter(|| {
                let f = rsvd_auto(&p.a, &cfg).unwrap();
                rsvd_tikhonov_range(&p.a, &f, &p.b, alpha).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sketch, tikhonov);
criterion_main!(benches);
