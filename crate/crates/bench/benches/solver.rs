use criterion::{black_box, criterion_group, criterion_main, Criterion};

use trailstop::diffusion::FundamentalPair;
use trailstop::fixed_stop::solve_fixed_stop;
use trailstop::simulate::{simulate_value, PathConfig, StrategySpec};
use trailstop::specialfn::parabolic_cylinder_log;
use trailstop::trailing_stop::{solve_trailing_acquisition, solve_trailing_stop};
use trailstop_bench::{floor, model, transform, ALPHA, C0, Q};

fn special(c: &mut Criterion) {
    let xs: Vec<f64> = (0..64).map(|i| -12.0 + 0.375 * i as f64).collect();
    c.bench_function("parabolic_cylinder_log x64", |b| {
        b.iter(|| {
            xs.iter()
                .map(|&x| parabolic_cylinder_log(black_box(-1.0 / 12.0), x).unwrap().ln_abs)
                .sum::<f64>()
        })
    });
}

fn pair(c: &mut Criterion) {
    let m = model();
    c.bench_function("fundamental_pair", |b| b.iter(|| FundamentalPair::new(black_box(&m), Q).unwrap()));
    let p = FundamentalPair::new(&m, Q).unwrap();
    c.bench_function("psi_inverse", |b| b.iter(|| p.psi_inverse(black_box(1.02)).unwrap()));
}

fn solvers(c: &mut Criterion) {
    let t = transform();
    let f = floor();
    c.bench_function("solve_fixed_stop", |b| b.iter(|| solve_fixed_stop(&t, black_box(1.5)).unwrap()));
    c.bench_function("solve_trailing_stop", |b| b.iter(|| solve_trailing_stop(&t, black_box(&f)).unwrap()));
    let sol = solve_trailing_stop(&t, &f).unwrap();
    c.bench_function("solve_trailing_acquisition", |b| {
        b.iter(|| solve_trailing_acquisition(&sol, Q, black_box(2.0 * C0)).unwrap())
    });
}

fn monte_carlo(c: &mut Criterion) {
    let t = transform();
    let sol = solve_trailing_stop(&t, &floor()).unwrap();
    let strat = StrategySpec::optimal_trailing(&sol, 2.6, 2.6).unwrap();
    let cfg = PathConfig::new(model(), 1e-3, PathConfig::horizon_for_rate(Q), 7, 8192).unwrap();
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    g.bench_function(format!("trailing alpha={ALPHA} 8192 paths"), |b| {
        b.iter(|| simulate_value(&cfg, t.reward(), &strat, Q).unwrap())
    });
    g.finish();
}

criterion_group!(benches, special, pair, solvers, monte_carlo);
criterion_main!(benches);
