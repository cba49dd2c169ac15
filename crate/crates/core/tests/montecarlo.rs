use flatspot::density::assemble;
use flatspot::montecarlo::{
    collect_samples, compare, ks_between, run, run_with_threads, SimulationConfig,
    DEFAULT_ENTRY_CAP,
};

fn config(samples: u64, iterations: u64, seed: u64) -> SimulationConfig {
    SimulationConfig {
        samples,
        iterations,
        entry_cap: DEFAULT_ENTRY_CAP,
        bins: 400,
        seed,
    }
}

#[test]
fn sample_mean_is_zero_within_three_sigma() {
    let samples = collect_samples(&config(100_000, 10_000, 11)).unwrap();
    let m = samples.len() as f64;
    let mean = samples.iter().map(|s| s.value).sum::<f64>() / m;
    let var = samples
        .iter()
        .map(|s| (s.value - mean).powi(2))
        .sum::<f64>()
        / (m - 1.0);
    let sigma = (var / m).sqrt();
    assert!(mean.abs() <= 3.0 * sigma, "mean {mean}, sigma {sigma}");
    assert!(samples.iter().all(|s| (-0.5..=0.5).contains(&s.value)));
}

#[test]
fn l1_distance_shrinks_with_n() {
    let nu = assemble(40).unwrap();
    let l1: Vec<f64> = [100, 1_000, 10_000]
        .iter()
        .map(|&n| {
            let h = run(&config(100_000, n, 12)).unwrap();
            assert_eq!(h.overflow() + h.underflow(), 0);
            compare(&h, &nu).l1
        })
        .collect();
    // Pure noise at M = 1e5, B = 400 is about 0.04; allow twice that.
    let noise = 0.04;
    for w in l1.windows(2) {
        assert!(w[1] <= w[0] + 2.0 * noise, "{l1:?}");
    }
    assert!(l1[2] < l1[0], "{l1:?}");
}

#[test]
fn independent_seeds_agree_in_ks() {
    let a = run(&config(1_000_000, 10_000, 1)).unwrap();
    let b = run(&config(1_000_000, 10_000, 2)).unwrap();
    let ks = ks_between(&a, &b);
    assert!(ks < 0.005, "KS = {ks}");
    assert_ne!(a, b);
}

#[test]
fn same_seed_same_histogram_for_any_thread_count() {
    let c = config(20_000, 2_000, 13);
    let one = run_with_threads(&c, 1).unwrap();
    assert_eq!(one, run_with_threads(&c, 3).unwrap());
    assert_eq!(one, run(&c).unwrap());
    assert_eq!(one.total(), c.samples);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = config(10, 10, 0);
    c.bins = 1;
    assert!(run(&c).is_err());
    let mut c = config(10, 10, 0);
    c.iterations = 0;
    assert!(run(&c).is_err());
}
