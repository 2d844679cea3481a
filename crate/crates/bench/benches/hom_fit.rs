use criterion::{criterion_group, criterion_main, Criterion};
use qfc_core::experiments::hom::{sample_counts, symmetric_delay_grid};
use qfc_core::experiments::{extract_visibility, simulate_hom_scan, HomConfig};

fn bench(c: &mut Criterion) {
    let cfg = HomConfig {
        splitter_ratio: (0.493, 0.507),
        spectral_overlap: 0.96,
        interference_visibility: Some(0.845),
        filter_fwhm_ghz: 28.6,
        signal_pair_rate: 2.0,
        noise_floor: 0.0,
        delay_grid_ps: symmetric_delay_grid(100.0, 41),
    }
    .with_noise_ratio(0.4166)
    .unwrap();
    let scan = simulate_hom_scan(&cfg).unwrap();
    let noisy = sample_counts(&scan, 600.0, 1).unwrap();

    c.bench_function("hom_scan", |b| b.iter(|| simulate_hom_scan(&cfg).unwrap()));
    c.bench_function("hom_fit", |b| {
        b.iter(|| extract_visibility(&scan.delays_ps, &noisy, scan.noise_floor).unwrap())
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
