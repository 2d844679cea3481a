use criterion::{criterion_group, criterion_main, Criterion};
use qfc_core::experiments::NoiseSpectrum;
use qfc_core::{calibrate, choose_pumps, CalibrationTargets, DispersionModel, PumpConstraints, WdmChannel};

fn bench(c: &mut Criterion) {
    let cal = calibrate(CalibrationTargets::new(0.038, 1.2, 0.896)).unwrap();
    let model = DispersionModel::congruent_lithium_niobate();
    let spectrum = NoiseSpectrum::illustrative();
    let constraints = PumpConstraints::default();

    let mut group = c.benchmark_group("planner");
    group.sample_size(20);
    group.bench_function("choose_pumps_48_to_52", |b| {
        b.iter(|| choose_pumps(WdmChannel(48), WdmChannel(52), &spectrum, &model, &constraints, &cal).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
