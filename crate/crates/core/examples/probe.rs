// Scratch probe for tuning: digital baseline, mean product, fig3b sigma,
// and detector-ladder crossovers. Not part of the deliverable surface.

use netcast_core::model::{load_dataset, load_model};
use netcast_core::pipeline::{self, presets, EnergyReference, NoiseFlags, Scenario};
use netcast_core::receiver::presets as det;

fn data_dir() -> String {
    format!("{}/../../data", env!("CARGO_MANIFEST_DIR"))
}

fn main() {
    let model = load_model(format!("{}/mlp_784x100x100x10.ncm", data_dir())).unwrap();
    let data = load_dataset(
        format!("{}/test-images-idx3-ubyte", data_dir()),
        format!("{}/test-labels-idx1-ubyte", data_dir()),
    )
    .unwrap()
    .take(1000);

    // digital baseline
    let t0 = std::time::Instant::now();
    let mut correct = 0;
    for (img, &lab) in data.images.iter().zip(&data.labels) {
        if model.predict(img).unwrap() == lab as usize {
            correct += 1;
        }
    }
    println!("digital baseline: {} / {} in {:?}", correct, data.len(), t0.elapsed());

    // noiseless pipeline fidelity
    let t0 = std::time::Instant::now();
    let ideal = presets::ideal();
    let rep = pipeline::run_inference(&model, &data, &ideal).unwrap();
    println!(
        "noiseless pipeline: acc {:.4} in {:?}, photons/mac {:.3}",
        rep.accuracy,
        t0.elapsed(),
        rep.photons_per_mac
    );

    // mean product via a MeanMac run at 1 photon/MAC target
    let sub = data.take(200);
    let mut sc = presets::snspd_subphoton();
    sc.e_mac_target = netcast_core::constants::photon_energy(1550e-9);
    let t0 = std::time::Instant::now();
    let rep = pipeline::run_inference(&model, &sub, &sc).unwrap();
    println!(
        "snspd 1 photon/MAC: acc {:.4}, photons/mac {:.4}, photons/readout {:.2}, {:?}",
        rep.accuracy, rep.photons_per_mac, rep.photons_per_readout, t0.elapsed()
    );
    let mut sc01 = sc.clone();
    sc01.e_mac_target /= 10.0;
    let rep01 = pipeline::run_inference(&model, &sub, &sc01).unwrap();
    println!("snspd 0.1 photon/MAC: acc {:.4}", rep01.accuracy);

    // fig3b precision
    let t0 = std::time::Instant::now();
    let prec = pipeline::precision_test(10_000, &presets::fig3b_precision()).unwrap();
    println!("fig3b sigma_rms = {:.5} in {:?}", prec.sigma_rms, t0.elapsed());

    // ladder crossovers on a half-decade grid
    let grid: Vec<f64> = (0..24).map(|k| 1e-20 * 10f64.powf(k as f64 * 0.5)).collect();
    for (name, d) in [
        ("snspd", det::snspd()),
        ("ti-10pf", det::time_integrator_10pf()),
        ("ti-10pf-meas", det::time_integrator_10pf_measured()),
        ("apd430c", det::apd430c()),
        ("koheron", det::koheron_pd100()),
        ("pda10cs", det::pda10cs()),
    ] {
        let sc = presets::ladder(d);
        let t0 = std::time::Instant::now();
        let curve = pipeline::sweep_energy(&model, &sub, &sc, &grid).unwrap();
        let first = curve.iter().find(|p| p.accuracy >= 0.9);
        let pts: Vec<String> = curve
            .iter()
            .filter(|p| p.accuracy > 0.12 && p.accuracy < 0.995)
            .map(|p| format!("{:.1e}:{:.2}", p.e_mac_j, p.accuracy))
            .collect();
        println!(
            "{name:12} first90 {:?}  [{:?}] {}",
            first.map(|p| p.e_mac_j),
            t0.elapsed(),
            pts.join(" ")
        );
    }

    let _ = Scenario::ideal();
    let _: NoiseFlags;
    let _: EnergyReference;
}
