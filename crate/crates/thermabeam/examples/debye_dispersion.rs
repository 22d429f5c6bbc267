//! Tissue dielectric spectra under the single-pole Debye model.
//!
//! Sweeps 0.5–5 GHz and tabulates, per tissue: the real relative permittivity,
//! the effective conductivity (static plus relaxation loss), and the plane-wave
//! amplitude attenuation. Writes one CSV per tissue under
//! `example-out/debye_dispersion/` and prints the values at the 2.5 GHz
//! carrier, where the contrast between fat and fibroglandular tissue is the
//! whole reason beamforming through the breast works.
//!
//! Run with `cargo run --release -p thermabeam --example debye_dispersion`.

use std::fs;
use std::path::Path;

use thermabeam::constants::CARRIER_HZ;
use thermabeam::io::csv;
use thermabeam::Tissue;

fn main() -> thermabeam::Result<()> {
    let out = Path::new("example-out/debye_dispersion");
    fs::create_dir_all(out).map_err(thermabeam::Error::from)?;

    let freqs: Vec<f64> = (0..=90).map(|k| 0.5e9 + k as f64 * 0.05e9).collect();

    println!("single-pole Debye dispersion, 0.5-5 GHz");
    println!();
    println!(
        "{:<16} {:>10} {:>14} {:>14}",
        "tissue", "eps' @2.5G", "sigma_eff S/m", "alpha Np/m"
    );
    for tissue in Tissue::ALL {
        let d = tissue.debye();
        let eps_rows: Vec<(f64, f64)> = freqs.iter().map(|&f| (f, d.permittivity(f).re)).collect();
        let sig_rows: Vec<(f64, f64)> =
            freqs.iter().map(|&f| (f, d.effective_conductivity(f))).collect();
        let att_rows: Vec<(f64, f64)> = freqs.iter().map(|&f| (f, d.attenuation(f))).collect();
        let slug = tissue.name().replace(' ', "-");
        csv::write_series(&out.join(format!("{slug}-permittivity.csv")), ("f_hz", "eps_r"), &eps_rows)?;
        csv::write_series(&out.join(format!("{slug}-conductivity.csv")), ("f_hz", "sigma_s_per_m"), &sig_rows)?;
        csv::write_series(&out.join(format!("{slug}-attenuation.csv")), ("f_hz", "alpha_np_per_m"), &att_rows)?;

        println!(
            "{:<16} {:>10.3} {:>14.4} {:>14.4}",
            tissue.name(),
            d.permittivity(CARRIER_HZ).re,
            d.effective_conductivity(CARRIER_HZ),
            d.attenuation(CARRIER_HZ),
        );
    }

    let fat = Tissue::Fat.debye();
    let fibro = Tissue::Fibroglandular.debye();
    println!();
    println!(
        "fibroglandular/fat contrast at {:.1} GHz: permittivity x{:.1}, conductivity x{:.1}",
        CARRIER_HZ / 1e9,
        fibro.permittivity(CARRIER_HZ).re / fat.permittivity(CARRIER_HZ).re,
        fibro.effective_conductivity(CARRIER_HZ) / fat.effective_conductivity(CARRIER_HZ),
    );
    println!(
        "1/e field depth in fibroglandular tissue: {:.1} mm",
        1e3 / fibro.attenuation(CARRIER_HZ)
    );
    println!("spectra written to {}", out.display());
    Ok(())
}
