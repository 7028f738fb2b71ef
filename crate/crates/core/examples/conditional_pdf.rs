//! The closed-form conditional density of the zero-dispersion channel.
//!
//! Prints the amplitude marginal and a phase slice at the input amplitude;
//! the phase density peaks near the Kerr rotation `gamma r0^2 L`.

use fibercap::channel::{amplitude_pdf, conditional_pdf_diagnostics, DEFAULT_PDF_TOL};
use fibercap::presets::Preset;
use fibercap::PolarSample;

fn main() -> fibercap::Result<()> {
    let p = Preset::by_name("desk")?;
    let r0 = p.power.sqrt();
    let s = p.params.noise_power().sqrt();
    println!("desk: r0 = {r0:.4} sqrt(W), rotation gamma r0^2 L = {:.3} rad", p.params.rotation(r0));

    println!("\namplitude density f_R(r | r0):");
    for k in -3..=3 {
        let r = r0 + 0.5 * k as f64 * s;
        println!("  r = {r:.5}  f = {:10.3}", amplitude_pdf(r, r0, &p.params)?);
    }

    println!("\nphase slice at r = r0:");
    let input = PolarSample::new(r0, 0.0)?;
    let mut best = (0.0, 0.0);
    for k in 0..24 {
        let phi = std::f64::consts::TAU * k as f64 / 24.0;
        let (f, d) = conditional_pdf_diagnostics(PolarSample::new(r0, phi)?, input, &p.params, DEFAULT_PDF_TOL)?;
        if f > best.1 {
            best = (phi, f);
        }
        println!("  phi = {phi:5.3}  f = {f:12.3}  ({} harmonics)", d.terms);
    }
    println!("peak of the slice at phi = {:.3}", best.0);
    Ok(())
}
