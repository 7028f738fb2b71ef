//! Joint and amplitude capacity over an SNR sweep, next to the half-Gaussian
//! rate and the lower bounds.
//!
//! `hG P/P` is the power of the half-Gaussian once discretised onto the
//! rings; where it exceeds 1 that input is infeasible and may beat the
//! constrained optimum.

use fibercap::bounds::lb_theorem1;
use fibercap::capacity::{amplitude_capacity, halfgaussian_distribution, halfgaussian_rate, joint_capacity, CapacityOptions};
use fibercap::dmc::DmcConfig;
use fibercap::presets::{GridSpec, Preset};

fn main() -> fibercap::Result<()> {
    let p = Preset::by_name("desk")?;
    let powers: Vec<f64> = p.powers().into_iter().step_by(2).collect();
    // One grid for the whole sweep: it has to reach well past the largest
    // power, or the power constraint stops binding there.
    let reach = 3.0 * powers.iter().copied().fold(0.0, f64::max).sqrt() + 6.0 * p.params.noise_power().sqrt();
    let grid = GridSpec { n_rings: 48, n_phases: 32, r_max: reach }.build()?;
    let opts = CapacityOptions::default();
    println!("{:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "rho_dB", "joint", "ampl", "halfG", "hG P/P", "log-SNR", "support");
    for power in powers {
        let rho = p.params.snr(power);
        let joint = joint_capacity(&p.params, &grid, power, &opts)?;
        let amp = amplitude_capacity(&p.params, &grid, power, &opts)?;
        let hg = halfgaussian_rate(power, &p.params, &grid, &DmcConfig::default())?;
        println!(
            "{:8.1} {:8.4} {:8.4} {:8.4} {:8.4} {:8.4} {:8}",
            10.0 * rho.log10(),
            joint.capacity,
            amp.capacity,
            hg,
            halfgaussian_distribution(&grid, power)?.average_power() / power,
            lb_theorem1(rho)?,
            joint.input.support_size(1e-3)
        );
    }
    Ok(())
}
