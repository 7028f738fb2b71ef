//! The optimal amplitude input is discrete: reduce the gridded optimum to a
//! few mass points at two SNRs under a peak constraint.

use fibercap::capacity::{amplitude_capacity, discrete_input_search, CapacityOptions, SearchOptions};
use fibercap::presets::Preset;

fn main() -> fibercap::Result<()> {
    let p = Preset::by_name("paper-fig7")?;
    let grid = p.grid.build()?;
    let opts = CapacityOptions { peak: p.peak, ..Default::default() };
    for power in p.powers() {
        let init = amplitude_capacity(&p.params, &grid, power, &opts)?;
        let found = discrete_input_search(&p.params, &grid, power, p.peak, &init, &SearchOptions::default())?;
        println!(
            "SNR {:5.1} dB: gridded C = {:.4}, {} mass points carry {:.4} nats, on/off ratio {:.3}",
            10.0 * p.params.snr(power).log10(),
            init.capacity,
            found.support_size(),
            found.mi,
            found.on_off_ratio()
        );
        for (r, q) in found.input.radii.iter().zip(&found.input.probs) {
            println!("    r = {r:.5} sqrt(W)  p = {q:.3}");
        }
    }
    Ok(())
}
