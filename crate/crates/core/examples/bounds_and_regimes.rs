//! The regime map over a power sweep, with each closed-form bound shown only
//! where it applies.

use fibercap::bounds::{lb_high, lb_medium, lb_theorem1, regime_classify, Region};
use fibercap::presets::Preset;

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

fn main() -> fibercap::Result<()> {
    let params = Preset::by_name("desk")?.params;
    println!("{:>9} {:>9} {:>10} {:>12} {:>7} {:>7} {:>7}", "P (W)", "rho", "phase", "region", "log-SNR", "medium", "high");
    for k in 0..=12 {
        let power = 1e-5 * 10f64.powf(k as f64 / 2.0);
        let r = regime_classify(power, &params)?;
        // The log-SNR bound holds everywhere but is vacuous below rho = e.
        let thm1 = Some(lb_theorem1(r.snr)?.max(0.0));
        let medium = (r.region == Region::MediumPower).then(|| lb_medium(power, &params)).transpose()?;
        let high = (r.region == Region::HighPower).then(|| lb_high(power, &params)).transpose()?;
        println!(
            "{power:9.2e} {:9.1} {:10.3e} {:>12} {:>7} {:>7} {:>7}{}",
            r.snr,
            r.phase_metric,
            format!("{:?}", r.region),
            cell(thm1),
            cell(medium),
            cell(high),
            r.warning.map(|w| format!("  ({w})")).unwrap_or_default()
        );
    }
    Ok(())
}
