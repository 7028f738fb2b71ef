//! Quantise the channel into a ring-constellation DMC, check it, write it
//! to disk and read it back.

use fibercap::dmc::{transition_closed_form, DmcConfig, TransitionMatrix};
use fibercap::presets::GridSpec;
use fibercap::presets::Preset;

fn main() -> fibercap::Result<()> {
    let p = Preset::by_name("desk")?;
    let grid = GridSpec { n_rings: 30, n_phases: 32, ..p.grid }.build()?;
    let build = transition_closed_form(&grid, &p.params, &DmcConfig::default())?;
    let t = &build.matrix;
    println!("{} inputs x {} outputs ({} rings x {} sectors + overflow)", t.rows, t.cols, grid.n_rings(), grid.n_phases);
    println!("row-sum error {:.2e}, max clamped {:.2e}, max radial deficit {:.2e}", t.stochastic_error()?, build.max_clamped, build.max_deficit);
    for w in &build.warnings {
        println!("warning: {w}");
    }

    let path = std::env::temp_dir().join("fibercap-desk.dmc");
    t.write_binary(std::fs::File::create(&path)?)?;
    let back = TransitionMatrix::read_binary(std::fs::File::open(&path)?)?;
    println!("round trip through {}: identical = {}", path.display(), &back == t);
    Ok(())
}
