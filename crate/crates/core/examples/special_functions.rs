//! Exponentially scaled Bessel functions at complex argument, erfi, and the
//! two integral identities the channel law rests on.

use fibercap::special::{besseli_scaled, erfi, f_aux, verify_identity_phase, verify_identity_product};
use num_complex::Complex64;

fn main() -> fibercap::Result<()> {
    // Arguments like these appear in the Fourier coefficients at desk
    // parameters: |z| in the thousands, orders up to a few hundred.
    for (m, z) in [(0, Complex64::new(2.0, 0.0)), (40, Complex64::new(2000.0, 250.0)), (400, Complex64::new(4e4, -3e3))] {
        let i = besseli_scaled(m, z)?;
        println!("I_{m}({z}) = {} x e^{:.3}", i.mantissa, i.log_scale);
    }
    for x in [0.5, 2.0, 5.0] {
        println!("erfi({x}) = {:.15e}", erfi(x)?);
    }
    println!("F(0.01, 1) = {:.6}", f_aux(0.01, 1.0)?);

    let (l, r) = verify_identity_phase(3, 4.5, 1.2)?;
    println!("phase identity: quadrature {l:.12}, closed form {r:.12}");
    let (l, r) = verify_identity_product(2, 1.5, 0.8, 1.1)?;
    println!("product identity: quadrature {l:.12}, closed form {r:.12}");
    Ok(())
}
