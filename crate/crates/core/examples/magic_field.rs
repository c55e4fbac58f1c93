//! Breit–Rabi energies of the ⁸⁷Rb clock pair and the field where their
//! difference is stationary.

use chipgate::constants::{AtomConstants, GAUSS, PLANCK};
use chipgate::zeeman::{breit_rabi_shift, differential_slope, magic_field, HyperfineState};

fn main() -> chipgate::Result<()> {
    let c = AtomConstants::rb87();
    let b0 = magic_field(&c)?;
    println!("magic field {:.4} G", b0 / GAUSS);

    let upper = HyperfineState::new(2, 1)?;
    let lower = HyperfineState::new(1, -1)?;
    println!("B_G    shift(2,1)_kHz  shift(1,-1)_kHz  d(diff)/dB_Hz/G");
    for k in 0..=8 {
        let b = b0 * k as f64 / 4.0;
        println!(
            "{:.3}  {:12.4}  {:14.4}  {:12.4}",
            b / GAUSS,
            breit_rabi_shift(&c, upper, b) / PLANCK / 1e3,
            breit_rabi_shift(&c, lower, b) / PLANCK / 1e3,
            differential_slope(&c, b) / PLANCK * GAUSS
        );
    }
    Ok(())
}
