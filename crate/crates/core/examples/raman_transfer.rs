//! Two-photon transfer between the clock states through the D1 line:
//! adiabatic-elimination prediction against the full six-level evolution.

use chipgate::constants::GAUSS;
use chipgate::raman::{
    effective_rabi_frequency, full_six_level_propagate, oracle_rabi_frequency, oracle_time_series, transfer_pulse_duration,
    unit_state, LevelScheme,
};
use std::f64::consts::PI;

fn main() -> chipgate::Result<()> {
    let detuning = -2.0 * PI * 1e9;
    println!("|D|/Omega  t_pi_us   relative error");
    for k in [20.0, 50.0, 100.0, 200.0] {
        let omega = detuning.abs() / k;
        let s = LevelScheme::rb87(3.23 * GAUSS, omega, omega, detuning)?.compensated()?;
        let err = oracle_rabi_frequency(&s)? / effective_rabi_frequency(&s)? - 1.0;
        println!("{k:9.0}  {:8.3}  {:.3e}", transfer_pulse_duration(&s)? * 1e6, err.abs());
    }

    let s = LevelScheme::rb87(3.23 * GAUSS, 2.0 * PI * 10e6, 2.0 * PI * 10e6, detuning)?.compensated()?;
    let t = transfer_pulse_duration(&s)?;
    let v = full_six_level_propagate(&s, t, &unit_state(1))?;
    println!("\npi pulse of {:.3} us moves {:.5} of |1> into |0>", t * 1e6, v[0].norm_sqr());
    println!("t_us     P0       P1       P_exc");
    for x in oracle_time_series(&s, t, 8, 1)? {
        println!("{:6.3}  {:.5}  {:.5}  {:.2e}", x.t * 1e6, x.p0, x.p1, x.p_exc);
    }
    Ok(())
}
