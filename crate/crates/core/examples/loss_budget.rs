//! Gate fidelity after atom loss from the chip surface, for one or both
//! atoms exposed, across gate durations and trap lifetimes.

use chipgate::gatedynamics::loss_adjusted_fidelity;

fn main() -> chipgate::Result<()> {
    let fidelity = 0.999;
    println!("tau_s  T_ms  one atom  two atoms");
    for tau in [0.2, 0.8, 5.0] {
        for t_ms in [2.0, 9.0, 15.0] {
            let t = t_ms * 1e-3;
            println!(
                "{tau:5.1}  {t_ms:4.1}  {:.5}   {:.5}",
                loss_adjusted_fidelity(fidelity, t, tau, 1)?,
                loss_adjusted_fidelity(fidelity, t, tau, 2)?
            );
        }
    }
    Ok(())
}
