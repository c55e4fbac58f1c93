//! Wire currents that give a requested barrier with |B| held at 3.23 G.

use chipgate::constants::{joule_to_khz, khz_to_joule, GAUSS, MILLIAMP};
use chipgate::magnetostatics::LayoutParams;
use chipgate::trapscape::BarrierSolver;
use chipgate::zeeman::ZeemanPotential;

fn main() -> chipgate::Result<()> {
    let solver = BarrierSolver::new(LayoutParams::paper_high_barrier(), ZeemanPotential::rb87_clock(), 3.23 * GAUSS);
    println!("target_kHz  I0_mA     alpha     barrier_kHz  B_G     iterations");
    for target in [40.0, 35.4, 25.0, 14.4] {
        let s = solver.solve(khz_to_joule(target))?;
        println!(
            "{target:9.1}  {:.4}  {:.6}  {:11.6}  {:.5}  {}",
            s.params.i0 / MILLIAMP,
            s.params.alpha,
            joule_to_khz(s.barrier),
            s.b_min / GAUSS,
            s.iterations
        );
    }
    Ok(())
}
