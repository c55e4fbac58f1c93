//! Double-well characterization for the high- and low-barrier currents.

use chipgate::constants::{joule_to_khz, GAUSS, MICRON};
use chipgate::magnetostatics::LayoutParams;
use chipgate::trapscape::{characterize, TrapModel};
use chipgate::zeeman::ZeemanPotential;

fn main() -> chipgate::Result<()> {
    let zeeman = ZeemanPotential::rb87_clock();
    for (name, params) in [("high", LayoutParams::paper_high_barrier()), ("low", LayoutParams::paper_low_barrier())] {
        let t = characterize(&TrapModel::from_params(&params, &zeeman)?)?;
        let [a, b] = t.axis.minima;
        let f = &t.frequencies[0];
        println!("{name} barrier configuration");
        println!("  minima      ({:.3}, {:.3}, {:.3}) um and ({:.3}, {:.3}, {:.3}) um", a.x / MICRON, a.y / MICRON, a.z / MICRON, b.x / MICRON, b.y / MICRON, b.z / MICRON);
        println!("  separation  {:.3} um, tilt {:.2} deg", t.axis.separation() / MICRON, t.tilt_deg());
        println!("  barrier     {:.2} kHz", joule_to_khz(t.barrier));
        println!("  |B| at min  {:.4} G", t.b_min / GAUSS);
        println!("  frequencies {:.2}, {:.1}, {:.1} kHz", f.x_prime / 1e3, f.y_prime / 1e3, f.z / 1e3);
    }
    Ok(())
}
