//! Field of the three-wire chip along a vertical line above the quadrupole
//! wire, and the same map as CSV on a small grid.

use chipgate::constants::{GAUSS, MICRON};
use chipgate::magnetostatics::{total_field, write_field_map, ChipLayout, LayoutParams, Vec3};

fn main() -> chipgate::Result<()> {
    let layout = ChipLayout::new(&LayoutParams::paper_high_barrier())?;
    println!("z_um  |B|_G");
    for k in 0..=10 {
        let z = (0.6 + 0.1 * k as f64) * MICRON;
        let b = total_field(&layout, &Vec3::new(0.0, 0.0, z));
        println!("{:.2}  {:.4}", z / MICRON, b.norm() / GAUSS);
    }

    let points: Vec<Vec3> =
        (0..5).flat_map(|i| (0..3).map(move |k| Vec3::new((i as f64 - 2.0) * 0.5, 0.0, 1.0 + 0.25 * k as f64) * MICRON)).collect();
    println!();
    write_field_map(&layout, &points, std::io::stdout())
}
