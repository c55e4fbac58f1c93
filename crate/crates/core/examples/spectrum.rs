//! Two-atom spectrum of the chip double well at one barrier height, with
//! the qubit states marked.

use chipgate::constants::{joule_to_khz, khz_to_joule, AtomConstants, GAUSS, MICRON};
use chipgate::magnetostatics::LayoutParams;
use chipgate::trapscape::{potential_slice_1d, trap_frequencies, BarrierSolver, TrapModel, HESSIAN_STEP};
use chipgate::twoatom::{identify_qubit_states, interaction_strength, single_particle_eigen, two_atom_eigen};
use chipgate::zeeman::ZeemanPotential;

fn main() -> chipgate::Result<()> {
    let xi_khz: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(35.4);
    let zeeman = ZeemanPotential::rb87_clock();
    let sol = BarrierSolver::new(LayoutParams::paper_high_barrier(), zeeman.clone(), 3.23 * GAUSS).solve(khz_to_joule(xi_khz))?;
    let model = TrapModel::from_params(&sol.params, &zeeman)?;
    let curve = potential_slice_1d(&model, &sol.axis, (-3.0 * MICRON, 3.0 * MICRON), 2048)?.symmetrized();
    let single = single_particle_eigen(&curve, 14, zeeman.mass())?;
    let f = trap_frequencies(&model, &sol.axis.minima[0], &sol.axis, HESSIAN_STEP)?;
    let g = interaction_strength(AtomConstants::rb87().scattering_length, f.omega_y(), f.omega_z());
    let pair = two_atom_eigen(&single, g, 12)?;
    let q = identify_qubit_states(&pair)?;

    println!("barrier {xi_khz} kHz");
    println!("single particle (kHz): {:?}", single.energies[..6].iter().map(|&e| (joule_to_khz(e) * 1e3).round() / 1e3).collect::<Vec<_>>());
    for i in 0..12 {
        let tag = [(q.gg, "gg"), (q.ge, "ge"), (q.eg, "eg"), (q.ee, "ee")].iter().find(|t| t.0 == i).map_or("", |t| t.1);
        println!("{i:3}  {:10.4} kHz  {:?}  {tag}", joule_to_khz(pair.energies[i]), pair.parity[i]);
    }
    Ok(())
}
