//! Gate infidelity against total duration for both ramp shapes. Each point
//! gets its own ramp time and a hold tuned to a π phase.

use chipgate::constants::{khz_to_joule, AtomConstants, GAUSS};
use chipgate::gatedynamics::{infidelity_scan, linear_schedule, optimized_schedule, PropagationOptions};
use chipgate::magnetostatics::LayoutParams;
use chipgate::twoatom::{TrackConfig, XiTrack};
use chipgate::zeeman::ZeemanPotential;

fn main() -> chipgate::Result<()> {
    let c = AtomConstants::rb87();
    let config = TrackConfig::new(khz_to_joule(35.4), khz_to_joule(14.4), 3.23 * GAUSS, c.scattering_length);
    let track = XiTrack::build(&LayoutParams::paper_high_barrier(), &ZeemanPotential::rb87_clock(), &config)?;

    let opts = PropagationOptions::default();
    let durations: Vec<f64> = (2..=14).step_by(2).map(|ms| ms as f64 * 1e-3).collect();
    let linear = infidelity_scan(&linear_schedule(config.xi_high, config.xi_low, 1e-3, 0.0)?, &durations, &track, 1e-8, &opts);
    let optimized = infidelity_scan(&optimized_schedule(1.0, &track, 0.0)?, &durations, &track, 1e-8, &opts);

    println!("T_ms  linear      optimized");
    let cell = |r: &Result<chipgate::gatedynamics::GatePoint, String>| match r {
        Ok(p) => format!("{:.3e}", p.infidelity),
        Err(_) => "-".to_string(),
    };
    for (a, b) in linear.iter().zip(&optimized) {
        println!("{:4.1}  {:10}  {}", a.target * 1e3, cell(&a.result), cell(&b.result));
    }
    Ok(())
}
