//! Builds the barrier track between 35.4 and 14.4 kHz, tunes the hold of a
//! 1 ms linear ramp to a conditional phase of π, then fits both ramp shapes
//! into a 9 ms gate.

use chipgate::constants::{khz_to_joule, AtomConstants, GAUSS, MILLIAMP};
use chipgate::gatedynamics::{gate_for_duration, linear_schedule, optimized_schedule, tune_gate, GatePoint, PropagationOptions};
use chipgate::magnetostatics::LayoutParams;
use chipgate::twoatom::{TrackConfig, XiTrack};
use chipgate::zeeman::ZeemanPotential;
use std::time::Instant;

fn main() -> chipgate::Result<()> {
    let c = AtomConstants::rb87();
    let config = TrackConfig::new(khz_to_joule(35.4), khz_to_joule(14.4), 3.23 * GAUSS, c.scattering_length);
    let clock = Instant::now();
    let track = XiTrack::build(&LayoutParams::paper_high_barrier(), &ZeemanPotential::rb87_clock(), &config)?;
    println!("track: {} nodes in {:.1} s", track.samples.len(), clock.elapsed().as_secs_f64());
    for xi in [config.xi_high, config.xi_low] {
        let (i0, alpha) = track.currents(xi);
        println!("  I0 = {:.3} mA, alpha = {:.5}", i0 / MILLIAMP, alpha);
    }

    let opts = PropagationOptions::default();
    let linear = linear_schedule(config.xi_high, config.xi_low, 1e-3, 0.0)?;
    let optimized = optimized_schedule(1.0, &track, 0.0)?;
    let show = |name: &str, g: &GatePoint| {
        println!(
            "{name:9}  T0 {:.3} ms  T1 {:.4} ms  total {:.3} ms  phase {:.9}  infidelity {:.3e}",
            g.t0 * 1e3,
            g.t1 * 1e3,
            g.duration * 1e3,
            g.phase,
            g.infidelity
        )
    };
    show("linear", &tune_gate(&linear, &track, 1e-8, &opts)?);
    println!();
    for (name, s) in [("linear", &linear), ("optimized", &optimized)] {
        show(name, &gate_for_duration(s, 9e-3, &track, 1e-8, &opts)?);
    }
    Ok(())
}
