//! Command-line front end: subcommand dispatch, reports, CSV tables and the
//! run manifest.
//!
//! Every run writes into the output directory:
//!
//! | subcommand | files |
//! |---|---|
//! | `field` | `field.csv`: `x_m,y_m,z_m,Bx_T,By_T,Bz_T` |
//! | `trap` | `trap_report.toml`, `potential_curve.csv`: `x_prime_m,V_over_h_kHz` |
//! | `spectrum` | `spectrum.csv`: `xi_kHz,I0_mA,alpha,E1_kHz,…` |
//! | `gate` | `gate_report.toml`, `gate_schedule.csv`: `t_ms,xi_kHz,I0_mA,alpha` |
//! | `scan` | `scan.csv`: `duration_ms,infidelity,T1_ms,phi_error,T0_ms,status` |
//! | `raman` | `raman_report.toml`, optional `raman_oracle.csv`: `t_s,P0,P1,P_exc` |
//!
//! plus `manifest.toml` with the inputs hash, the constants version, the
//! tolerances and a hash of each artifact. `phi_error` is in radians.

#![allow(non_snake_case)]

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::constants::{joule_to_khz, AtomConstants, GAUSS, MICRON, MILLIAMP};
use crate::error::{Error, Result};
use crate::gatedynamics::{
    infidelity_scan, linear_schedule, optimized_schedule, tune_gate, Schedule, ScheduleKind,
};
use crate::magnetostatics::{write_field_map, ChipLayout, QUADRATURE_TOL};
use crate::raman::{
    detunings, effective_coupling, effective_detuning, light_shifts, linewidth_ratio, oracle_time_series,
    sideband_coupling, transfer_pulse_duration,
};
use crate::scenario::{load_scenario, scenario_constants, RampKind, Scenario};
use crate::trapscape::{characterize, potential_slice_1d, TrapModel, MINIMA_GTOL};
use crate::twoatom::XiTrack;
use crate::zeeman::ZeemanPotential;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Field,
    Trap,
    Spectrum,
    Gate,
    Scan,
    Raman,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Field => "field",
            Subcommand::Trap => "trap",
            Subcommand::Spectrum => "spectrum",
            Subcommand::Gate => "gate",
            Subcommand::Scan => "scan",
            Subcommand::Raman => "raman",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        <Self as ValueEnum>::from_str(name, false).map_err(|_| Error::Usage(format!("unknown subcommand `{name}`")))
    }
}

/// Exit status of a run: 0 success, 1 physics or structural failure, 2 usage error.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(Error::Usage(_) | Error::Parse { .. } | Error::Invalid { .. }) => 2,
        Err(_) => 1,
    }
}

/// Files written by a run, in writing order, and the report text if any.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub artifacts: Vec<PathBuf>,
    pub report: Option<String>,
}

struct Emitter {
    dir: PathBuf,
    written: Vec<(String, String)>,
}

impl Emitter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.write(name, &bytes)
    }

    fn report<T: Serialize>(&mut self, name: &str, report: &T) -> Result<String> {
        let text = toml::to_string(report).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        self.write(name, text.as_bytes())?;
        Ok(text)
    }

    fn paths(&self) -> Vec<PathBuf> {
        self.written.iter().map(|(n, _)| self.dir.join(n)).collect()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    scenario: &'a str,
    inputs_sha256: String,
    constants_version: &'a str,
    crate_version: &'a str,
    tolerances: Tolerances,
    artifacts: Vec<Artifact>,
}

#[derive(Serialize)]
struct Tolerances {
    field_quadrature_T: f64,
    minima_gradient_relative: f64,
    ode_rtol: f64,
    ode_atol: f64,
    phase_rad: f64,
}

#[derive(Serialize)]
struct Artifact {
    file: String,
    sha256: String,
}

/// Hash of everything that determines the outputs: the scenario (without
/// its constants path), the constants themselves and the subcommand.
pub fn inputs_hash(sub: Subcommand, scenario: &Scenario, constants: &AtomConstants) -> String {
    let s = Scenario { constants: None, ..scenario.clone() };
    let mut text = toml::to_string(&s).unwrap_or_default();
    text.push_str("\n# constants\n");
    text.push_str(&toml::to_string(constants).unwrap_or_default());
    text.push_str("\n# subcommand\n");
    text.push_str(sub.name());
    sha256_hex(text.as_bytes())
}

/// Runs one subcommand for `scenario`, writing into `out`.
pub fn run(sub: Subcommand, scenario: &Scenario, out: &Path) -> Result<RunOutcome> {
    scenario.validate()?;
    if sub == Subcommand::Scan && scenario.schedule.durations_ms.is_empty() {
        return Err(Error::Usage("scan needs a non-empty schedule.durations_ms".into()));
    }
    let constants = scenario_constants(scenario)?;
    let mut em = Emitter::new(out)?;
    let report = match sub {
        Subcommand::Field => {
            run_field(scenario, &mut em)?;
            None
        }
        Subcommand::Trap => Some(run_trap(scenario, &constants, &mut em)?),
        Subcommand::Spectrum => {
            run_spectrum(scenario, &constants, &mut em)?;
            None
        }
        Subcommand::Gate => Some(run_gate(scenario, &constants, &mut em)?),
        Subcommand::Scan => {
            run_scan(scenario, &constants, &mut em)?;
            None
        }
        Subcommand::Raman => Some(run_raman(scenario, &mut em)?),
    };
    let n = &scenario.numerics;
    let manifest = Manifest {
        subcommand: sub.name(),
        scenario: &scenario.name,
        inputs_sha256: inputs_hash(sub, scenario, &constants),
        constants_version: &constants.version,
        crate_version: env!("CARGO_PKG_VERSION"),
        tolerances: Tolerances {
            field_quadrature_T: QUADRATURE_TOL,
            minima_gradient_relative: MINIMA_GTOL,
            ode_rtol: n.rtol,
            ode_atol: n.atol,
            phase_rad: n.phase_tolerance,
        },
        artifacts: em.written.iter().map(|(f, h)| Artifact { file: f.clone(), sha256: h.clone() }).collect(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    fs::write(out.join("manifest.toml"), text)?;
    let mut artifacts = em.paths();
    artifacts.push(out.join("manifest.toml"));
    Ok(RunOutcome { artifacts, report })
}

/// Same as [`run`] on a pool of `threads` workers. Outputs do not depend on
/// the thread count.
pub fn run_with_threads(sub: Subcommand, scenario: &Scenario, out: &Path, threads: usize) -> Result<RunOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    pool.install(|| run(sub, scenario, out))
}

fn run_field(s: &Scenario, em: &mut Emitter) -> Result<()> {
    let layout = ChipLayout::new(&s.layout_params())?;
    let mut buf = Vec::new();
    write_field_map(&layout, &s.field_points(), &mut buf)?;
    em.write("field.csv", &buf)
}

#[derive(Serialize)]
struct TrapReport {
    minima_um: [[f64; 3]; 2],
    separation_um: f64,
    height_um: f64,
    tilt_deg: f64,
    b_min_G: f64,
    barrier_kHz: f64,
    frequencies_kHz: [f64; 3],
    field_gradient_G_per_um: f64,
}

fn run_trap(s: &Scenario, c: &AtomConstants, em: &mut Emitter) -> Result<String> {
    let model = TrapModel::from_params(&s.layout_params(), &zeeman_for(c))?;
    let t = characterize(&model)?;
    let um = |v: f64| v / MICRON;
    let f = &t.frequencies[0];
    let report = TrapReport {
        minima_um: t.axis.minima.map(|m| [um(m.x), um(m.y), um(m.z)]),
        separation_um: um(t.axis.separation()),
        height_um: um(0.5 * (t.axis.minima[0].z + t.axis.minima[1].z)),
        tilt_deg: t.tilt_deg(),
        b_min_G: t.b_min / GAUSS,
        barrier_kHz: joule_to_khz(t.barrier),
        frequencies_kHz: [f.x_prime * 1e-3, f.y_prime * 1e-3, f.z * 1e-3],
        field_gradient_G_per_um: t.field_gradient / GAUSS * MICRON,
    };
    let half = 0.5 * s.numerics.window_um * MICRON;
    let curve = potential_slice_1d(&model, &t.axis, (-half, half), s.numerics.curve_points)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    let text = em.report("trap_report.toml", &report)?;
    em.write("potential_curve.csv", &buf)?;
    Ok(text)
}

fn zeeman_for(c: &AtomConstants) -> ZeemanPotential {
    let base = ZeemanPotential::rb87_clock();
    ZeemanPotential::new(c.clone(), base.state, base.model)
}

fn build_track(s: &Scenario, c: &AtomConstants) -> Result<XiTrack> {
    XiTrack::build(&s.layout_params(), &zeeman_for(c), &s.track_config(c))
}

fn run_spectrum(s: &Scenario, c: &AtomConstants, em: &mut Emitter) -> Result<()> {
    let track = build_track(s, c)?;
    let (lo, hi) = track.domain();
    let n = s.numerics.spectrum_points;
    let k = s.numerics.spectrum_states;
    let mut header = vec!["xi_kHz".to_string(), "I0_mA".into(), "alpha".into()];
    header.extend((1..=k).map(|i| format!("E{i}_kHz")));
    let mut rows = Vec::with_capacity(n);
    for j in 0..n {
        let xi = lo + (hi - lo) * j as f64 / (n - 1) as f64;
        let mut e: Vec<f64> = track.sectors.iter().flat_map(|sec| sec.energies(xi)).collect();
        e.sort_by(f64::total_cmp);
        if e.len() < k {
            return Err(Error::invalid("numerics.spectrum_states", format!("track keeps only {} states", e.len())));
        }
        let (i0, alpha) = track.currents(xi);
        let mut row = vec![num(joule_to_khz(xi)), num(i0 / MILLIAMP), num(alpha)];
        row.extend(e[..k].iter().map(|&v| num(joule_to_khz(v))));
        rows.push(row);
    }
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    em.csv("spectrum.csv", &h, &rows)
}

fn template(s: &Scenario, track: &XiTrack) -> Result<Schedule> {
    let (lo, hi) = track.domain();
    let t1 = s.schedule.t1_seed_ms * 1e-3;
    match s.schedule.kind {
        RampKind::Linear => {
            let t0 = s.schedule.t0_ms.ok_or_else(|| Error::invalid("schedule.t0_ms", "required"))? * 1e-3;
            linear_schedule(hi, lo, t0, t1)
        }
        RampKind::Optimized => {
            let sched = optimized_schedule(s.schedule.gamma, track, t1)?;
            match s.schedule.t0_ms {
                Some(t0) => sched.with_ramp_time(t0 * 1e-3),
                None => Ok(sched),
            }
        }
    }
}

#[derive(Serialize)]
struct GateReport {
    kind: &'static str,
    gamma: Option<f64>,
    T0_ms: f64,
    T1_ms: f64,
    duration_ms: f64,
    phi_rad: f64,
    phi_error_rad: f64,
    branch_rad: f64,
    infidelity: f64,
    norm_drift: f64,
}

fn run_gate(s: &Scenario, c: &AtomConstants, em: &mut Emitter) -> Result<String> {
    let track = build_track(s, c)?;
    let sched = template(s, &track)?;
    let p = tune_gate(&sched, &track, s.numerics.phase_tolerance, &s.propagation_options())?;
    let gamma = match sched.kind {
        ScheduleKind::Optimized { gamma } => Some(gamma),
        ScheduleKind::Linear => None,
    };
    let report = GateReport {
        kind: sched.kind.name(),
        gamma,
        T0_ms: p.t0 * 1e3,
        T1_ms: p.t1 * 1e3,
        duration_ms: p.duration * 1e3,
        phi_rad: p.phase,
        phi_error_rad: p.phase_error,
        branch_rad: p.branch,
        infidelity: p.infidelity,
        norm_drift: p.norm_drift,
    };
    let tuned = sched.with_hold(p.t1)?;
    let rows: Vec<Vec<String>> = tuned
        .current_track(&track, 401)?
        .iter()
        .map(|c| vec![num(c.t * 1e3), num(joule_to_khz(c.xi)), num(c.i0 / MILLIAMP), num(c.alpha)])
        .collect();
    let text = em.report("gate_report.toml", &report)?;
    em.csv("gate_schedule.csv", &["t_ms", "xi_kHz", "I0_mA", "alpha"], &rows)?;
    Ok(text)
}

fn run_scan(s: &Scenario, c: &AtomConstants, em: &mut Emitter) -> Result<()> {
    let track = build_track(s, c)?;
    let sched = template(s, &track)?;
    let scan = infidelity_scan(&sched, &s.durations(), &track, s.numerics.phase_tolerance, &s.propagation_options());
    let rows: Vec<Vec<String>> = scan
        .iter()
        .map(|r| match &r.result {
            Ok(p) => vec![
                num(r.target * 1e3),
                num(p.infidelity),
                num(p.t1 * 1e3),
                num(p.phase_error),
                num(p.t0 * 1e3),
                "ok".into(),
            ],
            Err(e) => vec![num(r.target * 1e3), String::new(), String::new(), String::new(), String::new(), e.clone()],
        })
        .collect();
    em.csv("scan.csv", &["duration_ms", "infidelity", "T1_ms", "phi_error", "T0_ms", "status"], &rows)
}

#[derive(Serialize)]
struct RamanReport {
    detunings_MHz: DetuningReport,
    two_photon_detuning_kHz: f64,
    rabi_eff_kHz: f64,
    rabi_eff_phase_rad: f64,
    light_shift_0_kHz: f64,
    light_shift_1_kHz: f64,
    corrected_detuning_kHz: f64,
    t_pi_us: f64,
    sideband_rabi_kHz: f64,
    linewidth_over_detuning: f64,
}

#[derive(Serialize)]
struct DetuningReport {
    a0: f64,
    a1: f64,
    c0: f64,
    c1: f64,
    d0: f64,
    b1: f64,
}

fn run_raman(s: &Scenario, em: &mut Emitter) -> Result<String> {
    let scheme = s.level_scheme()?;
    let cyc = |w: f64| w / (2.0 * std::f64::consts::PI);
    let d = detunings(&scheme);
    let omega = effective_coupling(&scheme)?;
    let (d0, d1) = light_shifts(&scheme)?;
    let t_pi = transfer_pulse_duration(&scheme)?;
    let report = RamanReport {
        detunings_MHz: DetuningReport {
            a0: cyc(d.a0) * 1e-6,
            a1: cyc(d.a1) * 1e-6,
            c0: cyc(d.c0) * 1e-6,
            c1: cyc(d.c1) * 1e-6,
            d0: cyc(d.d0) * 1e-6,
            b1: cyc(d.b1) * 1e-6,
        },
        two_photon_detuning_kHz: cyc(scheme.two_photon_detuning()) * 1e-3,
        rabi_eff_kHz: cyc(omega.norm()) * 1e-3,
        rabi_eff_phase_rad: omega.arg(),
        light_shift_0_kHz: cyc(d0) * 1e-3,
        light_shift_1_kHz: cyc(d1) * 1e-3,
        corrected_detuning_kHz: cyc(effective_detuning(&scheme)?) * 1e-3,
        t_pi_us: t_pi * 1e6,
        sideband_rabi_kHz: cyc(sideband_coupling(&scheme, s.raman.franck_condon)?.norm()) * 1e-3,
        linewidth_over_detuning: linewidth_ratio(&scheme),
    };
    let text = em.report("raman_report.toml", &report)?;
    let n = s.raman.oracle_samples;
    if n > 0 {
        let series = oracle_time_series(&scheme, s.raman.oracle_pulses * t_pi, n - 1, 1)?;
        let rows: Vec<Vec<String>> =
            series.iter().map(|o| vec![num(o.t), num(o.p0), num(o.p1), num(o.p_exc)]).collect();
        em.csv("raman_oracle.csv", &["t_s", "P0", "P1", "P_exc"], &rows)?;
    }
    Ok(text)
}

#[derive(Debug, Parser)]
#[command(name = "chipgate", version, about = "Atom-chip phase-gate simulations")]
struct Args {
    /// What to compute.
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    output: PathBuf,
    /// Worker threads; defaults to the available cores.
    #[arg(short = 'j', long)]
    threads: Option<usize>,
}

/// Entry point of the binary: parses `args`, runs, prints the report or the
/// error and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = load_scenario(&args.scenario).and_then(|s| {
        let threads = args.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if threads == 0 {
            return Err(Error::Usage("--threads must be positive".into()));
        }
        run_with_threads(args.subcommand, &s, &args.output, threads)
    });
    let code = match &result {
        Err(Error::Io(_)) if !args.scenario.exists() => 2,
        r => exit_code(r),
    };
    match &result {
        Ok(out) => {
            let mut msg = String::new();
            if let Some(r) = &out.report {
                msg.push_str(r);
            }
            for a in &out.artifacts {
                let _ = writeln!(msg, "wrote {}", a.display());
            }
            print!("{msg}");
        }
        Err(e) => eprintln!("error: {e}"),
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcommand_names_round_trip() {
        for s in [
            Subcommand::Field,
            Subcommand::Trap,
            Subcommand::Spectrum,
            Subcommand::Gate,
            Subcommand::Scan,
            Subcommand::Raman,
        ] {
            assert_eq!(Subcommand::parse(s.name()).unwrap(), s);
        }
        assert!(matches!(Subcommand::parse("plot"), Err(Error::Usage(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Err(Error::Usage("x".into()))), 2);
        assert_eq!(exit_code(&Err(Error::invalid("width", "negative"))), 2);
        assert_eq!(exit_code(&Err(Error::MinimaCount(3))), 1);
        assert_eq!(exit_code(&Ok(RunOutcome { artifacts: vec![], report: None })), 0);
    }

    #[test]
    fn numbers_are_fixed_format() {
        assert_eq!(num(1.0), "1.000000000000e0");
        assert_eq!(num(-2.5e-7), "-2.500000000000e-7");
    }
}
