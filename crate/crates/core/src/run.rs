//! Time loop driving a scenario to its end condition with periodic output.

use std::path::PathBuf;
use std::time::Instant;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::output::{write_fields, FieldSnapshot, TimeSeriesRecord, TimeSeriesWriter};
use crate::rigid_body::MotionMode;
use crate::scenarios::{EndCondition, Probe};
use crate::solver::Simulation;
use crate::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub t: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub min_f: f64,
    pub timeseries: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

impl RunSummary {
    pub fn mass_drift(&self) -> f64 {
        (self.final_mass - self.initial_mass) / self.initial_mass
    }
}

/// Area-weighted mean pressure over gas and cut cells whose centre lies in
/// the probe box.
pub fn probe_pressure(sim: &Simulation, probe: &Probe) -> f64 {
    let grid = &sim.grid;
    let (mut sum, mut area) = (0.0, 0.0);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let p = grid.center(i, j);
            if p.x < probe.lo.x || p.x > probe.hi.x || p.y < probe.lo.y || p.y > probe.hi.y {
                continue;
            }
            let c = grid.cell_index(i, j);
            if let Some(m) = sim.cell_moments(c) {
                let s = sim.geometry().cells[c].area;
                sum += s * m.pressure;
                area += s;
            }
        }
    }
    if area > 0.0 {
        sum / area
    } else {
        f64::NAN
    }
}

/// Speed used by the stationarity test: translation speed for translating
/// bodies, angular speed for rotating ones.
pub fn body_speed(sim: &Simulation, body: usize) -> f64 {
    let s = &sim.bodies[body].state;
    match s.mode {
        MotionMode::FreeRotationOnly => s.theta_dot.abs(),
        _ => s.u_c.norm() + s.theta_dot.abs(),
    }
}

pub fn record(
    sim: &Simulation,
    tracked: Option<usize>,
    load: (Vec2, f64),
    probes: &[Probe],
) -> TimeSeriesRecord {
    let (u_c, theta, theta_dot) = match tracked {
        Some(b) => {
            let s = &sim.bodies[b].state;
            (s.u_c, s.theta, s.theta_dot)
        }
        None => (Vec2::zeros(), 0.0, 0.0),
    };
    TimeSeriesRecord {
        t: sim.t,
        u_c,
        theta,
        theta_dot,
        mass: sim.total_mass(),
        force: load.0,
        torque: load.1,
        probes: probes.iter().map(|p| probe_pressure(sim, p)).collect(),
    }
}

struct Stationarity {
    window: usize,
    threshold: f64,
    history: std::collections::VecDeque<f64>,
}

impl Stationarity {
    fn settled(&mut self, speed: f64) -> bool {
        self.history.push_back(speed);
        if self.history.len() <= self.window {
            return false;
        }
        let old = self.history.pop_front().unwrap_or(speed);
        speed > 0.0 && (speed - old).abs() <= self.threshold * speed
    }
}

/// Runs the configured scenario, writing `timeseries.csv`, optional VTK
/// snapshots and `summary.txt` into the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &RunConfig) -> Result<RunSummary> {
    let spec = &cfg.scenario;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let started = Instant::now();
    let mut sim = Simulation::new(spec.setup())?;
    let initial_mass = sim.total_mass();
    let probe_names: Vec<String> = spec.probes.iter().map(|p| p.name.clone()).collect();
    let ts_path = dir.join("timeseries.csv");
    let mut ts = TimeSeriesWriter::create(&ts_path, &probe_names)?;
    let tracked = spec.tracked_body;
    let mut snapshots = Vec::new();
    let mut snapshot = |sim: &Simulation| -> Result<()> {
        let path = dir.join(format!("{}_{}.vtk", cfg.prefix, sim.step));
        write_fields(&FieldSnapshot::capture(sim), &path)?;
        snapshots.push(path);
        Ok(())
    };

    let (max_steps, t_end) = match spec.end {
        EndCondition::Steps(n) => (n, f64::INFINITY),
        EndCondition::Time(t) => (100_000_000, t),
        EndCondition::Stationary { max_steps, .. } => (max_steps, f64::INFINITY),
    };
    let mut stationary = match spec.end {
        EndCondition::Stationary {
            threshold, window, ..
        } => Some(Stationarity {
            window: window as usize,
            threshold,
            history: Default::default(),
        }),
        _ => None,
    };
    if let EndCondition::Time(t) = spec.end {
        if !(t >= 0.0) {
            return Err(Error::config("run.t_end must be non-negative"));
        }
    }

    let mut min_f = sim.field.f.iter().copied().fold(f64::INFINITY, f64::min);
    let done = |sim: &Simulation| sim.step >= max_steps || sim.t >= t_end * (1.0 - 1e-14);
    if !done(&sim) {
        ts.push(&record(&sim, tracked, (Vec2::zeros(), 0.0), &spec.probes))?;
        if cfg.fields_every > 0 {
            snapshot(&sim)?;
        }
    }
    while !done(&sim) {
        let cap = t_end.is_finite().then_some(t_end - sim.t);
        let report = sim.advance(cap)?;
        min_f = min_f.min(report.min_f);
        let load = tracked.map_or((Vec2::zeros(), 0.0), |b| report.loads[b]);
        let settled = match (&mut stationary, tracked) {
            (Some(st), Some(b)) => st.settled(body_speed(&sim, b)),
            _ => false,
        };
        let last = settled || done(&sim);
        if last || sim.step % spec.output_every == 0 {
            ts.push(&record(&sim, tracked, load, &spec.probes))?;
        }
        if cfg.fields_every > 0 && (last || sim.step % cfg.fields_every == 0) {
            snapshot(&sim)?;
        }
        if settled {
            break;
        }
    }
    ts.finish()?;

    let summary = RunSummary {
        steps: sim.step,
        t: sim.t,
        initial_mass,
        final_mass: sim.total_mass(),
        min_f,
        timeseries: ts_path,
        snapshots,
    };
    let mut text = format!(
        "scenario = \"{}\"\nsteps = {}\nt = {:.16e}\ninitial_mass = {:.16e}\nfinal_mass = {:.16e}\nmass_drift = {:.6e}\nmin_f = {:.6e}\n",
        spec.name,
        summary.steps,
        summary.t,
        summary.initial_mass,
        summary.final_mass,
        summary.mass_drift(),
        summary.min_f
    );
    if !cfg.deterministic {
        text.push_str(&format!(
            "elapsed_seconds = {:.3}\n",
            started.elapsed().as_secs_f64()
        ));
    }
    let path = dir.join("summary.txt");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}

/// Builds the scenario and its first geometry without stepping.
pub fn validate(cfg: &RunConfig) -> Result<String> {
    let spec = &cfg.scenario;
    spec.validate()?;
    let sim = Simulation::new(spec.setup())?;
    let cells = &sim.geometry().cells;
    let count = |code| cells.iter().filter(|c| c.cell_type.code() == code).count();
    Ok(format!(
        "scenario {}: {}x{} cells ({} gas, {} cut, {} solid), {} velocities, {} control volumes, dt {:.6e}",
        spec.name,
        sim.grid.nx,
        sim.grid.ny,
        count(0),
        count(1),
        count(2),
        sim.vgrid.len(),
        sim.control_volumes().n_masters(),
        sim.cfl_timestep()?
    ))
}
