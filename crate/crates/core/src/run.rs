//! Batch driver: config in, CSV/JSON artifacts out.

use crate::boundary::BoundaryPotential;
use crate::charges::{ChargeModel, ChargeState};
use crate::config::RunConfig;
use crate::diagnostics::{Recorder, CSV_HEADER};
use crate::geometry::ConvexDomain;
use crate::greens::{CutoffProfile, Flavor, GreenEvaluator};
use crate::plasma::{density_moments, Interaction, Norm, ParticleEnsemble, PlasmaField};
use crate::system::{CoupledModel, SystemState};
use crate::{Error, Result};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "PLASMA_CHARGE_OUT";

/// Dirichlet runs stop once a charge is this close to the wall (in inradii).
pub const DIRICHLET_STOP_FRACTION: f64 = 0.01;

pub const CHARGES_HEADER: &str = "t,alpha,xi_x,xi_y,eta_x,eta_y,energy_drift";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunEvent {
    pub t: f64,
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub status: String,
    pub reason: Option<String>,
    pub energy_drift_rel: f64,
    pub l1_initial: f64,
    pub l1_final: f64,
    pub q_final: f64,
    pub events: Vec<RunEvent>,
    pub steps: usize,
    pub t_final: f64,
    pub reflections: usize,
    pub absorbed_weight: f64,
    pub beta_max_ratio: f64,
    pub beta_min_ratio: f64,
    pub beta_flagged: usize,
    pub beta_episodes: usize,
    pub min_dist_boundary: f64,
    pub config_hash: String,
}

impl Summary {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Everything needed to step a configured run.
pub struct Setup {
    pub domain: Arc<ConvexDomain>,
    pub model: CoupledModel,
    pub state: SystemState,
}

/// Validate the config and wire kernels and initial data.
pub fn setup(config: &RunConfig) -> Result<Setup> {
    let domain = Arc::new(config.validate()?);
    let evaluator = Arc::new(GreenEvaluator::for_domain(
        domain.clone(),
        config.flavor,
        config.bem_nodes,
    )?);
    let h_n = config.h_n_density()?;
    let h_cha = config.h_cha_density()?;
    let mut plasma = PlasmaField::new(evaluator.clone(), BoundaryPotential::new(&evaluator, &h_n)?);
    if config.softening > 0.0 {
        plasma.interaction = Interaction::Softened(CutoffProfile::new(config.softening)?);
    }
    let charges = ChargeModel::new(evaluator, &h_cha, config.charges.len())?;
    let model = CoupledModel {
        domain: domain.clone(),
        plasma,
        charges,
        rule: config.boundary_rule,
    };
    let ens = if config.plasma.is_empty() {
        ParticleEnsemble::default()
    } else {
        ParticleEnsemble::from_boxes(&config.plasma, config.seed)?
    };
    let cs = ChargeState::new(
        config.charges.iter().map(|c| c.xi).collect(),
        config.charges.iter().map(|c| c.eta).collect(),
    )?;
    let state = model.initialize(ens, cs)?;
    Ok(Setup {
        domain,
        model,
        state,
    })
}

fn create(dir: &Path, name: &str, hash: &str) -> Result<BufWriter<File>> {
    let mut f = BufWriter::new(File::create(dir.join(name))?);
    writeln!(f, "# config_hash={hash}")?;
    Ok(f)
}

fn plot_script(hash: &str) -> String {
    format!(
        "# config_hash={hash}\n\
         set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set key autotitle columnhead\n\
         set multiplot layout 2,2\n\
         set title 'energy'\n\
         plot 'diagnostics.csv' using 1:2 with lines\n\
         set title 'l1'\n\
         plot 'diagnostics.csv' using 1:6 with lines\n\
         set title 'Q'\n\
         plot 'diagnostics.csv' using 1:11 with lines\n\
         set title 'charge wall distance'\n\
         plot 'diagnostics.csv' using 1:14 with lines\n\
         unset multiplot\n"
    )
}

fn relative(e: f64, e0: f64) -> f64 {
    let scale = if e0.abs() > 1e-12 { e0.abs() } else { 1.0 };
    (e - e0).abs() / scale
}

/// Step a configured run to `t_end`, writing artifacts into `out`.
///
/// Runtime events end the run early with a non-`ok` status; configuration
/// errors are returned as `Err`.
pub fn run(config: &RunConfig, out: &Path) -> Result<Summary> {
    let hash = config.hash()?;
    let Setup {
        domain,
        model,
        mut state,
    } = setup(config)?;
    std::fs::create_dir_all(out)?;
    let mut diag = create(out, "diagnostics.csv", &hash)?;
    writeln!(diag, "{CSV_HEADER}")?;
    let mut charges_csv = create(out, "charges.csv", &hash)?;
    writeln!(charges_csv, "{CHARGES_HEADER}")?;
    std::fs::write(out.join("plot.gp"), plot_script(&hash))?;

    let h_n = config.h_n_density()?;
    let beta = config.diagnostics.beta && config.flavor == Flavor::Neumann;
    let mut recorder = Recorder::new(state.plasma.len(), config.k1, beta);
    recorder.observe(&state, &domain, &h_n, 0.0)?;
    let e0 = model.energy(&state)?;
    let l1_initial = density_moments(&state.plasma, Norm::L1);
    let mut drift = 0.0f64;
    let mut events = Vec::new();
    let mut reflections = 0usize;
    let mut status = "ok".to_string();
    let mut reason = None;
    let steps = (config.t_end / config.dt).round() as usize;
    let stop_distance = DIRICHLET_STOP_FRACTION * domain.inradius();

    let write_rows = |state: &SystemState,
                      recorder: &Recorder,
                      energy: &crate::system::EnergyBreakdown,
                      drift: f64,
                      diag: &mut BufWriter<File>,
                      charges_csv: &mut BufWriter<File>|
     -> Result<()> {
        recorder.record(state, energy).write_csv_row(diag)?;
        for a in 0..state.charges.len() {
            let (x, v) = (state.charges.xi[a], state.charges.eta[a]);
            writeln!(
                charges_csv,
                "{},{},{},{},{},{},{}",
                state.t, a, x.x, x.y, v.x, v.y, drift
            )?;
        }
        Ok(())
    };
    write_rows(&state, &recorder, &e0, 0.0, &mut diag, &mut charges_csv)?;
    if config.snapshot_every > 0 {
        snapshot(out, &hash, &state, 0)?;
    }

    let mut done = 0;
    let mut stability_noted = false;
    for n in 1..=steps {
        match model.step(&mut state, config.dt) {
            Ok(report) => {
                reflections += report
                    .events
                    .iter()
                    .filter(|e| e.kind == crate::plasma::EventKind::Reflect)
                    .count();
                if report.absorbed_weight > 0.0 {
                    events.push(RunEvent {
                        t: state.t,
                        kind: "absorption".into(),
                        detail: format!("weight {}", report.absorbed_weight),
                    });
                }
                if report.stability_exceeded && !stability_noted {
                    stability_noted = true;
                    events.push(RunEvent {
                        t: state.t,
                        kind: "stability bound exceeded".into(),
                        detail: format!("dt {} above 0.1 min(1, d^2)", config.dt),
                    });
                }
            }
            Err(e) => {
                events.push(RunEvent {
                    t: state.t,
                    kind: e.reason().into(),
                    detail: e.to_string(),
                });
                status = "error".into();
                reason = Some(e.reason().to_string());
                break;
            }
        }
        done = n;
        recorder.observe(&state, &domain, &h_n, config.dt)?;
        let near_wall = config.flavor == Flavor::Dirichlet
            && state
                .charges
                .xi
                .iter()
                .any(|x| -domain.signed_distance(x) < stop_distance);
        if n % config.output_stride == 0 || n == steps || near_wall {
            let e = model.energy(&state)?;
            drift = drift.max(relative(e.total, e0.total));
            write_rows(&state, &recorder, &e, drift, &mut diag, &mut charges_csv)?;
        }
        if config.snapshot_every > 0 && n % config.snapshot_every == 0 {
            snapshot(out, &hash, &state, n)?;
        }
        if near_wall {
            let reason_text = Error::ChargeReachedBoundary(0).reason();
            events.push(RunEvent {
                t: state.t,
                kind: reason_text.into(),
                detail: format!("charge within {stop_distance:e} of the boundary"),
            });
            status = "stopped".into();
            reason = Some(reason_text.into());
            break;
        }
    }
    diag.flush()?;
    charges_csv.flush()?;

    let (bmax, bmin, bflag, bep) = match &recorder.beta {
        Some(m) => (m.max_ratio, m.min_ratio, m.flagged, m.episodes),
        None => (1.0, 1.0, 0, 0),
    };
    let summary = Summary {
        status,
        reason,
        energy_drift_rel: drift,
        l1_initial,
        l1_final: density_moments(&state.plasma, Norm::L1),
        q_final: recorder.q,
        events,
        steps: done,
        t_final: state.t,
        reflections,
        absorbed_weight: state.absorbed_weight,
        beta_max_ratio: bmax,
        beta_min_ratio: bmin,
        beta_flagged: bflag,
        beta_episodes: bep,
        min_dist_boundary: recorder.min_dist_boundary,
        config_hash: hash,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(out.join("summary.json"), json + "\n")?;
    Ok(summary)
}

fn snapshot(out: &Path, hash: &str, state: &SystemState, step: usize) -> Result<()> {
    let mut f = create(out, &format!("particles_{step:06}.csv"), hash)?;
    state.plasma.write_snapshot(&mut f, state.t)?;
    f.flush()?;
    Ok(())
}

/// `--out`, then the environment override, then `./<default>`.
pub fn output_dir(flag: Option<&Path>, default: &str) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(p) => PathBuf::from(p),
            None => PathBuf::from(default),
        },
    }
}
