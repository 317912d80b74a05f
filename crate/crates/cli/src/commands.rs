use std::path::Path;

use serde::Serialize;
use serde_json::json;

use nlsync_core::linalg3::CertificateReport;
use nlsync_core::model::{divergence, find_equilibria, State3};
use nlsync_core::ode_sim::{integrate_ode, lyapunov_spectrum_of, LyapunovConfig, NewtonLeipnik};
use nlsync_core::pde::neumann_eigenvalue;
use nlsync_core::sync::{
    check_condition_313, mode_certificates, run_master_slave, RunStatus, SyncOptions,
};

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::output::{timestamp, CsvWriter, Failure, Manifest, OutputDir};

/// `err_sup` below this at the final time counts as synchronized.
pub const SYNC_THRESHOLD: f64 = 1e-3;

/// Largest mode index reported by `stability-check`.
pub const MAX_REPORTED_MODE: usize = 64;

#[derive(Debug, Serialize)]
struct EquilibriumJson {
    point: [f64; 3],
    eigenvalues: [[f64; 2]; 3],
    stable: bool,
}

/// JSON report printed to stdout and, with `--out`, saved as `file`.
fn emit_report<T: Serialize>(report: &T, out: Option<&Path>, file: &str) -> Result<(), CliError> {
    print!("{}", crate::output::to_json(report));
    if let Some(root) = out {
        let mut dir = OutputDir::open(root)?;
        dir.write_json(file, report)?;
    }
    Ok(())
}

pub fn equilibria(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<(), CliError> {
    let report: Vec<EquilibriumJson> = find_equilibria(&cfg.params)
        .into_iter()
        .map(|r| EquilibriumJson {
            point: r.point.to_array(),
            eigenvalues: r.eigenvalues.as_pairs(),
            stable: r.stable,
        })
        .collect();
    emit_report(&report, out, "equilibria.json")
}

pub fn ode(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let started = timestamp();
    let mut dir = OutputDir::open(out)?;
    let dt = cfg.stepper.dt;
    let run = integrate_ode(cfg.u0, &cfg.params, dt, cfg.t_end);
    let (run, failure) = match run {
        Ok(r) => (Some(r), None),
        Err(nlsync_core::SimError::Divergence { step, time }) => (
            None,
            Some(Failure {
                time,
                step,
                field: "ode".into(),
                component: 0,
            }),
        ),
        Err(e) => return Err(CliError::Config(e.to_string())),
    };

    let mut summary = json!({});
    if let Some(run) = &run {
        let mut w = CsvWriter::create(&dir.path("states.csv"), &["t", "u1", "u2", "u3"])?;
        for (t, s) in run.t.iter().zip(&run.states) {
            w.row(&[*t, s.u1, s.u2, s.u3])?;
        }
        let rows = w.finish()?;
        dir.record("states.csv", rows);
        summary = json!({ "steps": rows - 1, "sup_norm": run.sup_norm() });
    }
    let failed = failure.as_ref().map(|f| f.time);
    write_manifest(&mut dir, "ode", cfg, started, failure, summary)?;
    match failed {
        Some(t) => Err(CliError::BlowUp(format!(
            "ODE state became non-finite at t = {t}"
        ))),
        None => Ok(()),
    }
}

pub fn lyapunov(cfg: &ScenarioConfig, out: Option<&Path>) -> Result<(), CliError> {
    if cfg.t_end < 1000.0 {
        eprintln!(
            "warning: t_end = {} is short; exponents typically need t_end >= 1000",
            cfg.t_end
        );
    }
    let lc = LyapunovConfig {
        dt: cfg.stepper.dt,
        t_end: cfg.t_end,
        transient: cfg.transient,
        reortho_interval: cfg.reortho_interval,
    };
    let spec =
        lyapunov_spectrum_of(&NewtonLeipnik(cfg.params), cfg.u0.to_array(), &lc).map_err(|e| {
            match e {
                nlsync_core::SimError::Divergence { .. } => CliError::BlowUp(e.to_string()),
                other => CliError::Config(other.to_string()),
            }
        })?;
    let report = json!({
        "exponents": spec.exponents,
        "horizon": spec.horizon,
        "sum": spec.sum(),
        "divergence": divergence(&cfg.params),
        "initial_state": cfg.u0.to_array(),
        "dt": lc.dt,
        "t_end": lc.t_end,
        "transient": lc.transient,
        "reortho_interval": lc.reortho_interval,
    });
    emit_report(&report, out, "lyapunov.json")
}

pub fn sync(cfg: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let started = timestamp();
    let mut dir = OutputDir::open(out)?;
    let master = cfg.master_ic.field(cfg.grid, cfg.ic_modulation);
    let slave = cfg.slave_ic.field(cfg.grid, cfg.ic_modulation);
    let opts = SyncOptions {
        t_end: cfg.t_end,
        controls_on: cfg.controls_on,
        snapshot_count: cfg.snapshot_count,
        record_every: 1,
    };

    let mut snapshot_files = Vec::new();
    let mut io_error = None;
    let outcome = run_master_slave(&master, &slave, &cfg.params, &cfg.stepper, &opts, |s| {
        if io_error.is_some() {
            return;
        }
        for (kind, field) in [("master", s.master), ("slave", s.slave)] {
            let name = format!("{kind}_{:04}.csv", s.index);
            let res =
                CsvWriter::create(&dir.path(&name), &["x", "c1", "c2", "c3"]).and_then(|mut w| {
                    for i in 0..field.len() {
                        let u = field.at(i);
                        w.row(&[field.grid.x(i), u.u1, u.u2, u.u3])?;
                    }
                    w.finish()
                });
            match res {
                Ok(rows) => snapshot_files.push((name, rows)),
                Err(e) => {
                    io_error = Some(e);
                    return;
                }
            }
        }
    })
    .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(e) = io_error {
        return Err(e);
    }

    let tr = &outcome.trace;
    let mut w = CsvWriter::create(
        &dir.path("trace.csv"),
        &[
            "t",
            "err_sup",
            "V",
            "I_term",
            "J_term",
            "cond313_lhs",
            "cond313_rhs",
        ],
    )?;
    for i in 0..tr.len() {
        w.row(&[
            tr.t[i],
            tr.err_sup[i],
            tr.v[i],
            tr.i_term[i],
            tr.j_term[i],
            tr.cond313_lhs[i],
            tr.cond313_rhs[i],
        ])?;
    }
    dir.record("trace.csv", w.finish()?);
    for (name, rows) in &snapshot_files {
        dir.record(name, *rows);
    }

    let completed = outcome.status == RunStatus::Completed;
    let final_err = outcome.final_err_sup();
    let synchronized = completed && final_err < SYNC_THRESHOLD;
    let summary = json!({
        "controls": if cfg.controls_on { "on" } else { "off" },
        "synchronized": synchronized,
        "sync_threshold": SYNC_THRESHOLD,
        "final_err_sup": final_err,
        "settle_time": tr.settle_time(SYNC_THRESHOLD),
        "v_initial": tr.v.first(),
        "v_final": tr.v.last(),
        "v_decay_rate": tr.decay_rate_first_half(),
        "u_sup": outcome.u_sup,
        "u3_sup": outcome.u_sup[2],
        "snapshots": outcome.snapshots_taken,
        "records": tr.len(),
    });
    let failure = match outcome.status {
        RunStatus::Completed => None,
        RunStatus::BlowUp {
            time,
            step,
            component,
            field,
        } => Some(Failure {
            time,
            step,
            field: field.to_string(),
            component,
        }),
    };
    let failed = failure.as_ref().map(|f| (f.time, f.field.clone()));
    write_manifest(&mut dir, "sync", cfg, started, failure, summary)?;
    match failed {
        Some((t, field)) => Err(CliError::BlowUp(format!(
            "{field} field became non-finite at t = {t}"
        ))),
        None => Ok(()),
    }
}

fn write_manifest(
    dir: &mut OutputDir,
    command: &str,
    cfg: &ScenarioConfig,
    started: u64,
    failure: Option<Failure>,
    summary: serde_json::Value,
) -> Result<(), CliError> {
    let manifest = Manifest {
        schema_version: 1,
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.raw.entries().clone(),
        started_at_unix: started,
        finished_at_unix: timestamp(),
        status: if failure.is_some() {
            "blow_up"
        } else {
            "completed"
        }
        .to_string(),
        failure,
        outputs: dir.files().to_vec(),
        summary,
    };
    crate::output::write_json_file(&dir.path("manifest.json"), &manifest)
}

/// Where the bound on the master state comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateBound {
    pub u_sup: [f64; 3],
}

impl StateBound {
    pub fn from_u3(u3_sup: f64) -> Self {
        Self {
            u_sup: [0.0, 0.0, u3_sup.abs()],
        }
    }

    pub fn from_manifest(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read manifest {}: {e}", path.display()))
        })?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("manifest {} is not JSON: {e}", path.display()))
        })?;
        let sup = v["summary"]["u_sup"]
            .as_array()
            .filter(|a| a.len() == 3)
            .and_then(|a| {
                let xs: Option<Vec<f64>> = a.iter().map(|x| x.as_f64()).collect();
                xs
            })
            .ok_or_else(|| {
                CliError::Config(format!("manifest {} has no summary.u_sup", path.display()))
            })?;
        Ok(Self {
            u_sup: [sup[0], sup[1], sup[2]],
        })
    }

    /// Corners of the box `|uⱼ| ≤ u_sup[j]`, duplicates removed.
    pub fn corners(&self) -> Vec<State3> {
        let mut out: Vec<State3> = Vec::new();
        for mask in 0..8 {
            let s = |j: usize| {
                if mask & (1 << j) != 0 {
                    -self.u_sup[j]
                } else {
                    self.u_sup[j]
                }
            };
            let c = State3::new(s(0), s(1), s(2));
            if !out.contains(&c) {
                out.push(c);
            }
        }
        out
    }
}

#[derive(Debug, Serialize)]
struct ModeSummary {
    mode: usize,
    lambda: f64,
    stable: bool,
    /// Largest (least negative) values over the sampled states.
    max_trace: f64,
    max_det: f64,
    max_compound_det: f64,
}

pub fn stability_check(
    cfg: &ScenarioConfig,
    bound: StateBound,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let p = &cfg.params;
    let cond = check_condition_313(bound.u_sup[2], &cfg.grid, p);
    let max_mode = (cfg.grid.n() - 1).min(MAX_REPORTED_MODE);
    let corners = bound.corners();
    let per_corner: Vec<Vec<CertificateReport>> = corners
        .iter()
        .map(|u| mode_certificates(max_mode, *u, &cfg.grid, p))
        .collect();
    let modes: Vec<ModeSummary> = (0..=max_mode)
        .map(|i| {
            let reps = per_corner.iter().map(|c| c[i]);
            let fold = |f: fn(&CertificateReport) -> f64| {
                reps.clone()
                    .map(|r| f(&r))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            ModeSummary {
                mode: i,
                lambda: neumann_eigenvalue(i, &cfg.grid),
                stable: reps.clone().all(|r| r.stable),
                max_trace: fold(|r| r.trace),
                max_det: fold(|r| r.det),
                max_compound_det: fold(|r| r.compound_det),
            }
        })
        .collect();
    let report = json!({
        "u3_sup": bound.u_sup[2],
        "u_sup": bound.u_sup,
        "k": p.k,
        "d3": p.d3,
        "lambda1": neumann_eigenvalue(1, &cfg.grid),
        "lhs": cond.lhs,
        "rhs": cond.rhs,
        "satisfied": cond.satisfied,
        "k_min": cond.k_min,
        "sampled_states": corners.iter().map(|c| c.to_array()).collect::<Vec<_>>(),
        "all_modes_stable": modes.iter().all(|m| m.stable),
        "modes": modes,
    });
    emit_report(&report, out, "stability.json")
}
