//! Command dispatch and output files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gridnls::grid::GridSpec;
use gridnls::harness::{
    check_properties, concavity_check, find_threshold, grid_ground_state, phase_table,
    sweep_epsilon, GridModel, ProbeSettings, SweepConfig, SweepFamily,
};
use gridnls::periodic::{
    beta_for_theorem, build_cell, build_strip_set, TheoremCase, VertexSetSpec,
};
use gridnls::planar::planar_ground_state;
use gridnls::{HarnessError, PlanarError};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{BetaMode, Command, FamilyKind, RunConfig, Violation};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {} violation(s)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Planar(#[from] PlanarError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Read { .. } | CliError::Write { .. } => "io",
            CliError::Parse(_) | CliError::Invalid(_) => "config",
            CliError::Csv(_) | CliError::Json(_) => "output",
            CliError::Harness(_) | CliError::Planar(_) => "run",
        }
    }

    /// The JSON error record.
    pub fn record(&self) -> Value {
        let mut v = json!({ "status": "error", "kind": self.kind(), "message": self.to_string() });
        if let CliError::Invalid(list) = self {
            v["violations"] = json!(list);
        }
        v
    }
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.into(),
        source,
    })?;
    Ok(toml::from_str(&text)?)
}

/// Applies the top-level seed and caps the worker count.
pub fn resolve(mut cfg: RunConfig) -> RunConfig {
    if let Some(seed) = cfg.seed {
        cfg.starts.seed = seed;
        if let Some(p) = cfg.properties.as_mut() {
            p.seed = seed;
        }
    }
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    cfg.workers = cfg.workers.clamp(1, cores);
    cfg
}

struct Out<'a>(&'a Path);

impl Out<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|source| CliError::Write { path, source })
    }

    fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(self.file(name)?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|source| CliError::Write {
            path: self.path(name),
            source,
        })
    }

    fn json(&self, name: &str, v: &Value) -> Result<(), CliError> {
        let mut f = self.file(name)?;
        serde_json::to_writer_pretty(&mut f, v)?;
        writeln!(f)
            .and_then(|_| f.flush())
            .map_err(|source| CliError::Write {
                path: self.path(name),
                source,
            })
    }

    fn dump(
        &self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let mut f = self.file(name)?;
        write(&mut f)
            .and_then(|_| f.flush())
            .map_err(|source| CliError::Write {
                path: self.path(name),
                source,
            })
    }
}

/// Grid model with `α`, `β` and the vertex set fixed by `beta_mode`.
fn grid_model(cfg: &RunConfig) -> Result<GridModel, CliError> {
    let g = cfg.grid;
    let e = cfg.energy;
    let grid = GridSpec::new(g.epsilon, g.window, g.samples).map_err(HarnessError::from)?;
    let theorem = |case, vset: &VertexSetSpec| -> Result<(f64, f64), CliError> {
        let cell = build_cell(vset).map_err(HarnessError::from)?;
        let v = match vset {
            VertexSetSpec::ZPeriodic { v, .. } => *v,
            _ => (0, 0),
        };
        Ok(beta_for_theorem(case, &cell, v, g.epsilon))
    };
    let (vset, alpha, beta) = match e.beta_mode {
        BetaMode::Explicit => (cfg.vertex_set.clone(), e.alpha, e.beta),
        BetaMode::Thm15 => {
            let (a, b) = theorem(TheoremCase::Z2, &cfg.vertex_set)?;
            (cfg.vertex_set.clone(), a, b)
        }
        BetaMode::Thm16 => {
            let (a, b) = theorem(TheoremCase::ZLine, &cfg.vertex_set)?;
            (cfg.vertex_set.clone(), a, b)
        }
        BetaMode::Thm17 => {
            let (a, b) = theorem(TheoremCase::ZStrip, &cfg.vertex_set)?;
            let r = e.strip_radius.unwrap_or_default();
            let strip =
                build_strip_set(&cfg.vertex_set, r, g.epsilon).map_err(HarnessError::from)?;
            (strip, a, b)
        }
    };
    Ok(GridModel {
        grid,
        vset,
        p: e.p,
        q: e.q,
        alpha,
        beta,
    })
}

fn probe(cfg: &RunConfig) -> ProbeSettings {
    ProbeSettings {
        starts: cfg.starts,
        sign: cfg.sign,
        solver: cfg.solver,
    }
}

/// Runs the configured command, writing every output under `out`.
/// Returns the summary that was written to `summary.json`.
pub fn execute(cfg: &RunConfig, out_dir: &Path) -> Result<Value, CliError> {
    cfg.validate().map_err(CliError::Invalid)?;
    fs::create_dir_all(out_dir).map_err(|source| CliError::Write {
        path: out_dir.into(),
        source,
    })?;
    let out = Out(out_dir);
    let (result, pass) = match cfg.command {
        Command::SolveGrid => solve_grid(cfg, &out)?,
        Command::SolvePlanar => solve_planar(cfg, &out)?,
        Command::SweepEpsilon => sweep(cfg, &out)?,
        Command::FindThreshold => threshold(cfg, &out)?,
        Command::PhaseTable => phase(cfg, &out)?,
        Command::CheckProperties => properties(cfg, &out)?,
    };
    let summary = json!({
        "status": "ok",
        "command": cfg.command,
        "config": cfg,
        "result": result,
        "pass": pass,
    });
    out.json("summary.json", &summary)?;
    Ok(summary)
}

type Outcome = Result<(Value, Value), CliError>;

fn solve_grid(cfg: &RunConfig, out: &Out) -> Outcome {
    let model = grid_model(cfg)?;
    let res = grid_ground_state(&model, cfg.energy.mu, &cfg.starts, &cfg.solver)?;
    out.dump("state.dump", |f| res.state.write_dump(f))?;
    if !res.trace.is_empty() {
        out.csv("trace.csv", &res.trace)?;
    }
    let mut result = json!({
        "alpha": model.alpha,
        "beta": model.beta,
        "vertex_set": model.vset,
        "energy": res.energy,
        "lambda": res.lambda,
        "iterations": res.iterations,
        "stop": res.stop,
        "converged": res.converged,
        "projected_grad_norm": res.projected_grad_norm,
        "el_residual": res.diagnostics,
        "mass": res.state.mass(),
    });
    let mut pass = json!({ "converged": res.converged });
    if let Some(c) = &cfg.concavity {
        let rep = concavity_check(
            &model,
            &c.mus,
            c.level_tol,
            c.concavity_tol,
            &cfg.starts,
            &cfg.solver,
        )?;
        #[derive(Serialize)]
        struct Level {
            mu: f64,
            level: f64,
            converged: bool,
        }
        let rows: Vec<Level> = (0..rep.mus.len())
            .map(|k| Level {
                mu: rep.mus[k],
                level: rep.levels[k],
                converged: rep.converged[k],
            })
            .collect();
        out.csv("concavity.csv", &rows)?;
        pass["concave"] = json!(rep.concave && rep.nonpositive);
        result["concavity"] = json!(rep);
    }
    Ok((result, pass))
}

fn solve_planar(cfg: &RunConfig, out: &Out) -> Outcome {
    let pl = cfg.planar.expect("validated");
    let half = (pl.box_radius / pl.h).ceil() as usize;
    let e = cfg.energy;
    let res = planar_ground_state(
        pl.kind,
        e.p,
        e.q,
        e.mu,
        half,
        pl.h,
        &pl.settings,
        &cfg.solver,
    )?;
    out.dump("planar.dump", |f| res.state.write_dump(f))?;
    if !res.trace.is_empty() {
        out.csv("trace.csv", &res.trace)?;
    }
    let decayed = res.diagnostics.boundary_ratio <= pl.settings.boundary_tol;
    let result = json!({
        "kind": pl.kind.name(),
        "energy": res.energy,
        "lambda": res.lambda,
        "iterations": res.iterations,
        "stop": res.stop,
        "converged": res.converged,
        "projected_grad_norm": res.projected_grad_norm,
        "diagnostics": res.diagnostics,
        "mass": res.state.mass(),
    });
    Ok((
        result,
        json!({ "converged": res.converged, "decayed": decayed }),
    ))
}

fn sweep(cfg: &RunConfig, out: &Out) -> Outcome {
    let sw = cfg.sweep.clone().expect("validated");
    let vset = cfg.vertex_set.clone();
    let family = match sw.family {
        FamilyKind::Plane => SweepFamily::Plane { vset },
        FamilyKind::Line => SweepFamily::Line { vset },
        FamilyKind::Strip => SweepFamily::Strip {
            vset,
            r: sw.r.unwrap_or_default(),
        },
    };
    let config = SweepConfig {
        family,
        p: cfg.energy.p,
        q: cfg.energy.q,
        mu: cfg.energy.mu,
        epsilons: sw.epsilons,
        samples: sw.samples,
        window_radius: sw.window_radius,
        reference: sw.reference,
        starts: cfg.starts,
        solver: cfg.solver,
        workers: cfg.workers,
    };
    let run = sweep_epsilon(&config)?;
    out.csv("sweep.csv", &run.report.rows)?;
    for (k, s) in run.states.iter().enumerate() {
        out.dump(&format!("grid_{k}.dump"), |f| s.write_dump(f))?;
    }
    out.dump("reference.dump", |f| run.reference.write_dump(f))?;
    let pass = json!({ "trend": run.report.trend.pass });
    Ok((json!(run.report), pass))
}

fn threshold(cfg: &RunConfig, out: &Out) -> Outcome {
    let t = cfg.threshold.expect("validated");
    let model = grid_model(cfg)?;
    let rep = find_threshold(&model, t.mu_lo, t.mu_hi, t.iters, &probe(cfg))?;
    out.csv("threshold.csv", &rep.probes)?;
    Ok((json!(rep), json!({ "bracketed": true })))
}

fn phase(cfg: &RunConfig, out: &Out) -> Outcome {
    let ph = cfg.phase.as_ref().expect("validated");
    let model = grid_model(cfg)?;
    let cells = phase_table(
        &model,
        &ph.p_list,
        &ph.q_list,
        &ph.mu_list,
        &ph.cutoffs,
        &probe(cfg),
        cfg.workers,
    )?;
    out.csv("phase.csv", &cells)?;
    let mismatches = cells.iter().filter(|c| c.mismatch).count();
    let result = json!({ "cells": cells.len(), "mismatches": mismatches });
    Ok((result, json!({ "agrees": mismatches == 0 })))
}

fn properties(cfg: &RunConfig, out: &Out) -> Outcome {
    let settings = cfg.properties.clone().unwrap_or_default();
    let rows = check_properties(&settings)?;
    out.csv("properties.csv", &rows)?;
    Ok((json!({ "rows": rows.len() }), json!({})))
}
