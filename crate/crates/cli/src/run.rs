//! Task dispatch: build the problem, run the requested task, and write
//! `report.json`, `manifest.json`, and the field/table artifacts into the
//! output directory.
//!
//! Exit status: 0 when every verdict in the report passes, 2 on verdict
//! failure, 1 on solver or configuration errors (surfaced as `Err`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use nsoc_core::grid::{
    boundary_field_to_csv, field_to_csv, field_to_vtk, norm_omega, BoundaryField, Field,
};
use nsoc_core::nonsmooth::pc1_eval;
use nsoc_core::objective::objective_with_state;
use nsoc_core::operator::{
    bouligand_limit_test, control_to_state, control_to_state_report, wset_limit_test,
    BouligandLimitConfig, ControlPair,
};
use nsoc_core::optimize::minimize;
use nsoc_core::pde::solve_state;
use nsoc_core::stationarity::{check_b_stationarity, verify, VerifyOptions};

use crate::config::{load_control, RunConfig, TaskParams};
use crate::CliError;

pub struct RunOutcome {
    pub exit_code: i32,
    pub report_path: PathBuf,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("serialization: {e}")))?;
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

fn exit_from_verdicts(verdicts: &BTreeMap<String, bool>) -> i32 {
    if verdicts.values().all(|&v| v) {
        0
    } else {
        2
    }
}

/// Run a parsed config; `out_override` and `seed_override` take precedence
/// over the config values.
pub fn run(
    cfg: &RunConfig,
    out_override: Option<PathBuf>,
    seed_override: Option<u64>,
) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let out_dir = out_override.unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&out_dir)?;
    let seed = seed_override.or(cfg.seed);
    if cfg.task.randomized() && seed.is_none() {
        return Err(CliError::Config(format!(
            "seed: required for the randomized task '{}'",
            cfg.task.name()
        )));
    }

    let spec = cfg.problem.build(&cfg.base_dir)?;
    let exit_code = match &cfg.params {
        TaskParams::SolveState(p) => {
            let w = load_control(&spec, &p.u, &p.v, &cfg.base_dir)?;
            let (y, solve) = control_to_state_report(&spec, &w)?;
            write_text(&out_dir, "y.csv", &field_to_csv(&y))?;
            if p.vtk {
                write_text(&out_dir, "y.vtk", &field_to_vtk(&y, "state"))?;
            }
            let mut verdicts = BTreeMap::new();
            verdicts.insert("converged".to_string(), solve.converged);
            let report = json!({
                "task": "solve-state",
                "solve": solve,
                "state": {
                    "min": y.min(),
                    "max": y.max(),
                    "norm_l2": norm_omega(&y),
                },
                "files": {"y": "y.csv"},
                "verdicts": verdicts,
            });
            write_json(&out_dir, "report.json", &report)?;
            exit_from_verdicts(&verdicts)
        }

        TaskParams::Optimize(p) => {
            let start = match (&p.start_u, &p.start_v) {
                (Some(u), Some(v)) => Some(load_control(&spec, u, v, &cfg.base_dir)?),
                (Some(u), None) => Some(ControlPair {
                    u: u.sample_field(spec.grid(), &cfg.base_dir)?,
                    v: BoundaryField::zeros(spec.grid().clone()),
                }),
                (None, Some(v)) => Some(ControlPair {
                    u: Field::zeros(spec.grid().clone()),
                    v: v.sample_boundary(spec.grid(), &cfg.base_dir)?,
                }),
                (None, None) => None,
            };
            let (w, trace) = minimize(&spec, &p.config, start)?;
            write_text(&out_dir, "trace.csv", &trace.to_csv())?;
            write_text(&out_dir, "u.csv", &field_to_csv(&w.u))?;
            write_text(&out_dir, "v.csv", &boundary_field_to_csv(&w.v))?;

            // terminal B-stationarity sample check
            let y = control_to_state(&spec, &w)?;
            let j = objective_with_state(&spec, &w, &y);
            let bs = check_b_stationarity(&spec, &w, &y, p.check_probes, seed.unwrap_or(0), 1.0)?;
            let threshold = -1e-5 * (1.0 + j.abs());
            let mut verdicts = BTreeMap::new();
            verdicts.insert("converged".to_string(), trace.converged);
            verdicts.insert("b_stationarity".to_string(), bs.min_value >= threshold);
            let report = json!({
                "task": "optimize",
                "iterations": trace.iterations,
                "converged": trace.converged,
                "final_j": j,
                "final_pg_norm": trace.rows.last().map(|r| r.pg_norm),
                "b_stat": {"min_value": bs.min_value, "threshold": threshold, "n_probes": bs.n_probes},
                "files": {"trace": "trace.csv", "u": "u.csv", "v": "v.csv"},
                "verdicts": verdicts,
            });
            write_json(&out_dir, "report.json", &report)?;
            exit_from_verdicts(&verdicts)
        }

        TaskParams::Verify(p) => {
            let w = load_control(&spec, &p.u, &p.v, &cfg.base_dir)?;
            let opts = VerifyOptions {
                n_probes: p.n_probes,
                seed: seed.expect("checked above"),
                probe_radius: p.probe_radius,
                tol: p.tolerances.clone(),
            };
            let report = verify(&spec, &w, &opts)?;
            write_json(&out_dir, "report.json", &report)?;
            exit_from_verdicts(&report.verdicts)
        }

        TaskParams::BouligandLimit(p) => {
            let w = load_control(&spec, &p.u, &p.v, &cfg.base_dir)?;
            let limit_cfg = BouligandLimitConfig::with_k_range(p.sigma, p.k_lo, p.k_hi);
            let mut rng = ChaCha8Rng::seed_from_u64(seed.expect("checked above"));
            let g = spec.grid().clone();
            let probes: Vec<(Field, BoundaryField)> = (0..p.n_probes)
                .map(|_| {
                    (
                        Field::new(
                            g.clone(),
                            (0..g.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        )
                        .expect("finite"),
                        BoundaryField::new(
                            g.clone(),
                            (0..g.n_boundary()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                        )
                        .expect("finite"),
                    )
                })
                .collect();
            let table = bouligand_limit_test(&spec, &w, &limit_cfg, p.side, &probes)?;
            write_text(&out_dir, "convergence.csv", &table.to_csv())?;
            let finals: Vec<f64> = (0..p.n_probes).map(|pid| {
                table.probe_errors(pid).last().copied().unwrap_or(0.0)
            }).collect();
            let report = json!({
                "task": "bouligand-limit",
                "side": p.side,
                "sigma": p.sigma,
                "rows": table.rows,
                "final_errors": finals,
                "files": {"table": "convergence.csv"},
                "verdicts": BTreeMap::<String, bool>::new(),
            });
            write_json(&out_dir, "report.json", &report)?;
            0
        }

        TaskParams::WsetLimit(p) => {
            let w = load_control(&spec, &p.u, &p.v, &cfg.base_dir)?;
            let limit_cfg = BouligandLimitConfig::with_k_range(p.sigma, p.k_lo, p.k_hi);
            let f = p.f.sample_field(spec.grid(), &cfg.base_dir)?;
            let h = p.h.sample_boundary(spec.grid(), &cfg.base_dir)?;
            let res = wset_limit_test(&spec, &w, &limit_cfg, p.side, &f, &h)?;
            write_text(&out_dir, "convergence.csv", &res.table.to_csv())?;
            write_text(&out_dir, "e_numeric.csv", &field_to_csv(&res.e_numeric))?;
            write_text(&out_dir, "e_formula.csv", &field_to_csv(&res.e_formula))?;
            let report = json!({
                "task": "wset-limit",
                "side": p.side,
                "sigma": p.sigma,
                "rows": res.table.rows,
                "final_error": res.table.rows.last().map(|r| r.err_h1),
                "e_formula_norm": norm_omega(&res.e_formula),
                "files": {
                    "table": "convergence.csv",
                    "e_numeric": "e_numeric.csv",
                    "e_formula": "e_formula.csv"
                },
                "verdicts": BTreeMap::<String, bool>::new(),
            });
            write_json(&out_dir, "report.json", &report)?;
            0
        }

        TaskParams::ConvergenceStudy(p) => {
            let pc1 = cfg.problem.pc1.build()?;
            let pi = std::f64::consts::PI;
            let ystar = |x: f64, y: f64| (pi * x).sin() * (pi * y).sin();
            let mut errors = Vec::new();
            for &n in &p.nx_list {
                let g = nsoc_core::grid::build_grid(n, n, cfg.problem.grid.rect)?;
                let b = cfg.problem.b.sample_boundary(&g, &cfg.base_dir)?;
                let op = nsoc_core::grid::assemble_robin(&g, &b)?;
                let u = Field::from_fn(g.clone(), |x, y| {
                    2.0 * pi * pi * ystar(x, y) + pc1_eval(&pc1, ystar(x, y))
                });
                let (x0, y0, lx, ly) = (
                    cfg.problem.grid.rect[0],
                    cfg.problem.grid.rect[1],
                    cfg.problem.grid.rect[2],
                    cfg.problem.grid.rect[3],
                );
                let v = {
                    let bvals = b.clone();
                    BoundaryField::from_fn(g.clone(), |x, y| {
                        let gx = pi * (pi * x).cos() * (pi * y).sin();
                        let gy = pi * (pi * x).sin() * (pi * y).cos();
                        let mut flux = 0.0;
                        if (x - x0).abs() < 1e-14 {
                            flux += -gx;
                        } else if (x - (x0 + lx)).abs() < 1e-14 {
                            flux += gx;
                        }
                        if (y - y0).abs() < 1e-14 {
                            flux += -gy;
                        } else if (y - (y0 + ly)).abs() < 1e-14 {
                            flux += gy;
                        }
                        flux
                    })
                    .axpy(1.0, &{
                        let ytr = BoundaryField::from_fn(g.clone(), ystar);
                        BoundaryField::new(
                            g.clone(),
                            ytr.values
                                .iter()
                                .zip(&bvals.values)
                                .map(|(y, b)| y * b)
                                .collect(),
                        )
                        .expect("finite")
                    })
                };
                let solver = cfg.problem.solver.clone().unwrap_or_default();
                let (yh, _) = solve_state(&op, &pc1, &u, &v, &solver)?;
                let yex = Field::from_fn(g.clone(), ystar);
                errors.push(norm_omega(&yh.axpy(-1.0, &yex)));
            }
            let orders: Vec<f64> = errors
                .windows(2)
                .zip(p.nx_list.windows(2))
                .map(|(e, n)| {
                    let href = (n[1] - 1) as f64 / (n[0] - 1) as f64;
                    (e[0] / e[1]).ln() / href.ln()
                })
                .collect();
            let mut csv = String::from("nx,h,error_l2\n");
            for (&n, e) in p.nx_list.iter().zip(&errors) {
                csv.push_str(&format!(
                    "{},{:.16e},{:.16e}\n",
                    n,
                    cfg.problem.grid.rect[2] / (n - 1) as f64,
                    e
                ));
            }
            write_text(&out_dir, "convergence.csv", &csv)?;
            let report = json!({
                "task": "convergence-study",
                "nx": p.nx_list,
                "errors_l2": errors,
                "observed_orders": orders,
                "files": {"table": "convergence.csv"},
                "verdicts": BTreeMap::<String, bool>::new(),
            });
            write_json(&out_dir, "report.json", &report)?;
            0
        }
    };

    let manifest = json!({
        "config": cfg.raw,
        "package_version": env!("CARGO_PKG_VERSION"),
        "task": cfg.task.name(),
        "seed": seed,
        "wall_time_ms": started.elapsed().as_millis() as u64,
    });
    write_json(&out_dir, "manifest.json", &manifest)?;

    Ok(RunOutcome {
        exit_code,
        report_path: out_dir.join("report.json"),
    })
}
