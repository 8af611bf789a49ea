//! Projected gradient descent over the admissible set with Armijo
//! backtracking. Fixed points of the iteration are exactly the candidates
//! the stationarity verifier targets.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::grid::{BoundaryField, Field};
use crate::objective::{
    objective_with_state, reduced_gradient_with_state, Bound, BoundaryBound, ProblemSpec,
};
use crate::operator::{control_to_state, ControlPair};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizeConfig {
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
    /// Stop when the norm of `w - P(w - g)` drops below this.
    pub grad_tol: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            max_iters: 500,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            initial_step: 1.0,
            grad_tol: 1e-8,
        }
    }
}

impl OptimizeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) || !(self.initial_step > 0.0) || !(self.armijo_c > 0.0) {
            return Err(Error::InvalidData(
                "optimizer tolerances and steps must be positive".into(),
            ));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidData("backtrack factor must lie in (0,1)".into()));
        }
        Ok(())
    }
}

/// One optimizer iteration record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeRow {
    pub iter: usize,
    pub j: f64,
    pub pg_norm: f64,
    pub step: f64,
    pub gateaux_defect: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeTrace {
    pub rows: Vec<OptimizeRow>,
    pub converged: bool,
    pub iterations: usize,
}

impl OptimizeTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,j,pg_norm,step,gateaux_defect\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iter, r.j, r.pg_norm, r.step, r.gateaux_defect
            );
        }
        s
    }
}

/// Nodewise projection onto the admissible set: `min(u, u_b)`, `min(v, v_b)`;
/// the identity under infinite bounds.
pub fn project_admissible(spec: &ProblemSpec, w: &ControlPair) -> ControlPair {
    let u = match &spec.u_bound {
        Bound::Field(ub) => Field::new(
            w.u.grid().clone(),
            w.u.values
                .iter()
                .zip(&ub.values)
                .map(|(u, b)| u.min(*b))
                .collect(),
        )
        .expect("finite projection"),
        Bound::Infinite => w.u.clone(),
    };
    let v = match &spec.v_bound {
        BoundaryBound::Field(vb) => BoundaryField::new(
            w.v.grid().clone(),
            w.v.values
                .iter()
                .zip(&vb.values)
                .map(|(v, b)| v.min(*b))
                .collect(),
        )
        .expect("finite projection"),
        BoundaryBound::Infinite => w.v.clone(),
    };
    ControlPair { u, v }
}

/// Projected gradient descent from `start` (zero controls when `None`).
///
/// Each iteration takes the steepest-descent direction from the reduced
/// gradient (the left-branch surrogate off Gâteaux points), projects the
/// trial point, and accepts by the Armijo certificate
/// `J(trial) <= J(w) - c/s * ||trial - w||²`. Terminates when
/// `||w - P(w - g)||` falls below the tolerance.
pub fn minimize(
    spec: &ProblemSpec,
    cfg: &OptimizeConfig,
    start: Option<ControlPair>,
) -> Result<(ControlPair, OptimizeTrace)> {
    cfg.validate()?;
    let mut w = project_admissible(
        spec,
        &start.unwrap_or_else(|| ControlPair::zeros(spec.grid().clone())),
    );
    let mut trace = OptimizeTrace { rows: Vec::new(), converged: false, iterations: 0 };
    let mut last_step = 0.0;

    for it in 0..=cfg.max_iters {
        let y = control_to_state(spec, &w)?;
        let j = objective_with_state(spec, &w, &y);
        let rg = reduced_gradient_with_state(spec, &w, &y)?;
        let g = ControlPair { u: rg.gu, v: rg.gv };
        let pg = w.axpy(-1.0, &project_admissible(spec, &w.axpy(-1.0, &g)));
        let pg_norm = pg.norm();

        trace.rows.push(OptimizeRow {
            iter: it,
            j,
            pg_norm,
            step: last_step,
            gateaux_defect: rg.defect,
        });
        trace.iterations = it;

        if pg_norm <= cfg.grad_tol {
            trace.converged = true;
            break;
        }
        if it == cfg.max_iters {
            break;
        }

        let mut s = cfg.initial_step;
        let mut accepted = false;
        for _ in 0..=cfg.max_backtracks {
            let trial = project_admissible(spec, &w.axpy(-s, &g));
            let dw = trial.axpy(-1.0, &w);
            let dec_sq = dw.norm().powi(2);
            if dec_sq == 0.0 {
                // projection arc collapsed: fixed point at this step size
                break;
            }
            let jt = crate::objective::objective(spec, &trial)?;
            if jt <= j - cfg.armijo_c / s * dec_sq {
                w = trial;
                last_step = s;
                accepted = true;
                break;
            }
            s *= cfg.backtrack;
        }
        if !accepted {
            // no descent along the projection arc: either a fixed point, or
            // a genuine line-search failure
            let probe = project_admissible(spec, &w.axpy(-cfg.initial_step, &g));
            if probe.axpy(-1.0, &w).norm() == 0.0 {
                trace.converged = true;
                break;
            }
            return Err(Error::LineSearchFailure { iteration: it, step: s });
        }
    }

    Ok((w, trace))
}
