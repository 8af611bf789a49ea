//! Elliptic solvers: the semismooth Newton solve of the nonlinear state
//! equation and the conjugate-gradient solves of the linearized Robin
//! problems that back every derivative and adjoint operator.
//!
//! All systems are posed in the symmetrized discrete form: with stiffness
//! `A` ([`crate::grid::RobinOperator`]) and lumped masses `M_Ω`, `M_Γ`,
//!
//! ```text
//!   state:       A y + M_Ω d(y)        = M_Ω u + M_Γ v
//!   linearized:  (A + M_Ω diag(a)) z   = M_Ω f + M_Γ h,   a >= 0
//! ```
//!
//! so every linear system is symmetric positive definite and adjoint
//! identities hold exactly at the discrete level.

use serde::{Deserialize, Serialize};

use crate::grid::{BoundaryField, Field, RobinOperator};
use crate::nonsmooth::{superpose, superpose_deriv_banded, Pc1Function};
use crate::{Error, Result};

/// Which branch slope the Newton generalized derivative uses at nodes lying
/// on the kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KinkBranch {
    /// Left slope `d1'`.
    Minus,
    /// Right slope `d2'` (default).
    Plus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative residual tolerance of the nonlinear solve.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    /// Backtracking factor of the damped Newton line search.
    pub armijo_backtrack: f64,
    pub armijo_max_backtracks: usize,
    /// Relative residual tolerance of the conjugate-gradient solves.
    pub linear_tol: f64,
    /// CG iteration cap; `None` means `10 * n`.
    pub linear_max_iter: Option<usize>,
    /// Branch slope used in the generalized derivative at kink nodes.
    pub kink_branch: KinkBranch,
    /// Relative half-width of the kink band used by the nonlinear solvers:
    /// nodes with `|y - t_bar| <= kink_band_rel * range(y)` count as on the
    /// kink.
    pub kink_band_rel: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            armijo_c: 1e-4,
            armijo_backtrack: 0.5,
            armijo_max_backtracks: 30,
            linear_tol: 1e-12,
            linear_max_iter: None,
            kink_branch: KinkBranch::Plus,
            kink_band_rel: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("newton_tol", self.newton_tol),
            ("armijo_c", self.armijo_c),
            ("armijo_backtrack", self.armijo_backtrack),
            ("linear_tol", self.linear_tol),
        ];
        for (name, v) in pos {
            if !(v > 0.0) {
                return Err(Error::InvalidData(format!("{name} must be positive, got {v}")));
            }
        }
        if self.newton_max_iter < 1 {
            return Err(Error::InvalidData("newton_max_iter must be >= 1".into()));
        }
        if self.armijo_backtrack >= 1.0 {
            return Err(Error::InvalidData("armijo_backtrack must be < 1".into()));
        }
        Ok(())
    }

    fn cg_max_iter(&self, n: usize) -> usize {
        self.linear_max_iter.unwrap_or(10 * n)
    }
}

/// Outcome of a nonlinear solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub cg_solves: usize,
    pub cg_iterations: usize,
    pub picard_steps: usize,
}

struct CgStats {
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Plain conjugate gradient for an SPD operator given as a matrix-vector
/// closure. Stops when `||r|| <= tol * (1 + ||b||)`.
fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgStats {
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
    let norm_b = dot(b, b).sqrt();
    let target = tol * (1.0 + norm_b);

    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rho = dot(&r, &r);
    if rho.sqrt() <= target {
        return CgStats { iterations: 0, residual: rho.sqrt(), converged: true };
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let alpha = rho / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rho_new = dot(&r, &r);
        if rho_new.sqrt() <= target {
            return CgStats { iterations: it, residual: rho_new.sqrt(), converged: true };
        }
        let beta = rho_new / rho;
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    CgStats { iterations: max_iter, residual: rho.sqrt(), converged: false }
}

/// Right-hand side `M_Ω f + M_Γ h` of the symmetrized systems.
fn assemble_rhs(op: &RobinOperator, f: &Field, h: &BoundaryField) -> Vec<f64> {
    let g = op.grid();
    let w_omega = g.weights_omega();
    let w_gamma = g.weights_gamma();
    let mut rhs: Vec<f64> = f
        .values
        .iter()
        .zip(&w_omega)
        .map(|(v, w)| v * w)
        .collect();
    for (k, &node) in g.boundary_nodes().iter().enumerate() {
        rhs[node] += w_gamma[k] * h.values[k];
    }
    rhs
}

fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve `(A + M_Ω diag(a)) z = M_Ω f + M_Γ h` by conjugate gradient.
/// The reaction coefficient must be nonnegative nodewise.
pub fn solve_linear(
    op: &RobinOperator,
    a: &Field,
    f: &Field,
    h: &BoundaryField,
    cfg: &SolverConfig,
) -> Result<Field> {
    if let Some((node, &value)) = a.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeCoefficient { node, value });
    }
    let g = op.grid();
    let w_omega = g.weights_omega();
    let rhs = assemble_rhs(op, f, h);
    let aw: Vec<f64> = a.values.iter().zip(&w_omega).map(|(a, w)| a * w).collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        op.matrix.apply(x, out);
        for i in 0..x.len() {
            out[i] += aw[i] * x[i];
        }
    };
    let mut z = vec![0.0; g.n_nodes()];
    let stats = conjugate_gradient(apply, &rhs, &mut z, cfg.linear_tol, cfg.cg_max_iter(g.n_nodes()));
    if !stats.converged {
        return Err(Error::LinearNonConvergence {
            residual: stats.residual,
            iterations: stats.iterations,
        });
    }
    Field::new(g.clone(), z)
}

/// Nonlinear residual `A y + M_Ω d(y) - rhs`.
fn state_residual(op: &RobinOperator, d: &Pc1Function, y: &Field, rhs: &[f64]) -> Vec<f64> {
    let w_omega = op.grid().weights_omega();
    let ay = op.apply(y);
    let dy = superpose(d, y);
    ay.values
        .iter()
        .zip(&dy.values)
        .zip(&w_omega)
        .zip(rhs)
        .map(|(((ay, dy), w), r)| ay + w * dy - r)
        .collect()
}

/// Semismooth Newton solve of the state equation.
///
/// The generalized Jacobian at the iterate `y` is `A + M_Ω diag(a)` with `a`
/// the nodewise branch slope, taking the configured [`KinkBranch`] inside the
/// kink band. Steps are damped by an Armijo backtracking line search on the
/// residual norm; on stagnation a monotone Picard sweep
/// `(A + λ M_Ω) y⁺ = M_Ω (u + λ y - d(y)) + M_Γ v` with `λ` the maximal
/// branch slope over the iterate range restores progress.
pub fn solve_state(
    op: &RobinOperator,
    d: &Pc1Function,
    u: &Field,
    v: &BoundaryField,
    cfg: &SolverConfig,
) -> Result<(Field, SolveReport)> {
    cfg.validate()?;
    let g = op.grid();
    let n = g.n_nodes();
    let w_omega = g.weights_omega();
    let rhs = assemble_rhs(op, u, v);
    let target = cfg.newton_tol * (1.0 + euclid_norm(&rhs));

    let mut y = Field::zeros(g.clone());
    let mut res = state_residual(op, d, &y, &rhs);
    let mut res_norm = euclid_norm(&res);
    let mut report = SolveReport {
        iterations: 0,
        final_residual: res_norm,
        converged: res_norm <= target,
        cg_solves: 0,
        cg_iterations: 0,
        picard_steps: 0,
    };
    if report.converged {
        report.final_residual = res_norm / (1.0 + euclid_norm(&rhs));
        return Ok((y, report));
    }

    let band_slope = |t: f64| match cfg.kink_branch {
        KinkBranch::Minus => d.d1.deriv(t),
        KinkBranch::Plus => d.d2.deriv(t),
    };

    let mut stagnation = 0usize;
    for it in 1..=cfg.newton_max_iter {
        report.iterations = it;

        let delta = cfg.kink_band_rel * y.range().max(1.0);
        let slopes = superpose_deriv_banded(d, &y, delta, band_slope);
        let aw: Vec<f64> = slopes.values.iter().zip(&w_omega).map(|(a, w)| a * w).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            op.matrix.apply(x, out);
            for i in 0..n {
                out[i] += aw[i] * x[i];
            }
        };
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let mut step = vec![0.0; n];
        let stats = conjugate_gradient(
            apply,
            &neg_res,
            &mut step,
            cfg.linear_tol,
            cfg.cg_max_iter(n),
        );
        report.cg_solves += 1;
        report.cg_iterations += stats.iterations;
        if !stats.converged {
            return Err(Error::LinearNonConvergence {
                residual: stats.residual,
                iterations: stats.iterations,
            });
        }

        // Armijo damping on the residual norm.
        let mut tau = 1.0;
        let mut accepted = false;
        for _ in 0..=cfg.armijo_max_backtracks {
            let trial = Field::new(
                g.clone(),
                y.values
                    .iter()
                    .zip(&step)
                    .map(|(y, s)| y + tau * s)
                    .collect(),
            )?;
            let trial_res = state_residual(op, d, &trial, &rhs);
            let trial_norm = euclid_norm(&trial_res);
            if trial_norm <= (1.0 - cfg.armijo_c * tau) * res_norm {
                y = trial;
                res = trial_res;
                if trial_norm > 0.9 * res_norm {
                    stagnation += 1;
                } else {
                    stagnation = 0;
                }
                res_norm = trial_norm;
                accepted = true;
                break;
            }
            tau *= cfg.armijo_backtrack;
        }

        if !accepted || stagnation >= 3 {
            // Monotone Picard fallback.
            stagnation = 0;
            let span = y.norm_max().max(u.norm_max()).max(v.norm_max()) + 1.0;
            let lambda = d.max_slope_on(-span, span).max(1e-8);
            let lam_field = Field::constant(g.clone(), lambda);
            for _ in 0..10 {
                let dy = superpose(d, &y);
                let f_pic = Field::new(
                    g.clone(),
                    u.values
                        .iter()
                        .zip(&y.values)
                        .zip(&dy.values)
                        .map(|((u, y), dy)| u + lambda * y - dy)
                        .collect(),
                )?;
                y = solve_linear(op, &lam_field, &f_pic, v, cfg)?;
                report.picard_steps += 1;
                res = state_residual(op, d, &y, &rhs);
                let new_norm = euclid_norm(&res);
                let done = new_norm <= target;
                res_norm = new_norm;
                if done {
                    break;
                }
            }
        }

        if res_norm <= target {
            report.converged = true;
            break;
        }
    }

    report.final_residual = res_norm / (1.0 + euclid_norm(&rhs));
    if !report.converged {
        return Err(Error::NonConvergence {
            residual: report.final_residual,
            iterations: report.iterations,
            report: Box::new(report),
        });
    }
    Ok((y, report))
}

/// Solve the nonsmooth linearized system for the directional derivative:
/// `A δ + M_Ω d'(y; δ) = M_Ω f + M_Γ h`, where `d'(y; δ)` picks the branch
/// slope nodewise by the sign of `δ` inside the kink band
/// `|y - t_bar| <= delta_level` and by the side of `y` outside it.
///
/// The system is piecewise linear in `δ`; semismooth Newton starting from
/// the configured kink-branch linearization terminates in a finite number of
/// sign sweeps.
pub fn solve_directional(
    op: &RobinOperator,
    d: &Pc1Function,
    y: &Field,
    f: &Field,
    h: &BoundaryField,
    delta_level: f64,
    cfg: &SolverConfig,
) -> Result<Field> {
    cfg.validate()?;
    let g = op.grid();
    let n = g.n_nodes();
    let w_omega = g.weights_omega();
    let rhs = assemble_rhs(op, f, h);
    let target = cfg.newton_tol * (1.0 + euclid_norm(&rhs));

    let band: Vec<bool> = y
        .values
        .iter()
        .map(|t| (t - d.t_bar).abs() <= delta_level)
        .collect();
    let s1: Vec<f64> = y.values.iter().map(|&t| d.d1.deriv(t)).collect();
    let s2: Vec<f64> = y.values.iter().map(|&t| d.d2.deriv(t)).collect();
    let off_slope: Vec<f64> = y
        .values
        .iter()
        .zip(&s1)
        .zip(&s2)
        .map(|((t, s1), s2)| if *t < d.t_bar { *s1 } else { *s2 })
        .collect();

    // slope field for a given direction iterate
    let slopes_for = |delta: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if band[i] {
                    if delta[i] < 0.0 {
                        s1[i]
                    } else if delta[i] > 0.0 {
                        s2[i]
                    } else {
                        match cfg.kink_branch {
                            KinkBranch::Minus => s1[i],
                            KinkBranch::Plus => s2[i],
                        }
                    }
                } else {
                    off_slope[i]
                }
            })
            .collect()
    };

    let residual = |delta: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        op.matrix.apply(delta, &mut out);
        for i in 0..n {
            let dd = if band[i] {
                // one-sided slope by the sign of the direction
                if delta[i] < 0.0 {
                    s1[i] * delta[i]
                } else {
                    s2[i] * delta[i]
                }
            } else {
                off_slope[i] * delta[i]
            };
            out[i] += w_omega[i] * dd - rhs[i];
        }
        out
    };

    let mut delta = vec![0.0; n];
    let mut res = residual(&delta);
    let mut res_norm = euclid_norm(&res);
    for _ in 0..cfg.newton_max_iter {
        if res_norm <= target {
            break;
        }
        let slopes = slopes_for(&delta);
        let aw: Vec<f64> = slopes.iter().zip(&w_omega).map(|(a, w)| a * w).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            op.matrix.apply(x, out);
            for i in 0..n {
                out[i] += aw[i] * x[i];
            }
        };
        let neg_res: Vec<f64> = res.iter().map(|r| -r).collect();
        let mut step = vec![0.0; n];
        let stats = conjugate_gradient(apply, &neg_res, &mut step, cfg.linear_tol, cfg.cg_max_iter(n));
        if !stats.converged {
            return Err(Error::LinearNonConvergence {
                residual: stats.residual,
                iterations: stats.iterations,
            });
        }
        let mut tau = 1.0;
        let mut improved = false;
        for _ in 0..=cfg.armijo_max_backtracks {
            let trial: Vec<f64> = delta
                .iter()
                .zip(&step)
                .map(|(d, s)| d + tau * s)
                .collect();
            let trial_res = residual(&trial);
            let trial_norm = euclid_norm(&trial_res);
            if trial_norm <= (1.0 - cfg.armijo_c * tau) * res_norm {
                delta = trial;
                res = trial_res;
                res_norm = trial_norm;
                improved = true;
                break;
            }
            tau *= cfg.armijo_backtrack;
        }
        if !improved {
            break;
        }
    }
    if res_norm > target {
        return Err(Error::NonConvergence {
            residual: res_norm / (1.0 + euclid_norm(&rhs)),
            iterations: cfg.newton_max_iter,
            report: Box::new(SolveReport {
                iterations: cfg.newton_max_iter,
                final_residual: res_norm,
                converged: false,
                cg_solves: 0,
                cg_iterations: 0,
                picard_steps: 0,
            }),
        });
    }
    Field::new(g.clone(), delta)
}

/// Euclidean norm of the discrete state residual of `y` for data `(u, v)`;
/// diagnostic used by tests.
pub fn state_residual_norm(
    op: &RobinOperator,
    d: &Pc1Function,
    y: &Field,
    u: &Field,
    v: &BoundaryField,
) -> f64 {
    let rhs = assemble_rhs(op, u, v);
    euclid_norm(&state_residual(op, d, y, &rhs))
}

/// Apply `(A + M_Ω diag(a))` to a field; diagnostic used by tests.
pub fn apply_reaction_system(op: &RobinOperator, a: &Field, z: &Field) -> Field {
    let w_omega = op.grid().weights_omega();
    let mut out = op.apply(z);
    for i in 0..out.values.len() {
        out.values[i] += a.values[i] * w_omega[i] * z.values[i];
    }
    out
}

/// The symmetrized right-hand side `M_Ω f + M_Γ h` as a field; diagnostic.
pub fn rhs_field(op: &RobinOperator, f: &Field, h: &BoundaryField) -> Field {
    Field::new(op.grid().clone(), assemble_rhs(op, f, h)).expect("finite rhs")
}
